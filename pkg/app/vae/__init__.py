"""VAE no-highlight gate slice (model, training, gating, calibration)."""
