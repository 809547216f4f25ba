"""Soccer event detection: VAE gate, event classifier, card fine-grain, temporal aggregation."""
