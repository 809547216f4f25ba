"""Minimal tensor/layer library with reverse-mode gradients."""
