"""Synthetic dataset slice (procedural classes, manifests, planted matches)."""
