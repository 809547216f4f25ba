"""Evaluation slice (metrics, confusion matrices, threshold sweeps, reports)."""
