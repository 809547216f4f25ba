"""Core utilities (settings, logging, metrics)."""
