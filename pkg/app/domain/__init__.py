"""Domain layer (domain errors)."""
