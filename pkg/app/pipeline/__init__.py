"""Detection pipeline slice (cascade, window vote, dedup, frame ingestion)."""
