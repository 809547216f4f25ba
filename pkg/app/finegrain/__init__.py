"""Yellow/red card fine-grain slice (multi-excitation attention + metric constraint)."""
