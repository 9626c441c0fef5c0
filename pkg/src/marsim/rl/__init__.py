"""Episode interface and trainer wire protocol for learning-based control."""
