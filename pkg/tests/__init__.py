"""pytest collection."""
