"""FastAPI service wrapping the txbeam pipeline."""
