"""Transfer learning for entity resolution over embedding-based similarity vectors."""

__version__ = "0.1.0"
