"""Language-guided graph video summarization."""

__version__ = "0.1.0"
