"""Text-to-SQL parsing over a hybrid question/schema sequence with value anchors."""

__version__ = "0.1.0"
