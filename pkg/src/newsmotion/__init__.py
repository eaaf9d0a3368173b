"""News-driven next-day stock movement prediction pipeline."""

__version__ = "0.1.0"
