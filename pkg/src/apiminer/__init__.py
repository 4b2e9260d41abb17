"""Black-box API endpoint discovery from HTTP traffic captures."""

__version__ = "0.1.0"
