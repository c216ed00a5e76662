"""Self-supervised API-call annotation and tool-intercepting decoding."""

__version__ = "0.1.0"
