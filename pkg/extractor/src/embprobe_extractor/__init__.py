"""Audio-to-embedding extraction feeding the embprobe corpus format."""

__version__ = "0.1.0"
