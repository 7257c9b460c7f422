"""Chart question answering benchmark construction and evaluation toolkit."""

__version__ = "0.1.0"
