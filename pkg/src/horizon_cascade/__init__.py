"""Early onset prediction with temporal trend features and cascaded horizon models."""

__version__ = "0.1.0"
