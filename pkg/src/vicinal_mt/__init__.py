"""Vicinal-sample data augmentation and back-translation for low-resource machine translation."""

__version__ = "0.1.0"
