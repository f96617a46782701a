"""Quantify dataset asynchrony across one-vs-all classifiers and measure its accuracy cost."""

__version__ = "0.1.0"
