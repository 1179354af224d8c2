"""Causal debugging of non-functional faults in configurable systems."""

__version__ = "0.1.0"
