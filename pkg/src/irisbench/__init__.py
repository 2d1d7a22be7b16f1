"""Iris obfuscation methods and a privacy/utility benchmark on synthetic eyes."""

__version__ = "0.1.0"
