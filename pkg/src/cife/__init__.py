"""Evolutionary classifier selection and fusion (CIF-E protocol)."""

__version__ = "0.1.0"
