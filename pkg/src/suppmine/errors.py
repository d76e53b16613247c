"""Shared exception base for the package."""


class SuppmineError(Exception):
    """Base class for every error this package raises on bad data or misuse."""
