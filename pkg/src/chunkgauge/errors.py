"""Exception hierarchy.

Each family carries the process exit code the command line maps it to.
"""


class ChunkGaugeError(Exception):
    exit_code = 1


class ConfigError(ChunkGaugeError, ValueError):
    """Invalid configuration, chunker parameters or short names."""

    exit_code = 2


class DataError(ChunkGaugeError, ValueError):
    """Malformed or inconsistent input data."""

    exit_code = 3


class IntegrityError(DataError):
    """Vectors or ids violate a store invariant (dimension, duplicates)."""


class DecodeError(DataError):
    """Token ids that the tokenizer cannot map back to text."""


class ProviderError(ChunkGaugeError, RuntimeError):
    """An embedding or LLM service failed or could not be reached."""

    exit_code = 4


class ChunkingWarning(UserWarning):
    """A chunker fell back to a simpler strategy."""
