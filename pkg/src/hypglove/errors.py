class FormatError(ValueError):
    """Malformed input file; the message carries the byte offset or line."""


class ModelMismatchError(FormatError):
    """A model file header disagrees with the requested configuration."""
