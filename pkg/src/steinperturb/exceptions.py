class InputError(ValueError):
    """Raised for invalid user-supplied arguments, files, or configuration."""
