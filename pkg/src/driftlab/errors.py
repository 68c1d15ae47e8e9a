"""Error types shared by the file-format readers and validators."""


class FormatError(ValueError):
    """A binary file or dataset directory does not match its declared format."""


class DataError(ValueError):
    """A file parsed fine but carries values that violate a data invariant."""
