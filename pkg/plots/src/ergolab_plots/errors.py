class PlotsError(Exception):
    """Base class for rendering failures."""


class SchemaMismatch(PlotsError):
    """The CSV is not the kind of table the requested plot consumes."""


class EmptyInput(PlotsError):
    """The CSV has a valid header but no data rows."""
