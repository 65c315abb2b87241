"""Exception hierarchy. Every domain failure derives from CorrelateError."""


class CorrelateError(ValueError):
    """Base class for data or domain errors (CLI exit code 1)."""


class OffGridDateError(CorrelateError):
    pass


class GridMismatchError(CorrelateError):
    pass


class EmptyOverlapError(CorrelateError):
    pass


class ZeroVarianceError(CorrelateError):
    pass


class ParseError(CorrelateError):
    """Malformed input file; message carries path and 1-based row number."""

    def __init__(self, message, path=None, row=None):
        self.path = path
        self.row = row
        where = ""
        if path is not None:
            where = f"{path}"
            if row is not None:
                where += f":{row}"
            where += ": "
        super().__init__(where + message)


class IndexFormatError(CorrelateError):
    pass


class UnknownQueryError(CorrelateError):
    pass
