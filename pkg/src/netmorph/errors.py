"""Exception hierarchy shared by all netmorph modules."""


class NetmorphError(Exception):
    """Base class for every error raised by netmorph."""


class InputError(NetmorphError, ValueError):
    """Malformed or out-of-contract argument (bad dimension, B <= 0, ...)."""


class NetworkParseError(NetmorphError, ValueError):
    """A network / cover / rule document failed validation.

    ``location`` is a slash-separated path into the document.
    """

    def __init__(self, message, location=""):
        self.location = location
        super().__init__(f"{location or '<root>'}: {message}")


class UnsupportedNetworkError(NetmorphError):
    """The operation does not handle this activation kind or input dimension."""


class DegenerateSimplexError(NetmorphError, ValueError):
    pass


class DegeneratePieceError(NetmorphError, ValueError):
    """Adjacent PWL slopes coincide; merge the pieces first."""


class InfeasibleParametersError(NetmorphError):
    """The requested error budget needs a mu above the overflow cap."""

    def __init__(self, message, min_delta=None):
        self.min_delta = min_delta
        super().__init__(message)
