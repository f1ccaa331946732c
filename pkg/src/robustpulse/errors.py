"""Exception types raised across the package."""


class ConfigurationError(ValueError):
    """A model, filter or campaign configuration cannot be built."""


class InputError(ValueError):
    """An argument has the wrong shape, size or value range."""


class NumericalError(FloatingPointError):
    """A non-finite value appeared during propagation or differentiation."""

    def __init__(self, message, dump=None):
        super().__init__(message)
        self.dump = dump
