"""Exception hierarchy shared by all ctrtok modules."""


class CtrError(Exception):
    """Base class for ctrtok errors."""


class ConfigError(CtrError, ValueError):
    """A parameter or configuration value is out of range."""


class DataError(CtrError, ValueError):
    """Input data is malformed or inconsistent with the models."""


class UnknownSymbolError(DataError):
    """A sequence contains a symbol outside the model alphabet."""

    def __init__(self, symbol, position=None):
        self.symbol = symbol
        self.position = position
        where = "" if position is None else f" at position {position}"
        super().__init__(f"symbol {symbol!r}{where} is not in the alphabet")


class TrainingError(CtrError):
    """Baum-Welch could not make progress (e.g. every sequence is impossible)."""
