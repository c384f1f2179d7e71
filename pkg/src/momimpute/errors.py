"""Exception hierarchy shared across the package."""


class MIError(Exception):
    """Base class for all errors raised by momimpute."""


class RankDeficient(MIError):
    pass


class InsufficientRespondents(MIError):
    pass


class InsufficientImputations(MIError):
    pass


class DegenerateSample(MIError):
    pass


class DegenerateVariance(MIError):
    pass


class ConfigError(MIError):
    """Invalid or incomplete study configuration.

    ``key`` names the offending entry (for example ``"model"`` or
    ``"study.n"``) so command-line tools can report it.
    """

    def __init__(self, key, message=None):
        self.key = key
        super().__init__(message or f"invalid or missing config entry: {key!r}")


class SchemaError(MIError):
    """A dataset file does not match the expected column layout."""
