"""Exception hierarchy shared by every rank_anneal module."""


class RankAnnealError(Exception):
    """Base class for all errors raised by rank_anneal."""

    exit_code = 1


class ConfigError(RankAnnealError):
    """Invalid configuration value or combination of values."""

    exit_code = 1


class DataError(RankAnnealError):
    """Ranking data could not be read or is inconsistent."""

    exit_code = 2


class LetorFormatError(DataError):
    """A LETOR/SVMLight line could not be parsed."""

    def __init__(self, message: str, line_no: int, source: str | None = None):
        location = f"{source}: line {line_no}" if source else f"line {line_no}"
        super().__init__(f"{location}: {message}")
        self.detail = message
        self.line_no = line_no
        self.source = source


class SubsetError(ConfigError, ValueError):
    """A feature subset violates its size or shape preconditions."""


class ScheduleError(ConfigError, ValueError):
    """A cooling schedule was asked for a temperature outside its domain."""


class EvaluationError(RankAnnealError):
    """The evaluator cannot score the requested subset."""
