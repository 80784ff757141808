"""Exception hierarchy shared across the pipeline."""


class CrowdNotesError(Exception):
    """Base class for all library errors."""


class MalformedUrl(CrowdNotesError):
    pass


class UnknownStatus(CrowdNotesError):
    pass


class CassetteMiss(CrowdNotesError):
    """Replay mode found no recorded response for a request key."""

    def __init__(self, key: str):
        super().__init__(f"no cassette entry for key {key}")
        self.key = key


class ProviderError(CrowdNotesError):
    """A live provider call failed after bounded retries."""


class ParseError(CrowdNotesError):
    """A provider response could not be deserialized."""


class EmptyAfterClean(CrowdNotesError):
    """Document cleaning left no body text."""


class AllSourcesFailed(CrowdNotesError):
    """No evidence URL yielded a usable chunk."""


class DegenerateQueries(CrowdNotesError):
    """Query generation produced nothing usable and the post text is empty."""


class EmptyPool(CrowdNotesError):
    """All searches returned zero results."""


class BudgetExhausted(CrowdNotesError):
    """URL attachment costs leave no room for note text."""


class EmptyGeneration(CrowdNotesError):
    """The note generator returned a blank reply."""


class UnparseableDecision(CrowdNotesError):
    """A judge reply carries no recognizable final decision."""


class SchemaError(CrowdNotesError):
    """A dataset record violates the line schema."""


class EmptyDataset(CrowdNotesError):
    pass


class EmptyInput(CrowdNotesError):
    pass


class ConfigError(CrowdNotesError):
    """CLI/runtime configuration is invalid; message is user-facing."""


class IoError(CrowdNotesError):
    pass
