"""Exception hierarchy. Each class carries the CLI exit code it maps to."""


class RevBrowseError(Exception):
    exit_code = 4


class CorpusFormatError(RevBrowseError):
    pass


class SplitError(RevBrowseError):
    def __init__(self, user_id, length):
        super().__init__(
            f"user {user_id!r} has {length} events; leave-one-out needs at least 3"
        )
        self.user_id = user_id
        self.length = length


class RepairableParseError(RevBrowseError):
    """No JSON object could be located in a model response. Callers retry."""


class SchemaError(RevBrowseError):
    pass


class EmptyRecordError(RevBrowseError):
    """Both lists of an extracted record are empty; the record should be dropped."""


class ExtractionFailedError(RevBrowseError):
    exit_code = 3

    def __init__(self, message, last_response=None):
        super().__init__(message)
        self.last_response = last_response


class NetworkError(RevBrowseError):
    exit_code = 3

    def __init__(self, message, attempts=0, backoff_schedule=()):
        super().__init__(message)
        self.attempts = attempts
        self.backoff_schedule = tuple(backoff_schedule)


class CapabilityError(RevBrowseError):
    exit_code = 3


class DomainError(RevBrowseError, ValueError):
    pass


class TrainingError(RevBrowseError):
    def __init__(self, message, diagnostics=None):
        super().__init__(message)
        self.diagnostics = diagnostics or {}


class ArtifactFormatError(RevBrowseError):
    pass


class MissingArtifactError(RevBrowseError):
    exit_code = 2

    def __init__(self, path, producer):
        super().__init__(f"missing artifact {path}; run `revbrowse {producer}` first")
        self.path = path
        self.producer = producer


class StaleArtifactError(RevBrowseError):
    exit_code = 2

    def __init__(self, path, producer):
        super().__init__(
            f"artifact {path} was built with a different configuration; "
            f"rerun `revbrowse {producer}` or pass --force"
        )
        self.path = path
        self.producer = producer


class ConfigError(RevBrowseError):
    exit_code = 1
