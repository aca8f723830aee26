"""Exception hierarchy shared by the pipeline and the CLI."""


class SacError(Exception):
    """Base class; `exit_code` is what the CLI returns when this escapes."""

    exit_code = 2


class ConfigError(SacError):
    exit_code = 1


class ValidationError(SacError):
    exit_code = 1


class CorpusError(SacError):
    pass


class BackendError(SacError):
    """Transport or protocol failure talking to a remote model service."""


class SummarizationError(SacError):
    def __init__(self, doc_id: str, message: str):
        super().__init__(f"{doc_id}: {message}")
        self.doc_id = doc_id


class IndexFormatError(SacError):
    pass


class StaleArtifactError(SacError):
    exit_code = 1
