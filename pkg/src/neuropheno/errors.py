"""Exception hierarchy shared across the pipeline.

Every error carries a short machine-parsable ``code`` so the CLI can emit
``ERROR <code>: <detail>`` lines, and an ``exit_code`` (1 for validation
problems, 2 for runtime failures).
"""


class PhenoError(Exception):
    """Base class for pipeline errors. Runtime failure by default."""

    code = "runtime"
    exit_code = 2


class ValidationError(PhenoError):
    """Bad input: schema violations, invalid parameters, contract misuse."""

    code = "schema"
    exit_code = 1


class ConfigurationError(ValidationError):
    """Missing or inconsistent configuration (columns, env vars, flags)."""

    code = "config"


class IngestionError(ValidationError):
    """Corpus-level data problem, e.g. duplicate note identifiers."""

    code = "data"


class SchemaError(ValidationError):
    """A persisted file does not match its documented schema."""

    code = "schema"


class OutOfVocabularyError(ValidationError):
    """A token was requested that the embedding vocabulary does not hold."""

    code = "vocab"


class ResponseFormatError(ValidationError):
    """An LLM response does not follow the expected per-label line grammar."""

    code = "parse"


class TransportError(PhenoError):
    """HTTP transport gave up: retries exhausted or fatal status."""

    code = "transport"


class ProtocolError(PhenoError):
    """The HTTP envelope was not a well-formed chat-completion response."""

    code = "protocol"
