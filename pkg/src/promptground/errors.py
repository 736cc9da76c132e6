"""Exception taxonomy shared across the pipeline."""


class PipelineError(Exception):
    """Base class for every error raised by this package."""


# --- schema ingestion ---


class NotAnHdf5Container(PipelineError):
    pass


class CorruptFile(PipelineError):
    pass


class ManifestError(PipelineError):
    """Schema manifest did not parse; message carries field diagnostics."""


class InvariantViolation(PipelineError):
    pass


# --- disambiguation ---


class EmptyPrompt(PipelineError):
    pass


class EmptySchema(PipelineError):
    pass


# --- retrieval ---


class EmptyIndex(PipelineError):
    pass


class DimensionMismatch(PipelineError):
    pass


class ZeroVector(PipelineError):
    pass


class EmbedderUnavailable(PipelineError):
    pass


# --- model gateway ---


class GatewayError(PipelineError):
    """Base for model-server failures."""


class GatewayConnectionError(GatewayError):
    """Server unreachable (connection refused / dropped)."""


class ModelNotFound(GatewayError):
    pass


class GatewayTimeout(GatewayError):
    pass


class EmptyReply(PipelineError):
    pass


class EmptyText(PipelineError):
    pass


# --- bench harness ---


class SuiteError(PipelineError):
    pass


class MissingDataFile(SuiteError):
    def __init__(self, task_id: str, path: str):
        super().__init__(f"task {task_id!r}: data file not found: {path}")
        self.task_id = task_id
        self.path = path
