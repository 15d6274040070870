"""Exception types shared across the package."""


class CorpusFormatError(ValueError):
    """A dataset file could not be parsed. Carries the 1-based line number."""

    def __init__(self, message: str, line: int | None = None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line


class CorpusValidationError(ValueError):
    """A parsed row violates the corpus contract (label range, empty text)."""

    def __init__(self, message: str, line: int | None = None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line


class EmbeddingFormatError(ValueError):
    """An embedding file line does not match the declared dimensionality."""

    def __init__(self, message: str, line: int | None = None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line


class NonFiniteError(FloatingPointError):
    """A tensor value or gradient became NaN or infinite."""


class TrainingDiverged(RuntimeError):
    """Training produced a non-finite loss; carries epoch and batch index."""

    def __init__(self, epoch: int, batch: int, message: str = ""):
        detail = f"training diverged at epoch {epoch}, batch {batch}"
        if message:
            detail = f"{detail}: {message}"
        super().__init__(detail)
        self.epoch = epoch
        self.batch = batch


class StageDependencyError(RuntimeError):
    """A pipeline stage was requested before its upstream stage completed."""

    def __init__(self, stage: str, missing: str):
        super().__init__(
            f"stage '{stage}' requires stage '{missing}' to be completed first"
        )
        self.stage = stage
        self.missing = missing


class AnnotationValidationError(ValueError):
    """A keyword submission violates the annotation contract."""


class DuplicateSubmissionError(RuntimeError):
    """The task was already completed by an earlier submission."""


class ServiceStateError(RuntimeError):
    """The annotation service was used before being initialized."""
