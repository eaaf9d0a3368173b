"""Exception hierarchy shared across the pipeline."""


class PipelineError(Exception):
    """Base class for all errors raised by this package."""


class ParseError(PipelineError):
    """Input file could not be decoded (bad syntax, wrong field count, ...)."""


class ValidationError(PipelineError):
    """Input decoded fine but violates a contract (bad value, bad shape, ...)."""


class ConfigError(PipelineError):
    """Pipeline configuration is missing, malformed, or inconsistent."""


class MissingArtifactError(PipelineError):
    """A stage's upstream artifact does not exist yet."""

    def __init__(self, path, stage: str):
        self.path = path
        self.stage = stage
        super().__init__(
            f"missing artifact {path}: run the '{stage}' stage first"
        )


class TrainingDiverged(PipelineError):
    """Optimization produced non-finite loss."""
