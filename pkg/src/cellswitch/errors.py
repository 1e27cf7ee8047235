"""Exception types shared across the package."""


class NotFittedError(RuntimeError):
    """Raised when a prediction path needs normalization stats or trained
    parameters that have not been provided."""


class EpisodeFinished(RuntimeError):
    """Raised when a simulation or controller is stepped past the last
    step of the daily horizon."""


class MissingArtifact(RuntimeError):
    """Raised by harness commands when a required upstream artifact
    (scenario file, trace corpus, model, table) is absent or unreadable."""


class ConfigError(ValueError):
    """Raised when an experiment configuration fails validation."""
