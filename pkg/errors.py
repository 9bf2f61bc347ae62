class PolicyTestingError(Exception):
    """Base class for all errors raised by the testing framework."""


class RejectedInputError(PolicyTestingError):
    """A solution input does not fit the environment's input space."""


class ContractViolationError(PolicyTestingError):
    """A policy or caller broke the episode contract (bad action, step after terminal)."""


class ParameterError(PolicyTestingError):
    """A numeric parameter is outside its allowed range."""


class ConfigError(PolicyTestingError):
    """Invalid configuration, unknown registry name or unreadable data file."""


class TrainingFailureError(PolicyTestingError):
    """Policy training could not reach its quality gate."""


class InsufficientDataError(PolicyTestingError):
    """Not enough points to compute a metric."""


class CampaignFailureError(PolicyTestingError):
    """A campaign of an experiment failed; completed logs are kept."""

    def __init__(self, message: str, run_dir=None):
        super().__init__(message)
        self.run_dir = run_dir
