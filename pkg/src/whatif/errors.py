"""Exception hierarchy shared across the library.

Each kind maps to one CLI exit code: ConfigError -> 2, data/eligibility
errors -> 3, environment errors -> 4.
"""


class WhatifError(Exception):
    """Base class for all library errors."""


class ConfigError(WhatifError):
    """Invalid configuration value or unreadable config file."""


class SimulationError(WhatifError):
    """Simulation misuse, e.g. stepping a terminal state."""


class InvalidFoilError(WhatifError):
    """Requested counterfactual action equals the factual action."""


class IneligibleOriginError(WhatifError):
    """Origin state has too few remaining trace steps for a k-step pair."""


class ConsistencyError(WhatifError):
    """Artifacts produced by different agents/runs were mixed."""


class CheckpointError(WhatifError):
    """Base class for agent checkpoint problems."""


class CheckpointNotFoundError(CheckpointError):
    """Checkpoint file does not exist."""


class MalformedCheckpointError(CheckpointError):
    """Checkpoint file exists but cannot be parsed or fails validation."""


class CheckpointVersionError(CheckpointError):
    """Checkpoint was written by an incompatible format version."""
