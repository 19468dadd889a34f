"""Exception types shared across the package."""


class InvalidInputError(ValueError):
    """An argument violates an operation's precondition."""


class InsufficientDataError(ValueError):
    """An estimator was given too little history to produce a value."""


class ConfigurationError(ValueError):
    """A simulation or experiment was configured inconsistently."""


class NoFixedPointError(RuntimeError):
    """Bracket expansion failed while searching for a fixed point."""


class RunError(RuntimeError):
    """A simulation step failed; ``index`` is the round/episode where it happened."""

    def __init__(self, message, index):
        super().__init__(f"{message} (at index {index})")
        self.index = index
