"""Exception types shared across the package."""


class AmexError(Exception):
    """Base class for all errors raised by this package."""


class InvariantViolation(AmexError):
    """Internal bookkeeping reached a state that should be impossible."""


class PreconditionViolation(AmexError, ValueError):
    """An operation was called on an input outside its domain."""


class RewardSignViolation(AmexError):
    """A non-terminal state produced a negative reward.

    Transposition handling assumes every non-terminal reward is >= 0.
    """

    def __init__(self, state, reward):
        super().__init__(f"non-terminal state {state!r} has negative reward {reward}")
        self.state = state
        self.reward = reward


class EnvError(AmexError):
    """The environment failed while computing actions, transitions or rewards."""


class BudgetExceeded(AmexError):
    """An exhaustive enumeration grew beyond its allowed size."""


class RuleMismatch(AmexError, ValueError):
    """A grammar rule was applied to a nonterminal it does not rewrite."""


class DomainError(AmexError, ArithmeticError):
    """An expression produced a non-finite value on the data."""


class MalformedExpression(AmexError, ValueError):
    """A prefix expression does not parse under the operator arities."""
