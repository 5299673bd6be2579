"""Monte Carlo tree search that never re-enters fully explored subtrees."""
from .errors import (
    AmexError,
    BudgetExceeded,
    InvariantViolation,
    PreconditionViolation,
    RewardSignViolation,
)
from .harness import brute_force_values, run_episode, sweep
from .search import Policy, SearchConfig, SearchResult, SearchStats, Status, Variant, run_search, search

__all__ = [
    "AmexError",
    "BudgetExceeded",
    "InvariantViolation",
    "Policy",
    "PreconditionViolation",
    "RewardSignViolation",
    "SearchConfig",
    "SearchResult",
    "SearchStats",
    "Status",
    "Variant",
    "brute_force_values",
    "run_episode",
    "run_search",
    "search",
    "sweep",
]
