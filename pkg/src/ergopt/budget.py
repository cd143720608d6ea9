"""Enumeration budget guard.

Every operation that enumerates words, cylinders or table entries checks its
exact count against the budget *before* allocating anything.  The cap is
10^7 entries by default and can be overridden with the ERGOPT_BUDGET
environment variable.
"""

import os

DEFAULT_BUDGET = 10_000_000


class BudgetError(RuntimeError):
    """An enumeration would exceed the configured entry budget."""


def current_budget() -> int:
    raw = os.environ.get("ERGOPT_BUDGET", "")
    if raw:
        try:
            return int(raw)
        except ValueError:
            raise BudgetError(f"ERGOPT_BUDGET is not an integer: {raw!r}")
    return DEFAULT_BUDGET


def check_budget(count: int, what: str) -> int:
    """Return `count` if it fits in the budget, raise BudgetError otherwise."""
    cap = current_budget()
    if count > cap:
        raise BudgetError(f"{what}: {count} entries exceed budget {cap}")
    return count
