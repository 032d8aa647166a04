"""Exception types raised across the package."""

from __future__ import annotations


class FlowParseError(ValueError):
    """A flow CSV line could not be parsed."""

    def __init__(self, line: int, message: str):
        self.line = line
        super().__init__(f"line {line}: {message}")


class OutsideTelescopeError(ValueError):
    """One or more flows target an address outside the telescope prefix."""

    def __init__(self, addresses: list[str], lines: list[int], telescope: str):
        self.addresses = addresses
        self.lines = lines
        shown = ", ".join(f"{a} (line {n})" for a, n in zip(addresses[:10], lines[:10]))
        more = f" and {len(addresses) - 10} more" if len(addresses) > 10 else ""
        super().__init__(f"destination outside telescope {telescope}: {shown}{more}")


class DegenerateInputError(ValueError):
    """Input has no variation (or no mass) where the computation needs some."""


class FitFailure(RuntimeError):
    """Numerical fit did not converge or violated its constraints.

    ``best`` carries whatever partial result was available.
    """

    def __init__(self, message: str, best=None):
        self.best = best
        super().__init__(message)


class BudgetExceeded(ValueError):
    """Requested enumeration is larger than the configured budget."""
