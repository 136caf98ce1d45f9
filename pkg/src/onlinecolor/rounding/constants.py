"""The rounding constant ``c`` and the quantities derived from it."""
from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

C_LOW = 0.027
C_HIGH = 0.03


class ConstantError(RuntimeError):
    pass


def slack(c: float) -> float:
    """Left-hand side of the defining inequality for ``c`` (must be >= 0)."""
    hm = 0.5 - c
    return hm * (1 - 4 * c) * (hm - 6 * c / hm) - 2 * c


def side_conditions(c: float) -> float:
    """``min{1/2 - c, 1 - 4c, 1 - 6c/(1/2 - c)^2}``, also required >= 0."""
    hm = 0.5 - c
    return min(hm, 1 - 4 * c, 1 - 6 * c / hm ** 2)


@dataclass(frozen=True)
class ConstantC:
    c: float

    @property
    def half_plus_c(self) -> float:
        return 0.5 + self.c

    @property
    def half_minus_c(self) -> float:
        return 0.5 - self.c

    @property
    def low_degree_threshold(self) -> float:
        """Fractional degree at or below which a vertex counts as low degree."""
        return (0.5 - self.c) / (0.5 + self.c)

    @property
    def alpha(self) -> float:
        """Coloring ratio obtained from matching each edge w.p. (1/2+c)/Delta."""
        return 1.0 / (0.5 + self.c)


def solve_c(tolerance: float = 1e-12) -> ConstantC:
    """Largest ``c < 0.03`` with ``slack(c) >= 0``, by bisection on [0.027, 0.03].

    The returned point is the lower end of the final bracket, so ``slack`` is
    non-negative there.
    """
    if not tolerance > 0:
        raise ValueError("tolerance must be positive")
    lo, hi = C_LOW, C_HIGH
    if slack(lo) < 0:
        raise ConstantError(f"slack({lo}) = {slack(lo)} < 0")
    if slack(hi) >= 0:
        raise ConstantError("no sign change on the bracket")
    while hi - lo > tolerance:
        mid = 0.5 * (lo + hi)
        if slack(mid) >= 0:
            lo = mid
        else:
            hi = mid
    if side_conditions(lo) < 0:
        raise ConstantError(f"side conditions fail at c={lo}")
    return ConstantC(lo)


@lru_cache(maxsize=None)
def default_constants() -> ConstantC:
    return solve_c(1e-12)
