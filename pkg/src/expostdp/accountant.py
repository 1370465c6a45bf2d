"""Ex-post privacy loss records and closed-form accounting.

Two closed forms are supported: the noise-reduction pipelines pay
eps_test + eps_k when they stop at grid level k (infinite loss when no level
is accepted), and the doubling baseline pays
2*k*delta*ln(T/gamma)/alpha + (2**k - 1)*eps_1 when it halts at step k.
All logarithms are natural.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .laplace import PrivacyGrid

__all__ = [
    "ExPostRecord",
    "DoublingSchedule",
    "expost_loss",
    "doubling_loss",
    "doubling_record",
    "doubling_rate_overhead",
]


def _risk_factor(eps_total: float) -> float:
    if math.isinf(eps_total):
        return math.inf
    try:
        return math.exp(eps_total)
    except OverflowError:
        return math.inf


@dataclass(frozen=True)
class ExPostRecord:
    """Realized privacy loss of one run.

    ``stop_index`` is the accepted level (1-based) or ``None`` when the run
    exhausted its ladder without accepting; in that case the generation loss
    and the total are infinite.  ``risk_factor`` is exp(eps_total).
    """

    stop_index: int | None
    eps_test: float
    eps_generate: float
    eps_total: float
    risk_factor: float

    @property
    def bottom(self) -> bool:
        return self.stop_index is None


def expost_loss(stop_index: int | None, eps_test: float, grid: PrivacyGrid) -> ExPostRecord:
    """Ex-post record for a noise-reduction run stopping at ``stop_index``.

    The generation loss is the grid level at the stopping index, or infinity
    when ``stop_index`` is ``None`` (no level accepted).
    """
    if not (math.isfinite(eps_test) and eps_test >= 0):
        raise ValueError(f"eps_test must be a nonnegative real, got {eps_test}")
    if stop_index is None:
        return ExPostRecord(None, eps_test, math.inf, math.inf, math.inf)
    if not 1 <= stop_index <= len(grid):
        raise ValueError(f"stop_index {stop_index} outside [1..{len(grid)}]")
    eps_generate = grid[stop_index - 1]
    eps_total = eps_test + eps_generate
    return ExPostRecord(int(stop_index), eps_test, eps_generate, eps_total, _risk_factor(eps_total))


def doubling_loss(k: int, delta: float, T: int, gamma: float, alpha: float, eps_start: float) -> float:
    """Ex-post loss of a doubling run halting at step ``k`` of ``T``.

    ``k == T + 1`` is the exhaustion fallback and costs infinity; indices
    outside [1..T+1] are rejected.
    """
    if T < 1:
        raise ValueError(f"number of steps must be >= 1, got {T}")
    if not 0 < gamma < 1:
        raise ValueError(f"gamma must lie in (0, 1), got {gamma}")
    if not alpha > 0:
        raise ValueError(f"alpha must be positive, got {alpha}")
    if delta < 0 or eps_start < 0:
        raise ValueError("delta and eps_start must be nonnegative")
    if not 1 <= k <= T + 1:
        raise ValueError(f"halt index {k} outside [1..{T + 1}]")
    if k == T + 1:
        return math.inf
    return 2.0 * k * delta * math.log(T / gamma) / alpha + (2.0**k - 1.0) * eps_start


@dataclass(frozen=True)
class DoublingSchedule:
    """Geometric privacy schedule eps_k = eps_start * factor**(k-1), k = 1..steps."""

    eps_start: float
    steps: int
    factor: float = 2.0

    def __post_init__(self):
        if not (math.isfinite(self.eps_start) and self.eps_start > 0):
            raise ValueError(f"eps_start must be positive, got {self.eps_start}")
        if self.steps < 1:
            raise ValueError(f"steps must be >= 1, got {self.steps}")
        if not self.factor > 1:
            raise ValueError(f"factor must exceed 1, got {self.factor}")

    def epsilon_at(self, k: int) -> float:
        if not 1 <= k <= self.steps:
            raise ValueError(f"step {k} outside [1..{self.steps}]")
        return self.eps_start * self.factor ** (k - 1)

    def generation_loss(self, k: int) -> float:
        """Sum of the first k levels; equals (2**k - 1) * eps_start at factor 2."""
        if not 1 <= k <= self.steps:
            raise ValueError(f"step {k} outside [1..{self.steps}]")
        if self.factor == 2.0:
            return (2.0**k - 1.0) * self.eps_start
        return self.eps_start * (self.factor**k - 1.0) / (self.factor - 1.0)


def doubling_record(
    stop_index: int,
    delta: float,
    schedule: DoublingSchedule,
    gamma: float,
    alpha: float,
) -> ExPostRecord:
    """Ex-post record for a doubling run; ``stop_index == steps + 1`` means exhaustion."""
    T = schedule.steps
    per_test = 2.0 * delta * math.log(T / gamma) / alpha
    if stop_index == T + 1:
        return ExPostRecord(None, per_test * T, math.inf, math.inf, math.inf)
    if not 1 <= stop_index <= T:
        raise ValueError(f"halt index {stop_index} outside [1..{T + 1}]")
    eps_test = 2.0 * stop_index * delta * math.log(T / gamma) / alpha
    eps_generate = schedule.generation_loss(stop_index)
    eps_total = eps_test + eps_generate
    return ExPostRecord(int(stop_index), eps_test, eps_generate, eps_total, _risk_factor(eps_total))


def doubling_rate_overhead(r: float) -> float:
    """Worst-case multiplicative overhead 1/(r*(1-r)) of a 1/r-geometric search.

    Minimized at r = 0.5 (factor 2), where the overhead is exactly 4.
    """
    if not 0 < r < 1:
        raise ValueError(f"rate must lie in (0, 1), got {r}")
    return 1.0 / (r * (1.0 - r))
