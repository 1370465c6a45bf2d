"""Interactive above-threshold testing with ex-post privacy accounting.

The runner consumes a *lazily produced* stream of query values on the
private dataset, each with L1 sensitivity at most ``delta``.  A single noisy
threshold is drawn up front; every query gets fresh noise, and the run halts
at the first query whose noisy value meets the noisy threshold.  Queries are
pulled strictly on demand and never past the halt point -- when the stream
itself is prefix-private, halting at index t costs eps_a + eps_t ex-post.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Iterator

from .laplace import RandomSource, sample_laplace

__all__ = ["IatConfig", "IatResult", "run_iat", "iat_epsilon_for"]


@dataclass(frozen=True)
class IatConfig:
    """Parameters of one above-threshold run.

    ``eps_a`` is the privacy loss of the testing phase, ``threshold`` the
    target value, ``delta`` the query sensitivity, ``max_queries`` the cap
    on stream length, and ``gamma`` the failure probability used by the
    accuracy calibration.
    """

    eps_a: float
    threshold: float
    delta: float
    max_queries: int
    gamma: float = 0.1

    def __post_init__(self):
        if not (math.isfinite(self.eps_a) and self.eps_a > 0):
            raise ValueError(f"eps_a must be positive, got {self.eps_a}")
        if not (math.isfinite(self.delta) and self.delta > 0):
            raise ValueError(f"delta must be positive, got {self.delta}")
        if self.max_queries < 0:
            raise ValueError(f"max_queries must be >= 0, got {self.max_queries}")
        if not 0 < self.gamma < 1:
            raise ValueError(f"gamma must lie in (0, 1), got {self.gamma}")


@dataclass(frozen=True)
class IatResult:
    """Stopping report: 1-based halt index and the raw halted query value.

    ``halted`` is False when the stream was exhausted (or empty); then
    ``stop_index`` is the number of queries actually pulled and ``value`` is
    None.  The caller owns the mapping from index back to its object.
    """

    stop_index: int
    halted: bool
    value: float | None = None


def run_iat(config: IatConfig, queries: Iterable[float], rng: RandomSource) -> IatResult:
    """Run above-threshold over a lazy query stream.

    The noisy threshold W + Lap(2 delta / eps_a) is drawn exactly once;
    each pulled query value gets fresh Lap(4 delta / eps_a) noise.  At most
    ``max_queries`` values are pulled, and none past the halt point.
    """
    noisy_threshold = config.threshold + sample_laplace(2.0 * config.delta / config.eps_a, rng)
    stream: Iterator[float] = iter(queries)
    pulled = 0
    for t in range(1, config.max_queries + 1):
        try:
            value = float(next(stream))
        except StopIteration:
            break
        pulled = t
        if value + sample_laplace(4.0 * config.delta / config.eps_a, rng) >= noisy_threshold:
            return IatResult(stop_index=t, halted=True, value=value)
    return IatResult(stop_index=pulled, halted=False, value=None)


def iat_epsilon_for(delta: float, T: int, gamma: float, alpha: float) -> float:
    """Testing-phase privacy loss that makes the run (alpha/2, gamma)-accurate.

    Returns 16 * delta * ln(2 T / gamma) / alpha: at this loss, with
    probability 1 - gamma the run only halts on queries within alpha/2 of
    the threshold.
    """
    if not (math.isfinite(delta) and delta >= 0):
        raise ValueError(f"delta must be a nonnegative real, got {delta}")
    if T < 1:
        raise ValueError(f"T must be >= 1, got {T}")
    if not 0 < gamma < 1:
        raise ValueError(f"gamma must lie in (0, 1), got {gamma}")
    if not alpha > 0:
        raise ValueError(f"alpha must be positive, got {alpha}")
    return 16.0 * delta * math.log(2.0 * T / gamma) / alpha
