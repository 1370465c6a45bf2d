"""Seedable Laplace sampling and the correlated noise-reduction chain.

The noise-reduction chain releases a private vector at a ladder of privacy
levels eps_1 < ... < eps_T.  It is built backward: the least private value
v_T = v + Lap(delta/eps_T) is drawn first, and each earlier (more private)
value is either an exact copy of its successor, with probability
(eps_t / eps_{t+1})**2, or the successor plus fresh Laplace noise at scale
delta/eps_t.  With that coin probability every v_t is marginally Laplace at
its own level, so releasing the prefix (v_1, ..., v_t) costs only eps_t.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "PrivacyGrid",
    "RandomSource",
    "NoiseChain",
    "laplace_density",
    "sample_laplace",
    "noise_reduce",
]


@dataclass(frozen=True)
class PrivacyGrid:
    """Strictly increasing list of positive privacy levels eps_1 < ... < eps_T."""

    epsilons: tuple[float, ...]

    def __post_init__(self):
        eps = tuple(float(e) for e in self.epsilons)
        object.__setattr__(self, "epsilons", eps)
        if len(eps) == 0:
            raise ValueError("privacy grid must be nonempty")
        if not all(math.isfinite(e) and e > 0 for e in eps):
            raise ValueError("privacy levels must be positive finite reals")
        if any(a >= b for a, b in zip(eps, eps[1:])):
            raise ValueError("privacy levels must be strictly increasing")

    def __len__(self) -> int:
        return len(self.epsilons)

    def __getitem__(self, i: int) -> float:
        return self.epsilons[i]

    def halved(self) -> "PrivacyGrid":
        return PrivacyGrid(tuple(e / 2.0 for e in self.epsilons))


class RandomSource:
    """Counter-based (Philox) random stream keyed by (seed, stream id).

    The same (seed, stream) pair reproduces the identical draw sequence
    bit-for-bit on any platform; distinct stream keys give statistically
    independent streams.  A source is single-consumer: do not share one
    instance across threads, fork children instead.
    """

    def __init__(self, seed: int, stream: int | tuple[int, ...] = 0):
        self.seed = int(seed)
        self.stream = (int(stream),) if isinstance(stream, int) else tuple(int(s) for s in stream)
        ss = np.random.SeedSequence(entropy=self.seed, spawn_key=self.stream)
        self._gen = np.random.Generator(np.random.Philox(ss))

    def fork(self, *key: int) -> "RandomSource":
        """Independent child stream; children with distinct keys never collide."""
        return RandomSource(self.seed, self.stream + tuple(int(k) for k in key))

    def uniform(self, size=None):
        """Uniform draws in [0, 1)."""
        return self._gen.random(size)

    def uniform_open(self, size=None):
        """Uniform draws in the open interval (0, 1); exact zeros are redrawn."""
        u = self._gen.random(size)
        if size is None:
            while u == 0.0:
                u = self._gen.random()
            return u
        mask = u == 0.0
        while mask.any():
            u[mask] = self._gen.random(int(mask.sum()))
            mask = u == 0.0
        return u

    def laplace(self, scale: float, size=None):
        """Laplace(scale) draws via the inverse CDF on an open-interval uniform."""
        if not (math.isfinite(scale) and scale > 0):
            raise ValueError(f"Laplace scale must be positive and finite, got {scale}")
        u = self.uniform_open(size)
        return -scale * np.sign(u - 0.5) * np.log1p(-2.0 * np.abs(u - 0.5))

    def __repr__(self) -> str:
        return f"RandomSource(seed={self.seed}, stream={self.stream})"


def laplace_density(x: float, scale: float) -> float:
    """Density of the centered Laplace distribution with the given scale."""
    if not (math.isfinite(scale) and scale > 0):
        raise ValueError(f"Laplace scale must be positive and finite, got {scale}")
    return math.exp(-abs(x) / scale) / (2.0 * scale)


def sample_laplace(scale: float, rng: RandomSource) -> float:
    """One centered Laplace draw with the given scale (must be positive)."""
    return float(rng.laplace(scale))


@dataclass
class NoiseChain:
    """Output of :func:`noise_reduce`: one noisy copy of the input per level.

    ``values[t]`` carries the perturbation for level ``levels[t]``; its
    marginal law is the input plus coordinate-wise Laplace(``scales[t]``).
    Adjacent values are either bitwise equal (the chain copied) or differ.
    """

    values: list[np.ndarray]
    scales: list[float]
    sensitivity: float
    levels: PrivacyGrid = field(repr=False)

    def __len__(self) -> int:
        return len(self.values)


def noise_reduce(v, delta: float, grid: PrivacyGrid, rng: RandomSource) -> NoiseChain:
    """Correlated Laplace chain over ``grid`` for a value of sensitivity ``delta``.

    Works elementwise, so ``v`` may be a scalar, vector, or matrix.  The
    copy-vs-renoise coin is flipped independently per coordinate, which
    preserves the coordinate-wise Laplace marginal at every level.  With
    ``delta == 0`` every level is an exact copy of ``v``.
    """
    if not isinstance(grid, PrivacyGrid):
        grid = PrivacyGrid(tuple(grid))
    v = np.asarray(v, dtype=float)
    if not (math.isfinite(delta) and delta >= 0):
        raise ValueError(f"sensitivity must be a nonnegative real, got {delta}")
    eps = grid.epsilons
    T = len(eps)
    scales = [delta / e for e in eps]
    values: list[np.ndarray | None] = [None] * T
    if delta == 0.0:
        values = [v.copy() for _ in range(T)]
        return NoiseChain(values, scales, delta, grid)
    values[T - 1] = v + rng.laplace(scales[T - 1], size=v.shape)
    for t in range(T - 2, -1, -1):
        keep = (eps[t] / eps[t + 1]) ** 2
        coins = rng.uniform(size=v.shape)
        fresh = values[t + 1] + rng.laplace(scales[t], size=v.shape)
        values[t] = np.where(coins < keep, values[t + 1], fresh)
    return NoiseChain(values, scales, delta, grid)
