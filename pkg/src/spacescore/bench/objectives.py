"""Synthetic objectives on their canonical base spaces.

All objectives take an ``(n, d)`` array of natural-unit points and return ``n``
values; lower is better.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from spacescore.bench.constants import (
    BRANIN_BOUNDS,
    HARTMANN6_A,
    HARTMANN6_ALPHA,
    HARTMANN6_P,
)
from spacescore.core import SearchSpace, make_rng
from spacescore.errors import InputError, OutOfDomainError


def branin(x) -> np.ndarray:
    x = np.atleast_2d(np.asarray(x, dtype=float))
    x1, x2 = x[:, 0], x[:, 1]
    b = 5.1 / (4.0 * math.pi**2)
    c = 5.0 / math.pi
    t = 1.0 / (8.0 * math.pi)
    return (x2 - b * x1**2 + c * x1 - 6.0) ** 2 + 10.0 * (1.0 - t) * np.cos(x1) + 10.0


def hartmann6(x) -> np.ndarray:
    x = np.atleast_2d(np.asarray(x, dtype=float))
    if x.shape[-1] != 6:
        raise InputError(f"hartmann6 takes 6 coordinates, got {x.shape[-1]}")
    if np.any(x < -1e-12) or np.any(x > 1 + 1e-12):
        raise OutOfDomainError("hartmann6 is defined on [0, 1]^6")
    inner = np.sum(HARTMANN6_A * (x[:, None, :] - HARTMANN6_P) ** 2, axis=-1)
    return -np.sum(HARTMANN6_ALPHA * np.exp(-inner), axis=-1)


def sphere(x) -> np.ndarray:
    x = np.atleast_2d(np.asarray(x, dtype=float))
    return np.sum(x * x, axis=-1)


def constant(x, value: float = 0.0) -> np.ndarray:
    return np.full(len(np.atleast_2d(x)), float(value))


@dataclass(frozen=True)
class GridObjective:
    """Piecewise-constant objective on ``[0, 1]``: cell ``k`` of ``N`` takes ``values[k]``.

    A uniform draw therefore lands on each value with probability ``1 / N``.
    """

    values: tuple[float, ...]

    def __call__(self, x) -> np.ndarray:
        x = np.atleast_2d(np.asarray(x, dtype=float))[:, 0]
        n = len(self.values)
        idx = np.clip(np.floor(x * n).astype(int), 0, n - 1)
        return np.asarray(self.values)[idx]

    @property
    def space(self) -> SearchSpace:
        return SearchSpace.box([0.0], [1.0])


BASE_SPACES = {
    "branin": SearchSpace.box(*zip(*BRANIN_BOUNDS)),
    "hartmann6": SearchSpace.box([0.0] * 6, [1.0] * 6),
    "sphere": SearchSpace.box([-1.0, -1.0], [1.0, 1.0]),
    "constant": SearchSpace.box([0.0, 0.0], [1.0, 1.0]),
}

_FUNCTIONS = {"branin": branin, "hartmann6": hartmann6, "sphere": sphere, "constant": constant}


@dataclass
class SyntheticObjective:
    """Named benchmark with optional additive Gaussian noise.

    Noise comes from a generator seeded at construction, so a fresh instance
    with the same seed replays the same noisy values.
    """

    name: str
    noise_sd: float = 0.0
    seed: int = 0
    _rng: np.random.Generator = field(init=False, repr=False)

    def __post_init__(self):
        if self.name not in _FUNCTIONS:
            raise InputError(f"unknown objective {self.name!r}; choose from {sorted(_FUNCTIONS)}")
        if self.noise_sd < 0:
            raise InputError("noise_sd must be >= 0")
        self._rng = make_rng(self.seed, 0x6E6F)

    @property
    def space(self) -> SearchSpace:
        return BASE_SPACES[self.name]

    def __call__(self, x) -> np.ndarray:
        y = _FUNCTIONS[self.name](x)
        if self.noise_sd > 0:
            y = y + self.noise_sd * self._rng.standard_normal(y.shape)
        return y


def make_objective(name: str, noise_sd: float = 0.0, seed: int = 0) -> SyntheticObjective:
    return SyntheticObjective(name, noise_sd, seed)
