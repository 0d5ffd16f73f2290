"""Volume-constrained sub-space generation.

Both generators work per dimension in transformed coordinates with target
length ``l_i = rho ** (1 / d) * (max_i - min_i)``. Random placement draws the
lower bound uniformly from ``[min_i, max_i - l_i]`` so the result always sits
inside the base and has exactly ``rho`` times its volume. Centered placement
clips at the base bounds and therefore may fall short of the target volume.
"""

from __future__ import annotations

from typing import Sequence

import numpy as np

from spacescore.core import ParamDomain, SearchSpace, make_rng, sub_seed
from spacescore.errors import InputError, OutOfDomainError


def check_rate(rho: float) -> float:
    rho = float(rho)
    if not 0.0 < rho <= 1.0:
        raise InputError(f"volume reduction rate must lie in (0, 1], got {rho}")
    return rho


def _per_dim_fraction(base: SearchSpace, rho: float) -> float:
    # Fixed (zero-width) dimensions carry no volume and are left alone.
    free = int(np.count_nonzero(base.t_length > 0)) or 1
    return rho ** (1.0 / free)


def _interval(dim: ParamDomain, t_lo: float, t_hi: float) -> ParamDomain:
    """Sub-interval of ``dim`` from transformed bounds, exact at shared endpoints."""
    lo = dim.lower if t_lo <= dim.t_lower else float(dim.clamp(dim.untransform(t_lo)))
    hi = dim.upper if t_hi >= dim.t_upper else float(dim.clamp(dim.untransform(t_hi)))
    return dim.with_bounds(lo, max(lo, hi))


def random_subspace(base: SearchSpace, rho: float, seed: int) -> SearchSpace:
    rho = check_rate(rho)
    frac = _per_dim_fraction(base, rho)
    rng = make_rng(seed)
    dims = []
    for dim in base.dims:
        span = dim.t_length
        length = frac * span
        t_lo = dim.t_lower + rng.random() * (span - length)
        t_hi = dim.t_upper if length >= span else t_lo + length
        dims.append(_interval(dim, t_lo, t_hi))
    return SearchSpace(tuple(dims), provenance={"method": "random", "rate": rho, "seed": seed})


def centered_subspace(base: SearchSpace, center, rho: float) -> SearchSpace:
    rho = check_rate(rho)
    center = np.asarray(center, dtype=float).reshape(-1)
    if len(center) != base.d:
        raise InputError(f"center has {len(center)} coordinates, space has {base.d}")
    for dim, c in zip(base.dims, center):
        if not dim.contains(c):
            raise OutOfDomainError(
                f"center {dim.name}={c} outside [{dim.lower}, {dim.upper}]", dim=dim.name
            )
    frac = _per_dim_fraction(base, rho)
    dims = []
    for dim, c in zip(base.dims, center):
        half = 0.5 * frac * dim.t_length
        t_c = float(dim.transform(dim.clamp(c)))
        dims.append(_interval(dim, max(dim.t_lower, t_c - half), min(dim.t_upper, t_c + half)))
    return SearchSpace(
        tuple(dims),
        provenance={"method": "centered", "rate": rho, "center": center.tolist()},
    )


def propose_search_spaces(
    base: SearchSpace, rates: Sequence[float], per_rate: int, seed: int
) -> list[SearchSpace]:
    """``len(rates) * per_rate`` random subspaces, grouped by rate.

    Space ``j`` of rate ``k`` is generated from ``sub_seed(seed, k, j)``.
    """
    if per_rate < 1:
        raise InputError("per_rate must be >= 1")
    out = []
    for k, rho in enumerate(rates):
        for j in range(per_rate):
            space = random_subspace(base, rho, sub_seed(seed, k, j))
            out.append(space.with_provenance(index=len(out)))
    return out
