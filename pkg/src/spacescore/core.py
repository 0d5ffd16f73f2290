"""Search spaces, observations and the seeding convention shared by every module.

Geometry (unit-cube maps, volumes, sampling, sub-space construction) happens in
*transformed* coordinates: identity for ``linear`` dimensions and ``log10`` for
log-scaled ones. Bounds are stored in natural units.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field, replace
from functools import cached_property
from pathlib import Path
from typing import Iterable, Literal, Sequence

import numpy as np

from spacescore.errors import InputError, ObjectiveEvaluationError, OutOfDomainError

Scale = Literal["linear", "log10"]
SCALES = ("linear", "log10")

# Relative slack (in transformed units) for containment checks.
_BOUND_TOL = 1e-9


def make_rng(seed: int, *keys: int) -> np.random.Generator:
    """Generator for ``seed`` and a path of integer keys.

    Every stochastic routine derives its stream this way, so sub-streams for
    batch ``i`` or repeat ``k`` are reproducible and independent of call order.
    """
    return np.random.default_rng(np.random.SeedSequence([int(seed), *map(int, keys)]))


def sub_seed(seed: int, *keys: int) -> int:
    """Deterministic 64-bit child seed of ``seed`` at the given key path."""
    state = np.random.SeedSequence([int(seed), *map(int, keys)]).generate_state(2, np.uint64)
    return int(state[0])


def check_budget(b) -> int:
    if isinstance(b, bool) or int(b) != b or b < 1:
        raise InputError(f"budget must be a positive integer, got {b!r}")
    return int(b)


@dataclass(frozen=True)
class ParamDomain:
    """One dimension of a search space.

    ``lower == upper`` is allowed and denotes a fixed coordinate (a hyperparameter
    pinned to a value); sampling then always returns ``lower``.
    """

    name: str
    lower: float
    upper: float
    scale: Scale = "linear"
    grid: tuple[float, ...] | None = None

    def __post_init__(self):
        if not self.name:
            raise InputError("dimension name must be non-empty")
        if self.scale not in SCALES:
            raise InputError(f"{self.name}: unknown scale {self.scale!r}")
        lo, hi = float(self.lower), float(self.upper)
        if not (math.isfinite(lo) and math.isfinite(hi)):
            raise InputError(f"{self.name}: bounds must be finite")
        if lo > hi:
            raise InputError(f"{self.name}: lower {lo} exceeds upper {hi}")
        if self.scale == "log10" and lo <= 0:
            raise InputError(f"{self.name}: log10 scale requires lower > 0")
        object.__setattr__(self, "lower", lo)
        object.__setattr__(self, "upper", hi)
        if self.grid is not None:
            grid = tuple(sorted(float(g) for g in self.grid))
            if not grid:
                raise InputError(f"{self.name}: grid must be non-empty when given")
            for g in grid:
                if g < lo or g > hi:
                    raise InputError(f"{self.name}: grid value {g} outside [{lo}, {hi}]")
            object.__setattr__(self, "grid", grid)

    def transform(self, x):
        return np.log10(x) if self.scale == "log10" else np.asarray(x, dtype=float)

    def untransform(self, t):
        return np.power(10.0, t) if self.scale == "log10" else np.asarray(t, dtype=float)

    @property
    def t_lower(self) -> float:
        return float(self.transform(self.lower))

    @property
    def t_upper(self) -> float:
        return float(self.transform(self.upper))

    @property
    def t_length(self) -> float:
        return self.t_upper - self.t_lower

    @property
    def is_fixed(self) -> bool:
        return self.lower == self.upper

    def contains(self, value: float) -> bool:
        if self.scale == "log10" and value <= 0:
            return False
        t = float(self.transform(value))
        slack = _BOUND_TOL * max(self.t_length, abs(self.t_lower), abs(self.t_upper), 1.0)
        return self.t_lower - slack <= t <= self.t_upper + slack

    def snap(self, values: np.ndarray) -> np.ndarray:
        """Round each value to the nearest grid element (no-op without a grid)."""
        if self.grid is None:
            return values
        grid = np.asarray(self.grid)
        idx = np.clip(np.searchsorted(grid, values), 1, len(grid) - 1) if len(grid) > 1 else None
        if idx is None:
            return np.full_like(values, grid[0])
        left, right = grid[idx - 1], grid[idx]
        return np.where(values - left <= right - values, left, right)

    def clamp(self, values):
        """Clip natural-unit values into ``[lower, upper]``."""
        return np.clip(values, self.lower, self.upper)

    def with_bounds(self, lower: float, upper: float) -> ParamDomain:
        """Copy with new natural-unit bounds; the grid is filtered to them.

        A grid with no surviving values is dropped, leaving the interval continuous.
        """
        grid = None
        if self.grid is not None:
            kept = tuple(g for g in self.grid if lower <= g <= upper)
            grid = kept or None
        return replace(self, lower=lower, upper=upper, grid=grid)

    def fixed(self, value: float) -> ParamDomain:
        if not self.contains(value):
            raise OutOfDomainError(
                f"{self.name}: fixed value {value} outside [{self.lower}, {self.upper}]",
                dim=self.name,
            )
        value = float(self.clamp(value))
        return replace(self, lower=value, upper=value, grid=None)


@dataclass(frozen=True)
class SearchSpace:
    dims: tuple[ParamDomain, ...]
    provenance: dict | None = field(default=None, compare=False, repr=False)

    def __post_init__(self):
        dims = tuple(self.dims)
        if not dims:
            raise InputError("a search space needs at least one dimension")
        names = [d.name for d in dims]
        if len(set(names)) != len(names):
            raise InputError(f"duplicate dimension names in {names}")
        object.__setattr__(self, "dims", dims)

    @classmethod
    def box(cls, lower: Sequence[float], upper: Sequence[float], names=None) -> SearchSpace:
        """Linear-scale hyperrectangle; names default to ``x0, x1, ...``."""
        names = names or [f"x{i}" for i in range(len(lower))]
        return cls(tuple(ParamDomain(n, lo, hi) for n, lo, hi in zip(names, lower, upper)))

    @property
    def d(self) -> int:
        return len(self.dims)

    @property
    def names(self) -> list[str]:
        return [dim.name for dim in self.dims]

    def index(self, name: str) -> int:
        try:
            return self.names.index(name)
        except ValueError:
            raise InputError(f"unknown dimension {name!r}; have {self.names}") from None

    def __getitem__(self, name: str) -> ParamDomain:
        return self.dims[self.index(name)]

    @cached_property
    def t_lower(self) -> np.ndarray:
        return np.array([dim.t_lower for dim in self.dims])

    @cached_property
    def t_upper(self) -> np.ndarray:
        return np.array([dim.t_upper for dim in self.dims])

    @property
    def t_length(self) -> np.ndarray:
        return self.t_upper - self.t_lower

    def transform(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        return np.stack([dim.transform(x[..., i]) for i, dim in enumerate(self.dims)], axis=-1)

    def untransform(self, t) -> np.ndarray:
        t = np.asarray(t, dtype=float)
        return np.stack([dim.untransform(t[..., i]) for i, dim in enumerate(self.dims)], axis=-1)

    def contains_rows(self, x) -> np.ndarray:
        """Boolean mask of the rows of ``x`` lying inside the space."""
        x = np.atleast_2d(np.asarray(x, dtype=float))
        mask = np.ones(len(x), dtype=bool)
        for i, dim in enumerate(self.dims):
            v = x[:, i]
            if dim.scale == "log10":
                positive = v > 0
                mask &= positive
                v = np.where(positive, v, 1.0)
            t = dim.transform(v)
            slack = _BOUND_TOL * max(dim.t_length, abs(dim.t_lower), abs(dim.t_upper), 1.0)
            mask &= (t >= dim.t_lower - slack) & (t <= dim.t_upper + slack)
        return mask

    def contains(self, x) -> bool:
        return bool(np.all(self.contains_rows(x)))

    def is_subset_of(self, other: SearchSpace) -> bool:
        if self.names != other.names:
            return False
        return all(
            o.contains(s.lower) and o.contains(s.upper) for s, o in zip(self.dims, other.dims)
        )

    def replace_dim(self, name: str, domain: ParamDomain) -> SearchSpace:
        dims = list(self.dims)
        dims[self.index(name)] = domain
        return SearchSpace(tuple(dims))

    def with_provenance(self, **info) -> SearchSpace:
        return SearchSpace(self.dims, provenance={**(self.provenance or {}), **info})

    def product(self, other: SearchSpace) -> SearchSpace:
        return SearchSpace(self.dims + other.dims)

    # JSON document: {"dims": [{"name", "scale", "min", "max", "grid"?}], ...}
    def to_dict(self) -> dict:
        out = {"dims": []}
        for dim in self.dims:
            entry = {"name": dim.name, "scale": dim.scale, "min": dim.lower, "max": dim.upper}
            if dim.grid is not None:
                entry["grid"] = list(dim.grid)
            out["dims"].append(entry)
        if self.provenance:
            out["provenance"] = self.provenance
        return out

    @classmethod
    def from_dict(cls, doc: dict) -> SearchSpace:
        if not isinstance(doc, dict) or not isinstance(doc.get("dims"), list):
            raise InputError('search space document must be an object with a "dims" list')
        dims = []
        for i, entry in enumerate(doc["dims"]):
            try:
                dims.append(
                    ParamDomain(
                        name=str(entry["name"]),
                        scale=entry.get("scale", "linear"),
                        lower=float(entry["min"]),
                        upper=float(entry["max"]),
                        grid=entry.get("grid"),
                    )
                )
            except KeyError as exc:
                raise InputError(f"dims[{i}] is missing key {exc.args[0]!r}") from None
            except (TypeError, ValueError) as exc:
                if isinstance(exc, InputError):
                    raise
                raise InputError(f"dims[{i}]: {exc}") from None
        return cls(tuple(dims), provenance=doc.get("provenance"))


def load_space(path) -> SearchSpace:
    path = Path(path)
    try:
        doc = json.loads(path.read_text())
    except FileNotFoundError:
        raise InputError(f"{path}: no such file") from None
    except json.JSONDecodeError as exc:
        raise InputError(f"{path}:{exc.lineno}:{exc.colno}: {exc.msg}") from None
    try:
        return SearchSpace.from_dict(doc)
    except InputError as exc:
        raise InputError(f"{path}: {exc}") from None


def save_space(space: SearchSpace, path) -> None:
    Path(path).write_text(json.dumps(space.to_dict(), indent=2) + "\n")


def _unit(space: SearchSpace, x) -> np.ndarray:
    """Unchecked map into ``space``'s unit cube; zero-width dims map to 0."""
    t = space.transform(x)
    length = space.t_length
    safe = np.where(length > 0, length, 1.0)
    return np.where(length > 0, (t - space.t_lower) / safe, 0.0)


def to_unit_cube(space: SearchSpace, x) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    for row in np.atleast_2d(x):
        for dim, v in zip(space.dims, row):
            if not dim.contains(v):
                raise OutOfDomainError(
                    f"{dim.name}={v} outside [{dim.lower}, {dim.upper}]", dim=dim.name
                )
    return np.clip(_unit(space, x), 0.0, 1.0)


def from_unit_cube(space: SearchSpace, u) -> np.ndarray:
    u = np.asarray(u, dtype=float)
    x = space.untransform(space.t_lower + u * space.t_length)
    # Pin exact endpoints so round-trips through log10 stay inside the bounds.
    for i, dim in enumerate(space.dims):
        x[..., i] = dim.clamp(x[..., i])
    return x


def sample_from_unit(space: SearchSpace, u) -> np.ndarray:
    """Natural-units points for unit-cube draws ``u``, snapped to any grids."""
    x = from_unit_cube(space, u)
    for i, dim in enumerate(space.dims):
        if dim.grid is not None:
            x[..., i] = dim.snap(x[..., i])
    return x


def uniform_sample(space: SearchSpace, b: int, seed: int) -> np.ndarray:
    """``b`` i.i.d. uniform points (rows) in the transformed box, natural units."""
    b = check_budget(b)
    return sample_from_unit(space, make_rng(seed).random((b, space.d)))


def volume(space: SearchSpace) -> float:
    """Product of per-dimension lengths in transformed coordinates."""
    return float(np.prod(space.t_length))


def evaluate(objective, x) -> np.ndarray:
    """Evaluate ``objective`` on the rows of ``x``.

    Vectorized objectives (``(n, d)`` in, ``n`` values out) are called once;
    anything else is applied row by row. Failures are re-raised as
    :class:`ObjectiveEvaluationError` carrying the offending point.
    """
    x = np.atleast_2d(np.asarray(x, dtype=float))
    try:
        y = np.asarray(objective(x), dtype=float).reshape(-1)
    except Exception:
        y = None
    if y is None or len(y) != len(x):
        y = np.empty(len(x))
        for i, row in enumerate(x):
            try:
                y[i] = float(np.asarray(objective(row), dtype=float).reshape(-1)[0])
            except Exception as exc:
                raise ObjectiveEvaluationError(row, exc) from exc
    return y


@dataclass(frozen=True)
class Observation:
    x: tuple[float, ...]
    y: float


@dataclass(frozen=True)
class Dataset:
    """Observations in natural units, all inside ``space``. Lower ``y`` is better."""

    space: SearchSpace
    x: np.ndarray
    y: np.ndarray

    def __post_init__(self):
        x = np.array(self.x, dtype=float).reshape(-1, self.space.d)
        y = np.array(self.y, dtype=float).reshape(-1)
        if len(x) != len(y):
            raise InputError(f"{len(x)} inputs but {len(y)} targets")
        if not np.all(np.isfinite(y)):
            raise InputError("objective values must be finite")
        if len(x) and not self.space.contains(x):
            raise OutOfDomainError("dataset contains points outside its search space")
        x.setflags(write=False)
        y.setflags(write=False)
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "y", y)

    @classmethod
    def from_observations(cls, space: SearchSpace, obs: Iterable[Observation]) -> Dataset:
        obs = list(obs)
        return cls(space, [o.x for o in obs], [o.y for o in obs])

    def __len__(self) -> int:
        return len(self.y)

    @property
    def observations(self) -> list[Observation]:
        return [Observation(tuple(row), float(v)) for row, v in zip(self.x, self.y)]

    @property
    def incumbent(self) -> float:
        if not len(self):
            raise InputError("empty dataset has no incumbent")
        return float(self.y.min())

    @property
    def best(self) -> Observation:
        i = int(np.argmin(self.y))
        return Observation(tuple(self.x[i]), float(self.y[i]))

    def restrict(self, space: SearchSpace) -> Dataset:
        """Rows lying inside ``space`` (which must share dimension names)."""
        mask = space.contains_rows(self.x) if len(self) else np.zeros(0, dtype=bool)
        return Dataset(space, self.x[mask], self.y[mask])

    def concat(self, other: Dataset) -> Dataset:
        return Dataset(self.space, np.vstack([self.x, other.x]), np.concatenate([self.y, other.y]))


def read_observations(
    path, space: SearchSpace, negate: bool = False, *, check_bounds: bool = True
) -> Dataset:
    """Load a CSV with one column per dimension name plus ``objective``.

    Column order is free. ``negate`` flips maximize-style logs into minimization.
    With ``check_bounds=False`` rows outside ``space`` are kept (values on log10
    dimensions must still be positive) and the returned dataset lives in
    ``space`` widened just enough to contain them.
    """
    path = Path(path)
    try:
        text = path.read_text()
    except FileNotFoundError:
        raise InputError(f"{path}: no such file") from None
    rows = [
        (lineno, next(csv.reader([line])))
        for lineno, line in enumerate(text.splitlines(), start=1)
        if line.strip() and not line.lstrip().startswith("#")
    ]
    if not rows:
        raise InputError(f"{path}: empty file")
    header_line, header = rows[0]
    header = [h.strip() for h in header]
    wanted = space.names + ["objective"]
    missing = [c for c in wanted if c not in header]
    if missing:
        raise InputError(f"{path}:{header_line}: missing column(s) {', '.join(missing)}")
    cols = [header.index(c) for c in wanted]
    xs, ys = [], []
    for lineno, row in rows[1:]:
        if len(row) != len(header):
            raise InputError(f"{path}:{lineno}: expected {len(header)} fields, got {len(row)}")
        vals = []
        for c in cols:
            try:
                v = float(row[c])
            except ValueError:
                raise InputError(
                    f"{path}:{lineno}:{c + 1}: cannot parse {row[c]!r} ({header[c]})"
                ) from None
            if not math.isfinite(v):
                raise InputError(f"{path}:{lineno}:{c + 1}: non-finite value ({header[c]})")
            vals.append(v)
        for dim, v in zip(space.dims, vals):
            if check_bounds and not dim.contains(v) or dim.scale == "log10" and v <= 0:
                raise InputError(
                    f"{path}:{lineno}:{header.index(dim.name) + 1}: "
                    f"{dim.name}={v} outside [{dim.lower}, {dim.upper}]"
                )
        xs.append(vals[:-1])
        ys.append(-vals[-1] if negate else vals[-1])
    x = np.array(xs).reshape(-1, space.d)
    if not check_bounds and len(x):
        space = SearchSpace(
            tuple(
                d if d.contains(lo) and d.contains(hi)
                else d.with_bounds(min(d.lower, lo), max(d.upper, hi))
                for d, lo, hi in zip(space.dims, x.min(axis=0), x.max(axis=0))
            )
        )
    return Dataset(space, x, np.array(ys))


def write_observations(data: Dataset, path) -> None:
    with Path(path).open("w", newline="") as handle:
        writer = csv.writer(handle)
        writer.writerow(data.space.names + ["objective"])
        for row, v in zip(data.x, data.y):
            writer.writerow([repr(float(c)) for c in row] + [repr(float(v))])
