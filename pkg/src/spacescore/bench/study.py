"""Best-so-far logs, random search and repeat aggregation."""

from __future__ import annotations

import csv
import io
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from typing import Callable, Mapping

import numpy as np

from spacescore.core import SearchSpace, evaluate, sub_seed, uniform_sample
from spacescore.errors import InputError


@dataclass(frozen=True)
class StudyLog:
    """Evaluations in order; ``phase_boundary`` marks where phase one ends."""

    x: np.ndarray
    y: np.ndarray
    phase_boundary: int | None = None

    def __post_init__(self):
        object.__setattr__(self, "x", np.atleast_2d(np.asarray(self.x, dtype=float)))
        object.__setattr__(self, "y", np.asarray(self.y, dtype=float).reshape(-1))

    def __len__(self) -> int:
        return len(self.y)

    @property
    def best_curve(self) -> np.ndarray:
        return np.minimum.accumulate(self.y)

    @property
    def best(self) -> float:
        return float(self.y.min())


def random_search(objective: Callable, space: SearchSpace, n: int, seed: int) -> StudyLog:
    if n < 1:
        raise InputError("random search needs n >= 1")
    x = uniform_sample(space, n, seed)
    return StudyLog(x, evaluate(objective, x))


@dataclass(frozen=True)
class Aggregate:
    """Per-step mean and standard error of best-so-far curves, per series."""

    curves: dict[str, np.ndarray]  # series -> (n_repeats, n_steps) best-so-far
    phase_boundary: int | None = None

    @property
    def n_repeats(self) -> int:
        return len(next(iter(self.curves.values())))

    def mean(self, key: str) -> np.ndarray:
        return self.curves[key].mean(axis=0)

    def std_error(self, key: str) -> np.ndarray:
        c = self.curves[key]
        return c.std(axis=0, ddof=1) / np.sqrt(len(c))

    def final(self, key: str) -> np.ndarray:
        return self.curves[key][:, -1]

    def rows(self) -> list[dict]:
        out = []
        for key in self.curves:
            mean, se = self.mean(key), self.std_error(key)
            for step in range(len(mean)):
                out.append(
                    {
                        "series": key,
                        "step": step + 1,
                        "mean": repr(float(mean[step])),
                        "std_error": repr(float(se[step])),
                        "n_repeats": self.n_repeats,
                    }
                )
        return out

    def to_csv(self, footer: str | None = None) -> str:
        buf = io.StringIO()
        writer = csv.DictWriter(
            buf, ["series", "step", "mean", "std_error", "n_repeats"], lineterminator="\n"
        )
        writer.writeheader()
        writer.writerows(self.rows())
        if footer:
            buf.write(f"# {footer}\n")
        return buf.getvalue()


def aggregate(runs: list[Mapping[str, StudyLog]]) -> Aggregate:
    if len(runs) < 2:
        raise InputError("need at least 2 repeats to aggregate")
    keys = list(runs[0])
    curves = {}
    for key in keys:
        lengths = {len(run[key]) for run in runs}
        if len(lengths) != 1:
            raise InputError(f"series {key!r} has misaligned log lengths {sorted(lengths)}")
        curves[key] = np.stack([run[key].best_curve for run in runs])
    return Aggregate(curves, runs[0][keys[0]].phase_boundary)


def _as_mapping(result) -> Mapping[str, StudyLog]:
    return {"run": result} if isinstance(result, StudyLog) else result


def replicate(
    experiment: Callable[[int], Mapping[str, StudyLog] | StudyLog],
    n_repeats: int,
    seed: int,
    workers: int = 1,
) -> Aggregate:
    """Run ``experiment(sub_seed(seed, k))`` for ``k < n_repeats`` and aggregate.

    With ``workers > 1`` repeats run in separate processes (``experiment`` must
    be picklable); the aggregate is identical either way.
    """
    if n_repeats < 2:
        raise InputError("n_repeats must be >= 2")
    seeds = [sub_seed(seed, k) for k in range(n_repeats)]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(experiment, seeds))
    else:
        results = [experiment(s) for s in seeds]
    return aggregate([_as_mapping(r) for r in results])
