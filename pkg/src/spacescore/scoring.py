"""Predicted and empirical search-space scores.

A predicted score averages a batch utility over uniform batches ``x`` drawn from
the space and over joint posterior draws at ``x``::

    score(S, b) = E_{x ~ U_b(S)} E_{y ~ p(y | x, D)} [ u(y_best, y) ]

with ``u = max(0, y_best - min(y))`` (b-EI) or ``u = 1[min(y) < y_best]`` (b-PI).
The median variants replace the outer mean over batches by a median.

Random numbers are drawn per batch from ``make_rng(seed, stream, batch)``, point
by point. Two consequences are relied on throughout:

* budgets are coupled: the batch for budget ``b`` is the prefix of the batch for
  ``b + 1``, and so are its posterior normals;
* spaces share common random numbers: the same unit-cube draws are mapped into
  every space scored with the same seed.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import asdict, dataclass
from typing import Callable, Literal, Sequence

import numpy as np

from spacescore.core import (
    Dataset,
    SearchSpace,
    check_budget,
    evaluate,
    make_rng,
    sample_from_unit,
)
from spacescore.errors import (
    ContainmentWarning,
    DegenerateCovarianceError,
    InputError,
    NoSupportError,
)
from spacescore.gp import JITTER_START, GpModel, batched_posterior, jittered_cholesky

Variant = Literal["mean-bEI", "median-bEI", "mean-bPI", "median-bPI"]
VARIANTS = ("mean-bEI", "median-bEI", "mean-bPI", "median-bPI")

N_BOOTSTRAP = 200
# Elements per (batches x budget x samples) work chunk.
_CHUNK_ELEMENTS = 4_000_000
# Posterior normals are cached across spaces below this many elements.
_CACHE_ELEMENTS = 10_000_000

_X_STREAM, _Z_STREAM, _BOOT_STREAM = 0, 1, 2


def _check_variant(variant: str) -> str:
    if variant not in VARIANTS:
        raise InputError(f"unknown variant {variant!r}; choose from {', '.join(VARIANTS)}")
    return variant


@dataclass(frozen=True)
class ScoreConfig:
    variant: Variant = "mean-bEI"
    n_x_batches: int = 1000
    n_posterior_samples: int = 1000
    seed: int = 0
    add_noise: bool = False

    def __post_init__(self):
        _check_variant(self.variant)
        if self.n_x_batches < 1 or self.n_posterior_samples < 1:
            raise InputError("n_x_batches and n_posterior_samples must be >= 1")

    @property
    def is_ei(self) -> bool:
        return self.variant.endswith("EI")

    @property
    def uses_median(self) -> bool:
        return self.variant.startswith("median")


@dataclass(frozen=True)
class ScoreEstimate:
    value: float
    std_error: float
    config: ScoreConfig
    budget: int
    incumbent: float
    space_id: str = ""

    CSV_FIELDS = (
        "space_id",
        "budget",
        "variant",
        "value",
        "std_error",
        "incumbent",
        "n_x_batches",
        "n_posterior_samples",
        "seed",
    )

    def to_row(self) -> dict:
        return {
            "space_id": self.space_id,
            "budget": self.budget,
            "variant": self.config.variant,
            "value": repr(self.value),
            "std_error": repr(self.std_error),
            "incumbent": repr(self.incumbent),
            "n_x_batches": self.config.n_x_batches,
            "n_posterior_samples": self.config.n_posterior_samples,
            "seed": self.config.seed,
        }

    def to_dict(self) -> dict:
        out = asdict(self)
        out["config"] = asdict(self.config)
        return out


class CommonDraws:
    """Per-batch unit-cube draws and posterior normals for one seed.

    Sharing an instance across spaces (and budgets) gives common random numbers;
    normals are cached when small enough, otherwise regenerated per chunk.
    """

    def __init__(self, seed: int, n_batches: int, n_samples: int, b_max: int, d: int):
        self.seed, self.n_batches, self.n_samples = seed, n_batches, n_samples
        self.b_max, self.d = b_max, d
        self.u = np.stack(
            [make_rng(seed, _X_STREAM, i).random((b_max, d)) for i in range(n_batches)]
        )
        self._z = None
        if n_batches * b_max * n_samples <= _CACHE_ELEMENTS:
            self._z = self._normals(0, n_batches)

    @classmethod
    def for_config(cls, config: ScoreConfig, b_max: int, d: int) -> CommonDraws:
        return cls(config.seed, config.n_x_batches, config.n_posterior_samples, b_max, d)

    def _normals(self, start: int, stop: int) -> np.ndarray:
        return np.stack(
            [
                make_rng(self.seed, _Z_STREAM, i).standard_normal((self.b_max, self.n_samples))
                for i in range(start, stop)
            ]
        )

    def z(self, start: int, stop: int) -> np.ndarray:
        if self._z is not None:
            return self._z[start:stop]
        return self._normals(start, stop)

    def compatible(self, config: ScoreConfig, b_max: int, d: int) -> bool:
        return (
            self.seed == config.seed
            and self.n_batches == config.n_x_batches
            and self.n_samples == config.n_posterior_samples
            and self.b_max >= b_max
            and self.d == d
        )


def _batched_cholesky(cov: np.ndarray, scale: float, offset: int) -> np.ndarray:
    eye = np.eye(cov.shape[-1])
    try:
        return np.linalg.cholesky(cov + JITTER_START * scale * eye)
    except np.linalg.LinAlgError:
        pass
    out = np.empty_like(cov)
    for k in range(len(cov)):
        try:
            out[k], _ = jittered_cholesky(cov[k], scale=scale, error=DegenerateCovarianceError)
        except DegenerateCovarianceError:
            raise DegenerateCovarianceError(
                f"posterior covariance of x-batch {offset + k} "
                f"({cov.shape[-1]} points) is not factorizable",
                batch=offset + k,
            ) from None
    return out


def _utility_block(model, units, z, cols, y_best, config, offset):
    """Expected utility per batch for unit-cube batches ``units`` (..., b, d)."""
    mean, cov = batched_posterior(model, units, add_noise=config.add_noise)
    lead = cov.shape[:-2]
    L = _batched_cholesky(
        cov.reshape(-1, *cov.shape[-2:]), model.params.signal_var, offset
    ).reshape(cov.shape)
    y = mean[..., None] + L @ z
    if len(cols) == 1:
        running_min = y[..., : cols[0] + 1, :].min(axis=-2, keepdims=True)
    else:
        running_min = np.minimum.accumulate(y, axis=-2)[..., cols, :]
    if config.is_ei:
        util = np.maximum(0.0, y_best - running_min)
    else:
        util = (running_min < y_best).astype(float)
    return util.mean(axis=-1).reshape(*lead, len(cols))


def _prepare(model, budgets, config, d, draws):
    budgets = [check_budget(b) for b in budgets]
    b_max = max(budgets)
    if draws is None or not draws.compatible(config, b_max, d):
        draws = CommonDraws.for_config(config, b_max, d)
    return budgets, b_max, draws, np.asarray(budgets) - 1


def batch_utilities(
    model: GpModel,
    space: SearchSpace,
    budgets: Sequence[int],
    incumbent: float,
    config: ScoreConfig,
    draws: CommonDraws | None = None,
    map_fn: Callable = map,
) -> np.ndarray:
    """Per-batch expected utilities, shape ``(n_x_batches, len(budgets))``.

    Utilities are in standardized units for EI variants. Work is split into
    fixed chunks of batches; ``map_fn`` (e.g. a thread pool's ``map``) only
    decides where the chunks run.
    """
    budgets, b_max, draws, cols = _prepare(model, budgets, config, space.d, draws)
    y_best = (incumbent - model.y_mean) / model.y_std
    chunk = max(1, _CHUNK_ELEMENTS // (b_max * config.n_posterior_samples))

    def run(start):
        stop = min(start + chunk, config.n_x_batches)
        units = model.unit(sample_from_unit(space, draws.u[start:stop, :b_max]))
        z = draws.z(start, stop)[:, :b_max]
        return _utility_block(model, units, z, cols, y_best, config, start)

    return np.concatenate(list(map_fn(run, range(0, config.n_x_batches, chunk))))


def batch_utilities_many(
    model: GpModel,
    spaces: Sequence[SearchSpace],
    budgets: Sequence[int],
    incumbent: float,
    config: ScoreConfig,
    draws: CommonDraws | None = None,
    map_fn: Callable = map,
) -> list[np.ndarray]:
    """:func:`batch_utilities` for many spaces under one set of draws.

    ``map_fn`` may be a thread pool's ``map``; it runs over spaces, or over
    batch chunks when there is a single space. The result does not depend on it.
    """
    if not spaces:
        return []
    budgets, _, draws, _ = _prepare(model, budgets, config, spaces[0].d, draws)
    if len(spaces) == 1:
        return [batch_utilities(model, spaces[0], budgets, incumbent, config, draws, map_fn)]
    return list(
        map_fn(lambda s: batch_utilities(model, s, budgets, incumbent, config, draws), spaces)
    )


def reduce_utilities(util: np.ndarray, uses_median: bool, seed: int) -> tuple[float, float]:
    """Mean or median of per-batch utilities with a standard error."""
    n = len(util)
    if not uses_median:
        se = float(np.std(util, ddof=1) / math.sqrt(n)) if n > 1 else 0.0
        return float(np.mean(util)), se
    value = float(np.median(util))
    if n == 1:
        return value, 0.0
    idx = make_rng(seed, _BOOT_STREAM).integers(0, n, size=(N_BOOTSTRAP, n))
    return value, float(np.std(np.median(util[idx], axis=1), ddof=1))


def _warn_containment(model: GpModel, space: SearchSpace) -> None:
    if not space.is_subset_of(model.space):
        warnings.warn(
            "scored space is not contained in the surrogate's training space",
            ContainmentWarning,
            stacklevel=3,
        )


def predicted_score_curve(
    model: GpModel,
    space: SearchSpace,
    budgets: Sequence[int],
    incumbent: float,
    config: ScoreConfig = ScoreConfig(),
    *,
    space_id: str = "",
    draws: CommonDraws | None = None,
) -> list[ScoreEstimate]:
    """Predicted scores over a budget sweep with coupled sampling.

    Each x-batch is drawn and factorized once at the largest budget; smaller
    budgets use its prefixes, so per-batch ``min(y)`` is exactly non-increasing
    in the budget and mean scores are exactly non-decreasing.
    """
    if not math.isfinite(incumbent):
        raise InputError(f"incumbent must be finite, got {incumbent}")
    _warn_containment(model, space)
    util = batch_utilities(model, space, budgets, incumbent, config, draws)
    return _estimates(util, model, budgets, incumbent, config, space_id)


def _estimates(util, model, budgets, incumbent, config, space_id):
    scale = model.y_std if config.is_ei else 1.0
    out = []
    for k, b in enumerate(budgets):
        value, se = reduce_utilities(util[:, k], config.uses_median, config.seed)
        out.append(
            ScoreEstimate(value * scale, se * scale, config, int(b), float(incumbent), space_id)
        )
    return out


def predicted_score_curves(
    model: GpModel,
    spaces: Sequence[tuple[str, SearchSpace]],
    budgets: Sequence[int],
    incumbent: float,
    config: ScoreConfig = ScoreConfig(),
    *,
    draws: CommonDraws | None = None,
    map_fn: Callable = map,
) -> dict[str, list[ScoreEstimate]]:
    """Predicted score curves for labelled spaces, all under the same draws."""
    if not math.isfinite(incumbent):
        raise InputError(f"incumbent must be finite, got {incumbent}")
    for _, space in spaces:
        _warn_containment(model, space)
    utils = batch_utilities_many(
        model, [s for _, s in spaces], budgets, incumbent, config, draws, map_fn
    )
    return {
        sid: _estimates(util, model, budgets, incumbent, config, sid)
        for (sid, _), util in zip(spaces, utils)
    }


def predicted_score(
    model: GpModel,
    space: SearchSpace,
    budget: int,
    incumbent: float,
    config: ScoreConfig = ScoreConfig(),
    *,
    space_id: str = "",
    draws: CommonDraws | None = None,
) -> ScoreEstimate:
    """Monte Carlo estimate of the expected batch utility of ``space`` at ``budget``."""
    return predicted_score_curve(
        model, space, [budget], incumbent, config, space_id=space_id, draws=draws
    )[0]


def _empirical_from_minima(
    minima: np.ndarray, incumbent: float, variant: str, budgets, n_trials, seed, space_id
):
    config = ScoreConfig(variant, n_x_batches=n_trials, n_posterior_samples=1, seed=seed)
    out = []
    for k, b in enumerate(budgets):
        if config.is_ei:
            util = np.maximum(0.0, incumbent - minima[:, k])
        else:
            util = (minima[:, k] < incumbent).astype(float)
        value, se = reduce_utilities(util, config.uses_median, seed)
        out.append(ScoreEstimate(value, se, config, int(b), float(incumbent), space_id))
    return out


def empirical_score_curve(
    objective: Callable,
    space: SearchSpace,
    budgets: Sequence[int],
    incumbent: float,
    variant: Variant = "mean-bEI",
    n_trials: int = 1000,
    seed: int = 0,
    *,
    space_id: str = "",
) -> list[ScoreEstimate]:
    """Empirical scores from true evaluations, coupled across ``budgets``.

    ``objective`` maps an ``(n, d)`` array of natural-unit points to ``n`` values.
    """
    _check_variant(variant)
    budgets = [check_budget(b) for b in budgets]
    if n_trials < 1:
        raise InputError("n_trials must be >= 1")
    b_max = max(budgets)
    u = np.stack([make_rng(seed, _X_STREAM, i).random((b_max, space.d)) for i in range(n_trials)])
    x = sample_from_unit(space, u)
    y = evaluate(objective, x.reshape(-1, space.d)).reshape(n_trials, b_max)
    minima = np.minimum.accumulate(y, axis=1)[:, np.asarray(budgets) - 1]
    return _empirical_from_minima(minima, incumbent, variant, budgets, n_trials, seed, space_id)


def empirical_score(
    objective: Callable,
    space: SearchSpace,
    budget: int,
    incumbent: float,
    variant: Variant = "mean-bEI",
    n_trials: int = 1000,
    seed: int = 0,
    *,
    space_id: str = "",
) -> ScoreEstimate:
    return empirical_score_curve(
        objective, space, [budget], incumbent, variant, n_trials, seed, space_id=space_id
    )[0]


def tabular_empirical_score_curve(
    table: Dataset,
    space: SearchSpace,
    budgets: Sequence[int],
    incumbent: float,
    variant: Variant = "mean-bEI",
    n_trials: int = 1000,
    seed: int = 0,
    *,
    space_id: str = "",
) -> list[ScoreEstimate]:
    """Empirical scores from pre-collected rows: batches are drawn with
    replacement from the table rows lying inside ``space``."""
    _check_variant(variant)
    budgets = [check_budget(b) for b in budgets]
    support = table.restrict(space).y
    if len(support) == 0:
        raise NoSupportError("no table rows lie inside the space")
    b_max = max(budgets)
    idx = make_rng(seed, _X_STREAM).integers(0, len(support), size=(n_trials, b_max))
    minima = np.minimum.accumulate(support[idx], axis=1)[:, np.asarray(budgets) - 1]
    return _empirical_from_minima(minima, incumbent, variant, budgets, n_trials, seed, space_id)


def tabular_empirical_score(
    table: Dataset,
    space: SearchSpace,
    budget: int,
    incumbent: float,
    variant: Variant = "mean-bEI",
    n_trials: int = 1000,
    seed: int = 0,
    *,
    space_id: str = "",
) -> ScoreEstimate:
    return tabular_empirical_score_curve(
        table, space, [budget], incumbent, variant, n_trials, seed, space_id=space_id
    )[0]
