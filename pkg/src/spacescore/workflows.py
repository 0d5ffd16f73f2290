"""Decisions built on predicted scores: ranking, one-shot pruning, tune-vs-fix."""

from __future__ import annotations

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Callable, Mapping, Sequence

import numpy as np

from spacescore.core import (
    Dataset,
    Observation,
    SearchSpace,
    check_budget,
    evaluate,
    make_rng,
    sub_seed,
    uniform_sample,
)
from spacescore.errors import InputError, InsufficientDataError, NoSupportError
from spacescore.gp import FitConfig, GpModel, fit
from spacescore.scoring import CommonDraws, ScoreConfig, ScoreEstimate, predicted_score_curves
from spacescore.spacegen import propose_search_spaces

logger = logging.getLogger(__name__)

Sampler = Callable[[SearchSpace, int, int], Dataset]

DEFAULT_RATES = tuple(round(0.1 * k, 1) for k in range(1, 10))


def _labelled(spaces) -> list[tuple[str, SearchSpace]]:
    if isinstance(spaces, Mapping):
        items = [(str(k), v) for k, v in spaces.items()]
    else:
        spaces = list(spaces)
        if spaces and isinstance(spaces[0], tuple):
            items = [(str(k), v) for k, v in spaces]
        else:
            width = len(str(max(len(spaces) - 1, 0)))
            items = [(f"S{i:0{width}d}", s) for i, s in enumerate(spaces)]
    if not items:
        raise InputError("need at least one search space")
    ids = [k for k, _ in items]
    if len(set(ids)) != len(ids):
        raise InputError(f"duplicate space ids: {ids}")
    return items


def score_spaces(
    model: GpModel,
    spaces,
    budgets: Sequence[int],
    incumbent: float,
    config: ScoreConfig = ScoreConfig(),
    threads: int = 1,
) -> dict[str, list[ScoreEstimate]]:
    """Predicted score curves for several spaces under common random numbers.

    Every space is scored with ``config.seed``; identical spaces therefore get
    identical scores. The result does not depend on ``threads``.
    """
    items = _labelled(spaces)
    budgets = [check_budget(b) for b in budgets]
    draws = CommonDraws.for_config(config, max(budgets), model.space.d)
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            return predicted_score_curves(
                model, items, budgets, incumbent, config, draws=draws, map_fn=pool.map
            )
    return predicted_score_curves(model, items, budgets, incumbent, config, draws=draws)


@dataclass(frozen=True)
class RankingResult:
    """Scores sorted best first; ties are broken by ascending space id."""

    entries: list[tuple[str, ScoreEstimate]]
    budget: int

    @classmethod
    def from_scores(cls, scores: Mapping[str, ScoreEstimate], budget: int) -> RankingResult:
        entries = sorted(scores.items(), key=lambda kv: (-kv[1].value, kv[0]))
        return cls(entries, budget)

    @property
    def order(self) -> list[str]:
        return [sid for sid, _ in self.entries]

    @property
    def best(self) -> str:
        return self.entries[0][0]

    def to_dict(self) -> dict:
        return {
            "budget": self.budget,
            "ranking": [
                {"rank": i + 1, "space_id": sid, "value": est.value, "std_error": est.std_error}
                for i, (sid, est) in enumerate(self.entries)
            ],
        }


def rank_spaces_curve(
    data: Dataset,
    spaces,
    budgets: Sequence[int],
    config: ScoreConfig = ScoreConfig(),
    *,
    model: GpModel | None = None,
    fit_seed: int = 0,
    fit_config: FitConfig = FitConfig(),
    threads: int = 1,
) -> list[RankingResult]:
    """Fit once on ``data`` and rank ``spaces`` at each budget (coupled sweep)."""
    items = _labelled(spaces)
    if model is None:
        model = fit(data, fit_seed, fit_config)
    curves = score_spaces(model, items, budgets, data.incumbent, config, threads)
    return [
        RankingResult.from_scores({sid: curve[k] for sid, curve in curves.items()}, int(b))
        for k, b in enumerate(budgets)
    ]


def rank_spaces(
    data: Dataset,
    spaces,
    budget: int,
    config: ScoreConfig = ScoreConfig(),
    **kwargs,
) -> RankingResult:
    """Rank spaces by predicted score at ``budget`` with the dataset's best value as
    incumbent."""
    return rank_spaces_curve(data, spaces, [budget], config, **kwargs)[0]


def uniform_sampler(objective: Callable) -> Sampler:
    """Random search: ``n`` uniform points in the space, evaluated."""

    def sample(space: SearchSpace, n: int, seed: int) -> Dataset:
        x = uniform_sample(space, n, seed)
        return Dataset(space, x, evaluate(objective, x))

    return sample


def table_sampler(table: Dataset) -> Sampler:
    """Offline stand-in for evaluations: rows inside the space, drawn with replacement."""

    def sample(space: SearchSpace, n: int, seed: int) -> Dataset:
        rows = table.restrict(space)
        if not len(rows):
            raise NoSupportError("no table rows lie inside the space")
        idx = make_rng(seed).integers(0, len(rows), size=n)
        return Dataset(space, rows.x[idx], rows.y[idx])

    return sample


@dataclass(frozen=True)
class GenerationSettings:
    """Candidate pool for pruning: random subspaces per rate, plus the base itself."""

    rates: tuple[float, ...] = DEFAULT_RATES
    per_rate: int = 500
    include_base: bool = True


@dataclass(frozen=True)
class PruneResult:
    chosen_space: SearchSpace
    chosen_index: int
    all_scores: list[tuple[SearchSpace, ScoreEstimate]]
    phase1: Dataset
    phase2: Dataset
    best: Observation
    fell_back: bool = False
    model: GpModel | None = field(default=None, compare=False, repr=False)

    @property
    def evaluations(self) -> Dataset:
        return self.phase1.concat(self.phase2)

    def to_dict(self) -> dict:
        chosen_est = self.all_scores[self.chosen_index][1] if self.chosen_index >= 0 else None
        return {
            "chosen_space": self.chosen_space.to_dict(),
            "chosen_index": self.chosen_index,
            "chosen_score": chosen_est.to_dict() if chosen_est else None,
            "fell_back_to_base": self.fell_back,
            "n_candidates": len(self.all_scores),
            "best": {"x": list(self.best.x), "y": self.best.y},
            "phase1": {"x": self.phase1.x.tolist(), "y": self.phase1.y.tolist()},
            "phase2": {"x": self.phase2.x.tolist(), "y": self.phase2.y.tolist()},
        }


def one_shot_prune(
    objective: Callable | None,
    base: SearchSpace,
    b1: int,
    b2: int,
    gen: GenerationSettings = GenerationSettings(),
    config: ScoreConfig = ScoreConfig(),
    seed: int = 0,
    *,
    sampler: Sampler | None = None,
    fit_config: FitConfig = FitConfig(),
    threads: int = 1,
) -> PruneResult:
    """Spend ``b1`` evaluations on ``base``, move the remaining ``b2`` into the
    max-scoring candidate subspace, and return the best point seen.

    ``sampler`` replaces random search for either phase (e.g. :func:`table_sampler`).
    Falls back to ``base`` when every candidate scores zero.
    """
    b1, b2 = check_budget(b1), check_budget(b2)
    if b1 < 2:
        raise InsufficientDataError("b1 must be >= 2 to fit the surrogate")
    if sampler is None:
        if objective is None:
            raise InputError("need an objective or a sampler")
        sampler = uniform_sampler(objective)

    phase1 = sampler(base, b1, sub_seed(seed, 1))
    model = fit(phase1, sub_seed(seed, 2), fit_config)
    candidates = propose_search_spaces(base, gen.rates, gen.per_rate, sub_seed(seed, 3))
    if gen.include_base:
        candidates = [base.with_provenance(method="base", rate=1.0)] + candidates
    labelled = [(f"C{i:05d}", s) for i, s in enumerate(candidates)]
    curves = score_spaces(model, labelled, [b2], phase1.incumbent, config, threads)
    scores = [curves[sid][0] for sid, _ in labelled]
    values = np.array([s.value for s in scores])

    fell_back = not np.any(values > 0)
    if fell_back:
        logger.warning("every candidate scored zero; keeping the base space")
        chosen_index = 0 if gen.include_base else -1
        chosen = base.with_provenance(method="base", rate=1.0)
    else:
        chosen_index = int(np.argmax(values))
        chosen = candidates[chosen_index]

    phase2 = sampler(chosen, b2, sub_seed(seed, 5))
    phase2 = Dataset(base, phase2.x, phase2.y)
    return PruneResult(
        chosen_space=chosen,
        chosen_index=chosen_index,
        all_scores=list(zip(candidates, scores)),
        phase1=phase1,
        phase2=phase2,
        best=phase1.concat(phase2).best,
        fell_back=fell_back,
        model=model,
    )


@dataclass(frozen=True)
class TuneOrFixResult:
    scored: list[tuple[str, ScoreEstimate]]
    recommendation: str
    budget: int

    def to_dict(self) -> dict:
        return {
            "budget": self.budget,
            "recommendation": self.recommendation,
            "scores": {label: est.to_dict() for label, est in self.scored},
        }


def fixed_value_spaces(
    base: SearchSpace, dim: str, fixed_values: Sequence[float]
) -> list[tuple[str, SearchSpace]]:
    """``[("tune", base), ("<dim>=<value>", base with dim pinned), ...]``."""
    domain = base[dim]
    out = [("tune", base)]
    for value in fixed_values:
        out.append((f"{dim}={value:g}", base.replace_dim(dim, domain.fixed(value))))
    return out


def tune_or_fix_curve(
    data: Dataset,
    base: SearchSpace,
    dim: str,
    fixed_values: Sequence[float],
    budgets: Sequence[int],
    config: ScoreConfig = ScoreConfig(),
    **kwargs,
) -> list[TuneOrFixResult]:
    """Compare tuning ``dim`` over its range against pinning it to each value.

    The surrogate keeps all ``d`` inputs, so one model scores every variant.
    """
    labelled = fixed_value_spaces(base, dim, fixed_values)
    rankings = rank_spaces_curve(data, labelled, budgets, config, **kwargs)
    results = []
    for ranking in rankings:
        by_label = dict(ranking.entries)
        scored = [(label, by_label[label]) for label, _ in labelled]
        results.append(TuneOrFixResult(scored, ranking.best, ranking.budget))
    return results


def tune_or_fix(
    data: Dataset,
    base: SearchSpace,
    dim: str,
    fixed_values: Sequence[float],
    budget: int,
    config: ScoreConfig = ScoreConfig(),
    **kwargs,
) -> TuneOrFixResult:
    return tune_or_fix_curve(data, base, dim, fixed_values, [budget], config, **kwargs)[0]


@dataclass(frozen=True)
class RankPreservation:
    """Agreement of predicted with empirical orderings, by empirical-gap quantile."""

    accuracy: np.ndarray
    std_error: np.ndarray
    counts: np.ndarray
    edges: np.ndarray
    mode: str

    def to_rows(self) -> list[dict]:
        n = len(self.accuracy)
        return [
            {
                "bin": f"{100 * k // n}-{100 * (k + 1) // n}%",
                "accuracy": float(self.accuracy[k]),
                "std_error": float(self.std_error[k]),
                "pairs": int(self.counts[k]),
            }
            for k in range(n)
        ]


def rank_preservation_probability(
    empirical: Sequence[float],
    predicted: Sequence[float],
    n_pairs: int = 2000,
    n_bins: int = 4,
    mode: str = "random",
    seed: int = 0,
) -> RankPreservation:
    """Frequency with which ``emp(S1) > emp(S2)`` implies ``pred(S1) > pred(S2)``.

    Pairs are two random pool members (``mode="random"``) or the empirically best
    member against a random other (``mode="max"``). Pairs with tied empirical
    scores carry no ordering and are dropped. A tie in the predicted scores
    counts as half an agreement, the expected outcome of breaking it at random.
    Bins split the remaining pairs at quantiles of ``|emp(S1) - emp(S2)|``.
    """
    emp = np.asarray(empirical, dtype=float)
    pred = np.asarray(predicted, dtype=float)
    if len(emp) != len(pred):
        raise InputError("empirical and predicted scores differ in length")
    if len(emp) < 2:
        raise InputError("need a pool of at least 2 spaces")
    rng = make_rng(seed)
    if mode == "random":
        i = rng.integers(0, len(emp), size=n_pairs)
        j = (i + rng.integers(1, len(emp), size=n_pairs)) % len(emp)
    elif mode == "max":
        star = int(np.argmax(emp))
        others = np.delete(np.arange(len(emp)), star)
        i = np.full(n_pairs, star)
        j = others[rng.integers(0, len(others), size=n_pairs)]
    else:
        raise InputError(f"unknown mode {mode!r}")
    gap = emp[i] - emp[j]
    keep = gap != 0
    i, j, gap = i[keep], j[keep], gap[keep]
    hi = np.where(gap > 0, i, j)
    lo = np.where(gap > 0, j, i)
    agree = (pred[hi] > pred[lo]) + 0.5 * (pred[hi] == pred[lo])
    dist = np.abs(gap)
    edges = np.quantile(dist, np.linspace(0, 1, n_bins + 1)) if len(dist) else np.zeros(n_bins + 1)
    # Rank-based binning keeps equal-count bins even when distances repeat.
    order = np.argsort(dist, kind="stable")
    bins = np.empty(len(dist), dtype=int)
    bins[order] = np.arange(len(dist)) * n_bins // max(len(dist), 1)
    acc = np.full(n_bins, np.nan)
    se = np.full(n_bins, np.nan)
    counts = np.zeros(n_bins, dtype=int)
    for k in range(n_bins):
        sel = agree[bins == k]
        counts[k] = len(sel)
        if len(sel):
            p = sel.mean()
            acc[k] = p
            se[k] = np.sqrt(p * (1 - p) / len(sel))
    return RankPreservation(acc, se, counts, edges, mode)


def with_seed(config: ScoreConfig, seed: int) -> ScoreConfig:
    return replace(config, seed=seed)
