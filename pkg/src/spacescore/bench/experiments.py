"""Desk-scale reproduction drivers.

Each driver takes a seed plus a few size knobs and returns an
:class:`ExperimentResult`: named tables (field list plus rows) and a JSON-able
summary. Rendering to files is left to the caller.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field, fields
from typing import Callable

import numpy as np
from scipy import stats

from spacescore.bench.objectives import BASE_SPACES, make_objective
from spacescore.bench.study import Aggregate, StudyLog, replicate
from spacescore.core import Dataset, SearchSpace, evaluate, sub_seed, uniform_sample, volume
from spacescore.errors import InputError
from spacescore.gp import fit
from spacescore.scoring import VARIANTS, ScoreConfig, empirical_score_curve
from spacescore.spacegen import centered_subspace, propose_search_spaces
from spacescore.workflows import (
    DEFAULT_RATES,
    GenerationSettings,
    one_shot_prune,
    rank_preservation_probability,
    score_spaces,
)

Table = tuple[list[str], list[dict]]


@dataclass
class ExperimentResult:
    name: str
    tables: dict[str, Table] = field(default_factory=dict)
    summary: dict = field(default_factory=dict)


def _f(x: float) -> str:
    return repr(float(x))


# --------------------------------------------------------------------------
# One-shot pruning against plain random search


@dataclass(frozen=True)
class PruningExperiment:
    """Pruned two-phase search against random search with the same total budget.

    Both arms share the first ``b1`` evaluations. The baseline continues with
    ``b2`` further uniform points on the base space; when pruning falls back to
    the base it draws those very points, so the two arms then tie exactly.
    """

    objective: str = "hartmann6"
    b1: int = 30
    b2: int = 30
    rates: tuple[float, ...] = DEFAULT_RATES
    per_rate: int = 500
    include_base: bool = True
    variant: str = "mean-bEI"
    n_x_batches: int = 32
    n_posterior_samples: int = 32
    noise_sd: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "rates", tuple(float(r) for r in self.rates))
        if self.objective not in BASE_SPACES:
            raise InputError(f"unknown objective {self.objective!r}")

    @classmethod
    def from_dict(cls, doc: dict) -> PruningExperiment:
        known = {f.name for f in fields(cls)}
        unknown = set(doc) - known
        if unknown:
            raise InputError(f"unknown experiment keys: {sorted(unknown)}")
        return cls(**doc)

    def to_dict(self) -> dict:
        out = asdict(self)
        out["rates"] = list(self.rates)
        return out

    def score_config(self, seed: int) -> ScoreConfig:
        return ScoreConfig(
            self.variant, self.n_x_batches, self.n_posterior_samples, sub_seed(seed, 4)
        )

    def run(self, seed: int) -> dict[str, StudyLog]:
        objective = make_objective(self.objective, self.noise_sd, sub_seed(seed, 6))
        base = BASE_SPACES[self.objective]
        gen = GenerationSettings(self.rates, self.per_rate, self.include_base)
        result = one_shot_prune(
            objective, base, self.b1, self.b2, gen, self.score_config(seed), seed
        )
        tail = uniform_sample(base, self.b2, sub_seed(seed, 5))
        tail_y = evaluate(objective, tail)
        pruned = result.evaluations
        return {
            "pruned": StudyLog(pruned.x, pruned.y, self.b1),
            "baseline": StudyLog(
                np.vstack([result.phase1.x, tail]),
                np.concatenate([result.phase1.y, tail_y]),
                self.b1,
            ),
        }

    __call__ = run


@dataclass(frozen=True)
class PruningComparison:
    aggregate: Aggregate
    p_value: float
    mean_gain: np.ndarray  # baseline minus pruned best-so-far, per step

    @property
    def final_gain(self) -> float:
        return float(self.mean_gain[-1])

    def gain_positive_after(self, step: int) -> bool:
        """Whether the mean gain is positive at every step strictly after ``step``."""
        return bool(np.all(self.mean_gain[step:] > 0))


def compare_pruning(aggregate: Aggregate) -> PruningComparison:
    """Paired one-sided t-test of final best values (pruned < baseline)."""
    pruned = aggregate.final("pruned")
    baseline = aggregate.final("baseline")
    diff = baseline - pruned
    if np.all(diff == 0):
        p = 1.0
    else:
        p = float(stats.ttest_rel(pruned, baseline, alternative="less").pvalue)
    gain = (aggregate.curves["baseline"] - aggregate.curves["pruned"]).mean(axis=0)
    return PruningComparison(aggregate, p, gain)


def _pruning_result(
    name: str, exp: PruningExperiment, n_repeats: int, seed: int, workers: int
) -> ExperimentResult:
    agg = replicate(exp, n_repeats, seed, workers)
    cmp = compare_pruning(agg)
    finals = [
        {
            "repeat": k,
            "pruned": _f(agg.final("pruned")[k]),
            "baseline": _f(agg.final("baseline")[k]),
        }
        for k in range(agg.n_repeats)
    ]
    return ExperimentResult(
        name,
        tables={
            "curves": (["series", "step", "mean", "std_error", "n_repeats"], agg.rows()),
            "finals": (["repeat", "pruned", "baseline"], finals),
        },
        summary={
            "experiment": exp.to_dict(),
            "n_repeats": n_repeats,
            "seed": seed,
            "mean_final_pruned": float(agg.final("pruned").mean()),
            "mean_final_baseline": float(agg.final("baseline").mean()),
            "paired_one_sided_p": cmp.p_value,
            "gain_positive_after_b1_plus_10": cmp.gain_positive_after(exp.b1 + 10),
        },
    )


def hartmann_pruning(
    seed: int = 0,
    n_repeats: int = 100,
    workers: int = 1,
    n_x_batches: int = 32,
    n_posterior_samples: int = 32,
    per_rate: int = 500,
) -> ExperimentResult:
    exp = PruningExperiment(
        "hartmann6",
        30,
        30,
        per_rate=per_rate,
        n_x_batches=n_x_batches,
        n_posterior_samples=n_posterior_samples,
    )
    return _pruning_result("hartmann-pruning", exp, n_repeats, seed, workers)


def budget_splits(
    seed: int = 0,
    n_repeats: int = 20,
    workers: int = 1,
    n_x_batches: int = 32,
    n_posterior_samples: int = 32,
    per_rate: int = 100,
    total: int = 50,
    splits: tuple[int, ...] = (15, 25, 35),
) -> ExperimentResult:
    """Sensitivity of pruning to how ``total`` is split between the phases."""
    rows, summary = [], {}
    for b1 in splits:
        exp = PruningExperiment(
            "hartmann6",
            b1,
            total - b1,
            per_rate=per_rate,
            n_x_batches=n_x_batches,
            n_posterior_samples=n_posterior_samples,
        )
        res = _pruning_result("split", exp, n_repeats, seed, workers)
        for row in res.tables["curves"][1]:
            rows.append({"b1": b1, **row})
        summary[f"b1={b1}"] = {
            k: res.summary[k]
            for k in ("mean_final_pruned", "mean_final_baseline", "paired_one_sided_p")
        }
    fields_ = ["b1", "series", "step", "mean", "std_error", "n_repeats"]
    return ExperimentResult("budget-splits", {"curves": (fields_, rows)}, summary)


def score_variants(
    seed: int = 0,
    n_repeats: int = 20,
    workers: int = 1,
    n_x_batches: int = 32,
    n_posterior_samples: int = 32,
    per_rate: int = 100,
) -> ExperimentResult:
    """Pruning with each of the four score variants on Hartmann-6 (B = 60)."""
    rows, summary = [], {}
    for variant in VARIANTS:
        exp = PruningExperiment(
            "hartmann6",
            30,
            30,
            per_rate=per_rate,
            variant=variant,
            n_x_batches=n_x_batches,
            n_posterior_samples=n_posterior_samples,
        )
        res = _pruning_result("variant", exp, n_repeats, seed, workers)
        for row in res.tables["curves"][1]:
            rows.append({"variant": variant, **row})
        summary[variant] = {
            k: res.summary[k]
            for k in ("mean_final_pruned", "mean_final_baseline", "paired_one_sided_p")
        }
    fields_ = ["variant", "series", "step", "mean", "std_error", "n_repeats"]
    return ExperimentResult("score-variants", {"curves": (fields_, rows)}, summary)


# --------------------------------------------------------------------------
# Branin: three spaces compared across budgets

BRANIN_BUDGETS = (1, 5, 10, 25, 50, 75, 100)


@dataclass(frozen=True)
class BraninSetup:
    data: Dataset
    spaces: dict[str, SearchSpace]


def branin_setup(seed: int, n_seed_points: int = 15, rho: float = 0.1) -> BraninSetup:
    """Uniform seed points plus the base and two subspaces centred on the best
    (``S1``) and worst (``S2``) observations."""
    base = BASE_SPACES["branin"]
    x = uniform_sample(base, n_seed_points, sub_seed(seed, 1))
    data = Dataset(base, x, evaluate(make_objective("branin"), x))
    return BraninSetup(data, centred_spaces(data, rho))


def centred_spaces(data: Dataset, rho: float = 0.1) -> dict[str, SearchSpace]:
    base = data.space
    return {
        "X": base,
        "S1": centered_subspace(base, data.x[int(np.argmin(data.y))], rho),
        "S2": centered_subspace(base, data.x[int(np.argmax(data.y))], rho),
    }


def branin_scores(
    seed: int,
    budgets=BRANIN_BUDGETS,
    n_x_batches: int = 200,
    n_posterior_samples: int = 200,
    empirical_trials: int = 0,
    data: Dataset | None = None,
) -> tuple[BraninSetup, dict, dict]:
    """Predicted (and optionally empirical) mean-bEI curves for X, S1, S2."""
    setup = branin_setup(seed) if data is None else BraninSetup(data, centred_spaces(data))
    model = fit(setup.data, sub_seed(seed, 2))
    config = ScoreConfig("mean-bEI", n_x_batches, n_posterior_samples, sub_seed(seed, 3))
    predicted = score_spaces(model, setup.spaces, budgets, setup.data.incumbent, config)
    empirical = {}
    if empirical_trials:
        objective = make_objective("branin")
        for sid, space in setup.spaces.items():
            empirical[sid] = empirical_score_curve(
                objective,
                space,
                budgets,
                setup.data.incumbent,
                "mean-bEI",
                empirical_trials,
                sub_seed(seed, 7),
                space_id=sid,
            )
    return setup, predicted, empirical


def _curve_rows(predicted: dict, empirical: dict) -> list[dict]:
    rows = []
    for sid, curve in predicted.items():
        for k, est in enumerate(curve):
            row = {
                "space_id": sid,
                "budget": est.budget,
                "predicted": _f(est.value),
                "predicted_se": _f(est.std_error),
            }
            if sid in empirical:
                row["empirical"] = _f(empirical[sid][k].value)
                row["empirical_se"] = _f(empirical[sid][k].std_error)
            rows.append(row)
    return rows


def _worst_everywhere(predicted: dict, sid: str) -> bool:
    others = [k for k in predicted if k != sid]
    return all(
        all(predicted[sid][k].value < predicted[o][k].value for o in others)
        for k in range(len(predicted[sid]))
    )


def branin_ranking(
    seed: int = 0,
    n_seeds: int = 10,
    n_x_batches: int = 200,
    n_posterior_samples: int = 200,
    empirical_trials: int = 1000,
    budgets=BRANIN_BUDGETS,
) -> ExperimentResult:
    """Predicted and empirical curves for X, S1 and S2 over several data seeds."""
    rows, per_seed = [], []
    for k in range(n_seeds):
        s = sub_seed(seed, k)
        setup, pred, emp = branin_scores(
            s, budgets, n_x_batches, n_posterior_samples, empirical_trials
        )
        for row in _curve_rows(pred, emp):
            rows.append({"repeat": k, **row})
        x_over_s1 = [
            int(b) for b, ex, e1 in zip(budgets, pred["X"], pred["S1"]) if ex.value > e1.value
        ]
        per_seed.append(
            {
                "repeat": k,
                "seed": s,
                "incumbent": setup.data.incumbent,
                "s2_lowest_at_all_budgets": _worst_everywhere(pred, "S2"),
                "budgets_where_x_beats_s1": x_over_s1,
                "volume_ratio_s1": volume(setup.spaces["S1"]) / volume(setup.spaces["X"]),
                "volume_ratio_s2": volume(setup.spaces["S2"]) / volume(setup.spaces["X"]),
            }
        )
    fields_ = ["repeat", "space_id", "budget", "predicted", "predicted_se"]
    if empirical_trials:
        fields_ += ["empirical", "empirical_se"]
    return ExperimentResult(
        "branin-ranking",
        {"curves": (fields_, rows)},
        {
            "budgets": list(budgets),
            "s2_lowest_count": sum(r["s2_lowest_at_all_budgets"] for r in per_seed),
            "n_seeds": n_seeds,
            "per_seed": per_seed,
        },
    )


# --------------------------------------------------------------------------
# Rank preservation on a pool of random subspaces


def rank_preservation_run(
    seed: int,
    n_data: int = 20,
    budget: int = 15,
    per_rate: int = 50,
    n_pairs: int = 2000,
    n_bins: int = 4,
    n_x_batches: int = 64,
    n_posterior_samples: int = 64,
    empirical_trials: int = 500,
    mode: str = "random",
):
    """One run: fit on ``n_data`` Hartmann points, score the pool both ways and
    measure how often the empirical order is preserved."""
    base = BASE_SPACES["hartmann6"]
    objective = make_objective("hartmann6")
    x = uniform_sample(base, n_data, sub_seed(seed, 1))
    data = Dataset(base, x, evaluate(objective, x))
    pool = propose_search_spaces(base, DEFAULT_RATES, per_rate, sub_seed(seed, 3))
    model = fit(data, sub_seed(seed, 2))
    config = ScoreConfig("mean-bEI", n_x_batches, n_posterior_samples, sub_seed(seed, 4))
    predicted = score_spaces(model, pool, [budget], data.incumbent, config)
    pred = np.array([curve[0].value for curve in predicted.values()])
    emp = np.array(
        [
            empirical_score_curve(
                objective, s, [budget], data.incumbent, "mean-bEI", empirical_trials,
                sub_seed(seed, 7),
            )[0].value
            for s in pool
        ]
    )
    return rank_preservation_probability(emp, pred, n_pairs, n_bins, mode, sub_seed(seed, 8))


def rank_preservation(
    seed: int = 0,
    n_runs: int = 10,
    mode: str = "random",
    **kwargs,
) -> ExperimentResult:
    runs = [rank_preservation_run(sub_seed(seed, k), mode=mode, **kwargs) for k in range(n_runs)]
    acc = np.array([r.accuracy for r in runs])
    mean = np.nanmean(acc, axis=0)
    se = np.nanstd(acc, axis=0, ddof=1) / math.sqrt(n_runs) if n_runs > 1 else np.zeros_like(mean)
    labels = [row["bin"] for row in runs[0].to_rows()]
    rows = [
        {"bin": labels[k], "accuracy": _f(mean[k]), "std_error": _f(se[k]), "runs": n_runs}
        for k in range(len(mean))
    ]
    per_run = [
        {"run": k, **{f"bin{j}": _f(a) for j, a in enumerate(r.accuracy)}}
        for k, r in enumerate(runs)
    ]
    return ExperimentResult(
        "rank-preservation",
        {
            "accuracy": (["bin", "accuracy", "std_error", "runs"], rows),
            "runs": (["run"] + [f"bin{j}" for j in range(len(mean))], per_run),
        },
        {
            "mode": mode,
            "mean_accuracy": mean.tolist(),
            "top_minus_bottom": float(mean[-1] - mean[0]),
        },
    )


# --------------------------------------------------------------------------
# Failure mode: a surrogate fit on a bad region


def bad_branin_data(seed: int, n_points: int = 5, pool: int = 200) -> Dataset:
    """The ``n_points`` worst of ``pool`` uniform Branin evaluations."""
    base = BASE_SPACES["branin"]
    x = uniform_sample(base, pool, sub_seed(seed, 1))
    y = evaluate(make_objective("branin"), x)
    worst = np.argsort(y, kind="stable")[-n_points:]
    return Dataset(base, x[worst], y[worst])


def failure_mode(
    seed: int = 0,
    n_x_batches: int = 200,
    n_posterior_samples: int = 200,
    empirical_trials: int = 1000,
    budgets=BRANIN_BUDGETS,
) -> ExperimentResult:
    """Score X, S1 and S2 from five observations taken in a bad region and
    contrast the predicted spread with the empirical one."""
    data = bad_branin_data(seed)
    _, pred, emp = branin_scores(
        seed, budgets, n_x_batches, n_posterior_samples, empirical_trials, data=data
    )

    def spread(curves):
        vals = np.array([[est.value for est in c] for c in curves.values()])
        return float(np.max(vals.max(axis=0) - vals.min(axis=0)))

    pred_spread, emp_spread = spread(pred), spread(emp)
    lines = [
        f"Surrogate fit on {len(data)} Branin points from a bad region "
        f"(objective values {data.y.min():.1f} to {data.y.max():.1f}).",
        f"Largest gap between predicted scores of X, S1, S2: {pred_spread:.4g}.",
        f"Largest gap between empirical scores of the same spaces: {emp_spread:.4g}.",
    ]
    if emp_spread > 0 and pred_spread < 0.5 * emp_spread:
        lines.append(
            "Predicted scores separate the spaces far less than their empirical scores do: "
            "with seed data this poor, the surrogate has little to say."
        )
    else:
        lines.append("In this draw the predicted scores still separate the spaces.")
    return ExperimentResult(
        "failure-mode",
        {"curves": (["space_id", "budget", "predicted", "predicted_se", "empirical",
                     "empirical_se"], _curve_rows(pred, emp))},
        {
            "n_points": len(data),
            "predicted_spread": pred_spread,
            "empirical_spread": emp_spread,
            "report": "\n".join(lines),
        },
    )


EXPERIMENTS: dict[str, Callable[..., ExperimentResult]] = {
    "branin-ranking": branin_ranking,
    "hartmann-pruning": hartmann_pruning,
    "rank-preservation": rank_preservation,
    "budget-splits": budget_splits,
    "score-variants": score_variants,
    "failure-mode": failure_mode,
}
