"""
Should dropout be tuned or fixed?
=================================

A 35-row tuning log over a seven-parameter space (learning rate, momentum,
schedule power and decay point, dropout, L2 weight and label smoothing) is
enough to ask whether searching over dropout pays off at a given budget, or
whether pinning it to 0 or 0.5 gives a better shot at beating the incumbent.

The log shipped with the package is synthetic: it was generated from a smooth
stand-in objective, not from real training runs.
"""

# %%
from importlib.resources import files

from spacescore.core import load_space, read_observations
from spacescore.scoring import ScoreConfig
from spacescore.workflows import tune_or_fix_curve

root = files("spacescore") / "data"
space = load_space(root / "spaces" / "table1_base_with_zero_dropout.json")
data = read_observations(root / "table1_sample.csv", space)
print(f"{len(data)} observations, best objective {data.incumbent:.4f}")
print("dimensions:", ", ".join(f"{d.name} ({d.scale})" for d in space.dims))

# %%
budgets = [1, 5, 10, 25, 50]
results = tune_or_fix_curve(
    data, space, "r", [0.0, 0.5], budgets, ScoreConfig(n_x_batches=300, n_posterior_samples=300)
)
labels = [label for label, _ in results[0].scored]
print("\nbudget" + "".join(f"{label:>12s}" for label in labels) + "   pick")
for res in results:
    cells = "".join(f"{est.value:12.5f}" for _, est in res.scored)
    print(f"{res.budget:6d}{cells}   {res.recommendation}")

# %% [markdown]
# Scores are expected improvements in objective units, so the columns can be
# read directly as "how much lower than the incumbent the best of b trials is
# likely to land".
