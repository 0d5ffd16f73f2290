"""
Comparing three search spaces on Branin
=======================================

Fifteen random evaluations of Branin are enough to tell a promising region
from a hopeless one. We score the full domain X, a box around the best point
seen (S1) and a box around the worst (S2), then check the predictions against
scores computed from real evaluations.

Run with ``python demos/01_branin_three_spaces.py``.
"""

# %%
from spacescore.bench.experiments import BRANIN_BUDGETS, branin_scores
from spacescore.core import volume

# %% [markdown]
# ``branin_scores`` draws the seed points, builds the three spaces (each
# subspace holds about a tenth of the domain's volume), fits a GP and scores
# every space at every budget with the same random numbers.

# %%
setup, predicted, empirical = branin_scores(
    seed=3, n_x_batches=300, n_posterior_samples=300, empirical_trials=2000
)
print(f"best of {len(setup.data)} seed points: {setup.data.incumbent:.3f}")
for sid, space in setup.spaces.items():
    lo, hi = space.t_lower, space.t_upper
    share = volume(space) / volume(setup.spaces["X"])
    print(f"  {sid:2s} x0 in [{lo[0]:6.2f}, {hi[0]:6.2f}]  x1 in [{lo[1]:6.2f}, {hi[1]:6.2f}]"
          f"  volume share {share:.3f}")

# %%
print("\nbudget " + "".join(f"{sid + ' pred':>10s}{sid + ' emp':>10s}" for sid in predicted))
for k, b in enumerate(BRANIN_BUDGETS):
    cells = "".join(
        f"{predicted[sid][k].value:10.3f}{empirical[sid][k].value:10.3f}" for sid in predicted
    )
    print(f"{b:6d} {cells}")

# %% [markdown]
# S2 sits on bad terrain: both the predicted and the empirical score stay
# near zero at every budget. S1 leads at small budgets. Whether X catches up
# at large budgets depends on how much of the good region S1 happens to cover.

# %%
order = [sorted(predicted, key=lambda s: -predicted[s][k].value) for k in range(len(BRANIN_BUDGETS))]
print("\npredicted ranking per budget:")
for b, o in zip(BRANIN_BUDGETS, order):
    print(f"  b={b:3d}: {' > '.join(o)}")
print("S2 is ranked last everywhere:", all(o[-1] == "S2" for o in order))
