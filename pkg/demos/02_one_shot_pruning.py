"""
One round of pruning on Hartmann-6
==================================

Half the budget goes to random search over the unit cube. A GP fit on those
30 points scores 4501 candidate boxes, and the other half of the budget is
spent inside the winner. We compare the result with simply continuing random
search.

This runs a single repeat; the statistics over 100 repeats come from
``spacescore reproduce --experiment hartmann-pruning``.
"""

# %%
import time

import numpy as np

from spacescore.bench.experiments import PruningExperiment
from spacescore.bench.objectives import BASE_SPACES, make_objective
from spacescore.core import volume
from spacescore.workflows import GenerationSettings, one_shot_prune

# %%
exp = PruningExperiment()  # b1 = b2 = 30, rates 0.1..0.9, 500 boxes per rate
seed = 11
objective = make_objective("hartmann6")
base = BASE_SPACES["hartmann6"]

start = time.perf_counter()
result = one_shot_prune(
    objective,
    base,
    exp.b1,
    exp.b2,
    GenerationSettings(exp.rates, exp.per_rate, exp.include_base),
    exp.score_config(seed),
    seed,
)
print(f"scored {len(result.all_scores)} candidates in {time.perf_counter() - start:.1f}s")

# %%
chosen = result.chosen_space
print("fell back to the base space:", result.fell_back)
print("chosen volume share:", round(volume(chosen) / volume(base), 3))
for dim in chosen.dims:
    print(f"  {dim.name}: [{dim.lower:.3f}, {dim.upper:.3f}]")

# %% [markdown]
# The top of the candidate list shows how concentrated the scores are.

# %%
values = np.array([est.value for _, est in result.all_scores])
top = np.argsort(values)[::-1][:5]
for i in top:
    space, est = result.all_scores[i]
    rate = (space.provenance or {}).get("rate")
    print(f"  candidate {i:4d}  rate {rate}  score {est.value:.4f} +- {est.std_error:.4f}")

# %%
logs = exp(seed)
print(f"\nbest after phase one: {result.phase1.y.min():.4f}")
print(f"pruned search, 60 points:  {logs['pruned'].best:.4f}")
print(f"random search, 60 points:  {logs['baseline'].best:.4f}")
print(f"global minimum:            {-3.32237:.4f}")
