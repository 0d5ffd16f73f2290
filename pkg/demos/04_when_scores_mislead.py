"""
When predicted scores have little to say
========================================

A surrogate is only as good as its data. Here the GP sees the five worst of
200 random Branin points. Every observation lies in a bad region, so the
model has no evidence that any part of the domain is good and its scores for
X, S1 and S2 barely differ, although real evaluations separate them widely.
"""

# %%
from spacescore.bench.experiments import failure_mode

result = failure_mode(seed=0, n_x_batches=200, n_posterior_samples=200, empirical_trials=1000)
print(result.summary["report"])

# %%
fields, rows = result.tables["curves"]
print()
print(f"{'space':6s}{'budget':>7s}{'predicted':>12s}{'empirical':>12s}")
for row in rows:
    print(f"{row['space_id']:6s}{row['budget']:7d}{float(row['predicted']):12.3f}"
          f"{float(row['empirical']):12.3f}")
