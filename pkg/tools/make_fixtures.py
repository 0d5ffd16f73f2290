"""Regenerate the JSON spaces and CSV tables shipped under ``spacescore/data``.

Run from the repository root: ``python tools/make_fixtures.py``. The output is
deterministic, so a clean checkout regenerates byte-identical files.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from spacescore.bench.experiments import branin_setup
from spacescore.core import Dataset, uniform_sample, write_observations

DATA = Path(__file__).resolve().parents[1] / "src" / "spacescore" / "data"
SPACES = DATA / "spaces"

NAMES = ["eta", "one_minus_beta", "p", "tau", "r", "lambda", "gamma"]
LOG10 = {"eta", "one_minus_beta", "lambda"}
DROPOUT_GRID = [round(0.1 * k, 1) for k in range(9)]

# Bounds as printed in the source tables; log10 rows give exponents.
TABLES = {
    "table1_base": [(-5, 1), (-3, 0), (0.1, 2), (0.01, 0.99), (0.1, 0.8), (-6, -0.69), (0, 0.4)],
    "cifar100_rho025": [
        (-5, -1.18), (-3, -0.96), (0.98, 2), (0.01, 0.73), (0.1, 0.53), (-6, -3.33), (0, 0.3)
    ],
    "cifar100_rho05": [
        (-5, -0.92), (-3, -0.83), (0.9, 2), (0.01, 0.78), (0.1, 0.56), (-6, -2.99), (0, 0.2)
    ],
    "imagenet_rho025": [
        (-1.81, 1), (-2.58, -0.11), (0.1, 1.37), (0.42, 0.99), (0, 0.53), (-6, -3.65), (0.11, 0.4)
    ],
    "imagenet_rho05": [
        (-2.06, 1), (-2.7, 0), (0.1, 1.45), (0.37, 0.99), (0, 0.56), (-6, -3.42), (0.09, 0.4)
    ],
}

COMMENTS = {
    "table1_base": (
        "Base loose space. Dropout r keeps the printed range [0.1, 0.8]; the sampling grid "
        "{0, 0.1, ..., 0.8} described alongside it includes 0, which lies outside that range, "
        "so only the grid values inside the range are kept. See "
        "table1_base_with_zero_dropout.json for the variant that admits r = 0."
    ),
    "table1_base_with_zero_dropout": (
        "Base loose space with r widened to [0, 0.8] so the full dropout grid "
        "{0, 0.1, ..., 0.8}, including 0, is sampled."
    ),
}


def _natural(name: str, value: float) -> float:
    return float(10.0**value) if name in LOG10 else float(value)


def space_doc(bounds, comment: str | None = None) -> dict:
    dims = []
    for name, (lo, hi) in zip(NAMES, bounds):
        dim = {
            "name": name,
            "scale": "log10" if name in LOG10 else "linear",
            "min": _natural(name, lo),
            "max": _natural(name, hi),
        }
        if name == "r":
            grid = [g for g in DROPOUT_GRID if lo - 1e-12 <= g <= hi + 1e-12]
            if grid:
                dim["grid"] = grid
        dims.append(dim)
    doc = {"dims": dims}
    if comment:
        doc["_comment"] = comment
    return doc


def table1_proxy(x: np.ndarray) -> np.ndarray:
    """Made-up smooth stand-in for a validation error over the table-1 space."""
    eta, omb, p, tau, r, lam, gamma = x.T
    return (
        0.25
        + 0.04 * (np.log10(eta) + 1.5) ** 2
        + 0.03 * (np.log10(omb) + 1.2) ** 2
        + 0.02 * (p - 1.0) ** 2
        + 0.03 * (tau - 0.7) ** 2
        + 0.05 * (r - 0.3) ** 2
        + 0.004 * (np.log10(lam) + 4.0) ** 2
        + 0.02 * (gamma - 0.1) ** 2
    )


def write_json(path: Path, doc: dict) -> None:
    path.write_text(json.dumps(doc, indent=2) + "\n")


def main() -> None:
    SPACES.mkdir(parents=True, exist_ok=True)
    for name, bounds in TABLES.items():
        write_json(SPACES / f"{name}.json", space_doc(bounds, COMMENTS.get(name)))
    wide = list(TABLES["table1_base"])
    wide[NAMES.index("r")] = (0, 0.8)
    write_json(
        SPACES / "table1_base_with_zero_dropout.json",
        space_doc(wide, COMMENTS["table1_base_with_zero_dropout"]),
    )

    from spacescore.core import SearchSpace

    space = SearchSpace.from_dict(space_doc(wide))
    x = uniform_sample(space, 35, seed=2021)
    write_observations(Dataset(space, x, table1_proxy(x)), DATA / "table1_sample.csv")

    setup = branin_setup(seed=1)
    write_observations(setup.data, DATA / "branin_seed.csv")
    for sid, sp in setup.spaces.items():
        doc = sp.to_dict()
        doc.pop("provenance", None)
        write_json(SPACES / f"branin_{sid.lower()}.json", doc)
    write_json(SPACES / "hartmann6_base.json", SearchSpace.box([0.0] * 6, [1.0] * 6).to_dict())


if __name__ == "__main__":
    main()
