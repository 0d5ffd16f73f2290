"""Command-line interface.

Every command prints its main artifact to standard output (or writes several
into ``--out DIR``) and can record a run manifest with ``--manifest FILE``.
``spacescore replay FILE`` re-executes a manifest and checks that the outputs
are byte-identical. Exit codes: 0 success, 2 bad input, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import io
import json
import logging
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from spacescore import __version__
from spacescore.bench.experiments import EXPERIMENTS, ExperimentResult
from spacescore.bench.objectives import BASE_SPACES, make_objective
from spacescore.core import Dataset, ParamDomain, SearchSpace, load_space, read_observations
from spacescore.errors import (
    InputError,
    NumericalError,
    ObjectiveEvaluationError,
    SpaceScoreError,
)
from spacescore.gp import fit
from spacescore.scoring import VARIANTS, ScoreConfig, ScoreEstimate, predicted_score_curves
from spacescore.workflows import (
    GenerationSettings,
    one_shot_prune,
    rank_spaces_curve,
    table_sampler,
    tune_or_fix_curve,
)

EXIT_OK, EXIT_INPUT, EXIT_NUMERICAL = 0, 2, 3

logger = logging.getLogger("spacescore")


# --------------------------------------------------------------------------
# Argument parsing helpers


def parse_budgets(text: str) -> list[int]:
    """``"1,5,25"``, ``"1:100:8"`` (linear) or ``"1:100:8-log"`` (log-spaced).

    Sweep values are rounded to integers; duplicates collapse.
    """
    text = text.strip()
    try:
        if ":" in text:
            start, stop, count = text.split(":")
            log = count.endswith("-log")
            count = int(count[:-4] if log else count)
            start, stop = float(start), float(stop)
            if count < 1 or start < 1 or stop < start:
                raise ValueError
            grid = np.geomspace(start, stop, count) if log else np.linspace(start, stop, count)
            budgets = sorted({int(round(v)) for v in grid})
        else:
            budgets = [int(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(
            f"invalid budgets {text!r}; use N,N,... or start:stop:count[-log]"
        ) from None
    if not budgets or min(budgets) < 1:
        raise argparse.ArgumentTypeError(f"budgets must be positive integers, got {text!r}")
    return budgets


def parse_rates(text: str) -> list[float]:
    """``"0.1,0.5"`` or an inclusive ``"start:stop:step"`` range."""
    try:
        if ":" in text:
            start, stop, step = (float(v) for v in text.split(":"))
            if step <= 0:
                raise ValueError
            n = int(np.floor((stop - start) / step + 1e-9)) + 1
            rates = [round(start + k * step, 10) for k in range(n)]
        else:
            rates = [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(
            f"invalid rates {text!r}; use R,R,... or start:stop:step"
        ) from None
    if not rates or any(not 0 < r <= 1 for r in rates):
        raise argparse.ArgumentTypeError(f"rates must lie in (0, 1], got {text!r}")
    return rates


def _positive_int(text: str) -> int:
    try:
        value = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected an integer, got {text!r}") from None
    if value < 1:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {text!r}")
    return value


def _int(text: str) -> int:
    try:
        return int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected an integer, got {text!r}") from None


def _seed(text: str) -> int:
    value = _int(text)
    if not 0 <= value < 2**64:
        raise argparse.ArgumentTypeError("seed must be a 64-bit unsigned integer")
    return value


# --------------------------------------------------------------------------
# Output rendering


@dataclass
class Outcome:
    """What a command produced: text for stdout and/or named files."""

    stdout: str = ""
    files: dict[str, str] = field(default_factory=dict)

    def digests(self) -> dict:
        return {
            "stdout": _sha256(self.stdout.encode()),
            "files": {name: _sha256(text.encode()) for name, text in sorted(self.files.items())},
        }


def _sha256(data: bytes) -> str:
    return hashlib.sha256(data).hexdigest()


def footer(seed: int) -> str:
    return f"# seed={seed} version={__version__}\n"


def render_csv(fields: list[str], rows: list[dict], seed: int) -> str:
    buf = io.StringIO()
    writer = csv.DictWriter(buf, fields, lineterminator="\n", extrasaction="ignore")
    writer.writeheader()
    writer.writerows(rows)
    return buf.getvalue() + footer(seed)


def render_json(doc) -> str:
    return json.dumps(doc, indent=2, sort_keys=True, default=_json_default) + "\n"


def _json_default(obj):
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, (np.floating, np.integer, np.bool_)):
        return obj.item()
    raise TypeError(f"cannot serialize {type(obj).__name__}")


# --------------------------------------------------------------------------
# Shared loading


def _space_ids(paths: list[str]) -> list[str]:
    stems = [Path(p).stem for p in paths]
    ids, seen = [], {}
    for stem in stems:
        if stems.count(stem) == 1:
            ids.append(stem)
        else:
            seen[stem] = seen.get(stem, 0) + 1
            ids.append(f"{stem}-{seen[stem]}")
    return ids


def bounding_space(spaces: list[SearchSpace]) -> SearchSpace:
    """Smallest space containing every given space (grids are dropped)."""
    first = spaces[0]
    for s in spaces[1:]:
        if s.names != first.names or [d.scale for d in s.dims] != [d.scale for d in first.dims]:
            raise InputError("spaces must share dimension names, order and scales")
    dims = []
    for i, dim in enumerate(first.dims):
        lo = min(s.dims[i].lower for s in spaces)
        hi = max(s.dims[i].upper for s in spaces)
        dims.append(ParamDomain(dim.name, lo, hi, dim.scale))
    return SearchSpace(tuple(dims))


def _read_data(path, spaces: list[SearchSpace], base_path, negate: bool) -> Dataset:
    """Observations wrapped in the fit region: ``base_path`` if given, otherwise
    the hull of ``spaces`` and of the observed points."""
    if base_path:
        return read_observations(path, load_space(base_path), negate=negate)
    raw = read_observations(path, spaces[0], negate=negate, check_bounds=False)
    hull = bounding_space([*spaces, raw.space])
    return Dataset(hull, raw.x, raw.y)


def _score_config(args) -> ScoreConfig:
    return ScoreConfig(args.variant, args.nx, args.ny, args.seed)


def _estimate_row(est: ScoreEstimate) -> dict:
    return est.to_row()


def _map_fn(pool):
    return pool.map if pool is not None else map


def _pool(threads: int):
    return ThreadPoolExecutor(max_workers=threads) if threads > 1 else None


# --------------------------------------------------------------------------
# Commands


def cmd_score(args) -> Outcome:
    space = load_space(args.space)
    data = _read_data(args.data, [space], args.base, args.negate)
    model = fit(data, args.seed)
    config = _score_config(args)
    pool = _pool(args.threads)
    try:
        curves = predicted_score_curves(
            model,
            [(Path(args.space).stem, space)],
            [args.budget],
            data.incumbent,
            config,
            map_fn=_map_fn(pool),
        )
    finally:
        if pool:
            pool.shutdown()
    rows = [_estimate_row(c[0]) for c in curves.values()]
    return Outcome(render_csv(list(ScoreEstimate.CSV_FIELDS), rows, args.seed))


RANK_FIELDS = ["rank", *ScoreEstimate.CSV_FIELDS]


def cmd_rank(args) -> Outcome:
    spaces = [load_space(p) for p in args.spaces]
    ids = _space_ids(args.spaces)
    data = _read_data(args.data, spaces, args.base, args.negate)
    rankings = rank_spaces_curve(
        data,
        list(zip(ids, spaces)),
        args.budgets,
        _score_config(args),
        fit_seed=args.seed,
        threads=args.threads,
    )
    rows = []
    for ranking in rankings:
        for k, (_, est) in enumerate(ranking.entries):
            rows.append({"rank": k + 1, **_estimate_row(est)})
    out = Outcome(render_csv(RANK_FIELDS, rows, args.seed))
    if args.json:
        out.files[args.json] = render_json(
            {
                "seed": args.seed,
                "version": __version__,
                "incumbent": data.incumbent,
                "rankings": [r.to_dict() for r in rankings],
            }
        )
    return out


def cmd_prune(args) -> Outcome:
    if args.table is None and args.objective is None:
        raise InputError("give --objective NAME or --table FILE")
    if args.space:
        base = load_space(args.space)
    elif args.objective:
        base = BASE_SPACES[args.objective]
    else:
        raise InputError("--table needs --space")
    objective, sampler = None, None
    if args.table:
        sampler = table_sampler(_read_data(args.table, [base], None, args.negate))
    else:
        objective = make_objective(args.objective, args.noise_sd, args.seed)
        expected = BASE_SPACES[args.objective]
        if base.d != expected.d or not base.is_subset_of(expected):
            raise InputError(f"--space must lie inside the {args.objective} domain")
    gen = GenerationSettings(tuple(args.rates), args.per_rate, not args.no_base)
    pool_threads = args.threads
    result = one_shot_prune(
        objective,
        base,
        args.b1,
        args.b2,
        gen,
        _score_config(args),
        args.seed,
        sampler=sampler,
        threads=pool_threads,
    )
    report = result.to_dict()
    report["chosen_rate"] = (result.chosen_space.provenance or {}).get("rate")
    report["seed"] = args.seed
    report["version"] = __version__
    evals = result.evaluations
    best = np.minimum.accumulate(evals.y)
    curve_rows = [
        {
            "step": k + 1,
            "phase": 1 if k < args.b1 else 2,
            **{name: repr(float(v)) for name, v in zip(base.names, evals.x[k])},
            "objective": repr(float(evals.y[k])),
            "best": repr(float(best[k])),
        }
        for k in range(len(evals))
    ]
    curve = render_csv(["step", "phase", *base.names, "objective", "best"], curve_rows, args.seed)
    score_rows = [
        {"candidate": k, "rate": (s.provenance or {}).get("rate", ""), **_estimate_row(est)}
        for k, (s, est) in enumerate(result.all_scores)
    ]
    scores = render_csv(["candidate", "rate", *ScoreEstimate.CSV_FIELDS], score_rows, args.seed)
    if args.out:
        return Outcome(
            files={"result.json": render_json(report), "curve.csv": curve, "scores.csv": scores}
        )
    return Outcome(render_json(report))


def cmd_tune_or_fix(args) -> Outcome:
    base = load_space(args.space)
    data = _read_data(args.data, [base], args.base, args.negate)
    results = tune_or_fix_curve(
        data,
        base,
        args.dim,
        args.fix,
        args.budgets,
        _score_config(args),
        fit_seed=args.seed,
        threads=args.threads,
    )
    doc = {
        "seed": args.seed,
        "version": __version__,
        "dim": args.dim,
        "fixed_values": args.fix,
        "incumbent": data.incumbent,
        "results": [r.to_dict() for r in results],
    }
    out = Outcome(render_json(doc))
    if args.csv:
        rows = [
            {"label": label, **_estimate_row(est)} for r in results for label, est in r.scored
        ]
        out.files[args.csv] = render_csv(["label", *ScoreEstimate.CSV_FIELDS], rows, args.seed)
    return out


def cmd_reproduce(args) -> Outcome:
    if args.experiment not in EXPERIMENTS:
        raise InputError(
            f"unknown experiment {args.experiment!r}; available: {', '.join(EXPERIMENTS)}"
        )
    kwargs = {}
    if args.repeats is not None:
        key = {"branin-ranking": "n_seeds", "rank-preservation": "n_runs"}.get(
            args.experiment, "n_repeats"
        )
        if args.experiment == "failure-mode":
            raise InputError("failure-mode has no repeats")
        kwargs[key] = args.repeats
    if args.nx is not None:
        kwargs["n_x_batches"] = args.nx
    if args.ny is not None:
        kwargs["n_posterior_samples"] = args.ny
    if args.experiment in {"hartmann-pruning", "budget-splits", "score-variants"}:
        kwargs["workers"] = args.threads
    if args.per_rate is not None:
        kwargs["per_rate"] = args.per_rate
    try:
        result: ExperimentResult = EXPERIMENTS[args.experiment](seed=args.seed, **kwargs)
    except TypeError as exc:
        raise InputError(f"{args.experiment}: {exc}") from None
    files = {
        f"{name}.csv": render_csv(fields_, rows, args.seed)
        for name, (fields_, rows) in result.tables.items()
    }
    summary = dict(result.summary)
    report = summary.pop("report", None)
    files["summary.json"] = render_json(
        {"experiment": result.name, "seed": args.seed, "version": __version__, **summary}
    )
    if report:
        files["report.txt"] = report + "\n"
    return Outcome(stdout=(report + "\n") if report else "", files=files)


# --------------------------------------------------------------------------
# Manifests


def _input_paths(args) -> list[str]:
    paths = []
    for name in ("space", "data", "base", "table"):
        value = getattr(args, name, None)
        if value:
            paths.append(value)
    paths.extend(getattr(args, "spaces", None) or [])
    return paths


def _file_digest(path: str) -> str:
    try:
        return _sha256(Path(path).read_bytes())
    except OSError as exc:
        raise InputError(f"{path}: {exc.strerror}") from None


def build_manifest(argv: list[str], args, outcome: Outcome) -> dict:
    return {
        "tool": "spacescore",
        "version": __version__,
        "command": args.command,
        "argv": argv,
        "seed": args.seed,
        "inputs": {p: _file_digest(p) for p in _input_paths(args)},
        "outputs": outcome.digests(),
    }


def _strip_option(argv: list[str], option: str) -> list[str]:
    out, skip = [], False
    for tok in argv:
        if skip:
            skip = False
            continue
        if tok == option:
            skip = True
            continue
        if tok.startswith(option + "="):
            continue
        out.append(tok)
    return out


def cmd_replay(args) -> Outcome:
    try:
        manifest = json.loads(Path(args.manifest_file).read_text())
        argv = list(manifest["argv"])
    except (OSError, ValueError, KeyError, TypeError) as exc:
        raise InputError(f"{args.manifest_file}: not a run manifest ({exc})") from None
    if manifest.get("version") != __version__:
        logger.warning(
            "manifest was written by version %s, running %s", manifest.get("version"), __version__
        )
    for path, digest in manifest.get("inputs", {}).items():
        if _file_digest(path) != digest:
            raise InputError(f"{path}: contents differ from the manifest digest")
    argv = _strip_option(_strip_option(argv, "--manifest"), "--threads")
    if args.threads is not None:
        argv += ["--threads", str(args.threads)]
    if args.out is not None:
        argv = _strip_option(argv, "--out") + ["--out", args.out]
    inner = build_parser().parse_args(argv)
    if inner.command == "replay":
        raise InputError("a manifest cannot replay another replay")
    outcome = inner.func(inner)
    expected = manifest.get("outputs")
    if expected is not None and outcome.digests() != expected:
        raise ReplayMismatch("replayed outputs differ from the manifest digests")
    _write(outcome, getattr(inner, "out", None))
    return Outcome()


class ReplayMismatch(NumericalError):
    pass


# --------------------------------------------------------------------------
# Parser


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="spacescore",
        description="Budget-conditional scores for hyperrectangular search spaces.",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=_seed, default=0, help="master seed (default 0)")
    common.add_argument(
        "--threads",
        type=_positive_int,
        default=os.cpu_count() or 1,
        help="worker threads (default: available cores); results do not depend on it",
    )
    common.add_argument("--manifest", help="write a run manifest to this file")

    scoring = argparse.ArgumentParser(add_help=False)
    scoring.add_argument("--variant", choices=VARIANTS, default="mean-bEI")
    scoring.add_argument("--nx", type=_positive_int, default=1000, help="x-batches (default 1000)")
    scoring.add_argument(
        "--ny", type=_positive_int, default=1000, help="posterior samples per batch (default 1000)"
    )

    data = argparse.ArgumentParser(add_help=False)
    data.add_argument("--data", required=True, help="observation CSV (dimension columns + objective)")
    data.add_argument(
        "--negate", action="store_true", help="objective column is to be maximized"
    )
    data.add_argument(
        "--base",
        help="space the data were drawn from; rows outside it are rejected "
        "(default: hull of the scored spaces and the data)",
    )

    p = sub.add_parser("score", parents=[common, scoring, data], help="score one space")
    p.add_argument("--space", required=True, help="search-space JSON")
    p.add_argument("--budget", type=_positive_int, required=True)
    p.set_defaults(func=cmd_score)

    p = sub.add_parser("rank", parents=[common, scoring, data], help="rank spaces over budgets")
    p.add_argument("--spaces", nargs="+", required=True, help="search-space JSON files")
    p.add_argument("--budgets", type=parse_budgets, required=True)
    p.add_argument("--json", help="also write a JSON report to this file")
    p.set_defaults(func=cmd_rank)

    p = sub.add_parser("prune", parents=[common, scoring], help="one-shot pruning")
    src = p.add_mutually_exclusive_group()
    src.add_argument("--objective", choices=sorted(BASE_SPACES))
    src.add_argument("--table", help="observation CSV standing in for evaluations")
    p.add_argument("--space", help="base space JSON (default: the objective's domain)")
    p.add_argument("--negate", action="store_true")
    p.add_argument("--noise-sd", type=float, default=0.0)
    p.add_argument("--b1", type=_int, required=True)
    p.add_argument("--b2", type=_int, required=True)
    p.add_argument("--rates", type=parse_rates, default=parse_rates("0.1:0.9:0.1"))
    p.add_argument("--per-rate", type=_positive_int, default=500)
    p.add_argument("--no-base", action="store_true", help="do not score the base space itself")
    p.add_argument("--out", help="write result.json, curve.csv and scores.csv here")
    p.set_defaults(func=cmd_prune)

    p = sub.add_parser(
        "tune-or-fix", parents=[common, scoring, data], help="tune a dimension or pin it"
    )
    p.add_argument("--space", required=True)
    p.add_argument("--dim", required=True)
    p.add_argument("--fix", type=float, action="append", default=[], metavar="VALUE")
    p.add_argument("--budgets", type=parse_budgets, required=True)
    p.add_argument("--csv", help="also write the score curves as CSV")
    p.set_defaults(func=cmd_tune_or_fix)

    p = sub.add_parser("reproduce", parents=[common], help="run a packaged experiment")
    p.add_argument("--experiment", required=True, help=", ".join(EXPERIMENTS))
    p.add_argument("--out", required=True)
    p.add_argument("--repeats", type=_int)
    p.add_argument("--nx", type=_positive_int)
    p.add_argument("--ny", type=_positive_int)
    p.add_argument("--per-rate", type=_positive_int)
    p.set_defaults(func=cmd_reproduce)

    p = sub.add_parser("replay", help="re-run a manifest and verify its outputs")
    p.add_argument("manifest_file")
    p.add_argument("--threads", type=_positive_int)
    p.add_argument("--out")
    p.set_defaults(func=cmd_replay, seed=None)
    return parser


def _write(outcome: Outcome, out_dir: str | None) -> None:
    if outcome.files:
        root = Path(out_dir) if out_dir else Path(".")
        for name, text in outcome.files.items():
            path = root / name if out_dir else Path(name)
            path.parent.mkdir(parents=True, exist_ok=True)
            path.write_text(text)
    if outcome.stdout:
        sys.stdout.write(outcome.stdout)
        sys.stdout.flush()


def main(argv: list[str] | None = None) -> int:
    logging.basicConfig(level=logging.WARNING, format="%(levelname)s: %(message)s")
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_INPUT
    try:
        outcome = args.func(args)
        if args.command != "replay":
            out_dir = getattr(args, "out", None)
            _write(outcome, out_dir)
            manifest = build_manifest(argv, args, outcome)
            if args.manifest:
                Path(args.manifest).write_text(render_json(manifest))
            if out_dir:
                (Path(out_dir) / "manifest.json").write_text(render_json(manifest))
    except (InputError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except (NumericalError, ObjectiveEvaluationError, SpaceScoreError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except (ArithmeticError, np.linalg.LinAlgError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
