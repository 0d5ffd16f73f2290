import json
from importlib.resources import files

import pytest

from spacescore.cli import main, parse_budgets, parse_rates
from spacescore.core import SearchSpace, save_space

DATA = files("spacescore") / "data"
SPACES = DATA / "spaces"
BRANIN = [str(SPACES / f"branin_{k}.json") for k in ("x", "s1", "s2")]
BRANIN_CSV = str(DATA / "branin_seed.csv")
FAST = ["--nx", "30", "--ny", "30"]


def run(capsys, *argv):
    code = main([str(a) for a in argv])
    out, err = capsys.readouterr()
    return code, out, err


def csv_rows(text):
    lines = [ln for ln in text.splitlines() if not ln.startswith("#")]
    header = lines[0].split(",")
    return [dict(zip(header, ln.split(","))) for ln in lines[1:]]


class TestParsers:
    def test_budget_list(self):
        assert parse_budgets("1,5,25") == [1, 5, 25]

    def test_budget_log_sweep(self):
        assert parse_budgets("1:100:3-log") == [1, 10, 100]

    def test_budget_linear_sweep(self):
        assert parse_budgets("10:30:3") == [10, 20, 30]

    def test_rates_range(self):
        assert parse_rates("0.1:0.9:0.1") == pytest.approx([0.1 * k for k in range(1, 10)])


class TestScore:
    def test_single_row_deterministic(self, capsys):
        argv = ["score", "--space", BRANIN[0], "--data", BRANIN_CSV, "--budget", 5, "--seed", 7, *FAST]
        code, first, _ = run(capsys, *argv)
        assert code == 0
        assert len(csv_rows(first)) == 1
        assert first.splitlines()[-1].startswith("# seed=7 version=")
        _, second, _ = run(capsys, *argv)
        assert first == second

    def test_thread_count_does_not_matter(self, capsys):
        argv = ["score", "--space", BRANIN[0], "--data", BRANIN_CSV, "--budget", 3, *FAST]
        outs = {run(capsys, *argv, "--threads", t)[1] for t in (1, 4)}
        assert len(outs) == 1

    def test_missing_column(self, capsys, tmp_path):
        bad = tmp_path / "bad.csv"
        bad.write_text("x0,objective\n1,2\n3,4\n")
        code, _, err = run(capsys, "score", "--space", BRANIN[0], "--data", bad, "--budget", 5)
        assert code == 2 and "x1" in err

    def test_unparseable_cell(self, capsys, tmp_path):
        bad = tmp_path / "bad.csv"
        bad.write_text("x0,x1,objective\n1,2,3\n1,oops,4\n")
        code, _, err = run(capsys, "score", "--space", BRANIN[0], "--data", bad, "--budget", 5)
        assert code == 2 and ":3:2:" in err

    def test_pi_in_unit_interval(self, capsys):
        code, out, _ = run(capsys, "score", "--space", BRANIN[1], "--data", BRANIN_CSV,
                           "--budget", 5, "--variant", "mean-bPI", *FAST)
        assert code == 0
        assert 0.0 <= float(csv_rows(out)[0]["value"]) <= 1.0

    def test_numerical_failure_exit_code(self, capsys, tmp_path):
        huge = tmp_path / "huge.csv"
        huge.write_text("x0,x1,objective\n0,0,1e308\n1,1,-1e308\n5,5,1e308\n")
        code, _, _ = run(capsys, "score", "--space", BRANIN[0], "--data", huge, "--budget", 2, *FAST)
        assert code == 3

    def test_bad_flag(self, capsys):
        assert run(capsys, "score", "--space", BRANIN[0])[0] == 2
        assert run(capsys, "score", "--space", BRANIN[0], "--data", BRANIN_CSV, "--budget", 0)[0] == 2

    def test_missing_file(self, capsys):
        assert run(capsys, "score", "--space", "nope.json", "--data", BRANIN_CSV, "--budget", 1)[0] == 2


class TestRank:
    def test_single(self, capsys):
        code, out, _ = run(capsys, "rank", "--spaces", BRANIN[0], "--data", BRANIN_CSV,
                           "--budgets", "4", *FAST)
        assert code == 0 and len(csv_rows(out)) == 1

    def test_branin_s2_last(self, capsys):
        code, out, _ = run(capsys, "rank", "--spaces", *BRANIN, "--data", BRANIN_CSV,
                           "--budgets", "1:100:6-log", "--nx", 100, "--ny", 100)
        assert code == 0
        rows = csv_rows(out)
        for b in {r["budget"] for r in rows}:
            last = [r for r in rows if r["budget"] == b and r["rank"] == "3"]
            assert last[0]["space_id"] == "branin_s2"

    def test_duplicates_tie(self, capsys):
        code, out, _ = run(capsys, "rank", "--spaces", BRANIN[1], BRANIN[1], "--data", BRANIN_CSV,
                           "--budgets", "2", *FAST)
        a, b = csv_rows(out)
        assert a["value"] == b["value"]
        assert [a["space_id"], b["space_id"]] == ["branin_s1-1", "branin_s1-2"]

    def test_json_report(self, capsys, tmp_path):
        report = tmp_path / "r.json"
        run(capsys, "rank", "--spaces", *BRANIN, "--data", BRANIN_CSV, "--budgets", "1,10",
            "--json", report, *FAST)
        doc = json.loads(report.read_text())
        assert [r["budget"] for r in doc["rankings"]] == [1, 10]


class TestPrune:
    def test_only_candidate_is_base(self, capsys, tmp_path):
        out = tmp_path / "run"
        code, _, _ = run(capsys, "prune", "--objective", "branin", "--space", BRANIN[0],
                         "--b1", 5, "--b2", 3, "--rates", "1.0", "--per-rate", 1, "--no-base",
                         "--out", out, *FAST)
        assert code == 0
        result = json.loads((out / "result.json").read_text())
        chosen = SearchSpace.from_dict(result["chosen_space"])
        base = SearchSpace.from_dict(json.loads(open(BRANIN[0]).read()))
        assert chosen.dims == base.dims
        assert (out / "curve.csv").read_text().splitlines()[0].startswith("step,phase,x0,x1,objective,best")

    def test_b1_too_small(self, capsys):
        code, _, _ = run(capsys, "prune", "--objective", "hartmann6", "--b1", 1, "--b2", 3)
        assert code == 2

    def test_reports_rate(self, capsys):
        code, out, _ = run(capsys, "prune", "--objective", "branin", "--b1", 6, "--b2", 4,
                           "--rates", "0.2:0.6:0.2", "--per-rate", 3, *FAST)
        assert code == 0
        doc = json.loads(out.split("\n# ")[0])
        assert doc["chosen_rate"] in (0.2, 0.4, 0.6, 1.0)

    def test_table_source(self, capsys):
        code, out, _ = run(capsys, "prune", "--table", BRANIN_CSV, "--space", BRANIN[0],
                           "--b1", 6, "--b2", 4, "--rates", "0.9", "--per-rate", 2, *FAST)
        assert code == 0


class TestTuneOrFix:
    SPACE = str(SPACES / "table1_base_with_zero_dropout.json")
    TABLE = str(DATA / "table1_sample.csv")

    def test_dropout_labels(self, capsys):
        code, out, _ = run(capsys, "tune-or-fix", "--space", self.SPACE, "--data", self.TABLE,
                           "--dim", "r", "--fix", 0, "--fix", 0.5, "--budgets", "1,10", *FAST)
        assert code == 0
        doc = json.loads(out.split("\n# ")[0])
        assert set(doc["results"][0]["scores"]) == {"tune", "r=0", "r=0.5"}

    def test_out_of_bounds(self, capsys):
        code, _, _ = run(capsys, "tune-or-fix", "--space", self.SPACE, "--data", self.TABLE,
                         "--dim", "r", "--fix", 0.95, "--budgets", "1", *FAST)
        assert code == 2

    def test_no_fix(self, capsys):
        code, out, _ = run(capsys, "tune-or-fix", "--space", self.SPACE, "--data", self.TABLE,
                           "--dim", "r", "--budgets", "3", *FAST)
        assert json.loads(out.split("\n# ")[0])["results"][0]["recommendation"] == "tune"


class TestReproduceAndReplay:
    def test_unknown_experiment(self, capsys, tmp_path):
        code, _, err = run(capsys, "reproduce", "--experiment", "nope", "--out", tmp_path)
        assert code == 2 and "branin-ranking" in err

    def test_failure_mode_artifacts(self, capsys, tmp_path):
        code, _, _ = run(capsys, "reproduce", "--experiment", "failure-mode", "--out", tmp_path, *FAST)
        assert code == 0
        assert {p.name for p in tmp_path.iterdir()} >= {"curves.csv", "summary.json", "manifest.json"}
        assert (tmp_path / "curves.csv").read_text().splitlines()[-1].startswith("# seed=0")

    def test_replay_round_trip(self, capsys, tmp_path):
        manifest = tmp_path / "m.json"
        argv = ["rank", "--spaces", *BRANIN, "--data", BRANIN_CSV, "--budgets", "1,5",
                "--manifest", manifest, "--threads", 1, *FAST]
        code, original, _ = run(capsys, *argv)
        assert code == 0
        doc = json.loads(manifest.read_text())
        assert doc["seed"] == 0 and BRANIN_CSV in doc["inputs"]
        code, replayed, _ = run(capsys, "replay", manifest, "--threads", 3)
        assert code == 0 and replayed == original

    def test_replay_detects_changed_input(self, capsys, tmp_path):
        data = tmp_path / "d.csv"
        data.write_text(open(BRANIN_CSV).read())
        manifest = tmp_path / "m.json"
        run(capsys, "score", "--space", BRANIN[0], "--data", data, "--budget", 2,
            "--manifest", manifest, *FAST)
        data.write_text(data.read_text().replace("\n", "\n", 1) + "# edited\n")
        code, _, err = run(capsys, "replay", manifest)
        assert code == 2 and "digest" in err

    def test_replay_detects_changed_output(self, capsys, tmp_path):
        manifest = tmp_path / "m.json"
        run(capsys, "score", "--space", BRANIN[0], "--data", BRANIN_CSV, "--budget", 2,
            "--manifest", manifest, *FAST)
        doc = json.loads(manifest.read_text())
        doc["outputs"] = {k: "0" * 64 for k in doc["outputs"]}
        manifest.write_text(json.dumps(doc))
        assert run(capsys, "replay", manifest)[0] == 3

    def test_not_a_manifest(self, capsys, tmp_path):
        bogus = tmp_path / "x.json"
        bogus.write_text("[]")
        assert run(capsys, "replay", bogus)[0] == 2


def test_version(capsys):
    assert run(capsys, "--version")[0] == 0


def test_space_round_trip_through_cli(capsys, tmp_path):
    path = tmp_path / "box.json"
    save_space(SearchSpace.box([-5.0, 0.0], [2.5, 15.0], names=["x0", "x1"]), path)
    code, out, _ = run(capsys, "score", "--space", path, "--data", BRANIN_CSV, "--budget", 2, *FAST)
    assert code == 0
