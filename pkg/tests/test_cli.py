"""The command-line surface, end to end on small fits."""

import csv

import numpy as np
import pytest

from icrf.cli import main

TAU = 5.0


def run(argv):
    return main([str(a) for a in argv])


@pytest.fixture(scope="module")
def workspace(tmp_path_factory):
    """A simulated dataset plus one fitted model shared by CLI tests."""
    root = tmp_path_factory.mktemp("cli")
    data, truth = root / "d.csv", root / "t.csv"
    assert run(["simulate", "--scenario", 1, "--n", 90, "--M", 1,
                "--seed", 5, "--out", data, "--truth", truth]) == 0
    cfg = root / "c.cfg"
    cfg.write_text("n_tree = 10\nn_fold = 2\nn_min = 6\ntau = 5\n")
    model, report = root / "m.bin", root / "oob.csv"
    assert run(["fit", "--data", data, "--config", cfg, "--out", model,
                "--report", report, "--seed", 3]) == 0
    query = root / "q.csv"
    with open(data) as fh:
        rows = list(csv.reader(fh))
    lines = [",".join(rows[0][2:])] + [",".join(r[2:]) for r in rows[1:6]]
    query.write_text("\n".join(lines) + "\n")
    return root


class TestFit:
    def test_report_structure(self, workspace):
        with open(workspace / "oob.csv") as fh:
            rows = list(csv.DictReader(fh))
        assert [int(r["fold"]) for r in rows] == [1, 2]
        marks = [int(r["is_k_opt"]) for r in rows]
        assert sum(marks) == 1
        errs = [float(r["oob_imse1"]) for r in rows]
        assert marks[int(np.argmin(errs))] == 1

    def test_k1_single_row_report(self, workspace, tmp_path):
        cfg = tmp_path / "c1.cfg"
        cfg.write_text("n_tree = 6\nn_fold = 1\ntau = 5\n")
        assert run(["fit", "--data", workspace / "d.csv", "--config", cfg,
                    "--out", tmp_path / "m.bin", "--report", tmp_path / "r.csv",
                    "--seed", 1]) == 0
        assert len((tmp_path / "r.csv").read_text().strip().splitlines()) == 2

    def test_byte_identical_models_same_seed(self, workspace, tmp_path):
        cfg = tmp_path / "c.cfg"
        cfg.write_text("n_tree = 8\nn_fold = 2\ntau = 5\n")
        args = ["fit", "--data", workspace / "d.csv", "--config", cfg,
                "--report", tmp_path / "r.csv", "--seed", 11]
        assert run(args + ["--out", tmp_path / "a.bin"]) == 0
        assert run(args + ["--out", tmp_path / "b.bin"]) == 0
        assert (tmp_path / "a.bin").read_bytes() == (tmp_path / "b.bin").read_bytes()


class TestPredict:
    def test_curve_table(self, workspace, tmp_path):
        out = tmp_path / "curves.csv"
        assert run(["predict", "--model", workspace / "m.bin",
                    "--query", workspace / "q.csv", "--grid", "0:5:0.25",
                    "--smoothed", "--out", out]) == 0
        with open(out) as fh:
            rows = list(csv.DictReader(fh))
        by_query = {}
        for r in rows:
            by_query.setdefault(r["query_id"], []).append(
                (float(r["t"]), float(r["survival"]))
            )
        for vals in by_query.values():
            ts, sv = zip(*vals)
            assert abs(sv[0] - 1.0) < 1e-6  # t = 0
            assert all(b <= a + 1e-9 for a, b in zip(sv, sv[1:]))

    def test_raw_vs_tiny_bandwidth_at_knot_midpoints(self, workspace, tmp_path):
        # refit with c_override giving h = 1e-4; smoothing error at knot
        # midpoints is bounded by h * max jump density
        cfg = tmp_path / "c.cfg"
        c_override = 1e-4 * 6 ** 0.2
        cfg.write_text(f"n_tree = 4\nn_fold = 1\ntau = 5\nc_override = {c_override}\n")
        model = tmp_path / "m.bin"
        assert run(["fit", "--data", workspace / "d.csv", "--config", cfg,
                    "--out", model, "--report", tmp_path / "r.csv",
                    "--seed", 2]) == 0
        raw, sm = tmp_path / "raw.csv", tmp_path / "sm.csv"
        common = ["predict", "--model", model, "--query", workspace / "q.csv",
                  "--grid", "0:5:0.01"]
        assert run(common + ["--out", raw]) == 0
        assert run(common + ["--smoothed", "--out", sm]) == 0

        def read(path):
            with open(path) as fh:
                return np.asarray(
                    [float(r["survival"]) for r in csv.DictReader(fh)]
                ).reshape(5, -1)

        vraw, vsm = read(raw), read(sm)
        grid = np.linspace(0, 5, 501)
        # compare away from curve knots: use interior-of-step midpoints,
        # detected as grid cells where the raw curve is locally flat
        flat = (np.abs(np.diff(vraw[:, :-1], axis=1)) == 0) & (
            np.abs(np.diff(vraw[:, 1:], axis=1)) == 0
        )
        diffs = np.abs(vsm[:, 1:-1] - vraw[:, 1:-1])[flat]
        assert diffs.max() < 1e-6

    def test_dimension_mismatch_exit_code(self, workspace, tmp_path):
        bad = tmp_path / "bad.csv"
        bad.write_text("x1,x2\n0.0,0.0\n")
        assert run(["predict", "--model", workspace / "m.bin", "--query", bad,
                    "--grid", "0:5:1", "--out", tmp_path / "o.csv"]) == 1


class TestSimulate:
    def test_scenario1_covariate_count(self, workspace):
        with open(workspace / "d.csv") as fh:
            header = next(csv.reader(fh))
        assert len(header) - 2 == 25

    def test_scenario2_covariate_count(self, tmp_path):
        out = tmp_path / "d2.csv"
        assert run(["simulate", "--scenario", 2, "--n", 40, "--M", 3,
                    "--seed", 1, "--out", out]) == 0
        with open(out) as fh:
            rows = list(csv.reader(fh))
        assert len(rows[0]) - 2 == 10
        assert len(rows) - 1 == 40
        for r in rows[1:]:
            left, right = float(r[0]), float(r[1])
            assert left < right

    def test_deterministic_output(self, tmp_path):
        a, b = tmp_path / "a.csv", tmp_path / "b.csv"
        for out in (a, b):
            assert run(["simulate", "--scenario", 3, "--n", 30, "--M", 1,
                        "--seed", 7, "--out", out]) == 0
        assert a.read_bytes() == b.read_bytes()


class TestEvaluate:
    def test_report_rows(self, workspace, tmp_path):
        out = tmp_path / "report.csv"
        assert run(["evaluate", "--model", workspace / "m.bin",
                    "--test", workspace / "d.csv", "--truth", workspace / "t.csv",
                    "--out", out]) == 0
        with open(out) as fh:
            rows = {r["metric"]: float(r["value"]) for r in csv.DictReader(fh)}
        assert set(rows) == {"imse1", "imse2", "eps_int", "eps_sup"}
        assert 0.0 <= rows["imse1"] <= 1.0 and 0.0 <= rows["imse2"] <= 1.0
        assert rows["eps_int"] >= 0.0 and rows["eps_sup"] >= 0.0

    def test_without_truth_only_imse(self, workspace, tmp_path):
        out = tmp_path / "report.csv"
        assert run(["evaluate", "--model", workspace / "m.bin",
                    "--test", workspace / "d.csv", "--out", out]) == 0
        with open(out) as fh:
            rows = {r["metric"] for r in csv.DictReader(fh)}
        assert rows == {"imse1", "imse2"}

    def test_missing_truth_error(self, workspace, tmp_path):
        assert run(["evaluate", "--model", workspace / "m.bin",
                    "--test", workspace / "d.csv", "--require-truth",
                    "--out", tmp_path / "r.csv"]) == 1

    def test_row_permutation_invariance(self, workspace, tmp_path):
        with open(workspace / "d.csv") as fh:
            lines = fh.read().strip().splitlines()
        shuffled = tmp_path / "shuffled.csv"
        rng = np.random.default_rng(1)
        body = list(lines[1:])
        rng.shuffle(body)
        shuffled.write_text("\n".join([lines[0]] + body) + "\n")
        a, b = tmp_path / "a.csv", tmp_path / "b.csv"
        assert run(["evaluate", "--model", workspace / "m.bin",
                    "--test", workspace / "d.csv", "--out", a]) == 0
        assert run(["evaluate", "--model", workspace / "m.bin",
                    "--test", shuffled, "--out", b]) == 0

        def vals(p):
            with open(p) as fh:
                return {r["metric"]: float(r["value"]) for r in csv.DictReader(fh)}

        va, vb = vals(a), vals(b)
        for k in va:
            assert np.isclose(va[k], vb[k], atol=1e-12)


class TestImportance:
    def test_table_and_rescaling(self, workspace, tmp_path):
        out = tmp_path / "vi.csv"
        assert run(["importance", "--model", workspace / "m.bin",
                    "--data", workspace / "d.csv", "--nperm", 2,
                    "--seed", 1, "--out", out]) == 0
        with open(out) as fh:
            rows = list(csv.DictReader(fh))
        assert rows[-1]["feature"] == "_multiplier"
        rescaled = [float(r["rescaled"]) for r in rows[:-1]]
        assert np.isclose(max(rescaled), 1.0)

    def test_default_nperm_is_ten(self):
        from icrf.cli import build_parser

        args = build_parser().parse_args(
            ["importance", "--model", "m", "--data", "d", "--out", "o"]
        )
        assert args.nperm == 10

    def test_reproducible_with_seed(self, workspace, tmp_path):
        a, b = tmp_path / "a.csv", tmp_path / "b.csv"
        for out in (a, b):
            assert run(["importance", "--model", workspace / "m.bin",
                        "--data", workspace / "d.csv", "--nperm", 2,
                        "--seed", 9, "--out", out]) == 0
        assert a.read_bytes() == b.read_bytes()


class TestBenchCli:
    def test_bench_runs_and_resumes(self, tmp_path):
        spec = tmp_path / "spec.cfg"
        spec.write_text(
            "scenarios = 1\nm_values = 1\nn_values = 50\nn_replicates = 2\n"
            "rules = GWRS\npredictions = quasi_honest\nn_tree = 4\nn_fold = 2\n"
            "n_test = 10\nseed = 3\n"
        )
        out = tmp_path / "res"
        assert run(["bench", "--spec", spec, "--out", out]) == 0
        raw1 = (out / "raw.csv").read_bytes()
        assert run(["bench", "--spec", spec, "--out", out]) == 0
        assert (out / "raw.csv").read_bytes() == raw1
        with open(out / "raw.csv") as fh:
            rows = list(csv.DictReader(fh))
        assert len(rows) == 2 * 2  # replicates x folds
