import csv
import time

import numpy as np
import pytest

from gradcont import cli, toys
from gradcont.cli import EXIT_FAIL, EXIT_OK, EXIT_USAGE, RunConfig, main
from gradcont.composition import REFERENCE_ONE_NORMS, reference_coefficients, reference_path


def read_csv(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def xs_of(rows):
    return np.array([[float(v) for k, v in r.items() if k.startswith("x")] for r in rows])


class TestConfig:
    def test_roundtrip(self):
        cfg = RunConfig(n=33, threads=2, seed_limit=7, stage_order=[3, 1, 2])
        cfg.set("N_max", "9")
        cfg.set("G_max", "1.5, 2.5")
        cfg.set("L_max", "12.5")
        cfg.set("max_expand", "4, none")
        back = RunConfig.from_text(cfg.to_text())
        assert back.to_text() == cfg.to_text()
        assert back.filter.N_max == 9 and back.explore.G_max == [1.5, 2.5]
        assert back.tracker.L_max == 12.5 and back.stage_order == [3, 1, 2]
        assert back.explore.max_expand == [4, None]

    def test_comments_and_errors(self):
        cfg = RunConfig.from_text("# a comment\nn = 35  # trailing\n\n")
        assert cfg.n == 35
        with pytest.raises(cli.UsageError):
            RunConfig.from_text("n 31")
        with pytest.raises(cli.UsageError):
            RunConfig.from_text("no_such_key = 1")
        with pytest.raises(cli.UsageError):
            RunConfig.from_text("threads = many")

    def test_quoted_merit_threshold_is_opt_in(self):
        assert np.isinf(RunConfig().explore.G_max)
        assert RunConfig.from_text("n = 31\nG_max = quoted").explore.G_max == 1.4

    def test_env_fallback(self, monkeypatch, tmp_path):
        monkeypatch.setenv("GRADCONT_OUT", str(tmp_path))
        assert RunConfig(n=31).run_dir() == tmp_path / "n31"

    @pytest.mark.parametrize("argv", [["seeds", "--n", "30"], ["seeds", "--n", "31", "--threads",
                                                                 "0"], ["bogus"], ["seeds", "--set",
                                                                                   "oops"]])
    def test_usage_errors(self, argv, tmp_path):
        assert main(argv + ["--out", str(tmp_path)] if argv[0] != "bogus" else argv) == EXIT_USAGE


class TestVerify:
    @pytest.mark.parametrize("n", [31, 33, 35])
    def test_fixtures_pass(self, n, capsys):
        assert main(["verify", str(reference_path(n))]) == EXIT_OK
        out = capsys.readouterr().out
        assert f"{REFERENCE_ONE_NORMS[n]:.15f}" in out and out.rstrip().endswith("PASS")

    def test_corrupted_middle_digit(self, tmp_path, capsys):
        cv = reference_coefficients(31)
        text = reference_path(31).read_text().splitlines()
        lines = [i for i, l in enumerate(text) if l.strip() and not l.startswith("#")]
        i16 = lines[15]
        s = text[i16]
        j = s.index(".") + 4
        text[i16] = s[:j] + str((int(s[j]) + 1) % 10) + s[j + 1:]
        p = tmp_path / "bad.txt"
        p.write_text("\n".join(text) + "\n")
        assert main(["verify", str(p)]) == EXIT_FAIL
        out = capsys.readouterr().out
        res = float(out.split("max order residual =")[1].split()[0])
        assert res > 1e-10 and out.rstrip().endswith("FAIL")
        assert abs(float(text[i16]) - cv.gamma[15]) > 0

    def test_parse_failure(self, tmp_path):
        p = tmp_path / "junk.txt"
        p.write_text("0.1\nnot-a-number\n")
        assert main(["verify", str(p)]) == EXIT_USAGE
        assert main(["verify", str(tmp_path / "missing.txt")]) == EXIT_USAGE
        assert main(["verify"]) == EXIT_USAGE


class TestPolish:
    def test_reference_fixture(self, tmp_path, capsys):
        assert main(["polish", str(reference_path(31)), "--out", str(tmp_path)]) == EXIT_OK
        out = tmp_path / "n31" / "polished"
        x = np.loadtxt(out / "reference_n31.txt")
        assert np.abs(x).sum() <= REFERENCE_ONE_NORMS[31] + 1e-12
        rows = read_csv(out / "polish_table.csv")
        assert rows[0]["status"] == "ok"

    def test_empty_input(self, tmp_path):
        p = tmp_path / "empty.csv"
        p.write_text("id,stage,merit,residual,one_norm,max_constraint_residual,x1\n")
        assert main(["polish", str(p), "--out", str(tmp_path)]) == EXIT_FAIL

    def test_unreadable_input(self, tmp_path):
        assert main(["polish", str(tmp_path / "nope.csv"), "--out", str(tmp_path)]) == EXIT_USAGE


@pytest.fixture(scope="module")
def toy_run(tmp_path_factory):
    base = tmp_path_factory.mktemp("toyrun")
    args = ["--problem", "toy3", "--out", str(base)]
    assert main(["seeds"] + args) == EXIT_OK
    assert main(["explore"] + args) == EXIT_OK
    return base, args


class TestToyRun:
    def test_toy_seeds_are_fast(self, tmp_path):
        t0 = time.perf_counter()
        assert cli.cmd_seeds(RunConfig(problem="toy2", out_dir=str(tmp_path))) == EXIT_OK
        assert time.perf_counter() - t0 < 1.0
        t0 = time.perf_counter()
        cfg = RunConfig(n=9, n_starts=500, out_dir=str(tmp_path))
        assert cli.cmd_seeds(cfg) == EXIT_OK
        assert time.perf_counter() - t0 < 1.0
        assert len(read_csv(tmp_path / "n9" / "seed_counts.csv")) >= 1

    def test_final_csv_matches_oracle(self, toy_run):
        base, _ = toy_run
        P = toys.toy3()
        sys_ = P.system()
        expected = [sys_.dehomogenize(z) for z in toys.oracle_vertices(P, sys_, 2, per_axis=11)]
        rows = read_csv(base / "toy3" / "final.csv")
        assert toys.match_sets(xs_of(rows), np.array(expected))
        merits = [float(r["merit"]) for r in rows]
        assert merits == sorted(merits)
        assert all(float(r["max_constraint_residual"]) <= 1e-9 for r in rows)

    def test_resume_is_byte_identical(self, toy_run, tmp_path):
        base, _ = toy_run
        args = ["--problem", "toy3", "--out", str(tmp_path)]
        assert main(["seeds"] + args) == EXIT_OK
        assert main(["explore", "--stop-after", "1"] + args) == EXIT_OK
        assert not (tmp_path / "toy3" / "final.csv").exists()
        assert main(["explore", "--resume"] + args) == EXIT_OK
        for name in ("final.csv", "explore/edges.csv", "explore/stage_02.jsonl"):
            assert (tmp_path / "toy3" / name).read_bytes() == (base / "toy3" / name).read_bytes()

    def test_polish_toy_vertices(self, toy_run):
        base, args = toy_run
        assert main(["polish", str(base / "toy3" / "final.csv")] + args) == EXIT_OK
        cons = toys.toy3().constraints_at(2)
        for p in (base / "toy3" / "polished").glob("*.txt"):
            assert np.abs(cons.evaluate(np.loadtxt(p))).max() <= 1e-11

    def test_report(self, toy_run, capsys):
        _, args = toy_run
        assert main(["report"] + args) == EXIT_OK
        out = capsys.readouterr().out
        assert "stage  2" in out and "final vertices" in out

    def test_missing_seeds(self, tmp_path):
        assert main(["explore", "--problem", "toy2", "--out", str(tmp_path)]) == EXIT_USAGE
