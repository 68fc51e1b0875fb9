"""Command-line driver: ``python -m gradcont <subcommand>``.

Subcommands
-----------
seeds    enumerate and count stage-0 seeds, optionally dumping them
explore  lift seeds and run the staged exploration with checkpoints
verify   check a coefficient file against the order conditions
polish   turn Euclidean-norm minimizers into nearby 1-norm minimizers
report   summarize the checkpoints of a run

Exit codes: 0 success, 1 verification or run failure, 2 usage or input
error, 130 interrupted (completed stages stay checkpointed).
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import json
import logging
import math
import os
import sys
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import composition, explorer, seeds, toys
from .composition import (CoeffVector, REFERENCE_ONE_NORMS, reference_path, order_condition_system,
                          polish_one_norm, verify)
from .errors import GradContError
from .explorer import ExploreConfig, StageSet, Vertex
from .seeds import REFERENCE_SEED_COUNTS, SeedFilter
from .staged import build_staged_system, refine_stationary
from .tracker import TrackerConfig

log = logging.getLogger("gradcont")

EXIT_OK, EXIT_FAIL, EXIT_USAGE, EXIT_INTERRUPTED = 0, 1, 2, 130

# merit thresholds quoted for the three benchmark sizes; their units are
# ambiguous, so they are only applied when asked for with ``G_max = quoted``
QUOTED_G_MAX = {31: 1.4, 33: 1.8, 35: 1.9}

PROBLEMS = ("benchmark",) + tuple(toys.TOYS)


class UsageError(Exception):
    pass


@dataclass
class RunConfig:
    n: int = 31
    problem: str = "benchmark"
    filter: SeedFilter = field(default_factory=SeedFilter)
    tracker: TrackerConfig = field(default_factory=TrackerConfig)
    explore: ExploreConfig = field(default_factory=ExploreConfig)
    threads: int = 1
    out_dir: str | None = None
    resume: bool = False
    stage_order: list | None = None
    R: float = 4.0
    R_lambda: float = 1.0
    rng_seed: int = 0
    n_starts: int = 10_000
    seed_limit: int | None = None
    top_k: int = 20

    _SCALARS = {"n": int, "problem": str, "threads": int, "out_dir": str, "R": float,
                "R_lambda": float, "rng_seed": int, "n_starts": int, "top_k": int}

    def validate(self) -> "RunConfig":
        if self.problem not in PROBLEMS:
            raise UsageError(f"unknown problem {self.problem!r}; choose from {', '.join(PROBLEMS)}")
        if self.problem == "benchmark" and (self.n % 2 == 0 or self.n < 9):
            raise UsageError(f"n must be odd and at least 9, got {self.n}")
        if self.threads < 1:
            raise UsageError("threads must be at least 1")
        if self.seed_limit is not None and self.seed_limit < 0:
            raise UsageError("seed limit must be non-negative")
        return self

    @property
    def tag(self) -> str:
        return f"n{self.n}" if self.problem == "benchmark" else self.problem

    def run_dir(self) -> Path:
        base = self.out_dir or os.environ.get("GRADCONT_OUT") or "gradcont_out"
        return Path(base) / self.tag

    def set(self, key: str, value: str) -> None:
        """Apply one ``key = value`` setting from a config file."""
        value = value.strip()
        try:
            if key in self._SCALARS:
                setattr(self, key, self._SCALARS[key](value))
            elif key == "seed_limit":
                self.seed_limit = None if value.lower() == "none" else int(value)
            elif key == "stage_order":
                self.stage_order = [int(v) for v in value.replace(",", " ").split()]
            elif key in {f.name for f in dataclasses.fields(SeedFilter)}:
                self.filter = dataclasses.replace(self.filter, **{key: float(value)})
            elif key in {f.name for f in dataclasses.fields(TrackerConfig)}:
                typ = int if key in ("target_iters", "max_iters", "max_consecutive_rejects",
                                     "ell_max") else float
                self.tracker = dataclasses.replace(self.tracker, **{key: typ(value)})
            elif key == "G_max":
                self.explore.G_max = _parse_gmax(value, self.n)
            elif key in ("dedup_tol", "accept_tol"):
                setattr(self.explore, key, float(value))
            elif key == "max_expand":
                caps = [None if v.lower() == "none" else int(v)
                        for v in value.replace(",", " ").split()]
                self.explore.max_expand = caps[0] if len(caps) == 1 else caps
            elif key == "pipelined":
                self.explore.pipelined = value.lower() in ("1", "true", "yes", "on")
            else:
                raise UsageError(f"unknown config key {key!r}")
        except ValueError as exc:
            raise UsageError(f"bad value for {key}: {exc}") from None

    @classmethod
    def from_text(cls, text: str) -> "RunConfig":
        cfg = cls()
        for lineno, line in enumerate(text.splitlines(), 1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise UsageError(f"config line {lineno}: expected key = value")
            key, value = line.split("=", 1)
            cfg.set(key.strip(), value)
        return cfg

    def to_text(self) -> str:
        g = self.explore.G_max
        lines = [f"n = {self.n}", f"problem = {self.problem}", f"threads = {self.threads}",
                 f"R = {self.R!r}", f"R_lambda = {self.R_lambda!r}", f"rng_seed = {self.rng_seed}",
                 f"n_starts = {self.n_starts}", f"seed_limit = {self.seed_limit}",
                 f"top_k = {self.top_k}"]
        if self.stage_order is not None:
            lines.append("stage_order = " + ", ".join(map(str, self.stage_order)))
        for f_ in dataclasses.fields(SeedFilter):
            lines.append(f"{f_.name} = {getattr(self.filter, f_.name)!r}")
        for f_ in dataclasses.fields(TrackerConfig):
            v = getattr(self.tracker, f_.name)
            if v is not None:
                lines.append(f"{f_.name} = {v!r}")
        quoted = ", ".join(f"{k}: {v}" for k, v in QUOTED_G_MAX.items())
        lines.append(f"# quoted merit thresholds ({quoted}) have unclear units and would "
                     "exclude known solutions; opt in with G_max = quoted")
        lines.append("G_max = " + (", ".join(map(repr, g)) if np.ndim(g) else repr(float(g))))
        lines += [f"dedup_tol = {self.explore.dedup_tol!r}",
                  f"accept_tol = {self.explore.accept_tol!r}",
                  "max_expand = " + (", ".join(map(str, self.explore.max_expand))
                                     if isinstance(self.explore.max_expand, list)
                                     else str(self.explore.max_expand)),
                  f"pipelined = {self.explore.pipelined}"]
        return "\n".join(lines) + "\n"

    def explore_config(self) -> ExploreConfig:
        return dataclasses.replace(self.explore, tracker=self.tracker, max_inflight=self.threads)


def _parse_gmax(value: str, n: int):
    v = value.strip().lower()
    if v == "quoted":
        if n not in QUOTED_G_MAX:
            raise ValueError(f"no quoted threshold for n = {n}")
        log.warning("G_max = %s is the quoted threshold for n = %d; it is applied to the norm "
                    "of the de-homogenized point, which may not be the intended unit",
                    QUOTED_G_MAX[n], n)
        return QUOTED_G_MAX[n]
    parts = [float(p) for p in v.replace(",", " ").split()]
    return parts[0] if len(parts) == 1 else parts


def load_config(args) -> RunConfig:
    cfg = RunConfig()
    if getattr(args, "config", None):
        try:
            cfg = RunConfig.from_text(Path(args.config).read_text())
        except OSError as exc:
            raise UsageError(f"cannot read config: {exc}") from None
    for key in ("n", "problem", "threads"):
        if getattr(args, key, None) is not None:
            setattr(cfg, key, getattr(args, key))
    if getattr(args, "out", None):
        cfg.out_dir = args.out
    if getattr(args, "seed_limit", None) is not None:
        cfg.seed_limit = args.seed_limit
    if getattr(args, "resume", False):
        cfg.resume = True
    for kv in getattr(args, "set", None) or []:
        if "=" not in kv:
            raise UsageError(f"--set expects key=value, got {kv!r}")
        k, v = kv.split("=", 1)
        cfg.set(k.strip(), v)
    return cfg.validate()


def build_system(cfg: RunConfig):
    if cfg.problem == "benchmark":
        ocs = composition.order_conditions(cfg.n)
        sym = composition.symmetry_conditions(cfg.n)
        return build_staged_system(ocs, sym, r=11, R=cfg.R, R_lambda=cfg.R_lambda,
                                   stage_order=cfg.stage_order)
    return toys.TOYS[cfg.problem]().system(cfg.R, cfg.R_lambda)


def final_constraints(cfg: RunConfig):
    if cfg.problem == "benchmark":
        return order_condition_system(cfg.n)
    p = toys.TOYS[cfg.problem]()
    return p.constraints_at(len(p.released))


def _atomic_write(path: Path, text: str) -> None:
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_text(text)
    os.replace(tmp, path)


# seeds --------------------------------------------------------------------


def cmd_seeds(cfg: RunConfig, dump: bool = True, out=None) -> int:
    """Count filtered seeds per pattern and optionally dump them as JSON lines."""
    out = out or sys.stdout
    d = cfg.run_dir()
    d.mkdir(parents=True, exist_ok=True)
    _atomic_write(d / "config.txt", cfg.to_text())
    if cfg.problem != "benchmark":
        return _toy_seeds(cfg, d, out)
    t0 = time.time()
    solutions: dict = {}

    def progress(pat, rows):
        log.info("pattern %s: %d seeds so far (%.0f s)", pat, sum(r.filtered for r in rows),
                 time.time() - t0)

    tally = seeds.seed_tally(cfg.n, cfg.filter, cfg.n_starts, cfg.rng_seed, solutions, progress)
    with open(d / "seed_counts.csv.tmp", "w", newline="") as fh:
        wr = csv.writer(fh)
        wr.writerow(["pattern", "solution_index", "a1", "a2", "a3", "a4", "a5", "one_norm",
                     "arrangements", "filtered"])
        for r in tally:
            a = [""] * 5 if r.a is None else [repr(float(v)) for v in r.a]
            wr.writerow([" ".join(map(str, r.pattern.i)), r.solution_index, *a,
                         "" if r.a is None else f"{r.one_norm:.6f}", r.arrangements, r.filtered])
    os.replace(d / "seed_counts.csv.tmp", d / "seed_counts.csv")
    total = sum(r.filtered for r in tally)
    if dump:
        tmp = d / "seeds.jsonl.tmp"
        written = 0
        with open(tmp, "w") as fh:
            for s in seeds.iter_seeds(cfg.n, cfg.filter, cfg.n_starts, cfg.rng_seed,
                                      cfg.seed_limit, solutions):
                fh.write(json.dumps(seeds.seed_record(s)) + "\n")
                written += 1
        os.replace(tmp, d / "seeds.jsonl")
    print(format_seed_summary(cfg.n, tally), file=out)
    if dump:
        print(f"wrote {written} seeds to {d / 'seeds.jsonl'}", file=out)
    print(f"elapsed {time.time() - t0:.1f} s", file=out)
    return EXIT_OK


def format_seed_summary(n: int, tally) -> str:
    total = sum(r.filtered for r in tally)
    multi = {}
    for r in tally:
        multi.setdefault(r.pattern.i, []).append(r)
    n_multi = sum(1 for v in multi.values() if len(v) > 1)
    lines = [f"n = {n}: {len(multi)} patterns, {sum(1 for r in tally if r.a is not None)} "
             f"reduced solutions ({n_multi} patterns with more than one)"]
    contributing = [r for r in tally if r.filtered]
    lines.append(f"{'pattern':<18s}{'sol':>4s}{'1-norm':>10s}{'arrangements':>14s}{'seeds':>10s}")
    for r in contributing:
        lines.append(f"{str(r.pattern):<18s}{r.solution_index:>4d}{r.one_norm:>10.4f}"
                     f"{r.arrangements:>14d}{r.filtered:>10d}")
    lines.append(f"total seeds: {total}")
    target = REFERENCE_SEED_COUNTS.get(n)
    if target:
        dev = (total - target) / target
        lines.append(f"reference total: {target}  deviation {dev:+.2%} "
                     f"({'within' if abs(dev) <= 0.02 else 'outside'} 2%)")
        single = sum(r.filtered for v in multi.values() if len(v) == 1 for r in v)
        lines.append(f"  from single-solution patterns: {single}; "
                     f"from multi-solution patterns: {total - single}")
    return "\n".join(lines)


def _toy_seeds(cfg, d: Path, out) -> int:
    problem = toys.TOYS[cfg.problem]()
    xs = toys.stationary_points(problem.constraints_at(0), problem.box, per_axis=11)
    if cfg.seed_limit is not None:
        xs = xs[:cfg.seed_limit]
    with open(d / "seeds.jsonl.tmp", "w") as fh:
        for i, x in enumerate(xs):
            fh.write(json.dumps({"pattern": [], "solution_index": 0, "arrangement_index": i,
                                 "gamma": x.tolist()}) + "\n")
    os.replace(d / "seeds.jsonl.tmp", d / "seeds.jsonl")
    print(f"{cfg.problem}: {len(xs)} stage-0 stationary points", file=out)
    return EXIT_OK


# explore ------------------------------------------------------------------


def _read_seeds(path: Path, limit):
    out = []
    with open(path) as fh:
        for line in fh:
            if limit is not None and len(out) >= limit:
                break
            if line.strip():
                out.append(json.loads(line))
    return out


def _lift_all(cfg, sys_, records) -> StageSet:
    S0 = StageSet(0, cfg.explore.dedup_tol)
    for rec in records:
        try:
            if cfg.problem == "benchmark":
                s = seeds.seed_from_record(rec)
                v = seeds.lift_seed(s.gamma, sys_, seeds.seed_tag(s))
            else:
                z = sys_.lift(0, np.asarray(rec["gamma"]))
                v = Vertex.make(sys_, 0, z, provenance=f"seed#{rec['arrangement_index']}")
        except GradContError as exc:
            log.warning("seed %s skipped: %s", rec.get("arrangement_index"), exc)
            continue
        S0.insert(v)
    return S0


def cmd_explore(cfg: RunConfig, out=None, stop_after: int | None = None) -> int:
    out = out or sys.stdout
    d = cfg.run_dir()
    ck = d / "explore"
    resuming = cfg.resume and explorer.completed_stage(ck) >= 0
    seed_file = d / "seeds.jsonl"
    if not resuming and not seed_file.exists():
        print(f"no seeds at {seed_file}; run the seeds subcommand first", file=sys.stderr)
        return EXIT_USAGE
    sys_ = build_system(cfg)
    ecfg = cfg.explore_config()
    t0 = time.time()
    S0 = None
    if not resuming:
        S0 = _lift_all(cfg, sys_, _read_seeds(seed_file, cfg.seed_limit))
        log.info("stage 0: %d vertices lifted", len(S0))
    try:
        res = explorer.run_all(sys_, S0, ecfg, ck, resume=cfg.resume, stop_after=stop_after)
    except KeyboardInterrupt:
        print(f"interrupted; completed stages are checkpointed in {ck}", file=sys.stderr)
        return EXIT_INTERRUPTED
    for k, S in enumerate(res.stages):
        print(f"stage {k:2d}: {len(S)} vertices", file=out)
    if len(res.stages) <= sys_.r:
        print(f"stopped after stage {len(res.stages) - 1}", file=out)
        return EXIT_OK
    rows, rejected = write_final_csv(d / "final.csv", sys_, res.final, final_constraints(cfg))
    bad = [r for r in rows if not r["max_constraint_residual"] <= 1e-9]
    print(f"final stage: {len(rows)} vertices written to {d / 'final.csv'} "
          f"({time.time() - t0:.1f} s)", file=out)
    if rejected:
        print(f"{len(rejected)} vertices do not refine to a point of the original problem; "
              f"see {d / 'final_rejected.csv'}", file=out)
    if rows:
        best = rows[0]
        print(f"best norm {best['merit']:.12f}, 1-norm {best['one_norm']:.12f}", file=out)
    if bad:
        print(f"{len(bad)} final vertices violate the constraints by more than 1e-9",
              file=sys.stderr)
        return EXIT_FAIL
    return EXIT_OK


def write_final_csv(path: Path, sys_, S: StageSet, constraints, tol: float = 1e-9
                    ) -> tuple[list[dict], list[dict]]:
    """Refine and write the final vertices; returns ``(rows, rejected)``.

    Each vertex is de-homogenized and refined on the original problem.
    Vertices that do not meet ``tol`` there (typically points with tiny
    ``gamma_0``, i.e. solutions at infinity) go to ``final_rejected.csv``.
    """
    rows, rejected = [], []
    for v in S.sorted():
        x = sys_.dehomogenize(v.z)
        with np.errstate(all="ignore"):
            raw = float(np.abs(constraints.evaluate(x)).max()) if np.all(np.isfinite(x)) else np.inf
        try:
            x, res = refine_stationary(constraints, x)
            reason = "" if res <= tol else f"residual {res:.3e} after refinement"
        except (GradContError, np.linalg.LinAlgError) as exc:
            res, reason = np.inf, str(exc)
        if reason:
            rejected.append({"id": v.id, "merit": v.merit, "raw_residual": raw, "reason": reason})
            continue
        rows.append({"id": v.id, "stage": v.stage, "merit": v.merit, "residual": v.residual,
                     "one_norm": float(np.abs(x).sum()), "max_constraint_residual": res,
                     "x": x})
    tmp = path.with_name(path.name + ".tmp")
    with open(tmp, "w", newline="") as fh:
        wr = csv.writer(fh)
        wr.writerow(["id", "stage", "merit", "residual", "one_norm", "max_constraint_residual"]
                    + [f"x{i + 1}" for i in range(sys_.n)])
        for r in rows:
            wr.writerow([r["id"], r["stage"], repr(r["merit"]), repr(r["residual"]),
                         repr(r["one_norm"]), repr(r["max_constraint_residual"])]
                        + [repr(float(v)) for v in r["x"]])
    os.replace(tmp, path)
    with open(path.with_name("final_rejected.csv"), "w", newline="") as fh:
        wr = csv.writer(fh)
        wr.writerow(["id", "merit", "raw_residual", "reason"])
        for r in rejected:
            wr.writerow([r["id"], repr(r["merit"]), repr(r["raw_residual"]), r["reason"]])
    return rows, rejected


# verify / polish ------------------------------------------------------------


def cmd_verify(path, out=None, tol: float = 1e-10) -> int:
    out = out or sys.stdout
    try:
        cv = CoeffVector.load(path)
    except (OSError, ValueError) as exc:
        print(f"cannot read coefficients from {path}: {exc}", file=sys.stderr)
        return EXIT_USAGE
    rep = verify(cv)
    print(rep.format(), file=out)
    ref = REFERENCE_ONE_NORMS.get(rep.n)
    if ref is not None:
        print(f"reference 1-norm for n = {rep.n}: {ref!r} (difference {rep.one_norm - ref:+.3e})",
              file=out)
    ok = rep.ok(tol)
    print("PASS" if ok else "FAIL", file=out)
    return EXIT_OK if ok else EXIT_FAIL


def read_final_csv(path) -> list[tuple[str, np.ndarray]]:
    """``(id, x)`` rows of a final-stage CSV written by ``explore``."""
    with open(path, newline="") as fh:
        return [(rec["id"], np.array([float(v) for k, v in rec.items() if k.startswith("x")]))
                for rec in csv.DictReader(fh)]


def _read_polish_inputs(path: Path):
    """Rows ``(label, x)`` from a final-stage CSV or a single coefficient file."""
    text = path.read_text()
    if text.lstrip().startswith("id,"):
        return read_final_csv(path)
    return [(path.stem, CoeffVector.parse(text).gamma)]


def cmd_polish(path, cfg: RunConfig | None = None, out=None) -> int:
    out = out or sys.stdout
    path = Path(path)
    try:
        rows = _read_polish_inputs(path)
    except (OSError, ValueError) as exc:
        print(f"cannot read {path}: {exc}", file=sys.stderr)
        return EXIT_USAGE
    if not rows:
        print("no input points", file=sys.stderr)
        return EXIT_FAIL
    cfg = cfg or RunConfig()
    rows.sort(key=lambda r: float(np.abs(r[1]).sum()))
    rows = rows[:cfg.top_k]
    d = cfg.run_dir() / "polished"
    d.mkdir(parents=True, exist_ok=True)
    table = []
    cache = {}
    for label, x in rows:
        n = len(x)
        if cfg.problem == "benchmark":
            if n not in cache:
                cache[n] = order_condition_system(n)
            cons = cache[n]
        else:
            cons = final_constraints(cfg)
        before = float(np.abs(x).sum())
        try:
            p = polish_one_norm(x, cons)
        except (GradContError, ValueError) as exc:
            log.warning("polishing %s failed: %s", label, exc)
            table.append((label, n, before, None, None, str(exc)))
            continue
        p.save(d / f"{label}.txt")
        res = float(np.abs(cons.evaluate(p.gamma)).max())
        table.append((label, n, before, float(np.abs(p.gamma).sum()), res, "ok"))
    with open(d / "polish_table.csv", "w", newline="") as fh:
        wr = csv.writer(fh)
        wr.writerow(["label", "n", "one_norm_before", "one_norm_after", "max_residual", "status"])
        for t in table:
            wr.writerow(["" if v is None else v for v in t])
    print(f"{'label':<20s}{'n':>4s}{'1-norm before':>20s}{'1-norm after':>20s}{'residual':>11s}",
          file=out)
    for label, n, b, a, r, st in table:
        if a is None:
            print(f"{label:<20s}{n:>4d}{b:>20.15f}{'failed: ' + st:>31s}", file=out)
        else:
            print(f"{label:<20s}{n:>4d}{b:>20.15f}{a:>20.15f}{r:>11.2e}", file=out)
    return EXIT_OK if any(t[-1] == "ok" for t in table) else EXIT_FAIL


# report ---------------------------------------------------------------------


def cmd_report(cfg: RunConfig, out=None) -> int:
    out = out or sys.stdout
    d = cfg.run_dir()
    if not d.exists():
        print(f"nothing at {d}", file=sys.stderr)
        return EXIT_USAGE
    counts = d / "seed_counts.csv"
    if counts.exists():
        with open(counts, newline="") as fh:
            rows = list(csv.DictReader(fh))
        total = sum(int(r["filtered"]) for r in rows)
        print(f"seeds: {total} from {len({r['pattern'] for r in rows})} patterns", file=out)
    ck = d / "explore"
    done = explorer.completed_stage(ck)
    for k in range(done + 1):
        with open(ck / f"stage_{k:02d}.jsonl") as fh:
            merits = [json.loads(line)["merit"] for line in fh if line.strip()]
        finite = [m for m in merits if m is not None]
        best = f", best norm {min(finite):.10f}" if finite else ""
        print(f"stage {k:2d}: {len(merits)} vertices{best}", file=out)
    final = d / "final.csv"
    if final.exists():
        with open(final, newline="") as fh:
            rows = list(csv.DictReader(fh))
        print(f"final vertices: {len(rows)}", file=out)
        for r in sorted(rows, key=lambda r: float(r["one_norm"]))[:10]:
            print(f"  {r['id']}  norm {float(r['merit']):.12f}  1-norm {float(r['one_norm']):.12f}"
                  f"  residual {float(r['max_constraint_residual']):.1e}", file=out)
    return EXIT_OK


# entry point ------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="gradcont", description=__doc__.split("\n\n")[0])
    p.add_argument("-v", "--verbose", action="count", default=0)
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, resume=False):
        sp.add_argument("--n", type=int)
        sp.add_argument("--config")
        sp.add_argument("--problem", choices=PROBLEMS)
        sp.add_argument("--threads", type=int)
        sp.add_argument("--seed-limit", type=int, dest="seed_limit")
        sp.add_argument("--out")
        sp.add_argument("--set", action="append", metavar="KEY=VALUE",
                        help="override one config key")
        if resume:
            sp.add_argument("--resume", action="store_true")

    sp = sub.add_parser("seeds", help="count and dump stage-0 seeds")
    common(sp)
    sp.add_argument("--count-only", action="store_true", help="skip the JSON-lines dump")
    sp = sub.add_parser("explore", help="run the staged exploration")
    common(sp, resume=True)
    sp.add_argument("--stop-after", type=int, help=argparse.SUPPRESS)
    sp = sub.add_parser("verify", help="check a coefficient file")
    sp.add_argument("coeff_file", nargs="?")
    sp.add_argument("--n", type=int, help="verify the shipped coefficient set for n")
    sp = sub.add_parser("polish", help="polish points into 1-norm minimizers")
    sp.add_argument("vertices_csv")
    sp.add_argument("--top-k", type=int, default=None)
    common(sp)
    sp = sub.add_parser("report", help="summarize a run directory")
    common(sp)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code else EXIT_OK
    logging.basicConfig(level=logging.WARNING - 10 * min(args.verbose, 2),
                        format="%(asctime)s %(name)s %(levelname)s %(message)s")
    try:
        if args.command == "verify":
            if args.coeff_file:
                return cmd_verify(args.coeff_file)
            if args.n in REFERENCE_ONE_NORMS:
                return cmd_verify(reference_path(args.n))
            raise UsageError("give a coefficient file or --n 31|33|35")
        cfg = load_config(args)
        if args.command == "seeds":
            return cmd_seeds(cfg, dump=not args.count_only)
        if args.command == "explore":
            return cmd_explore(cfg, stop_after=args.stop_after)
        if args.command == "polish":
            if args.top_k is not None:
                cfg.top_k = args.top_k
            return cmd_polish(args.vertices_csv, cfg)
        return cmd_report(cfg)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except KeyboardInterrupt:
        print("interrupted", file=sys.stderr)
        return EXIT_INTERRUPTED
