"""Staged exploration of the graph of stationary points.

Stage ``k`` vertices are non-singular zeros of ``F_k``. Every vertex of
stage ``k - 1`` lies on the curve ``H_k = 0``; following that curve and
collecting the sign changes of ``w_k`` yields stage ``k`` vertices and
directed edges between them.
"""

from __future__ import annotations

import csv
import hashlib
import json
import logging
import math
import os
import threading
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .errors import NoConvergence, SingularJacobian
from .tracker import (ABORTED, COUNT_LIMIT, LENGTH_LIMIT, LOOP_CLOSURE, SINGULAR_STOP,
                      TrackerConfig, follow)

log = logging.getLogger(__name__)

QUANTUM = 1e-6


def vertex_id(z) -> str:
    q = np.round(np.asarray(z, dtype=float) / QUANTUM).astype(np.int64)
    return hashlib.blake2b(q.tobytes(), digest_size=8).hexdigest()


@dataclass(frozen=True, eq=False)
class Vertex:
    id: str
    stage: int
    z: np.ndarray
    merit: float
    residual: float
    provenance: str = ""

    @classmethod
    def make(cls, sys, k: int, z, provenance: str = "", polish: bool = True,
             accept_tol: float = 1e-10) -> "Vertex":
        """Polish ``z`` with Newton on ``F_k``, canonicalize, and check the residual."""
        z = np.asarray(z, dtype=float)
        if polish:
            z, _ = sys.newton(k, z, accept=accept_tol)
        z = sys.canonicalize(z)
        res = float(np.abs(sys.F(k, z)).max())
        if not res <= accept_tol:
            raise NoConvergence(f"stage-{k} residual {res:.3e} above {accept_tol:.1e}")
        return cls(vertex_id(z), k, z, sys.merit(z), res, provenance)

    def gamma(self, n: int) -> np.ndarray:
        return self.z[:n + 1]

    def lam(self, n: int) -> np.ndarray:
        return self.z[n + 1:]

    def to_record(self, n: int) -> dict:
        return {"id": self.id, "stage": self.stage, "gamma": self.z[:n + 1].tolist(),
                "lambda": self.z[n + 1:].tolist(),
                "merit": self.merit if math.isfinite(self.merit) else None,
                "residual": self.residual, "parent": self.provenance}

    @classmethod
    def from_record(cls, rec: dict) -> "Vertex":
        z = np.array(rec["gamma"] + rec["lambda"], dtype=float)
        merit = float("inf") if rec["merit"] is None else float(rec["merit"])
        return cls(rec["id"], int(rec["stage"]), z, merit, float(rec["residual"]), rec["parent"])


@dataclass(frozen=True)
class Edge:
    src: str
    dst: str
    stage: int


class StageSet:
    """Vertices of one stage with tolerance-based deduplication.

    Points are bucketed by ``gamma_0`` on a grid of width ``dedup_tol``;
    a candidate is compared in the max-norm against the members of its own
    and the two neighbouring buckets. Insertion and the membership test run
    under one lock.
    """

    def __init__(self, stage: int, dedup_tol: float = 1e-6):
        self.stage = int(stage)
        self.dedup_tol = float(dedup_tol)
        self._items: list[Vertex] = []
        self._buckets: dict[int, list[int]] = {}
        self._lock = threading.Lock()

    def _key(self, z) -> int:
        return int(math.floor(z[0] / self.dedup_tol))

    def _find(self, z):
        b = self._key(z)
        for kb in (b - 1, b, b + 1):
            for i in self._buckets.get(kb, ()):
                if np.abs(self._items[i].z - z).max() <= self.dedup_tol:
                    return self._items[i]
        return None

    def find(self, z) -> Vertex | None:
        with self._lock:
            return self._find(np.asarray(z, dtype=float))

    def insert(self, v: Vertex) -> tuple[Vertex, bool]:
        """Store ``v`` unless a vertex within ``dedup_tol`` exists; returns
        ``(stored vertex, inserted)``."""
        if v.stage != self.stage:
            raise ValueError(f"vertex of stage {v.stage} inserted into stage {self.stage}")
        with self._lock:
            old = self._find(v.z)
            if old is not None:
                return old, False
            self._buckets.setdefault(self._key(v.z), []).append(len(self._items))
            self._items.append(v)
            return v, True

    def __len__(self):
        return len(self._items)

    def __iter__(self):
        return iter(list(self._items))

    def __contains__(self, z) -> bool:
        return self.find(z) is not None

    def sorted(self) -> list[Vertex]:
        return sorted(self._items, key=lambda v: (v.merit, v.id))

    def save(self, path, n: int) -> None:
        """One JSON record per vertex, sorted by merit; written atomically."""
        path = Path(path)
        tmp = path.with_name(path.name + ".tmp")
        with open(tmp, "w") as fh:
            for v in self.sorted():
                fh.write(json.dumps(v.to_record(n)) + "\n")
        os.replace(tmp, path)

    @classmethod
    def load(cls, path, stage: int, dedup_tol: float = 1e-6) -> "StageSet":
        out = cls(stage, dedup_tol)
        with open(path) as fh:
            for line in fh:
                if line.strip():
                    out.insert(Vertex.from_record(json.loads(line)))
        return out


@dataclass
class ExploreConfig:
    """Exploration settings.

    ``G_max`` bounds the merit ``R / |gamma_0|`` (the norm of the
    de-homogenized point); it may be a single number or one value per
    stage ``1..r``. ``max_expand`` caps the number of vertices expanded per
    stage (lowest merit first), which keeps smoke runs bounded; it may also be
    given per stage, with ``None`` meaning no cap. While the new stage is
    still empty the budget is extended one vertex at a time.
    """

    G_max: float | Sequence[float] = math.inf
    dedup_tol: float = 1e-6
    accept_tol: float = 1e-10
    tracker: TrackerConfig = field(default_factory=TrackerConfig)
    max_inflight: int = 1
    pipelined: bool = False
    max_expand: int | None | Sequence[int | None] = None

    def __post_init__(self):
        if not self.dedup_tol > self.accept_tol > 0:
            raise ValueError("need dedup_tol > accept_tol > 0")
        if self.max_inflight < 1:
            raise ValueError("max_inflight must be at least 1")

    def g_max(self, k: int) -> float:
        if np.ndim(self.G_max) == 0:
            return float(self.G_max)
        return float(self.G_max[k - 1])

    def expand_cap(self, k: int) -> int | None:
        if self.max_expand is None or np.ndim(self.max_expand) == 0:
            return self.max_expand
        return self.max_expand[k - 1]


@dataclass
class ExpandResult:
    vertices: list
    edges: list
    terminations: list
    duplicates: int = 0
    rejected: int = 0


def expand_vertex(sys, k: int, v: Vertex, cfg: ExploreConfig, store: StageSet | None = None
                  ) -> ExpandResult:
    """Follow the stage-``k`` curve through ``v`` and collect new vertices.

    A zero already in ``store`` ends the whole curve. Zeros above the merit
    bound are passed over. A forward run that does not close the loop is
    followed by a backward run from ``v``.
    """
    if store is None:
        store = StageSet(k, cfg.dedup_tol)
    res0 = float(np.abs(sys.F(k - 1, v.z)).max())
    if not res0 <= cfg.accept_tol:
        raise ValueError(f"vertex {v.id} is off its stage-{k - 1} curve (residual {res0:.3e})")
    out = ExpandResult([], [], [])
    bound = cfg.g_max(k)

    def sink(ev):
        try:
            cand = Vertex.make(sys, k, ev.z, provenance=v.id, accept_tol=cfg.accept_tol)
        except (NoConvergence, SingularJacobian) as exc:
            log.info("stage %d: zero near arclength %.4g rejected: %s", k, ev.arclen, exc)
            out.rejected += 1
            return True
        if not cand.merit <= bound:
            return True
        stored, inserted = store.insert(cand)
        out.edges.append(Edge(v.id, stored.id, k))
        if not inserted:
            out.duplicates += 1
            return False
        out.vertices.append(stored)
        return True

    for direction in (1, -1):
        res = follow(sys, k, v.z, direction, sink, cfg.tracker)
        out.terminations.append(res.termination.kind)
        if res.termination.kind in (LOOP_CLOSURE, ABORTED):
            break
    return out


@dataclass
class StageStats:
    stage: int
    expanded: int = 0
    vertices: int = 0
    edges: int = 0
    duplicates: int = 0
    rejected: int = 0
    failed: int = 0
    terminations: dict = field(default_factory=dict)

    def add(self, r: ExpandResult):
        self.expanded += 1
        self.edges += len(r.edges)
        self.duplicates += r.duplicates
        self.rejected += r.rejected
        for t in r.terminations:
            self.terminations[t] = self.terminations.get(t, 0) + 1


def _expand_safe(sys, k, v, cfg, store):
    try:
        return expand_vertex(sys, k, v, cfg, store)
    except Exception as exc:  # per-vertex failures must not end the stage
        log.warning("stage %d: expansion of %s failed: %s", k, v.id, exc)
        return None


def _to_expand(S_prev: StageSet, cfg: ExploreConfig, k: int) -> list[Vertex]:
    vs = S_prev.sorted()
    cap = cfg.expand_cap(k)
    return vs if cap is None else vs[:cap]


def run_stage(sys, k: int, S_prev: StageSet, cfg: ExploreConfig, store: StageSet | None = None
              ) -> tuple[StageSet, list[Edge], StageStats]:
    """Expand every vertex of ``S_prev`` (lowest merit first) into stage ``k``."""
    if not 1 <= k <= sys.r:
        raise ValueError(f"stage {k} outside 1..{sys.r}")
    S = store if store is not None else StageSet(k, cfg.dedup_tol)
    stats = StageStats(k)
    edges: list[Edge] = []
    todo = _to_expand(S_prev, cfg, k)
    spare = S_prev.sorted()[len(todo):]
    if cfg.max_inflight == 1:
        results = (_expand_safe(sys, k, v, cfg, S) for v in todo)
        for r in results:
            _collect(r, edges, stats)
    else:
        with ThreadPoolExecutor(cfg.max_inflight) as pool:
            for r in pool.map(lambda v: _expand_safe(sys, k, v, cfg, S), todo):
                _collect(r, edges, stats)
    for v in spare:
        if len(S):
            break
        _collect(_expand_safe(sys, k, v, cfg, S), edges, stats)
    stats.vertices = len(S)
    log.info("stage %d: %d expanded, %d vertices, %d edges, %d duplicate stops, terminations %s",
             k, stats.expanded, stats.vertices, stats.edges, stats.duplicates, stats.terminations)
    return S, edges, stats


def _collect(r, edges, stats):
    if r is None:
        stats.failed += 1
        return
    stats.add(r)
    edges.extend(r.edges)


# checkpointed driver ------------------------------------------------------


@dataclass
class ExploreResult:
    stages: list
    edges: list
    stats: list

    @property
    def final(self) -> StageSet:
        return self.stages[-1]


def _stage_path(d: Path, k: int) -> Path:
    return d / f"stage_{k:02d}.jsonl"


def _write_edges(path: Path, edges: Iterable[Edge]) -> None:
    tmp = path.with_name(path.name + ".tmp")
    with open(tmp, "w", newline="") as fh:
        wr = csv.writer(fh)
        wr.writerow(["from_id", "to_id", "stage"])
        for e in edges:
            wr.writerow([e.src, e.dst, e.stage])
    os.replace(tmp, path)


def _read_edges(path: Path) -> list[Edge]:
    if not path.exists():
        return []
    with open(path, newline="") as fh:
        return [Edge(r["from_id"], r["to_id"], int(r["stage"])) for r in csv.DictReader(fh)]


def _write_progress(d: Path, k: int) -> None:
    tmp = d / "progress.json.tmp"
    tmp.write_text(json.dumps({"completed_stage": k}))
    os.replace(tmp, d / "progress.json")


def completed_stage(checkpoint_dir) -> int:
    """Last stage whose checkpoint is complete, or -1."""
    p = Path(checkpoint_dir) / "progress.json"
    if not p.exists():
        return -1
    return int(json.loads(p.read_text())["completed_stage"])


def run_all(sys, S0: StageSet | None, cfg: ExploreConfig, checkpoint_dir=None,
            resume: bool = True, stop_after: int | None = None) -> ExploreResult:
    """Run stages ``1..r`` with a checkpoint after each one.

    With ``resume`` the run continues after the last completed stage found
    in ``checkpoint_dir`` (``S0`` may then be None). ``stop_after`` ends the
    run early after that stage, leaving a resumable checkpoint.
    """
    d = Path(checkpoint_dir) if checkpoint_dir is not None else None
    n = sys.n
    stages: list[StageSet] = []
    edges: list[Edge] = []
    done = -1
    if d is not None:
        d.mkdir(parents=True, exist_ok=True)
        if resume:
            done = completed_stage(d)
    if done >= 0:
        stages = [StageSet.load(_stage_path(d, k), k, cfg.dedup_tol) for k in range(done + 1)]
        edges = [e for e in _read_edges(d / "edges.csv") if e.stage <= done]
        log.info("resuming after stage %d", done)
    else:
        if S0 is None:
            raise ValueError("no stage-0 set given and no checkpoint to resume from")
        stages = [S0]
        done = 0
        if d is not None:
            S0.save(_stage_path(d, 0), n)
            _write_edges(d / "edges.csv", [])
            _write_progress(d, 0)
    stats = []
    last = sys.r if stop_after is None else min(sys.r, stop_after)
    if cfg.pipelined and done < last:
        new_stages, new_edges, stats = _run_pipelined(sys, stages[-1], done + 1, last, cfg)
        stages += new_stages
        edges += new_edges
        if d is not None:
            for S in new_stages:
                S.save(_stage_path(d, S.stage), n)
            _write_edges(d / "edges.csv", edges)
            _write_progress(d, last)
    else:
        for k in range(done + 1, last + 1):
            S, e, st = run_stage(sys, k, stages[-1], cfg)
            stages.append(S)
            edges += e
            stats.append(st)
            if d is not None:
                S.save(_stage_path(d, k), n)
                _write_edges(d / "edges.csv", edges)
                _write_progress(d, k)
    return ExploreResult(stages, edges, stats)


def _run_pipelined(sys, S_start: StageSet, k_first: int, k_last: int, cfg: ExploreConfig):
    """Expand each new vertex as soon as it is inserted instead of waiting
    for its stage to finish. Vertex sets match the staged run up to the
    order in which curves are visited."""
    stores = {k: StageSet(k, cfg.dedup_tol) for k in range(k_first, k_last + 1)}
    stats = {k: StageStats(k) for k in stores}
    edges: list[Edge] = []
    lock = threading.Lock()
    pending = threading.Condition(lock)
    inflight = [0]
    pool = ThreadPoolExecutor(cfg.max_inflight)

    def submit(k, v):
        with lock:
            inflight[0] += 1
        pool.submit(task, k, v)

    def task(k, v):
        try:
            r = _expand_safe(sys, k, v, cfg, stores[k])
            with lock:
                _collect(r, edges, stats[k])
            if r is not None and k < k_last:
                for nv in r.vertices:
                    submit(k + 1, nv)
        finally:
            with lock:
                inflight[0] -= 1
                pending.notify_all()

    for v in _to_expand(S_start, cfg, k_first):
        submit(k_first, v)
    with lock:
        while inflight[0]:
            pending.wait()
    pool.shutdown()
    for k, s in stats.items():
        s.vertices = len(stores[k])
    return [stores[k] for k in sorted(stores)], edges, [stats[k] for k in sorted(stats)]
