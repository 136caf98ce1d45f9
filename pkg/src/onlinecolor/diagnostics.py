"""Statistical checks of the rounding and the coloring reductions.

Trials never reuse the estimator's replicas.  The schedule (the ``p``
values) is first fixed by one estimator run, then ``T`` fresh trajectories
of that fixed algorithm are simulated on their own random streams.
"""
from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import asdict, dataclass, field
from typing import Optional, Sequence

import numpy as np

from .coloring.general import draw_sides
from .coloring.reduction import ReductionConfig, color_via_matchings, default_color_backend
from .graph import GraphInstance, two_coloring
from .rng import run_key
from .rounding import Backend, EnsembleState, OnlineRounder, PickSchedule, default_constants
from .rounding.exact import ExactRounder

# path prefix of the trial streams (the estimator uses the bare seed)
_TRIALS = 7


@dataclass
class EdgeMarginal:
    u: int
    v: int
    x: float
    target: float
    estimate: float
    se: float
    z: float


@dataclass
class MarginalReport:
    edges: list[EdgeMarginal]
    trials: int
    backend: str
    exact: bool

    @property
    def worst_z(self) -> float:
        return max((abs(e.z) for e in self.edges), default=0.0)

    @property
    def max_abs_error(self) -> float:
        return max((abs(e.estimate - e.target) for e in self.edges), default=0.0)

    def rows(self) -> list[dict]:
        return [asdict(e) for e in self.edges]

    def summary(self) -> dict:
        return {"kind": "marginals", "trials": self.trials, "backend": self.backend, "exact": self.exact,
                "edges": len(self.edges), "worst_z": self.worst_z, "max_abs_error": self.max_abs_error}


@dataclass
class FreeStatusTrace:
    """Per trial and vertex: arrival at which it got matched (-1 if never),
    and whether that match counts as low fractional degree."""
    match_time: np.ndarray
    match_low: np.ndarray

    def matched_before(self, u: int, t: int) -> np.ndarray:
        mt = self.match_time[:, u]
        return (mt >= 0) & (mt < t)

    def split(self, u: int, t: int) -> tuple[np.ndarray, np.ndarray]:
        """``(M^L, M^H)`` indicators of ``u`` being matched before ``t``."""
        m = self.matched_before(u, t)
        low = self.match_low[:, u]
        return m & low, m & ~low


def frozen_schedules(inst: GraphInstance, backend: Backend, seed: int) -> list[PickSchedule]:
    """One estimator run; returns the per-arrival schedules (indexed by vertex)."""
    rounder = OnlineRounder(inst.n, backend, run_key(seed), track=False)
    for ev in inst.arrivals:
        rounder.step(ev)
    return rounder.schedules


def run_trials(inst: GraphInstance, schedules: Sequence[PickSchedule], trials: int, seed: int,
               track: bool = True) -> EnsembleState:
    """``trials`` independent trajectories of the algorithm with frozen ``p``."""
    ens = EnsembleState(inst.n, trials, run_key(seed, _TRIALS), default_constants(),
                        frozen=list(schedules), track=track)
    for ev in inst.arrivals:
        ens.step(ev)
    return ens


def _binomial_se(p: float, t: int) -> float:
    return math.sqrt(max(p * (1 - p), 0.0) / t) if t > 0 else 0.0


def estimate_marginals(inst: GraphInstance, backend: Backend = Backend(), trials: int = 100_000,
                       seed: int = 0) -> MarginalReport:
    """Per-edge match probability against ``(1/2+c) x_e``.

    With the exact backend the probabilities are read off the exact
    distribution (no sampling, ``se = 0``).
    """
    consts = default_constants()
    if backend.kind == "exact":
        rounder = OnlineRounder(inst.n, backend, run_key(seed), track=False)
        for ev in inst.arrivals:
            rounder.step(ev)
        edges = []
        for s in rounder.schedules:
            for i, e in enumerate(s.edges()):
                est = rounder.marginals[e]
                tgt = consts.half_plus_c * float(s.x[i])
                edges.append(EdgeMarginal(e[0], e[1], float(s.x[i]), tgt, est, 0.0, 0.0 if est == tgt else math.copysign(math.inf, est - tgt)))
        return MarginalReport(edges, 0, backend.describe(), True)
    schedules = frozen_schedules(inst, backend, seed)
    ens = run_trials(inst, schedules, trials, seed, track=False)
    edges = []
    for s in schedules:
        freq = ens.frequencies(s)
        for i, e in enumerate(s.edges()):
            tgt = consts.half_plus_c * float(s.x[i])
            est = float(freq[i])
            se = _binomial_se(est, trials)
            # a zero-variance estimate only agrees when it is exact
            z = (est - tgt) / se if se > 0 else (0.0 if est == tgt else math.copysign(math.inf, est - tgt))
            edges.append(EdgeMarginal(e[0], e[1], float(s.x[i]), tgt, est, se, z))
    return MarginalReport(edges, trials, backend.describe(), False)


@dataclass
class PairCovariance:
    probe: int
    u: int
    w: int
    cov_f: float
    se_f: float
    cov_m: float
    cov_ml: float
    se_ml: float


@dataclass
class HighMass:
    u: int
    v: int
    prob: float
    se: float


@dataclass
class CovarianceReport:
    pairs: list[PairCovariance]
    high_edges: list[HighMass]
    high_vertices: list[HighMass]        # v = -1: mass of u over all of its matches
    trials: int
    bound_cov: float
    bound_high: float
    bipartite: bool
    identity_gap: float = 0.0            # max |Cov(F,F') - Cov(M,M')|
    partition_ok: bool = True

    def cov_violations(self, k: float = 4.0) -> list[PairCovariance]:
        return [p for p in self.pairs if p.cov_f > self.bound_cov + k * p.se_f]

    def high_violations(self, k: float = 4.0) -> list[HighMass]:
        return [h for h in self.high_vertices if h.prob > self.bound_high + k * h.se]

    def summary(self) -> dict:
        return {
            "kind": "covariances", "trials": self.trials, "bipartite": self.bipartite,
            "pairs": len(self.pairs), "bound_cov": self.bound_cov, "bound_high": self.bound_high,
            "max_cov_f": max((p.cov_f for p in self.pairs), default=0.0),
            "max_cov_ml": max((p.cov_ml for p in self.pairs), default=0.0),
            "max_high_vertex": max((h.prob for h in self.high_vertices), default=0.0),
            "cov_violations": len(self.cov_violations()), "high_violations": len(self.high_violations()),
            "identity_gap": self.identity_gap, "partition_ok": self.partition_ok,
        }

    def rows(self) -> list[dict]:
        return [asdict(p) for p in self.pairs]


def _pair_stats(a: np.ndarray):
    """Covariance matrix of the columns of ``a`` and the SE of each entry."""
    t = a.shape[0]
    c = a - a.mean(axis=0)
    prod = c[:, :, None] * c[:, None, :]
    cov = prod.mean(axis=0)
    se = prod.std(axis=0) / math.sqrt(t)
    return cov, se


def pair_covariance(trace: FreeStatusTrace, u: int, w: int, t: int) -> tuple[float, float]:
    """Empirical ``Cov(F_u, F_w)`` just before arrival ``t`` and its standard error."""
    f = np.stack([~trace.matched_before(u, t), ~trace.matched_before(w, t)], axis=1).astype(float)
    cov, se = _pair_stats(f)
    return float(cov[0, 1]), float(se[0, 1])


def probe_points(inst: GraphInstance, sides: Optional[Sequence[int]]) -> list[tuple[int, list[int]]]:
    """Arrivals with at least two earlier same-side neighbours, grouped by side."""
    out = []
    for ev in inst.arrivals:
        groups: dict[int, list[int]] = {}
        for u in ev.neighbors:
            groups.setdefault(sides[u] if sides is not None else 0, []).append(u)
        for g in groups.values():
            if len(g) >= 2:
                out.append((ev.vertex, sorted(g)))
    return out


def estimate_covariances(inst: GraphInstance, probes: str | Sequence[int] = "all", trials: int = 100_000,
                         seed: int = 0, backend: Backend = Backend()) -> CovarianceReport:
    """Free-status covariances at probe arrivals plus high-degree match masses.

    ``probes`` is ``"all"``, ``"worst"`` (keep only the largest covariance
    per probe) or an explicit list of probe vertices.
    """
    consts = default_constants()
    c = consts.c
    sides = inst.sides if inst.sides is not None else two_coloring(inst)
    bipartite = sides is not None
    schedules = frozen_schedules(inst, backend, seed)
    ens = run_trials(inst, schedules, trials, seed, track=True)
    trace = FreeStatusTrace(ens.match_time, ens.match_low)
    points = probe_points(inst, sides)
    if not isinstance(probes, str):
        keep = set(int(p) for p in probes)
        points = [pt for pt in points if pt[0] in keep]
    pairs = []
    gap = 0.0
    for v, group in points:
        m = np.stack([trace.matched_before(u, v) for u in group], axis=1).astype(float)
        f = 1.0 - m
        ml = np.stack([trace.split(u, v)[0] for u in group], axis=1).astype(float)
        cov_f, se_f = _pair_stats(f)
        cov_m, _ = _pair_stats(m)
        cov_ml, se_ml = _pair_stats(ml)
        gap = max(gap, float(np.max(np.abs(cov_f - cov_m))))
        found = []
        for a in range(len(group)):
            for b in range(a + 1, len(group)):
                found.append(PairCovariance(v, group[a], group[b], float(cov_f[a, b]), float(se_f[a, b]),
                                            float(cov_m[a, b]), float(cov_ml[a, b]), float(se_ml[a, b])))
        if probes == "worst":
            found = [max(found, key=lambda p: p.cov_f)]
        pairs.extend(found)
    high_edges = []
    for s in schedules:
        for u, v in s.edges():
            hit = (trace.match_time[:, u] == v) & ~trace.match_low[:, u]
            p = float(hit.mean())
            high_edges.append(HighMass(u, v, p, _binomial_se(p, trials)))
    high_vertices = []
    ok = True
    for u in range(inst.n):
        matched = trace.match_time[:, u] >= 0
        ml, mh = matched & trace.match_low[:, u], matched & ~trace.match_low[:, u]
        ok &= bool(np.all((ml ^ mh) == matched))
        p = float(mh.mean())
        high_vertices.append(HighMass(u, -1, p, _binomial_se(p, trials)))
    return CovarianceReport(pairs, high_edges, high_vertices, trials, 6 * c, 2 * c, bipartite, gap, ok)


@dataclass
class ConcentrationReport:
    trials: int
    epsilon: float
    delta: int
    threshold: float = 0.0
    exceed_frequency: float = 0.0
    chernoff_target: float = 0.0
    mean_ratio: float = 1.0
    max_ratio_deviation: float = 0.0
    vertices: int = 0
    phases: list[dict] = field(default_factory=list)

    @property
    def empty(self) -> bool:
        return self.vertices == 0

    def summary(self) -> dict:
        d = asdict(self)
        d["kind"] = "concentration"
        d["empty"] = self.empty
        return d


def _edge_array(inst: GraphInstance) -> np.ndarray:
    return np.array(inst.edge_list(), dtype=np.int64).reshape(-1, 2)


def crossing_degrees(inst: GraphInstance, sides: np.ndarray, e: Optional[np.ndarray] = None) -> np.ndarray:
    """Number of neighbours on the other side, per vertex."""
    if e is None:
        e = _edge_array(inst)
    cross = sides[e[:, 0]] != sides[e[:, 1]]
    return np.bincount(e[cross].ravel(), minlength=inst.n)


def concentration_report(inst: GraphInstance, cfg: Optional[ReductionConfig] = None, trials: int = 200,
                         seed: int = 0, phase_trials: int = 0,
                         backend: Optional[Backend] = None) -> ConcentrationReport:
    """Bipartition degree tails and per-phase coloring counts.

    ``D_v`` is the crossing degree of ``v`` under a fresh random bipartition;
    its exceedance of ``(Delta'/2)(1+eps)`` is compared with
    ``exp(-(Delta'/2) eps^2 / 3)``.  With ``phase_trials > 0`` the bipartite
    colorer is also run and, per phase, the frequency of a vertex getting at
    most ``L (1-eps)^2`` colored edges is compared with ``exp(-L eps^2 / 4)``.
    """
    if cfg is None:
        cfg = ReductionConfig.build(max(inst.n, 2), inst.delta, "desk")
    eps = cfg.epsilon
    rep = ConcentrationReport(trials, eps, inst.delta)
    if inst.num_edges == 0:
        return rep
    deg = inst.degrees()
    active = deg > 0
    dp = inst.delta
    rep.threshold = dp / 2 * (1 + eps)
    rep.chernoff_target = math.exp(-(dp / 2) * eps ** 2 / 3)
    rep.vertices = int(active.sum())
    exceed = 0
    ratio_sum = np.zeros(inst.n)
    e = _edge_array(inst)
    for t in range(trials):
        sides = draw_sides(inst.n, 1, int(run_key(seed, _TRIALS, t)[0]) & 0x7FFFFFFF).sides[:, 0]
        dv = crossing_degrees(inst, sides, e)
        exceed += int(np.sum(dv[active] > rep.threshold))
        ratio_sum[active] += dv[active] / (deg[active] / 2)
    rep.exceed_frequency = exceed / (trials * rep.vertices)
    per_vertex = ratio_sum[active] / trials
    rep.mean_ratio = float(per_vertex.mean())
    rep.max_ratio_deviation = float(np.max(np.abs(per_vertex - 1)))
    if phase_trials > 0 and cfg.phase_count > 0:
        rep.phases = _phase_counts(inst, cfg, phase_trials, seed, backend or default_color_backend())
    return rep


def _phase_counts(inst, cfg, phase_trials, seed, backend) -> list[dict]:
    floor = cfg.L * (1 - cfg.epsilon) ** 2
    target = math.exp(-cfg.L * cfg.epsilon ** 2 / 4)
    low = np.zeros(cfg.phase_count)
    seen = np.zeros(cfg.phase_count)
    total = np.zeros(cfg.phase_count)
    for t in range(phase_trials):
        res = color_via_matchings(inst, cfg, backend, seed=int(run_key(seed, _TRIALS, 1 << 20, t)[0]) & 0x7FFFFFFF)
        counts = np.zeros((cfg.phase_count, inst.n), dtype=np.int64)
        start = inst.degrees()
        for (u, v), col in res.coloring.assignment.items():
            i = col // cfg.colors_per_phase
            if i < cfg.phase_count:
                counts[i, [u, v]] += 1
        for i, d_i in enumerate(cfg.phase_deltas):
            # only vertices still near the phase's degree target are covered by the tail bound
            heavy = start >= d_i - cfg.colors_per_phase
            low[i] += np.sum(counts[i, heavy] <= floor)
            total[i] += np.sum(counts[i, heavy])
            seen[i] += np.sum(heavy)
            start = start - counts[i]
    return [{"phase": i, "target_delta": d, "floor": floor, "frequency": float(low[i] / seen[i]) if seen[i] else 0.0,
             "vertices": int(seen[i]), "tail_target": target,
             "mean_colored": float(total[i] / seen[i]) if seen[i] else 0.0} for i, d in enumerate(cfg.phase_deltas)]


def exact_covariance(inst: GraphInstance, u: int, w: int, v: int) -> float:
    """Exact ``Cov(F_u, F_w)`` just before ``v`` arrives (small instances)."""
    ex = ExactRounder(inst.n, default_constants())
    for ev in inst.arrivals:
        if ev.vertex == v:
            break
        ex.schedule(ev)
    d = ex.dist
    return d.joint_free(u, w) - d.free_probability(u) * d.free_probability(w)


def rows_to_csv(rows: list[dict]) -> str:
    buf = io.StringIO()
    if not rows:
        return ""
    w = csv.DictWriter(buf, fieldnames=list(rows[0]), lineterminator="\n")
    w.writeheader()
    for r in rows:
        w.writerow({k: (repr(v) if isinstance(v, float) else v) for k, v in r.items()})
    return buf.getvalue()


def to_json(obj) -> str:
    return json.dumps(obj, sort_keys=True, indent=2, default=float)
