"""Edge coloring by repeated online rounding of the uniform fractional matching.

Phases ``i = 1, 2, ...`` target residual degrees
``Delta_i = Delta - (i-1) L (1-eps)^2``; a phase consists of
``ceil(alpha L)`` rounding passes with ``x = 1/Delta_i`` on the still
uncolored edges, each pass coloring its matched edges with one fresh color.
Once ``Delta_i`` drops below the greedy cutoff the remaining edges are
colored greedily.  All passes advance one arrival at a time, so the whole
procedure is online.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from ..graph import ArrivalEvent, Coloring, FRACTIONAL_TOL, GraphInstance
from ..rng import run_key
from ..rounding import Backend, OnlineRounder, default_constants
from .greedy import GreedyColorer

PRESETS = ("paper", "desk")
# multipliers on the constants 12 (phase length), 18 (split stop), 48 (greedy cutoff)
DESK_MULTIPLIERS = (1 / 48, 1 / 24, 1 / 40)
DESK_EPS_CAP = 0.3
DEFAULT_COLOR_REPLICAS = 2000


@dataclass(frozen=True)
class ReductionConfig:
    n: int
    delta: int
    alpha: float
    L: int
    epsilon: float
    greedy_cutoff: float
    split_threshold: float
    preset: str = "paper"
    multipliers: tuple[float, float, float] = (1.0, 1.0, 1.0)

    @classmethod
    def build(cls, n: int, delta: int, preset: str = "paper", alpha: Optional[float] = None,
              multipliers: Optional[Sequence[float]] = None, eps_cap: Optional[float] = None) -> "ReductionConfig":
        if preset not in PRESETS:
            raise ValueError(f"unknown preset {preset!r}")
        if multipliers is None:
            multipliers = DESK_MULTIPLIERS if preset == "desk" else (1.0, 1.0, 1.0)
        if eps_cap is None and preset == "desk":
            eps_cap = DESK_EPS_CAP
        m_len, m_split, m_cut = (float(m) for m in multipliers)
        if alpha is None:
            alpha = default_constants().alpha
        log_n = math.log(n) if n > 1 else 0.0
        if delta > 0:
            L = math.ceil(m_len * 12 * math.sqrt(delta * log_n))
            eps = (log_n / delta) ** 0.25
        else:
            L, eps = 0, 0.0
        if eps_cap is not None:
            eps = min(eps, eps_cap)
        cutoff = m_cut * 48 * (delta ** 3 * log_n) ** 0.25
        split = m_split * 18 * math.sqrt(delta * log_n)
        return cls(n, delta, float(alpha), int(L), float(eps), float(cutoff), float(split),
                   preset, (m_len, m_split, m_cut))

    def for_delta(self, delta: int) -> "ReductionConfig":
        """Same preset and multipliers for a subgraph of max degree ``delta``."""
        cap = DESK_EPS_CAP if self.preset == "desk" else None
        return ReductionConfig.build(self.n, delta, self.preset, self.alpha, self.multipliers, cap)

    @property
    def colors_per_phase(self) -> int:
        return math.ceil(self.alpha * self.L)

    @property
    def phase_deltas(self) -> list[float]:
        """Residual degree targets of the phases that run (before greedy)."""
        if self.L < 1:
            return []
        out = []
        step = self.L * (1 - self.epsilon) ** 2
        for i in range(1, self.delta // self.L + 1):
            d_i = self.delta - (i - 1) * step
            if d_i < self.greedy_cutoff or d_i <= 0:
                break
            out.append(d_i)
        return out

    @property
    def phase_count(self) -> int:
        return len(self.phase_deltas)

    @property
    def reserved_colors(self) -> int:
        return self.phase_count * self.colors_per_phase

    def as_dict(self) -> dict:
        return {
            "n": self.n, "delta": self.delta, "alpha": self.alpha, "L": self.L,
            "epsilon": self.epsilon, "greedy_cutoff": self.greedy_cutoff,
            "split_threshold": self.split_threshold, "preset": self.preset,
            "multipliers": list(self.multipliers), "phase_count": self.phase_count,
            "colors_per_phase": self.colors_per_phase, "phase_deltas": self.phase_deltas,
        }


@dataclass
class PhaseStats:
    target_delta: float
    color_offset: int
    colors_reserved: int
    colors_used: int = 0
    edges_colored: int = 0
    residual_max_degree: int = 0
    below_next_target: bool = False

    def as_dict(self) -> dict:
        return dict(self.__dict__)


class MatchingColorer:
    """Online phase driver for one (bipartite) edge stream.

    ``step(v, neighbors)`` colors what the rounding passes match among the
    edges ``(u, v)`` and returns the uncolored rest for the caller's greedy.
    Colors are ``color_offset + phase * colors_per_phase + pass``.
    """

    def __init__(self, n: int, cfg: ReductionConfig, backend: Backend, seed: int,
                 path: tuple[int, ...] = (), color_offset: int = 0):
        self.cfg = cfg
        self.n = n
        consts = default_constants()
        deltas = cfg.phase_deltas
        cpp = cfg.colors_per_phase
        self.phases = [PhaseStats(d_i, color_offset + i * cpp, cpp) for i, d_i in enumerate(deltas)]
        self.passes: list[list[OnlineRounder]] = [
            [OnlineRounder(n, backend, run_key(seed, *path, i, j), consts, track=False) for j in range(cpp)]
            for i in range(len(deltas))
        ]
        self.load = [[np.zeros(n) for _ in range(cpp)] for _ in deltas]
        self.colored_per_phase = np.zeros((len(deltas), n), dtype=np.int64)
        self.residual = np.zeros((len(deltas), n), dtype=np.int64)
        self._used = [set() for _ in deltas]

    def step(self, v: int, neighbors: Sequence[int]) -> tuple[dict, list[int]]:
        colored: dict[tuple[int, int], int] = {}
        left = sorted(neighbors)
        for i, stats in enumerate(self.phases):
            x = 1.0 / stats.target_delta
            for j, rounder in enumerate(self.passes[i]):
                load = self.load[i][j]
                offered = []
                v_load = 0.0
                for u in left:
                    # keep each pass a valid fractional matching
                    if load[u] + x <= 1 + FRACTIONAL_TOL and v_load + x <= 1 + FRACTIONAL_TOL:
                        offered.append(u)
                        load[u] += x
                        v_load += x
                load[v] = v_load
                tr = rounder.step(ArrivalEvent(v, tuple((u, x) for u in offered)))
                if tr is not None and tr.matched_to is not None:
                    u = tr.matched_to
                    colored[(u, v)] = stats.color_offset + j
                    self._used[i].add(j)
                    stats.edges_colored += 1
                    self.colored_per_phase[i, [u, v]] += 1
                    left.remove(u)
            for u in left:
                self.residual[i, [u, v]] += 1
        return colored, left

    def finish(self) -> list[PhaseStats]:
        for i, stats in enumerate(self.phases):
            stats.colors_used = len(self._used[i])
            stats.residual_max_degree = int(self.residual[i].max()) if self.n else 0
            nxt = self.phases[i + 1].target_delta if i + 1 < len(self.phases) else self.cfg.greedy_cutoff
            stats.below_next_target = stats.residual_max_degree < nxt
        return self.phases

    @property
    def deficiency(self) -> float:
        return sum(float(np.sum(s.deficiency)) for row in self.passes for r in row for s in r.schedules)


@dataclass
class ColoringResult:
    coloring: Coloring
    delta: int
    per_phase: list[dict] = field(default_factory=list)
    deficiency_total: float = 0.0
    reserved: int = 0
    levels: list[dict] = field(default_factory=list)
    config: Optional[dict] = None

    @property
    def palette(self) -> int:
        return self.coloring.palette_size

    @property
    def ratio(self) -> float:
        return self.palette / self.delta if self.delta > 0 else float(self.palette)


def default_color_backend() -> Backend:
    return Backend.ensemble(DEFAULT_COLOR_REPLICAS)


def color_via_matchings(inst: GraphInstance, cfg: Optional[ReductionConfig] = None,
                        backend: Optional[Backend] = None, seed: int = 0) -> ColoringResult:
    """Phase-based coloring of a (bipartite) instance, greedy on the remainder."""
    if cfg is None:
        cfg = ReductionConfig.build(inst.n, inst.delta)
    backend = backend or default_color_backend()
    mc = MatchingColorer(inst.n, cfg, backend, seed)
    greedy = GreedyColorer(inst.n, offset=cfg.reserved_colors)
    out = Coloring()
    for ev in inst.arrivals:
        v = ev.vertex
        colored, left = mc.step(v, [u for u, _ in ev.edges])
        out.assignment.update(colored)
        for u in left:
            out.assignment[(u, v)] = greedy.color(u, v)
    phases = mc.finish()
    return ColoringResult(out, inst.delta, [p.as_dict() for p in phases], mc.deficiency,
                          cfg.reserved_colors + greedy.high_water, config=cfg.as_dict())
