"""General graphs: recursive random bipartitions feeding the bipartite colorer.

Each vertex draws one side bit per recursion level when it arrives.  An edge
belongs to the first level at which its endpoints fall on different sides;
edges never separated form the final residual, which is colored greedily.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from ..graph import GraphInstance, Coloring
from ..rng import level_uniforms, run_key
from ..rounding import Backend
from .greedy import GreedyColorer
from .reduction import ColoringResult, MatchingColorer, ReductionConfig, default_color_backend

# path prefixes that keep the side bits and the per-level passes on separate streams
_BITS, _LEVEL = 1, 2


def split_levels(delta: int, epsilon: float, threshold: float) -> int:
    """Levels until the residual degree bound ``delta ((1+eps)/2)^l`` is <= threshold."""
    t = 0
    bound = float(delta)
    shrink = (1 + epsilon) / 2
    while bound > threshold and shrink < 1 and t < 64:
        bound *= shrink
        t += 1
    return t


def level_degree(delta: int, epsilon: float, level: int) -> int:
    """High-probability degree bound of the level-``level`` bipartite subgraph (1-based)."""
    return max(1, math.ceil(delta * ((1 + epsilon) / 2) ** level))


@dataclass
class BipartitionAssignment:
    levels: int
    sides: np.ndarray            # (n, levels) labels in {1, 2}

    def level_of(self, u: int, v: int) -> int:
        """First level (1-based) separating ``u`` and ``v``; 0 if none does."""
        diff = np.nonzero(self.sides[u] != self.sides[v])[0]
        return int(diff[0]) + 1 if len(diff) else 0


def draw_sides(n: int, levels: int, seed: int, first_level: Optional[tuple[int, ...]] = None) -> BipartitionAssignment:
    """Per-vertex side labels, one uniform bit per level drawn at arrival.

    ``first_level`` pins level 1 to a known bipartition (e.g. the instance's
    side labels).
    """
    key = run_key(seed, _BITS)
    sides = np.ones((n, levels), dtype=np.int8)
    for lvl in range(levels):
        # position v of the level's block is vertex v's draw, so a vertex's
        # bits never depend on later arrivals
        sides[:, lvl] = 1 + (level_uniforms(key, lvl, n) < 0.5)
    if first_level is not None and levels:
        sides[:, 0] = [s if s in (1, 2) else sides[v, 0] for v, s in enumerate(first_level)]
    return BipartitionAssignment(levels, sides)


def bipartition_split(inst: GraphInstance, seed: int, levels: Optional[int] = None,
                      cfg: Optional[ReductionConfig] = None, use_input_sides: bool = False):
    """Route every edge to its recursion level.

    Returns ``(assignment, streams)`` where ``streams[l]`` for ``l = 1..levels``
    lists ``(v, [u, ...])`` arrivals of the level-``l`` bipartite subgraph
    and ``streams[0]`` the never-separated residual.
    """
    if levels is None:
        cfg = cfg or ReductionConfig.build(inst.n, inst.delta)
        levels = split_levels(inst.delta, cfg.epsilon, cfg.split_threshold)
    first = inst.sides if use_input_sides else None
    asg = draw_sides(inst.n, levels, seed, first)
    streams: list[list[tuple[int, list[int]]]] = [[] for _ in range(levels + 1)]
    for ev in inst.arrivals:
        per = [[] for _ in range(levels + 1)]
        for u, _ in ev.edges:
            per[asg.level_of(u, ev.vertex)].append(u)
        for lvl in range(levels + 1):
            streams[lvl].append((ev.vertex, per[lvl]))
    return asg, streams


def color_general(inst: GraphInstance, cfg: Optional[ReductionConfig] = None,
                  backend: Optional[Backend] = None, seed: int = 0,
                  use_input_sides: bool = True) -> ColoringResult:
    """Online coloring of a general graph.

    Level ``l`` edges are colored by a :class:`MatchingColorer` configured for
    degree ``ceil(Delta ((1+eps)/2)^l)`` on its own contiguous color range;
    whatever the passes leave uncolored, together with the residual, goes to
    a single greedy colorer placed after all level ranges.
    """
    if cfg is None:
        cfg = ReductionConfig.build(inst.n, inst.delta)
    backend = backend or default_color_backend()
    eps = cfg.epsilon
    levels = split_levels(inst.delta, eps, cfg.split_threshold)
    pinned = use_input_sides and inst.sides is not None and all(s in (1, 2) for s in inst.sides)
    asg = draw_sides(inst.n, levels, seed, inst.sides if pinned else None)
    colorers = []
    offset = 0
    level_info = []
    for lvl in range(1, levels + 1):
        d_l = level_degree(inst.delta, eps, lvl)
        lcfg = cfg.for_delta(d_l)
        colorers.append(MatchingColorer(inst.n, lcfg, backend, seed, (_LEVEL, lvl), offset))
        level_info.append({"level": lvl, "degree_bound": d_l, "color_offset": offset,
                           "colors_reserved": lcfg.reserved_colors,
                           "level_budget": math.ceil(cfg.alpha * inst.delta * ((1 + eps) / 2) ** lvl),
                           "config": lcfg.as_dict()})
        offset += lcfg.reserved_colors
    greedy = GreedyColorer(inst.n, offset=offset)
    out = Coloring()
    edges_per_level = [0] * (levels + 1)
    for ev in inst.arrivals:
        v = ev.vertex
        per = [[] for _ in range(levels + 1)]
        for u, _ in ev.edges:
            per[asg.level_of(u, v)].append(u)
        leftover = list(per[0])
        edges_per_level[0] += len(per[0])
        for lvl in range(1, levels + 1):
            edges_per_level[lvl] += len(per[lvl])
            colored, left = colorers[lvl - 1].step(v, per[lvl])
            out.assignment.update(colored)
            leftover.extend(left)
        for u in sorted(leftover):
            out.assignment[(u, v)] = greedy.color(u, v)
    per_phase = []
    deficiency = 0.0
    for info, mc in zip(level_info, colorers):
        phases = [dict(p.as_dict(), level=info["level"]) for p in mc.finish()]
        info["edges"] = edges_per_level[info["level"]]
        per_phase.extend(phases)
        deficiency += mc.deficiency
    level_info.append({"level": "residual", "edges": edges_per_level[0], "greedy_offset": offset,
                       "greedy_colors": greedy.high_water})
    return ColoringResult(out, inst.delta, per_phase, deficiency, offset + greedy.high_water,
                          levels=level_info, config=cfg.as_dict())
