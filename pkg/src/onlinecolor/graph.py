"""Graph instances revealed under vertex arrivals.

Vertices are identified with their arrival rank: vertex ``u < v`` arrived
before ``v``.  Each :class:`ArrivalEvent` carries the edges from the arriving
vertex to previously-arrived neighbours, together with the fractional value
``x`` of each edge.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Iterable, Iterator, Optional, Sequence

import numpy as np

# tolerance on the fractional matching constraint when reading instances
FRACTIONAL_TOL = 1e-9

ARRIVAL_ORDERS = ("interleaved", "one_sided", "random")
GENERAL_MODELS = ("erdos_renyi", "union_of_matchings")

Edge = tuple[int, int]


class InstanceError(ValueError):
    """Raised for malformed instance files or generator arguments."""


@dataclass(frozen=True)
class ArrivalEvent:
    vertex: int
    edges: tuple[tuple[int, float], ...] = ()

    @property
    def neighbors(self) -> tuple[int, ...]:
        return tuple(u for u, _ in self.edges)

    @property
    def mass(self) -> float:
        """Fractional degree of the arriving vertex, sum of revealed x values."""
        return math.fsum(x for _, x in self.edges)

    def with_x(self, x: float) -> "ArrivalEvent":
        return ArrivalEvent(self.vertex, tuple((u, x) for u, _ in self.edges))


@dataclass(frozen=True)
class GraphInstance:
    n: int
    delta: int
    arrivals: tuple[ArrivalEvent, ...]
    sides: Optional[tuple[int, ...]] = None

    def edges(self) -> Iterator[tuple[int, int, float]]:
        """Yield ``(u, v, x)`` with ``u < v`` in arrival order."""
        for ev in self.arrivals:
            for u, x in ev.edges:
                yield u, ev.vertex, x

    def edge_list(self) -> list[Edge]:
        return [(u, v) for u, v, _ in self.edges()]

    @property
    def num_edges(self) -> int:
        return sum(len(ev.edges) for ev in self.arrivals)

    def degrees(self) -> np.ndarray:
        deg = np.zeros(self.n, dtype=np.int64)
        for u, v, _ in self.edges():
            deg[u] += 1
            deg[v] += 1
        return deg

    def max_degree(self) -> int:
        return int(self.degrees().max()) if self.n else 0

    def prefix(self, k: int) -> "GraphInstance":
        """The stream truncated after the first ``k`` arrivals (n, delta kept)."""
        return GraphInstance(self.n, self.delta, self.arrivals[:k], self.sides)

    def neighbor_lists(self) -> list[list[int]]:
        adj: list[list[int]] = [[] for _ in range(self.n)]
        for u, v, _ in self.edges():
            adj[u].append(v)
            adj[v].append(u)
        return adj


@dataclass
class Coloring:
    assignment: dict[Edge, int] = field(default_factory=dict)

    @property
    def palette_size(self) -> int:
        return len(set(self.assignment.values()))

    def __len__(self) -> int:
        return len(self.assignment)


@dataclass(frozen=True)
class Violation:
    kind: str
    where: str
    detail: str

    def __str__(self) -> str:
        return f"{self.kind} at {self.where}: {self.detail}"


def make_instance(n: int, delta: int, adjacency: dict[int, Sequence[tuple[int, float]]],
                  sides: Optional[Sequence[int]] = None) -> GraphInstance:
    """Build an instance from ``{v: [(u, x), ...]}`` with every ``u < v``."""
    arrivals = tuple(
        ArrivalEvent(v, tuple(sorted((int(u), float(x)) for u, x in adjacency.get(v, ()))))
        for v in range(n)
    )
    return GraphInstance(n, delta, arrivals, tuple(sides) if sides is not None else None)


def from_edges(n: int, edges: Iterable[tuple[int, int]], delta: Optional[int] = None,
               x: Optional[float] = None, sides: Optional[Sequence[int]] = None) -> GraphInstance:
    """Instance from an undirected edge list over arrival-ranked vertices.

    ``x`` defaults to ``1/delta``; ``delta`` defaults to the max degree.
    """
    pairs = sorted({(min(a, b), max(a, b)) for a, b in edges})
    deg = [0] * n
    for u, v in pairs:
        deg[u] += 1
        deg[v] += 1
    if delta is None:
        delta = max(deg, default=0)
    if x is None:
        x = 1.0 / delta if delta > 0 else 0.0
    adj: dict[int, list[tuple[int, float]]] = {}
    for u, v in pairs:
        adj.setdefault(v, []).append((u, x))
    return make_instance(n, delta, adj, sides)


def validate_instance(inst: GraphInstance) -> list[Violation]:
    """Return every violated instance invariant (empty when valid)."""
    out: list[Violation] = []
    if len(inst.arrivals) > inst.n:
        out.append(Violation("arrival-count", "stream", f"{len(inst.arrivals)} arrivals for n={inst.n}"))
    if inst.sides is not None and len(inst.sides) != inst.n:
        out.append(Violation("sides", "header", f"{len(inst.sides)} labels for n={inst.n}"))
    deg = [0] * inst.n
    frac = [0.0] * inst.n
    for rank, ev in enumerate(inst.arrivals):
        v = ev.vertex
        if v != rank:
            out.append(Violation("arrival-order", f"vertex {v}", f"arrives at rank {rank}"))
            continue
        seen = set()
        for u, x in ev.edges:
            if not 0 <= u < v:
                out.append(Violation("arrival-order", f"edge ({u},{v})",
                                     "neighbor must precede the arriving vertex"))
                continue
            if u in seen:
                out.append(Violation("duplicate-edge", f"edge ({u},{v})", "listed twice"))
                continue
            seen.add(u)
            if not (x >= 0 and math.isfinite(x)):
                out.append(Violation("negative-x", f"edge ({u},{v})", f"x={x}"))
            deg[u] += 1
            deg[v] += 1
            frac[u] += x
            frac[v] += x
            if inst.sides is not None and len(inst.sides) == inst.n:
                su, sv = inst.sides[u], inst.sides[v]
                if su and sv and su == sv:
                    out.append(Violation("bipartite", f"edge ({u},{v})", f"both endpoints on side {su}"))
    for w in range(inst.n):
        if deg[w] > inst.delta:
            out.append(Violation("degree", f"vertex {w}", f"degree {deg[w]} > delta {inst.delta}"))
        if frac[w] > 1 + FRACTIONAL_TOL:
            out.append(Violation("fractional", f"vertex {w}", f"sum of x = {frac[w]:.12g} > 1"))
    return out


def is_bipartite(inst: GraphInstance) -> bool:
    return two_coloring(inst) is not None


def two_coloring(inst: GraphInstance) -> Optional[tuple[int, ...]]:
    """Side labels in {1, 2} from a BFS 2-colouring, or None for odd cycles."""
    adj = inst.neighbor_lists()
    side = [0] * inst.n
    for s in range(inst.n):
        if side[s]:
            continue
        side[s] = 1
        stack = [s]
        while stack:
            a = stack.pop()
            for b in adj[a]:
                if not side[b]:
                    side[b] = 3 - side[a]
                    stack.append(b)
                elif side[b] == side[a]:
                    return None
    return tuple(side)


def uniform_fractional(inst: GraphInstance) -> GraphInstance:
    """Replace every edge value by ``1/delta``."""
    x = 1.0 / inst.delta if inst.delta > 0 else 0.0
    return GraphInstance(inst.n, inst.delta, tuple(ev.with_x(x) for ev in inst.arrivals), inst.sides)


# ---------------------------------------------------------------- generators

def _regular_bipartite_edges(m: int, d: int, rng: np.random.Generator) -> set[tuple[int, int]]:
    # circulant start, then degree-preserving double-edge swaps
    edges = {(i, (i + k) % m) for i in range(m) for k in range(d)}
    if 0 < d < m:
        el = sorted(edges)
        for _ in range(10 * len(el)):
            i, j = rng.integers(len(el), size=2)
            (a, b), (c, e) = el[i], el[j]
            if a == c or b == e or (a, e) in edges or (c, b) in edges:
                continue
            edges -= {(a, b), (c, e)}
            edges |= {(a, e), (c, b)}
            el[i], el[j] = (a, e), (c, b)
    return edges


def gen_regular_bipartite(n_per_side: int, delta: int, seed: int,
                          arrival_order: str = "interleaved") -> GraphInstance:
    """Random ``delta``-regular bipartite instance with ``x = 1/delta``.

    Left vertex ``i`` and right vertex ``j`` are placed in the arrival stream
    according to ``arrival_order``: ``interleaved`` alternates L0, R0, L1, ...;
    ``one_sided`` reveals the left side (edgeless) before the right side;
    ``random`` uses a seeded permutation.
    """
    if delta > n_per_side:
        raise InstanceError(f"delta={delta} exceeds n_per_side={n_per_side}")
    if delta < 0 or n_per_side < 0:
        raise InstanceError("sizes must be non-negative")
    if arrival_order not in ARRIVAL_ORDERS:
        raise InstanceError(f"unknown arrival order {arrival_order!r}")
    rng = np.random.default_rng(seed)
    m = n_per_side
    edges = _regular_bipartite_edges(m, delta, rng)
    left_perm = rng.permutation(m)
    right_perm = rng.permutation(m)
    seq = [(0, i) for i in range(m)] + [(1, j) for j in range(m)]
    if arrival_order == "interleaved":
        seq = [s for i in range(m) for s in ((0, i), (1, i))]
    elif arrival_order == "random":
        seq = [seq[k] for k in rng.permutation(2 * m)]
    rank = {s: r for r, s in enumerate(seq)}
    sides = [0] * (2 * m)
    for (part, _), r in rank.items():
        sides[r] = part + 1
    pairs = [(rank[(0, int(left_perm[a]))], rank[(1, int(right_perm[b]))]) for a, b in edges]
    return from_edges(2 * m, pairs, delta=delta, sides=sides)


def _round_robin_rounds(n: int) -> list[list[tuple[int, int]]]:
    # 1-factorisation of K_n (K_{n+1} with a dummy vertex when n is odd)
    m = n if n % 2 == 0 else n + 1
    rounds = []
    for r in range(m - 1):
        pairs = [(m - 1, r)] + [((r + k) % (m - 1), (r - k) % (m - 1)) for k in range(1, m // 2)]
        rounds.append([(a, b) for a, b in pairs if a < n and b < n])
    return rounds


def gen_general(n: int, delta: int, model: str = "union_of_matchings", seed: int = 0) -> GraphInstance:
    """General (not necessarily bipartite) instance of max degree ``<= delta``.

    ``union_of_matchings`` overlays ``delta`` distinct perfect matchings of a
    round-robin 1-factorisation under a random relabelling (exactly regular
    for even ``n``).  ``erdos_renyi`` samples G(n, delta/(n-1)) and drops edges
    that would push an endpoint past ``delta``.
    """
    if n < 1:
        raise InstanceError("n must be >= 1")
    if model not in GENERAL_MODELS:
        raise InstanceError(f"unknown model {model!r}")
    rng = np.random.default_rng(seed)
    delta = max(0, delta)
    label = rng.permutation(n)
    pairs: list[tuple[int, int]] = []
    if model == "union_of_matchings":
        rounds = _round_robin_rounds(n)
        if delta > len(rounds):
            raise InstanceError(f"delta={delta} exceeds n-1={len(rounds)}")
        for r in sorted(rng.choice(len(rounds), size=delta, replace=False)):
            pairs.extend((int(label[a]), int(label[b])) for a, b in rounds[r])
    else:
        p = min(1.0, delta / (n - 1)) if n > 1 else 0.0
        cand = [(a, b) for a in range(n) for b in range(a + 1, n)]
        keep = rng.random(len(cand)) < p
        order = rng.permutation(len(cand))
        deg = [0] * n
        for k in order:
            if not keep[k]:
                continue
            a, b = cand[k]
            if deg[a] < delta and deg[b] < delta:
                deg[a] += 1
                deg[b] += 1
                pairs.append((int(label[a]), int(label[b])))
    return from_edges(n, pairs, delta=delta)


# ----------------------------------------------------------------------- I/O

def dumps_instance(inst: GraphInstance) -> str:
    """Canonical JSON Lines text: a header line then one line per arrival."""
    header = {"n": inst.n, "delta": inst.delta,
              "bipartite_sides": list(inst.sides) if inst.sides is not None else None}
    lines = [json.dumps(header, separators=(",", ":"))]
    for ev in inst.arrivals:
        lines.append(json.dumps({"v": ev.vertex, "edges": [[u, x] for u, x in ev.edges]},
                                separators=(",", ":")))
    return "\n".join(lines) + "\n"


def loads_instance(text: str, uniform: bool = False) -> GraphInstance:
    """Parse JSON Lines produced by :func:`dumps_instance`.

    Edges may be written as ``[u, x]``, ``[u]`` or a bare ``u``; the last two
    forms need ``uniform=True``, which sets every x to ``1/delta``.
    """
    rows = [ln for ln in text.splitlines() if ln.strip()]
    if not rows:
        raise InstanceError("empty instance file")
    try:
        header = json.loads(rows[0])
        n, delta = int(header["n"]), int(header["delta"])
        sides = header.get("bipartite_sides")
        adj: dict[int, list[tuple[int, float]]] = {}
        order = []
        for ln in rows[1:]:
            rec = json.loads(ln)
            v = int(rec["v"])
            order.append(v)
            es = []
            for e in rec.get("edges", []):
                if isinstance(e, (int, float)):
                    e = [e]
                if len(e) == 1 or uniform:
                    if not uniform:
                        raise InstanceError(f"edge {e} of vertex {v} lacks x (use uniform)")
                    x = 1.0 / delta if delta > 0 else 0.0
                else:
                    x = float(e[1])
                es.append((int(e[0]), x))
            adj[v] = es
    except (KeyError, TypeError, ValueError) as exc:
        if isinstance(exc, InstanceError):
            raise
        raise InstanceError(f"malformed instance: {exc}") from exc
    arrivals = tuple(ArrivalEvent(v, tuple(sorted(adj[v]))) for v in order)
    return GraphInstance(n, delta, arrivals, tuple(int(s) for s in sides) if sides is not None else None)


def read_instance(path, uniform: bool = False) -> GraphInstance:
    with open(path) as fh:
        return loads_instance(fh.read(), uniform=uniform)


def write_instance(inst: GraphInstance, path) -> None:
    with open(path, "w") as fh:
        fh.write(dumps_instance(inst))
