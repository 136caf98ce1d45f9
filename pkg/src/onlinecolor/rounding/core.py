"""Single-trajectory online rounding of a fractional matching.

One call to :func:`process_arrival` executes one arrival of the two-branch
rounding rule.  The acceptance probabilities for an arrival are collected in
a :class:`PickSchedule`; the second-pick probabilities ``p`` are filled in by
one of the backends (:mod:`.exact` or :mod:`.ensemble`) before the arrival is
processed.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from ..graph import ArrivalEvent, FRACTIONAL_TOL
from ..rng import ACCEPT1, ACCEPT2, PICK1, PICK2
from .constants import ConstantC

LOW, HIGH = "low_degree", "high_degree"


class RoundingError(ValueError):
    """Raised when an arrival's pick probabilities do not form a distribution."""


@dataclass
class PickSchedule:
    """Per-edge probabilities for the arrival of ``vertex``.

    ``pick`` holds the categorical pick probabilities of the (first) pick and
    ``accept`` the matching acceptance probability after that pick: the
    low-branch acceptance ``(1/2-c)/g`` or the high-branch ``q = min(1,
    (1/2+c)/g)``.  ``p`` is the second-pick acceptance (zero in the low
    branch).  ``q1`` and ``J`` are the first-pick match mass and
    ``Pr[u free and v rejected after the first pick]`` used to derive ``p``.
    """
    vertex: int
    branch: str
    neighbors: np.ndarray
    x: np.ndarray
    g: np.ndarray
    pick: np.ndarray
    accept: np.ndarray
    p: np.ndarray
    q1: np.ndarray
    J: np.ndarray
    deficiency: np.ndarray
    target: np.ndarray
    nil_mass: float = 0.0

    @property
    def degree(self) -> int:
        return len(self.neighbors)

    def edges(self) -> list[tuple[int, int]]:
        return [(int(u), self.vertex) for u in self.neighbors]


def plan_arrival(consumed: np.ndarray, event: ArrivalEvent, consts: ConstantC) -> PickSchedule:
    """Everything about an arrival that follows in closed form (all but ``p``)."""
    hp, hm = consts.half_plus_c, consts.half_minus_c
    d = len(event.edges)
    nbrs = np.fromiter((u for u, _ in event.edges), dtype=np.int64, count=d)
    x = np.fromiter((xv for _, xv in event.edges), dtype=float, count=d)
    g = 1.0 - consumed[nbrs] if d else np.zeros(0)
    mass = float(np.sum(x)) if d else 0.0
    zeros = np.zeros(d)
    if mass <= consts.low_degree_threshold:
        branch = LOW
        pick = x * (hp / hm)
        accept = np.minimum(1.0, hm / g) if d else zeros
    else:
        branch = HIGH
        pick = x.copy()
        accept = np.minimum(1.0, hp / g)
    total = float(np.sum(pick)) if d else 0.0
    if total > 1 + FRACTIONAL_TOL:
        raise RoundingError(f"pick mass {total:.12g} > 1 at vertex {event.vertex}")
    return PickSchedule(
        vertex=event.vertex, branch=branch, neighbors=nbrs, x=x, g=g, pick=pick, accept=accept,
        p=zeros.copy(), q1=zeros.copy(), J=zeros.copy(), deficiency=zeros.copy(),
        target=hp * x, nil_mass=max(0.0, 1.0 - total),
    )


def second_pick_probability(target: float, q1: float, x: float, J: float, floor: float = 0.0):
    """Solve ``q1 + x * J * p = target`` for ``p``, clamped to [0, 1].

    Returns ``(p, deficiency)``; the deficiency is the marginal shortfall
    left after clamping ``p`` at 1 (zero otherwise).
    """
    need = target - q1
    if x <= 0 or need <= 0:
        return 0.0, 0.0
    if J <= floor:
        return 1.0, need - x * J
    p = need / (x * J)
    if p > 1.0:
        short = need - x * J
        return 1.0, short if p - 1.0 > FRACTIONAL_TOL else 0.0
    return p, 0.0


def categorical(cum: np.ndarray, r):
    """Index of the interval ``[cum[i-1], cum[i])`` holding ``r``; ``len(cum)`` for nil."""
    return np.searchsorted(cum, r, side="right")


@dataclass
class ArrivalTranscript:
    vertex: int
    branch: str
    first_pick: Optional[int]
    nil_mass: float
    rejected: bool
    second_pick: Optional[int]
    matched_to: Optional[int]


@dataclass
class RoundingState:
    """Matched flags and closed-form free probabilities of one trajectory."""
    n: int
    matched: np.ndarray = field(init=False)
    mate: np.ndarray = field(init=False)
    match_time: np.ndarray = field(init=False)
    match_low: np.ndarray = field(init=False)
    consumed: np.ndarray = field(init=False)
    frac_degree: np.ndarray = field(init=False)
    matching: set = field(init=False)
    arrived: int = 0

    def __post_init__(self):
        self.matched = np.zeros(self.n, dtype=bool)
        self.mate = np.full(self.n, -1, dtype=np.int64)
        self.match_time = np.full(self.n, -1, dtype=np.int64)
        self.match_low = np.zeros(self.n, dtype=bool)
        self.consumed = np.zeros(self.n)
        self.frac_degree = np.zeros(self.n)
        self.matching = set()


def g_value(state: RoundingState, u: int) -> float:
    """Closed-form probability that ``u`` is still free at the current arrival."""
    return 1.0 - float(state.consumed[u])


def advance_closed_form(consumed: np.ndarray, frac_degree: np.ndarray, sched: PickSchedule,
                        consts: ConstantC) -> None:
    """Add ``(1/2+c) x`` to both endpoints of every revealed edge."""
    if sched.degree == 0:
        return
    inc = consts.half_plus_c * sched.x
    np.add.at(consumed, sched.neighbors, inc)
    np.add.at(frac_degree, sched.neighbors, sched.x)
    consumed[sched.vertex] += float(np.sum(inc))
    frac_degree[sched.vertex] += float(np.sum(sched.x))


def process_arrival(state: RoundingState, sched: PickSchedule, draws: np.ndarray,
                    consts: ConstantC) -> ArrivalTranscript:
    """Run one arrival on ``state`` with the four stage uniforms in ``draws``.

    ``sched`` must already carry the second-pick probabilities.  The state's
    closed-form sums are advanced whatever the random outcome.
    """
    v = sched.vertex
    d = sched.degree
    first = second = matched_to = None
    rejected = True
    low_thr = consts.low_degree_threshold
    if d:
        cum = np.cumsum(sched.pick)
        i = int(categorical(cum, draws[PICK1]))
        if i < d:
            first = int(sched.neighbors[i])
            if not state.matched[first] and draws[ACCEPT1] < sched.accept[i]:
                matched_to = first
        rejected = matched_to is None
        if rejected and sched.branch == HIGH:
            cum2 = np.cumsum(sched.x)
            j = int(categorical(cum2, draws[PICK2]))
            if j < d:
                second = int(sched.neighbors[j])
                if not state.matched[second] and draws[ACCEPT2] < sched.p[j]:
                    matched_to = second
    if matched_to is not None:
        u = matched_to
        state.matched[[u, v]] = True
        state.mate[u], state.mate[v] = v, u
        state.match_time[[u, v]] = v
        state.match_low[v] = True
        state.match_low[u] = state.frac_degree[u] <= low_thr
        state.matching.add((u, v))
    advance_closed_form(state.consumed, state.frac_degree, sched, consts)
    state.arrived = v + 1
    return ArrivalTranscript(v, sched.branch, first, sched.nil_mass, rejected, second, matched_to)
