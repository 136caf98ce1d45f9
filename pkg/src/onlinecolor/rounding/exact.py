"""Exact joint distribution of matched statuses for small instances.

The distribution is a sparse vector over bitmasks (bit ``u`` set iff vertex
``u`` is matched).  Advancing it through an arrival enumerates every pick and
coin outcome, which also yields the exact probability ``J`` that a neighbour
is free while the arriving vertex is rejected by its first pick; the
second-pick probability ``p`` follows from it.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..graph import ArrivalEvent
from .constants import ConstantC
from .core import HIGH, PickSchedule, advance_closed_form, plan_arrival, second_pick_probability

DEFAULT_EXACT_CAP = 14


class ExactCapError(ValueError):
    pass


@dataclass
class ExactDistribution:
    masks: np.ndarray
    probs: np.ndarray

    @classmethod
    def initial(cls) -> "ExactDistribution":
        return cls(np.zeros(1, dtype=np.int64), np.ones(1))

    def free_probability(self, u: int) -> float:
        return float(self.probs[((self.masks >> u) & 1) == 0].sum())

    def matched_probability(self, u: int) -> float:
        return 1.0 - self.free_probability(u)

    def total(self) -> float:
        return float(self.probs.sum())

    def joint_free(self, u: int, w: int) -> float:
        sel = (((self.masks >> u) & 1) == 0) & (((self.masks >> w) & 1) == 0)
        return float(self.probs[sel].sum())

    def as_dict(self) -> dict[int, float]:
        return {int(m): float(p) for m, p in zip(self.masks, self.probs)}


def schedule_p_exact(dist: ExactDistribution, sched: PickSchedule, consts: ConstantC):
    """Fill in ``sched.p`` exactly and advance ``dist`` through the arrival.

    Returns ``(new_dist, marginals)`` where ``marginals[i]`` is the exact
    probability that edge ``(neighbors[i], vertex)`` enters the matching.
    ``sched`` is updated in place (``p``, ``q1``, ``J``, ``deficiency``).
    """
    d = sched.degree
    if d == 0:
        return dist, np.zeros(0)
    masks, probs = dist.masks, dist.probs
    nb = sched.neighbors
    free = ((masks[:, None] >> nb[None, :]) & 1) == 0          # (S, d)
    pfree = probs @ free                                          # Pr[F_u]
    if sched.branch == HIGH:
        a1 = free * (sched.x * sched.accept)[None, :]
        rej = 1.0 - a1.sum(axis=1)
        J = (probs * rej) @ free
        q1 = sched.x * sched.accept * pfree
        for i in range(d):
            sched.p[i], sched.deficiency[i] = second_pick_probability(
                float(sched.target[i]), float(q1[i]), float(sched.x[i]), float(J[i]))
        sched.q1[:], sched.J[:] = q1, J
        a = a1 + free * (rej[:, None] * (sched.x * sched.p)[None, :])
    else:
        a = free * (sched.pick * sched.accept)[None, :]
        sched.q1[:] = sched.pick * sched.accept * pfree
    flow = probs[:, None] * a                                     # (S, d)
    marginals = flow.sum(axis=0)
    stay = probs * (1.0 - a.sum(axis=1))
    vbit = np.int64(1) << np.int64(sched.vertex)
    moved = masks[:, None] | (np.int64(1) << nb)[None, :] | vbit
    all_masks = np.concatenate([masks, moved.ravel()])
    all_probs = np.concatenate([stay, flow.ravel()])
    keep = all_probs > 0
    uniq, inv = np.unique(all_masks[keep], return_inverse=True)
    merged = np.bincount(inv, weights=all_probs[keep], minlength=len(uniq))
    merged /= merged.sum()
    return ExactDistribution(uniq, merged), marginals


class ExactRounder:
    """Exact backend: exact ``p`` values plus one sampled trajectory."""

    def __init__(self, n: int, consts: ConstantC, cap: int = DEFAULT_EXACT_CAP):
        if n > cap:
            raise ExactCapError(f"exact backend limited to {cap} vertices (got n={n})")
        self.n = n
        self.consts = consts
        self.dist = ExactDistribution.initial()
        self.consumed = np.zeros(n)
        self.frac_degree = np.zeros(n)

    def schedule(self, event: ArrivalEvent) -> tuple[PickSchedule, np.ndarray]:
        sched = plan_arrival(self.consumed, event, self.consts)
        self.dist, marg = schedule_p_exact(self.dist, sched, self.consts)
        advance_closed_form(self.consumed, self.frac_degree, sched, self.consts)
        return sched, marg
