"""Replica-ensemble backend.

``K`` trajectories of the rounding rule advance in lockstep over one arrival
stream.  In each high-degree arrival every replica first makes its first pick;
the fraction of replicas in which neighbour ``u`` is free and the arriving
vertex is still unmatched estimates ``J``, which fixes a shared second-pick
probability ``p``; then every replica makes its second pick with that ``p``.

The same class replays a frozen list of schedules (``p`` given), which is
how diagnostics run independent trials of a fixed algorithm.
"""
from __future__ import annotations

from typing import Optional, Sequence

import numpy as np

from ..graph import ArrivalEvent
from ..rng import ACCEPT1, ACCEPT2, PICK1, PICK2, arrival_uniforms
from .constants import ConstantC
from .core import HIGH, ArrivalTranscript, PickSchedule, advance_closed_form, categorical, plan_arrival, second_pick_probability

DEFAULT_REPLICAS = 100_000


def j_floor(replicas: int) -> float:
    """Estimated ``J`` below which ``p`` is forced to 1 and a deficiency logged."""
    return max(1e-6, 10.0 / replicas)


class EnsembleState:
    """``K`` replicas sharing one stream and one schedule per arrival.

    Replica 0 is the primary run whose matching is reported as the output.
    """

    def __init__(self, n: int, replicas: int, key: tuple[int, int], consts: ConstantC,
                 frozen: Optional[Sequence[PickSchedule]] = None, track: bool = True):
        self.n = n
        self.K = replicas
        self.key = key
        self.consts = consts
        self.frozen = frozen
        self.track = track
        self.matched = np.zeros((replicas, n), dtype=bool)
        self.consumed = np.zeros(n)
        self.frac_degree = np.zeros(n)
        if track:
            self.match_time = np.full((replicas, n), -1, dtype=np.int32)
            self.match_low = np.zeros((replicas, n), dtype=bool)
        self.edge_hits: dict[tuple[int, int], int] = {}
        self.primary: set[tuple[int, int]] = set()
        self.primary_index = 0
        self.last_transcript: Optional[ArrivalTranscript] = None

    def _first_stage(self, sched: PickSchedule, draws: np.ndarray):
        d = sched.degree
        idx = categorical(np.cumsum(sched.pick), draws[:, PICK1])
        picked = idx < d
        safe = np.where(picked, idx, 0)
        u = sched.neighbors[safe]
        free = ~self.matched[np.arange(self.K), u]
        hit = picked & free & (draws[:, ACCEPT1] < sched.accept[safe])
        return safe, hit

    def step(self, event: ArrivalEvent) -> PickSchedule:
        """Advance every replica through ``event``; returns the arrival's schedule."""
        consts = self.consts
        if self.frozen is not None:
            sched = self.frozen[event.vertex]
        else:
            sched = plan_arrival(self.consumed, event, consts)
        v = event.vertex
        d = sched.degree
        if d == 0:
            advance_closed_form(self.consumed, self.frac_degree, sched, consts)
            self.last_transcript = ArrivalTranscript(v, sched.branch, None, sched.nil_mass, True, None, None)
            return sched
        draws = arrival_uniforms(self.key, v, self.K)
        idx1, hit1 = self._first_stage(sched, draws)
        matched_idx = np.where(hit1, idx1, -1)
        r0 = self.primary_index
        first = int(sched.neighbors[idx1[r0]]) if np.cumsum(sched.pick)[-1] > draws[r0, PICK1] else None
        second = None
        if sched.branch == HIGH:
            rejected = ~hit1
            free_before = ~self.matched[:, sched.neighbors]            # (K, d)
            J_hat = (free_before & rejected[:, None]).mean(axis=0)
            if self.frozen is None:
                floor = j_floor(self.K)
                q1 = sched.x * np.minimum(sched.g, consts.half_plus_c)
                for i in range(d):
                    sched.p[i], sched.deficiency[i] = second_pick_probability(
                        float(sched.target[i]), float(q1[i]), float(sched.x[i]), float(J_hat[i]), floor)
                sched.q1[:] = q1
                sched.J[:] = J_hat
            idx2 = categorical(np.cumsum(sched.x), draws[:, PICK2])
            picked2 = rejected & (idx2 < d)
            safe2 = np.where(picked2, idx2, 0)
            free2 = free_before[np.arange(self.K), safe2]
            hit2 = picked2 & free2 & (draws[:, ACCEPT2] < sched.p[safe2])
            matched_idx = np.where(hit2, safe2, matched_idx)
            if picked2[r0]:
                second = int(sched.neighbors[safe2[r0]])
        m0 = matched_idx[r0]
        self.last_transcript = ArrivalTranscript(
            v, sched.branch, first, sched.nil_mass, not bool(hit1[r0]), second,
            int(sched.neighbors[m0]) if m0 >= 0 else None)
        self._apply(sched, matched_idx)
        advance_closed_form(self.consumed, self.frac_degree, sched, consts)
        return sched

    def _apply(self, sched: PickSchedule, matched_idx: np.ndarray) -> None:
        v = sched.vertex
        rows = np.nonzero(matched_idx >= 0)[0]
        if len(rows) == 0:
            return
        cols = matched_idx[rows]
        us = sched.neighbors[cols]
        self.matched[rows, us] = True
        self.matched[rows, v] = True
        if self.track:
            self.match_time[rows, us] = v
            self.match_time[rows, v] = v
            self.match_low[rows, v] = True
            self.match_low[rows, us] = self.frac_degree[us] <= self.consts.low_degree_threshold
        counts = np.bincount(cols, minlength=sched.degree)
        for i in np.nonzero(counts)[0]:
            self.edge_hits[(int(sched.neighbors[i]), v)] = int(counts[i])
        if matched_idx[self.primary_index] >= 0:
            self.primary.add((int(sched.neighbors[matched_idx[self.primary_index]]), v))

    def frequencies(self, sched: PickSchedule) -> np.ndarray:
        """Fraction of replicas matching each edge of an already-processed arrival."""
        return np.array([self.edge_hits.get((int(u), sched.vertex), 0) for u in sched.neighbors]) / self.K


def schedule_p_ensemble(ens: EnsembleState, event: ArrivalEvent) -> PickSchedule:
    """Estimate ``p`` for ``event`` from the replicas and advance them."""
    return ens.step(event)
