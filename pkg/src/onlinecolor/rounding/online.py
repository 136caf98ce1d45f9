"""Driver that streams an instance through a rounding backend."""
from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from ..graph import ArrivalEvent, GraphInstance, validate_instance, InstanceError
from ..rng import arrival_uniforms, run_key
from .constants import ConstantC, default_constants
from .core import ArrivalTranscript, PickSchedule, RoundingState, process_arrival
from .ensemble import DEFAULT_REPLICAS, EnsembleState
from .exact import DEFAULT_EXACT_CAP, ExactRounder


@dataclass(frozen=True)
class Backend:
    kind: str = "ensemble"
    replicas: int = DEFAULT_REPLICAS
    exact_cap: int = DEFAULT_EXACT_CAP

    def __post_init__(self):
        if self.kind not in ("exact", "ensemble"):
            raise ValueError(f"unknown backend {self.kind!r}")
        if self.replicas < 1:
            raise ValueError("replicas must be >= 1")

    @classmethod
    def exact(cls, cap: int = DEFAULT_EXACT_CAP) -> "Backend":
        return cls("exact", 1, cap)

    @classmethod
    def ensemble(cls, replicas: int = DEFAULT_REPLICAS) -> "Backend":
        return cls("ensemble", replicas)

    def describe(self) -> str:
        return "exact" if self.kind == "exact" else f"ensemble({self.replicas})"


class OnlineRounder:
    """Incremental rounding of one arrival stream; ``step`` per arrival.

    ``step`` returns the primary trajectory's transcript.  With the exact
    backend ``marginals`` holds exact per-edge probabilities; with the
    ensemble it holds replica frequencies.
    """

    def __init__(self, n: int, backend: Backend, key: tuple[int, int],
                 consts: Optional[ConstantC] = None, track: bool = True):
        self.consts = consts or default_constants()
        self.backend = backend
        self.key = key
        self.schedules: list[PickSchedule] = []
        self.marginals: dict[tuple[int, int], float] = {}
        if backend.kind == "exact":
            self._exact = ExactRounder(n, self.consts, backend.exact_cap)
            self._state = RoundingState(n)
            self._ens = None
        else:
            self._exact = None
            self._ens = EnsembleState(n, backend.replicas, key, self.consts, track=track)

    @property
    def matching(self) -> set[tuple[int, int]]:
        return self._state.matching if self._exact is not None else self._ens.primary

    @property
    def ensemble(self) -> Optional[EnsembleState]:
        return self._ens

    @property
    def exact_state(self):
        return self._exact

    def step(self, event: ArrivalEvent) -> Optional[ArrivalTranscript]:
        if self._exact is not None:
            sched, marg = self._exact.schedule(event)
            draws = arrival_uniforms(self.key, event.vertex, 1)[0]
            tr = process_arrival(self._state, sched, draws, self.consts)
        else:
            sched = self._ens.step(event)
            marg = self._ens.frequencies(sched)
            tr = self._ens.last_transcript
        for (u, v), m in zip(sched.edges(), marg):
            self.marginals[(u, v)] = float(m)
        self.schedules.append(sched)
        return tr


@dataclass
class RoundingResult:
    matching: frozenset
    schedules: list[PickSchedule]
    marginals: dict[tuple[int, int], float]
    transcripts: list[ArrivalTranscript]
    backend: Backend
    consts: ConstantC
    extra: dict = field(default_factory=dict)

    @property
    def total_deficiency(self) -> float:
        return float(sum(float(np.sum(s.deficiency)) for s in self.schedules))

    def edge_rows(self) -> list[dict]:
        rows = []
        for s in self.schedules:
            for i, (u, v) in enumerate(s.edges()):
                rows.append({
                    "u": u, "v": v, "x": float(s.x[i]), "branch": s.branch,
                    "q1": float(s.q1[i]), "J": float(s.J[i]), "p": float(s.p[i]),
                    "deficiency": float(s.deficiency[i]), "target": float(s.target[i]),
                    "marginal": self.marginals.get((u, v), 0.0),
                })
        return rows

    def edge_csv(self) -> str:
        buf = io.StringIO()
        cols = ["u", "v", "x", "branch", "q1", "J", "p", "deficiency", "target", "marginal"]
        w = csv.DictWriter(buf, fieldnames=cols, lineterminator="\n")
        w.writeheader()
        for r in self.edge_rows():
            w.writerow({k: (repr(v) if isinstance(v, float) else v) for k, v in r.items()})
        return buf.getvalue()


def round_online(inst: GraphInstance, backend: Backend = Backend(), seed: int = 0,
                 consts: Optional[ConstantC] = None, check: bool = True) -> RoundingResult:
    """Round the instance's fractional matching online.

    Returns the primary trajectory's matching (the sampled trajectory for the
    exact backend, replica 0 for the ensemble) and per-edge diagnostics.
    """
    if check:
        bad = validate_instance(inst)
        if bad:
            raise InstanceError("; ".join(map(str, bad[:5])))
    rounder = OnlineRounder(inst.n, backend, run_key(seed), consts, track=False)
    transcripts = [rounder.step(ev) for ev in inst.arrivals]
    return RoundingResult(frozenset(rounder.matching), rounder.schedules, rounder.marginals,
                          transcripts, backend, rounder.consts)
