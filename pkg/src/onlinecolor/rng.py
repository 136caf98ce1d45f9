"""Counter-based random streams.

Every uniform used by the rounding code is addressed by
``(run key, arrival, stage, replica)``: the run key comes from hashing the
user seed with a path of integers (pass / trial / level identifiers), and the
Philox counter encodes arrival and stage.  Replica ``r`` always reads the
``r``-th output of its block, so its draws never depend on how many replicas
run next to it or on execution order.
"""
from __future__ import annotations

import numpy as np

# stage slots inside one arrival block
PICK1, ACCEPT1, PICK2, ACCEPT2 = range(4)
STAGES = 4

_MASK64 = (1 << 64) - 1


def run_key(seed: int, *path: int) -> tuple[int, int]:
    """Two 64-bit Philox key words for ``(seed, *path)``."""
    ss = np.random.SeedSequence(entropy=int(seed) & _MASK64, spawn_key=tuple(int(p) for p in path))
    k0, k1 = ss.generate_state(2, dtype=np.uint64)
    return int(k0), int(k1)


def block(key: tuple[int, int], counter_hi: int, counter_mid: int, count: int) -> np.ndarray:
    """``count`` uniforms in [0, 1) from the Philox block at the given counter."""
    counter = [0, 0, int(counter_mid) & _MASK64, int(counter_hi) & _MASK64]
    bitgen = np.random.Philox(key=np.array(key, dtype=np.uint64), counter=np.array(counter, dtype=np.uint64))
    return np.random.Generator(bitgen).random(count)


def arrival_uniforms(key: tuple[int, int], arrival: int, replicas: int) -> np.ndarray:
    """``(replicas, 4)`` array: one row of stage draws per replica."""
    return block(key, arrival, 0, replicas * STAGES).reshape(replicas, STAGES)


def level_uniforms(key: tuple[int, int], level: int, n: int) -> np.ndarray:
    """One draw per vertex for a recursion level; entry ``v`` belongs to vertex ``v``."""
    return block(key, level, 1, n)
