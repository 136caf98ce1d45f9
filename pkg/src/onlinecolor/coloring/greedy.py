from __future__ import annotations

from ..graph import Coloring, GraphInstance


class GreedyColorer:
    """First-fit online edge coloring over colors ``offset, offset+1, ...``.

    Used colors are kept as per-vertex bitsets (Python ints).
    """

    def __init__(self, n: int, offset: int = 0):
        self.offset = offset
        self.used = [0] * n
        self.high_water = 0

    def color(self, u: int, v: int) -> int:
        busy = self.used[u] | self.used[v]
        free = ~busy & (busy + 1)          # lowest clear bit
        k = free.bit_length() - 1
        self.used[u] |= free
        self.used[v] |= free
        self.high_water = max(self.high_water, k + 1)
        return self.offset + k


def greedy_color(inst: GraphInstance) -> Coloring:
    """Give each revealed edge the smallest color free at both endpoints."""
    g = GreedyColorer(inst.n)
    out = Coloring()
    for ev in inst.arrivals:
        for u, _ in ev.edges:
            out.assignment[(u, ev.vertex)] = g.color(u, ev.vertex)
    return out
