from __future__ import annotations

from dataclasses import dataclass, field

from ..graph import Coloring, Edge, GraphInstance


@dataclass
class ColoringReport:
    proper: bool
    palette: int
    ratio: float
    conflicts: list[tuple[Edge, Edge, int]] = field(default_factory=list)
    missing: list[Edge] = field(default_factory=list)
    extra: list[Edge] = field(default_factory=list)

    def as_dict(self) -> dict:
        return {
            "proper": self.proper, "palette": self.palette, "ratio": self.ratio,
            "conflicts": [[list(a), list(b), c] for a, b, c in self.conflicts],
            "missing": [list(e) for e in self.missing], "extra": [list(e) for e in self.extra],
        }


def verify_coloring(inst: GraphInstance, coloring: Coloring) -> ColoringReport:
    """Check that adjacent edges get distinct colors and every edge is colored.

    ``ratio`` is palette size over the declared max degree.
    """
    edges = set(inst.edge_list())
    assigned = set(coloring.assignment)
    missing = sorted(edges - assigned)
    extra = sorted(assigned - edges)
    seen: dict[tuple[int, int], Edge] = {}
    conflicts = []
    for e in sorted(assigned & edges):
        c = coloring.assignment[e]
        for w in e:
            other = seen.get((w, c))
            if other is not None:
                conflicts.append((other, e, c))
            else:
                seen[(w, c)] = e
    palette = coloring.palette_size
    ratio = palette / inst.delta if inst.delta > 0 else float(palette)
    return ColoringReport(not conflicts and not missing and not extra, palette, ratio,
                          conflicts, missing, extra)


def is_matching(edges) -> bool:
    seen = set()
    for u, v in edges:
        if u == v or u in seen or v in seen:
            return False
        seen.update((u, v))
    return True
