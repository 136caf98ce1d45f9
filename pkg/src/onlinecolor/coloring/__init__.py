"""Online edge-coloring algorithms."""
from .general import BipartitionAssignment, bipartition_split, color_general, draw_sides, split_levels
from .greedy import GreedyColorer, greedy_color
from .reduction import (ColoringResult, MatchingColorer, PhaseStats, ReductionConfig,
                        color_via_matchings, default_color_backend)
from .verify import ColoringReport, is_matching, verify_coloring
