import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from onlinecolor.coloring import (GreedyColorer, ReductionConfig, bipartition_split, color_general,
                                  color_via_matchings, greedy_color, is_matching, split_levels, verify_coloring)
from onlinecolor.coloring.general import draw_sides, level_degree
from onlinecolor.graph import Coloring, from_edges, gen_general, gen_regular_bipartite
from onlinecolor.rounding import Backend

from conftest import bipartite_instances

SMALL = Backend.ensemble(200)


def test_greedy_on_path():
    inst = from_edges(3, [(0, 1), (1, 2)])
    rep = verify_coloring(inst, greedy_color(inst))
    assert rep.proper and rep.palette <= 3


def test_greedy_colorer_offset_and_first_fit():
    g = GreedyColorer(4, offset=10)
    assert g.color(0, 1) == 10
    assert g.color(1, 2) == 11
    assert g.color(2, 3) == 10
    assert g.high_water == 2


@given(st.integers(2, 30), st.integers(0, 10 ** 6))
def test_greedy_bound(n, seed):
    d = 1 + seed % (n - 1)
    inst = gen_general(n, d, "erdos_renyi", seed)
    rep = verify_coloring(inst, greedy_color(inst))
    assert rep.proper
    assert rep.palette <= max(2 * inst.max_degree() - 1, 0)


def test_verify_reports_conflicts_missing_and_extra():
    inst = from_edges(3, [(0, 1), (1, 2)])
    rep = verify_coloring(inst, Coloring({(0, 1): 0, (1, 2): 0}))
    assert not rep.proper and len(rep.conflicts) == 1
    rep = verify_coloring(inst, Coloring({(0, 1): 0}))
    assert rep.missing == [(1, 2)]
    rep = verify_coloring(inst, Coloring({(0, 1): 0, (1, 2): 1, (0, 2): 2}))
    assert rep.extra == [(0, 2)]
    assert rep.ratio == 3 / 2


def test_is_matching():
    assert is_matching([(0, 1), (2, 3)])
    assert not is_matching([(0, 1), (1, 2)])
    assert is_matching([])


def test_full_size_config_formulas():
    cfg = ReductionConfig.build(128, 16, "paper")
    log_n = math.log(128)
    assert cfg.L == math.ceil(12 * math.sqrt(16 * log_n)) == 106
    assert cfg.epsilon == pytest.approx((log_n / 16) ** 0.25)
    assert cfg.greedy_cutoff == pytest.approx(48 * (16 ** 3 * log_n) ** 0.25)
    assert cfg.split_threshold == pytest.approx(18 * math.sqrt(16 * log_n))
    # full-size constants leave nothing to do at this size
    assert cfg.phase_count == 0


def test_desk_config_runs_phases():
    cfg = ReductionConfig.build(128, 16, "desk")
    assert cfg.epsilon == 0.3
    assert cfg.phase_count >= 1
    ds = cfg.phase_deltas
    assert ds[0] == 16
    assert all(a > b for a, b in zip(ds, ds[1:]))
    assert all(d >= cfg.greedy_cutoff for d in ds)
    assert cfg.reserved_colors == cfg.phase_count * math.ceil(cfg.alpha * cfg.L)


def test_unknown_preset():
    with pytest.raises(ValueError):
        ReductionConfig.build(10, 3, "fast")


def test_split_levels_and_level_degree():
    assert split_levels(64, 0.3, 10) == 5          # 64 * 0.65^4 = 11.4, 64 * 0.65^5 = 7.4
    t = split_levels(64, 0.3, 10)
    assert 64 * 0.65 ** t <= 10 < 64 * 0.65 ** (t - 1)
    assert split_levels(8, 0.3, 10) == 0
    assert split_levels(64, 1.0, 10) == 0
    assert level_degree(64, 0.3, 1) == math.ceil(64 * 0.65)


def test_draw_sides_pins_first_level_and_is_prefix_stable():
    a = draw_sides(10, 3, 5, first_level=tuple([1, 2] * 5))
    assert list(a.sides[:, 0]) == [1, 2] * 5
    b = draw_sides(6, 3, 5)
    assert np.array_equal(draw_sides(10, 3, 5).sides[:6], b.sides)


def test_bipartition_split_partitions_every_edge():
    inst = gen_general(40, 6, "union_of_matchings", 2)
    asg, streams = bipartition_split(inst, seed=3, levels=3)
    routed = sorted((u, v) for lvl in streams for v, us in lvl for u in us)
    assert routed == sorted(inst.edge_list())
    for lvl, stream in enumerate(streams):
        for v, us in stream:
            assert all(asg.level_of(u, v) == lvl for u in us)


def test_bipartite_input_sides_route_everything_to_level_one():
    inst = gen_regular_bipartite(10, 4, 0)
    _, streams = bipartition_split(inst, seed=0, levels=2, use_input_sides=True)
    assert sum(len(us) for _, us in streams[1]) == inst.num_edges
    assert all(not us for _, us in streams[0])


def test_color_via_matchings_uses_reserved_ranges():
    inst = gen_regular_bipartite(64, 16, 0)
    cfg = ReductionConfig.build(inst.n, inst.delta, "desk")
    res = color_via_matchings(inst, cfg, SMALL, seed=1)
    assert verify_coloring(inst, res.coloring).proper
    phase_colored = sum(p["edges_colored"] for p in res.per_phase)
    in_range = sum(1 for c in res.coloring.assignment.values() if c < cfg.reserved_colors)
    assert phase_colored == in_range > 0
    for p in res.per_phase:
        assert p["colors_used"] <= p["colors_reserved"]


@settings(max_examples=25)
@given(bipartite_instances(max_n=12, uniform=True), st.integers(0, 100))
def test_matching_colorer_is_always_proper(inst, seed):
    cfg = ReductionConfig.build(max(inst.n, 2), max(inst.delta, 1), "desk", multipliers=(0.05, 0.05, 0.01))
    res = color_via_matchings(inst, cfg, Backend.ensemble(50), seed)
    assert verify_coloring(inst, res.coloring).proper


@pytest.mark.parametrize("model", ["union_of_matchings", "erdos_renyi"])
def test_color_general_is_proper(model):
    inst = gen_general(128, 24, model, 1)
    cfg = ReductionConfig.build(inst.n, inst.delta, "desk")
    res = color_general(inst, cfg, SMALL, seed=2)
    rep = verify_coloring(inst, res.coloring)
    assert rep.proper
    assert res.levels[-1]["level"] == "residual"
    assert sum(lv["edges"] for lv in res.levels) == inst.num_edges


def test_color_general_with_exact_backend():
    inst = gen_general(10, 3, "union_of_matchings", 0)
    cfg = ReductionConfig.build(inst.n, inst.delta, "desk", multipliers=(0.05, 0.02, 0.01))
    res = color_general(inst, cfg, Backend.exact(), seed=0)
    assert verify_coloring(inst, res.coloring).proper


def test_coloring_is_deterministic():
    inst = gen_general(60, 10, "union_of_matchings", 4)
    a = color_general(inst, backend=SMALL, seed=9).coloring.assignment
    b = color_general(inst, backend=SMALL, seed=9).coloring.assignment
    assert a == b


def test_desk_reduction_ratio_below_two():
    ratios = []
    for seed in range(20):
        inst = gen_regular_bipartite(64, 16, seed, "interleaved")
        res = color_via_matchings(inst, ReductionConfig.build(inst.n, 16, "desk"), seed=seed)
        assert verify_coloring(inst, res.coloring).proper
        ratios.append(res.ratio)
    assert np.mean(ratios) < 2 - 0.01


def test_desk_general_ratio_below_two():
    ratios = []
    for seed in range(20):
        inst = gen_general(256, 32, "union_of_matchings", seed)
        res = color_general(inst, ReductionConfig.build(inst.n, 32, "desk"), seed=seed)
        assert verify_coloring(inst, res.coloring).proper
        assert len(res.levels) > 1
        ratios.append(res.ratio)
    assert np.mean(ratios) < 2


def test_phase_removes_expected_degree():
    from onlinecolor.diagnostics import concentration_report
    inst = gen_regular_bipartite(64, 16, 1)
    cfg = ReductionConfig.build(inst.n, 16, "desk")
    rep = concentration_report(inst, cfg, trials=1, seed=0, phase_trials=10)
    floor = cfg.L * (1 - cfg.epsilon) ** 2
    assert rep.phases
    for ph in rep.phases:
        assert ph["mean_colored"] >= floor
