import math

import numpy as np
import pytest

from onlinecolor.coloring import ReductionConfig
from onlinecolor.diagnostics import (FreeStatusTrace, concentration_report, estimate_covariances,
                                     estimate_marginals, exact_covariance, frozen_schedules, pair_covariance,
                                     probe_points, rows_to_csv, run_trials)
from onlinecolor.graph import from_edges, gen_general, gen_regular_bipartite, make_instance
from onlinecolor.rounding import Backend, default_constants

from conftest import random_bipartite

HP = default_constants().half_plus_c


def test_exact_marginal_report_hits_targets():
    rng = np.random.default_rng(8)
    for _ in range(10):
        inst = random_bipartite(rng, 9, 0.7)
        rep = estimate_marginals(inst, Backend.exact(), 0, seed=3)
        assert rep.exact and rep.max_abs_error <= 1e-9
        assert rep.rows() == estimate_marginals(inst, Backend.exact(), 0, seed=4).rows()


def test_single_edge_marginal_within_four_se():
    inst = from_edges(2, [(0, 1)], x=1.0)
    rep = estimate_marginals(inst, Backend.ensemble(1000), 100_000, seed=0)
    e = rep.edges[0]
    assert e.target == pytest.approx(0.5271, abs=1e-4)
    assert e.se == pytest.approx(math.sqrt(e.estimate * (1 - e.estimate) / 100_000))
    assert abs(e.estimate - e.target) <= 4 * e.se


def test_zero_x_edge_estimates_zero():
    inst = make_instance(3, 2, {1: [(0, 0.0)], 2: [(1, 0.5)]})
    rep = estimate_marginals(inst, Backend.ensemble(100), 5000, seed=0)
    assert [e.estimate for e in rep.edges if e.x == 0] == [0.0]


def test_standard_error_shrinks_with_trials():
    inst = gen_regular_bipartite(8, 4, 0)
    se = []
    for t in (20_000, 40_000):
        rep = estimate_marginals(inst, Backend.ensemble(5000), t, seed=1)
        se.append(np.median([e.se for e in rep.edges]))
    assert se[1] / se[0] == pytest.approx(1 / math.sqrt(2), rel=0.2)


def test_disjoint_components_are_uncorrelated():
    inst = from_edges(4, [(0, 1), (2, 3)], x=1.0)
    ens = run_trials(inst, frozen_schedules(inst, Backend.exact(), 0), 50_000, seed=2)
    cov, se = pair_covariance(FreeStatusTrace(ens.match_time, ens.match_low), 0, 2, 4)
    assert abs(cov) <= 4 * se


def test_covariances_match_exact_values():
    inst = gen_regular_bipartite(5, 3, 1)
    rep = estimate_covariances(inst, "all", 50_000, seed=5, backend=Backend.exact())
    assert rep.pairs
    for p in rep.pairs:
        assert abs(p.cov_f - exact_covariance(inst, p.u, p.w, p.probe)) <= 4 * p.se_f + 1e-12


def test_covariance_self_checks_and_bounds():
    inst = gen_regular_bipartite(8, 4, 3)
    rep = estimate_covariances(inst, "all", 20_000, seed=1, backend=Backend.ensemble(5000))
    assert rep.bipartite and rep.partition_ok
    assert rep.identity_gap < 1e-12
    assert rep.bound_cov == pytest.approx(6 * default_constants().c)
    assert rep.bound_high == pytest.approx(2 * default_constants().c)
    assert not rep.cov_violations() and not rep.high_violations()
    assert len(rep.high_edges) == inst.num_edges


def test_probe_modes():
    inst = gen_regular_bipartite(6, 3, 0)
    every = estimate_covariances(inst, "all", 2000, seed=0, backend=Backend.exact())
    worst = estimate_covariances(inst, "worst", 2000, seed=0, backend=Backend.exact())
    assert len(worst.pairs) == len(probe_points(inst, inst.sides)) <= len(every.pairs)
    v = every.pairs[0].probe
    only = estimate_covariances(inst, [v], 2000, seed=0, backend=Backend.exact())
    assert {p.probe for p in only.pairs} == {v}


def test_concentration_report_basic():
    inst = gen_general(400, 40, "union_of_matchings", 0)
    rep = concentration_report(inst, ReductionConfig.build(400, 40, "desk"), trials=50, seed=0)
    assert rep.threshold == pytest.approx(20 * 1.3)
    assert rep.chernoff_target == pytest.approx(math.exp(-20 * 0.09 / 3))
    assert abs(rep.mean_ratio - 1) < 0.05
    assert 0 <= rep.exceed_frequency <= 1


def test_concentration_with_large_epsilon_never_exceeds():
    inst = gen_general(60, 8, "union_of_matchings", 1)
    cfg = ReductionConfig.build(60, 8, "paper", multipliers=(1, 1, 1))
    cfg = ReductionConfig(**{**cfg.__dict__, "epsilon": 1.0})
    assert concentration_report(inst, cfg, trials=30, seed=0).exceed_frequency == 0


def test_concentration_on_empty_graph():
    inst = from_edges(5, [])
    rep = concentration_report(inst, trials=10)
    assert rep.empty and rep.phases == [] and rep.exceed_frequency == 0


def test_phase_counts_are_reported():
    inst = gen_regular_bipartite(64, 16, 0)
    rep = concentration_report(inst, ReductionConfig.build(128, 16, "desk"), trials=5, seed=0,
                               phase_trials=2, backend=Backend.ensemble(200))
    assert len(rep.phases) == ReductionConfig.build(128, 16, "desk").phase_count
    for ph in rep.phases:
        assert 0 <= ph["frequency"] <= 1 and ph["vertices"] > 0


def test_rows_to_csv():
    assert rows_to_csv([]) == ""
    text = rows_to_csv([{"a": 1, "b": 0.5}])
    assert text == "a,b\n1,0.5\n"


def test_high_degree_mass_on_a_heavy_neighbour():
    # vertex 0 reaches fractional degree 0.95 before vertex 3 arrives
    inst = make_instance(4, 2, {1: [(0, 0.95)], 3: [(0, 0.05), (2, 0.95)]}, sides=[1, 2, 1, 2])
    rep = estimate_covariances(inst, "all", 100_000, seed=0, backend=Backend.exact())
    mass = {(h.u, h.v): h for h in rep.high_edges}
    h = mass[(0, 3)]
    assert abs(h.prob - HP * 0.05) <= 4 * h.se
    assert mass[(0, 1)].prob == 0
    assert rep.partition_ok and not rep.high_violations()
