import json

import pytest

from onlinecolor.cli import EXIT_BAD_INPUT, EXIT_OK, EXIT_VIOLATION, main
from onlinecolor.coloring import verify_coloring
from onlinecolor.graph import Coloring, from_edges, read_instance, validate_instance, write_instance


def run(*argv):
    return main([str(a) for a in argv])


@pytest.fixture
def regular(tmp_path):
    path = tmp_path / "reg.jsonl"
    assert run("gen", "regular", "--n", 8, "--delta", 2, "--seed", 7, "--out", path) == EXIT_OK
    return path


def test_gen_regular_is_valid_and_repeatable(tmp_path, regular):
    other = tmp_path / "again.jsonl"
    run("gen", "regular", "--n", 8, "--delta", 2, "--seed", 7, "--out", other)
    assert regular.read_text() == other.read_text()
    assert validate_instance(read_instance(regular)) == []


def test_gen_general_union_of_matchings(tmp_path):
    path = tmp_path / "g.jsonl"
    assert run("gen", "general", "--model", "union_of_matchings", "--n", 6, "--delta", 3, "--out", path) == 0
    inst = read_instance(path)
    assert set(inst.degrees().tolist()) == {3}


def test_gen_uniform_output_parses(tmp_path):
    path = tmp_path / "u.jsonl"
    run("gen", "regular", "--n", 8, "--delta", 2, "--uniform", "--out", path)
    inst = read_instance(path, uniform=True)
    assert validate_instance(inst) == []


def test_round_single_edge_exact(tmp_path):
    inst = tmp_path / "e.jsonl"
    write_instance(from_edges(2, [(0, 1)], x=1.0), inst)
    out = tmp_path / "m.csv"
    assert run("round", inst, "--backend", "exact", "--trials", 1000, "--out", out) == EXIT_OK
    rows = (tmp_path / "m.edges.csv").read_text().splitlines()
    assert rows[0].endswith("frequency,se")
    freq = float(rows[1].split(",")[-2])
    assert freq == pytest.approx(0.5271, abs=1e-4)


def test_round_is_seed_reproducible(tmp_path, regular):
    a, b = tmp_path / "a.json", tmp_path / "b.json"
    run("round", regular, "--replicas", 500, "--seed", 3, "--format", "json", "--out", a)
    run("round", regular, "--replicas", 500, "--seed", 3, "--format", "json", "--out", b)
    assert a.read_text() == b.read_text()
    assert all(set(r) == {"u", "v"} for r in json.loads(a.read_text()))


def test_round_require_bipartite_refuses_triangle(tmp_path, capsys):
    tri = tmp_path / "t.jsonl"
    write_instance(from_edges(3, [(0, 1), (1, 2), (0, 2)]), tri)
    assert run("round", tri, "--require-bipartite") == EXIT_BAD_INPUT
    assert "not bipartite" in capsys.readouterr().err


def test_color_greedy_on_path(tmp_path):
    inst = tmp_path / "p.jsonl"
    write_instance(from_edges(3, [(0, 1), (1, 2)]), inst)
    rep = tmp_path / "r.json"
    assert run("color", inst, "--algo", "greedy", "--out", tmp_path / "c.csv", "--report", rep) == 0
    assert json.loads(rep.read_text())["palette"] <= 3


def test_color_general_desk_reports_ratio(tmp_path):
    inst = tmp_path / "g.jsonl"
    run("gen", "general", "--n", 40, "--delta", 8, "--out", inst)
    out, rep = tmp_path / "c.csv", tmp_path / "r.json"
    assert run("color", inst, "--algo", "general", "--preset", "desk", "--color-replicas", 200,
               "--out", out, "--report", rep) == EXIT_OK
    summary = json.loads(rep.read_text())
    assert summary["proper"]
    lines = out.read_text().splitlines()[1:]
    col = Coloring({(int(u), int(v)): int(c) for u, v, c in (ln.split(",") for ln in lines)})
    check = verify_coloring(read_instance(inst), col)
    assert summary["ratio"] == check.ratio and check.proper


def test_color_matchings_needs_bipartite(tmp_path):
    tri = tmp_path / "t.jsonl"
    write_instance(from_edges(3, [(0, 1), (1, 2), (0, 2)]), tri)
    assert run("color", tri, "--algo", "bipartite-reduction") == EXIT_BAD_INPUT


def test_verify_flags_improper_coloring(tmp_path):
    inst = tmp_path / "p.jsonl"
    write_instance(from_edges(3, [(0, 1), (1, 2)]), inst)
    bad = tmp_path / "bad.csv"
    bad.write_text("u,v,color\n0,1,0\n1,2,0\n")
    assert run("verify", inst, "--coloring", bad) == EXIT_VIOLATION
    good = tmp_path / "good.csv"
    good.write_text("u,v,color\n0,1,0\n1,2,1\n")
    assert run("verify", inst, "--coloring", good) == EXIT_OK
    m = tmp_path / "m.csv"
    m.write_text("u,v\n0,1\n1,2\n")
    assert run("verify", inst, "--matching", m) == EXIT_VIOLATION


def test_bad_input_exit_codes(tmp_path):
    assert run("round", tmp_path / "missing.jsonl") == EXIT_BAD_INPUT
    junk = tmp_path / "junk.jsonl"
    junk.write_text("{not json\n")
    assert run("color", junk) == EXIT_BAD_INPUT
    assert run("nonsense") == EXIT_BAD_INPUT
    over = tmp_path / "over.jsonl"
    over.write_text('{"n":3,"delta":2}\n{"v":0,"edges":[]}\n{"v":1,"edges":[[0,0.7]]}\n{"v":2,"edges":[[0,0.7]]}\n')
    assert run("round", over) == EXIT_BAD_INPUT
    assert run("gen", "regular", "--n", 7, "--delta", 2) == EXIT_BAD_INPUT


def test_diag_writes_reports(tmp_path, regular):
    out = tmp_path / "d"
    assert run("diag", regular, "--kind", "all", "--trials", 2000, "--backend", "exact", "--out", out) == 0
    summary = json.loads((tmp_path / "d.json").read_text())
    assert summary["marginals"]["max_abs_error"] <= 1e-9
    assert summary["covariances"]["cov_violations"] == 0
    assert (tmp_path / "d.marginals.csv").exists() and (tmp_path / "d.covariances.csv").exists()


def test_manifest_replay_and_tamper_detection(tmp_path, regular, capsys):
    man = tmp_path / "man.json"
    assert run("round", regular, "--replicas", 300, "--seeds", "1,2", "--out", tmp_path / "r.csv",
               "--manifest", man) == 0
    data = json.loads(man.read_text())
    assert set(data["results"]) == {"1", "2"}
    assert {"version", "config", "rng", "wall_clock_s", "instance_sha256"} <= set(data)
    assert (tmp_path / "r.seed1.csv").exists()
    assert run("replay", man) == EXIT_OK
    data["results"]["1"]["hashes"][".csv"] = "0" * 64
    man.write_text(json.dumps(data))
    assert run("replay", man) == EXIT_VIOLATION
    regular.write_text(regular.read_text() + "\n")
    assert run("replay", man) == EXIT_BAD_INPUT
