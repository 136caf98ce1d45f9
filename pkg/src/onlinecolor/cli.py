"""Command-line harness: gen, round, color, verify, diag, replay.

Every run can write a manifest (``--manifest``) holding the full config,
the code version and a hash of each per-seed output; ``replay`` re-runs a
manifest and checks the hashes.

Exit codes: 0 ok, 1 invariant violation, 2 bad input.
"""
from __future__ import annotations

import argparse
import csv
import hashlib
import io
import json
import os
import sys
import time
from dataclasses import dataclass, field
from typing import Callable, Optional

from . import __version__
from .coloring import (ReductionConfig, color_general, color_via_matchings, greedy_color, is_matching,
                       verify_coloring)
from .coloring.reduction import DEFAULT_COLOR_REPLICAS
from .diagnostics import (concentration_report, estimate_covariances, estimate_marginals, rows_to_csv,
                          to_json)
from .graph import (Coloring, GraphInstance, InstanceError, dumps_instance, gen_general, gen_regular_bipartite,
                    loads_instance, two_coloring, validate_instance)
from .rounding import Backend, default_constants, round_online
from .rounding.exact import DEFAULT_EXACT_CAP, ExactCapError

EXIT_OK, EXIT_VIOLATION, EXIT_BAD_INPUT = 0, 1, 2
DEFAULT_DIAG_TRIALS = 10_000
RNG_PROVENANCE = "numpy Philox4x64; key = SeedSequence(seed, spawn_key=path); counter = (arrival, stage)"


class BadInput(Exception):
    pass


@dataclass
class Outcome:
    """What one seed of one subcommand produced."""
    files: dict[str, str] = field(default_factory=dict)     # suffix -> text
    summary: dict = field(default_factory=dict)
    violations: list[str] = field(default_factory=list)


# ---------------------------------------------------------------- helpers

def _load(path: str, uniform: bool) -> GraphInstance:
    try:
        with open(path) as fh:
            inst = loads_instance(fh.read(), uniform=uniform)
    except OSError as exc:
        raise BadInput(f"cannot read instance: {exc}") from exc
    except (InstanceError, ValueError) as exc:
        raise BadInput(f"malformed instance {path}: {exc}") from exc
    bad = validate_instance(inst)
    if bad:
        raise BadInput("invalid instance: " + "; ".join(map(str, bad[:5])))
    return inst


def _backend(args) -> Backend:
    if args.backend == "exact":
        return Backend.exact(args.exact_cap)
    return Backend.ensemble(args.replicas)


def _table(rows: list[dict], fmt: str) -> str:
    if fmt == "json":
        return json.dumps(rows, sort_keys=True) + "\n"
    return rows_to_csv(rows)


def _cfg(inst: GraphInstance, args) -> ReductionConfig:
    alpha = default_constants().alpha if args.alpha is None else args.alpha
    return ReductionConfig.build(max(inst.n, 2), inst.delta, args.preset, alpha)


# ---------------------------------------------------------------- subcommands

def cmd_gen(args, seed: int) -> Outcome:
    if args.family == "regular":
        if args.n % 2:
            raise BadInput("regular bipartite instances need an even --n")
        if args.delta > args.n // 2:
            raise BadInput("--delta exceeds the side size")
        inst = gen_regular_bipartite(args.n // 2, args.delta, seed, args.order)
    else:
        if args.delta >= args.n:
            raise BadInput("--delta must be below --n")
        inst = gen_general(args.n, args.delta, args.model, seed)
    text = dumps_instance(inst)
    if args.uniform:
        text = _strip_x(text)
    bad = validate_instance(inst)
    return Outcome({".jsonl": text}, {"n": inst.n, "delta": inst.delta, "edges": inst.num_edges},
                   [str(b) for b in bad])


def _strip_x(text: str) -> str:
    lines = text.splitlines()
    out = [lines[0]]
    for line in lines[1:]:
        rec = json.loads(line)
        rec["edges"] = [e[0] for e in rec["edges"]]
        out.append(json.dumps(rec, separators=(",", ":")))
    return "\n".join(out) + "\n"


def cmd_round(args, seed: int) -> Outcome:
    inst = _load(args.instance, args.uniform)
    sides = inst.sides if inst.sides is not None else two_coloring(inst)
    if sides is None:
        if args.require_bipartite:
            raise BadInput("instance is not bipartite (odd cycle found); the rounding guarantee needs a bipartite graph")
        print("warning: instance is not bipartite, marginal guarantee does not apply", file=sys.stderr)
    backend = _backend(args)
    try:
        res = round_online(inst, backend, seed)
    except ExactCapError as exc:
        raise BadInput(str(exc)) from exc
    rows = res.edge_rows()
    if args.trials > 0:
        rep = estimate_marginals(inst, backend, args.trials, seed)
        est = {(e.u, e.v): (e.estimate, e.se) for e in rep.edges}
        for r in rows:
            r["frequency"], r["se"] = est[(r["u"], r["v"])]
    matching = sorted(res.matching)
    violations = [] if is_matching(matching) else ["output is not a matching"]
    out_fmt = [{"u": u, "v": v} for u, v in matching]
    summary = {"matched": len(matching), "total_deficiency": res.total_deficiency,
               "backend": backend.describe(), "bipartite": sides is not None}
    return Outcome({"." + args.format: _table(out_fmt, args.format), ".edges.csv": rows_to_csv(rows)},
                   summary, violations)


def cmd_color(args, seed: int) -> Outcome:
    inst = _load(args.instance, args.uniform)
    if args.algo == "greedy":
        col = greedy_color(inst)
        extra = {"per_phase": [], "deficiency_total": 0.0}
    else:
        cfg = _cfg(inst, args)
        backend = _backend(args) if args.backend == "exact" else Backend.ensemble(args.color_replicas)
        try:
            if args.algo == "bipartite-reduction":
                if two_coloring(inst) is None:
                    raise BadInput("--algo bipartite-reduction needs a bipartite instance; use --algo general")
                res = color_via_matchings(inst, cfg, backend, seed)
            else:
                res = color_general(inst, cfg, backend, seed)
        except ExactCapError as exc:
            raise BadInput(str(exc)) from exc
        col = res.coloring
        extra = {"per_phase": res.per_phase, "levels": res.levels, "config": res.config,
                 "deficiency_total": res.deficiency_total}
    rep = verify_coloring(inst, col)
    rows = [{"u": u, "v": v, "color": c} for (u, v), c in sorted(col.assignment.items())]
    summary = {"algo": args.algo, "palette": rep.palette, "delta": inst.delta, "ratio": rep.ratio,
               "proper": rep.proper, **extra}
    violations = [] if rep.proper else [f"improper coloring: {len(rep.conflicts)} conflicts, {len(rep.missing)} missing"]
    return Outcome({"." + args.format: _table(rows, args.format)}, summary, violations)


def _read_pairs(path: str) -> list[dict]:
    try:
        with open(path) as fh:
            text = fh.read()
    except OSError as exc:
        raise BadInput(f"cannot read {path}: {exc}") from exc
    try:
        if text.lstrip().startswith("["):
            return json.loads(text)
        return [{k: int(v) for k, v in r.items()} for r in csv.DictReader(io.StringIO(text))]
    except (ValueError, json.JSONDecodeError) as exc:
        raise BadInput(f"malformed table {path}: {exc}") from exc


def cmd_verify(args, seed: int) -> Outcome:
    inst = _load(args.instance, args.uniform)
    if args.matching:
        pairs = [(int(r["u"]), int(r["v"])) for r in _read_pairs(args.matching)]
        edges = set(inst.edge_list())
        ok = is_matching(pairs) and all(p in edges for p in pairs)
        summary = {"matching": True, "size": len(pairs), "valid": ok}
        return Outcome({".json": to_json(summary) + "\n"}, summary, [] if ok else ["not a matching of the instance"])
    if not args.coloring:
        raise BadInput("verify needs --coloring or --matching")
    col = Coloring({(int(r["u"]), int(r["v"])): int(r["color"]) for r in _read_pairs(args.coloring)})
    rep = verify_coloring(inst, col)
    summary = rep.as_dict()
    return Outcome({".json": to_json(summary) + "\n"}, {k: summary[k] for k in ("proper", "palette", "ratio")},
                   [] if rep.proper else ["improper coloring"])


def cmd_diag(args, seed: int) -> Outcome:
    inst = _load(args.instance, args.uniform)
    backend = _backend(args)
    trials = args.trials or DEFAULT_DIAG_TRIALS
    files, summary, violations = {}, {}, []
    kinds = ("marginals", "covariances", "concentration") if args.kind == "all" else (args.kind,)
    bipartite = (inst.sides if inst.sides is not None else two_coloring(inst)) is not None
    try:
        if "marginals" in kinds:
            rep = estimate_marginals(inst, backend, trials, seed)
            files[".marginals.csv"] = rows_to_csv(rep.rows())
            summary["marginals"] = rep.summary()
            if bipartite and rep.exact and rep.max_abs_error > 1e-9:
                violations.append(f"exact marginal off target by {rep.max_abs_error:.3g}")
            if bipartite and not rep.exact and rep.worst_z > 4:
                violations.append(f"marginal z-score {rep.worst_z:.2f} > 4")
        if "covariances" in kinds:
            probes = args.probe if args.probe in ("all", "worst") else [int(p) for p in args.probe.split(",")]
            rep = estimate_covariances(inst, probes, trials, seed, backend)
            files[".covariances.csv"] = rows_to_csv(rep.rows())
            files[".high_mass.csv"] = rows_to_csv([h.__dict__ for h in rep.high_vertices])
            summary["covariances"] = s = rep.summary()
            if bipartite and (s["cov_violations"] or s["high_violations"]):
                violations.append("covariance or high-degree mass gate failed")
            if not s["partition_ok"] or s["identity_gap"] > 1e-9:
                violations.append("indicator self-check failed")
    except ExactCapError as exc:
        raise BadInput(str(exc)) from exc
    if "concentration" in kinds:
        rep = concentration_report(inst, _cfg(inst, args), trials, seed, args.phase_trials,
                                   Backend.ensemble(args.color_replicas))
        summary["concentration"] = rep.summary()
    files[".json"] = to_json(summary) + "\n"
    return Outcome(files, summary, violations)


COMMANDS: dict[str, Callable] = {"gen": cmd_gen, "round": cmd_round, "color": cmd_color,
                                 "verify": cmd_verify, "diag": cmd_diag}


# ---------------------------------------------------------------- manifests

def _digest(text: str) -> str:
    return hashlib.sha256(text.encode()).hexdigest()


def _file_digest(path: Optional[str]) -> Optional[str]:
    if not path or not os.path.exists(path):
        return None
    with open(path, "rb") as fh:
        return hashlib.sha256(fh.read()).hexdigest()


def _seeds(args) -> list[int]:
    if args.seeds:
        try:
            return [int(s) for s in args.seeds.split(",") if s.strip()]
        except ValueError as exc:
            raise BadInput(f"bad --seeds: {args.seeds}") from exc
    return [args.seed]


_NOT_CONFIG = {"func", "manifest", "out", "report"}


def config_of(args) -> dict:
    return {k: v for k, v in sorted(vars(args).items()) if k not in _NOT_CONFIG}


def execute(args) -> tuple[int, dict]:
    """Run ``args.command`` for every seed; write outputs; return (code, manifest)."""
    start = time.perf_counter()
    results = {}
    code = EXIT_OK
    seeds = _seeds(args)
    for seed in seeds:
        outcome = COMMANDS[args.command](args, seed)
        if outcome.violations:
            code = EXIT_VIOLATION
            for v in outcome.violations:
                print(f"violation (seed {seed}): {v}", file=sys.stderr)
        _emit(args, seed, outcome, multi=len(seeds) > 1)
        results[str(seed)] = {"hashes": {k: _digest(t) for k, t in sorted(outcome.files.items())},
                              "summary": outcome.summary, "violations": outcome.violations}
    manifest = {
        "version": __version__,
        "config": config_of(args),
        "instance_sha256": _file_digest(getattr(args, "instance", None)),
        "results": results,
        "rng": RNG_PROVENANCE,
        "wall_clock_s": time.perf_counter() - start,
    }
    return code, manifest


def _emit(args, seed: int, outcome: Outcome, multi: bool) -> None:
    base = args.out
    if base is None:
        main = next(iter(outcome.files.values()))
        sys.stdout.write(main)
        if args.report and outcome.summary:
            _write(args.report, to_json(outcome.summary) + "\n")
        return
    stem, ext = os.path.splitext(base)
    tag = f".seed{seed}" if multi else ""
    for i, (suffix, text) in enumerate(outcome.files.items()):
        path = f"{stem}{tag}{ext or suffix}" if i == 0 else f"{stem}{tag}{suffix}"
        _write(path, text)
    if args.report:
        rstem, rext = os.path.splitext(args.report)
        _write(f"{rstem}{tag}{rext or '.json'}", to_json(outcome.summary) + "\n")


def _write(path: str, text: str) -> None:
    d = os.path.dirname(path)
    if d:
        os.makedirs(d, exist_ok=True)
    with open(path, "w") as fh:
        fh.write(text)


def replay(path: str) -> int:
    """Re-run a manifest's config and compare every per-seed hash."""
    try:
        with open(path) as fh:
            old = json.load(fh)
        args = argparse.Namespace(**old["config"], out=None, report=None, manifest=None)
    except (OSError, KeyError, TypeError, json.JSONDecodeError) as exc:
        print(f"error: bad manifest {path}: {exc}", file=sys.stderr)
        return EXIT_BAD_INPUT
    if old.get("instance_sha256") and _file_digest(args.instance) != old["instance_sha256"]:
        print("error: instance file changed since the manifest was written", file=sys.stderr)
        return EXIT_BAD_INPUT
    saved = sys.stdout
    sys.stdout = io.StringIO()              # outputs already exist; only hashes matter
    try:
        code, new = execute(args)
    except BadInput as exc:
        sys.stdout = saved
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_BAD_INPUT
    finally:
        sys.stdout = saved
    mismatched = [s for s in old["results"] if old["results"][s]["hashes"] != new["results"].get(s, {}).get("hashes")]
    if mismatched:
        print(f"replay mismatch for seeds {mismatched}", file=sys.stderr)
        return EXIT_VIOLATION
    print(f"replay ok: {len(old['results'])} seed(s) reproduced")
    return code


# ---------------------------------------------------------------- parser

def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=0)
    common.add_argument("--seeds", default=None, help="comma-separated seeds (overrides --seed)")
    common.add_argument("--out", default=None, help="output path (stdout if omitted)")
    common.add_argument("--report", default=None, help="JSON summary path")
    common.add_argument("--format", choices=("csv", "json"), default="csv")
    common.add_argument("--preset", choices=("paper", "desk"), default="paper")
    common.add_argument("--backend", choices=("exact", "ensemble"), default="ensemble")
    common.add_argument("--replicas", type=int, default=100_000)
    common.add_argument("--color-replicas", type=int, default=DEFAULT_COLOR_REPLICAS,
                        help="replicas per rounding pass inside the colorers")
    common.add_argument("--trials", type=int, default=0)
    common.add_argument("--exact-cap", type=int, default=DEFAULT_EXACT_CAP)
    common.add_argument("--uniform", action="store_true", help="instance edges carry no x (x = 1/delta)")
    common.add_argument("--manifest", default=None, help="write a run manifest here")

    p = argparse.ArgumentParser(prog="onlinecolor", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=__version__)
    sub = p.add_subparsers(dest="command", required=True)

    g = sub.add_parser("gen", parents=[common], help="generate an instance")
    g.add_argument("family", choices=("regular", "general"))
    g.add_argument("--n", type=int, required=True)
    g.add_argument("--delta", type=int, required=True)
    g.add_argument("--model", choices=("union_of_matchings", "erdos_renyi"), default="union_of_matchings")
    g.add_argument("--order", choices=("interleaved", "one_sided", "random"), default="interleaved")

    r = sub.add_parser("round", parents=[common], help="round the fractional matching online")
    r.add_argument("instance")
    r.add_argument("--require-bipartite", action="store_true")

    c = sub.add_parser("color", parents=[common], help="online edge coloring")
    c.add_argument("instance")
    c.add_argument("--algo", choices=("greedy", "bipartite-reduction", "general"), default="general")
    a = c.add_mutually_exclusive_group()
    a.add_argument("--alpha", type=float, default=None)
    a.add_argument("--alpha-from-c", dest="alpha", action="store_const", const=None,
                   help="alpha = 1/(1/2+c) (default)")

    v = sub.add_parser("verify", parents=[common], help="check a coloring or matching file")
    v.add_argument("instance")
    v.add_argument("--coloring", default=None)
    v.add_argument("--matching", default=None)

    d = sub.add_parser("diag", parents=[common], help="statistical diagnostics")
    d.add_argument("instance")
    d.add_argument("--kind", choices=("marginals", "covariances", "concentration", "all"), default="marginals")
    d.add_argument("--probe", default="all", help="all | worst | comma-separated probe vertices")
    d.add_argument("--phase-trials", type=int, default=0)
    d.add_argument("--alpha", type=float, default=None)

    rp = sub.add_parser("replay", help="re-run a manifest and compare output hashes")
    rp.add_argument("manifest_path")
    return p


def main(argv: Optional[list[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_BAD_INPUT
    if args.command == "replay":
        return replay(args.manifest_path)
    if getattr(args, "trials", 0) < 0 or getattr(args, "replicas", 1) < 1:
        print("error: --trials must be >= 0 and --replicas >= 1", file=sys.stderr)
        return EXIT_BAD_INPUT
    try:
        code, manifest = execute(args)
    except BadInput as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_BAD_INPUT
    if args.manifest:
        _write(args.manifest, json.dumps(manifest, sort_keys=True, indent=2, default=float) + "\n")
    return code


if __name__ == "__main__":
    sys.exit(main())
