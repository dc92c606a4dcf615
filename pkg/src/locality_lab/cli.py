"""Command-line front end: ``locality-lab {partition,matching,vc,oracle,suite}``.

Graphs come from ``--graph FILE`` (edge-list format) or ``--gen SPEC`` with
SPEC one of ``empty:N``, ``path:N``, ``star:N``, ``complete:N``,
``complete_bipartite:A:B``, ``er:N:P`` and ``regular:N:D``. Shift
distributions are ``poly:ALPHA`` or ``exp:LAMBDA``.

Every output document embeds the parsed config, the base seed and the
package version. Generated graphs are drawn once from the base seed; trial
``t`` runs the algorithm with seed ``seed + t``.

Exit codes: 0 success, 1 a check failed, 2 usage or input error,
3 non-termination, 4 oracle limit exceeded.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys
import warnings

from . import __version__
from .decomposition import (
    PolyTail,
    cluster_stats,
    default_alpha,
    moment_estimate,
    moment_exponent,
    parse_distribution,
    partition,
    radius_tail_bound,
    sample_shifts,
    verify_clustering,
)
from .acceptance import DEFAULT_SEED
from .generators import generate
from .graph import Graph, GraphError, read_edge_list
from .matching import (
    MatchingParams,
    is_maximal,
    run_baseline_framework,
    run_cluster_matching,
    verify_matching,
)
from .oracles import OracleLimitError, exact_max_matching, exact_min_wvc
from .parallel import map_trials
from .vertex_cover import VCParams, local_ratio_audit, run_mwvc, verify_cover

EXIT_OK, EXIT_CHECK, EXIT_USAGE, EXIT_NONTERMINATION, EXIT_ORACLE = 0, 1, 2, 3, 4


class UsageError(Exception):
    pass


# ---------------------------------------------------------------- plumbing


def _clean(x):
    """JSON-safe copy: non-finite floats become None, tuples become lists."""
    if isinstance(x, float):
        return x if math.isfinite(x) else None
    if isinstance(x, dict):
        return {str(k): _clean(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_clean(v) for v in x]
    if hasattr(x, "item") and callable(x.item):  # numpy scalar
        return _clean(x.item())
    if hasattr(x, "descriptor"):
        return x.descriptor()
    return x


def _config(args) -> dict:
    skip = {"func", "output", "format"}
    return _clean({k: v for k, v in sorted(vars(args).items()) if k not in skip})


def _load_graph(args) -> Graph:
    if args.graph is None and args.gen is None:
        raise UsageError("one of --graph or --gen is required")
    try:
        if args.graph is not None:
            return read_edge_list(args.graph)
        return generate(args.gen, seed=args.seed)
    except OSError as exc:
        raise UsageError(f"cannot read graph: {exc}") from None
    except (GraphError, ValueError) as exc:
        raise UsageError(str(exc)) from None


def _emit(args, rows: list[dict], summary: dict):
    header = {"command": args.command, "version": __version__, "seed": args.seed, "config": _config(args)}
    rows = [_clean(r) for r in rows]
    summary = _clean(summary)
    if args.format == "json":
        text = json.dumps({**header, "rows": rows, "summary": summary}, indent=2, sort_keys=True) + "\n"
    elif args.format == "jsonl":
        lines = [header, *rows, {"summary": summary}]
        text = "".join(json.dumps(x, sort_keys=True) + "\n" for x in lines)
    else:
        buf = io.StringIO()
        buf.write("# " + json.dumps(header, sort_keys=True) + "\n")
        flat = [_flatten(r) for r in rows]
        fields = sorted({k for r in flat for k in r})
        writer = csv.DictWriter(buf, fieldnames=fields, lineterminator="\n")
        writer.writeheader()
        writer.writerows(flat)
        buf.write("# summary " + json.dumps(summary, sort_keys=True) + "\n")
        text = buf.getvalue()
    if args.output:
        with open(args.output, "w", encoding="utf-8") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _flatten(row: dict, prefix="") -> dict:
    out = {}
    for k, v in row.items():
        key = f"{prefix}{k}"
        if isinstance(v, dict):
            out.update(_flatten(v, key + "."))
        elif isinstance(v, list):
            out[key] = json.dumps(v)
        else:
            out[key] = v
    return out


# --------------------------------------------------------------- partition


def _partition_trial(job):
    g, dist, alpha, b, q_values, seed = job
    c = partition(g, sample_shifts(dist, g.n, seed), alpha=alpha)
    row = {"seed": seed, "n_clusters": len(c.centers), "max_radius": c.max_radius}
    if isinstance(dist, PolyTail):
        rep = verify_clustering(g, c, dist.alpha, b)
        row["radius_bound"] = rep.radius_bound
        row["violations"] = len(rep.violations)
        stats = cluster_stats(g, c, q_values)
        row["max_count"] = {q: stats.max_counts()[q] for q in q_values}
        row["count_bound"] = {q: math.exp(3 * dist.alpha / (q + 1)) for q in q_values}
    else:
        row["radius_bound"] = radius_tail_bound(dist, g.n) if g.n >= 2 else math.inf
        stats = cluster_stats(g, c, q_values)
        row["max_count"] = {q: stats.max_counts()[q] for q in q_values}
        row["violations"] = 0
    return row


def cmd_partition(args) -> int:
    g = _load_graph(args)
    if args.dist is None:
        dist = PolyTail(args.alpha if args.alpha is not None else default_alpha(max(g.n, 3), args.b))
    else:
        dist = args.dist
    alpha = getattr(dist, "alpha", None)
    q_values = list(range(args.q_max + 1))
    jobs = [(g, dist, alpha, args.b, q_values, args.seed + t) for t in range(args.trials)]
    rows = [{"trial": t, **r} for t, r in enumerate(map_trials(_partition_trial, jobs))]
    bad = sum(r["violations"] > 0 for r in rows)
    rate = bad / len(rows) if rows else 0.0
    summary = {
        "distribution": dist.descriptor(),
        "alpha": alpha,
        "b": args.b if args.dist is None and args.alpha is None else None,
        "n": g.n,
        "m": g.m,
        "trials": args.trials,
        "violation_rate": rate,
        "max_violation_rate": args.max_violation_rate,
        "max_radius": max((r["max_radius"] for r in rows), default=0),
    }
    if args.moment_trials and g.n:
        if alpha is None:
            raise UsageError("--moment-trials needs a poly distribution")
        me = moment_exponent(alpha, args.moment_q)
        est = moment_estimate(g, dist, args.moment_q, me.gamma, args.moment_trials, seed=args.seed)
        summary["moment"] = {
            "q": args.moment_q,
            "gamma": me.gamma,
            "premise_holds": me.premise_holds,
            "max_mean": est.max_mean,
            "max_node": est.max_node,
            "stderr": est.max_stderr,
            "limit": 2 * math.e,
        }
    _emit(args, rows, summary)
    return EXIT_OK if rate <= args.max_violation_rate else EXIT_CHECK


# ---------------------------------------------------------------- matching


def _matching_trial(job):
    g, params, baseline, oracle_opt = job
    if baseline:
        res = run_baseline_framework(g, params.K, params.rounds, params.seed, record_trace=True)
    else:
        res = run_cluster_matching(g, params, record_trace=False)
    row = {"seed": params.seed, **res.to_dict()}
    row["valid"] = verify_matching(g, res.matched)
    row["maximal"] = is_maximal(g, res.matched)
    if baseline:
        row["trace"] = res.trace
    if oracle_opt is not None:
        row["opt"] = oracle_opt
        row["ratio"] = len(res.matched) / oracle_opt if oracle_opt else 1.0
        row["oracle_pass"] = len(res.matched) * (2 + params.eps) >= oracle_opt
    return row


def cmd_matching(args) -> int:
    g = _load_graph(args)
    opt = exact_max_matching(g)[0] if args.oracle else None
    jobs = []
    for t in range(args.trials):
        p = MatchingParams(b=args.b, alpha=args.alpha, K=args.K, rounds=args.rounds, eps=args.eps,
                           seed=args.seed + t, fixed_point_mode=args.fixed_point)
        jobs.append((g, p, args.baseline, opt))
    rows = [{"trial": t, **r} for t, r in enumerate(map_trials(_matching_trial, jobs))]
    clean = all(r["valid"] and not any(r["violations"].values()) for r in rows)
    passes = [r["oracle_pass"] for r in rows if "oracle_pass" in r]
    pass_rate = sum(passes) / len(passes) if passes else 1.0
    incomplete = sum(not r["completed"] for r in rows)
    summary = {
        "algorithm": "baseline" if args.baseline else "cluster",
        "n": g.n,
        "m": g.m,
        "opt": opt,
        "audits_clean": clean,
        "oracle_pass_rate": pass_rate if passes else None,
        "min_pass_rate": args.min_pass_rate,
        "incomplete_runs": incomplete,
    }
    _emit(args, rows, summary)
    if not clean or pass_rate < args.min_pass_rate:
        return EXIT_CHECK
    if args.fixed_point and not args.baseline and incomplete:
        return EXIT_NONTERMINATION
    return EXIT_OK


# ---------------------------------------------------------------------- vc


def _weighted(g: Graph, unit: bool) -> Graph:
    if unit:
        return g.with_weights([1.0] * g.n)
    if g.node_weights is None:
        print("note: graph has no node weights, using unit weights", file=sys.stderr)
        return g.with_weights([1.0] * g.n)
    return g


def _vc_params(args, seed) -> VCParams:
    kw = dict(eps=args.eps, alpha=args.alpha, seed=seed, fixed_point_mode=args.fixed_point,
              phase_round_budget=args.phase_budget, stage_cap=args.stage_cap)
    if args.b is not None:
        kw["b"] = args.b
    return VCParams.asymptotic_profile(**kw) if args.profile == "asymptotic" else VCParams(**kw)


def _vc_trial(job):
    g, params, opt = job
    res = run_mwvc(g, params)
    audit = local_ratio_audit(res.run)
    row = {"seed": params.seed, **res.to_dict()}
    row["valid_cover"] = verify_cover(g, res.cover)
    row["audit"] = audit.to_dict()
    if opt is not None:
        bound = (2 + params.eps) * opt
        row["opt_weight"] = opt
        row["ratio"] = res.total_weight / opt if opt else 1.0
        row["oracle_pass"] = res.total_weight <= bound + 1e-9 * max(1.0, bound)
    return row


def cmd_vc(args) -> int:
    g = _weighted(_load_graph(args), args.unit_weights)
    opt = exact_min_wvc(g)[0] if args.oracle else None
    try:
        jobs = [(g, _vc_params(args, args.seed + t), opt) for t in range(args.trials)]
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    rows = [{"trial": t, **r} for t, r in enumerate(map_trials(_vc_trial, jobs))]
    done = [r for r in rows if r["completed"]]
    ok = all(r["valid_cover"] and r["audit"]["clean"] and r.get("oracle_pass", True) for r in done)
    hard = all(not any(r["violations"].values()) for r in rows)
    summary = {
        "n": g.n,
        "m": g.m,
        "opt_weight": opt,
        "terminated": len(done),
        "trials": len(rows),
        "all_checks_pass": ok and hard,
    }
    _emit(args, rows, summary)
    if len(done) < len(rows):
        for r in rows:
            if not r["completed"]:
                print(f"trial {r['trial']}: nodes {r['unterminated']} unterminated after "
                      f"{r['stages_used']} stages", file=sys.stderr)
        return EXIT_NONTERMINATION
    return EXIT_OK if ok and hard else EXIT_CHECK


# ------------------------------------------------------------------ oracle


def cmd_oracle(args) -> int:
    g = _load_graph(args)
    if args.problem == "vc":
        if args.unit_weights or g.node_weights is None:
            g = g.with_weights([1.0] * g.n)
        opt, witness = exact_min_wvc(g)
        witness = list(witness)
    else:
        opt, witness = exact_max_matching(g)
        witness = [list(e) for e in witness]
    _emit(args, [{"opt": opt, "witness": witness}], {"problem": args.problem, "n": g.n, "m": g.m})
    return EXIT_OK


# ------------------------------------------------------------------- suite


def cmd_suite(args) -> int:
    from .acceptance import CRITERIA, run_suite

    numbers = args.criteria or sorted(CRITERIA)
    unknown = [k for k in numbers if k not in CRITERIA]
    if unknown:
        raise UsageError(f"unknown criteria {unknown}; choose from {sorted(CRITERIA)}")
    results = run_suite(numbers, seed=args.seed)
    for r in results:
        print(f"{r.line()}  ({r.elapsed:.1f}s)")
    passed = sum(r.passed for r in results)
    print(f"{passed}/{len(results)} criteria passed")
    if args.output:
        doc = {
            "command": "suite",
            "version": __version__,
            "seed": args.seed,
            "config": _config(args),
            "results": _clean([r.to_dict() for r in results]),
        }
        with open(args.output, "w", encoding="utf-8") as fh:
            fh.write(json.dumps(doc, indent=2, sort_keys=True) + "\n")
    return EXIT_OK if passed == len(results) else EXIT_CHECK


# ------------------------------------------------------------------ parser


def _distribution(text):
    try:
        return parse_distribution(text)
    except ValueError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from None


def _nonneg_int(text):
    v = int(text)
    if v < 0:
        raise argparse.ArgumentTypeError(f"must be >= 0, got {v}")
    return v


def _pos_int(text):
    v = int(text)
    if v < 1:
        raise argparse.ArgumentTypeError(f"must be >= 1, got {v}")
    return v


def _seed(text):
    v = int(text)
    if not 0 <= v < 2**63:
        raise argparse.ArgumentTypeError("seed must be a non-negative 63-bit integer")
    return v


def _common(p: argparse.ArgumentParser, graph=True, seed=0):
    if graph:
        src = p.add_mutually_exclusive_group()
        src.add_argument("--graph", metavar="FILE", help="edge-list file ('n m [weighted]' header)")
        src.add_argument("--gen", metavar="SPEC", help="generator, e.g. er:50:0.3, star:6, complete:8")
        p.add_argument("--trials", type=_pos_int, default=1)
    p.add_argument("--seed", type=_seed, default=seed, help=f"base seed (default {seed})")
    p.add_argument("--format", choices=("json", "jsonl", "csv"), default="json")
    p.add_argument("--output", metavar="PATH", help="write the document here instead of stdout")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="locality-lab",
        description=__doc__.split("\n\n", 1)[1],
        formatter_class=argparse.RawDescriptionHelpFormatter,
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("partition", help="random-shift clustering statistics")
    _common(p)
    p.add_argument("--dist", type=_distribution, help="poly:ALPHA or exp:LAMBDA (default poly with alpha from --b)")
    p.add_argument("--alpha", type=float, help="poly-tail exponent (overrides --b)")
    p.add_argument("--b", type=float, default=4.0, help="alpha = b ln n / ln ln n when no alpha is given")
    p.add_argument("--q-max", type=_nonneg_int, default=3, help="report counts for q = 0..Q")
    p.add_argument("--moment-trials", type=_nonneg_int, default=0, help="Monte Carlo trials for the moment estimate")
    p.add_argument("--moment-q", type=_nonneg_int, default=1)
    p.add_argument("--max-violation-rate", type=float, default=0.04,
                   help="highest tolerated fraction of trials with a count-bound violation")
    p.set_defaults(func=cmd_partition)

    p = sub.add_parser("matching", help="approximate maximum matching runs")
    _common(p)
    p.add_argument("--eps", type=float, default=0.5)
    p.add_argument("--K", type=float, default=2.0)
    p.add_argument("--rounds", type=_pos_int, default=10_000)
    p.add_argument("--b", type=float, default=4.0)
    p.add_argument("--alpha", type=float)
    p.add_argument("--fixed-point", action=argparse.BooleanOptionalAction, default=True,
                   help="stop once no edge is active (default) instead of using the full round budget")
    p.add_argument("--baseline", action="store_true", help="run the unclustered framework instead")
    p.add_argument("--oracle", action="store_true", help="compare with the exact maximum matching")
    p.add_argument("--min-pass-rate", type=float, default=1.0)
    p.set_defaults(func=cmd_matching)

    p = sub.add_parser("vc", help="approximate minimum weighted vertex cover runs")
    _common(p)
    p.add_argument("--eps", type=float, default=0.5)
    p.add_argument("--b", type=float)
    p.add_argument("--alpha", type=float)
    p.add_argument("--profile", choices=("desk", "asymptotic"), default="desk")
    p.add_argument("--stage-cap", type=_pos_int)
    p.add_argument("--phase-budget", type=_pos_int, default=100_000)
    p.add_argument("--fixed-point", action=argparse.BooleanOptionalAction, default=True)
    p.add_argument("--unit-weights", action="store_true")
    p.add_argument("--oracle", action="store_true", help="compare with the exact minimum weight cover")
    p.set_defaults(func=cmd_vc)

    p = sub.add_parser("oracle", help="exact solvers for small instances")
    p.add_argument("problem", choices=("vc", "matching"))
    _common(p)
    p.add_argument("--unit-weights", action="store_true")
    p.set_defaults(func=cmd_oracle)

    p = sub.add_parser("suite", help="run the seeded acceptance criteria")
    _common(p, graph=False, seed=DEFAULT_SEED)
    p.add_argument("--criteria", type=int, nargs="*", help="criterion numbers (default all)")
    p.set_defaults(func=cmd_suite)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            return args.func(args)
    except UsageError as exc:
        print(f"locality-lab {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except OracleLimitError as exc:
        print(f"locality-lab {args.command}: oracle limit: {exc}", file=sys.stderr)
        return EXIT_ORACLE
    except ValueError as exc:
        print(f"locality-lab {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
