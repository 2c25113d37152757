"""Command line interface.

Subcommands:

* simulate: one seeded run, optional JSON/binary export.
* verify: seeded self-check suites over many runs; exits 1 on violations.
* sweep: batch runs from a JSON config, CSV/report/manifest outputs.
* bounds: closed-form bound tables.
* export-plot-data: per-run CSV files ready for plotting.

Exit codes: 0 success, 1 verification failure, 2 usage or domain error.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import math
import os
import sys

from ._version import __version__
from .analysis import (
    audit_lemmas,
    check_cluster_consecutive,
    check_indented_entry,
    check_povratak,
    check_reduced_alignment,
    compute_Dx,
    decompose_clusters,
    detect_crossings,
    extract_halfline_changes,
    extract_UV_sequences,
    last_visit_steps,
    mark_leading_and_indented,
    theoretical_bounds,
    validate_dx_record,
)
from .errors import PrefixLimitError, ValidationError
from .geometry import INTERSECTING, PARALLEL, SINGLE_LINE, Space
from .processes import (
    CONSTRUCTIONS,
    INTERSECTING_INDEPENDENT,
    PARALLEL_DUPLICATED,
    PARALLEL_SHIFTED,
    PARALLEL_THINNED,
    SINGLE_POISSON,
    ProcessSpec,
    generate,
    realization_to_dict,
)
from .seeding import stream_seed
from .walk import (
    RUN_TO_EXHAUSTION,
    TRUNCATION_SAFE,
    StopRule,
    run_walk,
    run_walk_naive,
    trajectories_equal,
    trajectory_to_binary,
    trajectory_to_dicts,
)

DEFAULT_SEED = 1729


def _build_spec(construction: str, a: argparse.Namespace) -> ProcessSpec:
    if construction == SINGLE_POISSON:
        space = Space(SINGLE_LINE, a.window_L)
    elif construction == INTERSECTING_INDEPENDENT:
        space = Space(INTERSECTING, a.window_L, alpha=a.alpha)
    else:
        space = Space(PARALLEL, a.window_L, separation_r=a.separation_r)
    kwargs = dict(construction=construction, space=space,
                  rate_lambda=a.rate_lambda)
    if construction == PARALLEL_THINNED:
        kwargs["thinning_p"] = a.thinning_p
    if construction == PARALLEL_SHIFTED:
        kwargs["shift_s"] = a.shift_s
        kwargs["allow_unproven_shift"] = a.allow_unproven
    return ProcessSpec(**kwargs)


def _iter_runs(spec: ProcessSpec, base_seed: int, n_runs: int):
    for i in range(n_runs):
        real = generate(spec, stream_seed(base_seed, i))
        yield real, run_walk(real)


# ---------------------------------------------------------------------------
# verify suites


def _suite_audit(kind: str):
    counters = {
        "pair-distance": "pair_checks",
        "replay-max": "replay_checks",
        "empty-interval": "empty_interval_checks",
    }

    def run(args, specs):
        checks = viol = 0
        for label, spec in specs:
            c = v = 0
            for real, traj in _iter_runs(spec, args.seed, args.runs):
                audit = audit_lemmas(real, traj)
                c += getattr(audit, counters[kind])
                v += sum(1 for x in audit.violations if x["kind"] == kind)
            print(f"  {label}: runs={args.runs} checks={c} violations={v}")
            checks += c
            viol += v
        return checks, viol

    return run


def _suite_povratak(args, specs):
    checks = viol = unknowns = 0
    for label, spec in specs:
        occ = v = unk = 0
        for real, traj in _iter_runs(spec, args.seed, args.runs):
            s = check_povratak(real, traj)
            occ += s.occurrences
            v += s.violations
            unk += s.unknowns
        print(f"  {label}: runs={args.runs} occurrences={occ} "
              f"violations={v} unknowns={unk}")
        checks += occ
        viol += v
        unknowns += unk
    return checks, viol


def _suite_dx_bounds(args, specs):
    checks = viol = 0
    for label, spec in specs:
        c = v = 0
        for real, traj in _iter_runs(spec, args.seed, args.runs):
            last = last_visit_steps(real, traj)
            for x in real.base_points[real.base_points > 0.0]:
                try:
                    rec = compute_Dx(real, traj, float(x), last_steps=last)
                except PrefixLimitError:
                    continue
                c += 1
                v += len(validate_dx_record(spec.construction, rec))
        print(f"  {label}: runs={args.runs} records={c} violations={v}")
        checks += c
        viol += v
    return checks, viol


def _suite_cluster_traversal(args, specs):
    checks = viol = 0
    for label, spec in specs:
        ok = undecided = bad = 0
        for real, traj in _iter_runs(spec, args.seed, args.runs):
            consec = check_cluster_consecutive(real, traj)
            aligned = check_reduced_alignment(real, traj)
            if consec is False or not aligned:
                bad += 1
            elif consec is None:
                undecided += 1
            else:
                ok += 1
        print(f"  {label}: runs={args.runs} ok={ok} undecided={undecided} "
              f"violations={bad}")
        checks += ok + undecided + bad
        viol += bad
    return checks, viol


def _suite_indented_entry(args, specs):
    checks = viol = 0
    for label, spec in specs:
        c = v = undecided = early = 0
        for real, traj in _iter_runs(spec, args.seed, args.runs):
            _, marks = mark_leading_and_indented(real)
            for rec in check_indented_entry(real, traj):
                if rec.is_zero or rec.straddles:
                    continue
                mk = marks[rec.cluster]
                if mk.indented:
                    # whole cluster sits past its copies, so the indented
                    # lead is the line-0 lead point itself
                    at_lead = (rec.entry_line == 0
                               and rec.entry_u == float(real.line0[mk.lead0]))
                else:
                    at_lead = rec.entered_at_line1_lead
                if at_lead:
                    c += 1
                    if rec.consecutive is None:
                        undecided += 1
                    elif not rec.consecutive:
                        v += 1
                if rec.early_exit:
                    early += 1
        print(f"  {label}: runs={args.runs} indented_lead_entries={c} "
              f"violations={v} undecided={undecided} early_exits={early}")
        checks += c
        viol += v
    return checks, viol


def _suite_uv_verdicts(args, specs):
    checks = viol = 0
    for label, spec in specs:
        n_b = n_c = 0
        for real, traj in _iter_runs(spec, args.seed, args.runs):
            for rec in extract_UV_sequences(traj):
                if rec.verdict == "C":
                    n_c += 1
                else:
                    n_b += 1
        print(f"  {label}: runs={args.runs} records={n_b + n_c} "
              f"B={n_b} C={n_c}")
        checks += n_b + n_c
        viol += n_c
    return checks, viol


def _suite_oracle(args, specs):
    checks = viol = 0
    for label, spec in specs:
        mismatches = 0
        for i in range(args.runs):
            real = generate(spec, stream_seed(args.seed, i))
            if not trajectories_equal(run_walk(real), run_walk_naive(real)):
                mismatches += 1
        print(f"  {label}: runs={args.runs} mismatches={mismatches}")
        checks += args.runs
        viol += mismatches
    return checks, viol


_PARALLEL_ALL = (PARALLEL_DUPLICATED, PARALLEL_THINNED, PARALLEL_SHIFTED)

SUITES = {
    "lemma-distance": (
        _suite_audit("pair-distance"), _PARALLEL_ALL,
        "close cross-line pairs must lose a member once straddled",
    ),
    "lemma-replay": (
        _suite_audit("replay-max"), (SINGLE_POISSON,) + _PARALLEL_ALL,
        "steps into swept territory must hit the largest alive shadow",
    ),
    "empty-interval": (
        _suite_audit("empty-interval"), (SINGLE_POISSON,) + _PARALLEL_ALL,
        "killing the last copy at a crossed shadow leaves no alive site "
        "above it up to and including the running max",
    ),
    "dx-bounds": (
        _suite_dx_bounds, (PARALLEL_THINNED, PARALLEL_SHIFTED),
        "deficiency records stay within their per-construction bounds",
    ),
    "povratak": (
        _suite_povratak, (PARALLEL_THINNED, PARALLEL_SHIFTED),
        "every occurred gap event returns to the negative half-axis before "
        "passing the gap",
    ),
    "cluster-traversal": (
        _suite_cluster_traversal, (PARALLEL_DUPLICATED,),
        "entered non-zero clusters are swallowed whole, lead to lead",
    ),
    "indented-entry": (
        _suite_indented_entry, (PARALLEL_SHIFTED,),
        "clusters first entered at their indented leading point are "
        "traversed consecutively",
    ),
    "uv-verdicts": (
        _suite_uv_verdicts, (INTERSECTING_INDEPENDENT,),
        "landmark pairs never produce a C verdict at a finite step",
    ),
    "oracle-equivalence": (
        _suite_oracle, CONSTRUCTIONS,
        "optimized walk engine matches the exhaustive-scan engine step "
        "for step",
    ),
}


# ---------------------------------------------------------------------------
# handlers


def _cmd_simulate(args) -> int:
    spec = _build_spec(args.construction, args)
    real = generate(spec, args.seed)
    traj = run_walk(real, rule=StopRule(args.stop_mode))
    print(
        f"construction={args.construction} seed={args.seed} "
        f"n_points={real.n_points} n_steps={len(traj)} "
        f"stop={traj.stop_reason} crossings={detect_crossings(traj)} "
        f"halfline_changes={len(extract_halfline_changes(traj))}"
    )
    if args.export_run:
        payload = {
            "schema": "gwlab-run/1",
            "realization": realization_to_dict(real),
            "trajectory": trajectory_to_dicts(traj),
            "stop_reason": traj.stop_reason,
        }
        with open(args.export_run, "w", encoding="utf-8") as fh:
            json.dump(payload, fh, sort_keys=True)
            fh.write("\n")
        print(f"wrote {args.export_run}")
    if args.export_binary:
        trajectory_to_binary(traj, args.export_binary)
        print(f"wrote {args.export_binary}")
    return 0


def _cmd_verify(args) -> int:
    if args.list_suites:
        for name in SUITES:
            print(f"{name}: {SUITES[name][2]}")
        return 0
    if args.suite is None:
        print("error: --suite NAME or --list-suites required", file=sys.stderr)
        return 2
    fn, applicable, _ = SUITES[args.suite]
    if args.construction is not None:
        if args.construction not in applicable:
            raise ValidationError(
                f"suite {args.suite!r} does not apply to {args.construction!r}"
            )
        constructions = (args.construction,)
    else:
        constructions = applicable
    specs = [(c, _build_spec(c, args)) for c in constructions]
    print(f"suite {args.suite}: {len(specs)} construction(s), "
          f"{args.runs} runs each, seed {args.seed}")
    checks, violations = fn(args, specs)
    status = "PASS" if violations == 0 else "FAIL"
    print(f"{args.suite}: {status} ({violations} violations / {checks} checks)")
    return 0 if violations == 0 else 1


def _cmd_sweep(args) -> int:
    from .experiments import load_config, run_experiment, write_outputs

    cfg = load_config(args.config)
    if args.workers is not None:
        cfg = dataclasses.replace(cfg, workers=args.workers)
    rows = run_experiment(cfg)
    paths = write_outputs(cfg, rows, args.out_dir)
    for p in paths.values():
        print(f"wrote {p}")
    return 0


def _cmd_bounds(args) -> int:
    if args.family == "intersecting-Bn":
        table = theoretical_bounds("intersecting-Bn", alpha=args.alpha,
                                   n_max=args.n_max)
    else:
        table = theoretical_bounds("parallel-Am", r=args.separation_r,
                                   n_max=args.n_max)
    for k in sorted(table):
        print(f"{k}\t{table[k]:.9g}")
    return 0


def _cmd_export_plot_data(args) -> int:
    spec = _build_spec(args.construction, args)
    real = generate(spec, args.seed)
    traj = run_walk(real)
    os.makedirs(args.out_dir, exist_ok=True)
    tpath = os.path.join(args.out_dir, "prefix_trajectory.csv")
    with open(tpath, "w", encoding="utf-8") as fh:
        fh.write("step,line,u\n")
        for i, (u, l) in enumerate(zip(traj.us, traj.lines), start=1):
            fh.write(f"{i},{int(l)},{float(u)!r}\n")
    cpath = os.path.join(args.out_dir, "prefix_clusters.csv")
    with open(cpath, "w", encoding="utf-8") as fh:
        fh.write("cluster_index,signed_index,lo_u,hi_u,lead_u,size,is_zero\n")
        dec = None
        if args.construction in (PARALLEL_DUPLICATED, PARALLEL_THINNED):
            dec = decompose_clusters(real.base_points,
                                     spec.space.separation_r)
        elif args.construction == PARALLEL_SHIFTED:
            dec, _ = mark_leading_and_indented(real)
        if dec is not None:
            for ci, (lo, hi) in enumerate(dec.ranges):
                fh.write(
                    f"{ci},{dec.cluster_number(ci)},"
                    f"{float(dec.points[lo])!r},{float(dec.points[hi - 1])!r},"
                    f"{float(dec.points[dec.leads[ci]])!r},{hi - lo},"
                    f"{int(ci == dec.zero_cluster)}\n"
                )
    print(f"wrote {tpath}")
    print(f"wrote {cpath}")
    return 0


# ---------------------------------------------------------------------------
# parser


def _add_process_args(p: argparse.ArgumentParser, *, required_construction):
    p.add_argument("--construction", choices=CONSTRUCTIONS,
                   required=required_construction, default=None)
    p.add_argument("--seed", type=int, default=DEFAULT_SEED)
    p.add_argument("--rate-lambda", dest="rate_lambda", type=float, default=1.0)
    p.add_argument("--window-L", dest="window_L", type=float, default=25.0)
    p.add_argument("--separation-r", dest="separation_r", type=float,
                   default=1.0)
    p.add_argument("--alpha", type=float, default=math.pi / 3)
    p.add_argument("--thinning-p", dest="thinning_p", type=float, default=0.5)
    p.add_argument("--shift-s", dest="shift_s", type=float, default=0.3)
    p.add_argument("--allow-unproven-s", dest="allow_unproven",
                   action="store_true",
                   help="widen the shift domain from r/sqrt(3) to r")


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="gwlab",
        description="nearest-unvisited-point walks on pairs of lines",
    )
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="run one seeded walk")
    _add_process_args(p, required_construction=True)
    p.add_argument("--stop-mode", choices=(TRUNCATION_SAFE, RUN_TO_EXHAUSTION),
                   default=TRUNCATION_SAFE)
    p.add_argument("--export-run", metavar="PATH",
                   help="write realization + trajectory JSON")
    p.add_argument("--export-binary", metavar="PATH",
                   help="write the trajectory in the columnar binary format")
    p.set_defaults(handler=_cmd_simulate)

    p = sub.add_parser("verify", help="run a seeded self-check suite")
    p.add_argument("--suite", choices=sorted(SUITES), default=None)
    p.add_argument("--list-suites", action="store_true")
    p.add_argument("--runs", type=int, default=100)
    _add_process_args(p, required_construction=False)
    p.set_defaults(handler=_cmd_verify)

    p = sub.add_parser("sweep", help="batch runs from a JSON config")
    p.add_argument("--config", required=True)
    p.add_argument("--out-dir", required=True)
    p.add_argument("--workers", type=int, default=None)
    p.set_defaults(handler=_cmd_sweep)

    p = sub.add_parser("bounds", help="print closed-form bound tables")
    p.add_argument("--family", choices=("intersecting-Bn", "parallel-Am"),
                   required=True)
    p.add_argument("--alpha", type=float, default=math.pi / 3)
    p.add_argument("--separation-r", dest="separation_r", type=float,
                   default=1.0)
    p.add_argument("--n-max", dest="n_max", type=int, default=15)
    p.set_defaults(handler=_cmd_bounds)

    p = sub.add_parser("export-plot-data",
                       help="write plot-ready CSVs for one run")
    _add_process_args(p, required_construction=True)
    p.add_argument("--out-dir", required=True)
    p.set_defaults(handler=_cmd_export_plot_data)

    return parser


def main(argv=None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return int(e.code or 0)
    try:
        return args.handler(args)
    except ValidationError as e:
        print(f"error: {e}", file=sys.stderr)
        return 2


def entry() -> None:
    sys.exit(main())


if __name__ == "__main__":
    entry()
