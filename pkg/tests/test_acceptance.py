"""Full-scale acceptance checks.

Ten end-to-end criteria, each printing one line

    criterion N: PASS - <detail>   (or FAIL)

before asserting the same condition; run with ``pytest -s`` to watch
them.  The corpora built for criteria 1-7 also feed a shared tally of
structural audits and deficiency-bound sweeps, which criterion 8
re-checks for violations.  Scales are fixed, so the whole file costs a
few minutes of CPU; everything is seeded and bit-reproducible.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import pytest

from gwlab import (
    INTERSECTING,
    INTERSECTING_INDEPENDENT,
    PARALLEL,
    PARALLEL_DUPLICATED,
    PARALLEL_SHIFTED,
    PARALLEL_THINNED,
    SINGLE_LINE,
    SINGLE_POISSON,
    ExperimentConfig,
    PrefixLimitError,
    ProcessSpec,
    Space,
    audit_lemmas,
    check_cluster_consecutive,
    check_indented_entry,
    check_povratak,
    check_reduced_alignment,
    compute_Dx,
    couple_restrict,
    coupled_window_study,
    detect_crossings,
    extract_UV_sequences,
    generate,
    intersect_Bn_bound,
    mark_leading_and_indented,
    run_experiment,
    run_walk,
    run_walk_naive,
    sign_test_p,
    stream_seed,
    trajectories_equal,
    validate_dx_record,
)
from gwlab.analysis import last_visit_steps


def _emit(num: int, ok: bool, detail: str) -> None:
    print(f"criterion {num}: {'PASS' if ok else 'FAIL'} - {detail}")


# ---------------------------------------------------------------------------
# shared audit / deficiency tally fed by the criterion 1-7 corpora


@dataclass
class Tally:
    pair_checks: int = 0
    replay_checks: int = 0
    empty_checks: int = 0
    audit_violations: list = field(default_factory=list)
    summary_failures: int = 0  # lemma failures reported by experiment rows
    dx_records: int = 0
    dx_violations: list = field(default_factory=list)


TALLY = Tally()

_AUDITABLE = (SINGLE_POISSON, PARALLEL_DUPLICATED, PARALLEL_THINNED,
              PARALLEL_SHIFTED)


def _feed_audit(real, traj) -> None:
    if real.spec.construction not in _AUDITABLE:
        return
    rep = audit_lemmas(real, traj)
    TALLY.pair_checks += rep.pair_checks
    TALLY.replay_checks += rep.replay_checks
    TALLY.empty_checks += rep.empty_interval_checks
    for v in rep.violations:
        TALLY.audit_violations.append((real.spec.construction, real.seed, v))


def _feed_dx(real, traj) -> None:
    # full per-level sweeps are capped at half-width 50 to keep the
    # quadratic cost bounded; larger coupled windows are audited only
    if real.spec.construction not in (PARALLEL_THINNED, PARALLEL_SHIFTED):
        return
    if real.spec.space.window_L > 50.0:
        return
    last = last_visit_steps(real, traj)
    c = real.spec.construction
    for x in real.base_points[real.base_points > 0.0]:
        try:
            rec = compute_Dx(real, traj, float(x), last_steps=last)
        except PrefixLimitError:
            continue
        TALLY.dx_records += 1
        problems = validate_dx_record(c, rec)
        if problems:
            TALLY.dx_violations.append((c, real.seed, float(x), problems))


def _spec(construction: str, L: float = 50.0, r: float = 1.0,
          alpha: float | None = None, p: float = 0.5,
          s: float = 0.3) -> ProcessSpec:
    if construction == SINGLE_POISSON:
        space = Space(SINGLE_LINE, L)
    elif construction == INTERSECTING_INDEPENDENT:
        space = Space(INTERSECTING, L, alpha=alpha if alpha else math.pi / 3)
    else:
        space = Space(PARALLEL, L, separation_r=r)
    return ProcessSpec(
        construction=construction,
        space=space,
        rate_lambda=1.0,
        thinning_p=p if construction == PARALLEL_THINNED else None,
        shift_s=s if construction == PARALLEL_SHIFTED else None,
    )


# ---------------------------------------------------------------------------
# criterion 1: single-line crossing rate


@pytest.fixture(scope="module")
def c1_stats():
    cfg = ExperimentConfig(name="acc-c1", construction=SINGLE_POISSON,
                           n_runs=20_000, base_seed=9101, window_L=50.0,
                           detect_events=False)
    rows = run_experiment(cfg)
    TALLY.summary_failures += sum(r.lemma_failures or 0 for r in rows)
    return {"mean": float(np.mean([r.crossings for r in rows])),
            "n": len(rows)}


def test_criterion_1_crossing_rate(c1_stats):
    mean, n = c1_stats["mean"], c1_stats["n"]
    ok = 0.45 <= mean <= 0.55
    _emit(1, ok, f"mean crossings {mean:.4f} over {n} single-line runs, "
                 f"want [0.45, 0.55]")
    assert ok


# ---------------------------------------------------------------------------
# criterion 2: pruning engine vs exhaustive oracle


@pytest.fixture(scope="module")
def c2_stats():
    mismatches = {}
    for ci, construction in enumerate([
            SINGLE_POISSON, PARALLEL_DUPLICATED, PARALLEL_THINNED,
            PARALLEL_SHIFTED, INTERSECTING_INDEPENDENT]):
        spec = _spec(construction)
        bad = 0
        for i in range(1000):
            real = generate(spec, stream_seed(9102 + ci, i))
            traj = run_walk(real)
            if not trajectories_equal(traj, run_walk_naive(real)):
                bad += 1
            _feed_audit(real, traj)
            _feed_dx(real, traj)
        mismatches[construction] = bad
    return mismatches


def test_criterion_2_oracle_equivalence(c2_stats):
    total = sum(c2_stats.values())
    ok = total == 0
    _emit(2, ok, f"{total} mismatches across "
                 f"{1000 * len(c2_stats)} runs ({c2_stats})")
    assert ok


# ---------------------------------------------------------------------------
# criterion 3: window coupling gives strict trajectory prefixes


@pytest.fixture(scope="module")
def c3_stats():
    non_prefix = {}
    for ci, construction in enumerate([
            SINGLE_POISSON, PARALLEL_DUPLICATED, PARALLEL_THINNED,
            PARALLEL_SHIFTED, INTERSECTING_INDEPENDENT]):
        spec = _spec(construction, L=50.0)
        bad = 0
        for i in range(1000):
            big = generate(spec, stream_seed(9103 + ci, i))
            small = couple_restrict(big, 25.0)
            t_big = run_walk(big)
            t_small = run_walk(small)
            ns = len(t_small)
            strict = (ns < len(t_big)
                      and np.array_equal(t_small.us, t_big.us[:ns])
                      and np.array_equal(t_small.lines, t_big.lines[:ns]))
            if not strict:
                bad += 1
            for real, traj in ((big, t_big), (small, t_small)):
                _feed_audit(real, traj)
                _feed_dx(real, traj)
        non_prefix[construction] = bad
    return non_prefix


def test_criterion_3_prefix_stability(c3_stats):
    total = sum(c3_stats.values())
    ok = total == 0
    _emit(3, ok, f"{total} non-strict-prefix pairs across "
                 f"{1000 * len(c3_stats)} coupled pairs ({c3_stats})")
    assert ok


# ---------------------------------------------------------------------------
# criterion 4: duplicated clusters are swallowed whole


@pytest.fixture(scope="module")
def c4_stats():
    stats = {"false": 0, "undecided": 0, "align_bad": 0, "runs": 0}
    for k, (r, n_runs) in enumerate([(0.5, 334), (1.0, 333), (2.0, 333)]):
        spec = _spec(PARALLEL_DUPLICATED, r=r)
        for i in range(n_runs):
            real = generate(spec, stream_seed(91040 + k, i))
            traj = run_walk(real)
            verdict = check_cluster_consecutive(real, traj)
            if verdict is False:
                stats["false"] += 1
            elif verdict is None:
                stats["undecided"] += 1
            if not check_reduced_alignment(real, traj):
                stats["align_bad"] += 1
            stats["runs"] += 1
            _feed_audit(real, traj)
    return stats


def test_criterion_4_cluster_traversal(c4_stats):
    ok = c4_stats["false"] == 0 and c4_stats["align_bad"] == 0
    _emit(4, ok, f"{c4_stats['false']} traversal and "
                 f"{c4_stats['align_bad']} alignment violations over "
                 f"{c4_stats['runs']} duplicated runs "
                 f"({c4_stats['undecided']} prefix-cut, undecided)")
    assert ok


# ---------------------------------------------------------------------------
# criterion 5: duplicated crossing counts do not grow with the window


@pytest.fixture(scope="module")
def c5_stats():
    cfg = ExperimentConfig(name="acc-c5", construction=PARALLEL_DUPLICATED,
                           n_runs=600, base_seed=9105, separation_r=1.0,
                           detect_events=False)
    res = coupled_window_study(cfg, [50.0, 100.0, 200.0])
    cross = {L: np.array([r.crossings for r in rows])
             for L, rows in res.items()}
    for rows in res.values():
        TALLY.summary_failures += sum(r.lemma_failures or 0 for r in rows)
    diffs = {}
    for lo, hi in [(50.0, 100.0), (100.0, 200.0)]:
        d = cross[hi] - cross[lo]
        se = float(d.std(ddof=1) / math.sqrt(len(d))) if d.std() > 0 else 0.0
        diffs[(lo, hi)] = (float(d.mean()), se)
    means = {int(L): float(v.mean()) for L, v in cross.items()}
    return {"diffs": diffs, "means": means}


def test_criterion_5_no_crossing_growth(c5_stats):
    ok = all(mean <= 3.0 * se
             for mean, se in c5_stats["diffs"].values())
    pieces = ", ".join(
        f"L{int(lo)}->L{int(hi)} diff {m:+.4f} (se {s:.4f})"
        for (lo, hi), (m, s) in c5_stats["diffs"].items())
    _emit(5, ok, f"600 coupled duplicated triples: {pieces}; "
                 f"window means {c5_stats['means']}")
    assert ok


# ---------------------------------------------------------------------------
# criterion 6: thinning makes crossings grow with the window


@pytest.fixture(scope="module")
def c6_stats():
    # wide separation makes cross-line hops expensive, so the outbound
    # walk leaves the dense skipped-point trail that drives returns at
    # these window sizes; with r ~ 1 the zig-zag eats the trail and the
    # growth, while still real, is invisible below L ~ 10^4
    out = {}
    for k, p in enumerate([0.2, 0.5, 1.0]):
        spec = _spec(PARALLEL_THINNED, L=200.0, p=p, r=5.0)
        d = np.empty(2000, dtype=np.int64)
        c_small = np.empty(2000, dtype=np.int64)
        c_big = np.empty(2000, dtype=np.int64)
        for i in range(2000):
            big = generate(spec, stream_seed(91060 + k, i))
            small = couple_restrict(big, 50.0)
            t_big = run_walk(big)
            t_small = run_walk(small)
            c_big[i] = detect_crossings(t_big)
            c_small[i] = detect_crossings(t_small)
            d[i] = c_big[i] - c_small[i]
            _feed_audit(big, t_big)
            _feed_audit(small, t_small)
            _feed_dx(small, t_small)
        out[p] = {
            "med_small": float(np.median(c_small)),
            "med_big": float(np.median(c_big)),
            "p_value": sign_test_p(d),
        }
    return out


def test_criterion_6_crossings_grow_under_thinning(c6_stats):
    ok = all(st["med_big"] > st["med_small"] and st["p_value"] < 0.01
             for st in c6_stats.values())
    pieces = "; ".join(
        f"p={p}: median {st['med_small']:.1f}->{st['med_big']:.1f}, "
        f"sign test {st['p_value']:.2e}"
        for p, st in c6_stats.items())
    _emit(6, ok, f"2000 coupled thinned pairs per p, L 50 vs 200: {pieces}")
    assert ok


# ---------------------------------------------------------------------------
# criterion 7: gap events force a return to the negative half-axis


@pytest.fixture(scope="module")
def c7_stats():
    # thinned at r=5 so first-passage gap events actually fire (at r=1
    # nearly all recorded events are degenerate and the implication is
    # vacuous); shifted at r=1 where the cluster phenomena live
    out = {}
    for k, construction in enumerate([PARALLEL_THINNED, PARALLEL_SHIFTED]):
        spec = _spec(construction, r=5.0 if construction == PARALLEL_THINNED
                     else 1.0)
        occ = vio = unk = 0
        for i in range(2000):
            real = generate(spec, stream_seed(91070 + k, i))
            traj = run_walk(real)
            s = check_povratak(real, traj)
            occ += s.occurrences
            vio += s.violations
            unk += s.unknowns
            _feed_audit(real, traj)
            _feed_dx(real, traj)
        out[construction] = (occ, vio, unk)
    return out


def test_criterion_7_povratak(c7_stats):
    total_vio = sum(v for _, v, _ in c7_stats.values())
    ok = total_vio == 0
    pieces = "; ".join(
        f"{c}: {o} occurrences, {v} violations, {u} undecided"
        for c, (o, v, u) in c7_stats.items())
    _emit(7, ok, f"4000 runs: {pieces}")
    assert ok


# ---------------------------------------------------------------------------
# criterion 8: the structural audits over everything above


def test_criterion_8_audits_clean(c1_stats, c2_stats, c3_stats, c4_stats,
                                  c5_stats, c6_stats, c7_stats):
    n_audit = len(TALLY.audit_violations)
    n_dx = len(TALLY.dx_violations)
    ok = (n_audit == 0 and n_dx == 0 and TALLY.summary_failures == 0
          and TALLY.pair_checks > 0 and TALLY.replay_checks > 0
          and TALLY.empty_checks > 0 and TALLY.dx_records > 0)
    _emit(8, ok, f"{TALLY.pair_checks} pair, {TALLY.replay_checks} replay, "
                 f"{TALLY.empty_checks} empty-interval checks and "
                 f"{TALLY.dx_records} deficiency records over the criterion "
                 f"1-7 corpora: {n_audit} audit, {n_dx} deficiency, "
                 f"{TALLY.summary_failures} summary-reported violations")
    assert ok, (TALLY.audit_violations[:3], TALLY.dx_violations[:3])


# ---------------------------------------------------------------------------
# criterion 9: landmark verdicts on intersecting lines obey the tail bound


@pytest.fixture(scope="module")
def c9_stats():
    alpha = math.pi / 2
    spec = _spec(INTERSECTING_INDEPENDENT, alpha=alpha)
    n_runs = 10_000
    b_counts = np.zeros(16, dtype=np.int64)
    c_total = 0
    for i in range(n_runs):
        real = generate(spec, stream_seed(9109, i))
        traj = run_walk(real)
        for rec in extract_UV_sequences(traj, n_max=15):
            if rec.verdict == "B":
                b_counts[rec.n] += 1
            else:
                c_total += 1
    return {"alpha": alpha, "n_runs": n_runs, "b_counts": b_counts,
            "c_total": c_total}


def test_criterion_9_landmark_tail_bound(c9_stats):
    n_runs = c9_stats["n_runs"]
    worst = None
    ok = c9_stats["c_total"] == 0
    for n in range(1, 16):
        p_hat = c9_stats["b_counts"][n] / n_runs
        bound = intersect_Bn_bound(c9_stats["alpha"], n)
        se = math.sqrt(p_hat * (1.0 - p_hat) / n_runs)
        slack = bound + 3.0 * se - p_hat
        if worst is None or slack < worst[1]:
            worst = (n, slack, p_hat, bound)
        if slack < 0:
            ok = False
    n, slack, p_hat, bound = worst
    _emit(9, ok, f"{n_runs} right-angle runs: {c9_stats['c_total']} C "
                 f"verdicts; tightest level n={n}: freq {p_hat:.2e} vs "
                 f"bound {bound:.2e} (slack {slack:+.2e})")
    assert ok


# ---------------------------------------------------------------------------
# criterion 10: indented-lead entries traverse whole clusters; the
# early-exit phenomenon exists and is findable


def _indented_entry_stats(real, traj):
    """(entries, violations, undecided, early_exits) over one run."""
    _, marks = mark_leading_and_indented(real)
    entries = violations = undecided = early = 0
    for rec in check_indented_entry(real, traj):
        if rec.is_zero or rec.straddles:
            continue
        mk = marks[rec.cluster]
        if mk.indented:
            # indented side is line 0: the lead base point itself
            at_lead = (rec.entry_line == 0
                       and rec.entry_u == float(real.line0[mk.lead0]))
        else:
            at_lead = rec.entered_at_line1_lead
        if at_lead:
            entries += 1
            if rec.consecutive is False:
                violations += 1
            elif rec.consecutive is None:
                undecided += 1
        if rec.early_exit is True:
            early += 1
    return entries, violations, undecided, early


@pytest.fixture(scope="module")
def c10_stats():
    spec = _spec(PARALLEL_SHIFTED)
    entries = violations = undecided = 0
    first_early = None
    for i in range(1000):
        real = generate(spec, stream_seed(9110, i))
        traj = run_walk(real)
        e, v, u, early = _indented_entry_stats(real, traj)
        entries += e
        violations += v
        undecided += u
        if early and first_early is None:
            first_early = i
    scanned = 1000
    while first_early is None and scanned < 10_000:
        real = generate(spec, stream_seed(9110, scanned))
        traj = run_walk(real)
        if _indented_entry_stats(real, traj)[3]:
            first_early = scanned
        scanned += 1
    return {"entries": entries, "violations": violations,
            "undecided": undecided, "first_early": first_early,
            "scanned": scanned}


def test_criterion_10_indented_entry_discipline(c10_stats):
    ok = (c10_stats["violations"] == 0 and c10_stats["entries"] > 0
          and c10_stats["first_early"] is not None)
    _emit(10, ok, f"{c10_stats['violations']} violations over "
                  f"{c10_stats['entries']} indented-lead entries in 1000 "
                  f"shifted runs ({c10_stats['undecided']} undecided); "
                  f"first early-exit at run {c10_stats['first_early']} "
                  f"of {c10_stats['scanned']} scanned")
    assert ok
