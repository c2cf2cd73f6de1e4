"""Acceptance suite: one test per criterion, each printing a pass/fail line.

Run with `pytest tests/test_acceptance.py -v -s`. Criteria 5-8 share one
50-replication campaign (session fixture); everything is seeded, so the
suite is deterministic end to end. No-tolerance identity checks use dyadic
inputs (multiples of 1/16), for which float64 arithmetic is exact.
"""
import math
from dataclasses import replace

import numpy as np
import pytest

import edasched as es
from edasched import kernels
from edasched import io as edio
from edasched.cli import main as cli_main
from edasched.core import all_permutations

from conftest import dyadic_uniform, random_dyadic_instance


def _report(num: int, name: str, ok: bool, detail: str) -> None:
    print(f"criterion {num:2d} [{name}]: {'PASS' if ok else 'FAIL'} — {detail}")
    assert ok, f"criterion {num} ({name}) failed: {detail}"


# one replicated train-and-verify campaign shared by criteria 5-8
CAMPAIGN_CFG = es.CampaignConfig(
    n=6, events=4, eps=0.5, bound=10.0, const=0.8, alpha=0.5, delta=0.125,
    l=0.3, c=1.0, d=1.0, const1=1.0, const2=10.0 / 6.0,
    replications=50, master_seed=2026, m_fresh=10_000,
    tail_mass=0.02, sample_cap=100_000,
)


@pytest.fixture(scope="session")
def campaign():
    return es.run_campaign(CAMPAIGN_CFG)


def test_criterion_1_lipschitz_all_permutations():
    rng = np.random.default_rng(101)
    pairs_per_n = {2: 2500, 3: 2000, 4: 1500, 5: 1200, 6: 1000, 7: 900, 8: 900}
    assert sum(pairs_per_n.values()) == 10_000
    violations = 0
    checked = 0
    for n, pairs in pairs_per_n.items():
        perms = all_permutations(n)
        for _ in range(pairs):
            r = dyadic_uniform(rng, 0, 10, n)
            p = rng.integers(1, 81, n).astype(np.float64) / 16
            q1 = dyadic_uniform(rng, 0, 10, n)
            q2 = dyadic_uniform(rng, 0, 10, n)
            m = kernels.lateness_matrix(r, p, np.vstack([q1, q2]), perms)
            gap = float(np.max(np.abs(m[0] - m[1])))
            if gap > es.infinity_distance(q1, q2):
                violations += 1
            checked += 1
    _report(1, "lateness is 1-Lipschitz in the delivery vector", violations == 0,
            f"{checked} instance pairs, all permutations each, {violations} violations")


def test_criterion_2_convex_combination_bound():
    rng = np.random.default_rng(102)
    total = 0
    violations = 0
    for eps in (0.1, 0.5, 2.0):
        for n in (2, 4, 6):
            for size in (1, 2, 3, 5, 8):
                B = 250
                base = rng.uniform(0, 10, (B, 1, n))
                members = base + rng.uniform(0, eps, (B, size, n))
                counts = rng.integers(1, 50, (B, size)).astype(np.float64)
                weights = counts / counts.sum(axis=1, keepdims=True)
                mean = np.sum(weights[:, :, None] * members, axis=1)
                gaps = np.max(np.abs(members - mean[:, None, :]), axis=2)
                allowed = (1.0 - weights) * eps + 1e-12
                violations += int(np.sum(np.any(gaps > allowed, axis=1)))
                total += B
    _report(2, "weighted means stay within (1 - weight) * eps of members",
            violations == 0, f"{total} member sets, {violations} violations")


def test_criterion_3_solver_oracle_equivalence():
    rng = np.random.default_rng(103)
    counts_per_n = {1: 50, 2: 150, 3: 150, 4: 150, 5: 150, 6: 150, 7: 100, 8: 100}
    assert sum(counts_per_n.values()) == 1000
    bb_mismatches = 0
    schrage_violations = 0
    for n, count in counts_per_n.items():
        for _ in range(count):
            inst = random_dyadic_instance(rng, n)
            opt = es.brute_force_optimum(inst).value
            if es.exact_branch_and_bound(inst).value != opt:
                bb_mismatches += 1
            if es.schrage_heuristic(inst).value > 2.0 * opt:
                schrage_violations += 1
    _report(3, "branch and bound matches enumeration; greedy within factor 2",
            bb_mismatches == 0 and schrage_violations == 0,
            f"1000 instances, {bb_mismatches} value mismatches, "
            f"{schrage_violations} factor-2 violations")


def test_criterion_4_structural_invariants_sweep():
    cfg = es.CampaignConfig(
        n=4, events=3, eps=0.5, bound=10.0, const=0.8, alpha=0.5, delta=0.125,
        l=0.3, c=1.0, d=1.0, const1=1.0, const2=2.5,
        replications=50, master_seed=404, m_fresh=100,
        tail_mass=0.05, t_override=400, sweep_invariants=True,
    )
    res = es.run_campaign(cfg)
    bad = res.aggregate["invariant_violations_total"]
    steps = cfg.replications * (cfg.t_override + 2)
    _report(4, "population invariants hold after every step", bad == 0,
            f"50 replications, {steps} swept populations, {bad} violations")


def test_criterion_5_event_coverage_and_query_rate(campaign):
    agg = campaign.aggregate
    covered_frac = agg["frac_all_events_covered"]
    threshold = 1.0 - CAMPAIGN_CFG.tail_mass - 0.03
    cov_ok = sum(1 for r in campaign.rows if r.coverage_rate >= threshold)
    ok = covered_frac >= 0.95 and cov_ok >= 0.95 * len(campaign.rows)
    _report(5, "events covered and fresh samples answered", ok,
            f"all events covered in {covered_frac:.0%} of replications "
            f"(need >= 95%); coverage >= {threshold} in {cov_ok}/50 replications; "
            f"min coverage {agg['min_coverage']:.4f}")


def test_criterion_6_mean_estimation(campaign):
    delta = CAMPAIGN_CFG.delta
    M = CAMPAIGN_CFG.theory().delivery_bound
    cells = []
    for rep in campaign.reports:
        for ev, err in rep.mean_errors.items():
            cells.append((err, rep.event_sample_counts[ev]))
    failures = sum(1 for err, _ in cells if err >= delta)
    ok_reps = campaign.aggregate["frac_mean_errors_ok"]
    fail_freq = failures / len(cells)
    # union bound averaged over the realized per-event sample counts
    mean_bound = float(np.mean([
        min(1.0, es.hoeffding_failure_bound(CAMPAIGN_CFG.n, N, delta, M))
        for _, N in cells
    ]))
    ok = ok_reps >= 0.95 and fail_freq <= mean_bound
    _report(6, "local averages estimated within delta", ok,
            f"{len(cells)} (replication x event) cells, {failures} errors >= delta"
            f"; per-replication pass rate {ok_reps:.0%}; failure frequency "
            f"{fail_freq:.4f} <= clamped bound {mean_bound:.4f}")


def test_criterion_7_ratio_soundness(campaign):
    checks = campaign.aggregate["ratio_checks_total"]
    violations = campaign.aggregate["ratio_violations_total"]
    ok = violations == 0 and checks > 0
    _report(7, "measured ratios never exceed the certified bound", ok,
            f"{checks} answered fresh samples checked against brute-force optima, "
            f"{violations} violations")


def test_criterion_8_event_probability_estimation(campaign):
    cells = 0
    failures = 0
    for rep, row in zip(campaign.reports, campaign.rows):
        K = row.T + 1  # total samples consumed by the run
        for ev, err in rep.event_prob_errors.items():
            p = rep.event_true_probs[ev]
            if err > 3.0 * math.sqrt(p * (1.0 - p) / K):
                failures += 1
            cells += 1
    ok = cells > 0 and (cells - failures) / cells >= 0.99
    _report(8, "event probabilities inside the 3-sigma binomial interval", ok,
            f"{cells} cells, {failures} outside 3 sigma "
            f"({(cells - failures) / cells:.1%} inside, need >= 99%)")


def test_criterion_9_formula_regression():
    checks = []

    def close(a, b):
        checks.append((a, b))
        return a == pytest.approx(b, rel=1e-12, abs=0.0)

    tc8 = es.TheoryConstants(n=2, c=1.0, d=0.0, l=1.0, alpha=0.5, delta=0.1,
                             eps=0.5, const=1.0, const1=1.0, const2=1.0)
    tc1 = es.TheoryConstants(n=1, c=1.0, d=1.0, l=1.0, alpha=1e-30, delta=0.1,
                             eps=0.5, const=1.0, const1=1.0, const2=1.0)
    tcc = es.TheoryConstants(n=1, c=0.0, d=0.0, l=1.0, alpha=0.5, delta=2.0,
                             eps=0.5, const=1.0, const1=1.0, const2=2.0)
    ok = (
        close(es.required_runtime(tc8), 8)
        and close(es.required_runtime(tc1), 1)
        and close(es.hoeffding_failure_bound(3, 0, 0.1, 1.0), 6.0)
        and close(es.chernoff_undercount_bound(0, 0.5), 1.0)
        and close(es.chernoff_undercount_bound(4, 0.5), math.exp(-1.0))
        and close(es.training_failure_bound(tcc), math.exp(-0.25) + 2 * math.exp(-2.0))
        and close(es.approx_ratio_bound(10.0, 1.0, 0.0, 0.0), 1.0)
        and close(es.approx_ratio_bound(10.0, 1.0, 1.0, 1.0), 1.5)
    )
    _report(9, "bound formulas reproduce the pinned substitutions", ok,
            f"{len(checks)} substitutions at relative error <= 1e-12")


def test_criterion_10_cli_determinism(tmp_path):
    gen = ["generate", "--n", "4", "--events", "2", "--eps", "0.5",
           "--seed", "17", "--out-dir", str(tmp_path)]
    assert cli_main(gen) == 0
    pops = []
    for name in ("a.json", "b.json"):
        out = tmp_path / name
        rc = cli_main(["train", "--mixture", str(tmp_path / "mixture.txt"),
                       "--statics", str(tmp_path / "statics.json"),
                       "--out", str(out), "--seed", "5", "--T", "300"])
        assert rc == 0
        pops.append(out.read_bytes())
    train_same = pops[0] == pops[1]

    csvs = []
    for sub in ("v1", "v2"):
        rc = cli_main(["verify", "--n", "3", "--events", "2", "--eps", "0.5",
                       "--M", "8", "--const", "0.6", "--replications", "2",
                       "--master-seed", "9", "--m-fresh", "100",
                       "--sample-cap", "200", "--out-dir", str(tmp_path / sub)])
        assert rc == 0
        csvs.append((tmp_path / sub / "report.csv").read_bytes())
    verify_same = csvs[0] == csvs[1]

    _report(10, "identical configs produce byte-identical outputs",
            train_same and verify_same,
            f"population files identical: {train_same}; CSV reports identical: {verify_same}")
