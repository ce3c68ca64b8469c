"""Acceptance criteria 1-9, each at its stated tolerance and time budget.

A pass/fail line per criterion is printed in the pytest terminal summary.
"""
import io
import math
import time

import numpy as np
import pytest

from qbhop import cli
from qbhop.analytics import (
    angles_from_counts, closed_form_state, gamma_amplitude_lower_bound, integer_bound_maximisers,
    optimal_rotation_count, recurrence_state, simplified_lower_bound, success_probability,
    textbook_success_probability,
)
from qbhop.hopper import fit_power_law, make_problem, run_trials, summarize
from qbhop.localsearch import DescentConfig
from qbhop.objective import DomainGrid, egg_crate
from qbhop.simulator import (
    GbsConfig, OracleSpec, grover_iteration, marked_probability, perturbation_bound,
    perturbation_experiment, sample_gbs, uniform_state,
)

TRIPLES = [(3, 0, 1), (4, 2, 2), (60, 2, 2), (1000, 8, 16), (4024, 8, 64)]


def test_criterion_1_closed_form_matches_recurrence(acceptance):
    t0 = time.perf_counter()
    worst = 0.0
    for counts in TRIPLES:
        for k in range(51):
            cf, rec = closed_form_state(counts, k), recurrence_state(counts, k)
            worst = max(worst, abs(cf.a - rec.a), abs(cf.c - rec.c), float(np.max(np.abs(cf.b - rec.b))))
    elapsed = time.perf_counter() - t0
    ok = worst <= 1e-10 and elapsed < 5
    acceptance(1, ok, f"max coefficient difference {worst:.2e} (tol 1e-10), {elapsed:.2f}s (< 5s)")
    assert ok


def test_criterion_2_textbook_reduction(acceptance):
    worst_analytic = worst_sim = 0.0
    cases = 0
    for n in (4, 64, 1024, 4096):
        for m in (1, 4, 16):
            if m > n:
                continue  # N = 4 cannot hold 16 marked points
            cases += 1
            oracle = OracleSpec(n, np.arange(m))
            mask = oracle.mask()
            state = uniform_state(n)
            for k in range(101):
                ref = textbook_success_probability(n, m, k)
                worst_analytic = max(worst_analytic, abs(success_probability((n - m, 0, m), k) - ref))
                worst_sim = max(worst_sim, abs(marked_probability(state, oracle.marked) - ref))
                state = grover_iteration(state, mask)
    ok = worst_analytic <= 1e-9 and worst_sim <= 1e-9
    acceptance(2, ok, f"{cases} (N, N_gamma) pairs, k <= 100: analytics err {worst_analytic:.1e}, "
                      f"statevector err {worst_sim:.1e} (tol 1e-9)")
    assert ok


def test_criterion_3_optimal_rotation_count(acceptance):
    worst = 0.0
    for counts in [(3, 0, 1), (60, 0, 4), (1020, 0, 4), (4032, 0, 64)]:
        eta = angles_from_counts(counts).eta
        worst = max(worst, abs(optimal_rotation_count(counts) - (math.pi / (2 * eta) - 0.5)))
    misses = []
    for counts in [t for t in TRIPLES if t[1] > 0]:
        k = round(optimal_rotation_count(counts))
        argmax = integer_bound_maximisers(counts, 50)
        if min(abs(k - a) for a in argmax) > 1:
            misses.append((counts, k, argmax))
    ok = worst <= 1e-9 and not misses
    acceptance(3, ok, f"N_beta=0 formula error {worst:.1e} (tol 1e-9); "
                      f"{len(misses)} of 4 N_beta>0 triples outside +-1 of the integer argmax")
    assert ok


def test_criterion_4_bound_ordering(acceptance):
    violations = checked = 0
    for counts in TRIPLES:
        first = integer_bound_maximisers(counts, 50)[0]
        for k in range(first + 1):
            s = simplified_lower_bound(counts, k)
            b = gamma_amplitude_lower_bound(counts, k)
            c = recurrence_state(counts, k).c.real
            checked += 1
            if not (s <= b + 1e-12 and b <= c + 1e-12):
                violations += 1
    acceptance(4, violations == 0, f"{violations} violations in {checked} (triple, k) checks")
    assert violations == 0


def test_criterion_5_error_rate_scaling(acceptance):
    t0 = time.perf_counter()
    nbs = [1, 2, 4, 8, 16]
    fail = []
    for nb in nbs:
        counts = (4096 - 64 - nb, nb, 64)
        k = integer_bound_maximisers(counts, 50)[0]
        fail.append(1 - gamma_amplitude_lower_bound(counts, k) ** 2)
    slope, _ = fit_power_law(nbs, fail)
    elapsed = time.perf_counter() - t0
    ok = abs(slope - 0.5) <= 0.1 and elapsed < 10
    acceptance(5, ok, f"log-log slope {slope:.3f} (target 0.5 +- 0.1), {elapsed:.2f}s (< 10s)")
    assert ok


def test_criterion_6_perturbation_bound(acceptance):
    t0 = time.perf_counter()
    oracle = OracleSpec(1024, np.arange(16))
    worst_ratio, total = 0.0, 0
    all_below = True
    for seed, (r, L, eps) in enumerate([(1, 2, 0.01), (2, 3, 0.001), (5, 5, 0.0005)]):
        d = perturbation_experiment(GbsConfig(0.0, r, L), oracle, eps, 100, seed=seed)
        bound = perturbation_bound(r, L, eps)
        all_below &= bool(np.all(d < bound))
        worst_ratio = max(worst_ratio, float(d.max() / bound))
        total += d.size
    elapsed = time.perf_counter() - t0
    ok = all_below and elapsed < 30
    acceptance(6, ok, f"{total} trials, largest norm/bound {worst_ratio:.3f} (< 1), {elapsed:.2f}s (< 30s)")
    assert ok


def test_criterion_7_end_to_end_hopper(acceptance):
    t0 = time.perf_counter()
    basins = [2, 4, 8, 16]
    stats = {"qbh": [], "multistart": []}
    success = []
    for B in basins:
        spec = egg_crate(B)
        cfg = DescentConfig("gd", spec.default_step(), 40)
        problem = make_problem(spec, cfg, DomainGrid(spec.domain, (64, 64)))
        for alg in stats:
            s = summarize([r for _, r in run_trials(problem, alg, 200, 7)])
            stats[alg].append(s["mean_queries_to_global"])
            if alg == "qbh":
                success.append(s["success_rate"])
    q_exp, _ = fit_power_law(basins, stats["qbh"])
    m_exp, _ = fit_power_law(basins, stats["multistart"])
    elapsed = time.perf_counter() - t0
    ok = min(success) >= 0.95 and abs(q_exp - 0.5) <= 0.15 and abs(m_exp - 1.0) <= 0.2 and elapsed < 600
    acceptance(7, ok, f"success min {min(success):.3f} (>= 0.95); exponent hopper {q_exp:.3f} (0.5 +- 0.15), "
                      f"multistart {m_exp:.3f} (1.0 +- 0.2); mean queries to global basin; {elapsed:.1f}s")
    assert ok


def _mixture_case(n_alpha, n_beta, n_gamma, q, seed):
    oracle = OracleSpec(n_alpha + n_beta + n_gamma, np.arange(n_gamma),
                        np.arange(n_gamma, n_gamma + n_beta), q)
    return oracle, (n_alpha, n_beta, n_gamma), seed


def test_criterion_8_stochastic_oracle(acceptance):
    t0 = time.perf_counter()
    rng = np.random.default_rng(8)
    cases = [
        _mixture_case(4024, 8, 64, np.full(8, 0.5), 1),
        _mixture_case(4024, 8, 64, rng.random(8), 2),
        _mixture_case(1000, 2, 16, rng.random(2), 3),
        _mixture_case(60, 1, 8, np.array([0.9]), 4),
    ]
    # one partition from the region classifier itself
    spec = egg_crate(16)
    problem = make_problem(spec, DescentConfig("gd", spec.default_step(), 40), DomainGrid(spec.domain, (64, 64)),
                           delta=1.0, err_samples=32, seed=0, mode="stochastic")
    oracle = problem.oracle(-0.02)
    counts = (problem.n_points - oracle.marked.size - oracle.flaky.size, oracle.flaky.size, oracle.marked.size)
    cases.append((oracle, counts, 5))
    worst_margin, lines = math.inf, []
    for oracle, counts, seed in cases:
        assert counts[1] / counts[2] <= 1 / 8
        k = integer_bound_maximisers(counts, 50)[0]
        target = gamma_amplitude_lower_bound(counts, k) ** 2
        idx = sample_gbs(GbsConfig(0.0, k, 1, "stochastic"), oracle, 2000, seed=seed)
        p = float(np.isin(idx, oracle.marked).mean())
        se = math.sqrt(p * (1 - p) / 2000)
        worst_margin = min(worst_margin, (p - (target - 3 * se)))
        lines.append(f"{counts}: {p:.3f} vs {target:.3f}")
    elapsed = time.perf_counter() - t0
    ok = worst_margin >= 0 and elapsed < 300
    acceptance(8, ok, f"simulated vs bound^2 -- {'; '.join(lines)}; {elapsed:.1f}s")
    assert ok


RERUNS = [
    ["angles", "--na", "60", "--nb", "2", "--ng", "2"],
    ["sweep", "--na", "4,60,1000", "--nb", "2", "--ng", "2,16", "--kmax", "50"],
    ["regions", "--objective", "eggcrate", "--basins", "4", "--points", "32", "--Y", "-0.02", "--delta", "0.5"],
    ["grover", "--shots", "2000", "--seed", "4"],
    ["perturb", "--r", "2", "--L", "3", "--eps", "0.001", "--trials", "100"],
    ["hop", "--objective", "eggcrate", "--basins", "8", "--trials", "50", "--seed", "7"],
    ["bench", "--basins", "2,4,8", "--trials", "20", "--seed", "1"],
]


def _run(argv):
    return cli.main(argv, stdout=io.StringIO(), env={})


def test_criterion_9_reproducibility(acceptance, tmp_path):
    mismatched = []
    for n, argv in enumerate(RERUNS):
        first, second = tmp_path / f"{n}.a", tmp_path / f"{n}.b"
        codes = (_run(argv + ["--out", str(first)]), _run([argv[0], "--config", str(first), "--out", str(second)]))
        same = codes == (0, 0) and first.read_bytes() == second.read_bytes()
        side_a, side_b = tmp_path / f"{n}.a.summary.json", tmp_path / f"{n}.b.summary.json"
        if side_a.exists():
            same &= side_b.exists() and side_a.read_bytes() == side_b.read_bytes()
        if not same:
            mismatched.append(argv[0])
    acceptance(9, not mismatched, f"{len(RERUNS) - len(mismatched)} of {len(RERUNS)} subcommands reproduce "
                                  f"byte-for-byte from their embedded config")
    assert not mismatched
