import math

import numpy as np
import pytest
from scipy import stats

from qbhop.hopper import (
    HopperConfig, draw_rotation, fit_power_law, gbs_cost, make_problem, multistart_baseline,
    pure_random_search_baseline, quantum_basin_hop, run_trials, summarize, trial_seed,
)
from qbhop.localsearch import DescentConfig
from qbhop.objective import DomainGrid, double_well, egg_crate, quadratic_bowl


@pytest.fixture(scope="module")
def bowl():
    q = quadratic_bowl(1)
    return make_problem(q, DescentConfig("gd", 0.25, 30), DomainGrid(q.domain, (64,)))


@pytest.fixture(scope="module")
def tilted_well():
    dw = double_well(1, tilt=0.3)
    return make_problem(dw, DescentConfig("gd", 0.05, 30), DomainGrid(dw.domain, (64,)))


@pytest.fixture(scope="module")
def crate4():
    spec = egg_crate(4)
    return make_problem(spec, DescentConfig("gd", spec.default_step(), 40), DomainGrid(spec.domain, (64, 64)))


def test_config_validation():
    with pytest.raises(ValueError):
        HopperConfig(lam=1.0)
    with pytest.raises(ValueError):
        HopperConfig(max_m=0.5)


def test_single_basin_one_phase(bowl):
    for seed in range(10):
        rec = quantum_basin_hop(bowl, HopperConfig(seed=seed))
        assert rec.found_global
        assert rec.outer_iterations == 1
        assert len(rec.best_trace) == 1


def test_tilted_double_well_success(tilted_well):
    records = [r for _, r in run_trials(tilted_well, "qbh", 200, 0)]
    assert np.mean([r.found_global for r in records]) >= 0.95


def test_accepted_values_decrease_and_exit_is_correct(crate4):
    for seed in range(30):
        rec = quantum_basin_hop(crate4, HopperConfig(seed=seed))
        ys = [y for _, y in rec.best_trace]
        assert all(b < a for a, b in zip(ys, ys[1:]))
        # every candidate below the final threshold would have been accepted
        assert rec.final_y == min(y for _, y in rec.candidates)
        assert rec.queries % crate4.descent_steps == 0
        if rec.queries_to_global is not None:
            assert rec.queries_to_global <= rec.queries


def test_runs_are_reproducible(crate4):
    a = quantum_basin_hop(crate4, HopperConfig(seed=42))
    b = quantum_basin_hop(crate4, HopperConfig(seed=42))
    assert a.queries == b.queries and a.best_trace == b.best_trace
    assert [y for _, y in a.candidates] == [y for _, y in b.candidates]


def test_outer_iteration_cap(crate4):
    rec = quantum_basin_hop(crate4, HopperConfig(seed=1, max_outer_iters=1))
    assert rec.outer_iterations == 1


def test_rotation_draw_uniform():
    rng = np.random.default_rng(0)
    draws = np.array([draw_rotation(rng, 3.5) for _ in range(10_000)])
    assert set(np.unique(draws)) == {0, 1, 2, 3}
    assert stats.chisquare(np.bincount(draws)).pvalue > 0.01
    assert {draw_rotation(rng, 1.0) for _ in range(50)} == {0}


def test_gbs_cost():
    assert gbs_cost(0, 40) == 40
    assert gbs_cost(3, 5) == 35


def test_multistart_single_basin(bowl):
    rec = multistart_baseline(bowl, HopperConfig(seed=3))
    assert len(rec.candidates) == 1 and rec.queries == bowl.descent_steps


def test_multistart_geometric_mean(crate4):
    recs = [r for _, r in run_trials(crate4, "multistart", 1000, 5)]
    starts = np.mean([len(r.candidates) for r in recs])
    assert starts == pytest.approx(4.0, rel=0.10)


def test_random_search_whole_grid(bowl):
    rec = pure_random_search_baseline(bowl, HopperConfig(seed=0), target=np.ones(64, bool))
    assert rec.queries == 1 and rec.found_global


def test_random_search_geometric_mean(bowl):
    target = np.zeros(64, bool)
    target[17] = True
    recs = [pure_random_search_baseline(bowl, HopperConfig(seed=trial_seed(2, t)), target) for t in range(1000)]
    assert np.mean([r.queries for r in recs]) == pytest.approx(64, rel=0.15)


def test_random_search_falls_behind_grover():
    ratios = []
    for n in (256, 1024, 4096):
        q = quadratic_bowl(1)
        problem = make_problem(q, DescentConfig("gd", 0.25, 1), DomainGrid(q.domain, (n,)))
        target = np.zeros(n, bool)
        target[n // 3] = True
        prs = np.mean([pure_random_search_baseline(problem, HopperConfig(seed=trial_seed(n, t)), target).queries
                       for t in range(300)])
        ratios.append(prs / (math.pi / 4 * math.sqrt(n)))
    assert ratios[0] < ratios[1] < ratios[2]


def test_random_search_default_target(crate4):
    target = crate4.random_search_target()
    assert target.any() and not target.all()
    rec = pure_random_search_baseline(crate4, HopperConfig(seed=0))
    assert rec.found_global and target.sum() > 0


def test_fit_power_law_exact():
    x = np.array([2, 4, 8, 16])
    exponent, prefactor = fit_power_law(x, 3.0 * x**0.5)
    assert exponent == pytest.approx(0.5) and prefactor == pytest.approx(3.0)


def test_summarize():
    recs = [r for _, r in run_trials(egg_problem_small(), "qbh", 20, 0)]
    s = summarize(recs)
    assert s["trials"] == 20 and 0 <= s["success_rate"] <= 1
    assert s["mean_queries"] >= s["mean_queries_to_global"] or math.isnan(s["mean_queries_to_global"])


def egg_problem_small():
    spec = egg_crate(2)
    return make_problem(spec, DescentConfig("gd", spec.default_step(), 40), DomainGrid(spec.domain, (16, 16)))


def test_trial_seeds_distinct():
    seeds = {trial_seed(7, t) for t in range(1000)}
    assert len(seeds) == 1000


def test_stochastic_problem_runs():
    spec = egg_crate(4)
    problem = make_problem(spec, DescentConfig("gd", spec.default_step(), 40), DomainGrid(spec.domain, (32, 32)),
                           delta=0.3, err_samples=8, seed=1, mode="stochastic")
    rec = quantum_basin_hop(problem, HopperConfig(seed=2))
    assert rec.queries > 0
