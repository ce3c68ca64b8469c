"""Classical outer loops: the quantum basin hopper and two baselines.

Query accounting charges one unit per local-search step (one gradient
estimate): a GBS call with r rotations costs (2r + 1) L, a classical
multistart descent costs L, and a pure-random-search sample costs 1.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .localsearch import (
    DescentConfig, Landscape, TerminalSamples, compute_landscape, partition_from_samples,
    sample_terminal_values,
)
from .objective import DomainGrid, ObjectiveSpec, OrdinateEncoding
from .simulator import GbsConfig, build_oracle, oracle_from_values, run_gbs

HOP_STREAM, MULTISTART_STREAM, PRS_STREAM = 101, 202, 303
ALGORITHMS = ("qbh", "multistart", "random")


@dataclass(frozen=True)
class HopperConfig:
    lam: float = 8.0 / 7.0
    max_m: float | None = None          # None means sqrt(N)
    seed: int = 0
    max_outer_iters: int = 1000
    max_starts: int = 100_000

    def __post_init__(self):
        if not self.lam > 1:
            raise ValueError("growth factor lambda must exceed 1")
        if self.max_m is not None and self.max_m < 1:
            raise ValueError("rotation cap M must be at least 1")


@dataclass
class RunRecord:
    algorithm: str
    queries: int = 0
    best_trace: list = field(default_factory=list)
    found_global: bool = False
    candidates: list = field(default_factory=list)
    queries_to_global: int | None = None
    final_y: float = math.inf
    outer_iterations: int = 0


@dataclass
class BasinProblem:
    """A gridded objective with its descent landscape and known global basin."""

    landscape: Landscape
    global_minimizer: np.ndarray
    in_global_basin: np.ndarray
    grid_values: np.ndarray
    samples: TerminalSamples | None = None
    mode: str = "deterministic"

    @property
    def n_points(self) -> int:
        return self.landscape.n_points

    @property
    def descent_steps(self) -> int:
        return self.landscape.cfg.steps

    def oracle(self, Y: float):
        if self.samples is None:
            return oracle_from_values(self.landscape.ordinates, Y)
        return build_oracle(partition_from_samples(self.samples, Y), self.mode)

    def random_search_target(self) -> np.ndarray:
        """Grid points below every non-global local minimum value."""
        others = self.landscape.ordinates[~self.in_global_basin]
        level = others.min() if others.size else math.inf
        return self.grid_values < level


def make_problem(spec: ObjectiveSpec, cfg: DescentConfig, grid: DomainGrid, delta: float = 0.0,
                 err_samples: int = 32, seed: int = 0, mode: str = "deterministic",
                 encoding: OrdinateEncoding | None = None, backend=None) -> BasinProblem:
    encoding = encoding or OrdinateEncoding()
    landscape = compute_landscape(spec, cfg, grid, encoding, backend=backend)
    xstar = spec.global_minimizer()
    in_global = np.all(np.abs(landscape.termini - xstar) <= grid.spacing + 1e-12, axis=1)
    samples = None
    if delta > 0:
        raw = sample_terminal_values(spec, cfg, grid, delta, err_samples, seed,
                                     landscape=landscape, backend=backend)
        samples = TerminalSamples(landscape.ordinates.copy(), encoding.quantize(raw.sampled),
                                  raw.delta, raw.seed)
    return BasinProblem(landscape, xstar, in_global, spec.evaluate_batch(grid.points()), samples, mode)


def draw_rotation(rng: np.random.Generator, m: float) -> int:
    """Uniform integer from {0, ..., ceil(m - 1)}."""
    return int(rng.integers(0, math.ceil(m - 1) + 1))


def gbs_cost(rotations: int, descent_steps: int) -> int:
    return (2 * rotations + 1) * descent_steps


def quantum_basin_hop(problem: BasinProblem, cfg: HopperConfig) -> RunRecord:
    rng = np.random.default_rng([cfg.seed, HOP_STREAM])
    L = problem.descent_steps
    max_m = cfg.max_m if cfg.max_m is not None else math.sqrt(problem.n_points)
    land = problem.landscape
    rec = RunRecord("qbh")

    # the start value is taken at the descended point x_cand, not at x
    i = int(rng.integers(problem.n_points))
    rec.queries = L
    x_cand, y_cand = land.termini[i].copy(), float(land.ordinates[i])
    rec.candidates.append((x_cand, y_cand))
    rec.best_trace.append((rec.queries, y_cand))
    best_global = bool(problem.in_global_basin[i])
    if best_global:
        rec.queries_to_global = rec.queries

    while True:
        Y = y_cand
        rec.outer_iterations += 1
        m = 1.0
        oracle = problem.oracle(Y)
        while True:
            r = draw_rotation(rng, m)
            meas = run_gbs(GbsConfig(Y, r, L, problem.mode), oracle, land, rng)
            rec.queries += gbs_cost(r, L)
            x_cand, y_cand = meas.x, meas.y
            rec.candidates.append((x_cand, y_cand))
            if y_cand < Y and problem.in_global_basin[meas.index]:
                best_global = True
                if rec.queries_to_global is None:
                    rec.queries_to_global = rec.queries
            m *= cfg.lam
            if y_cand < Y or m > max_m:
                break
        if y_cand >= Y:
            break
        rec.best_trace.append((rec.queries, y_cand))
        if rec.outer_iterations >= cfg.max_outer_iters:
            Y = y_cand
            break

    rec.final_y = Y
    rec.found_global = best_global
    return rec


def multistart_baseline(problem: BasinProblem, cfg: HopperConfig) -> RunRecord:
    rng = np.random.default_rng([cfg.seed, MULTISTART_STREAM])
    L = problem.descent_steps
    land = problem.landscape
    rec = RunRecord("multistart")
    for _ in range(cfg.max_starts):
        i = int(rng.integers(problem.n_points))
        rec.queries += L
        y = float(land.ordinates[i])
        rec.candidates.append((land.termini[i].copy(), y))
        if y < rec.final_y:
            rec.final_y = y
            rec.best_trace.append((rec.queries, y))
        if problem.in_global_basin[i]:
            rec.found_global = True
            rec.queries_to_global = rec.queries
            break
    rec.outer_iterations = len(rec.candidates)
    return rec


def pure_random_search_baseline(problem: BasinProblem, cfg: HopperConfig, target=None, chunk: int = 1024) -> RunRecord:
    rng = np.random.default_rng([cfg.seed, PRS_STREAM])
    target = problem.random_search_target() if target is None else np.asarray(target, dtype=bool)
    points = problem.landscape.grid.points()
    rec = RunRecord("random")
    drawn = 0
    while drawn < cfg.max_starts:
        idx = rng.integers(problem.n_points, size=min(chunk, cfg.max_starts - drawn))
        hits = np.flatnonzero(target[idx])
        if hits.size:
            idx = idx[: hits[0] + 1]
        y = problem.grid_values[idx]
        running = np.minimum.accumulate(y)
        improved = np.flatnonzero(running < np.concatenate([[rec.final_y], running[:-1]]))
        for j in improved:
            rec.best_trace.append((drawn + j + 1, float(y[j])))
        rec.final_y = min(rec.final_y, float(running[-1]))
        rec.candidates.extend((points[i], float(v)) for i, v in zip(idx, y))
        drawn += idx.size
        if hits.size:
            rec.found_global = True
            rec.queries_to_global = drawn
            break
    rec.queries = drawn
    rec.outer_iterations = len(rec.candidates)
    return rec


RUNNERS = {
    "qbh": quantum_basin_hop,
    "multistart": multistart_baseline,
    "random": pure_random_search_baseline,
}


def trial_seed(root_seed: int, trial: int) -> int:
    return int(np.random.SeedSequence([int(root_seed), int(trial)]).generate_state(1)[0])


def run_trials(problem: BasinProblem, algorithm: str, trials: int, root_seed: int,
               cfg: HopperConfig | None = None) -> list[tuple[int, RunRecord]]:
    cfg = cfg or HopperConfig()
    runner = RUNNERS[algorithm]
    out = []
    for t in range(trials):
        seed = trial_seed(root_seed, t)
        out.append((seed, runner(problem, _with_seed(cfg, seed))))
    return out


def _with_seed(cfg: HopperConfig, seed: int) -> HopperConfig:
    return HopperConfig(cfg.lam, cfg.max_m, seed, cfg.max_outer_iters, cfg.max_starts)


def fit_power_law(x, y) -> tuple[float, float]:
    """Least-squares fit of log y = exponent * log x + log prefactor."""
    slope, intercept = np.polyfit(np.log(np.asarray(x, float)), np.log(np.asarray(y, float)), 1)
    return float(slope), float(math.exp(intercept))


def summarize(records: list[RunRecord]) -> dict:
    hits = [r.queries_to_global for r in records if r.queries_to_global is not None]
    return {
        "trials": len(records),
        "success_rate": sum(r.found_global for r in records) / max(len(records), 1),
        "median_queries": float(np.median([r.queries for r in records])) if records else math.nan,
        "mean_queries": float(np.mean([r.queries for r in records])) if records else math.nan,
        "median_queries_to_global": float(np.median(hits)) if hits else math.nan,
        "mean_queries_to_global": float(np.mean(hits)) if hits else math.nan,
    }
