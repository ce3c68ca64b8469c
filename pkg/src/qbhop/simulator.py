"""Exact statevector simulation of the Grover-based search GBS(Y, r, L).

Only the x0 register is simulated.  The descent steps act as a basis-state
permutation on the other registers and are uncomputed inside each Grover
iteration, so on x0 one iteration is a sign flip on marked indices followed
by the reflection 2|s><s| - I.  Entangling (beta) points are handled as a
classical mixture: each run draws whether every flaky point is marked.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .localsearch import Landscape, RegionPartition

MODES = ("deterministic", "stochastic")


@dataclass
class OracleSpec:
    n_points: int
    marked: np.ndarray
    flaky: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=np.int64))
    flaky_prob: np.ndarray = field(default_factory=lambda: np.zeros(0))

    def __post_init__(self):
        self.marked = np.asarray(self.marked, dtype=np.int64)
        self.flaky = np.asarray(self.flaky, dtype=np.int64)
        self.flaky_prob = np.asarray(self.flaky_prob, dtype=float)
        if np.intersect1d(self.marked, self.flaky).size:
            raise ValueError("an index cannot be both marked and flaky")
        if self.flaky.size != self.flaky_prob.size:
            raise ValueError("one marking probability is needed per flaky index")

    def mask(self, rng: np.random.Generator | None = None) -> np.ndarray:
        """Boolean marking for one run; flaky points are drawn when rng is given."""
        m = np.zeros(self.n_points, dtype=bool)
        m[self.marked] = True
        if self.flaky.size and rng is not None:
            m[self.flaky[rng.random(self.flaky.size) < self.flaky_prob]] = True
        return m


@dataclass(frozen=True)
class GbsConfig:
    Y: float
    rotations: int
    descent_steps: int = 1
    mode: str = "deterministic"

    def __post_init__(self):
        if self.rotations < 0:
            raise ValueError("rotation count must be non-negative")
        if self.mode not in MODES:
            raise ValueError(f"unknown oracle mode {self.mode!r}")


def build_oracle(partition: RegionPartition, mode: str = "deterministic") -> OracleSpec:
    n = partition.n_total
    if mode == "deterministic":
        folded = partition.beta_indices[partition.beta_zero_below]
        return OracleSpec(n, np.sort(np.concatenate([partition.gamma_indices, folded])))
    if mode == "stochastic":
        return OracleSpec(n, partition.gamma_indices, partition.beta_indices, partition.beta_fraction)
    raise ValueError(f"unknown oracle mode {mode!r}")


def oracle_from_values(values: np.ndarray, Y: float) -> OracleSpec:
    """Deterministic oracle marking every index whose terminus value is below Y."""
    return OracleSpec(len(values), np.flatnonzero(np.asarray(values) < Y))


def uniform_state(n: int) -> np.ndarray:
    return np.full(n, 1.0 / math.sqrt(n), dtype=complex)


def apply_phase(state: np.ndarray, mask: np.ndarray) -> np.ndarray:
    out = state.copy()
    out[mask] *= -1.0
    return out


def apply_diffusion(state: np.ndarray) -> np.ndarray:
    return 2.0 * state.mean() - state


def grover_iteration(state: np.ndarray, oracle, rng=None, backend=None) -> np.ndarray:
    """One Grover iteration; ``oracle`` is an OracleSpec or a boolean mask."""
    mask = oracle if isinstance(oracle, np.ndarray) else oracle.mask(rng)
    out = np.array(state, dtype=complex, copy=True)
    kernels.grover_iterate(out, mask, 1, backend=backend)
    return out


def evolve(oracle, rotations: int, rng=None, backend=None) -> np.ndarray:
    """State after ``rotations`` iterations from |s>, with one oracle realisation."""
    mask = oracle if isinstance(oracle, np.ndarray) else oracle.mask(rng)
    state = uniform_state(mask.size)
    kernels.grover_iterate(state, mask, rotations, backend=backend)
    return state


def _as_rng(seed) -> np.random.Generator:
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.default_rng(seed)


def sample_index(state: np.ndarray, rng: np.random.Generator) -> int:
    p = np.abs(state) ** 2
    cdf = np.cumsum(p)
    return int(min(np.searchsorted(cdf, rng.random() * cdf[-1], side="right"), state.size - 1))


@dataclass(frozen=True)
class Measurement:
    index: int
    x: np.ndarray
    y: float


def run_gbs(cfg: GbsConfig, oracle: OracleSpec, landscape: Landscape, seed=None, backend=None) -> Measurement:
    """Apply ``cfg.rotations`` iterations from |s>, measure, return terminus and value."""
    rng = _as_rng(seed)
    mask = oracle.mask(rng if cfg.mode == "stochastic" else None)
    state = evolve(mask, cfg.rotations, backend=backend)
    i = sample_index(state, rng)
    return Measurement(i, landscape.termini[i].copy(), float(landscape.ordinates[i]))


def sample_gbs(cfg: GbsConfig, oracle: OracleSpec, shots: int, seed=None, backend=None) -> np.ndarray:
    """Measured x0 indices of ``shots`` independent GBS runs."""
    rng = _as_rng(seed)
    out = np.empty(shots, dtype=np.int64)
    if cfg.mode == "deterministic":
        state = evolve(oracle.mask(), cfg.rotations, backend=backend)
        for t in range(shots):
            out[t] = sample_index(state, rng)
        return out
    for t in range(shots):
        state = evolve(oracle.mask(rng), cfg.rotations, backend=backend)
        out[t] = sample_index(state, rng)
    return out


def _random_deviation(state, chord, rng):
    """A unit state at distance ``chord`` from ``state``, in a random direction."""
    xi = rng.standard_normal(state.size) + 1j * rng.standard_normal(state.size)
    xi -= np.vdot(state, xi) * state
    xi /= np.linalg.norm(xi)
    angle = 2.0 * math.asin(min(1.0, chord / 2.0))
    return math.cos(angle) * state + math.sin(angle) * xi


def perturbed_final_state(rotations, descent_steps, mask, eps, rng):
    """Final state when each of the (2r+1)L gradient estimates deviates by < eps."""
    state = uniform_state(mask.size)

    def kick(s):
        for _ in range(descent_steps):
            if eps > 0:
                s = _random_deviation(s, eps * rng.uniform(0.5, 1.0), rng)
        return s

    for _ in range(rotations):
        state = kick(state)                 # forward descent
        state = apply_phase(state, mask)
        state = kick(state)                 # uncompute
        state = apply_diffusion(state)
    return kick(state)                      # final descent before measurement


def perturbation_experiment(cfg: GbsConfig, oracle: OracleSpec, eps: float, trials: int, seed=None) -> np.ndarray:
    """Distances between nominal and perturbed pre-measurement states, per trial."""
    if not 0 <= eps < 1:
        raise ValueError("eps must lie in [0, 1)")
    rng = _as_rng(seed)
    mask = oracle.mask()
    nominal = perturbed_final_state(cfg.rotations, cfg.descent_steps, mask, 0.0, rng)
    out = np.empty(trials)
    for t in range(trials):
        phi = perturbed_final_state(cfg.rotations, cfg.descent_steps, mask, eps, rng)
        out[t] = np.linalg.norm(phi - nominal)
    return out


def perturbation_bound(rotations: int, descent_steps: int, eps: float) -> float:
    return (2 * rotations + 1) * descent_steps * eps


def marked_probability(state: np.ndarray, indices) -> float:
    return float(np.sum(np.abs(state[np.asarray(indices, dtype=np.int64)]) ** 2))
