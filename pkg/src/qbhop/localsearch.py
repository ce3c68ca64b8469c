"""L-step local descent with injected gradient errors, and region classification."""
from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .objective import DomainGrid, ObjectiveSpec, OrdinateEncoding

POINT_STREAM = 0x5EED


@dataclass(frozen=True)
class DescentConfig:
    method: str = "gd"
    step: float = 0.05
    steps: int = 30
    line_search_trials: int = 10

    def __post_init__(self):
        if self.method not in ("gd", "cg"):
            raise ValueError(f"unknown descent method {self.method!r}; use 'gd' or 'cg'")
        if self.steps < 1:
            raise ValueError("descent needs at least one step")
        if not self.step > 0:
            raise ValueError("step size must be positive")


@dataclass(frozen=True)
class ErrorModel:
    small_radius: float = 0.0
    large_amplitude: float = 0.0
    rng_seed: int = 0

    def __post_init__(self):
        if self.small_radius < 0:
            raise ValueError("small-error radius must be non-negative")
        if not 0 <= self.large_amplitude < 1:
            raise ValueError("large-error amplitude must lie in [0, 1)")


def _check_errors(spec, cfg, errors, n_points):
    if errors is None:
        return None
    E = np.asarray(errors, dtype=float)
    if E.ndim == 2:
        E = E[None]
    if E.shape[1:] != (cfg.steps, spec.dim):
        raise ValueError(
            f"expected {cfg.steps} error vectors of dimension {spec.dim}, got shape {E.shape[1:]}"
        )
    if E.shape[0] != n_points:
        raise ValueError("one error sequence is needed per start point")
    return E


def _gd_paths(spec, cfg, X, E):
    path = [X]
    for k in range(cfg.steps):
        g = spec.gradient_batch(X)
        if E is not None:
            g = g + E[:, k, :]
        X = spec.domain.clamp(X - cfg.step * g)
        path.append(X)
    return path


def _cg_paths(spec, cfg, X, E):
    """Fletcher-Reeves with restarts every p steps and a capped backtracking search."""
    p = spec.dim
    path = [X]
    d = None
    g_prev_sq = None
    restart = np.ones(X.shape[0], dtype=bool)
    for k in range(cfg.steps):
        g = spec.gradient_batch(X)
        if E is not None:
            g = g + E[:, k, :]
        g_sq = np.sum(g * g, axis=1)
        if d is None:
            d = -g
        else:
            with np.errstate(divide="ignore", invalid="ignore"):
                beta = np.where(g_prev_sq > 0, g_sq / g_prev_sq, 0.0)
            beta[restart | (k % p == 0)] = 0.0
            d = -g + beta[:, None] * d
        slope = np.sum(g * d, axis=1)
        uphill = slope >= 0
        d[uphill] = -g[uphill]
        slope[uphill] = -g_sq[uphill]

        f0 = spec.evaluate_batch(X)
        alpha = np.full(X.shape[0], 4.0 * cfg.step)
        accepted = np.zeros(X.shape[0], dtype=bool)
        X_new = X.copy()
        for _ in range(cfg.line_search_trials):
            todo = ~accepted
            if not todo.any():
                break
            trial = spec.domain.clamp(X[todo] + alpha[todo, None] * d[todo])
            ok = spec.evaluate_batch(trial) <= f0[todo] + 1e-4 * alpha[todo] * slope[todo]
            idx = np.flatnonzero(todo)
            X_new[idx[ok]] = trial[ok]
            accepted[idx[ok]] = True
            alpha[idx[~ok]] *= 0.5
        restart = ~accepted
        X = X_new
        g_prev_sq = g_sq
        path.append(X)
    return path


def descend(spec: ObjectiveSpec, cfg: DescentConfig, x0, errors=None) -> np.ndarray:
    """Path x_0, ..., x_L of the local search from ``x0``.

    ``errors`` holds the L gradient-estimate errors u_1..u_L (shape (L, p));
    ``None`` means the deterministic search. Returns an (L+1, p) array.
    """
    x0 = np.asarray(x0, dtype=float)
    if x0.shape != (spec.dim,):
        raise ValueError(f"dimension mismatch: expected {spec.dim}, got shape {x0.shape}")
    E = _check_errors(spec, cfg, errors, 1)
    X = spec.domain.clamp(x0)[None, :]
    paths = _gd_paths(spec, cfg, X, E) if cfg.method == "gd" else _cg_paths(spec, cfg, X, E)
    return np.stack([P[0] for P in paths])


def descend_batch(spec: ObjectiveSpec, cfg: DescentConfig, X, errors=None, backend=None) -> np.ndarray:
    """Terminal points x_L for every row of X (errors shape (M, L, p) or None)."""
    X = spec.domain.clamp(np.atleast_2d(np.asarray(X, dtype=float)))
    E = _check_errors(spec, cfg, errors, X.shape[0])
    if cfg.method == "gd" and kernels.supports_fast_descent(spec):
        return kernels.descend_gd(spec, X, E, cfg.step, cfg.steps, backend=backend)
    if cfg.method == "gd":
        return _gd_paths(spec, cfg, X, E)[-1]
    return _cg_paths(spec, cfg, X, E)[-1]


def deterministic_terminus_value(spec, cfg, grid: DomainGrid, i: int) -> float:
    x = grid.index_to_point(i)
    return float(spec.evaluate_batch(descend_batch(spec, cfg, x[None, :]))[0])


def sample_ball(rng: np.random.Generator, shape, radius: float, dim: int) -> np.ndarray:
    """Uniform samples from the closed ball of given radius in R^dim."""
    shape = tuple(np.atleast_1d(shape))
    v = rng.standard_normal(shape + (dim,))
    norms = np.linalg.norm(v, axis=-1, keepdims=True)
    norms[norms == 0] = 1.0
    r = radius * rng.random(shape + (1,)) ** (1.0 / dim)
    return v / norms * r


@dataclass
class Landscape:
    """Deterministic descent outcome for every grid point.

    ``ordinates`` are the terminus values as held in the fixed-point ordinate
    register; the marking oracle and measurements use these.
    """

    spec: ObjectiveSpec
    cfg: DescentConfig
    grid: DomainGrid
    termini: np.ndarray
    values: np.ndarray
    ordinates: np.ndarray

    @property
    def n_points(self) -> int:
        return self.grid.total_points


def compute_landscape(spec, cfg, grid, encoding: OrdinateEncoding | None = None, backend=None) -> Landscape:
    encoding = encoding or OrdinateEncoding()
    termini = descend_batch(spec, cfg, grid.points(), backend=backend)
    values = spec.evaluate_batch(termini)
    return Landscape(spec, cfg, grid, termini, values, encoding.quantize(values))


@dataclass
class TerminalSamples:
    """Zero-error and perturbed terminal values for every grid point."""

    zero_error: np.ndarray            # (N,)
    sampled: np.ndarray               # (N, S)
    delta: float
    seed: int

    @property
    def n_samples(self) -> int:
        return self.sampled.shape[1]


def point_rng(seed: int, i: int) -> np.random.Generator:
    return np.random.default_rng([int(seed), POINT_STREAM, int(i)])


def point_error_samples(spec, cfg, seed, i, delta, n_samples) -> np.ndarray:
    """The (S, L, p) error vectors drawn for grid point ``i``."""
    return sample_ball(point_rng(seed, i), (n_samples, cfg.steps), delta, spec.dim)


def sample_terminal_values(spec, cfg, grid, delta, n_err_samples=32, seed=0,
                           landscape: Landscape | None = None, chunk=512, backend=None) -> TerminalSamples:
    if delta < 0:
        raise ValueError("error radius must be non-negative")
    if n_err_samples < 1:
        raise ValueError("need at least one error sample per point")
    if landscape is None:
        landscape = compute_landscape(spec, cfg, grid, backend=backend)
    N, S = grid.total_points, int(n_err_samples)
    points = grid.points()
    sampled = np.empty((N, S))
    for start in range(0, N, chunk):
        idx = np.arange(start, min(start + chunk, N))
        E = np.concatenate([point_error_samples(spec, cfg, seed, i, delta, S) for i in idx])
        X = np.repeat(points[idx], S, axis=0)
        T = descend_batch(spec, cfg, X, E, backend=backend)
        sampled[idx] = spec.evaluate_batch(T).reshape(len(idx), S)
    return TerminalSamples(landscape.values.copy(), sampled, float(delta), int(seed))


@dataclass
class RegionPartition:
    """S_alpha (unmarked), S_beta (entangling), S_gamma (marked) index sets.

    ``beta_fraction`` is, per beta index, the fraction of error samples whose
    terminal value fell below Y; ``beta_zero_below`` records whether the
    zero-error terminus did.
    """

    alpha_indices: np.ndarray
    beta_indices: np.ndarray
    gamma_indices: np.ndarray
    beta_fraction: np.ndarray = field(default_factory=lambda: np.zeros(0))
    beta_zero_below: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=bool))
    Y: float = float("nan")

    @property
    def n_alpha(self) -> int:
        return int(self.alpha_indices.size)

    @property
    def n_beta(self) -> int:
        return int(self.beta_indices.size)

    @property
    def n_gamma(self) -> int:
        return int(self.gamma_indices.size)

    @property
    def n_total(self) -> int:
        return self.n_alpha + self.n_beta + self.n_gamma

    def to_dict(self, include_all=False) -> dict:
        out = {
            "n_alpha": self.n_alpha,
            "n_beta": self.n_beta,
            "n_gamma": self.n_gamma,
            "beta_indices": [int(i) for i in self.beta_indices],
        }
        if include_all:
            out["alpha_indices"] = [int(i) for i in self.alpha_indices]
            out["gamma_indices"] = [int(i) for i in self.gamma_indices]
        return out

    def to_json(self, include_all=False) -> str:
        return json.dumps(self.to_dict(include_all), sort_keys=True)

    @classmethod
    def from_dict(cls, data: dict, n_total: int | None = None) -> "RegionPartition":
        beta = np.array(data.get("beta_indices", []), dtype=np.int64)
        if "alpha_indices" in data and "gamma_indices" in data:
            alpha = np.array(data["alpha_indices"], dtype=np.int64)
            gamma = np.array(data["gamma_indices"], dtype=np.int64)
        else:
            raise ValueError("partition JSON lacks alpha/gamma index lists")
        if n_total is not None and alpha.size + beta.size + gamma.size != n_total:
            raise ValueError("partition does not cover the grid")
        return cls(alpha, beta, gamma, np.zeros(beta.size), np.zeros(beta.size, dtype=bool))


def partition_from_samples(samples: TerminalSamples, Y: float) -> RegionPartition:
    """Threshold sampled terminal values at Y.

    All values >= Y gives alpha, all < Y gives gamma; mixed outcomes, or any
    value exactly equal to Y, give beta.
    """
    values = np.concatenate([samples.zero_error[:, None], samples.sampled], axis=1)
    below = values < Y
    tie = np.any(values == Y, axis=1)
    all_below = below.all(axis=1) & ~tie
    none_below = (~below).all(axis=1) & ~tie
    beta = ~(all_below | none_below)
    beta_idx = np.flatnonzero(beta)
    return RegionPartition(
        alpha_indices=np.flatnonzero(none_below),
        beta_indices=beta_idx,
        gamma_indices=np.flatnonzero(all_below),
        beta_fraction=(samples.sampled[beta_idx] < Y).mean(axis=1),
        beta_zero_below=samples.zero_error[beta_idx] < Y,
        Y=float(Y),
    )


def partition_from_values(values: np.ndarray, Y: float) -> RegionPartition:
    """The delta = 0 partition of a set of deterministic terminal values."""
    samples = TerminalSamples(np.asarray(values), np.asarray(values)[:, None], 0.0, 0)
    return partition_from_samples(samples, Y)


def classify_regions(spec, cfg, grid, Y, delta, n_err_samples=32, seed=0, backend=None) -> RegionPartition:
    samples = sample_terminal_values(spec, cfg, grid, delta, n_err_samples, seed, backend=backend)
    return partition_from_samples(samples, Y)
