"""Closed-form Grover dynamics over marked, unmarked and entangling regions.

The tracked space is spanned by |alpha>, |gamma> and the family
|beta_j> = G^j |beta>, which is modelled as orthonormal to everything else
(worst-case decoherence).  Under that model G is an isometry and
``recurrence_state`` iterates it exactly; ``closed_form_state`` evaluates the
analytic expansion, so the two can be checked against each other.

The decay modulus sqrt((N_a - N_b + N_g)/N) is called ``decay`` here so it is
not confused with the rotation count.
"""
from __future__ import annotations

import cmath
import math
from dataclasses import dataclass

import numpy as np


class OutOfRegimeError(ValueError):
    """Counts for which the closed-form angles are not real or not defined."""


@dataclass(frozen=True)
class RegionCounts:
    n_alpha: int
    n_beta: int
    n_gamma: int

    def __post_init__(self):
        if min(self.n_alpha, self.n_beta, self.n_gamma) < 0:
            raise ValueError("region counts must be non-negative")
        if self.n_total < 1:
            raise ValueError("need at least one grid point")

    @property
    def n_total(self) -> int:
        return self.n_alpha + self.n_beta + self.n_gamma

    @classmethod
    def of(cls, partition) -> "RegionCounts":
        return cls(partition.n_alpha, partition.n_beta, partition.n_gamma)


@dataclass(frozen=True)
class GroverAngles:
    theta: float
    eta: float
    zeta: float
    decay: float
    rho: float
    phi: float


@dataclass
class SubspaceState:
    """Coefficients on |alpha>, |gamma> and |beta_0>, |beta_1>, ..."""

    a: complex
    c: complex
    b: np.ndarray

    @property
    def norm(self) -> float:
        return math.sqrt(abs(self.a) ** 2 + abs(self.c) ** 2 + float(np.sum(np.abs(self.b) ** 2)))

    @property
    def success_probability(self) -> float:
        return abs(self.c) ** 2


def _as_counts(counts) -> RegionCounts:
    if isinstance(counts, RegionCounts):
        return counts
    return RegionCounts(*(int(v) for v in counts))


def check_regime(counts) -> RegionCounts:
    """Raise OutOfRegimeError naming the first violated precondition."""
    c = _as_counts(counts)
    na, nb, ng = c.n_alpha, c.n_beta, c.n_gamma
    if na <= 0:
        raise OutOfRegimeError("n_alpha must be positive")
    if ng <= 0:
        raise OutOfRegimeError("n_gamma must be positive")
    if nb * nb >= 4 * na * ng:
        raise OutOfRegimeError(
            f"n_beta^2 = {nb * nb} must be below 4 n_alpha n_gamma = {4 * na * ng}"
        )
    return c


def angles_from_counts(counts) -> GroverAngles:
    c = check_regime(counts)
    na, nb, ng, n = c.n_alpha, c.n_beta, c.n_gamma, c.n_total
    theta = math.acos(math.sqrt(nb * nb / (4.0 * na * ng)))
    # signed cosine, so eta leaves [0, pi/2] only when n_gamma > n_alpha
    cos_eta = (na - ng) / math.sqrt((na + ng) ** 2 - nb * nb)
    eta = math.acos(max(-1.0, min(1.0, cos_eta)))
    cos_zeta = (na + nb / 2.0) / math.sqrt(n * na)
    zeta = math.acos(max(-1.0, min(1.0, cos_zeta)))
    decay = math.sqrt((na - nb + ng) / n)
    w = complex(eta, -math.log(decay)) / (1.0 - decay * cmath.exp(1j * eta))
    return GroverAngles(theta, eta, zeta, decay, abs(w), cmath.phase(w))


def initial_state(counts) -> SubspaceState:
    c = _as_counts(counts)
    n = c.n_total
    return SubspaceState(
        complex(math.sqrt(c.n_alpha / n)),
        complex(math.sqrt(c.n_gamma / n)),
        np.array([math.sqrt(c.n_beta / n)], dtype=complex),
    )


def recurrence_state(counts, k: int) -> SubspaceState:
    """Apply G k times to the uniform start state by direct iteration."""
    c = _as_counts(counts)
    if k < 0:
        raise ValueError("rotation count must be non-negative")
    na, nb, ng, n = c.n_alpha, c.n_beta, c.n_gamma, c.n_total
    saa = (na - nb - ng) / n
    sga = 2.0 * math.sqrt(na * ng) / n
    sba = 2.0 * math.sqrt(na * nb) / n
    sgg = (na + nb - ng) / n
    sbg = -2.0 * math.sqrt(nb * ng) / n
    state = initial_state(c)
    a, cc = state.a, state.c
    b = np.zeros(k + 1, dtype=complex)
    b[0] = state.b[0]
    for step in range(k):
        # b_j -> b_{j+1}; new beta content from alpha and gamma lands in b_0
        b[1:step + 2] = b[0:step + 1].copy()
        b[0] = sba * a + sbg * cc
        a, cc = saa * a - sga * cc, sga * a + sgg * cc
    return SubspaceState(a, cc, b)


def closed_form_state(counts, k: int) -> SubspaceState:
    c = check_regime(counts)
    if k < 0:
        raise ValueError("rotation count must be non-negative")
    ang = angles_from_counts(c)
    s_th = math.sin(ang.theta)
    rk = ang.decay ** k
    a = -rk * math.sin(k * ang.eta + ang.zeta - ang.theta) / s_th
    cc = rk * math.sin(k * ang.eta + ang.zeta) / s_th
    amp = math.sqrt(c.n_beta / c.n_total)
    b = np.zeros(k + 1, dtype=complex)
    b[k] = amp
    j = np.arange(k)
    b[k - 1 - j] = amp * (2.0 / s_th) * ang.decay ** j * np.sin(ang.theta - 2 * ang.zeta - j * ang.eta)
    return SubspaceState(complex(a), complex(cc), b)


def gamma_amplitude_lower_bound(counts, k: int) -> float:
    c = check_regime(counts)
    ang = angles_from_counts(c)
    s_th = math.sin(ang.theta)
    j = np.arange(k)
    interference = float(np.sum(ang.decay ** j * np.abs(np.sin(ang.theta - 2 * ang.zeta - j * ang.eta))))
    lead = ang.decay ** k * math.sin(k * ang.eta + ang.zeta) / s_th
    return lead - (2.0 / s_th) * math.sqrt(c.n_beta / c.n_total) * interference


def simplified_lower_bound(counts, k: int) -> float:
    c = check_regime(counts)
    ang = angles_from_counts(c)
    lead = ang.decay ** k * math.sin(k * ang.eta + ang.zeta)
    return (lead - 2.0 * k * math.sqrt(c.n_beta / c.n_total)) / math.sin(ang.theta)


def optimal_rotation_count(counts) -> float:
    """Continuous maximiser of the gamma-amplitude bound; callers round.

    Evaluates the stationarity condition of the bound (without absolute
    values) as ``k = u/eta`` with ``tan u = X/Y``.  The branch is the first
    sign change of the derivative from positive to negative.  If the bound is
    already non-increasing at k = 0 the answer is 0.  When X and Y both vanish
    (this happens exactly when n_beta == n_gamma) the bound is flat over its
    validity window, and the window's right end is returned.
    """
    c = check_regime(counts)
    ang = angles_from_counts(c)
    s = math.sqrt(c.n_beta / c.n_total)
    log_r = math.log(ang.decay)
    shift = 2 * ang.zeta - ang.theta + ang.phi
    X = 2 * s * ang.rho * math.cos(shift) - log_r * math.sin(ang.zeta) - ang.eta * math.cos(ang.zeta)
    Y = 2 * s * ang.rho * math.sin(shift) + log_r * math.cos(ang.zeta) - ang.eta * math.sin(ang.zeta)
    scale = ang.eta + abs(log_r) + 2 * s * ang.rho
    if math.hypot(X, Y) <= 1e-12 * scale:
        lead = ang.theta - 2 * ang.zeta
        return math.floor(lead / ang.eta) + 1.0 if lead >= 0 else 0.0
    # d(bound)/dk is proportional to Y sin(u) - X cos(u) = R sin(u - psi)
    if -X <= 0:
        return 0.0
    psi = math.atan2(X, Y)
    u = (psi + math.pi) % (2 * math.pi)
    if u == 0.0:
        u = 2 * math.pi
    return u / ang.eta


def integer_bound_maximisers(counts, kmax: int = 50, tol: float = 1e-12) -> list[int]:
    """All k in [0, kmax] attaining the maximum of the bound (within tol)."""
    vals = np.array([gamma_amplitude_lower_bound(counts, k) for k in range(kmax + 1)])
    return [int(k) for k in np.flatnonzero(vals >= vals.max() - tol)]


def textbook_success_probability(n_total: int, n_marked: int, k: int) -> float:
    return math.sin((2 * k + 1) * math.asin(math.sqrt(n_marked / n_total))) ** 2


def success_probability(counts, k: int) -> float:
    """|<gamma|G^k|s>|^2, from the closed form when in regime, else by recurrence."""
    try:
        return closed_form_state(counts, k).success_probability
    except OutOfRegimeError:
        return recurrence_state(counts, k).success_probability


def angles_dict(counts) -> dict:
    c = check_regime(counts)
    ang = angles_from_counts(c)
    k_opt = optimal_rotation_count(c)
    return {
        "n_alpha": c.n_alpha,
        "n_beta": c.n_beta,
        "n_gamma": c.n_gamma,
        "n_total": c.n_total,
        "theta": ang.theta,
        "eta": ang.eta,
        "zeta": ang.zeta,
        "decay": ang.decay,
        "rho": ang.rho,
        "phi": ang.phi,
        "optimal_k": k_opt,
        "optimal_k_rounded": int(round(k_opt)),
    }


SWEEP_COLUMNS = (
    "n_alpha", "n_beta", "n_gamma", "k",
    "c_recurrence_re", "c_recurrence_im", "c_closedform_re", "c_closedform_im",
    "bound", "simplified_bound", "success_prob",
)


def sweep_rows(triples, kmax: int):
    """Rows for the analytics sweep table, one per (triple, k)."""
    for t in triples:
        c = check_regime(t)
        for k in range(kmax + 1):
            rec = recurrence_state(c, k)
            cf = closed_form_state(c, k)
            yield (
                c.n_alpha, c.n_beta, c.n_gamma, k,
                rec.c.real, rec.c.imag, cf.c.real, cf.c.imag,
                gamma_amplitude_lower_bound(c, k), simplified_lower_bound(c, k),
                rec.success_probability,
            )
