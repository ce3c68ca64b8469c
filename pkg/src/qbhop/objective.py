"""Objective functions on box domains and their grid discretisation.

Grid indexing is row-major with dimension 0 varying fastest, so for a
``(n0, n1)`` grid the index of lattice coordinate ``(i0, i1)`` is
``i0 + n0 * i1``.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.interpolate import RegularGridInterpolator

FAMILIES = ("quadratic", "doublewell", "eggcrate", "tabulated")
BUMP_RADIUS = 0.45  # in cell units; keeps the global-basin bump inside its cell


@dataclass(frozen=True)
class BoxDomain:
    lower: tuple[float, ...]
    upper: tuple[float, ...]

    def __post_init__(self):
        lo = tuple(float(v) for v in np.atleast_1d(self.lower))
        hi = tuple(float(v) for v in np.atleast_1d(self.upper))
        if len(lo) != len(hi) or not lo:
            raise ValueError("lower and upper must be non-empty and of equal length")
        if any(a >= b for a, b in zip(lo, hi)):
            raise ValueError(f"empty box: lower={lo} upper={hi}")
        object.__setattr__(self, "lower", lo)
        object.__setattr__(self, "upper", hi)

    @classmethod
    def cube(cls, dim: int, lo: float = 0.0, hi: float = 1.0) -> "BoxDomain":
        return cls((lo,) * dim, (hi,) * dim)

    @property
    def dim(self) -> int:
        return len(self.lower)

    @property
    def lo(self) -> np.ndarray:
        return np.array(self.lower)

    @property
    def hi(self) -> np.ndarray:
        return np.array(self.upper)

    def clamp(self, x: np.ndarray) -> np.ndarray:
        return np.clip(x, self.lo, self.hi)


@dataclass(frozen=True)
class DomainGrid:
    """Regular lattice S over a box, endpoints included."""

    domain: BoxDomain
    points_per_dim: tuple[int, ...]

    def __post_init__(self):
        ppd = tuple(int(n) for n in np.atleast_1d(self.points_per_dim))
        if len(ppd) == 1 and self.domain.dim > 1:
            ppd = ppd * self.domain.dim
        if len(ppd) != self.domain.dim:
            raise ValueError("points_per_dim does not match the domain dimension")
        if any(n < 1 for n in ppd):
            raise ValueError("points_per_dim entries must be positive")
        object.__setattr__(self, "points_per_dim", ppd)

    @property
    def dim(self) -> int:
        return self.domain.dim

    @property
    def total_points(self) -> int:
        return int(np.prod(self.points_per_dim))

    @property
    def spacing(self) -> np.ndarray:
        n = np.array(self.points_per_dim)
        width = self.domain.hi - self.domain.lo
        return np.where(n > 1, width / np.maximum(n - 1, 1), width)

    def _axis(self, d: int) -> np.ndarray:
        n = self.points_per_dim[d]
        if n == 1:
            return np.array([0.5 * (self.domain.lower[d] + self.domain.upper[d])])
        return np.linspace(self.domain.lower[d], self.domain.upper[d], n)

    def axes(self) -> list[np.ndarray]:
        return [self._axis(d) for d in range(self.dim)]

    def index_to_coords(self, i: int) -> tuple[int, ...]:
        if not 0 <= i < self.total_points:
            raise IndexError(f"grid index {i} out of range [0, {self.total_points})")
        return tuple(int(c) for c in np.unravel_index(i, self.points_per_dim, order="F"))

    def index_to_point(self, i: int) -> np.ndarray:
        coords = self.index_to_coords(int(i))
        return np.array([self._axis(d)[c] for d, c in enumerate(coords)])

    def point_to_index(self, x) -> int:
        x = np.asarray(x, dtype=float)
        if x.shape != (self.dim,):
            raise ValueError(f"expected a point of dimension {self.dim}, got shape {x.shape}")
        coords = []
        for d in range(self.dim):
            n = self.points_per_dim[d]
            if n == 1:
                coords.append(0)
                continue
            t = (x[d] - self.domain.lower[d]) / self.spacing[d]
            c = int(round(t))
            if not 0 <= c < n:
                raise IndexError(f"point {x} lies outside the grid")
            coords.append(c)
        return int(np.ravel_multi_index(coords, self.points_per_dim, order="F"))

    def points(self) -> np.ndarray:
        """All grid points as an (N, p) array in index order."""
        mesh = np.meshgrid(*self.axes(), indexing="ij")
        return np.stack([m.ravel(order="F") for m in mesh], axis=1)


@dataclass(frozen=True)
class OrdinateEncoding:
    """Fixed-point ordinate register with wrap-around addition."""

    scale: float = 2.0**-16
    modulus: int = 2**32
    offset: float = -(2.0**15)

    def encode(self, y: float) -> int:
        return int(round((y - self.offset) / self.scale)) % self.modulus

    def decode(self, k: int) -> float:
        return self.offset + (int(k) % self.modulus) * self.scale

    def add(self, a: int, b: int) -> int:
        return (int(a) + int(b)) % self.modulus

    def quantize(self, y) -> np.ndarray:
        """Values as read back from the register after U_f adds them to 0."""
        k = np.mod(np.round((np.asarray(y, dtype=float) - self.offset) / self.scale), float(self.modulus))
        return self.offset + k * self.scale

    @property
    def representable(self) -> tuple[float, float]:
        return self.offset, self.offset + self.modulus * self.scale


@dataclass(frozen=True, eq=False)
class ObjectiveSpec:
    """An objective family, its parameters and the box it lives on.

    Families:

    * ``quadratic``  -- ``sum(x**2)``
    * ``doublewell`` -- ``sum((x_d**2 - 1)**2) + tilt * sum(x_d)``
    * ``eggcrate``   -- ``sum(cos(pi*u_d)**2) + depth offsets`` where ``u_d``
      maps the box onto ``[n_d*margin, n_d*(1-margin)]``, giving
      ``prod(n_d)`` basins.  With ``depths="single"`` a bump of depth ``gap``
      inside the corner cell makes it the unique global basin and all other
      basins share the value 0; with ``depths="graded"`` a tilt
      ``gap * sum(stride_d * u_d)`` gives every basin a distinct depth.
    * ``tabulated``  -- multilinear interpolation of grid values.
    """

    kind: str
    domain: BoxDomain
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.kind not in FAMILIES:
            raise ValueError(f"unknown objective family {self.kind!r}; choose from {FAMILIES}")
        if self.kind == "tabulated":
            values = np.asarray(self.params["values"], dtype=float)
            shape = tuple(self.params["points_per_dim"])
            grid = DomainGrid(self.domain, shape)
            table = values.reshape(shape, order="F")
            axes = grid.axes()
            grads = np.gradient(table, *axes) if table.ndim > 1 else [np.gradient(table, axes[0])]
            object.__setattr__(self, "_interp", RegularGridInterpolator(axes, table))
            object.__setattr__(
                self, "_grad_interp", [RegularGridInterpolator(axes, g) for g in grads]
            )

    @property
    def dim(self) -> int:
        return self.domain.dim

    def _check(self, X: np.ndarray) -> np.ndarray:
        X = np.asarray(X, dtype=float)
        if X.ndim != 2 or X.shape[1] != self.dim:
            raise ValueError(f"dimension mismatch: expected points of dimension {self.dim}")
        return X

    # eggcrate helpers
    def _eggcrate_map(self):
        counts = np.array(self.params["counts"], dtype=float)
        margin = float(self.params.get("margin", 0.02))
        width = self.domain.hi - self.domain.lo
        du_dx = counts * (1.0 - 2.0 * margin) / width
        strides = np.concatenate([[1.0], np.cumprod(counts)[:-1]])
        return counts, margin, du_dx, strides

    def _eggcrate_u(self, X):
        counts, margin, du_dx, _ = self._eggcrate_map()
        return counts * margin + (X - self.domain.lo) * du_dx

    def _eggcrate_offset(self, U):
        """Depth-offset term and its u-gradient."""
        gap = float(self.params.get("gap", 0.04))
        _, _, _, strides = self._eggcrate_map()
        if self.params.get("depths", "single") == "graded":
            return gap * (U @ strides), np.broadcast_to(gap * strides, U.shape)
        R = BUMP_RADIUS
        D = U - 0.5
        t2 = np.sum(D * D, axis=1) / R**2
        inside = t2 < 1.0
        w = np.where(inside, 1.0 - t2, 0.0)
        return -gap * w * w, (4.0 * gap / R**2) * (w[:, None] * D)

    def evaluate_batch(self, X) -> np.ndarray:
        X = self._check(X)
        if self.kind == "quadratic":
            return np.sum(X * X, axis=1)
        if self.kind == "doublewell":
            tilt = float(self.params.get("tilt", 0.0))
            return np.sum((X * X - 1.0) ** 2, axis=1) + tilt * np.sum(X, axis=1)
        if self.kind == "eggcrate":
            U = self._eggcrate_u(X)
            return np.sum(np.cos(np.pi * U) ** 2, axis=1) + self._eggcrate_offset(U)[0]
        return self._interp(self.domain.clamp(X))

    def gradient_batch(self, X) -> np.ndarray:
        X = self._check(X)
        if self.kind == "quadratic":
            return 2.0 * X
        if self.kind == "doublewell":
            tilt = float(self.params.get("tilt", 0.0))
            return 4.0 * X * (X * X - 1.0) + tilt
        if self.kind == "eggcrate":
            _, _, du_dx, _ = self._eggcrate_map()
            U = self._eggcrate_u(X)
            return (-np.pi * np.sin(2.0 * np.pi * U) + self._eggcrate_offset(U)[1]) * du_dx
        Xc = self.domain.clamp(X)
        return np.stack([g(Xc) for g in self._grad_interp], axis=1)

    def curvature_bound(self) -> float:
        """Largest second derivative at the local minima of the family."""
        if self.kind == "quadratic":
            return 2.0
        if self.kind == "doublewell":
            return 8.0
        if self.kind == "eggcrate":
            _, _, du_dx, _ = self._eggcrate_map()
            bump = 0.0
            if self.params.get("depths", "single") == "single":
                bump = 4.0 * float(self.params.get("gap", 0.04)) / BUMP_RADIUS**2
            return float((2.0 * np.pi**2 + bump) * np.max(du_dx) ** 2)
        # crude bound from second differences of the table
        grid = DomainGrid(self.domain, self.params["points_per_dim"])
        table = np.asarray(self.params["values"], dtype=float).reshape(
            grid.points_per_dim, order="F"
        )
        best = 1e-12
        for d, h in enumerate(grid.spacing):
            if table.shape[d] > 2:
                second = np.abs(np.diff(table, n=2, axis=d)) / h**2
                best = max(best, float(second.max()))
        return best

    def default_step(self) -> float:
        if self.kind == "quadratic":
            return 0.25
        if self.kind == "doublewell":
            return 0.05
        return 0.9 / self.curvature_bound()

    def global_minimizer(self) -> np.ndarray:
        """Known global minimiser (families are built so that it is unique)."""
        if self.kind == "quadratic":
            return self.domain.clamp(np.zeros(self.dim))
        if self.kind == "doublewell":
            tilt = float(self.params.get("tilt", 0.0))
            # root of 4x(x^2-1) + tilt nearest -sign(tilt)
            roots = np.roots([4.0, 0.0, -4.0, tilt])
            real = roots[np.abs(roots.imag) < 1e-9].real
            vals = (real**2 - 1) ** 2 + tilt * real
            xs = real[np.argmin(vals)]
            return self.domain.clamp(np.full(self.dim, xs))
        if self.kind == "eggcrate":
            counts, margin, du_dx, strides = self._eggcrate_map()
            gap = float(self.params.get("gap", 0.04))
            u = np.full(self.dim, 0.5)
            if self.params.get("depths", "single") == "single":
                return self.domain.lo + (u - counts * margin) / du_dx
            # minimum of cos^2(pi u) + gap*stride*u near u = 1/2, solved per axis
            for _ in range(50):
                g = -np.pi * np.sin(2 * np.pi * u) + gap * strides
                h = -2 * np.pi**2 * np.cos(2 * np.pi * u)
                u = u - g / h
            return self.domain.lo + (u - counts * margin) / du_dx
        grid = DomainGrid(self.domain, self.params["points_per_dim"])
        return grid.index_to_point(int(np.argmin(self.params["values"])))


def evaluate(spec: ObjectiveSpec, x) -> float:
    x = np.asarray(x, dtype=float)
    if x.shape != (spec.dim,):
        raise ValueError(f"dimension mismatch: expected {spec.dim}, got shape {x.shape}")
    return float(spec.evaluate_batch(x[None, :])[0])


def gradient(spec: ObjectiveSpec, x) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if x.shape != (spec.dim,):
        raise ValueError(f"dimension mismatch: expected {spec.dim}, got shape {x.shape}")
    return spec.gradient_batch(x[None, :])[0]


def quadratic_bowl(dim: int = 1, half_width: float = 2.0) -> ObjectiveSpec:
    return ObjectiveSpec("quadratic", BoxDomain.cube(dim, -half_width, half_width))


def double_well(dim: int = 1, tilt: float = 0.0, half_width: float = 2.0) -> ObjectiveSpec:
    return ObjectiveSpec("doublewell", BoxDomain.cube(dim, -half_width, half_width), {"tilt": tilt})


def basin_layout(basins: int, dim: int) -> tuple[int, ...]:
    """Split a basin count into per-axis cell counts, as square as possible."""
    if basins < 1:
        raise ValueError("basin count must be positive")
    counts = [1] * dim
    remaining = basins
    # peel off prime factors, largest first, onto the currently smallest axis
    factors = []
    f = 2
    while f * f <= remaining:
        while remaining % f == 0:
            factors.append(f)
            remaining //= f
        f += 1
    if remaining > 1:
        factors.append(remaining)
    for p in sorted(factors, reverse=True):
        i = int(np.argmin(counts))
        counts[i] *= p
    counts.sort(reverse=True)
    return tuple(counts)


def egg_crate(basins: int, dim: int = 2, gap: float = 0.04, margin: float = 0.02,
              depths: str = "single") -> ObjectiveSpec:
    if depths not in ("single", "graded"):
        raise ValueError(f"unknown depth profile {depths!r}; use 'single' or 'graded'")
    if not gap > 0:
        raise ValueError("depth gap must be positive")
    counts = basin_layout(basins, dim)
    if depths == "graded" and gap * np.prod(counts[:-1]) >= 1.0:
        raise ValueError("depth gap too large: basins would merge")
    return ObjectiveSpec(
        "eggcrate",
        BoxDomain.cube(dim, 0.0, 1.0),
        {"counts": counts, "gap": gap, "margin": margin, "depths": depths},
    )


def tabulated(values, points_per_dim, domain: BoxDomain | None = None) -> ObjectiveSpec:
    ppd = tuple(int(n) for n in points_per_dim)
    values = np.asarray(values, dtype=float).ravel()
    if values.size != int(np.prod(ppd)):
        raise ValueError(f"expected {int(np.prod(ppd))} values, got {values.size}")
    if not np.all(np.isfinite(values)):
        raise ValueError("tabulated values must be finite")
    if any(n < 2 for n in ppd):
        raise ValueError("tabulated objectives need at least 2 points per dimension")
    domain = domain or BoxDomain.cube(len(ppd))
    return ObjectiveSpec("tabulated", domain, {"values": values, "points_per_dim": ppd})


def load_tabulated_csv(path) -> ObjectiveSpec:
    """Read a table: header ``dims, n_0, ..., n_{p-1}`` then one value per line.

    Values are in grid index order; the box is the unit cube.
    """
    with open(Path(path), newline="") as fh:
        rows = [r for r in csv.reader(fh) if r and not r[0].lstrip().startswith("#")]
    if not rows:
        raise ValueError(f"{path}: empty table")
    header = [int(float(v)) for v in rows[0] if v.strip()]
    dims, ppd = header[0], header[1:]
    if len(ppd) != dims:
        raise ValueError(f"{path}: header declares {dims} dims but lists {len(ppd)} sizes")
    values = [float(r[0]) for r in rows[1:]]
    return tabulated(values, ppd)


def write_tabulated_csv(path, spec: ObjectiveSpec) -> None:
    ppd = spec.params["points_per_dim"]
    with open(Path(path), "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow([len(ppd), *ppd])
        for v in spec.params["values"]:
            w.writerow([repr(float(v))])


def make_objective(name: str, dim: int = 1, basins: int = 4, tilt: float = 0.0,
                   gap: float = 0.04, depths: str = "single", table: str | None = None) -> ObjectiveSpec:
    """Build an objective from its CLI name."""
    if name == "quadratic":
        return quadratic_bowl(dim)
    if name == "doublewell":
        return double_well(dim, tilt=tilt)
    if name == "eggcrate":
        return egg_crate(basins, dim=dim, gap=gap, depths=depths)
    if name == "tabulated":
        if table is None:
            raise ValueError("tabulated objective needs a table file")
        return load_tabulated_csv(table)
    raise ValueError(f"unknown objective {name!r}; choose from {FAMILIES}")


def lattice_step_ok(spec: ObjectiveSpec, step: float) -> bool:
    return step * spec.curvature_bound() < 1.0


__all__ = [
    "BoxDomain", "DomainGrid", "ObjectiveSpec", "OrdinateEncoding", "evaluate", "gradient",
    "quadratic_bowl", "double_well", "egg_crate", "basin_layout", "tabulated",
    "load_tabulated_csv", "write_tabulated_csv", "make_objective", "lattice_step_ok",
]
