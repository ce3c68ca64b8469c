"""Numpy implementations of the compiled kernels, same signatures."""
import numpy as np

QUADRATIC, DOUBLEWELL, EGGCRATE = 0, 1, 2


def grover_iterate(amps, flip, n_iter):
    flip = np.asarray(flip, dtype=bool)
    n = amps.shape[0]
    for _ in range(int(n_iter)):
        amps[flip] *= -1.0
        twice_mean = 2.0 * amps.sum() / n
        np.subtract(twice_mean, amps, out=amps)


def _grad(kind, prm, X, lo):
    p = X.shape[1]
    if kind == QUADRATIC:
        return 2.0 * X
    if kind == DOUBLEWELL:
        return 4.0 * X * (X * X - 1.0) + prm[0]
    gap, graded, R = prm[0], prm[1], prm[2]
    offsets, du, strides = prm[3:3 + p], prm[3 + p:3 + 2 * p], prm[3 + 2 * p:3 + 3 * p]
    U = offsets + (X - lo) * du
    if graded:
        extra = gap * strides
    else:
        D = U - 0.5
        w = np.maximum(1.0 - np.sum(D * D, axis=1) / R**2, 0.0)
        extra = (4.0 * gap / R**2) * w[:, None] * D
    return (-np.pi * np.sin(2.0 * np.pi * U) + extra) * du


def descend_gd(kind, prm, X, E, h, L, lo, hi):
    Y = np.array(X, dtype=np.float64, copy=True)
    with_errors = E.shape[0] > 0
    for k in range(int(L)):
        g = _grad(kind, prm, Y, lo)
        if with_errors:
            g = g + E[:, k, :]
        Y = np.clip(Y - h * g, lo, hi)
    return Y
