import os
import subprocess
import sys

import numpy as np
import pytest

from qbhop import kernels
from qbhop.objective import double_well, egg_crate, quadratic_bowl

try:
    kernels.get_backend("compiled")
    HAVE_COMPILED = True
except ImportError:
    HAVE_COMPILED = False

needs_compiled = pytest.mark.skipif(not HAVE_COMPILED, reason="compiled extension not built")


@needs_compiled
@pytest.mark.parametrize("n", [1, 7, 64, 1000])
def test_grover_backends_agree(n):
    rng = np.random.default_rng(n)
    psi = rng.standard_normal(n) + 1j * rng.standard_normal(n)
    psi /= np.linalg.norm(psi)
    mask = rng.random(n) < 0.3
    a, b = psi.copy(), psi.copy()
    kernels.grover_iterate(a, mask, 9, backend="compiled")
    kernels.grover_iterate(b, mask, 9, backend="python")
    np.testing.assert_allclose(a, b, atol=1e-13)


SPECS = [quadratic_bowl(2), double_well(1, tilt=0.2), double_well(3), egg_crate(8), egg_crate(4, depths="graded")]


@needs_compiled
@pytest.mark.parametrize("spec", SPECS, ids=lambda s: f"{s.kind}{s.dim}")
@pytest.mark.parametrize("with_errors", [False, True])
def test_descent_backends_agree(spec, with_errors):
    rng = np.random.default_rng(0)
    X = spec.domain.lo + (spec.domain.hi - spec.domain.lo) * rng.random((200, spec.dim))
    E = 0.1 * rng.standard_normal((200, 25, spec.dim)) if with_errors else None
    step = 0.5 * spec.default_step()
    a = kernels.descend_gd(spec, X, E, step, 25, backend="compiled")
    b = kernels.descend_gd(spec, X, E, step, 25, backend="python")
    np.testing.assert_allclose(a, b, rtol=0, atol=1e-12)


def test_python_descent_matches_gradient_batch():
    spec = egg_crate(16)
    X = np.random.default_rng(1).random((50, 2))
    step = spec.default_step()
    T = kernels.descend_gd(spec, X, None, step, 1, backend="python")
    np.testing.assert_allclose(T, spec.domain.clamp(X - step * spec.gradient_batch(X)), atol=1e-15)


def test_unknown_backend():
    with pytest.raises(ValueError):
        kernels.get_backend("gpu")
    assert not kernels.supports_fast_descent(type("S", (), {"kind": "tabulated"})())


def test_env_forces_fallback():
    env = dict(os.environ, QBHOP_PURE_PYTHON="1")
    out = subprocess.run([sys.executable, "-c", "import qbhop.kernels as k; print(k.BACKEND)"],
                         env=env, capture_output=True, text=True, check=True)
    assert out.stdout.strip() == "python"
