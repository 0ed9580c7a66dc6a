import os
import subprocess
import sys

import numpy as np
import pytest

from ramanmem import kernels
from ramanmem._accel import HAVE_NUMBA

needs_numba = pytest.mark.skipif(not HAVE_NUMBA, reason="numba not installed")
rng = np.random.default_rng(11)


def _complex(n):
    return rng.normal(size=n) + 1j * rng.normal(size=n)


@needs_numba
def test_bessel_products_agree():
    a, b = rng.uniform(0, 1, 40), rng.uniform(0, 1, 30)
    v = _complex(30)
    fast, slow = kernels.IMPLEMENTATIONS["bessel_matrix"]
    assert np.max(np.abs(fast(a, b, 2.3) - slow(a, b, 2.3))) < 1e-13
    fast, slow = kernels.IMPLEMENTATIONS["bessel_matvec"]
    assert np.max(np.abs(fast(a, b, 2.3, v) - slow(a, b, 2.3, v))) < 1e-12


@needs_numba
def test_volterra_agrees():
    omega = np.sort(rng.uniform(0, 1, 64))
    h = _complex(64)
    fast, slow = kernels.IMPLEMENTATIONS["volterra"]
    assert np.max(np.abs(fast(omega, 1.7, h, 0.01) - slow(omega, 1.7, h, 0.01))) < 1e-13


@needs_numba
@pytest.mark.parametrize("name", ["cn_march", "rk4_march"])
def test_marches_agree(name):
    x = _complex(33)
    fast, slow = kernels.IMPLEMENTATIONS[name]
    out_f = fast(x, 1.4, 17, True)
    out_s = slow(x, 1.4, 17, True)
    for f, s in zip(out_f[:2], out_s[:2]):
        assert np.max(np.abs(f - s)) < 1e-12
    assert abs(out_f[2] - out_s[2]) < 1e-12
    assert np.max(np.abs(out_f[3] - out_s[3])) < 1e-12


def test_volterra_first_row_and_constant_kernel():
    # C = 0: the kernel is 1 and the sum is a cumulative trapezoid
    omega = np.linspace(0, 1, 11)
    h = np.ones(11, dtype=complex)
    out = kernels.volterra_apply(omega, 0.0, h, 0.1)
    assert out[0] == 0
    assert np.allclose(out, 0.1 * np.arange(11))


def test_bessel_matrix_matches_matvec():
    a, b = rng.uniform(0, 1, 12), rng.uniform(0, 1, 9)
    v = _complex(9)
    assert np.allclose(kernels.bessel_matrix(a, b, 3.0) @ v, kernels.bessel_matvec(a, b, 3.0, v),
                       rtol=0, atol=1e-13)


def test_lattice_march_rejects_bad_input():
    with pytest.raises(ValueError):
        kernels.lattice_march(np.ones(8), 1.0, 8, scheme="euler")
    with pytest.raises(ValueError):
        kernels.lattice_march(np.ones(3), 1.0, 8, scheme="order-4")


@pytest.mark.parametrize("flag,expected", [("1", "numpy"), ("", "numba" if HAVE_NUMBA else "numpy")])
def test_env_flag_selects_backend(flag, expected):
    env = dict(os.environ, RAMANMEM_DISABLE_NUMBA=flag)
    out = subprocess.run([sys.executable, "-c", "import ramanmem; print(ramanmem.backend())"],
                         env=env, capture_output=True, text=True, check=True)
    assert out.stdout.strip() == expected
