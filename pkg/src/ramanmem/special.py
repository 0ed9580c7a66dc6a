"""Bessel functions of the first kind, orders 0 and 1, for real arguments.

Power series below ``SERIES_LIMIT`` and the Hankel asymptotic expansion above
it. With the switch at 12 both branches stay below ~1e-12 absolute error;
at a switch point of 8 the asymptotic series is only good to ~4e-8.

``j1_over_x`` returns ``2 J1(x) / x`` which is entire in ``x**2``; it is the
Volterra kernel of the transmitted field and is evaluated without division
on the series branch.
"""
import math

import numpy as np

from ._accel import njit, pick

SERIES_LIMIT = 12.0
_SERIES_TERMS = 40
_ASYM_TERMS = 26


@njit
def _series_nb(nu, x):
    h = 0.25 * x * x
    if nu == 0:
        t = 1.0
    else:
        t = 0.5 * x
    s = t
    for k in range(1, _SERIES_TERMS):
        t *= -h / (k * (k + nu))
        s += t
        if abs(t) < 1e-18 * (abs(s) + 1e-300) and k > 2:
            break
    return s


@njit
def _asym_nb(nu, x):
    mu = 4.0 * nu * nu
    p = 1.0
    q = 0.0
    t = 1.0
    for k in range(1, _ASYM_TERMS):
        t *= (mu - (2 * k - 1) ** 2) / (8.0 * k * x)
        # terms alternate P, Q, P, Q with sign (-1)**(k//2)
        sign = -1.0 if (k // 2) % 2 == 1 else 1.0
        if k % 2 == 0:
            p += sign * t
        else:
            q += sign * t
    chi = x - (0.5 * nu + 0.25) * math.pi
    return math.sqrt(2.0 / (math.pi * x)) * (p * math.cos(chi) - q * math.sin(chi))


@njit
def j0_scalar(x):
    x = abs(x)
    if x <= SERIES_LIMIT:
        return _series_nb(0, x)
    return _asym_nb(0, x)


@njit
def j1_scalar(x):
    ax = abs(x)
    if ax <= SERIES_LIMIT:
        v = _series_nb(1, ax)
    else:
        v = _asym_nb(1, ax)
    return -v if x < 0 else v


@njit
def j1_over_x_scalar(x):
    ax = abs(x)
    if ax <= SERIES_LIMIT:
        # 2 J1(x)/x = sum_k (-1)^k (x/2)^{2k} / (k! (k+1)!)
        h = 0.25 * ax * ax
        t = 1.0
        s = 1.0
        for k in range(1, _SERIES_TERMS):
            t *= -h / (k * (k + 1))
            s += t
            if abs(t) < 1e-18 * (abs(s) + 1e-300) and k > 2:
                break
        return s
    return 2.0 * _asym_nb(1, ax) / ax


@njit
def _map_nb(kind, x):
    out = np.empty(x.size)
    flat = x.ravel()
    for i in range(flat.size):
        if kind == 0:
            out[i] = j0_scalar(flat[i])
        elif kind == 1:
            out[i] = j1_scalar(flat[i])
        else:
            out[i] = j1_over_x_scalar(flat[i])
    return out


def _series_np(nu, x, scale_by_x):
    h = 0.25 * x * x
    if nu == 0 or not scale_by_x:
        t = np.ones_like(x)
    else:
        t = 0.5 * x
    s = t.copy()
    for k in range(1, _SERIES_TERMS):
        t = t * (-h / (k * (k + nu)))
        s += t
    return s


def _asym_np(nu, x):
    mu = 4.0 * nu * nu
    p = np.ones_like(x)
    q = np.zeros_like(x)
    t = np.ones_like(x)
    for k in range(1, _ASYM_TERMS):
        t = t * ((mu - (2 * k - 1) ** 2) / (8.0 * k * x))
        sign = -1.0 if (k // 2) % 2 == 1 else 1.0
        if k % 2 == 0:
            p += sign * t
        else:
            q += sign * t
    chi = x - (0.5 * nu + 0.25) * np.pi
    return np.sqrt(2.0 / (np.pi * x)) * (p * np.cos(chi) - q * np.sin(chi))


def _eval_np(kind, x):
    ax = np.abs(x)
    small = ax <= SERIES_LIMIT
    out = np.empty_like(ax)
    xs = ax[small]
    xl = ax[~small]
    if kind == 0:
        out[small] = _series_np(0, xs, True)
        out[~small] = _asym_np(0, xl)
    elif kind == 1:
        out[small] = _series_np(1, xs, True)
        out[~small] = _asym_np(1, xl)
        out = np.where(x < 0, -out, out)
    else:
        out[small] = _series_np(1, xs, False)
        out[~small] = 2.0 * _asym_np(1, xl) / xl
    return out


def _eval_nb(kind, x):
    return _map_nb(kind, np.ascontiguousarray(x).ravel()).reshape(x.shape)


_eval = pick(_eval_nb, _eval_np)


def _apply(kind, x, impl=None):
    arr = np.asarray(x, dtype=float)
    scalar = arr.ndim == 0
    arr = np.atleast_1d(arr)
    if impl not in (None, "numba", "numpy"):
        raise ValueError(f"impl must be 'numba', 'numpy' or None, got {impl!r}")
    fn = {"numba": _eval_nb, "numpy": _eval_np}.get(impl, _eval)
    out = fn(kind, arr)
    return float(out[0]) if scalar else out


def j0(x, impl=None):
    """Bessel J0 of real ``x`` (scalar or array)."""
    return _apply(0, x, impl)


def j1(x, impl=None):
    """Bessel J1 of real ``x`` (scalar or array)."""
    return _apply(1, x, impl)


def j1_over_x(x, impl=None):
    """``2 J1(x) / x``, equal to 1 at ``x = 0``."""
    return _apply(2, x, impl)
