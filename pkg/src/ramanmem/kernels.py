"""Hot loops: Bessel kernel products, the transmission Volterra sum and the
lattice marches of the Maxwell-Bloch oracle.

Each public function dispatches to a numba or a numpy implementation (see
``_accel``). Both are kept callable by name for the benchmark and for the
cross-implementation tests. Summation order is fixed in both, so results are
deterministic for a given grid.
"""
import numpy as np
from scipy.signal import lfilter

from ._accel import njit, pick
from .special import j0_scalar, j1_over_x_scalar, j0 as _j0_np_dispatch, j1_over_x as _j1x_dispatch


# ---------------------------------------------------------------- Bessel products

@njit
def _bessel_matrix_nb(a, b, C):
    out = np.empty((a.size, b.size))
    for i in range(a.size):
        for k in range(b.size):
            p = a[i] * b[k]
            out[i, k] = j0_scalar(2.0 * C * np.sqrt(p if p > 0.0 else 0.0))
    return out


@njit
def _bessel_matvec_nb(a, b, C, v):
    out = np.zeros(a.size, dtype=np.complex128)
    for i in range(a.size):
        acc = 0.0 + 0.0j
        for k in range(b.size):
            p = a[i] * b[k]
            acc += j0_scalar(2.0 * C * np.sqrt(p if p > 0.0 else 0.0)) * v[k]
        out[i] = acc
    return out


def _bessel_matrix_np(a, b, C):
    p = np.clip(np.outer(a, b), 0.0, None)
    return _j0_np_dispatch(2.0 * C * np.sqrt(p), impl="numpy")


def _bessel_matvec_np(a, b, C, v):
    return _bessel_matrix_np(a, b, C) @ v


def bessel_matrix(a, b, C):
    """``M[i, k] = J0(2 C sqrt(a[i] b[k]))``."""
    a = np.ascontiguousarray(a, dtype=float)
    b = np.ascontiguousarray(b, dtype=float)
    return pick(_bessel_matrix_nb, _bessel_matrix_np)(a, b, float(C))


def bessel_matvec(a, b, C, v):
    """``sum_k J0(2 C sqrt(a[i] b[k])) v[k]`` without forming the matrix."""
    a = np.ascontiguousarray(a, dtype=float)
    b = np.ascontiguousarray(b, dtype=float)
    v = np.ascontiguousarray(v, dtype=complex)
    return pick(_bessel_matvec_nb, _bessel_matvec_np)(a, b, float(C), v)


# ---------------------------------------------------------------- Volterra sum
#
# out[i] = int_{t_0}^{t_i} K(omega_i - omega_k) h(t_k) dt, K(s) = 2 J1(x)/x with
# x = 2 C sqrt(s). The integrand does not vanish at the moving end t_i, so plain
# trapezoid weights leave a large O(dt^2) end error; rows with at least six
# samples use third-order Gregory end weights instead.

GREGORY = np.array([3.0 / 8.0, 7.0 / 6.0, 23.0 / 24.0])


@njit
def _row_weight(k, i):
    if i < 5:
        return 0.5 if (k == 0 or k == i) else 1.0
    if k < 3:
        return GREGORY[k]
    if k > i - 3:
        return GREGORY[i - k]
    return 1.0


@njit
def _volterra_nb(omega, C, h, dt):
    n = omega.size
    out = np.zeros(n, dtype=np.complex128)
    for i in range(1, n):
        acc = 0.0 + 0.0j
        for k in range(i + 1):
            s = omega[i] - omega[k]
            acc += _row_weight(k, i) * h[k] * j1_over_x_scalar(2.0 * C * np.sqrt(s if s > 0.0 else 0.0))
        out[i] = dt * acc
    return out


def _volterra_weights(n):
    w = np.tril(np.ones((n, n)))
    rows = np.arange(n)
    w[:5, 0] = 0.5
    w[rows[:5], rows[:5]] = 0.5
    w[0, 0] = 0.0
    for i in range(5, n):
        w[i, :3] = GREGORY
        w[i, i - 2:i + 1] = GREGORY[::-1]
    return w


def _volterra_np(omega, C, h, dt):
    s = np.clip(omega[:, None] - omega[None, :], 0.0, None)
    K = _j1x_dispatch(2.0 * C * np.sqrt(s), impl="numpy")
    return dt * ((K * _volterra_weights(omega.size)) @ h)


def volterra_apply(omega, C, h, dt):
    omega = np.ascontiguousarray(omega, dtype=float)
    h = np.ascontiguousarray(h, dtype=complex)
    return pick(_volterra_nb, _volterra_np)(omega, float(C), h, float(dt))


# ---------------------------------------------------------------- lattice marches
#
# dX/ds = i C Y,  dY/dr = i C X,  X(0, r) = x_in(r),  Y(s, 0) = 0.
# Y(s, r) = i C Q[X(s, .)](r) with Q a cumulative quadrature in r, so the pair
# reduces to dX/ds = -C^2 Q X marched in s.

@njit
def _cumtrap_nb(x, h, out):
    out[0] = 0.0
    acc = 0.0 + 0.0j
    for j in range(1, x.size):
        acc += 0.5 * h * (x[j - 1] + x[j])
        out[j] = acc


@njit
def _cum4_nb(x, h, out):
    # piecewise-cubic (4-point Lagrange) interval integrals; needs x.size >= 4
    n = x.size
    c = h / 24.0
    out[0] = 0.0
    acc = c * (9.0 * x[0] + 19.0 * x[1] - 5.0 * x[2] + x[3])
    out[1] = acc
    for k in range(1, n - 2):
        acc += c * (-x[k - 1] + 13.0 * x[k] + 13.0 * x[k + 1] - x[k + 2])
        out[k + 1] = acc
    acc += c * (x[n - 4] - 5.0 * x[n - 3] + 19.0 * x[n - 2] + 9.0 * x[n - 1])
    out[n - 1] = acc


@njit
def _cn_march_nb(x_in, C, n_s, keep):
    n_r = x_in.size
    hr = 1.0 / (n_r - 1)
    hs = 1.0 / (n_s - 1)
    a = 0.5 * hs * C * C
    X = x_in.copy()
    q = np.empty(n_r, dtype=np.complex128)
    b = np.empty(n_r, dtype=np.complex128)
    y_edge = np.empty(n_s, dtype=np.complex128)
    n_keep = n_s if keep else 0
    xs = np.empty((n_keep, n_r), dtype=np.complex128)
    ys = np.empty((n_keep, n_r), dtype=np.complex128)

    n_in = 0.0
    for j in range(n_r):
        w = hr if 0 < j < n_r - 1 else 0.5 * hr
        n_in += w * abs(x_in[j]) ** 2
    growth = 0.0
    stored = 0.0

    _cumtrap_nb(X, hr, q)
    y_edge[0] = 1j * C * q[n_r - 1]
    if keep:
        xs[0, :] = X
        ys[0, :] = 1j * C * q
    denom = 1.0 + 0.5 * a * hr
    for n in range(1, n_s):
        for j in range(n_r):
            b[j] = X[j] - a * q[j]
        X[0] = b[0]
        run = 0.5 * X[0]
        for j in range(1, n_r):
            X[j] = (b[j] - a * hr * run) / denom
            run += X[j]
        _cumtrap_nb(X, hr, q)
        y_edge[n] = 1j * C * q[n_r - 1]
        if keep:
            xs[n, :] = X
            ys[n, :] = 1j * C * q
        stored += 0.5 * hs * (abs(y_edge[n - 1]) ** 2 + abs(y_edge[n]) ** 2)
        front = 0.0
        for j in range(n_r):
            w = hr if 0 < j < n_r - 1 else 0.5 * hr
            front += w * abs(X[j]) ** 2
        if n_in > 0.0:
            g = (front + stored - n_in) / n_in
            if g > growth:
                growth = g
    return X, y_edge, growth, xs, ys


@njit
def _rk4_march_nb(x_in, C, n_s, keep):
    n_r = x_in.size
    hr = 1.0 / (n_r - 1)
    hs = 1.0 / (n_s - 1)
    c2 = C * C
    X = x_in.copy()
    q = np.empty(n_r, dtype=np.complex128)
    tmp = np.empty(n_r, dtype=np.complex128)
    k1 = np.empty(n_r, dtype=np.complex128)
    k2 = np.empty(n_r, dtype=np.complex128)
    k3 = np.empty(n_r, dtype=np.complex128)
    k4 = np.empty(n_r, dtype=np.complex128)
    y_edge = np.empty(n_s, dtype=np.complex128)
    n_keep = n_s if keep else 0
    xs = np.empty((n_keep, n_r), dtype=np.complex128)
    ys = np.empty((n_keep, n_r), dtype=np.complex128)

    n_in = 0.0
    for j in range(n_r):
        w = hr if 0 < j < n_r - 1 else 0.5 * hr
        n_in += w * abs(x_in[j]) ** 2
    growth = 0.0
    stored = 0.0

    _cum4_nb(X, hr, q)
    y_edge[0] = 1j * C * q[n_r - 1]
    if keep:
        xs[0, :] = X
        ys[0, :] = 1j * C * q
    for n in range(1, n_s):
        _cum4_nb(X, hr, q)
        for j in range(n_r):
            k1[j] = -c2 * q[j]
            tmp[j] = X[j] + 0.5 * hs * k1[j]
        _cum4_nb(tmp, hr, q)
        for j in range(n_r):
            k2[j] = -c2 * q[j]
            tmp[j] = X[j] + 0.5 * hs * k2[j]
        _cum4_nb(tmp, hr, q)
        for j in range(n_r):
            k3[j] = -c2 * q[j]
            tmp[j] = X[j] + hs * k3[j]
        _cum4_nb(tmp, hr, q)
        for j in range(n_r):
            k4[j] = -c2 * q[j]
            X[j] += hs / 6.0 * (k1[j] + 2.0 * k2[j] + 2.0 * k3[j] + k4[j])
        _cum4_nb(X, hr, q)
        y_edge[n] = 1j * C * q[n_r - 1]
        if keep:
            xs[n, :] = X
            ys[n, :] = 1j * C * q
        stored += 0.5 * hs * (abs(y_edge[n - 1]) ** 2 + abs(y_edge[n]) ** 2)
        front = 0.0
        for j in range(n_r):
            w = hr if 0 < j < n_r - 1 else 0.5 * hr
            front += w * abs(X[j]) ** 2
        if n_in > 0.0:
            g = (front + stored - n_in) / n_in
            if g > growth:
                growth = g
    return X, y_edge, growth, xs, ys


def _cumtrap_np(x, h):
    out = np.zeros_like(x)
    out[1:] = np.cumsum(0.5 * h * (x[1:] + x[:-1]))
    return out


def _cum4_np(x, h):
    c = h / 24.0
    inner = c * (-x[:-3] + 13.0 * x[1:-2] + 13.0 * x[2:-1] - x[3:])
    first = c * (9.0 * x[0] + 19.0 * x[1] - 5.0 * x[2] + x[3])
    last = c * (x[-4] - 5.0 * x[-3] + 19.0 * x[-2] + 9.0 * x[-1])
    out = np.zeros_like(x)
    out[1:] = np.cumsum(np.concatenate(([first], inner, [last])))
    return out


def _frontier(X, y_edge, n, hr, hs):
    w = np.full(X.size, hr)
    w[0] = w[-1] = 0.5 * hr
    front = np.dot(w, np.abs(X) ** 2)
    ye = np.abs(y_edge[: n + 1]) ** 2
    stored = 0.5 * hs * np.sum(ye[1:] + ye[:-1]) if n > 0 else 0.0
    return front + stored


def _cn_march_np(x_in, C, n_s, keep):
    n_r = x_in.size
    hr = 1.0 / (n_r - 1)
    hs = 1.0 / (n_s - 1)
    a = 0.5 * hs * C * C
    X = x_in.copy()
    y_edge = np.empty(n_s, dtype=complex)
    xs = np.empty((n_s if keep else 0, n_r), dtype=complex)
    ys = np.empty_like(xs)
    n_in = _frontier(x_in, y_edge, 0, hr, hs)
    growth = 0.0
    q = _cumtrap_np(X, hr)
    y_edge[0] = 1j * C * q[-1]
    if keep:
        xs[0], ys[0] = X, 1j * C * q
    denom = 1.0 + 0.5 * a * hr
    rho = 1.0 - a * hr / denom
    for n in range(1, n_s):
        b = X - a * q
        # S_j = x_1 + ... + x_j obeys S_j = rho S_{j-1} + g_j
        x0 = b[0]
        g = (b[1:] - 0.5 * a * hr * x0) / denom
        S = lfilter([1.0], [1.0, -rho], g)
        X = np.empty_like(b)
        X[0] = x0
        X[1:] = np.diff(np.concatenate(([0.0], S)))
        q = _cumtrap_np(X, hr)
        y_edge[n] = 1j * C * q[-1]
        if keep:
            xs[n], ys[n] = X, 1j * C * q
        if n_in > 0:
            growth = max(growth, (_frontier(X, y_edge, n, hr, hs) - n_in) / n_in)
    return X, y_edge, growth, xs, ys


def _rk4_march_np(x_in, C, n_s, keep):
    n_r = x_in.size
    hr = 1.0 / (n_r - 1)
    hs = 1.0 / (n_s - 1)
    c2 = C * C
    X = x_in.copy()
    y_edge = np.empty(n_s, dtype=complex)
    xs = np.empty((n_s if keep else 0, n_r), dtype=complex)
    ys = np.empty_like(xs)
    n_in = _frontier(x_in, y_edge, 0, hr, hs)
    growth = 0.0
    q = _cum4_np(X, hr)
    y_edge[0] = 1j * C * q[-1]
    if keep:
        xs[0], ys[0] = X, 1j * C * q
    for n in range(1, n_s):
        k1 = -c2 * _cum4_np(X, hr)
        k2 = -c2 * _cum4_np(X + 0.5 * hs * k1, hr)
        k3 = -c2 * _cum4_np(X + 0.5 * hs * k2, hr)
        k4 = -c2 * _cum4_np(X + hs * k3, hr)
        X = X + hs / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        q = _cum4_np(X, hr)
        y_edge[n] = 1j * C * q[-1]
        if keep:
            xs[n], ys[n] = X, 1j * C * q
        if n_in > 0:
            growth = max(growth, (_frontier(X, y_edge, n, hr, hs) - n_in) / n_in)
    return X, y_edge, growth, xs, ys


def lattice_march(x_in, C, n_s, scheme="order-2", keep=False):
    """March the two-field pair across the unit square.

    Returns ``(x_out, y_edge, growth, xs, ys)``: the marched field at s = 1 on
    the r lattice, the partner field at r = 1 for every s node, the largest
    relative excess of the energy frontier over the input, and (when
    ``keep``) both fields on the full lattice, shaped ``(n_s, n_r)``.
    """
    x_in = np.ascontiguousarray(x_in, dtype=complex)
    if scheme == "order-2":
        fn = pick(_cn_march_nb, _cn_march_np)
    elif scheme == "order-4":
        if x_in.size < 4:
            raise ValueError("order-4 quadrature needs at least 4 lattice points")
        fn = pick(_rk4_march_nb, _rk4_march_np)
    else:
        raise ValueError(f"unknown scheme {scheme!r}")
    return fn(x_in, float(C), int(n_s), bool(keep))


IMPLEMENTATIONS = {
    "bessel_matrix": (_bessel_matrix_nb, _bessel_matrix_np),
    "bessel_matvec": (_bessel_matvec_nb, _bessel_matvec_np),
    "volterra": (_volterra_nb, _volterra_np),
    "cn_march": (_cn_march_nb, _cn_march_np),
    "rk4_march": (_rk4_march_nb, _rk4_march_np),
}
