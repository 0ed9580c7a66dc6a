"""Memory maps as matrices, their dominant singular modes, efficiency sweeps
and the energy -> coupling calibration.

Every map is discretised with square-root quadrature weights on both sides,
``M[k, j] = sqrt(w_out[k]) K(x_k, y_j) sqrt(w_in[j])``, so that for a field
sampled as ``a_j`` the vector ``sqrt(w_in) * a`` carries its photon number as a
plain Euclidean norm. Singular values are then amplitude transfer ratios and
``sigma_max**2`` is the best efficiency any input shape can reach.

Total maps are kept as a product of factors and applied factor by factor, so
the square retrieval-times-storage matrix is never formed unless asked for.
"""
from __future__ import annotations

import csv
import io
import math
from dataclasses import asdict, dataclass, field, replace
from typing import Iterable, Optional, Sequence

import numpy as np
from scipy.optimize import brentq

from .core import MIN_SAMPLES_PER_FWHM, DepthGrid, PhysicalParams, TimeGrid, build_control
from .errors import (CalibrationError, ConvergenceError, GridError, InfeasibleCalibrationError,
                     InvalidParameterError)
from .kernels import bessel_matrix
from .model import NJ, MemorySetup

MIN_DEPTH_POINTS = 64
MAX_ITER = 20000
PLATEAU_SLOPE = 0.005  # efficiency change per nJ below which eta_opt_fwd counts as flat
SWEEP_HEADER = ("energy_nJ", "eta_store", "eta_tot", "eta_ret", "eta_opt_fwd", "eta_opt_bwd")
MAP_KINDS = ("storage", "retrieval_forward", "retrieval_backward", "total_forward", "total_backward")


# ---------------------------------------------------------------- linear maps

@dataclass(frozen=True, eq=False)
class LinearMap:
    """A (possibly factored) weighted matrix from input samples to output samples.

    ``factors`` are applied right to left: ``M = factors[0] @ ... @ factors[-1]``.
    """

    factors: tuple
    kind: str
    input_grid: object
    output_grid: object
    coupling: float = 0.0

    @property
    def shape(self) -> tuple[int, int]:
        return (self.factors[0].shape[0], self.factors[-1].shape[1])

    @property
    def matrix(self) -> np.ndarray:
        out = self.factors[-1]
        for f in reversed(self.factors[:-1]):
            out = f @ out
        return out

    def matvec(self, x: np.ndarray) -> np.ndarray:
        for f in reversed(self.factors):
            x = f @ x
        return x

    def rmatvec(self, y: np.ndarray) -> np.ndarray:
        for f in self.factors:
            y = f.conj().T @ y
        return y

    def input_weights(self) -> np.ndarray:
        return np.sqrt(self.input_grid.weights)

    def apply(self, values: np.ndarray) -> np.ndarray:
        """Map field samples (not weighted) to weighted output samples."""
        return self.matvec(self.input_weights() * np.asarray(values, dtype=complex))

    def efficiency(self, values: np.ndarray) -> float:
        """``||M a||^2 / ||a||^2`` for an input field given by its samples."""
        x = self.input_weights() * np.asarray(values, dtype=complex)
        n = float(np.vdot(x, x).real)
        if n == 0:
            raise InvalidParameterError("efficiency of an empty input is undefined")
        y = self.matvec(x)
        return float(np.vdot(y, y).real) / n


def as_map(matrix: np.ndarray) -> LinearMap:
    """Wrap a bare matrix (unit weights) for ``dominant_mode``."""
    m = np.asarray(matrix, dtype=complex)
    if m.ndim != 2:
        raise InvalidParameterError("a linear map needs a 2-D matrix")
    if not np.all(np.isfinite(m)):
        raise InvalidParameterError("map contains non-finite entries")
    return LinearMap((m,), "matrix", None, None)


def check_grids(params: PhysicalParams, tgrid: TimeGrid, zgrid: DepthGrid):
    narrowest = min(params.control_fwhm, params.signal_fwhm)
    if narrowest / tgrid.dt < MIN_SAMPLES_PER_FWHM:
        raise GridError(
            f"time grid has {narrowest / tgrid.dt:.1f} samples per pulse FWHM; "
            f"need at least {MIN_SAMPLES_PER_FWHM}"
        )
    if zgrid.n_points < MIN_DEPTH_POINTS:
        raise GridError(f"depth grid has {zgrid.n_points} points; need at least {MIN_DEPTH_POINTS}")


def _storage_matrix(control, tgrid, zgrid) -> np.ndarray:
    J = bessel_matrix(zgrid.z, 1.0 - control.omega, control.C)
    return (np.sqrt(zgrid.weights)[:, None] * J) * (control.f * np.sqrt(tgrid.weights))[None, :]


def _retrieval_matrix(control, tgrid, zgrid, direction) -> np.ndarray:
    J = bessel_matrix(control.omega, 1.0 - zgrid.z, control.C)
    R = (np.conj(control.f) * np.sqrt(tgrid.weights))[:, None] * J * np.sqrt(zgrid.weights)[None, :]
    # backward readout sees B(1 - z): reverse the input columns
    return R[:, ::-1] if direction == "backward" else R


def build_map(kind: str, params: PhysicalParams, tgrid: TimeGrid, zgrid: DepthGrid,
              read_params: Optional[PhysicalParams] = None) -> LinearMap:
    """Discretised storage, retrieval or storage-then-retrieval map.

    Write and read pulses are built from ``params`` (``read_params`` for the
    read pulse when given). Total maps include the spin-wave amplitude decay
    over ``params.storage_time``.
    """
    if kind not in MAP_KINDS:
        raise InvalidParameterError(f"unknown map kind {kind!r}; expected one of {MAP_KINDS}")
    check_grids(params, tgrid, zgrid)
    write = build_control(params, tgrid)
    read = build_control(read_params or params, tgrid)
    zeros = np.zeros((zgrid.n_points, tgrid.n_points), dtype=complex)
    S = zeros if write.C == 0 else _storage_matrix(write, tgrid, zgrid)
    if kind == "storage":
        return LinearMap((S,), kind, tgrid, zgrid, write.C)
    direction = "backward" if kind.endswith("backward") else "forward"
    if read.C == 0:
        R = zeros.T.copy()
    else:
        R = _retrieval_matrix(read, tgrid, zgrid, direction)
    if kind.startswith("retrieval"):
        return LinearMap((R,), kind, zgrid, tgrid, read.C)
    decay = math.exp(-params.spin_decay * params.storage_time)
    return LinearMap((decay * R, S), kind, tgrid, tgrid, write.C)


# ---------------------------------------------------------------- singular modes

@dataclass(frozen=True, eq=False)
class DominantMode:
    sigma: float
    input_mode: np.ndarray
    output_mode: np.ndarray
    iterations: int

    def __iter__(self):
        # unpacks as (sigma, input_mode, output_mode)
        return iter((self.sigma, self.input_mode, self.output_mode))


def dominant_mode(m, tol: float = 1e-12, max_iter: int = MAX_ITER) -> DominantMode:
    """Largest singular value and its vectors by power iteration on ``M^H M``.

    The start vector is all ones (normalised), so results are reproducible.
    Iteration stops when successive sigma estimates differ by less than
    ``tol``. Modes are returned in the weighted coordinates of the map; a
    zero map returns sigma = 0 with the start vector as its input mode.
    """
    if not isinstance(m, LinearMap):
        m = as_map(m)
    if not tol > 0:
        raise InvalidParameterError("tol must be positive")
    n_in = m.shape[1]
    v = np.ones(n_in, dtype=complex) / math.sqrt(n_in)
    y = m.matvec(v)
    sigma = float(np.linalg.norm(y))
    if not math.isfinite(sigma):
        raise InvalidParameterError("map contains non-finite entries")
    if sigma == 0.0:
        return DominantMode(0.0, v, np.zeros(m.shape[0], dtype=complex), 0)
    steps = []
    for it in range(1, max_iter + 1):
        v = m.rmatvec(y)
        v /= np.linalg.norm(v)
        y = m.matvec(v)
        new = float(np.linalg.norm(y))
        steps.append(abs(new - sigma))
        if abs(new - sigma) < tol:
            sigma = new
            return DominantMode(sigma, v, y / sigma, it)
        sigma = new
    # the step ratio approaches (sigma_2 / sigma_1)^2
    ratio = steps[-1] / steps[-2] if len(steps) > 1 and steps[-2] > 0 else float("nan")
    gap = 1.0 - math.sqrt(ratio) if 0 < ratio < 1 else float("nan")
    raise ConvergenceError(
        f"power iteration did not converge in {max_iter} steps (sigma ~ {sigma:.6g}, "
        f"relative gap estimate {gap:.3g})",
        gap=gap,
    )


def dense_dominant(m) -> DominantMode:
    """Reference answer from a full SVD; for small maps and tests."""
    mat = m.matrix if isinstance(m, LinearMap) else np.asarray(m, dtype=complex)
    u, s, vh = np.linalg.svd(mat)
    return DominantMode(float(s[0]), vh[0].conj(), u[:, 0], 0)


def optimal_efficiency(kind: str, params: PhysicalParams, tgrid: TimeGrid, zgrid: DepthGrid,
                       tol: float = 1e-12) -> float:
    return dominant_mode(build_map(kind, params, tgrid, zgrid), tol).sigma ** 2


# ---------------------------------------------------------------- sweep tables

@dataclass(frozen=True)
class SweepRow:
    energy_nJ: float
    eta_store: Optional[float] = None
    eta_tot: Optional[float] = None
    eta_ret: Optional[float] = None
    eta_opt_fwd: Optional[float] = None
    eta_opt_bwd: Optional[float] = None
    transmission: Optional[float] = None


def _fmt(x) -> str:
    return "" if x is None else f"{x:.12g}"


@dataclass(frozen=True)
class SweepTable:
    rows: tuple = field(default_factory=tuple)

    def __post_init__(self):
        e = [r.energy_nJ for r in self.rows]
        if any(b <= a for a, b in zip(e, e[1:])):
            raise InvalidParameterError("sweep energies must be strictly increasing")
        for r in self.rows:
            for name in SWEEP_HEADER[1:] + ("transmission",):
                v = getattr(r, name)
                if v is not None and not (-1e-9 <= v <= 1 + 1e-6):
                    raise InvalidParameterError(f"{name}={v} at {r.energy_nJ} nJ is outside [0, 1]")

    def column(self, name: str) -> np.ndarray:
        return np.array([np.nan if getattr(r, name) is None else getattr(r, name) for r in self.rows])

    @property
    def energies(self) -> np.ndarray:
        return self.column("energy_nJ")

    def merged(self, other: "SweepTable") -> "SweepTable":
        """Fill this table's empty cells from ``other`` (rows matched by energy)."""
        by_e = {r.energy_nJ: r for r in other.rows}
        rows = []
        for r in self.rows:
            o = by_e.get(r.energy_nJ)
            if o is not None:
                r = replace(r, **{k: v for k, v in asdict(o).items() if getattr(r, k) is None})
            rows.append(r)
        return SweepTable(tuple(rows))

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(SWEEP_HEADER)
        for r in self.rows:
            w.writerow([_fmt(getattr(r, k)) for k in SWEEP_HEADER])
        return buf.getvalue()

    @classmethod
    def from_csv(cls, text: str) -> "SweepTable":
        reader = csv.reader(io.StringIO(text))
        header = tuple(next(reader))
        if header != SWEEP_HEADER:
            raise InvalidParameterError(f"unexpected sweep header {header}")
        rows = []
        for line in reader:
            vals = [None if s == "" else float(s) for s in line]
            rows.append(SweepRow(**dict(zip(SWEEP_HEADER, vals))))
        return cls(tuple(rows))

    def to_records(self) -> list[dict]:
        return [asdict(r) for r in self.rows]

    @classmethod
    def from_records(cls, records: Iterable[dict]) -> "SweepTable":
        return cls(tuple(SweepRow(**r) for r in records))


def _energies(energies: Sequence[float]) -> list[float]:
    e = [float(x) for x in energies]
    if not e:
        raise InvalidParameterError("energy list is empty")
    if any(x < 0 for x in e):
        raise InvalidParameterError("pulse energies must be >= 0")
    return sorted(set(e))


def efficiency_sweep(setup: MemorySetup, energies: Sequence[float]) -> SweepTable:
    """Gaussian-mode storage, total and retrieval efficiency per pulse energy (nJ)."""
    rows = []
    for e in _energies(energies):
        rep = setup.with_energy(e).run().report
        rows.append(SweepRow(e, rep.eta_store, rep.eta_tot, rep.eta_ret,
                             transmission=rep.transmission))
    return SweepTable(tuple(rows))


def bounds_curve(setup: MemorySetup, energies: Sequence[float], tol: float = 1e-12) -> SweepTable:
    """Optimal forward and backward total efficiency per pulse energy (nJ)."""
    rows = []
    for e in _energies(energies):
        s = setup.with_energy(e)
        read = None if s.read_energy is None else s.params.with_(pulse_energy=s.read_energy)
        fwd = dominant_mode(build_map("total_forward", s.params, s.tgrid, s.zgrid, read), tol)
        bwd = dominant_mode(build_map("total_backward", s.params, s.tgrid, s.zgrid, read), tol)
        rows.append(SweepRow(e, eta_opt_fwd=fwd.sigma ** 2, eta_opt_bwd=bwd.sigma ** 2))
    return SweepTable(tuple(rows))


def plateau_energies(table: SweepTable, column: str = "eta_opt_fwd",
                     slope: float = PLATEAU_SLOPE) -> np.ndarray:
    """Interval midpoints (nJ) where ``column`` changes by less than ``slope`` per nJ."""
    e = table.energies
    y = table.column(column)
    d = np.diff(y) / np.diff(e)
    mid = 0.5 * (e[1:] + e[:-1])
    return mid[np.abs(d) < slope]


def plateau_value(table: SweepTable, column: str = "eta_opt_fwd",
                  slope: float = PLATEAU_SLOPE) -> Optional[float]:
    """``column`` at the first flat interval above zero energy, or None."""
    e = table.energies
    y = table.column(column)
    for i in range(len(e) - 1):
        if e[i] > 0 and abs((y[i + 1] - y[i]) / (e[i + 1] - e[i])) < slope:
            return float(0.5 * (y[i] + y[i + 1]))
    return None


# ---------------------------------------------------------------- calibration

def calibrate_kappa(setup: MemorySetup, target_energy: float = 4.8, target_eta: float = 0.30,
                    tol: float = 1e-6, max_coupling: float = 8.0) -> float:
    """``kappa`` such that the signal's storage efficiency at ``target_energy`` (nJ)
    equals ``target_eta``.

    The bracket starts at C = 0.5 and doubles the coupling (kappa grows 4x)
    until the target is exceeded; past ``max_coupling`` the target is declared
    unreachable: an infeasible-target error if the optimal storage bound
    there is below the target as well, otherwise a calibration error. The
    root is then polished with Brent's method.
    """
    if not 0 <= target_eta < 1:
        raise InfeasibleCalibrationError(f"target storage efficiency {target_eta} is not in [0, 1)")
    if target_eta == 0:
        return 0.0
    if not target_energy > 0:
        raise InvalidParameterError("calibration energy must be positive")
    base = setup.with_energy(target_energy)
    p = base.params

    def eta(kappa: float) -> float:
        return base.with_kappa(kappa).storage_efficiency()

    lo, C = 0.0, 0.5
    hi = p.kappa_for_coupling(C, target_energy * NJ)
    best = 0.0
    while True:
        val = eta(hi)
        best = max(best, val)
        if val > target_eta:
            break
        lo = hi
        C *= 2.0
        if C > max_coupling:
            bound = optimal_efficiency("storage", base.with_kappa(hi).params, base.tgrid, base.zgrid,
                                       tol=1e-8)
            if target_eta > bound:
                raise InfeasibleCalibrationError(
                    f"target {target_eta} exceeds the optimal storage efficiency {bound:.4f}"
                )
            raise CalibrationError(
                f"could not bracket eta_store = {target_eta}; best reached {best:.4f}"
            )
        hi = p.kappa_for_coupling(C, target_energy * NJ)

    try:
        kappa = brentq(lambda k: eta(k) - target_eta, lo, hi, xtol=1e-16 * hi, rtol=1e-14,
                       maxiter=200)
    except (ValueError, RuntimeError) as exc:
        raise CalibrationError(f"root finding failed: {exc}") from exc
    if abs(eta(kappa) - target_eta) > tol:
        raise CalibrationError(f"calibration missed the target by {abs(eta(kappa) - target_eta):.2e}")
    return float(kappa)
