"""Analytic storage, transmission and retrieval maps, and the efficiency and
visibility functionals built on them.

Storage evaluates

    B(z) = int f(t) J0(2 C sqrt((1 - omega(t)) z)) A_in(t) dt

and retrieval

    A_out(t) = conj(f(t)) int_0^1 J0(2 C sqrt(omega(t) (1 - z))) B(z) dz,

with backward readout applying the same formula to B(1 - z).

Transmission is not a printed formula; it follows from the adiabatic pair
behind the storage kernel. In the coordinate u = omega(t), with
alpha = A sqrt(W) / rabi rotated by the Stark phase, the fields obey

    d alpha / dz = i C beta,    d beta / du = i C alpha,

whose solution at z = 1 is

    alpha_out(u) = alpha_in(u) - C int_0^u J1(2 C sqrt(u - u')) / sqrt(u - u') alpha_in(u') du'.

Mapping back to t removes every division by the Rabi frequency:

    A_trans(t) = A_in(t) - conj(f(t)) int_{-inf}^t K(omega(t) - omega(t')) f(t') A_in(t') dt'

with K(s) = 2 J1(x) / x, x = 2 C sqrt(s), and K(0) = 1. Where the control
vanishes f = 0 and the signal passes unchanged.

Overall factors of i are dropped, as in the storage and retrieval formulas;
no efficiency or |visibility| depends on them.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import NamedTuple, Optional

import numpy as np

from .core import ComplexEnvelope, ControlProfile, DepthGrid, SpinWaveProfile
from .errors import GridError, InputError, UndefinedEfficiencyError
from .kernels import bessel_matvec, volterra_apply

SUPPORT_FLOOR = 1e-8  # |rabi| / max|rabi| below this counts as "no control"


@dataclass(frozen=True)
class EfficiencyReport:
    n_in: float
    n_mem: float
    n_trans: float
    n_out: float
    eta_store: float
    eta_ret: Optional[float]
    eta_tot: float
    visibility: Optional[float]
    transmission: float
    closure_residual: float

    def as_dict(self) -> dict:
        return {k: getattr(self, k) for k in self.__dataclass_fields__}


class Visibility(NamedTuple):
    balanced: float
    raw: float


def _check_inputs(a_in: ComplexEnvelope, control: ControlProfile):
    if a_in.grid != control.grid:
        raise GridError("signal and control are sampled on different time grids")
    if not np.all(np.isfinite(a_in.values)):
        raise InputError("signal envelope contains non-finite samples")
    if not (np.all(np.isfinite(control.f)) and np.all(np.isfinite(control.omega))):
        raise InputError("control profile contains non-finite samples")


def _support_warning(a_in: ComplexEnvelope, control: ControlProfile):
    if control.C == 0:
        return
    mag = np.abs(control.rabi)
    outside = mag < SUPPORT_FLOOR * mag.max()
    n = a_in.norm()
    if n > 0:
        frac = float(a_in.grid.integrate(np.where(outside, a_in.intensity, 0.0))) / n
        if frac > 0.01:
            warnings.warn(
                f"{100 * frac:.1f}% of the signal lies outside the control pulse and passes unchanged",
                stacklevel=3,
            )


def store(a_in: ComplexEnvelope, control: ControlProfile, zgrid: DepthGrid) -> SpinWaveProfile:
    """Spin wave left in the ensemble after the write pulse."""
    _check_inputs(a_in, control)
    if control.C == 0:
        return SpinWaveProfile(zgrid, np.zeros(zgrid.n_points, dtype=complex))
    g = a_in.grid.weights * control.f * a_in.values
    B = bessel_matvec(zgrid.z, 1.0 - control.omega, control.C, g)
    return SpinWaveProfile(zgrid, B)


def transmit(a_in: ComplexEnvelope, control: ControlProfile,
             include_linear_phase: bool = False) -> ComplexEnvelope:
    """Signal leaving the exit face during the write pulse."""
    _check_inputs(a_in, control)
    if control.C == 0:
        return ComplexEnvelope(a_in.grid, a_in.values.copy())
    _support_warning(a_in, control)
    h = control.f * a_in.values
    conv = volterra_apply(control.omega, control.C, h, a_in.grid.dt)
    out = a_in.values - np.conj(control.f) * conv
    if include_linear_phase:
        out = out * np.exp(-1j * control.linear_phase)
    return ComplexEnvelope(a_in.grid, out)


def retrieve(b: SpinWaveProfile, control: ControlProfile, direction: str = "forward",
             include_linear_phase: bool = False) -> ComplexEnvelope:
    """Signal emitted by the read pulse; ``direction`` is "forward" or "backward"."""
    if direction not in ("forward", "backward"):
        raise ValueError(f"direction must be forward or backward, got {direction!r}")
    if not np.all(np.isfinite(b.values)):
        raise InputError("spin wave contains non-finite samples")
    grid = control.grid
    if control.C == 0 or not np.any(b.values):
        return ComplexEnvelope(grid, np.zeros(grid.n_points, dtype=complex))
    values = b.values[::-1] if direction == "backward" else b.values
    h = b.grid.weights * values
    out = np.conj(control.f) * bessel_matvec(control.omega, 1.0 - b.grid.z, control.C, h)
    if include_linear_phase:
        out = out * np.exp(-1j * control.linear_phase)
    return ComplexEnvelope(grid, out)


def overlap(a: ComplexEnvelope, b: ComplexEnvelope) -> complex:
    """Quadrature inner product of two envelopes on the same grid."""
    if a.grid != b.grid:
        raise GridError("envelopes are sampled on different time grids")
    return complex(a.grid.integrate(np.conj(a.values) * b.values))


def overlap_visibility(a_ref: ComplexEnvelope, a_out: ComplexEnvelope) -> Visibility:
    """Interference visibility of two fields.

    ``balanced`` assumes the reference arm is attenuated to match the
    retrieved photon number; ``raw`` uses the arms as given.
    """
    n_ref, n_out = a_ref.norm(), a_out.norm()
    if n_ref <= 0 or n_out <= 0:
        raise UndefinedEfficiencyError("visibility is undefined for a zero-norm field")
    ov = abs(overlap(a_ref, a_out))
    balanced = min(ov / math.sqrt(n_ref * n_out), 1.0)
    raw = min(2.0 * ov / (n_ref + n_out), 1.0)
    return Visibility(balanced, raw)


def efficiencies(a_in: ComplexEnvelope, a_trans: ComplexEnvelope, b_mem: SpinWaveProfile,
                 a_out: Optional[ComplexEnvelope] = None) -> EfficiencyReport:
    n_in = a_in.norm()
    if n_in <= 0:
        raise UndefinedEfficiencyError("efficiencies are undefined for an empty input field")
    if a_trans.grid != a_in.grid:
        raise GridError("transmitted field is on a different grid from the input")
    n_trans = a_trans.norm()
    n_mem = b_mem.norm()
    n_out = a_out.norm() if a_out is not None else 0.0
    eta_store = n_mem / n_in
    eta_tot = n_out / n_in
    eta_ret = eta_tot / eta_store if n_mem > 0 else None
    vis = None
    if a_out is not None and n_out > 0:
        vis = overlap_visibility(a_in, a_out).balanced
    return EfficiencyReport(
        n_in=n_in, n_mem=n_mem, n_trans=n_trans, n_out=n_out,
        eta_store=eta_store, eta_ret=eta_ret, eta_tot=eta_tot, visibility=vis,
        transmission=n_trans / n_in,
        closure_residual=(n_in - n_mem - n_trans) / n_in,
    )
