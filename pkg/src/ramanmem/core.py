"""Domain types, grids, pulse construction and derived control quantities.

Conventions used throughout the package:

* Times in seconds, angular frequencies in rad/s, energies in joules.
* Envelopes are complex amplitudes in sqrt(photon flux) units, so that the
  trapezoidal integral of ``|A|**2`` over the time grid is a photon number.
* ``control_fwhm`` and ``signal_fwhm`` are intensity (``|.|**2``) widths.
* Every integral, in time or depth, is the trapezoidal rule on a uniform grid.
"""
from __future__ import annotations

import logging
import math
import warnings
from dataclasses import dataclass, field, replace
from functools import cached_property

import numpy as np

from .errors import GridError, InvalidParameterError, ResolutionError

log = logging.getLogger(__name__)

TWO_PI = 2.0 * math.pi
# time-bandwidth product of a transform-limited Gaussian (intensity FWHMs)
GAUSSIAN_TBP = 2.0 * math.log(2.0) / math.pi
MIN_SAMPLES_PER_FWHM = 8


def trapezoid_weights(n: int, h: float) -> np.ndarray:
    w = np.full(n, h)
    w[0] = w[-1] = 0.5 * h
    return w


def cumulative_trapezoid(y: np.ndarray, h: float) -> np.ndarray:
    out = np.zeros(y.shape, dtype=np.result_type(y, float))
    out[1:] = np.cumsum(0.5 * h * (y[1:] + y[:-1]))
    return out


@dataclass(frozen=True)
class PhysicalParams:
    """Scalar physics of one memory configuration.

    ``kappa`` maps pulse energy to the integrated squared Rabi frequency,
    ``W = kappa * E`` (rad^2/s). ``gamma`` is the homogeneous linewidth of the
    excited state; ``gamma_convention`` says whether the stored number is a
    half width ("hwhm") or full width ("fwhm"). The coupling always uses the
    half width.
    """

    optical_depth: float = 1800.0
    gamma: float = TWO_PI * 100e6
    detuning: float = TWO_PI * 18.4e9
    pulse_energy: float = 4.8e-9
    kappa: float = 0.0
    control_fwhm: float = 300e-12
    signal_fwhm: float = 300e-12
    signal_delay: float = 0.0
    storage_time: float = 12.5e-9
    spin_decay: float = 0.0
    gamma_convention: str = "hwhm"

    def __post_init__(self):
        checks = [
            (self.optical_depth > 0, "optical_depth must be > 0"),
            (self.gamma > 0, "gamma must be > 0"),
            (abs(self.detuning) > 0, "detuning must be nonzero"),
            (self.pulse_energy >= 0, "pulse_energy must be >= 0"),
            (self.kappa >= 0, "kappa must be >= 0"),
            (self.control_fwhm > 0, "control_fwhm must be > 0"),
            (self.signal_fwhm > 0, "signal_fwhm must be > 0"),
            (self.storage_time >= 0, "storage_time must be >= 0"),
            (self.spin_decay >= 0, "spin_decay must be >= 0"),
            (self.gamma_convention in ("hwhm", "fwhm"), "gamma_convention must be hwhm or fwhm"),
        ]
        for ok, msg in checks:
            if not ok:
                raise InvalidParameterError(msg)
        values = [self.optical_depth, self.gamma, self.detuning, self.pulse_energy, self.kappa,
                  self.control_fwhm, self.signal_fwhm, self.signal_delay, self.storage_time,
                  self.spin_decay]
        if not all(math.isfinite(v) for v in values):
            raise InvalidParameterError("physical parameters must be finite")
        bandwidth = TWO_PI * GAUSSIAN_TBP / self.signal_fwhm
        if abs(self.detuning) < 10.0 * bandwidth:
            warnings.warn(
                f"detuning {abs(self.detuning) / TWO_PI:.3g} Hz is less than 10x the signal "
                f"bandwidth {bandwidth / TWO_PI:.3g} Hz; adiabatic elimination is doubtful",
                stacklevel=3,
            )

    @property
    def gamma_hwhm(self) -> float:
        return self.gamma if self.gamma_convention == "hwhm" else 0.5 * self.gamma

    @property
    def W(self) -> float:
        return self.kappa * self.pulse_energy

    def coupling_sq(self, W: float | None = None) -> float:
        W = self.W if W is None else W
        return self.optical_depth * self.gamma_hwhm * W / self.detuning**2

    @property
    def coupling(self) -> float:
        return math.sqrt(self.coupling_sq())

    def kappa_for_coupling(self, C: float, energy: float | None = None) -> float:
        """The ``kappa`` that gives coupling ``C`` at ``energy`` (default: own energy)."""
        energy = self.pulse_energy if energy is None else energy
        if energy <= 0:
            raise InvalidParameterError("a positive pulse energy is needed to set the coupling")
        return C * C * self.detuning**2 / (self.optical_depth * self.gamma_hwhm * energy)

    def with_(self, **changes) -> "PhysicalParams":
        return replace(self, **changes)


@dataclass(frozen=True)
class TimeGrid:
    t_start: float
    t_end: float
    n_points: int

    def __post_init__(self):
        if self.n_points < 2:
            raise GridError("time grid needs at least 2 points")
        if not self.t_end > self.t_start:
            raise GridError("time grid must be strictly increasing")

    @property
    def dt(self) -> float:
        return (self.t_end - self.t_start) / (self.n_points - 1)

    @cached_property
    def t(self) -> np.ndarray:
        return np.linspace(self.t_start, self.t_end, self.n_points)

    @cached_property
    def weights(self) -> np.ndarray:
        return trapezoid_weights(self.n_points, self.dt)

    def refined(self, factor: int) -> "TimeGrid":
        return TimeGrid(self.t_start, self.t_end, self.n_points * factor)

    def integrate(self, y: np.ndarray):
        return np.dot(self.weights, y)


@dataclass(frozen=True)
class DepthGrid:
    """Normalised depth z in [0, 1]; z = 1 is the exit face."""

    n_points: int

    def __post_init__(self):
        if self.n_points < 2:
            raise GridError("depth grid needs at least 2 points")

    @property
    def dz(self) -> float:
        return 1.0 / (self.n_points - 1)

    @cached_property
    def z(self) -> np.ndarray:
        return np.linspace(0.0, 1.0, self.n_points)

    @cached_property
    def weights(self) -> np.ndarray:
        return trapezoid_weights(self.n_points, self.dz)

    def refined(self, factor: int) -> "DepthGrid":
        return DepthGrid(self.n_points * factor)

    def integrate(self, y: np.ndarray):
        return np.dot(self.weights, y)


@dataclass(frozen=True, eq=False)
class ComplexEnvelope:
    grid: TimeGrid
    values: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values, dtype=complex)
        if v.shape != (self.grid.n_points,):
            raise GridError(f"envelope has {v.shape} samples, grid has {self.grid.n_points}")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    @property
    def intensity(self) -> np.ndarray:
        return np.abs(self.values) ** 2

    def norm(self) -> float:
        """Photon number, trapezoidal integral of |A|^2."""
        return float(self.grid.integrate(self.intensity))

    def scaled(self, c) -> "ComplexEnvelope":
        return ComplexEnvelope(self.grid, c * self.values)

    def centroid(self) -> float:
        n = self.norm()
        return float(self.grid.integrate(self.grid.t * self.intensity) / n)


@dataclass(frozen=True, eq=False)
class SpinWaveProfile:
    grid: DepthGrid
    values: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values, dtype=complex)
        if v.shape != (self.grid.n_points,):
            raise GridError(f"spin wave has {v.shape} samples, grid has {self.grid.n_points}")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    def norm(self) -> float:
        """Excitation number, trapezoidal integral of |B|^2 over z."""
        return float(self.grid.integrate(np.abs(self.values) ** 2))

    def flipped(self) -> "SpinWaveProfile":
        return SpinWaveProfile(self.grid, self.values[::-1])


@dataclass(frozen=True, eq=False)
class ControlProfile:
    """A write or read pulse together with its derived quantities.

    ``omega`` is the cumulative normalised pulse energy (0 at the start of
    the grid, exactly 1 at the end) and ``f`` the Stark-shifted profile
    ``C exp(i W omega / detuning) rabi / sqrt(W)``. ``linear_phase`` is the
    constant dispersion phase ``d gamma / detuning`` picked up by light
    crossing the cell; it is only applied on request.
    """

    grid: TimeGrid
    rabi: np.ndarray
    W: float
    omega: np.ndarray
    f: np.ndarray
    C: float
    detuning: float
    linear_phase: float = 0.0
    center: float = 0.0
    fwhm: float = field(default=float("nan"))

    @property
    def stark_phase(self) -> np.ndarray:
        if self.W == 0:
            return np.zeros(self.grid.n_points)
        return self.W * self.omega / self.detuning


def gaussian_envelope(grid: TimeGrid, center: float, fwhm: float, norm: float = 1.0,
                      phase: float = 0.0) -> ComplexEnvelope:
    """Gaussian pulse whose intensity has the given FWHM and photon number ``norm``."""
    if not fwhm > 0:
        raise InvalidParameterError(f"fwhm must be positive, got {fwhm}")
    if norm < 0:
        raise InvalidParameterError("norm must be >= 0")
    if fwhm / grid.dt < MIN_SAMPLES_PER_FWHM:
        raise ResolutionError(
            f"{fwhm / grid.dt:.1f} samples per FWHM; need at least {MIN_SAMPLES_PER_FWHM}"
        )
    if center - 3 * fwhm < grid.t_start or center + 3 * fwhm > grid.t_end:
        warnings.warn("Gaussian pulse is truncated by the time grid", stacklevel=2)
    shape = np.exp(-2.0 * math.log(2.0) * ((grid.t - center) / fwhm) ** 2)
    scale = math.sqrt(norm / grid.integrate(shape**2)) if norm > 0 else 0.0
    return ComplexEnvelope(grid, scale * shape * np.exp(1j * phase))


def build_control(params: PhysicalParams, grid: TimeGrid, center: float = 0.0) -> ControlProfile:
    """Write/read pulse of energy ``params.pulse_energy`` with its ``omega``, ``f`` and ``C``.

    At zero energy ``omega`` is defined as identically zero, so every kernel
    reduces to pass-through (transmission) or zero (storage, retrieval).
    """
    W = params.W
    if W == 0:
        zeros = np.zeros(grid.n_points)
        return ControlProfile(grid, zeros.astype(complex), 0.0, zeros, zeros.astype(complex), 0.0,
                              params.detuning, 0.0, center, params.control_fwhm)
    rabi = gaussian_envelope(grid, center, params.control_fwhm, norm=W).values
    cum = cumulative_trapezoid(np.abs(rabi) ** 2, grid.dt)
    W_grid = float(cum[-1])
    omega = cum / W_grid
    C = math.sqrt(params.coupling_sq(W_grid))
    f = C * np.exp(1j * W_grid * omega / params.detuning) * rabi / math.sqrt(W_grid)
    linear_phase = params.optical_depth * params.gamma_hwhm / params.detuning
    return ControlProfile(grid, rabi, W_grid, omega, f, C, params.detuning, linear_phase, center,
                          params.control_fwhm)


def control_from_rabi(rabi: np.ndarray, grid: TimeGrid, params: PhysicalParams) -> ControlProfile:
    """Control profile from arbitrary complex Rabi samples (W from the samples)."""
    rabi = np.asarray(rabi, dtype=complex)
    cum = cumulative_trapezoid(np.abs(rabi) ** 2, grid.dt)
    W = float(cum[-1])
    if W == 0:
        zeros = np.zeros(grid.n_points)
        return ControlProfile(grid, rabi, 0.0, zeros, zeros.astype(complex), 0.0, params.detuning)
    omega = cum / W
    C = math.sqrt(params.coupling_sq(W))
    f = C * np.exp(1j * W * omega / params.detuning) * rabi / math.sqrt(W)
    linear_phase = params.optical_depth * params.gamma_hwhm / params.detuning
    return ControlProfile(grid, rabi, W, omega, f, C, params.detuning, linear_phase)


def control_with_coupling(control: ControlProfile, C: float, params: PhysicalParams) -> ControlProfile:
    """Rescale a control profile's energy so that its coupling equals ``C``."""
    if C == 0:
        return control_from_rabi(np.zeros(control.grid.n_points), control.grid, params)
    W_target = C * C * params.detuning**2 / (params.optical_depth * params.gamma_hwhm)
    if control.W == 0:
        raise InvalidParameterError("cannot rescale a zero-energy control")
    return control_from_rabi(control.rabi * math.sqrt(W_target / control.W), control.grid, params)


def signal_bandwidth(fwhm: float) -> float:
    """FWHM bandwidth in Hz of a transform-limited Gaussian of intensity FWHM ``fwhm``."""
    return GAUSSIAN_TBP / fwhm
