"""Measurement-chain emulation: etalon timing/duration adjustment, spin-wave
decay during storage, detector response and Mach-Zehnder fringes.

Serialisation schemas:

* fringe scan CSV, header ``position,intensity``; one row per scan point.
* fringe fit JSON, keys ``visibility, phase, mean_intensity, period,
  residual_norm, at_boundary``.
"""
from __future__ import annotations

import csv
import json
import math
import warnings
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import Optional

import numpy as np
from scipy.interpolate import CubicSpline
from scipy.optimize import least_squares

from .core import ComplexEnvelope, SpinWaveProfile
from .errors import FitError, InvalidParameterError, UndefinedEfficiencyError
from .raman import overlap


def etalon_adjust(a: ComplexEnvelope, delay: float = 0.0, stretch: float = 1.0) -> ComplexEnvelope:
    """Shift an envelope by ``delay`` and stretch its duration about its intensity centroid.

    The photon number is restored exactly after resampling; if more than 1%
    of it had to be restored (energy pushed off the grid) a warning is issued.
    """
    if not stretch > 0:
        raise InvalidParameterError("stretch must be positive")
    if delay == 0 and stretch == 1:
        return ComplexEnvelope(a.grid, a.values.copy())
    n = a.norm()
    if n == 0:
        return ComplexEnvelope(a.grid, a.values.copy())
    t = a.grid.t
    c = a.centroid()
    src = c + (t - c - delay) / stretch
    inside = (src >= t[0]) & (src <= t[-1])
    spline_re = CubicSpline(t, a.values.real)
    spline_im = CubicSpline(t, a.values.imag)
    out = np.zeros(t.size, dtype=complex)
    out[inside] = (spline_re(src[inside]) + 1j * spline_im(src[inside])) / math.sqrt(stretch)
    moved = ComplexEnvelope(a.grid, out)
    n_new = moved.norm()
    if n_new == 0:
        raise InvalidParameterError("adjustment moved the whole envelope off the grid")
    if abs(n_new - n) > 0.01 * n:
        warnings.warn(
            f"etalon adjustment pushed {100 * (1 - n_new / n):.1f}% of the energy off the grid",
            stacklevel=2,
        )
    return moved.scaled(math.sqrt(n / n_new))


def spinwave_decay(b: SpinWaveProfile, t_store: float, gamma_b: float) -> SpinWaveProfile:
    """Uniform amplitude decay ``exp(-gamma_b * t_store)`` of a stored spin wave."""
    if t_store < 0 or gamma_b < 0:
        raise InvalidParameterError("storage time and decay rate must be >= 0")
    return SpinWaveProfile(b.grid, b.values * math.exp(-gamma_b * t_store))


def _response_kernel(dt: float, fwhm: float, shape: str, span_points: int) -> np.ndarray:
    if shape == "gaussian":
        sigma = fwhm / (2.0 * math.sqrt(2.0 * math.log(2.0)))
        half = min(int(math.ceil(8 * sigma / dt)), span_points)
        x = np.arange(-half, half + 1) * dt
        k = np.exp(-0.5 * (x / sigma) ** 2)
    elif shape == "exponential":
        # one-sided decay; half maximum at t = fwhm
        tau = fwhm / math.log(2.0)
        half = min(int(math.ceil(30 * tau / dt)), span_points)
        x = np.arange(-half, half + 1) * dt
        k = np.where(x >= 0, np.exp(-np.clip(x, 0, None) / tau), 0.0)
    else:
        raise InvalidParameterError(f"unknown detector response shape {shape!r}")
    return k / k.sum()


def detector_convolve(a: ComplexEnvelope, response_fwhm: float, shape: str = "gaussian") -> np.ndarray:
    """Detected intensity: ``|A|^2`` convolved with a unit-area response."""
    if response_fwhm < 0:
        raise InvalidParameterError("response_fwhm must be >= 0")
    intensity = a.intensity
    if response_fwhm == 0:
        return intensity.copy()
    span = a.grid.t_end - a.grid.t_start
    if response_fwhm > span:
        warnings.warn("detector response is longer than the time grid; trace is truncated",
                      stacklevel=2)
    k = _response_kernel(a.grid.dt, response_fwhm, shape, a.grid.n_points)
    half = (k.size - 1) // 2
    return np.convolve(intensity, k, mode="full")[half:half + intensity.size]


def fwhm(t: np.ndarray, y: np.ndarray) -> float:
    """Full width at half maximum of a single-peaked trace, by linear interpolation."""
    y = np.asarray(y, dtype=float)
    i = int(np.argmax(y))
    half = 0.5 * y[i]
    left = i
    while left > 0 and y[left] > half:
        left -= 1
    right = i
    while right < y.size - 1 and y[right] > half:
        right += 1
    if y[left] > half or y[right] > half:
        raise ValueError("trace does not fall to half maximum on both sides")
    tl = t[left] + (half - y[left]) * (t[left + 1] - t[left]) / (y[left + 1] - y[left])
    tr = t[right - 1] + (half - y[right - 1]) * (t[right] - t[right - 1]) / (y[right] - y[right - 1])
    return float(tr - tl)


@dataclass(frozen=True, eq=False)
class FringeScan:
    positions: np.ndarray
    intensities: np.ndarray
    noise_seed: Optional[int] = None

    def __post_init__(self):
        if len(self.positions) != len(self.intensities):
            raise InvalidParameterError("positions and intensities differ in length")
        if np.any(np.asarray(self.intensities) < 0):
            raise InvalidParameterError("intensities must be nonnegative")

    def to_csv(self, path) -> Path:
        path = Path(path)
        with path.open("w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["position", "intensity"])
            for x, y in zip(self.positions, self.intensities):
                w.writerow([f"{x:.12g}", f"{y:.12g}"])
        return path

    @classmethod
    def from_csv(cls, path) -> "FringeScan":
        data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
        return cls(data[:, 0], data[:, 1])


@dataclass(frozen=True)
class FringeFit:
    visibility: float
    phase: float
    mean_intensity: float
    period: float
    residual_norm: float
    at_boundary: bool = False

    def to_json(self, path) -> Path:
        path = Path(path)
        path.write_text(json.dumps(asdict(self), indent=2) + "\n")
        return path

    @classmethod
    def from_json(cls, path) -> "FringeFit":
        return cls(**json.loads(Path(path).read_text()))


def synthesize_fringes(a_ref: ComplexEnvelope, a_out: ComplexEnvelope, positions, wavelength: float,
                       noise_sd: float = 0.0, seed: Optional[int] = None) -> FringeScan:
    """Total intensity at the interferometer output versus path-length offset.

    Noise is additive Gaussian with standard deviation ``noise_sd`` and
    requires an explicit seed; negative samples are clipped to zero.
    """
    n_ref, n_out = a_ref.norm(), a_out.norm()
    if n_ref <= 0 or n_out <= 0:
        raise UndefinedEfficiencyError("both interferometer arms need a nonzero field")
    if not wavelength > 0:
        raise InvalidParameterError("wavelength must be positive")
    x = np.asarray(positions, dtype=float)
    ov = overlap(a_ref, a_out)
    intensity = n_ref + n_out + 2.0 * np.real(np.exp(2j * np.pi * x / wavelength) * ov)
    if noise_sd > 0:
        if seed is None:
            raise InvalidParameterError("noisy fringe synthesis needs an explicit seed")
        intensity = intensity + np.random.default_rng(seed).normal(0.0, noise_sd, x.size)
    return FringeScan(x, np.clip(intensity, 0.0, None), seed)


def fit_fringes(scan: FringeScan, period_guess: float) -> FringeFit:
    """Least-squares fit of ``I0 (1 + V sin(2 pi x / p + phi))``.

    The linear problem at ``period_guess`` seeds a nonlinear refinement of
    all four parameters. ``V`` is clamped to [0, 1]; ``at_boundary`` marks a
    clamped or degenerate fit.
    """
    x = np.asarray(scan.positions, dtype=float)
    y = np.asarray(scan.intensities, dtype=float)
    if x.size < 8:
        raise FitError("need at least 8 scan points")
    if not period_guess > 0:
        raise FitError("period_guess must be positive")
    if x.max() - x.min() < period_guess:
        raise FitError("scan must span at least one period")

    def design(p):
        k = 2.0 * np.pi / p
        return np.column_stack([np.ones_like(x), np.sin(k * x), np.cos(k * x)])

    coef, *_ = np.linalg.lstsq(design(period_guess), y, rcond=None)
    a0, b0, c0 = coef
    if a0 <= 0:
        raise FitError("fitted mean intensity is not positive")
    scale = max(abs(a0), 1e-300)
    if math.hypot(b0, c0) <= 1e-12 * scale:
        resid = float(np.linalg.norm(y - a0))
        return FringeFit(0.0, 0.0, float(a0), float(period_guess), resid, True)

    def residual(theta):
        a, b, c, p = theta
        return (design(p) @ np.array([a, b, c]) - y) / scale

    res = least_squares(residual, x0=[a0, b0, c0, period_guess], method="lm",
                        xtol=1e-15, ftol=1e-15, gtol=1e-15, max_nfev=2000)
    if not res.success:
        raise FitError(f"fringe fit did not converge: {res.message}",
                       residual=float(np.linalg.norm(res.fun) * scale))
    a, b, c, p = res.x
    if a <= 0 or p <= 0:
        raise FitError("fringe fit converged to a nonphysical point",
                       residual=float(np.linalg.norm(res.fun) * scale))
    v = math.hypot(b, c) / a
    at_boundary = v >= 1.0
    return FringeFit(
        visibility=min(v, 1.0),
        phase=math.atan2(c, b),
        mean_intensity=float(a),
        period=float(abs(p)),
        residual_norm=float(np.linalg.norm(res.fun) * scale),
        at_boundary=bool(at_boundary),
    )


def normalize_visibility(v_raw: float, benchmark: float) -> float:
    """Correct a measured visibility by the interferometer's own benchmark visibility."""
    if not 0 < benchmark <= 1:
        raise InvalidParameterError("benchmark visibility must lie in (0, 1]")
    return min(v_raw / benchmark, 1.0)
