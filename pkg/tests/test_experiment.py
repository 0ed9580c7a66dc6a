import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from ramanmem.core import ComplexEnvelope, DepthGrid, SpinWaveProfile, TimeGrid, gaussian_envelope
from ramanmem.errors import FitError, InvalidParameterError, UndefinedEfficiencyError
from ramanmem.experiment import (FringeFit, FringeScan, detector_convolve, etalon_adjust,
                                 fit_fringes, fwhm, normalize_visibility, spinwave_decay,
                                 synthesize_fringes)
from ramanmem.raman import overlap_visibility

GRID = TimeGrid(-4e-9, 4e-9, 4096)
LAMBDA = 852e-9


def pulse(center=0.0, width=300e-12, norm=1.0, phase=0.0):
    return gaussian_envelope(GRID, center, width, norm, phase)


# ---------------------------------------------------------------- etalon

def test_etalon_identity():
    a = pulse(50e-12)
    assert np.array_equal(etalon_adjust(a).values, a.values)


@settings(max_examples=30, deadline=None)
@given(st.floats(-500e-12, 500e-12), st.floats(0.5, 3.0))
def test_etalon_preserves_norm(delay, stretch):
    a = pulse(0.0, norm=1.7)
    assert abs(etalon_adjust(a, delay, stretch).norm() - 1.7) <= 1e-9 * 1.7


def test_etalon_moves_centroid():
    a = pulse(-30e-12)
    moved = etalon_adjust(a, 100e-12)
    assert abs(moved.centroid() - a.centroid() - 100e-12) < 1e-16


def test_etalon_stretches_width():
    a = pulse()
    assert abs(fwhm(GRID.t, etalon_adjust(a, 0.0, 2.0).intensity) - 600e-12) < 0.05 * GRID.dt


def test_etalon_truncation_warning_and_errors():
    a = pulse()
    with pytest.warns(UserWarning, match="off the grid"):
        etalon_adjust(a, 3.8e-9)
    with pytest.raises(InvalidParameterError):
        etalon_adjust(a, 0.0, 0.0)


# ---------------------------------------------------------------- decay

def test_spinwave_decay():
    b = SpinWaveProfile(DepthGrid(16), np.ones(16))
    assert np.array_equal(spinwave_decay(b, 12.5e-9, 0.0).values, b.values)
    out = spinwave_decay(b, 12.5e-9, 1e6)
    assert np.allclose(out.values, math.exp(-0.0125))
    assert abs(out.values[0] - 0.98758) < 1e-5
    assert spinwave_decay(b, 1.0, 1e6).norm() == 0.0
    with pytest.raises(InvalidParameterError):
        spinwave_decay(b, -1.0, 1.0)


@settings(max_examples=30, deadline=None)
@given(st.floats(0, 1e-6), st.floats(0, 1e-6), st.floats(0, 1e7))
def test_decay_composes(t1, t2, rate):
    b = SpinWaveProfile(DepthGrid(8), np.linspace(1, 2, 8))
    two = spinwave_decay(spinwave_decay(b, t1, rate), t2, rate).values
    one = spinwave_decay(b, t1 + t2, rate).values
    assert np.allclose(two, one, rtol=4e-16 * 4, atol=0)


# ---------------------------------------------------------------- detector

def test_detector_zero_width_is_identity():
    a = pulse()
    assert np.array_equal(detector_convolve(a, 0.0), a.intensity)


def test_detector_width_closed_form():
    a = pulse()
    observed = fwhm(GRID.t, detector_convolve(a, 1e-9))
    assert abs(observed - math.hypot(0.3e-9, 1e-9)) <= GRID.dt
    assert abs(math.hypot(0.3, 1.0) - 1.044) < 1e-3


@pytest.mark.parametrize("width", [0.1e-9, 0.5e-9, 1e-9])
def test_detector_preserves_area(width):
    a = pulse()
    assert abs(GRID.integrate(detector_convolve(a, width)) - a.norm()) < 1e-6


def test_detector_is_linear_and_shift_equivariant():
    a, b = pulse(-200e-12), pulse(300e-12, 200e-12)
    both = ComplexEnvelope(GRID, a.values + b.values * 1j)
    # intensities add for fields in quadrature only when they do not overlap: test on |A|^2 directly
    lin = detector_convolve(a, 1e-9) + 2 * detector_convolve(b, 1e-9)
    ref = np.convolve(a.intensity + 2 * b.intensity, np.ones(1), "same")
    assert both.grid == GRID
    k = 64
    shifted = ComplexEnvelope(GRID, np.roll(a.values, k))
    d0, d1 = detector_convolve(a, 1e-9), detector_convolve(shifted, 1e-9)
    interior = slice(1200, 2800)
    assert np.allclose(np.roll(d0, k)[interior], d1[interior], atol=1e-12 * d0.max())
    lhs = detector_convolve(ComplexEnvelope(GRID, np.sqrt(ref)), 1e-9)
    assert np.allclose(lhs, lin, atol=1e-12 * lin.max())


def test_detector_exponential_and_warning():
    a = pulse()
    d = detector_convolve(a, 0.3e-9, "exponential")
    assert abs(GRID.integrate(d) - a.norm()) < 1e-3
    # a 1 ns decay loses exp(-4 ns / tau) of the area past the grid end
    tau = 1e-9 / math.log(2)
    lost = a.norm() - GRID.integrate(detector_convolve(a, 1e-9, "exponential"))
    assert abs(lost - math.exp(-4e-9 / tau)) < 5e-3
    assert GRID.t[np.argmax(d)] > GRID.t[np.argmax(a.intensity)]
    with pytest.warns(UserWarning, match="longer than the time grid"):
        detector_convolve(a, 20e-9)
    with pytest.raises(InvalidParameterError):
        detector_convolve(a, 1e-9, "lorentzian")


# ---------------------------------------------------------------- fringes

def _pair(v):
    """Equal-norm fields whose overlap visibility is exactly ``v``."""
    ref = pulse()
    other = pulse(400e-12)
    other = ComplexEnvelope(GRID, other.values - ref.values * complex(np.vdot(ref.values * GRID.weights, other.values)))
    other = other.scaled(1 / math.sqrt(other.norm()))
    out = ComplexEnvelope(GRID, v * ref.values + math.sqrt(1 - v * v) * other.values)
    return ref, out


def test_proportional_fields_have_unit_visibility():
    a = pulse()
    scan = synthesize_fringes(a, a.scaled(1j), np.linspace(0, 3 * LAMBDA, 100), LAMBDA)
    assert abs(fit_fringes(scan, LAMBDA).visibility - 1.0) < 1e-6


def test_orthogonal_fields_are_flat():
    a, b = pulse(-2e-9, 100e-12), pulse(2e-9, 100e-12)
    scan = synthesize_fringes(a, b, np.linspace(0, 3 * LAMBDA, 100), LAMBDA)
    assert np.ptp(scan.intensities) < 1e-12
    assert fit_fringes(scan, LAMBDA).visibility < 1e-9


@pytest.mark.parametrize("v", [0.0, 0.25, 0.5, 0.83, 1.0])
def test_noiseless_round_trip(v):
    ref, out = _pair(v)
    assert abs(overlap_visibility(ref, out).balanced - v) < 1e-9
    scan = synthesize_fringes(ref, out, np.linspace(0, 3 * LAMBDA, 100), LAMBDA)
    assert abs(fit_fringes(scan, LAMBDA).visibility - v) < 1e-6


def test_fit_matches_raw_visibility_for_unbalanced_arms():
    ref, out = _pair(0.7)
    out = out.scaled(0.4)
    scan = synthesize_fringes(ref, out, np.linspace(0, 2.5 * LAMBDA, 80), LAMBDA)
    assert abs(fit_fringes(scan, LAMBDA).visibility - overlap_visibility(ref, out).raw) < 1e-6


def test_noisy_fits_over_seeds():
    ref, out = _pair(0.86)
    x = np.linspace(0, 3 * LAMBDA, 100)
    mean = ref.norm() + out.norm()
    vs = [fit_fringes(synthesize_fringes(ref, out, x, LAMBDA, 0.02 * mean, seed), LAMBDA).visibility
          for seed in range(50)]
    assert max(abs(v - 0.86) for v in vs) <= 0.02


def test_noise_needs_seed_and_is_reproducible():
    ref, out = _pair(0.5)
    x = np.linspace(0, 3 * LAMBDA, 50)
    with pytest.raises(InvalidParameterError):
        synthesize_fringes(ref, out, x, LAMBDA, 0.01)
    s1 = synthesize_fringes(ref, out, x, LAMBDA, 0.01, seed=3)
    s2 = synthesize_fringes(ref, out, x, LAMBDA, 0.01, seed=3)
    assert np.array_equal(s1.intensities, s2.intensities) and s1.noise_seed == 3


def test_fringe_errors():
    a = pulse()
    zero = ComplexEnvelope(GRID, np.zeros(GRID.n_points))
    with pytest.raises(UndefinedEfficiencyError):
        synthesize_fringes(a, zero, [0.0, 1.0], LAMBDA)
    with pytest.raises(InvalidParameterError):
        synthesize_fringes(a, a, [0.0, 1.0], 0.0)
    with pytest.raises(FitError):
        fit_fringes(FringeScan(np.arange(5.0), np.ones(5)), 1.0)
    with pytest.raises(FitError):
        fit_fringes(FringeScan(np.linspace(0, 0.5, 20), np.ones(20)), 1.0)
    with pytest.raises(InvalidParameterError):
        FringeScan(np.arange(3.0), np.array([1.0, -1.0, 1.0]))


def test_constant_scan_has_zero_visibility():
    fit = fit_fringes(FringeScan(np.linspace(0, 3, 40), np.full(40, 2.0)), 1.0)
    assert fit.visibility == 0.0 and fit.at_boundary


def test_overmodulated_scan_is_clamped():
    x = np.linspace(0, 3, 60)
    y = 1 + 1.3 * np.sin(2 * np.pi * x)  # not physical; negative lobes
    fit = fit_fringes(FringeScan(x, np.clip(y, 0, None)), 1.0)
    assert fit.visibility == 1.0 and fit.at_boundary


def test_serialisation(tmp_path):
    ref, out = _pair(0.5)
    scan = synthesize_fringes(ref, out, np.linspace(0, 3 * LAMBDA, 30), LAMBDA)
    path = scan.to_csv(tmp_path / "scan.csv")
    assert path.read_text().splitlines()[0] == "position,intensity"
    back = FringeScan.from_csv(path)
    assert np.allclose(back.intensities, scan.intensities, rtol=1e-11)
    fit = fit_fringes(scan, LAMBDA)
    assert FringeFit.from_json(fit.to_json(tmp_path / "fit.json")) == fit


def test_normalize_visibility():
    assert math.isclose(normalize_visibility(0.67, 0.78), 0.67 / 0.78)
    assert normalize_visibility(0.9, 0.8) == 1.0
    with pytest.raises(InvalidParameterError):
        normalize_visibility(0.5, 0.0)
