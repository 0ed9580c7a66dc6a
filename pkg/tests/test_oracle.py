import math

import numpy as np
import pytest
from scipy import special as sp

from ramanmem import oracle
from ramanmem.core import ComplexEnvelope, ControlProfile, DepthGrid, TimeGrid
from ramanmem.errors import CoordinateError, StepSizeError, UndefinedEfficiencyError
from ramanmem.kernels import lattice_march
from ramanmem.raman import retrieve, store, transmit

from oracles import lattice_reference

GRID = TimeGrid(-2e-9, 2e-9, 1024)
ZGRID = DepthGrid(512)


def rel_l2(a, b, w):
    return math.sqrt(np.dot(w, np.abs(a - b) ** 2) / np.dot(w, np.abs(b) ** 2))


def smooth_alpha(u):
    return (1 + 0.5 * u - 0.3 * u * u) * np.exp(1.3j * u)


@pytest.fixture(scope="module")
def lattice_ref():
    nodes = np.linspace(0, 1, 17)
    return lattice_reference(smooth_alpha, 1.5, nodes, nodes)


@pytest.mark.parametrize("scheme,order", [("order-2", 2), ("order-4", 4)])
def test_convergence_order(lattice_ref, scheme, order):
    beta_ref, alpha_ref = lattice_ref
    sizes = (17, 33, 65, 129, 257)  # h from 1/16 to 1/256
    errs = []
    for n in sizes:
        x, y, *_ = lattice_march(smooth_alpha(np.linspace(0, 1, n)), 1.5, n, scheme)
        step = (n - 1) // 16
        errs.append(max(np.max(np.abs(y[::step] - beta_ref)), np.max(np.abs(x[::step] - alpha_ref))))
    slope = np.polyfit(np.log(1.0 / (np.array(sizes) - 1)), np.log(errs), 1)[0]
    assert abs(slope - order) < 0.25, (slope, errs)


@pytest.mark.parametrize("C", [0.7, 2.0])
def test_constant_input_closed_form(C):
    # alpha_in = 1: beta(z, 1) = i J1(2C sqrt z) / sqrt z, alpha(1, u) = J0(2C sqrt u)
    n = 513
    s = np.linspace(0, 1, n)
    x, y, *_ = lattice_march(np.ones(n), C, n, "order-2")
    with np.errstate(invalid="ignore", divide="ignore"):
        beta = np.where(s > 0, 1j * sp.j1(2 * C * np.sqrt(s)) / np.sqrt(s), 1j * C)
    assert np.max(np.abs(y - beta)) < 1e-5
    assert np.max(np.abs(x - sp.j0(2 * C * np.sqrt(s)))) < 1e-5


def test_decoupled_run_is_exact(coupled, test_signal):
    a = test_signal(GRID)
    res = oracle.propagate(a, coupled(0.0, GRID), ZGRID)
    assert np.array_equal(res.a_field.values, a.values)
    assert not np.any(res.b_field.values)
    assert oracle.energy_residual(res, a) == 0.0


def test_zero_input(coupled):
    a = ComplexEnvelope(GRID, np.zeros(GRID.n_points))
    res = oracle.propagate(a, coupled(1.0, GRID), ZGRID)
    assert not np.any(res.a_field.values) and not np.any(res.b_field.values)
    with pytest.raises(UndefinedEfficiencyError):
        oracle.energy_residual(res, a)


@pytest.mark.parametrize("C", [0.5, 1.0, 2.0])
def test_kernels_match_oracle(coupled, test_signal, C):
    a = test_signal(GRID)
    ctl = coupled(C, GRID)
    res = oracle.propagate(a, ctl, ZGRID)
    b = store(a, ctl, ZGRID)
    assert rel_l2(b.values, res.b_field.values, ZGRID.weights) < 1e-3
    assert rel_l2(transmit(a, ctl).values, res.a_field.values, GRID.weights) < 1e-3
    for direction in ("forward", "backward"):
        k_out = retrieve(b, ctl, direction)
        o_out = oracle.propagate_readout(b, ctl, direction)
        assert rel_l2(k_out.values, o_out.values, GRID.weights) < 1e-3


@pytest.mark.parametrize("C", [0.5, 1.0, 2.0])
def test_backward_total_efficiency_matches(coupled, test_signal, C):
    a = test_signal(GRID)
    ctl = coupled(C, GRID)
    res = oracle.propagate(a, ctl, ZGRID)
    oracle_total = oracle.propagate_readout(res.b_field, ctl, "backward").norm()
    kernel_total = retrieve(store(a, ctl, ZGRID), ctl, "backward").norm()
    assert abs(oracle_total - kernel_total) / a.norm() < 1e-3


def test_energy_residual_and_refinement(coupled, test_signal):
    out = []
    for n in (1024, 2048):
        g, z = TimeGrid(-2e-9, 2e-9, n), DepthGrid(n // 2)
        a = test_signal(g)
        res = oracle.propagate(a, coupled(1.0, g), z, "order-2")
        out.append(oracle.energy_residual(res, a))
    assert abs(out[0]) <= 1e-4
    assert 3.5 < out[0] / out[1] < 4.5


@pytest.mark.parametrize("C", [0.5, 2.0, 5.0])
def test_no_amplification(coupled, test_signal, C):
    res = oracle.propagate(test_signal(GRID), coupled(C, GRID), ZGRID)
    assert res.growth <= oracle.GROWTH_LIMIT


def test_coarse_lattice_is_rejected(coupled, test_signal):
    with pytest.raises(StepSizeError, match="refine"):
        oracle.propagate(test_signal(GRID), coupled(3.0, GRID), DepthGrid(9), n_u=9)


def test_non_monotone_coordinate(coupled, test_signal):
    good = coupled(1.0, GRID)
    omega = good.omega.copy()
    omega[600] = omega[590]
    bad = ControlProfile(GRID, good.rabi, good.W, omega, good.f, good.C, good.detuning)
    with pytest.raises(CoordinateError):
        oracle.propagate(test_signal(GRID), bad, ZGRID)


def test_snapshot_round_trip(tmp_path, coupled, test_signal):
    g, z = TimeGrid(-2e-9, 2e-9, 256), DepthGrid(64)
    res = oracle.propagate(test_signal(g), coupled(1.0, g), z, keep_snapshot=True)
    path = oracle.dump_snapshot(res, tmp_path / "snap.bin")
    header, xs, ys = oracle.load_snapshot(path)
    assert header["n_s"] == 64 and header["scheme"] == "order-2"
    assert np.array_equal(xs, res.full_grid_snapshot[0])
    assert np.array_equal(ys, res.full_grid_snapshot[1])
    # the stored frontier of the marched field is the transmitted lattice field
    assert np.array_equal(xs[-1], res.alpha_out)
    with pytest.raises(ValueError):
        oracle.dump_snapshot(oracle.propagate(test_signal(g), coupled(1.0, g), z), tmp_path / "x")
    (tmp_path / "junk").write_bytes(b"not a snapshot")
    with pytest.raises(ValueError):
        oracle.load_snapshot(tmp_path / "junk")
