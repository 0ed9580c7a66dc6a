import pytest

from ramanmem.config import load_config
from ramanmem.core import PhysicalParams, build_control, control_with_coupling, gaussian_envelope
from ramanmem.pipeline import resolve_kappa

ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[0][3:])):
        terminalreporter.write_line(line)


@pytest.fixture(scope="session")
def default_cfg():
    return load_config()


@pytest.fixture(scope="session")
def grids(default_cfg):
    return default_cfg.grids()


@pytest.fixture(scope="session")
def kappa(default_cfg):
    return resolve_kappa(default_cfg)["kappa"]


@pytest.fixture(scope="session")
def calibrated(default_cfg, kappa):
    return default_cfg.setup(kappa)


@pytest.fixture(scope="session")
def unit_params():
    # any positive kappa; couplings are then set explicitly
    return PhysicalParams(kappa=1e20)


@pytest.fixture(scope="session")
def coupled(unit_params):
    """control_for(C, grid) on the default pulse shape."""
    def make(C, grid):
        return control_with_coupling(build_control(unit_params, grid), C, unit_params)
    return make


@pytest.fixture(scope="session")
def test_signal():
    """Gaussian narrower than the control and off centre; the oracle needs the former."""
    def make(grid, fwhm=250e-12, delay=50e-12):
        return gaussian_envelope(grid, delay, fwhm)
    return make
