"""Run configuration: an INI file with unit-suffixed keys.

The committed ``data/default.ini`` documents the grammar and is the base
layer; a user file only needs the keys it changes. ``--set section.key=value``
overrides are applied to the merged text before any value is converted, so a
run with overrides is identical to a run with a pre-merged file.
"""
from __future__ import annotations

import configparser
import math
from dataclasses import dataclass, replace
from importlib import resources
from pathlib import Path
from typing import Iterable, Optional, Sequence

from .core import TWO_PI, DepthGrid, PhysicalParams, TimeGrid
from .errors import ConfigError, RamanMemError
from .model import NJ, MemorySetup

PS, NS, US = 1e-12, 1e-9, 1e-6


def default_text() -> str:
    return resources.files("ramanmem").joinpath("data/default.ini").read_text()


def _parser() -> configparser.ConfigParser:
    cp = configparser.ConfigParser(inline_comment_prefixes=("#", ";"), interpolation=None,
                                   empty_lines_in_values=False)
    cp.optionxform = str  # keys are case sensitive (nJ, GHz)
    return cp


def _read(cp: configparser.ConfigParser, text: str, source: str):
    try:
        cp.read_string(text, source=source)
    except configparser.MissingSectionHeaderError as exc:
        raise ConfigError(f"{source}: line {exc.lineno} comes before any [section]") from exc
    except configparser.ParsingError as exc:
        lines = ", ".join(str(n) for n, _ in exc.errors)
        raise ConfigError(f"{source}: cannot parse line(s) {lines}") from exc
    except configparser.Error as exc:
        raise ConfigError(f"{source}: {exc}") from exc


def parse_override(item: str) -> tuple[str, str, str]:
    """``"section.key=value"`` -> ``(section, key, value)``."""
    name, sep, value = item.partition("=")
    section, dot, key = name.strip().partition(".")
    if not sep or not dot or not section or not key.strip():
        raise ConfigError(f"override {item!r} is not of the form section.key=value")
    return section, key.strip(), value.strip()


def merged_parser(path: Optional[str | Path] = None,
                  overrides: Sequence[str] = ()) -> configparser.ConfigParser:
    cp = _parser()
    _read(cp, default_text(), "default.ini")
    known = {s: set(cp[s]) for s in cp.sections()}
    if path is not None:
        path = Path(path)
        try:
            text = path.read_text()
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
        user = _parser()
        _read(user, text, str(path))
        for s in user.sections():
            for k, v in user[s].items():
                _check_known(known, s, k, str(path))
                cp[s][k] = v
    for item in overrides:
        s, k, v = parse_override(item)
        _check_known(known, s, k, "--set")
        cp[s][k] = v
    return cp


def _check_known(known: dict, section: str, key: str, source: str):
    if section not in known:
        raise ConfigError(f"{source}: unknown section [{section}]")
    if key not in known[section]:
        raise ConfigError(f"{source}: unknown key {key!r} in [{section}]")


# ---------------------------------------------------------------- typed access

class _Section:
    def __init__(self, cp, name):
        self.name = name
        self.sec = cp[name]

    def _fail(self, key, why):
        raise ConfigError(f"[{self.name}] {key}: {why} (got {self.sec.get(key)!r})")

    def raw(self, key) -> str:
        return self.sec.get(key, "").strip()

    def float(self, key, lo=None, hi=None, strict_lo=False, optional=False):
        s = self.raw(key)
        if s == "" and optional:
            return None
        try:
            v = float(s)
        except ValueError:
            self._fail(key, "expected a number")
        if not math.isfinite(v):
            self._fail(key, "must be finite")
        if lo is not None and (v < lo or (strict_lo and v == lo)):
            self._fail(key, f"must be {'>' if strict_lo else '>='} {lo}")
        if hi is not None and v > hi:
            self._fail(key, f"must be <= {hi}")
        return v

    def int(self, key, lo=None):
        try:
            v = int(self.raw(key))
        except ValueError:
            self._fail(key, "expected an integer")
        if lo is not None and v < lo:
            self._fail(key, f"must be >= {lo}")
        return v

    def choice(self, key, options):
        v = self.raw(key)
        if v not in options:
            self._fail(key, f"expected one of {', '.join(options)}")
        return v

    def bool(self, key):
        v = self.raw(key).lower()
        if v in ("1", "true", "yes", "on"):
            return True
        if v in ("0", "false", "no", "off"):
            return False
        self._fail(key, "expected true or false")

    def floats(self, key, lo=None) -> tuple:
        out = []
        for part in self.raw(key).split(","):
            part = part.strip()
            if not part:
                continue
            try:
                if ":" in part:
                    a, b, step = (float(x) for x in part.split(":"))
                    if not step > 0 or b < a:
                        raise ValueError
                    n = int(math.floor((b - a) / step + 1e-9))
                    out.extend(round(a + i * step, 12) for i in range(n + 1))
                else:
                    out.append(float(part))
            except ValueError:
                self._fail(key, "expected numbers or start:stop:step ranges")
        if not out:
            self._fail(key, "list is empty")
        if lo is not None and min(out) < lo:
            self._fail(key, f"values must be >= {lo}")
        return tuple(sorted(set(out)))


@dataclass(frozen=True)
class RunConfig:
    params: PhysicalParams
    kappa_auto: bool
    t_start: float
    t_end: float
    time_samples: int
    depth_samples: int
    read_energy_nJ: Optional[float]
    direction: str
    include_linear_phase: bool
    etalon_delay: float
    etalon_stretch: float
    calib_energy_nJ: float
    calib_eta_store: float
    sweep_energies_nJ: tuple
    bounds_energies_nJ: tuple
    bounds_tolerance: float
    detector_fwhm: float
    detector_shape: str
    wavelength: float
    scan_points: int
    scan_periods: float
    noise_fraction: float
    seed: int
    benchmark: float
    validate_couplings: tuple
    conservation_couplings: tuple
    validate_scheme: str
    validate_signal_fwhm: float
    validate_signal_delay: float
    validate_tolerance: float
    conservation_tolerance: float
    storage_limit: float
    natural_linewidth: float
    output_format: str
    output_directory: str
    echo: tuple  # ((section, ((key, value), ...)), ...) exactly as merged

    @property
    def write_energy_nJ(self) -> float:
        return self.params.pulse_energy / NJ

    def grids(self) -> tuple[TimeGrid, DepthGrid]:
        return (TimeGrid(self.t_start, self.t_end, self.time_samples),
                DepthGrid(self.depth_samples))

    def scaled(self, factor: int) -> "RunConfig":
        """Uniformly refined grids (same span) for convergence studies."""
        if factor < 1:
            raise ConfigError("grid scale must be a positive integer")
        return replace(self, time_samples=self.time_samples * factor,
                       depth_samples=self.depth_samples * factor)

    def setup(self, kappa: Optional[float] = None) -> MemorySetup:
        tg, zg = self.grids()
        params = self.params if kappa is None else self.params.with_(kappa=kappa)
        read = None if self.read_energy_nJ is None else self.read_energy_nJ * NJ
        return MemorySetup(params, tg, zg, self.etalon_delay, self.etalon_stretch, self.direction,
                           read, self.include_linear_phase)

    def as_dict(self) -> dict:
        return {s: dict(items) for s, items in self.echo}


def from_parser(cp: configparser.ConfigParser) -> RunConfig:
    ph, pu, et, gr = (_Section(cp, n) for n in ("physics", "pulse", "etalon", "grid"))
    ca, sw, bo, de = (_Section(cp, n) for n in ("calibration", "sweep", "bounds", "detector"))
    vi, va, me, ou = (_Section(cp, n) for n in ("visibility", "validate", "metadata", "output"))

    kappa_raw = ph.raw("kappa").lower()
    kappa_auto = kappa_raw == "auto"
    kappa = 0.0 if kappa_auto else ph.float("kappa", lo=0)
    try:
        params = PhysicalParams(
            optical_depth=ph.float("optical_depth", lo=0, strict_lo=True),
            gamma=TWO_PI * 1e6 * ph.float("gamma_MHz", lo=0, strict_lo=True),
            gamma_convention=ph.choice("gamma_convention", ("hwhm", "fwhm")),
            detuning=TWO_PI * 1e9 * ph.float("detuning_GHz"),
            spin_decay=ph.float("spin_decay_per_s", lo=0),
            kappa=kappa,
            pulse_energy=pu.float("write_energy_nJ", lo=0) * NJ,
            control_fwhm=pu.float("control_fwhm_ps", lo=0, strict_lo=True) * PS,
            signal_fwhm=pu.float("signal_fwhm_ps", lo=0, strict_lo=True) * PS,
            signal_delay=pu.float("signal_delay_ps") * PS,
            storage_time=pu.float("storage_time_ns", lo=0) * NS,
        )
    except RamanMemError as exc:
        raise ConfigError(f"[physics]/[pulse]: {exc}") from exc

    t_start, t_end = gr.float("t_start_ns") * NS, gr.float("t_end_ns") * NS
    if not t_end > t_start:
        raise ConfigError("[grid] t_end_ns must exceed t_start_ns")
    echo = tuple((s, tuple((k, v) for k, v in cp[s].items())) for s in cp.sections())
    return RunConfig(
        params=params,
        kappa_auto=kappa_auto,
        t_start=t_start,
        t_end=t_end,
        time_samples=gr.int("time_samples", lo=16),
        depth_samples=gr.int("depth_samples", lo=8),
        read_energy_nJ=pu.float("read_energy_nJ", lo=0, optional=True),
        direction=pu.choice("direction", ("forward", "backward")),
        include_linear_phase=pu.bool("include_linear_phase"),
        etalon_delay=et.float("delay_ps") * PS,
        etalon_stretch=et.float("stretch", lo=0, strict_lo=True),
        calib_energy_nJ=ca.float("energy_nJ", lo=0, strict_lo=True),
        calib_eta_store=ca.float("eta_store", lo=0, hi=1),
        sweep_energies_nJ=sw.floats("energies_nJ", lo=0),
        bounds_energies_nJ=bo.floats("energies_nJ", lo=0),
        bounds_tolerance=bo.float("tolerance", lo=0, strict_lo=True),
        detector_fwhm=de.float("response_fwhm_ns", lo=0) * NS,
        detector_shape=de.choice("shape", ("gaussian", "exponential")),
        wavelength=vi.float("wavelength_nm", lo=0, strict_lo=True) * 1e-9,
        scan_points=vi.int("scan_points", lo=8),
        scan_periods=vi.float("scan_periods", lo=1),
        noise_fraction=vi.float("noise_fraction", lo=0),
        seed=vi.int("seed", lo=0),
        benchmark=vi.float("benchmark", lo=0, hi=1, strict_lo=True),
        validate_couplings=va.floats("couplings", lo=0),
        conservation_couplings=va.floats("conservation_couplings", lo=0),
        validate_scheme=va.choice("scheme", ("order-2", "order-4")),
        validate_signal_fwhm=va.float("signal_fwhm_ps", lo=0, strict_lo=True) * PS,
        validate_signal_delay=va.float("signal_delay_ps") * PS,
        validate_tolerance=va.float("tolerance", lo=0, strict_lo=True),
        conservation_tolerance=va.float("conservation_tolerance", lo=0, strict_lo=True),
        storage_limit=me.float("storage_limit_us", lo=0) * US,
        natural_linewidth=me.float("natural_linewidth_MHz", lo=0, strict_lo=True) * 1e6,
        output_format=ou.choice("format", ("json", "csv")),
        output_directory=ou.raw("directory") or "out",
        echo=echo,
    )


def load_config(path: Optional[str | Path] = None, overrides: Iterable[str] = ()) -> RunConfig:
    return from_parser(merged_parser(path, tuple(overrides)))


def dump_config(cfg: RunConfig) -> str:
    """The merged configuration as INI text; loading it reproduces ``cfg``."""
    lines = []
    for section, items in cfg.echo:
        lines.append(f"[{section}]")
        lines.extend(f"{k} = {v}" for k, v in items)
        lines.append("")
    return "\n".join(lines)

