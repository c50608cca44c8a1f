"""Physical constants, unit conversion and the validated simulation config.

Everything past the config boundary works in ps and 1/ps.  Energies in
configuration documents are meV unless suffixed with ``ueV`` or ``1/ps``,
and are converted exactly once, at load.
"""

from __future__ import annotations

import configparser
import dataclasses
import io
import math
from dataclasses import dataclass, field
from typing import Literal

import numpy as np

HBAR = 0.6582119569  # meV ps
KB = 0.08617333  # meV / K


class ConfigError(ValueError):
    """Base class for configuration problems."""


class ConfigParseError(ConfigError):
    pass


class ConfigValidationError(ConfigError):
    pass


def energy_to_angular_frequency(energy_mev):
    """Convert an energy in meV to an angular frequency in 1/ps."""
    return energy_mev / HBAR


def angular_frequency_to_energy(omega):
    return omega * HBAR


def _energy_text(omega: float) -> str:
    """Document form of an angular frequency: meV when that reloads exactly, else 1/ps."""
    y = omega * HBAR
    for cand in (y, float(np.nextafter(y, -np.inf)), float(np.nextafter(y, np.inf))):
        if cand / HBAR == omega:
            return repr(cand)
    return f"{omega!r} 1/ps"


# energy suffixes accepted in documents; a bare number is meV
_ENERGY_UNITS = {"mev": 1.0, "uev": 1e-3, "\u00b5ev": 1e-3, "\u03bcev": 1e-3}


@dataclass(frozen=True)
class BathParams:
    alpha_p: float  # ps^2
    omega_b: float  # 1/ps
    temperature: float  # K

    def __post_init__(self):
        _check(self.alpha_p >= 0, "bath.alpha_p", ">= 0", self.alpha_p)
        _check(self.omega_b > 0, "bath.omega_b", "> 0", self.omega_b)
        _check(self.temperature > 0, "bath.temperature", "> 0", self.temperature)


@dataclass(frozen=True)
class SystemParams:
    gamma: float = 0.0  # radiative decay, 1/ps
    gamma_prime: float = 0.0  # pure dephasing, 1/ps

    def __post_init__(self):
        _check(self.gamma >= 0, "system.gamma", ">= 0", self.gamma)
        _check(self.gamma_prime >= 0, "system.gamma_prime", ">= 0", self.gamma_prime)


@dataclass(frozen=True)
class CavitySpec:
    """Cavity parameters, all rates in 1/ps.

    ``rate_detuning`` selects which detuning enters the phonon-rate integrals
    in cavity-driven mode: the laser-exciton detuning (default) or the
    cavity-exciton detuning, for sensitivity studies.
    """

    g: float = 0.0
    kappa: float = 0.0
    delta_cx: float = 0.0
    purcell: float = 0.0
    rate_detuning: Literal["laser", "cavity"] = "laser"

    def __post_init__(self):
        _check(self.g >= 0, "cavity.g", ">= 0", self.g)
        _check(self.kappa >= 0, "cavity.kappa", ">= 0", self.kappa)
        _check(self.purcell >= 0, "cavity.purcell", ">= 0", self.purcell)
        _check(
            self.rate_detuning in ("laser", "cavity"),
            "cavity.rate_detuning",
            "in {laser, cavity}",
            self.rate_detuning,
        )


@dataclass(frozen=True)
class DriveSpec:
    """Gaussian pulse ``Omega(t) = Omega_p exp(-(t - center)^2 / tau_p^2)``.

    In cavity-driven mode ``omega_p`` is the peak cavity drive and the
    exciton sees the filtered effective drive instead.
    """

    omega_p: float  # 1/ps
    tau_p: float  # ps
    delta_lx: float = 0.0  # 1/ps
    mode: Literal["exciton", "cavity"] = "exciton"
    cavity: CavitySpec | None = None
    center: float = 0.0

    def __post_init__(self):
        _check(self.tau_p > 0, "drive.tau_p", "> 0", self.tau_p)
        _check(self.omega_p >= 0, "drive.omega_p", ">= 0", self.omega_p)
        _check(self.mode in ("exciton", "cavity"), "drive.mode", "in {exciton, cavity}", self.mode)
        if self.mode == "cavity" and self.cavity is None:
            raise ConfigValidationError("drive.mode = cavity requires a [cavity] section")

    @classmethod
    def from_area(cls, theta: float, tau_p: float, delta_lx: float = 0.0, **kw) -> DriveSpec:
        """Build a pulse from its area (radians) rather than its peak."""
        return cls(omega_p=theta / (math.sqrt(math.pi) * tau_p), tau_p=tau_p, delta_lx=delta_lx, **kw)

    @property
    def theta(self) -> float:
        return math.sqrt(math.pi) * self.tau_p * self.omega_p

    @property
    def purcell(self) -> float:
        return self.cavity.purcell if self.cavity is not None else 0.0


@dataclass(frozen=True)
class TrainSpec:
    period: float = 612.0  # 2T, ps
    n_periods: int = 2

    def __post_init__(self):
        _check(self.period > 0, "train.period", "> 0", self.period)
        _check(self.n_periods >= 1, "train.n_periods", ">= 1", self.n_periods)


@dataclass(frozen=True)
class IntegratorSettings:
    rtol: float = 1e-8
    atol: float = 1e-10
    method: str = "DOP853"
    t_start: float | None = None  # default -5 tau_p
    t_end: float | None = None  # default +5 tau_p

    def __post_init__(self):
        _check(self.rtol > 0, "integrator.rtol", "> 0", self.rtol)
        _check(self.atol > 0, "integrator.atol", "> 0", self.atol)


@dataclass(frozen=True)
class QuadratureSettings:
    omega_cutoff_factor: float = 8.0
    kernel_tol: float = 1e-8
    tau_step: float = 0.01
    tau_scan_max: float = 100.0
    rate_cache: bool = False
    significant_rates_only: bool = False
    drive_correction: bool = True

    def __post_init__(self):
        _check(self.omega_cutoff_factor > 0, "quadrature.omega_cutoff_factor", "> 0", self.omega_cutoff_factor)
        _check(self.kernel_tol > 0, "quadrature.kernel_tol", "> 0", self.kernel_tol)
        _check(0 < self.tau_step <= 0.01, "quadrature.tau_step", "in (0, 0.01]", self.tau_step)


@dataclass(frozen=True)
class SimulationConfig:
    bath: BathParams
    drive: DriveSpec
    system: SystemParams = field(default_factory=SystemParams)
    integrator: IntegratorSettings = field(default_factory=IntegratorSettings)
    quadrature: QuadratureSettings = field(default_factory=QuadratureSettings)
    train: TrainSpec = field(default_factory=TrainSpec)

    @property
    def gamma_total(self) -> float:
        """Radiative decay including the Purcell channel, gamma (1 + F_P)."""
        return self.system.gamma * (1.0 + self.drive.purcell)

    def replace(self, path: str, value) -> SimulationConfig:
        """Copy with one dotted parameter changed, e.g. ``drive.delta_lx``.

        The value is in internal units.  ``drive.theta`` is accepted as a
        shorthand that rescales ``omega_p`` at fixed ``tau_p``; cavity fields
        are reached as ``drive.cavity.<key>``.
        """
        section, _, key = path.partition(".")
        if not key or not hasattr(self, section):
            raise ConfigValidationError(f"unknown parameter path {path!r}")
        sub = getattr(self, section)
        if section == "drive" and key == "theta":
            key, value = "omega_p", value / (math.sqrt(math.pi) * sub.tau_p)
        if "." in key:
            inner, _, leaf = key.partition(".")
            obj = getattr(sub, inner)
            if obj is None or not hasattr(obj, leaf):
                raise ConfigValidationError(f"unknown parameter path {path!r}")
            new_sub = dataclasses.replace(sub, **{inner: dataclasses.replace(obj, **{leaf: value})})
        else:
            if not hasattr(sub, key) or key not in {f.name for f in dataclasses.fields(sub)}:
                raise ConfigValidationError(f"unknown parameter path {path!r}")
            new_sub = dataclasses.replace(sub, **{key: value})
        return dataclasses.replace(self, **{section: new_sub})


def _check(ok: bool, name: str, bound: str, value) -> None:
    if not ok:
        raise ConfigValidationError(f"{name} must be {bound}, got {value!r}")


# -- document format -------------------------------------------------------

_ENERGY = "energy"
_PLAIN = "plain"
_BOOL = "bool"
_STR = "str"
_INT = "int"

# (section, document key) -> (attribute, kind)
_SCHEMA = {
    "bath": {"alpha_p": _PLAIN, "omega_b": _ENERGY, "temperature": _PLAIN},
    "system": {"gamma": _ENERGY, "gamma_prime": _ENERGY},
    "drive": {
        "tau_p": _PLAIN,
        "omega_p": _ENERGY,
        "theta_pi": _PLAIN,
        "delta_lx": _ENERGY,
        "mode": _STR,
        "center": _PLAIN,
    },
    "cavity": {"g": _ENERGY, "kappa": _ENERGY, "delta_cx": _ENERGY, "purcell": _PLAIN, "rate_detuning": _STR},
    "train": {"period": _PLAIN, "n_periods": _INT},
    "integrator": {"rtol": _PLAIN, "atol": _PLAIN, "method": _STR, "t_start": _PLAIN, "t_end": _PLAIN},
    "quadrature": {
        "omega_cutoff_factor": _PLAIN,
        "kernel_tol": _PLAIN,
        "tau_step": _PLAIN,
        "tau_scan_max": _PLAIN,
        "rate_cache": _BOOL,
        "significant_rates_only": _BOOL,
        "drive_correction": _BOOL,
    },
}

_REQUIRED = {"bath": ("alpha_p", "omega_b", "temperature"), "drive": ("tau_p",)}


def _parse_value(section: str, key: str, raw: str, kind: str):
    where = f"{section}.{key}"
    raw = raw.strip()
    if kind == _STR:
        return raw
    if kind == _BOOL:
        low = raw.lower()
        if low in ("1", "true", "yes", "on"):
            return True
        if low in ("0", "false", "no", "off"):
            return False
        raise ConfigParseError(f"{where}: expected a boolean, got {raw!r}")
    if kind == _INT:
        try:
            return int(raw)
        except ValueError:
            raise ConfigParseError(f"{where}: expected an integer, got {raw!r}") from None
    number, _, unit = raw.partition(" ")
    unit = unit.strip().lower()
    if unit and kind != _ENERGY:
        raise ConfigParseError(f"{where}: unexpected unit {unit!r}")
    if unit and unit != "1/ps" and unit not in _ENERGY_UNITS:
        raise ConfigParseError(f"{where}: unknown energy unit {unit!r} (use meV, ueV or 1/ps)")
    try:
        val = float(number)
    except ValueError:
        raise ConfigParseError(f"{where}: expected a number, got {raw!r}") from None
    if not math.isfinite(val):
        raise ConfigParseError(f"{where}: value must be finite, got {raw!r}")
    if kind != _ENERGY or unit == "1/ps":
        return val
    return energy_to_angular_frequency(val * _ENERGY_UNITS.get(unit, 1.0))


def load_config(text: str) -> SimulationConfig:
    """Parse and validate an INI-style configuration document.

    Energies are read in meV (or with a ``ueV`` / ``1/ps`` suffix), times
    in ps, temperature in K.  Raises
    ``ConfigParseError`` for malformed input and ``ConfigValidationError``
    when a value violates its bound or a required field is missing.
    """
    parser = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=("#", ";"))
    try:
        parser.read_string(text)
    except configparser.Error as exc:
        raise ConfigParseError(f"malformed configuration: {exc}") from None

    values: dict[str, dict] = {}
    for section in parser.sections():
        if section not in _SCHEMA:
            raise ConfigParseError(f"unknown section [{section}]")
        values[section] = {}
        for key, raw in parser.items(section):
            if key not in _SCHEMA[section]:
                raise ConfigParseError(f"unknown key {section}.{key}")
            values[section][key] = _parse_value(section, key, raw, _SCHEMA[section][key])

    for section, keys in _REQUIRED.items():
        for key in keys:
            if key not in values.get(section, {}):
                raise ConfigValidationError(f"missing required field {section}.{key}")

    bath = BathParams(**values["bath"])
    system = SystemParams(**values.get("system", {}))

    cavity = CavitySpec(**values["cavity"]) if "cavity" in values else None

    d = dict(values["drive"])
    has_omega, has_theta = "omega_p" in d, "theta_pi" in d
    if has_omega == has_theta:
        raise ConfigValidationError("drive: give exactly one of omega_p or theta_pi")
    if has_theta:
        _check(d["theta_pi"] >= 0, "drive.theta_pi", ">= 0", d["theta_pi"])
        d["omega_p"] = d.pop("theta_pi") * math.pi / (math.sqrt(math.pi) * d["tau_p"])
    drive = DriveSpec(cavity=cavity, **d)

    return SimulationConfig(
        bath=bath,
        drive=drive,
        system=system,
        integrator=IntegratorSettings(**values.get("integrator", {})),
        quadrature=QuadratureSettings(**values.get("quadrature", {})),
        train=TrainSpec(**values.get("train", {})),
    )


def document_path_exists(path: str) -> bool:
    section, _, key = path.partition(".")
    return key in _SCHEMA.get(section, {})


def replace_document_value(cfg: SimulationConfig, path: str, value: float) -> SimulationConfig:
    """Like ``SimulationConfig.replace`` but with ``path`` and ``value`` in document units.

    ``drive.theta_pi`` is the pulse area in units of pi, energies are meV and
    ``cavity.<key>`` addresses the drive's cavity.
    """
    section, _, key = path.partition(".")
    if not document_path_exists(path):
        raise ConfigValidationError(f"unknown parameter path {path!r}")
    kind = _SCHEMA[section][key]
    if kind in (_STR, _BOOL):
        raise ConfigValidationError(f"{path} is not a numeric parameter")
    if kind == _INT:
        value = round(value)
    elif kind == _ENERGY:
        value = energy_to_angular_frequency(float(value))
    if path == "drive.theta_pi":
        return cfg.replace("drive.theta", float(value) * math.pi)
    if section == "cavity":
        if cfg.drive.cavity is None:
            cfg = cfg.replace("drive.cavity", CavitySpec())
        return cfg.replace(f"drive.cavity.{key}", value)
    return cfg.replace(path, value)


def dump_config(cfg: SimulationConfig) -> str:
    """Serialise a config to the document format accepted by ``load_config``."""

    def fmt(v):
        if isinstance(v, bool):
            return "true" if v else "false"
        if isinstance(v, float):
            return repr(v)
        return str(v)

    def emit(section, obj, skip=()):
        out[section] = {}
        for key, kind in _SCHEMA[section].items():
            if key in skip or not hasattr(obj, key):
                continue
            v = getattr(obj, key)
            if v is None:
                continue
            out[section][key] = _energy_text(v) if kind == _ENERGY else fmt(v)

    out: dict[str, dict[str, str]] = {}
    emit("bath", cfg.bath)
    emit("system", cfg.system)
    emit("drive", cfg.drive, skip=("theta_pi",))
    if cfg.drive.cavity is not None:
        emit("cavity", cfg.drive.cavity)
    emit("train", cfg.train)
    emit("integrator", cfg.integrator)
    emit("quadrature", cfg.quadrature)

    parser = configparser.ConfigParser(interpolation=None)
    parser.read_dict(out)
    buf = io.StringIO()
    parser.write(buf)
    return buf.getvalue()
