"""Device parameters, physical constants and the flux-to-Josephson-energy map.

Conventions used across the package:

* lengths, capacitances and inductances are SI (m, F, F/m, H/m);
* every energy is stored as E/h in GHz;
* flux bias is the dimensionless ratio Phi/Phi0;
* time is in ns, so a GHz energy accumulates phase ``2*pi*E*t``.
"""

from __future__ import annotations

import configparser
import dataclasses
import enum
import hashlib
import json
import math
from dataclasses import dataclass
from pathlib import Path

from scipy import constants

from .errors import ConfigError, FluxAtZeroJosephsonEnergy, InvalidParameters

PLANCK = constants.h
ELECTRON_CHARGE = constants.e
FLUX_QUANTUM = constants.h / (2 * constants.e)
REDUCED_FLUX_QUANTUM = FLUX_QUANTUM / (2 * math.pi)
GHZ = 1e9


class FluxConvention(str, enum.Enum):
    """How the SQUID Josephson energy depends on flux.

    ``HALF_PERIOD`` uses |cos(pi Phi/Phi0)| (period 1, zero at half flux);
    ``PAPER_LITERAL`` uses |cos(2 pi Phi/Phi0)|.
    """

    HALF_PERIOD = "half_period"
    PAPER_LITERAL = "paper_literal"


@dataclass(frozen=True)
class DeviceParams:
    """Circuit constants of the coupler and its two transmons.

    Attributes
    ----------
    junction_position : float
        Position x_J of the embedded SQUID measured from the coupler centre (m).
    half_length : float
        Half the coupler length, l (m). The line spans [-l, l].
    c_g1, c_g2 : float
        Coupling capacitances to qubit 1 (at -l) and qubit 2 (at +l) (F).
    c_q1, c_q2 : float
        Qubit shunt capacitances (F).
    c_j : float
        Coupler junction shunt capacitance (F).
    c0, l0 : float
        Line capacitance (F/m) and inductance (H/m) per unit length.
    ej_max : float
        Maximum SQUID Josephson energy (GHz).
    ec_q1, ec_q2 : float
        Qubit charging energies (GHz).
    ej_q1, ej_q2 : float or None
        Optional qubit Josephson energies (GHz). When absent, they are derived
        from target qubit frequencies by the callers that need them.
    flux_convention : FluxConvention
    """

    junction_position: float
    half_length: float
    c_g1: float
    c_g2: float
    c_q1: float
    c_q2: float
    c_j: float
    c0: float
    l0: float
    ej_max: float
    ec_q1: float = 0.222
    ec_q2: float = 0.196
    ej_q1: float | None = None
    ej_q2: float | None = None
    flux_convention: FluxConvention = FluxConvention.HALF_PERIOD

    def __post_init__(self):
        object.__setattr__(self, "flux_convention", FluxConvention(self.flux_convention))
        positive = ("half_length", "c_q1", "c_q2", "c0", "l0", "ej_max", "ec_q1", "ec_q2")
        # coupling and junction capacitances may vanish to reach the textbook limits
        nonnegative = ("c_g1", "c_g2", "c_j")
        for name in positive:
            value = getattr(self, name)
            if not (math.isfinite(value) and value > 0):
                raise InvalidParameters(f"{name} must be finite and positive, got {value!r}")
        for name in nonnegative:
            value = getattr(self, name)
            if not (math.isfinite(value) and value >= 0):
                raise InvalidParameters(f"{name} must be finite and nonnegative, got {value!r}")
        for name in ("ej_q1", "ej_q2"):
            value = getattr(self, name)
            if value is not None and not (math.isfinite(value) and value > 0):
                raise InvalidParameters(f"{name} must be positive when given, got {value!r}")
        if not -self.half_length < self.junction_position < self.half_length:
            raise InvalidParameters(
                f"junction position {self.junction_position} outside (-l, l) with l={self.half_length}"
            )

    @property
    def length(self) -> float:
        return 2 * self.half_length

    @property
    def total_capacitance(self) -> float:
        """C_Sigma = C0 * 2l + C_g1 + C_g2 + C_J."""
        return self.c0 * self.length + self.c_g1 + self.c_g2 + self.c_j

    @property
    def left_length(self) -> float:
        return self.junction_position + self.half_length

    @property
    def right_length(self) -> float:
        return self.half_length - self.junction_position

    def replace(self, **changes) -> "DeviceParams":
        return dataclasses.replace(self, **changes)

    def to_dict(self) -> dict:
        out = dataclasses.asdict(self)
        out["flux_convention"] = self.flux_convention.value
        return out

    def digest(self) -> str:
        """Short SHA-256 of the canonical parameter set (provenance tag)."""
        payload = json.dumps(self.to_dict(), sort_keys=True, default=repr)
        return hashlib.sha256(payload.encode()).hexdigest()[:16]


def reference_device(**overrides) -> DeviceParams:
    """The sample device used throughout the reference measurements."""
    values = dict(
        junction_position=0.395e-2,
        half_length=1.05e-2 / 2,
        c_g1=9e-15,
        c_g2=9e-15,
        c_q1=80e-15,
        c_q2=85e-15,
        c_j=30e-15,
        c0=85.644e-12,
        l0=0.744e-6,
        ej_max=34.186,
        ec_q1=0.222,
        ec_q2=0.196,
    )
    values.update(overrides)
    return DeviceParams(**values)


def _abs_cos_pi(x: float) -> float:
    """|cos(pi x)| with exact zeros at half-integers."""
    r = math.fmod(abs(x), 1.0)
    if r == 0.5:
        return 0.0
    return abs(math.cos(math.pi * r))


def josephson_energy(params: DeviceParams, flux: float) -> float:
    """SQUID Josephson energy E_Jc at flux ``flux`` = Phi/Phi0, in GHz."""
    if not math.isfinite(flux):
        raise InvalidParameters(f"flux must be finite, got {flux!r}")
    if params.flux_convention is FluxConvention.HALF_PERIOD:
        return params.ej_max * _abs_cos_pi(flux)
    return params.ej_max * _abs_cos_pi(2 * flux)


def inverse_junction_inductance(params: DeviceParams, flux: float) -> float:
    """1/L_J in 1/H; zero when the Josephson energy vanishes."""
    return PLANCK * josephson_energy(params, flux) * GHZ / REDUCED_FLUX_QUANTUM**2


def junction_inductance(params: DeviceParams, flux: float) -> float:
    """Linearized SQUID inductance L_J = (Phi0/2pi)^2 / (h E_Jc), in H."""
    ej = josephson_energy(params, flux)
    if ej == 0:
        raise FluxAtZeroJosephsonEnergy(f"E_Jc vanishes at flux {flux}; L_J is infinite")
    return REDUCED_FLUX_QUANTUM**2 / (PLANCK * ej * GHZ)


def phase_velocity(params: DeviceParams) -> float:
    return 1.0 / math.sqrt(params.l0 * params.c0)


def charging_energy(capacitance: float) -> float:
    """e^2 / 2C expressed in GHz."""
    return ELECTRON_CHARGE**2 / (2 * capacitance) / PLANCK / GHZ


# ---------------------------------------------------------------------------
# INI device files

_UNITS = {
    "length": {"m": 1.0, "cm": 1e-2, "mm": 1e-3, "um": 1e-6},
    "capacitance": {"F": 1.0, "pF": 1e-12, "fF": 1e-15, "aF": 1e-18},
    "capacitance_per_length": {"F/m": 1.0, "nF/m": 1e-9, "pF/m": 1e-12, "fF/um": 1e-9},
    "inductance_per_length": {"H/m": 1.0, "uH/m": 1e-6, "nH/m": 1e-9, "pH/um": 1e-6},
    "energy": {"GHz": 1.0, "MHz": 1e-3},
}

# INI key -> (DeviceParams field, unit kind, scale applied after unit conversion)
_KEYS = {
    "junction_position": ("junction_position", "length", 1.0),
    "coupler_length": ("half_length", "length", 0.5),
    "C_g1": ("c_g1", "capacitance", 1.0),
    "C_g2": ("c_g2", "capacitance", 1.0),
    "C_Q1": ("c_q1", "capacitance", 1.0),
    "C_Q2": ("c_q2", "capacitance", 1.0),
    "C_J": ("c_j", "capacitance", 1.0),
    "C_0": ("c0", "capacitance_per_length", 1.0),
    "L_0": ("l0", "inductance_per_length", 1.0),
    "E_J_max": ("ej_max", "energy", 1.0),
    "E_C_Q1": ("ec_q1", "energy", 1.0),
    "E_C_Q2": ("ec_q2", "energy", 1.0),
    "E_J1": ("ej_q1", "energy", 1.0),
    "E_J2": ("ej_q2", "energy", 1.0),
}
_REQUIRED = (
    "junction_position", "coupler_length", "C_g1", "C_g2", "C_Q1", "C_Q2",
    "C_J", "C_0", "L_0", "E_J_max",
)


def _parse_quantity(key: str, text: str, kind: str) -> float:
    parts = text.split()
    if len(parts) != 2:
        raise ConfigError(f"{key}: expected '<number> <unit>', got {text!r}")
    number, unit = parts
    units = _UNITS[kind]
    if unit not in units:
        raise ConfigError(f"{key}: unit {unit!r} not one of {sorted(units)}")
    try:
        value = float(number)
    except ValueError:
        raise ConfigError(f"{key}: {number!r} is not a number") from None
    return value * units[unit]


def parse_device(text: str) -> DeviceParams:
    """Parse a device description in INI form (single ``[device]`` section)."""
    parser = configparser.ConfigParser()
    parser.optionxform = str
    try:
        parser.read_string(text)
    except configparser.Error as exc:
        raise ConfigError(f"malformed device file: {exc}") from None
    if parser.sections() != ["device"]:
        raise ConfigError(f"device file must contain exactly one [device] section, got {parser.sections()}")
    section = parser["device"]
    unknown = set(section) - set(_KEYS) - {"flux_convention"}
    if unknown:
        raise ConfigError(f"unknown device keys: {sorted(unknown)}")
    missing = [k for k in _REQUIRED if k not in section]
    if missing:
        raise ConfigError(f"missing device keys: {missing}")
    values = {}
    for key, raw in section.items():
        if key == "flux_convention":
            try:
                values["flux_convention"] = FluxConvention(raw.strip())
            except ValueError:
                raise ConfigError(f"flux_convention must be one of {[c.value for c in FluxConvention]}") from None
            continue
        field, kind, scale = _KEYS[key]
        values[field] = _parse_quantity(key, raw, kind) * scale
    try:
        return DeviceParams(**values)
    except InvalidParameters as exc:
        raise ConfigError(str(exc)) from None


def load_device(path) -> DeviceParams:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read device file {path}: {exc.strerror}") from None
    return parse_device(text)


def format_device(params: DeviceParams) -> str:
    """Inverse of :func:`parse_device` (SI values written with base units)."""
    lines = ["[device]"]
    base = {"length": "m", "capacitance": "F", "capacitance_per_length": "F/m",
            "inductance_per_length": "H/m", "energy": "GHz"}
    for key, (field, kind, scale) in _KEYS.items():
        value = getattr(params, field)
        if value is None:
            continue
        lines.append(f"{key} = {float(value / scale)!r} {base[kind]}")
    lines.append(f"flux_convention = {params.flux_convention.value}")
    return "\n".join(lines) + "\n"
