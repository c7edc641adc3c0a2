"""Quantized mode energies, the qubit-coupler capacitance matrix and couplings.

All energies are E/h in GHz.
"""

from __future__ import annotations

import enum
import math
import warnings
from dataclasses import dataclass

import numpy as np

from .errors import InvalidParameters, JunctionDecoupledMode, SingularMatrix
from .modes import ModeBasis, ModeSolution, build_mode_basis
from .params import (
    ELECTRON_CHARGE,
    GHZ,
    PLANCK,
    REDUCED_FLUX_QUANTUM,
    DeviceParams,
    josephson_energy,
)

DECOUPLED_TOL = 1e-10


class Polarity(str, enum.Enum):
    """Sign rule for the coupling energies E_jm.

    ``ENVELOPE`` takes sign(u_m(-l)) for qubit 1 and sign(u_m(+l)) for qubit 2.
    ``PORT_FIELD`` flips the qubit-1 sign so both signs follow the field
    pointing into the line; observables that are products of an even number
    of couplings are unchanged.
    """

    ENVELOPE = "envelope"
    PORT_FIELD = "port_field"


class QubitCharging(str, enum.Enum):
    """Source of the qubit charging energy used in g_jm and the Hamiltonian."""

    MATRIX = "matrix"
    GIVEN = "given"


@dataclass(frozen=True)
class ModeEnergies:
    """Quantized single-mode parameters (GHz).

    Attributes
    ----------
    ec : float
        E_C,m = e^2 / 2C'_m with C'_m = C_Sigma / delta_u^2.
    el : float
        E_L,m = (Phi0/2pi)^2 / L'_m with L'_m = L_m delta_u^2.
    kerr : float
        Self-Kerr K_mm = E_C,m E_Jc / E_L,m.
    omega_c : float
        0-1 transition frequency sqrt(8 E_C,m E_L,m) - K_mm.
    eta : float
        Anharmonicity, equal to -K_mm.
    """

    ec: float
    el: float
    kerr: float
    omega_c: float
    eta: float

    @property
    def plasma(self) -> float:
        return math.sqrt(8 * self.ec * self.el)


def _capacitance_prime(mode: ModeSolution) -> float:
    return mode.params.total_capacitance / mode.delta_u**2


def mode_energies(mode: ModeSolution, basis: ModeBasis | None = None,
                  params: DeviceParams | None = None, flux: float | None = None) -> ModeEnergies:
    """Per-mode charging, inductive and Kerr energies.

    ``basis``, ``params`` and ``flux`` default to those stored on the mode.
    """
    params = params if params is not None else mode.params
    flux = mode.flux if flux is None else flux
    c_sigma = basis.total_capacitance if basis is not None else params.total_capacitance
    du = mode.delta_u
    if abs(du) < DECOUPLED_TOL:
        raise JunctionDecoupledMode(
            f"mode {mode.index} has delta_u = {du:.3g}; the junction does not participate"
        )
    c_prime = c_sigma / du**2
    omega = mode.frequency
    ec = ELECTRON_CHARGE**2 / (2 * c_prime) / PLANCK / GHZ
    if omega == 0:
        el = 0.0
    else:
        l_prime = du**2 / (c_sigma * omega**2)
        el = REDUCED_FLUX_QUANTUM**2 / l_prime / PLANCK / GHZ
    ej = josephson_energy(params, flux)
    kerr = ec * ej / el if ej > 0 else 0.0
    plasma = math.sqrt(8 * ec * el)
    return ModeEnergies(ec, el, kerr, plasma - kerr, -kerr)


@dataclass(frozen=True)
class CapacitanceMatrix:
    """3x3 capacitance matrix ordered (Q1, mode, Q2), in F."""

    matrix: np.ndarray
    g1: float
    g2: float

    @property
    def prefactor(self) -> float:
        """C'_m C_Sigma1 C_Sigma2 - C_Sigma2 G1^2 - C_Sigma1 G2^2 (the determinant)."""
        c = self.matrix
        return c[1, 1] * c[0, 0] * c[2, 2] - c[2, 2] * self.g1**2 - c[0, 0] * self.g2**2


def capacitance_matrix(params: DeviceParams, mode: ModeSolution) -> CapacitanceMatrix:
    du = mode.delta_u
    if abs(du) < DECOUPLED_TOL:
        raise JunctionDecoupledMode(f"mode {mode.index} has delta_u = {du:.3g}")
    g1 = params.c_g1 * mode.left_end / du
    g2 = params.c_g2 * mode.right_end / du
    c = np.array([
        [params.c_q1 + params.c_g1, -g1, 0.0],
        [-g1, params.total_capacitance / du**2, -g2],
        [0.0, -g2, params.c_q2 + params.c_g2],
    ])
    return CapacitanceMatrix(c, g1, g2)


def invert_capacitance_matrix(cm: CapacitanceMatrix) -> np.ndarray:
    """Closed-form inverse of the arrow-shaped capacitance matrix (1/F)."""
    c1, cm_, c2 = cm.matrix[0, 0], cm.matrix[1, 1], cm.matrix[2, 2]
    g1, g2 = cm.g1, cm.g2
    det = cm.prefactor
    scale = cm_ * c1 * c2
    if not det > 1e-14 * scale:
        raise SingularMatrix(f"capacitance determinant {det:.3g} is not positive")
    inv = np.array([
        [cm_ * c2 - g2**2, g1 * c2, g1 * g2],
        [g1 * c2, c1 * c2, c1 * g2],
        [g1 * g2, c1 * g2, cm_ * c1 - g1**2],
    ])
    return inv / det


@dataclass(frozen=True)
class QubitParams:
    """Transmon with hbar omega = sqrt(8 E_C E_J) - E_C (all GHz)."""

    ec: float
    ej: float

    def __post_init__(self):
        if not (self.ec > 0 and self.ej > 0):
            raise InvalidParameters(f"qubit energies must be positive, got E_C={self.ec}, E_J={self.ej}")
        if self.ej / self.ec <= 10:
            warnings.warn(f"E_J/E_C = {self.ej / self.ec:.3g} is outside the transmon regime", stacklevel=2)

    @property
    def frequency(self) -> float:
        return qubit_frequency(self.ej, self.ec)


def qubit_frequency(ej: float, ec: float) -> float:
    return math.sqrt(8 * ec * ej) - ec


def qubit_from_frequency(omega: float, ec: float) -> QubitParams:
    """Invert the transmon frequency formula: E_J = (omega + E_C)^2 / (8 E_C)."""
    if not omega > 0:
        raise InvalidParameters(f"qubit frequency must be positive, got {omega}")
    return QubitParams(ec, (omega + ec) ** 2 / (8 * ec))


@dataclass(frozen=True)
class CouplingSet:
    """Signed coupling energies and strengths between the qubits and one mode (GHz)."""

    mode_index: int
    e1: float
    e2: float
    g1: float
    g2: float
    ec_q1: float
    ec_q2: float
    ec_mode: float
    e13: float
    energies: ModeEnergies

    @property
    def g(self) -> tuple:
        return (self.g1, self.g2)


def _strength(e_jm, ej, el, ec_q, ec_m):
    return e_jm / math.sqrt(2) * (ej * el / (ec_q * ec_m)) ** 0.25


def coupling_set(
    inverse: np.ndarray,
    mode: ModeSolution,
    qubits,
    params: DeviceParams | None = None,
    flux: float | None = None,
    *,
    polarity: Polarity | str = Polarity.ENVELOPE,
    qubit_charging: QubitCharging | str = QubitCharging.MATRIX,
) -> CouplingSet:
    """E_jm and g_jm for one mode from the inverse capacitance matrix.

    ``qubits`` is a pair of :class:`QubitParams`. The qubit Josephson energies
    enter g_jm; their charging energies are used only when
    ``qubit_charging`` is ``"given"``.
    """
    params = params if params is not None else mode.params
    polarity = Polarity(polarity)
    qubit_charging = QubitCharging(qubit_charging)
    energies = mode_energies(mode, params=params, flux=flux)
    to_ghz = ELECTRON_CHARGE**2 / PLANCK / GHZ
    s1 = math.copysign(1.0, mode.left_end)
    if polarity is Polarity.PORT_FIELD:
        s1 = -s1
    s2 = math.copysign(1.0, mode.right_end)
    e1 = s1 * to_ghz * abs(inverse[0, 1])
    e2 = s2 * to_ghz * abs(inverse[1, 2])
    e13 = to_ghz * inverse[0, 2]
    ec_mode = to_ghz * inverse[1, 1] / 2
    if qubit_charging is QubitCharging.MATRIX:
        ec_q1, ec_q2 = to_ghz * inverse[0, 0] / 2, to_ghz * inverse[2, 2] / 2
    else:
        ec_q1, ec_q2 = qubits[0].ec, qubits[1].ec
    if energies.el == 0:
        g1 = g2 = 0.0
    else:
        g1 = _strength(e1, qubits[0].ej, energies.el, ec_q1, ec_mode)
        g2 = _strength(e2, qubits[1].ej, energies.el, ec_q2, ec_mode)
    return CouplingSet(mode.index, e1, e2, g1, g2, ec_q1, ec_q2, ec_mode, e13, energies)


@dataclass(frozen=True)
class DevicePoint:
    """Everything the Hamiltonians need at one flux bias."""

    flux: float
    basis: ModeBasis
    couplings: tuple
    qubits: tuple

    @property
    def mode_frequencies(self) -> np.ndarray:
        """Quantized 0-1 mode frequencies omega_C,m (GHz)."""
        return np.array([c.energies.omega_c for c in self.couplings])

    @property
    def classical_frequencies(self) -> np.ndarray:
        return np.array([m.frequency_ghz for m in self.basis])

    @property
    def kerrs(self) -> np.ndarray:
        return np.array([c.energies.kerr for c in self.couplings])

    @property
    def g_matrix(self) -> np.ndarray:
        """g[j, m] for qubit j and mode m (GHz)."""
        return np.array([[c.g1 for c in self.couplings], [c.g2 for c in self.couplings]])

    @property
    def qubit_charging(self) -> tuple:
        return (self.couplings[0].ec_q1, self.couplings[0].ec_q2)

    @property
    def direct_coupling(self) -> float:
        """Mean E_13 over the retained modes (GHz), reported but not used by default."""
        return float(np.mean([c.e13 for c in self.couplings]))


def qubits_for(params: DeviceParams, qubit_freqs=None) -> tuple:
    """QubitParams for both qubits from explicit E_J or from target frequencies."""
    out = []
    for j, (ec, ej) in enumerate(((params.ec_q1, params.ej_q1), (params.ec_q2, params.ej_q2))):
        if qubit_freqs is not None and qubit_freqs[j] is not None:
            out.append(qubit_from_frequency(qubit_freqs[j], ec))
        elif ej is not None:
            out.append(QubitParams(ec, ej))
        else:
            raise InvalidParameters(f"qubit {j + 1} needs either E_J or a target frequency")
    return tuple(out)


def couplings_at(
    params: DeviceParams,
    flux: float,
    qubit_freqs=None,
    n_modes: int = 2,
    *,
    polarity: Polarity | str = Polarity.ENVELOPE,
    qubit_charging: QubitCharging | str = QubitCharging.MATRIX,
    verify: bool = False,
) -> DevicePoint:
    """Solve the modes at ``flux`` and return per-mode coupling sets."""
    qubits = qubits_for(params, qubit_freqs)
    basis = build_mode_basis(params, flux, n_modes, verify=verify)
    sets = []
    for mode in basis:
        inv = invert_capacitance_matrix(capacitance_matrix(params, mode))
        sets.append(coupling_set(inv, mode, qubits, params, flux,
                                 polarity=polarity, qubit_charging=qubit_charging))
    return DevicePoint(flux, basis, tuple(sets), qubits)
