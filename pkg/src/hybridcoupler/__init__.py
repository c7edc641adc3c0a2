"""Model of a flux-tunable hybrid-mode coupler between two transmons.

The coupler is a transmission-line resonator with an embedded SQUID. The
package solves its normal modes, quantizes them, builds the qubit-coupler
Hamiltonian and extracts exchange (XX) and ZZ interactions versus flux.
"""

from ._version import __version__
from .dynamics import (
    build_hamiltonian,
    build_multilevel_hamiltonian,
    effective_xx,
    eigensolve,
    exact_xx,
    track_adiabatic,
    zz_strength,
)
from .errors import CouplerError
from .modes import ModeBasis, ModeSolution, build_mode_basis, solve_wavenumbers
from .params import DeviceParams, FluxConvention, josephson_energy, load_device, reference_device
from .quantization import couplings_at, mode_energies
from .sweeps import coupling_sweep, design_sweep, envelope_field_map, flux_spectrum_sweep, xx_sweep, zz_sweep

__all__ = [
    "__version__", "CouplerError", "DeviceParams", "FluxConvention", "ModeBasis", "ModeSolution",
    "build_hamiltonian", "build_mode_basis", "build_multilevel_hamiltonian", "coupling_sweep",
    "couplings_at", "design_sweep", "effective_xx", "eigensolve", "envelope_field_map", "exact_xx",
    "flux_spectrum_sweep", "josephson_energy", "load_device", "mode_energies", "solve_wavenumbers",
    "reference_device", "track_adiabatic", "xx_sweep", "zz_strength", "zz_sweep",
]
