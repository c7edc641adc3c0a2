"""Command-line frontend.

Exit codes: 0 success, 2 configuration error, 3 solver failure (no usable
output), 4 partial failure (table written, some rows carry error codes).
"""

from __future__ import annotations

import argparse
import hashlib
import sys
from pathlib import Path

import numpy as np

from . import sweeps
from .dynamics import JConvention, LambConvention
from .errors import ConfigError, CouplerError, InvalidParameters
from .modes import build_mode_basis
from .params import FluxConvention, load_device
from .quantization import Polarity, QubitCharging
from .tables import SweepResult

EXIT_OK, EXIT_CONFIG, EXIT_FAILURE, EXIT_PARTIAL = 0, 2, 3, 4


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_CONFIG, f"{self.prog}: error: {message}\n")


def _positive_int(text):
    try:
        value = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"{text!r} is not an integer") from None
    if value < 1:
        raise argparse.ArgumentTypeError(f"must be >= 1, got {value}")
    return value


def _positive_float(text):
    try:
        value = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"{text!r} is not a number") from None
    if not value > 0:
        raise argparse.ArgumentTypeError(f"must be positive, got {value}")
    return value


def _common(p, flux_default):
    p.add_argument("--device", required=True, help="device INI file")
    p.add_argument("--flux", default=flux_default, help="flux value or start:stop:count (units of Phi0)")
    p.add_argument("--format", choices=("csv", "json"), default="csv")
    p.add_argument("--output", help="output file (default: standard output)")
    p.add_argument("--workers", type=_positive_int, default=None, help="process pool size")
    p.add_argument("--convention", choices=[c.value for c in FluxConvention],
                   help="override the device flux convention")


def _coupling_flags(p):
    p.add_argument("--polarity", choices=[c.value for c in Polarity], default=Polarity.ENVELOPE.value)
    p.add_argument("--qubit-charging", choices=[c.value for c in QubitCharging],
                   default=QubitCharging.MATRIX.value)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="hybridcoupler", description="Flux-tunable hybrid-mode coupler model")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("modes", help="normal modes at one flux point")
    _common(p, "0")
    p.add_argument("--n", type=_positive_int, default=2, help="number of modes")
    p.add_argument("--dump-envelopes", metavar="CSV", help="also write (x, u_m(x)) samples")
    p.add_argument("--samples", type=_positive_int, default=401, help="envelope samples per mode")

    p = sub.add_parser("spectrum", help="mode frequencies versus flux")
    _common(p, sweeps.DEFAULT_FLUX)
    p.add_argument("--n", type=_positive_int, default=2)
    p.add_argument("--classical-only", action="store_true", help="omit quantized columns")

    p = sub.add_parser("couplings", help="qubit-mode couplings versus flux")
    _common(p, sweeps.DEFAULT_FLUX)
    p.add_argument("--w1", type=_positive_float, default=6.505, help="qubit 1 frequency (GHz)")
    p.add_argument("--w2", type=_positive_float, default=6.322, help="qubit 2 frequency (GHz)")
    _coupling_flags(p)

    p = sub.add_parser("xx", help="effective exchange coupling versus flux")
    _common(p, sweeps.DEFAULT_FLUX)
    p.add_argument("--w1", type=_positive_float, default=5.5)
    p.add_argument("--w2", type=_positive_float, default=None, help="defaults to --w1")
    _coupling_flags(p)
    p.add_argument("--j-convention", choices=[c.value for c in JConvention], default=JConvention.STANDARD.value)
    p.add_argument("--lamb", choices=[c.value for c in LambConvention], default=LambConvention.STANDARD.value)

    p = sub.add_parser("zz", help="ZZ strength versus flux")
    _common(p, sweeps.DEFAULT_FLUX)
    p.add_argument("--w1", type=_positive_float, default=4.25)
    p.add_argument("--w2", type=_positive_float, default=4.7)
    p.add_argument("--levels", type=int, choices=(2, 3, 4), default=3, help="levels per body")
    p.add_argument("--include-direct", action="store_true", help="add the E_13 qubit-qubit term")
    p.add_argument("--no-refine", action="store_true", help="skip suppression-point refinement")
    _coupling_flags(p)

    p = sub.add_parser("design", help="mode frequencies versus a design parameter and flux")
    _common(p, "0:0.5:51")
    p.add_argument("--parameter", required=True, choices=sorted(sweeps.DESIGN_PARAMETERS))
    p.add_argument("--values", required=True, help="comma list or start:stop:count, SI units (GHz for E_J_max)")
    p.add_argument("--n", type=_positive_int, default=2)
    p.add_argument("--relative-junction", action="store_true", help="keep x_J/l fixed in length sweeps")

    p = sub.add_parser("fieldmap", help="mode envelope over position and flux")
    _common(p, "0:0.5:51")
    p.add_argument("--mode", type=int, default=0, help="mode index (0 = lowest)")
    p.add_argument("--points", type=_positive_int, default=201, help="samples along the line")
    return parser


def _load(args):
    params = load_device(args.device)
    if args.convention:
        params = params.replace(flux_convention=FluxConvention(args.convention))
    digest = hashlib.sha256(Path(args.device).read_bytes()).hexdigest()
    return params, digest


def _values(text):
    if ":" in text:
        return sweeps.parse_flux_grid(text)
    try:
        return np.array([float(v) for v in text.split(",")])
    except ValueError:
        raise ConfigError(f"bad value list {text!r}") from None


def _single_flux(text):
    grid = sweeps.parse_flux_grid(text)
    if len(grid) != 1:
        raise ConfigError("this command takes a single flux value")
    return float(grid[0])


def _modes_table(params, flux, n, args):
    basis = build_mode_basis(params, flux, n)
    cols = {"flux": [], "m": [], "k": [], "nu": [], "theta1": [], "theta2": [], "A": [], "B": [], "delta_u": []}
    for m in basis:
        for name, value in (("flux", flux), ("m", m.index), ("k", m.wavenumber), ("nu", m.frequency_ghz),
                            ("theta1", m.theta1), ("theta2", m.theta2), ("A", m.amplitude_A),
                            ("B", m.amplitude_B), ("delta_u", m.delta_u)):
            cols[name].append(value)
    cols["m"] = np.array(cols["m"], dtype=int)
    meta = sweeps._metadata("modes", params, n_modes=n)
    result = SweepResult(cols, [""] * len(basis), meta)
    if args.dump_envelopes:
        x = np.linspace(-params.half_length, params.half_length, args.samples)
        dump = {"flux": np.full(len(x), flux), "x": x}
        for m in basis:
            dump[f"u_{m.index}"] = m.envelope(x, side="left")
        SweepResult(dump, [""] * len(x), meta).write(args.dump_envelopes, "csv")
    return result


def run(args) -> SweepResult:
    params, digest = _load(args)
    workers = args.workers
    cmd = args.command
    if cmd == "modes":
        result = _modes_table(params, _single_flux(args.flux), args.n, args)
    else:
        flux = sweeps.parse_flux_grid(args.flux)
        if cmd == "spectrum":
            result = sweeps.flux_spectrum_sweep(params, flux, n_modes=args.n,
                                                quantized=not args.classical_only, workers=workers)
        elif cmd == "couplings":
            result = sweeps.coupling_sweep(params, flux, (args.w1, args.w2), polarity=args.polarity,
                                           qubit_charging=args.qubit_charging, workers=workers)
        elif cmd == "xx":
            result = sweeps.xx_sweep(params, flux, args.w1, args.w2, polarity=args.polarity,
                                     qubit_charging=args.qubit_charging, j_convention=args.j_convention,
                                     lamb=args.lamb, workers=workers)
        elif cmd == "zz":
            if len(flux) < 2:
                raise ConfigError("zz needs a flux grid start:stop:count")
            result = sweeps.zz_sweep(params, flux, args.w1, args.w2, levels=args.levels,
                                     polarity=args.polarity, qubit_charging=args.qubit_charging,
                                     include_direct=args.include_direct, refine=not args.no_refine,
                                     workers=workers)
        elif cmd == "design":
            result = sweeps.design_sweep(params, args.parameter, _values(args.values), flux,
                                         n_modes=args.n, relative_junction=args.relative_junction,
                                         workers=workers)
        else:
            if args.mode < 0:
                raise ConfigError("--mode must be nonnegative")
            x = np.linspace(-params.half_length, params.half_length, args.points)
            result = sweeps.envelope_field_map(params, flux, x, args.mode, workers=workers)
    result.metadata["device_file_sha256"] = digest
    return result


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        result = run(args)
    except (ConfigError, InvalidParameters) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except CouplerError as exc:
        print(f"error: {exc.code}: {exc}", file=sys.stderr)
        return EXIT_FAILURE
    if result.n_rows and result.n_failed == result.n_rows:
        print(f"error: all {result.n_rows} points failed ({sorted(set(result.errors))})", file=sys.stderr)
        return EXIT_FAILURE
    text = result.render(args.format)
    if args.output:
        Path(args.output).write_text(text)
    else:
        sys.stdout.write(text)
    if result.n_failed:
        print(f"warning: {result.n_failed} of {result.n_rows} points failed", file=sys.stderr)
        return EXIT_PARTIAL
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
