"""Flux and design-parameter sweeps with a deterministic parallel map.

Every sweep evaluates grid points independently (optionally in a process
pool), collects them in grid order and, where needed, runs a sequential
pass afterwards. Failed points are kept as rows of NaN with an error code.
"""

from __future__ import annotations

import itertools
import math
import os
from concurrent.futures import ProcessPoolExecutor
from functools import partial

import numpy as np
from scipy import optimize

from . import dynamics, modes
from ._version import __version__
from .dynamics import ZZ_LABELS, assign_labels, device_hamiltonian, eigensolve
from .errors import ConfigError, CouplerError, InvalidParameters, JunctionDecoupledMode
from .modes import build_mode_basis
from .quantization import Polarity, QubitCharging, couplings_at, mode_energies
from .tables import SweepResult

WORKERS_ENV = "HYBRIDCOUPLER_WORKERS"
DEFAULT_FLUX = "-0.5:0.5:401"
SUPPRESSION_THRESHOLD = 1e-5  # GHz
MAX_REFINEMENT = 3

DESIGN_PARAMETERS = {
    "x_J": "junction_position",
    "junction_position": "junction_position",
    "l": "half_length",
    "half_length": "half_length",
    "C_J": "c_j",
    "c_j": "c_j",
    "E_J_max": "ej_max",
    "ej_max": "ej_max",
}


def parse_flux_grid(text: str) -> np.ndarray:
    """``start:stop:count`` to an inclusive linear grid."""
    parts = str(text).split(":")
    if len(parts) == 1:
        try:
            return np.array([float(parts[0])])
        except ValueError:
            raise ConfigError(f"bad flux value {text!r}") from None
    if len(parts) != 3:
        raise ConfigError(f"flux grid must be start:stop:count, got {text!r}")
    try:
        start, stop = float(parts[0]), float(parts[1])
        count = int(parts[2])
    except ValueError:
        raise ConfigError(f"flux grid must be start:stop:count, got {text!r}") from None
    if count < 2 or start == stop or not (math.isfinite(start) and math.isfinite(stop)):
        raise ConfigError(f"flux grid needs count >= 2 and distinct finite ends, got {text!r}")
    return np.linspace(start, stop, count)


def _grid(flux) -> np.ndarray:
    if isinstance(flux, str):
        return parse_flux_grid(flux)
    grid = np.atleast_1d(np.asarray(flux, dtype=float))
    if not np.all(np.isfinite(grid)):
        raise InvalidParameters("flux grid must be finite")
    if len(grid) > 1:
        steps = np.diff(grid)
        if not (np.all(steps > 0) or np.all(steps < 0)):
            raise InvalidParameters("flux grid must be strictly monotone")
    return grid


def default_workers() -> int:
    value = os.environ.get(WORKERS_ENV)
    if value is None:
        return 1
    try:
        workers = int(value)
    except ValueError:
        raise ConfigError(f"{WORKERS_ENV} must be an integer, got {value!r}") from None
    if workers < 1:
        raise ConfigError(f"{WORKERS_ENV} must be >= 1")
    return workers


def parallel_map(func, items, workers: int | None = None) -> list:
    """Ordered map over ``items``; a process pool is used when ``workers > 1``."""
    items = list(items)
    workers = default_workers() if workers is None else int(workers)
    if workers < 1:
        raise InvalidParameters(f"workers must be >= 1, got {workers}")
    if workers == 1 or len(items) <= 1:
        return [func(x) for x in items]
    with ProcessPoolExecutor(max_workers=min(workers, len(items))) as pool:
        return list(pool.map(func, items, chunksize=max(1, len(items) // (4 * workers))))


def _metadata(kind: str, params, **options) -> dict:
    return {
        "sweep": kind,
        "tool": f"hybridcoupler {__version__}",
        "device_digest": params.digest(),
        "device": params.to_dict(),
        "flux_convention": params.flux_convention.value,
        "options": options,
        "tolerances": {
            "root_rtol": modes.ROOT_RTOL,
            "pole_guard": modes.POLE_GUARD,
            "scan_points_per_interval": modes.POINTS_PER_INTERVAL,
            "tracking_overlap_floor": dynamics.OVERLAP_FLOOR,
            "tie_tol": dynamics.TIE_TOL,
        },
        "units": {"flux": "Phi/Phi0", "energy": "GHz", "length": "m"},
    }


def _assemble(names, flux_name, flux, outputs, metadata) -> SweepResult:
    columns = {flux_name: np.asarray(flux, dtype=float)}
    width = len(names)
    data = np.array([row if row is not None else [math.nan] * width for row, _ in outputs], dtype=float)
    data = data.reshape(len(outputs), width)
    for k, name in enumerate(names):
        columns[name] = data[:, k]
    return SweepResult(columns, [code for _, code in outputs], metadata)


def _guarded(func):
    def run(*args):
        try:
            return func(*args), ""
        except CouplerError as exc:
            return None, exc.code
    return run


# ---------------------------------------------------------------------------
# spectrum


def _mode_row(basis, quantized):
    row = [m.frequency_ghz for m in basis]
    if quantized:
        omega, eta = [], []
        for m in basis:
            try:
                e = mode_energies(m)
                omega.append(e.omega_c)
                eta.append(e.eta)
            except JunctionDecoupledMode:
                # junction does not participate: bare linear mode
                omega.append(m.frequency_ghz)
                eta.append(0.0)
        row += omega + eta
    return row


def _spectrum_point(params, n_modes, quantized, flux):
    return _guarded(lambda: _mode_row(build_mode_basis(params, flux, n_modes, verify=False), quantized))()


def flux_spectrum_sweep(params, flux=DEFAULT_FLUX, *, n_modes: int = 2, quantized: bool = True,
                        workers: int | None = None) -> SweepResult:
    """Classical mode frequencies and, optionally, quantized 0-1 frequencies and anharmonicities."""
    grid = _grid(flux)
    if n_modes < 1:
        raise InvalidParameters("n_modes must be >= 1")
    outputs = parallel_map(partial(_spectrum_point, params, n_modes, quantized), grid, workers)
    names = [f"nu_{m + 1}" for m in range(n_modes)]
    if quantized:
        names += [f"omega_c_{m + 1}" for m in range(n_modes)] + [f"eta_{m + 1}" for m in range(n_modes)]
    meta = _metadata("spectrum", params, n_modes=n_modes, quantized=quantized)
    return _assemble(names, "flux", grid, outputs, meta)


# ---------------------------------------------------------------------------
# couplings

COUPLING_COLUMNS = (
    "nu_1", "nu_2", "omega_c_1", "omega_c_2", "kerr_1", "kerr_2",
    "g_11", "g_12", "g_21", "g_22", "e13_1", "e13_2",
    "u_left_1", "u_right_1", "u_left_2", "u_right_2",
)


def _coupling_row(params, qubit_freqs, options, flux):
    pt = couplings_at(params, flux, qubit_freqs, 2, **options)
    g = pt.g_matrix
    row = list(pt.classical_frequencies) + list(pt.mode_frequencies) + list(pt.kerrs)
    # g_jm: qubit j, mode m
    row += [g[0, 0], g[0, 1], g[1, 0], g[1, 1]]
    row += [c.e13 for c in pt.couplings]
    for m in pt.basis:
        row += [m.left_end, m.right_end]
    return row


def _coupling_point(params, qubit_freqs, options, flux):
    return _guarded(_coupling_row)(params, qubit_freqs, options, flux)


def coupling_sweep(params, flux=DEFAULT_FLUX, qubit_freqs=None, *, polarity=Polarity.ENVELOPE,
                   qubit_charging=QubitCharging.MATRIX, workers: int | None = None) -> SweepResult:
    """g_jm(flux) for both qubits and the two lowest modes (GHz)."""
    grid = _grid(flux)
    options = {"polarity": Polarity(polarity), "qubit_charging": QubitCharging(qubit_charging)}
    outputs = parallel_map(partial(_coupling_point, params, qubit_freqs, options), grid, workers)
    meta = _metadata("couplings", params, qubit_freqs=qubit_freqs, **options)
    return _assemble(list(COUPLING_COLUMNS), "flux", grid, outputs, meta)


# ---------------------------------------------------------------------------
# XX

XX_COLUMNS = (
    "j12_sw", "j12_sw_resonant", "j12_exact", "w2_resonant",
    "w1_dressed", "w2_dressed", "max_ratio", "dispersive_valid",
)


def _xx_row(params, w1, w2, options, conventions, flux):
    pt = couplings_at(params, flux, (w1, w2), 2, **options)
    g, nus = pt.g_matrix, pt.mode_frequencies
    exact = dynamics.exact_xx(w1, g, nus)
    sw = dynamics.effective_xx(w1, w2, g, nus, strict=False, **conventions)
    sw_res = dynamics.effective_xx(w1, exact.w2_resonant, g, nus, strict=False, **conventions)
    valid = 1 if sw.max_ratio <= dynamics.DISPERSIVE_ERROR else 0
    return [sw.j12, sw_res.j12, exact.j12, exact.w2_resonant, sw.w1_dressed, sw.w2_dressed, sw.max_ratio, valid]


def _xx_point(params, w1, w2, options, conventions, flux):
    return _guarded(_xx_row)(params, w1, w2, options, conventions, flux)


def xx_sweep(params, flux=DEFAULT_FLUX, w1: float = 5.5, w2: float | None = None, *,
             polarity=Polarity.ENVELOPE, qubit_charging=QubitCharging.MATRIX,
             j_convention=dynamics.JConvention.STANDARD, lamb=dynamics.LambConvention.STANDARD,
             workers: int | None = None) -> SweepResult:
    """Dispersive and exact exchange coupling J12(flux) in GHz.

    ``j12_sw`` uses the nominal qubit frequencies; ``j12_sw_resonant`` uses the
    qubit-2 frequency at which the exact single-excitation splitting is
    smallest, which is where ``j12_exact`` is defined. Points outside the
    dispersive regime (|g/Delta| > 0.3) carry ``dispersive_valid = 0``.
    """
    grid = _grid(flux)
    w2 = w1 if w2 is None else w2
    options = {"polarity": Polarity(polarity), "qubit_charging": QubitCharging(qubit_charging)}
    conventions = {"j_convention": dynamics.JConvention(j_convention), "lamb": dynamics.LambConvention(lamb)}
    outputs = parallel_map(partial(_xx_point, params, w1, w2, options, conventions), grid, workers)
    result = _assemble(list(XX_COLUMNS), "flux", grid, outputs, None)
    exact = result["j12_exact"]
    ok = np.isfinite(exact)
    report = {}
    if ok.any():
        i = int(np.nanargmax(exact))
        report = {"max_j12_exact": exact[i], "flux_at_max": grid[i],
                  "n_dispersive_invalid": int(np.sum(result["dispersive_valid"][ok] == 0))}
    result.metadata = _metadata("xx", params, w1=w1, w2=w2, **options, **conventions)
    result.metadata["report"] = report
    return result


# ---------------------------------------------------------------------------
# ZZ


def _zz_eval(params, w1, w2, levels, options, include_direct, flux):
    pt = couplings_at(params, flux, (w1, w2), 2, **options)
    es = eigensolve(device_hamiltonian(pt, w1, w2, levels, include_direct))
    return float(pt.classical_frequencies[0]), es


def _zz_point(params, w1, w2, levels, options, include_direct, flux):
    return _guarded(_zz_eval)(params, w1, w2, levels, options, include_direct, flux)


def _label_energies(es, reference, previous):
    overlap = np.abs(reference @ es.vectors)
    idx = assign_labels(overlap, previous)
    return dict(zip(ZZ_LABELS, es.values[idx]))


def zz_sweep(params, flux=DEFAULT_FLUX, w1: float = 4.25, w2: float = 4.7, *, levels: int = 3,
             polarity=Polarity.ENVELOPE, qubit_charging=QubitCharging.MATRIX,
             include_direct: bool = False, refine: bool = True,
             workers: int | None = None) -> SweepResult:
    """ZZ strength xi(flux) from adiabatically tracked eigenenergies (GHz).

    Tracking starts at the grid point with the lowest first-mode frequency.
    Tracking breaks trigger up to three levels of local grid refinement.
    Suppression points are refined by golden-section search on |xi|.
    """
    grid = _grid(flux)
    if len(grid) < 2:
        raise InvalidParameters("a ZZ sweep needs at least two flux points")
    options = {"polarity": Polarity(polarity), "qubit_charging": QubitCharging(qubit_charging)}
    point = partial(_zz_point, params, w1, w2, levels, options, include_direct)
    outputs = parallel_map(point, grid, workers)
    errors = [code for _, code in outputs]
    solved = {float(f): out for f, (out, code) in zip(grid, outputs) if not code}

    def track():
        fl = sorted(solved)
        nu1 = np.array([solved[f][0] for f in fl])
        return dynamics.track_adiabatic(fl, [solved[f][1] for f in fl], ZZ_LABELS, levels,
                                        start=int(np.argmin(nu1)), on_break="record")

    n_refine = 0
    tr = track() if solved else None
    while tr is not None and tr.breaks and n_refine < MAX_REFINEMENT:
        extra = sorted({float(x) for a, b in tr.breaks for x in np.linspace(a, b, 5)[1:-1]})
        for f, (out, code) in zip(extra, parallel_map(point, extra, workers)):
            if not code:
                solved[f] = out
        n_refine += 1
        tr = track()

    names = ["xi", "e_0000", "e_1000", "e_0001", "e_1001", "nu_1", "overlap"]
    data = np.full((len(grid), len(names)), math.nan)
    if tr is not None:
        position = {f: i for i, f in enumerate(tr.flux)}
        for r, f in enumerate(grid):
            if errors[r]:
                continue
            i = position[float(f)]
            e = dict(zip(ZZ_LABELS, tr.energies[i]))
            data[r] = [dynamics.zz_value(e), *tr.energies[i], solved[float(f)][0], tr.overlaps[i].min()]
            if any(a <= f <= b for a, b in tr.breaks):
                errors[r] = "tracking_break"
    columns = {"flux": grid, **{n: data[:, k] for k, n in enumerate(names)}}
    result = SweepResult(columns, errors, _metadata(
        "zz", params, w1=w1, w2=w2, levels=levels, include_direct=include_direct, refine=refine, **options))
    result.metadata["report"] = _zz_report(result, tr, point, refine, n_refine)
    return result


def _refine_minimum(tr, point, lo, mid, hi):
    """Golden-section search of |xi| on the bracket (lo, mid, hi)."""
    def objective(f):
        out, code = point(f)
        if code:
            return math.inf
        j = int(np.argmin(np.abs(tr.flux - f)))
        return abs(dynamics.zz_value(_label_energies(out[1], tr.vectors[j], tr.indices[j])))

    try:
        res = optimize.minimize_scalar(objective, bracket=(lo, mid, hi), method="golden",
                                       options={"xtol": 1e-10})
        if lo <= res.x <= hi and math.isfinite(res.fun):
            return float(res.x), float(res.fun)
    except ValueError:
        pass
    res = optimize.minimize_scalar(objective, bounds=(lo, hi), method="bounded", options={"xatol": 1e-12})
    return float(res.x), float(res.fun)


def _zz_report(result, tr, point, refine, n_refine) -> dict:
    flux, xi = result["flux"], result["xi"]
    ok = np.isfinite(xi)
    if not ok.any():
        return {"refinement_levels": n_refine}
    a = np.where(ok, np.abs(xi), np.nan)
    imax = int(np.nanargmax(a))
    candidates = set()
    for i in range(1, len(a) - 1):
        if not (ok[i - 1] and ok[i] and ok[i + 1]):
            continue
        local_min = a[i] < a[i - 1] and a[i] <= a[i + 1]
        crossing = xi[i] * xi[i + 1] < 0 or xi[i] * xi[i - 1] < 0
        if local_min and (crossing or a[i] < SUPPRESSION_THRESHOLD):
            candidates.add(i)
    minima = []
    for i in sorted(candidates):
        entry = {"grid_flux": flux[i], "grid_abs_xi": a[i]}
        if refine and tr is not None:
            lo, hi = sorted((flux[i - 1], flux[i + 1]))
            entry["flux"], entry["abs_xi"] = _refine_minimum(tr, point, lo, flux[i], hi)
        else:
            entry["flux"], entry["abs_xi"] = flux[i], a[i]
        minima.append(entry)
    grid_min = float(np.nanmin(a))
    best = min([m["abs_xi"] for m in minima] + [grid_min])
    return {
        "max_abs_xi": a[imax],
        "flux_at_max": flux[imax],
        "min_abs_xi_grid": grid_min,
        "flux_at_min_grid": flux[int(np.nanargmin(a))],
        "min_abs_xi": best,
        "contrast_grid": a[imax] / grid_min if grid_min > 0 else math.inf,
        "contrast": a[imax] / best if best > 0 else math.inf,
        "suppression_points": minima,
        "refinement_levels": n_refine,
        "tracking_breaks": [list(b) for b in (tr.breaks if tr is not None else ())],
    }


# ---------------------------------------------------------------------------
# design sweeps


def _design_point(params, field, n_modes, relative_junction, item):
    value, flux = item
    try:
        changes = {field: value}
        if relative_junction and field == "half_length":
            changes["junction_position"] = params.junction_position * value / params.half_length
        device = params.replace(**changes)
        basis = build_mode_basis(device, flux, n_modes, verify=False)
    except CouplerError as exc:
        return None, exc.code
    nus = [m.frequency_ghz for m in basis]
    return nus + [nus[1] - nus[0] if n_modes > 1 else math.nan], ""


def design_sweep(params, parameter: str, values, flux=DEFAULT_FLUX, *, n_modes: int = 2,
                 relative_junction: bool = False, workers: int | None = None) -> SweepResult:
    """Mode frequencies over (design value, flux); ``gap`` is nu_2 - nu_1.

    With ``relative_junction`` a length sweep keeps x_J / l fixed instead of x_J.
    """
    if parameter not in DESIGN_PARAMETERS:
        raise ConfigError(f"design parameter must be one of {sorted(DESIGN_PARAMETERS)}, got {parameter!r}")
    field = DESIGN_PARAMETERS[parameter]
    grid = _grid(flux)
    values = np.atleast_1d(np.asarray(values, dtype=float))
    items = list(itertools.product(values, grid))
    outputs = parallel_map(partial(_design_point, params, field, n_modes, relative_junction), items, workers)
    names = [f"nu_{m + 1}" for m in range(n_modes)] + ["gap"]
    result = _assemble(names, "flux", [f for _, f in items], outputs,
                       _metadata("design", params, parameter=field, n_modes=n_modes,
                                 relative_junction=relative_junction))
    cols = {"flux": result["flux"], field: np.array([v for v, _ in items])}
    cols.update({n: result[n] for n in names})
    result.columns = cols
    return result


# ---------------------------------------------------------------------------
# field maps


def _envelope_point(params, x, mode_index, flux):
    try:
        basis = build_mode_basis(params, flux, mode_index + 1, verify=False)
    except CouplerError as exc:
        return None, exc.code
    mode = basis[mode_index]
    return [list(mode.envelope(x, side="left")), mode.delta_u], ""


def envelope_field_map(params, flux, x, mode_index: int = 0, *, workers: int | None = None) -> SweepResult:
    """u_m(x; flux) in long format (one row per (flux, x)).

    A sample exactly at the junction takes the left-side limit.
    """
    grid = _grid(flux)
    x = np.atleast_1d(np.asarray(x, dtype=float))
    if np.any(np.abs(x) > params.half_length):
        raise InvalidParameters("x grid must lie within [-l, l]")
    if mode_index < 0:
        raise InvalidParameters("mode index must be nonnegative")
    outputs = parallel_map(partial(_envelope_point, params, x, mode_index), grid, workers)
    fl, xs, us, dus, errors = [], [], [], [], []
    for f, (out, code) in zip(grid, outputs):
        for k, xv in enumerate(x):
            fl.append(f)
            xs.append(xv)
            us.append(out[0][k] if out else math.nan)
            dus.append(out[1] if out else math.nan)
            errors.append(code)
    return SweepResult({"flux": np.array(fl), "x": np.array(xs), "u": np.array(us), "delta_u": np.array(dus)},
                       errors, _metadata("fieldmap", params, mode_index=mode_index))
