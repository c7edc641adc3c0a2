"""Four-body Hamiltonians, adiabatic tracking, ZZ and XX extraction, propagation.

Basis ordering is (q1, m1, m2, q2) with q1 the most significant digit; a
product state is labelled by its occupation tuple, e.g. ``(1, 0, 0, 1)``.
Energies are in GHz and times in ns.
"""

from __future__ import annotations

import enum
import itertools
import math
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy import optimize

from .errors import (
    ConvergenceFailure,
    InvalidParameters,
    MissingLabel,
    ResonantDivergence,
    TrackingBreak,
)

ZZ_LABELS = ((0, 0, 0, 0), (1, 0, 0, 0), (0, 0, 0, 1), (1, 0, 0, 1))
TIE_TOL = 1e-9
OVERLAP_FLOOR = 0.5
DISPERSIVE_ERROR = 0.3
DISPERSIVE_WARN = 0.1


# ---------------------------------------------------------------------------
# Hamiltonians


@dataclass(frozen=True)
class TruncatedHamiltonian:
    """Real symmetric Hamiltonian over ``levels**4`` product states (GHz)."""

    matrix: np.ndarray
    levels: int
    qubit_frequencies: tuple
    mode_frequencies: tuple
    g: np.ndarray = field(repr=False)

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    def index(self, label) -> int:
        return int(np.ravel_multi_index(tuple(label), (self.levels,) * 4))

    def basis_vector(self, label) -> np.ndarray:
        v = np.zeros(self.dim)
        v[self.index(label)] = 1.0
        return v

    @property
    def excitations(self) -> np.ndarray:
        """Total excitation number of every basis state."""
        digits = np.array(list(itertools.product(range(self.levels), repeat=4)))
        return digits.sum(axis=1)


def _g_matrix(g) -> np.ndarray:
    g = np.asarray(g, dtype=float)
    if g.shape != (2, 2):
        raise InvalidParameters(f"couplings must be a 2x2 array g[qubit, mode], got shape {g.shape}")
    return g


def _ladder(levels: int) -> np.ndarray:
    return np.diag(np.sqrt(np.arange(1, levels)), k=1)


def _embed(op: np.ndarray, site: int, levels: int) -> np.ndarray:
    ops = [np.eye(levels)] * 4
    ops[site] = op
    out = ops[0]
    for o in ops[1:]:
        out = np.kron(out, o)
    return out


# sites of qubit j and mode m in the (q1, m1, m2, q2) ordering
_QUBIT_SITE = (0, 3)
_MODE_SITE = (1, 2)


def build_hamiltonian(w1, w2, nu1, nu2, g, direct: float = 0.0) -> TruncatedHamiltonian:
    """Two-level model sum_j (w_j/2) sz_j + sum_m (nu_m/2) sz_m + sum g_jm (s+_j s-_m + h.c.).

    ``g[j, m]`` couples qubit j to mode m. sz = diag(-1, +1) on (|0>, |1>).
    ``direct`` adds an optional qubit-qubit exchange term.
    """
    # the zero-frequency junction mode at E_Jc = 0 is admitted
    if not (w1 > 0 and w2 > 0 and nu1 >= 0 and nu2 >= 0):
        raise InvalidParameters(f"frequencies must be positive, got {(w1, w2, nu1, nu2)}")
    g = _g_matrix(g)
    sz = np.diag([-1.0, 1.0])
    lower = _ladder(2)
    h = sum(f / 2 * _embed(sz, s, 2) for f, s in zip((w1, nu1, nu2, w2), range(4)))
    h = h + _couplings(g, lower, 2, direct)
    return TruncatedHamiltonian(h, 2, (w1, w2), (nu1, nu2), g)


def _couplings(g, lower, levels, direct):
    h = 0
    for j, m in itertools.product(range(2), range(2)):
        hop = _embed(lower.T, _QUBIT_SITE[j], levels) @ _embed(lower, _MODE_SITE[m], levels)
        h = h + g[j, m] * (hop + hop.T)
    if direct:
        hop = _embed(lower.T, 0, levels) @ _embed(lower, 3, levels)
        h = h + direct * (hop + hop.T)
    return h


def build_multilevel_hamiltonian(
    w1, w2, nu1, nu2, g, anharmonicities=(0.0, 0.0, 0.0, 0.0), levels: int = 3, direct: float = 0.0
) -> TruncatedHamiltonian:
    """Number-conserving Kerr-oscillator model with ``levels`` states per body.

    H = sum_i w_i n_i + (alpha_i/2) n_i (n_i - 1) + sum g_jm (a+_j a_m + h.c.),
    with ``anharmonicities`` ordered (q1, q2, m1, m2). ``levels=2`` gives the
    two-level model shifted so that the ground product state has zero energy.
    """
    if int(levels) != levels or levels < 2:
        raise InvalidParameters(f"levels must be an integer >= 2, got {levels}")
    freqs = (w1, w2, nu1, nu2)
    if not all(f >= 0 for f in freqs):
        raise InvalidParameters(f"frequencies must be nonnegative, got {freqs}")
    g = _g_matrix(g)
    a1, a2, am1, am2 = anharmonicities
    n = np.diag(np.arange(levels, dtype=float))
    kerr = n @ (n - np.eye(levels)) / 2
    h = 0
    for site, (f, alpha) in zip((0, 1, 2, 3), ((w1, a1), (nu1, am1), (nu2, am2), (w2, a2))):
        h = h + _embed(f * n + alpha * kerr, site, levels)
    h = h + _couplings(g, _ladder(levels), levels, direct)
    return TruncatedHamiltonian(h, levels, (w1, w2), (nu1, nu2), g)


def device_hamiltonian(point, w1, w2, levels: int = 3, include_direct: bool = False) -> TruncatedHamiltonian:
    """Hamiltonian for a :class:`~hybridcoupler.quantization.DevicePoint`.

    Modes enter at their quantized 0-1 frequencies with anharmonicity -K_mm;
    qubits carry anharmonicity -E_C,Q from the coupling set.
    """
    nus = point.mode_frequencies
    if len(nus) != 2:
        raise InvalidParameters("the four-body model needs exactly two modes")
    g = point.g_matrix
    direct = point.direct_coupling if include_direct else 0.0
    if levels == 2:
        return build_hamiltonian(w1, w2, nus[0], nus[1], g, direct)
    ec1, ec2 = point.qubit_charging
    k1, k2 = point.kerrs
    return build_multilevel_hamiltonian(w1, w2, nus[0], nus[1], g, (-ec1, -ec2, -k1, -k2), levels, direct)


# ---------------------------------------------------------------------------
# Diagonalization and tracking


@dataclass(frozen=True)
class Eigensystem:
    values: np.ndarray
    vectors: np.ndarray


def eigensolve(h, sectors=None) -> Eigensystem:
    """Ascending eigenvalues and orthonormal eigenvectors of a symmetric matrix.

    ``h`` may be an array or a :class:`TruncatedHamiltonian`. ``sectors``
    (one integer per basis state) diagonalizes each conserved block
    separately, which keeps eigenvectors inside their sector at exact
    cross-sector degeneracies. For a TruncatedHamiltonian the excitation
    number is used automatically.
    """
    if isinstance(h, TruncatedHamiltonian):
        if sectors is None:
            sectors = h.excitations
        h = h.matrix
    h = np.asarray(h, dtype=float)
    try:
        if sectors is None:
            values, vectors = np.linalg.eigh(h)
            return Eigensystem(values, vectors)
        sectors = np.asarray(sectors)
        values = np.empty(len(h))
        vectors = np.zeros_like(h)
        col = 0
        for s in np.unique(sectors):
            idx = np.flatnonzero(sectors == s)
            w, v = np.linalg.eigh(h[np.ix_(idx, idx)])
            values[col:col + len(idx)] = w
            vectors[idx, col:col + len(idx)] = v
            col += len(idx)
    except np.linalg.LinAlgError as exc:
        raise ConvergenceFailure(f"eigensolver did not converge: {exc}") from None
    order = np.argsort(values, kind="stable")
    return Eigensystem(values[order], vectors[:, order])


@dataclass(frozen=True)
class AdiabaticTrack:
    """Labelled eigenpairs along a flux sweep.

    ``indices[i, a]`` is the eigenvector column carrying label ``labels[a]``
    at ``flux[i]``; ``overlaps[i, a]`` is the continuity overlap with the
    neighbour it was tracked from (1 at the starting point).
    """

    flux: np.ndarray
    labels: tuple
    indices: np.ndarray
    energies: np.ndarray
    overlaps: np.ndarray
    vectors: np.ndarray = field(repr=False)
    breaks: tuple = ()
    start: int = 0

    def energy(self, label) -> np.ndarray:
        return self.energies[:, self._column(label)]

    def vector(self, label, i: int) -> np.ndarray:
        return self.vectors[i, self._column(label)]

    def _column(self, label) -> int:
        label = tuple(label)
        if label not in self.labels:
            raise MissingLabel(f"label {label} is not tracked")
        return self.labels.index(label)


def assign_labels(overlap: np.ndarray, previous=None) -> np.ndarray:
    """Injective label-to-eigenvector assignment maximizing total overlap.

    Overlaps equal within ``TIE_TOL`` are resolved in favour of the
    eigenvector index closest to the previous one.
    """
    cost = -np.round(overlap / TIE_TOL) * TIE_TOL
    if previous is not None:
        cols = np.arange(overlap.shape[1])
        cost = cost + 1e-3 * TIE_TOL * np.abs(cols[None, :] - np.asarray(previous)[:, None]) / overlap.shape[1]
    rows, cols = optimize.linear_sum_assignment(cost)
    out = np.empty(overlap.shape[0], dtype=int)
    out[rows] = cols
    return out


def track_adiabatic(
    flux,
    systems,
    labels=ZZ_LABELS,
    levels: int = 2,
    *,
    start: int = 0,
    on_break: str = "raise",
) -> AdiabaticTrack:
    """Follow labelled eigenstates along a monotone flux grid.

    The point ``start`` is labelled by maximum overlap with the bare product
    states; tracking then proceeds outward in both directions by maximum
    overlap with the neighbour's labelled vectors. ``on_break`` is
    ``"raise"`` (TrackingBreak) or ``"record"`` (listed in ``breaks``).
    """
    flux = np.asarray(flux, dtype=float)
    n = len(flux)
    if n != len(systems):
        raise InvalidParameters("flux grid and eigensystems differ in length")
    if n > 1:
        steps = np.diff(flux)
        if not (np.all(steps > 0) or np.all(steps < 0)):
            raise InvalidParameters("flux grid must be strictly monotone")
    if not 0 <= start < n:
        raise InvalidParameters(f"start index {start} outside grid of {n} points")
    labels = tuple(tuple(l) for l in labels)
    bare = [int(np.ravel_multi_index(l, (levels,) * 4)) for l in labels]
    indices = np.empty((n, len(labels)), dtype=int)
    overlaps = np.ones((n, len(labels)))
    indices[start] = assign_labels(np.abs(systems[start].vectors[bare, :]))
    breaks = []
    for order in (range(start + 1, n), range(start - 1, -1, -1)):
        prev = start
        for i in order:
            ov = np.abs(systems[prev].vectors[:, indices[prev]].T @ systems[i].vectors)
            indices[i] = assign_labels(ov, indices[prev])
            overlaps[i] = ov[np.arange(len(labels)), indices[i]]
            if overlaps[i].min() < OVERLAP_FLOOR:
                interval = (min(flux[prev], flux[i]), max(flux[prev], flux[i]))
                if on_break == "raise":
                    raise TrackingBreak(
                        f"overlap {overlaps[i].min():.3f} < {OVERLAP_FLOOR} between flux {interval[0]} and {interval[1]}",
                        interval,
                    )
                breaks.append(interval)
            prev = i
    energies = np.array([systems[i].values[indices[i]] for i in range(n)])
    vectors = np.array([systems[i].vectors[:, indices[i]].T for i in range(n)])
    return AdiabaticTrack(flux, labels, indices, energies, overlaps, vectors, tuple(sorted(breaks)), start)


# ---------------------------------------------------------------------------
# ZZ


@dataclass(frozen=True)
class ZZResult:
    """xi(flux) = E|1001> + E|0000> - E|1000> - E|0001> in GHz."""

    flux: np.ndarray
    xi: np.ndarray

    @property
    def argmax(self) -> int:
        return int(np.argmax(np.abs(self.xi)))

    @property
    def max_abs(self) -> float:
        return float(np.abs(self.xi[self.argmax]))

    @property
    def flux_at_max(self) -> float:
        return float(self.flux[self.argmax])

    @property
    def minima(self) -> list:
        """Grid indices of interior local minima of |xi| (plateaus counted once)."""
        a = np.abs(self.xi)
        return [i for i in range(1, len(a) - 1) if a[i] < a[i - 1] and a[i] <= a[i + 1]]

    @property
    def sign_changes(self) -> list:
        """Indices i with xi[i] and xi[i+1] of opposite sign."""
        return [i for i in range(len(self.xi) - 1) if self.xi[i] * self.xi[i + 1] < 0]


def zz_value(energies: dict) -> float:
    return energies[(1, 0, 0, 1)] + energies[(0, 0, 0, 0)] - energies[(1, 0, 0, 0)] - energies[(0, 0, 0, 1)]


def zz_strength(track: AdiabaticTrack) -> ZZResult:
    e = {label: track.energy(label) for label in ZZ_LABELS}
    return ZZResult(track.flux, zz_value(e))


# ---------------------------------------------------------------------------
# XX


class JConvention(str, enum.Enum):
    """``STANDARD``: J = sum_m g1m g2m (1/D1m + 1/D2m) / 2. ``DOUBLED``: twice that."""

    STANDARD = "standard"
    DOUBLED = "doubled"


class LambConvention(str, enum.Enum):
    """``STANDARD``: sum_m g_jm^2 / D_jm. ``SUM_DETUNING``: sum_m g_jm^2 / (D1m + D2m)."""

    STANDARD = "standard"
    SUM_DETUNING = "sum_detuning"


@dataclass(frozen=True)
class XXResult:
    j12: float
    w1_dressed: float
    w2_dressed: float
    max_ratio: float


def effective_xx(
    w1, w2, g, nus, *, j_convention=JConvention.STANDARD, lamb=LambConvention.STANDARD, strict: bool = True
) -> XXResult:
    """Second-order exchange J12 and Lamb-shifted qubit frequencies (GHz).

    ``g[j, m]`` couples qubit j to mode m and ``nus[m]`` are mode frequencies.
    Raises ResonantDivergence when any |g_jm / D_jm| exceeds 0.3 and warns
    above 0.1; ``strict=False`` skips both and only reports ``max_ratio``.
    """
    g = np.asarray(g, dtype=float)
    nus = np.asarray(nus, dtype=float)
    if g.shape != (2, len(nus)):
        raise InvalidParameters(f"g must have shape (2, {len(nus)}), got {g.shape}")
    detuning = np.array([w1 - nus, w2 - nus])
    with np.errstate(divide="ignore", invalid="ignore"):
        ratios = np.where(g == 0, 0.0, np.abs(g) / np.abs(detuning))
    max_ratio = float(np.max(ratios)) if ratios.size else 0.0
    if strict and max_ratio > DISPERSIVE_ERROR:
        raise ResonantDivergence(f"|g/Delta| = {max_ratio:.3g} exceeds {DISPERSIVE_ERROR}")
    if strict and max_ratio > DISPERSIVE_WARN:
        warnings.warn(f"|g/Delta| = {max_ratio:.3g} exceeds {DISPERSIVE_WARN}; dispersive result is approximate",
                      stacklevel=2)
    with np.errstate(divide="ignore", invalid="ignore"):
        inv = np.where(g == 0, 0.0, 1.0 / detuning)
        j12 = float(np.sum(g[0] * g[1] * (inv[0] + inv[1])))
        if JConvention(j_convention) is JConvention.STANDARD:
            j12 /= 2
        if LambConvention(lamb) is LambConvention.STANDARD:
            shifts = np.sum(np.where(g == 0, 0.0, g**2 * inv), axis=1)
        else:
            total = detuning[0] + detuning[1]
            shifts = np.sum(np.where(g == 0, 0.0, g**2 / total), axis=1)
    return XXResult(j12, w1 + shifts[0], w2 + shifts[1], max_ratio)


@dataclass(frozen=True)
class ExactXX:
    """Half the minimum qubit-like splitting in the single-excitation sector."""

    j12: float
    w2_resonant: float
    splitting: float


def single_excitation_block(h: TruncatedHamiltonian):
    """Rows/columns of the one-excitation states, ordered (q1, m1, m2, q2)."""
    idx = [h.index(l) for l in ((1, 0, 0, 0), (0, 1, 0, 0), (0, 0, 1, 0), (0, 0, 0, 1))]
    return h.matrix[np.ix_(idx, idx)], idx


def _qubit_pair(block):
    w, v = np.linalg.eigh(block)
    weight = v[0] ** 2 + v[3] ** 2
    pair = np.sort(np.argsort(weight, kind="stable")[-2:])
    return w[pair], v[:, pair]


def exact_xx(w1, g, nus, *, window: float = 0.5, xatol: float = 1e-9) -> ExactXX:
    """Exchange from exact diagonalization of the 16-state two-level model.

    The qubit-2 frequency is scanned within ``window`` GHz of ``w1`` for the
    minimum splitting of the two qubit-like single-excitation levels. The
    sign is that of the qubit amplitudes' product in the upper level.
    """
    g = _g_matrix(g)
    base, idx = single_excitation_block(build_hamiltonian(w1, w1, nus[0], nus[1], g))
    # only the qubit-2 diagonal entry depends on w2 within the sector
    shift = np.zeros(4)
    shift[3] = 1.0

    def block(w2):
        return base + np.diag(shift * (w2 - w1))

    def gap(w2):
        e, _ = _qubit_pair(block(w2))
        return e[1] - e[0]

    grid = np.linspace(w1 - window, w1 + window, 101)
    gaps = np.array([gap(w) for w in grid])
    i = int(np.argmin(gaps))
    lo, hi = grid[max(i - 1, 0)], grid[min(i + 1, len(grid) - 1)]
    res = optimize.minimize_scalar(gap, bounds=(lo, hi), method="bounded", options={"xatol": xatol})
    w2 = float(res.x)
    e, v = _qubit_pair(block(w2))
    sign = math.copysign(1.0, v[0, 1] * v[3, 1])
    return ExactXX(sign * (e[1] - e[0]) / 2, w2, float(e[1] - e[0]))


# ---------------------------------------------------------------------------
# Time domain


def time_evolve(h, psi0, duration: float, step: float):
    """Propagate |psi(t)> = exp(-i 2 pi H t)|psi(0)> on t = 0, step, ..., duration.

    Returns ``(times, states)`` with ``states[i]`` the state at ``times[i]``.
    """
    matrix = h.matrix if isinstance(h, TruncatedHamiltonian) else np.asarray(h)
    psi0 = np.asarray(psi0, dtype=complex)
    norm = np.linalg.norm(psi0)
    if abs(norm - 1) > 1e-10:
        raise InvalidParameters(f"initial state norm {norm} is not 1")
    if not (duration >= 0 and step > 0):
        raise InvalidParameters("duration must be nonnegative and step positive")
    count = int(round(duration / step))
    times = np.arange(count + 1) * step
    es = eigensolve(matrix)
    coeffs = es.vectors.T @ psi0
    phases = np.exp(-2j * np.pi * np.outer(times, es.values))
    return times, (phases * coeffs) @ es.vectors.T


@dataclass(frozen=True)
class ChevronResult:
    """Qubit-2 excitation probability over (qubit-2 frequency, time)."""

    w1: float
    w2: np.ndarray
    times: np.ndarray
    population: np.ndarray
    single_excitation_total: np.ndarray
    frequencies: np.ndarray

    @property
    def detuning(self) -> np.ndarray:
        return self.w2 - self.w1


def dominant_frequency(signal, dt: float, pad: int = 8) -> float:
    """Strongest nonzero FFT frequency with parabolic peak interpolation."""
    s = np.asarray(signal, dtype=float)
    s = s - s.mean()
    n = len(s) * pad
    spec = np.abs(np.fft.rfft(s, n))
    k = int(np.argmax(spec[1:])) + 1
    if 1 <= k < len(spec) - 1:
        a, b, c = spec[k - 1], spec[k], spec[k + 1]
        denom = a - 2 * b + c
        shift = 0.5 * (a - c) / denom if denom != 0 else 0.0
    else:
        shift = 0.0
    return (k + shift) / (n * dt)


def chevron(w1, w2_grid, times, nus, g) -> ChevronResult:
    """Vacuum Rabi exchange from |1000> in the two-level model.

    ``times`` must be uniformly spaced and start at 0.
    """
    times = np.asarray(times, dtype=float)
    dt = times[1] - times[0]
    pops, totals, freqs = [], [], []
    for w2 in w2_grid:
        h = build_hamiltonian(w1, w2, nus[0], nus[1], g)
        block, _ = single_excitation_block(h)
        es = eigensolve(block)
        psi0 = np.array([1.0, 0.0, 0.0, 0.0])
        amp = (np.exp(-2j * np.pi * np.outer(times, es.values)) * (es.vectors.T @ psi0)) @ es.vectors.T
        prob = np.abs(amp) ** 2
        pops.append(prob[:, 3])
        totals.append(prob.sum(axis=1))
        freqs.append(dominant_frequency(prob[:, 3], dt))
    return ChevronResult(w1, np.asarray(w2_grid, float), times, np.array(pops), np.array(totals), np.array(freqs))


def conditional_phase(h, dressed: dict, hold_time: float, step: float = 0.01) -> float:
    """Conditional phase (rad) accumulated over ``hold_time`` ns.

    ``dressed`` maps each ZZ label to its dressed eigenvector. The target
    qubit is prepared in (|0> + |1>)/sqrt(2) with the control in |0> and in
    |1>; the difference of the two precession phases is returned with the
    sign convention phase = 2 pi xi t.
    """
    for label in ZZ_LABELS:
        if label not in dressed:
            raise MissingLabel(f"dressed state for {label} missing")
    phases = []
    for g_lab, e_lab in (((0, 0, 0, 0), (0, 0, 0, 1)), ((1, 0, 0, 0), (1, 0, 0, 1))):
        psi0 = (dressed[g_lab] + dressed[e_lab]) / math.sqrt(2)
        psi0 = psi0 / np.linalg.norm(psi0)
        times, states = time_evolve(h, psi0, hold_time, step)
        ratio = (states @ dressed[e_lab].conj()) / (states @ dressed[g_lab].conj())
        phases.append(np.unwrap(np.angle(ratio)))
    # precession of the target accumulates -2 pi (E_e - E_g) t
    return float(-(phases[1][-1] - phases[0][-1]))
