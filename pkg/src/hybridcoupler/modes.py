"""Classical normal modes of the line with an embedded SQUID.

The envelope of mode m is ``A sin(alpha_1(x))`` left of the junction and
``A B sin(alpha_2(x))`` right of it, with
``alpha_1(x) = k (x + l) + theta_1`` and ``alpha_2(x) = k (x - l) + theta_2``.
Wavenumbers are the roots of the junction current-balance condition.

Sign convention: every mode is normalized with a positive junction jump
``delta_u > 0`` so that endpoint signs are meaningful and continuous in flux.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import integrate, optimize

from .errors import (
    BracketingFailure,
    DegenerateNormalization,
    InvalidParameters,
    OrthogonalityViolation,
    OutOfDomain,
    PoleProximity,
)
from .params import DeviceParams, inverse_junction_inductance, phase_velocity

POLE_GUARD = 1e-8
ROOT_RTOL = 1e-12
POINTS_PER_INTERVAL = 200
ORTHOGONALITY_TOL = 1e-6
DECOUPLED_TOL = 1e-6
QUADRATURE_PANELS = 20000


def boundary_phases(k, params: DeviceParams):
    """Phases (theta_1, theta_2) fixed by the capacitively loaded ends.

    tan(theta_1) = -C0 / (C_g1 k) and tan(theta_2) = +C0 / (C_g2 k), both in
    [-pi/2, pi/2]. A vanishing coupling capacitance gives the open-end limit.
    """
    k = np.asarray(k, dtype=float)
    theta1 = -np.arctan2(params.c0, params.c_g1 * k)
    theta2 = np.arctan2(params.c0, params.c_g2 * k)
    if theta1.ndim == 0:
        return float(theta1), float(theta2)
    return theta1, theta2


def junction_angles(k, params: DeviceParams):
    """alpha_1(x_J), alpha_2(x_J) and the boundary phases at wavenumber k."""
    theta1, theta2 = boundary_phases(k, params)
    alpha1 = k * params.left_length + theta1
    alpha2 = -k * params.right_length + theta2
    return alpha1, alpha2, theta1, theta2


def _coefficient(k, params: DeviceParams, inv_lj: float):
    return params.l0 * inv_lj - params.c_j / params.c0 * k**2


def transcendental_residual(k: float, params: DeviceParams, flux: float) -> float:
    """(L0/L_J - (C_J/C0) k^2) (tan alpha_2 - tan alpha_1) - k at the junction.

    Raises PoleProximity within ``POLE_GUARD`` of a tangent pole.
    """
    if not k > 0:
        raise InvalidParameters(f"wavenumber must be positive, got {k}")
    alpha1, alpha2, _, _ = junction_angles(k, params)
    c1, c2 = math.cos(alpha1), math.cos(alpha2)
    if abs(c1) < POLE_GUARD or abs(c2) < POLE_GUARD:
        raise PoleProximity(f"k={k} is within {POLE_GUARD} of a tangent pole")
    coef = _coefficient(k, params, inverse_junction_inductance(params, flux))
    return coef * (math.tan(alpha2) - math.tan(alpha1)) - k


def pole_free_residual(k, params: DeviceParams, flux: float | None = None, *, inv_lj=None):
    """Residual multiplied through by cos(alpha_1) cos(alpha_2).

    Same roots as :func:`transcendental_residual` away from the poles, and it
    stays finite (and changes sign only at genuine roots) across them.
    """
    if inv_lj is None:
        inv_lj = inverse_junction_inductance(params, flux)
    k = np.asarray(k, dtype=float)
    alpha1, alpha2, _, _ = junction_angles(k, params)
    coef = _coefficient(k, params, inv_lj)
    return coef * np.sin(alpha2 - alpha1) - k * np.cos(alpha1) * np.cos(alpha2)


def _pole_wavenumbers(params: DeviceParams, k_lo: float, k_hi: float) -> np.ndarray:
    """Wavenumbers in (k_lo, k_hi) where cos(alpha_1) or cos(alpha_2) vanishes.

    alpha_1(x_J) increases and alpha_2(x_J) decreases monotonically with k, so
    each pole is isolated by bisection on the angle itself.
    """
    poles = []
    for which, sign in ((0, 1.0), (1, -1.0)):
        def angle(k):
            return junction_angles(k, params)[which]

        lo, hi = sign * angle(k_lo), sign * angle(k_hi)
        # poles at sign*alpha = pi/2 + n pi
        n_first = math.ceil((lo - math.pi / 2) / math.pi)
        n_last = math.floor((hi - math.pi / 2) / math.pi)
        for n in range(n_first, n_last + 1):
            target = math.pi / 2 + n * math.pi
            g = lambda k, t=target: sign * angle(k) - t  # noqa: E731
            g_lo, g_hi = g(k_lo), g(k_hi)
            if g_lo == 0:
                poles.append(k_lo)
            elif g_hi == 0:
                poles.append(k_hi)
            elif g_lo * g_hi < 0:  # rounding can place a boundary target outside the range
                poles.append(optimize.bisect(g, k_lo, k_hi, xtol=1e-15 * k_hi, rtol=1e-15))
    return np.array(sorted(poles))


def scan_grid(params: DeviceParams, n_modes: int, points_per_interval: int = POINTS_PER_INTERVAL):
    """Uniform k grid from 1e-3 pi/(2l) to (n_modes + 4) pi/(2l)."""
    unit = math.pi / params.length
    k_min, k_max = 1e-3 * unit, (n_modes + 4) * unit
    count = int(round((k_max - k_min) / unit * points_per_interval)) + 1
    return np.linspace(k_min, k_max, count)


def solve_wavenumbers(
    params: DeviceParams,
    flux: float,
    n_modes: int,
    points_per_interval: int = POINTS_PER_INTERVAL,
) -> np.ndarray:
    """The ``n_modes`` lowest wavenumbers (1/m) at the given flux.

    When the Josephson energy vanishes exactly, the lowest mode is the
    zero-frequency limit of the junction mode and is returned as k = 0.
    """
    if int(n_modes) != n_modes or n_modes < 1:
        raise InvalidParameters(f"n_modes must be a positive integer, got {n_modes}")
    n_modes = int(n_modes)
    inv_lj = inverse_junction_inductance(params, flux)
    grid = scan_grid(params, n_modes, points_per_interval)
    roots = []
    if inv_lj == 0:
        roots.append(0.0)
    else:
        # the junction mode drops below the uniform grid close to half flux
        grid = np.concatenate([np.geomspace(grid[0] * 1e-12, grid[0], 61)[:-1], grid])
    nodes = np.union1d(grid, _pole_wavenumbers(params, grid[0], grid[-1]))
    values = pole_free_residual(nodes, params, inv_lj=inv_lj)

    def f(k):
        return float(pole_free_residual(k, params, inv_lj=inv_lj))

    for i in range(len(nodes) - 1):
        a, b = nodes[i], nodes[i + 1]
        fa, fb = values[i], values[i + 1]
        if fa == 0:
            roots.append(a)
        elif fa * fb < 0:
            roots.append(optimize.bisect(f, a, b, xtol=ROOT_RTOL * a * 1e-3, rtol=ROOT_RTOL))
        if len(roots) >= n_modes:
            break
    if len(roots) < n_modes:
        raise BracketingFailure(
            f"found {len(roots)} of {n_modes} roots below k_max={nodes[-1]:.6g} 1/m at flux {flux}"
        )
    return np.array(roots[:n_modes])


def amplitude_B(k: float, theta1: float, theta2: float, params: DeviceParams) -> float:
    """Right-segment amplitude ratio cos(alpha_1(x_J)) / cos(alpha_2(x_J))."""
    alpha1 = k * params.left_length + theta1
    alpha2 = -k * params.right_length + theta2
    c2 = math.cos(alpha2)
    if abs(c2) < POLE_GUARD:
        raise PoleProximity(f"cos(alpha_2) = {c2:.3g} at k={k}")
    return math.cos(alpha1) / c2


def _segment_weights(k: float, theta1: float, theta2: float, params: DeviceParams):
    """Capacitive norms of the unit-amplitude left and right segment envelopes.

    Returns (left, right) where each includes its end-capacitor term.
    """
    if k == 0:
        return (
            params.c0 * params.left_length + params.c_g1 * math.sin(theta1) ** 2,
            params.c0 * params.right_length + params.c_g2 * math.sin(theta2) ** 2,
        )
    alpha1 = k * params.left_length + theta1
    alpha2 = -k * params.right_length + theta2
    left = params.c0 * (params.left_length / 2 - (math.sin(2 * alpha1) - math.sin(2 * theta1)) / (4 * k))
    right = params.c0 * (params.right_length / 2 + (math.sin(2 * alpha2) - math.sin(2 * theta2)) / (4 * k))
    return left + params.c_g1 * math.sin(theta1) ** 2, right + params.c_g2 * math.sin(theta2) ** 2


def normalization_integrals(k, B, theta1, theta2, params: DeviceParams):
    """The four closed-form terms (I1, I2, I3, I4) of the capacitive norm."""
    alpha1 = k * params.left_length + theta1
    alpha2 = -k * params.right_length + theta2
    i1 = params.c0 * (params.left_length / 2 - (math.sin(2 * alpha1) - math.sin(2 * theta1)) / (4 * k))
    i2 = params.c0 * B**2 * (params.right_length / 2 + (math.sin(2 * alpha2) - math.sin(2 * theta2)) / (4 * k))
    i3 = params.c_g1 * math.sin(theta1) ** 2 + params.c_g2 * B**2 * math.sin(theta2) ** 2
    i4 = params.c_j * (B * math.sin(alpha2) - math.sin(alpha1)) ** 2
    return i1, i2, i3, i4


def normalization_A(k, B, theta1, theta2, params: DeviceParams) -> float:
    """A_m = sqrt(C_Sigma / (I1 + I2 + I3 + I4))."""
    total = sum(normalization_integrals(k, B, theta1, theta2, params))
    if not total > 0:
        raise DegenerateNormalization(f"normalization sum {total} is not positive at k={k}")
    return math.sqrt(params.total_capacitance / total)


@dataclass(frozen=True)
class ModeSolution:
    """One normal mode at one flux bias.

    ``left_amplitude`` is A_m and ``right_amplitude`` is A_m B_m; storing the
    product keeps modes confined to the right segment (B infinite) finite.
    """

    index: int
    wavenumber: float
    theta1: float
    theta2: float
    left_amplitude: float
    right_amplitude: float
    flux: float
    params: DeviceParams = field(repr=False)

    @property
    def frequency(self) -> float:
        """Angular frequency omega_m = k_m v_p (rad/s)."""
        return self.wavenumber * phase_velocity(self.params)

    @property
    def frequency_ghz(self) -> float:
        return self.frequency / (2 * math.pi) / 1e9

    @property
    def amplitude_A(self) -> float:
        return self.left_amplitude

    @property
    def amplitude_B(self) -> float:
        if self.left_amplitude == 0:
            return math.copysign(math.inf, self.right_amplitude)
        return self.right_amplitude / self.left_amplitude

    @property
    def alpha1_junction(self) -> float:
        return self.wavenumber * self.params.left_length + self.theta1

    @property
    def alpha2_junction(self) -> float:
        return -self.wavenumber * self.params.right_length + self.theta2

    @property
    def delta_u(self) -> float:
        """u(x_J+) - u(x_J-)."""
        return (self.right_amplitude * math.sin(self.alpha2_junction)
                - self.left_amplitude * math.sin(self.alpha1_junction))

    @property
    def left_end(self) -> float:
        """u(-l)."""
        return self.left_amplitude * math.sin(self.theta1)

    @property
    def right_end(self) -> float:
        """u(+l)."""
        return self.right_amplitude * math.sin(self.theta2)

    def _sides(self, x, side):
        x = np.asarray(x, dtype=float)
        p = self.params
        if np.any(x < -p.half_length) or np.any(x > p.half_length):
            raise OutOfDomain(f"x outside [-l, l] = [{-p.half_length}, {p.half_length}]")
        at_junction = x == p.junction_position
        if np.any(at_junction) and side not in ("left", "right"):
            raise OutOfDomain("x = x_J needs side='left' or side='right'")
        left = (x < p.junction_position) | (at_junction & (side == "left"))
        return x, left

    def envelope(self, x, side: str | None = None):
        """u_m(x); at x = x_J the one-sided limit named by ``side`` is used."""
        x, left = self._sides(x, side)
        k, l = self.wavenumber, self.params.half_length
        u = np.where(
            left,
            self.left_amplitude * np.sin(k * (x + l) + self.theta1),
            self.right_amplitude * np.sin(k * (x - l) + self.theta2),
        )
        return float(u) if u.ndim == 0 else u

    def slope(self, x, side: str | None = None):
        """du_m/dx."""
        x, left = self._sides(x, side)
        k, l = self.wavenumber, self.params.half_length
        du = np.where(
            left,
            k * self.left_amplitude * np.cos(k * (x + l) + self.theta1),
            k * self.right_amplitude * np.cos(k * (x - l) + self.theta2),
        )
        return float(du) if du.ndim == 0 else du


def envelope(mode: ModeSolution, x, side: str | None = None):
    return mode.envelope(x, side)


def mode_solution(params: DeviceParams, flux: float, k: float, index: int) -> ModeSolution:
    """Build the normalized envelope for a root ``k`` of the mode equation."""
    theta1, theta2 = boundary_phases(k, params)
    if k == 0:
        # k -> 0 limit of the slope-matching pair: charge-neutral step across the junction
        a_left = params.c0 * params.right_length + params.c_g2
        a_right = params.c0 * params.left_length + params.c_g1
        alpha1, alpha2 = theta1, theta2
    else:
        alpha1 = k * params.left_length + theta1
        alpha2 = -k * params.right_length + theta2
        # slope continuity: a_left cos(alpha1) = a_right cos(alpha2)
        a_left, a_right = math.cos(alpha2), math.cos(alpha1)
        if max(abs(a_left), abs(a_right)) < DECOUPLED_TOL:
            # both slopes vanish at x_J: junction-decoupled mode, no voltage step
            a_left, a_right = math.sin(alpha2), math.sin(alpha1)
    w_left, w_right = _segment_weights(k, theta1, theta2, params)
    jump = a_right * math.sin(alpha2) - a_left * math.sin(alpha1)
    norm = a_left**2 * w_left + a_right**2 * w_right + params.c_j * jump**2
    if not norm > 0:
        raise DegenerateNormalization(f"normalization sum {norm} is not positive at k={k}")
    scale = math.sqrt(params.total_capacitance / norm)
    reference = jump if jump != 0 else a_left * math.sin(theta1)
    if reference < 0:
        scale = -scale
    return ModeSolution(index, float(k), theta1, theta2, a_left * scale, a_right * scale, flux, params)


@dataclass(frozen=True)
class ModeBasis:
    """Normal modes at one flux with their orthonormality checks."""

    modes: tuple
    total_capacitance: float
    flux: float
    params: DeviceParams = field(repr=False)
    gram: np.ndarray | None = field(default=None, repr=False)
    stiffness: np.ndarray | None = field(default=None, repr=False)

    def __len__(self):
        return len(self.modes)

    def __getitem__(self, i):
        return self.modes[i]


def _segment_nodes(params: DeviceParams, panels: int):
    n = panels + (panels % 2)
    return (np.linspace(-params.half_length, params.junction_position, n + 1),
            np.linspace(params.junction_position, params.half_length, n + 1))


def inner_product(m: ModeSolution, n: ModeSolution, panels: int = QUADRATURE_PANELS) -> float:
    """Capacitive inner product <u_m, u_n> by Simpson quadrature split at x_J."""
    p = m.params
    xl, xr = _segment_nodes(p, panels)
    line = integrate.simpson(m.envelope(xl, "left") * n.envelope(xl, "left"), x=xl)
    line += integrate.simpson(m.envelope(xr, "right") * n.envelope(xr, "right"), x=xr)
    return p.c0 * line + p.c_g1 * m.left_end * n.left_end + p.c_g2 * m.right_end * n.right_end \
        + p.c_j * m.delta_u * n.delta_u


def inductive_inner_product(m: ModeSolution, n: ModeSolution, panels: int = QUADRATURE_PANELS) -> float:
    """<du_m/dx, du_n/dx> including the junction term, by Simpson quadrature."""
    p = m.params
    xl, xr = _segment_nodes(p, panels)
    line = integrate.simpson(m.slope(xl, "left") * n.slope(xl, "left"), x=xl)
    line += integrate.simpson(m.slope(xr, "right") * n.slope(xr, "right"), x=xr)
    return line / p.l0 + m.delta_u * n.delta_u * inverse_junction_inductance(p, m.flux)


def build_mode_basis(
    params: DeviceParams,
    flux: float,
    n_modes: int,
    *,
    verify: bool = True,
    panels: int = QUADRATURE_PANELS,
) -> ModeBasis:
    """Solve, normalize and (optionally) verify the lowest ``n_modes`` modes."""
    ks = solve_wavenumbers(params, flux, n_modes)
    modes = tuple(mode_solution(params, flux, k, i) for i, k in enumerate(ks))
    c_sigma = params.total_capacitance
    if not verify:
        return ModeBasis(modes, c_sigma, flux, params)
    size = len(modes)
    gram = np.empty((size, size))
    stiffness = np.empty((size, size))
    for i in range(size):
        for j in range(i, size):
            gram[i, j] = gram[j, i] = inner_product(modes[i], modes[j], panels)
            stiffness[i, j] = stiffness[j, i] = inductive_inner_product(modes[i], modes[j], panels)
    off = gram - np.diag(np.diag(gram))
    if size > 1 and np.max(np.abs(off)) > ORTHOGONALITY_TOL * c_sigma:
        raise OrthogonalityViolation(
            f"max off-diagonal overlap {np.max(np.abs(off)) / c_sigma:.3g} C_Sigma at flux {flux}"
        )
    return ModeBasis(modes, c_sigma, flux, params, gram, stiffness)
