import dataclasses
import math

import numpy as np
import pytest
from scipy import optimize

from hybridcoupler.errors import (
    BracketingFailure,
    DegenerateNormalization,
    InvalidParameters,
    OrthogonalityViolation,
    OutOfDomain,
    PoleProximity,
)
from hybridcoupler.modes import (
    ModeBasis,
    amplitude_B,
    boundary_phases,
    build_mode_basis,
    inductive_inner_product,
    inner_product,
    junction_angles,
    mode_solution,
    normalization_A,
    normalization_integrals,
    pole_free_residual,
    solve_wavenumbers,
    transcendental_residual,
)
from hybridcoupler.params import phase_velocity, reference_device


@pytest.fixture(scope="module")
def device():
    return reference_device()


@pytest.fixture(scope="module")
def basis0(device):
    return build_mode_basis(device, 0.0, 3)


def ghz(device, ks):
    return np.asarray(ks) * phase_velocity(device) / (2 * math.pi) / 1e9


# -- boundary phases -------------------------------------------------------


def test_boundary_phases_open_end_limit(device):
    t1, t2 = boundary_phases(300.0, device.replace(c_g1=0.0, c_g2=0.0))
    assert t1 == -math.pi / 2 and t2 == math.pi / 2


def test_boundary_phases_symmetric(device):
    ks = np.linspace(10, 2000, 50)
    t1, t2 = boundary_phases(ks, device)
    np.testing.assert_array_equal(t2, -t1)
    assert np.all((t1 > -math.pi / 2) & (t1 < 0))


def test_boundary_phase_value(device):
    # atan(-C0 / (C_g1 k)) at k = 2 pi / 0.021 m
    t1, _ = boundary_phases(2 * math.pi / 0.021, device)
    assert t1 == pytest.approx(-1.5393649728090826, rel=1e-12)


# -- residual and roots ------------------------------------------------------


def test_residual_vanishes_at_roots(device):
    for flux in (0.0, 0.2, 0.45):
        for k in solve_wavenumbers(device, flux, 4):
            assert abs(transcendental_residual(k, device, flux)) < 1e-9 * k


def test_residual_rejects_pole(device):
    k0 = solve_wavenumbers(device, 0.0, 1)[0]
    # first pole of tan(alpha_1): alpha_1(x_J) = pi/2
    kp = optimize.brentq(lambda k: junction_angles(k, device)[0] - math.pi / 2, k0, 2 * k0 + 500)
    with pytest.raises(PoleProximity):
        transcendental_residual(kp, device, 0.0)
    with pytest.raises(InvalidParameters):
        transcendental_residual(0.0, device, 0.0)


def test_product_form_matches_tangent_form(device):
    inv = 1 / 4.78e-9
    for k in (120.0, 333.0, 711.0):
        a1, a2, _, _ = junction_angles(k, device)
        expected = transcendental_residual(k, device, 0.0) * math.cos(a1) * math.cos(a2)
        assert float(pole_free_residual(k, device, 0.0)) == pytest.approx(expected, rel=1e-10)
    assert np.isfinite(pole_free_residual(np.linspace(1, 2000, 999), device, inv_lj=inv)).all()


def test_reference_device_spectrum(device):
    # frozen from a 4000-cell lumped LC ladder of the same circuit
    np.testing.assert_allclose(ghz(device, solve_wavenumbers(device, 0.0, 3)), [4.9423, 7.6950, 13.4512], rtol=2e-5)
    half = ghz(device, solve_wavenumbers(device, 0.5, 3))
    assert half[0] == 0.0
    np.testing.assert_allclose(half[1:], [6.5325, 13.0503], rtol=2e-5)


def test_roots_increasing_and_positive(device):
    for flux in np.linspace(0, 0.49, 8):
        ks = solve_wavenumbers(device, flux, 5)
        assert ks[0] > 0 and np.all(np.diff(ks) > 0)


def test_third_mode_above_13ghz(device):
    assert ghz(device, solve_wavenumbers(device, 0.0, 3))[2] > 13.0


def test_spectrum_even_periodic_and_continuous_to_half_flux(device):
    for flux in (0.1, 0.37):
        a = solve_wavenumbers(device, flux, 3)
        np.testing.assert_allclose(solve_wavenumbers(device, -flux, 3), a, rtol=1e-12)
        np.testing.assert_allclose(solve_wavenumbers(device, flux + 1, 3), a, rtol=1e-9)
    near = ghz(device, solve_wavenumbers(device, 0.5 - 1e-6, 3))
    at = ghz(device, solve_wavenumbers(device, 0.5, 3))
    np.testing.assert_allclose(near[1:], at[1:], rtol=1e-6)
    # nu_1 ~ sqrt(E_Jc) ~ sqrt(distance from half flux)
    nearer = ghz(device, solve_wavenumbers(device, 0.5 - 1e-8, 1))
    assert nearer[0] == pytest.approx(near[0] / 10, rel=1e-3)


def test_first_mode_minimum_at_half_flux(device):
    grid = np.linspace(-0.5, 0.5, 41)
    nu1 = [solve_wavenumbers(device, f, 1)[0] for f in grid]
    assert np.argmin(nu1) in (0, len(grid) - 1)
    assert nu1[0] == nu1[-1] == 0.0


def test_root_count_stable_under_refinement(device):
    for flux in (0.0, 0.3, 0.5):
        coarse = solve_wavenumbers(device, flux, 6)
        fine = solve_wavenumbers(device, flux, 6, points_per_interval=400)
        np.testing.assert_allclose(coarse, fine, rtol=1e-11)


def test_n_modes_validation(device):
    with pytest.raises(InvalidParameters):
        solve_wavenumbers(device, 0.0, 0)


def test_bracketing_failure_reported(device):
    # a scan with a single point per interval cannot isolate any root
    with pytest.raises(BracketingFailure):
        solve_wavenumbers(device.replace(c_j=0.0), 0.0, 8, points_per_interval=0)


# -- limits ------------------------------------------------------------------


def test_shorted_junction_limit_uniform_line(device):
    bare = device.replace(ej_max=1e9, c_j=0.0, c_g1=0.0, c_g2=0.0)
    ks = solve_wavenumbers(bare, 0.0, 3)
    np.testing.assert_allclose(ks, np.arange(1, 4) * math.pi / bare.length, rtol=1e-6)
    assert ghz(bare, ks)[0] == pytest.approx(5.9655, abs=1e-4)


def _segment_roots(device, which, k_max):
    """Roots of cos(alpha_i(x_J)) = 0, each segment isolated by its own scan."""
    grid = np.linspace(1e-3, k_max, 20000)
    f = lambda k: math.cos(junction_angles(k, device)[which])  # noqa: E731
    vals = np.array([f(k) for k in grid])
    return [optimize.brentq(f, a, b, xtol=1e-14) for a, b, fa, fb in
            zip(grid[:-1], grid[1:], vals[:-1], vals[1:]) if fa * fb < 0]


def test_weak_junction_limit_decoupled_segments(device):
    weak = device.replace(ej_max=1e-9, c_j=0.0)
    ks = solve_wavenumbers(weak, 0.0, 5)
    expected = sorted(_segment_roots(weak, 0, 1500) + _segment_roots(weak, 1, 1500))[:4]
    # the lowest root is the vanishing junction mode
    assert ks[0] < 1e-2
    np.testing.assert_allclose(ks[1:], expected, rtol=1e-6)


# -- amplitudes and normalization --------------------------------------------


def test_slope_continuity(basis0, device):
    for flux in (0.0, 0.3, 0.5):
        for mode in build_mode_basis(device, flux, 3, verify=False):
            left = mode.slope(device.junction_position, "left")
            right = mode.slope(device.junction_position, "right")
            assert left == pytest.approx(right, rel=1e-10, abs=1e-12)


def test_amplitude_B_finite_difference(basis0, device):
    mode = basis0[0]
    xj, h = device.junction_position, 1e-6
    u = mode.envelope
    # second-order one-sided differences
    left = (3 * u(xj, "left") - 4 * u(xj - h) + u(xj - 2 * h)) / (2 * h) / mode.left_amplitude
    right = (-3 * u(xj, "right") + 4 * u(xj + h) - u(xj + 2 * h)) / (2 * h) / mode.left_amplitude
    # B = ratio making the one-sided slopes equal, with both slopes at unit amplitude
    unit_right = right / mode.amplitude_B
    b_fd = left / unit_right
    b = amplitude_B(mode.wavenumber, mode.theta1, mode.theta2, device)
    assert b == pytest.approx(b_fd, rel=1e-7)
    assert b == pytest.approx(mode.amplitude_B, rel=1e-12)
    assert b == pytest.approx(2.17214214852, rel=1e-9)


def test_symmetric_device_has_unit_B(device):
    sym = device.replace(junction_position=0.0)
    for mode in build_mode_basis(sym, 0.1, 3, verify=False):
        assert abs(mode.amplitude_B) == pytest.approx(1.0, rel=1e-9)


def test_closed_form_norm_matches_quadrature(basis0, device):
    for mode in basis0:
        a = normalization_A(mode.wavenumber, mode.amplitude_B, mode.theta1, mode.theta2, device)
        assert a == pytest.approx(abs(mode.amplitude_A), rel=1e-10)
        assert inner_product(mode, mode, 20000) == pytest.approx(device.total_capacitance, rel=1e-8)
        i1, i2, i3, i4 = normalization_integrals(mode.wavenumber, mode.amplitude_B, mode.theta1, mode.theta2, device)
        assert i3 >= 0 and i4 >= 0


def test_uniform_half_wave_amplitude(device):
    bare = device.replace(ej_max=1e13, c_j=0.0, c_g1=0.0, c_g2=0.0, junction_position=0.0)
    mode = build_mode_basis(bare, 0.0, 1)[0]
    assert abs(mode.amplitude_A) == pytest.approx(math.sqrt(2), rel=1e-9)


def test_degenerate_normalization(device):
    with pytest.raises(DegenerateNormalization):
        normalization_A(300.0, math.nan, -math.pi / 2, math.pi / 2, device)


def test_zero_mode_limit_at_half_flux(device):
    mode = build_mode_basis(device, 0.5, 1)[0]
    c_left = device.c0 * device.left_length + device.c_g1
    c_right = device.c0 * device.right_length + device.c_g2
    assert mode.wavenumber == 0.0
    assert mode.amplitude_B == pytest.approx(c_left / c_right, rel=1e-12)
    x = np.linspace(-device.half_length, device.half_length, 7)
    u = mode.envelope(x, "left")
    assert np.ptp(u[x < device.junction_position]) == 0.0
    # charge neutrality across the junction
    assert c_left * mode.left_end + c_right * mode.right_end == pytest.approx(0.0, abs=1e-25)


# -- envelope -----------------------------------------------------------------


def test_envelope_jump_equals_delta_u(basis0, device):
    xj = device.junction_position
    for mode in basis0:
        jump = mode.envelope(xj, "right") - mode.envelope(xj, "left")
        assert jump == pytest.approx(mode.delta_u, rel=1e-12)
        assert mode.delta_u > 0


def test_envelope_domain(basis0, device):
    mode = basis0[0]
    with pytest.raises(OutOfDomain):
        mode.envelope(device.half_length * 1.01)
    with pytest.raises(OutOfDomain):
        mode.envelope(device.junction_position)
    assert mode.envelope(-device.half_length) == pytest.approx(mode.left_end, rel=1e-12)
    assert mode.envelope(device.half_length) == pytest.approx(mode.right_end, rel=1e-12)


def test_endpoint_signs_at_zero_flux(basis0):
    # first mode: opposite end polarities; second mode: same polarity
    assert basis0[0].left_end < 0 < basis0[0].right_end
    assert basis0[1].left_end > 0 and basis0[1].right_end > 0


def test_antinode_moves_with_flux(device):
    x = np.linspace(-device.half_length, device.half_length, 2001)
    peaks = []
    for flux in (0.0, 0.5):
        mode = build_mode_basis(device, flux, 2, verify=False)[1]
        peaks.append(x[np.argmax(np.abs(mode.envelope(x, "left")))])
    assert abs(peaks[0] - peaks[1]) > 0.05 * device.length


# -- basis -------------------------------------------------------------------


@pytest.mark.parametrize("flux", [0.0, 0.25, 0.45, 0.5])
def test_orthonormality(device, flux):
    basis = build_mode_basis(device, flux, 3)
    c = device.total_capacitance
    off = basis.gram - np.diag(np.diag(basis.gram))
    assert np.max(np.abs(off)) / c < 1e-6
    np.testing.assert_allclose(np.diag(basis.gram), c, rtol=1e-8)
    omega = np.array([m.frequency for m in basis])
    diag = np.diag(basis.stiffness)
    nonzero = omega > 0
    np.testing.assert_allclose(diag[nonzero], c * omega[nonzero] ** 2, rtol=1e-6)
    off_s = basis.stiffness - np.diag(diag)
    assert np.max(np.abs(off_s)) < 1e-6 * c * omega.max() ** 2


def test_single_mode_basis(device):
    basis = build_mode_basis(device, 0.1, 1)
    assert isinstance(basis, ModeBasis) and len(basis) == 1


def test_orthogonality_violation_detected(device, basis0, monkeypatch):
    import hybridcoupler.modes as modes

    bad = dataclasses.replace(basis0[1], wavenumber=basis0[1].wavenumber * 1.01)
    monkeypatch.setattr(modes, "mode_solution", lambda p, f, k, i: bad if i == 1 else mode_solution(p, f, k, i))
    with pytest.raises(OrthogonalityViolation):
        modes.build_mode_basis(device, 0.0, 2)


def test_inductive_product_of_zero_mode_vanishes(device):
    mode = build_mode_basis(device, 0.5, 1)[0]
    assert inductive_inner_product(mode, mode) == 0.0
