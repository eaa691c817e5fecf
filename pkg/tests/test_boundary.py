import numpy as np
import pytest
from scipy.integrate import quad

from vstates import boundary
from vstates.errors import (
    DegenerateDerivative,
    SingularSecant,
    UnresolvedWinding,
    WindingNonzero,
    ZeroModulus,
    ZeroOnContour,
)
from vstates.solver import critical_frequency
from vstates.spectral import GridTrace, PatchCoeffs, evaluate, interpolate, nodes, spectral_derivative, synthesize

from conftest import DESK_N, solve_near_start


def kirchhoff(c, M=8):
    return PatchCoeffs(2, np.r_[c, np.zeros(M - 1)])


def cauchy_by_quad(coeffs, g_of_t, t0):
    """(1/(2 pi i)) int (g(s) - g(t0)) phi_s / (phi(s) - phi(t0)) ds by adaptive quadrature."""
    phi0, _ = evaluate(coeffs, np.array([t0]))
    g0 = g_of_t(t0)

    def f(s):
        phi, phis = evaluate(coeffs, np.array([s]))
        return ((g_of_t(s) - g0) * phis[0] / (phi[0] - phi0[0])) / (2j * np.pi)

    re = quad(lambda s: f(s).real, t0, t0 + 2 * np.pi, epsabs=1e-14, epsrel=1e-13, limit=200)[0]
    im = quad(lambda s: f(s).imag, t0, t0 + 2 * np.pi, epsabs=1e-14, epsrel=1e-13, limit=200)[0]
    return re + 1j * im


def test_cauchy_of_conjugate_on_circle():
    tr = synthesize(PatchCoeffs.zeros(3, 4), 64)
    assert np.allclose(boundary.cauchy_phibar(tr), -1.0 / tr.w, atol=1e-14)
    assert np.allclose(boundary.cauchy_apply(tr, np.conj(tr.w)), -1.0 / tr.w, atol=1e-13)


def test_cauchy_of_constant_vanishes():
    tr = synthesize(PatchCoeffs(3, [0.05, 0.01]), 64)
    assert np.max(np.abs(boundary.cauchy_apply(tr, np.full(64, 2.5 - 1j)))) <= 1e-15


def test_cauchy_against_adaptive_quadrature():
    co = PatchCoeffs(3, [0.05])
    N = 256
    tr = synthesize(co, N)
    B = boundary.cauchy_phibar(tr)
    g = lambda s: np.conj(evaluate(co, np.array([s]))[0][0])
    for j in (0, 17, 101):
        ref = cauchy_by_quad(co, g, tr.t[j])
        assert abs(B[j] - ref) <= 1e-9 * abs(ref)


def test_cauchy_shape_check():
    tr = synthesize(PatchCoeffs.zeros(3, 4), 64)
    with pytest.raises(ValueError):
        boundary.cauchy_apply(tr, np.zeros(10))


def test_singular_secant_detected():
    t = nodes(16)
    phi = np.exp(1j * t)
    phi[5] = phi[4]
    tr = GridTrace(3, t, phi, np.ones(16, complex), np.zeros(16, complex))
    with pytest.raises(SingularSecant):
        boundary.cauchy_phibar(tr)


@pytest.mark.parametrize("m", [2, 3, 6])
@pytest.mark.parametrize("which", ["zero", "mid", "critical"])
def test_trivial_residual_vanishes(m, which):
    om = {"zero": 0.0, "mid": 0.2, "critical": critical_frequency(m)}[which]
    tr = synthesize(PatchCoeffs.zeros(m, 64), 1024)
    assert np.max(np.abs(boundary.residual(tr, om))) <= 1e-13


@pytest.mark.parametrize("c", [0.1, 0.3, 0.5])
def test_kirchhoff_residual(c):
    tr = synthesize(kirchhoff(c), 256)
    assert np.max(np.abs(boundary.residual(tr, (1 - c * c) / 4))) <= 1e-10


def test_kirchhoff_wrong_frequency_is_not_a_root():
    tr = synthesize(kirchhoff(0.3), 256)
    assert np.max(np.abs(boundary.residual(tr, 0.2))) > 1e-3


def test_residual_symmetry_for_any_symmetric_trace():
    rng = np.random.default_rng(4)
    m, N = 3, 384
    co = PatchCoeffs(m, 0.03 * rng.standard_normal(6) * 0.5 ** np.arange(6))
    r = boundary.residual(synthesize(co, N), 0.31)
    assert np.max(np.abs(r + r[(-np.arange(N)) % N])) <= 1e-12
    assert np.max(np.abs(np.roll(r, -N // m) - r)) <= 1e-12


def test_coefficient_A_trivial():
    for om in (0.0, 0.3):
        A = boundary.coefficient_A(synthesize(PatchCoeffs.zeros(3, 4), 64), om)
        assert np.allclose(A, om - 0.5, atol=1e-15)


def test_A_is_twice_gradient(mid_m3):
    tr = synthesize(mid_m3.coeffs, DESK_N)
    A = boundary.coefficient_A(tr, mid_m3.omega)
    dz = boundary.dzPsi_boundary(tr, mid_m3.omega)
    assert np.max(np.abs(np.abs(A) - 2 * np.abs(dz)) / np.abs(A)) <= 1e-10
    assert np.max(np.abs(np.imag(A * tr.dphi))) <= 1e-10


@pytest.mark.parametrize("m", [2, 3, 5])
def test_stream_derivatives_of_disk(m):
    om = critical_frequency(m)
    tr = synthesize(PatchCoeffs.zeros(m, 8), 128)
    d = boundary.stream_derivs_boundary(tr, om)
    w = tr.w
    assert np.allclose(d.dzPsi, 1 / (4 * w) - (m - 1) / (4 * m) * np.conj(w), atol=1e-14)
    assert np.allclose(d.dz2Psi, -1 / (4 * w**2), atol=1e-14)
    assert np.allclose(d.dz3Psi, 1 / (2 * w**3), atol=1e-13)
    assert np.allclose(d.r_dr, 1 / (2 * m), atol=1e-14)
    assert np.allclose(d.r_dr2, -(m - 1) / m, atol=1e-14)
    assert np.max(np.abs(d.d_theta)) <= 1e-14
    assert np.max(np.abs(d.d_theta2)) <= 1e-13


def test_second_and_third_derivatives_by_boundary_differentiation(mid_m3):
    # the exterior d_z psi is holomorphic, so d/dt of its boundary values is d_z^2 psi * phi_t
    tr = synthesize(mid_m3.coeffs, DESK_N)
    d = boundary.stream_derivs_boundary(tr, mid_m3.omega)
    dzpsi = d.dzPsi + 0.5 * mid_m3.omega * np.conj(tr.phi)
    dz2 = spectral_derivative(dzpsi) / tr.phi_t
    dz3 = spectral_derivative(dz2) / tr.phi_t
    assert np.max(np.abs(d.dz2Psi - dz2)) <= 1e-9 * np.max(np.abs(dz2))
    assert np.max(np.abs(d.dz3Psi - dz3)) <= 1e-8 * np.max(np.abs(dz3))


def test_speed_identity_and_kinematics(mid_m3):
    tr = synthesize(mid_m3.coeffs, DESK_N)
    d = boundary.stream_derivs_boundary(tr, mid_m3.omega)
    lhs = 4 * np.abs(d.dzPsi) ** 2
    rhs = d.psi_r**2 + d.psi_theta**2 / d.rho**2
    assert np.max(np.abs(lhs - rhs) / lhs) <= 1e-10
    rho, dtheta, _ = boundary.polar_quantities(tr)
    drho = -rho * np.imag(tr.w * tr.dphi / tr.phi)
    kin = d.psi_r * drho + d.psi_theta * dtheta
    assert np.max(np.abs(kin)) <= 1e-9


def test_angular_derivative_vanishes_on_symmetry_rays(mid_m3):
    tr = synthesize(mid_m3.coeffs, DESK_N)
    d = boundary.stream_derivs_boundary(tr, mid_m3.omega)
    assert abs(d.d_theta[0]) <= 1e-12
    assert abs(interpolate(d.d_theta, np.pi / 3)[0]) <= 1e-12


def test_angular_derivative_expansion_is_second_order():
    errs = []
    amps = []
    for gap in (4e-4, 1e-4):
        co, om, _ = solve_near_start(3, gap)
        tr = synthesize(co, DESK_N)
        d = boundary.stream_derivs_boundary(tr, om)
        s = co.a[0]
        amps.append(s)
        errs.append(np.max(np.abs(d.d_theta - 0.5 * s * np.imag(tr.w**3))))
    order = np.log(errs[0] / errs[1]) / np.log(amps[0] / amps[1])
    assert order >= 1.8


def test_degenerate_derivative_detected():
    tr = synthesize(PatchCoeffs(3, [0.5]), 64)   # phi' = 1 - w^-3 vanishes at w = 1
    with pytest.raises(DegenerateDerivative):
        boundary.stream_derivs_boundary(tr, 0.3)


def test_polar_quantities_trivial():
    rho, dth, gam = boundary.polar_quantities(synthesize(PatchCoeffs.zeros(3, 4), 64))
    assert np.allclose(rho, 1) and np.allclose(dth, 1) and np.allclose(gam, 0)


def test_tangent_angle_small_mode():
    c = 1e-3
    tr = synthesize(PatchCoeffs(3, [c]), 256)
    _, _, gam = boundary.polar_quantities(tr)
    u = tr.w**-3
    exact = np.angle((1 - 2 * c * u) / (1 + c * u))
    assert np.max(np.abs(gam - exact)) <= 1e-15
    assert np.max(np.abs(gam - 3 * c * np.sin(3 * tr.t))) <= 1e-5


def test_radius_derivative_matches_finite_differences(mid_m3):
    N = DESK_N
    tr = synthesize(mid_m3.coeffs, N)
    rho, _, _ = boundary.polar_quantities(tr)
    drho = -rho * np.imag(tr.w * tr.dphi / tr.phi)
    fd = np.real(spectral_derivative(rho.astype(complex)))
    assert np.max(np.abs(drho - fd)) <= 1e-10


def test_zero_modulus_detected():
    t = nodes(16)
    phi = np.exp(1j * t)
    phi[3] = 0.0
    tr = GridTrace(3, t, phi, np.ones(16, complex), np.zeros(16, complex))
    with pytest.raises(ZeroModulus):
        boundary.polar_quantities(tr)


def test_winding_numbers():
    t = nodes(64)
    assert boundary.winding_number(np.ones(64)) == 0
    assert boundary.winding_number(np.exp(3j * t)) == 3
    assert boundary.winding_number(np.exp(-2j * t) * (2 + np.cos(t))) == -2
    with pytest.raises(ZeroOnContour):
        boundary.winding_number(np.r_[np.ones(10), 0.0])
    with pytest.raises(UnresolvedWinding):
        boundary.winding_number(np.exp(20j * t))


def test_winding_of_A_on_branch(desk_branch):
    for rec in desk_branch.records:
        tr = synthesize(rec.coeffs, DESK_N)
        assert boundary.winding_number(boundary.coefficient_A(tr, rec.omega)) == 0


def test_health_metrics_trivial():
    om = critical_frequency(3)
    hm = boundary.health_metrics(synthesize(PatchCoeffs.zeros(3, 8), 128), None, om)
    assert hm.minPsiR == pytest.approx(1 / 6, abs=1e-14)
    assert hm.angleMargin == pytest.approx(np.pi / 2, abs=1e-14)
    assert hm.minDphi == pytest.approx(1, abs=1e-14)
    assert hm.minPhi == pytest.approx(1, abs=1e-14)
    assert hm.maxPhi == pytest.approx(1, abs=1e-14)
    assert hm.minA == pytest.approx(0.5 - om, abs=1e-14)
    assert hm.admissible()


def test_health_metrics_along_branch(desk_branch):
    for rec in desk_branch.records:
        hm = rec.metrics
        assert hm.admissible()
        assert hm.maxPhi <= 4 + 1e-9
        assert np.isfinite(list(hm.as_dict().values())).all()


def test_cauchy_sum_spectral_convergence():
    # a fixed analytic trace near the cusp limit, so the error is visible at small N
    co = PatchCoeffs(3, [0.4])
    ref = boundary.residual(synthesize(co, 4096), 0.3)
    errs = [np.max(np.abs(boundary.residual(synthesize(co, N), 0.3) - ref[:: 4096 // N]))
            for N in (16, 32, 64, 128)]
    for e0, e1 in zip(errs, errs[1:]):
        assert e0 >= 10 * e1


def test_rh_reconstruction_trivial():
    tr = synthesize(PatchCoeffs.zeros(3, 8), 128)
    assert np.allclose(boundary.rh_reconstruct(tr, 0.3), 1.0, atol=1e-15)


def test_rh_reconstruction_kirchhoff():
    c = 0.3
    tr = synthesize(kirchhoff(c), 256)
    rec = boundary.rh_reconstruct(tr, (1 - c * c) / 4)
    assert np.max(np.abs(rec - tr.dphi)) / np.max(np.abs(tr.dphi)) <= 1e-6


def test_rh_reconstruction_mid_branch(mid_m3):
    tr = synthesize(mid_m3.coeffs, DESK_N)
    rec = boundary.rh_reconstruct(tr, mid_m3.omega)
    assert np.max(np.abs(rec - tr.dphi)) / np.max(np.abs(tr.dphi)) <= 1e-6


def test_rh_rejects_winding():
    # a Cauchy term chosen so that A = w^2
    tr = synthesize(PatchCoeffs.zeros(3, 4), 64)
    with pytest.raises(WindingNonzero):
        boundary.rh_reconstruct(tr, 0.3, B=-2 * 0.3 * np.conj(tr.phi) + 2 * tr.w)
