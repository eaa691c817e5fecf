import logging

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from vstates.errors import AliasingError
from vstates.spectral import (
    PatchCoeffs,
    analyze_residual,
    default_grid_size,
    evaluate,
    evaluate_map,
    interpolate,
    nodes,
    project_symmetry,
    recover_coefficients,
    sine_series,
    spectral_derivative,
    symmetry_defect,
    synthesize,
)


def decaying(m, M, seed, scale=0.05):
    rng = np.random.default_rng(seed)
    return PatchCoeffs(m, scale * rng.standard_normal(M) * 0.6 ** np.arange(M))


coeff_strategy = st.builds(
    decaying,
    m=st.integers(2, 6),
    M=st.integers(1, 12),
    seed=st.integers(0, 2**31 - 1),
)


def test_zero_perturbation_is_identity():
    tr = synthesize(PatchCoeffs.zeros(3, 5), 64)
    assert np.allclose(tr.phi, np.exp(1j * tr.t), atol=1e-15)
    assert np.allclose(tr.dphi, 1.0, atol=1e-15)


def test_single_mode_values_at_zero():
    a = np.zeros(4)
    a[0] = 0.1
    tr = synthesize(PatchCoeffs(3, a), 256)
    assert tr.phi[0] == pytest.approx(1.1, abs=1e-15)
    assert tr.dphi[0] == pytest.approx(0.8, abs=1e-15)


def test_second_derivative_single_mode():
    # phi = w + c w^-2  =>  phi'' = 6 c w^-4
    c = 0.07
    tr = synthesize(PatchCoeffs(3, [c]), 64)
    assert np.allclose(tr.ddphi, 6 * c * tr.w ** -4, atol=1e-14)


@settings(max_examples=25, deadline=None)
@given(coeff_strategy)
def test_dphi_matches_centered_differences(coeffs):
    N = 512
    tr = synthesize(coeffs, N)
    h = 2 * np.pi / N
    fd = (np.roll(tr.phi, -1) - np.roll(tr.phi, 1)) / (2 * h)
    # centred difference error is (h^2/6) phi_ttt; bound phi_ttt by the spectrum
    freq = np.abs(coeffs.frequencies()).astype(float)
    bound = h**2 / 6 * (1 + np.sum(np.abs(coeffs.a) * freq**3)) * 1.01 + 1e-13
    assert np.max(np.abs(fd - tr.phi_t)) <= bound


def test_pointwise_evaluation_agrees_with_grid():
    co = decaying(4, 6, 1)
    tr = synthesize(co, 128)
    phi, phit = evaluate(co, tr.t)
    assert np.allclose(phi, tr.phi, atol=1e-14)
    assert np.allclose(phit, tr.phi_t, atol=1e-14)
    Phi, dPhi = evaluate_map(co, tr.w)
    assert np.allclose(Phi, tr.phi, atol=1e-14)
    assert np.allclose(dPhi, tr.dphi, atol=1e-14)


def test_aliasing_rejected():
    with pytest.raises(AliasingError):
        synthesize(PatchCoeffs.zeros(3, 10), 30)
    with pytest.raises(AliasingError):
        analyze_residual(np.zeros(60), 3, 10)


def test_nonfinite_coefficients_rejected():
    with pytest.raises(ValueError):
        synthesize(PatchCoeffs(3, [np.nan, 0.0]), 64)


def test_patchcoeffs_validation():
    with pytest.raises(ValueError):
        PatchCoeffs(1, [0.0])
    with pytest.raises(ValueError):
        PatchCoeffs(3, [])
    co = PatchCoeffs(3, [0.1, 0.2])
    assert co.M == 2
    assert list(co.frequencies()) == [-2, -5]
    with pytest.raises(ValueError):
        co.a[0] = 1.0


def test_default_grid_size():
    assert default_grid_size(3, 64) == 1024
    assert default_grid_size(2, 3) == 32


def test_pure_sine_mode():
    m, M, N = 3, 8, 128
    b = analyze_residual(np.sin(m * nodes(N)), m, M).b
    assert b == pytest.approx(np.r_[1.0, np.zeros(M - 1)], abs=1e-15)


def test_zero_residual():
    res = analyze_residual(np.zeros(128), 3, 8)
    assert not np.any(res.b)
    assert res.offband_fraction == 0.0


@settings(max_examples=30, deadline=None)
@given(st.integers(2, 6), st.integers(1, 20), st.integers(0, 2**31 - 1))
def test_sine_series_round_trip(m, M, seed):
    N = default_grid_size(m, M)
    b = np.random.default_rng(seed).standard_normal(M)
    out = analyze_residual(sine_series(b, m, N), m, M).b
    assert np.max(np.abs(out - b)) <= 1e-13 * max(1.0, np.max(np.abs(b)))


def test_offband_energy_is_reported(caplog):
    t = nodes(128)
    with caplog.at_level(logging.WARNING):
        res = analyze_residual(np.sin(3 * t) + np.cos(2 * t), 3, 8)
    assert res.offband_fraction == pytest.approx(0.5, rel=1e-12)
    assert "off the represented modes" in caplog.text


@settings(max_examples=25, deadline=None)
@given(coeff_strategy)
def test_round_trip_least_squares_recovery(coeffs):
    m, M = coeffs.m, coeffs.M
    N = 2 * m * (M + 1)
    tr = synthesize(coeffs, N)
    rec = recover_coefficients(tr.phi, m, M)
    scale = max(np.max(np.abs(coeffs.a)), 1e-300)
    assert np.max(np.abs(rec - coeffs.a)) <= 1e-12 * max(scale, 1.0)


@settings(max_examples=25, deadline=None)
@given(coeff_strategy)
def test_parseval(coeffs):
    N = default_grid_size(coeffs.m, coeffs.M)
    tr = synthesize(coeffs, N)
    f = tr.phi - tr.w
    lhs = float(np.sum(np.abs(f) ** 2))
    rhs = N * float(np.sum(coeffs.a**2))
    assert lhs == pytest.approx(rhs, rel=1e-12, abs=1e-300)


@settings(max_examples=25, deadline=None)
@given(coeff_strategy)
def test_grid_symmetries(coeffs):
    m = coeffs.m
    N = 2 * m * default_grid_size(m, coeffs.M)
    phi = synthesize(coeffs, N).phi
    rot = np.roll(phi, -N // m)
    assert np.max(np.abs(rot - np.exp(2j * np.pi / m) * phi)) <= 1e-12
    refl = phi[(-np.arange(N)) % N]
    assert np.max(np.abs(refl - np.conj(phi))) <= 1e-12


def test_projection_keeps_symmetric_input():
    co = decaying(3, 5, 7)
    phi = synthesize(co, 192).phi
    assert np.allclose(project_symmetry(phi, 3), phi, atol=1e-15)


def test_projection_removes_forbidden_frequency():
    t = nodes(96)
    assert np.max(np.abs(project_symmetry(np.exp(2j * t), 3))) <= 1e-15


def test_projection_requires_divisible_grid():
    with pytest.raises(AliasingError):
        project_symmetry(np.zeros(100, complex), 3)


@settings(max_examples=20, deadline=None)
@given(coeff_strategy, st.integers(0, 2**31 - 1))
def test_projection_idempotent_and_repairs(coeffs, seed):
    m = coeffs.m
    N = 2 * m * 32
    phi = synthesize(coeffs, N).phi
    noise = 1e-6 * np.random.default_rng(seed).standard_normal((2, N))
    v = phi + noise[0] + 1j * noise[1]
    p = project_symmetry(v, m)
    assert np.max(np.abs(project_symmetry(p, m) - p)) <= 1e-15
    assert symmetry_defect(p, m) <= 1e-15


def test_residual_projection_kind():
    m, N = 3, 96
    t = nodes(N)
    h = np.sin(3 * t) + 0.3 * np.sin(6 * t)
    assert np.allclose(project_symmetry(h, m, "residual"), h, atol=1e-15)
    assert np.max(np.abs(project_symmetry(np.cos(3 * t), m, "residual"))) <= 1e-15
    with pytest.raises(ValueError):
        project_symmetry(h, m, "other")


def test_interpolation_is_exact_for_band_limited_data():
    co = decaying(3, 6, 3)
    tr = synthesize(co, 128)
    t = np.array([0.1, np.pi / 3, 2.9])
    phi, _ = evaluate(co, t)
    assert np.allclose(interpolate(tr.phi, t), phi, atol=1e-14)
    # real data with a Nyquist component stay real
    x = np.cos(64 * nodes(128))
    assert np.max(np.abs(interpolate(x, [0.0, 0.01]).imag)) <= 1e-15


def test_spectral_derivative():
    t = nodes(64)
    assert np.allclose(spectral_derivative(np.exp(3j * t)), 3j * np.exp(3j * t), atol=1e-13)
