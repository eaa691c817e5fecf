"""Boundary integral operators on a sampled conformal trace.

Conventions
-----------
Psi is the relative stream function with Laplacian 1_D - 2 Omega, zero on
the patch boundary.  On the boundary

    (d_z Psi) o phi = -(Omega/2) conj(phi) - (1/4) C(phi) conj(phi),

where C(phi) is the Cauchy integral operator of the curve phi(T).  The
Riemann-Hilbert coefficient is A = (Omega conj(phi) + C(phi)conj(phi)/2) w,
so |A| = 2 |d_z Psi o phi| and the steady-rotation equation is Im{A phi'} = 0.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import _kernels
from .errors import (
    DegenerateDerivative,
    SingularSecant,
    UnresolvedWinding,
    WindingNonzero,
    ZeroModulus,
    ZeroOnContour,
)
from .spectral import ComplexArray, FloatArray, GridTrace, PatchCoeffs, spectral_derivative

SECANT_TOL = 1e-14
DERIVATIVE_TOL = 1e-12
MODULUS_TOL = 1e-12


@dataclass(frozen=True)
class BoundaryDerivs:
    """Derivatives of the exterior relative stream function on the boundary.

    Polar partials are taken at z = phi(w) = rho e^{i theta}.
    """

    dzPsi: ComplexArray
    dz2Psi: ComplexArray
    dz3Psi: ComplexArray
    d_theta: FloatArray          # Psi_theta
    r_dr: FloatArray             # r Psi_r
    d_theta_r_dr: FloatArray     # d_theta (r d_r Psi)
    r_dr2: FloatArray            # (r d_r)^2 Psi
    d_theta2: FloatArray         # Psi_theta_theta
    d_theta2_r_dr: FloatArray    # d_theta^2 (r d_r Psi)
    rho: FloatArray

    @property
    def psi_r(self) -> FloatArray:
        return self.r_dr / self.rho

    @property
    def psi_theta(self) -> FloatArray:
        return self.d_theta


@dataclass(frozen=True)
class HealthMetrics:
    """Quantitative distance from the boundary of the admissible set."""

    minA: float
    sizeInv: float
    angleMargin: float
    minDphi: float
    minPhi: float
    maxPhi: float
    minPsiR: float

    def as_dict(self) -> dict:
        return {
            "minA": self.minA,
            "sizeInv": self.sizeInv,
            "angleMargin": self.angleMargin,
            "minDphi": self.minDphi,
            "minPhi": self.minPhi,
            "maxPhi": self.maxPhi,
            "minPsiR": self.minPsiR,
        }

    def admissible(self) -> bool:
        return min(self.minA, self.sizeInv, self.angleMargin, self.minDphi, self.minPhi) > 0


def _cauchy(phi, phit, g, gt) -> ComplexArray:
    out, secant = _kernels.cauchy_sum(
        np.ascontiguousarray(phi, dtype=np.complex128),
        np.ascontiguousarray(phit, dtype=np.complex128),
        np.ascontiguousarray(g, dtype=np.complex128),
        np.ascontiguousarray(gt, dtype=np.complex128),
    )
    if secant < SECANT_TOL:
        raise SingularSecant(f"boundary nodes coincide (min secant {secant:.3e})")
    return out


def cauchy_apply(trace: GridTrace, g, g_t=None) -> ComplexArray:
    """Trapezoid approximation of C(phi) g at every node.

    The diagonal term of the sum is the limit of the integrand, which in
    the t variable equals dg/dt; it is taken from ``g_t`` if given and
    otherwise computed spectrally.
    """
    g = np.asarray(g, dtype=np.complex128)
    if g.shape != trace.phi.shape:
        raise ValueError("g must be sampled on the trace grid")
    if g_t is None:
        g_t = spectral_derivative(g)
    return _cauchy(trace.phi, trace.phi_t, g, g_t)


def cauchy_phibar(trace: GridTrace) -> ComplexArray:
    """C(phi) conj(phi); the diagonal limit is conj(i w phi')."""
    phit = trace.phi_t
    return _cauchy(trace.phi, phit, np.conj(trace.phi), np.conj(phit))


def coefficient_A(trace: GridTrace, omega: float, B=None) -> ComplexArray:
    if B is None:
        B = cauchy_phibar(trace)
    return (omega * np.conj(trace.phi) + 0.5 * B) * trace.w


def residual(trace: GridTrace, omega: float, B=None) -> FloatArray:
    """Im{(Omega conj(phi) + C(phi)conj(phi)/2) w phi'} at every node."""
    return np.imag(coefficient_A(trace, omega, B) * trace.dphi)


def _kernels_F2_F3(trace: GridTrace):
    w, d1, d2 = trace.w, trace.dphi, trace.ddphi
    cd1, cd2 = np.conj(d1), np.conj(d2)
    F2 = cd1 / (w**2 * d1)
    F3 = -2.0 * cd1 / (w**3 * d1**2) - cd2 / (w**4 * d1**2) - cd1 * d2 / (w**2 * d1**3)
    return F2, F3


def dzPsi_boundary(trace: GridTrace, omega: float, B=None) -> ComplexArray:
    if B is None:
        B = cauchy_phibar(trace)
    return -0.5 * omega * np.conj(trace.phi) - 0.25 * B


def stream_derivs_boundary(trace: GridTrace, omega: float, B=None) -> BoundaryDerivs:
    if np.min(np.abs(trace.dphi)) < DERIVATIVE_TOL:
        raise DegenerateDerivative("phi' vanishes on the grid")
    dz1 = dzPsi_boundary(trace, omega, B)
    F2, F3 = _kernels_F2_F3(trace)
    dz2 = 0.25 * cauchy_apply(trace, F2)
    dz3 = 0.25 * cauchy_apply(trace, F3)

    z = trace.phi
    P1 = z * dz1
    P2 = z**2 * dz2
    P3 = z**3 * dz3
    om_r2 = omega * np.abs(z) ** 2
    return BoundaryDerivs(
        dzPsi=dz1,
        dz2Psi=dz2,
        dz3Psi=dz3,
        d_theta=-2.0 * P1.imag,
        r_dr=2.0 * P1.real,
        d_theta_r_dr=-2.0 * (P1 + P2).imag,
        r_dr2=2.0 * (P1 + P2).real - om_r2,
        d_theta2=-2.0 * (P1 + P2).real - om_r2,
        d_theta2_r_dr=-2.0 * (P1 + 3.0 * P2 + P3).real - om_r2,
        rho=np.abs(z),
    )


def polar_quantities(trace: GridTrace) -> tuple[FloatArray, FloatArray, FloatArray]:
    """rho = |phi|, theta' = Re(w phi'/phi) and gamma = arg(w phi'/phi)."""
    rho = np.abs(trace.phi)
    if np.min(rho) <= MODULUS_TOL:
        raise ZeroModulus("phi vanishes on the grid")
    q = trace.w * trace.dphi / trace.phi
    gamma = np.unwrap(np.angle(q))
    return rho, q.real, gamma


def winding_number(values) -> int:
    v = np.asarray(values, dtype=np.complex128)
    scale = np.max(np.abs(v))
    if scale == 0 or np.min(np.abs(v)) <= 1e-14 * max(scale, 1.0):
        raise ZeroOnContour("function vanishes on the contour")
    ang = np.angle(v)
    jumps = np.diff(np.append(ang, ang[0]))
    jumps = (jumps + np.pi) % (2 * np.pi) - np.pi
    if np.max(np.abs(jumps)) > np.pi / 2:
        raise UnresolvedWinding("argument jumps exceed pi/2 between nodes; refine the grid")
    return int(np.rint(np.sum(jumps) / (2 * np.pi)))


def _holder_proxy(trace: GridTrace, alpha: float = 0.5) -> float:
    """max |phi'(t+h) - phi'(t)| / h^alpha over dyadic node separations h."""
    d = trace.dphi
    N = trace.N
    best = 0.0
    s = 1
    while s <= N // 2:
        h = 2 * np.pi * s / N
        diff = np.abs(np.roll(d, -s) - d)
        best = max(best, float(np.max(diff)) / h**alpha)
        s *= 2
    return best


def health_metrics(trace: GridTrace, coeffs: PatchCoeffs | None, omega: float, B=None) -> HealthMetrics:
    if B is None:
        B = cauchy_phibar(trace)
    A = coefficient_A(trace, omega, B)
    rho, _, gamma = polar_quantities(trace)
    norm = float(np.max(np.abs(trace.phi)) + np.max(np.abs(trace.dphi)) + _holder_proxy(trace))
    dz = dzPsi_boundary(trace, omega, B)
    psi_r = 2.0 * np.real(trace.phi * dz) / rho
    return HealthMetrics(
        minA=float(np.min(np.abs(A))),
        sizeInv=1.0 / (1.0 + abs(omega) + norm),
        angleMargin=float(np.pi / 2 - np.max(np.abs(gamma))),
        minDphi=float(np.min(np.abs(trace.dphi))),
        minPhi=float(np.min(rho)),
        maxPhi=float(np.max(rho)),
        minPsiR=float(np.min(psi_r)),
    )


def rh_reconstruct(trace: GridTrace, omega: float, B=None) -> ComplexArray:
    """Rebuild phi' from the argument of A alone (fundamental RH solution)."""
    A = coefficient_A(trace, omega, B)
    if winding_number(A) != 0:
        raise WindingNonzero("coefficient A has nonzero winding number")
    # winding(A) = 0 makes theta periodic; the branch is pinned by theta(1) = 0
    theta = np.unwrap(np.angle(A / np.conj(A)))
    theta = theta - theta[0]
    w = trace.w
    g = theta / w
    theta_t = spectral_derivative(theta.astype(np.complex128)).real
    g_t = (theta_t - 1j * theta) / w
    # identity curve: phi = w, d/dt phi = i w
    Cg = _cauchy(w, 1j * w, g, g_t)
    return np.exp(1j * w * Cg)
