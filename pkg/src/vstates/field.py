"""Relative stream function Psi off the boundary: values, gradients,
critical points and level curves.

Everywhere in the plane

    d_z psi(z) = -(1/(8 pi i)) oint (conj(zeta) - conj(z)) / (zeta - z) d zeta,

because the integrand stays bounded as zeta -> z; the same contour formula
therefore serves inside and outside the patch.  Away from the boundary it is
summed with the trapezoid rule.  Within a few node spacings of the boundary
that sum loses accuracy, and the evaluator switches to analytic
continuations of the boundary data: a Laurent series in the exterior
conformal variable outside, a barycentric Cauchy formula inside.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field as dc_field

import numpy as np
from scipy.special import roots_legendre

from . import _kernels, boundary
from .errors import (
    MisclassifiedDegenerate,
    NewtonDiverged,
    NoBracket,
    QuadratureStall,
    TooCloseToBoundary,
)
from .spectral import GridTrace, PatchCoeffs, evaluate, evaluate_map, synthesize

DEFAULT_BAND = 3.0
SWITCH_BAND = 8.0
CHUNK = 2048


def _contour_dzpsi(trace: GridTrace, z) -> np.ndarray:
    z = np.ascontiguousarray(np.atleast_1d(z), dtype=np.complex128)
    s = _kernels.contour_points(
        np.ascontiguousarray(trace.phi), np.ascontiguousarray(trace.phi_t), z)
    return 0.25j * s


def _nearest(trace: GridTrace, z):
    """Distance to the nearest node and that node's spacing, per point."""
    z = np.atleast_1d(z)
    d = np.abs(z[:, None] - trace.phi[None, :])
    k = np.argmin(d, axis=1)
    spacing = np.abs(trace.phi_t[k]) * 2 * np.pi / trace.N
    return d[np.arange(z.size), k], spacing, k


def dzPsi_point(z: complex, trace: GridTrace, omega: float, band: float = DEFAULT_BAND) -> complex:
    """d_z Psi at a point by the trapezoid contour sum.

    Raises TooCloseToBoundary within ``band`` local node spacings of the boundary.
    """
    dist, spacing, _ = _nearest(trace, z)
    if dist[0] < band * spacing[0]:
        raise TooCloseToBoundary(f"point {z} lies {dist[0]:.2e} from the boundary")
    return complex(_contour_dzpsi(trace, z)[0] - 0.5 * omega * np.conj(z))


class CriticalKind(str, enum.Enum):
    SADDLE = "saddle"
    CENTER = "center"
    DEGENERATE = "degenerate"


@dataclass(frozen=True)
class CriticalPoint:
    r: float
    theta: float
    kind: CriticalKind
    hessian_det: float
    distance_to_boundary: float

    @property
    def z(self) -> complex:
        return self.r * np.exp(1j * self.theta)

    def as_dict(self) -> dict:
        return {
            "r": self.r,
            "theta": self.theta,
            "kind": self.kind.value,
            "hessian_det": self.hessian_det,
            "distance_to_boundary": self.distance_to_boundary,
        }


class StreamField:
    """Psi and its derivatives for one solution (coefficients, Omega)."""

    def __init__(self, coeffs: PatchCoeffs, omega: float, N: int, switch_band: float = SWITCH_BAND):
        self.coeffs = coeffs
        self.omega = float(omega)
        self.m = coeffs.m
        self.trace = trace = synthesize(coeffs, N)
        self.switch_band = switch_band
        B = boundary.cauchy_phibar(trace)
        self.boundary_dzpsi = -0.25 * B            # d_z psi on the boundary
        hb = self.boundary_dzpsi
        n = trace.N
        c = np.fft.fft(hb) / n
        k = np.fft.fftfreq(n, 1.0 / n).astype(int)
        keep = k < 0
        self._laurent_c = c[keep]
        self._laurent_k = k[keep]
        # holomorphic part inside D
        self._interior_g = hb - 0.25 * np.conj(trace.phi)
        theta = np.unwrap(np.angle(trace.phi))
        self._node_theta = theta - theta[0]
        self.max_radius = float(np.max(np.abs(trace.phi)))

    # ------------------------------------------------------------------ geometry
    def boundary_point(self, theta):
        """Parameter t and radius R with arg phi(e^{it}) = theta (polar graph)."""
        theta = np.atleast_1d(np.asarray(theta, dtype=np.float64))
        tn = self.trace.t
        vt = self._node_theta
        base = np.floor(theta / (2 * np.pi))
        th = theta - 2 * np.pi * base
        j = np.clip(np.searchsorted(vt, th) - 1, 0, tn.size - 1)
        j1 = (j + 1) % tn.size
        v0, v1 = vt[j], np.where(j1 == 0, 2 * np.pi, vt[j1])
        t0 = tn[j]
        h = 2 * np.pi / tn.size
        t = t0 + h * (th - v0) / np.where(v1 > v0, v1 - v0, 1.0)
        for _ in range(30):
            phi, phit = evaluate(self.coeffs, t)
            ang = np.angle(phi * np.exp(-1j * th))
            dth = np.imag(phit / phi)  # d/dt arg phi
            step = ang / dth
            t = t - step
            if np.max(np.abs(step)) < 1e-15:
                break
        phi, _ = evaluate(self.coeffs, t)
        return t, np.abs(phi)

    def boundary_radius(self, theta):
        return self.boundary_point(theta)[1]

    def inside(self, z) -> np.ndarray:
        z = np.atleast_1d(np.asarray(z, dtype=np.complex128))
        return np.abs(z) < self.boundary_radius(np.angle(z))

    # ----------------------------------------------------------- derivatives
    def _inverse_map(self, z, k_near):
        """Solve Phi(w) = z with |w| > 1, seeded from the nearest node."""
        tr = self.trace
        wk = tr.w[k_near]
        d = z - tr.phi[k_near]
        w = wk + d / tr.dphi[k_near]
        w = np.where(np.abs(w) < 1.0, w / np.abs(w) * (1 + 1e-12), w)
        for _ in range(60):
            Phi, dPhi = evaluate_map(self.coeffs, w)
            step = (Phi - z) / dPhi
            w = w - step
            w = np.where(np.abs(w) < 1.0, w / np.abs(w), w)
            if np.max(np.abs(step)) < 1e-15:
                break
        return w

    def _laurent(self, w, derivative=False):
        wk = np.power.outer(w, self._laurent_k.astype(float))
        val = wk @ self._laurent_c
        if not derivative:
            return val
        dval = (wk / w[:, None]) @ (self._laurent_k * self._laurent_c)
        return val, dval

    def _interior_bary(self, z):
        tr = self.trace
        q = tr.phi_t[None, :] / (tr.phi[None, :] - z[:, None])
        return (q @ self._interior_g) / q.sum(axis=1)

    def dzpsi_free(self, z) -> np.ndarray:
        """d_z psi (no rotation term), vectorised over points."""
        z = np.atleast_1d(np.asarray(z, dtype=np.complex128))
        if z.size > CHUNK:
            flat = z.ravel()
            parts = [self._dzpsi_free(flat[i:i + CHUNK]) for i in range(0, flat.size, CHUNK)]
            return np.concatenate(parts).reshape(z.shape)
        return self._dzpsi_free(z)

    def _dzpsi_free(self, z):
        out = np.empty(z.shape, dtype=np.complex128)
        dist, spacing, k = _nearest(self.trace, z)
        near = dist < self.switch_band * spacing
        far = ~near
        if np.any(far):
            out[far] = _contour_dzpsi(self.trace, z[far])
        if np.any(near):
            zn = z[near]
            ins = self.inside(zn)
            idx = np.flatnonzero(near)
            on = dist[near] == 0
            vals = np.empty(zn.shape, dtype=np.complex128)
            if np.any(on):
                vals[on] = self.boundary_dzpsi[k[near][on]]
            ext = ~ins & ~on
            if np.any(ext):
                w = self._inverse_map(zn[ext], k[near][ext])
                vals[ext] = self._laurent(w)
            inn = ins & ~on
            if np.any(inn):
                vals[inn] = self._interior_bary(zn[inn]) + 0.25 * np.conj(zn[inn])
            out[idx] = vals
        return out

    def dzpsi(self, z) -> np.ndarray:
        """d_z Psi = d_z psi - (Omega/2) conj(z)."""
        z = np.atleast_1d(np.asarray(z, dtype=np.complex128))
        return self.dzpsi_free(z) - 0.5 * self.omega * np.conj(z)

    def dz2psi(self, z, rel_step: float = 1e-5) -> np.ndarray:
        """d_z^2 Psi by central differences of d_z Psi."""
        z = np.atleast_1d(np.asarray(z, dtype=np.complex128))
        h = rel_step * np.maximum(np.abs(z), 1.0)
        dx = (self.dzpsi(z + h) - self.dzpsi(z - h)) / (2 * h)
        dy = (self.dzpsi(z + 1j * h) - self.dzpsi(z - 1j * h)) / (2 * h)
        return 0.5 * (dx - 1j * dy)

    def grad_polar(self, z):
        """(Psi_r, Psi_theta) at points z."""
        z = np.atleast_1d(np.asarray(z, dtype=np.complex128))
        P = z * self.dzpsi(z)
        return 2.0 * P.real / np.abs(z), -2.0 * P.imag

    def psi_r(self, r, theta):
        r = np.asarray(r, dtype=np.float64)
        return self.grad_polar(r * np.exp(1j * np.asarray(theta)))[0]

    def laplacian_rhs(self, z) -> np.ndarray:
        return np.where(self.inside(z), 1.0, 0.0) - 2.0 * self.omega

    def hessian_det(self, z) -> np.ndarray:
        """det of the Cartesian Hessian: 4 (Psi_{z zbar}^2 - |Psi_zz|^2)."""
        z = np.atleast_1d(np.asarray(z, dtype=np.complex128))
        pzz = self.dz2psi(z)
        pzzb = 0.25 * self.laplacian_rhs(z)
        return 4.0 * (pzzb**2 - np.abs(pzz) ** 2)

    # ------------------------------------------------------------- values
    def psi_point(self, z, tol: float = 1e-9, n0: int = 24, max_doublings: int = 3) -> float:
        """Psi(z) by Gauss-Legendre integration of Psi_r along the ray from the boundary."""
        z = complex(z)
        r, th = abs(z), float(np.angle(z))
        R = float(self.boundary_radius(th)[0])
        if r == R:
            return 0.0
        prev = self._ray_integral(R, r, th, n0)
        n = n0
        for _ in range(max_doublings):
            n *= 2
            cur = self._ray_integral(R, r, th, n)
            if abs(cur - prev) <= tol:
                return cur
            prev = cur
        raise QuadratureStall(f"radial quadrature did not settle at z={z}")

    def _ray_integral(self, a, b, theta, n):
        x, wts = roots_legendre(n)
        rr = 0.5 * (b - a) * x + 0.5 * (a + b)
        return float(0.5 * (b - a) * np.dot(wts, self.psi_r(rr, theta)))

    def sample_rays(self, radii, thetas, n_gauss: int = 24) -> np.ndarray:
        """Psi on a tensor grid (radii x thetas) by cumulative ray quadrature."""
        radii = np.asarray(radii, dtype=np.float64)
        thetas = np.asarray(thetas, dtype=np.float64)
        x, wts = roots_legendre(n_gauss)
        R = self.boundary_radius(thetas)
        out = np.empty((radii.size, thetas.size))
        for j, (th, Rj) in enumerate(zip(thetas, R)):
            knots = np.concatenate([[Rj], radii])
            order = np.argsort(knots, kind="stable")
            ks = knots[order]
            a, b = ks[:-1], ks[1:]
            pts = 0.5 * (b - a)[:, None] * x[None, :] + 0.5 * (a + b)[:, None]
            vals = self.psi_r(pts.ravel(), th).reshape(pts.shape)
            seg = 0.5 * (b - a) * (vals @ wts)
            cum = np.concatenate([[0.0], np.cumsum(seg)])
            pos0 = np.flatnonzero(order == 0)[0]
            cum = cum - cum[pos0]
            vals_sorted = np.empty_like(cum)
            vals_sorted[order] = cum
            out[:, j] = vals_sorted[1:]
        return out

    # ----------------------------------------------------------- structure
    def rc(self, theta: float, r_max: float | None = None) -> float:
        """Radius of the zero of Psi_r along the ray at angle theta."""
        R = float(self.boundary_radius(theta)[0])
        r_max = r_max or 2.5 * self.max_radius
        lo = R
        for attempt in range(2):
            hi = r_max
            f_lo = float(self.psi_r(np.array([lo * (1 + 1e-12)]), theta)[0])
            f_hi = float(self.psi_r(np.array([hi]), theta)[0])
            if f_lo > 0 > f_hi:
                break
            if attempt == 0:
                r_max *= 2
                continue
            raise NoBracket(f"Psi_r does not change sign on [{R:.6f}, {hi:.6f}] at theta={theta}")
        for _ in range(40):
            mid = 0.5 * (lo + hi)
            if float(self.psi_r(np.array([mid]), theta)[0]) > 0:
                lo = mid
            else:
                hi = mid
            if hi - lo < 1e-6 * hi:
                break
        r = 0.5 * (lo + hi)
        for _ in range(20):
            h = 1e-6 * r
            f = float(self.psi_r(np.array([r]), theta)[0])
            fp = float((self.psi_r(np.array([r + h]), theta) - self.psi_r(np.array([r - h]), theta))[0] / (2 * h))
            step = f / fp
            r_new = min(max(r - step, lo), hi)
            if abs(r_new - r) < 1e-14 * r:
                r = r_new
                break
            r = r_new
        return r

    def rc_curve(self, thetas) -> np.ndarray:
        return np.array([self.rc(float(th)) for th in np.atleast_1d(thetas)])


def find_critical_points(fld: StreamField, strict: bool = True, det_tol: float = 1e-10) -> list[CriticalPoint]:
    """Equilibria on the symmetry rays theta = 0 (R) and theta = pi/m (L)."""
    pts = []
    for theta in (0.0, np.pi / fld.m):
        r = fld.rc(theta)
        z = r * np.exp(1j * theta)
        # refine on the full gradient (Psi_theta vanishes on the rays by symmetry)
        for _ in range(10):
            g = fld.dzpsi(np.array([z]))[0]
            if abs(g) < 1e-14:
                break
            pzz = fld.dz2psi(np.array([z]))[0]
            pzzb = -0.5 * fld.omega
            # g + pzz dz + pzzb conj(dz) = 0, as a real 2x2 system
            Amat = np.array([[pzz.real + pzzb, -pzz.imag],
                             [pzz.imag, pzz.real - pzzb]])
            try:
                dxy = np.linalg.solve(Amat, [-g.real, -g.imag])
            except np.linalg.LinAlgError:
                break
            z_new = z + complex(dxy[0], dxy[1])
            if not np.isfinite(z_new) or abs(z_new - z) > 0.1 * abs(z):
                raise NewtonDiverged(f"critical point iteration left the neighbourhood of {z}")
            z = z_new
            if abs(dxy[0]) + abs(dxy[1]) < 1e-14 * abs(z):
                break
        if fld.inside(np.array([z]))[0]:
            raise NewtonDiverged(f"critical point {z} fell inside the patch")
        det = float(fld.hessian_det(np.array([z]))[0])
        if abs(det) < det_tol:
            kind = CriticalKind.DEGENERATE
        else:
            kind = CriticalKind.SADDLE if det < 0 else CriticalKind.CENTER
        R = float(fld.boundary_radius(np.angle(z))[0])
        pts.append(CriticalPoint(float(abs(z)), float(np.angle(z)), kind, det, float(abs(z) - R)))
    if strict and any(p.kind is CriticalKind.DEGENERATE for p in pts):
        raise MisclassifiedDegenerate("Hessian determinant below tolerance", pts)
    return pts


@dataclass
class FieldGrid:
    """Psi and its polar gradient on a sector grid 0 <= theta <= pi/m."""

    m: int
    omega: float
    r: np.ndarray
    theta: np.ndarray
    psi: np.ndarray
    psi_r: np.ndarray
    psi_theta: np.ndarray
    inside: np.ndarray
    boundary_R: np.ndarray = dc_field(repr=False)

    @property
    def shape(self):
        return self.psi.shape

    def xy(self):
        rr, tt = np.meshgrid(self.r, self.theta, indexing="ij")
        return rr * np.cos(tt), rr * np.sin(tt)


def sample_field(fld: StreamField, n_r: int = 80, n_theta: int = 40, r_min: float = 0.05,
                 r_max: float | None = None, theta_max: float | None = None) -> FieldGrid:
    r_max = r_max or 2.5 * fld.max_radius
    theta_max = np.pi / fld.m if theta_max is None else theta_max
    r = np.linspace(r_min, r_max, n_r)
    th = np.linspace(0.0, theta_max, n_theta)
    psi = fld.sample_rays(r, th)
    rr, tt = np.meshgrid(r, th, indexing="ij")
    z = (rr * np.exp(1j * tt)).ravel()
    pr, pt = fld.grad_polar(z)
    R = fld.boundary_radius(th)
    return FieldGrid(
        m=fld.m, omega=fld.omega, r=r, theta=th, psi=psi,
        psi_r=pr.reshape(rr.shape), psi_theta=pt.reshape(rr.shape),
        inside=rr < R[None, :], boundary_R=R,
    )


@dataclass
class Polyline:
    points: np.ndarray   # complex, x + iy
    level: float
    closed: bool


def contour_extract(grid: FieldGrid, levels) -> list[Polyline]:
    """Marching-squares level curves of Psi on the sector grid, mapped to the plane."""
    from skimage.measure import find_contours

    out = []
    nr, nt = grid.psi.shape
    for level in np.atleast_1d(levels):
        for c in find_contours(grid.psi, float(level)):
            ri = np.interp(c[:, 0], np.arange(nr), grid.r)
            ti = np.interp(c[:, 1], np.arange(nt), grid.theta)
            pts = ri * np.exp(1j * ti)
            closed = bool(len(c) > 2 and np.allclose(c[0], c[-1]))
            out.append(Polyline(pts, float(level), closed))
    return out


def unfold(points, m: int) -> list[np.ndarray]:
    """Copies of sector points under the 2m-element symmetry group."""
    pts = np.asarray(points, dtype=np.complex128)
    copies = []
    for l in range(m):
        rot = np.exp(2j * np.pi * l / m)
        copies.append(rot * pts)
        copies.append(rot * np.conj(pts))
    return copies
