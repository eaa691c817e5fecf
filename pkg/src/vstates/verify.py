"""Executable audits of the analytic facts known about rotating patches.

Each check returns an AuditEntry; checks never modify the records they read.
Tolerances are module constants so that reports stay comparable between runs.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from . import boundary
from .errors import InsufficientData, VStateError
from .solver import critical_frequency, dense_jacobian, trivial_multiplier
from .spectral import PatchCoeffs, interpolate, synthesize

LINEARIZATION_TOL = 1e-6
LOCAL_CURVE_TOL = 0.05
INTERCEPT_TOL = 1e-4
SLOPE_MIN = 1.8
EXPANSION_LEAD_TOL = 0.10
RH_TOL = 1e-6
PHI_BOUND = 4.0


@dataclass
class AuditEntry:
    name: str
    passed: bool
    value: float
    tolerance: float
    mandatory: bool = True
    detail: str = ""

    def as_dict(self) -> dict:
        return {
            "passed": self.passed,
            "value": self.value,
            "tolerance": self.tolerance,
            "mandatory": self.mandatory,
            "detail": self.detail,
        }


@dataclass
class AuditReport:
    entries: dict[str, AuditEntry] = field(default_factory=dict)

    def add(self, entry: AuditEntry) -> AuditEntry:
        key = entry.name
        i = 2
        while key in self.entries:
            key = f"{entry.name}#{i}"
            i += 1
        self.entries[key] = entry
        return entry

    @property
    def verdict(self) -> bool:
        return all(e.passed for e in self.entries.values() if e.mandatory)

    def failures(self) -> list[str]:
        return [k for k, e in self.entries.items() if e.mandatory and not e.passed]

    def as_dict(self) -> dict:
        return {"verdict": "pass" if self.verdict else "fail",
                "checks": {k: e.as_dict() for k, e in self.entries.items()}}


def _trace_of(record):
    N = getattr(record, "N", 0) or 1024
    return synthesize(record.coeffs, N)


# --------------------------------------------------------------- linearization
def check_linearization(m: int, omega: float, M_small: int = 8, N: int = 1024) -> AuditEntry:
    """Dense FD Jacobian at the disk against the diagonal Fourier multiplier."""
    if M_small > 16:
        raise ValueError("M_small must be <= 16")
    J = dense_jacobian(PatchCoeffs.zeros(m, M_small), omega, N)
    mult = trivial_multiplier(m, M_small, omega)
    d = np.diag(J)
    scale = np.maximum(np.abs(mult), 1.0)
    diag_err = float(np.max(np.abs(d - mult) / scale))
    off = J - np.diag(d)
    off_err = float(np.max(np.abs(off))) if M_small > 1 else 0.0
    value = max(diag_err, off_err)
    return AuditEntry("linearization", value <= LINEARIZATION_TOL, value, LINEARIZATION_TOL,
                      detail=f"diag rel err {diag_err:.2e}, off-diag {off_err:.2e}")


# ---------------------------------------------------------------- local curve
@dataclass
class LocalCurveFit:
    intercept: float
    linear: float
    quadratic: float
    linear_fraction: float
    a2_slope: float


def fit_local_curve(records: Sequence, m: int | None = None, s_max: float = 0.1) -> LocalCurveFit:
    pts = [(abs(r.coeffs.a[0]), r.omega, abs(r.coeffs.a[1]) if r.coeffs.M > 1 else 0.0)
           for r in records if abs(r.coeffs.a[0]) <= s_max]
    if len(pts) < 4:
        raise InsufficientData(f"need >= 4 records with a1 <= {s_max}, have {len(pts)}")
    s = np.array([p[0] for p in pts])
    om = np.array([p[1] for p in pts])
    a2 = np.array([p[2] for p in pts])
    c2, c1, c0 = np.polyfit(s, om, 2)
    smax = float(s.max())
    frac = abs(c1 * smax) / max(abs(c2) * smax**2, 1e-300)
    mask = (s > 0) & (a2 > 0)
    slope = float(np.polyfit(np.log(s[mask]), np.log(a2[mask]), 1)[0]) if mask.sum() >= 2 else float("nan")
    return LocalCurveFit(float(c0), float(c1), float(c2), float(frac), slope)


def check_local_curve(records: Sequence, m: int) -> list[AuditEntry]:
    fit = fit_local_curve(records, m)
    om_m = critical_frequency(m)
    return [
        AuditEntry("local_curve.linear_term", fit.linear_fraction <= LOCAL_CURVE_TOL,
                   fit.linear_fraction, LOCAL_CURVE_TOL,
                   detail=f"Omega ~ {fit.intercept:.6f} + {fit.linear:.3e} s + {fit.quadratic:.4f} s^2"),
        AuditEntry("local_curve.intercept", abs(fit.intercept - om_m) <= INTERCEPT_TOL,
                   abs(fit.intercept - om_m), INTERCEPT_TOL),
        AuditEntry("local_curve.a2_slope", fit.a2_slope >= SLOPE_MIN, fit.a2_slope, SLOPE_MIN),
    ]


# ----------------------------------------------------------------- expansions
def expansion_leading_terms(m: int, w: np.ndarray) -> dict[str, tuple[np.ndarray, np.ndarray]]:
    """(value at s = 0, coefficient of s) for the six boundary polar partials."""
    wm = w**m
    z = np.zeros(w.shape)
    return {
        "d_theta": (z, 0.5 * wm.imag),
        "r_dr": (z + 1.0 / (2 * m), None),
        "d_theta_r_dr": (z, -0.5 * m * wm.imag),
        "r_dr2": (z - (m - 1) / m, None),
        "d_theta2": (z, 0.5 * m * wm.real),
        "d_theta2_r_dr": (z, -0.5 * m * m * wm.real),
    }


def _derivs(coeffs, omega, N):
    tr = synthesize(coeffs, N)
    return tr, boundary.stream_derivs_boundary(tr, omega)


def check_expansions_psi(record, reference=None, N: int | None = None) -> list[AuditEntry]:
    """Compare boundary partials with their small-amplitude expansions.

    A remainder is O(s^k) when err / s^k stays bounded as s shrinks, so the
    ratio at the smaller amplitude (``reference``) may be at most twice the
    ratio at ``record``.  The s-coefficient of d_theta^2 r d_r Psi is also
    measured directly.
    """
    s = float(record.coeffs.a[0])
    if abs(s) > 0.05:
        raise InsufficientData(f"a1 = {s:.4f} exceeds 0.05")
    if reference is None:
        raise InsufficientData("a second, smaller-amplitude record is required")
    s_ref = float(reference.coeffs.a[0])
    if not 0 < abs(s_ref) < abs(s):
        raise InsufficientData("reference record must have smaller nonzero a1")
    m = record.coeffs.m
    N = N or getattr(record, "N", 0) or 1024
    out = []
    data = {}
    for tag, rec in (("s", record), ("ref", reference)):
        tr, d = _derivs(rec.coeffs, rec.omega, N)
        data[tag] = (float(rec.coeffs.a[0]), tr, d)
    for name in ("d_theta", "r_dr", "d_theta_r_dr", "r_dr2", "d_theta2", "d_theta2_r_dr"):
        errs = {}
        for tag, (sv, tr, d) in data.items():
            c0, c1 = expansion_leading_terms(m, tr.w)[name]
            if c1 is None:
                # O(s) remainder: compare to the constant
                errs[tag] = float(np.max(np.abs(getattr(d, name) - c0)))
            else:
                errs[tag] = float(np.max(np.abs(getattr(d, name) - sv * c1)))
        order = 1 if expansion_leading_terms(m, data["s"][1].w)[name][1] is None else 2
        C_big = errs["s"] / abs(s) ** order
        C_small = errs["ref"] / abs(data["ref"][0]) ** order
        bound = 2.0 * C_big
        out.append(AuditEntry(f"expansion.{name}", C_small <= bound, C_small, bound,
                              detail=f"err/s^{order}: {C_small:.3g} at the smaller amplitude, "
                                     f"{C_big:.3g} at the larger"))
    # measured leading coefficient of d_theta^2 r d_r Psi against -m^2/2
    sv, tr, d = data["s"]
    sr, trr, dr = data["ref"]
    proj = lambda v, t: 2.0 * float(np.mean(v * np.cos(m * t)))
    lead = (proj(d.d_theta2_r_dr, tr.t) - proj(dr.d_theta2_r_dr, trr.t)) / (sv - sr)
    target = -0.5 * m * m
    rel = abs(lead - target) / abs(target)
    out.append(AuditEntry("expansion.lead_d_theta2_r_dr", rel <= EXPANSION_LEAD_TOL, rel,
                          EXPANSION_LEAD_TOL, detail=f"measured {lead:.5f}, expected {target}"))
    return out


# ---------------------------------------------------------------------- bounds
def gaier_margin(trace) -> tuple[float, float, float]:
    """(lhs, rhs, p) of the L^p bound on phi' implied by the tangent-angle bound."""
    _, _, gamma = boundary.polar_quantities(trace)
    g = float(np.max(np.abs(gamma)))
    p = (math.pi / 2) / (g + 0.1)
    lhs = float(np.mean(np.abs(trace.dphi) ** p) * 2 * math.pi)
    rhs = 2 * math.pi * 4.0**p / math.cos(p * g)
    return lhs, rhs, p


def check_bounds(record) -> list[AuditEntry]:
    tr = _trace_of(record)
    max_phi = float(np.max(np.abs(tr.phi)))
    trivial = not np.any(record.coeffs.a)
    if trivial:
        ok = abs(max_phi - 1.0) <= 1e-14
        detail = "trivial solution, boundary case max|phi| = 1"
    else:
        ok = 1.0 < max_phi <= PHI_BOUND
        detail = "1 < max|phi| <= 4"
    lhs, rhs, p = gaier_margin(tr)
    return [
        AuditEntry("bounds.max_phi", ok, max_phi, PHI_BOUND, detail=detail),
        AuditEntry("bounds.omega", 0.0 < record.omega < 0.5, record.omega, 0.5, detail="0 < Omega < 1/2"),
        AuditEntry("bounds.gaier", lhs <= rhs, lhs, rhs, detail=f"p = {p:.4f}"),
    ]


# ----------------------------------------------------------------------- nodal
def boundary_graph(trace):
    """theta, R(theta) and R'(theta) at the nodes of the boundary trace."""
    q = trace.phi_t / trace.phi
    theta = np.angle(trace.phi)
    R = np.abs(trace.phi)
    dR = R * q.real / q.imag
    return theta, R, dR


def check_nodal(record, N: int | None = None) -> list[AuditEntry]:
    m = record.coeffs.m
    N = N or getattr(record, "N", 0) or 1024
    tr = synthesize(record.coeffs, N)
    if not np.any(record.coeffs.a):
        return [AuditEntry("nodal", True, 0.0, 0.0, mandatory=False,
                           detail="trivial solution is on the boundary of the nodal set; skipped")]
    d = boundary.stream_derivs_boundary(tr, record.omega)
    theta, R, dR = boundary_graph(tr)
    sector = (theta > 0) & (theta < math.pi / m)
    out = []
    v = float(np.max(dR[sector]))
    out.append(AuditEntry("nodal.R_prime", v < 0, v, 0.0, detail="max R'(theta) on the open sector"))

    # R'' at the ends of the sector via FD of R' in theta
    def r2_at(t0):
        h = 1e-4
        vals = []
        for tt in (t0 - h, t0 + h):
            phi = interpolate(tr.phi, tt)[0]
            pt = interpolate(tr.phi_t, tt)[0]
            qq = pt / phi
            th = np.angle(phi)
            vals.append((th, abs(phi) * qq.real / qq.imag))
        return (vals[1][1] - vals[0][1]) / (vals[1][0] - vals[0][0])

    r2_R = float(r2_at(0.0))
    r2_L = float(r2_at(math.pi / m))
    out.append(AuditEntry("nodal.R_second_R", r2_R < 0, r2_R, 0.0, detail="R'' < 0 at theta = 0"))
    out.append(AuditEntry("nodal.R_second_L", r2_L > 0, r2_L, 0.0, detail="R'' > 0 at theta = pi/m"))
    pr = float(np.min(d.psi_r))
    out.append(AuditEntry("nodal.psi_r", pr > 0, pr, 0.0, detail="min Psi_r on the boundary"))

    # Psi_r theta = d_theta(r d_r Psi) / r on the boundary
    v = float(np.max(d.d_theta_r_dr[sector] / d.rho[sector]))
    out.append(AuditEntry("nodal.psi_r_theta", v < 0, v, 0.0, detail="max Psi_r_theta on the open sector"))
    f = d.d_theta2_r_dr / d.rho
    vR = float(f[0])
    vL = float(interpolate(f, math.pi / m)[0].real)
    out.append(AuditEntry("nodal.psi_r_theta_theta_R", vR < 0, vR, 0.0))
    out.append(AuditEntry("nodal.psi_r_theta_theta_L", vL > 0, vL, 0.0))
    lhs = float(np.max(d.r_dr2 + 2 * record.omega * d.rho**2))
    rhs = float(np.min(2 * record.omega * d.rho**2))
    out.append(AuditEntry("nodal.radial_convexity", lhs < rhs, lhs - rhs, 0.0,
                          detail=f"max((r d_r)^2 Psi + 2 Omega r^2) = {lhs:.6f} vs min 2 Omega r^2 = {rhs:.6f}"))
    return out


# ------------------------------------------------------------------ RH identity
def rh_defect(coeffs: PatchCoeffs, omega: float, N: int) -> float:
    tr = synthesize(coeffs, N)
    rec = boundary.rh_reconstruct(tr, omega)
    return float(np.max(np.abs(rec - tr.dphi)) / np.max(np.abs(tr.dphi)))


def check_rh_identity(record, N: int | None = None) -> AuditEntry:
    N = N or getattr(record, "N", 0) or 1024
    try:
        v = rh_defect(record.coeffs, record.omega, N)
    except VStateError as exc:
        return AuditEntry("rh_identity", False, float("inf"), RH_TOL, detail=str(exc))
    return AuditEntry("rh_identity", v <= RH_TOL, v, RH_TOL)


# -------------------------------------------------------------------- suite
def audit_records(records: Sequence, m: int | None = None, *, nodal: bool = True) -> AuditReport:
    """All per-record checks plus the local-curve fit when enough records exist."""
    report = AuditReport()
    if not records:
        return report
    m = m or records[0].coeffs.m
    for rec in records:
        tag = f"step {rec.step}"
        for e in check_bounds(rec):
            e.detail = f"{tag}: {e.detail}"
            report.add(e)
        if np.any(rec.coeffs.a):
            e = check_rh_identity(rec)
            e.detail = f"{tag}: {e.detail}"
            report.add(e)
            if nodal:
                for e in check_nodal(rec):
                    e.detail = f"{tag}: {e.detail}"
                    report.add(e)
    try:
        for e in check_local_curve(records, m):
            report.add(e)
    except InsufficientData as exc:
        report.add(AuditEntry("local_curve", False, float("nan"), LOCAL_CURVE_TOL, mandatory=False,
                              detail=str(exc)))
    return report
