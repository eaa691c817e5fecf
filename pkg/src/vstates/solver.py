"""Matrix-free Newton-Krylov root finding for the truncated map a -> b."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field, asdict

import numpy as np
from scipy.sparse.linalg import LinearOperator, gmres, lgmres

from . import boundary
from .errors import EvaluationFailure, NonConvergence
from .spectral import FloatArray, PatchCoeffs, ResidualCoeffs, analyze_residual, synthesize

logger = logging.getLogger(__name__)

# Derivative of the residual at the disk, per sine coefficient:
#   b_k = MULTIPLIER_NORMALIZATION * 2 k m (Omega - Omega_km) * a_k.
# Linearising Im{(Omega conj(phi) + C(phi)conj(phi)/2) w phi'} at phi = w with
# perturbation a w^{1-km} gives Im{-(Omega - 1/2)(km-1) a w^{-km} + Omega a w^{km}}
# = km(Omega - Omega_km) a sin(kmt); frozen against the dense FD Jacobian.
MULTIPLIER_NORMALIZATION = 0.5


def critical_frequency(m: int, n: int = 1) -> float:
    """Kelvin's bifurcation frequency (nm - 1) / (2nm)."""
    return (n * m - 1) / (2.0 * n * m)


def trivial_multiplier(m: int, M: int, omega: float) -> FloatArray:
    """Diagonal of the linearisation at a = 0, in sine-coefficient units."""
    k = np.arange(1, M + 1)
    return MULTIPLIER_NORMALIZATION * 2.0 * k * m * (omega - (k * m - 1) / (2.0 * k * m))


@dataclass(frozen=True)
class NewtonConfig:
    tol_residual: float = 1e-11
    max_newton_iters: int = 50
    fd_epsilon_scale: float = 1.49e-8
    krylov_tol: float = 1e-3
    krylov_restart: int = 30
    krylov_max_iters: int = 500
    max_backtracks: int = 8
    line_search: bool = True
    lgmres: bool = False
    preconditioner: str = "none"   # "none" or "diagonal"

    def __post_init__(self):
        for name in ("tol_residual", "fd_epsilon_scale", "krylov_tol"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")
        for name in ("max_newton_iters", "krylov_restart", "krylov_max_iters"):
            if int(getattr(self, name)) <= 0:
                raise ValueError(f"{name} must be positive")
        if self.tol_residual >= 1 or self.krylov_tol >= 1:
            raise ValueError("tolerances must be < 1")
        if self.preconditioner not in ("none", "diagonal"):
            raise ValueError(f"unknown preconditioner {self.preconditioner!r}")

    def as_dict(self) -> dict:
        return asdict(self)


@dataclass
class NewtonReport:
    converged: bool
    iters: int
    final_residual: float
    krylov_iters_total: int
    backtracks: int
    history: list = field(default_factory=list)

    def as_dict(self) -> dict:
        return {
            "converged": self.converged,
            "iters": self.iters,
            "final_residual": self.final_residual,
            "krylov_iters_total": self.krylov_iters_total,
            "backtracks": self.backtracks,
        }


def eval_FM(coeffs: PatchCoeffs, omega: float, N: int) -> ResidualCoeffs:
    """F^M(a; Omega): synthesize, evaluate the boundary residual, project on sin(nmt)."""
    trace = synthesize(coeffs, N)
    r = boundary.residual(trace, omega)
    if not np.all(np.isfinite(r)):
        raise EvaluationFailure("non-finite residual")
    return analyze_residual(r, coeffs.m, coeffs.M, warn=False)


def _fd_step(a: FloatArray, d: FloatArray, cfg: NewtonConfig) -> float:
    return cfg.fd_epsilon_scale * (1.0 + np.linalg.norm(a)) / np.linalg.norm(d)


def jacobian_vector(coeffs: PatchCoeffs, omega: float, direction, cfg: NewtonConfig, N: int,
                    base: FloatArray | None = None) -> FloatArray:
    """Forward-difference action of dF^M/da on ``direction``."""
    d = np.asarray(direction, dtype=np.float64)
    nd = np.linalg.norm(d)
    if nd == 0:
        raise ValueError("direction must be nonzero")
    if base is None:
        base = eval_FM(coeffs, omega, N).b
    eps = _fd_step(coeffs.a, d, cfg)
    pert = eval_FM(coeffs.with_a(coeffs.a + eps * d), omega, N).b
    return (pert - base) / eps


def dense_jacobian(coeffs: PatchCoeffs, omega: float, N: int, cfg: NewtonConfig | None = None) -> FloatArray:
    """Column-by-column FD Jacobian (oracle for small M)."""
    cfg = cfg or NewtonConfig()
    base = eval_FM(coeffs, omega, N).b
    J = np.empty((coeffs.M, coeffs.M))
    for k in range(coeffs.M):
        e = np.zeros(coeffs.M)
        e[k] = 1.0
        J[:, k] = jacobian_vector(coeffs, omega, e, cfg, N, base)
    return J


def newton_solve(initial: PatchCoeffs, omega: float, cfg: NewtonConfig | None = None,
                 N: int | None = None) -> tuple[PatchCoeffs, NewtonReport]:
    """Newton iteration with restarted GMRES inner solves of J delta = -b.

    Raises NonConvergence (carrying the last iterate and report) when the
    iteration budget is exhausted, and EvaluationFailure (with ``coeffs``
    set to the last good iterate) when the residual cannot be evaluated.
    """
    cfg = cfg or NewtonConfig()
    if N is None:
        from .spectral import default_grid_size
        N = default_grid_size(initial.m, initial.M)
    M = initial.M
    coeffs = initial
    b = eval_FM(coeffs, omega, N).b
    res = float(np.max(np.abs(b)))
    report = NewtonReport(False, 0, res, 0, 0, [res])

    precond = None
    if cfg.preconditioner == "diagonal":
        diag = trivial_multiplier(initial.m, M, omega)
        diag = np.where(np.abs(diag) < 1e-8, np.copysign(1e-8, diag), diag)
        precond = LinearOperator((M, M), matvec=lambda v: np.asarray(v).ravel() / diag, dtype=np.float64)

    while res > cfg.tol_residual:
        if report.iters >= cfg.max_newton_iters:
            raise NonConvergence(
                f"Newton did not converge in {cfg.max_newton_iters} iterations (residual {res:.3e})",
                coeffs, report)
        base_b = b
        base_coeffs = coeffs
        count = [0]

        def matvec(v, base_coeffs=base_coeffs, base_b=base_b):
            v = np.asarray(v, dtype=np.float64).ravel()
            if not np.any(v):
                return np.zeros(M)
            return jacobian_vector(base_coeffs, omega, v, cfg, N, base_b)

        def cb(_):
            count[0] += 1

        J = LinearOperator((M, M), matvec=matvec, dtype=np.float64)
        try:
            if cfg.lgmres:
                delta, _ = lgmres(J, -b, rtol=cfg.krylov_tol, atol=0.0, inner_m=cfg.krylov_restart,
                                  maxiter=max(1, cfg.krylov_max_iters // cfg.krylov_restart),
                                  M=precond, callback=cb)
            else:
                delta, _ = gmres(J, -b, rtol=cfg.krylov_tol, atol=0.0, restart=cfg.krylov_restart,
                                 maxiter=max(1, math.ceil(cfg.krylov_max_iters / cfg.krylov_restart)),
                                 M=precond, callback=cb, callback_type="pr_norm")
        except EvaluationFailure as exc:
            exc.coeffs = coeffs
            raise
        report.krylov_iters_total += count[0]

        lam = 1.0
        norm0 = float(np.linalg.norm(b))
        accepted = False
        last_exc = None
        for _ in range(cfg.max_backtracks + 1):
            trial = coeffs.with_a(coeffs.a + lam * delta)
            try:
                tb = eval_FM(trial, omega, N).b
            except EvaluationFailure as exc:
                last_exc = exc
                tb = None
            if tb is not None and (not cfg.line_search or np.linalg.norm(tb) < norm0):
                accepted = True
                break
            if not cfg.line_search and tb is None:
                break
            lam *= 0.5
            report.backtracks += 1
        if not accepted:
            if tb is None:
                err = EvaluationFailure(f"residual evaluation failed along the Newton step: {last_exc}")
                err.coeffs = coeffs
                raise err
            # no decrease found: keep the shortest step and let the budget decide
        coeffs, b = trial, tb
        res = float(np.max(np.abs(b)))
        report.iters += 1
        report.history.append(res)
        logger.debug("newton it %d: |b|=%.3e lam=%.3g krylov=%d", report.iters, res, lam, count[0])

    report.converged = True
    report.final_residual = res
    return coeffs, report
