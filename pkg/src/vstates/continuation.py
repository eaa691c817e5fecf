"""Fixed-step continuation of the m-fold branch downward in Omega from Omega_m."""

from __future__ import annotations

import enum
import logging
import math
from dataclasses import dataclass, field
from typing import Callable, Iterable

import numpy as np

from . import boundary
from .errors import EvaluationFailure, NonConvergence, VStateError
from .field import CriticalPoint, StreamField, find_critical_points
from .solver import NewtonConfig, NewtonReport, critical_frequency, eval_FM, newton_solve
from .spectral import PatchCoeffs, synthesize

logger = logging.getLogger(__name__)

TAIL_THRESHOLD = 1e-6
TAIL_WINDOW = 0.05


class Termination(str, enum.Enum):
    NEWTON_BUDGET = "NewtonBudget"
    RESOLUTION_LOSS = "ResolutionLoss"
    STEP_BUDGET = "StepBudget"
    EVALUATION_FAILURE = "EvaluationFailure"


@dataclass(frozen=True)
class BranchConfig:
    m: int
    delta: float = 0.005
    M: int = 64
    N: int = 1024
    newton: NewtonConfig = field(default_factory=lambda: NewtonConfig(preconditioner="diagonal"))
    max_steps: int = 40
    extra_start_points: int = 2
    tail_threshold: float = TAIL_THRESHOLD
    secant_guess: bool = False
    locate_saddle: bool = True

    def __post_init__(self):
        if int(self.m) < 2:
            raise ValueError("m must be >= 2")
        if not self.delta > 0:
            raise ValueError("delta must be positive")
        if self.max_steps < 1:
            raise ValueError("max_steps must be positive")
        if not 0 <= self.extra_start_points <= 2:
            raise ValueError("extra_start_points must be 0, 1 or 2")
        if self.N <= 2 * self.m * self.M:
            raise ValueError(f"N={self.N} must exceed 2*m*M={2 * self.m * self.M}")

    @property
    def omega_start(self) -> float:
        return critical_frequency(self.m)

    def step_omegas(self) -> list[tuple[float, float]]:
        """(label, Omega) for the extra start points then steps 1..max_steps."""
        out = []
        fractions = [0.25, 0.5][: self.extra_start_points]
        for f in fractions:
            out.append((f, self.omega_start - f * self.delta))
        for k in range(1, self.max_steps + 1):
            out.append((float(k), self.omega_start - k * self.delta))
        return out


@dataclass
class SolutionRecord:
    step: float              # fractional labels 0.25, 0.5 for the extra start points
    omega: float
    coeffs: PatchCoeffs
    report: NewtonReport
    metrics: boundary.HealthMetrics
    tail_ratio: float
    saddle: CriticalPoint | None = None
    N: int = 0

    @property
    def a1(self) -> float:
        return float(self.coeffs.a[0])


@dataclass
class BranchSummary:
    records: list[SolutionRecord]
    termination: Termination
    message: str = ""

    @property
    def omegas(self) -> np.ndarray:
        return np.array([r.omega for r in self.records])


def initial_guess(k: int, previous: PatchCoeffs | None, delta: float, *, m: int | None = None,
                  M: int | None = None, history: Iterable[tuple[float, PatchCoeffs]] = (),
                  omega: float | None = None, secant: bool = False) -> PatchCoeffs:
    """Starting point for step k.

    k = 1 (or no previous solution) gives (sqrt(delta), 0, ...); later steps
    reuse the previous solution, or with ``secant`` extrapolate linearly in
    Omega through the last two solutions in ``history``.
    """
    if k < 1:
        raise ValueError("k must be >= 1")
    if k == 1 or previous is None:
        if previous is not None:
            m, M = previous.m, previous.M
        if m is None or M is None:
            raise ValueError("m and M are required without a previous solution")
        a = np.zeros(M)
        a[0] = math.sqrt(delta)
        return PatchCoeffs(m, a)
    hist = list(history)
    if secant and len(hist) >= 2 and omega is not None:
        (o1, c1), (o2, c2) = hist[-2], hist[-1]
        lam = (omega - o2) / (o2 - o1)
        return c2.with_a(c2.a + lam * (c2.a - c1.a))
    return previous


def resolution_check(coeffs: PatchCoeffs, window: float = TAIL_WINDOW) -> float:
    """max |a_n| over the top ``window`` fraction of indices, relative to max |a_n|."""
    a = np.abs(coeffs.a)
    if a.size < 20:
        raise ValueError("resolution check needs M >= 20")
    top = a.max()
    if top == 0:
        return 0.0
    w = max(1, int(math.floor(window * a.size)))
    return float(a[-w:].max() / top)


def make_record(step, omega, coeffs, report, N, locate_saddle=True) -> SolutionRecord:
    trace = synthesize(coeffs, N)
    B = boundary.cauchy_phibar(trace)
    metrics = boundary.health_metrics(trace, coeffs, omega, B)
    saddle = None
    if locate_saddle and np.any(coeffs.a):
        try:
            fld = StreamField(coeffs, omega, N)
            pts = find_critical_points(fld, strict=False)
            saddle = pts[0]
        except VStateError as exc:
            logger.warning("saddle search failed at step %s: %s", step, exc)
    return SolutionRecord(step, omega, coeffs, report, metrics, resolution_check(coeffs), saddle, N)


def trace_branch(cfg: BranchConfig, *, resume: list[SolutionRecord] | None = None,
                 on_record: Callable[[SolutionRecord], None] | None = None) -> BranchSummary:
    """Step Omega down from Omega_m, solving at each frequency from the previous solution.

    ``resume`` supplies records from an earlier run; stepping restarts after the
    last of them.  ``on_record`` is called with each new converged record.
    """
    records: list[SolutionRecord] = list(resume or [])
    if not records:
        trivial = PatchCoeffs.zeros(cfg.m, cfg.M)
        b = eval_FM(trivial, cfg.omega_start, cfg.N).b
        res = float(np.max(np.abs(b)))
        rec = make_record(0.0, cfg.omega_start, trivial, NewtonReport(True, 0, res, 0, 0, [res]), cfg.N)
        records.append(rec)
        if on_record is not None:
            on_record(rec)
    schedule = cfg.step_omegas()
    done = {r.step for r in records}
    prev = records[-1].coeffs if records[-1].step >= 1 else None
    history = [(r.omega, r.coeffs) for r in records if r.step >= 1]

    for label, omega in schedule:
        if label in done:
            continue
        k = int(label) if label >= 1 else 1
        if label < 1:
            guess = initial_guess(1, None, omega_gap(cfg, omega), m=cfg.m, M=cfg.M)
        else:
            guess = initial_guess(k, prev if k > 1 else None, cfg.delta, m=cfg.m, M=cfg.M,
                                  history=history, omega=omega, secant=cfg.secant_guess)
        try:
            coeffs, report = newton_solve(guess, omega, cfg.newton, cfg.N)
            rec = make_record(label, omega, coeffs, report, cfg.N, cfg.locate_saddle)
        except NonConvergence as exc:
            logger.info("step %s: %s", label, exc)
            return BranchSummary(records, Termination.NEWTON_BUDGET, str(exc))
        except EvaluationFailure as exc:
            logger.info("step %s: %s", label, exc)
            return BranchSummary(records, Termination.EVALUATION_FAILURE, str(exc))
        if rec.tail_ratio > cfg.tail_threshold:
            return BranchSummary(records, Termination.RESOLUTION_LOSS,
                                 f"tail ratio {rec.tail_ratio:.3e} at step {label}")
        if rec.metrics.maxPhi > 4.0:
            return BranchSummary(records, Termination.EVALUATION_FAILURE,
                                 f"max|phi| = {rec.metrics.maxPhi:.4f} exceeds the a priori bound")
        records.append(rec)
        if on_record is not None:
            on_record(rec)
        prev = coeffs
        if label >= 1:
            history.append((omega, coeffs))
    return BranchSummary(records, Termination.STEP_BUDGET, "")


def omega_gap(cfg: BranchConfig, omega: float) -> float:
    """Distance below Omega_m, used to scale the first guess at the extra start points."""
    return cfg.omega_start - omega
