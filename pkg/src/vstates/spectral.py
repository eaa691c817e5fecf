"""Symmetric Fourier representation of the conformal boundary trace.

The trace of the exterior conformal map is stored as

    phi(e^{it}) = e^{it} + sum_n a_n e^{-i(nm-1)t},   a_n real,

so every represented frequency is congruent to 1 mod m.  Grid values are
produced by inverse FFT of the padded spectrum.  The FFT normalisation is
fixed: forward transforms are unscaled, inverse transforms carry 1/N.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
from numpy.typing import NDArray

from .errors import AliasingError

logger = logging.getLogger(__name__)

FloatArray = NDArray[np.float64]
ComplexArray = NDArray[np.complex128]


@dataclass(frozen=True)
class PatchCoeffs:
    """Real coefficients a_1..a_M of an m-fold symmetric trace."""

    m: int
    a: FloatArray

    def __post_init__(self):
        a = np.array(self.a, dtype=np.float64).reshape(-1)
        if int(self.m) < 2:
            raise ValueError(f"symmetry class m must be >= 2, got {self.m}")
        if a.size < 1:
            raise ValueError("need at least one Fourier mode")
        a.setflags(write=False)
        object.__setattr__(self, "m", int(self.m))
        object.__setattr__(self, "a", a)

    @property
    def M(self) -> int:
        return int(self.a.size)

    @classmethod
    def zeros(cls, m: int, M: int) -> "PatchCoeffs":
        return cls(m, np.zeros(M))

    def with_a(self, a) -> "PatchCoeffs":
        return PatchCoeffs(self.m, a)

    def frequencies(self) -> NDArray[np.int64]:
        """Angular frequencies -(nm-1) carried by a_1..a_M."""
        n = np.arange(1, self.M + 1)
        return -(n * self.m - 1)

    def __eq__(self, other):
        if not isinstance(other, PatchCoeffs):
            return NotImplemented
        return self.m == other.m and np.array_equal(self.a, other.a)

    def __hash__(self):
        return hash((self.m, self.a.tobytes()))


@dataclass(frozen=True)
class GridTrace:
    """phi, phi' and phi'' sampled at N uniform nodes t_j = 2 pi j / N."""

    m: int
    t: FloatArray
    phi: ComplexArray
    dphi: ComplexArray
    ddphi: ComplexArray = field(repr=False)

    @property
    def N(self) -> int:
        return int(self.t.size)

    @property
    def w(self) -> ComplexArray:
        return np.exp(1j * self.t)

    @property
    def phi_t(self) -> ComplexArray:
        """d/dt phi(e^{it}) = i w phi'(w)."""
        return 1j * self.w * self.dphi


@dataclass(frozen=True)
class ResidualCoeffs:
    """Sine-series coefficients b_n of a residual sum_n b_n sin(nmt)."""

    b: FloatArray
    offband_fraction: float = 0.0

    @property
    def M(self) -> int:
        return int(self.b.size)


def default_grid_size(m: int, M: int) -> int:
    """Smallest power of two >= 4 m M."""
    n = 1
    while n < 4 * m * M:
        n *= 2
    return n


def nodes(N: int) -> FloatArray:
    return 2.0 * np.pi * np.arange(N) / N


def _inverse(spectrum: ComplexArray) -> ComplexArray:
    # values_j = sum_k S_k e^{2 pi i jk/N}: inverse FFT (1/N) times N
    return np.fft.ifft(spectrum) * spectrum.size


def synthesize(coeffs: PatchCoeffs, N: int) -> GridTrace:
    """Sample phi, phi', phi'' on N uniform nodes."""
    m, M = coeffs.m, coeffs.M
    N = int(N)
    if N <= m * M:
        raise AliasingError(f"N={N} must exceed m*M={m * M}")
    a = coeffs.a
    if not np.all(np.isfinite(a)):
        raise ValueError("non-finite Fourier coefficients")

    n = np.arange(1, M + 1)
    nm = n * m
    S = np.zeros(N, dtype=np.complex128)
    S[1] = 1.0
    np.add.at(S, (-(nm - 1)) % N, a)
    D = np.zeros(N, dtype=np.complex128)
    D[0] = 1.0
    np.add.at(D, (-nm) % N, -(nm - 1) * a)
    D2 = np.zeros(N, dtype=np.complex128)
    np.add.at(D2, (-nm - 1) % N, (nm - 1) * nm * a)

    return GridTrace(
        m=m,
        t=nodes(N),
        phi=_inverse(S),
        dphi=_inverse(D),
        ddphi=_inverse(D2),
    )


def evaluate(coeffs: PatchCoeffs, t) -> tuple[ComplexArray, ComplexArray]:
    """phi(e^{it}) and d/dt phi(e^{it}) at arbitrary angles by direct summation."""
    t = np.asarray(t, dtype=np.float64)
    freq = coeffs.frequencies()
    e = np.exp(1j * np.multiply.outer(t, freq))
    phi = np.exp(1j * t) + e @ coeffs.a
    phit = 1j * np.exp(1j * t) + e @ (1j * freq * coeffs.a)
    return phi, phit


def evaluate_map(coeffs: PatchCoeffs, w) -> tuple[ComplexArray, ComplexArray]:
    """Exterior map Phi(w) = w + sum a_n w^{-(nm-1)} and Phi'(w) for |w| >= 1."""
    w = np.asarray(w, dtype=np.complex128)
    n = np.arange(1, coeffs.M + 1)
    p = n * coeffs.m - 1
    wp = np.power.outer(w, -p)
    Phi = w + wp @ coeffs.a
    dPhi = 1.0 - (wp / w[..., None]) @ (p * coeffs.a)
    return Phi, dPhi


def spectral_derivative(values: ComplexArray) -> ComplexArray:
    """d/dt of periodic samples on the uniform grid (Nyquist mode dropped)."""
    N = values.size
    k = np.fft.fftfreq(N, 1.0 / N)
    if N % 2 == 0:
        k[N // 2] = 0.0
    return np.fft.ifft(1j * k * np.fft.fft(values))


def analyze_residual(values, m: int, M: int, *, warn: bool = True) -> ResidualCoeffs:
    """Project real residual samples onto sin(nmt), n = 1..M."""
    r = np.asarray(values, dtype=np.float64)
    N = r.size
    if 2 * m * M >= N:
        raise AliasingError(f"N={N} must exceed 2*m*M={2 * m * M} for the sine series")
    R = np.fft.fft(r)
    idx = m * np.arange(1, M + 1)
    b = -2.0 * R[idx].imag / N

    total = float(np.dot(r, r))
    represented = 0.5 * N * float(np.dot(b, b))
    frac = max(total - represented, 0.0) / total if total > 0 else 0.0
    if warn and frac > 1e-10:
        logger.warning("residual has %.3e of its energy off the represented modes", frac)
    b.setflags(write=False)
    return ResidualCoeffs(b=b, offband_fraction=frac)


def interpolate(values, t) -> ComplexArray:
    """Trigonometric interpolant of uniform periodic samples evaluated at angles t."""
    v = np.asarray(values, dtype=np.complex128)
    N = v.size
    c = np.fft.fft(v) / N
    k = np.fft.fftfreq(N, 1.0 / N)
    if N % 2 == 0:
        # split the Nyquist mode evenly so real data stay real
        c = np.append(c, 0.5 * c[N // 2])
        c[N // 2] *= 0.5
        k = np.append(k, N // 2)
        k[N // 2] = -N // 2
    t = np.atleast_1d(np.asarray(t, dtype=np.float64))
    return np.exp(1j * np.multiply.outer(t, k)) @ c


def sine_series(b, m: int, N: int) -> FloatArray:
    """Samples of sum_n b_n sin(nmt) on N nodes."""
    b = np.asarray(b, dtype=np.float64)
    t = nodes(N)
    n = np.arange(1, b.size + 1)
    return np.sin(np.multiply.outer(t, n * m)) @ b


def project_symmetry(values, m: int, kind: str = "phi") -> ComplexArray:
    """Average samples over the 2m-element dihedral orbit.

    kind="phi": equivariant traces, phi(e^{2 pi i/m} w) = e^{2 pi i/m} phi(w),
    phi(conj w) = conj phi(w).  kind="residual": invariant, odd functions,
    h(e^{2 pi i/m} w) = h(w), h(conj w) = -conj h(w).
    """
    v = np.asarray(values, dtype=np.complex128)
    N = v.size
    if N % (2 * m):
        raise AliasingError(f"N={N} must be divisible by 2m={2 * m}")
    shift = N // m
    j = np.arange(N)
    acc = np.zeros(N, dtype=np.complex128)
    for l in range(m):
        fwd = v[(j + l * shift) % N]
        ref = np.conj(v[(-j - l * shift) % N])
        if kind == "phi":
            rot = np.exp(-2j * np.pi * l / m)
            acc += rot * (fwd + ref)
        elif kind == "residual":
            acc += fwd - ref
        else:
            raise ValueError(f"unknown symmetry kind {kind!r}")
    return acc / (2 * m)


def symmetry_defect(values, m: int, kind: str = "phi") -> float:
    v = np.asarray(values, dtype=np.complex128)
    return float(np.max(np.abs(v - project_symmetry(v, m, kind))))


def recover_coefficients(trace_phi, m: int, M: int) -> FloatArray:
    """Least-squares recovery of a_1..a_M from phi samples (independent of the FFT path)."""
    phi = np.asarray(trace_phi, dtype=np.complex128)
    N = phi.size
    t = nodes(N)
    n = np.arange(1, M + 1)
    basis = np.exp(-1j * np.multiply.outer(t, n * m - 1))
    rhs = phi - np.exp(1j * t)
    A = np.vstack([basis.real, basis.imag])
    y = np.concatenate([rhs.real, rhs.imag])
    sol, *_ = np.linalg.lstsq(A, y, rcond=None)
    return sol
