"""Compiled O(N^2) trapezoid sums.

Each target node is summed over sources in ascending order with Kahan
compensation, so results do not depend on how targets are split among
threads.
"""

import numba
import numpy as np

# tbb in this image is too old for numba; prefer the other layers quietly
numba.config.THREADING_LAYER_PRIORITY = ["omp", "workqueue", "tbb"]


@numba.njit(parallel=True, cache=True)
def cauchy_sum(phi, phit, g, gt):
    """sum_k (g_k - g_n) phit_k / (phi_k - phi_n), diagonal replaced by gt_n.

    Returns the sums divided by i N (the trapezoid approximation of the
    Cauchy operator) together with the smallest secant |phi_k - phi_n|.
    """
    N = phi.shape[0]
    out = np.empty(N, dtype=np.complex128)
    secant = np.empty(N, dtype=np.float64)
    pr = phi.real.copy()
    pi = phi.imag.copy()
    # numerator factors (g_k - g_n) phit_k expanded in real arithmetic
    qr = phit.real.copy()
    qi = phit.imag.copy()
    gr = g.real.copy()
    gi = g.imag.copy()
    for n in numba.prange(N):
        sr = 0.0
        si = 0.0
        cr = 0.0
        ci = 0.0
        s2min = np.inf
        pnr = pr[n]
        pni = pi[n]
        gnr = gr[n]
        gni = gi[n]
        for k in range(N):
            if k == n:
                tre = gt[n].real
                tim = gt[n].imag
            else:
                dr = pr[k] - pnr
                di = pi[k] - pni
                d2 = dr * dr + di * di
                if d2 < s2min:
                    s2min = d2
                ar = gr[k] - gnr
                ai = gi[k] - gni
                nr = ar * qr[k] - ai * qi[k]
                ni = ar * qi[k] + ai * qr[k]
                tre = (nr * dr + ni * di) / d2
                tim = (ni * dr - nr * di) / d2
            yr = tre - cr
            tr = sr + yr
            cr = (tr - sr) - yr
            sr = tr
            yi = tim - ci
            ti = si + yi
            ci = (ti - si) - yi
            si = ti
        # divide by i N
        out[n] = complex(si / N, -sr / N)
        secant[n] = np.sqrt(s2min)
    return out, secant.min()


@numba.njit(parallel=True, cache=True)
def contour_points(phi, phit, z):
    """For each point z_p, sum_k (conj(phi_k) - conj(z_p)) phit_k / (phi_k - z_p) / N.

    This is (1/2 pi) times the trapezoid rule for the closed contour integral
    of (conj zeta - conj z)/(zeta - z) d zeta.
    """
    N = phi.shape[0]
    P = z.shape[0]
    out = np.empty(P, dtype=np.complex128)
    for p in numba.prange(P):
        zp = z[p]
        czp = zp.conjugate()
        s = 0j
        for k in range(N):
            s += (phi[k].conjugate() - czp) * phit[k] / (phi[k] - zp)
        out[p] = s / N
    return out
