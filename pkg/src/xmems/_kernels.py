"""Hot numeric kernels, each in a numba flavour and a pure-numpy flavour.

Callers dispatch through :func:`xmems._accel.use_numba`; the numpy twins are
the reference implementations and are exercised against the jit versions in
the test suite and in ``benchmarks/bench_accel.py``.
"""

import numpy as np

from . import _accel

# ---------------------------------------------------------------------------
# Schur-complement assembly for the interior-point solver.
#
# Constraint matrices are symmetric and stored as one concatenated COO list
# (vals, rows, cols) partitioned by indptr.  With W symmetric positive
# definite, entry (i, j) of the Schur matrix is
#
#   M[i, j] = tr(A_i W A_j W) = sum_{p in i, q in j} v_p v_q W[c_p, r_q] W[c_q, r_p]
# ---------------------------------------------------------------------------


def schur_coo_numpy(w, vals, rows, cols, indptr):
    """Pure-numpy Schur assembly from COO constraint data.

    Gathers the scattered W entries per constraint pair.  Quadratic in the
    total nonzero count; meant for small or very sparse constraint sets and
    as the reference for the jit kernel.
    """
    m = indptr.size - 1
    out = np.empty((m, m))
    # U_i = W[:, rows_i] vals_i has shape (n, nnz_i); M_ij = sum over the
    # outer contraction of the gathered slices.
    for i in range(m):
        si, ei = indptr[i], indptr[i + 1]
        wi = w[cols[si:ei], :] * vals[si:ei, None]          # (nnz_i, n)
        for j in range(i, m):
            sj, ej = indptr[j], indptr[j + 1]
            block = wi[:, rows[sj:ej]]                       # (nnz_i, nnz_j)
            blockt = w[cols[sj:ej], :][:, rows[si:ei]]       # (nnz_j, nnz_i)
            val = float(np.sum(block * (vals[sj:ej, None] * blockt).T))
            out[i, j] = val
            out[j, i] = val
    return out


if _accel.NUMBA_AVAILABLE:
    from numba import njit, prange

    @njit(cache=True, parallel=True, fastmath=True)
    def _schur_coo_jit(w, vals, rows, cols, indptr):  # pragma: no cover - jit
        m = indptr.size - 1
        out = np.empty((m, m))
        for i in prange(m):
            si, ei = indptr[i], indptr[i + 1]
            for j in range(i, m):
                sj, ej = indptr[j], indptr[j + 1]
                acc = 0.0
                for p in range(si, ei):
                    vp = vals[p]
                    rp = rows[p]
                    cp = cols[p]
                    for q in range(sj, ej):
                        acc += vp * vals[q] * w[cp, rows[q]] * w[cols[q], rp]
                out[i, j] = acc
                out[j, i] = acc
        return out

    @njit(cache=True, parallel=True, fastmath=True)
    def _xsearch_jit(lam_hi, lam_lo, rfrac):  # pragma: no cover - jit
        nsamp, nblk = lam_hi.shape
        out = np.empty(nsamp)
        for s in prange(nsamp):
            total = 0.0
            best = -1.0
            for k in range(nblk):
                half = 0.5 * (lam_hi[s, k] - lam_lo[s, k])
                r = rfrac[s, k] * half
                sv = np.sqrt(lam_hi[s, k] * lam_lo[s, k] + r * r)
                total += sv
                cand = r + sv
                if cand > best:
                    best = cand
            val = 2.0 * (best - total)
            out[s] = val if val > 0.0 else 0.0
        return out

else:  # pragma: no cover - depends on the install
    _schur_coo_jit = None
    _xsearch_jit = None


def schur_coo(w, vals, rows, cols, indptr):
    """Dispatch the COO Schur assembly to the jit or numpy flavour."""
    if _accel.use_numba():
        return _schur_coo_jit(w, vals, rows, cols, indptr)
    return schur_coo_numpy(w, vals, rows, cols, indptr)


# ---------------------------------------------------------------------------
# Randomized search over isospectral X-states.
#
# A block pairing assigns eigenvalue pairs (hi, lo) to the 2-dim subspaces of
# an X-state; the anti-diagonal magnitude of block k can take any value
# r = t * (hi - lo)/2 with t in [0, 1].  The genuine-multipartite concurrence
# of the sampled state follows from r and sqrt(a b) = sqrt(hi lo + r^2).
# ---------------------------------------------------------------------------


def xsearch_concurrence_numpy(lam_hi, lam_lo, rfrac):
    """Concurrence of each sampled isospectral X-state, vectorized."""
    half = 0.5 * (lam_hi - lam_lo)
    r = rfrac * half
    sv = np.sqrt(lam_hi * lam_lo + r * r)
    total = sv.sum(axis=1)
    best = (r + sv).max(axis=1)
    return np.maximum(0.0, 2.0 * (best - total))


def xsearch_concurrence(lam_hi, lam_lo, rfrac):
    """Dispatch the X-state search evaluation to the jit or numpy flavour."""
    if _accel.use_numba():
        return _xsearch_jit(lam_hi, lam_lo, rfrac)
    return xsearch_concurrence_numpy(lam_hi, lam_lo, rfrac)
