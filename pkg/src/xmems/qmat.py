"""Dense complex linear-algebra substrate.

Density matrices, Choi matrices and certificates are carried around as plain
complex ndarrays; the helpers here pin down the conventions the rest of the
package relies on: Hermitian ingest with a hard deviation bound, descending
eigenvalue order, and a thresholded numerical rank.
"""

import json

import numpy as np

HERMITIAN_TOL = 1e-12


def kron(a, b):
    """Kronecker product of two matrices."""
    return np.kron(np.asarray(a), np.asarray(b))


def hermitize(m, tol=HERMITIAN_TOL):
    """Return the Hermitian part (m + m^dag)/2 of a square matrix.

    Raises ValueError when the anti-Hermitian deviation exceeds ``tol``
    relative to the matrix scale; silent symmetrization of badly
    non-Hermitian input would poison every PSD check downstream.
    """
    m = np.asarray(m)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {m.shape}")
    scale = max(1.0, np.abs(m).max()) if m.size else 1.0
    dev = np.abs(m - m.conj().T).max() if m.size else 0.0
    if dev > tol * scale:
        raise ValueError(f"matrix is not Hermitian: deviation {dev:.3e} exceeds {tol:.1e}")
    return 0.5 * (m + m.conj().T)


def partial_trace(m, dim_a, dim_b, which="first"):
    """Trace out one tensor factor of a (dim_a*dim_b)-dimensional matrix.

    Parameters
    ----------
    m : array_like
        Square matrix on the product space, first factor of dimension
        ``dim_a``, second of dimension ``dim_b``.
    which : {"first", "second"}
        Factor to trace out.  ``"first"`` returns a dim_b matrix,
        ``"second"`` a dim_a matrix.  The total trace is preserved.
    """
    m = np.asarray(m)
    d = dim_a * dim_b
    if m.shape != (d, d):
        raise ValueError(f"matrix shape {m.shape} does not match dims {dim_a}x{dim_b}")
    t = m.reshape(dim_a, dim_b, dim_a, dim_b)
    if which == "first":
        return np.einsum("iaib->ab", t)
    if which == "second":
        return np.einsum("aibi->ab", t)
    raise ValueError(f"which must be 'first' or 'second', got {which!r}")


def eig_hermitian(m, tol=HERMITIAN_TOL):
    """Eigendecomposition of a Hermitian matrix, eigenvalues descending.

    Returns ``(w, q)`` with ``m = q @ diag(w) @ q.conj().T`` and
    ``w[0] >= w[1] >= ...``.  Ties keep the stable order produced by the
    underlying LAPACK factorization.
    """
    h = hermitize(m, tol)
    try:
        w, q = np.linalg.eigh(h)
    except np.linalg.LinAlgError as exc:
        raise np.linalg.LinAlgError(f"hermitian eigensolver did not converge: {exc}") from exc
    return w[::-1].copy(), q[:, ::-1].copy()


def numerical_rank(m, tau=1e-6):
    """Count eigenvalues of a Hermitian matrix above the threshold.

    The threshold is ``tau * max(largest |eigenvalue|, 1)``, so tau acts as
    a relative tolerance with an absolute floor at scale one.
    """
    if tau <= 0:
        raise ValueError("tau must be positive")
    w = np.abs(eig_hermitian(m)[0])
    if w.size == 0:
        return 0
    return int(np.count_nonzero(w > tau * max(w.max(), 1.0)))


def min_eigenvalue(m):
    """Smallest eigenvalue of a Hermitian matrix."""
    return float(eig_hermitian(m)[0][-1])


def is_psd(m, tol=1e-9):
    """Whether a Hermitian matrix is positive semidefinite within tol."""
    return min_eigenvalue(m) >= -tol


def check_density_matrix(rho, tol=1e-9):
    """Validate trace one and positive semidefiniteness; returns the ingested matrix."""
    rho = hermitize(rho, tol)
    if abs(np.trace(rho).real - 1.0) > tol:
        raise ValueError(f"trace {np.trace(rho).real!r} is not 1 within {tol}")
    if not is_psd(rho, tol):
        raise ValueError("matrix has an eigenvalue below the PSD tolerance")
    return rho


# --- JSON wire format: {"dim": d, "re": [[...]], "im": [[...]]} -------------


def matrix_to_json(m):
    """Serialize a matrix to the row-major re/im JSON format."""
    m = np.asarray(m, dtype=complex)
    return {
        "dim": m.shape[0],
        "re": m.real.tolist(),
        "im": m.imag.tolist(),
    }


def matrix_from_json(obj):
    """Deserialize a matrix from the re/im JSON format."""
    d = int(obj["dim"])
    re = np.asarray(obj["re"], dtype=float)
    im = np.asarray(obj["im"], dtype=float)
    if re.shape != (d, d) or im.shape != (d, d):
        raise ValueError(f"re/im shapes {re.shape}/{im.shape} do not match dim {d}")
    return re + 1j * im


def save_matrix(path, m):
    with open(path, "w") as fh:
        json.dump(matrix_to_json(m), fh)


def load_matrix(path):
    with open(path) as fh:
        return matrix_from_json(json.load(fh))
