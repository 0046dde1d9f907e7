"""N-qubit X-states and their genuine-multipartite concurrence.

An X-state couples computational-basis index k-1 only to its mirror 2^N-k,
so the density matrix splits into n = 2^(N-1) two-dimensional blocks.  Block
k carries diagonal populations (a_k, b_k) and an anti-diagonal coherence of
magnitude r_k and phase phi_k.  On this family the genuine-multipartite
concurrence has a closed form, which is what makes X-states tractable.
"""

import json
from dataclasses import dataclass

import numpy as np

from . import qmat

TRACE_TOL = 1e-10
PSD_SLACK = 1e-12


@dataclass(frozen=True, eq=False)
class XState:
    """Block parametrization (a, b, r, phi) of an N-qubit X-state."""

    N: int
    a: np.ndarray
    b: np.ndarray
    r: np.ndarray
    phi: np.ndarray

    @property
    def n(self) -> int:
        """Number of two-dimensional blocks, 2^(N-1)."""
        return 1 << (self.N - 1)

    @property
    def dim(self) -> int:
        return 1 << self.N

    def purity(self) -> float:
        plus, minus, _ = block_eigenvalues(self)
        return float(np.sum(plus**2) + np.sum(minus**2))

    def to_json(self) -> dict:
        return {
            "N": self.N,
            "a": self.a.tolist(),
            "b": self.b.tolist(),
            "r": self.r.tolist(),
            "phi": self.phi.tolist(),
        }

    @classmethod
    def from_json(cls, obj) -> "XState":
        return new_xstate(obj["a"], obj["b"], obj["r"], obj["phi"])


def new_xstate(a, b, r, phi=None) -> XState:
    """Validate and build an X-state from its block parameters.

    Enforces unit trace (within 1e-10), nonnegative entries and the
    positive-semidefiniteness condition r_k <= sqrt(a_k b_k) per block.
    Phases are wrapped into [0, 2*pi).
    """
    a = np.asarray(a, dtype=float).copy()
    b = np.asarray(b, dtype=float).copy()
    r = np.asarray(r, dtype=float).copy()
    phi = np.zeros_like(a) if phi is None else np.asarray(phi, dtype=float).copy()
    n = a.size
    if not (b.size == r.size == phi.size == n):
        raise ValueError("a, b, r, phi must have equal length")
    if n < 2 or (n & (n - 1)) != 0:
        raise ValueError(f"block count {n} is not a power of two >= 2")
    N = n.bit_length()  # n = 2^(N-1)
    if np.any(a < -PSD_SLACK) or np.any(b < -PSD_SLACK) or np.any(r < -PSD_SLACK):
        raise ValueError("negative block entry")
    a = np.maximum(a, 0.0)
    b = np.maximum(b, 0.0)
    r = np.maximum(r, 0.0)
    total = a.sum() + b.sum()
    if abs(total - 1.0) > TRACE_TOL:
        raise ValueError(f"trace {total!r} is not 1 within {TRACE_TOL}")
    bound = np.sqrt(a * b)
    if np.any(r > bound + PSD_SLACK):
        k = int(np.argmax(r - bound))
        raise ValueError(
            f"block {k + 1} violates positivity: r={r[k]!r} exceeds sqrt(a*b)={bound[k]!r}"
        )
    phi = np.mod(phi, 2.0 * np.pi)
    return XState(N=N, a=a, b=b, r=r, phi=phi)


def to_density_matrix(x: XState):
    """Embed an X-state into the full 2^N-dimensional density matrix.

    Block k (1-based) occupies rows/columns {k-1, 2^N-k}: a_k and b_k on the
    main diagonal, r_k e^{i phi_k} on the anti-diagonal.
    """
    d = x.dim
    rho = np.zeros((d, d), dtype=complex)
    for k in range(x.n):
        lo, hi = k, d - 1 - k
        rho[lo, lo] = x.a[k]
        rho[hi, hi] = x.b[k]
        c = x.r[k] * np.exp(1j * x.phi[k])
        rho[lo, hi] = c
        rho[hi, lo] = np.conj(c)
    return rho


def block_eigenvalues(x: XState):
    """Per-block eigenvalue pairs of an X-state.

    Returns ``(plus, minus, dk)`` where block k has eigenvalues
    (a_k+b_k)/2 +/- sqrt(r_k^2 + d_k^2) and d_k = (b_k - a_k)/2.
    """
    dk = 0.5 * (x.b - x.a)
    mid = 0.5 * (x.a + x.b)
    width = np.sqrt(x.r**2 + dk**2)
    return mid + width, mid - width, dk


def gm_concurrence_x(x: XState) -> float:
    """Genuine-multipartite concurrence of an X-state (closed form).

    Evaluates 2 max{0, max_k [r_k - sum_{j != k} sqrt(a_j b_j)]}; for
    X-states the generic lower bound is saturated so this is exact.
    """
    root = np.sqrt(x.a * x.b)
    total = root.sum()
    return float(max(0.0, 2.0 * np.max(x.r - (total - root))))


def gm_lower_bound(rho, tol=1e-9) -> float:
    """Concurrence lower bound for an arbitrary N-qubit density matrix.

    Reads the main- and anti-diagonal entries in the X-state block
    parametrization and evaluates the same expression as
    :func:`gm_concurrence_x`; all other entries are ignored.  Exact for
    X-form inputs.
    """
    rho = qmat.check_density_matrix(rho, tol)
    d = rho.shape[0]
    if d < 4 or (d & (d - 1)) != 0:
        raise ValueError(f"dimension {d} is not a power of two >= 4")
    n = d // 2
    idx = np.arange(n)
    a = rho[idx, idx].real
    b = rho[d - 1 - idx, d - 1 - idx].real
    r = np.abs(rho[idx, d - 1 - idx])
    root = np.sqrt(np.maximum(a * b, 0.0))
    total = root.sum()
    return float(max(0.0, 2.0 * np.max(r - (total - root))))


def ghz_xstate(N: int) -> XState:
    """The N-qubit GHZ state in block form: a_1=b_1=r_1=1/2, rest zero."""
    n = 1 << (N - 1)
    a = np.zeros(n)
    b = np.zeros(n)
    r = np.zeros(n)
    a[0] = b[0] = r[0] = 0.5
    return new_xstate(a, b, r)


def save_xstate(path, x: XState):
    with open(path, "w") as fh:
        json.dump(x.to_json(), fh)


def load_xstate(path) -> XState:
    with open(path) as fh:
        return XState.from_json(json.load(fh))
