"""Self-contained dense semidefinite-programming solver.

Two problem forms are supported and solved through one primal-dual core:

* inequality form: minimize c'lam subject to F0 + sum_i lam_i F_i >= 0,
  which the solver treats as the dual side of the standard pair;
* standard-primal form: minimize tr(C0 X) subject to tr(A_i X) = b_i and
  X >= 0 on a product of dense PSD blocks.

The engine is an infeasible-start path-following method with Nesterov-Todd
scaling and a Mehrotra predictor-corrector step.  The Newton system is
reduced to dense Schur-complement normal equations; assembling that Schur
matrix is the hot kernel and runs either through the jit COO kernel in
:mod:`xmems._kernels` or through a dense BLAS route, whichever the size
heuristic favours.

Complex Hermitian cones are handled exclusively through the real symmetric
embedding (:func:`real_embedding`); a complex matrix of rank k embeds with
rank 2k.
"""

from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import cho_factor, cho_solve

from . import _accel, _kernels, qmat

INEQUALITY = "inequality"
STANDARD = "standard-primal"

STEP_FRACTION = 0.98
SCHUR_REGULARIZATION = 1e-12
# estimated speed ratio of BLAS flops vs the scalar jit kernel, used only to
# pick the cheaper Schur assembly route
_BLAS_RATIO = 12.0


class SdpError(RuntimeError):
    """Raised for malformed problems or unrecoverable solver failures."""


# ---------------------------------------------------------------------------
# constraint storage
# ---------------------------------------------------------------------------


class ConstraintSet:
    """m symmetric matrices stored as one packed COO list.

    Both triangles are stored explicitly so that gathers need no
    symmetrization.  Dense input matrices are thinned to their nonzero
    pattern on ingest.
    """

    def __init__(self, n, vals, rows, cols, indptr):
        self.n = int(n)
        self.vals = np.ascontiguousarray(vals, dtype=float)
        self.rows = np.ascontiguousarray(rows, dtype=np.int64)
        self.cols = np.ascontiguousarray(cols, dtype=np.int64)
        self.indptr = np.ascontiguousarray(indptr, dtype=np.int64)
        self.m = self.indptr.size - 1
        counts = np.diff(self.indptr)
        self._cid = np.repeat(np.arange(self.m), counts)
        self._lin = self.rows * self.n + self.cols

    @classmethod
    def from_matrices(cls, mats, n, tol=0.0):
        """Build from an iterable of dense arrays or scipy sparse matrices."""
        vals, rows, cols, indptr = [], [], [], [0]
        for a in mats:
            if hasattr(a, "tocoo"):  # scipy sparse
                coo = a.tocoo()
                v, r, c = coo.data, coo.row, coo.col
            else:
                a = np.asarray(a, dtype=float)
                if a.shape != (n, n):
                    raise SdpError(f"constraint shape {a.shape} does not match cone dim {n}")
                if np.abs(a - a.T).max(initial=0.0) > 1e-12 * max(1.0, np.abs(a).max(initial=0.0)):
                    raise SdpError("constraint matrix is not symmetric")
                r, c = np.nonzero(np.abs(a) > tol)
                v = a[r, c]
            vals.append(np.asarray(v, dtype=float))
            rows.append(np.asarray(r, dtype=np.int64))
            cols.append(np.asarray(c, dtype=np.int64))
            indptr.append(indptr[-1] + len(v))
        if not vals:
            raise SdpError("empty constraint set")
        return cls(
            n,
            np.concatenate(vals),
            np.concatenate(rows),
            np.concatenate(cols),
            np.asarray(indptr),
        )

    def scaled(self, factor):
        """New set with every matrix multiplied by ``factor``."""
        return ConstraintSet(self.n, self.vals * factor, self.rows, self.cols, self.indptr)

    def row_scaled(self, factors):
        """New set with matrix i multiplied by ``factors[i]``."""
        return ConstraintSet(
            self.n, self.vals * factors[self._cid], self.rows, self.cols, self.indptr
        )

    def apply(self, x):
        """Vector of tr(A_i X) for symmetric X."""
        prods = self.vals * x.reshape(-1)[self._lin]
        return np.bincount(self._cid, weights=prods, minlength=self.m)

    def adjoint(self, y):
        """Matrix sum_i y_i A_i."""
        weights = y[self._cid] * self.vals
        flat = np.bincount(self._lin, weights=weights, minlength=self.n * self.n)
        return flat.reshape(self.n, self.n)

    def dense(self, i):
        """Dense copy of constraint matrix i."""
        s, e = self.indptr[i], self.indptr[i + 1]
        out = np.zeros((self.n, self.n))
        out[self.rows[s:e], self.cols[s:e]] = self.vals[s:e]
        return out

    def norms(self):
        """Frobenius norm of each constraint matrix."""
        return np.sqrt(np.bincount(self._cid, weights=self.vals**2, minlength=self.m))

    @property
    def nnz(self):
        return self.vals.size

    # -- Schur complement assembly: M[i,j] = tr(A_i W A_j W) ----------------

    def schur(self, w, r):
        jit_cost = float(self.nnz) ** 2
        n3 = float(self.n) ** 3
        dense_cost = (2.0 * self.m * n3 + self.m**2 * self.n**2) / _BLAS_RATIO
        if _accel.use_numba() and jit_cost <= dense_cost:
            return _kernels.schur_coo(w, self.vals, self.rows, self.cols, self.indptr)
        return self._schur_dense(r)

    def _schur_dense(self, r, mem_cap=5.0e7):
        """Gram-matrix route: M = G G' with row i of G = vec(R' A_i R)."""
        n, m = self.n, self.m
        chunk = max(1, int(mem_cap / (n * n)))
        if chunk >= m:
            g = self._transformed_stack(r, 0, m)
            return g @ g.T
        out = np.empty((m, m))
        starts = list(range(0, m, chunk))
        for si in starts:
            ei = min(si + chunk, m)
            gi = self._transformed_stack(r, si, ei)
            out[si:ei, si:ei] = gi @ gi.T
            for sj in starts:
                if sj <= si:
                    continue
                ej = min(sj + chunk, m)
                gj = self._transformed_stack(r, sj, ej)
                block = gi @ gj.T
                out[si:ei, sj:ej] = block
                out[sj:ej, si:ei] = block.T
        return out

    def _transformed_stack(self, r, start, stop):
        """Rows vec(R' A_i R) for i in [start, stop)."""
        n = self.n
        out = np.empty((stop - start, n * n))
        buf = np.zeros((n, n))
        for i in range(start, stop):
            s, e = self.indptr[i], self.indptr[i + 1]
            rw, cl, vl = self.rows[s:e], self.cols[s:e], self.vals[s:e]
            if e - s < n * n // 4:
                gathered = (vl[:, None] * r[rw, :]).T @ r[cl, :]
            else:
                buf[:] = 0.0
                buf[rw, cl] = vl
                gathered = r.T @ buf @ r
            out[i - start] = (0.5 * (gathered + gathered.T)).reshape(-1)
        return out


# ---------------------------------------------------------------------------
# problem and solution containers
# ---------------------------------------------------------------------------


@dataclass(eq=False)
class SdpProblem:
    """One SDP in either inequality or standard-primal form.

    Internally the data is kept as the standard pair (C, A_i, b); for an
    inequality-form problem that pair is its Lagrangian dual, with
    C = F0, A_i = -F_i and b = -c.
    """

    form: str
    blocks: list
    cmat: np.ndarray
    cons: ConstraintSet
    rhs: np.ndarray
    meta: dict = field(default_factory=dict)

    @property
    def n(self) -> int:
        return self.cmat.shape[0]

    @property
    def m(self) -> int:
        return self.rhs.size

    # -- factories ----------------------------------------------------------

    @classmethod
    def inequality(cls, c, f0, f_mats, blocks=None, meta=None):
        """minimize c'lam  s.t.  F0 + sum_i lam_i F_i >= 0."""
        c = np.asarray(c, dtype=float)
        f0 = np.asarray(f0, dtype=float)
        n = f0.shape[0]
        cons = ConstraintSet.from_matrices(f_mats, n).scaled(-1.0)
        if cons.m != c.size:
            raise SdpError(f"{cons.m} constraint matrices for {c.size} cost entries")
        return cls(
            form=INEQUALITY,
            blocks=_check_blocks(blocks, n),
            cmat=0.5 * (f0 + f0.T),
            cons=cons,
            rhs=-c,
            meta=dict(meta or {}),
        )

    @classmethod
    def standard(cls, c0, a_mats, b, blocks=None, meta=None):
        """minimize tr(C0 X)  s.t.  tr(A_i X) = b_i, X >= 0."""
        c0 = np.asarray(c0, dtype=float)
        b = np.asarray(b, dtype=float)
        n = c0.shape[0]
        cons = ConstraintSet.from_matrices(a_mats, n)
        if cons.m != b.size:
            raise SdpError(f"{cons.m} constraint matrices for {b.size} rhs entries")
        return cls(
            form=STANDARD,
            blocks=_check_blocks(blocks, n),
            cmat=0.5 * (c0 + c0.T),
            cons=cons,
            rhs=b,
            meta=dict(meta or {}),
        )

    # -- user-facing views of the original data ------------------------------

    @property
    def c(self):
        """Inequality-form cost vector."""
        self._expect(INEQUALITY)
        return -self.rhs

    @property
    def f0(self):
        self._expect(INEQUALITY)
        return self.cmat

    def f_matrix(self, i):
        self._expect(INEQUALITY)
        return -self.cons.dense(i)

    @property
    def c0(self):
        self._expect(STANDARD)
        return self.cmat

    @property
    def b(self):
        self._expect(STANDARD)
        return self.rhs

    def a_matrix(self, i):
        self._expect(STANDARD)
        return self.cons.dense(i)

    def _expect(self, form):
        if self.form != form:
            raise SdpError(f"accessor is only valid for {form} problems")


@dataclass(eq=False)
class SdpSolution:
    """Primal/dual solution pair with the residuals backing its status."""

    primal_point: np.ndarray
    dual_point: np.ndarray
    primal_value: float
    dual_value: float
    gap: float
    status: str
    iterations: int
    slack: np.ndarray
    primal_residual: float
    dual_residual: float
    history: list


@dataclass
class FeasibilityReport:
    """Residuals of one candidate point against one problem."""

    equality_residual: float
    slack_min_eig: float
    objective: float


def _check_blocks(blocks, n):
    blocks = [int(x) for x in (blocks if blocks is not None else [n])]
    if sum(blocks) != n or any(x <= 0 for x in blocks):
        raise SdpError(f"block sizes {blocks} do not partition dimension {n}")
    return blocks


# ---------------------------------------------------------------------------
# conversions
# ---------------------------------------------------------------------------


def to_standard_primal(problem: SdpProblem) -> SdpProblem:
    """Dual of an inequality-form SDP, as a standard-primal problem.

    The result is `minimize tr(F0 Z) s.t. tr(F_i Z) = c_i, Z >= 0`; its
    optimal value is minus the inequality problem's dual optimum, recorded
    in ``meta['value_relation']``.
    """
    problem._expect(INEQUALITY)
    meta = dict(problem.meta)
    meta["converted_from"] = INEQUALITY
    meta["value_relation"] = "standard optimum == -(inequality dual optimum)"
    return SdpProblem(
        form=STANDARD,
        blocks=list(problem.blocks),
        cmat=problem.cmat.copy(),
        cons=problem.cons.scaled(-1.0),  # A_i = F_i
        rhs=-problem.rhs,  # b = c
        meta=meta,
    )


def real_embedding(h):
    """Real symmetric embedding [[Re H, -Im H], [Im H, Re H]] of Hermitian H.

    Positive semidefiniteness is preserved in both directions and every
    eigenvalue of H appears twice, so rank doubles.
    """
    h = qmat.hermitize(h)
    re, im = h.real, h.imag
    return np.block([[re, -im], [im, re]])


def complex_from_embedding(x):
    """Inverse of :func:`real_embedding`, averaging away numerical drift."""
    x = np.asarray(x, dtype=float)
    d2 = x.shape[0]
    if d2 % 2:
        raise SdpError(f"embedded dimension {d2} is odd")
    d = d2 // 2
    re = 0.5 * (x[:d, :d] + x[d:, d:])
    im = 0.5 * (x[d:, :d] - x[:d, d:])
    re = 0.5 * (re + re.T)
    im = 0.5 * (im - im.T)
    return re + 1j * im


def check_feasibility(problem: SdpProblem, point) -> FeasibilityReport:
    """Residuals of a candidate primal point.

    For an inequality problem, ``point`` is the vector lam and the report
    carries the minimum eigenvalue of the LMI slack F0 + sum lam_i F_i.
    For a standard problem, ``point`` is the matrix X.
    """
    if problem.form == INEQUALITY:
        lam = np.asarray(point, dtype=float)
        slack = problem.cmat - problem.cons.adjoint(lam)
        return FeasibilityReport(
            equality_residual=0.0,
            slack_min_eig=_min_eig_blocks(slack, problem.blocks),
            objective=float(-problem.rhs @ lam),
        )
    x = np.asarray(point)
    if np.iscomplexobj(x):
        x = real_embedding(x)
    resid = problem.cons.apply(x) - problem.rhs
    return FeasibilityReport(
        equality_residual=float(np.abs(resid).max()) if resid.size else 0.0,
        slack_min_eig=_min_eig_blocks(x, problem.blocks),
        objective=float(np.sum(problem.cmat * x)),
    )


def _block_slices(blocks):
    out = []
    start = 0
    for size in blocks:
        out.append(slice(start, start + size))
        start += size
    return out


def _min_eig_blocks(mat, blocks):
    worst = np.inf
    for sl in _block_slices(blocks):
        worst = min(worst, float(np.linalg.eigvalsh(mat[sl, sl])[0]))
    return worst


# ---------------------------------------------------------------------------
# the interior-point engine
# ---------------------------------------------------------------------------


def solve(problem: SdpProblem, feas_tol=1e-9, gap_tol=1e-9, max_iters=100) -> SdpSolution:
    """Solve an SDP to the requested feasibility and relative-gap tolerances.

    Deterministic: identical inputs and options produce identical iterates.
    Status is ``optimal`` only when primal/dual feasibility and the relative
    duality gap are all below tolerance; ``max-iterations``,
    ``infeasible-detected`` and ``numerical-failure`` report the state
    reached otherwise.
    """
    raw = _solve_core(problem.cmat, problem.cons, problem.rhs, problem.blocks,
                      feas_tol, gap_tol, max_iters)
    x, y, s = raw["x"], raw["y"], raw["s"]
    pobj, dobj = raw["pobj"], raw["dobj"]
    if problem.form == INEQUALITY:
        return SdpSolution(
            primal_point=y,
            dual_point=x,
            primal_value=-dobj,
            dual_value=-pobj,
            gap=pobj - dobj,
            status=raw["status"],
            iterations=raw["iterations"],
            slack=s,
            primal_residual=raw["reld"],
            dual_residual=raw["relp"],
            history=raw["history"],
        )
    return SdpSolution(
        primal_point=x,
        dual_point=y,
        primal_value=pobj,
        dual_value=dobj,
        gap=pobj - dobj,
        status=raw["status"],
        iterations=raw["iterations"],
        slack=s,
        primal_residual=raw["relp"],
        dual_residual=raw["reld"],
        history=raw["history"],
    )


def _solve_core(cmat, cons, b, blocks, feas_tol, gap_tol, max_iters):
    n = cmat.shape[0]
    m = b.size
    slices = _block_slices(blocks)
    eye = np.eye(n)

    # data equilibration: unit-norm constraint matrices, then a global
    # rescale of b and C.  All residuals are reported in original units.
    dvec = np.maximum(cons.norms(), 1e-12)
    cons_s = cons.row_scaled(1.0 / dvec)
    beta = 1.0 / max(1.0, np.linalg.norm(b / dvec))
    gamma = 1.0 / max(1.0, np.linalg.norm(cmat))
    b_s = beta * (b / dvec)
    c_s = gamma * cmat

    a_norms = cons_s.norms()
    # identity-multiple start scaled by the problem data norms
    scale_p = max(10.0, np.sqrt(n), np.sqrt(n) * np.max((1.0 + np.abs(b_s)) / (1.0 + a_norms)))
    scale_d = max(10.0, np.sqrt(n), (1.0 + max(np.linalg.norm(c_s), a_norms.max())) / np.sqrt(n))
    x = scale_p * eye.copy()
    y = np.zeros(m)
    s = scale_d * eye.copy()

    bnorm = 1.0 + np.linalg.norm(b)
    cnorm = 1.0 + np.linalg.norm(cmat)
    history = []
    status = "max-iterations"
    iterations = 0
    stalls = 0
    pobj = dobj = relp = reld = np.nan

    for iterations in range(max_iters + 1):
        rp = b_s - cons_s.apply(x)
        rd = c_s - cons_s.adjoint(y) - s
        mu = float(np.sum(x * s)) / n
        # original-unit objectives and residuals
        pobj = float(np.sum(c_s * x)) / (gamma * beta)
        dobj = float(b_s @ y) / (gamma * beta)
        relp = np.linalg.norm(rp * dvec) / (beta * bnorm)
        reld = np.linalg.norm(rd) / (gamma * cnorm)
        relgap = abs(pobj - dobj) / (1.0 + abs(pobj) + abs(dobj))
        # weak-duality slack bound: pobj - dobj >= -(|<Rd,X>| + |y.rp|)
        duality_slack = float(np.abs(np.sum(rd * x)) + np.abs(y @ rp)) / (gamma * beta)
        history.append(
            {
                "mu": mu,
                "pobj": pobj,
                "dobj": dobj,
                "relp": relp,
                "reld": reld,
                "relgap": relgap,
                "duality_slack": duality_slack,
            }
        )
        if relp <= feas_tol and reld <= feas_tol and relgap <= gap_tol:
            status = "optimal"
            break
        if iterations == max_iters:
            break

        detected = _detect_infeasible(cons_s, b_s, c_s, x, y, blocks, pobj)
        if detected:
            status = detected
            break

        try:
            r_mat, rinv_mat, lam = _nt_scaling(x, s, slices, n)
        except np.linalg.LinAlgError:
            status = "numerical-failure"
            break
        w = r_mat @ r_mat.T

        schur = cons_s.schur(w, r_mat)
        reg = SCHUR_REGULARIZATION * max(1.0, float(np.max(np.diag(schur))))
        schur[np.diag_indices_from(schur)] += reg
        try:
            factor = cho_factor(schur, lower=True, check_finite=False)
        except np.linalg.LinAlgError:
            schur[np.diag_indices_from(schur)] += 1e6 * reg
            try:
                factor = cho_factor(schur, lower=True, check_finite=False)
            except np.linalg.LinAlgError:
                status = "numerical-failure"
                break

        def schur_solve(rhs):
            dy = cho_solve(factor, rhs, check_finite=False)
            # one or two rounds of iterative refinement keep the normal
            # equations accurate when the scaling matrix gets ill conditioned
            for _ in range(2):
                resid = rhs - schur @ dy
                if np.linalg.norm(resid) <= 1e-14 * max(1.0, np.linalg.norm(rhs)):
                    break
                dy = dy + cho_solve(factor, resid, check_finite=False)
            return dy

        wrdw = w @ rd @ w
        a_of_wrdw = cons_s.apply(wrdw)

        def newton(rc_mat):
            rhs = rp - cons_s.apply(rc_mat) + a_of_wrdw
            dy = schur_solve(rhs)
            ds = rd - cons_s.adjoint(dy)
            dx = rc_mat - w @ ds @ w
            return 0.5 * (dx + dx.T), dy, 0.5 * (ds + ds.T)

        # predictor (affine scaling) step
        dx_a, dy_a, ds_a = newton(-x)
        dxh_a = rinv_mat @ dx_a @ rinv_mat.T
        dsh_a = r_mat.T @ ds_a @ r_mat
        ap_a = _max_step(lam, dxh_a, slices)
        ad_a = _max_step(lam, dsh_a, slices)
        mu_aff = _inner_after_step(lam, dxh_a, dsh_a, min(1.0, ap_a), min(1.0, ad_a)) / n
        sigma = min(1.0, max(1e-8, (max(mu_aff, 0.0) / mu) ** 3))

        # corrector with the second-order term, solved in the scaled space
        cross = dxh_a @ dsh_a
        rhs_v = sigma * mu * eye - np.diag(lam**2) - 0.5 * (cross + cross.T)
        t_mat = 2.0 * rhs_v / np.add.outer(lam, lam)
        rc_mat = r_mat @ t_mat @ r_mat.T
        dx, dy, ds = newton(rc_mat)
        dxh = rinv_mat @ dx @ rinv_mat.T
        dsh = r_mat.T @ ds @ r_mat
        ap = min(1.0, STEP_FRACTION * _max_step(lam, dxh, slices))
        ad = min(1.0, STEP_FRACTION * _max_step(lam, dsh, slices))

        if min(ap, ad) < 1e-8:
            stalls += 1
            if stalls >= 3:
                status = "numerical-failure"
                break
        else:
            stalls = 0

        x = x + ap * dx
        y = y + ad * dy
        s = s + ad * ds
        x = 0.5 * (x + x.T)
        s = 0.5 * (s + s.T)

    return {
        "x": x / beta,
        "y": (dvec * y) / gamma,
        "s": s / gamma,
        "pobj": pobj,
        "dobj": dobj,
        "relp": relp,
        "reld": reld,
        "status": status,
        "iterations": iterations,
        "history": history,
    }


def _nt_scaling(x, s, slices, n):
    """Nesterov-Todd scaling point per block.

    Returns block-diagonal R and R^{-1} with W = R R', together with the
    scaled-space spectrum lam satisfying R^{-1} X R^{-T} = R' S R = diag(lam).
    """
    r_mat = np.zeros((n, n))
    rinv_mat = np.zeros((n, n))
    lam = np.empty(n)
    for sl in slices:
        lx = np.linalg.cholesky(x[sl, sl])
        ls = np.linalg.cholesky(s[sl, sl])
        u, sig, vt = np.linalg.svd(ls.T @ lx)
        if sig.min() <= 0.0:
            raise np.linalg.LinAlgError("NT scaling broke down")
        root = np.sqrt(sig)
        r_mat[sl, sl] = lx @ (vt.T / root)
        rinv_mat[sl, sl] = ((u / root).T @ ls.T)
        lam[sl] = sig
    return r_mat, rinv_mat, lam


def _max_step(lam, dh, slices):
    """Largest step with diag(lam) + alpha*dh staying PSD (per block)."""
    root = np.sqrt(lam)
    worst = 0.0
    for sl in slices:
        scaled = dh[sl, sl] / np.outer(root[sl], root[sl])
        low = float(np.linalg.eigvalsh(scaled)[0])
        worst = min(worst, low)
    if worst >= -1e-14:
        return np.inf
    return -1.0 / worst


def _inner_after_step(lam, dxh, dsh, ap, ad):
    """<X + ap dX, S + ad dS> evaluated in the scaled space."""
    base = float(np.sum(lam**2))
    tx = float(np.sum(np.diag(dxh) * lam))
    ts = float(np.sum(np.diag(dsh) * lam))
    cross = float(np.sum(dxh * dsh))
    return base + ap * tx + ad * ts + ap * ad * cross


def _detect_infeasible(cons, b, cmat, x, y, blocks, pobj):
    """Certificate-style divergence heuristics; returns a status or None."""
    ynorm = np.linalg.norm(y)
    if ynorm > 1e7 * (1.0 + np.linalg.norm(b)):
        yn = y / ynorm
        ray_max_eig = -_min_eig_blocks(-cons.adjoint(yn), blocks)
        if b @ yn > 1e-9 and ray_max_eig <= 1e-9:
            return "infeasible-detected"
    xtr = float(np.trace(x))
    if xtr > 1e9 * x.shape[0]:
        xn = x / xtr
        if float(np.sum(cmat * xn)) < -1e-9 and np.linalg.norm(cons.apply(xn)) <= 1e-9:
            return "infeasible-detected"
    return None
