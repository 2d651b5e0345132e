"""Self-contained dense primal-dual interior-point solver for block SDPs.

Problem form:

    minimize    <C, X> + cf' u
    subject to  A(X) + F u = b,    X in a product of PSD cones,   u free

with dual

    maximize    b' y
    subject to  A'(y) + S = C,  S PSD,   F' y = cf.

The solver embeds the pair in a homogeneous self-dual model with variables
(X, u, y, S, tau, kappa), so genuinely infeasible instances are detected
through tau -> 0 with an explicit improving ray instead of by divergence
alone.  Search directions use Nesterov-Todd scaling with a Mehrotra
predictor-corrector; the Schur complement is assembled blockwise (every
equality row touches only the Gram blocks of its own constraint, so assembly
cost stays near sum_b m_b^2 t_b rather than m^2 t).  Free columns are handled
by a secondary Schur complement against the factorized PSD part.

Everything is deterministic for a fixed SolverConfig; no randomness is used.
"""

from __future__ import annotations

import functools
import logging
import math
from dataclasses import dataclass

import numpy as np
import scipy.linalg as sla

log = logging.getLogger(__name__)

SQRT2 = math.sqrt(2.0)

STATUS_OPTIMAL = "Optimal"
STATUS_PRIMAL_INFEASIBLE = "PrimalInfeasible"
STATUS_DUAL_INFEASIBLE = "DualInfeasible"
STATUS_ITER_LIMIT = "IterLimit"
STATUS_NUMERICAL = "NumericalFailure"


@dataclass(frozen=True)
class SolverConfig:
    feas_tol: float = 1e-8
    gap_tol: float = 1e-8
    max_iter: int = 200
    step_fraction: float = 0.98
    divergence_ratio: float = 1e8
    presolve_pivot: float = 1e-10
    equilibrate: bool = True

    def __post_init__(self) -> None:
        if min(self.feas_tol, self.gap_tol, self.step_fraction,
               self.divergence_ratio, self.presolve_pivot) <= 0:
            raise ValueError("all solver tolerances must be positive")


@dataclass(frozen=True)
class SdpInstance:
    """Block-diagonal PSD variables under affine equality constraints.

    `a_entries` rows are (constraint_row, block, i, j, value) with i <= j and
    symmetric meaning (the (j,i) mirror is implied, not stored).  `f_entries`
    rows are (constraint_row, free_index, value).  The objective is
    sum_blocks <C_b, X_b> + c_free' u; feasibility problems use a zero or
    trace-regularization objective.
    """

    block_dims: tuple[int, ...]
    free_names: tuple[str, ...]
    a_entries: tuple[tuple[int, int, int, int, float], ...]
    f_entries: tuple[tuple[int, int, float], ...]
    b: tuple[float, ...]
    c_entries: tuple[tuple[int, int, int, float], ...] = ()
    c_free: tuple[float, ...] = ()
    row_labels: tuple[str, ...] = ()

    @property
    def n_rows(self) -> int:
        return len(self.b)

    @property
    def n_free(self) -> int:
        return len(self.free_names)

    def validate_shapes(self) -> None:
        m = self.n_rows
        for r, bl, i, j, _ in self.a_entries:
            n = self.block_dims[bl]
            if not (0 <= r < m and 0 <= i <= j < n):
                raise ValueError(f"bad A entry ({r},{bl},{i},{j})")
        for r, k, _ in self.f_entries:
            if not (0 <= r < m and 0 <= k < self.n_free):
                raise ValueError(f"bad F entry ({r},{k})")


@dataclass
class Residuals:
    primal: float
    dual: float
    gap: float

    def as_dict(self) -> dict[str, float]:
        return {"primal": self.primal, "dual": self.dual, "gap": self.gap}


@dataclass
class SdpSolution:
    status: str
    X: list[np.ndarray]
    y: np.ndarray
    S: list[np.ndarray]
    u: np.ndarray
    residuals: Residuals
    iterations: int
    objective: float = 0.0
    ray: np.ndarray | None = None
    dropped_rows: tuple[int, ...] = ()
    message: str = ""

    @property
    def optimal(self) -> bool:
        return self.status == STATUS_OPTIMAL


# ---------------------------------------------------------------------------
# svec packing helpers


@functools.lru_cache(maxsize=None)
def _pack_index(n: int) -> tuple[np.ndarray, np.ndarray]:
    iu = np.triu_indices(n)
    return iu[0], iu[1]


def svec(M: np.ndarray) -> np.ndarray:
    """Pack a symmetric matrix into a vector with off-diagonals scaled by
    sqrt(2), so that <A, B> equals svec(A) . svec(B)."""
    n = M.shape[0]
    r, c = _pack_index(n)
    v = M[r, c].astype(float).copy()
    v[r != c] *= SQRT2
    return v


def smat(v: np.ndarray, n: int) -> np.ndarray:
    r, c = _pack_index(n)
    M = np.zeros((n, n))
    w = np.asarray(v, dtype=float).copy()
    off = r != c
    w[off] /= SQRT2
    M[r, c] = w
    M[c, r] = w
    return M


class _BlockData:
    """Rows of the constraint map that touch one PSD block, svec-packed."""

    def __init__(self, dim: int, rows: np.ndarray, mat: np.ndarray):
        self.dim = dim
        self.rows = rows          # global row indices, sorted ascending
        self.mat = mat            # (len(rows), dim*(dim+1)//2)


class _Problem:
    """Dense internal form of an SdpInstance, optionally row-equilibrated."""

    def __init__(self, inst: SdpInstance, config: SolverConfig):
        inst.validate_shapes()
        self.dims = list(inst.block_dims)
        self.m = inst.n_rows
        self.nf = inst.n_free
        self.nu = sum(self.dims)  # total cone order

        self.blocks: list[_BlockData] = []
        for bl, n in enumerate(self.dims):
            ent = [(r, i, j, v) for (r, b2, i, j, v) in inst.a_entries if b2 == bl]
            rows = np.array(sorted({r for r, *_ in ent}), dtype=int)
            t = n * (n + 1) // 2
            mat = np.zeros((len(rows), t))
            pos = {int(r): k for k, r in enumerate(rows)}
            pr, pc = _pack_index(n)
            packpos = {(int(a), int(c)): k for k, (a, c) in enumerate(zip(pr, pc))}
            for r, i, j, v in ent:
                mat[pos[r], packpos[(i, j)]] += v * (SQRT2 if i != j else 1.0)
            self.blocks.append(_BlockData(n, rows, mat))

        self.F = np.zeros((self.m, self.nf))
        for r, k, v in inst.f_entries:
            self.F[r, k] += v
        self.b = np.array(inst.b, dtype=float)
        self.cf = (np.array(inst.c_free, dtype=float)
                   if inst.c_free else np.zeros(self.nf))
        self.C = [np.zeros((n, n)) for n in self.dims]
        for bl, i, j, v in inst.c_entries:
            self.C[bl][i, j] += v
            if i != j:
                self.C[bl][j, i] += v

        # row equilibration to unit max-norm; undone when reporting y
        self.row_scale = np.ones(self.m)
        if config.equilibrate and self.m:
            mx = np.zeros(self.m)
            for bd in self.blocks:
                if len(bd.rows):
                    np.maximum.at(mx, bd.rows, np.abs(bd.mat).max(axis=1))
            if self.nf:
                mx = np.maximum(mx, np.abs(self.F).max(axis=1))
            mx = np.maximum(mx, np.abs(self.b))
            mx[mx == 0] = 1.0
            self.row_scale = 1.0 / mx
            for bd in self.blocks:
                if len(bd.rows):
                    bd.mat *= self.row_scale[bd.rows, None]
            self.F *= self.row_scale[:, None]
            self.b = self.b * self.row_scale

    # ---- linear maps ----

    def apply_A(self, X: list[np.ndarray]) -> np.ndarray:
        out = np.zeros(self.m)
        for bd, Xb in zip(self.blocks, X):
            if len(bd.rows):
                out[bd.rows] += bd.mat @ svec(Xb)
        return out

    def apply_AT(self, y: np.ndarray) -> list[np.ndarray]:
        out = []
        for bd in self.blocks:
            if len(bd.rows):
                out.append(smat(bd.mat.T @ y[bd.rows], bd.dim))
            else:
                out.append(np.zeros((bd.dim, bd.dim)))
        return out

    def inner_C(self, X: list[np.ndarray]) -> float:
        return float(sum(np.tensordot(Cb, Xb) for Cb, Xb in zip(self.C, X)))


def _drop_rows_dense(problem: _Problem, keep: np.ndarray) -> None:
    remap = -np.ones(problem.m, dtype=int)
    remap[keep] = np.arange(len(keep))
    for bd in problem.blocks:
        mask = remap[bd.rows] >= 0
        bd.rows = remap[bd.rows[mask]]
        bd.mat = bd.mat[mask]
    problem.F = problem.F[keep]
    problem.b = problem.b[keep]
    problem.row_scale = problem.row_scale[keep]
    problem.m = len(keep)


def presolve(problem: _Problem, pivot: float) -> tuple[np.ndarray, bool]:
    """Detect numerically dependent equality rows.

    Returns (kept row indices, consistent).  When a dependent row's right-hand
    side disagrees with the rows it depends on, the instance is primal
    infeasible by linear algebra alone and `consistent` comes back False.
    """
    m = problem.m
    if m == 0:
        return np.arange(0), True
    cols = sum(bd.mat.shape[1] for bd in problem.blocks) + problem.nf
    At = np.zeros((cols, m))
    ofs = 0
    for bd in problem.blocks:
        t = bd.mat.shape[1]
        if len(bd.rows):
            At[ofs:ofs + t, bd.rows] = bd.mat.T
        ofs += t
    if problem.nf:
        At[ofs:, :] = problem.F.T

    # rank-revealing QR on the stacked coefficient matrix when affordable,
    # otherwise a pivoted Cholesky of the row Gram matrix (same rank decision)
    if cols * m * m <= 4e10:
        _, R, perm = sla.qr(At, mode="economic", pivoting=True)
        diag = np.abs(np.diag(R))
        scale = diag[0] if diag.size and diag[0] > 0 else 1.0
        rank = int(np.sum(diag > pivot * scale))
        keep = np.sort(perm[:rank])
    else:
        G = At.T @ At
        tol = (pivot ** 2) * max(float(np.max(np.diag(G))), 1.0)
        _, piv, rank, _ = sla.lapack.dpstrf(G, tol=tol, lower=1)
        keep = np.sort(piv[:rank] - 1)

    if len(keep) == m:
        return np.arange(m), True

    dropped = np.setdiff1d(np.arange(m), keep)
    Akeep = At[:, keep]
    ok = True
    for r in dropped:
        coeffs, *_ = np.linalg.lstsq(Akeep, At[:, r], rcond=None)
        pred_b = float(coeffs @ problem.b[keep])
        if abs(pred_b - problem.b[r]) > 1e-7 * (1.0 + abs(problem.b[r])):
            ok = False
            break
    return keep, ok


# ---------------------------------------------------------------------------


def _nt_scaling(X: np.ndarray, S: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Return (G, Ginv, lam) with G' S G = Ginv X Ginv' = diag(lam)."""
    ws, Qs = np.linalg.eigh(S)
    ws = np.clip(ws, 1e-300, None)
    Ls = Qs * np.sqrt(ws)              # S = Ls Ls'
    T = Ls.T @ X @ Ls
    T = 0.5 * (T + T.T)
    lam2, U = np.linalg.eigh(T)
    lam2 = np.clip(lam2, 1e-300, None)
    lam = np.sqrt(lam2)
    Lsinv = Qs / np.sqrt(ws)           # inverse transpose of Ls
    G = (Lsinv @ U) * np.sqrt(lam)
    Ginv = ((Ls @ U) / np.sqrt(lam)).T
    return G, Ginv, lam


def _lyapunov_rc(G: np.ndarray, lam: np.ndarray, sigma_mu: float,
                 M2: np.ndarray | None) -> np.ndarray:
    """Solve the scaled centrality equation and map back to original space.

    In scaled coordinates both cone variables equal diag(lam); the linearized
    target 0.5 (Lam D + D Lam) = sigma mu I - Lam^2 - sym(M2) has closed-form
    solution D_ij = 2 rhs_ij / (lam_i + lam_j).
    """
    n = len(lam)
    rhs = -np.diag(lam * lam)
    if sigma_mu:
        rhs = rhs + sigma_mu * np.eye(n)
    if M2 is not None:
        rhs = rhs - 0.5 * (M2 + M2.T)
    D = 2.0 * rhs / (lam[:, None] + lam[None, :])
    return G @ D @ G.T


def _max_psd_step(M: np.ndarray, dM: np.ndarray) -> float:
    """Largest t with M + t dM PSD, for M positive definite."""
    try:
        L = np.linalg.cholesky(M)
    except np.linalg.LinAlgError:
        return 0.0
    Y = sla.solve_triangular(L, dM, lower=True)
    Y = sla.solve_triangular(L, Y.T, lower=True)
    w = np.linalg.eigvalsh(0.5 * (Y + Y.T))
    wmin = float(w.min()) if w.size else 0.0
    if wmin >= 0:
        return np.inf
    return -1.0 / wmin


class _KKT:
    """Factorization of [[M, F], [F', 0]] with M = A (W kron W) A' (+ reg).

    Rows touching only free columns leave an exactly-zero row in M, so the
    factorized system is the regularized one; iterative refinement against
    the raw matrix recovers full accuracy for those saddle solves.
    """

    def __init__(self, problem: _Problem, W: list[np.ndarray]):
        m, nf = problem.m, problem.nf
        M = np.zeros((m, m))
        for bd, Wb in zip(problem.blocks, W):
            if not len(bd.rows):
                continue
            n = bd.dim
            mats = np.array([smat(row, n) for row in bd.mat])
            WAW = np.einsum("ij,rjk,kl->ril", Wb, mats, Wb, optimize=True)
            packed = np.array([svec(Mt) for Mt in WAW])
            M[np.ix_(bd.rows, bd.rows)] += packed @ bd.mat.T
        self.problem = problem
        self.M = M
        scale = max(np.trace(M) / max(m, 1), 1e-100)
        self.L = None
        for bump in (1e-13, 1e-10, 1e-7):
            try:
                self.L = np.linalg.cholesky(M + bump * scale * np.eye(m))
                break
            except np.linalg.LinAlgError:
                continue
        if self.L is None:
            raise FloatingPointError("Schur complement factorization failed")
        if nf:
            MinvF = self._solve_M(problem.F)
            Sf = problem.F.T @ MinvF
            sf_scale = max(np.trace(Sf) / max(nf, 1), 1e-100)
            try:
                self.Lf = np.linalg.cholesky(Sf + 1e-13 * sf_scale * np.eye(nf))
            except np.linalg.LinAlgError:
                self.Lf = np.linalg.cholesky(Sf + 1e-8 * sf_scale * np.eye(nf))
            self.MinvF = MinvF
        else:
            self.Lf = None
            self.MinvF = np.zeros((m, 0))

    def _solve_M(self, rhs: np.ndarray) -> np.ndarray:
        z = sla.solve_triangular(self.L, rhs, lower=True)
        return sla.solve_triangular(self.L.T, z, lower=False)

    def _solve_once(self, r_y: np.ndarray, r_u: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        w = self._solve_M(r_y)
        if self.Lf is None:
            return w, np.zeros(0)
        rhs_u = self.problem.F.T @ w - r_u
        z = sla.solve_triangular(self.Lf, rhs_u, lower=True)
        du = sla.solve_triangular(self.Lf.T, z, lower=False)
        dy = w - self.MinvF @ du
        return dy, du

    def solve(self, r_y: np.ndarray, r_u: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """Solve M dy + F du = r_y together with F' dy = r_u, refined against
        the unregularized matrix."""
        F = self.problem.F
        dy, du = self._solve_once(r_y, r_u)
        for _ in range(2):
            res_y = r_y - (self.M @ dy + F @ du)
            res_u = r_u - F.T @ dy if du.size else np.zeros(0)
            cy, cu = self._solve_once(res_y, res_u)
            dy = dy + cy
            du = du + cu
        return dy, du


def solve(instance: SdpInstance, config: SolverConfig | None = None) -> SdpSolution:
    """Run the interior-point iteration on `instance`."""
    cfg = config or SolverConfig()
    problem = _Problem(instance, cfg)
    m_orig = instance.n_rows

    keep, consistent = presolve(problem, cfg.presolve_pivot)
    dropped = tuple(int(r) for r in np.setdiff1d(np.arange(m_orig), keep))
    if dropped:
        log.info("presolve removed %d dependent rows", len(dropped))
        _drop_rows_dense(problem, keep)
    if not consistent:
        empty = [np.zeros((n, n)) for n in problem.dims]
        return SdpSolution(
            status=STATUS_PRIMAL_INFEASIBLE,
            X=empty, y=np.zeros(m_orig), S=empty, u=np.zeros(problem.nf),
            residuals=Residuals(math.inf, math.inf, math.inf), iterations=0,
            dropped_rows=dropped,
            message="inconsistent dependent equality rows detected in presolve")

    m, nf, dims = problem.m, problem.nf, problem.dims
    nu = max(problem.nu, 1)

    X = [np.eye(n) for n in dims]
    S = [np.eye(n) for n in dims]
    y = np.zeros(m)
    u = np.zeros(nf)
    tau, kappa = 1.0, 1.0

    norm_b = 1.0 + (float(np.linalg.norm(problem.b, np.inf)) if m else 0.0)
    norm_c = 1.0
    for Cb in problem.C:
        if Cb.size:
            norm_c = max(norm_c, 1.0 + float(np.abs(Cb).max()))
    if nf:
        norm_c = max(norm_c, 1.0 + float(np.abs(problem.cf).max()))

    def dehom_residuals() -> Residuals:
        Xt = [Xb / tau for Xb in X]
        ut = u / tau
        yt = y / tau
        rp = problem.apply_A(Xt) + problem.F @ ut - problem.b
        ATy = problem.apply_AT(yt)
        rd = 0.0
        for i in range(len(dims)):
            if dims[i]:
                rd = max(rd, float(np.abs(ATy[i] + S[i] / tau - problem.C[i]).max()))
        if nf:
            rd = max(rd, float(np.abs(problem.F.T @ yt - problem.cf).max(initial=0.0)))
        pobj = problem.inner_C(Xt) + float(problem.cf @ ut)
        dobj = float(problem.b @ yt)
        gap = abs(pobj - dobj) / (1.0 + abs(dobj))
        pres = float(np.linalg.norm(rp, np.inf)) / norm_b if m else 0.0
        return Residuals(pres, rd / norm_c, gap)

    best: tuple | None = None
    mu0 = (sum(float(np.trace(Xb @ Sb)) for Xb, Sb in zip(X, S)) + tau * kappa) / (nu + 1)
    stall = 0
    status = STATUS_ITER_LIMIT
    message = ""
    it = 0

    for it in range(1, cfg.max_iter + 1):
        mu = (sum(float(np.trace(Xb @ Sb)) for Xb, Sb in zip(X, S)) + tau * kappa) / (nu + 1)
        if not (np.isfinite(mu) and np.isfinite(tau) and np.isfinite(kappa)
                and np.all(np.isfinite(y))) or abs(mu) > 1e100:
            status = STATUS_NUMERICAL
            message = "iterate diverged"
            break

        res = dehom_residuals()
        if best is None or max(res.primal, res.dual, res.gap) < best[0]:
            best = (max(res.primal, res.dual, res.gap),
                    [Xb.copy() for Xb in X], y.copy(), [Sb.copy() for Sb in S],
                    u.copy(), tau, res)
        if res.primal <= cfg.feas_tol and res.dual <= cfg.feas_tol and res.gap <= cfg.gap_tol:
            status = STATUS_OPTIMAL
            break

        # infeasibility certificates from the homogeneous iterate; only armed
        # once kappa dominates tau, so near-optimal feasible problems with a
        # tiny positive objective cannot trip them
        by = float(problem.b @ y)
        if by > 0 and kappa > tau:
            ray_res = 0.0
            for ATyb, Sb in zip(problem.apply_AT(y), S):
                if ATyb.size:
                    ray_res = max(ray_res, float(np.abs(ATyb + Sb).max()))
            if nf:
                ray_res = max(ray_res, float(np.abs(problem.F.T @ y).max(initial=0.0)))
            if ray_res <= 1e-9 * by or (kappa > cfg.divergence_ratio * tau
                                        and ray_res <= 1e-6 * by):
                status = STATUS_PRIMAL_INFEASIBLE
                message = "dual improving ray found"
                break
        cx = problem.inner_C(X) + float(problem.cf @ u)
        if cx < 0 and kappa > tau:
            ray_p = float(np.linalg.norm(problem.apply_A(X) + problem.F @ u, np.inf))
            if ray_p <= 1e-9 * (-cx) or (kappa > cfg.divergence_ratio * tau
                                         and ray_p <= 1e-6 * (-cx)):
                status = STATUS_DUAL_INFEASIBLE
                message = "primal improving ray found"
                break
        if tau < 1e-14 or mu < 1e-18 * mu0:
            status = STATUS_NUMERICAL
            message = "homogeneous model collapsed without a clean certificate"
            break

        try:
            nts = [_nt_scaling(Xb, Sb) for Xb, Sb in zip(X, S)]
            W = [G @ G.T for G, _, _ in nts]
            kkt = _KKT(problem, W)
        except (FloatingPointError, ValueError, np.linalg.LinAlgError):
            status = STATUS_NUMERICAL
            message = "KKT factorization breakdown"
            break

        rP = problem.apply_A(X) + problem.F @ u - problem.b * tau
        ATy = problem.apply_AT(y)
        rD = [ATy[i] + S[i] - problem.C[i] * tau for i in range(len(dims))]
        rF = problem.F.T @ y - problem.cf * tau if nf else np.zeros(0)
        rG = problem.inner_C(X) + float(problem.cf @ u) - float(problem.b @ y) + kappa

        WCW = [Wb @ Cb @ Wb for Wb, Cb in zip(W, problem.C)]
        h = problem.apply_A(WCW)
        d_coef = float(sum(np.tensordot(WCWb, Cb)
                           for WCWb, Cb in zip(WCW, problem.C))) + kappa / tau
        bh_plus = problem.b + h
        bh_minus = problem.b - h
        WrDW = [Wb @ rDb @ Wb for Wb, rDb in zip(W, rD)]
        A_WrDW = problem.apply_A(WrDW)
        wcw_rd = float(sum(np.tensordot(WCWb, rDb) for WCWb, rDb in zip(WCW, rD)))
        z1y, z1u = kkt.solve(bh_plus, problem.cf)
        denom = d_coef + float(bh_minus @ z1y) - float(problem.cf @ z1u)

        def reduced_solve(Rc: list[np.ndarray], rctau: float):
            r1 = -rP - problem.apply_A(Rc) - A_WrDW
            r3 = rG + problem.inner_C(Rc) + wcw_rd + rctau / tau
            z2y, z2u = kkt.solve(r1, -rF)
            if abs(denom) < 1e-300:
                raise FloatingPointError("singular tau pivot")
            dtau = (r3 - float(bh_minus @ z2y) + float(problem.cf @ z2u)) / denom
            dy = z2y + dtau * z1y
            du = z2u + dtau * z1u
            ATdy = problem.apply_AT(dy)
            dS = [problem.C[i] * dtau - ATdy[i] - rD[i] for i in range(len(dims))]
            dX = [Rc[i] - W[i] @ dS[i] @ W[i] for i in range(len(dims))]
            dX = [0.5 * (Mb + Mb.T) for Mb in dX]
            dS = [0.5 * (Mb + Mb.T) for Mb in dS]
            dkappa = (rctau - kappa * dtau) / tau
            if not (np.isfinite(dtau) and np.isfinite(dkappa)
                    and np.all(np.isfinite(dy))
                    and all(np.all(np.isfinite(Mb)) for Mb in dX)
                    and all(np.all(np.isfinite(Mb)) for Mb in dS)):
                raise FloatingPointError("non-finite search direction")
            return dy, du, dtau, dX, dS, dkappa

        def step_limit(dX, dS, dtau, dkappa) -> float:
            a = 1.0
            for Xb, dXb in zip(X, dX):
                a = min(a, _max_psd_step(Xb, dXb))
            for Sb, dSb in zip(S, dS):
                a = min(a, _max_psd_step(Sb, dSb))
            if dtau < 0:
                a = min(a, -tau / dtau)
            if dkappa < 0:
                a = min(a, -kappa / dkappa)
            return a

        try:
            # predictor (affine scaling direction)
            dy_a, du_a, dtau_a, dX_a, dS_a, dkap_a = reduced_solve(
                [-Xb for Xb in X], -tau * kappa)
            alpha_aff = min(1.0, cfg.step_fraction * step_limit(dX_a, dS_a, dtau_a, dkap_a))
            gap_aff = (sum(float(np.trace((Xb + alpha_aff * dXb) @ (Sb + alpha_aff * dSb)))
                           for Xb, dXb, Sb, dSb in zip(X, dX_a, S, dS_a))
                       + (tau + alpha_aff * dtau_a) * (kappa + alpha_aff * dkap_a))
            sigma = min(1.0, max(gap_aff / ((nu + 1) * mu), 0.0) ** 3)

            # corrector in the scaled space
            Rc = []
            for (G, Ginv, lam), dXb, dSb in zip(nts, dX_a, dS_a):
                dXh = Ginv @ dXb @ Ginv.T
                dSh = G.T @ dSb @ G
                Rc.append(_lyapunov_rc(G, lam, sigma * mu, dXh @ dSh))
            rctau = sigma * mu - tau * kappa - dtau_a * dkap_a
            dy, du, dtau, dX, dS, dkap = reduced_solve(Rc, rctau)
            alpha = min(1.0, cfg.step_fraction * step_limit(dX, dS, dtau, dkap))
            if alpha < 0.1 * alpha_aff:
                # corrector hurt more than it helped; use pure centering
                Rc = [_lyapunov_rc(G, lam, sigma * mu, None) for (G, _, lam) in nts]
                dy, du, dtau, dX, dS, dkap = reduced_solve(Rc, sigma * mu - tau * kappa)
                alpha = min(1.0, cfg.step_fraction * step_limit(dX, dS, dtau, dkap))
        except (FloatingPointError, ValueError, np.linalg.LinAlgError):
            status = STATUS_NUMERICAL
            message = "direction computation failed"
            break

        # safeguarded step: keep total complementarity from growing over 10%
        for _ in range(30):
            gap_new = (sum(float(np.trace((Xb + alpha * dXb) @ (Sb + alpha * dSb)))
                           for Xb, dXb, Sb, dSb in zip(X, dX, S, dS))
                       + (tau + alpha * dtau) * (kappa + alpha * dkap))
            if gap_new <= 1.1 * (nu + 1) * mu or alpha < 1e-10:
                break
            alpha *= 0.5

        if alpha < 1e-10:
            stall += 1
            if stall >= 3:
                status = STATUS_NUMERICAL
                message = "step length collapsed"
                break
        else:
            stall = 0

        X = [Xb + alpha * dXb for Xb, dXb in zip(X, dX)]
        S = [Sb + alpha * dSb for Sb, dSb in zip(S, dS)]
        y = y + alpha * dy
        u = u + alpha * du
        tau += alpha * dtau
        kappa += alpha * dkap

    # assemble the reported solution
    ray = None
    if status == STATUS_OPTIMAL:
        Xout = [Xb / tau for Xb in X]
        Sout = [Sb / tau for Sb in S]
        yout = y / tau
        uout = u / tau
        res = dehom_residuals()
        pobj = problem.inner_C(Xout) + float(problem.cf @ uout)
    elif status in (STATUS_PRIMAL_INFEASIBLE, STATUS_DUAL_INFEASIBLE):
        scale = float(problem.b @ y)
        if status == STATUS_PRIMAL_INFEASIBLE and scale > 0:
            yout = y / scale
            Sout = [Sb / scale for Sb in S]
        else:
            yout = y.copy()
            Sout = [Sb.copy() for Sb in S]
        Xout = [Xb.copy() for Xb in X]
        uout = u.copy()
        res = Residuals(math.inf, math.inf, math.inf)
        pobj = math.nan
        ray = yout
    else:
        if best is not None:
            _, Xb_, yb_, Sb_, ub_, taub_, resb_ = best
            Xout = [Xb / taub_ for Xb in Xb_]
            Sout = [Sb / taub_ for Sb in Sb_]
            yout = yb_ / taub_
            uout = ub_ / taub_
            res = resb_
        else:
            Xout = [Xb / tau for Xb in X]
            Sout = [Sb / tau for Sb in S]
            yout = y / tau
            uout = u / tau
            res = dehom_residuals()
        pobj = problem.inner_C(Xout) + float(problem.cf @ uout)

    # undo equilibration and presolve row removal in the dual vector
    y_full = np.zeros(m_orig)
    kept = np.setdiff1d(np.arange(m_orig), np.array(dropped, dtype=int))
    y_full[kept] = yout * problem.row_scale
    ray_full = None
    if ray is not None:
        ray_full = np.zeros(m_orig)
        ray_full[kept] = ray * problem.row_scale

    return SdpSolution(status=status, X=Xout, y=y_full, S=Sout, u=uout,
                       residuals=res, iterations=it, objective=float(pobj),
                       ray=ray_full, dropped_rows=dropped, message=message)


def residuals(instance: SdpInstance, solution: SdpSolution) -> Residuals:
    """Recompute absolute feasibility and gap residuals of a candidate
    solution from the raw instance data, independent of the solver."""
    cfg = SolverConfig(equilibrate=False)
    problem = _Problem(instance, cfg)
    X, u, y = solution.X, solution.u, solution.y
    for Xb, n in zip(X, problem.dims):
        if Xb.shape != (n, n):
            raise ValueError(f"X block shape {Xb.shape} != ({n},{n})")
    if y.shape != (problem.m,):
        raise ValueError(f"y shape {y.shape} != ({problem.m},)")
    rp = problem.apply_A(X) + problem.F @ u - problem.b
    ATy = problem.apply_AT(y)
    rd = 0.0
    for i in range(len(problem.dims)):
        if problem.dims[i]:
            rd = max(rd, float(np.abs(ATy[i] + solution.S[i] - problem.C[i]).max()))
    if problem.nf:
        rd = max(rd, float(np.abs(problem.F.T @ y - problem.cf).max(initial=0.0)))
    pobj = problem.inner_C(X) + float(problem.cf @ u)
    dobj = float(problem.b @ y)
    prim = float(np.linalg.norm(rp, np.inf)) if problem.m else 0.0
    return Residuals(prim, rd, abs(pobj - dobj))


# ---------------------------------------------------------------------------
# sparse text round-trip (debugging format)


def write_instance_text(instance: SdpInstance) -> str:
    """Serialize to a line-oriented text format.

    Lines: `dims n1 n2 ...`, `free k`, `rows m`, then one line per nonzero:
    `A crow block i j value` for PSD coefficients, `Fr crow k value` for free
    columns, `b crow value` for the right-hand side, `C block i j value` and
    `cf k value` for the objective.
    """
    out = ["# sdp instance v1"]
    out.append("dims " + " ".join(str(n) for n in instance.block_dims))
    out.append(f"free {instance.n_free}")
    out.append(f"rows {instance.n_rows}")
    for r, bl, i, j, v in instance.a_entries:
        out.append(f"A {r} {bl} {i} {j} {float(v)!r}")
    for r, k, v in instance.f_entries:
        out.append(f"Fr {r} {k} {float(v)!r}")
    for r, v in enumerate(instance.b):
        if v != 0.0:
            out.append(f"b {r} {float(v)!r}")
    for bl, i, j, v in instance.c_entries:
        out.append(f"C {bl} {i} {j} {float(v)!r}")
    for k, v in enumerate(instance.c_free):
        if v != 0.0:
            out.append(f"cf {k} {float(v)!r}")
    return "\n".join(out) + "\n"


def read_instance_text(text: str) -> SdpInstance:
    dims: tuple[int, ...] = ()
    nfree = 0
    m = 0
    a_entries = []
    f_entries = []
    b_map: dict[int, float] = {}
    c_entries = []
    cf_map: dict[int, float] = {}
    for line in text.splitlines():
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        parts = line.split()
        tag = parts[0]
        if tag == "dims":
            dims = tuple(int(p) for p in parts[1:])
        elif tag == "free":
            nfree = int(parts[1])
        elif tag == "rows":
            m = int(parts[1])
        elif tag == "A":
            a_entries.append((int(parts[1]), int(parts[2]), int(parts[3]),
                              int(parts[4]), float(parts[5])))
        elif tag == "Fr":
            f_entries.append((int(parts[1]), int(parts[2]), float(parts[3])))
        elif tag == "b":
            b_map[int(parts[1])] = float(parts[2])
        elif tag == "C":
            c_entries.append((int(parts[1]), int(parts[2]), int(parts[3]),
                              float(parts[4])))
        elif tag == "cf":
            cf_map[int(parts[1])] = float(parts[2])
        else:
            raise ValueError(f"unknown record {tag!r}")
    b = tuple(b_map.get(r, 0.0) for r in range(m))
    cf = tuple(cf_map.get(k, 0.0) for k in range(nfree))
    return SdpInstance(block_dims=dims,
                       free_names=tuple(f"u{k}" for k in range(nfree)),
                       a_entries=tuple(a_entries), f_entries=tuple(f_entries),
                       b=b, c_entries=tuple(c_entries), c_free=cf)
