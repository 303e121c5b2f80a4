"""Dense primal-dual interior-point method for block SDPs with free variables.

Infeasible-start Mehrotra predictor-corrector with Nesterov-Todd scaling.  The
Newton system is reduced to the Schur complement ``M_ij = <A_i, W A_j W>``
(assembled by :mod:`mompoly.sdp.kernels`) bordered by the free-variable
columns ``B``.
"""
from __future__ import annotations

import logging
import time

import numpy as np
import scipy.linalg as sla

from .kernels import plan_block, schur_matrix
from .problem import SdpProblem, SdpSolution, recompute_residuals

log = logging.getLogger(__name__)

DEFAULT_TOL = 1e-8
DEFAULT_MAX_DIM = 500


class ProblemTooLarge(ValueError):
    pass


def _max_step(L: np.ndarray, D: np.ndarray) -> float:
    """Largest t with ``L L^T + t D`` PSD (inf when D is PSD)."""
    Li_D = sla.solve_triangular(L, D, lower=True)
    T = sla.solve_triangular(L, Li_D.T, lower=True)
    lam = np.linalg.eigvalsh((T + T.T) / 2)[0]
    return np.inf if lam >= 0 else -1.0 / lam


def _chol(A: np.ndarray) -> np.ndarray:
    return np.linalg.cholesky((A + A.T) / 2)


class _SchurSolver:
    """Solves ``[[M, B], [B^T, 0]] (dy, dz) = (h, r)`` with a factored M."""

    def __init__(self, M: np.ndarray, B: np.ndarray):
        self.M = M
        self.B = B
        scale = max(1.0, float(np.max(np.abs(np.diag(M)), initial=0.0)))
        reg = 0.0
        while True:
            try:
                self.fac = sla.cho_factor(M + reg * np.eye(len(M)), lower=False, check_finite=False)
                break
            except (np.linalg.LinAlgError, sla.LinAlgError):
                reg = 1e-14 * scale if reg == 0.0 else reg * 100
                if reg > 1e-4 * scale:
                    raise
        self.reg = reg
        if B.shape[1]:
            self.MiB = self._msolve(B)
            self.Sz = B.T @ self.MiB
            self.Sz_fac = sla.lu_factor(self.Sz, check_finite=False)

    def _msolve(self, h):
        x = sla.cho_solve(self.fac, h, check_finite=False)
        # one step of iterative refinement against the unregularized matrix
        r = h - self.M @ x
        return x + sla.cho_solve(self.fac, r, check_finite=False)

    def solve(self, h: np.ndarray, r: np.ndarray):
        if not self.B.shape[1]:
            return self._msolve(h), np.zeros(0)
        Mih = self._msolve(h)
        dz = sla.lu_solve(self.Sz_fac, self.B.T @ Mih - r, check_finite=False)
        dy = Mih - self.MiB @ dz
        return dy, dz


def solve_ipm(p: SdpProblem, tol: float = DEFAULT_TOL, max_iter: int = 100,
              max_dim: int = DEFAULT_MAX_DIM, kernel: str | None = None,
              verbose: bool = False) -> SdpSolution:
    """Solve ``p``; the returned status is ``Optimal`` only when all relative
    residuals and the relative gap are below ``tol``."""
    t0 = time.time()
    dims = p.block_dims
    if sum(dims) > max_dim:
        raise ProblemTooLarge(f"total block dimension {sum(dims)} exceeds the cap {max_dim}")
    m = p.m
    fb = p.float_blocks()
    Cs = [blk[4] for blk in fb]
    b = p.float_b()
    Bf = p.float_free()
    c = p.float_c()
    nf = p.n_free
    N = max(1, sum(dims))

    def finish(status, X, S, y, z, it, msg=""):
        sol = SdpSolution(status=status, X=X, S=S, y=y, z=z, iterations=it, message=msg)
        if X:
            sol.primal_objective = p.objective(X, z)
            sol.dual_objective = float(b @ y) if y is not None else float("nan")
            sol.objective = sol.primal_objective
            sol.value = p.reported(sol.objective)
            sol.residuals = recompute_residuals(p, sol)
        sol.seconds = time.time() - t0
        return sol

    used = np.zeros(m, dtype=bool)
    for rows, *_ in fb:
        used[rows] = True
    if nf:
        used |= np.any(Bf != 0, axis=1)
    if np.any(~used & (b != 0)):
        return finish("Infeasible", [], [], None, None, 0, "a constraint row has no variables but nonzero rhs")
    if m == 0:
        X = [np.zeros((d, d)) for d in dims]
        ok = all(np.linalg.eigvalsh(C)[0] >= -tol for C in Cs if C.size) and not np.any(c)
        return finish("Optimal" if ok else "Infeasible", X, [C.copy() for C in Cs], np.zeros(0),
                      np.zeros(nf), 0, "" if ok else "unbounded")

    plans = [plan_block(d, rows, ii, jj, vals) for d, (rows, ii, jj, vals, _) in zip(dims, fb)]

    # starting point, block-wise scaled identities
    rownorm = [np.sqrt(np.bincount(rows, weights=np.where(ii == jj, 1.0, 2.0) * vals ** 2, minlength=m))
               for rows, ii, jj, vals, _ in fb]
    X, S = [], []
    for k, d in enumerate(dims):
        nA = rownorm[k]
        xi = max(10.0, np.sqrt(d), d * float(np.max((1 + np.abs(b)) / (1 + nA))))
        eta = max(10.0, np.sqrt(d), float(np.max(nA, initial=0.0)), float(np.linalg.norm(Cs[k])))
        X.append(xi * np.eye(d))
        S.append(eta * np.eye(d))
    y = np.zeros(m)
    z = np.zeros(nf)
    normb = 1 + float(np.linalg.norm(b))
    normC = 1 + float(np.sqrt(sum(np.sum(C * C) for C in Cs))) + float(np.linalg.norm(c))

    def A(Xs):
        return p.apply_A(Xs)

    empty_rows = np.flatnonzero(~used)
    status, msg = "MaxIter", "iteration limit reached"
    it = 0
    for it in range(1, max_iter + 1):
        Ax = A(X) + (Bf @ z if nf else 0.0)
        rp = b - Ax
        Aty = p.apply_At(y)
        Rd = [C - Sk - Zk for C, Sk, Zk in zip(Cs, S, Aty)]
        rc = c - Bf.T @ y if nf else np.zeros(0)
        pobj = p.objective(X, z)
        dobj = float(b @ y)
        mu = sum(float(np.sum(Xk * Sk)) for Xk, Sk in zip(X, S)) / N
        relp = float(np.linalg.norm(rp)) / normb
        reld = (float(np.sqrt(sum(np.sum(R * R) for R in Rd))) + float(np.linalg.norm(rc))) / normC
        gap = abs(pobj - dobj) / (1 + abs(pobj) + abs(dobj))
        if verbose:
            log.info("it %3d pobj % .9e dobj % .9e relp %.2e reld %.2e gap %.2e mu %.2e",
                     it, pobj, dobj, relp, reld, gap, mu)
        if max(relp, reld, gap) <= tol:
            status, msg = "Optimal", ""
            break
        xnorm = max(float(np.max(np.abs(Xk))) for Xk in X) if X else 0.0
        if xnorm > 1e12 * normb or np.max(np.abs(y), initial=0.0) > 1e12 * normC:
            status, msg = "Infeasible", "iterates diverge"
            break
        try:
            Ls = [_chol(Xk) for Xk in X]
            Rs = [_chol(Sk) for Sk in S]
            Gs, lams, Ws, Ginvs = [], [], [], []
            for L, R in zip(Ls, Rs):
                U, sv, Vt = np.linalg.svd(R.T @ L)
                G = L @ Vt.T / np.sqrt(sv)
                Gs.append(G)
                lams.append(sv)
                Ws.append(G @ G.T)
                Ginvs.append((np.sqrt(sv)[:, None] * Vt) @ sla.solve_triangular(L, np.eye(len(L)), lower=True))
            M = schur_matrix(plans, Ws, m, kernel)
            if len(empty_rows):
                M[empty_rows, empty_rows] += 1.0
            solver = _SchurSolver(M, Bf)
        except (np.linalg.LinAlgError, sla.LinAlgError, ValueError) as exc:
            status, msg = "NumericalFailure", f"factorization failed: {exc}"
            break

        WRdW = [W @ R @ W for W, R in zip(Ws, Rd)]
        base_h = rp + A(WRdW)

        def direction(Rc):
            h = base_h - A(Rc)
            dy, dz = solver.solve(h, rc)
            Atdy = p.apply_At(dy)
            dS = [R - Z for R, Z in zip(Rd, Atdy)]
            dX = [Rck - W @ dSk @ W for Rck, W, dSk in zip(Rc, Ws, dS)]
            dX = [(D + D.T) / 2 for D in dX]
            dS = [(D + D.T) / 2 for D in dS]
            return dX, dy, dz, dS

        def steps(dX, dS):
            ap = min([1.0] + [_max_step(L, D) for L, D in zip(Ls, dX)])
            ad = min([1.0] + [_max_step(R, D) for R, D in zip(Rs, dS)])
            return ap, ad

        # predictor
        dXa, dya, dza, dSa = direction([-Xk for Xk in X])
        apa, ada = steps(dXa, dSa)
        mu_aff = sum(float(np.sum((Xk + apa * dx) * (Sk + ada * ds)))
                     for Xk, dx, Sk, ds in zip(X, dXa, S, dSa)) / N
        sigma = min(1.0, max(0.0, (mu_aff / mu) ** 3)) if mu > 0 else 0.0
        # corrector in the scaled space
        Rc = []
        for G, Gi, lam, dx, ds in zip(Gs, Ginvs, lams, dXa, dSa):
            Dx = Gi @ dx @ Gi.T
            Ds = G.T @ ds @ G
            rhs = sigma * mu * np.eye(len(lam)) - np.diag(lam ** 2) - (Dx @ Ds + Ds @ Dx) / 2
            T = 2 * rhs / (lam[:, None] + lam[None, :])
            Rc.append(G @ T @ G.T)
        dX, dy, dz, dS = direction(Rc)
        ap, ad = steps(dX, dS)
        gamma = 0.9 + 0.09 * min(apa, ada)
        ap = min(1.0, gamma * ap)
        ad = min(1.0, gamma * ad)
        X = [Xk + ap * D for Xk, D in zip(X, dX)]
        z = z + ap * dz
        y = y + ad * dy
        S = [Sk + ad * D for Sk, D in zip(S, dS)]
        if not all(np.all(np.isfinite(Xk)) for Xk in X) or not np.all(np.isfinite(y)):
            status, msg = "NumericalFailure", "non-finite iterate"
            break
    sol = finish(status, X, S, y, z, it, msg)
    sol.residuals.update({"relative_primal": relp, "relative_dual": reld, "relative_gap": gap})
    return sol
