"""Block-diagonal SDP data in standard form.

    minimize    <C, X> + c^T z
    subject to  <A_i, X> + (B z)_i = b_i      i = 1..m
                X = diag(X_1, ..., X_K),  X_k PSD,   z free

Coefficient matrices are stored per block as upper-triangular triplets
``(row, i, j, value)`` with ``i <= j``; an off-diagonal triplet stands for the
symmetric pair ``(i, j), (j, i)``.  All data are exact rationals; float copies
are built on demand for the numerical solver.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from typing import Sequence

import numpy as np


@dataclass
class SdpBlock:
    dim: int
    label: str = ""
    # constraint triplets
    rows: list[int] = field(default_factory=list)
    ii: list[int] = field(default_factory=list)
    jj: list[int] = field(default_factory=list)
    vals: list[Fraction] = field(default_factory=list)
    # objective triplets
    c_ii: list[int] = field(default_factory=list)
    c_jj: list[int] = field(default_factory=list)
    c_vals: list[Fraction] = field(default_factory=list)

    def add(self, row: int, i: int, j: int, v) -> None:
        if i > j:
            i, j = j, i
        self.rows.append(row)
        self.ii.append(i)
        self.jj.append(j)
        self.vals.append(Fraction(v))

    def add_objective(self, i: int, j: int, v) -> None:
        if i > j:
            i, j = j, i
        self.c_ii.append(i)
        self.c_jj.append(j)
        self.c_vals.append(Fraction(v))

    @property
    def nnz(self) -> int:
        return len(self.vals)


@dataclass
class SdpProblem:
    m: int
    blocks: list[SdpBlock]
    b: list[Fraction]
    n_free: int = 0
    free_rows: list[int] = field(default_factory=list)
    free_cols: list[int] = field(default_factory=list)
    free_vals: list[Fraction] = field(default_factory=list)
    c: list[Fraction] = field(default_factory=list)
    row_labels: list = field(default_factory=list)
    free_labels: list[str] = field(default_factory=list)
    # reported value = objective_sign * (min objective) + objective_offset
    objective_sign: int = 1
    objective_offset: Fraction = Fraction(0)
    form: str = "primal"
    info: dict = field(default_factory=dict)
    _cache: dict = field(default_factory=dict, repr=False, compare=False)

    def __post_init__(self):
        self.b = [Fraction(v) for v in self.b]
        if len(self.b) != self.m:
            raise ValueError("rhs length differs from the number of rows")
        if not self.c:
            self.c = [Fraction(0)] * self.n_free
        if len(self.c) != self.n_free:
            raise ValueError("free objective length differs from n_free")

    # -- sizes --------------------------------------------------------
    @property
    def block_dims(self) -> list[int]:
        return [blk.dim for blk in self.blocks]

    @property
    def num_unknowns(self) -> int:
        """Scalar unknowns: upper triangles of all blocks plus free variables."""
        return sum(d * (d + 1) // 2 for d in self.block_dims) + self.n_free

    def sizes(self) -> dict:
        return {"rows": self.m, "blocks": self.block_dims,
                "max_block": max(self.block_dims, default=0),
                "free": self.n_free, "unknowns": self.num_unknowns}

    def reported(self, value: float) -> float:
        return self.objective_sign * value + float(self.objective_offset)

    # -- float views --------------------------------------------------
    def float_blocks(self):
        """Per block: (rows, ii, jj, vals) as numpy arrays plus the dense C."""
        hit = self._cache.get("float")
        if hit is None:
            hit = []
            for blk in self.blocks:
                rows = np.asarray(blk.rows, dtype=np.int64)
                ii = np.asarray(blk.ii, dtype=np.int64)
                jj = np.asarray(blk.jj, dtype=np.int64)
                vals = np.asarray([float(v) for v in blk.vals], dtype=float)
                C = np.zeros((blk.dim, blk.dim))
                for i, j, v in zip(blk.c_ii, blk.c_jj, blk.c_vals):
                    C[i, j] += float(v)
                    if i != j:
                        C[j, i] += float(v)
                hit.append((rows, ii, jj, vals, C))
            self._cache["float"] = hit
        return hit

    def float_free(self) -> np.ndarray:
        Bm = np.zeros((self.m, self.n_free))
        for r, k, v in zip(self.free_rows, self.free_cols, self.free_vals):
            Bm[r, k] += float(v)
        return Bm

    def float_b(self) -> np.ndarray:
        return np.array([float(v) for v in self.b])

    def float_c(self) -> np.ndarray:
        return np.array([float(v) for v in self.c])

    # -- operators ----------------------------------------------------
    def apply_A(self, X: Sequence[np.ndarray]) -> np.ndarray:
        """``(<A_i, X>)_i``."""
        out = np.zeros(self.m)
        for (rows, ii, jj, vals, _), Xk in zip(self.float_blocks(), X):
            w = np.where(ii == jj, 1.0, 2.0) * vals * Xk[ii, jj]
            out += np.bincount(rows, weights=w, minlength=self.m)
        return out

    def apply_At(self, y: np.ndarray) -> list[np.ndarray]:
        """``sum_i y_i A_i`` per block."""
        out = []
        for blk, (rows, ii, jj, vals, _) in zip(self.blocks, self.float_blocks()):
            S = np.zeros((blk.dim, blk.dim))
            w = vals * y[rows]
            np.add.at(S, (ii, jj), w)
            off = ii != jj
            np.add.at(S, (jj[off], ii[off]), w[off])
            out.append(S)
        return out

    def objective(self, X: Sequence[np.ndarray], z: np.ndarray | None = None) -> float:
        val = sum(float(np.sum(C * Xk)) for (*_, C), Xk in zip(self.float_blocks(), X))
        if self.n_free:
            val += float(self.float_c() @ z)
        return val

    def structure_key(self) -> tuple:
        """Hashable summary used to compare problems structurally."""
        return (self.m, tuple(self.block_dims), self.n_free)


@dataclass
class SdpSolution:
    status: str  # Optimal | Infeasible | MaxIter | NumericalFailure
    objective: float = float("nan")
    primal_objective: float = float("nan")
    dual_objective: float = float("nan")
    X: list = field(default_factory=list)
    z: np.ndarray | None = None
    y: np.ndarray | None = None
    S: list = field(default_factory=list)
    residuals: dict = field(default_factory=dict)
    iterations: int = 0
    seconds: float = 0.0
    message: str = ""
    value: float = float("nan")

    @property
    def ok(self) -> bool:
        return self.status == "Optimal"

    def summary(self) -> dict:
        return {"status": self.status, "value": self.value, "objective": self.objective,
                "primal_objective": self.primal_objective, "dual_objective": self.dual_objective,
                "residuals": dict(self.residuals), "iterations": self.iterations,
                "seconds": round(self.seconds, 3), "message": self.message}


def _min_eig(A: np.ndarray) -> float:
    """Smallest eigenvalue of the symmetric part of ``A``."""
    if A.size == 0:
        return 0.0
    return float(np.linalg.eigvalsh((A + A.T) / 2)[0])


def recompute_residuals(p: SdpProblem, sol: SdpSolution) -> dict:
    """Residuals of ``sol`` against the exact problem data, ignoring solver claims."""
    if len(sol.X) != len(p.blocks):
        raise ValueError("solution does not match the block structure")
    for blk, Xk in zip(p.blocks, sol.X):
        if Xk.shape != (blk.dim, blk.dim):
            raise ValueError("block dimension mismatch")
    z = sol.z if sol.z is not None else np.zeros(p.n_free)
    Ax = p.apply_A(sol.X)
    if p.n_free:
        Ax = Ax + p.float_free() @ z
    bf = p.float_b()
    primal = float(np.max(np.abs(Ax - bf))) if p.m else 0.0
    min_eig = min((_min_eig(Xk) for Xk in sol.X), default=0.0)
    out = {"primal_infeasibility": primal,
           "primal_relative": primal / (1 + float(np.max(np.abs(bf), initial=0.0))),
           "min_eigenvalue": min_eig,
           "objective": p.objective(sol.X, z)}
    if sol.y is not None:
        Z = p.apply_At(sol.y)
        dual = 0.0
        min_s = min((_min_eig(C - Zk) for (*_, C), Zk in zip(p.float_blocks(), Z)), default=0.0)
        if p.n_free:
            dual = float(np.max(np.abs(p.float_free().T @ sol.y - p.float_c())))
        out["dual_free_infeasibility"] = dual
        out["dual_min_eigenvalue"] = min_s
        out["dual_objective"] = float(bf @ sol.y)
        out["gap"] = abs(out["objective"] - out["dual_objective"])
        out["gap_relative"] = out["gap"] / (1 + abs(out["objective"]) + abs(out["dual_objective"]))
    return out
