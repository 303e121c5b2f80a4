"""Kernel selection for Schur-complement assembly.

The compiled extension ``_kernels`` is used when it imports; otherwise the
numpy implementation in ``_kernels_py`` takes over.  Setting the environment
variable ``MOMPOLY_KERNEL=python`` forces the fallback.
"""
from __future__ import annotations

import os
from dataclasses import dataclass

import numpy as np

from . import _kernels_py

try:  # pragma: no cover - depends on the build
    from . import _kernels as _compiled
except ImportError:  # pragma: no cover
    _compiled = None

COMPILED_AVAILABLE = _compiled is not None


def _pick(name: str | None = None) -> str:
    name = name or os.environ.get("MOMPOLY_KERNEL", "auto")
    if name == "auto":
        return "compiled" if COMPILED_AVAILABLE else "python"
    if name == "compiled" and not COMPILED_AVAILABLE:
        raise RuntimeError("compiled kernel requested but the extension is not built")
    if name not in ("compiled", "python"):
        raise ValueError(f"unknown kernel {name!r}")
    return name


ACTIVE = _pick()


@dataclass
class BlockPlan:
    """Constraint triplets of one block sorted by row and grouped."""

    dim: int
    ptr: np.ndarray
    grp_row: np.ndarray
    ii: np.ndarray
    jj: np.ndarray
    vv: np.ndarray  # values with factor 2 on off-diagonal triplets
    erow: np.ndarray
    full: list | None = None


def plan_block(dim: int, rows, ii, jj, vals) -> BlockPlan:
    rows = np.asarray(rows, dtype=np.int64)
    order = np.lexsort((np.asarray(jj), np.asarray(ii), rows))
    rows = np.ascontiguousarray(rows[order])
    ii = np.ascontiguousarray(np.asarray(ii, dtype=np.int64)[order])
    jj = np.ascontiguousarray(np.asarray(jj, dtype=np.int64)[order])
    vals = np.asarray(vals, dtype=float)[order]
    vv = np.ascontiguousarray(np.where(ii == jj, 1.0, 2.0) * vals)
    if len(rows):
        starts = np.flatnonzero(np.r_[True, rows[1:] != rows[:-1]])
    else:
        starts = np.zeros(0, dtype=np.int64)
    ptr = np.ascontiguousarray(np.r_[starts, len(rows)].astype(np.int64))
    grp_row = np.ascontiguousarray(rows[starts])
    return BlockPlan(dim, ptr, grp_row, ii, jj, vv, rows)


def schur_matrix(plans: list[BlockPlan], Ws: list[np.ndarray], m: int, kernel: str | None = None) -> np.ndarray:
    """``M_ij = sum_k <A_i^k, W_k A_j^k W_k>`` over all blocks."""
    kind = ACTIVE if kernel is None else _pick(kernel)
    M = np.zeros((m, m))
    for plan, W in zip(plans, Ws):
        if not len(plan.grp_row):
            continue
        W = np.ascontiguousarray(W, dtype=float)
        if kind == "compiled":
            _compiled.schur_block(W, plan.ptr, plan.grp_row, plan.ii, plan.jj, plan.vv, plan.erow, M)
        else:
            if plan.full is None:
                plan.full = _kernels_py.expand_groups(plan.ptr, plan.ii, plan.jj, plan.vv)
            _kernels_py.schur_block(W, plan.ptr, plan.grp_row, plan.ii, plan.jj, plan.vv, plan.erow, M,
                                    full=plan.full)
    # only the upper triangle was accumulated
    d = np.diag(M).copy()
    M = np.triu(M) + np.triu(M, 1).T
    M[np.diag_indices(m)] = d
    return M
