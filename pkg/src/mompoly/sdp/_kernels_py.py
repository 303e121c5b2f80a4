"""Pure numpy Schur-complement assembly (fallback for the compiled kernel).

Same contract as ``_kernels.schur_block``: adds the upper triangle of
``M[r_g, r_h] = <A_g, W A_h W>`` for ``h >= g``.  Each row is handled with one
matrix product ``W[:, a] diag(v) W[b, :]`` followed by a gather.
"""
from __future__ import annotations

import numpy as np


def schur_block(W, ptr, grp_row, ii, jj, vv, erow, M, full=None):
    if full is None:
        full = expand_groups(ptr, ii, jj, vv)
    for g in range(len(grp_row)):
        fa, fb, fv = full[g]
        T = W[:, fa] @ (fv[:, None] * W[fb, :])
        start = ptr[g]
        w = vv[start:] * T[ii[start:], jj[start:]]
        M[grp_row[g]] += np.bincount(erow[start:], weights=w, minlength=M.shape[1])


def expand_groups(ptr, ii, jj, vv):
    """Full (both-orientation) index lists per group with the original values."""
    out = []
    for g in range(len(ptr) - 1):
        s, e = ptr[g], ptr[g + 1]
        a, b = ii[s:e], jj[s:e]
        off = a != b
        # stored values carry factor 2 on off-diagonal entries
        v = np.where(off, vv[s:e] / 2, vv[s:e])
        fa = np.concatenate([a, b[off]])
        fb = np.concatenate([b, a[off]])
        fv = np.concatenate([v, v[off]])
        out.append((fa, fb, fv))
    return out
