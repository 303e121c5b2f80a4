"""SDPA sparse format (``.dat-s``) export and solution import.

The problem ``min <C,X> + c^T z  s.t.  <A_i,X> + (Bz)_i = b_i, X PSD`` is written
as the SDPA dual ``max <F0, Y>  s.t.  <F_i, Y> = b_i`` with ``F_i = A_i`` and
``F0 = -C``.  Free variables are split as ``z = z+ - z-`` into a trailing
diagonal block, announced by a ``*free <k>`` comment line so the reader can
fold them back.
"""
from __future__ import annotations

import re
from fractions import Fraction
from pathlib import Path

import numpy as np

from .problem import SdpBlock, SdpProblem, SdpSolution, recompute_residuals


def _num(v) -> str:
    return f"{float(v):.17g}"


def write_sdpa(p: SdpProblem, path) -> Path:
    path = Path(path)
    sizes = list(p.block_dims)
    nblk = len(sizes) + (1 if p.n_free else 0)
    out = []
    if p.n_free:
        out.append(f"*free {p.n_free}")
    out.append(f"{p.m} = mDIM")
    out.append(f"{nblk} = nBLOCK")
    size_tokens = [str(s) for s in sizes] + ([str(-2 * p.n_free)] if p.n_free else [])
    out.append(" ".join(size_tokens) + " = bLOCKsTRUCT")
    out.append(" ".join(_num(v) for v in p.b) if p.m else "")
    entries: list[tuple[int, int, int, int, Fraction]] = []
    for k, blk in enumerate(p.blocks, start=1):
        for i, j, v in zip(blk.c_ii, blk.c_jj, blk.c_vals):
            entries.append((0, k, i + 1, j + 1, -v))
        for r, i, j, v in zip(blk.rows, blk.ii, blk.jj, blk.vals):
            entries.append((r + 1, k, i + 1, j + 1, v))
    if p.n_free:
        k = len(sizes) + 1
        for t, cv in enumerate(p.c):
            if cv:
                entries.append((0, k, 2 * t + 1, 2 * t + 1, -cv))
                entries.append((0, k, 2 * t + 2, 2 * t + 2, cv))
        for r, t, v in zip(p.free_rows, p.free_cols, p.free_vals):
            entries.append((r + 1, k, 2 * t + 1, 2 * t + 1, v))
            entries.append((r + 1, k, 2 * t + 2, 2 * t + 2, -v))
    merged: dict[tuple[int, int, int, int], Fraction] = {}
    for mat, k, i, j, v in entries:
        key = (mat, k, i, j)
        merged[key] = merged.get(key, 0) + v
    for (mat, k, i, j), v in sorted(merged.items()):
        if v:
            out.append(f"{mat} {k} {i} {j} {_num(v)}")
    path.write_text("\n".join(out) + "\n")
    return path


def read_sdpa(path) -> SdpProblem:
    """Parse a ``.dat-s`` file back into an :class:`SdpProblem`.

    Values are read from their decimal rendering.
    """
    lines = Path(path).read_text().splitlines()
    n_free = 0
    body = []
    for ln in lines:
        s = ln.strip()
        if s.startswith("*free"):
            n_free = int(s.split()[1])
            continue
        if s.startswith("*") or s.startswith('"'):
            continue
        body.append(s)
    if len(body) < 3:
        raise ValueError("truncated SDPA file")

    def first_ints(s):
        return [int(t) for t in re.findall(r"[-+]?\d+", re.split(r"=", s)[0].replace(",", " ").replace("{", " ").replace("}", " "))]

    m = first_ints(body[0])[0]
    nblk = first_ints(body[1])[0]
    sizes = first_ints(body[2])[:nblk]
    idx = 3
    bvals: list[Fraction] = []
    if m:
        toks = re.findall(r"[-+]?(?:\d+\.?\d*|\.\d+)(?:[eE][-+]?\d+)?", body[3].replace(",", " "))
        bvals = [Fraction(t) for t in toks[:m]]
        idx = 4
    elif len(body) > 3 and body[3] == "":
        idx = 4
    nps = nblk - (1 if n_free else 0)
    blocks = [SdpBlock(abs(sz), label=f"B{k + 1}") for k, sz in enumerate(sizes[:nps])]
    free_rows, free_cols, free_vals = [], [], []
    c = [Fraction(0)] * n_free
    for s in body[idx:]:
        if not s:
            continue
        t = s.replace(",", " ").split()
        mat, k, i, j = (int(x) for x in t[:4])
        v = Fraction(t[4])
        if k <= nps:
            blk = blocks[k - 1]
            if mat == 0:
                blk.add_objective(i - 1, j - 1, -v)
            else:
                blk.add(mat - 1, i - 1, j - 1, v)
        else:
            if i % 2 == 0:
                continue  # mirror entry of the split pair
            tvar = (i - 1) // 2
            if mat == 0:
                c[tvar] = -v
            else:
                free_rows.append(mat - 1)
                free_cols.append(tvar)
                free_vals.append(v)
    return SdpProblem(m=m, blocks=blocks, b=bvals, n_free=n_free, free_rows=free_rows,
                      free_cols=free_cols, free_vals=free_vals, c=c)


# ---------------------------------------------------------------------------
# Solutions in the SDPA output layout
# ---------------------------------------------------------------------------

def _fmt_matrix(A: np.ndarray) -> str:
    rows = ["{" + ",".join(_num(v) for v in row) + "}" for row in A]
    return "{ " + " ".join(rows) + " }"


def write_sdpa_solution(p: SdpProblem, sol: SdpSolution, path) -> Path:
    """Write ``sol`` the way SDPA reports results (xVec = -y, xMat = S, yMat = X)."""
    z = sol.z if sol.z is not None else np.zeros(p.n_free)
    y = sol.y if sol.y is not None else np.zeros(p.m)
    lines = [f"phase.value  = pdOPT",
             f"objValPrimal = {_num(-sol.dual_objective)}",
             f"objValDual   = {_num(-sol.primal_objective)}",
             "xVec = ", "{" + ",".join(_num(-v) for v in y) + "}"]
    S = sol.S if sol.S else [np.zeros((d, d)) for d in p.block_dims]
    lines.append("xMat = ")
    lines.append("{")
    for Sk in S:
        lines.append(_fmt_matrix(Sk))
    if p.n_free:
        lines.append("{" + ",".join("0" for _ in range(2 * p.n_free)) + "}")
    lines.append("}")
    lines.append("yMat = ")
    lines.append("{")
    for Xk in sol.X:
        lines.append(_fmt_matrix(Xk))
    if p.n_free:
        parts = []
        for v in z:
            parts += [_num(max(v, 0.0)), _num(max(-v, 0.0))]
        lines.append("{" + ",".join(parts) + "}")
    lines.append("}")
    Path(path).write_text("\n".join(lines) + "\n")
    return Path(path)


def _parse_braces(text: str):
    """Parse nested ``{...}`` groups of numbers into nested lists."""
    tokens = re.findall(r"[{}]|[-+]?(?:\d+\.?\d*|\.\d+)(?:[eE][-+]?\d+)?|nan|inf", text)
    pos = 0

    def parse():
        nonlocal pos
        assert tokens[pos] == "{"
        pos += 1
        items = []
        while tokens[pos] != "}":
            if tokens[pos] == "{":
                items.append(parse())
            else:
                items.append(float(tokens[pos]))
                pos += 1
        pos += 1
        return items

    if not tokens or tokens[0] != "{":
        raise ValueError("malformed SDPA solution block")
    return parse()


def read_sdpa_solution(p: SdpProblem, path) -> SdpSolution:
    """Read SDPA-style output and recompute residuals against ``p``."""
    text = Path(path).read_text()

    def section(name, nxt):
        mt = re.search(rf"{name}\s*=\s*(.*?)(?={nxt}\s*=|\Z)", text, re.S)
        if not mt:
            raise ValueError(f"solution file lacks {name}")
        return mt.group(1)

    try:
        xvec = _parse_braces(section("xVec", "xMat"))
        ymat = _parse_braces(section("yMat", "ZZZ"))
        xmat = _parse_braces(section("xMat", "yMat"))
    except (AssertionError, IndexError) as exc:
        raise ValueError("malformed SDPA solution file") from exc
    nps = len(p.blocks)

    def to_mats(groups):
        mats = []
        for k in range(nps):
            g = groups[k]
            d = p.blocks[k].dim
            if g and isinstance(g[0], list):
                A = np.array(g, dtype=float)
            else:
                A = np.diag(np.array(g, dtype=float))
            if A.shape != (d, d):
                raise ValueError(f"block {k + 1} has shape {A.shape}, expected {(d, d)}")
            mats.append(A)
        return mats

    if len(xvec) != p.m:
        raise ValueError("xVec length differs from the number of constraints")
    X = to_mats(ymat)
    S = to_mats(xmat)
    z = np.zeros(p.n_free)
    if p.n_free:
        diag = ymat[nps]
        z = np.array([diag[2 * t] - diag[2 * t + 1] for t in range(p.n_free)])
    y = -np.array(xvec, dtype=float)
    sol = SdpSolution(status="Optimal", X=X, S=S, y=y, z=z)
    sol.primal_objective = p.objective(X, z)
    sol.dual_objective = float(p.float_b() @ y)
    sol.objective = sol.primal_objective
    sol.value = p.reported(sol.objective)
    sol.residuals = recompute_residuals(p, sol)
    mt = re.search(r"phase\.value\s*=\s*(\w+)", text)
    phase = mt.group(1) if mt else "pdOPT"
    if phase not in ("pdOPT", "pFEAS_dFEAS"):
        sol.status = "Infeasible" if "INF" in phase else "NumericalFailure"
    sol.message = f"imported ({phase})"
    return sol
