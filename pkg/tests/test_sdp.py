from fractions import Fraction

import numpy as np
import pytest

from mompoly.sdp import (
    COMPILED_AVAILABLE,
    ProblemTooLarge,
    SdpBlock,
    SdpProblem,
    read_sdpa,
    read_sdpa_solution,
    recompute_residuals,
    solve_ipm,
    write_sdpa,
)
from mompoly.sdp.kernels import plan_block, schur_matrix
from mompoly.sdp.sdpa import write_sdpa_solution

TOL = 1e-8


def sym_entries(rng, d, lo=-3, hi=3):
    return {(i, j): Fraction(int(rng.integers(lo, hi + 1))) for i in range(d) for j in range(i, d)}


def dense(entries, d):
    A = np.zeros((d, d))
    for (i, j), v in entries.items():
        A[i, j] = A[j, i] = float(v)
    return A


def random_feasible_sdp(seed, max_block=8, max_rows=40):
    """Random SDP with a strictly feasible primal point and a strictly feasible dual point.

    b = A(X0) with X0 = I and C = A^T(y0) + I, so both sides are interior and the
    optimum is finite.
    """
    rng = np.random.default_rng(seed)
    dims = [int(d) for d in rng.integers(1, max_block + 1, size=int(rng.integers(1, 3)))]
    m = int(rng.integers(1, min(max_rows, sum(d * (d + 1) // 2 for d in dims)) + 1))
    y0 = [Fraction(int(v)) for v in rng.integers(-2, 3, size=m)]
    blocks, b = [], [Fraction(0)] * m
    for k, d in enumerate(dims):
        blk = SdpBlock(d, label=f"B{k}")
        C = {(i, i): Fraction(1) for i in range(d)}
        for r in range(m):
            for (i, j), v in sym_entries(rng, d).items():
                if v and rng.random() < 0.5:
                    blk.add(r, i, j, v)
                    if i == j:
                        b[r] += v
                    C[(i, j)] = C.get((i, j), 0) + y0[r] * v
        for (i, j), v in C.items():
            if v:
                blk.add_objective(i, j, v)
        blocks.append(blk)
    return SdpProblem(m=m, blocks=blocks, b=b)


# -- small exact cases --------------------------------------------------------

def test_two_by_two():
    # min x11 + x22 s.t. x12 = 1, X PSD: optimum 2 at X = [[1,1],[1,1]]
    blk = SdpBlock(2)
    blk.add(0, 0, 1, Fraction(1, 2))  # <A, X> = 2 * (1/2) * x12
    blk.add_objective(0, 0, 1)
    blk.add_objective(1, 1, 1)
    p = SdpProblem(m=1, blocks=[blk], b=[1])
    sol = solve_ipm(p)
    assert sol.ok
    assert sol.value == pytest.approx(2, abs=1e-7)


def test_free_variable_and_sign():
    # min -alpha s.t. x11 + alpha = 3, x11 >= 0: value 3 after sign flip
    blk = SdpBlock(1)
    blk.add(0, 0, 0, 1)
    p = SdpProblem(m=1, blocks=[blk], b=[3], n_free=1, free_rows=[0], free_cols=[0],
                   free_vals=[1], c=[-1], objective_sign=-1)
    sol = solve_ipm(p)
    assert sol.ok and sol.value == pytest.approx(3, abs=1e-7)


def test_infeasible_empty_row():
    blk = SdpBlock(1)
    blk.add(0, 0, 0, 1)
    p = SdpProblem(m=2, blocks=[blk], b=[1, 1])
    assert solve_ipm(p).status == "Infeasible"


def test_too_large():
    p = random_feasible_sdp(0)
    with pytest.raises(ProblemTooLarge):
        solve_ipm(p, max_dim=0)


def test_residuals_recomputed_from_data():
    p = random_feasible_sdp(3)
    sol = solve_ipm(p)
    base = recompute_residuals(p, sol)
    assert base["primal_infeasibility"] < 1e-6
    sol.X = [X + 1e-3 * np.eye(len(X)) for X in sol.X]
    bumped = recompute_residuals(p, sol)
    expect = np.abs(p.apply_A(sol.X) - p.float_b()).max()
    assert bumped["primal_infeasibility"] == pytest.approx(expect)
    assert bumped["primal_infeasibility"] > 1e-4


# -- reference solutions -----------------------------------------------------

@pytest.mark.parametrize("seed", range(50))
def test_random_sdp_against_reimport(seed, tmp_path):
    p = random_feasible_sdp(seed)
    sol = solve_ipm(p, tol=TOL)
    assert sol.ok, sol.message
    res = sol.residuals
    assert res["relative_primal"] <= 2 * TOL and res["relative_dual"] <= 2 * TOL
    assert res["relative_gap"] <= 2 * TOL
    q = read_sdpa(write_sdpa(p, tmp_path / "p.dat-s"))
    assert q.structure_key() == p.structure_key()
    ref = solve_ipm(q, tol=TOL)
    assert ref.ok
    assert sol.objective == pytest.approx(ref.objective, abs=1e-6 * (1 + abs(ref.objective)))


def _line_boundary_opt(p):
    """Exact optimum of a 2x2 problem with two independent rows.

    The feasible affine set is a line X0 + t D; PSD-ness is det >= 0 and
    trace >= 0, so the optimum sits at a root of the quadratic det(X0 + t D).
    """
    A = [np.zeros((2, 2)) for _ in range(2)]
    (rows, ii, jj, vals, C) = p.float_blocks()[0]
    for r, i, j, v in zip(rows, ii, jj, vals):
        A[r][i, j] += v
        if i != j:
            A[r][j, i] += v
    # unknowns (x11, x12, x22); <A, X> = a11 x11 + 2 a12 x12 + a22 x22
    M = np.array([[Ar[0, 0], 2 * Ar[0, 1], Ar[1, 1]] for Ar in A])
    b = p.float_b()
    x0 = np.linalg.lstsq(M, b, rcond=None)[0]
    d = np.linalg.svd(M)[2][-1]
    X = lambda t: np.array([[x0[0] + t * d[0], x0[1] + t * d[1]], [x0[1] + t * d[1], x0[2] + t * d[2]]])  # noqa: E731
    # det = (x0+td)_0 (x0+td)_2 - (x0+td)_1^2
    qa = d[0] * d[2] - d[1] ** 2
    qb = x0[0] * d[2] + x0[2] * d[0] - 2 * x0[1] * d[1]
    qc = x0[0] * x0[2] - x0[1] ** 2
    roots = np.roots([qa, qb, qc]) if abs(qa) > 1e-12 else np.array([-qc / qb])
    vals = [float(np.sum(C * X(t.real))) for t in roots
            if abs(t.imag) < 1e-9 and np.linalg.eigvalsh(X(t.real))[0] > -1e-7]
    return min(vals)


@pytest.mark.parametrize("seed", range(20))
def test_two_by_two_boundary_search(seed):
    rng = np.random.default_rng(100 + seed)
    while True:
        blk = SdpBlock(2)
        for r in range(2):
            for (i, j), v in sym_entries(rng, 2).items():
                if v:
                    blk.add(r, i, j, v)
        # interior point X0 = I and dual point y0 give a bounded problem
        b = [sum((v for r, i, j, v in zip(blk.rows, blk.ii, blk.jj, blk.vals) if r == row and i == j),
                 Fraction(0)) for row in range(2)]
        y0 = [Fraction(int(v)) for v in rng.integers(-2, 3, size=2)]
        C = {(0, 0): Fraction(1), (1, 1): Fraction(1)}
        for r, i, j, v in zip(blk.rows, blk.ii, blk.jj, blk.vals):
            C[(i, j)] = C.get((i, j), 0) + y0[r] * v
        for (i, j), v in C.items():
            blk.add_objective(i, j, v)
        p = SdpProblem(m=2, blocks=[blk], b=b)
        A = np.array([[blk_row_coeffs(blk, r, t) for t in range(3)] for r in range(2)])
        if np.linalg.matrix_rank(A) == 2:
            break
    sol = solve_ipm(p)
    assert sol.ok
    assert sol.objective == pytest.approx(_line_boundary_opt(p), abs=1e-6)


def blk_row_coeffs(blk, row, t):
    ij = [(0, 0), (0, 1), (1, 1)][t]
    return float(sum(v for r, i, j, v in zip(blk.rows, blk.ii, blk.jj, blk.vals) if r == row and (i, j) == ij))


# -- SDPA exchange ---------------------------------------------------------

def test_sdpa_round_trip_with_free(tmp_path):
    blk = SdpBlock(2)
    blk.add(0, 0, 1, Fraction(1, 3))
    blk.add(1, 1, 1, 2)
    blk.add_objective(0, 0, Fraction(5, 7))
    p = SdpProblem(m=2, blocks=[blk], b=[1, Fraction(-1, 2)], n_free=2, free_rows=[0, 1],
                   free_cols=[0, 1], free_vals=[1, -3], c=[0, 2])
    q = read_sdpa(write_sdpa(p, tmp_path / "a.dat-s"))
    assert q.structure_key() == p.structure_key()
    assert q.b == [Fraction(f"{float(v):.17g}") for v in p.b]
    assert np.allclose(q.float_free(), p.float_free())
    assert np.allclose(q.float_c(), p.float_c())
    assert np.allclose(q.float_blocks()[0][4], p.float_blocks()[0][4])
    X = [np.array([[1.0, 0.3], [0.3, 2.0]])]
    assert np.allclose(q.apply_A(X), p.apply_A(X))


def test_sdpa_empty_problem(tmp_path):
    p = SdpProblem(m=0, blocks=[SdpBlock(1)], b=[])
    q = read_sdpa(write_sdpa(p, tmp_path / "e.dat-s"))
    assert q.structure_key() == p.structure_key()
    assert solve_ipm(p).ok


def test_sdpa_solution_round_trip(tmp_path):
    p = random_feasible_sdp(7)
    sol = solve_ipm(p)
    path = write_sdpa_solution(p, sol, tmp_path / "s.out")
    back = read_sdpa_solution(p, path)
    assert back.ok
    assert back.objective == pytest.approx(sol.objective, rel=1e-12)
    assert back.residuals["primal_infeasibility"] == pytest.approx(
        sol.residuals["primal_infeasibility"], abs=1e-12)


def test_sdpa_solution_malformed(tmp_path):
    p = random_feasible_sdp(7)
    bad = tmp_path / "bad.out"
    bad.write_text("phase.value = pdOPT\nxVec = {1,2\nxMat = {\nyMat = {")
    with pytest.raises(ValueError):
        read_sdpa_solution(p, bad)
    bad.write_text("nothing here")
    with pytest.raises(ValueError):
        read_sdpa_solution(p, bad)


# -- kernels and determinism ------------------------------------------------

def _dense_schur(p, Ws):
    m = p.m
    M = np.zeros((m, m))
    for (rows, ii, jj, vals, _), W in zip(p.float_blocks(), Ws):
        d = W.shape[0]
        A = np.zeros((m, d, d))
        for r, i, j, v in zip(rows, ii, jj, vals):
            A[r, i, j] += v
            if i != j:
                A[r, j, i] += v
        WAW = np.einsum("ab,rbc,cd->rad", W, A, W)
        M += np.einsum("sad,rad->sr", A, WAW)
    return M


@pytest.mark.parametrize("seed", range(5))
def test_kernels_agree_with_dense(seed):
    p = random_feasible_sdp(seed)
    rng = np.random.default_rng(seed)
    Ws = []
    for d in p.block_dims:
        G = rng.standard_normal((d, d))
        Ws.append(G @ G.T + np.eye(d))
    plans = [plan_block(d, rows, ii, jj, vals) for d, (rows, ii, jj, vals, _) in zip(p.block_dims, p.float_blocks())]
    ref = _dense_schur(p, Ws)
    kinds = ["python"] + (["compiled"] if COMPILED_AVAILABLE else [])
    for kind in kinds:
        assert np.allclose(schur_matrix(plans, Ws, p.m, kernel=kind), ref, rtol=1e-10, atol=1e-10)


def test_deterministic():
    a = solve_ipm(random_feasible_sdp(11))
    b = solve_ipm(random_feasible_sdp(11))
    assert a.objective == b.objective and a.iterations == b.iterations
