"""Ready-made problem instances: covariance and bilocal Bell problems, perturbation examples."""
from __future__ import annotations

import json
from fractions import Fraction
from importlib import resources
from itertools import permutations, product

from .algebra import MomentPolynomial, RuleSet, formal_moment, parse_poly
from .measures import FiniteProbabilitySpace, eval_random_vars, pushforward

BILOCAL_N = 9
COV_N = 6


def data_path(name: str):
    """Path of a file shipped in ``mompoly/data``."""
    return resources.files("mompoly") / "data" / name


def load_data(name: str) -> dict:
    return json.loads(data_path(name).read_text())


# ---------------------------------------------------------------------------
# Covariance Bell expression with three binary settings per party
# ---------------------------------------------------------------------------

#: (a, b, sign): cov(A_a, B_b) enters with the given sign.
COV3322_TERMS = [(1, 1, 1), (1, 2, 1), (1, 3, 1),
                 (2, 1, 1), (2, 2, 1), (2, 3, -1),
                 (3, 1, 1), (3, 2, -1)]


def cov3322_objective() -> MomentPolynomial:
    """Sum of signed covariances with ``A_a = x_a`` and ``B_b = x_{b+3}``."""
    n = COV_N
    x = [MomentPolynomial.variable(n, j) for j in range(1, n + 1)]
    m = formal_moment
    f = MomentPolynomial.zero(n)
    for a, b, s in COV3322_TERMS:
        A, B = x[a - 1], x[b + 2]
        f = f + (m(A * B) - m(A) * m(B)) * s
    return f


def cov3322_rules() -> RuleSet:
    return RuleSet.involutions(COV_N)


def cov3322_attaining_space() -> FiniteProbabilitySpace:
    """Three equiprobable points with binary values reaching 9/2."""
    data = load_data("cov3322.json")["witness"]
    return FiniteProbabilitySpace.from_json(data)


# ---------------------------------------------------------------------------
# Bilocal Bell expression
# ---------------------------------------------------------------------------

def bilocal_vars():
    """``A_i = x_i``, ``B_i = x_{i+3}``, ``C_i = x_{i+6}``."""
    n = BILOCAL_N
    x = [MomentPolynomial.variable(n, j) for j in range(1, n + 1)]
    return x[0:3], x[3:6], x[6:9]


def _sym(*vars1: int) -> tuple[int, ...]:
    e = [0] * BILOCAL_N
    for v in vars1:
        e[v - 1] += 1
    return tuple(e)


def bilocal_rules() -> RuleSet:
    """Binary variables, vanishing one-point moments and correlators, A/C independence."""
    n = BILOCAL_N
    zero = MomentPolynomial.zero(n)
    sym = {}
    for j in range(1, n + 1):
        sym[_sym(j)] = zero
    for i in range(1, 4):
        for j in range(1, 4):
            if i != j:
                sym[_sym(i, j + 3)] = zero
                sym[_sym(i + 3, j + 6)] = zero
    for i, j, k in product(range(1, 4), repeat=3):
        if len({i, j, k}) <= 2:
            sym[_sym(i, j + 3, k + 6)] = zero
    base = RuleSet(n, RuleSet.involutions(n).x_rules.values(), sym,
                   factorizations=[((0, 1, 2), (6, 7, 8))])
    return base


def bilocal_objective() -> MomentPolynomial:
    A, B, C = bilocal_vars()
    m = formal_moment
    f = MomentPolynomial.zero(BILOCAL_N)
    for i in range(3):
        f = f + (m(B[i] * C[i]) - m(A[i] * B[i])) * Fraction(1, 3)
    for i, j, k in permutations(range(3)):
        f = f - m(A[i] * B[j] * C[k])
    return f


BILOCAL_NAMES = ["A1", "A2", "A3", "B1", "B2", "B3", "C1", "C2", "C3"]

_ETA = [(1, 1, 1, 1), (1, 1, -1, -1), (1, -1, 1, -1), (1, -1, -1, 1)]


def bilocal_construction() -> FiniteProbabilitySpace:
    """Uniform space on ``{1..4}^2`` with ``A_i = eta_0 (x) eta_i``,
    ``C_i = eta_i (x) eta_0`` and ``B_i`` equal to ``eta_i (x) eta_0`` with the
    diagonal sign-flipped."""
    rvs = {}
    pts = [(a, b) for a in range(4) for b in range(4)]
    for i in range(1, 4):
        eta = _ETA[i]
        rvs[f"A{i}"] = [eta[b] for a, b in pts]
        rvs[f"B{i}"] = [(-1 if a == b else 1) * eta[a] for a, b in pts]
        rvs[f"C{i}"] = [eta[a] for a, b in pts]
    return FiniteProbabilitySpace.uniform(16, rvs)


def bilocal_constraints() -> list[tuple[str, MomentPolynomial, MomentPolynomial]]:
    """Every bilocality and vanishing constraint as ``(name, lhs, rhs)`` with lhs = rhs required."""
    A, B, C = bilocal_vars()
    n = BILOCAL_N
    one = MomentPolynomial.constant(n, 1)
    zero = MomentPolynomial.zero(n)
    m = formal_moment
    out = []
    for k in product((0, 1), repeat=6):
        pa = one
        pc = one
        for i in range(3):
            if k[i]:
                pa = pa * A[i]
            if k[i + 3]:
                pc = pc * C[i]
        out.append((f"biloc{k}", m(pa * pc), m(pa) * m(pc)))
    for name, X in (("A", A), ("B", B), ("C", C)):
        for i in range(3):
            out.append((f"E({name}{i + 1})", m(X[i]), zero))
    for i in range(3):
        for j in range(3):
            if i != j:
                out.append((f"E(A{i + 1}B{j + 1})", m(A[i] * B[j]), zero))
                out.append((f"E(B{i + 1}C{j + 1})", m(B[i] * C[j]), zero))
    for i, j, k in product(range(3), repeat=3):
        if len({i, j, k}) <= 2:
            out.append((f"E(A{i + 1}B{j + 1}C{k + 1})", m(A[i] * B[j] * C[k]), zero))
    return out


def bilocal_attainment_report() -> dict:
    """Evaluate the objective and all constraints on :func:`bilocal_construction`."""
    space = bilocal_construction()
    f = bilocal_objective()
    vals = eval_random_vars(f, space, BILOCAL_NAMES)
    mu = pushforward(space, BILOCAL_NAMES)
    from .measures import eval_poly
    violations = []
    for name, lhs, rhs in bilocal_constraints():
        d = eval_poly(lhs - rhs, mu)
        if d != 0:
            violations.append((name, d))
    binary = all(v in (-1, 1) for vals_ in space.random_variables.values() for v in vals_)
    return {"value": vals[0], "constant": len(set(vals)) == 1, "binary": binary,
            "constraints": len(bilocal_constraints()), "violations": violations}


def parse(text: str, n: int) -> MomentPolynomial:
    return parse_poly(text, n)
