"""Hankel matrices and pseudo-moment functionals.

A truncated functional assigns a rational value to every monomial ``x^e`` with
``|e| <= degree``.  Applied entrywise to the symbolic Hankel matrix it yields a
rational matrix whose positive semidefiniteness characterizes pseudo-moments.
"""
from __future__ import annotations

import json
import random
from dataclasses import dataclass
from fractions import Fraction
from math import comb
from typing import Callable, Mapping, Sequence

from .algebra import Exponent, MomentPolynomial, _as_fraction, exponents_up_to, format_poly
from .certificates import PsdResult, exact_psd_check
from .measures import FiniteMeasure, eval_poly


@dataclass(frozen=True)
class TruncatedFunctional:
    """Linear functional on polynomials of degree ``<= degree`` in ``n`` variables."""

    n: int
    degree: int
    values: Mapping[Exponent, Fraction]

    def __init__(self, n: int, degree: int, values: Mapping):
        if n < 1:
            raise ValueError("need n >= 1")
        vals = {tuple(int(v) for v in e): _as_fraction(c) for e, c in values.items()}
        need = exponents_up_to(n, degree)
        missing = [e for e in need if e not in vals]
        if missing:
            raise ValueError(f"functional undefined on {len(missing)} monomials, e.g. {missing[0]}")
        extra = [e for e in vals if len(e) != n or sum(e) > degree]
        if extra:
            raise ValueError(f"values outside the degree-{degree} domain: {extra[0]}")
        object.__setattr__(self, "n", n)
        object.__setattr__(self, "degree", degree)
        object.__setattr__(self, "values", vals)

    @property
    def unital(self) -> bool:
        return self.values[(0,) * self.n] == 1

    def __call__(self, e: Sequence[int]) -> Fraction:
        e = tuple(e)
        if sum(e) > self.degree:
            raise ValueError(f"monomial {e} exceeds degree {self.degree}")
        return self.values[e]

    def apply(self, p: MomentPolynomial) -> Fraction:
        """``L(p)`` for a classical polynomial ``p``."""
        if not p.is_x_only:
            raise ValueError("L acts on polynomials without moment symbols")
        return sum((c * self(m.x) for m, c in p.items()), Fraction(0))

    def pseudo_value(self, f: MomentPolynomial) -> Fraction:
        """Value of a pure moment polynomial under ``m[e] -> L(x^e)``."""
        if not f.is_pure:
            raise ValueError("pseudo-moment evaluation needs a pure polynomial")
        total = Fraction(0)
        for m, c in f.items():
            v = c
            for s in m.symbols:
                v *= self(s)
            total += v
        return total

    def restrict(self, degree: int) -> "TruncatedFunctional":
        return TruncatedFunctional(self.n, degree,
                                   {e: c for e, c in self.values.items() if sum(e) <= degree})

    def to_json(self) -> dict:
        return {format_poly(MomentPolynomial.monomial(_xm(e))): str(c)
                for e, c in sorted(self.values.items(), key=lambda t: (sum(t[0]), [-v for v in t[0]]))}

    @classmethod
    def from_json(cls, n: int, data: Mapping | str) -> "TruncatedFunctional":
        from .algebra import parse_poly
        if isinstance(data, str):
            data = json.loads(data)
        vals = {}
        for k, v in data.items():
            p = parse_poly(k, n)
            if len(p) != 1 or not p.is_x_only:
                raise ValueError(f"functional keys must be single monomials, got {k!r}")
            (m, c), = p.items()
            vals[m.x] = Fraction(str(v)) / c
        degree = max(sum(e) for e in vals)
        return cls(n, degree, vals)

    @classmethod
    def from_measure(cls, mu: FiniteMeasure, degree: int) -> "TruncatedFunctional":
        return cls(mu.n, degree, {e: mu.moment(e) for e in exponents_up_to(mu.n, degree)})

    @classmethod
    def uniform_box(cls, n: int, degree: int) -> "TruncatedFunctional":
        """Moments of the uniform measure on ``[0,1]^n``."""
        return cls(n, degree, {e: box_moment(e) for e in exponents_up_to(n, degree)})


def _xm(e):
    from .algebra import MomentMonomial
    return MomentMonomial(tuple(e), ())


def box_moment(e: Sequence[int]) -> Fraction:
    """``integral over [0,1]^n of x^e = prod 1/(e_j+1)``."""
    v = Fraction(1)
    for k in e:
        v /= k + 1
    return v


def hankel_basis(n: int, d: int) -> list[Exponent]:
    return exponents_up_to(n, d)


def symbolic_hankel(n: int, d: int) -> list[list[Exponent]]:
    """Matrix of exponent vectors ``u+v`` over the monomial basis of degree ``<= d``.

    Entry ``(u, v)`` stands for the symbol ``m(uv)``; the zero vector stands for 1.
    """
    basis = hankel_basis(n, d)
    return [[tuple(a + b for a, b in zip(u, v)) for v in basis] for u in basis]


def hankel_apply(L: TruncatedFunctional, d: int, n: int | None = None) -> list[list[Fraction]]:
    n = L.n if n is None else n
    if n != L.n:
        raise ValueError("dimension mismatch")
    if 2 * d > L.degree:
        raise ValueError(f"H_{d} needs degree {2 * d}, functional has {L.degree}")
    return [[L(e) for e in row] for row in symbolic_hankel(n, d)]


def _schur(A, B, K):
    """``K - B^T A^{-1} B`` in exact arithmetic."""
    from .certificates import _solve_exact
    k = len(K)
    cols = [_solve_exact(A, [row[j] for row in B]) for j in range(k)]  # A^{-1} B[:, j]
    out = []
    for i in range(k):
        Bi = [row[i] for row in B]
        out.append([K[i][j] - sum((b * c for b, c in zip(Bi, cols[j])), Fraction(0)) for j in range(k)])
    return out


def extend_functional(L: TruncatedFunctional, max_doublings: int = 200) -> tuple[TruncatedFunctional, Fraction]:
    """Extend ``L`` from degree ``2d`` to ``2d+2`` keeping the Hankel image positive definite.

    Odd top-degree values are set to 0 and degree ``2d+2`` values to ``alpha``
    times the uniform-box moments, with ``alpha`` the least power of two for
    which the Schur complement is positive definite.  Returns ``(L', alpha)``.
    """
    if L.degree % 2:
        raise ValueError("extension starts from an even degree bound")
    d = L.degree // 2
    n = L.n
    A = hankel_apply(L, d)
    if not exact_psd_check(A).is_pd:
        raise ValueError("Hankel image of L is not positive definite")
    low = hankel_basis(n, d)
    top = [e for e in hankel_basis(n, d + 1) if sum(e) == d + 1]
    base = dict(L.values)
    for e in exponents_up_to(n, 2 * d + 2):
        if sum(e) == 2 * d + 1:
            base[e] = Fraction(0)
    B = [[base[tuple(a + b for a, b in zip(u, v))] for v in top] for u in low]
    K0 = [[box_moment(tuple(a + b for a, b in zip(u, v))) for v in top] for u in top]
    BtAB = _schur(A, B, [[Fraction(0)] * len(top) for _ in top])  # -B^T A^{-1} B
    alpha = Fraction(1)
    for _ in range(max_doublings):
        S = [[alpha * K0[i][j] + BtAB[i][j] for j in range(len(top))] for i in range(len(top))]
        if exact_psd_check(S).is_pd:
            break
        alpha *= 2
    else:
        raise RuntimeError("no suitable alpha found")
    for e in exponents_up_to(n, 2 * d + 2):
        if sum(e) == 2 * d + 2:
            base[e] = alpha * box_moment(e)
    return TruncatedFunctional(n, 2 * d + 2, base), alpha


def perturb_functional(L: TruncatedFunctional, delta) -> TruncatedFunctional:
    """``(1 - delta) L + delta L0`` with ``L0`` the uniform-box moments."""
    delta = _as_fraction(delta)
    if not 0 <= delta <= 1:
        raise ValueError("delta must lie in [0, 1]")
    return TruncatedFunctional(L.n, L.degree,
                               {e: (1 - delta) * c + delta * box_moment(e) for e, c in L.values.items()})


def perturb_until_pd(L: TruncatedFunctional, delta=Fraction(1, 2), max_halvings: int = 64):
    """Halve ``delta`` from the given start while the perturbed image stays PD.

    Returns the smallest tried ``delta`` with a PD Hankel image, together with
    the perturbed functional.
    """
    d = L.degree // 2
    delta = _as_fraction(delta)
    best = None
    for _ in range(max_halvings):
        P = perturb_functional(L, delta)
        if not exact_psd_check(hankel_apply(P, d)).is_pd:
            break
        best = (delta, P)
        delta /= 2
    if best is None:
        raise RuntimeError("perturbation did not produce a positive definite image")
    return best


# ---------------------------------------------------------------------------
# A pseudo-moment functional that is not a moment functional
# ---------------------------------------------------------------------------

#: Hankel image of a degree-6 functional in two variables, rows and columns
#: indexed by 1, x1, x2, x1^2, x1x2, x2^2, x1^3, x1^2x2, x1x2^2, x2^3.
H17_HANKEL = [
    [1, 0, 0, 5, 0, 5, 0, 0, 0, 0],
    [0, 5, 0, 0, 0, 0, 26, 0, 2, 0],
    [0, 0, 5, 0, 0, 0, 0, 2, 0, 563],
    [5, 0, 0, 26, 0, 2, 0, 0, 0, 0],
    [0, 0, 0, 0, 2, 0, 0, 0, 0, 0],
    [5, 0, 0, 2, 0, 563, 0, 0, 0, 0],
    [0, 26, 0, 0, 0, 0, 587, 0, 1, 0],
    [0, 0, 2, 0, 0, 0, 0, 1, 0, 1],
    [0, 2, 0, 0, 0, 0, 1, 0, 1, 0],
    [0, 0, 563, 0, 0, 0, 0, 1, 0, 319642],
]


def functional_from_hankel(H: Sequence[Sequence], n: int, d: int) -> TruncatedFunctional:
    """Read off ``L`` from a Hankel image, checking the Hankel structure."""
    sym = symbolic_hankel(n, d)
    if len(H) != len(sym):
        raise ValueError("matrix size does not match the monomial basis")
    vals: dict[Exponent, Fraction] = {}
    for i, row in enumerate(sym):
        for j, e in enumerate(row):
            v = _as_fraction(H[i][j])
            if e in vals and vals[e] != v:
                raise ValueError(f"not a Hankel matrix: conflicting values for x^{e}")
            vals[e] = v
    return TruncatedFunctional(n, 2 * d, vals)


def h17_functional() -> TruncatedFunctional:
    return functional_from_hankel(H17_HANKEL, 2, 3)


def h17_polynomial() -> MomentPolynomial:
    """``m[4,2] m[2,4] - m[2,2]^3``."""
    return (MomentPolynomial.symbol((4, 2)) * MomentPolynomial.symbol((2, 4))
            - MomentPolynomial.symbol((2, 2)) ** 3)


def random_measure(n: int, rng: random.Random, max_atoms: int = 4, span: int = 3,
                   denom: int = 2) -> FiniteMeasure:
    k = rng.randint(1, max_atoms)
    atoms = set()
    while len(atoms) < k:
        atoms.add(tuple(Fraction(rng.randint(-span * denom, span * denom), denom) for _ in range(n)))
    raw = [rng.randint(1, 9) for _ in atoms]
    tot = sum(raw)
    return FiniteMeasure(sorted(atoms), [Fraction(r, tot) for r in raw])


@dataclass
class H17Report:
    positive_definite: bool
    psd: PsdResult
    pseudo_value: Fraction
    measure_values: list[Fraction]
    dirac_value: Fraction

    @property
    def min_measure_value(self) -> Fraction:
        return min(self.measure_values)

    def to_json(self) -> dict:
        return {"positive_definite": self.positive_definite,
                "pseudo_value": str(self.pseudo_value),
                "measures_checked": len(self.measure_values),
                "min_measure_value": str(self.min_measure_value),
                "dirac_value": str(self.dirac_value)}


def h17_counterexample_report(samples: int = 50, seed: int = 0) -> H17Report:
    """PD check of the Hankel image, the negative pseudo-value, and nonnegativity on measures."""
    L = h17_functional()
    psd = exact_psd_check(hankel_apply(L, 3))
    f = h17_polynomial()
    rng = random.Random(seed)
    vals = [eval_poly(f, random_measure(2, rng)) for _ in range(samples)]
    return H17Report(psd.is_pd, psd, L.pseudo_value(f), vals,
                     eval_poly(f, FiniteMeasure.dirac((1, 1))))


def hankel_dimension(n: int, d: int) -> int:
    return comb(n + d, d)


__all__ = [
    "TruncatedFunctional", "box_moment", "hankel_basis", "symbolic_hankel", "hankel_apply",
    "extend_functional", "perturb_functional", "perturb_until_pd", "functional_from_hankel",
    "h17_functional", "h17_polynomial", "h17_counterexample_report", "H17Report",
    "random_measure", "hankel_dimension", "H17_HANKEL",
]
