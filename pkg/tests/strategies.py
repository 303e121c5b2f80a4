"""Hypothesis strategies shared by the property tests."""
from fractions import Fraction

from hypothesis import strategies as st

from mompoly.algebra import MomentMonomial, MomentPolynomial

N = 2


def exps(n=N, hi=2):
    return st.tuples(*[st.integers(0, hi)] * n)


def monomials(n=N, pure=False):
    x = st.just((0,) * n) if pure else exps(n)
    syms = st.lists(exps(n).filter(any), max_size=2)
    return st.builds(lambda a, s: MomentMonomial.make(a, s), x, syms)


coeffs = st.fractions(min_value=-5, max_value=5, max_denominator=6)


def polys(n=N, pure=False, max_terms=4):
    return st.dictionaries(monomials(n, pure), coeffs, max_size=max_terms).map(
        lambda d: MomentPolynomial(n, d))


def nonzero_polys(n=N, pure=False):
    return polys(n, pure).filter(lambda f: not f.is_zero)


def points(n=N):
    return st.tuples(*[st.integers(-2, 2).map(Fraction)] * n)


def measures(n=N):
    from mompoly.measures import FiniteMeasure
    atom = st.tuples(points(n), st.integers(1, 4))
    return st.lists(atom, min_size=1, max_size=3).map(
        lambda atoms: FiniteMeasure.from_pairs([(p, Fraction(w, sum(v for _, v in atoms)))
                                                for p, w in atoms]))
