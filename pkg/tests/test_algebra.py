from fractions import Fraction

import pytest
from hypothesis import given
from hypothesis import strategies as st

from mompoly.algebra import (
    DimensionError,
    MomentMonomial,
    MomentPolynomial,
    RuleSet,
    degree,
    formal_moment,
    format_poly,
    monomial_basis,
    parse_poly,
    poly_mul,
    reduce,
)

from strategies import N, nonzero_polys, polys

P = lambda s, n=2: parse_poly(s, n)  # noqa: E731

RULES = [RuleSet.empty(N), RuleSet.involutions(N), RuleSet.from_strings(N, ["x1^2 = x1", "independent(1 | 2)"])]


# -- ring laws -------------------------------------------------------------

@given(polys(), polys())
def test_mul_commutative(f, g):
    assert poly_mul(f, g) == poly_mul(g, f)


@given(polys(), polys(), polys())
def test_mul_associative(f, g, h):
    assert poly_mul(poly_mul(f, g), h) == poly_mul(f, poly_mul(g, h))


@given(polys(), polys(), polys())
def test_distributive(f, g, h):
    assert poly_mul(f, g + h) == poly_mul(f, g) + poly_mul(f, h)


@given(nonzero_polys(), nonzero_polys())
def test_degree_additive(f, g):
    assert degree(f * g) == degree(f) + degree(g)


def test_degree_zero_raises():
    with pytest.raises(ValueError):
        degree(MomentPolynomial.zero(2))


# -- formal moment -----------------------------------------------------------

@given(polys(pure=True), polys())
def test_moment_is_pure_linear(q, f):
    assert formal_moment(q * f) == q * formal_moment(f)


@given(polys(pure=True))
def test_moment_identity_on_pure(q):
    assert formal_moment(q) == q


def test_moment_of_one_and_degree():
    assert formal_moment(MomentPolynomial.constant(2)) == MomentPolynomial.constant(2)
    f = P("x1^2*x2")
    assert formal_moment(f) == P("m[2,1]")
    # a moment symbol weighs its total degree
    assert degree(P("m[2,1]*x1")) == 4


# -- rule reduction -------------------------------------------------------

@pytest.mark.parametrize("rules", RULES, ids=["empty", "involutions", "idempotent"])
@given(f=polys())
def test_reduce_idempotent(rules, f):
    r = reduce(f, rules)
    assert reduce(r, rules) == r


@pytest.mark.parametrize("rules", RULES, ids=["empty", "involutions", "idempotent"])
@given(f=polys(), g=polys())
def test_reduce_homomorphism(rules, f, g):
    assert reduce(f * g, rules) == reduce(reduce(f, rules) * reduce(g, rules), rules)


def test_involution_reduces_symbols():
    r = RuleSet.involutions(2)
    assert reduce(P("m[2,1]"), r) == P("m[0,1]")
    assert reduce(P("x1^3*m[2,2]"), r) == P("x1")


def test_rules_round_trip():
    r = RuleSet.from_strings(3, ["x1^2 = 1", "m[0,2,0] = 2", "independent(1 | 2,3)"])
    again = RuleSet.from_strings(3, r.to_strings())
    f = P("x1^3 + m[2,1,1] + m[0,2,0]*x2", 3)
    assert reduce(f, r) == reduce(f, again) == P("x1 + m[0,1,1] + 2*x2", 3)


def test_non_terminating_rule_detected():
    with pytest.raises(ValueError):
        RuleSet.from_strings(1, ["x1 = x1^2"])
    with pytest.raises(ValueError):
        RuleSet.from_strings(1, ["m[1] = m[2]"])


# -- parsing and bases ----------------------------------------------------

@given(polys())
def test_format_parse_round_trip(f):
    assert parse_poly(format_poly(f), N) == f


def test_dimension_mismatch():
    with pytest.raises(DimensionError):
        P("x1", 1) + P("x1", 2)


def test_monomial_basis_small():
    names = [format_poly(MomentPolynomial.monomial(m)) for m in monomial_basis(1, 2)]
    assert names == ["1", "x1", "m[1]", "x1^2", "x1*m[1]", "m[1]^2", "m[2]"]
    inv = monomial_basis(1, 2, RuleSet.involutions(1))
    assert len(inv) == 5


@given(st.integers(1, 3), st.integers(0, 3))
def test_monomial_basis_degrees(n, r):
    basis = monomial_basis(n, r)
    assert len(set(basis)) == len(basis)
    assert all(m.degree <= r for m in basis)
    assert MomentMonomial.one(n) in basis


def test_exact_rationals():
    f = P("1/3*x1") * 3
    assert f == P("x1")
    assert f.coefficient(MomentMonomial.make((1, 0))) == Fraction(1)
