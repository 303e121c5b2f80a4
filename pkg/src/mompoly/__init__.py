"""Moment polynomials: exact algebra, certificates and SDP relaxations."""
from .algebra import (
    DimensionError,
    MomentMonomial,
    MomentPolynomial,
    NonTerminatingRulesError,
    RuleSet,
    ZeroPolynomialError,
    degree,
    format_poly,
    formal_moment,
    mono_mul,
    monomial_basis,
    parse_poly,
    poly_mul,
    reduce,
)

__version__ = "0.1.0"

__all__ = [
    "DimensionError", "MomentMonomial", "MomentPolynomial", "NonTerminatingRulesError",
    "RuleSet", "ZeroPolynomialError", "degree", "format_poly", "formal_moment", "mono_mul",
    "monomial_basis", "parse_poly", "poly_mul", "reduce",
]
