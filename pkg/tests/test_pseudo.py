import random
from fractions import Fraction

import pytest
from hypothesis import given
from hypothesis import strategies as st

from mompoly.certificates import exact_psd_check
from mompoly.measures import FiniteMeasure, eval_poly
from mompoly.pseudo import (
    H17_HANKEL,
    TruncatedFunctional,
    extend_functional,
    h17_counterexample_report,
    h17_functional,
    h17_polynomial,
    hankel_apply,
    hankel_dimension,
    perturb_functional,
    perturb_until_pd,
    random_measure,
)

from strategies import measures


@given(measures(), st.integers(0, 2))
def test_hankel_of_measure_is_psd(mu, d):
    L = TruncatedFunctional.from_measure(mu, 2 * d)
    assert exact_psd_check(hankel_apply(L, d)).is_psd


def test_hankel_dimension():
    assert hankel_dimension(2, 3) == 10
    assert len(hankel_apply(TruncatedFunctional.uniform_box(3, 4), 2)) == hankel_dimension(3, 2)


@pytest.mark.parametrize("seed", range(4))
def test_extension_restricts_to_input(seed):
    rng = random.Random(seed)
    # enough atoms for a positive definite H_1 in two variables
    mu = random_measure(2, rng, max_atoms=6)
    L = perturb_functional(TruncatedFunctional.from_measure(mu, 2), Fraction(1, 10))
    L2, alpha = extend_functional(L)
    assert L2.degree == 4 and alpha > 0
    assert L2.restrict(2).values == L.values
    assert exact_psd_check(hankel_apply(L2, 2)).is_pd


def _min_pivot(L):
    res = exact_psd_check(hankel_apply(L, L.degree // 2))
    return min(res.pivots) if len(res.pivots) == hankel_dimension(L.n, L.degree // 2) else Fraction(0)


@pytest.mark.parametrize("point", [(0, 0), (1, -1), (2, 1)])
@pytest.mark.parametrize("delta", [Fraction(1, 2), Fraction(1, 100)])
def test_perturbation_raises_min_pivot(point, delta):
    L = TruncatedFunctional.from_measure(FiniteMeasure.dirac(point), 4)
    res = exact_psd_check(hankel_apply(L, 2))
    assert res.status == "PSD"
    P = perturb_functional(L, delta)
    assert exact_psd_check(hankel_apply(P, 2)).is_pd
    assert _min_pivot(P) > _min_pivot(L)


def test_perturb_until_pd():
    L = TruncatedFunctional.from_measure(FiniteMeasure.dirac((1, 0)), 2)
    delta, P = perturb_until_pd(L)
    assert 0 < delta <= Fraction(1, 2)
    assert exact_psd_check(hankel_apply(P, 1)).is_pd


def test_h17_matrix_pd_and_value():
    L = h17_functional()
    assert exact_psd_check(H17_HANKEL).status == "PD"
    assert L.unital
    assert L.pseudo_value(h17_polynomial()) == -7


def test_h17_nonnegative_on_measures():
    rng = random.Random(3)
    f = h17_polynomial()
    for _ in range(100):
        assert eval_poly(f, random_measure(2, rng)) >= 0
    rep = h17_counterexample_report(samples=20)
    assert rep.min_measure_value >= 0


def test_functional_validation():
    with pytest.raises(ValueError):
        TruncatedFunctional(1, 2, {(0,): 1, (1,): 0})
    with pytest.raises(ValueError):
        hankel_apply(TruncatedFunctional.uniform_box(1, 2), 2)
    data = h17_functional().to_json()
    assert TruncatedFunctional.from_json(2, data).values == h17_functional().values
