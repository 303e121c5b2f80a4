import json
import random
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from mompoly.algebra import MomentPolynomial, parse_poly
from mompoly.certificates import (
    GramBlock,
    GramCertificate,
    adhoc_certificate,
    bilocal_identities_check,
    exact_psd_check,
    holder_certificate,
    holder_multivariate,
    quadratic_form,
    verify_gram_certificate,
)
from mompoly.measures import FiniteMeasure, eval_poly
from mompoly.problems import data_path

from strategies import polys


def random_rational_symmetric(rng: random.Random, dim: int) -> list[list[Fraction]]:
    """Mix of PD, singular PSD and indefinite matrices with small rational entries."""
    kind = rng.choice(["gram", "lowrank", "sym"])
    if kind == "sym":
        A = [[Fraction(rng.randint(-6, 6), rng.randint(1, 4)) for _ in range(dim)] for _ in range(dim)]
        return [[A[i][j] if i <= j else A[j][i] for j in range(dim)] for i in range(dim)]
    rank = dim if kind == "gram" else rng.randint(0, dim - 1)
    L = [[Fraction(rng.randint(-3, 3), rng.randint(1, 3)) for _ in range(rank)] for _ in range(dim)]
    return [[sum((L[i][t] * L[j][t] for t in range(rank)), Fraction(0)) for j in range(dim)]
            for i in range(dim)]


def psd_agrees_with_eigenvalues(G) -> bool:
    res = exact_psd_check(G)
    lam = float(np.linalg.eigvalsh(np.array(G, dtype=float))[0])
    if res.status == "NotPSD":
        return res.value < 0 and quadratic_form(G, res.witness) == res.value and lam < 0
    if res.status == "PSD":
        return abs(lam) < 1e-9 and res.rank < len(G)
    return lam > 0 and res.rank == len(G)


def test_psd_vs_eigenvalues_200():
    rng = random.Random(1)
    for _ in range(200):
        G = random_rational_symmetric(rng, rng.randint(1, 12))
        assert psd_agrees_with_eigenvalues(G), G


def test_psd_small_cases():
    assert exact_psd_check([[1, 0], [0, 1]]).status == "PD"
    assert exact_psd_check([[1, 1], [1, 1]]).status == "PSD"
    res = exact_psd_check([[0, 1], [1, 0]])
    assert res.status == "NotPSD"
    assert quadratic_form([[0, 1], [1, 0]], res.witness) == res.value < 0
    assert exact_psd_check([]).status in ("PD", "PSD")


# -- generated certificates ----------------------------------------------

@pytest.mark.parametrize("k", range(0, 11))
def test_holder_univariate(k):
    res = verify_gram_certificate(None, holder_certificate(k))
    assert res.valid and res.residual.is_zero


@pytest.mark.parametrize("i", [(1, 0), (0, 2), (1, 1), (2, 1), (1, 1, 1), (0, 1, 2), (4, 0, 0, 0), (1, 2, 1, 0)])
@pytest.mark.parametrize("k", [1, 2, 3])
def test_holder_multivariate(k, i):
    assert verify_gram_certificate(None, holder_multivariate(k, i)).valid


@pytest.mark.parametrize("i", [(1,), (2,), (1, 1), (2, 1), (0, 2), (1, 1, 1), (2, 0, 1), (1, 2, 2, 1), (2, 2, 2, 2)])
def test_adhoc(i):
    cert = adhoc_certificate(i)
    assert verify_gram_certificate(None, cert).valid


def test_wrong_target_detected():
    cert = holder_certificate(2)
    res = verify_gram_certificate(cert.target + 1, cert)
    assert not res.valid and res.residual == MomentPolynomial.constant(1, 1)


def test_non_psd_block_rejected():
    v = parse_poly("x1", 1)
    cert = GramCertificate(1, parse_poly("-m[2]", 1), [GramBlock("moment", [[-1]], [v])])
    res = verify_gram_certificate(None, cert)
    assert not res.valid and "semidefinite" in res.message


def test_json_round_trip(tmp_path):
    cert = adhoc_certificate((1, 2))
    cert.save(tmp_path / "c.json")
    again = GramCertificate.load(tmp_path / "c.json")
    assert again.target == cert.target
    assert verify_gram_certificate(None, again).valid


# -- cov3322 certificate ----------------------------------------------------

def test_cov3322_certificate_exact():
    cert = GramCertificate.load(data_path("cov3322.cert.json"))
    res = verify_gram_certificate(None, cert)
    assert res.valid
    assert len(cert.blocks) == 1 and cert.blocks[0].size == 8
    assert exact_psd_check(cert.blocks[0].G).status == "PD"


def test_cov3322_literal_symbol_fails():
    # with the single symbol m_{110000} in place of m(x1 + x2) the identity breaks
    raw = json.loads(data_path("cov3322.cert.json").read_text())
    for b in raw["blocks"]:
        b["v"] = [v.replace("m(x1 + x2)", "m[1,1,0,0,0,0]") for v in b["v"]]
    cert = GramCertificate.from_json(raw)
    res = verify_gram_certificate(None, cert)
    assert not res.valid and not res.residual.is_zero


# -- identities -------------------------------------------------------------

def test_bilocal_identities():
    rep = bilocal_identities_check()
    assert rep.ok and len(rep.checks) == 9
    assert not bilocal_identities_check(sign=-1).ok


# -- cone soundness -----------------------------------------------------------

S = parse_poly("1 - x1^2", 2)
unit = st.fractions(min_value=-1, max_value=1, max_denominator=3)


@st.composite
def psd_blocks(draw):
    k = draw(st.integers(1, 3))
    L = [[draw(st.integers(-2, 2)) for _ in range(k)] for _ in range(k)]
    G = [[sum(L[i][t] * L[j][t] for t in range(k)) for j in range(k)] for i in range(k)]
    tag = draw(st.sampled_from(["square", "moment", "constraint", "mixed"]))
    v = [draw(polys(max_terms=2)) for _ in range(k)]
    u = None
    if tag == "mixed":
        u = [parse_poly(draw(st.sampled_from(["1", "x1", "x2", "x1*x2", "x2^2"])), 2) for _ in range(k)]
    return GramBlock(tag, G, v, constraint=S if tag in ("constraint", "mixed") or draw(st.booleans()) else None, u=u)


@given(st.lists(psd_blocks(), min_size=1, max_size=3),
       st.lists(st.tuples(st.tuples(unit, unit), st.integers(1, 3)), min_size=1, max_size=3),
       st.tuples(unit, unit))
def test_expansion_nonnegative_on_constraint_set(blocks, atoms, X):
    cert = GramCertificate(2, MomentPolynomial.zero(2), blocks)
    total = sum(w for _, w in atoms)
    mu = FiniteMeasure.from_pairs([(p, Fraction(w, total)) for p, w in atoms])
    assert eval_poly(cert.expansion(), mu, X) >= 0
