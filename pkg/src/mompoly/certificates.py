"""Exact positivity certificates.

A certificate writes a target moment polynomial as a sum of Gram blocks

* ``square``:      ``c * v^T G v``
* ``moment``:      ``m(c * v^T G v)``
* ``constraint``:  ``t * v^T G v`` for a constraint ``t``
* ``mixed``:       ``sum G_ij m(u_i u_j c) v_i v_j`` (pairs of an x-part ``u`` and a factor ``v``)

with rational positive semidefinite ``G``, checked modulo a :class:`RuleSet`.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import Iterable, Mapping, Sequence

from .algebra import (DimensionError, MomentMonomial, MomentPolynomial, RuleSet, _as_fraction,
                      format_poly, formal_moment, parse_poly)

Matrix = tuple[tuple[Fraction, ...], ...]

BLOCK_TAGS = ("square", "moment", "constraint", "mixed")


# ---------------------------------------------------------------------------
# Exact PSD test
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class PsdResult:
    """Outcome of :func:`exact_psd_check`.

    ``status`` is ``"PD"``, ``"PSD"`` or ``"NotPSD"``.  For ``NotPSD`` the
    ``witness`` satisfies ``w^T G w = value < 0`` exactly.
    """

    status: str
    rank: int
    pivots: tuple[Fraction, ...] = ()
    witness: tuple[Fraction, ...] | None = None
    value: Fraction | None = None

    @property
    def is_pd(self) -> bool:
        return self.status == "PD"

    @property
    def is_psd(self) -> bool:
        return self.status in ("PD", "PSD")

    def __bool__(self) -> bool:
        return self.is_psd


def as_rational_matrix(G) -> list[list[Fraction]]:
    rows = [[_as_fraction(v) for v in row] for row in G]
    if any(len(r) != len(rows) for r in rows):
        raise DimensionError("matrix must be square")
    return rows


def quadratic_form(G: Sequence[Sequence[Fraction]], w: Sequence[Fraction]) -> Fraction:
    total = Fraction(0)
    for i, wi in enumerate(w):
        if not wi:
            continue
        row = G[i]
        total += wi * sum((row[j] * wj for j, wj in enumerate(w) if wj), Fraction(0))
    return total


def _solve_exact(A: list[list[Fraction]], b: list[Fraction]) -> list[Fraction]:
    """Gaussian elimination for a nonsingular rational system."""
    k = len(b)
    M = [row[:] + [b[i]] for i, row in enumerate(A)]
    for c in range(k):
        p = next(r for r in range(c, k) if M[r][c])
        M[c], M[p] = M[p], M[c]
        inv = 1 / M[c][c]
        for r in range(k):
            if r != c and M[r][c]:
                f = M[r][c] * inv
                M[r] = [a - f * b_ for a, b_ in zip(M[r], M[c])]
    return [M[i][k] / M[i][i] for i in range(k)]


def _simple_witness(G) -> tuple[list[Fraction], Fraction] | None:
    n = len(G)
    for i in range(n):
        if G[i][i] < 0:
            w = [Fraction(0)] * n
            w[i] = Fraction(1)
            return w, G[i][i]
    for i in range(n):
        for j in range(i + 1, n):
            if not G[i][j]:
                continue
            s = -1 if G[i][j] > 0 else 1
            val = G[i][i] + G[j][j] + 2 * s * G[i][j]
            if val < 0:
                w = [Fraction(0)] * n
                w[i], w[j] = Fraction(1), Fraction(s)
                return w, val
    return None


def exact_psd_check(G) -> PsdResult:
    """Classify a symmetric rational matrix by exact LDL^T with diagonal pivoting.

    The largest remaining diagonal entry is used as pivot.  Once no positive
    pivot remains, the matrix is PSD iff the remaining Schur complement is
    zero; otherwise a witness with a negative quadratic form is returned.
    """
    A = as_rational_matrix(G)
    n = len(A)
    for i in range(n):
        for j in range(i + 1, n):
            if A[i][j] != A[j][i]:
                raise ValueError(f"matrix is not symmetric at ({i}, {j})")
    orig = [row[:] for row in A]
    remaining = list(range(n))
    pivoted: list[int] = []
    pivots: list[Fraction] = []
    S = {(i, j): A[i][j] for i in range(n) for j in range(n)}
    while remaining:
        p = max(remaining, key=lambda i: (S[i, i], -i))
        d = S[p, p]
        if d <= 0:
            break
        remaining.remove(p)
        pivoted.append(p)
        pivots.append(d)
        col = {i: S[i, p] for i in remaining if S[i, p]}
        for i, ci in col.items():
            f = ci / d
            for j, cj in col.items():
                if j >= i:
                    v = S[i, j] - f * cj
                    S[i, j] = v
                    S[j, i] = v
    if not remaining:
        return PsdResult("PD", n, tuple(pivots))
    # Schur complement on the unpivoted indices
    bad = None
    for i in remaining:
        if S[i, i] < 0:
            bad = {i: Fraction(1)}
            break
    if bad is None:
        for a, i in enumerate(remaining):
            for j in remaining[a + 1:]:
                if S[i, j]:
                    bad = {i: Fraction(1), j: Fraction(-1 if S[i, j] > 0 else 1)}
                    break
            if bad:
                break
    if bad is None:
        return PsdResult("PSD", len(pivoted), tuple(pivots))
    simple = _simple_witness(orig)
    if simple is not None:
        w, val = simple
        return PsdResult("NotPSD", len(pivoted), tuple(pivots), tuple(w), val)
    # lift the Schur-complement witness: w_P = -A_PP^{-1} A_PR w_R
    w = [Fraction(0)] * n
    for i, v in bad.items():
        w[i] = v
    if pivoted:
        App = [[orig[i][j] for j in pivoted] for i in pivoted]
        rhs = [-sum((orig[i][j] * v for j, v in bad.items()), Fraction(0)) for i in pivoted]
        for i, v in zip(pivoted, _solve_exact(App, rhs)):
            w[i] = v
    val = quadratic_form(orig, w)
    assert val < 0, "witness lifting failed"
    return PsdResult("NotPSD", len(pivoted), tuple(pivots), tuple(w), val)


# ---------------------------------------------------------------------------
# Gram certificates
# ---------------------------------------------------------------------------

@dataclass
class GramBlock:
    tag: str
    G: Matrix
    v: tuple[MomentPolynomial, ...]
    constraint: MomentPolynomial | None = None
    u: tuple[MomentPolynomial, ...] | None = None

    def __post_init__(self):
        if self.tag not in BLOCK_TAGS:
            raise ValueError(f"unknown block tag {self.tag!r}")
        self.G = tuple(tuple(_as_fraction(x) for x in row) for row in self.G)
        self.v = tuple(self.v)
        k = len(self.v)
        if len(self.G) != k or any(len(row) != k for row in self.G):
            raise DimensionError(f"Gram matrix is not {k}x{k}")
        if self.tag == "mixed":
            if self.u is None or len(self.u) != k:
                raise DimensionError("mixed blocks need one x-part per entry of v")
            self.u = tuple(self.u)
        if self.tag == "constraint" and self.constraint is None:
            raise ValueError("constraint blocks need a constraint polynomial")

    @property
    def size(self) -> int:
        return len(self.v)

    def expand(self, n: int) -> MomentPolynomial:
        c = self.constraint if self.constraint is not None else MomentPolynomial.constant(n, 1)
        total = MomentPolynomial.zero(n)
        k = self.size
        for i in range(k):
            for j in range(k):
                g = self.G[i][j]
                if not g:
                    continue
                if self.tag == "mixed":
                    total = total + formal_moment(self.u[i] * self.u[j] * c) * (self.v[i] * self.v[j]) * g
                else:
                    total = total + self.v[i] * self.v[j] * g
        if self.tag == "mixed":
            return total
        total = total * c
        return formal_moment(total) if self.tag == "moment" else total


@dataclass
class GramCertificate:
    n: int
    target: MomentPolynomial
    blocks: list[GramBlock] = field(default_factory=list)
    rules: RuleSet | None = None

    def __post_init__(self):
        if self.rules is None:
            self.rules = RuleSet.empty(self.n)

    def expansion(self) -> MomentPolynomial:
        total = MomentPolynomial.zero(self.n)
        for b in self.blocks:
            total = total + b.expand(self.n)
        return total

    # -- JSON ---------------------------------------------------------
    def to_json(self) -> dict:
        out = {"n": self.n, "target": format_poly(self.target),
               "rules": self.rules.to_strings(), "blocks": []}
        for b in self.blocks:
            d = {"tag": b.tag,
                 "constraint": None if b.constraint is None else format_poly(b.constraint),
                 "G": [[str(x) for x in row] for row in b.G],
                 "v": [format_poly(p) for p in b.v]}
            if b.u is not None:
                d["u"] = [format_poly(p) for p in b.u]
            out["blocks"].append(d)
        return out

    @classmethod
    def from_json(cls, data: Mapping | str) -> "GramCertificate":
        if isinstance(data, str):
            data = json.loads(data)
        n = int(data["n"])
        rules = RuleSet.from_strings(n, data.get("rules", []))
        blocks = []
        for b in data.get("blocks", []):
            con = b.get("constraint")
            blocks.append(GramBlock(
                tag=b.get("tag", "moment"),
                G=[[Fraction(str(x)) for x in row] for row in b["G"]],
                v=[parse_poly(p, n) for p in b["v"]],
                constraint=None if con in (None, "") else parse_poly(con, n),
                u=None if "u" not in b else [parse_poly(p, n) for p in b["u"]]))
        return cls(n, parse_poly(data["target"], n), blocks, rules)

    @classmethod
    def load(cls, path) -> "GramCertificate":
        return cls.from_json(Path(path).read_text())

    def save(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_json(), indent=1) + "\n")


@dataclass
class VerificationResult:
    valid: bool
    residual: MomentPolynomial
    psd: list[PsdResult]
    message: str = ""

    def __bool__(self) -> bool:
        return self.valid


def verify_gram_certificate(target: MomentPolynomial | None, cert: GramCertificate) -> VerificationResult:
    """Check ``target == sum of blocks`` modulo ``cert.rules`` with PSD Gram matrices."""
    target = cert.target if target is None else target
    if target.n != cert.n:
        raise DimensionError("target and certificate dimensions differ")
    psd = [exact_psd_check(b.G) for b in cert.blocks]
    for k, res in enumerate(psd):
        if not res.is_psd:
            return VerificationResult(False, MomentPolynomial.zero(cert.n), psd,
                                      f"block {k} is not positive semidefinite")
    residual = cert.rules.reduce(target - cert.expansion())
    if residual.is_zero:
        return VerificationResult(True, residual, psd, "valid")
    return VerificationResult(False, residual, psd, "nonzero residual")


def _one_block(n: int, weight, v: MomentPolynomial, tag: str = "moment") -> GramBlock:
    return GramBlock(tag, ((Fraction(weight),),), (v,))


# ---------------------------------------------------------------------------
# Symbolic Hoelder certificates
# ---------------------------------------------------------------------------

def _holder_terms(k: int) -> list[tuple[Fraction, tuple[int, int], tuple[int, int]]]:
    """Weighted binomials ``(w, (a, b), (c, d))`` meaning ``w * m((x^a m1^b - x^c m1^d)^2)``."""
    if k < 0:
        raise ValueError("k must be nonnegative")
    if k == 0:
        return []
    terms = [(Fraction(k), (0, k), (1, k - 1))]
    if k == 1:
        return terms
    ell = (k - 1).bit_length()  # ceil(log2 k) for k >= 2
    a = k
    for i in range(ell):
        r = a % 2
        terms.append((Fraction(2 ** i), (r, k - r), (a, k - a)))
        a = (a + 1) // 2
    return terms


def holder_certificate(k: int) -> GramCertificate:
    """Certificate for ``m_{2k} - m_1^{2k}`` (one variable) as a sum of moments of squares."""
    return holder_multivariate(k, (1,))


def holder_multivariate(k: int, i: Sequence[int]) -> GramCertificate:
    """Certificate for ``m_{2k i} - m_i^{2k}``, the image of the univariate case
    under ``x1 -> x^i``, ``m_j -> m_{j i}``."""
    i = tuple(int(v) for v in i)
    n = len(i)
    if n < 1:
        raise DimensionError("need n >= 1")
    if not any(i):
        raise ValueError("exponent vector i must be nonzero")
    one = MomentPolynomial.constant(n, 1)
    xi = MomentPolynomial.monomial(MomentMonomial(i, ()))
    mi = MomentPolynomial.symbol(i)

    def xm(a, b):
        return (xi ** a if a else one) * (mi ** b if b else one)

    blocks = [_one_block(n, w, xm(*p) - xm(*q)) for w, p, q in _holder_terms(k)]
    target = (MomentPolynomial.symbol(tuple(2 * k * v for v in i)) if k else one) - mi ** (2 * k)
    return GramCertificate(n, target, blocks)


# ---------------------------------------------------------------------------
# Certificates for sums of high even moments
# ---------------------------------------------------------------------------

def _embed(p: MomentPolynomial, n: int, offset: int) -> MomentPolynomial:
    """Shift a polynomial in ``k`` variables to variables ``offset+1..offset+k`` of ``n``."""
    def pad(e):
        return (0,) * offset + e + (0,) * (n - offset - len(e))
    terms = {MomentMonomial(pad(m.x), tuple(pad(s) for s in m.symbols)): c for m, c in p.items()}
    return MomentPolynomial(n, terms)


def _xmono(e: Sequence[int]) -> MomentPolynomial:
    return MomentPolynomial.monomial(MomentMonomial(tuple(e), ()))


def adhoc_inner_target(i: Sequence[int]) -> MomentPolynomial:
    """``sum_{j<n} 2^-j m(x_j^{2^{j+1} i_j}) + 2^{-(n-1)} m(x_n^{2^n i_n}) - m_{2i}``."""
    i = tuple(int(v) for v in i)
    n = len(i)
    total = MomentPolynomial.zero(n)
    for j in range(1, n + 1):
        e = [0] * n
        e[j - 1] = (2 ** (j + 1) if j < n else 2 ** n) * i[j - 1]
        w = Fraction(1, 2 ** j) if j < n else Fraction(1, 2 ** (n - 1))
        total = total + formal_moment(_xmono(e)) * w
    return total - formal_moment(_xmono([2 * v for v in i]))


def adhoc_inner_certificate(i: Sequence[int]) -> GramCertificate:
    """Certificate for :func:`adhoc_inner_target` by induction on the number of variables.

    One variable gives the zero polynomial and an empty certificate; each step
    peels off ``1/2 m((x1^{2 i1} - x2^{2 i2} ... xn^{2 in})^2)`` and recurses on
    the remaining variables with doubled exponents at half weight.
    """
    i = tuple(int(v) for v in i)
    n = len(i)
    if n < 1 or any(v < 0 for v in i):
        raise ValueError("i must be a nonempty vector of nonnegative integers")
    target = adhoc_inner_target(i)
    if n == 1:
        return GramCertificate(n, target, [])
    first = _xmono((2 * i[0],) + (0,) * (n - 1))
    rest = _xmono((0,) + tuple(2 * v for v in i[1:]))
    blocks = [_one_block(n, Fraction(1, 2), first - rest)]
    inner = adhoc_inner_certificate(tuple(2 * v for v in i[1:]))
    for b in inner.blocks:
        G = tuple(tuple(x / 2 for x in row) for row in b.G)
        blocks.append(GramBlock(b.tag, G, tuple(_embed(p, n, 1) for p in b.v)))
    return GramCertificate(n, target, blocks)


def adhoc_target(i: Sequence[int]) -> MomentPolynomial:
    i = tuple(int(v) for v in i)
    return adhoc_inner_target(i) + formal_moment(_xmono([2 * v for v in i])) - (
        MomentPolynomial.symbol(i) ** 2 if any(i) else MomentPolynomial.constant(len(i), 1))


def adhoc_certificate(i: Sequence[int]) -> GramCertificate:
    """Certificate for ``sum_j 2^-j m(x_j^{2^{j+1} i_j}) + 2^{-(n-1)} m(x_n^{2^n i_n}) - m_i^2``.

    Combines the inductive certificate of :func:`adhoc_inner_certificate` with
    the Hoelder block ``m((m_i - x^i)^2) = m_{2i} - m_i^2``.
    """
    i = tuple(int(v) for v in i)
    inner = adhoc_inner_certificate(i)
    blocks = list(inner.blocks)
    if any(i):
        blocks.extend(holder_multivariate(1, i).blocks)
    return GramCertificate(len(i), adhoc_target(i), blocks)


# ---------------------------------------------------------------------------
# Identity checks
# ---------------------------------------------------------------------------

@dataclass
class IdentityCheck:
    name: str
    residual: MomentPolynomial

    @property
    def ok(self) -> bool:
        return self.residual.is_zero


@dataclass
class IdentityReport:
    checks: list[IdentityCheck]

    @property
    def ok(self) -> bool:
        return all(c.ok for c in self.checks)

    def to_json(self) -> dict:
        return {"ok": self.ok,
                "checks": [{"name": c.name, "ok": c.ok, "residual": format_poly(c.residual)}
                           for c in self.checks]}


def check_identity(lhs: MomentPolynomial, rhs: MomentPolynomial, rules: RuleSet,
                   name: str = "") -> IdentityCheck:
    return IdentityCheck(name, rules.reduce(lhs - rhs))


def bilocal_identities(sign: int = 1) -> list[tuple[str, MomentPolynomial, MomentPolynomial]]:
    """The two identity families behind the upper bound 4 for the bilocal problem.

    ``sign=-1`` flips the sign of the cross term, which breaks both families
    (used as a negative control).
    """
    from .problems import bilocal_rules, bilocal_vars

    A, B, C = bilocal_vars()
    n = 9
    one = MomentPolynomial.constant(n, 1)
    m = formal_moment
    out = []
    for i in range(3):
        lhs = one - m(B[i] * C[i]) + m(A[i] * B[i]) * sign
        rhs = m((one - B[i] * C[i]) * (one + A[i] * B[i]))
        out.append((f"exact1[i={i + 1}]", lhs, rhs))
    for j in range(3):
        i, k = [t for t in range(3) if t != j]
        for a, c in ((i, k), (k, i)):
            lhs = one + m(A[a] * B[j] * C[c]) * sign + m(A[c] * B[j] * C[a])
            q = ((A[a] * A[c] + C[a] * C[c]) * B[j] + A[a] * C[a] + A[c] * C[c]) * Fraction(1, 2) \
                - m(A[a] * A[c]) * B[j]
            out.append((f"exact2[i={a + 1},j={j + 1},k={c + 1}]", lhs, m(q * q)))
    return out


def bilocal_identities_check(sign: int = 1) -> IdentityReport:
    """Reduce ``lhs - rhs`` of every bilocal identity under the bilocal rules."""
    from .problems import bilocal_rules

    rules = bilocal_rules()
    return IdentityReport([check_identity(l, r, rules, name) for name, l, r in bilocal_identities(sign)])


__all__ = [
    "PsdResult", "exact_psd_check", "quadratic_form", "GramBlock", "GramCertificate",
    "VerificationResult", "verify_gram_certificate", "holder_certificate", "holder_multivariate",
    "adhoc_target", "adhoc_certificate", "adhoc_inner_target", "adhoc_inner_certificate",
    "IdentityCheck", "IdentityReport", "check_identity", "bilocal_identities",
    "bilocal_identities_check",
]
