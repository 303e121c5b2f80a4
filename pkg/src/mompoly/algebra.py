"""Exact arithmetic for moment polynomials.

A moment polynomial lives in the ring generated by commuting variables
``x1 .. xn`` and formal mixed moments ``m[i1,...,in]``.  Coefficients are
:class:`fractions.Fraction` throughout; nothing in this module touches
floating point.

Monomials are :class:`MomentMonomial` tuples ``(x, symbols)`` where ``x`` is
the exponent vector of the free variables and ``symbols`` is a sorted tuple of
moment exponent vectors, repeated according to multiplicity.  The symbol
``m[0,...,0]`` equals 1 and is never stored.

Text format (used by the CLI and by certificate/spec files)::

    3/2*x1^2*m[1,0]^2 - m[2,2] + 1

``m(...)`` is also accepted by the parser and applies the formal moment map to
the enclosed expression.
"""
from __future__ import annotations

import itertools
import re
from fractions import Fraction
from functools import lru_cache
from numbers import Rational
from types import MappingProxyType
from typing import Iterable, Iterator, Mapping, NamedTuple

Exponent = tuple[int, ...]

#: Hard cap on rewriting passes before a rule set is declared non-terminating.
MAX_REWRITE_PASSES = 10_000


class DimensionError(ValueError):
    """Operands live over different numbers of variables."""


class ZeroPolynomialError(ValueError):
    """Raised where an operation is undefined for the zero polynomial."""


class NonTerminatingRulesError(RuntimeError):
    """Rule application did not reach a fixpoint within the pass cap."""


@lru_cache(maxsize=None)
def symbol_key(e: Exponent) -> tuple:
    """Degree-lex sort key for exponent vectors with ``x1 > ... > xn``."""
    return (sum(e), tuple(-v for v in e))


def moment_symbol(exponents: Iterable[int]) -> Exponent:
    """Validate and return a moment-symbol exponent vector."""
    e = tuple(int(v) for v in exponents)
    if not e:
        raise DimensionError("moment symbols need at least one variable")
    if any(v < 0 for v in e):
        raise ValueError(f"negative exponent in moment symbol {e}")
    if not any(e):
        raise ValueError("m[0,...,0] is the constant 1 and is not stored as a symbol")
    return e


def _sorted_symbols(symbols: Iterable[Exponent]) -> tuple[Exponent, ...]:
    return tuple(sorted(symbols, key=symbol_key))


class MomentMonomial(NamedTuple):
    """Product ``x^x * prod(m[s] for s in symbols)``."""

    x: Exponent
    symbols: tuple[Exponent, ...] = ()

    @classmethod
    def make(cls, x: Iterable[int], symbols: Iterable[Iterable[int]] = ()) -> "MomentMonomial":
        x = tuple(int(v) for v in x)
        if not x:
            raise DimensionError("need n >= 1 variables")
        if any(v < 0 for v in x):
            raise ValueError("negative exponent")
        syms = []
        for s in symbols:
            s = tuple(int(v) for v in s)
            if len(s) != len(x):
                raise DimensionError(f"symbol {s} does not match n={len(x)}")
            if any(v < 0 for v in s):
                raise ValueError("negative exponent")
            if any(s):
                syms.append(s)
        return cls(x, _sorted_symbols(syms))

    @classmethod
    def one(cls, n: int) -> "MomentMonomial":
        if n < 1:
            raise DimensionError("need n >= 1 variables")
        return cls((0,) * n, ())

    @property
    def n(self) -> int:
        return len(self.x)

    @property
    def degree(self) -> int:
        return sum(self.x) + sum(sum(s) for s in self.symbols)

    @property
    def is_pure(self) -> bool:
        return not any(self.x)

    @property
    def is_one(self) -> bool:
        return not self.symbols and not any(self.x)

    def sort_key(self) -> tuple:
        return mono_key(self)

    def __mul__(self, other):  # type: ignore[override]
        if isinstance(other, MomentMonomial):
            return mono_mul(self, other)
        return NotImplemented

    def __str__(self) -> str:
        return _format_monomial(self) or "1"


def mono_key(m: MomentMonomial) -> tuple:
    """Graded order: total degree, then x-exponents (x1 first), then symbols."""
    return (
        sum(m.x) + sum(sum(s) for s in m.symbols),
        tuple(-v for v in m.x),
        tuple(symbol_key(s) for s in m.symbols),
    )


def mono_mul(a: MomentMonomial, b: MomentMonomial) -> MomentMonomial:
    if len(a.x) != len(b.x):
        raise DimensionError(f"cannot multiply monomials over n={len(a.x)} and n={len(b.x)}")
    x = tuple(i + j for i, j in zip(a.x, b.x))
    if not a.symbols:
        syms = b.symbols
    elif not b.symbols:
        syms = a.symbols
    else:
        syms = _sorted_symbols(a.symbols + b.symbols)
    return MomentMonomial(x, syms)


def _as_fraction(c) -> Fraction:
    if isinstance(c, Fraction):
        return c
    if isinstance(c, (int, Rational)):
        return Fraction(c)
    if isinstance(c, str):
        return Fraction(c)
    raise TypeError(f"exact rational coefficient required, got {type(c).__name__}")


class MomentPolynomial:
    """Finite map from :class:`MomentMonomial` to nonzero rationals.

    Instances are immutable; arithmetic returns new objects.  Scalars
    (``int``/``Fraction``) are promoted automatically.
    """

    __slots__ = ("n", "_terms", "_hash")

    def __init__(self, n: int, terms: Mapping[MomentMonomial, object] | None = None, *, _trusted=False):
        if n < 1:
            raise DimensionError("need n >= 1 variables")
        self.n = n
        self._hash = None
        if _trusted:
            self._terms = terms
            return
        clean: dict[MomentMonomial, Fraction] = {}
        for m, c in (terms or {}).items():
            if not isinstance(m, MomentMonomial):
                m = MomentMonomial.make(*m)
            if len(m.x) != n:
                raise DimensionError(f"monomial {m} does not match n={n}")
            c = _as_fraction(c)
            if c:
                clean[m] = clean.get(m, 0) + c
                if not clean[m]:
                    del clean[m]
        self._terms = clean

    # -- constructors -------------------------------------------------
    @classmethod
    def zero(cls, n: int) -> "MomentPolynomial":
        return cls(n, {}, _trusted=True)

    @classmethod
    def constant(cls, n: int, c=1) -> "MomentPolynomial":
        c = _as_fraction(c)
        return cls(n, {MomentMonomial.one(n): c} if c else {}, _trusted=True)

    @classmethod
    def variable(cls, n: int, j: int) -> "MomentPolynomial":
        """The free variable ``x_j`` (1-based)."""
        if not 1 <= j <= n:
            raise DimensionError(f"x{j} out of range for n={n}")
        x = [0] * n
        x[j - 1] = 1
        return cls(n, {MomentMonomial(tuple(x), ()): Fraction(1)}, _trusted=True)

    @classmethod
    def symbol(cls, exponents: Iterable[int]) -> "MomentPolynomial":
        e = moment_symbol(exponents)
        return cls(len(e), {MomentMonomial((0,) * len(e), (e,)): Fraction(1)}, _trusted=True)

    @classmethod
    def monomial(cls, m: MomentMonomial, c=1) -> "MomentPolynomial":
        c = _as_fraction(c)
        return cls(len(m.x), {m: c} if c else {}, _trusted=True)

    # -- inspection ---------------------------------------------------
    @property
    def terms(self) -> Mapping[MomentMonomial, Fraction]:
        return MappingProxyType(self._terms)

    def items(self):
        return self._terms.items()

    def monomials(self) -> list[MomentMonomial]:
        return sorted(self._terms, key=mono_key)

    def coefficient(self, m: MomentMonomial) -> Fraction:
        return self._terms.get(m, Fraction(0))

    @property
    def constant_term(self) -> Fraction:
        return self._terms.get(MomentMonomial.one(self.n), Fraction(0))

    @property
    def is_zero(self) -> bool:
        return not self._terms

    @property
    def is_pure(self) -> bool:
        return all(not any(m.x) for m in self._terms)

    @property
    def is_x_only(self) -> bool:
        """True for classical polynomials (no moment symbols)."""
        return all(not m.symbols for m in self._terms)

    def degree(self) -> int:
        return degree(self)

    def __len__(self) -> int:
        return len(self._terms)

    def __bool__(self) -> bool:
        return bool(self._terms)

    # -- arithmetic ---------------------------------------------------
    def _coerce(self, other) -> "MomentPolynomial":
        if isinstance(other, MomentPolynomial):
            if other.n != self.n:
                raise DimensionError(f"n mismatch: {self.n} vs {other.n}")
            return other
        if isinstance(other, MomentMonomial):
            return MomentPolynomial.monomial(other)
        return MomentPolynomial.constant(self.n, _as_fraction(other))

    def __add__(self, other):
        try:
            other = self._coerce(other)
        except TypeError:
            return NotImplemented
        return MomentPolynomial(self.n, _add(self._terms, other._terms, 1), _trusted=True)

    __radd__ = __add__

    def __sub__(self, other):
        try:
            other = self._coerce(other)
        except TypeError:
            return NotImplemented
        return MomentPolynomial(self.n, _add(self._terms, other._terms, -1), _trusted=True)

    def __rsub__(self, other):
        try:
            other = self._coerce(other)
        except TypeError:
            return NotImplemented
        return other - self

    def __neg__(self):
        return MomentPolynomial(self.n, {m: -c for m, c in self._terms.items()}, _trusted=True)

    def __mul__(self, other):
        if isinstance(other, MomentPolynomial):
            return poly_mul(self, other)
        try:
            c = _as_fraction(other)
        except TypeError:
            return NotImplemented
        if not c:
            return MomentPolynomial.zero(self.n)
        return MomentPolynomial(self.n, {m: v * c for m, v in self._terms.items()}, _trusted=True)

    __rmul__ = __mul__

    def __truediv__(self, other):
        c = _as_fraction(other)
        return self * (1 / c)

    def __pow__(self, k: int):
        if not isinstance(k, int) or k < 0:
            raise ValueError("only nonnegative integer powers")
        result = MomentPolynomial.constant(self.n, 1)
        base = self
        while k:
            if k & 1:
                result = result * base
            k >>= 1
            if k:
                base = base * base
        return result

    def __eq__(self, other):
        if isinstance(other, MomentPolynomial):
            return self.n == other.n and self._terms == other._terms
        try:
            return self._terms == MomentPolynomial.constant(self.n, _as_fraction(other))._terms
        except TypeError:
            return NotImplemented

    def __hash__(self):
        if self._hash is None:
            self._hash = hash((self.n, frozenset(self._terms.items())))
        return self._hash

    def __repr__(self):
        return f"MomentPolynomial({self.n}, {format_poly(self)!r})"

    def __str__(self):
        return format_poly(self)


def _add(a: Mapping, b: Mapping, sign: int) -> dict:
    out = dict(a)
    for m, c in b.items():
        v = out.get(m, 0) + (c if sign > 0 else -c)
        if v:
            out[m] = v
        else:
            out.pop(m, None)
    return out


def _mul_terms(a: Mapping, b: Mapping) -> dict:
    out: dict[MomentMonomial, Fraction] = {}
    for ma, ca in a.items():
        for mb, cb in b.items():
            m = mono_mul(ma, mb)
            v = out.get(m, 0) + ca * cb
            if v:
                out[m] = v
            else:
                out.pop(m, None)
    return out


def poly_mul(f: MomentPolynomial, g: MomentPolynomial) -> MomentPolynomial:
    if f.n != g.n:
        raise DimensionError(f"n mismatch: {f.n} vs {g.n}")
    return MomentPolynomial(f.n, _mul_terms(f._terms, g._terms), _trusted=True)


def _moment_of_monomial(m: MomentMonomial) -> MomentMonomial:
    if not any(m.x):
        return m
    return MomentMonomial((0,) * len(m.x), _sorted_symbols(m.symbols + (m.x,)))


def formal_moment(f: MomentPolynomial) -> MomentPolynomial:
    """The unital pure-linear moment map: ``x^i -> m[i]``, pure factors pass through."""
    out: dict[MomentMonomial, Fraction] = {}
    for m, c in f._terms.items():
        mm = _moment_of_monomial(m)
        v = out.get(mm, 0) + c
        if v:
            out[mm] = v
        else:
            out.pop(mm, None)
    return MomentPolynomial(f.n, out, _trusted=True)


def degree(f: MomentPolynomial) -> int:
    if not f._terms:
        raise ZeroPolynomialError("the zero polynomial has no degree")
    return max(m.degree for m in f._terms)


# ---------------------------------------------------------------------------
# Rule-based reduction
# ---------------------------------------------------------------------------

class XPowerRule(NamedTuple):
    """``x_var^power -> sum(coeffs[k] * x_var^k)``, with ``var`` 0-based."""

    var: int
    power: int
    coeffs: tuple[Fraction, ...]


class RuleSet:
    """Oriented, terminating substitution rules.

    Supported rule classes:

    * ``x_j^p = c_0 + c_1 x_j + ... + c_{p-1} x_j^{p-1}`` (e.g. ``x_j^2 = 1``),
      applied to free variables and, by linearity of the moment map, inside
      moment symbols;
    * ``m[i] = q`` with ``q`` pure and built from symbols strictly smaller
      than ``m[i]`` in the graded order;
    * independence ``m[a+c] = m[a] m[c]`` whenever the support of a symbol
      splits across two disjoint variable groups;
    * pure monomial rewrites ``m[a] m[b] ... = q`` with ``q`` graded-smaller.

    Reduction is innermost first: x-rules inside each symbol, then symbol rules,
    then the monomial rewrites, iterated to a fixpoint.
    """

    def __init__(self, n: int, x_rules: Iterable[XPowerRule] = (),
                 symbol_rules: Mapping[Exponent, MomentPolynomial] | None = None,
                 factorizations: Iterable[tuple[Iterable[int], Iterable[int]]] = (),
                 monomial_rules: Iterable[tuple[MomentMonomial, MomentPolynomial]] = ()):
        if n < 1:
            raise DimensionError("need n >= 1 variables")
        self.n = n
        xr: dict[int, XPowerRule] = {}
        for r in x_rules:
            if not 0 <= r.var < n:
                raise DimensionError(f"x-rule variable {r.var + 1} out of range")
            if r.power < 1 or len(r.coeffs) != r.power:
                raise ValueError("x-rule replacement must have degree below the rewritten power")
            if r.var in xr:
                raise ValueError(f"two x-rules for x{r.var + 1}")
            xr[r.var] = XPowerRule(r.var, r.power, tuple(_as_fraction(c) for c in r.coeffs))
        self.x_rules = xr
        self.symbol_rules: dict[Exponent, MomentPolynomial] = {}
        for s, q in (symbol_rules or {}).items():
            s = moment_symbol(s)
            if len(s) != n or q.n != n:
                raise DimensionError("symbol rule dimension mismatch")
            if not q.is_pure:
                raise ValueError("symbol rules must have pure right-hand sides")
            for m in q.terms:
                for t in m.symbols:
                    if symbol_key(t) >= symbol_key(s):
                        raise ValueError(
                            f"symbol rule for m{list(s)} is not decreasing: rhs contains m{list(t)}")
            self.symbol_rules[s] = q
        self.factorizations = []
        for a, b in factorizations:
            a, b = frozenset(a), frozenset(b)
            if a & b:
                raise ValueError("factorization groups must be disjoint")
            if not all(0 <= v < n for v in a | b):
                raise DimensionError("factorization group index out of range")
            self.factorizations.append((a, b))
        self.monomial_rules = []
        for pat, q in monomial_rules:
            if not pat.is_pure or len(pat.symbols) < 2:
                raise ValueError("monomial rules rewrite products of at least two symbols")
            if not q.is_pure:
                raise ValueError("monomial rules must have pure right-hand sides")
            for m in q.terms:
                if mono_key(m) >= mono_key(pat):
                    raise ValueError("monomial rule is not decreasing in the graded order")
            self.monomial_rules.append((pat, q))
        self._xcache: dict[tuple[int, int], dict[int, Fraction]] = {}
        self._scache: dict[Exponent, dict] = {}
        self._mcache: dict[MomentMonomial, dict] = {}
        self._passes = 0

    # -- construction helpers -----------------------------------------
    @classmethod
    def empty(cls, n: int) -> "RuleSet":
        return cls(n)

    @classmethod
    def involutions(cls, n: int, variables: Iterable[int] | None = None) -> "RuleSet":
        """``x_j^2 = 1`` for the given 1-based variables (default: all)."""
        variables = range(1, n + 1) if variables is None else variables
        return cls(n, [XPowerRule(j - 1, 2, (Fraction(1), Fraction(0))) for j in variables])

    def union(self, other: "RuleSet") -> "RuleSet":
        if other.n != self.n:
            raise DimensionError("rule sets over different n")
        sym = dict(self.symbol_rules)
        sym.update(other.symbol_rules)
        return RuleSet(self.n, list(self.x_rules.values()) + list(other.x_rules.values()), sym,
                       self.factorizations + other.factorizations,
                       self.monomial_rules + other.monomial_rules)

    @property
    def is_empty(self) -> bool:
        return not (self.x_rules or self.symbol_rules or self.factorizations or self.monomial_rules)

    def __len__(self) -> int:
        return (len(self.x_rules) + len(self.symbol_rules) + len(self.factorizations)
                + len(self.monomial_rules))

    def x_bound(self, var: int) -> int | None:
        """Largest irreducible power of ``x_var`` (0-based), or None if unbounded."""
        r = self.x_rules.get(var)
        return None if r is None else r.power - 1

    # -- reduction ----------------------------------------------------
    def _tick(self):
        self._passes += 1
        if self._passes > MAX_REWRITE_PASSES:
            self._passes = 0
            raise NonTerminatingRulesError(
                f"no fixpoint after {MAX_REWRITE_PASSES} rewriting passes")

    def _reduce_xpow(self, var: int, e: int) -> dict[int, Fraction]:
        key = (var, e)
        hit = self._xcache.get(key)
        if hit is not None:
            return hit
        rule = self.x_rules.get(var)
        if rule is None or e < rule.power:
            out = {e: Fraction(1)}
        else:
            # x^e = x^(e-p) * (c0 + c1 x + ...), reduce each resulting power
            out = {}
            for k, c in enumerate(rule.coeffs):
                if not c:
                    continue
                self._tick()
                for p, d in self._reduce_xpow(var, e - rule.power + k).items():
                    v = out.get(p, 0) + c * d
                    if v:
                        out[p] = v
                    else:
                        out.pop(p, None)
        self._xcache[key] = out
        return out

    def _reduce_x_part(self, x: Exponent) -> dict[Exponent, Fraction]:
        """Reduce a pure x-monomial; returns a map from x-exponents to coefficients."""
        out = {tuple(0 for _ in x): Fraction(1)}
        for j, e in enumerate(x):
            if e == 0:
                continue
            uni = self._reduce_xpow(j, e)
            nxt: dict[Exponent, Fraction] = {}
            for ex, c in out.items():
                for p, d in uni.items():
                    k = ex[:j] + (p,) + ex[j + 1:]
                    nxt[k] = nxt.get(k, 0) + c * d
            out = {k: v for k, v in nxt.items() if v}
        return out

    def _reduce_symbol(self, s: Exponent) -> dict:
        hit = self._scache.get(s)
        if hit is not None:
            return hit
        self._tick()
        n = self.n
        one = MomentMonomial((0,) * n, ())
        if any(self.x_rules.get(j) is not None and e >= self.x_rules[j].power
               for j, e in enumerate(s)):
            out: dict = {}
            for ex, c in self._reduce_x_part(s).items():
                part = {one: Fraction(1)} if not any(ex) else self._reduce_symbol(ex)
                for m, d in part.items():
                    v = out.get(m, 0) + c * d
                    if v:
                        out[m] = v
                    else:
                        out.pop(m, None)
        elif s in self.symbol_rules:
            out = self._reduce_terms(self.symbol_rules[s]._terms)
        else:
            out = None
            support = {j for j, e in enumerate(s) if e}
            for a, b in self.factorizations:
                if support <= (a | b) and support & a and support & b:
                    sa = tuple(e if j in a else 0 for j, e in enumerate(s))
                    sb = tuple(e if j in b else 0 for j, e in enumerate(s))
                    out = _mul_terms(self._reduce_symbol(sa), self._reduce_symbol(sb))
                    out = self._apply_monomial_rules(out)
                    break
            if out is None:
                out = {MomentMonomial((0,) * n, (s,)): Fraction(1)}
        self._scache[s] = out
        return out

    def _apply_monomial_rules(self, terms: dict) -> dict:
        if not self.monomial_rules:
            return terms
        changed = True
        while changed:
            changed = False
            nxt: dict = {}
            for m, c in terms.items():
                rewritten = None
                for pat, q in self.monomial_rules:
                    rest = _divide_symbols(m.symbols, pat.symbols)
                    if rest is not None:
                        rewritten = _mul_terms({MomentMonomial(m.x, rest): c}, q._terms)
                        break
                if rewritten is None:
                    rewritten = {m: c}
                else:
                    changed = True
                    self._tick()
                for k, v in rewritten.items():
                    t = nxt.get(k, 0) + v
                    if t:
                        nxt[k] = t
                    else:
                        nxt.pop(k, None)
            terms = nxt
        return terms

    def reduce_monomial(self, m: MomentMonomial) -> dict:
        hit = self._mcache.get(m)
        if hit is not None:
            return hit
        n = self.n
        if any(m.x):
            out = {MomentMonomial(ex, ()): c for ex, c in self._reduce_x_part(m.x).items()}
        else:
            out = {m if not m.symbols else MomentMonomial(m.x, ()): Fraction(1)}
        for s in m.symbols:
            out = _mul_terms(out, self._reduce_symbol(s))
            if not out:
                break
        out = self._apply_monomial_rules(out)
        self._mcache[m] = out
        return out

    def _reduce_terms(self, terms: Mapping) -> dict:
        out: dict = {}
        for m, c in terms.items():
            for k, d in self.reduce_monomial(m).items():
                v = out.get(k, 0) + c * d
                if v:
                    out[k] = v
                else:
                    out.pop(k, None)
        return out

    def reduce(self, f: MomentPolynomial) -> MomentPolynomial:
        if f.n != self.n:
            raise DimensionError(f"rules over n={self.n} applied to n={f.n}")
        if self.is_empty:
            return f
        self._passes = 0
        return MomentPolynomial(f.n, self._reduce_terms(f._terms), _trusted=True)

    def is_reduced_symbol(self, s: Exponent) -> bool:
        red = self._reduce_symbol(s)
        return len(red) == 1 and next(iter(red)) == MomentMonomial((0,) * self.n, (s,))

    # -- serialization -------------------------------------------------
    def to_strings(self) -> list[str]:
        out = []
        n = self.n
        for r in self.x_rules.values():
            lhs = f"x{r.var + 1}^{r.power}"
            rhs = MomentPolynomial(n, {MomentMonomial(tuple(k if j == r.var else 0 for j in range(n)), ()): c
                                       for k, c in enumerate(r.coeffs) if c})
            out.append(f"{lhs} = {format_poly(rhs)}")
        for s, q in self.symbol_rules.items():
            out.append(f"{_format_symbol(s)} = {format_poly(q)}")
        for a, b in self.factorizations:
            out.append("independent(" + ",".join(str(v + 1) for v in sorted(a)) + " | "
                       + ",".join(str(v + 1) for v in sorted(b)) + ")")
        for pat, q in self.monomial_rules:
            out.append(f"{_format_monomial(pat)} = {format_poly(q)}")
        return out

    @classmethod
    def from_strings(cls, n: int, rules: Iterable[str]) -> "RuleSet":
        x_rules, sym, facs, monos = [], {}, [], []
        for text in rules:
            text = text.strip()
            mfac = re.fullmatch(r"independent\(\s*([\d,\s]+)\|([\d,\s]+)\)", text)
            if mfac:
                a = [int(t) - 1 for t in mfac.group(1).split(",") if t.strip()]
                b = [int(t) - 1 for t in mfac.group(2).split(",") if t.strip()]
                facs.append((a, b))
                continue
            if text.count("=") != 1:
                raise ValueError(f"cannot parse rule {text!r}")
            lhs_s, rhs_s = text.split("=")
            lhs, rhs = parse_poly(lhs_s, n), parse_poly(rhs_s, n)
            if len(lhs) != 1 or next(iter(lhs.terms.values())) != 1:
                raise ValueError(f"rule lhs must be a single monic monomial: {text!r}")
            m = next(iter(lhs.terms))
            if not m.symbols and sum(1 for e in m.x if e) == 1:
                j = next(i for i, e in enumerate(m.x) if e)
                p = m.x[j]
                coeffs = [Fraction(0)] * p
                for t, c in rhs.terms.items():
                    if t.symbols or any(e for i, e in enumerate(t.x) if i != j) or t.x[j] >= p:
                        raise ValueError(f"x-rule rhs must be univariate of lower degree: {text!r}")
                    coeffs[t.x[j]] = c
                x_rules.append(XPowerRule(j, p, tuple(coeffs)))
            elif m.is_pure and len(m.symbols) == 1:
                sym[m.symbols[0]] = rhs
            elif m.is_pure:
                monos.append((m, rhs))
            else:
                raise ValueError(f"unsupported rule shape: {text!r}")
        return cls(n, x_rules, sym, facs, monos)


def _divide_symbols(have: tuple, need: tuple):
    """Multiset difference ``have - need`` or None if ``need`` does not divide."""
    rest = list(have)
    for s in need:
        try:
            rest.remove(s)
        except ValueError:
            return None
    return tuple(rest)


def reduce(f: MomentPolynomial, rules: RuleSet) -> MomentPolynomial:
    return rules.reduce(f)


# ---------------------------------------------------------------------------
# Monomial bases
# ---------------------------------------------------------------------------

def exponents_up_to(n: int, d: int) -> list[Exponent]:
    """All exponent vectors of total degree <= d in degree-lex order (x1 > ... > xn)."""
    out = []
    for t in range(d + 1):
        level = [e for e in _compositions(n, t)]
        level.sort(key=lambda e: tuple(-v for v in e))
        out.extend(level)
    return out


def _compositions(n: int, t: int) -> Iterator[Exponent]:
    if n == 1:
        yield (t,)
        return
    for first in range(t, -1, -1):
        for rest in _compositions(n - 1, t - first):
            yield (first,) + rest


def monomial_basis(n: int, r: int, rules: RuleSet | None = None, *, pure: bool = False) -> list[MomentMonomial]:
    """Rule-reduced monomials of degree <= r in graded order.

    With ``pure=True`` only monomials without free variables are listed.
    """
    if r < 0:
        raise ValueError("r must be nonnegative")
    rules = rules if rules is not None else RuleSet.empty(n)
    if rules.n != n:
        raise DimensionError("rule set dimension mismatch")
    atoms: list[tuple[str, object, int, int | None]] = []
    if not pure:
        for j in range(n):
            atoms.append(("x", j, 1, rules.x_bound(j)))
    for e in exponents_up_to(n, r):
        if any(e) and rules.is_reduced_symbol(e):
            atoms.append(("m", e, sum(e), None))

    found: set[MomentMonomial] = set()
    x0 = [0] * n

    def rec(i: int, budget: int, syms: list):
        if i == len(atoms):
            m = MomentMonomial(tuple(x0), _sorted_symbols(syms))
            for k in rules.reduce_monomial(m):
                if k.degree <= r:
                    found.add(k)
            return
        kind, payload, d, cap = atoms[i]
        k = 0
        while k * d <= budget and (cap is None or k <= cap):
            if kind == "x":
                x0[payload] = k
                rec(i + 1, budget - k * d, syms)
            else:
                rec(i + 1, budget - k * d, syms + [payload] * k)
            k += 1
        if kind == "x":
            x0[payload] = 0

    rec(0, r, [])
    return sorted(found, key=mono_key)


# ---------------------------------------------------------------------------
# Text format
# ---------------------------------------------------------------------------

def _format_symbol(s: Exponent) -> str:
    return "m[" + ",".join(str(v) for v in s) + "]"


def _format_monomial(m: MomentMonomial) -> str:
    parts = []
    for j, e in enumerate(m.x):
        if e == 1:
            parts.append(f"x{j + 1}")
        elif e > 1:
            parts.append(f"x{j + 1}^{e}")
    for s, grp in itertools.groupby(m.symbols):
        k = len(list(grp))
        parts.append(_format_symbol(s) + (f"^{k}" if k > 1 else ""))
    return "*".join(parts)


def _format_coeff(c: Fraction) -> str:
    return str(c.numerator) if c.denominator == 1 else f"{c.numerator}/{c.denominator}"


def format_poly(f: MomentPolynomial) -> str:
    """Render ``f`` in the interchange grammar (exact coefficients)."""
    if not f._terms:
        return "0"
    out = []
    for i, m in enumerate(sorted(f._terms, key=mono_key)):
        c = f._terms[m]
        body = _format_monomial(m)
        mag = abs(c)
        if not body:
            term = _format_coeff(mag)
        elif mag == 1:
            term = body
        else:
            term = f"{_format_coeff(mag)}*{body}"
        if i == 0:
            out.append(("-" if c < 0 else "") + term)
        else:
            out.append((" - " if c < 0 else " + ") + term)
    return "".join(out)


_TOKEN = re.compile(r"\s*(?:(\d+(?:\.\d+)?)|(x\d+)|(m)|([-+*/^()\[\],]))")


class _Parser:
    def __init__(self, text: str, n: int):
        self.n = n
        self.toks = []
        pos = 0
        text = text.strip()
        while pos < len(text):
            mt = _TOKEN.match(text, pos)
            if not mt or mt.end() == pos:
                raise ValueError(f"unexpected character at {pos} in {text!r}")
            pos = mt.end()
            num, var, m, op = mt.groups()
            if num is not None:
                self.toks.append(("num", Fraction(num)))
            elif var is not None:
                self.toks.append(("var", int(var[1:])))
            elif m is not None:
                self.toks.append(("m", None))
            else:
                self.toks.append(("op", op))
        self.i = 0
        self.text = text

    def peek(self):
        return self.toks[self.i] if self.i < len(self.toks) else (None, None)

    def take(self, op=None):
        tok = self.peek()
        if tok[0] is None or (op is not None and tok != ("op", op)):
            raise ValueError(f"expected {op!r} in {self.text!r}")
        self.i += 1
        return tok

    def parse(self) -> MomentPolynomial:
        f = self.expr()
        if self.i != len(self.toks):
            raise ValueError(f"trailing input in {self.text!r}")
        return f

    def expr(self) -> MomentPolynomial:
        sign = 1
        if self.peek() in (("op", "+"), ("op", "-")):
            sign = -1 if self.take()[1] == "-" else 1
        f = self.term() * sign
        while self.peek() in (("op", "+"), ("op", "-")):
            op = self.take()[1]
            t = self.term()
            f = f + t if op == "+" else f - t
        return f

    def term(self) -> MomentPolynomial:
        f = self.factor()
        while self.peek() in (("op", "*"), ("op", "/")):
            op = self.take()[1]
            g = self.factor()
            if op == "*":
                f = f * g
            else:
                if not g.is_zero and len(g) == 1 and g.constant_term:
                    f = f / g.constant_term
                else:
                    raise ValueError("division only by nonzero rational constants")
        return f

    def factor(self) -> MomentPolynomial:
        if self.peek() in (("op", "+"), ("op", "-")):
            sign = -1 if self.take()[1] == "-" else 1
            return self.factor() * sign
        f = self.atom()
        if self.peek() == ("op", "^"):
            self.take("^")
            kind, k = self.take()
            if kind != "num" or k.denominator != 1:
                raise ValueError("exponent must be a nonnegative integer")
            f = f ** int(k)
        return f

    def atom(self) -> MomentPolynomial:
        kind, val = self.take()
        n = self.n
        if kind == "num":
            return MomentPolynomial.constant(n, val)
        if kind == "var":
            return MomentPolynomial.variable(n, val)
        if kind == "m":
            if self.peek() == ("op", "["):
                self.take("[")
                idx = []
                while True:
                    k, v = self.take()
                    if k != "num" or v.denominator != 1:
                        raise ValueError("moment indices must be integers")
                    idx.append(int(v))
                    if self.peek() == ("op", ","):
                        self.take(",")
                        continue
                    break
                self.take("]")
                if len(idx) != n:
                    raise DimensionError(f"m{idx} does not match n={n}")
                if not any(idx):
                    return MomentPolynomial.constant(n, 1)
                return MomentPolynomial.symbol(idx)
            self.take("(")
            inner = self.expr()
            self.take(")")
            return formal_moment(inner)
        if (kind, val) == ("op", "("):
            f = self.expr()
            self.take(")")
            return f
        raise ValueError(f"unexpected token {val!r} in {self.text!r}")


def parse_poly(text: str, n: int) -> MomentPolynomial:
    """Parse the interchange grammar into a polynomial over ``n`` variables."""
    return _Parser(text, n).parse()
