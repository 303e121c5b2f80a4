"""Finitely supported measures, moment evaluations and a brute-force oracle.

Everything here is exact: atoms and weights are rationals and evaluations
return :class:`~fractions.Fraction`.
"""
from __future__ import annotations

import itertools
import json
from dataclasses import dataclass, field
from fractions import Fraction
from math import comb
from typing import Iterable, Mapping, Sequence

from .algebra import (DimensionError, MomentMonomial, MomentPolynomial, _as_fraction,
                      degree, format_poly)

Point = tuple[Fraction, ...]


def _point(p: Iterable) -> Point:
    return tuple(_as_fraction(v) for v in p)


@dataclass(frozen=True)
class FiniteMeasure:
    """Probability measure ``sum(w_k * delta_{atom_k})`` with rational data."""

    atoms: tuple[Point, ...]
    weights: tuple[Fraction, ...]
    _cache: dict = field(default_factory=dict, compare=False, repr=False, hash=False)

    def __init__(self, atoms: Iterable[Iterable], weights: Iterable):
        atoms = tuple(_point(a) for a in atoms)
        weights = tuple(_as_fraction(w) for w in weights)
        if not atoms:
            raise ValueError("a measure needs at least one atom")
        if len(atoms) != len(weights):
            raise ValueError("atoms and weights differ in length")
        n = len(atoms[0])
        if n < 1 or any(len(a) != n for a in atoms):
            raise DimensionError("atoms must share a dimension n >= 1")
        if len(set(atoms)) != len(atoms):
            raise ValueError("atoms must be pairwise distinct")
        if any(w <= 0 for w in weights):
            raise ValueError("weights must be positive")
        if sum(weights) != 1:
            raise ValueError(f"weights sum to {sum(weights)}, expected 1")
        object.__setattr__(self, "atoms", atoms)
        object.__setattr__(self, "weights", weights)
        object.__setattr__(self, "_cache", {})

    @classmethod
    def dirac(cls, point: Iterable) -> "FiniteMeasure":
        return cls([point], [1])

    @classmethod
    def uniform(cls, points: Iterable[Iterable]) -> "FiniteMeasure":
        """Uniform measure on the given points; repeated points are merged."""
        pts = [_point(p) for p in points]
        w: dict[Point, Fraction] = {}
        for p in pts:
            w[p] = w.get(p, 0) + Fraction(1, len(pts))
        return cls(list(w), list(w.values()))

    @classmethod
    def from_pairs(cls, pairs: Iterable[tuple[Iterable, object]]) -> "FiniteMeasure":
        """Build from (atom, weight) pairs, merging repeated atoms."""
        w: dict[Point, Fraction] = {}
        for a, c in pairs:
            a = _point(a)
            w[a] = w.get(a, 0) + _as_fraction(c)
        return cls(list(w), list(w.values()))

    @property
    def n(self) -> int:
        return len(self.atoms[0])

    def moment(self, e: Sequence[int]) -> Fraction:
        e = tuple(e)
        hit = self._cache.get(e)
        if hit is None:
            if len(e) != self.n:
                raise DimensionError(f"moment {e} for measure on R^{self.n}")
            hit = sum((w * _mono_value(a, e) for a, w in zip(self.atoms, self.weights)), Fraction(0))
            self._cache[e] = hit
        return hit

    def to_json(self) -> dict:
        return {"atoms": [[str(v) for v in a] for a in self.atoms],
                "weights": [str(w) for w in self.weights]}

    @classmethod
    def from_json(cls, data: Mapping | str) -> "FiniteMeasure":
        if isinstance(data, str):
            data = json.loads(data)
        return cls(data["atoms"], data["weights"])


def _mono_value(point: Sequence[Fraction], e: Sequence[int]) -> Fraction:
    v = Fraction(1)
    for p, k in zip(point, e):
        if k:
            v *= p ** k
    return v


@dataclass(frozen=True)
class FiniteProbabilitySpace:
    """Points ``0..N-1`` with weights and named rational random variables."""

    weights: tuple[Fraction, ...]
    random_variables: Mapping[str, tuple[Fraction, ...]]

    def __init__(self, weights: Iterable, random_variables: Mapping[str, Iterable]):
        weights = tuple(_as_fraction(w) for w in weights)
        if not weights:
            raise ValueError("empty probability space")
        if any(w <= 0 for w in weights):
            raise ValueError("weights must be positive")
        if sum(weights) != 1:
            raise ValueError(f"weights sum to {sum(weights)}, expected 1")
        rvs = {}
        for name, vals in random_variables.items():
            vals = tuple(_as_fraction(v) for v in vals)
            if len(vals) != len(weights):
                raise ValueError(f"random variable {name!r} does not cover every point")
            rvs[name] = vals
        object.__setattr__(self, "weights", weights)
        object.__setattr__(self, "random_variables", rvs)

    @classmethod
    def uniform(cls, size: int, random_variables: Mapping[str, Iterable]) -> "FiniteProbabilitySpace":
        return cls([Fraction(1, size)] * size, random_variables)

    def __len__(self) -> int:
        return len(self.weights)

    def expectation(self, values: Sequence) -> Fraction:
        return sum((w * _as_fraction(v) for w, v in zip(self.weights, values)), Fraction(0))

    def values(self, names: Sequence[str]) -> list[Point]:
        missing = [v for v in names if v not in self.random_variables]
        if missing:
            raise KeyError(f"unknown random variables: {missing}")
        cols = [self.random_variables[v] for v in names]
        return [tuple(c[p] for c in cols) for p in range(len(self.weights))]

    def to_json(self) -> dict:
        return {"weights": [str(w) for w in self.weights],
                "random_variables": {k: [str(v) for v in vals]
                                     for k, vals in self.random_variables.items()}}

    @classmethod
    def from_json(cls, data: Mapping | str) -> "FiniteProbabilitySpace":
        if isinstance(data, str):
            data = json.loads(data)
        return cls(data["weights"], data["random_variables"])


# ---------------------------------------------------------------------------
# Evaluations
# ---------------------------------------------------------------------------

def _eval_with(f: MomentPolynomial, moment, X: Sequence[Fraction]) -> Fraction:
    total = Fraction(0)
    for m, c in f.items():
        v = c * _mono_value(X, m.x) if any(m.x) else c
        for s in m.symbols:
            if not v:
                break
            v *= moment(s)
        total += v
    return total


def eval_poly(f: MomentPolynomial, mu: FiniteMeasure, X: Iterable | None = None) -> Fraction:
    """Value of ``f`` at ``(mu, X)``; ``X`` may be omitted for pure ``f``."""
    if f.n != mu.n:
        raise DimensionError(f"polynomial over n={f.n}, measure on R^{mu.n}")
    if X is None:
        if not f.is_pure:
            raise ValueError("a point X is required for polynomials with free variables")
        X = (Fraction(0),) * f.n
    X = _point(X)
    if len(X) != f.n:
        raise DimensionError(f"point of length {len(X)} for n={f.n}")
    return _eval_with(f, mu.moment, X)


def eval_random_vars(f: MomentPolynomial, space: FiniteProbabilitySpace,
                     names: Sequence[str]) -> list[Fraction]:
    """Pointwise value of ``f[pi, F]`` for every point of the space.

    Moment symbols become expectations over the space; ``x_j`` becomes the
    random variable ``names[j-1]``.
    """
    if len(names) != f.n:
        raise DimensionError(f"{len(names)} names for n={f.n}")
    pts = space.values(names)
    cache: dict[tuple, Fraction] = {}

    def moment(e):
        hit = cache.get(e)
        if hit is None:
            hit = sum((w * _mono_value(p, e) for w, p in zip(space.weights, pts)), Fraction(0))
            cache[e] = hit
        return hit

    return [_eval_with(f, moment, p) for p in pts]


def pushforward(space: FiniteProbabilitySpace, names: Sequence[str]) -> FiniteMeasure:
    """Distribution of the random vector ``(names...)`` as a finite measure."""
    return FiniteMeasure.from_pairs(zip(space.values(names), space.weights))


# ---------------------------------------------------------------------------
# Reformulation as a classical polynomial program
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ClassicalProgram:
    """``min objective`` s.t. ``g >= 0`` for g in inequalities and ``h = 0`` for h in equalities.

    All polynomials are moment-free and live in ``len(variable_names)`` variables.
    """

    variable_names: tuple[str, ...]
    objective: MomentPolynomial
    inequalities: tuple[MomentPolynomial, ...]
    equalities: tuple[MomentPolynomial, ...]
    atoms: int

    @property
    def num_variables(self) -> int:
        return len(self.variable_names)

    def to_json(self) -> dict:
        return {"variables": list(self.variable_names),
                "atoms": self.atoms,
                "objective": format_poly(self.objective),
                "inequalities": [format_poly(g) for g in self.inequalities],
                "equalities": [format_poly(h) for h in self.equalities]}


def tchakaloff_reformulate(S1: Sequence[MomentPolynomial], S2: Sequence[MomentPolynomial],
                           f: MomentPolynomial, d: int | None = None) -> ClassicalProgram:
    """Replace the measure by ``D = C(n+d, d)`` weighted atoms.

    Variables are ordered ``X_1..X_n, Y_{1,1}..Y_{D,n}, alpha_1..alpha_D``; in the
    returned polynomials they are ``x1 .. x_N`` in that order.
    """
    n = f.n
    for s in list(S1) + list(S2):
        if s.n != n:
            raise DimensionError("constraint dimension mismatch")
    for s in S1:
        if not s.is_x_only:
            raise ValueError("S1 must contain classical polynomials")
    for s in S2:
        if not s.is_pure:
            raise ValueError("S2 must contain pure moment polynomials")
    if d is None:
        degs = [degree(f) if not f.is_zero else 0]
        degs += [degree(s) for s in S2 if not s.is_zero]
        d = max(degs)
    D = comb(n + d, d)
    N = n + D * n + D
    names = ([f"X{j + 1}" for j in range(n)]
             + [f"Y{i + 1}_{j + 1}" for i in range(D) for j in range(n)]
             + [f"alpha{i + 1}" for i in range(D)])

    def var(k):
        return MomentPolynomial.variable(N, k + 1)

    X = [var(j) for j in range(n)]
    Y = [[var(n + i * n + j) for j in range(n)] for i in range(D)]
    A = [var(n + D * n + i) for i in range(D)]
    one = MomentPolynomial.constant(N, 1)
    moment_cache: dict = {}

    def pmono(vals, e):
        out = one
        for v, k in zip(vals, e):
            if k:
                out = out * v ** k
        return out

    def sym(e):
        hit = moment_cache.get(e)
        if hit is None:
            hit = MomentPolynomial.zero(N)
            for i in range(D):
                hit = hit + A[i] * pmono(Y[i], e)
            moment_cache[e] = hit
        return hit

    def subst(g: MomentPolynomial, point) -> MomentPolynomial:
        out = MomentPolynomial.zero(N)
        for m, c in g.items():
            t = pmono(point, m.x) * c
            for s in m.symbols:
                t = t * sym(s)
            out = out + t
        return out

    ineq = [subst(s, X) for s in S2]
    for s in S1:
        ineq.append(subst(s, X))
        ineq.extend(subst(s, Y[i]) for i in range(D))
    ineq.extend(A)
    eq = [sum(A, MomentPolynomial.zero(N)) - 1]
    return ClassicalProgram(tuple(names), subst(f, X), tuple(ineq), tuple(eq), D)


# ---------------------------------------------------------------------------
# Brute-force oracle
# ---------------------------------------------------------------------------

@dataclass
class OracleResult:
    value: Fraction
    measure: FiniteMeasure
    point: Point
    checked: int


def _simplex_grid(k: int, q: int) -> list[tuple[Fraction, ...]]:
    """Positive weight vectors of length k with denominator q."""
    out = []
    for cuts in itertools.combinations(range(1, q), k - 1):
        parts = [b - a for a, b in zip((0,) + cuts, cuts + (q,))]
        out.append(tuple(Fraction(p, q) for p in parts))
    return out


def brute_force_opt(f: MomentPolynomial, *, sense: str = "max",
                    S1: Sequence[MomentPolynomial] = (), S2: Sequence[MomentPolynomial] = (),
                    candidates: Iterable[Iterable] | None = None,
                    points: Iterable[Iterable] | None = None,
                    max_support: int = 2, grid: int = 4,
                    equal_weights: bool = False) -> OracleResult:
    """Best value of ``f`` over an enumerated family of feasible (measure, point) pairs.

    Measures are supported on subsets (up to ``max_support``) of ``candidates``
    with weights on the grid of denominator ``grid`` (or uniform weights when
    ``equal_weights``).  The returned value is attained by the returned witness,
    so it is a one-sided bound on the true optimum.  Ties keep the first
    witness in enumeration order.
    """
    if sense not in ("max", "min"):
        raise ValueError("sense must be 'max' or 'min'")
    n = f.n
    if candidates is None:
        candidates = itertools.product((-1, 0, 1), repeat=n)
    cands = [_point(c) for c in candidates]
    feasible = [c for c in cands if all(_eval_with(s, None, c) >= 0 for s in S1)]
    pts = feasible if points is None else [_point(p) for p in points]
    pts = [p for p in pts if all(_eval_with(s, None, p) >= 0 for s in S1)]
    if not feasible or not pts:
        raise ValueError("empty enumeration: no feasible atoms or points")
    if f.is_pure:
        pts = pts[:1]
    best: OracleResult | None = None
    checked = 0
    for k in range(1, max_support + 1):
        weight_vectors = [tuple(Fraction(1, k) for _ in range(k))] if equal_weights else _simplex_grid(k, grid)
        for subset in itertools.combinations(feasible, k):
            for w in weight_vectors:
                mu = FiniteMeasure(subset, w)
                if any(eval_poly(s, mu) < 0 for s in S2):
                    continue
                for X in pts:
                    val = _eval_with(f, mu.moment, X)
                    checked += 1
                    better = best is None or (val > best.value if sense == "max" else val < best.value)
                    if better:
                        best = OracleResult(val, mu, X, 0)
    if best is None:
        raise ValueError("empty enumeration: no feasible measure")
    best.checked = checked
    return best


__all__ = [
    "FiniteMeasure", "FiniteProbabilitySpace", "ClassicalProgram", "OracleResult",
    "eval_poly", "eval_random_vars", "pushforward", "tchakaloff_reformulate",
    "brute_force_opt",
]
