"""Assembly of quadratic-module membership SDPs and their perturbed variants.

Every program is brought to the standard form of :mod:`mompoly.sdp.problem`:
one equality row per rule-reduced monomial, one PSD block per generator
family, bound variables (alpha, z) as free scalars and nonnegative scalars
(epsilon, lambda) as 1x1 blocks.  Maximization is negated to minimization.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import Callable, Sequence

from .algebra import (
    MomentMonomial,
    MomentPolynomial,
    RuleSet,
    _moment_of_monomial,
    exponents_up_to,
    format_poly,
    formal_moment,
    mono_key,
    mono_mul,
    monomial_basis,
    parse_poly,
)
from .sdp.problem import SdpBlock, SdpProblem, SdpSolution

CONES = ("qm", "QQM", "QM")
MODES = ("bound", "eps_min", "QrM", "f_eps")
PERTURBATIONS = ("phi_psi", "m_phi", "one_psi", "phi")


class SpecError(ValueError):
    """Raised for malformed or inconsistent problem specifications."""


# ---------------------------------------------------------------------------
# Problem specification
# ---------------------------------------------------------------------------

@dataclass
class ProblemSpec:
    n: int
    objective: MomentPolynomial
    sense: str = "min"
    S1: list[MomentPolynomial] = field(default_factory=list)
    S2: list[MomentPolynomial] = field(default_factory=list)
    rules: RuleSet | None = None
    order: int = 1
    cone: str = "qm"
    mode: str = "bound"
    perturbation: str | None = None
    M: Fraction | None = None
    epsilon: Fraction | None = None
    # relaxation order actually used is ``order + order_offset``
    order_offset: int = 0
    name: str = ""
    extra: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.rules is None:
            self.rules = RuleSet.empty(self.n)

    @property
    def r(self) -> int:
        return self.order + self.order_offset

    def with_(self, **kw) -> "ProblemSpec":
        d = dict(self.__dict__)
        d.update(kw)
        return ProblemSpec(**d)

    def validate(self) -> None:
        n = self.n
        if n < 1:
            raise SpecError("n must be positive")
        if self.sense not in ("min", "max"):
            raise SpecError(f"sense must be min or max, got {self.sense!r}")
        if self.cone not in CONES:
            raise SpecError(f"unknown cone {self.cone!r}")
        if self.mode not in MODES:
            raise SpecError(f"unknown mode {self.mode!r}")
        if self.perturbation is not None and self.perturbation not in PERTURBATIONS:
            raise SpecError(f"unknown perturbation {self.perturbation!r}")
        for g in [self.objective, *self.S1, *self.S2]:
            if g.n != n:
                raise SpecError("polynomial dimension differs from n")
        for s in self.S1:
            if not s.is_x_only:
                raise SpecError(f"S1 element {format_poly(s)} contains moment symbols")
        for t in self.S2:
            if not t.is_pure:
                raise SpecError(f"S2 element {format_poly(t)} is not pure")
        r = self.r
        if r < 0:
            raise SpecError("relaxation order must be nonnegative")
        if not self.objective.is_zero and 2 * r < self.objective.degree():
            raise SpecError(f"order {r} too small for an objective of degree {self.objective.degree()}")
        for t in self.S2:
            if not t.is_zero and 2 * r < t.degree():
                raise SpecError(f"order {r} too small for S2 element of degree {t.degree()}")
        if self.cone == "qm" and self.mode in ("bound", "f_eps") and not self.objective.is_pure:
            raise SpecError("the qm cone needs a pure objective; use QQM")
        if self.cone == "QM" and (self.S2 or not self.objective.is_x_only):
            raise SpecError("the classical QM cone needs an x-only objective and no S2")
        if self.mode == "f_eps" and self.epsilon is None:
            raise SpecError("mode f_eps needs epsilon")
        if self.mode == "f_eps" and self.sense != "min":
            raise SpecError("mode f_eps is a minimization hierarchy")

    # -- JSON ---------------------------------------------------------
    @classmethod
    def from_json(cls, data: dict | str) -> "ProblemSpec":
        if isinstance(data, str):
            data = json.loads(data)
        try:
            n = int(data["n"])
            rules = RuleSet.from_strings(n, data.get("rules", []))
            obj = parse_poly(str(data["objective"]), n)
            S1 = [parse_poly(s, n) for s in data.get("S1", [])]
            S2 = [parse_poly(s, n) for s in data.get("S2", [])]
            M = data.get("M")
            eps = data.get("epsilon")
            known = {"n", "rules", "objective", "S1", "S2", "sense", "order", "cone", "mode",
                     "perturbation", "M", "epsilon", "order_offset", "name"}
            spec = cls(n=n, objective=obj, sense=data.get("sense", "min"), S1=S1, S2=S2,
                       rules=rules, order=int(data.get("order", 1)), cone=data.get("cone", "qm"),
                       mode=data.get("mode", "bound"), perturbation=data.get("perturbation"),
                       M=None if M is None else Fraction(str(M)),
                       epsilon=None if eps is None else Fraction(str(eps)),
                       order_offset=int(data.get("order_offset", 0)), name=data.get("name", ""),
                       extra={k: v for k, v in data.items() if k not in known})
        except SpecError:
            raise
        except (KeyError, TypeError, ValueError) as exc:
            raise SpecError(f"invalid problem spec: {exc}") from exc
        spec.validate()
        return spec

    @classmethod
    def load(cls, path) -> "ProblemSpec":
        try:
            text = Path(path).read_text()
        except OSError as exc:
            raise SpecError(f"cannot read spec: {exc}") from exc
        try:
            return cls.from_json(json.loads(text))
        except json.JSONDecodeError as exc:
            raise SpecError(f"spec is not valid JSON: {exc}") from exc

    def to_json(self) -> dict:
        d = {"name": self.name, "n": self.n, "objective": format_poly(self.objective),
             "sense": self.sense, "S1": [format_poly(s) for s in self.S1],
             "S2": [format_poly(t) for t in self.S2], "rules": self.rules.to_strings(),
             "order": self.order, "cone": self.cone, "mode": self.mode}
        if self.perturbation:
            d["perturbation"] = self.perturbation
        if self.M is not None:
            d["M"] = str(self.M)
        if self.epsilon is not None:
            d["epsilon"] = str(self.epsilon)
        if self.order_offset:
            d["order_offset"] = self.order_offset
        d.update(self.extra)
        return d


# ---------------------------------------------------------------------------
# Perturbation polynomials
# ---------------------------------------------------------------------------

def phi_psi(n: int, r: int) -> tuple[MomentPolynomial, MomentPolynomial]:
    """``Phi_r = sum_j sum_{k<=r} x_j^{2k}/k!`` and
    ``Psi_r = sum_j sum_{k l <= r} m(x_j^{2k})^l / ((k!)^l l!)`` (k, l >= 1)."""
    if r < 0:
        raise ValueError("r must be nonnegative")
    phi: dict[MomentMonomial, Fraction] = {}
    psi: dict[MomentMonomial, Fraction] = {}
    zero = (0,) * n
    for j in range(n):
        for k in range(r + 1):
            x = tuple(2 * k if i == j else 0 for i in range(n))
            key = MomentMonomial(x, ())
            phi[key] = phi.get(key, 0) + Fraction(1, math.factorial(k))
        for k in range(1, r + 1):
            e = tuple(2 * k if i == j else 0 for i in range(n))
            for l in range(1, r // k + 1):
                key = MomentMonomial(zero, (e,) * l)
                psi[key] = psi.get(key, 0) + Fraction(1, math.factorial(k) ** l * math.factorial(l))
    return MomentPolynomial(n, phi), MomentPolynomial(n, psi)


def perturbation_poly(kind: str, n: int, r: int) -> MomentPolynomial:
    phi, psi = phi_psi(n, r)
    if kind == "phi_psi":
        return phi + psi
    if kind == "m_phi":
        return formal_moment(phi)
    if kind == "one_psi":
        return psi + 1
    if kind == "phi":
        return phi
    raise SpecError(f"unknown perturbation {kind!r}")


def default_perturbation(spec: ProblemSpec) -> str:
    if spec.perturbation:
        return spec.perturbation
    if spec.cone == "QM":
        return "phi"
    if spec.cone == "qm":
        return "one_psi"
    return "phi_psi"


def default_M(spec: ProblemSpec) -> Fraction:
    """``10 (n e + n e^2)(1 + |f|_1)`` rounded up to an integer."""
    l1 = sum(abs(c) for c in spec.objective.terms.values())
    val = 10 * (spec.n * math.e + spec.n * math.e ** 2) * (1 + float(l1))
    return Fraction(math.ceil(val))


# ---------------------------------------------------------------------------
# Generator blocks
# ---------------------------------------------------------------------------

@dataclass
class GeneratorBlock:
    """One PSD block; ``entry(i, j)`` is the reduced generator polynomial (as a term dict)."""

    label: str
    tag: str  # moment | constraint | mixed | square | classical
    constraint: MomentPolynomial
    index: list
    entry: Callable[[int, int], dict] = field(repr=False, default=None)

    @property
    def dim(self) -> int:
        return len(self.index)


def _half_degree(r: int, s: MomentPolynomial) -> int:
    d = 0 if s.is_zero else s.degree()
    return (2 * r - d) // 2


def x_basis(n: int, d: int, rules: RuleSet) -> list[MomentMonomial]:
    """Rule-reduced x-monomials of degree <= d."""
    found = set()
    for e in exponents_up_to(n, d):
        bound_ok = all(rules.x_bound(j) is None or e[j] <= rules.x_bound(j) for j in range(n))
        if not bound_ok:
            continue
        for k in rules.reduce_monomial(MomentMonomial(e, ())):
            if k.degree <= d:
                found.add(k)
    return sorted(found, key=mono_key)


class _Reducer:
    """Cached ``reduce(m(mono))`` and ``reduce(mono)`` on term dicts."""

    def __init__(self, rules: RuleSet):
        self.rules = rules
        self._mom: dict = {}

    def plain(self, mono: MomentMonomial) -> dict:
        return self.rules.reduce_monomial(mono)

    def moment(self, mono: MomentMonomial) -> dict:
        hit = self._mom.get(mono)
        if hit is None:
            hit = self.rules.reduce_monomial(_moment_of_monomial(mono))
            self._mom[mono] = hit
        return hit

    @staticmethod
    def accumulate(out: dict, terms: dict, c) -> None:
        for k, v in terms.items():
            w = out.get(k, 0) + c * v
            if w:
                out[k] = w
            else:
                out.pop(k, None)


def _label(tag: str, s: MomentPolynomial) -> str:
    return f"{tag}[{format_poly(s) or '1'}]"


def enumerate_generators(spec: ProblemSpec, cone: str | None = None, r: int | None = None) -> list[GeneratorBlock]:
    """Generator blocks of the truncated cone at degree ``2r``."""
    cone = cone or spec.cone
    r = spec.r if r is None else r
    n = spec.n
    rules = spec.rules
    red = _Reducer(rules)
    one = MomentPolynomial.constant(n, 1)
    blocks: list[GeneratorBlock] = []

    def moment_entry(index, s):
        s_terms = list(s.terms.items())

        def entry(i, j):
            out: dict = {}
            vv = mono_mul(index[i], index[j])
            for t, c in s_terms:
                red.accumulate(out, red.moment(mono_mul(vv, t)), c)
            return out
        return entry

    def plain_entry(index, s):
        s_terms = list(s.terms.items())

        def entry(i, j):
            out: dict = {}
            vv = mono_mul(index[i], index[j])
            for t, c in s_terms:
                red.accumulate(out, red.plain(mono_mul(vv, t)), c)
            return out
        return entry

    def mixed_entry(index, s):
        s_terms = list(s.terms.items())

        def entry(i, j):
            (u1, v1), (u2, v2) = index[i], index[j]
            uu = mono_mul(u1, u2)
            mom: dict = {}
            for t, c in s_terms:
                red.accumulate(mom, red.moment(mono_mul(uu, t)), c)
            vv = mono_mul(v1, v2)
            out: dict = {}
            for k, c in mom.items():
                red.accumulate(out, red.plain(mono_mul(k, vv)), c)
            return out
        return entry

    if cone == "qm":
        for s in [one, *spec.S1]:
            d = _half_degree(r, s)
            if d < 0:
                continue
            idx = monomial_basis(n, d, rules)
            blocks.append(GeneratorBlock(_label("moment", s), "moment", s, idx, moment_entry(idx, s)))
        for t in spec.S2:
            d = _half_degree(r, t)
            if d < 0:
                continue
            idx = monomial_basis(n, d, rules, pure=True)
            blocks.append(GeneratorBlock(_label("constraint", t), "constraint", t, idx, plain_entry(idx, t)))
    elif cone == "QQM":
        for s in [one, *spec.S1]:
            d = _half_degree(r, s)
            if d < 0:
                continue
            xb = x_basis(n, d, rules)
            full = monomial_basis(n, d, rules)
            idx = [(u, v) for u in xb for v in full if u.degree + v.degree <= d]
            blocks.append(GeneratorBlock(_label("mixed", s), "mixed", s, idx, mixed_entry(idx, s)))
        for t in [*spec.S1, *spec.S2]:
            d = _half_degree(r, t)
            if d < 0:
                continue
            idx = monomial_basis(n, d, rules)
            blocks.append(GeneratorBlock(_label("square", t), "square", t, idx, plain_entry(idx, t)))
    elif cone == "QM":
        for s in [one, *spec.S1]:
            d = _half_degree(r, s)
            if d < 0:
                continue
            idx = x_basis(n, d, rules)
            blocks.append(GeneratorBlock(_label("classical", s), "classical", s, idx, plain_entry(idx, s)))
    else:
        raise SpecError(f"unknown cone {cone!r}")
    blocks.sort(key=lambda b: b.label)
    return blocks


# ---------------------------------------------------------------------------
# SDP assembly
# ---------------------------------------------------------------------------

class _Rows:
    def __init__(self):
        self.index: dict[MomentMonomial, int] = {}

    def __call__(self, mono: MomentMonomial) -> int:
        k = self.index.get(mono)
        if k is None:
            k = self.index[mono] = len(self.index)
        return k


def _assemble(spec: ProblemSpec, blocks: list[GeneratorBlock], rhs: MomentPolynomial,
              extra_free: list[tuple[str, MomentPolynomial, Fraction]],
              extra_nonneg: list[tuple[str, MomentPolynomial, Fraction]]) -> SdpProblem:
    """Rows ``sum_blocks <A, G> + sum_free c_k poly_k + sum_nonneg ... = rhs`` per monomial.

    ``extra_free`` / ``extra_nonneg`` hold ``(label, column polynomial, objective coefficient)``.
    """
    rows = _Rows()
    raw: list[tuple[int, list]] = []
    for gb in blocks:
        trip = []
        for i in range(gb.dim):
            for j in range(i, gb.dim):
                for mono, c in gb.entry(i, j).items():
                    trip.append((rows(mono), i, j, c))
        raw.append((gb.dim, trip))
    rhs = spec.rules.reduce(rhs)
    for mono in rhs.terms:
        rows(mono)
    red_free = [(lab, spec.rules.reduce(p), c) for lab, p, c in extra_free]
    red_nn = [(lab, spec.rules.reduce(p), c) for lab, p, c in extra_nonneg]
    for _, p, _ in red_free + red_nn:
        for mono in p.terms:
            rows(mono)
    # canonical row order
    order = sorted(rows.index, key=mono_key)
    perm = {rows.index[mono]: k for k, mono in enumerate(order)}
    m = len(order)
    sdp_blocks = []
    for gb, (dim, trip) in zip(blocks, raw):
        blk = SdpBlock(dim, label=gb.label)
        for r_, i, j, c in trip:
            blk.add(perm[r_], i, j, c)
        sdp_blocks.append(blk)
    for lab, p, c in red_nn:
        blk = SdpBlock(1, label=lab)
        for mono, v in p.terms.items():
            blk.add(perm[rows.index[mono]], 0, 0, v)
        if c:
            blk.add_objective(0, 0, c)
        sdp_blocks.append(blk)
    b = [Fraction(0)] * m
    for mono, v in rhs.terms.items():
        b[perm[rows.index[mono]]] = v
    fr, fc, fv, cvec = [], [], [], []
    for k, (lab, p, c) in enumerate(red_free):
        for mono, v in p.terms.items():
            fr.append(perm[rows.index[mono]])
            fc.append(k)
            fv.append(v)
        cvec.append(Fraction(c))
    return SdpProblem(m=m, blocks=sdp_blocks, b=b, n_free=len(red_free), free_rows=fr,
                      free_cols=fc, free_vals=fv, c=cvec, row_labels=order,
                      free_labels=[lab for lab, _, _ in red_free])


def build_membership_sdp(spec: ProblemSpec, cone: str | None = None, r: int | None = None) -> SdpProblem:
    """Best bound ``f_r``: ``sup alpha`` with ``f - alpha`` in the cone (min), or
    ``inf beta`` with ``beta - f`` in the cone (max)."""
    spec.validate()
    cone = cone or spec.cone
    r = spec.r if r is None else r
    n = spec.n
    f = spec.objective
    if cone == "qm" and not f.is_pure:
        raise SpecError("the qm cone needs a pure objective; use QQM")
    blocks = enumerate_generators(spec, cone, r)
    one = MomentPolynomial.constant(n, 1)
    if spec.sense == "min":
        # sum <A,G> + alpha = f ; minimize -alpha ; report alpha
        p = _assemble(spec, blocks, f, [("alpha", one, Fraction(-1))], [])
        p.objective_sign = -1
    else:
        # sum <A,G> - beta = -f ; minimize beta
        p = _assemble(spec, blocks, -f, [("beta", -one, Fraction(1))], [])
    p.form = "membership"
    p.info = _info(spec, cone, r, "bound", blocks)
    return p


def build_dual_sdp(spec: ProblemSpec, cone: str | None = None, r: int | None = None) -> SdpProblem:
    """Moment (pseudo-moment) relaxation of the same bound.

    The standard-form pairing makes the dual of the membership program the
    moment relaxation: its variables are the row multipliers ``y``, with
    pseudo-moments ``L = -y``, ``L(1) = 1`` enforced by the bound column and
    the localizing matrices ``-sum_mu y_mu A_mu`` constrained PSD.  The
    problem data are shared; :func:`pseudo_moments` reads ``L`` off a solution.
    """
    p = build_membership_sdp(spec, cone, r)
    p.form = "moment"
    p.info["dual_unknowns"] = p.m
    p.info["dual_blocks"] = p.block_dims
    return p


def build_perturbed_sdp(spec: ProblemSpec, r: int | None = None, mode: str | None = None,
                        cone: str | None = None, perturbation: str | None = None,
                        M=None, epsilon=None) -> SdpProblem:
    spec.validate()
    mode = mode or spec.mode
    cone = cone or spec.cone
    r = spec.r if r is None else r
    n = spec.n
    f = spec.objective
    one = MomentPolynomial.constant(n, 1)
    if mode == "bound":
        return build_membership_sdp(spec, cone, r)
    blocks = enumerate_generators(spec, cone, r)
    if mode == "eps_min":
        kind = perturbation or default_perturbation(spec.with_(cone=cone))
        P = perturbation_poly(kind, n, r)
        # f + eps P = sum <A,G>  ->  sum <A,G> - eps P = f ; minimize eps >= 0
        p = _assemble(spec, blocks, f, [], [("eps", -P, Fraction(1))])
        p.info = _info(spec, cone, r, mode, blocks)
        p.info["perturbation"] = kind
    elif mode == "QrM":
        Mv = Fraction(M) if M is not None else (spec.M if spec.M is not None else default_M(spec))
        phi, psi = phi_psi(n, r)
        g = one * Mv - phi - psi
        # f - z = sum <A,G> + lam g ; minimize -z
        p = _assemble(spec, blocks, f, [("z", one, Fraction(-1))], [("lambda", g, Fraction(0))])
        p.objective_sign = -1
        p.info = _info(spec, cone, r, mode, blocks)
        p.info["M"] = str(Mv)
    elif mode == "f_eps":
        eps = Fraction(epsilon) if epsilon is not None else spec.epsilon
        if eps is None:
            raise SpecError("mode f_eps needs epsilon")
        phi, _ = phi_psi(n, r)
        # f - z + eps Phi = sum <A,G> ; minimize -z
        p = _assemble(spec, blocks, f + phi * eps, [("z", one, Fraction(-1))], [])
        p.objective_sign = -1
        p.info = _info(spec, cone, r, mode, blocks)
        p.info["epsilon"] = str(eps)
    else:
        raise SpecError(f"unknown mode {mode!r}")
    p.form = mode
    return p


def build_sdp(spec: ProblemSpec, r: int | None = None) -> SdpProblem:
    """Program selected by ``spec.mode`` at relaxation order ``r`` (default ``spec.r``)."""
    return build_perturbed_sdp(spec, r=r)


def _info(spec, cone, r, mode, blocks) -> dict:
    return {"name": spec.name, "cone": cone, "order": r, "mode": mode, "sense": spec.sense,
            "generators": [{"label": b.label, "tag": b.tag, "dim": b.dim} for b in blocks]}


# ---------------------------------------------------------------------------
# Reading solutions
# ---------------------------------------------------------------------------

def pseudo_moments(p: SdpProblem, sol: SdpSolution) -> dict[MomentMonomial, float]:
    """Pseudo-moment values ``L(mu) = -y_mu`` indexed by row monomial."""
    if sol.y is None:
        raise ValueError("solution carries no dual vector")
    return {mono: -float(v) for mono, v in zip(p.row_labels, sol.y)}


def gram_matrices(p: SdpProblem, sol: SdpSolution) -> dict[str, object]:
    return {blk.label: X for blk, X in zip(p.blocks, sol.X)}


def problem_sizes(p: SdpProblem) -> dict:
    """Sizes in the terms used for reporting: Gram unknowns, rows, block dims."""
    gram = [blk.dim for blk in p.blocks if blk.label.startswith(("moment", "mixed", "square", "constraint", "classical"))]
    return {"rows": p.m, "blocks": p.block_dims, "max_block": max(p.block_dims, default=0),
            "unknowns": p.num_unknowns, "gram_blocks": gram, "free": p.n_free}


def spec_from_problem(name: str, **kw) -> ProblemSpec:
    """Build one of the shipped specs by file name (``cov3322`` etc.)."""
    from .problems import load_data
    data = load_data(f"{name}.json")
    data.update({k: v for k, v in kw.items() if v is not None})
    return ProblemSpec.from_json(data)


def sweep_orders(spec: ProblemSpec, orders: Sequence[int]) -> list[ProblemSpec]:
    return [spec.with_(order=k) for k in orders]
