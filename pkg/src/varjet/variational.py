"""Euler-Lagrange, first variation, Noether currents and the Helmholtz test."""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from typing import Mapping

import numpy as np

from .bicomplex import BigradedForm, volume_form
from .jetcalc import (
    EvolutionaryField,
    Section,
    apply_prolonged,
    iterated_total_derivative,
    substitute_section,
    total_derivative,
)
from .symexpr import (
    Atom,
    BundleSignature,
    Coord,
    Expr,
    Jet,
    Param,
    as_expr,
    compile_float,
    const,
    partial,
    substitute,
    to_text,
)

__all__ = [
    "Lagrangian",
    "SourceForm",
    "Current",
    "SymmetryResult",
    "HelmholtzReport",
    "NotASymmetryError",
    "NotIntegrableError",
    "euler_lagrange",
    "euler_operator",
    "first_variation_decompose",
    "divergence_potential",
    "is_divergence_symmetry",
    "noether_current",
    "frechet_derivative",
    "formal_adjoint",
    "helmholtz_check",
    "helmholtz_bilinear_gap",
    "source_form_as_bicomplex",
    "integrate_by_parts_source",
]


class NotASymmetryError(ValueError):
    pass


class NotIntegrableError(ValueError):
    pass


@dataclass(frozen=True)
class Lagrangian:
    sig: BundleSignature
    density: Expr

    def __post_init__(self):
        object.__setattr__(self, "density", as_expr(self.density))

    def form(self) -> BigradedForm:
        return volume_form(self.sig, self.density)


@dataclass(frozen=True)
class SourceForm:
    sig: BundleSignature
    components: Mapping[str, Expr]

    def __post_init__(self):
        comps = {a: as_expr(self.components.get(a, 0)) for a in self.sig.fields}
        unknown = set(self.components) - set(self.sig.fields)
        if unknown:
            raise KeyError(f"unknown fields {sorted(unknown)}")
        object.__setattr__(self, "components", comps)

    def __getitem__(self, a):
        return self.components[a]

    def is_zero(self) -> bool:
        return all(c.is_zero() for c in self.components.values())

    def to_dict(self) -> dict:
        return {a: to_text(self.components[a]) for a in self.sig.fields}


@dataclass(frozen=True)
class Current:
    sig: BundleSignature
    components: tuple

    def __post_init__(self):
        comps = tuple(as_expr(c) for c in self.components)
        if len(comps) != self.sig.base_dim:
            raise ValueError(f"current needs {self.sig.base_dim} components, got {len(comps)}")
        object.__setattr__(self, "components", comps)

    @classmethod
    def zero(cls, sig):
        return cls(sig, (Expr.zero(),) * sig.base_dim)

    def __add__(self, other):
        return Current(self.sig, tuple(a + b for a, b in zip(self.components, other.components)))

    def __neg__(self):
        return Current(self.sig, tuple(-a for a in self.components))

    def __sub__(self, other):
        return self + (-other)

    def divergence(self) -> Expr:
        out = Expr.zero()
        for mu, c in enumerate(self.components):
            out = out + total_derivative(c, mu, self.sig)
        return out

    def to_dict(self) -> dict:
        return {n: to_text(c) for n, c in zip(self.sig.base_names, self.components)}


def _density(L) -> Expr:
    return L.density if isinstance(L, Lagrangian) else as_expr(L)


def euler_operator(f: Expr, field_name: str, sig: BundleSignature) -> Expr:
    """``E_a(f) = sum_I (-D)_I df/du^a_I``."""
    out = Expr.zero()
    for j in f.jets():
        if j.field != field_name:
            continue
        term = iterated_total_derivative(partial(f, j), j.counts, sig)
        out = out + (term if j.order % 2 == 0 else -term)
    return out


def euler_lagrange(L, sig: BundleSignature | None = None) -> SourceForm:
    if sig is None:
        sig = L.sig
    f = _density(L)
    return SourceForm(sig, {a: euler_operator(f, a, sig) for a in sig.fields})


def _peel(q: Expr, G: Expr, counts: tuple, sig: BundleSignature, P: list) -> Expr:
    """Integrate ``D_I(q) * G`` by parts into the current ``P`` (in place).

    Directions are removed in ascending order.  Returns the interior
    remainder ``(-1)^|I| q * D_I G``.
    """
    J = list(counts)
    sign = 1
    while any(J):
        mu = next(i for i, c in enumerate(J) if c)
        J[mu] -= 1
        DKq = iterated_total_derivative(q, tuple(J), sig)
        piece = DKq * G
        P[mu] = P[mu] + (piece if sign > 0 else -piece)
        G = total_derivative(G, mu, sig)
        sign = -sign
    rem = q * G
    return rem if sign > 0 else -rem


def first_variation_decompose(L, Q: EvolutionaryField, sig: BundleSignature | None = None):
    """Split ``pr Q(L) = sum_a Q^a E_a(L) + D_mu P^mu``.

    Returns ``(interior, Current(P))``.  Terms are processed from the
    highest-order jets down.
    """
    if sig is None:
        sig = L.sig
    f = _density(L)
    P = [Expr.zero()] * sig.base_dim
    interior = Expr.zero()
    for j in sorted(f.jets(), key=lambda j: (-j.order, j.key)):
        q = Q[j.field]
        if q.is_zero():
            continue
        interior = interior + _peel(q, partial(f, j), j.counts, sig, P)
    return interior, Current(sig, tuple(P))


# --------------------------------------------------------------------------
# Divergences

_LAMBDA = Param("_lambda")


def _integrate(e: Expr, var: Atom) -> Expr:
    """Antiderivative in ``var`` vanishing at ``var = 0``, for polynomial dependence."""
    acc = Expr.zero()
    for m, c in e.terms:
        k = 0
        rest = []
        for a, p in m:
            if a == var:
                k = p
            elif var in a.free:
                raise NotIntegrableError(f"{to_text(Expr._atom(a))} depends non-polynomially on the variable")
            else:
                rest.append((a, p))
        if k < 0:
            raise NotIntegrableError("negative power of the integration variable")
        mono = Expr(((tuple(rest), c),)) if rest else const(c)
        acc = acc + mono * Expr._atom(var) ** (k + 1) * Fraction(1, k + 1)
    return acc


def divergence_potential(f: Expr, sig: BundleSignature) -> Current:
    """Find ``K`` with ``D_mu K^mu = f`` for a null Lagrangian ``f``.

    Uses the homotopy ``u -> lambda u`` for the jet-dependent part and a
    first-coordinate antiderivative for the part depending on ``x`` alone.
    Valid on the global star-shaped chart; requires polynomial dependence on
    the fields and, in the pure-``x`` part, on the first coordinate.
    """
    jets = f.jets()
    f0 = substitute(f, {j: Expr.zero() for j in jets})
    g = f - f0
    P = [Expr.zero()] * sig.base_dim
    scale = {j: Expr._atom(_LAMBDA) * Expr._atom(j) for j in g.jets()}
    for j in sorted(g.jets(), key=lambda j: (-j.order, j.key)):
        F = substitute(partial(g, j), scale)
        q = Expr._atom(Jet(j.field, (0,) * sig.base_dim, sig.base_names))
        _peel(q, F, j.counts, sig, P)
    K = []
    for comp in P:
        prim = _integrate(comp, _LAMBDA)
        K.append(substitute(prim, {_LAMBDA: Expr.one()}))
    if not f0.is_zero():
        x0 = Coord(sig.base_names[0])
        K[0] = K[0] + _integrate(f0, x0)
    return Current(sig, tuple(K))


@dataclass(frozen=True)
class SymmetryResult:
    is_symmetry: bool
    prolonged: Expr
    euler_of_prolonged: SourceForm
    witness: Current | None = None
    note: str = ""

    def __bool__(self):
        return self.is_symmetry


def is_divergence_symmetry(L, Q: EvolutionaryField, sig: BundleSignature | None = None) -> SymmetryResult:
    """``Q`` is a divergence symmetry iff the Euler operator kills ``pr Q(L)``.

    On success ``witness`` holds ``K`` with ``pr Q(L) = D_mu K^mu``.
    """
    if sig is None:
        sig = L.sig
    f = _density(L)
    prq = apply_prolonged(Q, f, sig)
    E = euler_lagrange(prq, sig)
    if not E.is_zero():
        return SymmetryResult(False, prq, E)
    try:
        K = divergence_potential(prq, sig)
    except NotIntegrableError as exc:
        return SymmetryResult(True, prq, E, None, f"no explicit potential: {exc}")
    return SymmetryResult(True, prq, E, K)


def noether_current(L, Q: EvolutionaryField, sig: BundleSignature | None = None,
                    witness: Current | None = None) -> Current:
    """``J = P - K``, so that ``D_mu J^mu = -sum_a Q^a E_a(L)``.

    ``witness`` may supply ``K``; otherwise it is computed.
    """
    if sig is None:
        sig = L.sig
    if Q.is_zero():
        return Current.zero(sig)
    if witness is None:
        res = is_divergence_symmetry(L, Q, sig)
        if not res.is_symmetry:
            raise NotASymmetryError("the field is not a divergence symmetry of the Lagrangian")
        if res.witness is None:
            raise NotASymmetryError(res.note)
        witness = res.witness
    _, P = first_variation_decompose(L, Q, sig)
    return P - witness


# --------------------------------------------------------------------------
# Helmholtz


def _test_field(b: str) -> str:
    return f"_psi_{b}"


def _test_jet(sig, b, counts=None) -> Jet:
    return Jet(_test_field(b), counts or (0,) * sig.base_dim, sig.base_names)


def frechet_derivative(delta: SourceForm) -> dict:
    """``(D_Delta psi)_a = sum_{b,I} dDelta_a/du^b_I D_I psi^b`` with symbolic test fields."""
    sig = delta.sig
    psi = EvolutionaryField({b: Expr._atom(_test_jet(sig, b)) for b in sig.fields})
    return {a: apply_prolonged(psi, delta[a], sig) for a in sig.fields}


def formal_adjoint(delta: SourceForm) -> dict:
    """``(D*_Delta psi)_b = sum_{a,I} (-D)_I (dDelta_a/du^b_I psi^a)``."""
    sig = delta.sig
    out = {b: Expr.zero() for b in sig.fields}
    for a in sig.fields:
        for j in delta[a].jets():
            coeff = partial(delta[a], j) * Expr._atom(_test_jet(sig, a))
            term = iterated_total_derivative(coeff, j.counts, sig)
            out[j.field] = out[j.field] + (term if j.order % 2 == 0 else -term)
    return out


@dataclass
class HelmholtzReport:
    variational: bool
    failures: list = field(default_factory=list)

    def __bool__(self):
        return self.variational

    def to_dict(self) -> dict:
        return {"variational": self.variational, "failures": self.failures}


def helmholtz_check(delta: SourceForm) -> HelmholtzReport:
    """Self-adjointness of the linearisation, compared coefficientwise."""
    sig = delta.sig
    lin = frechet_derivative(delta)
    adj = formal_adjoint(delta)
    failures = []
    for b in sig.fields:
        diff = lin[b] - adj[b]
        if diff.is_zero():
            continue
        tests = sorted((j for j in diff.jets() if j.field.startswith("_psi_")), key=lambda j: j.key)
        for j in tests:
            c = partial(diff, j)
            if c.is_zero():
                continue
            failures.append({
                "equation": b,
                "test_field": j.field[len("_psi_"):],
                "index": list(j.counts),
                "difference": to_text(c),
            })
    return HelmholtzReport(not failures, failures)


def helmholtz_bilinear_gap(delta: SourceForm, background: Section, psi1: Section, psi2: Section,
                           params: Mapping | None = None, nodes: int = 12) -> float:
    """``int psi1 . D_Delta[psi2] - psi2 . D_Delta[psi1]`` over the unit box.

    Gauss-Legendre quadrature with ``nodes`` points per direction; zero
    (up to rounding) for variational source forms when the test sections
    vanish to sufficient order on the boundary.
    """
    sig = delta.sig

    def lin(psi: Section) -> dict:
        Q = EvolutionaryField(psi.components)
        return {a: substitute_section(apply_prolonged(Q, delta[a], sig), background) for a in sig.fields}

    l1, l2 = lin(psi1), lin(psi2)
    # factors are compiled separately: expanding the products loses digits to cancellation
    pieces = []
    for a in sig.fields:
        pieces.append(tuple(compile_float(e, sig.coords(), params)
                            for e in (psi1.components[a], l2[a], psi2.components[a], l1[a])))

    def fn(*x):
        return sum(p1(*x) * b(*x) - p2(*x) * c(*x) for p1, b, p2, c in pieces)

    x, w = np.polynomial.legendre.leggauss(nodes)
    x = (x + 1) / 2
    w = w / 2
    grids = np.meshgrid(*([x] * sig.base_dim), indexing="ij")
    weights = np.ones_like(grids[0])
    for wg in np.meshgrid(*([w] * sig.base_dim), indexing="ij"):
        weights = weights * wg
    vals = np.vectorize(fn)(*grids)
    return float(np.sum(vals * weights))


# --------------------------------------------------------------------------
# Bicomplex packaging


def source_form_as_bicomplex(delta: SourceForm) -> BigradedForm:
    """``sum_a Delta_a theta^a ^ dx^1 ^ ... ^ dx^m``, bidegree ``(1, m)``."""
    sig = delta.sig
    out = BigradedForm.zero(sig, 1, sig.base_dim)
    vol = [("dx", mu) for mu in range(sig.base_dim)]
    for a in sig.fields:
        out = out + BigradedForm.from_generators(sig, [("theta", a)] + vol, delta[a])
    return out


def integrate_by_parts_source(omega: BigradedForm) -> BigradedForm:
    """Interior part of a ``(1, m)`` form: ``F theta^a_I ^ vol -> (-D)_I F theta^a ^ vol``."""
    sig = omega.sig
    if omega.bidegree != (1, sig.base_dim):
        raise ValueError("integration by parts needs a (1, base_dim) form")
    acc = {}
    zero = (0,) * sig.base_dim
    for key, F in omega.terms.items():
        th = next(g for g in key if g[0] == 1)
        G = iterated_total_derivative(F, th[2], sig)
        if sum(th[2]) % 2:
            G = -G
        new = tuple(g if g[0] == 0 else (1, th[1], zero) for g in key)
        acc[new] = acc.get(new, Expr.zero()) + G
    return BigradedForm(sig, 1, sig.base_dim, acc)
