"""Calculus on the infinite jet bundle.

Everything here works at finite order: an expression only ever mentions
finitely many jet coordinates, and points of ``J^inf`` are handled through
their finite truncations together with :func:`tower_project`.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from fractions import Fraction
from typing import Mapping

from .symexpr import (
    BundleSignature,
    Coord,
    Expr,
    Jet,
    MultiIndex,
    Param,
    as_expr,
    derive,
    evaluate,
    partial,
    substitute,
)

__all__ = [
    "Section",
    "JetPoint",
    "EvolutionaryField",
    "total_derivative",
    "iterated_total_derivative",
    "apply_prolonged",
    "section_jet",
    "substitute_section",
    "evaluate_on_section",
    "tower_project",
    "jet_prolong_section",
]


def _check_mu(sig: BundleSignature, mu) -> int:
    if isinstance(mu, str):
        if mu not in sig.base_names:
            raise KeyError(f"unknown base coordinate {mu!r}")
        return sig.base_names.index(mu)
    if not 0 <= mu < sig.base_dim:
        raise IndexError(f"direction {mu} out of range for base dimension {sig.base_dim}")
    return mu


def total_derivative(e: Expr, mu, sig: BundleSignature) -> Expr:
    """``D_mu e = de/dx^mu + sum u^a_{I+mu} de/du^a_I``.

    ``mu`` is a base index or base coordinate name.  Jet atoms of fields not
    declared in ``sig`` (auxiliary test fields, for instance) are shifted
    the same way.
    """
    mu = _check_mu(sig, mu)
    x = Coord(sig.base_names[mu])

    def rule(a):
        if isinstance(a, Jet):
            return Expr._atom(a.shifted(mu))
        if a == x:
            return Expr.one()
        return None

    return derive(e, rule)


def iterated_total_derivative(e: Expr, index, sig: BundleSignature) -> Expr:
    if not isinstance(index, MultiIndex):
        index = MultiIndex(tuple(index))
    if len(index.counts) != sig.base_dim:
        raise ValueError("multi-index does not match the base dimension")
    for mu in index.directions():
        e = total_derivative(e, mu, sig)
    return e


@dataclass(frozen=True)
class EvolutionaryField:
    """Vertical field ``Q^a d/du^a`` with characteristics ``Q^a``."""

    characteristics: Mapping[str, Expr]

    def __post_init__(self):
        object.__setattr__(
            self, "characteristics",
            {a: as_expr(q) for a, q in dict(self.characteristics).items()},
        )

    def __getitem__(self, a: str) -> Expr:
        return self.characteristics.get(a, Expr.zero())

    def is_zero(self) -> bool:
        return all(q.is_zero() for q in self.characteristics.values())


def apply_prolonged(Q: EvolutionaryField, e: Expr, sig: BundleSignature) -> Expr:
    """``pr Q(e) = sum (D_I Q^a) de/du^a_I`` over the jets occurring in ``e``."""
    cache: dict[Jet, Expr] = {}

    def rule(a):
        if not isinstance(a, Jet):
            return None
        q = Q[a.field]
        if q.is_zero():
            return None
        if a not in cache:
            cache[a] = iterated_total_derivative(q, a.counts, sig)
        return cache[a]

    return derive(e, rule)


# --------------------------------------------------------------------------
# Sections


@dataclass(frozen=True)
class Section:
    """A local section ``u^a = phi^a(x)``; components depend on base coordinates only."""

    sig: BundleSignature
    components: Mapping[str, Expr]

    def __post_init__(self):
        comps = {a: as_expr(c) for a, c in dict(self.components).items()}
        for a in self.sig.fields:
            comps.setdefault(a, Expr.zero())
        allowed = set(self.sig.coords())
        for a, c in comps.items():
            if a not in self.sig.fields:
                raise KeyError(f"unknown field {a!r}")
            extra = {s for s in c.free if s not in allowed and not isinstance(s, Param)}
            if extra:
                raise ValueError(f"section component {a} depends on non-base symbols {extra}")
        object.__setattr__(self, "components", comps)

    def derivative(self, field_name: str, index) -> Expr:
        """``d_I phi^a`` as a symbolic expression in the base coordinates."""
        e = self.components[field_name]
        counts = index.counts if isinstance(index, MultiIndex) else tuple(index)
        for mu, c in enumerate(counts):
            x = Coord(self.sig.base_names[mu])
            for _ in range(c):
                e = partial(e, x)
        return e


def section_jet(phi: Section, jets) -> dict:
    """Map each jet coordinate to the corresponding derivative of ``phi``."""
    return {j: phi.derivative(j.field, j.counts) for j in jets}


def substitute_section(e: Expr, phi: Section) -> Expr:
    """Pull ``e`` back along ``j^inf phi``: an expression in base coordinates."""
    return substitute(e, section_jet(phi, e.jets()))


def _base_assignment(sig: BundleSignature, x) -> dict:
    if isinstance(x, Mapping):
        return {Coord(k) if isinstance(k, str) else k: v for k, v in x.items()}
    return {Coord(n): v for n, v in zip(sig.base_names, x)}


def evaluate_on_section(e: Expr, phi: Section, x, params: Mapping | None = None,
                        exact: bool = False):
    """``ev_inf``: substitute all derivatives of ``phi`` then evaluate at ``x``."""
    return evaluate(substitute_section(e, phi), _base_assignment(phi.sig, x), params, exact=exact)


# --------------------------------------------------------------------------
# Finite jets


@dataclass(frozen=True)
class JetPoint:
    """Point of ``J^k``: base coordinates and every ``u^a_I`` with ``|I| <= k``."""

    sig: BundleSignature
    base: Mapping[str, Fraction]
    coords: Mapping[Jet, Fraction]
    order: int

    def __post_init__(self):
        expected = set(self.sig.jets_up_to(self.order))
        if set(self.coords) != expected:
            missing = expected - set(self.coords)
            extra = set(self.coords) - expected
            raise ValueError(f"jet point coordinates mismatch: missing={missing} extra={extra}")
        if set(self.base) != set(self.sig.base_names):
            raise ValueError("jet point needs every base coordinate")

    def __eq__(self, other):
        return (
            isinstance(other, JetPoint)
            and self.sig == other.sig
            and self.order == other.order
            and dict(self.base) == dict(other.base)
            and dict(self.coords) == dict(other.coords)
        )

    def __hash__(self):
        return hash((self.order, tuple(sorted(self.base.items()))))

    def assignment(self) -> dict:
        out = {Coord(k): v for k, v in self.base.items()}
        out.update(self.coords)
        return out

    def to_json(self) -> str:
        def num(v):
            v = Fraction(v)
            return v.numerator if v.denominator == 1 else f"{v.numerator}/{v.denominator}"

        data = {
            "base": {k: num(self.base[k]) for k in self.sig.base_names},
            "coords": {j.label: num(v) for j, v in sorted(self.coords.items(), key=lambda p: p[0].key)},
            "order": self.order,
        }
        return json.dumps(data, sort_keys=True)

    @classmethod
    def from_json(cls, text: str, sig: BundleSignature) -> "JetPoint":
        from .symexpr import parse_expression

        data = json.loads(text)
        base = {k: Fraction(v) for k, v in data["base"].items()}
        coords = {}
        for label, v in data["coords"].items():
            (m, _), = parse_expression(label, sig).terms
            (j, _), = m
            coords[j] = Fraction(v)
        return cls(sig, base, coords, int(data["order"]))


def tower_project(p: JetPoint, l: int) -> JetPoint:
    """Projection ``J^k -> J^l``; forgets coordinates with ``|I| > l``."""
    if l > p.order:
        raise ValueError(f"cannot project order {p.order} jet to higher order {l}")
    if l < 0:
        raise ValueError("order must be non-negative")
    coords = {j: v for j, v in p.coords.items() if j.order <= l}
    return JetPoint(p.sig, dict(p.base), coords, l)


def jet_prolong_section(phi: Section, x, k: int) -> JetPoint:
    """``j^k phi`` at ``x`` with exact rational coordinates."""
    if k < 0:
        raise ValueError("order must be non-negative")
    sig = phi.sig
    base = {Coord(n) if isinstance(n, str) else n: Fraction(v)
            for n, v in _base_assignment(sig, x).items()}
    coords = {j: Fraction(evaluate(phi.derivative(j.field, j.counts), base, exact=True))
              for j in sig.jets_up_to(k)}
    return JetPoint(sig, {c.name: v for c, v in base.items()}, coords, k)
