"""The variational bicomplex ``Omega^{s,r}(J^inf)``.

Forms are expanded in the basis of horizontal generators ``dx^mu`` and
contact forms ``theta^a_I = du^a_I - u^a_{I+mu} dx^mu``.  A basis monomial
is stored sorted (all ``dx`` first by ascending direction, then contact
generators by field and multi-index); the sign of the sorting permutation
lives in the coefficient.  Bidegrees are ``(s, r)`` = (contact count,
horizontal count).

:class:`ClassicalForm` is an ordinary exterior form on a coordinate space.
It is the target of :func:`ev_pullback` and the value type of the forms
sheaf.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Mapping, Sequence

from .jetcalc import Section, total_derivative
from .symexpr import (
    Atom,
    BundleSignature,
    Coord,
    Expr,
    Jet,
    Param,
    as_expr,
    parse_expression,
    partial,
    substitute,
    to_latex,
    to_text,
)

__all__ = [
    "ContactGenerator",
    "BigradedForm",
    "ClassicalForm",
    "wedge",
    "d_horizontal",
    "d_vertical",
    "bidegree",
    "ev_pullback",
    "volume_form",
]


@dataclass(frozen=True, order=True)
class ContactGenerator:
    """``theta^a_I``."""

    field: str
    counts: tuple[int, ...]


# A generator is (0, mu) for dx^mu or (1, field_position, counts) for theta.


def _sort_with_sign(gens: list):
    """Sort generators; return (sign, tuple) or (0, None) on a repeat."""
    gens = list(gens)
    sign = 1
    # insertion sort keeps the parity bookkeeping obvious; lists are short
    for i in range(1, len(gens)):
        j = i
        while j > 0 and gens[j - 1] > gens[j]:
            gens[j - 1], gens[j] = gens[j], gens[j - 1]
            sign = -sign
            j -= 1
    for a, b in zip(gens, gens[1:]):
        if a == b:
            return 0, None
    return sign, tuple(gens)


class BigradedForm:
    """Element of ``Omega^{s,r}(J^inf)`` with expression coefficients."""

    __slots__ = ("sig", "s", "r", "terms")

    def __init__(self, sig: BundleSignature, s: int, r: int, terms: Mapping | None = None):
        if s < 0 or r < 0:
            raise ValueError("bidegree components must be non-negative")
        self.sig = sig
        self.s = s
        self.r = r
        clean = {}
        for key, c in (terms or {}).items():
            c = as_expr(c)
            if c.is_zero():
                continue
            nd = sum(1 for g in key if g[0] == 0)
            if nd != r or len(key) - nd != s:
                raise ValueError(f"monomial {key} does not have bidegree {(s, r)}")
            clean[key] = c
        self.terms = clean

    # -- constructors -----------------------------------------------------

    @classmethod
    def zero(cls, sig, s=0, r=0) -> "BigradedForm":
        return cls(sig, s, r)

    @classmethod
    def function(cls, sig, f) -> "BigradedForm":
        return cls(sig, 0, 0, {(): as_expr(f)})

    @classmethod
    def from_generators(cls, sig: BundleSignature, gens: Sequence, coeff=1) -> "BigradedForm":
        """Wedge product ``coeff * g_1 ^ ... ^ g_n`` of generators in the given order.

        Generators are ``("dx", mu)`` (``mu`` an index or base name) or
        ``("theta", field, counts)``.
        """
        raw = [_gen(sig, g) for g in gens]
        s = sum(1 for g in raw if g[0] == 1)
        r = len(raw) - s
        sign, key = _sort_with_sign(raw)
        if not sign:
            return cls(sig, s, r)
        return cls(sig, s, r, {key: as_expr(coeff) * sign})

    @classmethod
    def dx(cls, sig, mu) -> "BigradedForm":
        return cls.from_generators(sig, [("dx", mu)])

    @classmethod
    def theta(cls, sig, field, counts=None) -> "BigradedForm":
        counts = tuple(counts) if counts is not None else (0,) * sig.base_dim
        return cls.from_generators(sig, [("theta", field, counts)])

    # -- basics -----------------------------------------------------------

    @property
    def bidegree(self) -> tuple[int, int]:
        return (self.s, self.r)

    @property
    def degree(self) -> int:
        return self.s + self.r

    def is_zero(self) -> bool:
        return not self.terms

    def __eq__(self, other):
        if not isinstance(other, BigradedForm):
            return NotImplemented
        if self.is_zero() and other.is_zero():
            return self.sig == other.sig
        return self.sig == other.sig and self.bidegree == other.bidegree and self.terms == other.terms

    def __hash__(self):
        return hash((self.bidegree, tuple(sorted(self.terms.items(), key=lambda p: _key_sort(p[0])))))

    def _check(self, other):
        if not isinstance(other, BigradedForm):
            raise TypeError("expected a BigradedForm")
        if other.sig != self.sig:
            raise ValueError("signature mismatch")

    def __add__(self, other):
        self._check(other)
        if other.is_zero():
            return self
        if self.is_zero():
            return other
        if other.bidegree != self.bidegree:
            raise ValueError(f"cannot add forms of bidegree {self.bidegree} and {other.bidegree}")
        terms = dict(self.terms)
        for k, c in other.terms.items():
            terms[k] = terms.get(k, Expr.zero()) + c
        return BigradedForm(self.sig, self.s, self.r, terms)

    def __neg__(self):
        return BigradedForm(self.sig, self.s, self.r, {k: -c for k, c in self.terms.items()})

    def __sub__(self, other):
        return self + (-other)

    def scale(self, f) -> "BigradedForm":
        f = as_expr(f)
        return BigradedForm(self.sig, self.s, self.r, {k: f * c for k, c in self.terms.items()})

    def __rmul__(self, f):
        return self.scale(f)

    def __xor__(self, other):
        return wedge(self, other)

    def map_coefficients(self, fn) -> "BigradedForm":
        return BigradedForm(self.sig, self.s, self.r, {k: fn(c) for k, c in self.terms.items()})

    def coefficient(self, gens: Sequence) -> Expr:
        """Coefficient of the basis monomial spelled by ``gens`` (any order)."""
        sign, key = _sort_with_sign([_gen(self.sig, g) for g in gens])
        if not sign:
            return Expr.zero()
        return self.terms.get(key, Expr.zero()) * sign

    def sorted_terms(self):
        return sorted(self.terms.items(), key=lambda p: _key_sort(p[0]))

    # -- serialisation ----------------------------------------------------

    def to_dict(self) -> dict:
        out = []
        for key, c in self.sorted_terms():
            out.append({
                "dx": [self.sig.base_names[g[1]] for g in key if g[0] == 0],
                "theta": [[self.sig.fields[g[1]], list(g[2])] for g in key if g[0] == 1],
                "coeff": to_text(c),
            })
        return {"bidegree": [self.s, self.r], "terms": out}

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)

    @classmethod
    def from_dict(cls, data: dict, sig: BundleSignature) -> "BigradedForm":
        s, r = data["bidegree"]
        form = cls(sig, s, r)
        for t in data["terms"]:
            gens = [("dx", n) for n in t["dx"]] + [("theta", a, tuple(I)) for a, I in t["theta"]]
            form = form + cls.from_generators(sig, gens, parse_expression(t["coeff"], sig))
        return form

    @classmethod
    def from_json(cls, text: str, sig: BundleSignature) -> "BigradedForm":
        return cls.from_dict(json.loads(text), sig)

    def to_latex(self) -> str:
        if self.is_zero():
            return "0"
        parts = []
        for key, c in self.sorted_terms():
            gens = []
            for g in key:
                if g[0] == 0:
                    gens.append(f"d{self.sig.base_names[g[1]]}")
                else:
                    sub = "".join(n * k for n, k in zip(self.sig.base_names, g[2]))
                    gens.append(f"\\theta^{{{self.sig.fields[g[1]]}}}" + (f"_{{{sub}}}" if sub else ""))
            basis = " \\wedge ".join(gens)
            coeff = to_latex(c)
            if not basis:
                parts.append(f"\\left({coeff}\\right)")
            else:
                parts.append(f"\\left({coeff}\\right) {basis}")
        return " + ".join(parts)

    def __repr__(self):
        if self.is_zero():
            return f"BigradedForm(0, bidegree={self.bidegree})"
        parts = []
        for key, c in self.sorted_terms():
            gens = []
            for g in key:
                if g[0] == 0:
                    gens.append(f"d{self.sig.base_names[g[1]]}")
                else:
                    gens.append("theta[" + Jet(self.sig.fields[g[1]], g[2], self.sig.base_names).label + "]")
            parts.append(f"({to_text(c)})" + ("*" + "^".join(gens) if gens else ""))
        return " + ".join(parts)


def _key_sort(key):
    return tuple((g[0], g[1], g[2] if len(g) > 2 else ()) for g in key)


def _gen(sig: BundleSignature, g):
    if g[0] == "dx":
        mu = g[1]
        if isinstance(mu, str):
            mu = sig.base_names.index(mu)
        if not 0 <= mu < sig.base_dim:
            raise IndexError(f"direction {mu} out of range")
        return (0, mu)
    if g[0] == "theta":
        field = g[1]
        counts = tuple(g[2]) if len(g) > 2 else (0,) * sig.base_dim
        if field not in sig.fields:
            raise KeyError(f"unknown field {field!r}")
        if len(counts) != sig.base_dim:
            raise ValueError("contact generator multi-index has wrong length")
        return (1, sig.fields.index(field), counts)
    if isinstance(g[0], int):
        return tuple(g)
    raise ValueError(f"unknown generator {g!r}")


def _add_term(acc: dict, gens: list, coeff: Expr):
    sign, key = _sort_with_sign(gens)
    if not sign or coeff.is_zero():
        return
    acc[key] = acc.get(key, Expr.zero()) + (coeff if sign > 0 else -coeff)


def bidegree(omega: BigradedForm) -> tuple[int, int]:
    return omega.bidegree


def wedge(omega: BigradedForm, eta: BigradedForm) -> BigradedForm:
    omega._check(eta)
    acc = {}
    for k1, c1 in omega.terms.items():
        for k2, c2 in eta.terms.items():
            _add_term(acc, list(k1) + list(k2), c1 * c2)
    return BigradedForm(omega.sig, omega.s + eta.s, omega.r + eta.r, acc)


def d_horizontal(omega: BigradedForm) -> BigradedForm:
    """``d_H``: ``f -> (D_mu f) dx^mu``, ``dx -> 0``, ``theta^a_I -> dx^mu ^ theta^a_{I+mu}``."""
    sig = omega.sig
    acc = {}
    for key, f in omega.terms.items():
        gens = list(key)
        for mu in range(sig.base_dim):
            _add_term(acc, [(0, mu)] + gens, total_derivative(f, mu, sig))
        for k, g in enumerate(gens):
            if g[0] != 1:
                continue
            sf = f if k % 2 == 0 else -f
            for nu in range(sig.base_dim):
                shifted = list(g[2])
                shifted[nu] += 1
                new = gens[:k] + [(0, nu), (1, g[1], tuple(shifted))] + gens[k + 1:]
                _add_term(acc, new, sf)
    return BigradedForm(sig, omega.s, omega.r + 1, acc)


def d_vertical(omega: BigradedForm) -> BigradedForm:
    """``d_V``: ``f -> sum (df/du^a_I) theta^a_I``; generators are closed."""
    sig = omega.sig
    acc = {}
    for key, f in omega.terms.items():
        for j in f.jets():
            if j.field not in sig.fields:
                raise ValueError(f"coefficient mentions a field outside the signature: {j.field}")
            _add_term(acc, [(1, sig.fields.index(j.field), j.counts)] + list(key), partial(f, j))
    return BigradedForm(sig, omega.s + 1, omega.r, acc)


def volume_form(sig: BundleSignature, f=1) -> BigradedForm:
    """``f dx^1 ^ ... ^ dx^m``."""
    return BigradedForm.from_generators(sig, [("dx", mu) for mu in range(sig.base_dim)], f)


# --------------------------------------------------------------------------
# Ordinary exterior forms


class ClassicalForm:
    """Exterior form on a coordinate space with coordinates ``variables``.

    Terms map strictly increasing index tuples into ``variables`` to
    coefficients.  Forms of mixed degree are allowed.
    """

    __slots__ = ("variables", "terms")

    def __init__(self, variables: Sequence[Atom], terms: Mapping | None = None):
        self.variables = tuple(variables)
        clean = {}
        for k, c in (terms or {}).items():
            c = as_expr(c)
            if not c.is_zero():
                clean[tuple(k)] = clean.get(tuple(k), Expr.zero()) + c
        self.terms = {k: c for k, c in clean.items() if not c.is_zero()}

    @classmethod
    def from_monomial(cls, variables, indices: Sequence[int], coeff=1) -> "ClassicalForm":
        sign, key = _sort_with_sign(list(indices))
        if not sign:
            return cls(variables)
        return cls(variables, {key: as_expr(coeff) * sign})

    @classmethod
    def differential(cls, variables, i: int) -> "ClassicalForm":
        return cls(variables, {(i,): Expr.one()})

    def is_zero(self):
        return not self.terms

    def degrees(self) -> set:
        return {len(k) for k in self.terms}

    def __eq__(self, other):
        if not isinstance(other, ClassicalForm):
            return NotImplemented
        return self.variables == other.variables and self.terms == other.terms

    def __hash__(self):
        return hash((self.variables, tuple(sorted(self.terms.items()))))

    def _check(self, other):
        if not isinstance(other, ClassicalForm) or other.variables != self.variables:
            raise ValueError("forms live on different coordinate spaces")

    def __add__(self, other):
        self._check(other)
        terms = dict(self.terms)
        for k, c in other.terms.items():
            terms[k] = terms.get(k, Expr.zero()) + c
        return ClassicalForm(self.variables, terms)

    def __neg__(self):
        return ClassicalForm(self.variables, {k: -c for k, c in self.terms.items()})

    def __sub__(self, other):
        return self + (-other)

    def scale(self, f) -> "ClassicalForm":
        f = as_expr(f)
        return ClassicalForm(self.variables, {k: f * c for k, c in self.terms.items()})

    def wedge(self, other: "ClassicalForm") -> "ClassicalForm":
        self._check(other)
        acc = {}
        for k1, c1 in self.terms.items():
            for k2, c2 in other.terms.items():
                _add_term(acc, list(k1) + list(k2), c1 * c2)
        return ClassicalForm(self.variables, acc)

    def d(self) -> "ClassicalForm":
        acc = {}
        for k, c in self.terms.items():
            for i, v in enumerate(self.variables):
                if v in c.free:
                    _add_term(acc, [i] + list(k), partial(c, v))
        return ClassicalForm(self.variables, acc)

    def split(self, n_first: int) -> dict:
        """Group terms by ``(count of indices < n_first, count of the rest)``."""
        out: dict = {}
        for k, c in self.terms.items():
            a = sum(1 for i in k if i < n_first)
            out.setdefault((a, len(k) - a), {})[k] = c
        return {bd: ClassicalForm(self.variables, t) for bd, t in out.items()}

    def pullback(self, new_variables: Sequence[Atom], components: Mapping[Atom, Expr]) -> "ClassicalForm":
        """Pull back along the map whose coordinate expressions are ``components``.

        ``components`` gives every old variable as an expression in the new ones.
        """
        new_variables = tuple(new_variables)
        comps = {v: as_expr(components[v]) for v in self.variables}
        one_forms = []
        for v in self.variables:
            phi = comps[v]
            one_forms.append(ClassicalForm(new_variables, {
                (j,): partial(phi, w) for j, w in enumerate(new_variables) if w in phi.free
            }))
        out = ClassicalForm(new_variables)
        for k, c in self.terms.items():
            term = ClassicalForm(new_variables, {(): substitute(c, comps)})
            for i in k:
                term = term.wedge(one_forms[i])
            out = out + term
        return out

    def to_dict(self) -> dict:
        names = [to_text(Expr._atom(v)) for v in self.variables]
        return {
            "variables": names,
            "terms": [{"d": [names[i] for i in k], "coeff": to_text(c)}
                      for k, c in sorted(self.terms.items())],
        }

    def __repr__(self):
        if not self.terms:
            return "ClassicalForm(0)"
        names = [to_text(Expr._atom(v)) for v in self.variables]
        return " + ".join(
            f"({to_text(c)})" + "".join(f"*d{names[i]}" for i in k)
            for k, c in sorted(self.terms.items())
        )


def ev_pullback(omega: BigradedForm, family: Section, parameters: Sequence[Param | str]) -> ClassicalForm:
    """Pull ``omega`` back along ``(eps, x) -> j^inf phi_eps(x)``.

    ``family`` is a section whose components may depend polynomially on the
    parameter atoms.  The result lives on parameter space times the base,
    variables ordered ``(eps_1.., x^1..)``: ``dx`` stays ``dx``, and
    ``theta^a_I`` becomes ``sum_j d(d_I phi^a)/d eps_j  d eps_j``.
    """
    sig = omega.sig
    params = tuple(Param(p) if isinstance(p, str) else p for p in parameters)
    variables = params + sig.coords()
    n_par = len(params)
    for a, c in family.components.items():
        for atom in c.atoms():
            if not isinstance(atom, (Coord, Param)):
                raise ValueError("ev_pullback needs a polynomial family")
    derivs: dict = {}

    def phi_I(field, counts):
        key = (field, counts)
        if key not in derivs:
            derivs[key] = family.derivative(field, counts)
        return derivs[key]

    out = ClassicalForm(variables)
    for key, f in omega.terms.items():
        coeff = substitute(f, {j: phi_I(j.field, j.counts) for j in f.jets()})
        term = ClassicalForm(variables, {(): coeff})
        for g in key:
            if g[0] == 0:
                one = ClassicalForm.differential(variables, n_par + g[1])
            else:
                val = phi_I(sig.fields[g[1]], g[2])
                one = ClassicalForm(variables, {(j,): partial(val, p) for j, p in enumerate(params)})
            term = term.wedge(one)
        out = out + term
    return out
