"""Canonical symbolic expressions over jet-bundle coordinates.

An :class:`Expr` is a finite sum of monomials with exact rational
coefficients.  A monomial is a sorted product of atoms raised to nonzero
integer powers.  Atoms are the coordinate symbols (:class:`Param`,
:class:`Coord`, :class:`Jet`) plus two composite kinds: :class:`Func` for
``sin/cos/exp/log`` applications and :class:`Group` for sums that stay
unexpanded.  Polynomial sums are always expanded; a sum containing function
atoms or negative powers is expanded only up to :data:`EXPAND_LIMIT` and
kept opaque above it.

Every constructor returns the normal form, so structural equality is
semantic equality for polynomial expressions.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass
from fractions import Fraction
from typing import Callable, Iterable, Mapping

__all__ = [
    "EXPAND_LIMIT",
    "FUNCTIONS",
    "BundleSignature",
    "MultiIndex",
    "Atom",
    "Param",
    "Coord",
    "Jet",
    "Func",
    "Group",
    "Expr",
    "ParseError",
    "EvaluationError",
    "const",
    "sin",
    "cos",
    "exp",
    "log",
    "apply_function",
    "parse_expression",
    "normalize",
    "partial",
    "order",
    "evaluate",
    "substitute",
    "to_text",
    "to_latex",
    "compile_float",
]

EXPAND_LIMIT = 4
FUNCTIONS = ("sin", "cos", "exp", "log")


class ParseError(ValueError):
    """Malformed expression text.  ``position`` is a 0-based offset."""

    def __init__(self, message: str, position: int | None = None):
        self.position = position
        if position is not None:
            message = f"{message} (at position {position})"
        super().__init__(message)


class EvaluationError(ValueError):
    pass


# --------------------------------------------------------------------------
# Signature and multi-indices


@dataclass(frozen=True)
class MultiIndex:
    """Symmetric derivative multi-index stored as per-direction counts."""

    counts: tuple[int, ...]

    def __post_init__(self):
        if any(c < 0 for c in self.counts):
            raise ValueError(f"negative count in multi-index {self.counts}")

    @classmethod
    def zero(cls, dim: int) -> "MultiIndex":
        return cls((0,) * dim)

    @classmethod
    def from_directions(cls, dim: int, directions: Iterable[int]) -> "MultiIndex":
        counts = [0] * dim
        for mu in directions:
            counts[mu] += 1
        return cls(tuple(counts))

    @property
    def order(self) -> int:
        return sum(self.counts)

    def plus(self, mu: int) -> "MultiIndex":
        c = list(self.counts)
        c[mu] += 1
        return MultiIndex(tuple(c))

    def minus(self, mu: int) -> "MultiIndex":
        c = list(self.counts)
        if c[mu] == 0:
            raise ValueError(f"cannot remove direction {mu} from {self.counts}")
        c[mu] -= 1
        return MultiIndex(tuple(c))

    def directions(self) -> list[int]:
        """Directions in ascending order, each repeated by its count."""
        return [mu for mu, c in enumerate(self.counts) for _ in range(c)]


_IDENT = re.compile(r"[A-Za-z][A-Za-z0-9]*\Z")


@dataclass(frozen=True)
class BundleSignature:
    """Adapted coordinates ``x^mu`` on the base and ``u^a`` on the fibre.

    ``params`` are named real constants (masses, couplings) that stay
    symbolic.
    """

    base_names: tuple[str, ...]
    fields: tuple[str, ...]
    params: tuple[str, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "base_names", tuple(self.base_names))
        object.__setattr__(self, "fields", tuple(self.fields))
        object.__setattr__(self, "params", tuple(self.params))
        if len(self.base_names) < 1:
            raise ValueError("base dimension must be at least 1")
        if len(self.fields) < 1:
            raise ValueError("at least one field is required")
        names = self.base_names + self.fields + self.params
        if len(set(names)) != len(names):
            raise ValueError(f"signature names must be pairwise distinct: {names}")
        for n in names:
            if not _IDENT.match(n):
                raise ValueError(f"invalid identifier {n!r}")
            if n in FUNCTIONS:
                raise ValueError(f"{n!r} is reserved for a function")

    @property
    def base_dim(self) -> int:
        return len(self.base_names)

    def coord(self, name_or_index: str | int) -> "Coord":
        if isinstance(name_or_index, int):
            return Coord(self.base_names[name_or_index])
        if name_or_index not in self.base_names:
            raise KeyError(f"unknown base coordinate {name_or_index!r}")
        return Coord(name_or_index)

    def coords(self) -> tuple["Coord", ...]:
        return tuple(Coord(n) for n in self.base_names)

    def jet(self, field: str, counts: Iterable[int] | MultiIndex | None = None) -> "Jet":
        if field not in self.fields:
            raise KeyError(f"unknown field {field!r}")
        if counts is None:
            counts = (0,) * self.base_dim
        if isinstance(counts, MultiIndex):
            counts = counts.counts
        counts = tuple(counts)
        if len(counts) != self.base_dim:
            raise ValueError(f"multi-index {counts} does not match base dimension {self.base_dim}")
        return Jet(field, counts, self.base_names)

    def param(self, name: str) -> "Param":
        if name not in self.params:
            raise KeyError(f"unknown parameter {name!r}")
        return Param(name)

    def multi_indices(self, max_order: int) -> list[MultiIndex]:
        """All multi-indices with ``|I| <= max_order``, ordered by order."""
        out = []
        for k in range(max_order + 1):
            out.extend(MultiIndex(c) for c in _compositions(k, self.base_dim))
        return out

    def jets_up_to(self, max_order: int) -> list["Jet"]:
        return [self.jet(a, I) for a in self.fields for I in self.multi_indices(max_order)]

    def is_coordinate(self, atom: "Atom") -> bool:
        if isinstance(atom, Coord):
            return atom.name in self.base_names
        if isinstance(atom, Jet):
            return atom.field in self.fields and len(atom.counts) == self.base_dim
        if isinstance(atom, Param):
            return atom.name in self.params
        return False

    def extended(self, fields: Iterable[str] = (), params: Iterable[str] = ()) -> "BundleSignature":
        return BundleSignature(self.base_names, self.fields + tuple(fields), self.params + tuple(params))


def _compositions(total: int, parts: int):
    if parts == 1:
        yield (total,)
        return
    for first in range(total, -1, -1):
        for rest in _compositions(total - first, parts - 1):
            yield (first,) + rest


# --------------------------------------------------------------------------
# Atoms


class Atom:
    __slots__ = ("key", "free", "_hash")

    def __eq__(self, other):
        return isinstance(other, Atom) and self.key == other.key

    def __hash__(self):
        return self._hash

    def __lt__(self, other):
        return self.key < other.key

    def __repr__(self):
        return f"{type(self).__name__}({to_text(Expr._atom(self))})"


class Param(Atom):
    __slots__ = ("name",)

    def __init__(self, name: str):
        self.name = name
        self.key = (0, name)
        self._hash = hash(self.key)
        self.free = frozenset((self,))


class Coord(Atom):
    __slots__ = ("name",)

    def __init__(self, name: str):
        self.name = name
        self.key = (1, name)
        self._hash = hash(self.key)
        self.free = frozenset((self,))


class Jet(Atom):
    """Jet coordinate ``u^a_I``.  ``names`` is used for printing only."""

    __slots__ = ("field", "counts", "names")

    def __init__(self, field: str, counts: tuple[int, ...], names: tuple[str, ...] | None = None):
        counts = tuple(counts)
        self.field = field
        self.counts = counts
        self.names = tuple(names) if names is not None else tuple(f"x{i}" for i in range(len(counts)))
        # descending counts put t-derivatives before x-derivatives for base (t, x)
        self.key = (2, field, sum(counts), tuple(-c for c in counts))
        self._hash = hash(self.key)
        self.free = frozenset((self,))

    @property
    def index(self) -> MultiIndex:
        return MultiIndex(self.counts)

    @property
    def order(self) -> int:
        return sum(self.counts)

    def shifted(self, mu: int) -> "Jet":
        c = list(self.counts)
        c[mu] += 1
        return Jet(self.field, tuple(c), self.names)

    @property
    def label(self) -> str:
        if not any(self.counts):
            return self.field
        return self.field + "_" + "".join(n * c for n, c in zip(self.names, self.counts))


class Func(Atom):
    __slots__ = ("name", "arg")

    def __init__(self, name: str, arg: "Expr"):
        self.name = name
        self.arg = arg
        self.key = (3, name, arg.key)
        self._hash = hash(self.key)
        self.free = arg.free


class Group(Atom):
    """An unexpanded sum.  The body is primitive: its first term has coefficient 1."""

    __slots__ = ("body", "polynomial")

    def __init__(self, body: "Expr"):
        self.body = body
        self.polynomial = body.is_polynomial()
        self.key = (4, body.key)
        self._hash = hash(self.key)
        self.free = body.free


SYMBOL_TYPES = (Param, Coord, Jet)


# --------------------------------------------------------------------------
# Expressions

Monomial = tuple  # tuple[tuple[Atom, int], ...], sorted by atom key


def _mono_key(m: Monomial):
    return tuple((a.key, k) for a, k in m)


def _mono_mul(m1: Monomial, m2: Monomial) -> Monomial:
    if not m1:
        return m2
    if not m2:
        return m1
    d = dict(m1)
    for a, k in m2:
        k2 = d.get(a, 0) + k
        if k2:
            d[a] = k2
        else:
            del d[a]
    return tuple(sorted(d.items(), key=lambda p: p[0].key))


def _expand_group(a: Atom, k: int) -> bool:
    # polynomial sums always expand so polynomial normal forms stay canonical
    return isinstance(a, Group) and k > 0 and (k <= EXPAND_LIMIT or a.polynomial)


def _expandable(m: Monomial) -> bool:
    return any(_expand_group(a, k) for a, k in m)


class Expr:
    """Immutable expression in normal form.  Build with the module helpers
    or Python operators; never mutate ``terms``."""

    __slots__ = ("terms", "_key", "_free", "_hash")

    def __init__(self, terms: tuple = ()):
        # trusted constructor: terms already canonical
        self.terms = terms
        self._key = None
        self._free = None
        self._hash = None

    # -- construction -----------------------------------------------------

    @staticmethod
    def _from_dict(d: dict) -> "Expr":
        pending = []
        clean = {}
        for m, c in d.items():
            if not c:
                continue
            if _expandable(m):
                pending.append((m, c))
            else:
                clean[m] = clean.get(m, 0) + c
        for m, c in pending:
            rest = []
            expanded = Expr.one()
            for a, k in m:
                if _expand_group(a, k):
                    expanded = expanded * a.body ** k
                else:
                    rest.append((a, k))
            for m2, c2 in expanded.terms:
                mm = _mono_mul(tuple(rest), m2)
                clean[mm] = clean.get(mm, 0) + c * c2
        items = [(m, c) for m, c in clean.items() if c]
        items.sort(key=lambda p: _mono_key(p[0]))
        return Expr(tuple(items))

    @staticmethod
    def _atom(a: Atom, k: int = 1) -> "Expr":
        return Expr(((((a, k),), Fraction(1)),))

    @staticmethod
    def zero() -> "Expr":
        return _ZERO

    @staticmethod
    def one() -> "Expr":
        return _ONE

    # -- properties -------------------------------------------------------

    @property
    def key(self):
        if self._key is None:
            self._key = tuple((_mono_key(m), c) for m, c in self.terms)
        return self._key

    @property
    def free(self) -> frozenset:
        if self._free is None:
            s = set()
            for m, _ in self.terms:
                for a, _ in m:
                    s |= a.free
            self._free = frozenset(s)
        return self._free

    def atoms(self) -> set:
        """Every atom occurring anywhere, including inside functions and groups."""
        out = set()
        for m, _ in self.terms:
            for a, _ in m:
                out.add(a)
                if isinstance(a, Func):
                    out |= a.arg.atoms()
                elif isinstance(a, Group):
                    out |= a.body.atoms()
        return out

    def jets(self) -> set:
        return {a for a in self.free if isinstance(a, Jet)}

    def is_zero(self) -> bool:
        return not self.terms

    def is_polynomial(self) -> bool:
        """Only coordinate symbols, all with positive exponents."""
        return all(isinstance(a, SYMBOL_TYPES) and k > 0 for m, _ in self.terms for a, k in m)

    def is_constant(self) -> bool:
        return not self.terms or (len(self.terms) == 1 and not self.terms[0][0])

    def constant_value(self) -> Fraction:
        if not self.terms:
            return Fraction(0)
        if self.is_constant():
            return self.terms[0][1]
        raise ValueError(f"{to_text(self)} is not constant")

    def coefficient_dict(self) -> dict:
        return dict(self.terms)

    # -- arithmetic -------------------------------------------------------

    def __eq__(self, other):
        if isinstance(other, (int, Fraction)):
            other = const(other)
        if not isinstance(other, Expr):
            return NotImplemented
        return self.terms == other.terms

    def __hash__(self):
        if self._hash is None:
            self._hash = hash(self.key)
        return self._hash

    def __add__(self, other):
        other = _coerce(other)
        if not other.terms:
            return self
        if not self.terms:
            return other
        d = dict(self.terms)
        for m, c in other.terms:
            d[m] = d.get(m, 0) + c
        return Expr._from_dict(d)

    __radd__ = __add__

    def __neg__(self):
        return Expr(tuple((m, -c) for m, c in self.terms))

    def __sub__(self, other):
        return self + (-_coerce(other))

    def __rsub__(self, other):
        return _coerce(other) - self

    def __mul__(self, other):
        other = _coerce(other)
        if not self.terms or not other.terms:
            return _ZERO
        d = {}
        for m1, c1 in self.terms:
            for m2, c2 in other.terms:
                m = _mono_mul(m1, m2)
                d[m] = d.get(m, 0) + c1 * c2
        return Expr._from_dict(d)

    __rmul__ = __mul__

    def __truediv__(self, other):
        return self * _coerce(other) ** -1

    def __rtruediv__(self, other):
        return _coerce(other) * self ** -1

    def __pow__(self, n):
        if isinstance(n, Expr):
            n = n.constant_value()
        if isinstance(n, Fraction):
            if n.denominator != 1:
                raise ValueError("only integer exponents are supported")
            n = int(n)
        if not isinstance(n, int):
            raise TypeError("exponent must be an integer")
        if n == 0:
            return _ONE
        if not self.terms:
            if n < 0:
                raise ZeroDivisionError("zero to a negative power")
            return _ZERO
        if n == 1:
            return self
        if len(self.terms) == 1:
            m, c = self.terms[0]
            if not m:
                return const(c ** n)
            d = {tuple((a, k * n) for a, k in m): c ** n}
            return Expr._from_dict(d)
        if 0 < n and (n <= EXPAND_LIMIT or self.is_polynomial()):
            out = self
            for _ in range(n - 1):
                out = out * self
            return out
        lead = self.terms[0][1]
        body = Expr(tuple((m, c / lead) for m, c in self.terms))
        return Expr._from_dict({((Group(body), n),): lead ** n})

    def __repr__(self):
        return f"Expr({to_text(self)!r})"

    def __str__(self):
        return to_text(self)


def _coerce(x) -> Expr:
    if isinstance(x, Expr):
        return x
    if isinstance(x, Atom):
        return Expr._atom(x)
    if isinstance(x, (int, Fraction)):
        return const(x)
    raise TypeError(f"cannot use {type(x).__name__} in an expression")


def const(value) -> Expr:
    value = Fraction(value)
    if not value:
        return Expr(())
    return Expr((((), value),))


_ZERO = Expr(())
_ONE = Expr((((), Fraction(1)),))


def as_expr(x) -> Expr:
    """Coerce atoms and rationals into expressions."""
    return _coerce(x)


# --------------------------------------------------------------------------
# Elementary functions


def apply_function(name: str, arg) -> Expr:
    arg = _coerce(arg)
    if name not in FUNCTIONS:
        raise ValueError(f"unknown function {name!r}")
    if arg.is_constant():
        v = arg.constant_value()
        if v == 0 and name == "sin":
            return _ZERO
        if v == 0 and name in ("cos", "exp"):
            return _ONE
        if v == 1 and name == "log":
            return _ZERO
        if v <= 0 and name == "log":
            raise EvaluationError(f"log of non-positive constant {v}")
    return Expr._atom(Func(name, arg))


def sin(e) -> Expr:
    return apply_function("sin", e)


def cos(e) -> Expr:
    return apply_function("cos", e)


def exp(e) -> Expr:
    return apply_function("exp", e)


def log(e) -> Expr:
    return apply_function("log", e)


def _func_derivative(name: str, arg: Expr) -> Expr:
    if name == "sin":
        return cos(arg)
    if name == "cos":
        return -sin(arg)
    if name == "exp":
        return exp(arg)
    return arg ** -1


# --------------------------------------------------------------------------
# Normal form, derivatives, substitution


def normalize(e: Expr) -> Expr:
    """Expressions are always stored normalized; rebuilding is a no-op
    apart from re-canonicalising nested atoms."""
    return substitute(e, {})


def derive(e: Expr, rule: Callable[[Atom], Expr | None]) -> Expr:
    """Apply the derivation that sends each symbol atom ``a`` to ``rule(a)``.

    ``rule`` returns ``None`` for symbols the derivation annihilates.  Function
    and group atoms are handled by the chain rule.
    """
    cache = {}

    def atom_derivative(a: Atom) -> Expr:
        if a in cache:
            return cache[a]
        if isinstance(a, SYMBOL_TYPES):
            r = rule(a)
            r = _ZERO if r is None else _coerce(r)
        elif isinstance(a, Func):
            inner = derive(a.arg, rule)
            r = _ZERO if inner.is_zero() else _func_derivative(a.name, a.arg) * inner
        else:
            r = derive(a.body, rule)
        cache[a] = r
        return r

    acc = {}
    for m, c in e.terms:
        for i, (a, k) in enumerate(m):
            da = atom_derivative(a)
            if da.is_zero():
                continue
            rest = m[:i] + m[i + 1:]
            if k != 1:
                rest = _mono_mul(rest, ((a, k - 1),))
            for m2, c2 in da.terms:
                mm = _mono_mul(rest, m2)
                acc[mm] = acc.get(mm, 0) + c * k * c2
    return Expr._from_dict(acc)


def partial(e: Expr, c: Atom, sig: BundleSignature | None = None) -> Expr:
    """Formal partial derivative; all jet coordinates are independent."""
    if not isinstance(c, SYMBOL_TYPES):
        raise ValueError(f"cannot differentiate with respect to {c!r}")
    if sig is not None and not sig.is_coordinate(c):
        raise KeyError(f"unknown coordinate {c!r}")
    if c not in e.free:
        return _ZERO
    return derive(e, lambda a: _ONE if a == c else None)


def substitute(e: Expr, mapping: Mapping[Atom, Expr]) -> Expr:
    """Replace symbol atoms by expressions, re-normalizing the result."""
    mapping = {k: _coerce(v) for k, v in mapping.items()}
    keys = frozenset(mapping)
    cache = {}

    def sub_atom(a: Atom) -> Expr:
        if a in cache:
            return cache[a]
        if isinstance(a, SYMBOL_TYPES):
            r = mapping.get(a, Expr._atom(a))
        elif isinstance(a, Func):
            r = apply_function(a.name, substitute(a.arg, mapping))
        else:
            r = substitute(a.body, mapping)
        cache[a] = r
        return r

    if keys and not (keys & e.free):
        return e
    out = _ZERO
    acc = {}
    for m, c in e.terms:
        term = const(c)
        for a, k in m:
            if isinstance(a, SYMBOL_TYPES) and a not in keys:
                term = term * Expr._atom(a, k)
            else:
                term = term * sub_atom(a) ** k
        for mm, cc in term.terms:
            acc[mm] = acc.get(mm, 0) + cc
    out = Expr._from_dict(acc)
    return out


def order(e: Expr) -> int:
    """Largest ``|I|`` over the jet coordinates that occur; 0 if none."""
    return max((j.order for j in e.jets()), default=0)


# --------------------------------------------------------------------------
# Evaluation


def _lookup(assignment: Mapping, a: Atom):
    if a in assignment:
        return assignment[a]
    if isinstance(a, Jet):
        for k in (a.label, a):
            if k in assignment:
                return assignment[k]
    elif a.name in assignment:
        return assignment[a.name]
    raise EvaluationError(f"no value assigned to {to_text(Expr._atom(a))}")


def evaluate(e: Expr, assignment: Mapping | None = None, params: Mapping | None = None,
             exact: bool = False):
    """Numeric value of ``e``.

    ``assignment`` maps atoms (or their printed names) to numbers; ``params``
    does the same for named parameters.  With ``exact=True`` the result is a
    :class:`~fractions.Fraction` and elementary functions are rejected.
    """
    values = dict(assignment or {})
    if params:
        for k, v in params.items():
            values[Param(k) if isinstance(k, str) else k] = v
    cache = {}

    def val(a: Atom):
        if a in cache:
            return cache[a]
        if isinstance(a, Param):
            v = values[a] if a in values else _lookup(values, a)
        elif isinstance(a, SYMBOL_TYPES):
            v = _lookup(values, a)
        elif isinstance(a, Group):
            v = ev(a.body)
        else:
            if exact:
                raise EvaluationError(f"cannot evaluate {a.name} exactly")
            x = float(ev(a.arg))
            if a.name == "log":
                if x <= 0:
                    raise EvaluationError(f"log of non-positive value {x}")
                v = math.log(x)
            else:
                v = getattr(math, a.name)(x)
        v = Fraction(v) if exact else float(v)
        cache[a] = v
        return v

    def ev(x: Expr):
        total = Fraction(0) if exact else 0.0
        for m, c in x.terms:
            t = c if exact else float(c)
            for a, k in m:
                base = val(a)
                if k < 0 and base == 0:
                    raise EvaluationError("division by zero")
                t = t * base ** k
            total += t
        return total

    return ev(e)


def compile_float(e: Expr, symbols: Iterable[Atom], params: Mapping[str, float] | None = None):
    """Compile ``e`` into a plain Python function of the given symbols."""
    symbols = list(symbols)
    names = {a: f"_v{i}" for i, a in enumerate(symbols)}
    for k, v in (params or {}).items():
        names[Param(k)] = repr(float(v))

    def atom_src(a: Atom) -> str:
        if isinstance(a, SYMBOL_TYPES):
            if a not in names:
                raise EvaluationError(f"no value assigned to {to_text(Expr._atom(a))}")
            return names[a]
        if isinstance(a, Group):
            return "(" + src(a.body) + ")"
        return f"_m.{a.name}({src(a.arg)})"

    def src(x: Expr) -> str:
        if not x.terms:
            return "0.0"
        parts = []
        for m, c in x.terms:
            factors = [repr(float(c))]
            for a, k in m:
                factors.append(f"{atom_src(a)}**{k}" if k != 1 else atom_src(a))
            parts.append("*".join(factors))
        return " + ".join(parts)

    args = ", ".join(f"_v{i}" for i in range(len(symbols)))
    code = f"lambda {args}: {src(e)}"
    return eval(code, {"_m": math})  # noqa: S307 - source generated above


# --------------------------------------------------------------------------
# Printing


def _fmt_rational(c: Fraction) -> str:
    return str(c.numerator) if c.denominator == 1 else f"{c.numerator}/{c.denominator}"


def _atom_text(a: Atom) -> str:
    if isinstance(a, (Param, Coord)):
        return a.name
    if isinstance(a, Jet):
        return a.label
    if isinstance(a, Func):
        return f"{a.name}({to_text(a.arg)})"
    return f"({to_text(a.body)})"


def _power_text(a: Atom, k: int) -> str:
    base = _atom_text(a)
    if k == 1:
        return base
    return f"{base}^{k}" if k > 0 else f"{base}^({k})"


def to_text(e: Expr) -> str:
    """Print in the parser's grammar; ``parse_expression`` inverts this."""
    if not e.terms:
        return "0"
    out = []
    for i, (m, c) in enumerate(e.terms):
        neg = c < 0
        mag = -c if neg else c
        if not m:
            body = _fmt_rational(mag)
        else:
            factors = "*".join(_power_text(a, k) for a, k in m)
            body = factors if mag == 1 else f"{_fmt_rational(mag)}*{factors}"
        if i == 0:
            out.append(("-" if neg else "") + body)
        else:
            out.append((" - " if neg else " + ") + body)
    return "".join(out)


def _atom_latex(a: Atom) -> str:
    if isinstance(a, (Param, Coord)):
        return a.name
    if isinstance(a, Jet):
        if not any(a.counts):
            return a.field
        return a.field + "_{" + "".join(n * c for n, c in zip(a.names, a.counts)) + "}"
    if isinstance(a, Func):
        return f"\\{a.name}\\left({to_latex(a.arg)}\\right)"
    return f"\\left({to_latex(a.body)}\\right)"


def to_latex(e: Expr) -> str:
    if not e.terms:
        return "0"
    out = []
    for i, (m, c) in enumerate(e.terms):
        neg = c < 0
        mag = -c if neg else c
        if mag.denominator == 1:
            coeff = str(mag.numerator)
        else:
            coeff = f"\\frac{{{mag.numerator}}}{{{mag.denominator}}}"
        factors = " ".join(
            _atom_latex(a) if k == 1 else f"{_atom_latex(a)}^{{{k}}}" for a, k in m
        )
        if not m:
            body = coeff
        elif mag == 1:
            body = factors
        else:
            body = f"{coeff} {factors}"
        sign = ("-" if neg else "") if i == 0 else (" - " if neg else " + ")
        out.append(sign + body)
    return "".join(out)


# --------------------------------------------------------------------------
# Parsing

_TOKEN = re.compile(r"\s*(?:(\d+)|([A-Za-z][A-Za-z0-9]*)|(.))")


class _Parser:
    def __init__(self, text: str, sig: BundleSignature):
        self.text = text
        self.sig = sig
        self.tokens = []
        pos = 0
        while pos < len(text):
            m = _TOKEN.match(text, pos)
            if m.group(0).strip() == "":
                break
            start = m.start(m.lastindex)
            if m.group(1):
                self.tokens.append(("num", m.group(1), start))
            elif m.group(2):
                self.tokens.append(("id", m.group(2), start))
            else:
                ch = m.group(3)
                if ch not in "+-*/^()_":
                    raise ParseError(f"unexpected character {ch!r}", start)
                self.tokens.append(("op", ch, start))
            pos = m.end()
        self.i = 0

    def peek(self, value=None):
        if self.i >= len(self.tokens):
            return None
        tok = self.tokens[self.i]
        if value is not None and tok[1] != value:
            return None
        return tok

    def pos(self):
        return self.tokens[self.i][2] if self.i < len(self.tokens) else len(self.text)

    def take(self):
        tok = self.tokens[self.i]
        self.i += 1
        return tok

    def expect(self, value):
        tok = self.peek()
        if tok is None or tok[1] != value:
            raise ParseError(f"expected {value!r}", self.pos())
        return self.take()

    def parse(self) -> Expr:
        if not self.tokens:
            raise ParseError("empty expression", 0)
        e = self.expr()
        if self.i < len(self.tokens):
            raise ParseError(f"unexpected token {self.tokens[self.i][1]!r}", self.pos())
        return e

    def expr(self) -> Expr:
        e = self.term()
        while self.peek("+") or self.peek("-"):
            op = self.take()[1]
            rhs = self.term()
            e = e + rhs if op == "+" else e - rhs
        return e

    def term(self) -> Expr:
        e = self.unary()
        while self.peek("*") or self.peek("/"):
            tok = self.take()
            rhs = self.unary()
            if tok[1] == "*":
                e = e * rhs
            else:
                if rhs.is_zero():
                    raise ParseError("division by zero", tok[2])
                e = e / rhs
        return e

    def unary(self) -> Expr:
        if self.peek("-"):
            self.take()
            return -self.unary()
        if self.peek("+"):
            self.take()
            return self.unary()
        return self.power()

    def power(self) -> Expr:
        base = self.atom()
        if self.peek("^"):
            tok = self.take()
            ex = self.unary()
            if not ex.is_constant() or ex.constant_value().denominator != 1:
                raise ParseError("exponent must be an integer constant", tok[2])
            n = int(ex.constant_value())
            if base.is_zero() and n < 0:
                raise ParseError("zero to a negative power", tok[2])
            return base ** n
        return base

    def atom(self) -> Expr:
        tok = self.peek()
        if tok is None:
            raise ParseError("unexpected end of input", len(self.text))
        kind, value, start = tok
        if kind == "num":
            self.take()
            return const(int(value))
        if value == "(":
            self.take()
            e = self.expr()
            self.expect(")")
            return e
        if kind != "id":
            raise ParseError(f"unexpected token {value!r}", start)
        self.take()
        if value in FUNCTIONS and self.peek("("):
            self.take()
            arg = self.expr()
            self.expect(")")
            try:
                return apply_function(value, arg)
            except EvaluationError as exc:
                raise ParseError(str(exc), start) from None
        if self.peek("_"):
            us = self.take()
            if value not in self.sig.fields:
                raise ParseError(f"{value!r} is not a field", start)
            sub = self.peek()
            if sub is None or sub[0] != "id":
                raise ParseError("expected derivative subscript", us[2] + 1)
            self.take()
            counts = self._split_subscript(sub[1], sub[2])
            return Expr._atom(self.sig.jet(value, counts))
        if value in self.sig.fields:
            return Expr._atom(self.sig.jet(value))
        if value in self.sig.base_names:
            return Expr._atom(Coord(value))
        if value in self.sig.params:
            return Expr._atom(Param(value))
        raise ParseError(f"unknown identifier {value!r}", start)

    def _split_subscript(self, s: str, start: int) -> tuple[int, ...]:
        counts = [0] * self.sig.base_dim
        names = sorted(enumerate(self.sig.base_names), key=lambda p: -len(p[1]))
        i = 0
        while i < len(s):
            for mu, n in names:
                if s.startswith(n, i):
                    counts[mu] += 1
                    i += len(n)
                    break
            else:
                raise ParseError(f"derivative subscript {s[i:]!r} is not a base name", start + i)
        return tuple(counts)


def parse_expression(text: str, sig: BundleSignature) -> Expr:
    """Parse ``text`` into a normalized expression over ``sig``."""
    return _Parser(text, sig).parse()
