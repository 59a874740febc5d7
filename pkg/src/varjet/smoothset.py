"""Smooth sets as explicit plot systems.

A smooth set is presented by a combinator object that knows which witnesses
are plots over a given domain, how plots restrict along smooth maps, and how
compatible local plots glue.  Plots are always carried by symbolic
witnesses, so membership is witness checking rather than search.

Domains are finite unions of open axis-aligned boxes.  Gluing is limited to
witnesses given by globally elementary expressions: agreement on an open
overlap then forces equal normal forms, and the glued plot is that common
witness.
"""

from __future__ import annotations

import random
from dataclasses import dataclass, field
from fractions import Fraction
from itertools import product as cartesian
from typing import Callable, Sequence

from .bicomplex import ClassicalForm
from .jetcalc import Section
from .sampling import random_polynomial, random_rational
from .symexpr import (
    BundleSignature,
    Coord,
    Expr,
    as_expr,
    compile_float,
    const,
    substitute,
    to_text,
)

__all__ = [
    "PlotDomain",
    "SmoothMap",
    "compose",
    "MapPlot",
    "Pair",
    "ExponentialMap",
    "SectionFamily",
    "FormPlot",
    "TowerSequence",
    "QuotientLift",
    "SmoothSetObject",
    "Representable",
    "Product",
    "Exponential",
    "SectionsSheaf",
    "FormsSheaf",
    "TowerLimit",
    "JetSpace",
    "Quotient",
    "PointsReport",
    "GlueError",
    "representable",
    "product",
    "exponential",
    "sections_sheaf",
    "forms_sheaf",
    "tower_limit",
    "jet_tower",
    "jet_tower_plot",
    "quotient",
    "check_functoriality",
    "glue",
    "points",
    "axiom_suite",
]

SAMPLES_PER_BOX = 1000
_UNBOUNDED_SAMPLE = Fraction(10)


class GlueError(ValueError):
    """Local plots disagree on an overlap (or cannot be glued elementarily)."""

    def __init__(self, message, pair=None, point=None):
        self.pair = pair
        self.point = point
        super().__init__(message)


# --------------------------------------------------------------------------
# Domains and maps

Bound = tuple  # (lo, hi), None for unbounded


def _frac(v):
    return None if v is None else Fraction(v)


def _box_key(box):
    return tuple((lo if lo is not None else -10**9, hi if hi is not None else 10**9) for lo, hi in box)


@dataclass(frozen=True)
class PlotDomain:
    """Finite union of open boxes in ``R^dim``; ``dim = 0`` is the point."""

    dim: int
    boxes: tuple
    names: tuple

    def __post_init__(self):
        boxes = tuple(sorted(
            (tuple((_frac(lo), _frac(hi)) for lo, hi in box) for box in self.boxes),
            key=_box_key,
        ))
        object.__setattr__(self, "boxes", boxes)
        object.__setattr__(self, "names", tuple(self.names))
        if len(self.names) != self.dim or len(set(self.names)) != self.dim:
            raise ValueError("a domain needs one distinct coordinate name per dimension")
        for box in boxes:
            if len(box) != self.dim:
                raise ValueError("box dimension mismatch")
            for lo, hi in box:
                if lo is not None and hi is not None and not lo < hi:
                    raise ValueError(f"box side ({lo}, {hi}) has non-positive length")

    @classmethod
    def point(cls) -> "PlotDomain":
        return cls(0, ((),), ())

    @classmethod
    def euclidean(cls, n: int, names: Sequence[str] | None = None) -> "PlotDomain":
        names = tuple(names) if names is not None else _default_names(n)
        return cls(n, (((None, None),) * n,), names)

    @classmethod
    def box(cls, bounds: Sequence, names: Sequence[str] | None = None) -> "PlotDomain":
        bounds = tuple(tuple(b) for b in bounds)
        names = tuple(names) if names is not None else _default_names(len(bounds))
        return cls(len(bounds), (bounds,), names)

    @classmethod
    def interval(cls, lo, hi, name: str = "t") -> "PlotDomain":
        return cls.box([(lo, hi)], (name,))

    @property
    def is_empty(self) -> bool:
        return not self.boxes

    def coords(self) -> tuple:
        return tuple(Coord(n) for n in self.names)

    def renamed(self, names: Sequence[str]) -> "PlotDomain":
        return PlotDomain(self.dim, self.boxes, tuple(names))

    def is_bounded(self) -> bool:
        return all(lo is not None and hi is not None for box in self.boxes for lo, hi in box)

    def contains(self, point: Sequence) -> bool:
        for box in self.boxes:
            if all((lo is None or lo < v) and (hi is None or v < hi) for v, (lo, hi) in zip(point, box)):
                return True
        return False

    def union(self, other: "PlotDomain") -> "PlotDomain":
        self._same_space(other)
        return PlotDomain(self.dim, tuple(dict.fromkeys(self.boxes + other.boxes)), self.names)

    def intersection(self, other: "PlotDomain") -> "PlotDomain":
        self._same_space(other)
        out = []
        for b1, b2 in cartesian(self.boxes, other.boxes):
            sides = []
            for (l1, h1), (l2, h2) in zip(b1, b2):
                lo = l1 if l2 is None else (l2 if l1 is None else max(l1, l2))
                hi = h1 if h2 is None else (h2 if h1 is None else min(h1, h2))
                if lo is not None and hi is not None and not lo < hi:
                    break
                sides.append((lo, hi))
            else:
                out.append(tuple(sides))
        return PlotDomain(self.dim, tuple(dict.fromkeys(out)), self.names)

    def is_subset(self, other: "PlotDomain") -> bool:
        """Every box of ``self`` lies in a single box of ``other``."""
        def inside(b, c):
            for (l1, h1), (l2, h2) in zip(b, c):
                if l2 is not None and (l1 is None or l1 < l2):
                    return False
                if h2 is not None and (h1 is None or h1 > h2):
                    return False
            return True
        return all(any(inside(b, c) for c in other.boxes) for b in self.boxes)

    def times(self, other: "PlotDomain") -> "PlotDomain":
        if set(self.names) & set(other.names):
            raise ValueError("product domains need disjoint coordinate names")
        boxes = tuple(b1 + b2 for b1, b2 in cartesian(self.boxes, other.boxes))
        return PlotDomain(self.dim + other.dim, boxes, self.names + other.names)

    def sample(self, rng: random.Random, n: int) -> list:
        """``n`` points per box, uniform; unbounded sides are cut to [-10, 10]."""
        pts = []
        for box in self.boxes:
            for _ in range(n):
                pt = []
                for lo, hi in box:
                    lo = -_UNBOUNDED_SAMPLE if lo is None else lo
                    hi = _UNBOUNDED_SAMPLE if hi is None else hi
                    pt.append(float(lo) + (float(hi) - float(lo)) * (0.001 + 0.998 * rng.random()))
                pts.append(tuple(pt))
        return pts

    def _same_space(self, other):
        if self.dim != other.dim or self.names != other.names:
            raise ValueError("domains live in different coordinate spaces")

    def to_dict(self) -> dict:
        def b(v):
            return None if v is None else str(v)
        return {"dim": self.dim, "names": list(self.names),
                "boxes": [[[b(lo), b(hi)] for lo, hi in box] for box in self.boxes]}


def _default_names(n):
    return tuple(f"y{i + 1}" for i in range(n))


@dataclass(frozen=True)
class SmoothMap:
    """Smooth map between domains, given by expressions in the source coordinates.

    Range containment is checked by sampling ``SAMPLES_PER_BOX`` points per
    source box; this is evidence, not proof.
    """

    source: PlotDomain
    target: PlotDomain
    components: tuple
    check_range: bool = field(default=True, compare=False)

    def __post_init__(self):
        comps = tuple(as_expr(c) for c in self.components)
        object.__setattr__(self, "components", comps)
        if len(comps) != self.target.dim:
            raise ValueError(f"map needs {self.target.dim} components, got {len(comps)}")
        allowed = set(self.source.coords())
        for c in comps:
            extra = c.free - allowed
            if extra:
                raise ValueError(f"component {to_text(c)} uses symbols outside the source: {extra}")
        if self.check_range and not self.target.is_bounded() and len(self.target.boxes) == 1 \
                and all(lo is None and hi is None for lo, hi in self.target.boxes[0]):
            return
        if self.check_range and not self.source.is_empty:
            bad = self.range_violation()
            if bad is not None:
                raise ValueError(f"map leaves its target domain at source point {bad}")

    def range_violation(self, n: int = SAMPLES_PER_BOX, seed: int = 0):
        fns = [compile_float(c, self.source.coords()) for c in self.components]
        rng = random.Random(seed)
        for pt in self.source.sample(rng, n):
            img = tuple(f(*pt) for f in fns)
            if not self.target.contains(img):
                return pt
        return None

    @classmethod
    def identity(cls, U: PlotDomain) -> "SmoothMap":
        return cls(U, U, tuple(Expr._atom(c) for c in U.coords()), check_range=False)

    @classmethod
    def inclusion(cls, A: PlotDomain, B: PlotDomain) -> "SmoothMap":
        if A.names != B.names:
            raise ValueError("inclusion needs matching coordinate names")
        return cls(A, B, tuple(Expr._atom(c) for c in A.coords()))

    @classmethod
    def constant(cls, source: PlotDomain, target: PlotDomain, value: Sequence) -> "SmoothMap":
        return cls(source, target, tuple(const(v) for v in value))

    def substitution(self) -> dict:
        """Map target coordinates to the component expressions."""
        return dict(zip(self.target.coords(), self.components))

    def __call__(self, *point):
        fns = [compile_float(c, self.source.coords()) for c in self.components]
        return tuple(f(*point) for f in fns)


def compose(psi: SmoothMap, phi: SmoothMap) -> SmoothMap:
    """``psi o phi``; requires ``phi.target == psi.source``."""
    if phi.target != psi.source:
        raise ValueError("maps are not composable")
    sub = phi.substitution()
    comps = tuple(substitute(c, sub) for c in psi.components)
    return SmoothMap(phi.source, psi.target, comps, check_range=False)


# --------------------------------------------------------------------------
# Witnesses


@dataclass(frozen=True)
class MapPlot:
    map: SmoothMap

    @property
    def domain(self):
        return self.map.source


@dataclass(frozen=True)
class Pair:
    first: object
    second: object

    @property
    def domain(self):
        return self.first.domain


@dataclass(frozen=True)
class ExponentialMap:
    """Plot ``U x M -> N`` of a mapping space; components use U- and M-coordinates."""

    domain: PlotDomain
    exponent: PlotDomain
    components: tuple

    def __post_init__(self):
        object.__setattr__(self, "components", tuple(as_expr(c) for c in self.components))


@dataclass(frozen=True)
class SectionFamily:
    """``sigma_u(x) = F(u, x)``: one fibre component per field."""

    domain: PlotDomain
    base: PlotDomain
    fields: tuple
    components: tuple

    def __post_init__(self):
        object.__setattr__(self, "fields", tuple(self.fields))
        object.__setattr__(self, "components", tuple(as_expr(c) for c in self.components))

    def section_at(self, sig: BundleSignature, u: Sequence) -> Section:
        sub = {c: const(v) for c, v in zip(self.domain.coords(), u)}
        return Section(sig, {a: substitute(e, sub) for a, e in zip(self.fields, self.components)})


@dataclass(frozen=True)
class FormPlot:
    domain: PlotDomain
    form: ClassicalForm


@dataclass(frozen=True)
class TowerSequence:
    levels: tuple

    def __post_init__(self):
        object.__setattr__(self, "levels", tuple(self.levels))

    @property
    def domain(self):
        return self.levels[0].domain


@dataclass(frozen=True)
class QuotientLift:
    lift: object

    @property
    def domain(self):
        return self.lift.domain


# --------------------------------------------------------------------------
# Objects


@dataclass
class PointsReport:
    kind: str  # "finite" or "predicate"
    concrete: bool
    elements: list | None = None
    predicate: Callable | None = None
    witness: dict | None = None
    description: str = ""

    def to_dict(self) -> dict:
        out = {"kind": self.kind, "concrete": self.concrete, "description": self.description}
        if self.elements is not None:
            out["count"] = len(self.elements)
        if self.witness is not None:
            out["witness"] = self.witness
        return out


class SmoothSetObject:
    """Base class: a presheaf on boxes-and-smooth-maps presented by witnesses."""

    name = "smooth set"

    def is_plot(self, U: PlotDomain, w) -> bool:
        raise NotImplementedError

    def restrict(self, phi: SmoothMap, w):
        raise NotImplementedError

    def with_domain(self, w, U: PlotDomain):
        """Same witness data, declared over ``U``."""
        raise NotImplementedError

    def points(self) -> PointsReport:
        raise NotImplementedError

    def random_plot(self, U: PlotDomain, rng: random.Random):
        raise NotImplementedError

    def equal(self, w1, w2) -> bool:
        return w1 == w2

    def numeric_values(self, w, point) -> list:
        """Floats characterising ``w`` at a domain point (used for overlap reports)."""
        P = PlotDomain.point()
        ev = SmoothMap.constant(P, w.domain, point) if w.domain.dim else SmoothMap.identity(P)
        return _flatten_values(self.restrict(ev, w))

    def point_of(self, w, u: Sequence):
        """The point ``X(u)(w)`` obtained by restricting along ``* -> U``."""
        P = PlotDomain.point()
        return self.restrict(SmoothMap.constant(P, w.domain, u), w)

    def glue(self, cover: Sequence[PlotDomain], witnesses: Sequence):
        return glue(self, cover, witnesses)


def _closed_float(e) -> float:
    """Float value of an expression without free symbols (``sin(1/2)`` etc.)."""
    return float(compile_float(e, ())())


def _flatten_values(w) -> list:
    if isinstance(w, MapPlot):
        return [_closed_float(c) for c in w.map.components]
    if isinstance(w, Pair):
        return _flatten_values(w.first) + _flatten_values(w.second)
    if isinstance(w, (ExponentialMap, SectionFamily)):
        # mapping-space points are maps; compare at a fixed probe set
        rng = random.Random(1)
        out = []
        M = w.exponent if isinstance(w, ExponentialMap) else w.base
        for pt in M.sample(rng, 3):
            for c in w.components:
                out.append(float(compile_float(c, M.coords())(*pt)))
        return out
    if isinstance(w, FormPlot):
        return [_closed_float(c) for _, c in sorted(w.form.terms.items())]
    if isinstance(w, TowerSequence):
        return [v for lv in w.levels for v in _flatten_values(lv)]
    if isinstance(w, QuotientLift):
        return _flatten_values(w.lift)
    raise TypeError(f"unknown witness {w!r}")


class Representable(SmoothSetObject):
    """``y(R^n)``: plots over ``U`` are smooth maps ``U -> R^n``."""

    def __init__(self, n: int, names: Sequence[str] | None = None):
        if n < 0:
            raise ValueError("dimension must be non-negative")
        self.n = n
        self.space = PlotDomain.euclidean(n, names)
        self.name = f"R^{n}"

    def plot(self, U: PlotDomain, components) -> MapPlot:
        return MapPlot(SmoothMap(U, self.space, tuple(components)))

    def is_plot(self, U, w) -> bool:
        return isinstance(w, MapPlot) and w.map.source == U and w.map.target == self.space

    def restrict(self, phi, w):
        return MapPlot(compose(w.map, phi))

    def with_domain(self, w, U):
        return MapPlot(SmoothMap(U, self.space, w.map.components, check_range=False))

    def points(self):
        n = self.n
        return PointsReport(
            "predicate", True,
            predicate=lambda p: len(p) == n and all(isinstance(v, (int, float, Fraction)) for v in p),
            description=f"points of R^{n}",
        )

    def random_plot(self, U, rng):
        return self.plot(U, [random_polynomial(rng, U.coords(), 3, 3) for _ in range(self.n)])


class Product(SmoothSetObject):
    def __init__(self, X: SmoothSetObject, Y: SmoothSetObject):
        self.X, self.Y = X, Y
        self.name = f"({X.name} x {Y.name})"

    def is_plot(self, U, w):
        return isinstance(w, Pair) and self.X.is_plot(U, w.first) and self.Y.is_plot(U, w.second)

    def restrict(self, phi, w):
        if not isinstance(w, Pair):
            raise TypeError("product plots are pairs")
        return Pair(self.X.restrict(phi, w.first), self.Y.restrict(phi, w.second))

    def with_domain(self, w, U):
        return Pair(self.X.with_domain(w.first, U), self.Y.with_domain(w.second, U))

    def points(self):
        px, py = self.X.points(), self.Y.points()
        concrete = px.concrete and py.concrete
        if px.kind == "finite" and py.kind == "finite":
            return PointsReport("finite", concrete,
                                elements=[Pair(a, b) for a in px.elements for b in py.elements],
                                description=f"points of {self.name}")
        return PointsReport(
            "predicate", concrete,
            predicate=lambda p: isinstance(p, tuple) and len(p) == 2,
            witness=px.witness or py.witness,
            description=f"pairs of points of {self.X.name} and {self.Y.name}",
        )

    def random_plot(self, U, rng):
        return Pair(self.X.random_plot(U, rng), self.Y.random_plot(U, rng))


class Exponential(SmoothSetObject):
    """``C^inf(M, N)``: a ``U``-plot is a smooth map ``U x M -> N``."""

    def __init__(self, M: PlotDomain, N: PlotDomain):
        self.M, self.N = M, N
        self.name = f"C(M^{M.dim}, N^{N.dim})"

    def _check_names(self, U):
        if set(U.names) & set(self.M.names):
            raise ValueError("plot domain coordinates must differ from the exponent's")

    def plot(self, U, components) -> ExponentialMap:
        return ExponentialMap(U, self.M, tuple(components))

    def is_plot(self, U, w):
        if not isinstance(w, ExponentialMap) or w.domain != U or w.exponent != self.M:
            return False
        if len(w.components) != self.N.dim:
            return False
        allowed = set(U.coords()) | set(self.M.coords())
        if any(c.free - allowed for c in w.components):
            return False
        try:
            SmoothMap(U.times(self.M), self.N, w.components)
        except ValueError:
            return False
        return True

    def restrict(self, phi, w):
        self._check_names(phi.source)
        sub = phi.substitution()
        return ExponentialMap(phi.source, self.M, tuple(substitute(c, sub) for c in w.components))

    def with_domain(self, w, U):
        return ExponentialMap(U, self.M, w.components)

    def points(self):
        return PointsReport(
            "predicate", True,
            predicate=lambda p: isinstance(p, ExponentialMap) and p.domain.dim == 0,
            description=f"smooth maps from a {self.M.dim}-dimensional domain into a "
                        f"{self.N.dim}-dimensional one",
        )

    def random_plot(self, U, rng):
        atoms = U.coords() + self.M.coords()
        return self.plot(U, [random_polynomial(rng, atoms, 3, 3) for _ in range(self.N.dim)])


class SectionsSheaf(Exponential):
    """Sections of the trivial bundle ``M x R^k -> M``.

    ``F : U x M -> M x R^k`` with ``pi o F = pr_2`` is determined by its fibre
    part, so plots coincide with those of ``C^inf(M, R^k)``; ``is_plot``
    checks both descriptions and insists they agree.
    """

    def __init__(self, sig: BundleSignature, window: PlotDomain | None = None):
        if window is None:
            window = PlotDomain.euclidean(sig.base_dim, sig.base_names)
        if window.names != sig.base_names:
            raise ValueError("the base window must use the signature's base names")
        super().__init__(window, PlotDomain.euclidean(len(sig.fields), sig.fields))
        self.sig = sig
        self.name = "Gamma(" + ",".join(sig.fields) + ")"

    def plot(self, U, components) -> SectionFamily:
        if isinstance(components, dict):
            components = [components.get(a, 0) for a in self.sig.fields]
        return SectionFamily(U, self.M, self.sig.fields, tuple(components))

    def as_exponential(self, w: SectionFamily) -> ExponentialMap:
        return ExponentialMap(w.domain, w.base, w.components)

    def total_map(self, w: SectionFamily) -> tuple:
        """Components of ``F`` into ``M x R^k``: the base part is ``pr_2``."""
        return tuple(Expr._atom(c) for c in self.M.coords()) + w.components

    def is_plot(self, U, w):
        if not isinstance(w, SectionFamily) or w.fields != self.sig.fields or w.base != self.M:
            return False
        base_part = self.total_map(w)[: self.M.dim]
        if base_part != tuple(Expr._atom(c) for c in self.M.coords()):
            return False
        ours = Exponential.is_plot(self, U, self.as_exponential(w))
        return ours

    def restrict(self, phi, w):
        e = Exponential.restrict(self, phi, self.as_exponential(w))
        return SectionFamily(e.domain, self.M, self.sig.fields, e.components)

    def with_domain(self, w, U):
        return SectionFamily(U, self.M, w.fields, w.components)

    def random_plot(self, U, rng):
        e = Exponential.random_plot(self, U, rng)
        return SectionFamily(U, self.M, self.sig.fields, e.components)


class FormsSheaf(SmoothSetObject):
    """``Omega^p``: plots over ``U`` are ``p``-forms on ``U``; restriction is pullback."""

    def __init__(self, p: int):
        if p < 0:
            raise ValueError("form degree must be non-negative")
        self.p = p
        self.name = f"Omega^{p}"

    def plot(self, U, terms: dict) -> FormPlot:
        return FormPlot(U, ClassicalForm(U.coords(), terms))

    def is_plot(self, U, w):
        if not isinstance(w, FormPlot) or w.domain != U:
            return False
        if w.form.variables != U.coords():
            return False
        if any(len(k) != self.p for k in w.form.terms):
            return False
        allowed = set(U.coords())
        return all(not (c.free - allowed) for c in w.form.terms.values())

    def restrict(self, phi, w):
        return FormPlot(phi.source, w.form.pullback(phi.source.coords(), phi.substitution()))

    def with_domain(self, w, U):
        return FormPlot(U, w.form)

    def numeric_values(self, w, point):
        from itertools import combinations
        fns = []
        for k in combinations(range(w.domain.dim), self.p):
            c = w.form.terms.get(k, Expr.zero())
            fns.append(compile_float(c, w.domain.coords())(*point))
        return fns

    def points(self):
        if self.p == 0:
            return PointsReport("predicate", True,
                                predicate=lambda p: isinstance(p, FormPlot) and p.domain.dim == 0,
                                description="real numbers (0-forms on the point)")
        P = PlotDomain.point()
        zero_point = FormPlot(P, ClassicalForm(()))
        # two distinct plots over R^p with the same underlying map to points
        U = PlotDomain.euclidean(self.p, _default_names(self.p))
        vol = self.plot(U, {tuple(range(self.p)): 1})
        zero = self.plot(U, {})
        probe = [0] * self.p
        same_points = self.point_of(vol, probe) == self.point_of(zero, probe) == zero_point
        return PointsReport(
            "finite", False, elements=[zero_point],
            witness={
                "domain": U.to_dict(),
                "plot": "d" + "^d".join(U.names),
                "other_plot": "0",
                "same_underlying_map": same_points,
            },
            description=f"only the zero {self.p}-form on the point",
        )

    def random_plot(self, U, rng):
        from itertools import combinations
        terms = {}
        for k in combinations(range(U.dim), self.p):
            if rng.random() < 0.7:
                terms[k] = random_polynomial(rng, U.coords(), 2, 2)
        return self.plot(U, terms)


class TowerLimit(SmoothSetObject):
    """Limit of ``X_0 <- X_1 <- ...`` truncated at ``depth``.

    ``projections[k]`` sends level ``k+1`` plots to level ``k`` plots and
    must commute with restriction.  Deeper levels are added by
    :meth:`extend`.
    """

    def __init__(self, levels: Sequence[SmoothSetObject], projections: Sequence[Callable]):
        if len(projections) != len(levels) - 1:
            raise ValueError("need one projection between consecutive levels")
        self.levels = list(levels)
        self.projections = list(projections)
        self.name = "lim(" + ", ".join(x.name for x in self.levels) + ")"

    @property
    def depth(self) -> int:
        return len(self.levels) - 1

    def extend(self, level: SmoothSetObject, projection: Callable) -> "TowerLimit":
        return TowerLimit(self.levels + [level], self.projections + [projection])

    def is_plot(self, U, w):
        if not isinstance(w, TowerSequence) or len(w.levels) != len(self.levels):
            return False
        if not all(X.is_plot(U, wk) for X, wk in zip(self.levels, w.levels)):
            return False
        return all(self.projections[k](w.levels[k + 1]) == w.levels[k] for k in range(self.depth))

    def incompatibility(self, w) -> int | None:
        for k in range(self.depth):
            if self.projections[k](w.levels[k + 1]) != w.levels[k]:
                return k + 1
        return None

    def restrict(self, phi, w):
        return TowerSequence(tuple(X.restrict(phi, wk) for X, wk in zip(self.levels, w.levels)))

    def with_domain(self, w, U):
        return TowerSequence(tuple(X.with_domain(wk, U) for X, wk in zip(self.levels, w.levels)))

    def project(self, w, l: int):
        return w.levels[l]

    def points(self):
        reports = [X.points() for X in self.levels]
        return PointsReport("predicate", all(r.concrete for r in reports),
                            predicate=lambda p: isinstance(p, TowerSequence),
                            description="compatible sequences of level points")

    def random_plot(self, U, rng):
        top = self.levels[-1].random_plot(U, rng)
        seq = [top]
        for k in range(self.depth - 1, -1, -1):
            seq.append(self.projections[k](seq[-1]))
        return TowerSequence(tuple(reversed(seq)))


class JetSpace(Representable):
    """``y(J^k)``: plots are maps into the coordinates ``(x^mu, u^a_I), |I| <= k``."""

    def __init__(self, sig: BundleSignature, k: int):
        self.sig = sig
        self.k = k
        self.jets = sig.jets_up_to(k)
        labels = list(sig.base_names) + [j.label for j in self.jets]
        super().__init__(len(labels), [f"J{k}_{i}" for i in range(len(labels))])
        self.labels = labels
        self.name = f"J^{k}"

    def projection_to(self, lower: "JetSpace") -> Callable:
        keep = [self.labels.index(l) for l in lower.labels]

        def proj(w: MapPlot) -> MapPlot:
            return MapPlot(SmoothMap(w.map.source, lower.space,
                                     tuple(w.map.components[i] for i in keep), check_range=False))
        return proj


class Quotient(SmoothSetObject):
    """``X / ~``: plots are presented by lifts; ``relation`` decides equality."""

    def __init__(self, X: SmoothSetObject, relation: Callable, name: str | None = None):
        self.X = X
        self.relation = relation
        self.name = name or f"{X.name}/~"

    def is_plot(self, U, w):
        return isinstance(w, QuotientLift) and self.X.is_plot(U, w.lift)

    def restrict(self, phi, w):
        return QuotientLift(self.X.restrict(phi, w.lift))

    def with_domain(self, w, U):
        return QuotientLift(self.X.with_domain(w.lift, U))

    def equal(self, w1, w2):
        return w1 == w2 or bool(self.relation(w1.lift, w2.lift))

    def points(self):
        base = self.X.points()
        return PointsReport("predicate", base.concrete, predicate=lambda p: isinstance(p, QuotientLift),
                            description=f"classes of points of {self.X.name}")

    def random_plot(self, U, rng):
        return QuotientLift(self.X.random_plot(U, rng))


# --------------------------------------------------------------------------
# Constructors


def representable(n: int, names: Sequence[str] | None = None) -> Representable:
    return Representable(n, names)


def product(X: SmoothSetObject, Y: SmoothSetObject) -> Product:
    return Product(X, Y)


def exponential(M: PlotDomain, N: PlotDomain) -> Exponential:
    return Exponential(M, N)


def sections_sheaf(sig: BundleSignature, window: PlotDomain | None = None) -> SectionsSheaf:
    return SectionsSheaf(sig, window)


def forms_sheaf(p: int) -> FormsSheaf:
    return FormsSheaf(p)


def tower_limit(levels, projections) -> TowerLimit:
    return TowerLimit(levels, projections)


def quotient(X, relation, name=None) -> Quotient:
    return Quotient(X, relation, name)


def jet_tower(sig: BundleSignature, depth: int) -> TowerLimit:
    levels = [JetSpace(sig, k) for k in range(depth + 1)]
    projections = [levels[k + 1].projection_to(levels[k]) for k in range(depth)]
    return TowerLimit(levels, projections)


def jet_tower_plot(tower: TowerLimit, phi: Section, sigma: SmoothMap) -> TowerSequence:
    """``(j^0 phi o sigma, j^1 phi o sigma, ...)`` for a base plot ``sigma: U -> M``."""
    sub = dict(zip(phi.sig.coords(), sigma.components))
    levels = []
    for X in tower.levels:
        comps = list(sigma.components)
        for j in X.jets:
            comps.append(substitute(phi.derivative(j.field, j.counts), sub))
        levels.append(MapPlot(SmoothMap(sigma.source, X.space, tuple(comps), check_range=False)))
    return TowerSequence(tuple(levels))


# --------------------------------------------------------------------------
# Checkers


def check_functoriality(X: SmoothSetObject, phi: SmoothMap, psi: SmoothMap, w) -> bool:
    """``X(psi o phi)(w) == X(phi)(X(psi)(w))`` with exact witness equality."""
    if phi.target != psi.source:
        raise ValueError("maps are not composable")
    lhs = X.restrict(compose(psi, phi), w)
    rhs = X.restrict(phi, X.restrict(psi, w))
    return lhs == rhs


def _overlap_point(X, w1, w2, I: PlotDomain, seed=0):
    rng = random.Random(seed)
    for pt in I.sample(rng, 200):
        a, b = X.numeric_values(w1, pt), X.numeric_values(w2, pt)
        if any(abs(x - y) > 1e-12 * (1 + abs(x) + abs(y)) for x, y in zip(a, b)) or len(a) != len(b):
            return pt
    return I.sample(rng, 1)[0]


def glue(X: SmoothSetObject, cover: Sequence[PlotDomain], witnesses: Sequence):
    """Glue plots ``w_i`` on ``U_i`` into one plot on the union.

    Raises :class:`GlueError` naming the offending pair and a sample point
    of their overlap where the values differ.
    """
    cover = list(cover)
    witnesses = list(witnesses)
    if not cover or len(cover) != len(witnesses):
        raise ValueError("need one witness per cover element")
    for i, (U, w) in enumerate(zip(cover, witnesses)):
        if not X.is_plot(U, w):
            raise GlueError(f"witness {i} is not a plot over its domain", pair=(i, i))
    for i in range(len(cover)):
        for j in range(i + 1, len(cover)):
            I = cover[i].intersection(cover[j])
            if I.is_empty:
                continue
            ri = X.restrict(SmoothMap.inclusion(I, cover[i]), witnesses[i])
            rj = X.restrict(SmoothMap.inclusion(I, cover[j]), witnesses[j])
            if not X.equal(ri, rj):
                pt = _overlap_point(X, ri, rj, I)
                raise GlueError(f"plots {i} and {j} disagree on their overlap at {pt}",
                                pair=(i, j), point=pt)
    union = cover[0]
    for U in cover[1:]:
        union = union.union(U)
    glued = X.with_domain(witnesses[0], union)
    for i, (U, w) in enumerate(zip(cover, witnesses)):
        back = X.restrict(SmoothMap.inclusion(U, union), glued)
        if not X.equal(back, w):
            pt = _overlap_point(X, back, w, U)
            raise GlueError(f"plot {i} is not the restriction of a single elementary witness",
                            pair=(0, i), point=pt)
    return glued


def points(X: SmoothSetObject) -> PointsReport:
    return X.points()


# --------------------------------------------------------------------------
# Randomized axiom suites


def _random_map(rng, source: PlotDomain, target: PlotDomain, degree=2) -> SmoothMap:
    comps = [random_polynomial(rng, source.coords(), degree, 3) for _ in range(target.dim)]
    return SmoothMap(source, target, comps, check_range=False)


def _suite_objects():
    sig = BundleSignature(("x",), ("u",))
    M = PlotDomain.euclidean(1, ("m1",))
    N = PlotDomain.euclidean(1, ("n1",))
    return [
        ("representable", Representable(2)),
        ("product", Product(Representable(1), Representable(2))),
        ("exponential", Exponential(M, N)),
        ("sections", SectionsSheaf(sig)),
        ("forms1", FormsSheaf(1)),
        ("forms2", FormsSheaf(2)),
        ("tower", jet_tower(sig, 2)),
    ]


def axiom_suite(suite: str = "all", seed: int = 0, cases: int = 50) -> dict:
    """Run randomized sheaf/diffeology checks; returns a JSON-ready report.

    Suites: ``functoriality``, ``gluing``, ``diffeology``, ``points``,
    ``sheaf`` (functoriality + gluing + points) and ``all``.
    """
    wanted = {
        "functoriality": {"functoriality"},
        "gluing": {"gluing"},
        "diffeology": {"diffeology"},
        "points": {"points"},
        "sheaf": {"functoriality", "gluing", "points"},
        "all": {"functoriality", "gluing", "diffeology", "points"},
    }
    if suite not in wanted:
        raise ValueError(f"unknown suite {suite!r}")
    parts = wanted[suite]
    results = []
    rng = random.Random(seed)
    W = PlotDomain.euclidean(2, ("w1", "w2"))
    V = PlotDomain.euclidean(2, ("v1", "v2"))
    U = PlotDomain.euclidean(1, ("s1",))
    for name, X in _suite_objects():
        if "functoriality" in parts:
            ok = 0
            for _ in range(cases):
                phi = _random_map(rng, U, V)
                psi = _random_map(rng, V, W)
                w = X.random_plot(W, rng)
                ok += check_functoriality(X, phi, psi, w)
            results.append({"id": f"functoriality/{name}", "passed": ok == cases,
                            "detail": f"{ok}/{cases}"})
        if "gluing" in parts:
            ok = 0
            n = max(1, cases // 5)
            for _ in range(n):
                a = random_rational(rng, 0, 1)
                Ua = PlotDomain.box([(a - 1, a + Fraction(1, 2))], ("s1",))
                Ub = PlotDomain.box([(a, a + 2)], ("s1",))
                big = PlotDomain.box([(a - 1, a + 2)], ("s1",))
                w = X.random_plot(big, rng)
                wa = X.restrict(SmoothMap.inclusion(Ua, big), w)
                wb = X.restrict(SmoothMap.inclusion(Ub, big), w)
                g = glue(X, [Ua, Ub], [wa, wb])
                back = (X.restrict(SmoothMap.inclusion(Ua, g.domain), g) == wa
                        and X.restrict(SmoothMap.inclusion(Ub, g.domain), g) == wb)
                ok += back
            results.append({"id": f"gluing/{name}", "passed": ok == n, "detail": f"{ok}/{n}"})
        if "diffeology" in parts:
            rep = X.points()
            if rep.concrete:
                # constant plots and closure under precomposition
                P = PlotDomain.point()
                pt = X.random_plot(P, rng)
                const_map = SmoothMap(U, P, ())
                const_plot = X.restrict(const_map, pt)
                w = X.random_plot(V, rng)
                phi = _random_map(rng, U, V)
                passed = X.is_plot(U, const_plot) and X.is_plot(U, X.restrict(phi, w))
                results.append({"id": f"diffeology/{name}", "passed": bool(passed), "detail": "concrete"})
            else:
                results.append({"id": f"diffeology/{name}", "passed": True,
                                "detail": "non-concrete; axioms not applicable"})
        if "points" in parts:
            rep = X.points()
            expect_concrete = not (isinstance(X, FormsSheaf) and X.p >= 1)
            passed = rep.concrete == expect_concrete
            if isinstance(X, FormsSheaf) and X.p >= 1:
                passed = passed and rep.kind == "finite" and len(rep.elements) == 1 \
                    and rep.witness["same_underlying_map"]
            results.append({"id": f"points/{name}", "passed": bool(passed), "detail": rep.description})
    results.sort(key=lambda r: r["id"])
    return {"suite": suite, "seed": seed, "cases": cases,
            "passed": all(r["passed"] for r in results), "results": results}
