"""Path groupoid operations and numerical holonomy of matrix connections.

Paths are piecewise expressions in the parameter ``s`` on ``[0, 1]``.
Composition follows the groupoid convention ``(g o h)(s) = h(2s)`` on the
first half and ``g(2s - 1)`` on the second, so ``h`` is traversed first.
Parallel transport solves ``g'(s) = -A(gamma(s))(gamma'(s)) g(s)`` from
the identity with classical RK4, giving
``holonomy(compose(g, h)) = holonomy(g) @ holonomy(h)``.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Sequence

import numpy as np

from .symexpr import Coord, Expr, as_expr, compile_float, const, partial, substitute, to_text

__all__ = [
    "S",
    "Path",
    "ConnectionForm",
    "GroupElement",
    "compose",
    "reverse",
    "constant_path",
    "straight_path",
    "holonomy",
    "thin_invariance_probe",
    "trace_distance",
    "SITTING_PROFILE",
]

S = Coord("s")
_s = Expr._atom(S)
# vanishes to second order at both ends
SITTING_PROFILE = 6 * _s ** 5 - 15 * _s ** 4 + 10 * _s ** 3
MIN_STEPS = 16


@dataclass(frozen=True)
class _Piece:
    a: Fraction
    b: Fraction
    components: tuple


class Path:
    """Piecewise-smooth path ``[0, 1] -> R^m``; components are expressions in ``s``."""

    def __init__(self, components: Sequence | None = None, pieces: Sequence[_Piece] | None = None,
                 names: Sequence[str] | None = None):
        if pieces is None:
            comps = tuple(as_expr(c) for c in components)
            pieces = (_Piece(Fraction(0), Fraction(1), comps),)
        self.pieces = tuple(pieces)
        self.dim = len(self.pieces[0].components)
        self.names = tuple(names) if names is not None else tuple(f"x{i + 1}" for i in range(self.dim))
        for p in self.pieces:
            if len(p.components) != self.dim:
                raise ValueError("all pieces need the same number of components")
            for c in p.components:
                if c.free - {S}:
                    raise ValueError(f"path component {to_text(c)} depends on symbols other than s")
        self._compiled = None

    def _fns(self):
        if self._compiled is None:
            self._compiled = [
                ([compile_float(c, [S]) for c in p.components],
                 [compile_float(partial(c, S), [S]) for c in p.components])
                for p in self.pieces
            ]
        return self._compiled

    def _piece_index(self, s: float) -> int:
        for i, p in enumerate(self.pieces):
            if s <= p.b:
                return i
        return len(self.pieces) - 1

    def position(self, s: float) -> np.ndarray:
        pos, _ = self._fns()[self._piece_index(s)]
        return np.array([f(s) for f in pos])

    def velocity(self, s: float, piece: int | None = None) -> np.ndarray:
        i = self._piece_index(s) if piece is None else piece
        _, vel = self._fns()[i]
        return np.array([f(s) for f in vel])

    @property
    def start(self) -> np.ndarray:
        return self.position(0.0)

    @property
    def end(self) -> np.ndarray:
        return self.position(1.0)

    def sample(self, n: int = 257) -> np.ndarray:
        return np.array([self.position(s) for s in np.linspace(0.0, 1.0, n)])

    def reparametrize(self, rho) -> "Path":
        """``gamma o rho`` for a monotone ``rho`` fixing 0 and 1."""
        rho = as_expr(rho)
        f = compile_float(rho, [S])
        df = compile_float(partial(rho, S), [S])
        if abs(f(0.0)) > 1e-12 or abs(f(1.0) - 1.0) > 1e-12:
            raise ValueError("reparametrization must fix the endpoints")
        grid = np.linspace(0.0, 1.0, 2001)
        if min(df(x) for x in grid) < -1e-12:
            raise ValueError("reparametrization must be monotone")
        pieces = []
        for p in self.pieces:
            a = Fraction(0) if p.a == 0 else _preimage(f, float(p.a))
            b = Fraction(1) if p.b == 1 else _preimage(f, float(p.b))
            pieces.append(_Piece(a, b, tuple(substitute(c, {S: rho}) for c in p.components)))
        return Path(pieces=pieces, names=self.names)

    def with_sitting_instants(self) -> "Path":
        """Reparametrize every piece so it is stationary to second order at its ends."""
        pieces = []
        for p in self.pieces:
            width = p.b - p.a
            local = (_s - const(p.a)) * const(1 / width)
            rho = const(p.a) + const(width) * substitute(SITTING_PROFILE, {S: local})
            pieces.append(_Piece(p.a, p.b, tuple(substitute(c, {S: rho}) for c in p.components)))
        return Path(pieces=pieces, names=self.names)

    def to_dict(self) -> dict:
        return {"pieces": [{"interval": [str(p.a), str(p.b)],
                            "components": [to_text(c) for c in p.components]} for p in self.pieces]}


def _preimage(f, y: float) -> Fraction:
    lo, hi = 0.0, 1.0
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if f(mid) < y:
            lo = mid
        else:
            hi = mid
    return Fraction(0.5 * (lo + hi))


def _affine(piece: _Piece, scale: Fraction, shift: Fraction) -> _Piece:
    """Piece for the new parameter ``s' = scale*s + shift``."""
    back = (_s - const(shift)) * const(1 / scale)
    comps = tuple(substitute(c, {S: back}) for c in piece.components)
    a, b = scale * piece.a + shift, scale * piece.b + shift
    return _Piece(min(a, b), max(a, b), comps)


def compose(gamma: Path, gamma_prime: Path, tol: float = 1e-9) -> Path:
    """``gamma o gamma'``: run ``gamma'`` on ``[0, 1/2]``, then ``gamma``."""
    if gamma.dim != gamma_prime.dim:
        raise ValueError("paths live in different dimensions")
    gap = np.max(np.abs(gamma.start - gamma_prime.end))
    if gap > tol:
        raise ValueError(f"endpoint mismatch: source of the outer path differs from target by {gap}")
    half = Fraction(1, 2)
    first = [_affine(p, half, Fraction(0)) for p in gamma_prime.pieces]
    second = [_affine(p, half, half) for p in gamma.pieces]
    return Path(pieces=first + second, names=gamma.names)


def reverse(gamma: Path) -> Path:
    """``gamma^dagger(s) = gamma(1 - s)``."""
    pieces = [_affine(p, Fraction(-1), Fraction(1)) for p in reversed(gamma.pieces)]
    return Path(pieces=pieces, names=gamma.names)


def constant_path(point: Sequence, names=None) -> Path:
    return Path([const(Fraction(v)) for v in point], names=names)


def straight_path(a: Sequence, b: Sequence, names=None) -> Path:
    return Path([const(Fraction(x)) + (const(Fraction(y)) - const(Fraction(x))) * _s for x, y in zip(a, b)],
                names=names)


def trace_distance(g1: Path, g2: Path, n: int = 513) -> float:
    """Symmetric Hausdorff distance between sampled images."""
    a, b = g1.sample(n), g2.sample(n)
    d = np.linalg.norm(a[:, None, :] - b[None, :, :], axis=2)
    return float(max(d.min(axis=1).max(), d.min(axis=0).max()))


# --------------------------------------------------------------------------
# Connections and group elements

GROUPS = ("U1", "SU2", "GL")


class ConnectionForm:
    """Matrix-valued 1-form ``A = sum_mu A_mu dx^mu``.

    ``real[mu]`` and ``imag[mu]`` are ``k x k`` nested lists of expressions
    in the base coordinates ``names``.
    """

    def __init__(self, group: str, names: Sequence[str], real: Sequence, imag: Sequence | None = None,
                 window: float = 2.0, check: bool = True):
        if group not in GROUPS:
            raise ValueError(f"unknown group {group!r}; expected one of {GROUPS}")
        self.group = group
        self.names = tuple(names)
        self.coords = tuple(Coord(n) for n in self.names)
        m = len(self.names)
        if len(real) != m:
            raise ValueError("need one matrix per base direction")
        k = len(real[0])
        if imag is None:
            imag = [[[0] * k for _ in range(k)] for _ in range(m)]
        self.k = k
        self.real = [[[as_expr(e) for e in row] for row in mat] for mat in real]
        self.imag = [[[as_expr(e) for e in row] for row in mat] for mat in imag]
        expected = {"U1": 1, "SU2": 2}.get(group)
        if expected is not None and k != expected:
            raise ValueError(f"{group} connections need {expected}x{expected} matrices")
        self._re = [[[compile_float(e, self.coords) for e in row] for row in mat] for mat in self.real]
        self._im = [[[compile_float(e, self.coords) for e in row] for row in mat] for mat in self.imag]
        if check and group in ("U1", "SU2"):
            self.check_lie_algebra(window)

    def matrix(self, mu: int, x: Sequence[float]) -> np.ndarray:
        re = np.array([[f(*x) for f in row] for row in self._re[mu]])
        im = np.array([[f(*x) for f in row] for row in self._im[mu]])
        return re + 1j * im

    def along(self, x: Sequence[float], v: Sequence[float]) -> np.ndarray:
        out = np.zeros((self.k, self.k), dtype=complex)
        for mu, vm in enumerate(v):
            if vm:
                out += self.matrix(mu, x) * vm
        return out

    def check_lie_algebra(self, window: float = 2.0, samples: int = 64, tol: float = 1e-10):
        rng = np.random.default_rng(0)
        for _ in range(samples):
            x = rng.uniform(-window, window, len(self.names))
            for mu in range(len(self.names)):
                a = self.matrix(mu, x)
                if np.max(np.abs(a + a.conj().T)) > tol:
                    raise ValueError(f"A_{self.names[mu]} is not anti-Hermitian at {x}")
                if self.group == "SU2" and abs(np.trace(a)) > tol:
                    raise ValueError(f"A_{self.names[mu]} is not traceless at {x}")


@dataclass(frozen=True)
class GroupElement:
    matrix: np.ndarray
    group: str

    def __matmul__(self, other: "GroupElement") -> "GroupElement":
        return GroupElement(self.matrix @ other.matrix, self.group)

    def inverse(self) -> "GroupElement":
        return GroupElement(np.linalg.inv(self.matrix), self.group)

    def distance(self, other) -> float:
        m = other.matrix if isinstance(other, GroupElement) else np.asarray(other)
        return float(np.max(np.abs(self.matrix - m)))

    def unitarity_defect(self) -> float:
        k = self.matrix.shape[0]
        return float(np.max(np.abs(self.matrix.conj().T @ self.matrix - np.eye(k))))

    def to_list(self) -> list:
        return [[[float(z.real), float(z.imag)] for z in row] for row in self.matrix]


def holonomy(A: ConnectionForm, gamma: Path, steps: int = 4096) -> GroupElement:
    """Parallel transport along ``gamma`` by RK4 with ``steps`` total steps.

    Steps are shared between pieces in proportion to their parameter length.
    """
    if steps < MIN_STEPS:
        raise ValueError(f"need at least {MIN_STEPS} steps")
    if gamma.dim != len(A.names):
        raise ValueError("path and connection live in different dimensions")
    g = np.eye(A.k, dtype=complex)
    fns = gamma._fns()
    for i, p in enumerate(gamma.pieces):
        n = max(1, int(round(steps * float(p.b - p.a))))
        a, b = float(p.a), float(p.b)
        h = (b - a) / n
        pos, vel = fns[i]

        def rhs(s, y):
            x = [f(s) for f in pos]
            v = [f(s) for f in vel]
            return -A.along(x, v) @ y

        s = a
        with np.errstate(over="ignore", invalid="ignore"):
            for _ in range(n):
                k1 = rhs(s, g)
                k2 = rhs(s + h / 2, g + h / 2 * k1)
                k3 = rhs(s + h / 2, g + h / 2 * k2)
                k4 = rhs(s + h, g + h * k3)
                g = g + h / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
                s += h
        if not np.all(np.isfinite(g)):
            raise FloatingPointError("holonomy integration produced non-finite values")
    return GroupElement(g, A.group)


def thin_invariance_probe(A: ConnectionForm, gamma: Path, reparametrizations: Sequence = (),
                          steps: int = 4096, retracings: Sequence[Path] = ()) -> dict:
    """Compare holonomies along thin-homotopic variants of ``gamma``.

    Each ``rho`` gives ``gamma o rho``; each retracing path ``sigma`` (starting
    at the end of ``gamma``) appends ``sigma`` followed by its reverse.
    """
    ref = holonomy(A, gamma, steps)
    deviations = []
    for rho in reparametrizations:
        h = holonomy(A, gamma.reparametrize(rho), steps)
        deviations.append({"kind": "reparametrization", "rho": to_text(as_expr(rho)),
                           "deviation": ref.distance(h)})
    for sigma in retracings:
        loop = compose(reverse(sigma), sigma)
        h = holonomy(A, compose(loop, gamma), steps)
        deviations.append({"kind": "retracing", "deviation": ref.distance(h)})
    return {
        "holonomy": ref.to_list(),
        "deviations": deviations,
        "max_deviation": max((d["deviation"] for d in deviations), default=0.0),
    }
