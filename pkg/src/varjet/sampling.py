"""Seeded generators for randomized property suites."""

from __future__ import annotations

import random
from fractions import Fraction
from typing import Sequence

from .symexpr import Atom, BundleSignature, Expr, const


def random_rational(rng: random.Random, lo: int = -3, hi: int = 3, den: int = 4) -> Fraction:
    return Fraction(rng.randint(lo * den, hi * den), rng.randint(1, den))


def random_polynomial(rng: random.Random, atoms: Sequence[Atom], degree: int = 3,
                      n_terms: int = 4, coeff_range: int = 3) -> Expr:
    """Sum of ``n_terms`` random monomials of total degree ``<= degree``."""
    out = Expr.zero()
    atoms = list(atoms)
    for _ in range(n_terms):
        c = Fraction(rng.randint(-coeff_range, coeff_range) or 1, rng.randint(1, 2))
        term = const(c)
        for _ in range(rng.randint(0, degree)):
            if atoms:
                term = term * Expr._atom(rng.choice(atoms))
        out = out + term
    return out


def random_jet_polynomial(rng: random.Random, sig: BundleSignature, max_order: int = 2,
                          degree: int = 3, n_terms: int = 4, include_base: bool = True) -> Expr:
    atoms = list(sig.jets_up_to(max_order))
    if include_base:
        atoms += list(sig.coords())
    return random_polynomial(rng, atoms, degree, n_terms)


def random_expression_tree(rng: random.Random, atoms: Sequence[Atom], depth: int = 6,
                           functions: bool = True) -> Expr:
    """Random tree built from ``+ - *``, small powers and elementary functions."""
    from .symexpr import apply_function

    if depth <= 0 or rng.random() < 0.2:
        if rng.random() < 0.3:
            return const(random_rational(rng))
        return Expr._atom(rng.choice(list(atoms)))
    op = rng.choice(["+", "-", "*", "^", "f"] if functions else ["+", "-", "*", "^"])
    if op == "^" and depth > 2:
        op = "+"
    a = random_expression_tree(rng, atoms, depth - 1, functions)
    if op == "^":
        return a ** rng.randint(2, 3)
    if op == "f":
        return apply_function(rng.choice(["sin", "cos", "exp"]), a)
    b = random_expression_tree(rng, atoms, depth - 1, functions)
    if op == "+":
        return a + b
    if op == "-":
        return a - b
    return a * b


def random_form(rng: random.Random, sig: BundleSignature, s: int, r: int, max_order: int = 2,
                n_terms: int = 3, degree: int = 2):
    """Random bigraded form of bidegree ``(s, r)`` with polynomial coefficients."""
    from itertools import combinations

    from .bicomplex import BigradedForm

    out = BigradedForm.zero(sig, s, r)
    horizontal = list(combinations(range(sig.base_dim), r))
    contact = [(a, I.counts) for a in sig.fields for I in sig.multi_indices(max_order)]
    if not horizontal or len(contact) < s:
        return out
    for _ in range(n_terms):
        dx = rng.choice(horizontal)
        th = rng.sample(contact, s)
        gens = [("dx", mu) for mu in dx] + [("theta", a, c) for a, c in th]
        coeff = random_jet_polynomial(rng, sig, max_order, degree, 3)
        out = out + BigradedForm.from_generators(sig, gens, coeff)
    return out


def random_family(rng: random.Random, sig: BundleSignature, parameters: Sequence,
                  degree: int = 3, n_terms: int = 4):
    """Section whose components are polynomials in the parameters and base coordinates."""
    from .jetcalc import Section

    atoms = list(parameters) + list(sig.coords())
    return Section(sig, {a: random_polynomial(rng, atoms, degree, n_terms) for a in sig.fields})
