"""varjet: variational calculus on jet bundles.

Exact symbolic jet calculus, the variational bicomplex, Euler-Lagrange,
Noether and Helmholtz operators, smooth sets presented by plots, and
numerical holonomy of matrix connections.
"""

__version__ = "0.1.0"

from .symexpr import (BundleSignature, Expr, MultiIndex, ParseError, const, evaluate,
                      parse_expression, partial, to_latex, to_text)
from .jetcalc import (EvolutionaryField, JetPoint, Section, apply_prolonged,
                      evaluate_on_section, iterated_total_derivative, total_derivative)
from .bicomplex import BigradedForm, d_horizontal, d_vertical, ev_pullback, wedge
from .variational import (Current, Lagrangian, SourceForm, euler_lagrange,
                          first_variation_decompose, helmholtz_check, is_divergence_symmetry,
                          noether_current)
from .holonomy import ConnectionForm, Path, holonomy

__all__ = [
    "BundleSignature", "Expr", "MultiIndex", "ParseError", "const", "evaluate",
    "parse_expression", "partial", "to_latex", "to_text",
    "EvolutionaryField", "JetPoint", "Section", "apply_prolonged", "evaluate_on_section",
    "iterated_total_derivative", "total_derivative",
    "BigradedForm", "d_horizontal", "d_vertical", "ev_pullback", "wedge",
    "Current", "Lagrangian", "SourceForm", "euler_lagrange", "first_variation_decompose",
    "helmholtz_check", "is_divergence_symmetry", "noether_current",
    "ConnectionForm", "Path", "holonomy",
]
