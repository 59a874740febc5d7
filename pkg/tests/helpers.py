"""Shared fixtures-as-functions for the unit and acceptance suites."""

import numpy as np

from varjet.jetcalc import Section
from varjet.symexpr import BundleSignature, compile_float, parse_expression
from varjet.jetcalc import substitute_section
from varjet.variational import Lagrangian, euler_lagrange

SIG_1D = BundleSignature(("x",), ("u",))
SIG_2D = BundleSignature(("t", "x"), ("u",), ("m",))

LAGRANGIANS = {
    "half_ux2": ("1d", "1/2*u_x^2"),
    "wave": ("2d", "1/2*(u_t^2 - u_x^2)"),
    "klein_gordon": ("2d", "1/2*(u_t^2 - u_x^2 - m^2*u^2)"),
    "half_uxx2": ("1d", "1/2*u_xx^2"),
}


def parse(text, sig):
    return parse_expression(text.replace("**", "^"), sig)


def lagrangian(name):
    dim, text = LAGRANGIANS[name]
    sig = SIG_1D if dim == "1d" else SIG_2D
    return Lagrangian(sig, parse(text, sig))


def weak_euler_lagrange(name, case, nodes=16):
    """``int E[phi] psi`` over the unit window by tensor Gauss-Legendre quadrature."""
    L = lagrangian(name)
    sig = L.sig
    E = euler_lagrange(L)["u"]
    phi = Section(sig, {"u": parse(case["phi"], sig)})
    psi = parse(case["psi"], sig)
    integrand = substitute_section(E, phi) * psi
    fn = compile_float(integrand, sig.coords(), {k: float(v) for k, v in case["params"].items()})
    g, w = np.polynomial.legendre.leggauss(nodes)
    g, w = (g + 1) / 2, w / 2
    if sig.base_dim == 1:
        return float(sum(wi * fn(xi) for xi, wi in zip(g, w)))
    return float(sum(wi * wj * fn(ti, xj) for ti, wi in zip(g, w) for xj, wj in zip(g, w)))
