"""Regenerate tests/data/oracles.json with sympy and scipy.

Nothing here imports varjet: every number is computed independently and
frozen so the test suite does not depend on the oracle libraries at run
time for these cases.

    python3 tests/oracles/build_oracles.py
"""

import json
from pathlib import Path

import numpy as np
import sympy as sp
from scipy import integrate

OUT = Path(__file__).resolve().parent.parent / "data" / "oracles.json"

t, x, eps, m = sp.symbols("t x epsilon m")
NODES = 16


def gauss_2d(f):
    g, w = np.polynomial.legendre.leggauss(NODES)
    g, w = (g + 1) / 2, w / 2
    return float(sum(wi * wj * f(ti, xj) for ti, wi in zip(g, w) for xj, wj in zip(g, w)))


def gauss_1d(f):
    g, w = np.polynomial.legendre.leggauss(NODES)
    g, w = (g + 1) / 2, w / 2
    return float(sum(wi * f(xi) for xi, wi in zip(g, w)))


def first_variation_cases():
    """d/deps int L[phi + eps psi] at eps = 0, by central difference of quadratures."""
    phi1 = x**5 - x**2 / 2 + sp.Rational(1, 3)
    psi1 = (4 * x * (1 - x)) ** 4
    phi2 = t**3 * x + x**3 / 3 - t * x**2 + t / 5
    psi2 = (4 * x * (1 - x)) ** 3 * (4 * t * (1 - t)) ** 3
    cases = {
        "half_ux2": ("1d", lambda u: sp.Rational(1, 2) * sp.diff(u, x) ** 2, {}),
        "wave": ("2d", lambda u: sp.Rational(1, 2) * (sp.diff(u, t) ** 2 - sp.diff(u, x) ** 2), {}),
        "klein_gordon": ("2d", lambda u: sp.Rational(1, 2) * (sp.diff(u, t) ** 2 - sp.diff(u, x) ** 2
                                                              - m**2 * u**2), {"m": 2}),
        "half_uxx2": ("1d", lambda u: sp.Rational(1, 2) * sp.diff(u, x, 2) ** 2, {}),
    }
    out = {}
    h = 1e-3
    for name, (dim, dens, params) in cases.items():
        phi, psi = (phi1, psi1) if dim == "1d" else (phi2, psi2)
        L = dens(phi + eps * psi).subs({sp.Symbol(k): v for k, v in params.items()})
        if dim == "1d":
            f = sp.lambdify((eps, x), L, "numpy")
            F = lambda e: gauss_1d(lambda xx: f(e, xx))
        else:
            f = sp.lambdify((eps, t, x), L, "numpy")
            F = lambda e: gauss_2d(lambda tt, xx: f(e, tt, xx))
        out[name] = {
            "dim": dim,
            "phi": str(phi),
            "psi": str(psi),
            "params": params,
            "first_variation": (F(h) - F(-h)) / (2 * h),
        }
    return out


def euler_lagrange_cases():
    """Euler-Lagrange expressions by sympy, as strings over jet names."""
    u = sp.Function("u")
    out = {}
    dens = {
        "half_ux2": (sp.Rational(1, 2) * u(x).diff(x) ** 2, [x]),
        "half_uxx2": (sp.Rational(1, 2) * u(x).diff(x, 2) ** 2, [x]),
        "wave": (sp.Rational(1, 2) * (u(t, x).diff(t) ** 2 - u(t, x).diff(x) ** 2), [t, x]),
        "klein_gordon": (sp.Rational(1, 2) * (u(t, x).diff(t) ** 2 - u(t, x).diff(x) ** 2
                                              - m**2 * u(t, x) ** 2), [t, x]),
    }
    from sympy.calculus.euler import euler_equations
    for name, (L, vars_) in dens.items():
        (eq,) = euler_equations(L, [u(*vars_)], vars_)
        expr = sp.expand(eq.lhs)
        # rename derivatives into jet names
        repl = {}
        for d in expr.atoms(sp.Derivative):
            label = "u_" + "".join(str(v) * k for v, k in d.variable_count)
            repl[d] = sp.Symbol(label)
        expr = expr.subs(repl).subs(u(*vars_), sp.Symbol("u"))
        # sympy's convention is dL/du - D(dL/du_x) + ..., same as ours
        out[name] = str(expr)
    return out


def u1_phases():
    """exp(-i int_gamma a) for A = i a, by adaptive quadrature."""
    cases = {
        # a = k dx, straight path of length L along x
        "constant_k": {"a": ["2", "0"], "path": ["3*s", "0"]},
        # a = y dx + x dy is exact (d(xy)); integral = x*y at the end
        "exact": {"a": ["y", "x"], "path": ["3*s", "s**2"]},
        # non-exact rotational form along a parabolic arc
        "rotational": {"a": ["-y/2", "x/2"], "path": ["1 - s**2", "s"]},
        "polynomial": {"a": ["x**2 + y", "x*y"], "path": ["s + s**3", "2*s - s**2"]},
    }
    s, X, Y = sp.symbols("s x y")
    out = {}
    for name, c in cases.items():
        gx, gy = (sp.sympify(e) for e in c["path"])
        ax, ay = (sp.sympify(e).subs({X: gx, Y: gy}) for e in c["a"])
        integrand = sp.lambdify(s, ax * sp.diff(gx, s) + ay * sp.diff(gy, s), "numpy")
        val, err = integrate.quad(integrand, 0, 1, epsabs=1e-14, epsrel=1e-14)
        z = complex(np.exp(-1j * val))
        out[name] = {**c, "integral": val, "phase": [z.real, z.imag]}
    return out


def helmholtz_gap():
    """int psi1 * L(psi2) - psi2 * L(psi1) for the linearisation of u_t - u u_x.

    Linearisation at background U: L(psi) = psi_t - U_x psi - U psi_x.
    """
    U = t + x**2 + t * x**3
    psi1 = (4 * x * (1 - x)) ** 3 * (4 * t * (1 - t)) ** 3
    psi2 = psi1 * (x - 2 * t) * x
    lin = lambda p: sp.diff(p, t) - sp.diff(U, x) * p - U * sp.diff(p, x)
    gap = sp.integrate(sp.expand(psi1 * lin(psi2) - psi2 * lin(psi1)), (t, 0, 1), (x, 0, 1))
    return {"background": str(U), "psi1": str(psi1), "psi2": str(psi2), "gap": float(gap)}


def main():
    data = {
        "first_variation": first_variation_cases(),
        "euler_lagrange": euler_lagrange_cases(),
        "u1": u1_phases(),
        "helmholtz_gap": helmholtz_gap(),
    }
    OUT.write_text(json.dumps(data, indent=2, sort_keys=True) + "\n")
    print(f"wrote {OUT}")


if __name__ == "__main__":
    main()
