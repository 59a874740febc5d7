"""Command-line front end.

Model files are line-oriented ``key: value`` blocks under ``[section]``
headers::

    [signature]
    base: t x
    fields: u
    params: m

    [lagrangian]
    density: (1/2)*(u_t^2 - u_x^2 - m^2*u^2)

    [symmetry time]
    Q_u: u_t

Further sections: ``[source]`` (``E_u: ...``), ``[patch NAME]``
(``box: lo hi; lo hi`` plus one line per field), ``[path NAME]``
(``coords: x y`` plus one line per coordinate, in ``s``) and
``[connection]`` (``group: U1``, ``A_x.re`` / ``A_x.im`` matrices written
``a, b; c, d``).

Exit codes: 0 success, 1 failed check, 2 model or usage error.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from . import __version__
from .bicomplex import BigradedForm, d_horizontal, d_vertical, volume_form
from .holonomy import (ConnectionForm, Path, compose, holonomy, reverse,
                       thin_invariance_probe)
from .jetcalc import EvolutionaryField
from .smoothset import GlueError, PlotDomain, Representable, axiom_suite
from .symexpr import (BundleSignature, Expr, ParseError, order, parse_expression, to_latex,
                      to_text)
from .variational import (Lagrangian, NotASymmetryError, SourceForm, euler_lagrange,
                          first_variation_decompose, helmholtz_check, is_divergence_symmetry,
                          noether_current)

DEFAULT_SEED = 0
COMMANDS = ("el", "variation", "noether", "symmetry", "helmholtz", "dh", "dv", "order",
            "glue-check", "axioms", "holonomy")


class ModelError(ValueError):
    def __init__(self, message, line=None, column=None):
        self.line = line
        self.column = column
        where = ""
        if line is not None:
            where = f"line {line}" + (f", column {column}" if column is not None else "") + ": "
        super().__init__(where + message)


@dataclass
class Entry:
    value: str
    line: int
    column: int  # 1-based column where the value starts


@dataclass
class Section:
    kind: str
    name: str | None
    line: int
    entries: dict = field(default_factory=dict)

    def get(self, key, required=False):
        if key not in self.entries:
            if required:
                raise ModelError(f"section [{self.kind}] needs a '{key}' entry", self.line)
            return None
        return self.entries[key]


KNOWN_SECTIONS = {"signature", "lagrangian", "symmetry", "source", "patch", "path", "connection"}


def read_sections(text: str) -> list[Section]:
    sections: list[Section] = []
    current = None
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].rstrip()
        if not line.strip():
            continue
        stripped = line.strip()
        if stripped.startswith("["):
            if not stripped.endswith("]"):
                raise ModelError("unterminated section header", lineno, len(raw) + 1)
            head = stripped[1:-1].split()
            if not head or head[0] not in KNOWN_SECTIONS:
                raise ModelError(f"unknown section {stripped!r}", lineno, raw.index("[") + 1)
            if len(head) > 2:
                raise ModelError("section names must be a single word", lineno)
            current = Section(head[0], head[1] if len(head) == 2 else None, lineno)
            sections.append(current)
            continue
        if current is None:
            raise ModelError("entry outside of any section", lineno, 1)
        if ":" not in line:
            raise ModelError("expected 'key: value'", lineno, len(raw.rstrip()) + 1)
        key, _, value = line.partition(":")
        key = key.strip()
        if key in current.entries:
            raise ModelError(f"duplicate key {key!r}", lineno, raw.index(key) + 1)
        col = len(line) - len(value) + 1 + (len(value) - len(value.lstrip()))
        current.entries[key] = Entry(value.strip(), lineno, col)
    return sections


class Model:
    """Parsed model file."""

    def __init__(self, text: str):
        self.sections = read_sections(text)
        self.sig = None
        sig_sec = self.one("signature")
        if sig_sec is not None:
            base = sig_sec.get("base", required=True)
            fields = sig_sec.get("fields", required=True)
            params = sig_sec.get("params")
            try:
                self.sig = BundleSignature(base.value.split(), fields.value.split(),
                                           params.value.split() if params else ())
            except ValueError as exc:
                raise ModelError(str(exc), sig_sec.line) from None

    def one(self, kind):
        found = [s for s in self.sections if s.kind == kind]
        if len(found) > 1:
            raise ModelError(f"more than one [{kind}] section", found[1].line)
        return found[0] if found else None

    def all(self, kind):
        return [s for s in self.sections if s.kind == kind]

    def require_sig(self) -> BundleSignature:
        if self.sig is None:
            raise ModelError("the model has no [signature] section")
        return self.sig

    def expr(self, entry: Entry, sig=None) -> Expr:
        sig = sig or self.require_sig()
        try:
            return parse_expression(entry.value, sig)
        except ParseError as exc:
            col = entry.column + exc.position if exc.position is not None else entry.column
            raise ModelError(str(exc), entry.line, col) from None
        except (KeyError, ValueError) as exc:
            raise ModelError(str(exc), entry.line, entry.column) from None

    def lagrangian(self) -> Lagrangian:
        sec = self.one("lagrangian")
        if sec is None:
            raise ModelError("the model has no [lagrangian] section")
        return Lagrangian(self.require_sig(), self.expr(sec.get("density", required=True)))

    def symmetries(self) -> dict:
        sig = self.require_sig()
        out = {}
        for sec in self.all("symmetry"):
            name = sec.name or f"symmetry{len(out) + 1}"
            if name in out:
                raise ModelError(f"duplicate symmetry {name!r}", sec.line)
            comps = {}
            for key, entry in sec.entries.items():
                if not key.startswith("Q_") or key[2:] not in sig.fields:
                    raise ModelError(f"expected Q_<field>, got {key!r}", entry.line, 1)
                comps[key[2:]] = self.expr(entry)
            out[name] = EvolutionaryField(comps)
        return out

    def source(self) -> SourceForm:
        sig = self.require_sig()
        sec = self.one("source")
        if sec is None:
            return euler_lagrange(self.lagrangian())
        comps = {}
        for key, entry in sec.entries.items():
            if not key.startswith("E_") or key[2:] not in sig.fields:
                raise ModelError(f"expected E_<field>, got {key!r}", entry.line, 1)
            comps[key[2:]] = self.expr(entry)
        return SourceForm(sig, comps)

    def patches(self):
        sig = self.require_sig()
        cover, comps, names = [], [], []
        for sec in self.all("patch"):
            box = sec.get("box", required=True)
            try:
                sides = [tuple(Fraction(v) for v in side.split()) for side in box.value.split(";")]
                dom = PlotDomain.box(sides, sig.base_names)
            except (ValueError, ZeroDivisionError) as exc:
                raise ModelError(f"bad box: {exc}", box.line, box.column) from None
            fields = {}
            for a in sig.fields:
                entry = sec.get(a, required=True)
                e = self.expr(entry)
                if e.jets():
                    raise ModelError("patch components may depend on base coordinates only",
                                     entry.line, entry.column)
                fields[a] = e
            cover.append(dom)
            comps.append(fields)
            names.append(sec.name or f"patch{len(names) + 1}")
        if not cover:
            raise ModelError("the model has no [patch] sections")
        return names, cover, comps

    def paths(self):
        out = {}
        path_sig = BundleSignature(("s",), ("gamma",))
        for sec in self.all("path"):
            name = sec.name or f"path{len(out) + 1}"
            coords = sec.get("coords")
            names = coords.value.split() if coords else list(self.require_sig().base_names)
            comps = []
            for n in names:
                entry = sec.get(n, required=True)
                e = self.expr(entry, path_sig)
                if e.jets():
                    raise ModelError("path components may only use s", entry.line, entry.column)
                comps.append(e)
            out[name] = Path(comps, names=names)
        if not out:
            raise ModelError("the model has no [path] sections")
        return out

    def connection(self, names) -> ConnectionForm:
        sec = self.one("connection")
        if sec is None:
            raise ModelError("the model has no [connection] section")
        group = sec.get("group", required=True)
        sig = BundleSignature(tuple(names), ("connection",))
        re_parts, im_parts = [], []
        k = None
        for n in names:
            pair = []
            for part in ("re", "im"):
                entry = sec.get(f"A_{n}.{part}")
                pair.append(None if entry is None else self._matrix(entry, sig))
            sizes = {len(m) for m in pair if m is not None}
            if len(sizes) > 1:
                raise ModelError(f"A_{n} real and imaginary parts differ in size", sec.line)
            if sizes:
                size = sizes.pop()
                if k is not None and size != k:
                    raise ModelError("connection matrices differ in size", sec.line)
                k = size
            re_parts.append(pair[0])
            im_parts.append(pair[1])
        if k is None:
            k = 1
        zero = [[Expr.zero()] * k for _ in range(k)]
        re_parts = [m or zero for m in re_parts]
        im_parts = [m or zero for m in im_parts]
        try:
            return ConnectionForm(group.value, names, re_parts, im_parts)
        except ValueError as exc:
            raise ModelError(str(exc), group.line) from None

    def _matrix(self, entry: Entry, sig):
        rows = [r.split(",") for r in entry.value.split(";")]
        if any(len(r) != len(rows) for r in rows):
            raise ModelError("connection matrices must be square", entry.line, entry.column)
        out = []
        for r in rows:
            row = []
            for cell in r:
                e = self.expr(Entry(cell.strip(), entry.line, entry.column), sig)
                if e.jets():
                    raise ModelError("connection entries may only use base coordinates",
                                     entry.line, entry.column)
                row.append(e)
            out.append(row)
        return out


# --------------------------------------------------------------------------
# Commands


class CheckFailed(Exception):
    def __init__(self, payload):
        self.payload = payload


def _fmt(e: Expr, latex: bool) -> str:
    return to_latex(e) if latex else to_text(e)


def _fmt_map(d: dict, latex: bool) -> dict:
    return {k: _fmt(v, latex) for k, v in d.items()}


def cmd_el(model: Model, args) -> dict:
    E = euler_lagrange(model.lagrangian())
    return {"E": _fmt_map(E.components, args.latex)}


def _selected_symmetries(model: Model, args) -> dict:
    syms = model.symmetries()
    if args.symmetry:
        if args.symmetry not in syms:
            raise ModelError(f"no symmetry named {args.symmetry!r}")
        syms = {args.symmetry: syms[args.symmetry]}
    if not syms:
        raise ModelError("the model has no [symmetry] sections")
    return syms


def cmd_variation(model: Model, args) -> dict:
    L = model.lagrangian()
    out = {}
    for name, Q in _selected_symmetries(model, args).items():
        interior, P = first_variation_decompose(L, Q)
        from .jetcalc import apply_prolonged
        ok = (apply_prolonged(Q, L.density, L.sig) - interior - P.divergence()).is_zero()
        out[name] = {"interior": _fmt(interior, args.latex),
                     "boundary": _fmt_map(dict(zip(L.sig.base_names, P.components)), args.latex),
                     "identity": ok}
    return {"variation": out}


def cmd_symmetry(model: Model, args) -> dict:
    L = model.lagrangian()
    out = {}
    for name, Q in _selected_symmetries(model, args).items():
        res = is_divergence_symmetry(L, Q)
        entry = {"is_symmetry": res.is_symmetry, "prolonged": _fmt(res.prolonged, args.latex)}
        if res.witness is not None:
            entry["witness"] = _fmt_map(dict(zip(L.sig.base_names, res.witness.components)), args.latex)
        if not res.is_symmetry:
            entry["obstruction"] = _fmt_map(res.euler_of_prolonged.components, args.latex)
        if res.note:
            entry["note"] = res.note
        out[name] = entry
    return {"symmetry": out}


def cmd_noether(model: Model, args) -> dict:
    L = model.lagrangian()
    E = euler_lagrange(L)
    out, failed = {}, False
    for name, Q in _selected_symmetries(model, args).items():
        try:
            J = noether_current(L, Q)
        except NotASymmetryError as exc:
            out[name] = {"error": str(exc)}
            failed = True
            continue
        residual = J.divergence()
        for a in L.sig.fields:
            residual = residual + Q[a] * E[a]
        out[name] = {"J": _fmt_map(dict(zip(L.sig.base_names, J.components)), args.latex),
                     "identity": residual.is_zero()}
        failed = failed or not residual.is_zero()
    payload = {"noether": out}
    if failed:
        raise CheckFailed(payload)
    return payload


def cmd_helmholtz(model: Model, args) -> dict:
    return {"helmholtz": helmholtz_check(model.source()).to_dict()}


def _input_form(model: Model, args) -> BigradedForm:
    sig = model.require_sig()
    if args.form:
        try:
            with open(args.form, encoding="utf-8") as fh:
                return BigradedForm.from_json(fh.read(), sig)
        except (OSError, ValueError, KeyError) as exc:
            raise ModelError(f"cannot read form {args.form}: {exc}") from None
    L = model.lagrangian()
    return volume_form(sig, L.density) if args.volume else BigradedForm.function(sig, L.density)


def _form_payload(omega: BigradedForm, latex: bool):
    return omega.to_latex() if latex else omega.to_dict()


def cmd_dh(model: Model, args) -> dict:
    return {"d_H": _form_payload(d_horizontal(_input_form(model, args)), args.latex)}


def cmd_dv(model: Model, args) -> dict:
    return {"d_V": _form_payload(d_vertical(_input_form(model, args)), args.latex)}


def cmd_order(model: Model, args) -> dict:
    return {"order": order(model.lagrangian().density)}


def cmd_glue_check(model: Model, args) -> dict:
    sig = model.require_sig()
    names, cover, comps = model.patches()
    # local sections over base patches are plots of C^inf(-, R^k)
    X = Representable(len(sig.fields), sig.fields)
    plots = [X.plot(U, [c[a] for a in sig.fields]) for U, c in zip(cover, comps)]
    try:
        g = X.glue(cover, plots)
    except GlueError as exc:
        i, j = exc.pair
        raise CheckFailed({"glued": False, "pair": [names[i], names[j]],
                           "point": None if exc.point is None else [str(v) for v in exc.point],
                           "message": str(exc)})
    return {"glued": True, "domain": g.domain.to_dict(),
            "components": {a: _fmt(e, args.latex) for a, e in zip(sig.fields, g.map.components)}}


def cmd_axioms(model, args) -> dict:
    report = axiom_suite(args.suite, args.seed, args.cases)
    if not report.get("passed", all(r["passed"] for r in report["results"])):
        raise CheckFailed(report)
    return report


def cmd_holonomy(model: Model, args) -> dict:
    paths = model.paths()
    first = next(iter(paths.values()))
    A = model.connection(first.names)
    if args.sitting:
        paths = {k: p.with_sitting_instants() for k, p in paths.items()}
    tol = 1e-7
    results, failed = {}, False
    for name, p in paths.items():
        H = holonomy(A, p, args.steps)
        Hinv = holonomy(A, reverse(p), args.steps)
        probe = thin_invariance_probe(A, p, [parse_expression(r, BundleSignature(("s",), ("gamma",)))
                                             for r in args.reparam], args.steps)
        inverse_defect = float(np.max(np.abs(Hinv.matrix @ H.matrix - np.eye(A.k))))
        entry = {"matrix": H.to_list(), "inverse_defect": inverse_defect,
                 "thin_max_deviation": probe["max_deviation"]}
        if A.group != "GL":
            entry["unitarity_defect"] = H.unitarity_defect()
            failed = failed or entry["unitarity_defect"] > 1e-8
        failed = failed or inverse_defect > tol or probe["max_deviation"] > tol
        results[name] = entry
    payload = {"group": A.group, "steps": args.steps, "paths": results}
    if len(paths) > 1:
        # file order: the first block is traversed first
        seq = list(paths.values())
        total, product = seq[0], holonomy(A, seq[0], args.steps)
        try:
            for p in seq[1:]:
                total = compose(p, total)
                product = holonomy(A, p, args.steps) @ product
        except ValueError as exc:
            raise ModelError(str(exc)) from None
        H = holonomy(A, total, args.steps)
        payload["composite"] = {"matrix": H.to_list(), "groupoid_defect": H.distance(product)}
        failed = failed or payload["composite"]["groupoid_defect"] > tol * len(seq)
    if failed:
        raise CheckFailed(payload)
    return payload


HANDLERS = {
    "el": cmd_el,
    "variation": cmd_variation,
    "noether": cmd_noether,
    "symmetry": cmd_symmetry,
    "helmholtz": cmd_helmholtz,
    "dh": cmd_dh,
    "dv": cmd_dv,
    "order": cmd_order,
    "glue-check": cmd_glue_check,
    "axioms": cmd_axioms,
    "holonomy": cmd_holonomy,
}
RANDOMIZED = {"axioms"}


def _default_seed() -> int:
    raw = os.environ.get("VARJET_SEED")
    if raw is None:
        return DEFAULT_SEED
    try:
        return int(raw)
    except ValueError:
        return DEFAULT_SEED


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="varjet", description="Variational calculus on jet bundles.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    def add(name, help_text, model=True):
        p = sub.add_parser(name, help=help_text)
        if model:
            p.add_argument("model", help="model file")
        p.add_argument("--latex", action="store_true", help="render expressions as LaTeX")
        p.add_argument("--seed", type=int, default=_default_seed(),
                       help="seed for randomized checks (default: $VARJET_SEED or 0)")
        return p

    add("el", "Euler-Lagrange expressions of the Lagrangian")
    for name, text in (("variation", "first-variation split of each symmetry"),
                       ("noether", "Noether currents of each symmetry"),
                       ("symmetry", "divergence-symmetry test of each symmetry")):
        add(name, text).add_argument("--symmetry", help="only this named symmetry")
    add("helmholtz", "Helmholtz test of [source] (or the Euler-Lagrange form)")
    for name, text in (("dh", "horizontal differential"), ("dv", "vertical differential")):
        p = add(name, text)
        p.add_argument("--volume", action="store_true", help="act on L times the volume form")
        p.add_argument("--form", help="JSON file holding a bigraded form")
    add("order", "jet order of the Lagrangian")
    add("glue-check", "glue [patch] sections as plots of the sections sheaf")
    p = add("axioms", "randomized smooth-set axiom suites", model=False)
    p.add_argument("--suite", default="all",
                   choices=["functoriality", "gluing", "diffeology", "points", "sheaf", "all"])
    p.add_argument("--cases", type=int, default=50)
    p = add("holonomy", "holonomy of [connection] along each [path]")
    p.add_argument("--steps", type=int, default=4096)
    p.add_argument("--sitting", action="store_true", help="add sitting instants to every path")
    p.add_argument("--reparam", action="append", default=None,
                   help="monotone reparametrization in s (repeatable; default s^2)")
    return parser


def _emit(payload: dict, stream) -> None:
    stream.write(json.dumps(payload, sort_keys=True, indent=2) + "\n")


def run(argv=None, stdout=None, stderr=None) -> int:
    stdout = stdout or sys.stdout
    stderr = stderr or sys.stderr
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return 0 if exc.code == 0 else 2
    if args.command == "holonomy" and args.reparam is None:
        args.reparam = ["s^2"]
    model = None
    try:
        if getattr(args, "model", None) is not None:
            try:
                with open(args.model, encoding="utf-8") as fh:
                    text = fh.read()
            except OSError as exc:
                raise ModelError(f"cannot read {args.model}: {exc.strerror}") from None
            model = Model(text)
        payload = HANDLERS[args.command](model, args)
        code = 0
    except ModelError as exc:
        stderr.write(f"error: {exc}\n")
        return 2
    except CheckFailed as exc:
        payload, code = exc.payload, 1
    except (ValueError, FloatingPointError) as exc:
        stderr.write(f"error: {exc}\n")
        return 2
    if args.command in RANDOMIZED:
        payload["seed"] = args.seed
    _emit(payload, stdout)
    return code


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
