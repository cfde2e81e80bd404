"""Command line interface: instance files, subcommand dispatch and reports.

Instance files are JSON.  Numbers may be given as JSON numbers or as
rational strings such as ``"-3/2"``; they are parsed exactly with
:class:`fractions.Fraction` and then lowered to doubles.
"""

from __future__ import annotations

import argparse
import ast
import csv
import io
import json
import logging
import math
import os
import sys
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import Any, Optional

import numpy as np

from . import __version__
from .courant import CourantAlgebroid, QuadraticFiber, axioms_residual, bianchi_transitive_residual
from .flow import FlowError, FlowState, integrate_flow, stationarity_residual
from .gconn import build_generalized_metric, divergence_operator, offset_from_parts
from .instances import CATALOGUE
from .lie import KForm, LieAlgebra, jacobi_residual
from .ricci import ricci_closed_form, ricci_trace, skew_symmetry_check

log = logging.getLogger("ggflow")

COMMANDS = ("check", "ricci", "flow", "dualize", "verify-duality", "killing", "strominger", "grid-flow")
CHECK_CLASS = {"check", "ricci", "verify-duality"}
DEFAULT_TOL = 1e-9

CONVENTIONS = {
    "pairing": "<X+xi, Y+eta> = (xi(Y) + eta(X))/2",
    "dorfman_H_term": "[X, Y] has xi-part iota_Y iota_X H",
    "structure_constants": "[e_i, e_j] = c[i,j,k] e_k; d e^k = -sum_{i<j} c[i,j,k] e^ij",
    "generalized_metric": "V+ = e^b {X + gX}, V- = e^b {X - gX}",
    "ricci_base_presentation": "B+[i,j] = Ric+(X_i^-, X_j^+), B-[i,j] = Ric-(X_i^+, X_j^-)",
    "codifferential": "d* = adjoint of d (d*H(Y,Z) = -sum g^ab (nabla_a H)(e_b,Y,Z))",
    "flow": "dg - db = -2 B+, divergence offset held fixed",
    "clifford": "gamma(v)^2 = +<v,v>",
    "dc": "d^c a(X,Y,Z) = -da(JX,JY,JZ)",
    "dilaton": "eps = 4 d(phi_dil) on the grid; nu = sqrt(h); phi_hat = phi - log(h)/2",
}


class SpecError(ValueError):
    """Schema or consistency violation in an instance file."""


# ----------------------------------------------------------------------------
# Parsing


def parse_number(value: Any, where: str) -> float:
    if isinstance(value, bool):
        raise SpecError(f"{where}: booleans are not numbers")
    if isinstance(value, (int, float)):
        return float(value)
    if isinstance(value, str):
        try:
            return float(Fraction(value.strip()))
        except (ValueError, ZeroDivisionError) as exc:
            raise SpecError(f"{where}: cannot parse number {value!r}") from exc
    raise SpecError(f"{where}: expected a number, got {type(value).__name__}")


def parse_array(value: Any, where: str, shape: Optional[tuple[int, ...]] = None) -> np.ndarray:
    def rec(v, path):
        if isinstance(v, list):
            return [rec(x, f"{path}[{i}]") for i, x in enumerate(v)]
        return parse_number(v, path)

    arr = np.array(rec(value, where), dtype=float)
    if shape is not None and arr.shape != shape:
        raise SpecError(f"{where}: expected shape {shape}, got {arr.shape}")
    return arr


def parse_terms(value: Any, degree: int, where: str, dim: int) -> list[tuple]:
    """Lists ``[i_1, ..., i_degree, value]`` with 1-based indices."""
    if not isinstance(value, list):
        raise SpecError(f"{where}: expected a list of terms")
    out = []
    for n, entry in enumerate(value):
        if not isinstance(entry, list) or len(entry) != degree + 1:
            raise SpecError(f"{where}[{n}]: expected {degree} indices and a value")
        idx = []
        for i in entry[:degree]:
            if not isinstance(i, int) or not 1 <= i <= dim:
                raise SpecError(f"{where}[{n}]: index {i!r} out of range 1..{dim}")
            idx.append(i - 1)
        out.append(tuple(idx) + (parse_number(entry[degree], f"{where}[{n}]"),))
    return out


_ALLOWED_FUNCS = {"sin": np.sin, "cos": np.cos, "exp": np.exp, "log": np.log, "sqrt": np.sqrt,
                  "tanh": np.tanh, "cosh": np.cosh, "sinh": np.sinh}
_ALLOWED_NAMES = {"pi": np.pi, "e": np.e}


def eval_grid_expression(expr: str, x: np.ndarray, where: str) -> np.ndarray:
    """Evaluate an arithmetic expression in ``x`` with a small whitelist of functions."""
    try:
        tree = ast.parse(expr, mode="eval")
    except SyntaxError as exc:
        raise SpecError(f"{where}: invalid expression {expr!r}") from exc

    def ev(node):
        if isinstance(node, ast.Expression):
            return ev(node.body)
        if isinstance(node, ast.Constant) and isinstance(node.value, (int, float)):
            return float(node.value)
        if isinstance(node, ast.Name):
            if node.id == "x":
                return x
            if node.id in _ALLOWED_NAMES:
                return _ALLOWED_NAMES[node.id]
        if isinstance(node, ast.BinOp):
            a, b = ev(node.left), ev(node.right)
            ops = {ast.Add: np.add, ast.Sub: np.subtract, ast.Mult: np.multiply,
                   ast.Div: np.divide, ast.Pow: np.power}
            if type(node.op) in ops:
                return ops[type(node.op)](a, b)
        if isinstance(node, ast.UnaryOp) and isinstance(node.op, (ast.USub, ast.UAdd)):
            v = ev(node.operand)
            return -v if isinstance(node.op, ast.USub) else v
        if (isinstance(node, ast.Call) and isinstance(node.func, ast.Name)
                and node.func.id in _ALLOWED_FUNCS and len(node.args) == 1 and not node.keywords):
            return _ALLOWED_FUNCS[node.func.id](ev(node.args[0]))
        raise SpecError(f"{where}: unsupported construct in {expr!r}")

    out = np.asarray(ev(tree), dtype=float)
    return np.broadcast_to(out, x.shape).copy()


@dataclass
class InstanceSpec:
    raw: dict
    algebra: LieAlgebra
    E: CourantAlgebroid
    g: np.ndarray
    b: np.ndarray
    a: Optional[np.ndarray]
    eps: np.ndarray
    run: dict = field(default_factory=dict)
    source: str = ""


def _parse_algebra(sec: dict) -> LieAlgebra:
    if not isinstance(sec, dict):
        raise SpecError("algebra: expected an object")
    if "catalogue" in sec:
        name = sec["catalogue"]
        if name not in CATALOGUE:
            raise SpecError(f"algebra.catalogue: unknown algebra {name!r}")
        if name == "heisenberg" and "k" in sec:
            return LieAlgebra.heisenberg(parse_number(sec["k"], "algebra.k"))
        return CATALOGUE[name]()
    if "dim" not in sec:
        raise SpecError("algebra: 'dim' or 'catalogue' is required")
    dim = sec["dim"]
    if not isinstance(dim, int) or dim < 1:
        raise SpecError("algebra.dim: expected a positive integer")
    c = np.zeros((dim, dim, dim))
    seen: dict[tuple[int, int, int], float] = {}
    for i, j, k, v in parse_terms(sec.get("brackets", []), 3, "algebra.brackets", dim):
        if i == j:
            if v != 0:
                raise SpecError(f"algebra.brackets: c^{k + 1}_{i + 1}{j + 1} must vanish")
            continue
        for key, val in (((i, j, k), v), ((j, i, k), -v)):
            if key in seen and not math.isclose(seen[key], val, abs_tol=1e-15):
                raise SpecError(f"algebra.brackets: c^{k + 1}_{i + 1}{j + 1} != -c^{k + 1}_{j + 1}{i + 1} "
                                f"(triple ({i + 1},{j + 1},{k + 1}))")
            seen[key] = val
            c[key] = val
    return LieAlgebra(dim, c, name=str(sec.get("name", "")))


def _parse_fiber(sec) -> QuadraticFiber:
    if not isinstance(sec, dict) or "kind" not in sec:
        raise SpecError("courant.fiber: expected an object with 'kind'")
    if sec["kind"] == "abelian":
        c = parse_array(sec.get("c", [[1]]), "courant.fiber.c")
        c = np.atleast_2d(c)
        if c.shape[0] != c.shape[1]:
            raise SpecError("courant.fiber.c: expected a square matrix")
        return QuadraticFiber.abelian(c)
    if sec["kind"] == "su2":
        return QuadraticFiber.su2(parse_number(sec.get("scale", 1), "courant.fiber.scale"))
    raise SpecError(f"courant.fiber.kind: unknown kind {sec['kind']!r}")


def build_spec(raw: dict, source: str = "") -> InstanceSpec:
    if not isinstance(raw, dict):
        raise SpecError("top level: expected an object")
    unknown = set(raw) - {"algebra", "courant", "metric", "divergence", "spinor", "grid", "run",
                          "expect_dual", "description"}
    if unknown:
        raise SpecError(f"top level: unknown sections {sorted(unknown)}")
    if "algebra" not in raw:
        raise SpecError("top level: section 'algebra' is required")
    algebra = _parse_algebra(raw["algebra"])
    n = algebra.dim
    cour = raw.get("courant", {})
    variant = cour.get("variant", "exact")
    if n < 3:
        raise SpecError("algebra.dim: at least 3 is required")
    if not isinstance(cour, dict):
        raise SpecError("courant: expected an object")
    H = KForm.from_terms(n, 3, parse_terms(cour.get("H", []), 3, "courant.H", n))
    if variant == "exact":
        E = CourantAlgebroid.exact(algebra, H)
    elif variant == "transitive":
        fiber = _parse_fiber(cour.get("fiber"))
        d = fiber.dim
        F = np.zeros((n, n, d))
        for i, j, alpha, v in parse_terms(cour.get("F", []), 3, "courant.F", max(n, d)):
            if i >= n or j >= n or alpha >= d:
                raise SpecError("courant.F: index out of range")
            F[i, j, alpha] += v
            F[j, i, alpha] -= v
        A = parse_array(cour["A"], "courant.A", (n, d)) if "A" in cour else None
        E = CourantAlgebroid.transitive(algebra, fiber, F, H, A)
    else:
        raise SpecError(f"courant.variant: unknown variant {variant!r}")
    met = raw.get("metric", {})
    g = parse_array(met.get("g", np.eye(n).tolist()), "metric.g", (n, n))
    if np.max(np.abs(g - g.T)) > 0:
        raise SpecError("metric.g: must be symmetric")
    b = parse_array(met["b"], "metric.b", (n, n)) if "b" in met else np.zeros((n, n))
    if np.max(np.abs(b + b.T)) > 0:
        raise SpecError("metric.b: must be skew")
    a = None
    if "a" in met:
        if E.fiber is None:
            raise SpecError("metric.a: only meaningful for transitive algebroids")
        a = parse_array(met["a"], "metric.a", (n, E.fiber_dim))
    div = raw.get("divergence", {})
    if "eps" in div:
        eps = parse_array(div["eps"], "divergence.eps", (E.rank,))
    elif "dilaton_form" in div:
        phi = parse_array(div["dilaton_form"], "divergence.dilaton_form", (n,))
        eps = offset_from_parts(build_generalized_metric(E, g, b, a), phi=phi)
    else:
        eps = np.zeros(E.rank)
    run = raw.get("run", {})
    if not isinstance(run, dict):
        raise SpecError("run: expected an object")
    return InstanceSpec(raw, algebra, E, g, b, a, eps, dict(run), source)


def load_spec(path: str | os.PathLike) -> InstanceSpec:
    text = Path(path).read_text()
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as exc:
        raise SpecError(f"{path}: line {exc.lineno}, column {exc.colno}: {exc.msg}") from exc
    return build_spec(raw, str(path))


# ----------------------------------------------------------------------------
# Reports


@dataclass
class Report:
    command: str
    results: dict = field(default_factory=dict)
    residuals: dict = field(default_factory=dict)
    tables: dict = field(default_factory=dict)
    notes: list = field(default_factory=list)

    def residual(self, name: str, value: float, tol: float) -> None:
        value = float(value)
        self.residuals[name] = {"value": value, "tol": float(tol), "pass": bool(value <= tol)}

    def table(self, name: str, header: list[str], rows: list[list]) -> None:
        self.tables[name] = {"header": list(header), "rows": [[_clean(v) for v in r] for r in rows]}

    @property
    def failed(self) -> list[str]:
        return sorted(k for k, v in self.residuals.items() if not v["pass"])

    def as_dict(self) -> dict:
        return {"command": self.command, "version": __version__, "conventions": CONVENTIONS,
                "results": _clean(self.results), "residuals": self.residuals, "tables": self.tables,
                "notes": list(self.notes)}


def _clean(v):
    if isinstance(v, dict):
        return {str(k): _clean(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [_clean(x) for x in v]
    if isinstance(v, np.ndarray):
        return _clean(v.tolist())
    if isinstance(v, (np.floating, float)):
        return float(v)
    if isinstance(v, (np.integer,)):
        return int(v)
    if isinstance(v, (np.bool_,)):
        return bool(v)
    return v


def render_report(report: Report, fmt: str = "structured") -> str:
    if fmt == "structured":
        return json.dumps(report.as_dict(), indent=2, sort_keys=True) + "\n"
    if fmt != "csv":
        raise ValueError(f"unknown format {fmt!r}")
    buf = io.StringIO()
    for key in sorted(CONVENTIONS):
        buf.write(f"# convention {key}: {CONVENTIONS[key]}\n")
    w = csv.writer(buf, lineterminator="\n")
    buf.write(f"# command: {report.command}\n")
    w.writerow(["residual", "value", "tol", "pass"])
    for name in sorted(report.residuals):
        r = report.residuals[name]
        w.writerow([name, repr(r["value"]), repr(r["tol"]), r["pass"]])
    for name in sorted(report.tables):
        t = report.tables[name]
        buf.write(f"# table: {name}\n")
        w.writerow(t["header"])
        for row in t["rows"]:
            w.writerow([repr(v) if isinstance(v, float) else v for v in row])
    return buf.getvalue()


def emit_report(report: Report, fmt: str = "structured", path: Optional[str] = None) -> None:
    text = render_report(report, fmt)
    if path is None:
        sys.stdout.write(text)
    else:
        Path(path).write_text(text)


# ----------------------------------------------------------------------------
# Commands


def _tol(spec: InstanceSpec, override: Optional[float]) -> float:
    if override is not None:
        return float(override)
    return parse_number(spec.run.get("tol", DEFAULT_TOL), "run.tol")


def _metric(spec: InstanceSpec):
    return build_generalized_metric(spec.E, spec.g, spec.b, spec.a)


def cmd_check(spec: InstanceSpec, opts) -> Report:
    rep = Report("check")
    tol = _tol(spec, opts.tol)
    rep.residual("jacobi", jacobi_residual(spec.algebra), tol)
    for k, v in axioms_residual(spec.E).items():
        rep.residual(f"axiom_{k}", v, tol)
    if spec.E.fiber is not None:
        rep.residual("bianchi_dH_minus_cFF", bianchi_transitive_residual(spec.E), tol)
    m = _metric(spec)
    rep.results["rank"] = spec.E.rank
    rep.results["variant"] = spec.E.variant
    rep.results["admissible"] = bool(spec.E.fiber is None or m.is_admissible())
    rep.results["unimodular"] = bool(spec.algebra.is_unimodular())
    return rep


def cmd_ricci(spec: InstanceSpec, opts) -> Report:
    rep = Report("ricci")
    tol = _tol(spec, opts.tol)
    m = _metric(spec)
    div = divergence_operator(spec.E, spec.eps)
    closed = ricci_closed_form(spec.E, m, div)
    trace = ricci_trace(spec.E, m, div=div)
    gap = max(float(np.max(np.abs(closed.plus - trace.plus))),
              float(np.max(np.abs(closed.minus - trace.minus))))
    rep.residual("trace_vs_closed_form", gap, tol)
    rep.results["ric_plus"] = trace.plus
    rep.results["ric_minus"] = trace.minus
    rep.results["base_plus"] = trace.base_plus
    rep.results["base_minus"] = trace.base_minus
    rep.results["stationarity"] = float(np.max(np.abs(trace.plus), initial=0.0))
    if spec.E.fiber is None:
        sk = skew_symmetry_check(spec.E, m, div, tol=1e-10)
        rep.results["skew_symmetry"] = {"is_skew": bool(sk["is_skew"]), "residual": float(sk["residual"])}
    n = spec.algebra.dim
    rep.table("base_plus", ["i", "j", "value"],
              [[i + 1, j + 1, float(trace.base_plus[i, j])] for i in range(n) for j in range(n)])
    return rep


def _flow_columns(n: int, fiber_dim: int) -> list[str]:
    cols = ["t"] + [f"g_{i + 1}{j + 1}" for i in range(n) for j in range(i, n)]
    cols += [f"b_{i + 1}{j + 1}" for i in range(n) for j in range(i + 1, n)]
    cols += [f"theta_{i + 1}_{a + 1}" for i in range(n) for a in range(fiber_dim)]
    return cols + ["ric_plus_norm"]


def _flow_params(spec: InstanceSpec, opts) -> tuple[float, float, str]:
    t_end = opts.t_end if opts.t_end is not None else parse_number(spec.run.get("t_end", 1), "run.t_end")
    dt = opts.dt if opts.dt is not None else parse_number(spec.run.get("dt", "1/1000"), "run.dt")
    scheme = opts.scheme or spec.run.get("scheme", "rk4")
    return float(t_end), float(dt), scheme


def cmd_flow(spec: InstanceSpec, opts) -> Report:
    rep = Report("flow")
    t_end, dt, scheme = _flow_params(spec, opts)
    E = spec.E
    state0 = FlowState(spec.g, spec.b, spec.a if E.fiber is not None else None, spec.eps)
    every = int(spec.run.get("sample_every", max(1, int(round(t_end / dt)) // 100)))
    traj = integrate_flow(E, state0, t_end, dt, scheme)
    n, d = E.n, E.fiber_dim
    rows = []
    for k, s in enumerate(traj):
        if k % every and k != len(traj) - 1:
            continue
        row = [float(s.t)] + [float(s.g[i, j]) for i in range(n) for j in range(i, n)]
        row += [float(s.b[i, j]) for i in range(n) for j in range(i + 1, n)]
        if d:
            theta = -(s.a if s.a is not None else np.zeros((n, d)))
            row += [float(theta[i, a]) for i in range(n) for a in range(d)]
        row.append(stationarity_residual(E, s))
        rows.append(row)
    rep.table("trajectory", _flow_columns(n, d), rows)
    last = traj[-1]
    rep.results.update({"t_end": t_end, "dt": dt, "scheme": scheme, "steps": len(traj) - 1,
                        "g_final": last.g, "b_final": last.b,
                        "ric_plus_norm_final": rows[-1][-1],
                        "divergence_schedule": "constant"})
    return rep


def _torus_data(spec: InstanceSpec, opts):
    from .tduality import TorusBundleData

    if spec.E.fiber is not None:
        raise SpecError("dualization is implemented for exact algebroids only")
    fiber = opts.fiber if opts.fiber is not None else spec.run.get("fiber")
    if fiber is None:
        raise SpecError("a fiber index is required (--fiber or run.fiber)")
    fiber = int(fiber)
    if not 1 <= fiber <= spec.algebra.dim:
        raise SpecError(f"fiber index {fiber} out of range")
    return TorusBundleData(spec.algebra, fiber - 1, spec.E.H, spec.g, spec.b, spec.eps)


def _brackets_list(algebra: LieAlgebra) -> list:
    c = algebra.structure_constants
    n = algebra.dim
    return [[i + 1, j + 1, k + 1, float(c[i, j, k])] for i in range(n) for j in range(i + 1, n)
            for k in range(n) if abs(c[i, j, k]) > 1e-14]


def _form_list(form: KForm) -> list:
    from .lie import exterior_algebra

    combos = exterior_algebra(form.dim).combos_of(form.degree)
    return [[*(i + 1 for i in combo), float(v)] for combo, v in zip(combos, form.coeffs) if abs(v) > 1e-14]


def cmd_dualize(spec: InstanceSpec, opts) -> Report:
    from .tduality import dualize_buscher

    rep = Report("dualize")
    data = _torus_data(spec, opts)
    dual = dualize_buscher(data)
    rep.results.update({
        "fiber": data.fiber + 1,
        "dual_brackets": _brackets_list(dual.algebra),
        "dual_H": _form_list(dual.H),
        "dual_g": dual.g, "dual_b": dual.b, "dual_eps": dual.offset(),
        "h": data.h, "h_dual": dual.h,
        "det_product": abs(data.h) * abs(dual.h),
    })
    return rep


def _expected_dual_check(spec: InstanceSpec, dual, rep: Report, tol: float) -> None:
    exp = spec.raw.get("expect_dual")
    if not exp:
        return
    if "algebra" in exp:
        alg = _parse_algebra(exp["algebra"])
        rep.residual("dual_structure_constants",
                     float(np.max(np.abs(alg.structure_constants - dual.algebra.structure_constants))), tol)
    if "H" in exp:
        n = dual.dim
        H = KForm.from_terms(n, 3, parse_terms(exp["H"], 3, "expect_dual.H", n))
        rep.residual("dual_flux", float(np.max(np.abs((H - dual.H).coeffs), initial=0.0)), tol)


def cmd_verify_duality(spec: InstanceSpec, opts) -> Report:
    from .tduality import dualize_buscher, verify_duality

    rep = Report("verify-duality")
    tol = _tol(spec, opts.tol)
    data = _torus_data(spec, opts)
    t_end = opts.t_end if opts.t_end is not None else parse_number(spec.run.get("t_end", "1/2"), "run.t_end")
    dt = opts.dt if opts.dt is not None else parse_number(spec.run.get("dt", "1/1000"), "run.dt")
    out = verify_duality(data, t_end=float(t_end), dt=float(dt))
    tolerances = {"isometry_residual": 1e-11, "bracket_residual": 1e-11, "anchor_residual": 1e-11,
                  "ricci_exchange_residual": tol, "involution_residual": 1e-12,
                  "flow_correspondence_residual": 1e-6, "killing_residual_transport": tol}
    for k, v in out.items():
        if k in tolerances:
            rep.residual(k, v, tolerances[k])
        else:
            rep.results[k] = v
    dual = dualize_buscher(data)
    rep.results["dual_brackets"] = _brackets_list(dual.algebra)
    rep.results["dual_H"] = _form_list(dual.H)
    _expected_dual_check(spec, dual, rep, 1e-12)
    return rep


def _spinor_section(spec: InstanceSpec) -> dict:
    sec = spec.raw.get("spinor", {})
    if not isinstance(sec, dict):
        raise SpecError("spinor: expected an object")
    return sec


def _parse_spinor(value, rank: int) -> np.ndarray:
    if not isinstance(value, list) or len(value) != rank:
        raise SpecError(f"spinor.eta: expected {rank} entries")
    out = []
    for i, v in enumerate(value):
        if isinstance(v, list) and len(v) == 2:
            out.append(complex(parse_number(v[0], f"spinor.eta[{i}]"), parse_number(v[1], f"spinor.eta[{i}]")))
        else:
            out.append(complex(parse_number(v, f"spinor.eta[{i}]")))
    return np.array(out)


def cmd_killing(spec: InstanceSpec, opts) -> Report:
    from .gconn import offset_parts
    from .spinor import generalized_killing_residuals, killing_residuals, parallel_spinor_space

    rep = Report("killing")
    tol = _tol(spec, opts.tol)
    if spec.E.fiber is not None:
        raise SpecError("killing: implemented for exact algebroids")
    m = _metric(spec)
    n = spec.algebra.dim
    from .courant import read_exact_data

    H = read_exact_data(m.split_frame(), n)
    phi, _, _ = offset_parts(m, spec.eps)
    dim, _ = parallel_spinor_space(spec.algebra, spec.g, H)
    rank = 2 ** (n // 2)
    sec = _spinor_section(spec)
    if "eta" in sec:
        eta = _parse_spinor(sec["eta"], rank)
    else:
        rng = np.random.default_rng(int(spec.run.get("seed", 0)))
        eta = rng.normal(size=rank) + 1j * rng.normal(size=rank)
    first, second = killing_residuals(spec.algebra, spec.g, H, phi, eta)
    gfirst, gsecond = generalized_killing_residuals(spec.E, m, divergence_operator(spec.E, spec.eps), eta)
    rep.residual("gravitino", float(np.max(first)), tol)
    rep.residual("dilatino", second, tol)
    rep.results.update({"parallel_spinor_dimension": dim, "module_rank": rank,
                        "gravitino_per_direction": first,
                        "generalized_gravitino_per_direction": gfirst,
                        "generalized_dilatino": gsecond,
                        "stationarity": stationarity_residual(spec.E, FlowState(spec.g, spec.b, None, spec.eps))})
    return rep


def _su3(spec: InstanceSpec):
    from .spinor import SU3Structure

    sec = _spinor_section(spec)
    if "J" not in sec:
        return SU3Structure.standard()
    J = parse_array(sec["J"], "spinor.J", (6, 6))
    re = KForm.from_terms(6, 3, parse_terms(sec.get("Omega_re", []), 3, "spinor.Omega_re", 6))
    im = KForm.from_terms(6, 3, parse_terms(sec.get("Omega_im", []), 3, "spinor.Omega_im", 6))
    try:
        return SU3Structure(J, re, im, spec.g)
    except ValueError as exc:
        raise SpecError(f"spinor: {exc}") from exc


def cmd_strominger(spec: InstanceSpec, opts) -> Report:
    from .spinor import strominger_residuals

    rep = Report("strominger")
    tol = _tol(spec, opts.tol)
    if spec.algebra.dim != 6:
        raise SpecError("strominger: a 6-dimensional algebra is required")
    su3 = _su3(spec)
    F, c = None, None
    if spec.E.fiber is not None:
        F, c = spec.E.F, spec.E.fiber.c
    out = strominger_residuals(spec.algebra, su3, F, c)
    for k, v in out.as_dict().items():
        rep.residual(k, v, tol)
    rep.results["H_dc_omega"] = _form_list(out.H)
    rep.results["su3_normalization"] = su3.normalization()
    rep.results["su3_invariants"] = su3.invariant_residuals()
    return rep


def _grid_model(spec: InstanceSpec):
    from .tduality import FiberedGridModel

    sec = spec.raw.get("grid")
    if not isinstance(sec, dict) or "N" not in sec:
        raise SpecError("grid: section with 'N' is required")
    N = sec["N"]
    if not isinstance(N, int) or N < 16:
        raise SpecError("grid.N: expected an integer >= 16")
    length = parse_number(sec.get("length", 2 * np.pi), "grid.length")
    x = np.arange(N) * length / N

    def field_of(name, default):
        v = sec.get(name, default)
        if isinstance(v, str):
            try:
                return np.full(N, float(Fraction(v)))
            except ValueError:
                return eval_grid_expression(v, x, f"grid.{name}")
        if isinstance(v, list):
            return parse_array(v, f"grid.{name}", (N,))
        return np.full(N, parse_number(v, f"grid.{name}"))

    return FiberedGridModel.from_fields(field_of("h", 1), field_of("A", 0), field_of("B", 0),
                                        field_of("gbar", 1), field_of("phi", 0), length,
                                        int(sec.get("order", 4)))


def cmd_grid_flow(spec: InstanceSpec, opts) -> Report:
    from .tduality import grid_dualize, grid_generalized_ricci, grid_ricci_exchange, grid_ricci_flow

    rep = Report("grid-flow")
    model = _grid_model(spec)
    t_end = opts.t_end if opts.t_end is not None else parse_number(spec.run.get("t_end", "1/10"), "run.t_end")
    dt = opts.dt if opts.dt is not None else parse_number(spec.run.get("dt", "1/1000"), "run.dt")
    every = int(spec.run.get("sample_every", 10))
    traj = grid_ricci_flow(model, float(t_end), float(dt), sample_every=every)
    rows = []
    for k, m in enumerate(traj):
        Bp, _ = grid_generalized_ricci(m)
        rows.append([k * every * float(dt), float(np.max(np.std(m.g, axis=0))),
                     float(np.max(np.abs(Bp)))])
    rep.table("grid_trajectory", ["t", "x_variation", "ric_plus_norm"], rows)
    rep.results["N"] = model.N
    rep.results["order"] = model.order
    rep.results["duality_exchange_residual"] = grid_ricci_exchange(model, grid_dualize(model))
    return rep


DISPATCH = {
    "check": cmd_check, "ricci": cmd_ricci, "flow": cmd_flow, "dualize": cmd_dualize,
    "verify-duality": cmd_verify_duality, "killing": cmd_killing, "strominger": cmd_strominger,
    "grid-flow": cmd_grid_flow,
}


def run_command(spec: InstanceSpec, command: str, opts=None) -> Report:
    if command not in DISPATCH:
        raise SpecError(f"unknown command {command!r}")
    opts = opts or argparse.Namespace(t_end=None, dt=None, scheme=None, fiber=None, tol=None)
    return DISPATCH[command](spec, opts)


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="ggflow", description="Invariant generalized geometry engine")
    p.add_argument("--version", action="version", version=f"ggflow {__version__}")
    p.add_argument("command", choices=COMMANDS)
    p.add_argument("--spec", required=True, help="instance file (JSON)")
    p.add_argument("--t-end", type=float, dest="t_end", help="flow end time (default 1.0)")
    p.add_argument("--dt", type=float, help="flow time step")
    p.add_argument("--scheme", choices=("rk4", "euler"), help="integrator (default rk4)")
    p.add_argument("--fiber", type=int, help="1-based fiber index for duality commands")
    p.add_argument("--tol", type=float, help="override every residual tolerance")
    p.add_argument("--out", help="output path (default stdout)")
    p.add_argument("--format", choices=("structured", "csv"), default="structured")
    p.add_argument("-v", "--verbose", action="store_true")
    return p


def main(argv: Optional[list[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        spec = load_spec(args.spec)
        report = run_command(spec, args.command, args)
        emit_report(report, args.format, args.out)
    except (SpecError, FlowError, ValueError, OSError) as exc:
        print(f"ggflow: error: {exc}", file=sys.stderr)
        return 1
    if args.command in CHECK_CLASS and report.failed:
        print(f"ggflow: residuals above tolerance: {', '.join(report.failed)}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
