"""Command-line front end.

Every subcommand takes ``--key value`` flags and an optional ``--config``
file of ``key = value`` lines (flags win). A CSV goes to ``--out`` when
given; summary lines ``key=value`` always go to standard output.

Exit codes: 0 success, 1 tolerance or bound failure, 2 usage, 3 I/O.
"""

from __future__ import annotations

import argparse
import ast
import csv
import io
import math
import sys
from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .dilation import (build_ham_h, build_selector_blockenc, phase_conjugation_residual,
                       unitary_completion)
from .errors import InputError, KannaiError, NoSpectralGap, SingularSystem
from .extensions import (epd_bessel_reference, epd_solve, hopf_cole_recover,
                         linear_solve_kannai, transport_multiplier, worst_case_rhs)
from .operators import (build_biharmonic_1d, build_heat_gradient_1d, build_heat_neumann_1d,
                        build_hj_fourier_factor, custom_factor, dirichlet_boundary_forcing,
                        lift_to_dimension, source_forcing, w_points)
from .pipeline import (SimulationProblem, TheoremGL, Trapezoid, bound_inequality_checks, run)
from .quadrature import write_plan_csv

EXIT_OK, EXIT_FAIL, EXIT_USAGE, EXIT_IO = 0, 1, 2, 3


class UsageError(Exception):
    pass


# ---------------------------------------------------------------- expressions

_FUNCS = {"sin": np.sin, "cos": np.cos, "tan": np.tan, "exp": np.exp, "log": np.log,
          "sqrt": np.sqrt, "tanh": np.tanh, "sinh": np.sinh, "cosh": np.cosh, "abs": np.abs}
_CONSTS = {"pi": math.pi, "e": math.e}
_NODES = (ast.Expression, ast.BinOp, ast.UnaryOp, ast.Call, ast.Name, ast.Load, ast.Constant,
          ast.Add, ast.Sub, ast.Mult, ast.Div, ast.Pow, ast.USub, ast.UAdd)


def parse_expression(text: str, variables=("x", "y", "z")):
    """Compile an arithmetic expression in the given variables.

    Only numbers, + - * / **, the names in _FUNCS and the constants pi, e are allowed.
    """
    try:
        tree = ast.parse(text.strip(), mode="eval")
    except SyntaxError as exc:
        raise UsageError(f"cannot parse expression {text!r}: {exc.msg}") from None
    allowed = set(variables) | set(_FUNCS) | set(_CONSTS)
    for node in ast.walk(tree):
        if not isinstance(node, _NODES):
            raise UsageError(f"expression {text!r} uses unsupported syntax {type(node).__name__}")
        if isinstance(node, ast.Name) and node.id not in allowed:
            raise UsageError(f"expression {text!r} uses unknown name {node.id!r}")
        if isinstance(node, ast.Call) and not (isinstance(node.func, ast.Name) and node.func.id in _FUNCS):
            raise UsageError(f"expression {text!r} calls an unsupported function")
        if isinstance(node, ast.Constant) and not isinstance(node.value, (int, float)):
            raise UsageError(f"expression {text!r} has a non-numeric constant")
    code = compile(tree, "<expr>", "eval")
    env = {"__builtins__": {}, **_FUNCS, **_CONSTS}

    def f(**kw):
        out = eval(code, env, kw)  # names were whitelisted above
        shape = np.broadcast(*kw.values()).shape if kw else ()
        return np.broadcast_to(np.asarray(out, dtype=float), shape).astype(float)

    return f


def _grid_values(expr: str, factor, d: int) -> np.ndarray:
    """Evaluate expr on the w grid, direction 1 slowest."""
    pts = w_points(factor)
    names = ("x", "y", "z")[:d] if d <= 3 else tuple(f"x{i + 1}" for i in range(d))
    mesh = np.meshgrid(*([pts] * d), indexing="ij")
    return parse_expression(expr, names)(**dict(zip(names, mesh))).ravel()


# ---------------------------------------------------------------- config schema

_COMMON = {"config": (str, None), "out": (str, None)}

_PDE = {"T": (float, 1.0), "eps": (float, 1e-6), "n": (int, 50), "d": (int, 1),
        "rule": (("theorem", "trapezoid"), "theorem"), "R": (float, None), "M": (int, None),
        "tol": (float, None), "seed": (int, None), "plan_out": (str, None)}

SCHEMAS = {
    "heat": {**_PDE, "bc": (("dirichlet", "neumann"), "dirichlet"), "left": (float, None),
             "right": (float, None), "u0": (str, None), "f": (str, None)},
    "biharmonic": {**_PDE, "n": (int, 16), "u0": (str, "sin(pi*x)"), "f": (str, None)},
    "hj": {**_PDE, "n": (int, 32), "nu": (float, 0.1), "S0": (str, "cos(2*pi*x)")},
    "kernel-compare": {"T": (float, 1.0), "eps": (float, 1e-6), "beta": (float, 0.5),
                       "R_max": (float, None), "n_R": (int, 49)},
    "linsolve": {"n": (int, 16), "eps": (float, 1e-4), "b": (("ones", "worst"), "ones"),
                 "sweep": (str, None), "tol": (float, None)},
    "epd": {"operator": (("scalar", "dirichlet"), "scalar"), "L": (float, 2.0), "n": (int, 16),
            "d": (int, 3), "t": (float, 1.0), "nodes": (int, None), "u0": (str, None),
            "tol": (float, 1e-6)},
    "transport": {"T": (float, 0.1), "d": (int, 1), "k_max": (int, 8), "nodes": (int, 60),
                  "tol": (float, 1e-8)},
    "verify-blockenc": {"rows": (int, 4), "cols": (int, 3), "nodes": (int, 4), "seed": (int, 0),
                        "alpha": (float, None), "tol": (float, 1e-10)},
    "bench-bounds": {"factor": (("scalar", "dirichlet", "neumann", "random"), "dirichlet"),
                     "n": (int, 4), "T": (float, 1.0), "R": (float, None), "Q": (int, None),
                     "h1": (float, None), "delta_off": (float, 1e-3), "noise_scale": (float, 1.0),
                     "mode": (("random", "up"), "random"), "seed": (int, 0)},
}

_ALIASES = {"n_cells": "n", "out_path": "out"}


@dataclass
class RunConfig:
    subcommand: str
    params: dict = field(default_factory=dict)

    def __getitem__(self, key):
        return self.params[key]


def _convert(key, kind, raw):
    if isinstance(kind, tuple):
        if raw not in kind:
            raise UsageError(f"{key} must be one of {', '.join(kind)}, got {raw!r}")
        return raw
    try:
        val = kind(raw)
    except (TypeError, ValueError):
        raise UsageError(f"invalid value for {key}: {raw!r}") from None
    if kind is float and not math.isfinite(val):
        raise UsageError(f"{key} must be finite, got {raw!r}")
    return val


def _read_config_file(path: str) -> dict:
    try:
        with open(path, encoding="utf-8") as fh:
            lines = fh.read().splitlines()
    except OSError as exc:
        raise UsageError(f"cannot read config {path}: {exc.strerror}") from None
    out = {}
    for no, line in enumerate(lines, 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise UsageError(f"{path}:{no}: expected 'key = value'")
        k, v = (p.strip() for p in line.split("=", 1))
        out[_ALIASES.get(k.replace("-", "_"), k.replace("-", "_"))] = v
    return out


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _build_parser() -> _Parser:
    p = _Parser(prog="kannai", description="Kannai-transform heat simulation and verification suite.")
    sub = p.add_subparsers(dest="subcommand", required=True, parser_class=_Parser)
    for name, schema in SCHEMAS.items():
        sp = sub.add_parser(name)
        for key in {**_COMMON, **schema}:
            names = [key] + [a for a, t in _ALIASES.items() if t == key]
            flags = [f"--{nm}" for nm in names] + [f"--{nm.replace('_', '-')}" for nm in names]
            sp.add_argument(*dict.fromkeys(flags), dest=key, default=None)
    return p


def parse_config(argv) -> RunConfig:
    ns = _build_parser().parse_args(list(argv))
    schema = SCHEMAS[ns.subcommand]
    raw = {}
    if ns.config is not None:
        raw.update(_read_config_file(ns.config))
    raw.update({k: v for k, v in vars(ns).items() if v is not None and k not in ("subcommand", "config")})
    unknown = sorted(set(raw) - set(schema) - {"out"})
    if unknown:
        raise UsageError(f"unknown key(s) for {ns.subcommand}: {', '.join(unknown)}")
    params = {"out": raw.get("out")}
    for key, (kind, default) in schema.items():
        params[key] = _convert(key, kind, raw[key]) if key in raw else default
    return RunConfig(ns.subcommand, params)


# ---------------------------------------------------------------- output

def _fmt(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


def emit_report(csv_text, summary: dict, path, stream=None) -> None:
    """Write the CSV (if a path is given) then the summary lines."""
    stream = sys.stdout if stream is None else stream
    if path is not None and csv_text is not None:
        with open(path, "w", encoding="utf-8", newline="") as fh:
            fh.write(csv_text)
    for k, v in summary.items():
        stream.write(f"{k}={_fmt(v)}\n")


def _csv_rows(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for r in rows:
        w.writerow([_fmt(x) for x in r])
    return buf.getvalue()


_SCHEMA_HEADER = ["x_index", "u_kannai_re", "u_kannai_im", "u_ref_re", "u_ref_im", "abs_err"]


def _comparison_rows(u, ref, extra=None):
    for i, (a, r) in enumerate(zip(np.asarray(u, dtype=complex), np.asarray(ref, dtype=complex))):
        row = [i, float(a.real), float(a.imag), float(r.real), float(r.imag), float(abs(a - r))]
        yield row + (list(extra[i]) if extra is not None else [])


# ---------------------------------------------------------------- subcommands

def _rule(cfg):
    if cfg["rule"] == "trapezoid":
        if cfg["R"] is None or cfg["M"] is None:
            raise UsageError("rule=trapezoid needs R and M")
        return Trapezoid(cfg["R"], cfg["M"])
    if cfg["R"] is not None or cfg["M"] is not None:
        raise UsageError("R and M apply only to rule=trapezoid")
    return TheoremGL()


def _run_pde(cfg, factor, u0, forcing, extra_summary=None):
    problem = SimulationProblem(factor, u0, forcing, cfg["T"], cfg["eps"])
    rep = run(problem, _rule(cfg), perturb_seed=cfg["seed"])
    summary = dict(rep.summary())
    if rep.u_f_perturbed is not None:
        summary["lcu_noise"] = float(np.linalg.norm(rep.u_f_perturbed - rep.u_f))
    if extra_summary:
        summary.update(extra_summary(rep))
    if cfg["plan_out"] is not None:
        with open(cfg["plan_out"], "w", encoding="utf-8", newline="") as fh:
            write_plan_csv(rep.plan, rep.coeffs, fh)
    buf = io.StringIO()
    rep.write_csv(buf)
    ok = cfg["tol"] is None or rep.rel_error <= cfg["tol"]
    return buf.getvalue(), summary, ok


def cmd_heat(cfg):
    n, d = cfg["n"], cfg["d"]
    base = build_heat_neumann_1d(n) if cfg["bc"] == "neumann" else build_heat_gradient_1d(n)
    factor = lift_to_dimension(base, d)
    u0_expr = cfg["u0"] or ("cos(pi*x)" if cfg["bc"] == "neumann" else "cos(2*pi*x)")
    u0 = _grid_values(u0_expr, base, d)
    left, right = cfg["left"], cfg["right"]
    if cfg["bc"] == "neumann" and (left or right):
        raise UsageError("left/right boundary values apply only to bc=dirichlet")
    if cfg["bc"] == "dirichlet" and d == 1:
        left = 1.0 if left is None else left
        right = 1.0 if right is None else right
    elif left or right:
        raise UsageError("nonzero boundary values are supported for d = 1 only")
    forcing = None
    if left or right:
        if cfg["f"] is not None:
            raise UsageError("boundary data and an interior source cannot be combined")
        forcing = dirichlet_boundary_forcing(n, left, right)
    elif cfg["f"] is not None:
        forcing = source_forcing(factor, _grid_values(cfg["f"], base, d))
    return _run_pde(cfg, factor, u0, forcing)


def cmd_biharmonic(cfg):
    base = build_biharmonic_1d(cfg["n"])
    factor = lift_to_dimension(base, cfg["d"])
    u0 = _grid_values(cfg["u0"], base, cfg["d"])
    forcing = None
    if cfg["f"] is not None:
        forcing = source_forcing(factor, _grid_values(cfg["f"], base, cfg["d"]))
    return _run_pde(cfg, factor, u0, forcing)


def cmd_hj(cfg):
    nu, d = cfg["nu"], cfg["d"]
    factor = build_hj_fourier_factor(cfg["n"], d, nu)
    S0 = _grid_values(cfg["S0"], factor, d)
    u0 = np.exp(-S0 / (2.0 * nu))

    def extra(rep):
        S = hopf_cole_recover(rep.u_h.real, nu)
        S_ref = hopf_cole_recover(rep.u_ref.real, nu)
        return {"S_max_abs_err": float(np.max(np.abs(S - S_ref))),
                "max_imag": float(np.max(np.abs(rep.u_h.imag)))}

    return _run_pde(cfg, factor, u0, None, extra)


_COMPARED = (kernels.KernelKind.KannaiGaussian,) + kernels.COMPETITORS


def _kernel_spec(kind, cfg):
    if kind == kernels.KernelKind.ImprovedLCHS:
        return kernels.KernelSpec(kind, cfg["T"], beta=cfg["beta"])
    if kind in kernels.COMPETITORS:
        return kernels.KernelSpec(kind, cfg["T"], eps_param=cfg["eps"])
    return kernels.KernelSpec(kind, cfg["T"])


def cmd_kernel_compare(cfg):
    T, eps = cfg["T"], cfg["eps"]
    R_max = cfg["R_max"] if cfg["R_max"] is not None else 12.0 * math.sqrt(T)
    if cfg["n_R"] < 2 or not R_max > 0:
        raise UsageError("need n_R >= 2 and R_max > 0")
    grid = np.linspace(0.0, R_max, cfg["n_R"])
    rows, summary = [], {}
    for kind in _COMPARED:
        spec = _kernel_spec(kind, cfg)
        ep = "" if spec.eps_param is None else spec.eps_param
        for R, tail in kernels.truncation_error_curve(spec, grid):
            rows.append([kind.value, T, ep, R, tail])
        summary[f"R_min_{kind.value}"] = kernels.minimal_truncation_radius(spec, eps)
    r0 = summary[f"R_min_{_COMPARED[0].value}"]
    for kind in kernels.COMPETITORS:
        summary[f"ratio_{kind.value}"] = r0 / summary[f"R_min_{kind.value}"]
    return _csv_rows(["kernel", "T", "eps_param", "R", "tail_eps"], rows), summary, True


def _linsolve_one(n, eps, b_kind):
    factor = build_heat_gradient_1d(n)
    b = np.ones(factor.n_w) if b_kind == "ones" else worst_case_rhs(factor)
    return linear_solve_kannai(factor, b, eps)


def cmd_linsolve(cfg):
    eps = cfg["eps"]
    tol = eps if cfg["tol"] is None else cfg["tol"]
    if cfg["sweep"] is None:
        res = _linsolve_one(cfg["n"], eps, cfg["b"])
        summary = {"rel_error": res.rel_error, "kappa": res.kappa, "T_tilde": res.T_tilde,
                   "alpha": res.alpha, "per_sel": res.queries.per_sel,
                   "repetitions": res.queries.repetitions,
                   "total_queries": res.queries.total_matrix_queries}
        text = _csv_rows(_SCHEMA_HEADER, _comparison_rows(res.x_out, res.x_direct))
        return text, summary, res.rel_error <= tol
    try:
        ns = [int(s) for s in cfg["sweep"].split(",") if s.strip()]
    except ValueError:
        raise UsageError(f"sweep must be a comma-separated list of integers, got {cfg['sweep']!r}") from None
    if len(ns) < 2:
        raise UsageError("sweep needs at least two grid sizes")
    rows, kap, q = [], [], []
    ok = True
    for n in ns:
        res = _linsolve_one(n, eps, cfg["b"])
        rows.append([n, res.kappa, res.T_tilde, res.queries.total_matrix_queries, res.rel_error])
        kap.append(res.kappa)
        q.append(res.queries.total_matrix_queries)
        ok &= res.rel_error <= tol
    slope = float(np.polyfit(np.log(kap), np.log(q), 1)[0])
    text = _csv_rows(["n", "kappa", "T_tilde", "total_queries", "rel_error"], rows)
    return text, {"kappa_slope": slope, "max_rel_error": max(r[4] for r in rows)}, ok


def cmd_epd(cfg):
    if cfg["operator"] == "scalar":
        factor = custom_factor([[cfg["L"]]])
        u0 = np.array([1.0]) if cfg["u0"] is None else parse_expression(cfg["u0"], ())().reshape(1)
    else:
        factor = build_heat_gradient_1d(cfg["n"])
        u0 = _grid_values(cfg["u0"] or "sin(pi*x)", factor, 1)
    u = epd_solve(factor, u0, cfg["t"], cfg["d"], cfg["nodes"])
    ref = epd_bessel_reference(factor.A, u0, cfg["t"], cfg["d"])
    err = float(np.max(np.abs(u - ref)))
    summary = {"d": cfg["d"], "t": cfg["t"], "max_abs_err": err}
    if u.shape[0] == 1:
        summary["u"] = float(u[0].real)
    return _csv_rows(_SCHEMA_HEADER, _comparison_rows(u, ref)), summary, err <= cfg["tol"]


def cmd_transport(cfg):
    T, d, km = cfg["T"], cfg["d"], cfg["k_max"]
    if d < 1 or km < 0 or cfg["nodes"] < 1:
        raise UsageError("need d >= 1, k_max >= 0 and nodes >= 1")
    if T < 0:
        raise UsageError("T must be nonnegative")
    ks = np.arange(-km, km + 1)
    kk = np.stack([g.ravel() for g in np.meshgrid(*([ks] * d), indexing="ij")], axis=1)
    mult = transport_multiplier(kk, T, cfg["nodes"])
    exact = np.exp(-4.0 * math.pi**2 * np.sum(kk.astype(float) ** 2, axis=1) * T)
    err = float(np.max(np.abs(mult - exact)))
    header = _SCHEMA_HEADER + [f"k{i + 1}" for i in range(d)]
    text = _csv_rows(header, _comparison_rows(mult, exact, kk.tolist()))
    return text, {"modes": kk.shape[0], "max_abs_err": err}, err <= cfg["tol"]


def cmd_verify_blockenc(cfg):
    r, c, M = cfg["rows"], cfg["cols"], cfg["nodes"]
    if not (1 <= r <= 8 and 1 <= c <= 8 and 1 <= M <= 8):
        raise UsageError("rows, cols and nodes must lie in 1..8")
    rng = np.random.default_rng(cfg["seed"])
    L = rng.standard_normal((r, c)) + 1j * rng.standard_normal((r, c))
    alpha = cfg["alpha"] if cfg["alpha"] is not None else float(np.linalg.norm(L, 2))
    be_L = unitary_completion(L, alpha)
    be_H = build_ham_h(be_L)
    nodes = rng.uniform(-3.0, 3.0, M)
    be_S = build_selector_blockenc(nodes, be_H)
    checks = [("completion_block", be_L.block_residual()),
              ("completion_unitarity", be_L.unitarity_residual()),
              ("ham_h_block", be_H.block_residual()),
              ("ham_h_unitarity", be_H.unitarity_residual()),
              ("phase_conjugation", phase_conjugation_residual(L)),
              ("selector_block", be_S.block_residual()),
              ("selector_unitarity", be_S.unitarity_residual())]
    worst = max(v for _, v in checks)
    text = _csv_rows(["check", "residual"], checks)
    return text, {"checks": len(checks), "max_residual": worst}, worst <= cfg["tol"]


def _bench_factor(cfg):
    kind, n = cfg["factor"], cfg["n"]
    if kind == "scalar":
        return custom_factor([[2.0]])
    if kind == "dirichlet":
        return build_heat_gradient_1d(n)
    if kind == "neumann":
        return build_heat_neumann_1d(n)
    rng = np.random.default_rng(cfg["seed"])
    return custom_factor(rng.standard_normal((n, max(1, n - 1))))


def cmd_bench_bounds(cfg):
    T = cfg["T"]
    if not T > 0:
        raise UsageError("T must be positive")
    factor = _bench_factor(cfg)
    rng = np.random.default_rng(cfg["seed"])
    u0 = rng.standard_normal(factor.n_w)
    f = rng.standard_normal(factor.n_w)
    nH = factor.spectral_norm
    Rs = [cfg["R"]] if cfg["R"] is not None else [m * math.sqrt(T) for m in (2, 4, 6)]
    Qs = [cfg["Q"]] if cfg["Q"] is not None else [1, 2, 3, 4]
    rows, bad, k = [], 0, 0
    for R in Rs:
        h1 = cfg["h1"] if cfg["h1"] is not None else min(R, math.sqrt(T) / (math.e * (nH + 1 / math.sqrt(2 * T))))
        for Q in Qs:
            for chk in bound_inequality_checks(factor, u0, f, T, R, h1, Q, cfg["delta_off"],
                                             seed=cfg["seed"] + k, noise_scale=cfg["noise_scale"],
                                             mode=cfg["mode"]):
                rows.append([T, R, h1, Q, cfg["delta_off"], chk.name, chk.measured, chk.bound, chk.ok])
                bad += not chk.ok
            k += 1
    text = _csv_rows(["T", "R", "h1", "Q", "delta_off", "check", "measured", "bound", "ok"], rows)
    return text, {"checks": len(rows), "violations": bad}, bad == 0


COMMANDS = {
    "heat": cmd_heat, "biharmonic": cmd_biharmonic, "hj": cmd_hj,
    "kernel-compare": cmd_kernel_compare, "linsolve": cmd_linsolve, "epd": cmd_epd,
    "transport": cmd_transport, "verify-blockenc": cmd_verify_blockenc,
    "bench-bounds": cmd_bench_bounds,
}


def main(argv=None) -> int:
    argv = sys.argv[1:] if argv is None else argv
    try:
        cfg = parse_config(argv)
        text, summary, ok = COMMANDS[cfg.subcommand](cfg)
    except UsageError as exc:
        print(f"kannai: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (InputError, SingularSystem, NoSpectralGap) as exc:
        print(f"kannai: error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except KannaiError as exc:
        print(f"kannai: failure: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_FAIL
    except OSError as exc:
        print(f"kannai: I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    summary = {"status": "ok" if ok else "tolerance_failure", **summary}
    try:
        emit_report(text, summary, cfg["out"])
    except OSError as exc:
        print(f"kannai: I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    return EXIT_OK if ok else EXIT_FAIL


if __name__ == "__main__":
    sys.exit(main())
