"""Command-line front end emitting plot-ready CSV and JSON.

Range syntax is ``min:max:step`` for ``scan`` and ``order-parameter`` and
``min:max:count`` for ``phase-diagram``.  Exit codes: 0 success, 2 invalid
input (violations as JSON lines on stderr), 3 numerical non-convergence.
"""
from __future__ import annotations

import argparse
import io
import json
import math
import os
import sys
import tempfile
from typing import Any, Sequence

import numpy as np

from . import bounds, critical, ed, landau, spinblock
from .critical import Axis, Ray
from .model import Family, ModelError, ModelSpec, make_spec, validate

MODEL_NAMES = {
    "dqr": Family.DQR,
    "rabi": Family.DQR,
    "dicke": Family.DQR,
    "aniso": Family.ANISO,
    "tc": Family.TC,
    "tavis-cummings": Family.TC,
    "biased": Family.BIASED,
    "two-photon": Family.TWO_PHOTON,
    "xyz": Family.XYZ,
    "multimode": Family.MULTIMODE,
}
for _f in Family:
    MODEL_NAMES[_f.value.lower()] = _f

# flag -> parameter name understood by critical.set_param
PARAM_FLAGS = {
    "gamma": "gamma",
    "gamma_1": "gamma_1",
    "gamma_2": "gamma_2",
    "gamma_prime": "gamma_prime",
    "beta_delta": "beta_Delta",
    "lambda_": "lambda",
    "epsilon": "epsilon",
    "epsilon_x": "epsilon_x",
    "epsilon_y": "epsilon_y",
    "epsilon_z": "epsilon_z",
    "epsilon_bias": "epsilon_bias",
    "delta": "delta",
}

EXIT_OK, EXIT_INVALID, EXIT_NONCONVERGED = 0, 2, 3


class InputError(Exception):
    def __init__(self, violations: list[dict]):
        super().__init__("; ".join(v["message"] for v in violations))
        self.violations = violations


def _bad(code: str, message: str) -> InputError:
    return InputError([{"code": code, "message": message}])


# ---------------------------------------------------------------- parsing


class _Ordered(argparse.Action):
    """Store a value and remember the order in which parameter flags appeared."""

    def __call__(self, parser, ns, values, option_string=None):
        setattr(ns, self.dest, values)
        order = getattr(ns, "_order", None) or []
        ns._order = [*order, self.dest]


def parse_value(text: str):
    """A float, a comma-separated vector, or a range tuple ('range', lo, hi, third)."""
    t = text.strip()
    if ":" in t:
        parts = t.split(":")
        if len(parts) != 3:
            raise _bad("BadRange", f"range {text!r} must be min:max:step_or_count")
        try:
            return ("range", float(parts[0]), float(parts[1]), float(parts[2]))
        except ValueError:
            raise _bad("BadRange", f"cannot parse range {text!r}") from None
    try:
        vals = [float(x) for x in t.split(",")]
    except ValueError:
        raise _bad("BadNumber", f"cannot parse {text!r}") from None
    return vals[0] if len(vals) == 1 else vals


def _is_range(v) -> bool:
    return isinstance(v, tuple) and v and v[0] == "range"


def _base_value(v):
    return v[1] if _is_range(v) else v


def build_spec(ns) -> ModelSpec:
    if ns.model_file:
        with open(ns.model_file, encoding="utf-8") as fh:
            spec = ModelSpec.from_dict(json.load(fh))
    else:
        if ns.model is None:
            raise _bad("MissingModel", "--model or --model-file is required")
        key = ns.model.lower()
        if key not in MODEL_NAMES:
            raise _bad("UnknownModel", f"unknown model {ns.model!r}")
        fam = MODEL_NAMES[key]
        vals = {k: _base_value(getattr(ns, k)) for k in PARAM_FLAGS}
        delta = vals["delta"] if vals["delta"] is not None else 1.0
        if ns.spins and not isinstance(delta, list):
            delta = [delta] * ns.spins
        gamma = vals["gamma"] if vals["gamma"] is not None else 0.0
        if fam is Family.XYZ and (vals["gamma_1"] is not None or vals["gamma_2"] is not None):
            g = gamma if isinstance(gamma, list) else [gamma, gamma]
            gamma = [vals["gamma_1"] if vals["gamma_1"] is not None else g[0],
                     vals["gamma_2"] if vals["gamma_2"] is not None else g[1]]
        eps = vals["epsilon"]
        if eps is None:
            eps = [0.0, 0.0, 0.0]
        elif not isinstance(eps, list):
            eps = [eps] * 3
        for k, name in enumerate(("epsilon_x", "epsilon_y", "epsilon_z")):
            if vals[name] is not None:
                eps[k] = vals[name]
        bD = ns.beta_delta
        bD = math.inf if bD is None else _base_value(bD)
        spec = make_spec(
            fam,
            gamma,
            delta,
            lam=vals["lambda_"],
            epsilon_bias=vals["epsilon_bias"],
            gamma_prime=vals["gamma_prime"] or 0.0,
            epsilon_alpha=tuple(eps),
            beta_Delta=bD,
        )
    bad = validate(spec)
    if bad:
        raise InputError([v.to_dict() for v in bad])
    return spec


def _ranges(ns) -> list[tuple[str, tuple]]:
    out = []
    for dest in getattr(ns, "_order", None) or []:
        v = getattr(ns, dest, None)
        if dest in PARAM_FLAGS and _is_range(v) and dest not in [d for d, _ in out]:
            out.append((dest, v))
    return out


# ---------------------------------------------------------------- output


def fmt(x: Any) -> str:
    if isinstance(x, (bool, np.bool_)):
        return "true" if x else "false"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, (float, np.floating)):
        if math.isnan(x):
            return "nan"
        if math.isinf(x):
            return "inf" if x > 0 else "-inf"
        return f"{float(x):.12g}"
    return "" if x is None else str(x)


def emit_csv(header: Sequence[str], rows, meta: dict | None = None) -> str:
    buf = io.StringIO(newline="")
    for k, v in (meta or {}).items():
        buf.write(f"# {k}={v if isinstance(v, str) else json.dumps(v, sort_keys=True)}\n")
    buf.write(",".join(header) + "\n")
    for row in rows:
        buf.write(",".join(fmt(x) for x in row) + "\n")
    return buf.getvalue()


def _jsonable(x):
    if isinstance(x, dict):
        return {str(k): _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    if isinstance(x, np.ndarray):
        return _jsonable(x.tolist())
    if isinstance(x, (np.floating, float)):
        x = float(x)
        return x if math.isfinite(x) else ("inf" if x > 0 else "-inf" if x < 0 else "nan")
    if isinstance(x, (np.integer,)):
        return int(x)
    return x


def emit_json(payload: dict, meta: dict | None = None) -> str:
    doc = {"metadata": meta or {}, **payload}
    return json.dumps(_jsonable(doc), indent=2, sort_keys=True) + "\n"


def write_atomic(path: str | None, text: str) -> None:
    if path is None or path == "-":
        sys.stdout.write(text)
        return
    d = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=d, prefix=".tmp-", suffix=os.path.basename(path))
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _meta(ns, spec: ModelSpec | None) -> dict:
    meta = {
        "command": ns.command,
        "jump_threshold": critical.JUMP_THRESHOLD,
        "scan_points": landau.ScanBudget().points,
        "n_max_rule": "max(40, ceil(n + 12 sqrt(n))) with n the mean-field photon number",
    }
    if spec is not None:
        meta["model"] = spec.to_dict()
    return meta


def _out(ns, header, rows, payload, meta) -> str:
    if ns.format == "json":
        return emit_json({"columns": list(header), "rows": [list(r) for r in rows], **(payload or {})}, meta)
    return emit_csv(header, rows, meta if ns.metadata else None)


# ---------------------------------------------------------------- commands


def cmd_critical_line(ns) -> str:
    key = (ns.model or "").lower()
    fam = MODEL_NAMES.get(key)
    rngs = _ranges(ns)
    if fam is None or not rngs:
        raise _bad("BadArguments", "critical-line needs --model and one range flag")
    dest, (_, lo, hi, step) = rngs[0]
    xs = np.arange(lo, hi + 0.5 * step, step)
    meta = {"command": ns.command, "model": fam.value}
    if fam is Family.DQR and dest == "beta_delta":
        rows = [(x, critical.critical_line_dqr(x)) for x in xs if x > 0]
        header = ("beta_Delta", "gamma_c")
    elif fam is Family.TWO_PHOTON and dest == "gamma_prime":
        rows = [(x, *critical.critical_line_twophoton(x)) for x in xs]
        header = ("gamma_prime", "gamma_c", "jump")
    elif fam is Family.XYZ and dest == "epsilon":
        d = _base_value(ns.delta) if ns.delta is not None else 1.0
        recs = [(x, critical.xyz_isotropic_closed_form(x, d)) for x in xs]
        rows = [(x, r.t_c, r.order, r.jump) for x, r in recs]
        header = ("epsilon", "gamma_c", "order", "jump")
    else:
        raise _bad("BadArguments", "closed-form lines: dqr over --beta-delta, two-photon over --gamma-prime, xyz over --epsilon")
    return _out(ns, header, rows, None, meta)


def _ray(ns, spec: ModelSpec) -> Ray:
    n = spec.params.gamma.size
    direction = tuple(ns.direction) if ns.direction else (1.0,) * n
    origin = tuple(ns.origin) if ns.origin else None
    if len(direction) != n or (origin is not None and len(origin) != n):
        raise _bad("FamilyShapeMismatch", f"ray vectors need {n} entries")
    return Ray(direction, origin)


def cmd_scan(ns) -> str:
    rngs = _ranges(ns)
    if not rngs or rngs[0][0] != "gamma":
        raise _bad("BadArguments", "scan needs --gamma min:max:step along the ray")
    _, lo, hi, step = rngs[0][1]
    spec = build_spec(ns)
    ray = _ray(ns, spec)
    rows = []
    if not critical.has_origin_extremum(spec):
        recs = [critical.TransitionRecord(math.nan, "none", 0.0, "scan", ray)]
    else:
        recs = critical.scan_transitions(spec, ray, (lo, hi), step, ns.tol) or [
            critical.TransitionRecord(math.nan, "none", 0.0, "scan", ray)
        ]
        if spec.family is Family.XYZ:
            disc = critical.discriminant_transitions(spec, ray, (lo, hi), max(step, 1e-3))
            recs = recs + disc
    for r in recs:
        rows.append((r.t_c, r.order, r.jump, r.method))
    return _out(ns, ("t_c", "order", "jump", "method"), rows, None, _meta(ns, spec))


def cmd_order_parameter(ns) -> str:
    rngs = _ranges(ns)
    if len(rngs) != 1:
        raise _bad("BadArguments", "order-parameter needs exactly one range flag")
    dest, (_, lo, hi, step) = rngs[0]
    spec = build_spec(ns)
    xs = np.arange(lo, hi + 0.5 * step, step)
    rows = critical.order_parameter_curve(spec, PARAM_FLAGS[dest], xs)
    return _out(ns, (PARAM_FLAGS[dest], "u2", "phi_min"), rows, None, _meta(ns, spec))


def cmd_phase_diagram(ns) -> str:
    rngs = _ranges(ns)
    if len(rngs) != 2:
        raise _bad("BadArguments", "phase-diagram needs exactly two range flags (min:max:count)")
    axes = []
    for dest, (_, lo, hi, cnt) in rngs:
        if cnt < 1 or cnt != int(cnt):
            raise _bad("BadRange", "grid counts must be positive integers")
        axes.append(Axis(PARAM_FLAGS[dest], lo, hi, int(cnt)))
    spec = build_spec(ns)
    workers = ns.workers or critical.default_workers()
    grid = critical.phase_diagram(spec, tuple(axes), workers=workers)
    header = (axes[0].name, axes[1].name, "order_parameter", "phase", "phi_min", "edge")
    return _out(ns, header, list(grid.rows()), None, _meta(ns, spec))


def _C(ns, spec: ModelSpec) -> float:
    if ns.C is not None:
        return ns.C
    if ns.delta_over_omega is None:
        raise _bad("BadArguments", "--delta-over-omega or --C is required")
    return ns.delta_over_omega * (1 if spec.family is Family.XYZ else spec.params.N)


def cmd_ed(ns) -> str:
    spec = build_spec(ns)
    C = _C(ns, spec)
    n_max = ns.nmax if ns.nmax is not None else ed.default_n_max(spec, C)
    H, h, p = ed.hamiltonian_for(spec, C, n_max, cap=ns.cap)
    want = set(filter(None, ns.observables.split(",")))
    res = ed.eigensolve_lowest(H, ns.levels, h)
    payload: dict[str, Any] = {"n_max": n_max, "C": C, "energies": res.energies}
    if "photon" in want:
        payload["photon_number"] = res.photon_number
    if "parity" in want:
        payload["parity"] = res.parity
    if "dist" in want:
        d = res.distribution.reshape(-1, 2**h.N) if h.M == 1 else res.distribution
        payload["distribution"] = d
    if "Z" in want:
        if ns.beta_omega is None:
            raise _bad("BadArguments", "--beta-omega is required for Z")
        payload["log_Z"] = ed.log_partition_function(H, ns.beta_omega / p.omega[0])
    if ns.dump:
        ed.dump_matrix(ns.dump, H, spec.family, h)
    meta = _meta(ns, spec)
    return emit_json(payload, meta)


def cmd_photon_dist(ns) -> str:
    spec = build_spec(ns)
    C = _C(ns, spec)
    res = landau.minimize_global(spec)
    vs = spinblock.variational_state(spec, res, C)
    n, pe, pg = spinblock.photon_distribution_variational(vs, ns.nmax)
    header = ["n", "p_up", "p_down"]
    cols = [n, pe, pg]
    if ns.compare_ed:
        n_max = ns.nmax if ns.nmax is not None else ed.default_n_max(spec, C)
        H, h, _ = ed.hamiltonian_for(spec, C, n_max, cap=ns.cap)
        d = ed.eigensolve_lowest(H, 1, h).distribution
        m = len(n)
        pad = np.zeros((max(m, d.shape[0]), 2))
        pad[: d.shape[0]] = d
        cols += [pad[:m, 0], pad[:m, 1]]
        header += ["ed_up", "ed_down"]
    rows = list(zip(*cols))
    return _out(ns, header, rows, {"variational": {"alpha": vs.alpha_min, "thetas": vs.thetas}}, _meta(ns, spec))


def cmd_bounds_check(ns) -> str:
    spec = build_spec(ns)
    C = _C(ns, spec)
    if ns.beta_omega is None:
        raise _bad("BadArguments", "--beta-omega is required")
    from .model import physical_from_reduced

    p = physical_from_reduced(spec.family, spec.params, C, 1.0)
    h = ed.HilbertSpec(ns.nmax or 20, p.N, p.M, ns.cap)
    rep = bounds.verify_bounds(spec.family, p, ns.beta_omega, h, ns.nodes)
    return emit_json({"report": rep.to_dict(), "holds": rep.holds()}, _meta(ns, spec))


COMMANDS = {
    "critical-line": cmd_critical_line,
    "scan": cmd_scan,
    "phase-diagram": cmd_phase_diagram,
    "order-parameter": cmd_order_parameter,
    "ed": cmd_ed,
    "photon-dist": cmd_photon_dist,
    "bounds-check": cmd_bounds_check,
}


def _vector(text: str):
    return [float(x) for x in text.split(",")]


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="superradiant", description=__doc__.splitlines()[0])
    sub = ap.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        sp = sub.add_parser(name)
        sp.add_argument("--model")
        sp.add_argument("--model-file")
        for dest in PARAM_FLAGS:
            flag = "--" + dest.rstrip("_").replace("_", "-")
            sp.add_argument(flag, dest=dest, type=parse_value, action=_Ordered, default=None)
        sp.add_argument("--spins", type=int, default=None)
        sp.add_argument("--direction", type=_vector)
        sp.add_argument("--origin", type=_vector)
        sp.add_argument("--tol", type=float, default=1e-9)
        sp.add_argument("--delta-over-omega", type=float)
        sp.add_argument("--C", type=float)
        sp.add_argument("--nmax", type=int)
        sp.add_argument("--cap", type=int, default=ed.DEFAULT_CAP)
        sp.add_argument("--levels", type=int, default=2)
        sp.add_argument("--observables", default="photon,parity")
        sp.add_argument("--beta-omega", type=float)
        sp.add_argument("--nodes", type=int, default=bounds.DEFAULT_NODES)
        sp.add_argument("--compare-ed", action="store_true")
        sp.add_argument("--dump")
        sp.add_argument("--workers", type=int, default=None)
        sp.add_argument("--format", choices=("csv", "json"), default="csv")
        sp.add_argument("--no-metadata", dest="metadata", action="store_false")
        sp.add_argument("-o", "--output")
    return ap


def run(argv: Sequence[str] | None = None) -> int:
    ap = build_parser()
    ns = ap.parse_args(argv)
    try:
        text = COMMANDS[ns.command](ns)
    except InputError as exc:
        for v in exc.violations:
            sys.stderr.write(json.dumps(v, sort_keys=True) + "\n")
        return EXIT_INVALID
    except (ed.ConvergenceError, bounds.QuadratureError) as exc:
        sys.stderr.write(json.dumps({"code": "NonConvergence", "message": str(exc)}) + "\n")
        return EXIT_NONCONVERGED
    except ModelError as exc:
        sys.stderr.write(json.dumps({"code": type(exc).__name__, "message": str(exc)}) + "\n")
        return EXIT_INVALID
    write_atomic(ns.output, text)
    return EXIT_OK


def main() -> None:
    sys.exit(run())
