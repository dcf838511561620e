"""Config-driven batch experiment runner.

Experiments are described by a flat ``key = value`` document (UTF-8,
``#`` comments, unknown keys rejected).  ``run`` executes one named
pipeline end to end and writes ``result.json`` (verdicts and values, all
floats at 17 significant digits), CSV tables, and ``manifest.json``
(config echo, versions, wall time, seed, and a determinism hash of the
result bytes).  Exit status is 0 only when every internal audit passed,
1 on an audit failure, 2 on usage or IO errors.
"""

# Thread capping must happen before any BLAS-backed import.
import os as _os

_cap = _os.environ.get("DISCOUNTLAB_THREADS")
if _cap:
    for _var in ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS",
                 "MKL_NUM_THREADS", "NUMEXPR_NUM_THREADS"):
        _os.environ.setdefault(_var, _cap)

import argparse
import hashlib
import json
import sys
import time
from dataclasses import dataclass, fields
from pathlib import Path

import numpy as np

from . import limits, measures, model, solver
from .discretize import standard_system, system_from_json
from .errors import (BadValue, DiscountLabError, ParseError, UnknownKey)
from .model import ZOO_IDS

PIPELINES = ("structure", "solve", "duality", "sweep", "mather",
             "selection", "ergodic", "full")


@dataclass
class ExperimentSpec:
    instance: str
    pipeline: str
    lam: float = 0.5
    lambda_start: float = 0.5
    lambda_ratio: float = 0.5
    rungs: int = 18
    tol: float = 1e-10
    ergodic_lambda: float = 0.05
    ergodic_tol: float = 1e-10
    damping: float = 0.5
    grid_points: int = 0           # 0 = per-instance default
    xi_radius: float = 0.0         # 0 = per-instance default
    xi_count: int = 0
    seed: int = 0
    samples: int = 1000
    face_samples: int = 12
    face_tol: float = 1e-9
    normalize: bool = True
    erg_radius: float = 4.0
    probe_state: int = 0
    probe_mode: int = 0
    output_dir: str = "out"


_KEY_TO_FIELD = {"lambda": "lam"}
_FIELD_TO_KEY = {"lam": "lambda"}


def _coerce(name, kind, raw):
    try:
        if kind is bool:
            if raw.lower() in ("true", "1", "yes"):
                return True
            if raw.lower() in ("false", "0", "no"):
                return False
            raise ValueError(raw)
        return kind(raw)
    except ValueError:
        raise BadValue(f"key {name!r}: cannot parse {raw!r} as {kind.__name__}")


def parse_config(text: str) -> ExperimentSpec:
    """Parse a flat key = value document into an ExperimentSpec."""
    known = {f.name: f.type for f in fields(ExperimentSpec)}
    types = {"instance": str, "pipeline": str, "lam": float,
             "lambda_start": float, "lambda_ratio": float, "rungs": int,
             "tol": float, "ergodic_lambda": float, "ergodic_tol": float,
             "damping": float, "grid_points": int, "xi_radius": float,
             "xi_count": int, "seed": int, "samples": int,
             "face_samples": int, "face_tol": float, "normalize": bool,
             "erg_radius": float, "probe_state": int, "probe_mode": int,
             "output_dir": str}
    values = {}
    for lineno, raw_line in enumerate(text.splitlines(), start=1):
        line = raw_line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ParseError(f"expected 'key = value', got {raw_line!r}",
                             line=lineno)
        key, _, raw = line.partition("=")
        key, raw = key.strip(), raw.strip()
        field_name = _KEY_TO_FIELD.get(key, key)
        if field_name not in known:
            raise UnknownKey(f"unknown configuration key {key!r} "
                             f"(line {lineno})")
        if field_name in values:
            raise ParseError(f"duplicate key {key!r}", line=lineno)
        values[field_name] = _coerce(key, types[field_name], raw)
    for required in ("instance", "pipeline"):
        if required not in values:
            raise BadValue(f"missing required key {required!r}")
    spec = ExperimentSpec(**values)
    if spec.pipeline not in PIPELINES:
        raise BadValue(f"pipeline must be one of {PIPELINES}, "
                       f"got {spec.pipeline!r}")
    return spec


def serialize_config(spec: ExperimentSpec) -> str:
    lines = []
    for f in fields(ExperimentSpec):
        key = _FIELD_TO_KEY.get(f.name, f.name)
        val = getattr(spec, f.name)
        if isinstance(val, bool):
            val = "true" if val else "false"
        elif isinstance(val, float):
            val = format(val, ".17g")
        lines.append(f"{key} = {val}")
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# precise JSON / CSV emission
# ---------------------------------------------------------------------------

def _fmt(x) -> str:
    if isinstance(x, float):
        if x != x:
            return "NaN"
        if x in (float("inf"), float("-inf")):
            return '"inf"' if x > 0 else '"-inf"'
        return format(x, ".17g")
    raise TypeError(type(x))


def dumps_precise(obj) -> str:
    """Deterministic JSON with floats at 17 significant digits."""
    if obj is None:
        return "null"
    if isinstance(obj, bool):
        return "true" if obj else "false"
    if isinstance(obj, (np.floating,)):
        return _fmt(float(obj))
    if isinstance(obj, float):
        return _fmt(obj)
    if isinstance(obj, (int, np.integer)):
        return str(int(obj))
    if isinstance(obj, str):
        return json.dumps(obj)
    if isinstance(obj, np.ndarray):
        return dumps_precise(obj.tolist())
    if isinstance(obj, (list, tuple)):
        return "[" + ", ".join(dumps_precise(v) for v in obj) + "]"
    if isinstance(obj, dict):
        items = sorted(obj.items(), key=lambda kv: kv[0])
        return "{" + ", ".join(json.dumps(str(k)) + ": " + dumps_precise(v)
                               for k, v in items) + "}"
    raise TypeError(f"cannot serialize {type(obj)}")


def _csv(path: Path, header, rows):
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(format(v, ".17g") if isinstance(v, float)
                              else str(v) for v in row) + "\n")


def emit_plotdata(sweep, path, probe=(0, 0)) -> None:
    """Whitespace-separated columns for gnuplot, header prefixed '#'.

    Columns: lambda, value at the probe (mode, state), sup norm, Cauchy
    gap to the next rung (nan on the last row).
    """
    k, z = probe
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("# lambda value_at_probe sup_norm cauchy_gap\n")
        for j, lam in enumerate(sweep.lambdas):
            gap = sweep.cauchy_gaps[j] if j < len(sweep.cauchy_gaps) \
                else float("nan")
            fh.write(" ".join(format(v, ".17g") for v in
                              (lam, float(sweep.fields[j][k, z]),
                               float(np.max(np.abs(sweep.fields[j]))),
                               gap)) + "\n")


# ---------------------------------------------------------------------------
# pipelines
# ---------------------------------------------------------------------------

def _build_system(spec: ExperimentSpec):
    if spec.instance in ZOO_IDS:
        kwargs = {}
        if spec.grid_points:
            kwargs["N"] = spec.grid_points
        if spec.xi_radius:
            kwargs["xi_radius"] = spec.xi_radius
        if spec.xi_count:
            kwargs["xi_count"] = spec.xi_count
        return standard_system(spec.instance, **kwargs), \
            model.make_model(spec.instance)
    path = Path(spec.instance)
    if not path.exists():
        raise BadValue(f"instance {spec.instance!r} is neither a zoo id "
                       f"nor an existing file")
    return system_from_json(path.read_text()), None


def _pipe_structure(spec, sys_, mdl, out):
    if mdl is None:
        raise BadValue("structure pipeline requires a zoo instance")
    reports = [model.check_monotone(mdl, spec.samples, spec.seed),
               model.check_convex(mdl, spec.samples, spec.seed)]
    tables = []
    for i in range(mdl.m):
        xi = np.linspace(-1.0, 1.0, 5)
        etas = np.stack(_default_etas(mdl, i))
        tables.append(model.legendre_transform(
            mdl, i, sys_.grid.x[:1], xi, etas))
        reports.append(model.check_coupling_domain(tables[-1]))
    sections = {"reports": [json.loads(r.to_json()) for r in reports]}
    return sections, all(r.passed for r in reports), {}, None


def _default_etas(mdl, i):
    from .discretize import default_eta_spec
    return default_eta_spec(mdl, i)


def _pipe_solve(spec, sys_, mdl, out):
    u, pol, diag = solver.policy_iterate(sys_, spec.lam, tol=spec.tol)
    sections = {"lambda": spec.lam,
                "sup_norm": float(np.max(np.abs(u))),
                "value_at_probe": float(u[spec.probe_mode, spec.probe_state]),
                "diagnostics": diag.to_dict()}
    return sections, diag.final_residual <= 10 * spec.tol, {}, None


def _pipe_duality(spec, sys_, mdl, out):
    u, _, _ = solver.policy_iterate(sys_, spec.lam, tol=1e-10)
    audits = []
    for k in range(sys_.m):
        for z in range(sys_.num_states):
            audits.append(measures.duality_audit(
                sys_, spec.lam, z, k, solver_value=float(u[k, z])))
    spread = max(a.spread() for a in audits)
    sections = {"lambda": spec.lam, "max_spread": spread,
                "three_way_value_at_probe": {
                    "solver": audits[0].solver_value,
                    "measure_lp": audits[0].measure_value,
                    "subsolution_lp": audits[0].subsolution_value},
                "audits": [json.loads(a.to_json()) for a in audits]}
    rows = [(a.k, a.z, a.solver_value, a.measure_value, a.subsolution_value)
            for a in audits]
    return sections, all(a.passed for a in audits), \
        {"duality": (("mode", "state", "solver", "measure_lp",
                      "subsolution_lp"), rows)}, None


def _normalized(spec, sys_):
    if not spec.normalize:
        return sys_, None
    shifted, erg = limits.ergodic_normalize(
        sys_, lam=spec.ergodic_lambda, tol=spec.ergodic_tol,
        damping=spec.damping)
    return shifted, erg


def _pipe_sweep(spec, sys_, mdl, out):
    work, erg = _normalized(spec, sys_)
    sweep = limits.discount_sweep(work, spec.lambda_start, spec.lambda_ratio,
                                  spec.rungs, spec.tol)
    sections = {"normalized": spec.normalize,
                "ergodic_constant": None if erg is None else erg.c.tolist(),
                "sweep": json.loads(sweep.to_json())}
    emit_plotdata(sweep, Path(out) / "sweep.dat",
                  probe=(spec.probe_mode, spec.probe_state))
    return sections, not sweep.divergent, \
        {"sweep": (("lambda", "sup_norm", "cauchy_gap", "solver_iters"),
                   sweep.csv_rows())}, sweep


def _pipe_mather(spec, sys_, mdl, out):
    work, erg = _normalized(spec, sys_)
    nu, min_value = limits.mather_lp(work)
    sweep = limits.discount_sweep(work, spec.lambda_start, spec.lambda_ratio,
                                  spec.rungs, spec.tol)
    scaled = limits.mather_from_sweep(work, sweep, spec.probe_state,
                                      spec.probe_mode)
    resid = limits.closedness_residual(work, scaled)
    lam_min = sweep.lambdas[-1]
    bound = 5.0 * lam_min * (1.0 + limits.stencil_norm(work))
    pairing = scaled.pair_cost(work)
    ok = (-1e-8 <= min_value <= 1e-12) and resid <= bound \
        and abs(pairing) <= 1e-4
    sections = {"min_value": min_value,
                "scaled_measure_closedness_residual": resid,
                "closedness_bound": bound,
                "scaled_measure_cost_pairing": pairing,
                "ergodic_constant": None if erg is None else erg.c.tolist()}
    return sections, ok, {}, sweep


def _pipe_selection(spec, sys_, mdl, out):
    work, erg = _normalized(spec, sys_)
    sweep = limits.discount_sweep(work, spec.lambda_start, spec.lambda_ratio,
                                  spec.rungs, spec.tol)
    mset = limits.mather_face_samples(work, spec.face_samples, spec.seed,
                                      tol=spec.face_tol)
    field = limits.selection_field(work, mset)
    report = limits.convergence_report(work, sweep, field, mset)
    sections = {"mather": {"min_value": mset.min_value,
                           "exhaustive": mset.exhaustive,
                           "representatives": len(mset.representatives)},
                "report": json.loads(report.to_json())}
    return sections, report.passed, \
        {"sweep": (("lambda", "sup_norm", "cauchy_gap", "solver_iters"),
                   sweep.csv_rows())}, sweep


def _pipe_ergodic(spec, sys_, mdl, out):
    erg = solver.ergodic_solve(sys_, spec.ergodic_lambda,
                               tol=spec.ergodic_tol, damping=spec.damping)
    sections = {"c": erg.c.tolist(), "residual": erg.residual,
                "outer_iterations": erg.outer_iterations}
    condition = None
    if mdl is not None:
        radii = [1.0, 2.0, 4.0, max(8.0, 2.0 * spec.erg_radius)]
        profile = model.coercivity_profile(mdl, spec.erg_radius, radii, 24)
        condition = model.check_erg_condition(profile, mdl.n)
        sections["erg_condition"] = condition
        sections["beta"] = profile.beta
    return sections, erg.residual <= 1e-6, {}, None


def _pipe_full(spec, sys_, mdl, out):
    sections = {}
    passed = True
    s, ok, tables, _ = _pipe_duality(spec, sys_, mdl, out)
    sections["duality"] = {"max_spread": s["max_spread"]}
    passed &= ok
    s, ok, _, _ = _pipe_ergodic(spec, sys_, mdl, out)
    sections["ergodic"] = s
    passed &= ok
    s, ok, tables, sweep = _pipe_sweep(spec, sys_, mdl, out)
    sections["sweep"] = s["sweep"]
    passed &= ok
    s, ok, _, _ = _pipe_mather(spec, sys_, mdl, out)
    sections["mather"] = s
    passed &= ok
    s, ok, _, _ = _pipe_selection(spec, sys_, mdl, out)
    sections["selection"] = s
    passed &= ok
    return sections, passed, tables, sweep


_PIPELINE_FNS = {"structure": _pipe_structure, "solve": _pipe_solve,
                 "duality": _pipe_duality, "sweep": _pipe_sweep,
                 "mather": _pipe_mather, "selection": _pipe_selection,
                 "ergodic": _pipe_ergodic, "full": _pipe_full}


@dataclass
class ExitReport:
    status: int
    result_path: str
    passed: bool
    error: str = ""


def run_experiment(spec: ExperimentSpec) -> ExitReport:
    """Execute one pipeline and write result.json / tables / manifest."""
    out = Path(spec.output_dir)
    started = time.perf_counter()
    try:
        out.mkdir(parents=True, exist_ok=True)
        probe = out / ".write_probe"
        probe.write_text("")
        probe.unlink()
    except OSError as exc:
        return ExitReport(2, "", False, f"output_dir not writable: {exc}")
    try:
        sys_, mdl = _build_system(spec)
        sections, passed, tables, sweep = _PIPELINE_FNS[spec.pipeline](
            spec, sys_, mdl, out)
    except DiscountLabError as exc:
        record = {"error": {"type": type(exc).__name__, "message": str(exc)},
                  "pipeline": spec.pipeline, "instance": spec.instance,
                  "pass": False}
        (out / "result.json").write_text(dumps_precise(record) + "\n")
        return ExitReport(2, str(out / "result.json"), False, str(exc))

    result = {"pipeline": spec.pipeline, "instance": spec.instance,
              "seed": spec.seed, "pass": bool(passed), "sections": sections}
    result_bytes = (dumps_precise(result) + "\n").encode()
    (out / "result.json").write_bytes(result_bytes)
    for name, (header, rows) in tables.items():
        _csv(out / f"{name}.csv", header, rows)
    manifest = {"spec": {(_FIELD_TO_KEY.get(f.name, f.name)):
                         getattr(spec, f.name)
                         for f in fields(ExperimentSpec)},
                "versions": {"discountlab": _version(),
                             "numpy": np.__version__,
                             "python": sys.version.split()[0]},
                "seed": spec.seed,
                "wall_time_s": time.perf_counter() - started,
                "determinism_sha256": hashlib.sha256(result_bytes).hexdigest()}
    (out / "manifest.json").write_text(dumps_precise(manifest) + "\n")
    return ExitReport(0 if passed else 1, str(out / "result.json"), passed)


def _version():
    from . import __version__
    return __version__


# ---------------------------------------------------------------------------
# entry point
# ---------------------------------------------------------------------------

def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="discountlab")
    sub = parser.add_subparsers(dest="command")
    p_run = sub.add_parser("run", help="run an experiment config")
    p_run.add_argument("config")
    p_zoo = sub.add_parser("zoo", help="zoo utilities")
    p_zoo.add_argument("action", choices=["list"])
    p_ver = sub.add_parser("verify", help="re-verify a serialized system")
    p_ver.add_argument("system")
    args = parser.parse_args(argv)

    if args.command == "run":
        try:
            text = Path(args.config).read_text()
        except OSError as exc:
            print(f"error: {exc}", file=sys.stderr)
            return 2
        try:
            spec = parse_config(text)
        except DiscountLabError as exc:
            print(f"error: {exc}", file=sys.stderr)
            return 2
        report = run_experiment(spec)
        if report.error:
            print(f"error: {report.error}", file=sys.stderr)
        else:
            print(f"{'PASS' if report.passed else 'FAIL'} "
                  f"-> {report.result_path}")
        return report.status
    if args.command == "zoo":
        for zid in ZOO_IDS:
            print(zid)
        return 0
    if args.command == "verify":
        try:
            text = Path(args.system).read_text()
        except OSError as exc:
            print(f"error: {exc}", file=sys.stderr)
            return 2
        try:
            system_from_json(text)
        except (DiscountLabError, ValueError, KeyError) as exc:
            print(f"invalid: {exc}", file=sys.stderr)
            return 1
        print("ok")
        return 0
    parser.print_help()
    return 2


if __name__ == "__main__":
    raise SystemExit(main())
