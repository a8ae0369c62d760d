"""
Command-line entry point.

    fuelopt solve --A "[[0,1],[0,0]]" --B "[[0],[1]]" --x0 "[0.5,-1]" --T 2
    fuelopt reach --config sys.json --T 3 --dirs 128
    fuelopt synth --case oscillator --x0 "[1,0]" --k 4
    fuelopt sweep --config jobs.json --workers 4

Every run writes ``report.json`` (schema ``fuelopt/1``) into the output
directory together with optional CSV and SVG files. Exit status is 0 on
success, 2 when the initial state cannot be steered to the origin and 1 on
any error.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
import tempfile
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path

import numpy as np

from . import reachability, solver, synthesis2d as s2d
from .errors import FuelOptError, UnreachableError
from .extremal import ControlSignal, integrate, switching_vector
from .lti import LtiSystem

SCHEMA = "fuelopt/1"
TASKS = ("solve", "mintime", "infinite", "reach", "synth", "sweep")
CASES = ("freeparticle", "oscillator", "hyp1", "hyp2", "hyp3")
EMITS = ("json", "csv", "svg")
CASE_DEFAULTS = {
    "hyp1": {"l1": 1.0, "l2": 2.0},
    "hyp2": {"lam": 1.5, "b": 0.7},
    "hyp3": {"alpha": 0.1, "beta": 1.0},
}

EXIT_OK, EXIT_ERROR, EXIT_INFEASIBLE = 0, 1, 2


class ConfigError(FuelOptError):
    """A malformed configuration value; ``field`` names the offender."""

    def __init__(self, field_name, message):
        super().__init__(f"field {field_name!r}: {message}")
        self.field = field_name


@dataclass
class JobConfig:
    task: str = "solve"
    A: list | None = None
    B: list | None = None
    system: str | None = None        # path to a JSON file holding A and B
    x0: list | None = None
    horizon: object = None           # float, "inf" or "mintime"
    N: int = solver.DEFAULT_N
    dirs: int = 64
    quad_steps: int = reachability.DEFAULT_QUAD_STEPS
    gap_tol: float | None = None
    backend: str = "barrier"
    polish: bool = True
    out: str = "fuelopt-out"
    emit: tuple = ("json", "csv", "svg")
    case: str | None = None
    k: int | None = None
    count: int | None = None
    params: dict = field(default_factory=dict)
    jobs: list = field(default_factory=list)
    workers: int | None = None

    def provenance(self):
        d = asdict(self)
        d.pop("jobs")
        d["emit"] = list(self.emit)
        return d


# ------------------------------------------------------------------ parsing

def _parse_json_value(text, name):
    if not isinstance(text, str):
        return text
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(name, f"not valid JSON ({exc.msg})") from None


def _matrix(value, name):
    value = _parse_json_value(value, name)
    try:
        M = np.array(value, dtype=float)
    except (TypeError, ValueError):
        raise ConfigError(name, "must be a numeric matrix") from None
    if M.ndim == 1 and name == "B":
        M = M[:, None]
    if M.ndim != 2 or M.size == 0:
        raise ConfigError(name, "must be a non-empty 2-d array")
    if not np.all(np.isfinite(M)):
        raise ConfigError(name, "has non-finite entries")
    return M


def _vector(value, name, n=None):
    value = _parse_json_value(value, name)
    try:
        v = np.atleast_1d(np.array(value, dtype=float))
    except (TypeError, ValueError):
        raise ConfigError(name, "must be a numeric vector") from None
    if v.ndim != 1 or v.size == 0:
        raise ConfigError(name, "must be a non-empty vector")
    if not np.all(np.isfinite(v)):
        raise ConfigError(name, "has non-finite entries")
    if n is not None and v.size != n:
        raise ConfigError(name, f"must have length {n}, got {v.size}")
    return v


def _positive_int(value, name):
    try:
        iv = int(value)
    except (TypeError, ValueError):
        raise ConfigError(name, "must be an integer") from None
    if isinstance(value, float) and iv != value or iv < 1:
        raise ConfigError(name, "must be a positive integer")
    return iv


def _horizon(value):
    if isinstance(value, str):
        low = value.strip().lower()
        if low in ("inf", "infinite", "infinity"):
            return "inf"
        if low in ("mintime", "min-time"):
            return "mintime"
        try:
            value = float(low)
        except ValueError:
            raise ConfigError("horizon", "must be a number, 'inf' or 'mintime'") from None
    try:
        T = float(value)
    except (TypeError, ValueError):
        raise ConfigError("horizon", "must be a number, 'inf' or 'mintime'") from None
    if math.isinf(T) and T > 0:
        return "inf"
    if not (T > 0 and math.isfinite(T)):
        raise ConfigError("horizon", "must be positive")
    return T


def _params(value):
    if value is None:
        return {}
    if isinstance(value, dict):
        items = value.items()
    else:
        items = []
        for tok in value:
            if "=" not in tok:
                raise ConfigError("params", f"expected key=value, got {tok!r}")
            k, v = tok.split("=", 1)
            items.append((k.strip(), v))
    out = {}
    for k, v in items:
        try:
            out[k] = float(v)
        except (TypeError, ValueError):
            raise ConfigError(f"params.{k}", "must be a number") from None
    return out


def load_config_file(path):
    p = Path(path)
    try:
        data = json.loads(p.read_text(encoding="utf-8"))
    except OSError as exc:
        raise ConfigError("config", f"cannot read {path}: {exc.strerror}") from None
    except json.JSONDecodeError as exc:
        raise ConfigError("config", f"not valid JSON ({exc.msg})") from None
    if not isinstance(data, dict):
        raise ConfigError("config", "top level must be an object")
    # relative system paths resolve against the config file
    if isinstance(data.get("system"), str) and not os.path.isabs(data["system"]):
        data["system"] = str(p.parent / data["system"])
    return data


def normalize(raw: dict) -> JobConfig:
    """Validate a merged dict of settings into a :class:`JobConfig`."""
    names = {f.name for f in fields(JobConfig)}
    raw = dict(raw)
    if "T" in raw:
        raw.setdefault("horizon", raw.pop("T"))
    unknown = sorted(set(raw) - names)
    if unknown:
        raise ConfigError(unknown[0], "unknown field")
    cfg = JobConfig(**{k: v for k, v in raw.items() if v is not None})
    if cfg.task not in TASKS:
        raise ConfigError("task", f"must be one of {', '.join(TASKS)}")
    if cfg.task == "mintime":
        cfg.horizon = "mintime"
    elif cfg.task == "infinite":
        cfg.horizon = "inf"
    emit = cfg.emit.split(",") if isinstance(cfg.emit, str) else list(cfg.emit)
    for e in emit:
        if e not in EMITS:
            raise ConfigError("emit", f"unknown output kind {e!r}")
    cfg.emit = tuple(e for e in EMITS if e in emit)
    cfg.N = _positive_int(cfg.N, "N")
    cfg.dirs = _positive_int(cfg.dirs, "dirs")
    cfg.quad_steps = _positive_int(cfg.quad_steps, "quad_steps")
    if cfg.gap_tol is not None:
        try:
            cfg.gap_tol = float(cfg.gap_tol)
        except (TypeError, ValueError):
            raise ConfigError("gap_tol", "must be a number") from None
        if not (cfg.gap_tol > 0 and math.isfinite(cfg.gap_tol)):
            raise ConfigError("gap_tol", "must be positive")
    if cfg.backend not in ("barrier", "pdhg"):
        raise ConfigError("backend", "must be 'barrier' or 'pdhg'")
    cfg.params = _params(cfg.params)
    if cfg.x0 is not None:
        cfg.x0 = _vector(cfg.x0, "x0").tolist()
    if cfg.horizon is not None:
        cfg.horizon = _horizon(cfg.horizon)
    if cfg.k is not None:
        cfg.k = _positive_int(cfg.k, "k")
    if cfg.count is not None:
        cfg.count = _positive_int(cfg.count, "count")
    if cfg.workers is not None:
        cfg.workers = _positive_int(cfg.workers, "workers")

    if cfg.task in ("solve", "mintime", "infinite", "reach"):
        if cfg.system is not None and (cfg.A is None or cfg.B is None):
            sysdata = load_config_file(cfg.system)
            cfg.A = cfg.A if cfg.A is not None else sysdata.get("A")
            cfg.B = cfg.B if cfg.B is not None else sysdata.get("B")
        if cfg.A is None:
            raise ConfigError("A", "required")
        if cfg.B is None:
            raise ConfigError("B", "required")
        A, B = _matrix(cfg.A, "A"), _matrix(cfg.B, "B")
        if A.shape[0] != A.shape[1]:
            raise ConfigError("A", "must be square")
        if B.shape[0] != A.shape[0]:
            raise ConfigError("B", f"must have {A.shape[0]} rows")
        cfg.A, cfg.B = A.tolist(), B.tolist()
        if cfg.x0 is not None:
            _vector(cfg.x0, "x0", A.shape[0])
    if cfg.task in ("solve", "mintime", "infinite"):
        if cfg.x0 is None:
            raise ConfigError("x0", "required")
        if cfg.horizon is None:
            raise ConfigError("horizon", "required")
    if cfg.task == "reach":
        if cfg.horizon is None or not isinstance(cfg.horizon, float):
            raise ConfigError("horizon", "a finite horizon is required")
    if cfg.task == "synth":
        if cfg.case not in CASES:
            raise ConfigError("case", f"must be one of {', '.join(CASES)}")
        if cfg.case == "oscillator":
            if cfg.x0 is None:
                raise ConfigError("x0", "required")
            if cfg.k is None:
                raise ConfigError("k", "required")
        if cfg.x0 is not None:
            _vector(cfg.x0, "x0", 2)
        params = dict(CASE_DEFAULTS.get(cfg.case, {}))
        for key in cfg.params:
            if key not in params:
                raise ConfigError(f"params.{key}", f"not a parameter of case {cfg.case}")
        params.update(cfg.params)
        cfg.params = params
    if cfg.task == "sweep" and not cfg.jobs:
        raise ConfigError("jobs", "sweep needs a non-empty job list")
    return cfg


# ------------------------------------------------------------------ writing

def _clean(obj):
    """JSON-safe copy: numpy scalars to Python, non-finite floats to None or strings."""
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _clean(obj.tolist())
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        v = float(obj)
        if math.isnan(v):
            return None
        if math.isinf(v):
            return "inf" if v > 0 else "-inf"
        return v
    return obj


def _atomic_write(path, text):
    path = Path(path)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=".tmp-", suffix=path.suffix)
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _fmt(v):
    return format(float(v), ".17g")


def _csv(header, rows):
    lines = [",".join(header)]
    for row in rows:
        lines.append(",".join(x if isinstance(x, str) else _fmt(x) for x in row))
    return "\n".join(lines) + "\n"


def _write_json(out, payload):
    text = json.dumps(_clean(payload), indent=2, sort_keys=True, allow_nan=False)
    _atomic_write(out / "report.json", text + "\n")


def _write_svg(path, **kw):
    from .plotting import render_svg

    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=".tmp-", suffix=".svg")
    os.close(fd)
    try:
        render_svg(tmp, **kw)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _trajectory_rows(sys, x0, control: ControlSignal, covector, samples=1024):
    """Rows (t, x..., u..., |pB|) on the control breaks plus a uniform grid."""
    T = control.horizon
    t = np.union1d(control.breaks, np.linspace(0.0, T, samples + 1))
    t = t[(t >= 0.0) & (t <= T)]
    vals = np.array([control.sample(0.5 * (a + b)) for a, b in zip(t[:-1], t[1:])])
    vals = vals.reshape(len(t) - 1, sys.m)
    fine = ControlSignal(t, vals, "switching")
    X = integrate(sys, x0, "initial", fine).states
    U = np.vstack([vals, vals[-1:]])
    if covector is not None:
        pB = np.linalg.norm(switching_vector(sys, covector, t).reshape(len(t), sys.m), axis=1)
    else:
        pB = np.full(len(t), np.nan)
    header = (["t"] + [f"x{i + 1}" for i in range(sys.n)] + [f"u{j + 1}" for j in range(sys.m)]
              + ["pB_norm"])
    rows = [[t[i], *X[i], *U[i], pB[i]] for i in range(len(t))]
    return header, rows


# ------------------------------------------------------------------ tasks

def _system(cfg):
    return LtiSystem(cfg.A, cfg.B)


def run_solve(cfg: JobConfig, out: Path) -> int:
    sys_ = _system(cfg)
    x0 = np.array(cfg.x0, dtype=float)
    extra = {}
    if cfg.horizon == "inf":
        rep = solver.solve_infinite(sys_, x0, N=cfg.N)
    elif cfg.horizon == "mintime":
        T, rep = solver.solve_time_optimal(sys_, x0, N=cfg.N)
        extra["T_min"] = T
    else:
        rep = solver.solve_finite(sys_, cfg.horizon, x0, N=cfg.N, polish=cfg.polish,
                                  backend=cfg.backend, gap_tol=cfg.gap_tol)
    payload = {"schema": SCHEMA, "task": cfg.task, "config": cfg.provenance(),
               "result": rep.to_dict(), **extra}
    if "json" in cfg.emit:
        _write_json(out, payload)
    if rep.feasible and rep.control is not None and rep.control.horizon > 0:
        if "csv" in cfg.emit:
            header, rows = _trajectory_rows(sys_, x0, rep.control, rep.covector)
            _atomic_write(out / "trajectory.csv", _csv(header, rows))
        if "svg" in cfg.emit and sys_.n == 2:
            from .plotting import dense_pieces

            pcs = dense_pieces(sys_, x0, rep.control, max_step=rep.control.horizon / 400)
            _write_svg(out / "trajectory.svg", trajectories=[pcs],
                       points=[("x0", x0), ("origin", np.zeros(2))])
    return EXIT_OK if rep.feasible else EXIT_INFEASIBLE


def run_reach(cfg: JobConfig, out: Path) -> int:
    sys_ = _system(cfg)
    T = cfg.horizon
    D = reachability.sphere_directions(sys_.n, cfg.dirs)
    h = reachability.support_many(sys_, 0.0, T, D, N=cfg.quad_steps)
    payload = {"schema": SCHEMA, "task": "reach", "config": cfg.provenance(),
               "directions": len(D)}
    status = EXIT_OK
    if cfg.x0 is not None:
        mem = reachability.member(sys_, T, np.array(cfg.x0), quad_steps=cfg.quad_steps)
        payload["membership"] = {"status": mem.status, "gap": mem.gap,
                                 "direction": mem.direction}
        if mem.status == reachability.OUTSIDE:
            status = EXIT_INFEASIBLE
    if "json" in cfg.emit:
        _write_json(out, payload)
    if "csv" in cfg.emit:
        header = [f"xi{i + 1}" for i in range(sys_.n)] + ["support"]
        _atomic_write(out / "reach.csv", _csv(header, [[*d, v] for d, v in zip(D, h)]))
    return status


def _curve_rows(curves, count=200):
    rows = []
    for c in curves:
        lo, hi = c.param_range
        for s in np.linspace(lo, hi, count):
            x = c(s)
            rows.append([c.label, s, x[0], x[1]])
    return rows


def _synth_freeparticle(cfg):
    curves = [
        s2d._graph_x2("region_left", 0.0, 2.0, lambda y: -0.5 * y * y),
        s2d._graph_x2("region_right", -2.0, 0.0, lambda y: 0.5 * y * y),
    ]
    info, trajs, points = {}, [], []
    if cfg.x0 is not None:
        x0 = np.array(cfg.x0, float)
        val = s2d.free_particle_mu_inf(x0)
        info = {"mu_inf": val.mu, "finite_time_attainable": val.finite_time_attainable,
                "boundary_ambiguous": val.boundary_ambiguous}
        points.append(("x0", x0))
        x1, x2 = x0
        if val.finite_time_attainable and x2 != 0.0:
            # coast until the bang arc of length |x2| lands on the origin
            sgn = -np.sign(x2)
            coast = (sgn * x1 - 0.5 * x2 * x2) / abs(x2)
            T = coast + abs(x2)
            br = np.array([0.0, coast, T]) if coast > 0 else np.array([0.0, T])
            vals = [[0.0], [sgn]] if coast > 0 else [[sgn]]
            u = ControlSignal(br, np.array(vals), "switching")
            trajs.append((s2d.FREE_PARTICLE, x0, u))
            info["horizon"] = T
            info["cost"] = abs(x2)
    return info, curves, trajs, points


def _synth_oscillator(cfg):
    x0 = np.array(cfg.x0, float)
    plan = s2d.oscillator_plan(x0, cfg.k)
    sch = plan.schedule
    info = {"k": plan.k, "cost": plan.cost, "alpha0": sch.alpha0, "horizon": plan.horizon,
            "first_switch": plan.first_switch,
            "schedule": {"delta": sch.delta, "epsilon": sch.epsilon, "variant": sch.variant},
            "switch_times": plan.control.switch_times()}
    curves = s2d.oscillator_switch_circles(plan.k)
    return info, curves, [(s2d.OSCILLATOR, x0, plan.control)], [("x0", x0)]


def _synth_hyp(cfg, which):
    p = cfg.params
    if which == "hyp1":
        cv = s2d.hyperbolic1_curves(p["l1"], p["l2"])
        locus = s2d.hyperbolic1_switch_locus(p["l1"], p["l2"], count=cfg.count or 100)
        region = s2d.hyperbolic1_region
        args = (p["l1"], p["l2"])
    else:
        cv = s2d.hyperbolic2_curves(p["lam"], p["b"])
        locus = None
        region = s2d.hyperbolic2_region
        args = (p["lam"], p["b"])
    curves = list(cv.values())
    info, points = {}, []
    if locus is not None:
        info["switch_locus"] = locus
        points += [(f"locus-{i}", q) for i, q in enumerate(locus)]
    if cfg.x0 is not None:
        info["inside_region"] = region(*args, np.array(cfg.x0, float))
        points.append(("x0", np.array(cfg.x0, float)))
    return info, curves, [], points


def _synth_hyp3(cfg):
    p = cfg.params
    case = s2d.HyperbolicSpiralCase(p["alpha"], p["beta"])
    C0s = case.default_sweep(cfg.count or 64)
    trajs, misses = [], []
    for C0 in C0s:
        traj, u = s2d.hyperbolic3_portrait(case, C0)
        x_end = integrate(case.system, traj.initial, "initial", u).terminal
        misses.append(float(np.linalg.norm(x_end)))
        trajs.append((case.system, traj.initial, u))
    info = {"z_lim": [case.z_lim.real, case.z_lim.imag],
            "z_bar": [case.z_bar.real, case.z_bar.imag],
            "C0": C0s, "round_trip_miss": misses}
    return info, list(s2d.attainable_boundary3(case)), trajs, [("origin", np.zeros(2))]


def run_synth(cfg: JobConfig, out: Path) -> int:
    if cfg.case == "freeparticle":
        info, curves, trajs, points = _synth_freeparticle(cfg)
    elif cfg.case == "oscillator":
        info, curves, trajs, points = _synth_oscillator(cfg)
    elif cfg.case == "hyp3":
        info, curves, trajs, points = _synth_hyp3(cfg)
    else:
        info, curves, trajs, points = _synth_hyp(cfg, cfg.case)
    payload = {"schema": SCHEMA, "task": "synth", "case": cfg.case,
               "config": cfg.provenance(), "result": info}
    if "json" in cfg.emit:
        _write_json(out, payload)
    if "csv" in cfg.emit:
        _atomic_write(out / "curves.csv", _csv(["label", "s", "x1", "x2"], _curve_rows(curves)))
        if trajs:
            rows = []
            for i, (sys_, x0, u) in enumerate(trajs):
                X = integrate(sys_, x0, "initial", u).states
                vals = np.vstack([u.values, u.values[-1:]])
                rows += [[str(i), t, *x, v[0]] for t, x, v in zip(u.breaks, X, vals)]
            _atomic_write(out / "trajectories.csv",
                          _csv(["trajectory", "t", "x1", "x2", "u"], rows))
    if "svg" in cfg.emit:
        from .plotting import dense_pieces

        pieces = [dense_pieces(sys_, x0, u, max_step=max(u.horizon / 400, 1e-3))
                  for sys_, x0, u in trajs]
        _write_svg(out / f"{cfg.case}.svg", trajectories=pieces,
                   curves=[(c.label, c.sample()) for c in curves], points=points,
                   title=cfg.case)
    return EXIT_OK


def _sweep_job(args):
    raw, out = args
    return run_config(raw, out)


def run_sweep(cfg: JobConfig, out: Path, base: dict) -> int:
    base = {k: v for k, v in base.items() if k not in ("jobs", "task", "workers", "out")}
    jobs = []
    for i, job in enumerate(cfg.jobs):
        if not isinstance(job, dict):
            raise ConfigError(f"jobs[{i}]", "must be an object")
        merged = {**base, **job}
        merged.setdefault("task", "solve")
        if merged["task"] == "sweep":
            raise ConfigError(f"jobs[{i}].task", "nested sweeps are not supported")
        try:
            normalize(merged)
        except ConfigError as exc:
            raise ConfigError(f"jobs[{i}].{exc.field}", str(exc).split(": ", 1)[1]) from None
        jobs.append((merged, str(out / f"job-{i:03d}")))
    workers = cfg.workers or min(len(jobs), os.cpu_count() or 1)
    if workers == 1:
        codes = [_sweep_job(j) for j in jobs]
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            codes = list(pool.map(_sweep_job, jobs))
    summary = {"schema": SCHEMA, "task": "sweep", "config": cfg.provenance(),
               "jobs": [{"index": i, "out": Path(o).name, "exit": c}
                        for i, ((_, o), c) in enumerate(zip(jobs, codes))]}
    _write_json(out, summary)
    if any(c == EXIT_ERROR for c in codes):
        return EXIT_ERROR
    return EXIT_INFEASIBLE if any(c == EXIT_INFEASIBLE for c in codes) else EXIT_OK


def run_config(raw: dict, out=None) -> int:
    """Run one job from a settings dict; errors are reported on stderr."""
    try:
        cfg = normalize(raw)
        if out is not None:
            cfg = replace(cfg, out=str(out))
        dest = Path(cfg.out)
        dest.mkdir(parents=True, exist_ok=True)
        if cfg.task in ("solve", "mintime", "infinite"):
            return run_solve(cfg, dest)
        if cfg.task == "reach":
            return run_reach(cfg, dest)
        if cfg.task == "synth":
            return run_synth(cfg, dest)
        return run_sweep(cfg, dest, raw)
    except ConfigError as exc:
        print(f"fuelopt: error: {exc}", file=sys.stderr)
        return EXIT_ERROR
    except UnreachableError as exc:
        print(f"fuelopt: infeasible: {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE
    except FuelOptError as exc:
        print(f"fuelopt: error: {exc}", file=sys.stderr)
        return EXIT_ERROR


# ------------------------------------------------------------------ argparse

def build_parser():
    p = argparse.ArgumentParser(prog="fuelopt", description="Minimum-fuel control of LTI systems.")
    sub = p.add_subparsers(dest="task", required=True)

    def common(sp):
        sp.add_argument("--config", help="JSON file with job settings; flags override it")
        sp.add_argument("--out", help="output directory (default fuelopt-out)")
        sp.add_argument("--emit", help="comma list from json,csv,svg")

    def system(sp):
        sp.add_argument("--A", help="state matrix as JSON")
        sp.add_argument("--B", help="input matrix as JSON")
        sp.add_argument("--system", help="JSON file holding A and B")

    s = sub.add_parser("solve", help="minimum-fuel solve")
    common(s)
    system(s)
    s.add_argument("--x0", help="initial state as JSON list")
    s.add_argument("--T", "--horizon", dest="horizon", help="horizon: number, inf or mintime")
    s.add_argument("--N", type=int, help=f"grid cells (default {solver.DEFAULT_N})")
    s.add_argument("--gap-tol", dest="gap_tol", type=float)
    s.add_argument("--backend", choices=("barrier", "pdhg"))
    s.add_argument("--no-polish", dest="polish", action="store_const", const=False)

    for name, hlp in (("mintime", "minimum-time solve"), ("infinite", "infinite-horizon solve")):
        s = sub.add_parser(name, help=hlp)
        common(s)
        system(s)
        s.add_argument("--x0")
        s.add_argument("--N", type=int)

    r = sub.add_parser("reach", help="support function samples of the attainable set")
    common(r)
    system(r)
    r.add_argument("--T", "--horizon", dest="horizon")
    r.add_argument("--dirs", type=int, help="number of directions (default 64)")
    r.add_argument("--quad-steps", dest="quad_steps", type=int)
    r.add_argument("--x0", help="optional state to classify")

    y = sub.add_parser("synth", help="two-dimensional syntheses")
    common(y)
    y.add_argument("--case", choices=CASES)
    y.add_argument("--x0")
    y.add_argument("--k", type=int)
    y.add_argument("--count", type=int, help="number of locus points or portraits")
    y.add_argument("--params", nargs="*", metavar="KEY=VALUE")

    w = sub.add_parser("sweep", help="run a list of jobs in parallel")
    common(w)
    w.add_argument("--workers", type=int)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    flags = {k: v for k, v in vars(args).items() if v is not None and k != "config"}
    raw = {}
    if args.config:
        try:
            raw = load_config_file(args.config)
        except ConfigError as exc:
            print(f"fuelopt: error: {exc}", file=sys.stderr)
            return EXIT_ERROR
    if "horizon" in flags:
        raw.pop("T", None)
    raw.update(flags)
    return run_config(raw)


if __name__ == "__main__":
    sys.exit(main())
