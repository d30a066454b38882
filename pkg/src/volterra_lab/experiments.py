"""Experiment configs, Monte Carlo orchestration and result files.

A config is one JSON document: a ``process`` block (kernel, volatility,
driver), a ``grid`` block, the experiment kind and its ``params``.  Path ``i``
always uses ``child_seed(base_seed, i)`` and paths are computed in fixed
chunks of :data:`CHUNK` indices, so every per-path value is independent of
the number of workers.
"""

import csv
import hashlib
import io
import json
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from functools import lru_cache
from importlib import metadata

import jsonschema
import numpy as np

from .anticipative_integral import (
    integrate_deterministic,
    integrate_semimartingale,
    ou_residual,
    ou_solution,
)
from .chaos import KtildeKernel, half_square_chaos, pair_matrix, second_chaos_integral, trace_term
from .errors import ConfigError
from .grid import SimulationGrid
from .integrands import Constant, ExpDecay, StepFunction, indicator
from .kernels import ExpShift, kernel_from_config
from .kg_operator import kg_apply, kg_exp_closed
from .levy_drivers import Brownian, child_seed, driver_from_config
from .path_engine import (
    VmlvProcess,
    coarsen_path,
    decompose,
    simulate,
    simulate_batch,
    variance_oracle,
)
from .volatility import Constant as ConstantVol
from .volatility import volatility_from_config

CHUNK = 128
KINDS = ("Simulate", "KgEval", "Integrate", "VerifyOU", "Chaos", "Converge", "CheckIntegrability")
_POW2 = [2**k for k in range(1, 17)]

_num = {"type": "number"}
_pos = {"type": "number", "exclusiveMinimum": 0}


def _obj(props, required=()):
    return {"type": "object", "properties": props, "required": list(required), "additionalProperties": False}


def _tagged(tag, variants):
    """Schema for ``{tag: name, ...}`` with one closed property set per name."""
    names = sorted(variants)
    rules = [
        {
            "if": {"properties": {tag: {"const": name}}, "required": [tag]},
            "then": _obj({tag: {"const": name}, **props}, [tag, *req]),
        }
        for name, (props, req) in variants.items()
    ]
    return {"type": "object", "required": [tag], "properties": {tag: {"enum": names}}, "allOf": rules}


_JUMP_LAW = _tagged("law", {
    "Normal": ({"mean": _num, "sd": _pos}, []),
    "Exponential": ({"rate": _pos}, []),
    "TwoPoint": ({"z1": _num, "p1": {"type": "number", "minimum": 0, "maximum": 1}, "z2": _num}, ["z1", "p1"]),
})

_KERNEL = _tagged("family", {
    "ConstantOne": ({}, []),
    "ExpShift": ({"alpha": _pos}, ["alpha"]),
    "GammaShift": ({"nu": {"type": "number", "exclusiveMinimum": 0.5}, "lam": _pos}, ["nu", "lam"]),
    "FbmBracket": ({"H": {"type": "number", "exclusiveMinimum": 0, "exclusiveMaximum": 1}}, ["H"]),
    "CarmaShift": ({
        "A": {"type": "array", "items": {"type": "array", "items": _num}},
        "ar": {"type": "array", "items": _num},
        "b": {"type": "array", "items": _num},
    }, ["b"]),
    "Tabulated": ({"csv": {"type": "string"}, "fd_fallback": {"type": "boolean"}}, ["csv"]),
})

_SUBORDINATOR = {
    "kind": {"const": "Subordinator"},
    "family": {"enum": ["Gamma", "InverseGaussian", "CompoundPoissonPositive"]},
    "shape_rate": _pos, "scale": _pos, "delta": _pos, "gamma": _pos, "rate": _pos, "jump_law": _JUMP_LAW,
}

_DRIVER = _tagged("kind", {
    "Brownian": ({"c2": {"type": "number", "minimum": 0}, "drift": _num}, []),
    "CompensatedCompoundPoisson": ({"rate": _pos, "jump_law": _JUMP_LAW, "c2": {"type": "number", "minimum": 0}},
                                   ["rate", "jump_law"]),
    "Subordinator": ({k: v for k, v in _SUBORDINATOR.items() if k != "kind"}, ["family"]),
    "TruncatedSeries": ({"C": _pos, "lam": _pos, "Y": {"type": "number", "exclusiveMinimum": 0, "exclusiveMaximum": 2},
                         "eps": _pos, "gaussian_small_jumps": {"type": "boolean"}}, ["C", "lam", "Y"]),
})

_VOLATILITY = _tagged("kind", {
    "Constant": ({"value": {"type": "number", "minimum": 0}}, []),
    "LevyOU": ({"beta": _pos, "subordinator": _obj(_SUBORDINATOR, ["kind", "family"]),
                "initial": {"enum": ["Zero", "Stationary"]}, "burn_in": _pos,
                "shared_jumps": {"type": "boolean"}}, ["beta", "subordinator"]),
    "TwoSidedStationaryOU": ({"beta": _pos, "subordinator": _obj(_SUBORDINATOR, ["kind", "family"]),
                              "burn_in": _pos, "shared_jumps": {"type": "boolean"}}, ["beta", "subordinator"]),
})

_INTEGRAND = _tagged("kind", {
    "Constant": ({"c": _num}, []),
    "Indicator": ({"a": {"type": "number", "minimum": 0}, "b": _pos}, ["a", "b"]),
    "Step": ({"breaks": {"type": "array", "items": _num, "minItems": 2},
              "values": {"type": "array", "items": _num, "minItems": 1}}, ["breaks", "values"]),
    "ExpDecay": ({"alpha": _pos, "horizon": _pos}, ["alpha"]),
})

_PARAMS = {
    "Simulate": ({"t": _pos}, []),
    "KgEval": ({"alpha": _pos, "beta": _pos, "tau": _pos, "integrand": _INTEGRAND, "t": _pos,
                "s": {"type": "number", "minimum": 0},
                "scheme": {"enum": ["SingularSafe", "DiagonalForm", "AbsContinuousForm", "ClosedForm"]}}, []),
    "Integrate": ({"integrand": _INTEGRAND, "t": _pos,
                   "method": {"enum": ["KgDeterministic", "SemimartingalePathwise"]}}, ["integrand"]),
    "VerifyOU": ({"alpha": _pos}, ["alpha"]),
    "Chaos": ({"quantity": {"enum": ["SecondChaos", "HalfSquare", "HalfSquareDirect"]},
               "integrand": _INTEGRAND, "t": _pos}, []),
    "Converge": ({"functional": {"enum": ["OuResidual", "Recomposition", "HalfSquare", "CrossOracle"]},
                  "n_values": {"type": "array", "items": {"enum": _POW2}, "minItems": 2, "uniqueItems": True},
                  "alpha": _pos, "integrand": _INTEGRAND}, ["functional", "n_values"]),
    "CheckIntegrability": ({"t": _pos}, []),
}

SCHEMA = {
    "type": "object",
    "additionalProperties": False,
    "required": ["experiment"],
    "properties": {
        "experiment": {"enum": list(KINDS)},
        "process": _obj({"kernel": _KERNEL, "volatility": _VOLATILITY, "driver": _DRIVER,
                         "weights": {"enum": ["auto", "point", "cell"]}}, ["kernel"]),
        "grid": _obj({"T": _pos, "n": {"enum": _POW2}}, ["T", "n"]),
        "n_paths": {"type": "integer", "minimum": 1},
        "base_seed": {"type": "integer", "minimum": 0},
        "workers": {"type": "integer", "minimum": 1},
        "params": {"type": "object"},
        "output": _obj({"dir": {"type": "string"}}),
    },
    "allOf": [
        {"if": {"properties": {"experiment": {"const": k}}},
         "then": {"properties": {"params": _obj(props, req)}, "required": ["params"] if req else []}}
        for k, (props, req) in _PARAMS.items()
    ] + [
        {"if": {"properties": {"experiment": {"enum": [k for k in KINDS if k != "KgEval"]}}},
         "then": {"required": ["process"]}},
        {"if": {"properties": {"experiment": {"enum": ["Simulate", "Integrate", "VerifyOU", "Chaos", "Converge"]}}},
         "then": {"required": ["grid"]}},
    ],
}

DEFAULTS = {"n_paths": 1000, "base_seed": 0, "workers": 1, "params": {}, "output": {"dir": "."}}


def _field(err):
    return "/".join(str(p) for p in err.absolute_path) or "<root>"


def validate_config(cfg):
    """Schema-check ``cfg``; raises :class:`ConfigError` naming the offending field."""
    validator = jsonschema.Draft202012Validator(SCHEMA)
    errors = sorted(validator.iter_errors(cfg), key=lambda e: (len(e.absolute_path), e.message))
    if errors:
        worst = jsonschema.exceptions.best_match(errors)
        raise ConfigError(f"config field {_field(worst)}: {worst.message}")
    return cfg


def load_config(source, **overrides):
    """Read, merge defaults and overrides into, and validate a config.

    ``source`` is a path, a JSON string or a dict.  ``None`` overrides are ignored.
    """
    if isinstance(source, dict):
        cfg = json.loads(json.dumps(source))
    else:
        text = source
        if not str(source).lstrip().startswith("{"):
            try:
                with open(source) as fh:
                    text = fh.read()
            except OSError as exc:
                raise ConfigError(f"cannot read config {source}: {exc}") from None
        try:
            cfg = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config line {exc.lineno} column {exc.colno}: {exc.msg}") from None
    if not isinstance(cfg, dict):
        raise ConfigError("config field <root>: expected a JSON object")
    for k, v in overrides.items():
        if v is None:
            continue
        if k == "experiment" and cfg.get("experiment", v) != v:
            raise ConfigError(f"config field experiment: {cfg['experiment']!r} does not match subcommand {v!r}")
        if k == "out":
            cfg.setdefault("output", {})["dir"] = v
        else:
            cfg[k] = v
    validate_config(cfg)
    for k, v in DEFAULTS.items():
        cfg.setdefault(k, json.loads(json.dumps(v)))
    return cfg


def canonical(cfg):
    return json.dumps(cfg, sort_keys=True, separators=(",", ":"))


# ---------------------------------------------------------------------------
# building objects


def integrand_from_config(block):
    kind = block["kind"]
    if kind == "Constant":
        return Constant(block.get("c", 1.0))
    if kind == "Indicator":
        return indicator(block["a"], block["b"])
    if kind == "Step":
        return StepFunction(np.array(block["breaks"], float), np.array(block["values"], float))
    return ExpDecay(block["alpha"], block.get("horizon"))


def process_from_config(block):
    kernel = kernel_from_config(block["kernel"])
    vol = volatility_from_config(block["volatility"]) if "volatility" in block else ConstantVol()
    drv = driver_from_config(block["driver"]) if "driver" in block else Brownian()
    return VmlvProcess(kernel, vol, drv, weights=block.get("weights", "auto"))


@dataclass
class Experiment:
    kind: str
    cfg: dict
    process: VmlvProcess | None = None
    grid: SimulationGrid | None = None
    params: dict = field(default_factory=dict)
    cache: dict = field(default_factory=dict)

    @property
    def t(self):
        return float(self.params.get("t", self.grid.T if self.grid else 1.0))


@lru_cache(maxsize=8)
def build(cfg_json):
    cfg = json.loads(cfg_json)
    proc = process_from_config(cfg["process"]) if "process" in cfg else None
    grid = SimulationGrid(cfg["grid"]["T"], cfg["grid"]["n"]) if "grid" in cfg else None
    return Experiment(cfg["experiment"], cfg, proc, grid, cfg.get("params", {}))


# ---------------------------------------------------------------------------
# per-path values


def _chaos_setup(exp):
    if "chaos" not in exp.cache:
        t = exp.t
        h = integrand_from_config(exp.params["integrand"]) if "integrand" in exp.params else Constant(1.0)
        kern = KtildeKernel(exp.process.kernel, h, t)
        J = exp.grid.node_index(t)
        exp.cache["chaos"] = (kern, pair_matrix(kern, exp.grid, J), trace_term(kern))
    return exp.cache["chaos"]


def _converge_errors(exp, path):
    p = exp.params
    fn = p["functional"]
    ns = sorted(p["n_values"], reverse=True)
    out = {}
    while True:
        n = path.grid.n
        if n in ns:
            if fn == "OuResidual":
                a = p.get("alpha", 1.0)
                out[n] = ou_residual(ou_solution(a, exp.process, path), path.X, a, path.grid.dt)
            elif fn == "Recomposition":
                out[n] = decompose(exp.process, path).residual
            elif fn == "HalfSquare":
                t = path.grid.T
                out[n] = abs(half_square_chaos(exp.process.kernel, path, t) - 0.5 * path.X[-1] ** 2)
            else:
                h = integrand_from_config(p["integrand"]) if "integrand" in p else ExpDecay(p.get("alpha", 1.0))
                t = path.grid.T
                out[n] = abs(
                    integrate_deterministic(h, exp.process, path, t).value
                    - integrate_semimartingale(h, exp.process, path, t).value
                )
        if n <= min(ns):
            break
        path = coarsen_path(exp.process, path, 2)
    return [out[n] for n in sorted(ns)]


def columns(exp):
    k = exp.kind
    if k == "VerifyOU":
        return ["residual", "residual_coarse"]
    if k == "Converge":
        return [f"error_n{n}" for n in sorted(exp.params["n_values"])]
    return ["value"]


def path_values(exp, indices, base_seed):
    """Rows of per-path values for path indices ``indices`` (one fixed chunk)."""
    seeds = [child_seed(base_seed, i) for i in indices]
    k, proc, grid = exp.kind, exp.process, exp.grid
    if k == "Simulate":
        X = simulate_batch(proc, grid, seeds)
        return X[:, grid.node_index(exp.t)][:, None]
    if k == "Converge":
        fine = SimulationGrid(grid.T, max(exp.params["n_values"]))
        return np.array([_converge_errors(exp, simulate(proc, fine, s)) for s in seeds])
    rows = []
    for s in seeds:
        path = simulate(proc, grid, s)
        if k == "Integrate":
            h = integrand_from_config(exp.params["integrand"])
            f = integrate_semimartingale if exp.params.get("method") == "SemimartingalePathwise" else integrate_deterministic
            rows.append([f(h, proc, path, exp.t).value])
        elif k == "VerifyOU":
            a = exp.params["alpha"]
            coarse = coarsen_path(proc, path, 2)
            rows.append([
                ou_residual(ou_solution(a, proc, path), path.X, a, grid.dt),
                ou_residual(ou_solution(a, proc, coarse), coarse.X, a, coarse.grid.dt),
            ])
        elif k == "Chaos":
            q = exp.params.get("quantity", "SecondChaos")
            if q == "SecondChaos":
                kern, G, tr = _chaos_setup(exp)
                rows.append([second_chaos_integral(kern, path, exp.t, G=G, trace=tr)])
            elif q == "HalfSquare":
                rows.append([half_square_chaos(proc.kernel, path, exp.t)])
            else:
                rows.append([0.5 * path.X[grid.node_index(exp.t)] ** 2])
    return np.array(rows, float)


def _chunk_task(cfg_json, start, stop, base_seed):
    return path_values(build(cfg_json), range(start, stop), base_seed)


def monte_carlo(cfg, n_paths=None, base_seed=None, workers=None):
    """Per-path values ``(n_paths, n_cols)`` in path-index order."""
    n_paths = int(cfg["n_paths"] if n_paths is None else n_paths)
    base_seed = int(cfg["base_seed"] if base_seed is None else base_seed)
    workers = int(cfg["workers"] if workers is None else workers)
    cfg_json = canonical(cfg)
    bounds = [(a, min(a + CHUNK, n_paths)) for a in range(0, n_paths, CHUNK)]
    if workers <= 1 or len(bounds) == 1:
        parts = [_chunk_task(cfg_json, a, b, base_seed) for a, b in bounds]
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            futs = [pool.submit(_chunk_task, cfg_json, a, b, base_seed) for a, b in bounds]
            parts = [f.result() for f in futs]
    return np.concatenate(parts, axis=0)


def summary_stats(values):
    v = np.asarray(values, float)
    n = v.size
    var = float(np.var(v, ddof=1)) if n > 1 else 0.0
    q = np.quantile(v, [0.05, 0.25, 0.5, 0.75, 0.95])
    return {
        "n": n,
        "mean": float(np.mean(v)),
        "var": var,
        "stderr": float(np.sqrt(var / n)),
        "quantiles": {k: float(x) for k, x in zip(("q05", "q25", "q50", "q75", "q95"), q)},
    }


def variance_stderr(values):
    """Standard error of the sample variance from the fourth central moment."""
    v = np.asarray(values, float)
    c = v - v.mean()
    m2, m4 = np.mean(c**2), np.mean(c**4)
    return float(np.sqrt(max(m4 - m2**2, 0.0) / v.size))


def convergence_table(n_values, errors):
    """Rows ``(n, error, order)`` with ``order = log2(err(n) / err(2n))``."""
    ns = sorted(n_values)
    errs = [float(e) for e in errors]
    rows = []
    for i, n in enumerate(ns):
        order = None
        if i + 1 < len(ns) and ns[i + 1] == 2 * n and errs[i + 1] > 0:
            order = float(np.log2(errs[i] / errs[i + 1]))
        rows.append((n, errs[i], order))
    return rows


def convergence_study(cfg, n_values=None):
    """Mean error per grid size over ``n_paths`` paths, refined pathwise from the finest grid."""
    cfg = json.loads(canonical(cfg))
    cfg["experiment"] = "Converge"
    if n_values is not None:
        cfg.setdefault("params", {})["n_values"] = list(n_values)
    validate_config(cfg)
    vals = monte_carlo(cfg)
    return convergence_table(cfg["params"]["n_values"], vals.mean(axis=0))


# ---------------------------------------------------------------------------
# running an experiment


@dataclass
class RunResult:
    header: list
    rows: list
    summary: dict
    manifest: dict


def _version():
    try:
        return metadata.version("volterra-lab")
    except metadata.PackageNotFoundError:
        return "0+unknown"


def _run_kg_eval(exp):
    p = exp.params
    if "beta" in p or exp.process is None:
        alpha, beta, tau = p.get("alpha", 1.0), p.get("beta", 1.0), p.get("tau", 1.0)
        ev = kg_apply(ExpShift(beta), ExpDecay(alpha), tau, 0.0)
        closed = float(kg_exp_closed(alpha, beta, tau))
        summary = {"value": ev.value, "closed_form": closed, "scheme": ev.scheme.value,
                   "err_estimate": ev.err_estimate, "alpha": alpha, "beta": beta, "tau": tau}
        return ["alpha", "beta", "tau", "value", "closed_form"], [[alpha, beta, tau, ev.value, closed]], summary, {
            "closed_form_rel_1e-8": abs(ev.value - closed) <= 1e-8 * max(abs(closed), np.exp(-min(alpha, beta) * tau))
        }
    h = integrand_from_config(p["integrand"]) if "integrand" in p else Constant(1.0)
    t, s = p.get("t", 1.0), p.get("s", 0.0)
    ev = kg_apply(exp.process.kernel, h, t, s, scheme=p.get("scheme", "SingularSafe"))
    return ["t", "s", "value", "err_estimate"], [[t, s, ev.value, ev.err_estimate]], ev.to_dict(), {}


def _run_integrability(exp):
    t = exp.t
    rep = exp.process.integrability(t)
    rows = [[c.name, c.value, c.finite] for c in rep.conditions]
    summary = {"t": t, "verdict": "finite" if rep.all_finite else "infinite",
               "conditions": {c.name: {"value": c.value, "finite": c.finite} for c in rep.conditions}}
    return ["condition", "value", "finite"], rows, summary, {}


def _mc_summary(exp, vals):
    k, p = exp.kind, exp.params
    summary = {"kind": k}
    crit = {}
    if k == "VerifyOU":
        summary["residual"] = summary_stats(vals[:, 0])
        summary["residual_coarse"] = summary_stats(vals[:, 1])
        summary["max_residual"] = float(vals[:, 0].max())
        ratio = float(vals[:, 1].mean() / vals[:, 0].mean())
        summary["refinement_ratio"] = ratio
        crit["residual_decreases"] = ratio > 1.0
        crit["ratio_in_[1.3,2.7]"] = 1.3 <= ratio <= 2.7
        return summary, crit
    st = summary_stats(vals[:, 0])
    summary.update(st)
    if k == "Simulate":
        try:
            oracle = variance_oracle(exp.process, exp.t)
        except Exception:
            oracle = None
        if oracle is not None:
            se_var = variance_stderr(vals[:, 0])
            summary["variance_oracle"] = oracle
            summary["variance_stderr"] = se_var
            crit["mean_within_3se_of_0"] = abs(st["mean"]) <= 3 * st["stderr"]
            crit["variance_within_3se"] = abs(st["var"] - oracle) <= 3 * se_var
    elif k == "Chaos":
        q = p.get("quantity", "SecondChaos")
        if q == "SecondChaos":
            expected = _chaos_setup(exp)[2]
            summary["trace_term"] = expected
        else:
            expected = 0.5 * exp.process.kernel.l2_norm_sq(exp.t)
            summary["half_l2_norm_sq"] = expected
        crit["mean_within_3se"] = abs(st["mean"] - expected) <= 3 * st["stderr"]
    return summary, crit


def run(cfg, write=True):
    """Execute the experiment in ``cfg`` and write results.csv, summary.json, manifest.json."""
    t0 = time.perf_counter()
    cfg = load_config(cfg)
    exp = build(canonical(cfg))
    k = exp.kind
    if k in ("Simulate", "Integrate", "VerifyOU", "Chaos", "Converge") and cfg["n_paths"] < 100:
        raise ConfigError("config field n_paths: Monte Carlo experiments need n_paths >= 100")
    if k == "KgEval":
        header, rows, summary, crit = _run_kg_eval(exp)
    elif k == "CheckIntegrability":
        header, rows, summary, crit = _run_integrability(exp)
    elif k == "Converge":
        vals = monte_carlo(cfg)
        table = convergence_table(exp.params["n_values"], vals.mean(axis=0))
        header = ["n", "error", "order"]
        rows = [list(r) for r in table]
        errs = [r[1] for r in table]
        summary = {"kind": k, "functional": exp.params["functional"], "table": rows}
        crit = {"errors_decrease": all(a > b for a, b in zip(errs, errs[1:]))}
    else:
        vals = monte_carlo(cfg)
        header = ["path_id"] + columns(exp)
        rows = [[i, *r] for i, r in enumerate(vals.tolist())]
        summary, crit = _mc_summary(exp, vals)
    manifest = {
        "config_hash": hashlib.sha256(canonical(cfg).encode()).hexdigest(),
        "version": _version(),
        "experiment": k,
        "wall_time_s": time.perf_counter() - t0,
        "seeds": {"base_seed": cfg["base_seed"], "n_paths": cfg["n_paths"],
                  "rule": "path i uses SeedSequence(base_seed, spawn_key=(i,))"},
        "workers": cfg["workers"],
        "criteria": crit,
    }
    result = RunResult(header, rows, summary, manifest)
    if write:
        write_outputs(result, cfg["output"]["dir"])
    return result


def _cell(x):
    if x is None:
        return ""
    if isinstance(x, (bool, np.bool_)):
        return str(bool(x)).lower()
    if isinstance(x, float):
        return repr(x)
    return str(x)


def results_csv(result):
    buf = io.StringIO()
    w = csv.writer(buf)
    w.writerow(result.header)
    for r in result.rows:
        w.writerow([_cell(x) for x in r])
    return buf.getvalue()


def write_outputs(result, out_dir):
    os.makedirs(out_dir, exist_ok=True)
    with open(os.path.join(out_dir, "results.csv"), "w", newline="") as fh:
        fh.write(results_csv(result))
    for name, obj in (("summary.json", result.summary), ("manifest.json", result.manifest)):
        with open(os.path.join(out_dir, name), "w") as fh:
            json.dump(obj, fh, indent=2, sort_keys=True, default=_json_default)
            fh.write("\n")


def _json_default(x):
    if isinstance(x, (np.bool_,)):
        return bool(x)
    if isinstance(x, np.generic):
        return x.item()
    raise TypeError(f"not JSON serialisable: {type(x).__name__}")


__all__ = [
    "CHUNK",
    "Experiment",
    "RunResult",
    "SCHEMA",
    "convergence_study",
    "convergence_table",
    "integrand_from_config",
    "load_config",
    "monte_carlo",
    "process_from_config",
    "run",
    "summary_stats",
    "validate_config",
    "write_outputs",
]
