"""Command-line front end.

A run is described by a JSON document (``--config``) whose fields can be
overridden by flags::

    {
      "command": "analyze",
      "params": {"p_s": 0.8, "p_g": 0.3, "alpha": 0.25},
      "policy": {"kind": "threshold", "delta_T": 3},
      "topology": {"rho": [0.7, 0.7]},
      "sim": {"horizon_T": 10000, "replications": 400, "master_seed": 0},
      "sweep": {"axes": {"alpha": [0.05, 0.1]}, "simulate": false},
      "output": {"path": "out.json", "format": "json"}
    }

Exit codes: 0 success, 1 validation error, 2 acceptance bound exceeded
(``compare``), 3 solver non-convergence.
"""

from __future__ import annotations

import argparse
import csv
import io
import itertools
import json
import math
import sys
from dataclasses import asdict, dataclass, replace

import numpy as np

from . import analytic_singlehop as sh
from .cmdp import NonConvergenceError, StructureViolationError, extract_threshold, solve_cmdp
from .core import (
    MixedThreshold,
    MultiHopTopology,
    ParameterError,
    Pmf,
    RandomizedStationary,
    SystemParams,
    Tabular,
    Threshold,
    Uniform,
    mix_pmfs,
    pmf_mean,
    pmf_total_variation,
    uniform_period,
)
from .multihop import dest_mean, tau_normal_approx, tau_normal_pmf, tau_pmf_convolution, tau_pmf_negbin
from .simulator import SimConfig, simulate_multihop

COMMANDS = ("analyze", "simulate", "cmdp", "multihop", "sweep", "compare")
POLICY_KINDS = ("rs", "uniform", "threshold", "mixed", "optimal", "tabular")
# "threshold" as a family means the rate-optimal mixed threshold policy
FAMILIES = {"rs": "rs", "uniform": "uniform", "threshold": "optimal"}
SWEEP_AXES = ("alpha", "p_s", "p_g", "rho", "N", "delta_T", "D")
FORMATS = ("json", "csv")
SWEEP_COLUMNS = ("policy", "policy_param", "analytic_mean", "empirical_mean", "stderr", "tv_distance")
SIG_DIGITS = 12

EXIT_OK, EXIT_INVALID, EXIT_BOUND, EXIT_NONCONVERGED = 0, 1, 2, 3


class ConfigError(ValueError):
    def __init__(self, name, message):
        super().__init__(message)
        self.name = name


# --------------------------------------------------------------------------
# run specification

@dataclass(frozen=True)
class PolicyChoice:
    """Policy as written in a config; fields left None are derived from the
    system parameters when resolved."""

    kind: str = "rs"
    alpha: float | None = None
    D: int | None = None
    delta_T: int | None = None
    delta_T_star: int | None = None
    gamma: float | None = None
    mixing_mode: str = "choose-once"
    actions: tuple | None = None

    def resolve(self, params: SystemParams):
        k = self.kind
        if k == "rs":
            return RandomizedStationary(params.alpha if self.alpha is None else self.alpha)
        if k == "uniform":
            return Uniform(uniform_period(params.alpha) if self.D is None else self.D)
        if k == "threshold":
            if self.delta_T is None:
                raise ConfigError("policy.delta_T", "policy.delta_T is required for a threshold policy")
            return Threshold(self.delta_T)
        if k == "mixed":
            if self.delta_T_star is None or self.gamma is None:
                raise ConfigError("policy.delta_T_star", "mixed policy needs delta_T_star and gamma")
            return MixedThreshold(self.delta_T_star, self.gamma, self.mixing_mode)
        if k == "optimal":
            sol = sh.optimal_threshold(params)
            return MixedThreshold(sol.delta_T_star, sol.gamma, self.mixing_mode)
        if k == "tabular":
            return Tabular(self.actions or ())
        raise ConfigError("policy.kind", f"unknown policy kind {k!r}")


@dataclass(frozen=True)
class OutputSpec:
    path: str | None = None
    format: str = "json"


@dataclass(frozen=True)
class SweepSpec:
    axes: tuple = ()  # ((name, (v1, v2, ...)), ...)
    simulate: bool = False


@dataclass(frozen=True)
class RunSpec:
    command: str
    params: SystemParams
    policy: PolicyChoice = PolicyChoice()
    topology: MultiHopTopology | None = None
    sim: SimConfig = SimConfig()
    sweep: SweepSpec = SweepSpec()
    families: tuple = ("rs", "uniform", "threshold")
    output: OutputSpec = OutputSpec()
    tv_bound: float = 0.01
    delta_max: int | None = None
    target_mean: float | None = None


_TOP_KEYS = {
    "command", "params", "policy", "topology", "sim", "sweep", "families",
    "output", "tv_bound", "delta_max", "target_mean",
}
_PARAM_KEYS = {"p_s", "p_g", "alpha"}
_POLICY_KEYS = {"kind", "alpha", "D", "delta_T", "delta_T_star", "gamma", "mixing_mode", "actions"}
_TOPOLOGY_KEYS = {"rho"}
_SIM_KEYS = {"horizon_T", "replications", "master_seed", "warmup", "batch_size", "workers"}
_SWEEP_KEYS = {"axes", "simulate"}
_OUTPUT_KEYS = {"path", "format"}


def _strict(section, doc, allowed):
    if not isinstance(doc, dict):
        raise ConfigError(section, f"{section} must be an object")
    for key in doc:
        if key not in allowed:
            where = f"{section}.{key}" if section else key
            raise ConfigError(key, f"unknown key {key!r} (in {where})")
    return doc


def _typed(section, key, value, kind):
    name = f"{section}.{key}" if section else key
    if kind is int:
        if isinstance(value, bool) or not isinstance(value, int):
            raise ConfigError(name, f"{name} must be an integer, got {type(value).__name__}")
    elif kind is float:
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ConfigError(name, f"{name} must be a number, got {type(value).__name__}")
        value = float(value)
    elif kind is str:
        if not isinstance(value, str):
            raise ConfigError(name, f"{name} must be a string, got {type(value).__name__}")
    elif kind is bool:
        if not isinstance(value, bool):
            raise ConfigError(name, f"{name} must be true or false")
    return value


def _section(doc, section, allowed, types):
    body = _strict(section, doc.get(section, {}), allowed)
    return {k: (None if v is None else _typed(section, k, v, types[k])) for k, v in body.items()}


def spec_from_document(doc: dict) -> RunSpec:
    _strict("", doc, _TOP_KEYS)
    if "command" not in doc:
        raise ConfigError("command", "command is required")
    command = _typed("", "command", doc["command"], str)
    if command not in COMMANDS:
        raise ConfigError("command", f"command must be one of {COMMANDS}, got {command!r}")

    if "params" not in doc:
        raise ConfigError("params", "params is required")
    p = _section(doc, "params", _PARAM_KEYS, dict.fromkeys(_PARAM_KEYS, float))
    for req in ("p_s", "p_g"):
        if req not in p:
            raise ConfigError(f"params.{req}", f"params.{req} is required")
    try:
        params = SystemParams(**p)
    except ParameterError as exc:
        raise ConfigError(f"params.{exc.name}", f"params.{exc}") from None

    pol_types = {"kind": str, "alpha": float, "D": int, "delta_T": int, "delta_T_star": int,
                 "gamma": float, "mixing_mode": str, "actions": list}
    pol = _strict("policy", doc.get("policy", {}), _POLICY_KEYS)
    pol = {k: _typed("policy", k, v, pol_types[k]) if pol_types[k] is not list else v for k, v in pol.items()}
    if pol.get("kind", "rs") not in POLICY_KINDS:
        raise ConfigError("policy.kind", f"policy.kind must be one of {POLICY_KINDS}")
    if "actions" in pol:
        if not isinstance(pol["actions"], list):
            raise ConfigError("policy.actions", "policy.actions must be a list of 0/1")
        pol["actions"] = tuple(pol["actions"])
    policy = PolicyChoice(**pol)

    topology = None
    if doc.get("topology") is not None:
        t = _strict("topology", doc["topology"], _TOPOLOGY_KEYS)
        rho = t.get("rho", [])
        if not isinstance(rho, list):
            raise ConfigError("topology.rho", "topology.rho must be a list of probabilities")
        try:
            topology = MultiHopTopology(tuple(_typed("topology", "rho", r, float) for r in rho))
        except ParameterError as exc:
            raise ConfigError(f"topology.{exc.name}", f"topology.{exc}") from None

    s = _section(doc, "sim", _SIM_KEYS, dict.fromkeys(_SIM_KEYS, int))
    try:
        sim = SimConfig(**s)
    except ValueError as exc:
        raise ConfigError("sim", f"sim: {exc}") from None

    sw = _strict("sweep", doc.get("sweep", {}), _SWEEP_KEYS)
    axes = []
    raw_axes = _strict("sweep.axes", sw.get("axes", {}), set(SWEEP_AXES))
    for name, values in raw_axes.items():
        if not isinstance(values, list) or not values:
            raise ConfigError(f"sweep.axes.{name}", f"sweep axis {name!r} needs a nonempty list of values")
        kind = int if name in ("N", "delta_T", "D") else float
        values = tuple(_typed("sweep.axes", name, v, kind) for v in values)
        if any(b <= a for a, b in zip(values, values[1:])):
            raise ConfigError(f"sweep.axes.{name}", f"sweep axis {name!r} values must be strictly increasing")
        axes.append((name, values))
    sweep = SweepSpec(tuple(axes), _typed("sweep", "simulate", sw.get("simulate", False), bool))

    families = doc.get("families", ["rs", "uniform", "threshold"])
    if not isinstance(families, list) or any(f not in FAMILIES for f in families):
        raise ConfigError("families", f"families must be a list drawn from {tuple(FAMILIES)}")

    o = _section(doc, "output", _OUTPUT_KEYS, {"path": str, "format": str})
    if o.get("format", "json") not in FORMATS:
        raise ConfigError("output.format", f"output.format must be one of {FORMATS}")
    output = OutputSpec(**o)

    extras = {}
    for key, kind in (("tv_bound", float), ("delta_max", int), ("target_mean", float)):
        if doc.get(key) is not None:
            extras[key] = _typed("", key, doc[key], kind)

    return RunSpec(command, params, policy, topology, sim, sweep, tuple(families), output, **extras)


def parse_config(text: str) -> RunSpec:
    """Parse a JSON run document; unknown keys and mistyped values are rejected."""
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError("document", f"config is not valid JSON: {exc}") from None
    if not isinstance(doc, dict):
        raise ConfigError("document", "config must be a JSON object")
    return spec_from_document(doc)


def spec_to_document(spec: RunSpec) -> dict:
    pol = {k: v for k, v in asdict(spec.policy).items() if v is not None}
    if "actions" in pol:
        pol["actions"] = list(pol["actions"])
    doc = {
        "command": spec.command,
        "params": {"p_s": spec.params.p_s, "p_g": spec.params.p_g, "alpha": spec.params.alpha},
        "policy": pol,
        "sim": asdict(spec.sim),
        "sweep": {"axes": {n: list(v) for n, v in spec.sweep.axes}, "simulate": spec.sweep.simulate},
        "families": list(spec.families),
        "output": {k: v for k, v in asdict(spec.output).items() if v is not None},
        "tv_bound": spec.tv_bound,
    }
    if spec.topology is not None:
        doc["topology"] = {"rho": list(spec.topology.rho)}
    if spec.delta_max is not None:
        doc["delta_max"] = spec.delta_max
    if spec.target_mean is not None:
        doc["target_mean"] = spec.target_mean
    return doc


def dump_config(spec: RunSpec) -> str:
    return json.dumps(spec_to_document(spec), indent=2)


# --------------------------------------------------------------------------
# formatting

def _num(x):
    if isinstance(x, (bool, np.bool_)):
        return bool(x)
    if isinstance(x, (int, np.integer)):
        return int(x)
    if isinstance(x, (float, np.floating)):
        x = float(x)
        if not math.isfinite(x):
            return None
        return float(format(x, f".{SIG_DIGITS}g"))
    return x


def _clean(obj):
    if isinstance(obj, dict):
        return {k: _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [_clean(v) for v in obj.tolist()]
    return _num(obj)


def _cell(x):
    if x is None:
        return ""
    if isinstance(x, (float, np.floating)):
        return format(float(x), f".{SIG_DIGITS}g")
    return str(x)


def render(result: dict, fmt: str) -> str:
    """JSON renders the whole result; CSV renders its ``table``."""
    if fmt == "json":
        body = {k: v for k, v in result.items() if k != "table"}
        return json.dumps(_clean(body), indent=2) + "\n"
    columns, rows = result["table"]
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for row in rows:
        w.writerow([_cell(row.get(c)) for c in columns])
    return buf.getvalue()


# --------------------------------------------------------------------------
# commands

def _policy_dict(policy):
    return {"kind": type(policy).__name__, **asdict(policy)}


def analytic_law(params: SystemParams, policy) -> tuple:
    """(occupancy Pmf, long-run transmission rate) for a resolved policy."""
    p_s, p_g = params.p_s, params.p_g
    if isinstance(policy, RandomizedStationary):
        return sh.stationary_rs(replace(params, alpha=policy.alpha)), policy.alpha
    if isinstance(policy, Uniform):
        return sh.stationary_uniform(p_s, p_g, policy.D), 1.0 / policy.D
    if isinstance(policy, Threshold):
        return sh.stationary_threshold(p_s, p_g, policy.delta_T), sh.rate_of_threshold(p_s, p_g, policy.delta_T)
    if isinstance(policy, MixedThreshold):
        hi, g = policy.delta_T_star, policy.gamma
        pmf = mix_pmfs([g, 1 - g], [sh.stationary_threshold(p_s, p_g, hi), sh.stationary_threshold(p_s, p_g, hi - 1)])
        rate = g * sh.rate_of_threshold(p_s, p_g, hi) + (1 - g) * sh.rate_of_threshold(p_s, p_g, hi - 1)
        return pmf, rate
    if isinstance(policy, Tabular):
        shape = extract_threshold(policy.actions)
        if not shape.ok:
            raise ConfigError("policy.actions", "only threshold-shaped tables have a closed form")
        return analytic_law(params, Threshold(shape.threshold))
    raise ConfigError("policy", f"unsupported policy {policy!r}")


def analytic_mean(params: SystemParams, policy) -> float:
    """Closed-form average VAoI where one exists, else the PMF mean."""
    p_s, p_g = params.p_s, params.p_g
    if isinstance(policy, RandomizedStationary):
        return sh.mean_rs(replace(params, alpha=policy.alpha))
    if isinstance(policy, Threshold):
        return sh.mean_threshold(p_s, p_g, policy.delta_T)
    if isinstance(policy, MixedThreshold):
        hi, g = policy.delta_T_star, policy.gamma
        return g * sh.mean_threshold(p_s, p_g, hi) + (1 - g) * sh.mean_threshold(p_s, p_g, hi - 1)
    return pmf_mean(analytic_law(params, policy)[0])


def _table_from_pmf(pmf: Pmf):
    return ("n", "probability"), [{"n": n, "probability": float(p)} for n, p in enumerate(pmf.probs)]


def cmd_analyze(spec: RunSpec):
    policy = spec.policy.resolve(spec.params)
    pmf, rate = analytic_law(spec.params, policy)
    mean = analytic_mean(spec.params, policy)
    out = {
        "command": "analyze",
        "params": asdict(spec.params),
        "policy": _policy_dict(policy),
        "mean": mean,
        "mean_error_bound": pmf.mean_error,
        "rate": rate,
        "tail_bound": pmf.tail_bound,
        "pmf": pmf.probs,
        "table": _table_from_pmf(pmf),
    }
    if spec.policy.kind == "optimal":
        out["threshold_solution"] = asdict(sh.optimal_threshold(spec.params))
    if spec.topology is not None:
        out["dest_mean"] = dest_mean(mean, spec.topology, spec.params.p_g)
    status = EXIT_OK
    if spec.target_mean is not None:
        req = {}
        for fam in ("rs", "uniform", "threshold"):
            try:
                req[fam] = asdict(sh.required_rate(fam, spec.params.p_s, spec.params.p_g, spec.target_mean))
            except sh.InfeasibleTargetError as exc:
                req[fam] = {"family": fam, "infeasible": True, "floor": exc.floor, "message": str(exc)}
                status = EXIT_INVALID
        out["required_rate"] = req
    return out, status


def _sim_result_dict(res):
    return {
        "nodes": list(res.nodes),
        "mean": res.mean,
        "stderr": res.stderr,
        "rate": res.rate,
        "rate_stderr": res.rate_stderr,
        "replications": res.replications,
        "horizon_T": res.horizon_T,
        "master_seed": res.master_seed,
        "seed_scheme": res.seed_scheme,
        "pmfs": [p.probs for p in res.pmfs],
    }


def cmd_simulate(spec: RunSpec):
    policy = spec.policy.resolve(spec.params)
    topo = spec.topology or MultiHopTopology(())
    res = simulate_multihop(spec.params, topo, policy, spec.sim)
    rows = [
        {"node": node, "n": n, "probability": float(p)}
        for node, pmf in zip(res.nodes, res.pmfs)
        for n, p in enumerate(pmf.probs)
    ]
    out = {"command": "simulate", "params": asdict(spec.params), "policy": _policy_dict(policy),
           **_sim_result_dict(res), "table": (("node", "n", "probability"), rows)}
    return out, EXIT_OK


def cmd_cmdp(spec: RunSpec):
    sol = solve_cmdp(spec.params, spec.delta_max)
    ref = sh.optimal_threshold(spec.params)
    rows = [{"lambda": lam, "threshold": thr, "rate": rate} for lam, thr, rate in sol.trace]
    d = asdict(sol)
    d.pop("trace")
    out = {"command": "cmdp", "params": asdict(spec.params), **d,
           "closed_form": asdict(ref), "lambda_trace": rows,
           "table": (("lambda", "threshold", "rate"), rows)}
    return out, EXIT_OK


def _family_policy(family, params):
    return PolicyChoice(FAMILIES[family]).resolve(params)


def cmd_multihop(spec: RunSpec):
    topo = spec.topology
    if topo is None or topo.N < 1:
        raise ConfigError("topology.rho", "multihop needs a topology with at least one relay")
    conv = tau_pmf_convolution(topo)
    nb = tau_pmf_negbin(topo.N, topo.rho[0]) if len(set(topo.rho)) == 1 else None
    mean, var = tau_normal_approx(topo)
    support = conv.support
    normal = tau_normal_pmf(topo, support)
    rows = [
        {"tau": int(ell), "convolution": float(conv.prob(ell)),
         "negbin": None if nb is None else nb.prob(ell), "normal": float(q)}
        for ell, q in zip(support, normal)
    ]
    table_row = {}
    for fam in spec.families:
        m = analytic_mean(spec.params, _family_policy(fam, spec.params))
        table_row[fam] = {"node1_mean": m, "dest_mean": dest_mean(m, topo, spec.params.p_g)}
    out = {
        "command": "multihop",
        "params": asdict(spec.params),
        "rho": list(topo.rho),
        "tau_mean": mean,
        "tau_variance": var,
        "negbin_available": nb is not None,
        "tv_negbin_normal": None if nb is None else 0.5 * float(np.abs(nb.pmf.padded(len(normal))[: len(normal)] - normal).sum()),
        "policy_means": table_row,
        "tau": rows,
        "table": (("tau", "convolution", "negbin", "normal"), rows),
    }
    return out, EXIT_OK


def _evaluate_point(params, topology, policy_choice, family_label, sim, simulate):
    policy = policy_choice.resolve(params)
    pmf, _ = analytic_law(params, policy)
    analytic = analytic_mean(params, policy)
    if topology is not None and topology.N:
        analytic = dest_mean(analytic, topology, params.p_g)
    if isinstance(policy, Uniform):
        pparam = policy.D
    elif isinstance(policy, MixedThreshold):
        pparam = policy.delta_T_star
    elif isinstance(policy, Threshold):
        pparam = policy.delta_T
    else:
        pparam = policy.alpha
    row = {"policy": family_label, "policy_param": pparam, "analytic_mean": analytic,
           "empirical_mean": None, "stderr": None, "tv_distance": None}
    if simulate:
        res = simulate_multihop(params, topology or MultiHopTopology(()), policy, sim)
        dest = len(res.pmfs)
        row["empirical_mean"] = res.node_mean(dest)
        row["stderr"] = res.node_stderr(dest)
        if dest == 1:
            row["tv_distance"] = pmf_total_variation(pmf, res.pmf(1))
    return row


def cmd_sweep(spec: RunSpec):
    if not spec.sweep.axes:
        raise ConfigError("sweep.axes", "sweep needs at least one axis")
    names = [n for n, _ in spec.sweep.axes]
    rows = []
    for combo in itertools.product(*(v for _, v in spec.sweep.axes)):
        point = dict(zip(names, combo))
        try:
            params = replace(spec.params, **{k: point[k] for k in ("alpha", "p_s", "p_g") if k in point})
        except ParameterError as exc:
            raise ConfigError(f"sweep.axes.{exc.name}", str(exc)) from None
        topo = spec.topology
        if "N" in point or "rho" in point:
            base = spec.topology.rho[0] if spec.topology and spec.topology.N else 1.0
            N = point.get("N", spec.topology.N if spec.topology else 0)
            topo = MultiHopTopology.uniform(N, point.get("rho", base))
        if "delta_T" in point or "D" in point:
            choices = []
            if "delta_T" in point:
                choices.append(("threshold", PolicyChoice("threshold", delta_T=point["delta_T"])))
            if "D" in point:
                choices.append(("uniform", PolicyChoice("uniform", D=point["D"])))
        else:
            choices = [(fam, PolicyChoice(FAMILIES[fam])) for fam in spec.families]
        for label, choice in choices:
            row = dict(point)
            row.update(_evaluate_point(params, topo, choice, label, spec.sim, spec.sweep.simulate))
            rows.append(row)
    columns = tuple(names) + SWEEP_COLUMNS
    out = {"command": "sweep", "columns": list(columns), "rows": rows, "table": (columns, rows)}
    return out, EXIT_OK


def cmd_compare(spec: RunSpec):
    rows = []
    worst = 0.0
    for fam in spec.families:
        policy = _family_policy(fam, spec.params)
        pmf, rate = analytic_law(spec.params, policy)
        mean = analytic_mean(spec.params, policy)
        res = simulate_multihop(spec.params, spec.topology or MultiHopTopology(()), policy, spec.sim)
        tv = pmf_total_variation(pmf, res.pmf(1))
        worst = max(worst, tv)
        row = {
            "policy": fam,
            "analytic_mean": mean,
            "empirical_mean": res.node_mean(1),
            "mean_delta": res.node_mean(1) - mean,
            "stderr": res.node_stderr(1),
            "tv_distance": tv,
            "analytic_rate": rate,
            "empirical_rate": res.rate,
        }
        if spec.topology is not None and spec.topology.N:
            d = dest_mean(mean, spec.topology, spec.params.p_g)
            row["analytic_dest_mean"] = d
            row["empirical_dest_mean"] = res.node_mean(len(res.pmfs))
        rows.append(row)
    columns = ("policy", "analytic_mean", "empirical_mean", "mean_delta", "stderr", "tv_distance",
               "analytic_rate", "empirical_rate")
    if spec.topology is not None and spec.topology.N:
        columns += ("analytic_dest_mean", "empirical_dest_mean")
    passed = worst <= spec.tv_bound
    out = {"command": "compare", "tv_bound": spec.tv_bound, "passed": passed, "rows": rows,
           "table": (columns, rows)}
    return out, EXIT_OK if passed else EXIT_BOUND


HANDLERS = {
    "analyze": cmd_analyze,
    "simulate": cmd_simulate,
    "cmdp": cmd_cmdp,
    "multihop": cmd_multihop,
    "sweep": cmd_sweep,
    "compare": cmd_compare,
}


def run(spec: RunSpec) -> tuple:
    """Execute ``spec``; returns (result dict, exit status)."""
    return HANDLERS[spec.command](spec)


# --------------------------------------------------------------------------
# argv handling

def build_parser():
    p = argparse.ArgumentParser(prog="vaoi", description="Version Age of Information analysis and simulation")
    p.add_argument("--command", choices=COMMANDS)
    p.add_argument("--config", help="JSON run document")
    p.add_argument("--p-s", type=float, dest="p_s")
    p.add_argument("--p-g", type=float, dest="p_g")
    p.add_argument("--alpha", type=float)
    p.add_argument("--policy", choices=POLICY_KINDS)
    p.add_argument("--threshold", type=int, help="delta_T (threshold) or delta_T_star (mixed)")
    p.add_argument("--gamma", type=float, help="mixing probability for --policy mixed")
    p.add_argument("--period", type=int, help="uniform period D")
    p.add_argument("--rho", help="comma-separated relay success probabilities")
    p.add_argument("--horizon", type=int)
    p.add_argument("--reps", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--sweep-axis", choices=SWEEP_AXES)
    p.add_argument("--sweep-values", help="comma-separated grid for --sweep-axis")
    p.add_argument("--simulate", action="store_true", help="add Monte Carlo columns to a sweep")
    p.add_argument("--tv-bound", type=float)
    p.add_argument("--delta-max", type=int)
    p.add_argument("--target-mean", type=float)
    p.add_argument("--out")
    p.add_argument("--format", choices=FORMATS)
    return p


def _floats(text, name):
    try:
        return [float(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise ConfigError(name, f"{name} must be a comma-separated list of numbers") from None


def document_from_args(args) -> dict:
    if args.config:
        with open(args.config) as fh:
            try:
                doc = json.load(fh)
            except json.JSONDecodeError as exc:
                raise ConfigError("config", f"{args.config}: invalid JSON: {exc}") from None
        if not isinstance(doc, dict):
            raise ConfigError("config", "config must be a JSON object")
    else:
        doc = {}
    if args.command:
        doc["command"] = args.command
    params = dict(doc.get("params", {}))
    for key in ("p_s", "p_g", "alpha"):
        if getattr(args, key) is not None:
            params[key] = getattr(args, key)
    if params or "params" in doc:
        doc["params"] = params
    policy = dict(doc.get("policy", {}))
    if args.policy:
        policy = {"kind": args.policy}
    if args.threshold is not None:
        policy["delta_T_star" if policy.get("kind") == "mixed" else "delta_T"] = args.threshold
    if args.gamma is not None:
        policy["gamma"] = args.gamma
    if args.period is not None:
        policy["D"] = args.period
    if policy:
        doc["policy"] = policy
    if args.rho is not None:
        doc["topology"] = {"rho": _floats(args.rho, "rho")}
    sim = dict(doc.get("sim", {}))
    for flag, key in (("horizon", "horizon_T"), ("reps", "replications"), ("seed", "master_seed")):
        if getattr(args, flag) is not None:
            sim[key] = getattr(args, flag)
    if sim:
        doc["sim"] = sim
    if args.sweep_axis:
        if not args.sweep_values:
            raise ConfigError("sweep-values", "--sweep-axis needs --sweep-values")
        vals = _floats(args.sweep_values, "sweep-values")
        if args.sweep_axis in ("N", "delta_T", "D"):
            vals = [int(v) for v in vals]
        sweep = dict(doc.get("sweep", {}))
        sweep["axes"] = {args.sweep_axis: vals}
        doc["sweep"] = sweep
    if args.simulate:
        doc.setdefault("sweep", {})["simulate"] = True
    for flag in ("tv_bound", "delta_max", "target_mean"):
        if getattr(args, flag) is not None:
            doc[flag] = getattr(args, flag)
    output = dict(doc.get("output", {}))
    if args.out is not None:
        output["path"] = args.out
    if args.format is not None:
        output["format"] = args.format
    if output:
        doc["output"] = output
    return doc


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        spec = spec_from_document(document_from_args(args))
        result, status = run(spec)
    except (ConfigError, ParameterError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except (NonConvergenceError, StructureViolationError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NONCONVERGED

    text = render(result, spec.output.format)
    if spec.output.path:
        with open(spec.output.path, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    if status == EXIT_BOUND:
        print(f"error: TV distance above bound {spec.tv_bound}", file=sys.stderr)
    elif status == EXIT_INVALID and "required_rate" in result:
        print("error: target mean is infeasible for at least one policy family", file=sys.stderr)
    return status


if __name__ == "__main__":
    sys.exit(main())
