"""JSON run configurations and the built-in six-agent scenarios.

A configuration is a JSON object with the top-level keys::

    variant        "nominal" | "additive" | "topology" | "dac"
    graph          {"nodes": N, "edges": [[i, j, weight], ...]}   (0-based)
    trigger        {"alpha": .., "mu": .., "nu": ..}
    gains          {"beta": .., "theta": ..}                      (theta: dac only)
    uncertainties  {"agents": [...], "edges": [...]}
    references     [[{"amplitude", "kind", "frequency", "phase", "decay"}, ...], ...]
    x0, w0         initial states (w0 optional, dac only)
    horizon, step  seconds
    seed           integer used for generated uncertainty blocks
    decimation     trace down-sampling factor (optional, default 10)
    outputs        output directory (optional)

An uncertainty list entry is either an explicit block
``{"A": .., "B": .., "C": .., "D": ..}`` or ``{"random": {"order": k,
"bound": b}}``, generated from ``seed * 1000 + index``.
"""
from __future__ import annotations

import copy
import json
from dataclasses import dataclass
from typing import Optional

from .engine import DEFAULT_STEP, ReferenceSignal, ReferenceTerm, Scenario, Variant
from .errors import ConfigError, GraphError
from .graph import DEMO_GRAPH, WeightedGraph
from .lti import DEMO_AGENT_BLOCKS, DEMO_EDGE_BOUND, DEMO_ETA, StateSpaceSystem, random_norm_bounded
from .triggering import TriggerParams

TOP_LEVEL_KEYS = {"variant", "graph", "trigger", "gains", "uncertainties", "references", "x0", "w0",
                  "horizon", "step", "seed", "decimation", "outputs", "eta", "delta", "name"}
DEFAULT_X0 = [1.0, -2.0, 3.0, -1.0, 2.0, -3.0]
DEFAULT_DECIMATION = 10


@dataclass
class RunConfig:
    scenario: Scenario
    seed: int
    outputs: Optional[str]
    eta: Optional[float]
    delta: Optional[float]
    document: dict

    @property
    def decimation(self) -> int:
        return self.scenario.decimation


def _require(doc, key, where=None):
    if key not in doc:
        raise ConfigError("missing required key", f"{where}.{key}" if where else key)
    return doc[key]


def _number(value, field, positive=False, integer=False):
    ok = isinstance(value, (int, float)) and not isinstance(value, bool)
    if integer:
        ok = isinstance(value, int) and not isinstance(value, bool)
    if not ok:
        raise ConfigError(f"expected a number, got {value!r}", field)
    if positive and not value > 0:
        raise ConfigError(f"must be positive, got {value!r}", field)
    return value


def _vector(value, field):
    if not isinstance(value, list):
        raise ConfigError("expected a list of numbers", field)
    return [float(_number(v, f"{field}[{k}]")) for k, v in enumerate(value)]


def _parse_graph(doc):
    g = _require(doc, "graph")
    if not isinstance(g, dict):
        raise ConfigError("expected an object with 'nodes' and 'edges'", "graph")
    n = _number(_require(g, "nodes", "graph"), "graph.nodes", positive=True, integer=True)
    edges = _require(g, "edges", "graph")
    if not isinstance(edges, list):
        raise ConfigError("expected a list of [i, j, weight]", "graph.edges")
    try:
        return WeightedGraph(n, tuple(tuple(e) for e in edges))
    except (GraphError, TypeError) as exc:
        raise ConfigError(str(exc), "graph.edges") from None


def _parse_trigger(doc):
    t = _require(doc, "trigger")
    if not isinstance(t, dict):
        raise ConfigError("expected an object", "trigger")
    vals = {}
    for k in ("alpha", "mu", "nu"):
        vals[k] = _number(_require(t, k, "trigger"), f"trigger.{k}", positive=True)
    return TriggerParams(**vals)


def _parse_blocks(entries, field, seed):
    if not isinstance(entries, list):
        raise ConfigError("expected a list of blocks", field)
    out = []
    for k, e in enumerate(entries):
        where = f"{field}[{k}]"
        if not isinstance(e, dict):
            raise ConfigError("expected an object", where)
        if "random" in e:
            spec = e["random"]
            order = _number(_require(spec, "order", where + ".random"), where + ".random.order",
                            positive=True, integer=True)
            bound = _number(_require(spec, "bound", where + ".random"), where + ".random.bound", positive=True)
            out.append(random_norm_bounded(seed * 1000 + k, order, bound))
        else:
            try:
                out.append(StateSpaceSystem.from_dict(e))
            except ValueError as exc:
                raise ConfigError(str(exc), where) from None
    return out


def _parse_references(entries):
    if not isinstance(entries, list):
        raise ConfigError("expected one list of terms per agent", "references")
    refs = []
    for i, terms in enumerate(entries):
        if not isinstance(terms, list):
            raise ConfigError("expected a list of terms", f"references[{i}]")
        parsed = []
        for k, t in enumerate(terms):
            where = f"references[{i}][{k}]"
            try:
                parsed.append(ReferenceTerm(
                    float(_number(_require(t, "amplitude", where), where + ".amplitude")),
                    _require(t, "kind", where),
                    float(_number(_require(t, "frequency", where), where + ".frequency")),
                    float(_number(t.get("phase", 0.0), where + ".phase")),
                    float(_number(t.get("decay", 0.0), where + ".decay")),
                ))
            except ValueError as exc:
                if isinstance(exc, ConfigError):
                    raise
                raise ConfigError(str(exc), where) from None
        refs.append(ReferenceSignal(tuple(parsed)))
    return refs


def parse_config(doc: dict, seed=None, step=None, horizon=None, outputs=None) -> RunConfig:
    """Validate a configuration document; keyword arguments override its values."""
    if not isinstance(doc, dict):
        raise ConfigError("configuration must be a JSON object")
    doc = copy.deepcopy(doc)
    unknown = sorted(set(doc) - TOP_LEVEL_KEYS)
    if unknown:
        raise ConfigError(f"unknown key(s) {unknown}", unknown[0])
    if seed is not None:
        doc["seed"] = seed
    if step is not None:
        doc["step"] = step
    if horizon is not None:
        doc["horizon"] = horizon
    if outputs is not None:
        doc["outputs"] = outputs

    try:
        variant = Variant(_require(doc, "variant"))
    except ValueError:
        raise ConfigError(f"must be one of {[v.value for v in Variant]}", "variant") from None
    seed_val = _number(doc.get("seed", 0), "seed", integer=True)
    graph = _parse_graph(doc)
    trigger = _parse_trigger(doc)
    gains = _require(doc, "gains")
    if not isinstance(gains, dict):
        raise ConfigError("expected an object", "gains")
    beta = _number(_require(gains, "beta", "gains"), "gains.beta", positive=True)
    theta = gains.get("theta")
    if theta is not None:
        theta = _number(theta, "gains.theta", positive=True)

    unc = doc.get("uncertainties") or {}
    if not isinstance(unc, dict):
        raise ConfigError("expected an object", "uncertainties")
    agents = _parse_blocks(unc["agents"], "uncertainties.agents", seed_val) if "agents" in unc else None
    edges = _parse_blocks(unc["edges"], "uncertainties.edges", seed_val) if "edges" in unc else None
    refs = _parse_references(doc["references"]) if doc.get("references") is not None else None
    x0 = _vector(doc.get("x0", DEFAULT_X0), "x0")
    w0 = _vector(doc["w0"], "w0") if doc.get("w0") is not None else None
    horizon_val = _number(_require(doc, "horizon"), "horizon", positive=True)
    step_val = _number(doc.get("step", DEFAULT_STEP), "step", positive=True)
    dec = _number(doc.get("decimation", DEFAULT_DECIMATION), "decimation", positive=True, integer=True)
    eta = doc.get("eta")
    delta = doc.get("delta")
    if eta is not None:
        _number(eta, "eta", positive=True)
    if delta is not None:
        _number(delta, "delta", positive=True)

    scenario = Scenario(
        variant=variant, graph=graph, trigger=trigger, beta=float(beta),
        theta=None if theta is None else float(theta), agent_uncertainties=agents,
        edge_uncertainties=edges, references=refs, x0=x0, w0=w0, horizon=float(horizon_val),
        step=float(step_val), decimation=int(dec), name=str(doc.get("name", "")),
    )
    return RunConfig(scenario, int(seed_val), doc.get("outputs"), eta, delta, doc)


def load_config(path, **overrides) -> RunConfig:
    """Read and validate a JSON configuration file."""
    try:
        with open(path, encoding="utf-8") as fh:
            doc = json.load(fh)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"invalid JSON at line {exc.lineno}, column {exc.colno}: {exc.msg}") from None
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc.strerror}") from None
    return parse_config(doc, **overrides)


def scenario_echo(cfg: RunConfig) -> dict:
    """Fully resolved configuration: generated blocks written out explicitly.

    Parsing the echo again reproduces the same scenario bit for bit.
    """
    sc = cfg.scenario
    doc = {
        "name": sc.name,
        "variant": sc.variant.value,
        "graph": {"nodes": sc.graph.node_count, "edges": [list(e) for e in sc.graph.edges]},
        "trigger": {"alpha": sc.trigger.alpha, "mu": sc.trigger.mu, "nu": sc.trigger.nu},
        "gains": {"beta": sc.beta} if sc.theta is None else {"beta": sc.beta, "theta": sc.theta},
        "x0": sc.x0.tolist(),
        "horizon": sc.horizon,
        "step": sc.step,
        "seed": cfg.seed,
        "decimation": sc.decimation,
    }
    unc = {}
    if sc.agent_uncertainties is not None:
        unc["agents"] = [b.to_dict() for b in sc.agent_uncertainties]
    if sc.edge_uncertainties is not None:
        unc["edges"] = [b.to_dict() for b in sc.edge_uncertainties]
    if unc:
        doc["uncertainties"] = unc
    if sc.references is not None:
        doc["references"] = [
            [{"amplitude": t.amplitude, "kind": t.kind, "frequency": t.frequency, "phase": t.phase,
              "decay": t.decay} for t in ref.terms]
            for ref in sc.references
        ]
    if sc.w0 is not None:
        doc["w0"] = sc.w0.tolist()
    if cfg.eta is not None:
        doc["eta"] = cfg.eta
    if cfg.delta is not None:
        doc["delta"] = cfg.delta
    return doc


# ---- built-in scenarios ----------------------------------------------------

def _graph_doc():
    return {"nodes": DEMO_GRAPH.node_count, "edges": [list(e) for e in DEMO_GRAPH.edges]}


def _agents_doc():
    return [b.to_dict() for b in DEMO_AGENT_BLOCKS]


DAC_REFERENCES = [
    [{"amplitude": 6.1, "kind": "sin", "frequency": 0.02}],
    [{"amplitude": 19.1, "kind": "cos", "frequency": 0.02}],
    [{"amplitude": 4.8, "kind": "cos", "frequency": 0.07, "phase": 8.0}],
    [{"amplitude": 2.2, "kind": "sin", "frequency": 0.06}],
    [{"amplitude": 1.9, "kind": "cos", "frequency": 0.041, "decay": 0.09}],
    [{"amplitude": 2.5, "kind": "sin", "frequency": 0.05}],
]


def _additive(beta, horizon, name):
    return {
        "name": name, "variant": "additive", "graph": _graph_doc(),
        "trigger": {"alpha": 0.02, "mu": 0.1, "nu": 5.0}, "gains": {"beta": beta},
        "uncertainties": {"agents": _agents_doc()}, "x0": list(DEFAULT_X0),
        "horizon": horizon, "step": DEFAULT_STEP, "seed": 0, "eta": DEMO_ETA,
    }


def _dac_initial_state():
    refs = _parse_references(DAC_REFERENCES)
    return [float(r.value(0.0)) for r in refs]


BUILTINS = {
    "nominal": lambda: {
        "name": "nominal", "variant": "nominal", "graph": _graph_doc(),
        "trigger": {"alpha": 0.02, "mu": 0.1, "nu": 5.0}, "gains": {"beta": 0.2},
        "x0": list(DEFAULT_X0), "horizon": 40.0, "step": DEFAULT_STEP, "seed": 0,
    },
    "additive_beta02": lambda: _additive(0.2, 40.0, "additive_beta02"),
    "additive_beta01": lambda: _additive(0.1, 60.0, "additive_beta01"),
    "additive_beta12": lambda: _additive(1.2, 40.0, "additive_beta12"),
    "topology": lambda: {
        "name": "topology", "variant": "topology", "graph": _graph_doc(),
        "trigger": {"alpha": 0.002, "mu": 0.1, "nu": 5.0}, "gains": {"beta": 0.08},
        "uncertainties": {"edges": [{"random": {"order": 2, "bound": DEMO_EDGE_BOUND}}
                                    for _ in DEMO_GRAPH.edges]},
        "x0": list(DEFAULT_X0), "horizon": 100.0, "step": DEFAULT_STEP, "seed": 1,
        "delta": DEMO_EDGE_BOUND,
    },
    "dac": lambda: {
        "name": "dac", "variant": "dac", "graph": _graph_doc(),
        "trigger": {"alpha": 0.02, "mu": 0.1, "nu": 5.0}, "gains": {"beta": 1.2, "theta": 0.25},
        "uncertainties": {"agents": _agents_doc()}, "references": copy.deepcopy(DAC_REFERENCES),
        # start on the references so the conserved sum of x - r is zero
        "x0": _dac_initial_state(), "horizon": 200.0, "step": DEFAULT_STEP, "seed": 0, "eta": DEMO_ETA,
    },
}


def builtin_document(name) -> dict:
    try:
        return BUILTINS[name]()
    except KeyError:
        raise ConfigError(f"unknown builtin {name!r}; available: {', '.join(BUILTINS)}", "builtin") from None


def builtin_config(name, **overrides) -> RunConfig:
    return parse_config(builtin_document(name), **overrides)


def list_builtins():
    """``[(name, parameter summary), ...]`` in a fixed order."""
    out = []
    for name in BUILTINS:
        doc = BUILTINS[name]()
        params = {"variant": doc["variant"], **doc["trigger"], **doc["gains"], "horizon": doc["horizon"]}
        for k in ("eta", "delta"):
            if k in doc:
                params[k] = doc[k]
        out.append((name, params))
    return out


def dumps(doc) -> str:
    return json.dumps(doc, indent=2, sort_keys=False)
