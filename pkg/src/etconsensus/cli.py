"""Command-line front end: ``etconsensus {run,check,list}``."""
from __future__ import annotations

import argparse
import json
import logging
import os
import sys

import numpy as np

from . import conditions
from .engine import SimulationTrace, Variant, simulate
from .errors import ConfigError, EventStorm, NonFinite
from .graph import laplacian, spectrum
from .lti import hinf_norm
from .metrics import summarize
from .scenarios import RunConfig, builtin_config, list_builtins, load_config, scenario_echo

log = logging.getLogger("etconsensus")

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_DIVERGED = 2
EXIT_EVENT_STORM = 3

TRACE_CHANNELS = {
    Variant.NOMINAL: ("e",),
    Variant.ADDITIVE: ("d", "y", "e"),
    Variant.TOPOLOGY: ("e",),
    Variant.DAC: ("d", "y", "w", "e"),
}


def condition_reports(cfg: RunConfig):
    """All applicable condition reports plus the resolved scalars they used."""
    sc = cfg.scenario
    spec = spectrum(laplacian(sc.graph))
    l2, lN = spec.lambda2, spec.lambdaN
    p = sc.trigger
    resolved = {"lambda2": l2, "lambdaN": lN}
    reports = [conditions.check_nominal(p.alpha, lN)]
    profile = None
    if sc.variant in (Variant.ADDITIVE, Variant.DAC):
        eta = cfg.eta
        if eta is None:
            eta = max(hinf_norm(b) for b in sc.agent_uncertainties)
            resolved["eta_source"] = "computed"
        resolved["eta"] = eta
        if sc.variant is Variant.ADDITIVE:
            reports.append(conditions.check_additive(p.alpha, sc.beta, eta, lN))
            profile = conditions.gain_profiles("additive", sc.beta, None, l2, lN, eigenvalues=spec.eigenvalues)
        else:
            reports.append(conditions.check_dac_consensus(p.alpha, sc.beta, sc.theta, eta, lN))
            reports.append(conditions.check_dac_performance(p.alpha, sc.beta, sc.theta, eta, l2, lN))
            profile = conditions.gain_profiles("dac", sc.beta, sc.theta, l2, lN, eigenvalues=spec.eigenvalues)
        resolved["gamma"] = conditions.robustness_gamma(eta, p.alpha, lN)
    elif sc.variant is Variant.TOPOLOGY:
        delta = cfg.delta
        if delta is None:
            delta = max(hinf_norm(b) for b in sc.edge_uncertainties)
            resolved["delta_source"] = "computed"
        resolved["delta"] = delta
        resolved["gamma"] = conditions.robustness_gamma(delta, p.alpha, lN)
        reports.append(conditions.check_topology(p.alpha, delta, l2, lN))
        profile = conditions.gain_profiles("topology", sc.beta, None, l2, lN, eigenvalues=spec.eigenvalues)
    if profile is not None:
        resolved["sup_mu_upper"] = profile.sup_mu
        if profile.sup_mu_consensus is not None:
            resolved["sup_mu_upper_consensus"] = profile.sup_mu_consensus
    return reports, resolved


def trace_table(trace: SimulationTrace):
    """Header and data matrix for trace.csv."""
    N = trace.scenario.n_agents
    cols = ["t"] + [f"x_{i + 1}" for i in range(N)] + [f"est_{i + 1}" for i in range(N)]
    blocks = [trace.times[None, :], trace.x, trace.estimates]
    for ch in TRACE_CHANNELS[trace.scenario.variant]:
        cols += [f"{ch}_{i + 1}" for i in range(N)]
        blocks.append(trace.aux[ch])
    return cols, np.vstack(blocks).T


def write_outputs(out_dir, trace: SimulationTrace, summary: dict, gnuplot=False):
    os.makedirs(out_dir, exist_ok=True)
    cols, data = trace_table(trace)
    np.savetxt(os.path.join(out_dir, "trace.csv"), data, fmt="%.17g", delimiter=",",
               header=",".join(cols), comments="")
    with open(os.path.join(out_dir, "events.csv"), "w", encoding="utf-8") as fh:
        fh.write("agent,time,f_value\n")
        for r in trace.records:
            fh.write(f"{r.agent + 1},{r.time:.17g},{r.f_value:.17g}\n")
    with open(os.path.join(out_dir, "summary.json"), "w", encoding="utf-8") as fh:
        json.dump(summary, fh, indent=2)
    if gnuplot:
        N = trace.scenario.n_agents
        plots = ", ".join(f"'trace.csv' using 1:{i + 2} with lines title 'x_{i + 1}'" for i in range(N))
        with open(os.path.join(out_dir, "plot.gp"), "w", encoding="utf-8") as fh:
            fh.write("set datafile separator ','\nset key autotitle columnhead\n"
                     f"set xlabel 't [s]'\nplot {plots}\npause -1\n"
                     "plot 'events.csv' using 2:1 with points pt 7 ps 0.3 title 'events'\npause -1\n")


def _resolve(args) -> RunConfig:
    overrides = {"seed": args.seed, "step": args.step, "horizon": args.horizon}
    if (args.config is None) == (args.builtin is None):
        raise ConfigError("give exactly one of --config or --builtin")
    if args.config is not None:
        return load_config(args.config, **overrides)
    return builtin_config(args.builtin, **overrides)


def _out_dir(args, cfg):
    if args.out:
        return args.out
    if cfg.outputs:
        return cfg.outputs
    return os.path.join("runs", cfg.scenario.name or cfg.scenario.variant.value)


def cmd_run(args) -> int:
    cfg = _resolve(args)
    out_dir = _out_dir(args, cfg)
    reports, resolved = condition_reports(cfg)
    summary = {"scenario": scenario_echo(cfg), "resolved": resolved,
               "conditions": [r.to_dict() for r in reports]}
    code = EXIT_OK
    try:
        trace = simulate(cfg.scenario, backend=args.backend)
        summary["diverged"] = False
    except NonFinite as exc:
        log.warning("run diverged: %s", exc)
        trace = exc.trace
        summary["diverged"] = True
        code = EXIT_DIVERGED
    except EventStorm as exc:
        log.error("event storm: %s", exc)
        trace = exc.trace
        summary["diverged"] = False
        summary["event_storm"] = True
        code = EXIT_EVENT_STORM
    summary["status"] = trace.status
    summary["metrics"] = summarize(trace).to_dict()
    write_outputs(out_dir, trace, summary, gnuplot=args.gnuplot)
    m = summary["metrics"]
    print(f"{cfg.scenario.name or cfg.scenario.variant.value}: status={trace.status} "
          f"t_min={m['t_min']} final_error={m['final_consensus_error']:.3g} events={sum(m['event_counts'])} "
          f"-> {out_dir}")
    return code


def cmd_check(args) -> int:
    cfg = _resolve(args)
    reports, resolved = condition_reports(cfg)
    summary = {"scenario": scenario_echo(cfg), "resolved": resolved,
               "conditions": [r.to_dict() for r in reports]}
    for r in reports:
        print(f"{r.name:16s} lhs={r.lhs:.6g} rhs={r.rhs:.6g} satisfied={r.satisfied}")
    if args.out:
        os.makedirs(args.out, exist_ok=True)
        with open(os.path.join(args.out, "summary.json"), "w", encoding="utf-8") as fh:
            json.dump(summary, fh, indent=2)
    return EXIT_OK


def cmd_list(args) -> int:
    for name, params in list_builtins():
        print(name + "  " + " ".join(f"{k}={v}" for k, v in params.items()))
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="etconsensus",
                                     description="Event-triggered consensus simulator and robustness checker.")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, helptext in (("run", "simulate a scenario and write trace/event/summary files"),
                           ("check", "evaluate the robustness conditions only")):
        p = sub.add_parser(name, help=helptext)
        p.add_argument("--config", metavar="PATH")
        p.add_argument("--builtin", metavar="NAME")
        p.add_argument("--out", metavar="DIR")
        p.add_argument("--seed", type=int)
        p.add_argument("--step", type=float, metavar="H")
        p.add_argument("--horizon", type=float, metavar="T")
        if name == "run":
            p.add_argument("--backend", choices=("cython", "python"))
            p.add_argument("--gnuplot", action="store_true", help="also write plot.gp")
    sub.add_parser("list", help="list built-in scenarios")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    handler = {"run": cmd_run, "check": cmd_check, "list": cmd_list}[args.command]
    try:
        return handler(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
