"""Command-line interface: synthesize, simulate, demo.

Exit codes: 0 success, 2 invalid configuration, 3 synthesis failure,
4 failed verification certificate, 5 integration failure.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import os
import sys
import tempfile
import time

import numpy as np

from . import __version__
from .config import RunConfig, Tolerances, parse_config
from .dist_observer import ObserverDesign, synthesize_observer
from .dlqr import (
    BottomUpControl,
    TopDownResult,
    bottomup_controller_via_duality,
    topdown_blocks,
    topdown_truncate,
)
from .errors import (
    ConfigError,
    SimulationError,
    SynthesisError,
    VerificationError,
)
from .matops import AgentModel
from .mee_node import MeeWeights
from .graphs import cyclic_graph
from .netsim import SimulationTrace, convergence_metrics, simulate

EXIT_CONFIG = 2
EXIT_SYNTHESIS = 3
EXIT_VERIFICATION = 4
EXIT_INTEGRATION = 5

#: Reference design values for the built-in 5-vehicle demo, used only for
#: the printed deviation columns; they never gate the exit code.
DEMO_REFERENCE_GAIN = np.array([[2.6004], [22.8051]])
DEMO_REFERENCE_CASES = {5.0: (0.3446, 13.4006), 25.0: (1.8479, 13.3401)}


def _write_atomic(path: str, text: str) -> None:
    """Write via a temp file + rename so failures leave no partial output."""
    directory = os.path.dirname(os.path.abspath(path)) or "."
    os.makedirs(directory, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=directory, suffix=".tmp")
    try:
        with os.fdopen(fd, "w") as handle:
            handle.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _lists(mat: np.ndarray) -> list:
    return [[float(v) for v in row] for row in np.atleast_2d(mat)]


def _load_config(path: str) -> RunConfig:
    try:
        with open(path) as handle:
            data = json.load(handle)
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config {path} is not valid JSON: {exc}") from exc
    cfg = parse_config(data)
    if not cfg.graph.is_connected:
        print(
            f"warning: graph has {cfg.graph.num_components} components; "
            "relative-error coupling cannot mix disconnected components",
            file=sys.stderr,
        )
    return cfg


def _tolerances(args, base: Tolerances) -> Tolerances:
    overrides = {}
    for f in dataclasses.fields(Tolerances):
        value = getattr(args, f"tol_{f.name}", None)
        if value is not None:
            overrides[f.name] = value
    return dataclasses.replace(base, **overrides) if overrides else base


def _certificates_dict(design: ObserverDesign) -> dict:
    cert = design.certificate
    return {
        "a_err_abscissa": cert.a_err_abscissa,
        "a_err_hurwitz": cert.a_err_hurwitz,
        "per_mode_abscissas": list(cert.per_mode_abscissas),
        "mode_union_error": cert.mode_union_error,
        "lmi1_margins": [list(m) for m in cert.lmi1_margins],
        "lmi2_margins": [list(m) for m in cert.lmi2_margins],
        "w_min_eigs": list(cert.w_min_eigs),
        "chain_ok": cert.chain_ok,
        "passed": cert.passed,
        "failures": list(cert.failures),
    }


def _observer_report(design: ObserverDesign, timings: dict) -> dict:
    node = design.node
    return {
        "schema_version": 1,
        "tool": {"name": "distlqr", "version": __version__},
        "mode": "observer",
        "timings": timings,
        "design": {
            "gain_node": _lists(design.gain_original),
            "gain_node_hat": _lists(design.gain_hat),
            "phi": _lists(design.phi),
            "transform_output": _lists(node.normalized.transform),
            "transform_decouple": _lists(node.t_hat),
            "a_err": _lists(design.a_err),
            "output_gain": _lists(design.output_gain),
            "modes": [
                {
                    "eigenvalue": md.eigenvalue,
                    "multiplicity": md.multiplicity,
                    "optimum_trace": design.per_mode_optima[i],
                }
                for i, md in enumerate(design.modes)
            ],
        },
        "costs": {
            "gamma_hat": design.gamma_hat,
            "j_achieved": design.j_achieved,
            "sum_mode_optima": design.sum_mode_optima,
            "node_cost": node.cost_node,
            "node_cost_hat": node.cost_node_hat,
        },
        "certificates": _certificates_dict(design),
    }


def _topdown_report(result: TopDownResult, timings: dict) -> dict:
    return {
        "schema_version": 1,
        "tool": {"name": "distlqr", "version": __version__},
        "mode": "lqr-topdown",
        "timings": timings,
        "design": {
            "p_node": _lists(result.p_node),
            "p_coupling": _lists(result.p_coupling),
            "k_diag": _lists(result.k_diag),
            "k_offdiag": _lists(result.k_offdiag),
            "k_centralized": _lists(result.k_centralized),
            "k_truncated": _lists(result.k_truncated),
        },
        "certificates": {
            "network_residual": result.network_residual,
            "condition_ok": result.condition_ok,
            "closed_loop_abscissa": result.closed_loop_abscissa,
        },
    }


def _bottomup_report(ctrl: BottomUpControl, timings: dict) -> dict:
    report = _observer_report(ctrl.dual_design, timings)
    report["mode"] = "lqr-bottomup"
    report["design"] = {
        "k_node": _lists(ctrl.k_node),
        "phi": _lists(ctrl.phi),
        "k_dist": _lists(ctrl.k_dist),
        "dual_observer": report["design"],
    }
    report["costs"]["cost_bound"] = ctrl.cost_bound
    report["certificates"]["closed_loop_abscissa"] = ctrl.closed_loop_abscissa
    return report


def _synthesize(cfg: RunConfig, tol: Tolerances):
    if cfg.mode == "observer":
        return synthesize_observer(
            cfg.model, cfg.weights, cfg.graph,
            feas_tol=tol.lmi_feasibility,
            riccati_tol=tol.riccati_residual,
            chain_slack=tol.chain_slack,
            mode_union_tol=tol.mode_union,
            lyapunov_tol=tol.lyapunov_residual,
        )
    if cfg.mode == "lqr-topdown":
        result = topdown_blocks(cfg.model, cfg.weights, cfg.graph.n_agents)
        return topdown_truncate(result, cfg.graph)
    return bottomup_controller_via_duality(cfg.model, cfg.weights, cfg.graph)


def cmd_synthesize(args) -> int:
    cfg = _load_config(args.config)
    out_path = args.out or cfg.output.get("report")
    if not out_path:
        raise ConfigError("no output path: pass --out or set output.report")
    tol = _tolerances(args, cfg.tolerances)

    start = time.perf_counter()
    result = _synthesize(cfg, tol)
    timings = {"synthesis_s": time.perf_counter() - start}

    if isinstance(result, ObserverDesign):
        report = _observer_report(result, timings)
    elif isinstance(result, TopDownResult):
        report = _topdown_report(result, timings)
    else:
        report = _bottomup_report(result, timings)
    _write_atomic(out_path, json.dumps(report, indent=2) + "\n")
    print(f"report written to {out_path}")
    return 0


def _trace_csv(trace: SimulationTrace) -> str:
    n = trace.states.shape[2]
    cols = ([f"e{i + 1}" for i in range(n)]
            + [f"x{i + 1}" for i in range(n)]
            + [f"xe{i + 1}" for i in range(n)])
    lines = ["t,agent," + ",".join(cols)]
    fmt = "%.9g"
    for k, t in enumerate(trace.times):
        for a in range(trace.n_agents):
            values = np.concatenate(
                [trace.errors[k, a], trace.states[k, a], trace.estimates[k, a]]
            )
            lines.append(
                (fmt % t) + f",{a + 1}," + ",".join(fmt % v for v in values)
            )
    return "\n".join(lines) + "\n"


def cmd_simulate(args) -> int:
    cfg = _load_config(args.config)
    if cfg.mode != "observer":
        raise ConfigError("simulate requires mode 'observer'")
    if cfg.simulation is None:
        raise ConfigError("config has no simulation block")
    out_dir = args.out_dir or cfg.output.get("trace_dir")
    if not out_dir:
        raise ConfigError("no output dir: pass --out-dir or set output.trace_dir")
    os.makedirs(out_dir, exist_ok=True)
    tol = _tolerances(args, cfg.tolerances)
    sim = cfg.simulation

    signals = sim.signals
    if args.seed is not None and args.seed < 0:
        raise ConfigError(f"--seed must be non-negative, got {args.seed}")
    if args.seed is not None:
        signals = tuple(
            dataclasses.replace(s, seed=args.seed + i) if s.kind == "noise" else s
            for i, s in enumerate(signals)
        )

    csv_path = os.path.join(out_dir, "trace.csv")
    metrics_path = os.path.join(out_dir, "metrics.json")

    if sim.t_end < sim.dt:
        print("warning: zero-length horizon, writing empty trace", file=sys.stderr)
        n = cfg.model.n_states
        cols = ([f"e{i + 1}" for i in range(n)]
                + [f"x{i + 1}" for i in range(n)]
                + [f"xe{i + 1}" for i in range(n)])
        _write_atomic(csv_path, "t,agent," + ",".join(cols) + "\n")
        _write_atomic(metrics_path, json.dumps(
            {"warning": "zero-length horizon, no samples"}, indent=2) + "\n")
        return 0

    start = time.perf_counter()
    design = _synthesize(cfg, tol)
    t_synth = time.perf_counter() - start
    trace = simulate(design, signals=signals, x0=sim.x0, xe0=sim.xe0,
                     t_end=sim.t_end, dt=sim.dt)
    metrics = convergence_metrics(trace)
    metrics["timings"] = {
        "synthesis_s": t_synth,
        "simulation_s": time.perf_counter() - start - t_synth,
    }
    _write_atomic(csv_path, _trace_csv(trace))
    _write_atomic(metrics_path, json.dumps(metrics, indent=2) + "\n")
    print(f"trace written to {csv_path}")
    print(f"metrics written to {metrics_path}")
    return 0


def _deviation(computed: float, reference: float) -> str:
    if reference == 0.0:
        return "n/a"
    return f"{abs(computed - reference) / abs(reference) * 100.0:8.2f}%"


def demo_model() -> AgentModel:
    """Five-vehicle demo agent: lightly damped oscillator, position measured."""
    return AgentModel(
        A=np.array([[0.0, 1.0], [-1.0, -0.1]]),
        Bbar=np.array([[0.0], [1.0]]),
        C=np.array([[1.0, 0.0]]),
    )


def cmd_demo(args) -> int:
    model = demo_model()
    graph = cyclic_graph(5)
    q1, r = np.array([[10.0]]), np.array([[1.0]])
    tol = _tolerances(args, Tolerances())

    designs: dict[float, ObserverDesign] = {}
    for q2 in sorted(DEMO_REFERENCE_CASES):
        weights = MeeWeights(Q1=q1, Q2=np.array([[q2]]), R=r)
        designs[q2] = synthesize_observer(
            model, weights, graph,
            feas_tol=tol.lmi_feasibility,
            riccati_tol=tol.riccati_residual,
            chain_slack=tol.chain_slack,
            mode_union_tol=tol.mode_union,
            lyapunov_tol=tol.lyapunov_residual,
        )

    first = next(iter(designs.values()))
    gain = first.gain_original
    print("five-vehicle demo: cyclic network, Q1 = 10, R = 1")
    print()
    print("node observer gain          computed     reference   deviation")
    for i in range(gain.shape[0]):
        ref = DEMO_REFERENCE_GAIN[i, 0]
        print(f"  L[{i + 1}]                    {gain[i, 0]:10.4f}    "
              f"{ref:10.4f}  {_deviation(gain[i, 0], ref)}")
    print()
    header = (f"{'case':<10}{'phi':>10}{'phi ref':>10}{'dev':>10}"
              f"{'bound':>12}{'achieved':>12}{'mode sum':>12}"
              f"{'J ref':>10}{'dev':>10}")
    print(header)
    for q2, design in designs.items():
        phi_ref, cost_ref = DEMO_REFERENCE_CASES[q2]
        phi = float(design.phi[0, 0])
        print(f"Q2 = {q2:<5g}{phi:>10.4f}{phi_ref:>10.4f}"
              f"{_deviation(phi, phi_ref):>10}"
              f"{design.gamma_hat:>12.4f}{design.j_achieved:>12.4f}"
              f"{design.sum_mode_optima:>12.4f}{cost_ref:>10.4f}"
              f"{_deviation(design.gamma_hat, cost_ref):>10}")
    print()
    print("deviations are reported against the reference values; the design")
    print("is accepted on its own certificates, not on matching them.")

    # qualitative comparison: identical zero-mean initial estimate errors
    rng = np.random.Generator(np.random.Philox(7))
    xe0 = rng.standard_normal((5, 2))
    xe0 -= xe0.mean(axis=0)
    print()
    print("settling of the aggregate estimate error to 5 % (zero noise):")
    for q2, design in designs.items():
        trace = simulate(design, x0=np.zeros((5, 2)), xe0=xe0,
                         t_end=20.0, dt=1e-3)
        metrics = convergence_metrics(trace)
        settle = metrics["aggregate"]["settling_time"]
        print(f"  Q2 = {q2:<5g} settling time {settle:.3f} s")

    certs_ok = all(d.certificate.passed for d in designs.values())
    print()
    print(f"certificates: {'all passed' if certs_ok else 'FAILED'}")
    return 0 if certs_ok else EXIT_VERIFICATION


def _add_common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--seed", type=int, default=None,
                        help="override the seeds of seeded-noise signals")
    for f in dataclasses.fields(Tolerances):
        flag = "--tol-" + f.name.replace("_", "-")
        parser.add_argument(flag, type=float, default=None, dest=f"tol_{f.name}",
                            help=f"override tolerance {f.name} "
                                 f"(default {f.default:g})")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="distlqr",
        description="distributed LQR / minimum-energy observer synthesis",
    )
    parser.add_argument("--version", action="version",
                        version=f"distlqr {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p_syn = sub.add_parser("synthesize", help="run a synthesis config")
    p_syn.add_argument("--config", required=True)
    p_syn.add_argument("--out", default=None, help="report JSON path")
    _add_common(p_syn)
    p_syn.set_defaults(func=cmd_synthesize)

    p_sim = sub.add_parser("simulate", help="synthesize and simulate")
    p_sim.add_argument("--config", required=True)
    p_sim.add_argument("--out-dir", default=None, help="trace/metrics directory")
    _add_common(p_sim)
    p_sim.set_defaults(func=cmd_simulate)

    p_demo = sub.add_parser("demo", help="built-in five-vehicle example")
    _add_common(p_demo)
    p_demo.set_defaults(func=cmd_demo)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except SynthesisError as exc:
        print(f"synthesis error: {exc}", file=sys.stderr)
        return EXIT_SYNTHESIS
    except VerificationError as exc:
        print(f"verification error: {exc}", file=sys.stderr)
        return EXIT_VERIFICATION
    except SimulationError as exc:
        print(f"simulation error: {exc}", file=sys.stderr)
        return EXIT_INTEGRATION


if __name__ == "__main__":
    sys.exit(main())
