"""Run configuration: JSON schema, parsing, serialization, tolerances.

Configs are JSON documents with ``schema_version`` 1 and matrices as
row-major nested arrays. The same document drives synthesis and
simulation; see the README for a complete example.
"""

from __future__ import annotations

from dataclasses import dataclass, field, fields
from typing import Any

import jsonschema
import numpy as np

from .errors import ConfigError
from .graphs import GraphTopology, build_graph, cyclic_graph
from .matops import AgentModel
from .mee_node import MeeWeights
from .dlqr import LqrWeights
from .netsim import SIGNAL_KINDS, SIGNAL_TARGETS, SignalSpec

MODES = ("observer", "lqr-topdown", "lqr-bottomup")


@dataclass(frozen=True)
class Tolerances:
    """Every tolerance used by the certificate suite, with its default.

    riccati_residual: relative Frobenius residual of Riccati solutions.
    lyapunov_residual: relative residual of Lyapunov solutions.
    lmi_feasibility: relative strictness margin required of LMI blocks.
    chain_slack: slack allowed in the cost chain comparison.
    mode_union: tolerance of the network/mode spectrum identity.
    """

    riccati_residual: float = 1e-8
    lyapunov_residual: float = 1e-10
    lmi_feasibility: float = 1e-7
    chain_slack: float = 1e-6
    mode_union: float = 1e-9


_MATRIX = {
    "type": "array",
    "minItems": 1,
    "items": {
        "type": "array",
        "minItems": 1,
        "items": {"type": "number"},
    },
}

_SIGNAL = {
    "type": "object",
    "required": ["kind", "target"],
    "additionalProperties": False,
    "properties": {
        "kind": {"enum": list(SIGNAL_KINDS)},
        "target": {"enum": list(SIGNAL_TARGETS)},
        "agent": {"type": ["integer", "null"], "minimum": 1},
        "amplitude": {"type": "number"},
        "frequency_hz": {"type": "number"},
        "phase": {"type": "number"},
        "seed": {"type": "integer", "minimum": 0},
    },
}

CONFIG_SCHEMA = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "type": "object",
    "required": ["schema_version", "model", "graph", "weights", "mode"],
    "additionalProperties": False,
    "properties": {
        "schema_version": {"const": 1},
        "model": {
            "type": "object",
            "required": ["A", "Bbar", "C"],
            "additionalProperties": False,
            "properties": {
                "A": _MATRIX,
                "B": _MATRIX,
                "Bbar": _MATRIX,
                "C": _MATRIX,
            },
        },
        "graph": {
            "type": "object",
            "required": ["type", "n"],
            "additionalProperties": False,
            "properties": {
                "type": {"enum": ["cyclic", "edges"]},
                "n": {"type": "integer", "minimum": 1},
                "edges": {
                    "type": "array",
                    "items": {
                        "type": "array",
                        "items": {"type": "integer", "minimum": 1},
                        "minItems": 2,
                        "maxItems": 2,
                    },
                },
            },
        },
        "weights": {
            "type": "object",
            "required": ["Q1", "Q2", "R"],
            "additionalProperties": False,
            "properties": {"Q1": _MATRIX, "Q2": _MATRIX, "R": _MATRIX},
        },
        "mode": {"enum": list(MODES)},
        "simulation": {
            "type": "object",
            "required": ["t_end", "dt"],
            "additionalProperties": False,
            "properties": {
                "t_end": {"type": "number", "minimum": 0},
                "dt": {"type": "number", "exclusiveMinimum": 0},
                "x0": {"oneOf": [_MATRIX, {"type": "null"}]},
                "xe0": {"oneOf": [_MATRIX, {"type": "null"}]},
                "signals": {"type": "array", "items": _SIGNAL},
            },
        },
        "tolerances": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                f.name: {"type": "number", "exclusiveMinimum": 0}
                for f in fields(Tolerances)
            },
        },
        "output": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "report": {"type": "string"},
                "trace_dir": {"type": "string"},
            },
        },
    },
}


@dataclass(frozen=True)
class SimulationSettings:
    t_end: float
    dt: float
    x0: np.ndarray | None
    xe0: np.ndarray | None
    signals: tuple[SignalSpec, ...]


@dataclass(frozen=True)
class RunConfig:
    mode: str
    model: AgentModel
    graph: GraphTopology
    weights: Any  # MeeWeights for observer mode, LqrWeights otherwise
    simulation: SimulationSettings | None
    tolerances: Tolerances
    output: dict = field(default_factory=dict)
    raw: dict = field(default_factory=dict)


def _matrix(data) -> np.ndarray:
    widths = {len(row) for row in data}
    if len(widths) != 1:
        raise ConfigError(f"matrix rows have inconsistent lengths {sorted(widths)}")
    return np.asarray(data, dtype=float)


def parse_config(data: dict) -> RunConfig:
    """Validate a config document and build the domain objects.

    Raises ConfigError on schema violations, inconsistent dimensions or
    invalid matrices (non-symmetric weights, rank-deficient C, ...).
    """
    try:
        jsonschema.validate(data, CONFIG_SCHEMA)
    except jsonschema.ValidationError as exc:
        path = "/".join(str(p) for p in exc.absolute_path) or "<root>"
        raise ConfigError(f"config schema violation at {path}: {exc.message}") from exc

    try:
        model_block = data["model"]
        model = AgentModel(
            A=_matrix(model_block["A"]),
            Bbar=_matrix(model_block["Bbar"]),
            C=_matrix(model_block["C"]),
            B=_matrix(model_block["B"]) if "B" in model_block else None,
        )

        graph_block = data["graph"]
        if graph_block["type"] == "cyclic":
            graph = cyclic_graph(graph_block["n"])
        else:
            graph = build_graph(graph_block["n"], graph_block.get("edges", []))

        wb = data["weights"]
        q1, q2, r = _matrix(wb["Q1"]), _matrix(wb["Q2"]), _matrix(wb["R"])
        mode = data["mode"]
        weights = (MeeWeights(q1, q2, r) if mode == "observer"
                   else LqrWeights(q1, q2, r))

        simulation = None
        if "simulation" in data:
            sim = data["simulation"]
            signals = tuple(
                SignalSpec(
                    kind=s["kind"],
                    target=s["target"],
                    agent=s.get("agent"),
                    amplitude=s.get("amplitude", 1.0),
                    frequency_hz=s.get("frequency_hz", 0.0),
                    phase=s.get("phase", 0.0),
                    seed=s.get("seed", 0),
                )
                for s in sim.get("signals", [])
            )
            simulation = SimulationSettings(
                t_end=float(sim["t_end"]),
                dt=float(sim["dt"]),
                x0=_matrix(sim["x0"]) if sim.get("x0") is not None else None,
                xe0=_matrix(sim["xe0"]) if sim.get("xe0") is not None else None,
                signals=signals,
            )

        tolerances = Tolerances(**data.get("tolerances", {}))
    except (ValueError, KeyError) as exc:
        raise ConfigError(str(exc)) from exc

    return RunConfig(
        mode=mode,
        model=model,
        graph=graph,
        weights=weights,
        simulation=simulation,
        tolerances=tolerances,
        output=dict(data.get("output", {})),
        raw=data,
    )


def _listify(mat: np.ndarray) -> list:
    return [[float(v) for v in row] for row in np.atleast_2d(mat)]


def config_to_dict(cfg: RunConfig) -> dict:
    """Serialize back to the JSON document form (semantic round trip)."""
    out: dict = {
        "schema_version": 1,
        "model": {
            "A": _listify(cfg.model.A),
            "Bbar": _listify(cfg.model.Bbar),
            "C": _listify(cfg.model.C),
        },
        "graph": {
            "type": "edges",
            "n": cfg.graph.n_agents,
            "edges": [list(e) for e in cfg.graph.edges],
        },
        "weights": {
            "Q1": _listify(cfg.weights.Q1),
            "Q2": _listify(cfg.weights.Q2),
            "R": _listify(cfg.weights.R),
        },
        "mode": cfg.mode,
        "tolerances": {
            f.name: getattr(cfg.tolerances, f.name) for f in fields(Tolerances)
        },
    }
    if cfg.model.B is not None:
        out["model"]["B"] = _listify(cfg.model.B)
    if cfg.simulation is not None:
        sim = cfg.simulation
        out["simulation"] = {
            "t_end": sim.t_end,
            "dt": sim.dt,
            "x0": _listify(sim.x0) if sim.x0 is not None else None,
            "xe0": _listify(sim.xe0) if sim.xe0 is not None else None,
            "signals": [
                {
                    "kind": s.kind,
                    "target": s.target,
                    "agent": s.agent,
                    "amplitude": s.amplitude,
                    "frequency_hz": s.frequency_hz,
                    "phase": s.phase,
                    "seed": s.seed,
                }
                for s in sim.signals
            ],
        }
    if cfg.output:
        out["output"] = dict(cfg.output)
    return out
