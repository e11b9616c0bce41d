"""Deterministic simulation of the agent network and distributed observer.

Plant and observer are integrated together with fixed-step RK4 in the
synthesis (hat) coordinates and mapped back to original coordinates when
the trace is emitted. Disturbance and measurement-noise signals are built
from SignalSpec entries; seeded noise uses numpy's Philox counter-based
generator and is held constant over each integration step (zero-order
hold), so traces are bit-reproducible for a given seed on one platform.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .dist_observer import ObserverDesign
from .errors import SimulationError
from .graphs import GraphTopology
from .matops import kron

SIGNAL_KINDS = ("zero", "constant", "sinusoid", "noise")
SIGNAL_TARGETS = ("disturbance", "noise")


@dataclass(frozen=True)
class SignalSpec:
    """One disturbance or measurement-noise component.

    kind: 'zero', 'constant', 'sinusoid' (amplitude * sin(2 pi f t + phase))
    or 'noise' (zero-mean Gaussian, std = amplitude, redrawn every step).
    target: 'disturbance' feeds the plant input channels, 'noise' the
    measurements. agent: 1-based index, or None for all agents.
    """

    kind: str
    target: str
    agent: int | None = None
    amplitude: float = 1.0
    frequency_hz: float = 0.0
    phase: float = 0.0
    seed: int = 0

    def __post_init__(self):
        if self.kind not in SIGNAL_KINDS:
            raise ValueError(f"unknown signal kind {self.kind!r}")
        if self.target not in SIGNAL_TARGETS:
            raise ValueError(f"unknown signal target {self.target!r}")


@dataclass(frozen=True)
class SimulationTrace:
    """Uniform-grid trajectories in original coordinates.

    Arrays are indexed [step, agent, coordinate]; errors[k] equals
    states[k] - estimates[k] exactly.
    """

    t0: float
    dt: float
    times: np.ndarray
    states: np.ndarray
    estimates: np.ndarray
    errors: np.ndarray
    outputs: np.ndarray

    @property
    def n_steps(self) -> int:
        return len(self.times) - 1

    @property
    def n_agents(self) -> int:
        return self.states.shape[1]


class _SignalBank:
    """Compiled signal set: continuous parts plus per-step noise tables."""

    def __init__(self, specs, n_agents: int, dim_d: int, dim_m: int,
                 n_steps: int):
        self._n_agents = n_agents
        self._dims = {"disturbance": dim_d, "noise": dim_m}
        self._continuous = {"disturbance": [], "noise": []}
        self._tables = {
            "disturbance": np.zeros((n_steps + 1, n_agents, dim_d)),
            "noise": np.zeros((n_steps + 1, n_agents, dim_m)),
        }
        for spec in specs:
            agents = (range(n_agents) if spec.agent is None
                      else [spec.agent - 1])
            for a in agents:
                if not 0 <= a < n_agents:
                    raise ValueError(f"signal agent {spec.agent} out of range")
            if spec.kind == "zero":
                continue
            if spec.kind == "noise":
                rng = np.random.Generator(np.random.Philox(spec.seed))
                draw = spec.amplitude * rng.standard_normal(
                    (n_steps + 1, len(list(agents)), self._dims[spec.target])
                )
                for col, a in enumerate(agents):
                    self._tables[spec.target][:, a, :] += draw[:, col, :]
            else:
                self._continuous[spec.target].append((tuple(agents), spec))

    def sample(self, target: str, t: float, step: int) -> np.ndarray:
        out = self._tables[target][min(step, len(self._tables[target]) - 1)].copy()
        for agents, spec in self._continuous[target]:
            if spec.kind == "constant":
                value = spec.amplitude
            else:  # sinusoid
                value = spec.amplitude * math.sin(
                    2.0 * math.pi * spec.frequency_hz * t + spec.phase
                )
            for a in agents:
                out[a, :] += value
        return out.reshape(-1)


def _as_agent_states(value, n_agents: int, n_states: int, name: str) -> np.ndarray:
    arr = np.zeros((n_agents, n_states)) if value is None else np.asarray(
        value, dtype=float
    )
    if arr.size != n_agents * n_states:
        raise ValueError(
            f"{name} must hold {n_agents}x{n_states} values, got shape {arr.shape}"
        )
    return arr.reshape(n_agents, n_states)


def simulate(design: ObserverDesign, signals=(), x0=None, xe0=None,
             t_end: float = 10.0, dt: float = 1e-3,
             graph: GraphTopology | None = None) -> SimulationTrace:
    """Integrate the coupled plant/observer network with fixed-step RK4.

    x0 and xe0 are per-agent initial states and estimates in original
    coordinates, shape (N, n) (or anything reshapeable to it); both default
    to zero. The design must carry a passing Hurwitz certificate.
    """
    if dt <= 0.0:
        raise SimulationError(f"dt must be positive, got {dt}")
    if t_end < dt:
        raise SimulationError(f"t_end ({t_end}) must be at least dt ({dt})")
    if design.certificate is None or not design.certificate.a_err_hurwitz:
        raise SimulationError("design has no passing Hurwitz certificate")
    graph = design.graph if graph is None else graph

    node = design.node
    n = node.a_hat.shape[0]
    m = node.c_hat.shape[0]
    qdim = node.bbar_hat.shape[1]
    n_agents = graph.n_agents
    n_steps = int(round(t_end / dt))

    eye = np.eye(n_agents)
    a_net = kron(eye, node.a_hat)
    b_net = kron(eye, node.bbar_hat)
    c_net = kron(eye, node.c_hat)
    a_err = design.a_err
    g_y = design.output_gain

    to_hat = node.total_transform
    from_hat = np.linalg.inv(to_hat)

    x0 = _as_agent_states(x0, n_agents, n, "x0")
    xe0 = _as_agent_states(xe0, n_agents, n, "xe0")
    x = (x0 @ to_hat.T).reshape(-1)
    xe = (xe0 @ to_hat.T).reshape(-1)

    bank = _SignalBank(signals, n_agents, qdim, m, n_steps)

    times = np.arange(n_steps + 1) * dt
    states = np.empty((n_steps + 1, n_agents, n))
    estimates = np.empty((n_steps + 1, n_agents, n))
    outputs = np.empty((n_steps + 1, n_agents, m))

    def emit(k, x_hat, xe_hat):
        states[k] = x_hat.reshape(n_agents, n) @ from_hat.T
        estimates[k] = xe_hat.reshape(n_agents, n) @ from_hat.T
        y = c_net @ x_hat + bank.sample("noise", times[k], k)
        outputs[k] = y.reshape(n_agents, m)

    def deriv(t, step, x_hat, xe_hat):
        d = bank.sample("disturbance", t, step)
        y = c_net @ x_hat + bank.sample("noise", t, step)
        return a_net @ x_hat + b_net @ d, a_err @ xe_hat + g_y @ y

    emit(0, x, xe)
    for k in range(n_steps):
        t = times[k]
        k1x, k1e = deriv(t, k, x, xe)
        k2x, k2e = deriv(t + 0.5 * dt, k, x + 0.5 * dt * k1x, xe + 0.5 * dt * k1e)
        k3x, k3e = deriv(t + 0.5 * dt, k, x + 0.5 * dt * k2x, xe + 0.5 * dt * k2e)
        k4x, k4e = deriv(t + dt, k, x + dt * k3x, xe + dt * k3e)
        x = x + (dt / 6.0) * (k1x + 2.0 * k2x + 2.0 * k3x + k4x)
        xe = xe + (dt / 6.0) * (k1e + 2.0 * k2e + 2.0 * k3e + k4e)
        if not (np.all(np.isfinite(x)) and np.all(np.isfinite(xe))):
            raise SimulationError(f"non-finite state at step {k + 1}")
        emit(k + 1, x, xe)

    return SimulationTrace(
        t0=0.0,
        dt=dt,
        times=times,
        states=states,
        estimates=estimates,
        errors=states - estimates,
        outputs=outputs,
    )


def _settle_time(norms: np.ndarray, times: np.ndarray,
                 fraction: float) -> float | None:
    threshold = fraction * norms[0]
    inside = norms <= threshold
    if not inside[-1]:
        return None
    # last excursion outside the band decides the settling instant
    outside = np.nonzero(~inside)[0]
    k = 0 if len(outside) == 0 else int(outside[-1]) + 1
    return float(times[k])


def convergence_metrics(trace: SimulationTrace,
                        fraction: float = 0.05) -> dict:
    """Settling time to `fraction` of the initial error, peak and terminal
    error norms, per agent and aggregated over the network."""
    if len(trace.times) == 0:
        raise ValueError("empty trace")
    per_agent = []
    for a in range(trace.n_agents):
        norms = np.linalg.norm(trace.errors[:, a, :], axis=1)
        per_agent.append({
            "agent": a + 1,
            "settling_time": _settle_time(norms, trace.times, fraction),
            "peak_error": float(norms.max()),
            "terminal_error": float(norms[-1]),
        })
    agg = np.linalg.norm(
        trace.errors.reshape(len(trace.times), -1), axis=1
    )
    aggregate = {
        "settling_time": _settle_time(agg, trace.times, fraction),
        "peak_error": float(agg.max()),
        "terminal_error": float(agg[-1]),
    }
    return {"fraction": fraction, "per_agent": per_agent, "aggregate": aggregate}
