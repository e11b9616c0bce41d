"""distlqr: distributed LQR control and minimum-energy observer synthesis
for networks of identical LTI agents.

The package solves node- and network-level Riccati equations, performs the
spectral decoupling induced by the interconnection graph Laplacian, solves
a structured trace-minimisation semidefinite program for the observer
coupling gain, and simulates the resulting networked estimate-error
dynamics.
"""

__version__ = "0.1.0"

from .errors import (
    ConfigError,
    DistLqrError,
    SimulationError,
    SynthesisError,
    VerificationError,
)
from .graphs import GraphTopology, build_graph, cyclic_graph, max_degree_bound
from .matops import (
    AgentModel,
    is_hurwitz,
    kron,
    solve_care,
    solve_dual_are,
    solve_lyapunov,
    spectral_abscissa,
)
from .dlqr import (
    BottomUpControl,
    LqrWeights,
    TopDownResult,
    bottomup_controller_via_duality,
    bottomup_gain,
    centralized_lqr,
    structured_weights,
    topdown_blocks,
    topdown_truncate,
)
from .mee_node import (
    MeeWeights,
    NodeObserver,
    NormalizedModel,
    decouple_transform,
    design_node_observer,
    node_mee_gain,
    output_normalize,
)
from .dist_observer import (
    DesignCertificate,
    ModeProblem,
    ObserverDesign,
    SdpSolution,
    achieved_cost,
    assemble_observer,
    build_sdp,
    decouple_modes,
    per_mode_optimum,
    recover_phi,
    solve_sdp,
    synthesize_observer,
    verify_design,
)
from .netsim import (
    SignalSpec,
    SimulationTrace,
    convergence_metrics,
    simulate,
)
from .config import RunConfig, Tolerances, config_to_dict, parse_config

__all__ = [
    "AgentModel",
    "BottomUpControl",
    "ConfigError",
    "DesignCertificate",
    "DistLqrError",
    "GraphTopology",
    "LqrWeights",
    "MeeWeights",
    "ModeProblem",
    "NodeObserver",
    "NormalizedModel",
    "ObserverDesign",
    "RunConfig",
    "SdpSolution",
    "SignalSpec",
    "SimulationError",
    "SimulationTrace",
    "SynthesisError",
    "Tolerances",
    "TopDownResult",
    "VerificationError",
    "achieved_cost",
    "assemble_observer",
    "bottomup_controller_via_duality",
    "bottomup_gain",
    "build_graph",
    "build_sdp",
    "centralized_lqr",
    "config_to_dict",
    "convergence_metrics",
    "cyclic_graph",
    "decouple_modes",
    "decouple_transform",
    "design_node_observer",
    "is_hurwitz",
    "kron",
    "max_degree_bound",
    "node_mee_gain",
    "output_normalize",
    "parse_config",
    "per_mode_optimum",
    "recover_phi",
    "simulate",
    "solve_care",
    "solve_dual_are",
    "solve_lyapunov",
    "solve_sdp",
    "spectral_abscissa",
    "structured_weights",
    "synthesize_observer",
    "topdown_blocks",
    "topdown_truncate",
    "verify_design",
]
