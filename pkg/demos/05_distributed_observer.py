"""Distributed observer synthesis for five vehicles on a ring.

Each vehicle estimates its own state from its scalar position measurement
and the measurement-error differences with its two ring neighbours. The
coupling matrix Phi comes from a structured trace-minimisation program;
everything is re-certified with plain eigenvalue checks afterwards.
"""

import numpy as np

from distlqr import AgentModel, MeeWeights, cyclic_graph, synthesize_observer

np.set_printoptions(precision=5, suppress=True)

model = AgentModel(A=[[0.0, 1.0], [-1.0, -0.1]], Bbar=[[0.0], [1.0]],
                   C=[[1.0, 0.0]])
graph = cyclic_graph(5)

for q2 in (5.0, 25.0):
    weights = MeeWeights(Q1=[[10.0]], Q2=[[q2]], R=[[1.0]])
    design = synthesize_observer(model, weights, graph)
    cert = design.certificate
    print(f"relative weight Q2 = {q2:g}")
    print("  node gain:", design.gain_original.ravel())
    print("  coupling phi:", design.phi[0, 0])
    print("  cost bound (minimised):   ", f"{design.gamma_hat:.4f}")
    print("  cost achieved by (L, phi):", f"{design.j_achieved:.4f}")
    print("  sum of per-mode optima:   ", f"{design.sum_mode_optima:.4f}")
    print("  error-dynamics abscissa:  ", f"{cert.a_err_abscissa:.4f}")
    print("  worst LMI eigenvalue:     ",
          f"{max(t for t, _ in cert.lmi1_margins + cert.lmi2_margins):.2e}")
    print("  per-mode problems:")
    for mode, opt in zip(design.modes, design.per_mode_optima):
        print(f"    eigenvalue {mode.eigenvalue:7.4f} x{mode.multiplicity}: "
              f"output weight {mode.q_weight[0, 0]:7.3f}, "
              f"optimum trace {opt:.4f}")
    print()

print("a larger relative weight buys a larger coupling gain and a lower")
print("achieved cost; the bound itself is dominated by the uncoupled mode.")
