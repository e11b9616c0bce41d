"""Single-agent minimum-energy estimation, step by step.

The node pipeline prepares one agent for the network synthesis:

1. rotate the state so the output matrix reads [0 C2];
2. solve the dual Riccati equation for the optimal local gain;
3. change coordinates once more so the solution becomes block diagonal
   and the gain takes the form [0; l2].

The structure created in step 3 is what lets the network-level problem be
written with shared matrix variables later on.
"""

import numpy as np

from distlqr import AgentModel, MeeWeights
from distlqr.mee_node import decouple_transform, node_mee_gain, output_normalize

np.set_printoptions(precision=5, suppress=True)

model = AgentModel(A=[[0.0, 1.0], [-1.0, -0.1]], Bbar=[[0.0], [1.0]],
                   C=[[1.0, 0.0]])
weights = MeeWeights(Q1=[[10.0]], Q2=[[5.0]], R=[[1.0]])

nm = output_normalize(model)
print("output rotation:")
print("  transform:\n", nm.transform)
print("  rotated output matrix:", nm.C, " (pattern [0 C2])")

node = node_mee_gain(nm, weights)
print("\nnode estimation solution:")
print("  S =\n", node.S)
print("  gain (rotated coordinates):", node.L.ravel())
print("  gain (original coordinates):", node.gain_original.ravel())
print("  optimal cost trace(S) =", f"{node.cost_node:.5f}")

node = decouple_transform(node, weights)
print("\ndecoupling transform:")
print("  t_hat =\n", node.t_hat)
print("  block-diagonal solution:\n", node.s_hat)
print("  structured gain [0; l2]:", node.l_hat.ravel())

loop = node.a_hat - node.l_hat @ node.c_hat
print("\nobserver loop eigenvalues:", np.linalg.eigvals(loop))
print("same as in original coordinates:",
      np.linalg.eigvals(model.A - node.gain_original @ model.C))
