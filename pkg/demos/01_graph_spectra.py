"""Interconnection graphs and the Laplacian spectra that drive everything.

The network synthesis never works with the coupled system directly: it
splits it into independent subsystems, one per Laplacian eigenvalue. This
script builds a few topologies and shows the quantities the other demos
rely on.
"""

import numpy as np

from distlqr import build_graph, cyclic_graph, max_degree_bound

np.set_printoptions(precision=4, suppress=True)

ring = cyclic_graph(5)
print("5-agent ring")
print("  laplacian:\n", ring.laplacian)
print("  eigenvalues:", ring.eigvals)
print("  degree bound d_max + 1 =", max_degree_bound(ring))

path = build_graph(4, [(1, 2), (2, 3), (3, 4)])
print("\n4-agent path")
print("  eigenvalues:", path.eigvals)
print("  closed form:", np.sort([2 - 2 * np.cos(k * np.pi / 4) for k in range(4)]))

star = build_graph(5, [(1, k) for k in range(2, 6)])
print("\n5-agent star: degrees", star.degrees, "-> bound", max_degree_bound(star))

split = build_graph(6, [(1, 2), (2, 3), (4, 5)])
print("\ndisconnected graph: zero eigenvalues =", split.num_components,
      "components")

# the eigenvector matrix is orthogonal and reconstructs the Laplacian
v, lam = ring.eigvecs, ring.eigvals
print("\nreconstruction error:",
      np.linalg.norm(v @ np.diag(lam) @ v.T - ring.laplacian))
