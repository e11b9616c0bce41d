"""Riccati and Lyapunov solvers with their residual certificates.

Every solver in the package returns solutions that are re-verified by
substitution; this script shows the certificates on a hand-checkable
scalar case and on a random multivariable one.
"""

import numpy as np

from distlqr import is_hurwitz, solve_care, solve_dual_are, solve_lyapunov

np.set_printoptions(precision=6, suppress=True)

# scalar regulator: a = 1, b = 1, q = 3, r = 1 has stabilizing p = 3
p = solve_care([[1.0]], [[1.0]], [[3.0]], [[1.0]])
print("scalar regulator solution p =", p[0, 0], "(closed form: 3)")

# scalar estimation dual: s solves 2as + b^2 - s^2 = 0
s, gain = solve_dual_are([[0.0]], [[1.0]], [[1.0]], [[1.0]], [[1.0]])
print("scalar dual solution s =", s[0, 0], "gain =", gain[0, 0])

rng = np.random.Generator(np.random.Philox(5))
a = rng.standard_normal((4, 4))
b = rng.standard_normal((4, 2))
q = rng.standard_normal((4, 4)); q = q @ q.T + 0.1 * np.eye(4)
r = rng.standard_normal((2, 2)); r = r @ r.T + 0.1 * np.eye(2)
p = solve_care(a, b, q, r)
residual = a.T @ p + p @ a - p @ b @ np.linalg.solve(r, b.T @ p) + q
closed = a - b @ np.linalg.solve(r, b.T @ p)
print("\nrandom 4-state regulator:")
print("  residual:", np.linalg.norm(residual))
print("  closed-loop abscissa:", is_hurwitz(closed)[1])

# estimation and regulation are transposes of each other
bbar = rng.standard_normal((4, 2))
c = rng.standard_normal((2, 4))
qo = np.eye(2)
ro = np.eye(2)
s, gain = solve_dual_are(a, bbar, c, qo, ro)
p_dual = solve_care(a.T, c.T, bbar @ bbar.T, np.linalg.inv(qo))
print("\ntransposition duality gap:", np.linalg.norm(s - p_dual))

# Lyapunov equation used to evaluate achieved estimation costs
f = closed
w = np.eye(4)
sol = solve_lyapunov(f, w)
print("Lyapunov residual:", np.linalg.norm(f @ sol + sol @ f.T + w))
