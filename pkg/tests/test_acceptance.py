"""Acceptance suite: every criterion asserted at its stated tolerance.

Run with ``pytest tests/test_acceptance.py -v -s`` to see one line per
criterion with the measured numbers.
"""

import time

import numpy as np
import pytest
import distlqr as d
import distlqr.cli as cli
from distlqr.dist_observer import assemble_observer
from distlqr.netsim import SignalSpec, convergence_metrics, simulate
from conftest import match_spectra, vehicle_weights


def _report(num, name, ok, detail=""):
    status = "PASS" if ok else "FAIL"
    print(f"criterion {num} ({name}): {status}  {detail}")
    assert ok, f"criterion {num} failed: {detail}"


def _rng(seed):
    return np.random.Generator(np.random.Philox(seed))


def test_criterion_1_riccati_certificates():
    rng = _rng(1001)
    start = time.perf_counter()
    worst_care = worst_dual = 0.0
    for _ in range(1000):
        n = int(rng.integers(1, 7))
        m = int(rng.integers(1, 4))
        q = int(rng.integers(1, 4))
        mo = int(rng.integers(1, min(3, n) + 1))
        a = rng.standard_normal((n, n))
        b = rng.standard_normal((n, m))
        bbar = rng.standard_normal((n, q))
        c = rng.standard_normal((mo, n))
        qs = rng.standard_normal((n, n)); qs = qs @ qs.T + 0.1 * np.eye(n)
        r = rng.standard_normal((m, m)); r = r @ r.T + 0.1 * np.eye(m)
        qo = rng.standard_normal((mo, mo)); qo = qo @ qo.T + 0.1 * np.eye(mo)
        rd = rng.standard_normal((q, q)); rd = rd @ rd.T + 0.1 * np.eye(q)

        p = d.solve_care(a, b, qs, r)
        res = np.linalg.norm(a.T @ p + p @ a
                             - p @ b @ np.linalg.solve(r, b.T @ p) + qs)
        rel = res / max(1.0, np.linalg.norm(p))
        worst_care = max(worst_care, rel)
        hurwitz, _ = d.is_hurwitz(a - b @ np.linalg.solve(r, b.T @ p))
        assert hurwitz

        s, gain = d.solve_dual_are(a, bbar, c, qo, rd)
        res = np.linalg.norm(a @ s + s @ a.T
                             + bbar @ np.linalg.solve(rd, bbar.T)
                             - s @ c.T @ qo @ c @ s)
        rel = res / max(1.0, np.linalg.norm(s))
        worst_dual = max(worst_dual, rel)
        hurwitz, _ = d.is_hurwitz(a - gain @ c)
        assert hurwitz
    elapsed = time.perf_counter() - start
    ok = worst_care <= 1e-8 and worst_dual <= 1e-8 and elapsed < 30.0
    _report(1, "Riccati certificates", ok,
            f"worst residuals {worst_care:.2e} / {worst_dual:.2e}, "
            f"{elapsed:.1f} s for 1000 systems")


def test_criterion_2_topdown_closed_form():
    agent = d.AgentModel(A=[[0.0]], B=[[1.0]], Bbar=[[1.0]], C=[[1.0]])
    w = d.LqrWeights(Q1=[[1.0]], Q2=[[1.0]], R=[[1.0]])
    res = d.topdown_blocks(agent, w, 3)
    expected = 2.0 * np.eye(3) - np.ones((3, 3)) / 3.0
    scalar_err = np.abs(res.p_network - expected).max()
    ok = (scalar_err <= 1e-9
          and abs(res.p_network[0, 0] - 5.0 / 3.0) <= 1e-9
          and abs(res.p_network[0, 1] + 1.0 / 3.0) <= 1e-9)

    rng = _rng(1002)
    worst_block = 0.0
    for n_agents in (3, 4, 5, 6):
        a = rng.standard_normal((2, 2))
        b = rng.standard_normal((2, 1))
        model = d.AgentModel(A=a, B=b, Bbar=b, C=[[1.0, 0.0]])
        q1 = rng.standard_normal((2, 2)); q1 = q1 @ q1.T + 0.5 * np.eye(2)
        q2 = rng.standard_normal((2, 2)); q2 = q2 @ q2.T
        weights = d.LqrWeights(Q1=q1, Q2=q2, R=[[1.0]])
        q_net, r_net = d.structured_weights(weights, n_agents)
        gain = d.centralized_lqr(model, n_agents, q_net, r_net).gain
        scale = max(1.0, np.linalg.norm(gain))
        diag = gain[0:1, 0:2]
        off = gain[0:1, 2:4]
        for i in range(n_agents):
            for j in range(n_agents):
                block = gain[i : i + 1, 2 * j : 2 * j + 2]
                ref = diag if i == j else off
                worst_block = max(worst_block,
                                  np.linalg.norm(block - ref) / scale)
    ok = ok and worst_block <= 1e-7
    _report(2, "top-down closed form", ok,
            f"scalar error {scalar_err:.2e}, worst block deviation "
            f"{worst_block:.2e}")


def test_criterion_3_mode_union_identity():
    rng = _rng(1003)
    start = time.perf_counter()
    worst = 0.0
    for _ in range(100):
        n_agents = int(rng.integers(2, 11))
        n = int(rng.integers(1, 5))
        m = int(rng.integers(1, n + 1))
        possible = [(i, j) for i in range(1, n_agents + 1)
                    for j in range(i + 1, n_agents + 1)]
        keep = rng.random(len(possible)) < 0.4
        graph = d.build_graph(n_agents, [e for e, k in zip(possible, keep) if k])
        loop = rng.standard_normal((n, n))
        l_gain = rng.standard_normal((n, m))
        c = rng.standard_normal((m, n))
        phi = rng.standard_normal((m, m))
        a_err = (d.kron(np.eye(n_agents), loop)
                 - d.kron(graph.laplacian, l_gain @ phi @ c))
        union = np.concatenate([
            np.linalg.eigvals(loop - lam * l_gain @ phi @ c)
            for lam in graph.eigvals
        ])
        err = match_spectra(np.linalg.eigvals(a_err), union)
        worst = max(worst, err / max(1.0, np.linalg.norm(a_err, 2)))
    elapsed = time.perf_counter() - start
    ok = worst <= 1e-9 and elapsed < 10.0
    _report(3, "mode-union spectral identity", ok,
            f"worst relative error {worst:.2e}, {elapsed:.1f} s for 100 draws")


def test_criterion_4_sdp_certificate(vehicle_model, cycle5):
    start = time.perf_counter()
    design = d.synthesize_observer(vehicle_model, vehicle_weights(5.0), cycle5)
    elapsed = time.perf_counter() - start
    cert = design.certificate
    # independent eigenvalue check: every block strictly negative definite
    # with margin at least 1e-7 (and within its relative bound)
    margins = cert.lmi1_margins + cert.lmi2_margins
    margins_ok = all(top <= bound for top, bound in margins)
    lmi_ok = cert.lmi_ok and all(top < -1e-7 for top, _ in margins)
    chain_ok = (design.sum_mode_optima <= design.j_achieved + 1e-6
                and design.j_achieved <= design.gamma_hat + 1e-6)
    ok = (lmi_ok and margins_ok and cert.a_err_hurwitz and chain_ok
          and elapsed < 60.0)
    _report(4, "SDP certificate", ok,
            f"abscissa {cert.a_err_abscissa:.4f}, worst LMI eig "
            f"{max(t for t, _ in cert.lmi1_margins + cert.lmi2_margins):.2e}, "
            f"chain {design.sum_mode_optima:.4f} <= {design.j_achieved:.4f} "
            f"<= {design.gamma_hat:.4f}, {elapsed:.1f} s")


def test_criterion_5_reference_comparison(vehicle_designs, capsys):
    gain = vehicle_designs[5.0].gain_original
    rows = [
        ("L[1]", gain[0, 0], cli.DEMO_REFERENCE_GAIN[0, 0]),
        ("L[2]", gain[1, 0], cli.DEMO_REFERENCE_GAIN[1, 0]),
    ]
    for q2, (phi_ref, cost_ref) in cli.DEMO_REFERENCE_CASES.items():
        design = vehicle_designs[q2]
        rows.append((f"phi(Q2={q2:g})", design.phi[0, 0], phi_ref))
        rows.append((f"J(Q2={q2:g})", design.gamma_hat, cost_ref))
    print("criterion 5 (reference values, non-gating):")
    within = 0
    for name, got, ref in rows:
        dev = abs(got - ref) / abs(ref)
        mark = "within 2%" if dev <= 0.02 else "outside 2%"
        within += dev <= 0.02
        print(f"  {name:<12} computed {got:10.4f}  reference {ref:10.4f}  "
              f"deviation {dev * 100.0:7.2f}% ({mark})")
    print(f"  {within}/{len(rows)} values within the 2% target; deviations "
          "are reported, certificates gate acceptance")
    # non-gating: the criterion passes when the comparison is produced and
    # the certificate suite (criterion 4) holds for these designs
    ok = all(des.certificate.passed for des in vehicle_designs.values())
    _report(5, "reference comparison printed", ok, "see table above")


def test_criterion_6_relative_weight_speeds_convergence(vehicle_designs):
    start = time.perf_counter()
    rng = _rng(1006)
    xe0 = rng.standard_normal((5, 2))
    xe0 -= xe0.mean(axis=0)  # excite only the coupled modes
    settle = {}
    for q2, design in vehicle_designs.items():
        trace = simulate(design, x0=np.zeros((5, 2)), xe0=xe0,
                         t_end=15.0, dt=1e-3)
        settle[q2] = convergence_metrics(trace)["aggregate"]["settling_time"]
    elapsed = time.perf_counter() - start
    ok = (settle[25.0] is not None and settle[5.0] is not None
          and settle[25.0] < settle[5.0] and elapsed < 10.0)
    _report(6, "stronger relative weight converges faster", ok,
            f"settling {settle[25.0]:.3f} s (Q2=25) < {settle[5.0]:.3f} s "
            f"(Q2=5), {elapsed:.1f} s")


def test_criterion_7_reductions(vehicle_model, cycle5, vehicle_designs):
    # (a) zero coupling reproduces N decoupled node observers
    node = vehicle_designs[5.0].node
    a_err, _ = assemble_observer(node, np.zeros((1, 1)), cycle5)
    loop = node.a_hat - node.l_hat @ node.c_hat
    union = np.concatenate([np.linalg.eigvals(loop)] * 5)
    err_decoupled = match_spectra(np.linalg.eigvals(a_err), union)

    # (b) single agent reduces to the node observer
    single = d.synthesize_observer(vehicle_model, vehicle_weights(5.0),
                                   d.build_graph(1, []))
    node_loop = vehicle_model.A - single.gain_original @ vehicle_model.C
    err_single = match_spectra(np.linalg.eigvals(single.a_err),
                               np.linalg.eigvals(node_loop))

    # (c) zero relative weight returns zero coupling
    zero_q2 = d.synthesize_observer(
        vehicle_model, d.MeeWeights([[10.0]], [[0.0]], [[1.0]]), cycle5
    )
    phi_norm = float(np.linalg.norm(zero_q2.phi))

    ok = err_decoupled <= 1e-10 and err_single <= 1e-10 and phi_norm <= 1e-6
    _report(7, "reductions", ok,
            f"decoupled spectrum error {err_decoupled:.2e}, single-agent "
            f"error {err_single:.2e}, |phi| at Q2=0 is {phi_norm:.2e}")


def test_criterion_8_simulator_order_and_determinism(vehicle_designs):
    design = vehicle_designs[5.0]
    rng = _rng(1008)
    x0 = rng.standard_normal((5, 2))
    signals = [SignalSpec(kind="sinusoid", target="disturbance",
                          amplitude=1.0, frequency_hz=0.4)]

    def terminal(dt):
        trace = simulate(design, signals=signals, x0=x0, xe0=None,
                         t_end=1.0, dt=dt)
        return trace.states[-1].reshape(-1)

    reference = terminal(1e-2 / 16.0)
    err_coarse = np.linalg.norm(terminal(1e-2) - reference)
    err_fine = np.linalg.norm(terminal(5e-3) - reference)
    ratio = err_coarse / err_fine

    noisy = [SignalSpec(kind="noise", target="disturbance", amplitude=0.3,
                        seed=77),
             SignalSpec(kind="noise", target="noise", amplitude=0.05, seed=78)]
    runs = [simulate(design, signals=noisy, x0=x0, xe0=None,
                     t_end=0.5, dt=1e-3) for _ in range(2)]
    identical = (np.array_equal(runs[0].states, runs[1].states)
                 and np.array_equal(runs[0].estimates, runs[1].estimates)
                 and np.array_equal(runs[0].outputs, runs[1].outputs))

    ok = 8.0 <= ratio <= 32.0 and identical
    _report(8, "integrator order and determinism", ok,
            f"refinement ratio {ratio:.1f} in [8, 32], traces bit-identical: "
            f"{identical}")
