"""Port-based interconnection view of the cylindrical pair."""
import numpy as np
import numpy.testing as npt

from phmbd.assembly import ph_operators, stack_constraints
from phmbd.integrate import IntegratorConfig, simulate
from phmbd.interconnect import (
    body_subsystem,
    couple_then_discretize,
    discretize_then_couple,
    internal_port_matrices,
    nullspace_equivalence,
    transformer_couple,
)
from phmbd.joints import jacobian as joint_jacobian

from conftest import cylindrical_consistent_pair

SEED = 99


def test_port_matrix_shapes(flying_pair):
    sys, state = flying_pair
    ports = internal_port_matrices(sys.joints[0], state.q[:12], state.q[12:])
    assert ports.B_int_a.shape == ports.B_int_b.shape == (12, 4)
    assert ports.B_ext_a.shape == ports.B_ext_b.shape == (12, 2)
    T = np.vstack([ports.n, ports.m1, ports.m2])
    npt.assert_allclose(T @ T.T, np.eye(3), atol=1e-12)


def test_nullspace_equivalence_random_consistent_configs(flying_pair):
    """Port coupling rows and constraint rows agree on rigid motions."""
    sys, state = flying_pair
    joint = sys.joints[0]
    rng = np.random.default_rng(SEED)
    for _ in range(20):
        q_a, q_b = cylindrical_consistent_pair(
            joint, state.q[:12], state.q[12:], rng)
        ports = internal_port_matrices(joint, q_a, q_b)
        G_J = joint_jacobian(joint, q_a, q_b)
        defect = nullspace_equivalence(ports, G_J, q_a, q_b)
        assert defect <= 1e-10


def test_transformer_couple_keeps_skewness(flying_pair):
    sys, state = flying_pair
    rng = np.random.default_rng(SEED)
    sub_a = body_subsystem(sys.bodies[0])
    sub_b = body_subsystem(sys.bodies[1])
    qa, qb = state.q[:12], state.q[12:]
    va, vb = state.v[:12], state.v[12:]
    la, lb = rng.standard_normal((2, 6))
    ops_a = ph_operators(sub_a, qa, va, la)
    ops_b = ph_operators(sub_b, qb, vb, lb)
    ports = internal_port_matrices(sys.joints[0], qa, qb)
    E, J, z = transformer_couple(ops_a, ops_b, ports,
                                 lam_joint=rng.standard_normal(4))
    assert E.shape == J.shape == (64, 64)
    npt.assert_allclose(J + J.T, 0.0, atol=1e-14)


def test_body_subsystem_rebased(flying_pair):
    sys, _ = flying_pair
    sub = body_subsystem(sys.bodies[1])
    assert (sub.n, sub.m) == (12, 6)
    assert len(sub.bodies) == 1 and sub.bodies[0].index == 0
    npt.assert_allclose(sub.mass_diag, sys.mass_diag[12:], atol=0.0)


def test_interconnect_discretize_commute(flying_pair):
    """Identical one-step residuals for either order of operations."""
    sys, state = flying_pair
    traj = simulate(sys, state, IntegratorConfig(h=0.001, t_end=0.001,
                                                 scheme="mp"))
    q0, v0 = traj.q[0], traj.v[0]
    q1, v1 = traj.q[1], traj.v[1]
    lam = traj.lam[1]

    def split(q, v, l):
        # per-body multipliers: internal rows 0-5 / 6-11, joint rows 12-15
        return (np.concatenate([q[:12], v[:12], l[:6]]),
                np.concatenate([q[12:], v[12:], l[6:12]]), l[12:])

    xa0, xb0, _ = split(q0, v0, traj.lam[0])
    xa1, xb1, lam_joint = split(q1, v1, lam)
    x0 = np.concatenate([xa0, xb0])
    x1 = np.concatenate([xa1, xb1])
    sub_a = body_subsystem(sys.bodies[0])
    sub_b = body_subsystem(sys.bodies[1])
    r1 = couple_then_discretize(sub_a, sub_b, sys.joints[0], x0, x1,
                                lam_joint, traj.h)
    r2 = discretize_then_couple(sub_a, sub_b, sys.joints[0], x0, x1,
                                lam_joint, traj.h)
    npt.assert_allclose(r1, r2, atol=1e-14)


def test_defect_metric_detects_broken_coupling(flying_pair):
    """Sanity: corrupting a port matrix is caught by the defect."""
    sys, state = flying_pair
    joint = sys.joints[0]
    q_a, q_b = state.q[:12], state.q[12:]
    ports = internal_port_matrices(joint, q_a, q_b)
    import dataclasses
    bad = dataclasses.replace(
        ports, B_int_a=ports.B_int_a + 0.05 * np.ones((12, 4)))
    G_J = joint_jacobian(joint, q_a, q_b)
    assert nullspace_equivalence(bad, G_J, q_a, q_b) > 1e-6
