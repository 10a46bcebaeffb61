"""Single rigid body in director coordinates."""
import numpy as np
import numpy.testing as npt
import pytest

from phmbd.directors import (
    RigidBody,
    angular_momentum,
    euler_values,
    external_wrench_map,
    hat,
    internal_constraint_gradient,
    internal_constraints,
    mass_matrix,
    split_config,
)

from conftest import fd_jacobian, random_orthonormal_config, rigid_velocity

SEED = 20260818


def test_hat_is_cross_product():
    rng = np.random.default_rng(SEED)
    a, b = rng.standard_normal((2, 3))
    npt.assert_allclose(hat(a) @ b, np.cross(a, b), atol=1e-15)
    npt.assert_allclose(hat(a) + hat(a).T, 0.0, atol=0.0)


def test_euler_values_known_triples():
    npt.assert_allclose(euler_values(np.array([304.0, 304.0, 8.0])),
                        [4.0, 4.0, 300.0])
    npt.assert_allclose(euler_values(np.array([18.75, 18.75, 19.5])),
                        [9.75, 9.75, 9.0])


def test_euler_values_roundtrip():
    # J_i = E_j + E_k inverts the conversion
    rng = np.random.default_rng(SEED)
    J = rng.uniform(0.5, 3.0, 3)
    E = euler_values(J)
    back = np.array([E[1] + E[2], E[0] + E[2], E[0] + E[1]])
    npt.assert_allclose(back, J, rtol=1e-14)


def test_mass_matrix_layout():
    body = RigidBody(0, 2.0, np.array([3.0, 4.0, 5.0]))
    expected = np.repeat([2.0, 3.0, 2.0, 1.0], 3)
    npt.assert_allclose(mass_matrix(body), expected)


def test_split_config_shapes():
    q = np.arange(12.0)
    phi, d = split_config(q)
    npt.assert_allclose(phi, [0.0, 1.0, 2.0])
    npt.assert_allclose(d[2], [9.0, 10.0, 11.0])


def test_internal_constraints_vanish_on_orthonormal_configs():
    rng = np.random.default_rng(SEED)
    for _ in range(20):
        q = random_orthonormal_config(rng)
        npt.assert_allclose(internal_constraints(q), 0.0, atol=1e-14)


def test_internal_constraints_row_values():
    q = np.concatenate([np.zeros(3), np.eye(3).reshape(-1)])
    q[3:6] = [1.1, 0.2, 0.0]
    g = internal_constraints(q)
    # rows: half squared-norm defects, then the three director dot products
    npt.assert_allclose(g, [0.125, 0.0, 0.0, 0.2, 0.0, 0.0], atol=1e-15)


def test_internal_constraint_gradient_matches_fd():
    rng = np.random.default_rng(SEED)
    q = random_orthonormal_config(rng) + 0.1 * rng.standard_normal(12)
    G = internal_constraint_gradient(q)
    npt.assert_allclose(G, fd_jacobian(internal_constraints, q), atol=1e-6)


def test_internal_constraints_quadratic_secant():
    # exactly quadratic: g(q + s) - g(q) = G(q + s/2) s
    rng = np.random.default_rng(SEED)
    for _ in range(10):
        q = rng.standard_normal(12)
        s = rng.standard_normal(12)
        lhs = internal_constraints(q + s) - internal_constraints(q)
        rhs = internal_constraint_gradient(q + 0.5 * s) @ s
        npt.assert_allclose(lhs, rhs, atol=1e-12)


def test_wrench_map_power_identity():
    """v . B(q) u equals translational plus rotational power of the wrench."""
    rng = np.random.default_rng(SEED)
    for _ in range(10):
        q = random_orthonormal_config(rng)
        omega = rng.standard_normal(3)
        v_phi = rng.standard_normal(3)
        v = rigid_velocity(q, omega, v_phi)
        F, tau = rng.standard_normal((2, 3))
        r_material = rng.standard_normal(3)
        B = external_wrench_map(q, r_material)
        _, d = split_config(q)
        r = r_material @ d
        lhs = v @ (B @ np.concatenate([F, tau]))
        rhs = v_phi @ F + omega @ (np.cross(r, F) + tau)
        npt.assert_allclose(lhs, rhs, rtol=1e-12, atol=1e-12)


def test_wrench_map_default_anchor_is_center():
    rng = np.random.default_rng(SEED)
    q = random_orthonormal_config(rng)
    npt.assert_allclose(external_wrench_map(q),
                        external_wrench_map(q, np.zeros(3)), atol=0.0)


def test_angular_momentum_against_inertia_tensor():
    """L_rot = R diag(J) R^T omega for directors moving with omega."""
    rng = np.random.default_rng(SEED)
    J = np.array([3.0, 4.0, 5.0])
    body = RigidBody(0, 2.0, J)
    for _ in range(10):
        q = random_orthonormal_config(rng)
        omega = rng.standard_normal(3)
        v_phi = rng.standard_normal(3)
        v = rigid_velocity(q, omega, v_phi)
        _, d = split_config(q)
        R = d.T  # columns are the directors
        expected = 2.0 * np.cross(q[:3], v_phi) + R @ np.diag(J) @ R.T @ omega
        npt.assert_allclose(angular_momentum(body, q, v), expected, rtol=1e-12,
                            atol=1e-12)


def test_rigid_body_rejects_bad_inertias():
    with pytest.raises(Exception):
        RigidBody(0, 1.0, np.array([1.0, 2.0]))
