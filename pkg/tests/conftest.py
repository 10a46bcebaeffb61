"""Shared fixtures and generators for the test suite."""
import numpy as np
import pytest
from scipy.spatial.transform import Rotation

from phmbd.scenario import build_system, load_scenario


def random_rotation(rng):
    return Rotation.random(random_state=rng).as_matrix()


def random_orthonormal_config(rng, span=1.0):
    """Random rigid configuration q = (phi, d1, d2, d3)."""
    R = random_rotation(rng)
    phi = span * rng.standard_normal(3)
    return np.concatenate([phi, R.T.reshape(-1)])


def rigid_velocity(q, omega, v_phi):
    """Velocity with every director transported by omega (d_i' = omega x d_i)."""
    d = q[3:].reshape(3, 3)
    return np.concatenate([np.asarray(v_phi, dtype=float),
                           np.cross(omega, d).reshape(-1)])


def fd_jacobian(f, x, eps=1e-7):
    """Dense central-difference Jacobian of f at x."""
    f0 = np.atleast_1d(f(x))
    J = np.empty((f0.size, x.size))
    for k in range(x.size):
        e = np.zeros_like(x)
        e[k] = eps
        J[:, k] = (np.atleast_1d(f(x + e)) - np.atleast_1d(f(x - e))) / (2 * eps)
    return J


def transform_config(q, R, c):
    """Apply the common rigid motion (R, c) to a 12-vector configuration."""
    phi, d = q[:3], q[3:].reshape(3, 3)
    return np.concatenate([R @ phi + c, (d @ R.T).reshape(-1)])


def cylindrical_consistent_pair(joint, q_a0, q_b0, rng, span=1.0):
    """Random configuration pair that satisfies a compiled cylindrical joint.

    Starts from consistent data and composes the joint's exact symmetries:
    a common rigid motion, a relative slide along the axis, and a relative
    rotation of body B about the axis line.
    """
    R = random_rotation(rng)
    c = span * rng.standard_normal(3)
    q_a = transform_config(q_a0, R, c)
    q_b = transform_config(q_b0, R, c)

    d_a = q_a[3:].reshape(3, 3)
    n = joint.n_local @ d_a
    p_a = q_a[:3] + joint.X_a @ d_a

    # slide along the axis
    q_b[:3] += rng.uniform(-span, span) * n

    # spin body B about the axis line through p_a
    theta = rng.uniform(-np.pi, np.pi)
    Rot = Rotation.from_rotvec(theta * n).as_matrix()
    d_b = q_b[3:].reshape(3, 3)
    q_b = np.concatenate([p_a + Rot @ (q_b[:3] - p_a), (d_b @ Rot.T).reshape(-1)])
    return q_a, q_b


def _system(name):
    return build_system(load_scenario(name))


@pytest.fixture(scope="session")
def flying_pair():
    return _system("flying_pair")


@pytest.fixture(scope="session")
def slider_crank():
    return _system("slider_crank")


@pytest.fixture(scope="session")
def closed_loop():
    return _system("closed_loop")
