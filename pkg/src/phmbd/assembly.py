"""Assembly of multibody systems from bodies, pairs, and applied loads.

The system state is x = (q, v, lambda) with q and v the stacked body
configurations and velocities (12 per body) and lambda the constraint
multipliers, internal orthonormality rows first (6 per body, in body
order), then the joint rows in declaration order. The dynamics take the
differential-algebraic form

    E x_dot = J(x) z(x) + B(q) u,    E^T z = grad H,

with skew-symmetric J, so the Hamiltonian obeys dH/dt = y^T u with the
collocated output y = B^T z. All constraints are quadratic in q, hence the
stacked Jacobian is affine in q and the per-row Hessians are constant;
the latter are probed once at construction and reused by the integrator.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from . import joints as joints_mod
from .directors import (
    RigidBody,
    angular_momentum,
    external_wrench_map,
    hat,
    internal_constraint_gradient,
    internal_constraints,
    mass_matrix,
)
from .joints import GROUND_CONFIG, CompiledJoint

__all__ = [
    "BodyLoad",
    "MultibodySystem",
    "SystemState",
    "stack_constraints",
    "constraint_velocity_gradient",
    "constraint_hessian_contraction",
    "potential",
    "hamiltonian",
    "total_angular_momentum",
    "input_assembly",
    "input_map_jacobian",
    "ph_operators",
    "ggl_operators",
    "consistency",
]


@dataclass(frozen=True)
class BodyLoad:
    """Time-dependent wrench applied to one body.

    wrench(t) returns the 6-vector (F, tau) in inertial components; the
    force acts at the material point r_material (director components).
    """

    body: int
    wrench: Callable[[float], np.ndarray]
    r_material: np.ndarray = field(default_factory=lambda: np.zeros(3))


@dataclass(frozen=True)
class SystemState:
    """State snapshot (t, q, v, lambda[, gamma]) of an assembled system."""

    t: float
    q: np.ndarray
    v: np.ndarray
    lam: np.ndarray
    gamma: np.ndarray | None = None


class MultibodySystem:
    """A set of rigid bodies coupled by compiled kinematic pairs.

    Attributes:
        bodies: tuple of RigidBody, indices dense from zero
        joints: tuple of CompiledJoint in declaration order
        loads: tuple of BodyLoad
        n: configuration dimension, 12 per body
        m_internal: number of orthonormality rows, 6 per body
        m: total constraint count
        mass_diag: diagonal of the constant mass matrix, shape (n,)
    """

    def __init__(self, bodies, joints=(), loads=()):
        bodies = tuple(bodies)
        indices = [b.index for b in bodies]
        if sorted(indices) != list(range(len(bodies))):
            raise ValueError(f"body indices must be dense from 0, got {indices}")
        self.bodies = tuple(sorted(bodies, key=lambda b: b.index))
        self.joints = tuple(joints)
        self.loads = tuple(loads)
        for joint in self.joints:
            if not isinstance(joint, CompiledJoint):
                raise TypeError("joints must be compiled before assembly")
            if not (0 <= joint.body_a < len(bodies) and 0 <= joint.body_b < len(bodies)):
                raise ValueError(f"joint references unknown body ({joint.body_a}, {joint.body_b})")
        for load in self.loads:
            if not 0 <= load.body < len(bodies):
                raise ValueError(f"load references unknown body {load.body}")

        self.n = 12 * len(self.bodies)
        self.m_internal = 6 * len(self.bodies)
        self.m = self.m_internal + sum(j.count for j in self.joints)
        self.mass_diag = np.concatenate([mass_matrix(b) for b in self.bodies])
        self.mass_diag_inv = 1.0 / self.mass_diag

        # gravity potential is linear, so its gradient is constant
        grad = np.zeros(self.n)
        for k, body in enumerate(self.bodies):
            grad[12 * k:12 * k + 3] = -body.mass * body.gravity
        self._grad_potential = grad

        self._joint_rows = []
        r = self.m_internal
        for joint in self.joints:
            self._joint_rows.append(r)
            r += joint.count

        self._hessian_stack = self._build_hessian_stack()
        _, self._jacobian_at_zero = stack_constraints(self, np.zeros(self.n))

    def body_config(self, q, index):
        return q[12 * index:12 * index + 12]

    def _joint_configs(self, q, joint):
        q_a = self.body_config(q, joint.body_a)
        q_b = GROUND_CONFIG if joint.is_ground else self.body_config(q, joint.body_b)
        return q_a, q_b

    def _build_hessian_stack(self):
        """Constant Hessians of every constraint row, shape (m, n, n).

        Internal rows have closed-form Hessians; joint rows are probed from
        the affine Jacobian by evaluating it on configuration basis vectors
        with the ground pseudo-body held fixed.
        """
        H = np.zeros((self.m, self.n, self.n))
        eye = np.eye(3)
        for k in range(len(self.bodies)):
            r0, c0 = 6 * k, 12 * k + 3
            for i in range(3):
                H[r0 + i, c0 + 3 * i:c0 + 3 * i + 3, c0 + 3 * i:c0 + 3 * i + 3] = eye
            for row, i, j in ((3, 0, 1), (4, 0, 2), (5, 1, 2)):
                H[r0 + row, c0 + 3 * i:c0 + 3 * i + 3, c0 + 3 * j:c0 + 3 * j + 3] = eye
                H[r0 + row, c0 + 3 * j:c0 + 3 * j + 3, c0 + 3 * i:c0 + 3 * i + 3] = eye

        zero12 = np.zeros(12)
        for joint, r0 in zip(self.joints, self._joint_rows):
            rows = slice(r0, r0 + joint.count)
            ca = 12 * joint.body_a
            if joint.is_ground:
                J0 = joints_mod.jacobian(joint, zero12, GROUND_CONFIG)
                for col in range(12):
                    e = np.zeros(12)
                    e[col] = 1.0
                    dJ = joints_mod.jacobian(joint, e, GROUND_CONFIG) - J0
                    H[rows, ca:ca + 12, ca + col] = dJ[:, :12]
            else:
                cb = 12 * joint.body_b
                J0 = joints_mod.jacobian(joint, zero12, zero12)
                for col in range(24):
                    e = np.zeros(24)
                    e[col] = 1.0
                    dJ = joints_mod.jacobian(joint, e[:12], e[12:]) - J0
                    target = ca + col if col < 12 else cb + col - 12
                    H[rows, ca:ca + 12, target] = dJ[:, :12]
                    H[rows, cb:cb + 12, target] = dJ[:, 12:]
        return H


def stack_constraints(sys, q):
    """All constraint values and their Jacobian at configuration q.

    Returns (g, G) with shapes (m,) and (m, n); internal rows first, then
    joint rows in declaration order. Ground pairs contribute columns only
    for their real body.
    """
    q = np.asarray(q, dtype=float)
    g = np.empty(sys.m)
    G = np.zeros((sys.m, sys.n))
    for k in range(len(sys.bodies)):
        qk = q[12 * k:12 * k + 12]
        g[6 * k:6 * k + 6] = internal_constraints(qk)
        G[6 * k:6 * k + 6, 12 * k:12 * k + 12] = internal_constraint_gradient(qk)
    for joint, r0 in zip(sys.joints, sys._joint_rows):
        q_a, q_b = sys._joint_configs(q, joint)
        rows = slice(r0, r0 + joint.count)
        g[rows] = joints_mod.residual(joint, q_a, q_b)
        J = joints_mod.jacobian(joint, q_a, q_b)
        ca = 12 * joint.body_a
        G[rows, ca:ca + 12] = J[:, :12]
        if not joint.is_ground:
            cb = 12 * joint.body_b
            G[rows, cb:cb + 12] = J[:, 12:]
    return g, G


def constraint_velocity_gradient(sys, v):
    """Configuration derivative of the velocity constraints, shape (m, n).

    For g quadratic in q the map q -> G(q) v is affine with constant slope,
    so d/dq [G(q) v] = G(v) - G(0) exactly, with the ground pseudo-body
    held fixed in both evaluations.
    """
    _, G = stack_constraints(sys, v)
    return G - sys._jacobian_at_zero


def constraint_hessian_contraction(sys, lam):
    """Sum of constraint Hessians weighted by multipliers, K = sum lam_j H_j."""
    return np.tensordot(np.asarray(lam, dtype=float), sys._hessian_stack, axes=(0, 0))


def potential(sys, q):
    """Gravitational potential and its gradient at configuration q."""
    grad = sys._grad_potential
    return float(grad @ np.asarray(q, dtype=float)), grad


def hamiltonian(sys, q, v):
    """Total energy H = kinetic + potential."""
    v = np.asarray(v, dtype=float)
    V, _ = potential(sys, q)
    return 0.5 * float(v @ (sys.mass_diag * v)) + V


def total_angular_momentum(sys, q, v):
    """System angular momentum about the inertial origin, shape (3,)."""
    L = np.zeros(3)
    for k, body in enumerate(sys.bodies):
        L += angular_momentum(body, q[12 * k:12 * k + 12], v[12 * k:12 * k + 12])
    return L


def input_assembly(sys, q, t):
    """Generalized force of all applied loads at time t, shape (n,)."""
    f = np.zeros(sys.n)
    for load in sys.loads:
        u = np.asarray(load.wrench(t), dtype=float)
        qk = sys.body_config(q, load.body)
        B = external_wrench_map(qk, load.r_material)
        f[12 * load.body:12 * load.body + 12] += B @ u
    return f


def input_map_jacobian(sys, q, t):
    """Configuration derivative of input_assembly, shape (n, n).

    The wrench map is linear in the directors through both the moment arm
    and the director distribution, so each loaded body contributes a 12x12
    block affine in q.
    """
    W = np.zeros((sys.n, sys.n))
    for load in sys.loads:
        u = np.asarray(load.wrench(t), dtype=float)
        F, tau = u[:3], u[3:]
        qk = sys.body_config(q, load.body)
        d = qk[3:].reshape(3, 3)
        r = load.r_material @ d
        c_hat = hat(np.cross(r, F) + tau)
        F_hat = hat(F)
        b0 = 12 * load.body
        for i in range(3):
            di_hat = hat(d[i])
            rows = slice(b0 + 3 + 3 * i, b0 + 6 + 3 * i)
            for j in range(3):
                cols = slice(b0 + 3 + 3 * j, b0 + 6 + 3 * j)
                block = 0.5 * load.r_material[j] * (di_hat @ F_hat)
                if i == j:
                    block = block + 0.5 * c_hat
                W[rows, cols] += block
    return W


def consistency(sys, q, v):
    """Constraint satisfaction measures (max |g|, max |G v|)."""
    g, G = stack_constraints(sys, q)
    return float(np.abs(g).max()), float(np.abs(G @ v).max())


def _assemble_skew(blocks, sizes):
    """Assemble a block matrix that is skew-symmetric by construction.

    blocks maps (i, j) with i <= j to the block; the (j, i) block is the
    exact negated transpose, so J + J^T vanishes identically.
    """
    total = sum(sizes)
    offs = np.concatenate([[0], np.cumsum(sizes)])
    J = np.zeros((total, total))
    for (i, j), block in blocks.items():
        J[offs[i]:offs[i + 1], offs[j]:offs[j + 1]] = block
        if i != j:
            J[offs[j]:offs[j + 1], offs[i]:offs[i + 1]] = -block.T
    return J


def ph_operators(sys, q, v, lam):
    """Operator triple (E, J, z) of the index-2 formulation at (q, v, lam).

    Sizes (2n + m) square; E = diag(I, M, 0), J is skew with the constraint
    Jacobian in its coupling blocks, and z = (grad V, v, lambda) satisfies
    E^T z = grad H.
    """
    q = np.asarray(q, dtype=float)
    v = np.asarray(v, dtype=float)
    lam = np.asarray(lam, dtype=float)
    n, m = sys.n, sys.m
    _, G = stack_constraints(sys, q)
    _, gradV = potential(sys, q)

    E = np.zeros((2 * n + m, 2 * n + m))
    E[:n, :n] = np.eye(n)
    E[n:2 * n, n:2 * n] = np.diag(sys.mass_diag)

    J = _assemble_skew(
        {(0, 1): np.eye(n), (1, 2): -G.T},
        [n, n, m],
    )
    z = np.concatenate([gradV, v, lam])
    return E, J, z


def ggl_operators(sys, q, v, lam, gamma):
    """Operator triple (E, J, z) of the index-reduced formulation.

    Sizes (2n + 2m) square. The extra multiplier block enforces the
    velocity-level constraints; J remains skew, with
    J44 = D M^-1 G^T - (D M^-1 G^T)^T for D = d/dq [G(q) v].
    """
    q = np.asarray(q, dtype=float)
    v = np.asarray(v, dtype=float)
    n, m = sys.n, sys.m
    _, G = stack_constraints(sys, q)
    _, gradV = potential(sys, q)
    D = constraint_velocity_gradient(sys, v)
    Minv = sys.mass_diag_inv
    GMinv = G * Minv
    A = (D * Minv) @ G.T

    E = np.zeros((2 * n + 2 * m, 2 * n + 2 * m))
    E[:n, :n] = np.eye(n)
    E[n:2 * n, n:2 * n] = np.diag(sys.mass_diag)

    J = _assemble_skew(
        {
            (0, 1): np.eye(n),
            (0, 3): GMinv.T,
            (1, 2): -G.T,
            (1, 3): -D.T,
            (2, 3): GMinv @ G.T,
            (3, 3): A - A.T,
        },
        [n, n, m, m],
    )
    z = np.concatenate([gradV, v, lam, gamma])
    return E, J, z
