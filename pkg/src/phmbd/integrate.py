"""Implicit midpoint integration of the constrained dynamics.

Two schemes share one Newton kernel. The plain midpoint scheme advances
the index-2 form and enforces the hidden velocity constraints only at the
midpoints; the augmented scheme carries a second multiplier block that
enforces velocity constraints at the grid points as well. Both evaluate
every configuration-dependent quantity at the interval midpoint, which is
what makes the discrete energy and angular-momentum balances exact.

All residuals are polynomial in the unknowns (quadratic through the
constraint Jacobian, at most cubic in the augmented scheme), so the
analytic Newton matrices assemble from constant constraint Hessians.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .assembly import (
    SystemState,
    constraint_hessian_contraction,
    constraint_velocity_gradient,
    hamiltonian,
    input_assembly,
    input_map_jacobian,
    potential,
    stack_constraints,
    total_angular_momentum,
)

__all__ = [
    "IntegratorConfig",
    "NewtonResult",
    "StepResult",
    "Trajectory",
    "IntegrationError",
    "SCHEME_ALIASES",
    "midpoint_residual",
    "midpoint_jacobian",
    "ggl_residual",
    "ggl_jacobian",
    "finite_difference_jacobian",
    "newton_solve",
    "step",
    "simulate",
]

SCHEME_ALIASES = {
    "mp": "mp",
    "ph-mp": "mp",
    "mp-ggl": "mp-ggl",
    "ph-mp-ggl": "mp-ggl",
}


def _canonical_scheme(name):
    key = name.strip().lower()
    if key not in SCHEME_ALIASES:
        raise ValueError(f"unknown scheme {name!r}; expected one of {sorted(SCHEME_ALIASES)}")
    return SCHEME_ALIASES[key]


@dataclass(frozen=True)
class IntegratorConfig:
    """Time stepping parameters.

    Attributes:
        scheme: "mp" for the plain midpoint scheme, "mp-ggl" for the
            velocity-constraint augmented variant (prefixed aliases accepted)
        h: uniform step size
        t_end: final time, an integer multiple of h
        newton_tol: infinity-norm residual tolerance of the corrector
        newton_max_iter: iteration cap of the corrector
        jacobian_mode: "analytic" or "fd" (finite-difference cross-check)
    """

    h: float
    t_end: float
    scheme: str = "mp"
    newton_tol: float = 1e-9
    newton_max_iter: int = 50
    jacobian_mode: str = "analytic"

    def __post_init__(self):
        object.__setattr__(self, "scheme", _canonical_scheme(self.scheme))
        if self.h <= 0.0:
            raise ValueError(f"step size must be positive, got {self.h}")
        if self.jacobian_mode not in ("analytic", "fd"):
            raise ValueError(f"unknown jacobian_mode {self.jacobian_mode!r}")


@dataclass(frozen=True)
class NewtonResult:
    x: np.ndarray
    converged: bool
    iterations: int
    residual_norm: float
    message: str = ""


@dataclass(frozen=True)
class StepResult:
    state: SystemState
    iterations: int


class IntegrationError(RuntimeError):
    """Newton corrector failure, annotated with where the step stalled."""

    def __init__(self, message, time, step_index, residual_norm, iterations):
        super().__init__(message)
        self.time = time
        self.step_index = step_index
        self.residual_norm = residual_norm
        self.iterations = iterations


def midpoint_residual(sys, state, y, h):
    """Nonlinear system of one plain midpoint step, shape (2n + m,).

    y stacks the unknowns (q_next, v_next, lambda_mid). The rows are the
    position update against the midpoint velocity, the momentum balance
    with all forces at the midpoint, and the h-scaled midpoint velocity
    constraint.
    """
    n, m = sys.n, sys.m
    q1, v1, lam = y[:n], y[n:2 * n], y[2 * n:]
    qm = 0.5 * (state.q + q1)
    vm = 0.5 * (state.v + v1)
    _, G = stack_constraints(sys, qm)
    _, gradV = potential(sys, qm)

    r = np.empty(2 * n + m)
    r[:n] = (q1 - state.q) - h * vm
    r2 = sys.mass_diag * (v1 - state.v) + h * gradV + h * (G.T @ lam)
    if sys.loads:
        r2 -= h * input_assembly(sys, qm, state.t + 0.5 * h)
    r[n:2 * n] = r2
    r[2 * n:] = h * (G @ vm)
    return r


def midpoint_jacobian(sys, state, y, h):
    """Analytic derivative of midpoint_residual with respect to y."""
    n, m = sys.n, sys.m
    q1, v1, lam = y[:n], y[n:2 * n], y[2 * n:]
    qm = 0.5 * (state.q + q1)
    vm = 0.5 * (state.v + v1)
    _, G = stack_constraints(sys, qm)

    J = np.zeros((2 * n + m, 2 * n + m))
    J[:n, :n] = np.eye(n)
    J[:n, n:2 * n] = -0.5 * h * np.eye(n)

    Jq = 0.5 * h * constraint_hessian_contraction(sys, lam)
    if sys.loads:
        Jq -= 0.5 * h * input_map_jacobian(sys, qm, state.t + 0.5 * h)
    J[n:2 * n, :n] = Jq
    J[n:2 * n, n:2 * n] = np.diag(sys.mass_diag)
    J[n:2 * n, 2 * n:] = h * G.T

    J[2 * n:, :n] = 0.5 * h * constraint_velocity_gradient(sys, vm)
    J[2 * n:, n:2 * n] = 0.5 * h * G
    return J


def ggl_residual(sys, state, y, h):
    """Nonlinear system of one augmented midpoint step, shape (2n + 2m,).

    y stacks (q_next, v_next, lambda_mid, gamma_mid). On top of the plain
    scheme, the position update absorbs the projection term M^-1 G^T gamma
    and the last block enforces the time derivative of the velocity
    constraint, keeping both g and G v at the solver tolerance on the grid.
    """
    n, m = sys.n, sys.m
    q1, v1, lam, gam = y[:n], y[n:2 * n], y[2 * n:2 * n + m], y[2 * n + m:]
    qm = 0.5 * (state.q + q1)
    vm = 0.5 * (state.v + v1)
    _, G = stack_constraints(sys, qm)
    _, gradV = potential(sys, qm)
    D = constraint_velocity_gradient(sys, vm)
    Minv = sys.mass_diag_inv
    if sys.loads:
        f_ext = input_assembly(sys, qm, state.t + 0.5 * h)
    else:
        f_ext = np.zeros(n)

    r = np.empty(2 * n + 2 * m)
    r[:n] = (q1 - state.q) - h * vm - h * (Minv * (G.T @ gam))
    r[n:2 * n] = (
        sys.mass_diag * (v1 - state.v)
        + h * gradV
        + h * (G.T @ lam)
        + h * (D.T @ gam)
        - h * f_ext
    )
    r[2 * n:2 * n + m] = h * (G @ vm + G @ (Minv * (G.T @ gam)))
    r[2 * n + m:] = h * (
        -G @ (Minv * gradV)
        + D @ vm
        - G @ (Minv * (G.T @ lam))
        + D @ (Minv * (G.T @ gam))
        - G @ (Minv * (D.T @ gam))
        + G @ (Minv * f_ext)
    )
    return r


def ggl_jacobian(sys, state, y, h):
    """Analytic derivative of ggl_residual with respect to y."""
    n, m = sys.n, sys.m
    q1, v1, lam, gam = y[:n], y[n:2 * n], y[2 * n:2 * n + m], y[2 * n + m:]
    qm = 0.5 * (state.q + q1)
    vm = 0.5 * (state.v + v1)
    _, G = stack_constraints(sys, qm)
    _, gradV = potential(sys, qm)
    D = constraint_velocity_gradient(sys, vm)
    Minv = sys.mass_diag_inv
    GMinv = G * Minv
    K_lam = constraint_hessian_contraction(sys, lam)
    K_gam = constraint_hessian_contraction(sys, gam)
    w = Minv * (G.T @ gam)
    D_w = constraint_velocity_gradient(sys, w)
    if sys.loads:
        tmid = state.t + 0.5 * h
        f_ext = input_assembly(sys, qm, tmid)
        W = input_map_jacobian(sys, qm, tmid)
    else:
        f_ext = np.zeros(n)
        W = np.zeros((n, n))

    J = np.zeros((2 * n + 2 * m, 2 * n + 2 * m))
    i_q, i_v = slice(0, n), slice(n, 2 * n)
    i_l, i_g = slice(2 * n, 2 * n + m), slice(2 * n + m, 2 * n + 2 * m)

    J[i_q, i_q] = np.eye(n) - 0.5 * h * (Minv[:, None] * K_gam)
    J[i_q, i_v] = -0.5 * h * np.eye(n)
    J[i_q, i_g] = -h * (Minv[:, None] * G.T)

    J[i_v, i_q] = 0.5 * h * (K_lam - W)
    J[i_v, i_v] = np.diag(sys.mass_diag) + 0.5 * h * K_gam
    J[i_v, i_l] = h * G.T
    J[i_v, i_g] = h * D.T

    J[i_l, i_q] = 0.5 * h * (D + D_w + GMinv @ K_gam)
    J[i_l, i_v] = 0.5 * h * G
    J[i_l, i_g] = h * (GMinv @ G.T)

    J[i_g, i_q] = 0.5 * h * (
        -constraint_velocity_gradient(sys, Minv * gradV)
        - constraint_velocity_gradient(sys, Minv * (G.T @ lam))
        - GMinv @ K_lam
        + D @ (Minv[:, None] * K_gam)
        - constraint_velocity_gradient(sys, Minv * (D.T @ gam))
        + constraint_velocity_gradient(sys, Minv * f_ext)
        + GMinv @ W
    )
    J[i_g, i_v] = 0.5 * h * (2.0 * D + D_w - GMinv @ K_gam)
    J[i_g, i_l] = -h * (GMinv @ G.T)
    A = (D * Minv) @ G.T
    J[i_g, i_g] = h * (A - A.T)
    return J


def finite_difference_jacobian(fn, x):
    """Central-difference Jacobian of fn at x.

    Exact up to roundoff for quadratic residuals, which covers the plain
    scheme; the augmented scheme's cubic terms contribute O(dx^2).
    """
    x = np.asarray(x, dtype=float)
    r0 = fn(x)
    J = np.empty((r0.size, x.size))
    for j in range(x.size):
        dx = np.sqrt(np.finfo(float).eps) * max(1.0, abs(x[j]))
        xp = x.copy()
        xm = x.copy()
        xp[j] += dx
        xm[j] -= dx
        J[:, j] = (fn(xp) - fn(xm)) / (2.0 * dx)
    return J


def newton_solve(residual_fn, jacobian_fn, x0, tol=1e-9, max_iter=50):
    """Full-step Newton iteration with an infinity-norm stop criterion.

    Returns a NewtonResult instead of raising: singular linear solves and
    non-finite residuals are reported as non-converged results carrying the
    last residual norm and iteration count.
    """
    x = np.array(x0, dtype=float)
    norm = np.inf
    for it in range(max_iter + 1):
        r = residual_fn(x)
        if not np.all(np.isfinite(r)):
            return NewtonResult(x, False, it, norm, "non-finite residual")
        norm = float(np.abs(r).max())
        if norm <= tol:
            return NewtonResult(x, True, it, norm)
        if it == max_iter:
            break
        try:
            dx = np.linalg.solve(jacobian_fn(x), -r)
        except np.linalg.LinAlgError:
            return NewtonResult(x, False, it, norm, "singular Newton matrix")
        if not np.all(np.isfinite(dx)):
            return NewtonResult(x, False, it, norm, "non-finite Newton update")
        x = x + dx
    return NewtonResult(x, False, max_iter, norm, "no convergence within max_iter")


def _default_guess(sys, state, h, scheme):
    parts = [state.q + h * state.v, state.v, state.lam]
    if scheme == "mp-ggl":
        parts.append(state.gamma if state.gamma is not None else np.zeros(sys.m))
    return np.concatenate(parts)


def step(sys, state, config, guess=None):
    """Advance one step, returning the new state and Newton iteration count.

    The converged midpoint multipliers are stored on the returned state.
    Raises IntegrationError when the corrector fails.
    """
    n, m = sys.n, sys.m
    scheme = config.scheme
    h = config.h
    if scheme == "mp":
        residual_fn = lambda y: midpoint_residual(sys, state, y, h)
        jacobian_fn = lambda y: midpoint_jacobian(sys, state, y, h)
    else:
        residual_fn = lambda y: ggl_residual(sys, state, y, h)
        jacobian_fn = lambda y: ggl_jacobian(sys, state, y, h)
    if config.jacobian_mode == "fd":
        jacobian_fn = lambda y: finite_difference_jacobian(residual_fn, y)

    if guess is None:
        guess = _default_guess(sys, state, h, scheme)
    result = newton_solve(
        residual_fn, jacobian_fn, guess,
        tol=config.newton_tol, max_iter=config.newton_max_iter,
    )
    if not result.converged:
        raise IntegrationError(
            f"Newton corrector failed at t = {state.t:.6g}: {result.message} "
            f"(residual {result.residual_norm:.3e} after {result.iterations} iterations)",
            time=state.t,
            step_index=None,
            residual_norm=result.residual_norm,
            iterations=result.iterations,
        )
    y = result.x
    new = SystemState(
        t=state.t + h,
        q=y[:n],
        v=y[n:2 * n],
        lam=y[2 * n:2 * n + m],
        gamma=y[2 * n + m:] if scheme == "mp-ggl" else None,
    )
    return StepResult(new, result.iterations)


@dataclass
class Trajectory:
    """Dense output of a simulation on the uniform grid t_k = k h.

    Row 0 holds the initial state with the configured multiplier guess;
    row k > 0 holds the state after step k with that step's converged
    midpoint multipliers. When the corrector fails, the arrays stop at the
    last completed step and `failure` records where and why.
    """

    t: np.ndarray
    q: np.ndarray
    v: np.ndarray
    lam: np.ndarray
    H: np.ndarray
    L: np.ndarray
    max_g: np.ndarray
    max_gv: np.ndarray
    newton_iters: np.ndarray
    scheme: str
    h: float
    gamma: np.ndarray | None = None
    failure: dict | None = None
    metadata: dict = field(default_factory=dict)

    @property
    def completed(self):
        return self.failure is None

    @property
    def rows(self):
        return self.t.size


def simulate(sys, state0, config):
    """Run the configured scheme from state0 and collect a Trajectory.

    Each step warm-starts from the previous solution: the configuration is
    linearly extrapolated, velocities and multipliers carried over. The
    first corrector failure terminates the run; the partial trajectory is
    returned with the failure step, time, and residual norm recorded.
    """
    from .assembly import consistency

    steps_f = config.t_end / config.h
    steps = int(round(steps_f))
    if steps < 1 or abs(steps_f - steps) > 1e-9 * max(1.0, steps):
        raise ValueError(
            f"t_end = {config.t_end} is not a positive integer multiple of h = {config.h}"
        )
    n, m = sys.n, sys.m
    scheme = config.scheme
    with_gamma = scheme == "mp-ggl"

    t = np.empty(steps + 1)
    q = np.empty((steps + 1, n))
    v = np.empty((steps + 1, n))
    lam = np.empty((steps + 1, m))
    gamma = np.empty((steps + 1, m)) if with_gamma else None
    H = np.empty(steps + 1)
    L = np.empty((steps + 1, 3))
    max_g = np.empty(steps + 1)
    max_gv = np.empty(steps + 1)
    iters = np.zeros(steps + 1, dtype=int)

    state = state0
    if with_gamma and state.gamma is None:
        state = SystemState(state.t, state.q, state.v, state.lam, np.zeros(m))

    def record(k, st, its):
        t[k] = st.t
        q[k] = st.q
        v[k] = st.v
        lam[k] = st.lam
        if with_gamma:
            gamma[k] = st.gamma
        H[k] = hamiltonian(sys, st.q, st.v)
        L[k] = total_angular_momentum(sys, st.q, st.v)
        max_g[k], max_gv[k] = consistency(sys, st.q, st.v)
        iters[k] = its

    record(0, state, 0)
    failure = None
    prev_q = None
    done = 0
    for k in range(1, steps + 1):
        if prev_q is None:
            guess = None
        else:
            parts = [2.0 * state.q - prev_q, state.v, state.lam]
            if with_gamma:
                parts.append(state.gamma)
            guess = np.concatenate(parts)
        try:
            result = step(sys, state, config, guess=guess)
        except IntegrationError as err:
            failure = {
                "step": k,
                "time": state.t,
                "residual_norm": err.residual_norm,
                "iterations": err.iterations,
                "message": str(err),
            }
            break
        prev_q = state.q
        state = result.state
        record(k, state, result.iterations)
        done = k

    rows = done + 1
    return Trajectory(
        t=t[:rows],
        q=q[:rows],
        v=v[:rows],
        lam=lam[:rows],
        gamma=gamma[:rows] if with_gamma else None,
        H=H[:rows],
        L=L[:rows],
        max_g=max_g[:rows],
        max_gv=max_gv[:rows],
        newton_iters=iters[:rows],
        scheme=scheme,
        h=config.h,
        failure=failure,
    )
