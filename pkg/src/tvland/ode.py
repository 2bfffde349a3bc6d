"""Integrators for the tracking ODE and the frozen-time flow.

The implicit (backward Euler) integrator mirrors the limit construction the
discrete engine approximates; the adaptive explicit integrator serves as a
high-accuracy reference oracle for convergence studies.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.integrate import solve_ivp

from .discrete import check_local_solution, discrete_trajectory
from .errors import ImplicitSolveError, StiffnessError
from .geometry import geometry, ode_rhs, trajectory_with_diagnostics
from .problem import ProblemDef, Trajectory

_BE_RESID_TOL = 1e-10
_BE_MAX_NEWTON = 60


def _implicit_step(p: ProblemDef, y_prev: np.ndarray, t: float, dt: float,
                   resid_tol: float) -> np.ndarray:
    """Solve y = y_prev + dt * rhs(y, t) by damped Newton with an FD Jacobian."""
    n = p.n

    def resid(y):
        return y - y_prev - dt * ode_rhs(p, y, t)

    y = y_prev + dt * ode_rhs(p, y_prev, t)  # explicit predictor
    r = resid(y)
    rnorm = np.linalg.norm(r)
    for _ in range(_BE_MAX_NEWTON):
        if rnorm <= resid_tol:
            return y
        Jr = np.empty((n, n))
        for j in range(n):
            h = 1e-7 * (1.0 + abs(y[j]))
            e = np.zeros(n)
            e[j] = h
            Jr[:, j] = (resid(y + e) - r) / h
        try:
            delta = np.linalg.solve(Jr, -r)
        except np.linalg.LinAlgError as exc:
            raise ImplicitSolveError(f"singular Newton system at t = {t:.6g}") from exc
        # damp by half while the residual grows
        lam = 1.0
        for _ in range(40):
            y_new = y + lam * delta
            r_new = resid(y_new)
            rn = np.linalg.norm(r_new)
            if rn < rnorm:
                break
            lam *= 0.5
        else:
            raise ImplicitSolveError(
                f"Newton damping stalled at t = {t:.6g}, residual {rnorm:.3e}")
        y, r, rnorm = y_new, r_new, rn
    raise ImplicitSolveError(
        f"implicit step at t = {t:.6g} stopped at residual {rnorm:.3e}")


def backward_euler_trajectory(p: ProblemDef, x0: np.ndarray, dt: float,
                              resid_tol: float = _BE_RESID_TOL,
                              check_x0: bool = True) -> Trajectory:
    """Integrate the tracking ODE with implicit Euler steps of size ~dt.

    The grid is snapped to N = round(T / dt) even steps so the final point
    lands exactly on the horizon.  Each step solves the implicit equation
    y_k = y_{k-1} + dt rhs(y_k, t_k) to residual ``resid_tol``.
    """
    if dt <= 0:
        raise ValueError(f"dt must be positive, got {dt}")
    x0 = np.asarray(x0, dtype=float)
    if check_x0:
        check_local_solution(p, x0)
    n_steps = max(1, round(p.horizon / dt))
    dte = p.horizon / n_steps
    times = np.linspace(0.0, p.horizon, n_steps + 1)
    states = np.empty((n_steps + 1, p.n))
    states[0] = x0
    for k in range(1, n_steps + 1):
        states[k] = _implicit_step(p, states[k - 1], times[k], dte, resid_tol)
    return trajectory_with_diagnostics(p, times, states)


def _reference_solution(p: ProblemDef, x0: np.ndarray, rel_tol: float):
    """Dense adaptive Runge-Kutta solution of the tracking ODE on [0, T]."""
    sol = solve_ivp(
        lambda t, y: ode_rhs(p, y, t),
        (0.0, p.horizon),
        np.asarray(x0, dtype=float),
        method="RK45",
        rtol=rel_tol,
        atol=rel_tol * 1e-2,
        dense_output=True,
    )
    if not sol.success:
        raise StiffnessError(f"reference integration failed: {sol.message}")
    return sol


def integrate_reference(p: ProblemDef, x0: np.ndarray, rel_tol: float = 1e-9,
                        n_samples: int = 512) -> Trajectory:
    """High-accuracy explicit reference trajectory, sampled on a uniform grid.

    The underlying integrator is adaptive with local error control at
    ``rel_tol``; the returned trajectory holds ``n_samples + 1`` evenly
    spaced points of its dense output.
    """
    sol = _reference_solution(p, x0, rel_tol)
    times = np.linspace(0.0, p.horizon, n_samples + 1)
    states = sol.sol(times).T
    return trajectory_with_diagnostics(p, times, states)


def _polish_equilibrium(rhs, y0: np.ndarray, tol: float,
                        radius: float) -> np.ndarray | None:
    """Newton-refine a nearby sink of the flow field, or None.

    Accepts only when Newton converges within ``radius`` of ``y0`` and the
    field Jacobian at the solution has no eigenvalue with positive real part
    (a saddle or source is not the flow limit of a generic start).
    """
    n = y0.size
    y = y0.copy()
    r = rhs(y)
    for _ in range(30):
        rnorm = np.linalg.norm(r)
        Jr = np.empty((n, n))
        for j in range(n):
            h = 1e-7 * (1.0 + abs(y[j]))
            e = np.zeros(n)
            e[j] = h
            Jr[:, j] = (rhs(y + e) - r) / h
        if rnorm <= 1e-3 * tol:
            lam_max = float(np.max(np.linalg.eigvals(Jr).real))
            scale = max(1.0, float(np.linalg.norm(Jr, 2)))
            if lam_max > 1e-6 * scale:
                return None
            return y
        try:
            delta = np.linalg.solve(Jr, -r)
        except np.linalg.LinAlgError:
            return None
        y = y + delta
        if np.linalg.norm(y - y0) > radius:
            return None
        r = rhs(y)
    return None


def frozen_time_flow(p: ProblemDef, x: np.ndarray, t: float,
                     s_max: float | None = None,
                     tol: float = 1e-8) -> tuple[np.ndarray, bool]:
    """Integrate the time-frozen dynamics until the velocity drops below tol.

    The flow is dx/ds = -eta(x, t)/alpha + theta(x) d'(t) with both t and
    d'(t) held fixed, run until |dx/ds| <= tol (converged) or s reaches
    ``s_max`` (default 100 alpha; not converged).  Once the velocity is
    moderately small the nearby equilibrium is refined by Newton and
    returned, provided it is a verified sink; flows stalling near saddles or
    under moving data (where the frozen field has no equilibria at all) run
    out their budget and report ``converged = False``.
    """
    if s_max is None:
        s_max = 100.0 * p.alpha
    x = np.asarray(x, dtype=float)
    dd = np.asarray(p.data_rate(t), dtype=float)

    if p.m == 0:
        def rhs_y(y):
            return -np.asarray(p.grad_objective(y, t), dtype=float) / p.alpha
    else:
        def rhs_y(y):
            geom = geometry(p, y)
            e = geom.projector @ np.asarray(p.grad_objective(y, t), dtype=float)
            return -e / p.alpha + geom.theta @ dd

    def rhs(s, y):
        return rhs_y(y)

    speed = np.linalg.norm(rhs_y(x))
    if speed <= tol:
        return x.copy(), True

    # Crossing speed under which Newton refinement of the limit is attempted.
    switch = max(1e-4, 10.0 * tol)

    def slow(s, y):
        return np.linalg.norm(rhs_y(y)) - switch

    slow.terminal = True
    slow.direction = -1

    y = x.copy()
    s_done = 0.0
    while s_done < s_max:
        sol = solve_ivp(rhs, (s_done, s_max), y, method="RK45",
                        rtol=1e-8, atol=1e-11, events=slow)
        if not sol.success:
            raise StiffnessError(f"frozen-time flow failed: {sol.message}")
        y = np.asarray(sol.y[:, -1], dtype=float)
        s_done = float(sol.t[-1])
        if sol.status != 1:
            break  # ran to s_max without getting slow
        speed = np.linalg.norm(rhs_y(y))
        limit = _polish_equilibrium(rhs_y, y, tol, radius=0.05 * (1.0 + np.linalg.norm(y)))
        if limit is not None:
            return limit, True
        if speed <= tol:
            return y, True
        # Near-stationary but not a sink (saddle shoulder): creep forward and
        # re-arm the event below the current speed so integration continues.
        switch = 0.5 * min(switch, speed)
        if switch <= tol:
            break

    speed = np.linalg.norm(rhs_y(y))
    return y, bool(speed <= tol)


@dataclass
class ConvergenceRow:
    """Sup-norm grid errors of both engines against the reference solution."""

    dt: float
    n_steps: int
    sup_err_discrete: float
    sup_err_backward_euler: float


def convergence_study(p: ProblemDef, x0: np.ndarray, dts,
                      rel_tol: float = 1e-9,
                      check_x0: bool = True) -> list[ConvergenceRow]:
    """Grid errors of the discrete and implicit engines for each step size.

    ``dts`` must be sorted in decreasing order, each dividing the horizon
    evenly within rounding.  Errors are sup over grid points of the distance
    to the dense reference solution.
    """
    dts = list(dts)
    if any(dts[i] <= dts[i + 1] for i in range(len(dts) - 1)):
        raise ValueError("dts must be strictly decreasing")
    sol = _reference_solution(p, x0, rel_tol)
    rows = []
    for dt in dts:
        n_steps = max(1, round(p.horizon / dt))
        traj_d = discrete_trajectory(p, x0, n_steps, check_x0=check_x0)
        traj_b = backward_euler_trajectory(p, x0, p.horizon / n_steps, check_x0=check_x0)
        ref = sol.sol(traj_d.times).T
        err_d = float(np.max(np.linalg.norm(traj_d.states - ref, axis=1)))
        err_b = float(np.max(np.linalg.norm(traj_b.states - ref, axis=1)))
        rows.append(ConvergenceRow(p.horizon / n_steps, n_steps, err_d, err_b))
    return rows
