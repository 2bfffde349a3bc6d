"""Projection algebra of the constraint manifold and KKT diagnostics.

For a full-row-rank constraint Jacobian J(x) the tangent projector and the
pseudo-inverse column map are

    P(x)     = I - J^T (J J^T)^(-1) J
    theta(x) = J^T (J J^T)^(-1)

and the tracking dynamics follow

    x' = -eta(x, t) / alpha + theta(x) d'(t),
    eta(x, t) = P(x) grad f(x, t).

Linear systems are solved against J J^T with a pivoted factorization; the
matrix is never inverted explicitly.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple, Optional

import numpy as np

from .errors import SingularConstraintError
from .problem import ProblemDef, Trajectory

#: Below this smallest singular value of J the constraints are treated as
#: degenerate (non-singularity assumption violated).
SINGULARITY_TOL = 1e-8


@dataclass(frozen=True)
class GeometryResult:
    """Projector, pseudo-inverse map and conditioning at a point."""

    projector: np.ndarray  # (n, n)
    theta: np.ndarray      # (n, m)
    sigma_min: float


def geometry(p: ProblemDef, x: np.ndarray, c_tol: float = SINGULARITY_TOL) -> GeometryResult:
    """Compute P(x), theta(x) and sigma_min(J(x)).

    For unconstrained problems (m = 0) the projector is the identity, theta
    is an empty (n, 0) matrix and sigma_min is reported as +inf.

    Raises
    ------
    SingularConstraintError
        If sigma_min(J(x)) < c_tol.
    """
    n = p.n
    if p.m == 0:
        return GeometryResult(np.eye(n), np.zeros((n, 0)), np.inf)
    J = np.asarray(p.jacobian(x), dtype=float)
    sigma = np.linalg.svd(J, compute_uv=False)[-1]
    if sigma < c_tol:
        raise SingularConstraintError(
            f"sigma_min(J) = {sigma:.3e} < {c_tol:.1e} at x = {np.asarray(x)!r}")
    JJt = J @ J.T
    theta = np.linalg.solve(JJt, J).T
    P = np.eye(n) - theta @ J
    P = 0.5 * (P + P.T)
    return GeometryResult(P, theta, float(sigma))


def eta(p: ProblemDef, x: np.ndarray, t: float,
        geom: Optional[GeometryResult] = None) -> np.ndarray:
    """Projected gradient P(x) grad f(x, t); lies in the kernel of J(x)."""
    grad = np.asarray(p.grad_objective(x, t), dtype=float)
    if p.m == 0:
        return grad
    if geom is None:
        geom = geometry(p, x)
    return geom.projector @ grad


def ode_rhs(p: ProblemDef, x: np.ndarray, t: float,
            geom: Optional[GeometryResult] = None) -> np.ndarray:
    """Right-hand side -eta(x, t)/alpha + theta(x) d'(t) of the tracking ODE."""
    grad = np.asarray(p.grad_objective(x, t), dtype=float)
    if p.m == 0:
        return -grad / p.alpha
    if geom is None:
        geom = geometry(p, x)
    e = geom.projector @ grad
    return -e / p.alpha + geom.theta @ np.asarray(p.data_rate(t), dtype=float)


class KKTResidual(NamedTuple):
    stationarity: float
    feasibility: float
    multipliers: np.ndarray


def kkt_residual(p: ProblemDef, x: np.ndarray, t: float,
                 geom: Optional[GeometryResult] = None) -> KKTResidual:
    """Stationarity and feasibility residuals with least-squares multipliers.

    The multipliers solve (J J^T) mu = -J grad f, so the stationarity norm
    |grad f + J^T mu| coincides with |eta(x, t)| up to roundoff.
    """
    grad = np.asarray(p.grad_objective(x, t), dtype=float)
    if p.m == 0:
        return KKTResidual(float(np.linalg.norm(grad)), 0.0, np.zeros(0))
    if geom is None:
        geom = geometry(p, x)
    mu = -(geom.theta.T @ grad)
    J = np.asarray(p.jacobian(x), dtype=float)
    stat = float(np.linalg.norm(grad + J.T @ mu))
    feas = float(np.linalg.norm(p.constraints(x) - p.data_path(t)))
    return KKTResidual(stat, feas, mu)


def trajectory_with_diagnostics(p: ProblemDef, times: np.ndarray,
                                states: np.ndarray) -> Trajectory:
    """Assemble a Trajectory, filling per-point KKT and step diagnostics."""
    times = np.asarray(times, dtype=float)
    states = np.atleast_2d(np.asarray(states, dtype=float))
    k = len(times)
    diag = np.empty((k, 4))
    for i in range(k):
        geom = geometry(p, states[i])
        res = kkt_residual(p, states[i], times[i], geom)
        step = 0.0 if i == 0 else float(np.linalg.norm(states[i] - states[i - 1]))
        diag[i] = (res.stationarity, res.feasibility, geom.sigma_min, step)
    return Trajectory(times, states, diag[:, 0], diag[:, 1], diag[:, 2], diag[:, 3])
