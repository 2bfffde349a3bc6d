"""Trajectory classification by region-of-attraction membership.

A trajectory is non-spurious when, from some cutoff time onward, every
sampled state lies in the basin of a global minimizer of the frozen-time
landscape.  Basins are probed by integrating the frozen-time flow to its
limit and matching that limit against a catalog of known minimizers.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .discrete import _restore_feasibility
from .errors import SingularConstraintError, StepSolveError
from .geometry import kkt_residual
from .ode import frozen_time_flow
from .problem import MinimizerCatalog, ProblemDef, Trajectory
from .spectrum import kkt_refine, tangent_hessian_eigenvalues

#: Distance under which a flow limit is identified with a catalog entry, and
#: under which multistart limits are merged into one cluster.  Minimizers of
#: the shipped scenarios are separated by at least 1.
MEMBERSHIP_TOL = 1e-4
CLUSTER_RADIUS = 1e-4

#: Smallest tangent-Hessian eigenvalue accepted as a strict local minimum.
SOSC_TOL = 1e-8

#: Stationarity/feasibility bound every catalog entry must satisfy.
CATALOG_KKT_TOL = 1e-6


class Verdict(enum.Enum):
    NON_SPURIOUS = "non-spurious"
    SPURIOUS = "spurious"
    UNRESOLVED = "unresolved"


def attraction_membership(p: ProblemDef, x: np.ndarray, t: float,
                          catalog: MinimizerCatalog,
                          tol: float = MEMBERSHIP_TOL) -> Optional[int]:
    """Catalog id of the minimizer whose basin contains x at time t.

    Runs the frozen-time flow from x; returns the index of the catalog entry
    within ``tol`` of the flow limit (modulo the catalog equivalence), or
    None when the flow does not settle or its limit matches no entry.
    """
    limit, converged = frozen_time_flow(p, x, t)
    if not converged or len(catalog) == 0:
        return None
    candidates = [limit]
    if catalog.equivalence is not None:
        candidates.append(np.asarray(catalog.equivalence(limit), dtype=float))
    dists = np.full(len(catalog), np.inf)
    for c in candidates:
        dists = np.minimum(dists, np.linalg.norm(catalog.minimizers - c, axis=1))
    best = int(np.argmin(dists))
    return best if dists[best] <= tol else None


@dataclass
class MembershipRecord:
    time: float
    member: Optional[int]
    is_global: bool


@dataclass
class ClassificationResult:
    verdict: Verdict
    t_bar: float
    records: list[MembershipRecord]

    @property
    def checked_times(self) -> np.ndarray:
        return np.array([r.time for r in self.records])


def classify_trajectory(p: ProblemDef, traj: Trajectory,
                        catalog_builder: Callable[[float], MinimizerCatalog],
                        t_bar: float,
                        tol: float = MEMBERSHIP_TOL,
                        max_checks: int = 200) -> ClassificationResult:
    """Classify a trajectory as spurious / non-spurious on [t_bar, T].

    Membership is evaluated at every grid time >= t_bar, subsampled evenly
    to at most ``max_checks`` checks.  The verdict is NON_SPURIOUS when every
    check lands in a global basin, SPURIOUS when some check lands in a
    non-global basin, and UNRESOLVED otherwise.
    """
    if not 0 <= t_bar < p.horizon:
        raise ValueError(f"t_bar must lie in [0, T), got {t_bar}")
    idx = np.nonzero(traj.times >= t_bar - 1e-12)[0]
    if idx.size > max_checks:
        sel = np.unique(np.linspace(0, idx.size - 1, max_checks).round().astype(int))
        idx = idx[sel]
    records = []
    saw_nonglobal = False
    saw_unresolved = False
    for i in idx:
        t = float(traj.times[i])
        catalog = catalog_builder(t)
        member = attraction_membership(p, traj.states[i], t, catalog, tol)
        is_global = member is not None and member in catalog.global_ids
        if member is None:
            saw_unresolved = True
        elif not is_global:
            saw_nonglobal = True
        records.append(MembershipRecord(t, member, is_global))
    if saw_nonglobal:
        verdict = Verdict.SPURIOUS
    elif saw_unresolved:
        verdict = Verdict.UNRESOLVED
    else:
        verdict = Verdict.NON_SPURIOUS
    return ClassificationResult(verdict, t_bar, records)


def _polish_minimizer(p: ProblemDef, x: np.ndarray, t: float) -> np.ndarray:
    """Newton-sharpen a flow limit onto the KKT set of the time-t problem.

    Constrained flow limits drift off the target leaf by the integration
    tolerance (leaf-normal directions are neutrally stable); the KKT
    refinement pins them back.  Best effort: the unrefined point is returned
    when second derivatives are unavailable or Newton leaves the vicinity.
    """
    if p.m == 0:
        if p.hess_objective is None:
            return x
        x = x.copy()
        for _ in range(25):
            g = np.asarray(p.grad_objective(x, t), dtype=float)
            if np.linalg.norm(g) <= 1e-12:
                break
            H = np.asarray(p.hess_objective(x, t), dtype=float)
            try:
                step = np.linalg.solve(H, -g)
            except np.linalg.LinAlgError:
                break
            if np.linalg.norm(step) > 1.0:  # do not leave the basin
                break
            x = x + step
        return x
    if p.hess_objective is None or p.constraint_hessians is None:
        return x
    try:
        refined = kkt_refine(p, x, t)
    except (StepSolveError, SingularConstraintError, np.linalg.LinAlgError):
        return x
    if np.linalg.norm(refined - x) > 0.05 * (1.0 + np.linalg.norm(x)):
        return x
    return refined


def build_catalog(p: ProblemDef, t: float, starts: int, seed: int, box,
                  equivalence: Optional[Callable[[np.ndarray], np.ndarray]] = None,
                  cluster_radius: float = CLUSTER_RADIUS) -> MinimizerCatalog:
    """Catalog the frozen-time local minimizers found by multistart flows.

    Flows start from ``starts`` uniform samples of ``box = (lo, hi)``
    (deterministic in ``seed``); limits are clustered within
    ``cluster_radius`` and each cluster representative is kept when the
    tangent-restricted Lagrangian Hessian is positive definite.  Flows that
    fail to settle, end near degenerate constraints, or stop at saddles are
    dropped and counted in ``catalog.dropped``.
    """
    if starts < 1:
        raise ValueError("starts must be at least 1")
    lo = np.broadcast_to(np.asarray(box[0], dtype=float), (p.n,)).copy()
    hi = np.broadcast_to(np.asarray(box[1], dtype=float), (p.n,)).copy()
    if not (np.all(np.isfinite(lo)) and np.all(np.isfinite(hi))):
        raise ValueError("box bounds must be finite")
    rng = np.random.default_rng(seed)
    points = lo + (hi - lo) * rng.random((starts, p.n))
    d_target = p.data_path(t) if p.m else None

    limits = []
    dropped = 0
    for x0 in points:
        try:
            if p.m:
                # flows preserve h(x), so starts must sit on the time-t leaf
                x0 = _restore_feasibility(p, x0, d_target, 1e-10)
            limit, converged = frozen_time_flow(p, x0, t)
        except (SingularConstraintError, StepSolveError):
            dropped += 1
            continue
        if not converged:
            dropped += 1
            continue
        limits.append(limit)

    clusters: list[list[np.ndarray]] = []
    for lim in limits:
        for members in clusters:
            if np.linalg.norm(lim - members[0]) <= cluster_radius:
                members.append(lim)
                break
        else:
            clusters.append([lim])

    reps = []
    for members in clusters:
        rep = _polish_minimizer(p, np.mean(members, axis=0), t)
        res = kkt_residual(p, rep, t)
        if res.stationarity > CATALOG_KKT_TOL or res.feasibility > CATALOG_KKT_TOL:
            dropped += len(members)
            continue
        eigs = tangent_hessian_eigenvalues(p, rep, t)
        if eigs.size and eigs[0] <= SOSC_TOL:
            dropped += len(members)
            continue
        reps.append(rep)

    if not reps:
        return MinimizerCatalog(t, np.zeros((0, p.n)), [], np.zeros(0),
                                equivalence, dropped)
    reps.sort(key=lambda r: tuple(r))
    minimizers = np.vstack(reps)
    values = np.array([p.objective(m, t) for m in minimizers])
    fmin = values.min()
    global_ids = [i for i, v in enumerate(values) if v <= fmin + 1e-9 * (1 + abs(fmin))]
    return MinimizerCatalog(t, minimizers, global_ids, values, equivalence, dropped)


def multistart_builder(p: ProblemDef, box, starts: int = 64, seed: int = 0,
                       equivalence=None) -> Callable[[float], MinimizerCatalog]:
    """Catalog builder running a fresh multistart search at every time."""
    return lambda t: build_catalog(p, t, starts, seed, box, equivalence)


def tracking_builder(p: ProblemDef, box, starts: int = 64, seed: int = 0,
                     equivalence=None) -> Callable[[float], MinimizerCatalog]:
    """Catalog builder that multistarts once, then continues minimizers in t.

    The first requested time pays for a full multistart; later times re-flow
    each known minimizer from its previous location (cheap for smoothly
    moving landscapes).  Falls back to a fresh multistart whenever a
    continued minimizer is lost.  Suited to landscapes whose minimizer count
    is stable over the horizon; use :func:`multistart_builder` otherwise.
    """
    state: dict = {"catalog": None}

    def build(t: float) -> MinimizerCatalog:
        prev = state["catalog"]
        if prev is None or len(prev) == 0:
            cat = build_catalog(p, t, starts, seed, box, equivalence)
            state["catalog"] = cat
            return cat
        reps = []
        for x_old in prev.minimizers:
            try:
                limit, converged = frozen_time_flow(p, x_old, t)
            except SingularConstraintError:
                converged = False
            if not converged:
                cat = build_catalog(p, t, starts, seed, box, equivalence)
                state["catalog"] = cat
                return cat
            rep = _polish_minimizer(p, limit, t)
            # a vanished well drops its flow into a neighboring basin; merge
            if all(np.linalg.norm(rep - r) > CLUSTER_RADIUS for r in reps):
                reps.append(rep)
        reps.sort(key=lambda r: tuple(r))
        minimizers = np.vstack(reps)
        values = np.array([p.objective(m, t) for m in minimizers])
        fmin = values.min()
        global_ids = [i for i, v in enumerate(values)
                      if v <= fmin + 1e-9 * (1 + abs(fmin))]
        cat = MinimizerCatalog(t, minimizers, global_ids, values, equivalence, 0)
        state["catalog"] = cat
        return cat

    return build
