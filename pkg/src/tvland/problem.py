"""Time-varying problem definitions and the shipped scenarios.

A problem is

    minimize    f(x, t)
    subject to  h_i(x) = d_i(t),   i = 1..m,   t in [0, T]

with a regularization weight ``alpha`` that couples consecutive solutions of
the sequentially solved (proximally regularized) problem.  Scenario
constructors return immutable :class:`ProblemDef` objects whose evaluation
maps are pure, so problems are safe to share across workers.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

Vector = np.ndarray
Matrix = np.ndarray


@dataclass(frozen=True)
class ProblemDef:
    """A time-varying equality-constrained problem.

    Attributes
    ----------
    n, m : int
        State dimension and constraint count (``m`` may be 0).
    objective, grad_objective : callable
        ``f(x, t)`` and its gradient in ``x``.
    constraints, jacobian : callable
        ``h(x)`` (m-vector) and its Jacobian (m x n).
    data_path, data_rate : callable
        ``d(t)`` and its derivative (m-vectors).
    horizon : float
        Final time ``T`` of the model window ``[0, T]``.
    alpha : float
        Proximal regularization weight, > 0.
    hess_objective, constraint_hessians : callable, optional
        Second derivatives; required by the spectrum module only.
    """

    n: int
    m: int
    objective: Callable[[Vector, float], float]
    grad_objective: Callable[[Vector, float], Vector]
    constraints: Callable[[Vector], Vector]
    jacobian: Callable[[Vector], Matrix]
    data_path: Callable[[float], Vector]
    data_rate: Callable[[float], Vector]
    horizon: float
    alpha: float
    hess_objective: Optional[Callable[[Vector, float], Matrix]] = None
    constraint_hessians: Optional[Callable[[Vector], Sequence[Matrix]]] = None
    name: str = ""

    def __post_init__(self):
        if self.alpha <= 0:
            raise ValueError(f"alpha must be positive, got {self.alpha}")
        if self.horizon <= 0:
            raise ValueError(f"horizon must be positive, got {self.horizon}")
        if self.n < 1:
            raise ValueError(f"n must be at least 1, got {self.n}")
        if not 0 <= self.m <= self.n:
            raise ValueError(f"m must satisfy 0 <= m <= n, got m={self.m}, n={self.n}")

    def replace(self, **changes) -> "ProblemDef":
        """Return a copy with the given fields replaced (e.g. ``alpha``)."""
        return dataclasses.replace(self, **changes)


def freeze_data(p: ProblemDef, t0: float) -> ProblemDef:
    """Freeze the data path of ``p`` at time ``t0`` (d constant, d-dot = 0)."""
    d0 = np.array(p.data_path(t0), dtype=float, copy=True)
    zero = np.zeros_like(d0)
    return p.replace(
        data_path=lambda t: d0.copy(),
        data_rate=lambda t: zero.copy(),
        name=p.name + f"[frozen@t={t0:g}]",
    )


@dataclass
class Trajectory:
    """A time grid with states and per-step diagnostics.

    ``kkt_stationarity`` and ``feasibility`` are measured against the
    un-regularized problem at the grid time; ``sigma_min`` is the smallest
    singular value of the constraint Jacobian (infinity when m = 0) and
    ``step_norm[k]`` is ``|x_k - x_{k-1}|`` (0 at k = 0).
    """

    times: np.ndarray
    states: np.ndarray
    kkt_stationarity: np.ndarray
    feasibility: np.ndarray
    sigma_min: np.ndarray
    step_norm: np.ndarray

    def __post_init__(self):
        self.times = np.asarray(self.times, dtype=float)
        self.states = np.atleast_2d(np.asarray(self.states, dtype=float))
        if self.states.shape[0] != self.times.shape[0]:
            raise ValueError("times and states must have equal length")
        if self.times[0] != 0.0:
            raise ValueError("trajectory must start at t = 0")
        if np.any(np.diff(self.times) <= 0):
            raise ValueError("times must be strictly increasing")
        for name in ("kkt_stationarity", "feasibility", "sigma_min", "step_norm"):
            arr = np.asarray(getattr(self, name), dtype=float)
            if arr.shape[0] != self.times.shape[0]:
                raise ValueError(f"{name} must have one entry per grid time")
            setattr(self, name, arr)

    def __len__(self) -> int:
        return len(self.times)

    @property
    def final_state(self) -> np.ndarray:
        return self.states[-1]


@dataclass
class MinimizerCatalog:
    """Known local minimizers of the frozen-time problem at ``anchor_time``.

    ``global_ids`` indexes the entries attaining the minimum objective among
    catalog entries.  ``equivalence``, when given, is an involution mapping a
    minimizer to a symmetric twin (e.g. the sign flip X <-> -X of low-rank
    factorizations); membership tests identify points modulo it.
    """

    anchor_time: float
    minimizers: np.ndarray  # (k, n)
    global_ids: list[int]
    objective_values: np.ndarray  # (k,)
    equivalence: Optional[Callable[[Vector], Vector]] = None
    dropped: int = 0

    def __post_init__(self):
        self.minimizers = np.atleast_2d(np.asarray(self.minimizers, dtype=float))
        if len(self.minimizers) and not self.global_ids:
            raise ValueError("nonempty catalog must have at least one global id")

    def __len__(self) -> int:
        return 0 if self.minimizers.size == 0 else len(self.minimizers)


@dataclass(frozen=True)
class Scalar1DFunction:
    """A scalar landscape with exactly three stationary points y1 < y2 < y3.

    y1 and y3 are local minima with g(y1) > g(y3) (so y3 is global) and y2 is
    a local maximum.
    """

    g: Callable[[float], float]
    dg: Callable[[float], float]
    d2g: Callable[[float], float]
    stationary_points: tuple[float, float, float]

    @property
    def y1(self) -> float:
        return self.stationary_points[0]

    @property
    def y2(self) -> float:
        return self.stationary_points[1]

    @property
    def y3(self) -> float:
        return self.stationary_points[2]


# ---------------------------------------------------------------------------
# Scenario: oscillating quartic (one-dimensional, unconstrained)
# ---------------------------------------------------------------------------

def _quartic(y):
    return 0.25 * y**4 + 0.125 * y**3 - 2.0 * y**2 - 1.5 * y + 8.0


def _quartic_d1(y):
    return y**3 + 0.375 * y**2 - 4.0 * y - 1.5


def _quartic_d2(y):
    return 3.0 * y**2 + 0.75 * y - 4.0


_EMPTY = np.zeros(0)
_EMPTY_JAC1 = np.zeros((0, 1))


def make_example1(beta: float, alpha: float = 1.0) -> tuple[ProblemDef, Scalar1DFunction]:
    """Oscillating double-well scenario: f(x, t) = g(x - beta sin t) on [0, 2 pi].

    The quartic g has a spurious local minimum at -2, a local maximum at
    -3/8 and the global minimum at 2, so the moving landscape keeps a
    spurious minimum at -2 + beta sin t at all times.
    """
    if beta <= 0:
        raise ValueError(f"beta must be positive, got {beta}")
    b = float(beta)

    def objective(x, t):
        return _quartic(x[0] - b * np.sin(t))

    def grad(x, t):
        return np.array([_quartic_d1(x[0] - b * np.sin(t))])

    def hess(x, t):
        return np.array([[_quartic_d2(x[0] - b * np.sin(t))]])

    p = ProblemDef(
        n=1,
        m=0,
        objective=objective,
        grad_objective=grad,
        hess_objective=hess,
        constraints=lambda x: _EMPTY,
        jacobian=lambda x: _EMPTY_JAC1,
        constraint_hessians=lambda x: (),
        data_path=lambda t: _EMPTY,
        data_rate=lambda t: _EMPTY,
        horizon=2.0 * np.pi,
        alpha=alpha,
        name="example1",
    )
    sf = Scalar1DFunction(
        g=_quartic, dg=_quartic_d1, d2g=_quartic_d2,
        stationary_points=(-2.0, -0.375, 2.0),
    )
    return p, sf


# ---------------------------------------------------------------------------
# Scenario: rank-one matrix recovery with a moving target (n = 6, m = 4)
# ---------------------------------------------------------------------------

_SQ3 = np.sqrt(3.0)
_SQ2 = np.sqrt(2.0)

SENSING_MATRICES = (
    np.array([[1.0, 0.0], [0.0, 0.5]]),
    np.array([[0.0, _SQ3 / 2], [_SQ3 / 2, 0.0]]),
    np.array([[1.0, -1.0 / _SQ2], [1.0 / _SQ2, 0.0]]),
    np.array([[0.0, 0.0], [0.0, _SQ3 / 2]]),
)

# symmetrized sensing matrices A_i + A_i^T used by gradients and Hessians
_SYM = tuple(a + a.T for a in SENSING_MATRICES)


def matrix_recovery_target(t: float) -> np.ndarray:
    """Rank-one factor Z(t) tracked by the globally optimal solution."""
    return np.array([0.8 + 0.2 * np.cos(t), 0.2 * np.sin(t)])


def _target_rate(t: float) -> np.ndarray:
    return np.array([-0.2 * np.sin(t), 0.2 * np.cos(t)])


def _measure(X: np.ndarray) -> np.ndarray:
    """<A_i, X X^T> for each sensing matrix (uses the symmetrized form)."""
    return np.array([0.5 * X @ S @ X for S in _SYM])


def make_matrix_recovery(consistent_data: bool = True, alpha: float = 0.1) -> ProblemDef:
    """Dynamic rank-one sensing in equality form over x = (X in R^2, eps in R^4).

        minimize sum_i eps_i^2   s.t.  <A_i, X X^T> - eps_i = d_i(t)

    With ``consistent_data`` the measurement path is d(t) = h((Z(t), 0)), so
    the moving factor Z(t) is exactly feasible with zero slack.  Otherwise
    d(t) is the fixed reference vector with d_3 = 0, under which Z(t) is not
    feasible with zero slack (the third sensing matrix has a nonzero diagonal).
    """

    def objective(x, t):
        return float(np.dot(x[2:], x[2:]))

    def grad(x, t):
        g = np.zeros(6)
        g[2:] = 2.0 * x[2:]
        return g

    _HESS_F = np.diag([0.0, 0.0, 2.0, 2.0, 2.0, 2.0])

    def hess(x, t):
        return _HESS_F.copy()

    def constraints(x):
        return _measure(x[:2]) - x[2:]

    def jac(x):
        X = x[:2]
        J = np.zeros((4, 6))
        for i, S in enumerate(_SYM):
            J[i, :2] = S @ X
            J[i, 2 + i] = -1.0
        return J

    _CHESS = []
    for S in _SYM:
        H = np.zeros((6, 6))
        H[:2, :2] = S
        _CHESS.append(H)
    _CHESS = tuple(_CHESS)

    def constraint_hessians(x):
        return _CHESS

    if consistent_data:
        def data_path(t):
            return _measure(matrix_recovery_target(t))

        def data_rate(t):
            z, zd = matrix_recovery_target(t), _target_rate(t)
            return np.array([zd @ S @ z for S in _SYM])
    else:
        def data_path(t):
            z1 = 0.8 + 0.2 * np.cos(t)
            z2 = 0.2 * np.sin(t)
            return np.array([z1 * z1 + 0.5 * z2 * z2, _SQ3 * z2 * z1, 0.0,
                             0.5 * _SQ3 * z2 * z2])

        def data_rate(t):
            z1 = 0.8 + 0.2 * np.cos(t)
            z2 = 0.2 * np.sin(t)
            z1d = -0.2 * np.sin(t)
            z2d = 0.2 * np.cos(t)
            return np.array([2 * z1 * z1d + z2 * z2d,
                             _SQ3 * (z2d * z1 + z2 * z1d), 0.0,
                             _SQ3 * z2 * z2d])

    return ProblemDef(
        n=6,
        m=4,
        objective=objective,
        grad_objective=grad,
        hess_objective=hess,
        constraints=constraints,
        jacobian=jac,
        constraint_hessians=constraint_hessians,
        data_path=data_path,
        data_rate=data_rate,
        horizon=2.0 * np.pi,
        alpha=alpha,
        name="matrec" if consistent_data else "matrec-raw",
    )


def matrix_recovery_state(p: ProblemDef, X, t: float = 0.0) -> np.ndarray:
    """Lift a factor X to the feasible state (X, eps) at time t.

    The slack block absorbs the measurement residual, so the returned point
    satisfies the constraints of ``p`` at time t exactly.
    """
    X = np.asarray(X, dtype=float)
    eps = _measure(X) - p.data_path(t)
    return np.concatenate([X, eps])


def matrix_recovery_global_state(t: float) -> np.ndarray:
    """The zero-slack state (Z(t), 0) on the globally optimal trajectory."""
    return np.concatenate([matrix_recovery_target(t), np.zeros(4)])


def matrix_recovery_sign_flip(x: np.ndarray) -> np.ndarray:
    """Sign symmetry X <-> -X of the factorization (slack unchanged)."""
    out = np.array(x, dtype=float, copy=True)
    out[:2] = -out[:2]
    return out


THE_SPURIOUS_FACTOR = np.array([0.0, 1.0 / _SQ2])


# ---------------------------------------------------------------------------
# Scenario: damped sinusoidal translation of a general landscape
# ---------------------------------------------------------------------------

def make_damped_sinusoid(
    g: Callable[[Vector], float],
    grad_g: Callable[[Vector], Vector],
    beta: float,
    omega: float,
    lam: float,
    u,
    hess_g: Optional[Callable[[Vector], Matrix]] = None,
    horizon: Optional[float] = None,
    alpha: float = 1.0,
) -> ProblemDef:
    """Unconstrained problem f(x, t) = g(x - beta e^(-lam t) sin(omega t) u).

    ``u`` must be a unit vector; ``lam = 0`` gives the undamped special case
    (with n = 1, omega = 1, u = (1,) this reduces to the example1 form).
    """
    u = np.asarray(u, dtype=float)
    n = u.size
    if abs(np.linalg.norm(u) - 1.0) > 1e-12:
        raise ValueError("u must be a unit vector (within 1e-12)")
    if beta <= 0 or omega <= 0:
        raise ValueError("beta and omega must be positive")
    if lam < 0:
        raise ValueError("lam must be nonnegative")

    def shift(t):
        return beta * np.exp(-lam * t) * np.sin(omega * t) * u

    def objective(x, t):
        return g(x - shift(t))

    def grad(x, t):
        return np.asarray(grad_g(x - shift(t)), dtype=float)

    hess = None
    if hess_g is not None:
        def hess(x, t):
            return np.asarray(hess_g(x - shift(t)), dtype=float)

    empty_jac = np.zeros((0, n))
    return ProblemDef(
        n=n,
        m=0,
        objective=objective,
        grad_objective=grad,
        hess_objective=hess,
        constraints=lambda x: _EMPTY,
        jacobian=lambda x: empty_jac,
        constraint_hessians=lambda x: (),
        data_path=lambda t: _EMPTY,
        data_rate=lambda t: _EMPTY,
        horizon=2.0 * np.pi / omega if horizon is None else horizon,
        alpha=alpha,
        name="damped",
    )


# ---------------------------------------------------------------------------
# Derivative validation
# ---------------------------------------------------------------------------

@dataclass
class ValidationReport:
    """Finite-difference consistency report for a ProblemDef.

    Deviations are max over samples of elementwise |fd - analytic| /
    (1 + |analytic|); a check passes when its deviation is below ``tol``.
    """

    samples: int
    seed: int
    tol: float
    grad_deviation: float
    jacobian_deviation: float
    data_rate_deviation: float
    grad_ok: bool = field(init=False)
    jacobian_ok: bool = field(init=False)
    data_rate_ok: bool = field(init=False)
    passed: bool = field(init=False)

    def __post_init__(self):
        self.grad_ok = self.grad_deviation <= self.tol
        self.jacobian_ok = self.jacobian_deviation <= self.tol
        self.data_rate_ok = self.data_rate_deviation <= self.tol
        self.passed = self.grad_ok and self.jacobian_ok and self.data_rate_ok


def _rel_dev(fd: np.ndarray, an: np.ndarray) -> float:
    if fd.size == 0:
        return 0.0
    return float(np.max(np.abs(fd - an) / (1.0 + np.abs(an))))


def validate_problem(p: ProblemDef, samples: int = 20, seed: int = 0,
                     tol: float = 1e-5) -> ValidationReport:
    """Check analytic derivatives against central finite differences.

    Draws ``samples`` random (x, t) points (deterministic in ``seed``) and
    reports the worst relative deviation of grad_objective, jacobian and
    data_rate from finite differences of their parent maps.  Deviations above
    ``tol`` are reported, never raised.
    """
    if samples < 1:
        raise ValueError("samples must be at least 1")
    rng = np.random.default_rng(seed)
    dev_g = dev_j = dev_d = 0.0
    for _ in range(samples):
        x = rng.standard_normal(p.n)
        t = rng.uniform(0.0, p.horizon)
        hx = 1e-6 * (1.0 + np.linalg.norm(x))

        fd_grad = np.zeros(p.n)
        for j in range(p.n):
            e = np.zeros(p.n)
            e[j] = hx
            fd_grad[j] = (p.objective(x + e, t) - p.objective(x - e, t)) / (2 * hx)
        dev_g = max(dev_g, _rel_dev(fd_grad, np.asarray(p.grad_objective(x, t))))

        if p.m > 0:
            fd_jac = np.zeros((p.m, p.n))
            for j in range(p.n):
                e = np.zeros(p.n)
                e[j] = hx
                fd_jac[:, j] = (p.constraints(x + e) - p.constraints(x - e)) / (2 * hx)
            dev_j = max(dev_j, _rel_dev(fd_jac, np.asarray(p.jacobian(x))))

            ht = 1e-6 * (1.0 + abs(t))
            fd_rate = (p.data_path(t + ht) - p.data_path(t - ht)) / (2 * ht)
            dev_d = max(dev_d, _rel_dev(fd_rate, np.asarray(p.data_rate(t))))

    return ValidationReport(samples=samples, seed=seed, tol=tol,
                            grad_deviation=dev_g, jacobian_deviation=dev_j,
                            data_rate_deviation=dev_d)
