import numpy as np
import pytest

import tvland as tv


@pytest.fixture(scope="session")
def ex1_04_10():
    """Oscillating quartic, alpha = 0.4, beta = 10 (escaping regime)."""
    return tv.make_example1(10.0, alpha=0.4)


@pytest.fixture(scope="session")
def ex1_02_5():
    """Oscillating quartic, alpha = 0.2, beta = 5 (trapped regime)."""
    return tv.make_example1(5.0, alpha=0.2)


@pytest.fixture(scope="session")
def matrec():
    """Consistent-data matrix recovery with alpha = 1."""
    return tv.make_matrix_recovery(True, alpha=1.0)


@pytest.fixture(scope="session")
def be_traj_04_10(ex1_04_10):
    """Backward-Euler trajectory for the escaping regime, dt = 1e-3."""
    p, _ = ex1_04_10
    return tv.backward_euler_trajectory(p, np.array([-2.0]), 1e-3)


def linear_constraint_problem(J, alpha=1.0, d_of_t=None, d_rate=None):
    """Tiny problem with constant Jacobian J and f = |x|^2 / 2 (test helper)."""
    J = np.atleast_2d(np.asarray(J, dtype=float))
    m, n = J.shape
    if d_of_t is None:
        d_of_t = lambda t: np.zeros(m)
        d_rate = lambda t: np.zeros(m)
    return tv.ProblemDef(
        n=n, m=m,
        objective=lambda x, t: 0.5 * float(x @ x),
        grad_objective=lambda x, t: np.asarray(x, dtype=float),
        hess_objective=lambda x, t: np.eye(n),
        constraints=lambda x: J @ x,
        jacobian=lambda x: J,
        constraint_hessians=lambda x: tuple(np.zeros((n, n)) for _ in range(m)),
        data_path=d_of_t,
        data_rate=d_rate,
        horizon=1.0,
        alpha=alpha,
    )
