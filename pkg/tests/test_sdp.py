import numpy as np
import pytest

from qitomo.errors import NumericalError
from qitomo.metrics import solve_lmi


def scalar_blocks(*coeffs):
    # one 1x1 block per inequality, one variable
    return [np.array([[[a]]]) for a in coeffs]


def test_scalar_lp():
    # min x s.t. x - 2 >= 0 and 5 - x >= 0
    res = solve_lmi(np.array([1.0]), [np.array([[-2.0]]), np.array([[5.0]])],
                    scalar_blocks(1.0, -1.0))
    assert res.converged
    assert res.value == pytest.approx(2.0, abs=1e-7)
    assert res.x[0] == pytest.approx(2.0, abs=1e-6)


def test_max_eigenvalue():
    # min t s.t. t I - A >= 0 gives lambda_max(A)
    rng = np.random.default_rng(0)
    A = rng.standard_normal((5, 5))
    A = A + A.T
    res = solve_lmi(np.array([1.0]), [-A], [np.eye(5)[None]])
    assert res.value == pytest.approx(np.linalg.eigvalsh(A).max(), abs=1e-7)
    assert res.lower <= res.value + 1e-9


def test_nuclear_norm_by_lmi():
    # ||M||_1 = min (tr W1 + tr W2) / 2 s.t. [[W1, M], [M^T, W2]] >= 0
    rng = np.random.default_rng(1)
    M = rng.standard_normal((2, 2))
    F, c = [], []
    for o in (0, 2):
        for i in range(2):
            for j in range(i, 2):
                E = np.zeros((4, 4))
                E[o + i, o + j] = E[o + j, o + i] = 1.0
                F.append(E)
                c.append(0.5 if i == j else 0.0)
    F0 = np.zeros((4, 4))
    F0[:2, 2:] = M
    F0[2:, :2] = M.T
    res = solve_lmi(np.array(c), [F0], [np.array(F)])
    assert res.value == pytest.approx(np.linalg.svd(M, compute_uv=False).sum(), abs=1e-6)


def test_infeasible_raises():
    # x >= 1 and x <= -1
    with pytest.raises(NumericalError):
        solve_lmi(np.array([1.0]), [np.array([[-1.0]]), np.array([[-1.0]])],
                  scalar_blocks(1.0, -1.0), max_iter=60)
