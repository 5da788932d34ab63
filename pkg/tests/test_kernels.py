import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from qitomo import _kernels_py, kernels
from qitomo.simulate import CircuitTable

try:
    from qitomo import _ckernels
except ImportError:
    _ckernels = None

needs_ext = pytest.mark.skipif(_ckernels is None, reason="compiled extension not built")


def random_problem(seed):
    rng = np.random.default_rng(seed)
    n_ops, D, n_eff = rng.integers(1, 6), 4, rng.integers(1, 4)
    ops = rng.standard_normal((n_ops, D, D)) * 0.5
    rho = rng.standard_normal(D)
    effects = rng.standard_normal((n_eff, D))
    lens = rng.integers(0, 6, size=rng.integers(1, 8))
    ptr = np.concatenate([[0], np.cumsum(lens)]).astype(np.intp)
    seq = rng.integers(0, n_ops, size=ptr[-1]).astype(np.intp)
    w = rng.standard_normal((len(lens), n_eff))
    return ops, rho, effects, ptr, seq, w


def test_backend_selected():
    assert kernels.BACKEND in ("cython", "python")
    if _ckernels is not None:
        assert kernels.BACKEND == "cython"


def test_forward_is_sequence_product():
    ops, rho, effects, ptr, seq, _ = random_problem(0)
    P = _kernels_py.forward(ops, rho, effects, ptr, seq)
    for s in range(len(ptr) - 1):
        v = rho.copy()
        for k in seq[ptr[s]:ptr[s + 1]]:
            v = ops[k] @ v
        assert np.allclose(P[s], effects @ v)


def test_backward_gradient_matches_finite_differences():
    ops, rho, effects, ptr, seq, w = random_problem(3)
    _, g_ops, g_rho, g_eff = _kernels_py.backward(ops, rho, effects, ptr, seq, w)

    def f(o, r, e):
        return float(np.sum(w * _kernels_py.forward(o, r, e, ptr, seq)))

    h = 1e-6
    for idx in [(0, 1, 2), (0, 3, 0)]:
        d = np.zeros_like(ops)
        d[idx] = h
        assert g_ops[idx] == pytest.approx((f(ops + d, rho, effects) - f(ops - d, rho, effects)) / (2 * h), rel=1e-6, abs=1e-8)
    d = np.zeros_like(rho)
    d[2] = h
    assert g_rho[2] == pytest.approx((f(ops, rho + d, effects) - f(ops, rho - d, effects)) / (2 * h), rel=1e-6, abs=1e-8)
    d = np.zeros_like(effects)
    d[0, 1] = h
    assert g_eff[0, 1] == pytest.approx((f(ops, rho, effects + d) - f(ops, rho, effects - d)) / (2 * h), rel=1e-6, abs=1e-8)


@needs_ext
@settings(max_examples=60, deadline=None)
@given(st.integers(0, 2**31))
def test_backends_agree(seed):
    ops, rho, effects, ptr, seq, w = random_problem(seed)
    assert np.allclose(_ckernels.forward(ops, rho, effects, ptr, seq),
                       _kernels_py.forward(ops, rho, effects, ptr, seq), atol=1e-12)
    for a, b in zip(_ckernels.backward(ops, rho, effects, ptr, seq, w),
                    _kernels_py.backward(ops, rho, effects, ptr, seq, w)):
        assert np.allclose(a, b, atol=1e-11)


@needs_ext
def test_backends_agree_on_design(published, design):
    t = CircuitTable.from_design(design, published)
    ops = np.ascontiguousarray(t.ops_array(published))
    eff = np.ascontiguousarray(t.effects_array(published))
    rho = np.ascontiguousarray(published.rho)
    assert np.allclose(_ckernels.forward(ops, rho, eff, t.ptr, t.seq),
                       _kernels_py.forward(ops, rho, eff, t.ptr, t.seq), atol=1e-13)


def test_pure_python_fallback_selected_by_env():
    import os
    import subprocess
    import sys

    env = dict(os.environ, QITOMO_PURE_PYTHON="1")
    out = subprocess.run([sys.executable, "-c", "from qitomo import kernels; print(kernels.BACKEND)"],
                         env=env, capture_output=True, text=True, check=True)
    assert out.stdout.strip() == "python"
