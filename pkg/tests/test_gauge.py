import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from qitomo.errors import ValidationError
from qitomo.estimate import GaugeElement, find_gauge, gauge_objective, gauge_optimize


def random_gauge(seed, scale=0.2):
    rng = np.random.default_rng(seed)
    M = np.eye(4)
    M[1:] += scale * rng.standard_normal((3, 4))
    return M


@settings(max_examples=10, deadline=None)
@given(st.integers(0, 2**31))
def test_random_gauge_undone(seed):
    from qitomo.models import published_gateset

    gs = published_gateset()
    moved = gs.transform(random_gauge(seed))
    back = gauge_optimize(moved, gs)
    assert max(back.distances(gs).values()) < 1e-8


def test_identity_is_optimal_at_target(target):
    g = find_gauge(target, target)
    assert np.allclose(g.M, np.eye(4), atol=1e-8)
    assert gauge_objective(target, target, g.M) == pytest.approx(0.0, abs=1e-14)


def test_objective_never_increases(published, target):
    g = find_gauge(published, target)
    assert gauge_objective(published, target, g.M) <= gauge_objective(published, target, np.eye(4)) + 1e-15


def test_return_gauge(published, target):
    out, g = gauge_optimize(published, target, return_gauge=True)
    assert isinstance(g, GaugeElement)
    assert max(out.distances(published.transform(g.M)).values()) < 1e-14


def test_weights_by_label(published, target):
    # heavy weight on one gate pulls that gate closer to its target
    light = gauge_optimize(published, target)
    heavy = gauge_optimize(published, target, weights={"Gx": 100.0})
    d_light = np.linalg.norm(light.gates["Gx"] - target.gates["Gx"])
    d_heavy = np.linalg.norm(heavy.gates["Gx"] - target.gates["Gx"])
    assert d_heavy <= d_light + 1e-9


def test_gauge_element_validation():
    M = np.eye(4)
    M[0, 1] = 0.1
    with pytest.raises(ValidationError):
        GaugeElement(M)
    with pytest.raises(ValidationError):
        GaugeElement(np.diag([1.0, 0.0, 1.0, 1.0]))
    assert np.allclose(GaugeElement.identity(4).M, np.eye(4))


def test_gauge_preserves_first_row(published, target):
    est = gauge_optimize(published, target)
    for g in est.gates.values():
        assert np.allclose(g[0], published.gates["Gx"][0])
