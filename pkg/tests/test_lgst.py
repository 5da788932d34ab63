import numpy as np
import pytest

from qitomo.design import FiducialSet
from qitomo.errors import InformationalCompletenessError, ValidationError
from qitomo.estimate import gauge_optimize, lgst
from qitomo.estimate.gauge import GaugeElement
from qitomo.metrics import half_diamond_distance
from qitomo.models import depolarized_gateset
from qitomo.simulate import Dataset, exact_dataset, simulate_design


def max_distance(a, b):
    return max(a.distances(b).values())


def test_exact_target_recovered(target, design, exact_target_data):
    est = gauge_optimize(lgst(exact_target_data, design, None, target), target)
    assert max_distance(est, target) < 1e-8


def test_exact_noisy_model_recovered_up_to_gauge(target, design):
    truth = depolarized_gateset(0.03, target)
    est = lgst(exact_dataset(truth, design), design, None, target)
    est = gauge_optimize(est, truth)
    assert max_distance(est, truth) < 1e-8


def test_probabilities_are_gauge_invariant(target, design, published):
    rng = np.random.default_rng(0)
    M = np.eye(4)
    M[1:] += 0.1 * rng.standard_normal((3, 4))
    moved = published.transform(GaugeElement(M).M)
    a, b = exact_dataset(published, design), exact_dataset(moved, design)
    for cid in a.counts:
        for o in a.counts[cid]:
            assert a.counts[cid][o] == pytest.approx(b.counts[cid][o], abs=1e-12)


def test_lgst_estimate_nearly_trace_preserving(target, design, published_data):
    # linear inversion does not impose TP; finite data leave it close
    est = lgst(published_data, design, None, target)
    for g in est.gates.values():
        assert np.allclose(g[0], [1, 0, 0, 0], atol=3e-3)
    tot = sum(est.instruments["Q"].branches)
    assert np.allclose(tot[0], [1, 0, 0, 0], atol=3e-3)


def test_finite_data_close_to_truth(target, design, published, published_data):
    est = gauge_optimize(lgst(published_data, design, None, target), published)
    assert half_diamond_distance(est.instruments["Q"], published.instruments["Q"]) < 0.1


def test_missing_circuit_named(target, design, exact_target_data):
    counts = dict(exact_target_data.counts)
    del counts["Gx:Q:Gy"]
    with pytest.raises(ValidationError, match="Gx:Q:Gy"):
        lgst(Dataset(counts), design, None, target)


def test_rank_deficient_fiducials(target, design, exact_target_data):
    fids = FiducialSet([(), ("Gx",), ("Gx", "Gx")])
    with pytest.raises(InformationalCompletenessError):
        lgst(exact_target_data, design, fids, target)


def test_lgst_deterministic(target, design, published):
    ds = simulate_design(published, design, 128, seed=9)
    a = lgst(ds, design, None, target)
    b = lgst(ds, design, None, target)
    assert max_distance(a, b) == 0.0
