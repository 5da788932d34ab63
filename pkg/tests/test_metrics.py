import numpy as np
import pytest

from qitomo.errors import ValidationError
from qitomo.metrics import (
    instrument_report,
    max_tvd,
    model_violation,
    n_sigma_from,
    readout_fidelity,
    tvd,
)
from qitomo.metrics.report import build_report
from qitomo.models import confusion_instrument
from qitomo.simulate import exact_dataset, simulate_design


def test_tvd_arithmetic():
    assert tvd([0.5, 0.5], [1.0, 0.0]) == pytest.approx(0.5)
    assert tvd({"0": 0.2, "1": 0.8}, {"0": 0.2, "1": 0.8}) == 0.0
    assert tvd({"0": 0.25, "1": 0.75}, {"1": 1.0}) == pytest.approx(0.25)


def test_tvd_alphabet_mismatch():
    with pytest.raises(ValidationError):
        tvd({"0": 1.0}, {"2": 1.0})
    with pytest.raises(ValidationError):
        tvd([0.5, 0.5], [1.0])


def test_n_sigma_arithmetic():
    assert n_sigma_from(141.0, 141) == 0.0
    assert n_sigma_from(141.0 + np.sqrt(282.0), 141) == pytest.approx(1.0)
    with pytest.raises(ValidationError):
        n_sigma_from(1.0, 0)


def test_degrees_of_freedom(target, design, published_data):
    mv = model_violation(target, published_data, design)
    assert mv.n_outcomes == 200
    assert mv.n_params == 59
    assert mv.k == 141
    assert model_violation(target, published_data, design, n_fit_params=0).k == 200


def test_exact_data_give_zero_violation(published, design):
    mv = model_violation(published, exact_dataset(published, design), design)
    assert mv.lambda_llr == pytest.approx(0.0, abs=1e-9)
    assert mv.max_tvd == pytest.approx(0.0, abs=1e-12)
    assert mv.n_sigma == pytest.approx(-np.sqrt(mv.k / 2.0))


def test_wrong_model_flagged(target, published, design):
    ds = simulate_design(published, design, 4096, seed=1)
    assert model_violation(target, ds, design, n_fit_params=0).n_sigma > 5


def test_max_tvd_subset(published, design):
    ds = simulate_design(published, design, 256, seed=4)
    per = model_violation(published, ds, design).tvd
    inst = [c.id for c in design.instrument_circuits()]
    assert max_tvd(published, ds, design) == pytest.approx(max(per[c] for c in inst))
    assert max_tvd(published, ds, design, design.circuits) == pytest.approx(max(per.values()))
    with pytest.raises(ValidationError):
        max_tvd(published, ds, design, [])


@pytest.mark.parametrize("eps", [0.0, 0.01, 0.05])
def test_readout_fidelity_of_confusion(target, eps):
    gs = target.with_ops(instruments={"Q": confusion_instrument(eps, eps)})
    assert readout_fidelity(gs).F == pytest.approx(1 - eps, abs=1e-12)


def test_readout_fidelity_observed_matches_predicted(published, design):
    ds = exact_dataset(published, design)
    a, b = readout_fidelity(ds), readout_fidelity(published)
    assert a.F == pytest.approx(b.F, abs=1e-12)


def test_readout_needs_circuits():
    from qitomo.simulate import Dataset

    with pytest.raises(ValidationError):
        readout_fidelity(Dataset({"Gx": {"0": 1, "1": 0}}))


def test_target_instrument_report(target):
    rep = instrument_report(target.instruments["Q"])
    assert np.allclose(rep.p, np.eye(2))
    assert rep.fidelities == pytest.approx((1.0, 1.0))
    assert rep.z == pytest.approx((1.0, -1.0))
    assert rep.F_tilde == pytest.approx(1.0)


def test_published_instrument_report(published):
    rep = instrument_report(published.instruments["Q"])
    assert rep.p[0, 0] == pytest.approx(0.997, abs=0.002)
    assert rep.p[1, 1] == pytest.approx(0.989, abs=0.002)
    assert rep.F_tilde == pytest.approx(0.993, abs=0.004)
    assert rep.fidelities[0] == pytest.approx(0.968, abs=0.01)
    assert rep.fidelities[1] == pytest.approx(0.937, abs=0.01)


def test_report_for_target_is_all_zero(target, design):
    rep = build_report(target, target, exact_dataset(target, design), design)
    assert rep["epsilon_diamond"] == pytest.approx(0.0, abs=1e-9)
    assert all(v == pytest.approx(0.0, abs=1e-9) for v in rep["epsilon_diamond_gates"].values())
    assert rep["readout_fidelity"]["predicted"]["F"] == pytest.approx(1.0)
    assert rep["model_violation"]["lambda"] == pytest.approx(0.0, abs=1e-9)
