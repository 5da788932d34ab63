import pytest

from qitomo.errors import ValidationError
from qitomo.estimate import bootstrap_errorbars
from qitomo.metrics.report import report_scalars


def test_exact_probabilities_give_zero_intervals(target, design):
    res = bootstrap_errorbars(target, design, None, 20, 0, report_scalars(target),
                              target=target, mle=False)
    assert not res.failed
    for k, v in res.intervals.items():
        assert v == pytest.approx(0.0, abs=1e-8), k
    assert res.values["epsilon_diamond"] == pytest.approx(0.0, abs=1e-8)


def test_finite_shots_give_positive_intervals(published, target, design):
    fns = report_scalars(target)
    res = bootstrap_errorbars(published, design, 512, 20, 3, fns, target=target, mle=False)
    assert res.intervals["epsilon_diamond"] > 0
    assert len(res.samples["readout_fidelity"]) == 20 - len(res.failed)
    again = bootstrap_errorbars(published, design, 512, 20, 3, fns, target=target, mle=False)
    assert again.intervals == res.intervals
    d = res.to_dict()
    assert set(d) == {"values", "intervals", "replicas", "failed"}


def test_too_few_replicas_rejected(target, design):
    with pytest.raises(ValidationError):
        bootstrap_errorbars(target, design, 64, 19, 0, report_scalars(target))


def test_no_scalars_rejected(target, design):
    with pytest.raises(ValidationError):
        bootstrap_errorbars(target, design, 64, 20, 0, {})
