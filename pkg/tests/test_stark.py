import numpy as np
import pytest
from scipy.integrate import quad
from scipy.linalg import expm

from qitomo import ptm
from qitomo.design import Circuit
from qitomo.errors import ValidationError
from qitomo.models import random_error_model
from qitomo.simulate import circuit_probs, simulate_design
from qitomo.stark import (
    DeviceParams,
    StarkFitParams,
    dispersive_phase,
    fit_stark,
    predicted_params,
    stark_context_rules,
    stark_gate,
    z_generator,
)

DEV = DeviceParams()


@pytest.mark.parametrize("i", [0, 1])
@pytest.mark.parametrize("compat", [False, True])
def test_consecutive_ratio(i, compat):
    p = DEV.at(500e-9)
    for m in range(3):
        r = dispersive_phase(p, i, m + 1, compat) / dispersive_phase(p, i, m, compat)
        assert r == pytest.approx(np.exp(-DEV.kappa * DEV.t_gate), abs=1e-12)


@pytest.mark.parametrize("i", [0, 1])
def test_phase_matches_numeric_integral(i):
    p = DEV.at(500e-9)
    n = p.photons(i)
    ref, _ = quad(lambda t: p.chi * n * np.exp(-p.kappa * t), p.t_d, p.t_d + p.t_gate,
                  epsabs=0, epsrel=1e-13)
    assert dispersive_phase(p, i, 0) == pytest.approx(ref, rel=1e-6)


def test_phase_vanishes_at_long_delay():
    vals = [abs(dispersive_phase(DEV.at(t), 0, 0)) for t in (1e-6, 1e-5, 1e-4)]
    assert vals[0] > vals[1] > vals[2]
    assert vals[2] < 1e-12


def test_device_values():
    assert dispersive_phase(DEV.at(500e-9), 0, 0) == pytest.approx(-1.393239, abs=1e-6)
    assert DEV.photons(1) == pytest.approx(122 / (1 + (4 * DEV.chi / DEV.kappa) ** 2))
    assert predicted_params(DEV).r0 == pytest.approx(60 / 242)


def test_compat_prefactor_differs():
    p = DEV.at(500e-9)
    a = dispersive_phase(p, 0, 0, compat=True)
    b = dispersive_phase(p, 0, 0, compat=False)
    assert a / b == pytest.approx(DEV.kappa / DEV.photons(0) ** 2)


def test_device_validation():
    with pytest.raises(ValidationError):
        DeviceParams(kappa=0.0)
    with pytest.raises(ValidationError):
        DeviceParams(n0=-1.0)
    with pytest.raises(ValidationError):
        dispersive_phase(DEV, 2, 0)
    with pytest.raises(ValidationError):
        dispersive_phase(DEV, 0, -1)


@pytest.mark.parametrize("theta", [0.05, 0.4, -1.1])
def test_generator_is_z_rotation(theta):
    assert np.allclose(expm(theta * z_generator()), ptm.rotation("z", 2 * theta), atol=1e-12)


def test_stark_gate_continuity(target):
    G = target.gates["Gx"]
    assert np.allclose(stark_gate(G, 0.0, 0.2, 0), G)
    assert np.allclose(stark_gate(G, 1e-9, 0.2, 0), G, atol=1e-8)
    # on the target, log G commutes with nothing special; the shift stays unitary
    S = stark_gate(G, 0.3, 0.2, 1)
    assert ptm.is_tp(S) and ptm.is_cp(S)


def test_rules_only_touch_post_measurement_gates(target):
    rule = stark_context_rules(target, StarkFitParams(0.5, 0.2, 0.25, 0.25))
    pre = Circuit(("Gx", "Q"))
    assert circuit_probs(target, pre, rule) == pytest.approx(circuit_probs(target, pre))
    post = Circuit(("Gy", "Q", "Gx"))
    assert circuit_probs(target, post, rule) != pytest.approx(circuit_probs(target, post))
    assert all(g != "Gi" for (_, _, g) in rule.substitutions)


def test_fit_round_trip(design):
    base = random_error_model(np.random.default_rng(2), idle=True)
    pred = predicted_params(DEV.at(500e-9))
    truth = StarkFitParams(pred.alpha0, pred.alpha1, 0.248, 0.30)
    ds = simulate_design(base, design, 4096, seed=21, context_rules=stark_context_rules(base, truth))
    fit = fit_stark(ds, base, design, start=pred)
    assert fit.loglikelihood >= fit.start_loglikelihood
    got, want = fit.params.as_array(), truth.as_array()
    assert np.all(np.abs(got - want) <= 0.05 * np.abs(want))
    assert fit.violation.k == 200 - 4


def test_fit_exact_probabilities(published, design):
    # with infinite statistics the fit returns the generating parameters
    from qitomo.simulate import exact_dataset

    pred = predicted_params(DEV.at(500e-9))
    truth = StarkFitParams(1.25 * pred.alpha0, 1.25 * pred.alpha1, 0.248, 0.30)
    ds = exact_dataset(published, design, 1e6, stark_context_rules(published, truth))
    fit = fit_stark(ds, published, design, start=pred)
    assert np.allclose(fit.params.as_array(), truth.as_array(), rtol=1e-4)
