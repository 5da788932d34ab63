"""Built-in gate sets: the ideal target, the published 2020 ns estimate, and
the random error models used for the accuracy-scaling study."""
from __future__ import annotations

import numpy as np

from . import ptm
from .gateset import GateSet
from .ptm import QuantumInstrument

SQRT2 = np.sqrt(2.0)

# Published reconstruction at t_d = 2020 ns, entries as printed.  The state is
# printed without its 1/sqrt(2) prefactor; the effect includes it explicitly.
_PUBLISHED = {
    "rho": [1.0, -0.016, -0.008, 0.953],
    "E0": [1.002, -0.002, -0.01, 0.997],
    "Gi": [
        [1.0, 0.0, 0.0, 0.0],
        [-0.004, 0.993, -0.001, 0.021],
        [0.01, 0.008, 0.989, -0.008],
        [0.005, -0.022, 0.003, 0.99],
    ],
    "Gx": [
        [1.0, 0.0, 0.0, 0.0],
        [-0.001, 0.999, 0.003, -0.004],
        [0.0, -0.004, 0.011, -0.999],
        [0.0, -0.003, 0.999, 0.011],
    ],
    "Gy": [
        [1.0, 0.0, 0.0, 0.0],
        [-0.001, 0.005, 0.004, 0.999],
        [-0.001, -0.005, 0.999, -0.004],
        [0.001, -0.999, -0.005, 0.006],
    ],
    "Q0": [
        [0.504, 0.003, -0.006, 0.493],
        [-0.01, 0.002, 0.005, -0.014],
        [-0.007, -0.005, 0.002, -0.0],
        [0.454, 0.0, 0.005, 0.478],
    ],
    "Q1": [
        [0.496, -0.003, 0.006, -0.493],
        [0.004, 0.001, 0.001, -0.009],
        [0.009, -0.003, -0.005, -0.009],
        [-0.418, 0.004, 0.0, 0.448],
    ],
}


def target_gateset(idle: bool = True, instrument: str = "Q") -> GateSet:
    """Ideal gate set: |0> prep, x/y pi/2 rotations, z-basis QI and POVM."""
    gates = {}
    if idle:
        gates["Gi"] = np.eye(4)
    gates["Gx"] = ptm.rotation("x", np.pi / 2)
    gates["Gy"] = ptm.rotation("y", np.pi / 2)
    e0 = ptm.basis_state(0)
    return GateSet(
        rho=ptm.basis_state(0),
        gates=gates,
        instruments={instrument: ptm.measure_prepare_instrument()},
        povm={"0": e0, "1": ptm.identity_effect() - e0},
    )


def published_gateset() -> GateSet:
    """Published reconstruction of the device gate set at t_d = 2020 ns."""
    raw = {
        "dim": 2,
        "rho": _PUBLISHED["rho"],
        "povm": {"0": _PUBLISHED["E0"]},
        "gates": {k: _PUBLISHED[k] for k in ("Gi", "Gx", "Gy")},
        "instruments": {"Q": [_PUBLISHED["Q0"], _PUBLISHED["Q1"]]},
    }
    gs = GateSet.from_dict(raw, scales={"rho": 1 / SQRT2, "povm": 1 / SQRT2})
    e0 = gs.povm["0"]
    return gs.with_ops(povm={"0": e0, "1": ptm.identity_effect() - e0})


def confusion_instrument(eps0: float, eps1: float, coherence: float = 0.0):
    """z-basis instrument with classical misreport and residual coherence.

    ``eps0`` is the probability that a collapse onto |0> is reported as 1
    (and ``eps1`` vice versa); the post-measurement state is unaffected.
    ``coherence`` is added to the xx and yy PTM entries of both branches.
    """
    t0, t1 = ptm.measure_prepare_instrument().branches
    coh = np.zeros((4, 4))
    coh[1, 1] = coh[2, 2] = coherence
    q0 = (1 - eps0) * t0 + eps1 * t1 + coh
    q1 = eps0 * t0 + (1 - eps1) * t1 + coh
    return QuantumInstrument([q0, q1])


def random_error_model(
    rng: np.random.Generator,
    idle: bool = False,
    over_rotation: float = 1e-3,
    gate_depol: float = 1e-2,
    spam_depol: float = 1e-3,
    max_confusion: float = 1e-2,
    max_coherence: float = 1e-2,
) -> GateSet:
    """One random error model of the accuracy-scaling study.

    Gate and SPAM errors are fixed; the instrument draws two independent
    misreport probabilities and a common x/y coherence strength uniformly.
    Draws that would make a branch non-CP are redrawn.
    """
    target = target_gateset(idle=idle)
    noise = (
        ptm.depolarizing(gate_depol)
        @ ptm.rotation("x", over_rotation)
        @ ptm.rotation("y", over_rotation)
    )
    gates = {k: noise @ g for k, g in target.gates.items()}
    if idle:
        gates["Gi"] = ptm.depolarizing(gate_depol)
    spam = ptm.depolarizing(spam_depol)
    e0 = target.povm["0"] @ spam
    while True:
        eps0, eps1 = rng.uniform(0.0, max_confusion, size=2)
        c = rng.uniform(0.0, max_coherence)
        Q = confusion_instrument(eps0, eps1, c)
        if Q.is_cp():
            break
    return GateSet(
        rho=spam @ target.rho,
        gates=gates,
        instruments={"Q": Q},
        povm={"0": e0, "1": ptm.identity_effect() - e0},
    )


def depolarized_gateset(p: float, target: GateSet | None = None) -> GateSet:
    """Target with depolarizing noise ``p`` after every gate and branch."""
    target = target or target_gateset()
    D = ptm.depolarizing(p)
    return target.with_ops(
        gates={k: D @ g for k, g in target.gates.items()},
        instruments={
            k: q.transform(lambda b: D @ b) for k, q in target.instruments.items()
        },
    )


def _random_isometry(rng: np.random.Generator, rows: int, d: int) -> np.ndarray:
    z = (rng.standard_normal((rows, d)) + 1j * rng.standard_normal((rows, d))) / SQRT2
    q, r = np.linalg.qr(z)
    return q * (np.diag(r) / np.abs(np.diag(r)))


def random_channel(rng: np.random.Generator, rank: int = 2, d: int = 2) -> np.ndarray:
    """PTM of a random CPTP map with ``rank`` Kraus operators (Haar isometry)."""
    V = _random_isometry(rng, rank * d, d)
    return ptm.ptm_from_kraus([V[k * d:(k + 1) * d] for k in range(rank)])


def random_instrument(rng: np.random.Generator, m: int = 2, rank: int = 2,
                      d: int = 2) -> QuantumInstrument:
    """Random ``m``-outcome instrument, each branch with ``rank`` Kraus operators."""
    V = _random_isometry(rng, m * rank * d, d)
    K = [V[k * d:(k + 1) * d] for k in range(m * rank)]
    return QuantumInstrument([ptm.ptm_from_kraus(K[i * rank:(i + 1) * rank]) for i in range(m)])
