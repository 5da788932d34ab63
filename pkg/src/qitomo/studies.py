"""End-to-end simulation studies.

* accuracy scaling: random error models, estimation error of the
  instrument against the truth as a function of shots per circuit;
* Stark sweep: datasets at several delays with a residual-photon error,
  compared under four models (per-delay Markovian fit, frozen
  longest-delay fit, frozen fit plus predicted Stark shift, frozen fit plus
  fitted Stark shift);
* Markovian null trials: goodness-of-fit statistics when the model is right.
"""
from __future__ import annotations

import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np

from .design import ExperimentDesign, build_design
from .estimate.bootstrap import fit_chain
from .estimate.gauge import gauge_optimize
from .estimate.lgst import lgst
from .estimate.mle import MleOptions, mle_fit
from .gateset import GateSet
from .metrics.diamond import half_diamond_distance
from .metrics.stats import model_violation
from .models import random_error_model, target_gateset
from .simulate import simulate_design, subseed
from .stark import (
    DeviceParams,
    StarkFitParams,
    dispersive_phase,
    fit_stark,
    predicted_params,
    stark_context_rules,
)

DEFAULT_SHOTS = (16, 32, 64, 128, 256, 512, 1024)
DEFAULT_DELAYS = (500e-9, 750e-9, 1020e-9, 1520e-9, 2020e-9)


def max_workers(requested: int | None = None) -> int:
    """Worker count: ``requested`` or the CPU count, capped by QITOMO_THREADS."""
    n = requested or os.cpu_count() or 1
    cap = os.environ.get("QITOMO_THREADS")
    if cap:
        try:
            n = min(n, max(1, int(cap)))
        except ValueError:
            pass
    return max(1, n)


def _map(fn, tasks, workers):
    if workers <= 1 or len(tasks) <= 1:
        return [fn(t) for t in tasks]
    with ProcessPoolExecutor(max_workers=min(workers, len(tasks))) as pool:
        return list(pool.map(fn, tasks))


# --- accuracy scaling -----------------------------------------------------------

def _scaling_task(args):
    j, shots, seed, mle, idle = args
    target = target_gateset(idle=idle)
    design = build_design(list(target.gates), target=target)
    rng = np.random.default_rng(subseed(seed, f"model:{j}"))
    truth = random_error_model(rng, idle=idle)
    rows = []
    for N in shots:
        ds = simulate_design(truth, design, N, subseed(seed, f"data:{j}:{N}"))
        est = lgst(ds, design, None, target)
        if mle:
            est = mle_fit(ds, design, est)
        est = gauge_optimize(est, truth)
        eps = half_diamond_distance(est.instruments["Q"], truth.instruments["Q"])
        rows.append({"model": j, "N": int(N), "epsilon_diamond": eps})
    return rows


def scaling_study(n_models: int = 100, shots=DEFAULT_SHOTS, seed: int = 0,
                  mle: bool = False, idle: bool = False, workers: int | None = None) -> list:
    """Rows ``{"model", "N", "epsilon_diamond"}`` in (model, N) order.

    Each estimate is gauge-optimized against its own truth before the
    instrument is compared, so the value measures estimation error only.
    """
    tasks = [(j, tuple(shots), seed, mle, idle) for j in range(n_models)]
    out = []
    for rows in _map(_scaling_task, tasks, max_workers(workers)):
        out.extend(rows)
    return out


def scaling_summary(rows) -> dict:
    """Mean accuracy per N and the log-log slope of mean vs N."""
    Ns = sorted({r["N"] for r in rows})
    means = [float(np.mean([r["epsilon_diamond"] for r in rows if r["N"] == N])) for N in Ns]
    slope = float(np.polyfit(np.log(Ns), np.log(means), 1)[0]) if len(Ns) > 1 else float("nan")
    return {"N": Ns, "mean_epsilon_diamond": means, "slope": slope}


# --- Stark sweep ------------------------------------------------------------------

def simulate_stark_sweep(truth: GateSet, design: ExperimentDesign, shots: int, seed: int,
                         delays=DEFAULT_DELAYS, device: DeviceParams | None = None,
                         mischaracterization: float = 1.25, compat: bool = False) -> dict:
    """Datasets keyed by delay, with Stark errors ``mischaracterization`` times
    stronger than the dispersive prediction (so the prediction is imperfect)."""
    device = device or DeviceParams()
    out = {}
    for t_d in delays:
        pred = predicted_params(device.at(t_d), compat)
        p = StarkFitParams(mischaracterization * pred.alpha0, mischaracterization * pred.alpha1,
                           pred.r0, pred.r1)
        rule = stark_context_rules(truth, p)
        out[t_d] = simulate_design(truth, design, shots, subseed(seed, f"stark:{t_d:.12g}"), rule)
    return out


@dataclass
class StarkRecord:
    t_d: float
    predicted: StarkFitParams
    fitted: StarkFitParams
    n_sigma: dict
    max_tvd: dict

    def to_dict(self) -> dict:
        return {
            "t_d": self.t_d,
            "predicted": {"alpha0": self.predicted.alpha0, "alpha1": self.predicted.alpha1,
                          "r": self.predicted.r0},
            "fitted": self.fitted.to_dict(),
            "n_sigma": self.n_sigma,
            "max_tvd": self.max_tvd,
        }


MODEL_NAMES = ("markovian", "frozen", "predicted_stark", "fitted_stark")


def stark_compare(datasets: dict, design: ExperimentDesign, target: GateSet,
                  device: DeviceParams | None = None, compat: bool = False,
                  mle: bool = True, reference: float | None = None,
                  options: MleOptions | None = None) -> list:
    """Four-model comparison per delay; the longest delay is the frozen reference."""
    device = device or DeviceParams()
    delays = sorted(datasets)
    ref = max(delays) if reference is None else reference
    frozen = fit_chain(datasets[ref], design, target, mle=mle, options=options)
    records = []
    for t_d in delays:
        ds = datasets[t_d]
        markov = frozen if t_d == ref else fit_chain(ds, design, target, mle=mle, options=options)
        pred = predicted_params(device.at(t_d), compat)
        mv = {
            "markovian": model_violation(markov, ds, design),
            "frozen": model_violation(frozen, ds, design, n_fit_params=0),
            "predicted_stark": model_violation(
                frozen, ds, design, n_fit_params=0, context_rules=stark_context_rules(frozen, pred)),
        }
        fit = fit_stark(ds, frozen, design, start=pred)
        mv["fitted_stark"] = fit.violation
        records.append(StarkRecord(
            t_d=t_d, predicted=pred, fitted=fit.params,
            n_sigma={k: mv[k].n_sigma for k in MODEL_NAMES},
            max_tvd={k: mv[k].max_tvd for k in MODEL_NAMES},
        ))
    return records


def phase_curves(records, device: DeviceParams | None = None, compat: bool = False,
                 positions: int = 3) -> list:
    """Rows ``(t_d, i, m, varphi, phi)``: predicted and fitted phase per gate."""
    device = device or DeviceParams()
    rows = []
    for rec in records:
        for i in range(2):
            for m in range(positions):
                rows.append({
                    "t_d": rec.t_d, "i": i, "m": m,
                    "varphi": dispersive_phase(device.at(rec.t_d), i, m, compat),
                    "phi": rec.fitted.phase(i, m),
                })
    return rows


# --- Markovian null trials ------------------------------------------------------------

def _null_task(args):
    truth, design, target, N, seed, mle = args
    ds = simulate_design(truth, design, N, seed)
    est = lgst(ds, design, None, target)
    if mle:
        est = mle_fit(ds, design, est)
    mv = model_violation(est, ds, design)
    return {"seed": seed, "n_sigma": mv.n_sigma, "max_tvd": mv.max_tvd, "k": mv.k,
            "lambda": mv.lambda_llr}


def markovian_null_trials(truth: GateSet, design: ExperimentDesign, target: GateSet,
                          N: int = 1024, trials: int = 50, seed: int = 0, mle: bool = True,
                          workers: int | None = None) -> list:
    tasks = [(truth, design, target, N, subseed(seed, f"null:{t}"), mle) for t in range(trials)]
    return _map(_null_task, tasks, max_workers(workers))
