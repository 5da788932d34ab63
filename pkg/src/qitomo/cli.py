"""Command-line interface.

Subcommands: gateset, design, simulate, estimate, report, scaling, stark.
Exit status 0 on success, 2 on invalid input, 3 on numerical failure; on
failure a JSON object ``{"error", "message", ...}`` is written to stderr.

Physical quantities accept unit suffixes: times as ``500ns``, ``2.02us`` or
plain seconds; ``--chi`` as ``-0.27MHz`` (meaning chi/2pi) or plain rad/s;
``--kappa`` as ``242ns`` (meaning 1/kappa), ``0.66MHz`` (kappa/2pi) or
plain 1/s.
"""
from __future__ import annotations

import argparse
import csv
import json
import re
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .design import ExperimentDesign, FiducialSet, build_design, default_fiducials
from .errors import NumericalError, QitomoError, ValidationError
from .estimate.bootstrap import bootstrap_errorbars
from .estimate.gauge import find_gauge
from .estimate.lgst import lgst
from .estimate.mle import loglikelihood, mle_fit
from .gateset import GateSet
from .metrics.report import build_report, report_scalars
from .models import published_gateset, target_gateset
from .simulate import Dataset, exact_dataset, simulate_design
from .stark import DeviceParams, predicted_params, stark_context_rules
from .studies import (
    DEFAULT_DELAYS,
    DEFAULT_SHOTS,
    phase_curves,
    scaling_study,
    scaling_summary,
    simulate_stark_sweep,
    stark_compare,
)

BUILTIN_GATESETS = {
    "target": lambda: target_gateset(idle=True),
    "target-noidle": lambda: target_gateset(idle=False),
    "published": published_gateset,
}

# divisors, so that 500ns parses to exactly 5e-07
_TIME_UNITS = {"s": 1.0, "ms": 1e3, "us": 1e6, "µs": 1e6, "ns": 1e9}
_FREQ_UNITS = {"hz": 1.0, "khz": 1e3, "mhz": 1e6, "ghz": 1e9}
_QTY = re.compile(r"^\s*([-+]?(?:\d+\.?\d*|\.\d+)(?:[eE][-+]?\d+)?)\s*([a-zA-Zµ]*)\s*$")


def _split(text: str):
    m = _QTY.match(text)
    if not m:
        raise ValidationError(f"cannot parse quantity {text!r}")
    return float(m.group(1)), m.group(2)


def parse_time(text: str) -> float:
    v, unit = _split(text)
    if not unit:
        return v
    if unit not in _TIME_UNITS:
        raise ValidationError(f"unknown time unit in {text!r}")
    return v / _TIME_UNITS[unit]


def parse_chi(text: str) -> float:
    v, unit = _split(text)
    if not unit:
        return v
    if unit.lower() not in _FREQ_UNITS:
        raise ValidationError(f"unknown frequency unit in {text!r}")
    return 2 * np.pi * v * _FREQ_UNITS[unit.lower()]


def parse_kappa(text: str) -> float:
    v, unit = _split(text)
    if not unit:
        return v
    if unit in _TIME_UNITS:
        t = v / _TIME_UNITS[unit]
        if t <= 0:
            raise ValidationError("cavity lifetime must be positive")
        return 1.0 / t
    if unit.lower() in _FREQ_UNITS:
        return 2 * np.pi * v * _FREQ_UNITS[unit.lower()]
    raise ValidationError(f"unknown unit in {text!r}")


def parse_list(text: str, conv=float) -> list:
    items = [s for s in text.split(",") if s.strip()]
    if not items:
        raise ValidationError(f"empty list {text!r}")
    return [conv(s.strip()) for s in items]


def _shots(text) -> int:
    try:
        v = float(text)
    except ValueError:
        raise ValidationError(f"shot count must be an integer, got {text!r}") from None
    if not v.is_integer() or v < 1:
        raise ValidationError(f"shot count must be a positive integer, got {text!r}")
    return int(v)


# --- I/O helpers ---------------------------------------------------------------

def _read_json(path) -> dict:
    p = Path(path)
    if not p.is_file():
        raise ValidationError(f"no such file: {path}")
    try:
        with p.open() as fh:
            return json.load(fh)
    except json.JSONDecodeError as exc:
        raise ValidationError(f"{path} is not valid JSON: {exc}") from exc


def load_gateset(name: str | None, default: str = "target") -> GateSet:
    name = name or default
    if name in BUILTIN_GATESETS:
        return BUILTIN_GATESETS[name]()
    return GateSet.from_dict(_read_json(name))


def load_fiducials(name: str | None) -> FiducialSet:
    if name in (None, "default"):
        return default_fiducials()
    return FiducialSet.from_dict(_read_json(name))


def _write_json(obj, path):
    text = json.dumps(obj, indent=2) + "\n"
    if path in (None, "-"):
        sys.stdout.write(text)
    else:
        Path(path).parent.mkdir(parents=True, exist_ok=True)
        Path(path).write_text(text)


def _write_csv(rows, fields, path):
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=fields, lineterminator="\n")
        w.writeheader()
        for r in rows:
            w.writerow({k: (repr(float(v)) if isinstance(v, (float, np.floating)) else v)
                        for k, v in r.items()})


def _device(args) -> DeviceParams:
    base = DeviceParams()
    kw = {}
    if args.chi is not None:
        kw["chi"] = parse_chi(args.chi)
    if args.kappa is not None:
        kw["kappa"] = parse_kappa(args.kappa)
    if args.n0 is not None:
        kw["n0"] = float(args.n0)
    if args.n1 is not None:
        kw["n1"] = float(args.n1)
    if args.tgate is not None:
        kw["t_gate"] = parse_time(args.tgate)
    return DeviceParams(**{**base.__dict__, **kw})


def _design(args, target) -> ExperimentDesign:
    if args.design:
        return ExperimentDesign.from_dict(_read_json(args.design))
    return build_design(list(target.gates), target=target)


# --- subcommands ---------------------------------------------------------------

def cmd_gateset(args):
    gs = load_gateset(args.gateset)
    _write_json(gs.to_dict(), args.out)


def cmd_design(args):
    target = load_gateset(args.target or args.gateset)
    fids = load_fiducials(args.fiducials)
    design = build_design(list(target.gates), list(target.instruments), fids, target)
    _write_json(design.to_dict(), args.out)
    print(f"circuits: {len(design)}", file=sys.stderr if args.out in (None, "-") else sys.stdout)
    print(f"instrument circuits: {len(design.instrument_circuits())}",
          file=sys.stderr if args.out in (None, "-") else sys.stdout)


def cmd_simulate(args):
    truth = load_gateset(args.gateset)
    target = load_gateset(args.target)
    design = _design(args, target)
    rules = None
    if args.stark is not None:
        t_d = parse_time(args.stark)
        rules = stark_context_rules(truth, predicted_params(_device(args).at(t_d), args.compat_phase))
    if args.exact:
        ds = exact_dataset(truth, design, 1.0, rules)
    else:
        if args.shots is None or args.seed is None:
            raise ValidationError("simulate needs --shots and --seed (or --exact)")
        ds = simulate_design(truth, design, _shots(args.shots), args.seed, rules)
    _write_json(ds.to_dict(), args.out)


def cmd_estimate(args):
    target = load_gateset(args.target)
    design = _design(args, target)
    ds = Dataset.from_dict(_read_json(args.data))
    fids = load_fiducials(args.fiducials) if args.fiducials else None
    est = lgst(ds, design, fids, target)
    converged = True
    if args.mle:
        est, info = mle_fit(ds, design, est, return_info=True)
        converged = info.converged
    g = find_gauge(est, target)
    est = est.transform(g.M)
    out = est.to_dict()
    out["loglikelihood"] = loglikelihood(est, ds, design)
    out["converged"] = converged
    out["gauge"] = g.M.ravel().tolist()
    _write_json(out, args.out)


def cmd_report(args):
    target = load_gateset(args.target)
    est = load_gateset(args.estimate or args.gateset)
    ds = Dataset.from_dict(_read_json(args.data)) if args.data else None
    design = None
    if ds is not None:
        design = _design(args, target)
    rep = build_report(est, target, ds, design)
    if args.bootstrap:
        design = design or _design(args, target)
        N = _shots(args.shots) if args.shots else (ds.shots if ds and ds.shots else 1024)
        seed = 0 if args.seed is None else args.seed
        bs = bootstrap_errorbars(est, design, N, args.bootstrap, seed,
                                 report_scalars(target), target=target, mle=args.mle)
        rep["bootstrap"] = {"shots": N, "seed": seed, **bs.to_dict()}
    _write_json(rep, args.out)


def cmd_scaling(args):
    shots = parse_list(args.shots, _shots) if args.shots else list(DEFAULT_SHOTS)
    seed = 0 if args.seed is None else args.seed
    rows = scaling_study(n_models=args.models, shots=shots, seed=seed, mle=args.mle)
    out = args.out or "scaling.csv"
    _write_csv(rows, ["model", "N", "epsilon_diamond"], out)
    s = scaling_summary(rows)
    print(json.dumps({"slope": s["slope"], "N": s["N"],
                      "mean_epsilon_diamond": s["mean_epsilon_diamond"]}))


def cmd_stark(args):
    target = load_gateset(args.target)
    design = _design(args, target)
    device = _device(args)
    delays = parse_list(args.stark, parse_time) if args.stark else list(DEFAULT_DELAYS)
    if args.data:
        paths = parse_list(args.data, str)
        if len(paths) != len(delays):
            raise ValidationError("--data needs one dataset per --stark delay")
        datasets = {t: Dataset.from_dict(_read_json(p)) for t, p in zip(delays, paths)}
    else:
        if args.seed is None:
            raise ValidationError("simulating a sweep needs --seed")
        truth = load_gateset(args.gateset, default="published")
        N = _shots(args.shots) if args.shots else 1024
        datasets = simulate_stark_sweep(truth, design, N, args.seed, delays, device,
                                        compat=args.compat_phase)
    records = stark_compare(datasets, design, target, device, args.compat_phase, mle=True)
    out = Path(args.out or "stark.json")
    _write_json([r.to_dict() for r in records], out)
    _write_csv(phase_curves(records, device, args.compat_phase),
               ["t_d", "i", "m", "varphi", "phi"], out.with_suffix(".phi.csv"))


# --- parser ---------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="qitomo", description=__doc__.split("\n")[0])
    p.add_argument("--version", action="version", version=__version__)
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, *names):
        opts = {
            "gateset": dict(help="gate set JSON path or builtin: " + ", ".join(BUILTIN_GATESETS)),
            "target": dict(help="target gate set (path or builtin; default: target)"),
            "design": dict(help="design JSON (default: built from the target)"),
            "data": dict(help="dataset JSON"),
            "out": dict(help="output path ('-' for stdout)"),
            "shots": dict(help="shots per circuit"),
            "seed": dict(type=int, help="random seed"),
            "mle": dict(action="store_true", help="refine with maximum likelihood"),
            "fiducials": dict(help="fiducial JSON {preps, meas} or 'default'"),
        }
        for n in names:
            sp.add_argument("--" + n, **opts[n])

    def device(sp):
        sp.add_argument("--stark", help="delay time(s) t_d, e.g. 500ns or a comma list")
        sp.add_argument("--chi", help="dispersive shift: -0.27MHz (chi/2pi) or rad/s")
        sp.add_argument("--kappa", help="cavity decay: 242ns (1/kappa), MHz (kappa/2pi) or 1/s")
        sp.add_argument("--n0", help="photons after outcome 0")
        sp.add_argument("--n1", help="photons after outcome 1 (default: from line shape)")
        sp.add_argument("--tgate", help="gate duration, e.g. 60ns")
        sp.add_argument("--compat-phase", action="store_true",
                        help="use the chi/n_i phase prefactor instead of chi n_i/kappa")

    sp = sub.add_parser("gateset", help="export a builtin gate set")
    common(sp, "gateset", "out")
    sp.set_defaults(func=cmd_gateset)

    sp = sub.add_parser("design", help="generate the experiment design")
    common(sp, "gateset", "target", "fiducials", "out")
    sp.set_defaults(func=cmd_design)

    sp = sub.add_parser("simulate", help="simulate a dataset")
    common(sp, "gateset", "target", "design", "shots", "seed", "out")
    sp.add_argument("--exact", action="store_true", help="write exact probabilities")
    device(sp)
    sp.set_defaults(func=cmd_simulate)

    sp = sub.add_parser("estimate", help="lgst, optional mle, gauge optimization")
    common(sp, "target", "design", "data", "mle", "fiducials", "out")
    sp.set_defaults(func=cmd_estimate)

    sp = sub.add_parser("report", help="figures of merit for an estimate")
    common(sp, "gateset", "target", "design", "data", "shots", "seed", "mle", "out")
    sp.add_argument("--estimate", help="estimate JSON or builtin gate set")
    sp.add_argument("--bootstrap", type=int, metavar="R", help="parametric bootstrap replicas")
    sp.set_defaults(func=cmd_report)

    sp = sub.add_parser("scaling", help="accuracy vs shots over random error models")
    common(sp, "shots", "seed", "mle", "out")
    sp.add_argument("--models", type=int, default=100, help="number of random models")
    sp.set_defaults(func=cmd_scaling)

    sp = sub.add_parser("stark", help="four-model comparison over delay times")
    common(sp, "gateset", "target", "design", "data", "shots", "seed", "out")
    device(sp)
    sp.set_defaults(func=cmd_stark)
    return p


def _fail(code: int, exc: Exception) -> int:
    err = {"error": type(exc).__name__, "message": str(exc)}
    details = getattr(exc, "details", None)
    if details:
        err["details"] = {k: (float(v) if isinstance(v, (np.floating, float)) else v)
                          for k, v in details.items()}
    sys.stderr.write(json.dumps(err) + "\n")
    return code


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        args.func(args)
    except NumericalError as exc:
        return _fail(3, exc)
    except (QitomoError, ValueError, KeyError, OSError) as exc:
        return _fail(2, exc)
    return 0


if __name__ == "__main__":
    sys.exit(main())
