"""Command-line surface: linearize, step, fit, rga, tune, simulate, pipeline.

File-based I/O with stable exit codes for scripting: 0 on success, 1 on a
numerical failure (singular matrices, poles, non-realizable models), 2 on
usage or input-validation problems.  Every subcommand is deterministic over
identical inputs; the only randomness is the optional seeded measurement
noise on step tests.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
import warnings

import numpy as np

from . import casestudy
from .cloop import (LoopConfig, PiController, loop_config_from_dict,
                    loop_config_to_dict, saturation_report, simulate_closed_loop)
from .errors import DimensionMismatch, LoopTuneError, NeverResponds
from .ioutil import SchemaError, fmt_float
from .linss import DaeJacobians, StateSpaceModel, reduce_dae, transfer_at
from .lti import TimeSeries, TransferFunction
from .pairing import GainMatrix, analyze
from .plant import PlantMatrix
from .plotsvg import render_panels
from .simc import RECOMMENDED, cancel_positive_zeros, half_rule, tune_loop
from .sysid import (BatteryResult, NormalizedStep, StepExperiment,
                    fit_sopdt, initial_guess, run_step_battery)


def _load_json(path: str) -> dict:
    if not os.path.exists(path):
        raise SchemaError(f"input file does not exist: {path}")
    with open(path) as fh:
        try:
            return json.load(fh)
        except json.JSONDecodeError as exc:
            raise SchemaError(f"{path} is not valid JSON: {exc}") from exc


def _dump_json(obj, path: str) -> None:
    with open(path, "w") as fh:
        json.dump(obj, fh, indent=2)
        fh.write("\n")


def _fmt_value(v) -> str:
    v = complex(v)
    if v.imag == 0.0:
        return fmt_float(v.real)
    return repr(v).strip("()")


def _write_matrix_csv(path, values, row_names, col_names) -> None:
    with open(path, "w", newline="") as fh:
        fh.write(",".join(["cv\\mv"] + list(col_names)) + "\n")
        for i, name in enumerate(row_names):
            fh.write(",".join([name] + [_fmt_value(v) for v in values[i]]) + "\n")


def _read_matrix_csv(path):
    with open(path, newline="") as fh:
        header = fh.readline().strip().split(",")
        col_names = header[1:]
        row_names = []
        rows = []
        for line in fh:
            if not line.strip():
                continue
            cells = line.strip().split(",")
            row_names.append(cells[0])
            rows.append([complex(c) for c in cells[1:]])
    values = np.array(rows, dtype=complex)
    if values.size == 0 or values.shape[1] != len(col_names):
        raise SchemaError(f"{path}: malformed gain matrix CSV")
    return values, row_names, col_names


def _out_dir(args) -> str:
    os.makedirs(args.out, exist_ok=True)
    return args.out


# --- linearize ---------------------------------------------------------

def cmd_linearize(args) -> int:
    obj = _load_json(args.jacobians)
    jac = DaeJacobians.from_dict(obj)
    if jac.n_states == 0 or jac.n_inputs == 0 or jac.n_outputs == 0:
        raise SchemaError("jacobian blocks describe an empty system")
    ss = reduce_dae(jac, input_names=obj.get("input_names"),
                    output_names=obj.get("output_names"))
    out = _out_dir(args)
    _dump_json(ss.to_dict(), os.path.join(out, "state_space.json"))
    gain = transfer_at(ss, 1j * args.frequency)
    _write_matrix_csv(os.path.join(out, "dc_gain.csv"), gain,
                      ss.output_names, ss.input_names)
    print(f"wrote state_space.json and dc_gain.csv (frequency {args.frequency} rad/s)")
    return 0


# --- step battery ------------------------------------------------------

def _battery_experiment(args) -> StepExperiment:
    rate = None if args.sample_rate in (None, "auto") else float(args.sample_rate)
    sizes = tuple(float(s) for s in args.step_sizes.split(",")) \
        if args.step_sizes else (-0.01, -0.005, 0.005, 0.01)
    return StepExperiment(step_sizes=sizes, tf=args.horizon, sample_rate=rate)


def _apply_noise(battery: BatteryResult, std: float, seed: int) -> None:
    """Seeded measurement noise on the normalized responses (not the MV)."""
    if std <= 0.0:
        return
    rng = np.random.default_rng(seed)
    for (cv, mv), steps in sorted(battery.steps.items()):
        for step in steps:
            noise = rng.normal(0.0, std, step.s.shape)
            noise[step.t < 0.0] = 0.0
            step.s = step.s + noise
            record = battery.records.get(mv)
            name = f"{cv}@{step.step_size:+g}"
            if record is not None and name in record.channels:
                record.channels[name] = step.s


def _write_battery(battery: BatteryResult, out: str) -> None:
    for mv, ts in battery.records.items():
        ts.to_csv(os.path.join(out, f"step_{mv}.csv"))
    _write_matrix_csv(os.path.join(out, "responsiveness.csv"),
                      battery.responsiveness,
                      battery.cv_names, battery.mv_names)


def cmd_step(args) -> int:
    plant = PlantMatrix.from_dict(_load_json(args.plant))
    exp = _battery_experiment(args)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        battery = run_step_battery(plant, exp)
    _apply_noise(battery, args.noise, args.seed)
    out = _out_dir(args)
    _write_battery(battery, out)
    print(f"wrote {len(battery.records)} step CSVs and responsiveness.csv")
    return 0


# --- fit ---------------------------------------------------------------

def _battery_from_dir(directory: str) -> BatteryResult:
    files = sorted(f for f in os.listdir(directory)
                   if f.startswith("step_") and f.endswith(".csv"))
    if not files:
        raise SchemaError(f"no step_<mv>.csv files found in {directory}")
    steps = {}
    cv_names = []
    mv_names = []
    for fname in files:
        mv = fname[len("step_"):-len(".csv")]
        mv_names.append(mv)
        ts = TimeSeries.from_csv(os.path.join(directory, fname))
        for name, col in ts.channels.items():
            if "@" not in name:
                continue
            channel, size_s = name.rsplit("@", 1)
            if channel == mv:
                continue
            if channel not in cv_names:
                cv_names.append(channel)
            step = NormalizedStep(t=ts.t - ts.t[1], s=col, cv_name=channel,
                                  mv_name=mv, step_size=float(size_s))
            steps.setdefault((channel, mv), []).append(step)
    return BatteryResult(cv_names=cv_names, mv_names=mv_names, steps=steps)


def _fit_battery(battery: BatteryResult) -> dict:
    pairs = []
    for (cv, mv), steps in sorted(battery.steps.items()):
        fits = []
        for step in steps:
            try:
                guess = initial_guess(step)
            except NeverResponds:
                continue
            fit = fit_sopdt(step, guess)
            fits.append({
                "step_size": step.step_size,
                "model": fit.model.to_dict(),
                "residual_norm": fit.residual_norm,
                "converged": fit.converged,
                "iterations": fit.iterations,
            })
        if not fits:
            pairs.append({"cv": cv, "mv": mv, "responsive": False})
            continue
        k0s = [f["model"]["k0"] for f in fits]
        mean_model = TransferFunction(
            k0=float(np.mean(k0s)),
            zeros=(float(np.mean([f["model"]["zeros"][0] for f in fits])),),
            poles=(float(np.mean([f["model"]["poles"][0] for f in fits])),
                   float(np.mean([f["model"]["poles"][1] for f in fits]))),
            delay=float(np.mean([f["model"]["delay"] for f in fits])))
        pairs.append({
            "cv": cv, "mv": mv, "responsive": True,
            "fits": fits,
            "mean_model": mean_model.to_dict(),
            "sign_flip": bool(len({math.copysign(1.0, k) for k in k0s}) > 1),
        })
    return {"kind": "fit_index", "pairs": pairs}


def cmd_fit(args) -> int:
    battery = _battery_from_dir(args.battery)
    index = _fit_battery(battery)
    out = _out_dir(args)
    _dump_json(index, os.path.join(out, "fits.json"))
    responsive = sum(1 for p in index["pairs"] if p["responsive"])
    print(f"fitted {responsive} responsive pairs "
          f"({len(index['pairs'])} total) -> fits.json")
    return 0


# --- rga ---------------------------------------------------------------

def _gain_matrix_from_input(path: str, omega: float) -> GainMatrix:
    if path.endswith(".csv"):
        values, row_names, col_names = _read_matrix_csv(path)
        return GainMatrix(values=values, cv_names=row_names,
                          mv_names=col_names, frequency=omega)
    obj = _load_json(path)
    kind = obj.get("kind")
    if kind == "state_space":
        return GainMatrix.from_state_space(StateSpaceModel.from_dict(obj), omega)
    if kind == "plant_matrix":
        return GainMatrix.from_plant(PlantMatrix.from_dict(obj), omega)
    if kind == "fit_index":
        return _gain_matrix_from_fits(obj, omega)
    raise SchemaError(f"cannot read a gain matrix from kind '{kind}'")


def _gain_matrix_from_fits(obj: dict, omega: float) -> GainMatrix:
    cv_names = []
    mv_names = []
    for entry in obj["pairs"]:
        if entry["cv"] not in cv_names:
            cv_names.append(entry["cv"])
        if entry["mv"] not in mv_names:
            mv_names.append(entry["mv"])
    values = np.zeros((len(cv_names), len(mv_names)), dtype=complex)
    for entry in obj["pairs"]:
        if not entry.get("responsive"):
            continue
        tf = TransferFunction.from_dict(entry["mean_model"])
        values[cv_names.index(entry["cv"]), mv_names.index(entry["mv"])] = \
            tf.evaluate(1j * omega)
    return GainMatrix(values=values, cv_names=cv_names, mv_names=mv_names,
                      frequency=omega)


def _write_pairing(result, out: str) -> None:
    _write_matrix_csv(os.path.join(out, "lambda.csv"), result.lam,
                      result.cv_names, result.mv_names)
    _write_matrix_csv(os.path.join(out, "phi.csv"), result.phi,
                      result.cv_names, result.mv_names)
    payload = {
        "kind": "pairing",
        "method": result.method,
        "total_abs_interaction": result.total_interaction(),
        "pairs": [
            {"cv": result.cv_names[p.cv_index],
             "mv": result.mv_names[p.mv_index],
             "abs_phi": abs(p.phi),
             "phi": [p.phi.real, p.phi.imag],
             "rga": [p.rga.real, p.rga.imag],
             "negative_rga_warning": p.negative_rga_warning}
            for p in result.pairs],
    }
    _dump_json(payload, os.path.join(out, "pairing.json"))
    with open(os.path.join(out, "pairing.csv"), "w", newline="") as fh:
        fh.write("order,cv,mv,abs_phi,re_phi,im_phi,re_rga,im_rga,negative_rga_warning\n")
        for k, p in enumerate(result.pairs):
            fh.write(",".join([
                str(k + 1),
                result.cv_names[p.cv_index], result.mv_names[p.mv_index],
                fmt_float(abs(p.phi)), fmt_float(p.phi.real),
                fmt_float(p.phi.imag), fmt_float(p.rga.real),
                fmt_float(p.rga.imag), str(int(p.negative_rga_warning)),
            ]) + "\n")


def cmd_rga(args) -> int:
    g = _gain_matrix_from_input(args.input, args.frequency)
    result = analyze(g, method=args.method)
    out = _out_dir(args)
    _write_pairing(result, out)
    print(f"{args.method} pairing, total |interaction| = "
          f"{result.total_interaction():.6g}:")
    for p in result.pairs:
        warn = "  [negative RGA]" if p.negative_rga_warning else ""
        print(f"  {result.cv_names[p.cv_index]} <- "
              f"{result.mv_names[p.mv_index]}  |phi| = {abs(p.phi):.4g}{warn}")
    return 0


# --- tune --------------------------------------------------------------

def _parse_tau_c(spec_list):
    """--tau-c VALUE applies to all loops; --tau-c CV=VALUE to one loop."""
    default = RECOMMENDED
    per_loop = {}
    for item in spec_list or []:
        if "=" in item:
            cv, value = item.split("=", 1)
            per_loop[cv] = RECOMMENDED if value == "recommended" else float(value)
        else:
            default = RECOMMENDED if item == "recommended" else float(item)
    return default, per_loop


def _tune_models(models: list, tau_c_default, tau_c_per_loop) -> tuple[dict, str]:
    loops = []
    reports = []
    for cv, mv, tf in models:
        tau_c = tau_c_per_loop.get(cv, tau_c_default)
        gains, report = tune_loop(tf, tau_c)
        loops.append({
            "cv": cv, "mv": mv,
            "kp": gains.kp, "ki": gains.ki, "tau_c": gains.tau_c,
            "fopdt": {"k": report.fopdt.k, "tau1": report.fopdt.tau1,
                      "taud": report.fopdt.taud},
            "report": report.to_dict(),
        })
        reports.append(f"== loop {cv} <- {mv} ==\n{report.render()}")
    return {"kind": "pi_gains", "loops": loops}, "\n\n".join(reports) + "\n"


def _models_from_input(path: str, pairing_path: str | None) -> list:
    obj = _load_json(path)
    kind = obj.get("kind")
    if kind == "fit_index":
        selected = None
        if pairing_path:
            pairing = _load_json(pairing_path)
            selected = [(p["cv"], p["mv"]) for p in pairing["pairs"]]
        models = []
        for entry in obj["pairs"]:
            if not entry.get("responsive"):
                continue
            if selected is not None and (entry["cv"], entry["mv"]) not in selected:
                continue
            models.append((entry["cv"], entry["mv"],
                           TransferFunction.from_dict(entry["mean_model"])))
        if not models:
            raise SchemaError("no responsive fitted pairs selected for tuning")
        return models
    if "k0" in obj:
        return [("y", "u", TransferFunction.from_dict(obj))]
    raise SchemaError(f"cannot read tuning models from kind '{kind}'")


def cmd_tune(args) -> int:
    models = _models_from_input(args.input, args.pairing)
    default, per_loop = _parse_tau_c(args.tau_c)
    payload, text = _tune_models(models, default, per_loop)
    out = _out_dir(args)
    _dump_json(payload, os.path.join(out, "gains.json"))
    with open(os.path.join(out, "tune_report.txt"), "w") as fh:
        fh.write(text)
    for loop in payload["loops"]:
        print(f"{loop['cv']} <- {loop['mv']}: Kp = {loop['kp']:.6g}, "
              f"Ki = {loop['ki']:.6g} 1/s, tau_c = {loop['tau_c']:.6g} s")
    return 0


# --- simulate ----------------------------------------------------------

def _plot_trace(trace: TimeSeries, plant: PlantMatrix, out: str) -> None:
    cvs = {n: trace.channels[n] for n in plant.cv_names}
    mvs = {n: trace.channels[n] for n in plant.mv_names}
    with open(os.path.join(out, "cvs.svg"), "w") as fh:
        fh.write(render_panels(trace.t, cvs, "controlled variables"))
    with open(os.path.join(out, "mvs.svg"), "w") as fh:
        fh.write(render_panels(trace.t, mvs, "manipulated variables"))


def cmd_simulate(args) -> int:
    plant = PlantMatrix.from_dict(_load_json(args.plant))
    cfg = loop_config_from_dict(_load_json(args.config), plant)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        trace = simulate_closed_loop(plant, cfg)
    out = _out_dir(args)
    trace.to_csv(os.path.join(out, "trace.csv"))
    report = saturation_report(trace, cfg)
    payload = {mv: [{"t_start": iv.t_start, "t_end": iv.t_end,
                     "limit": iv.limit,
                     "integrator_at_exit": iv.integrator_at_exit}
                    for iv in intervals]
               for mv, intervals in report.items()}
    _dump_json({"kind": "saturation_report", "intervals": payload},
               os.path.join(out, "saturation.json"))
    if args.plots:
        _plot_trace(trace, plant, out)
    n_sat = sum(len(v) for v in payload.values())
    print(f"simulated {cfg.horizon:.6g} s at dt = {cfg.dt:.6g} s; "
          f"{n_sat} saturation intervals -> trace.csv")
    return 0


# --- pipeline ----------------------------------------------------------

def cmd_pipeline(args) -> int:
    out = _out_dir(args)
    stage = "load-plant"
    try:
        plant = PlantMatrix.from_dict(_load_json(args.plant))

        stage = "step-battery"
        exp = _battery_experiment(args)
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            battery = run_step_battery(plant, exp)
        _write_battery(battery, out)

        stage = "fit"
        index = _fit_battery(battery)
        _dump_json(index, os.path.join(out, "fits.json"))

        stage = "pairing"
        g = _gain_matrix_from_fits(index, 0.0)
        _write_matrix_csv(os.path.join(out, "gain_matrix.csv"),
                          g.values, g.cv_names, g.mv_names)
        result = analyze(g, method=args.method)
        _write_pairing(result, out)

        stage = "tune"
        by_pair = {(e["cv"], e["mv"]): e for e in index["pairs"]
                   if e.get("responsive")}
        models = []
        for p in result.pairs:
            cv = result.cv_names[p.cv_index]
            mv = result.mv_names[p.mv_index]
            entry = by_pair.get((cv, mv))
            if entry is None:
                raise LoopTuneError(
                    f"pairing selected {cv} <- {mv} but that pair has no fit")
            models.append((cv, mv, TransferFunction.from_dict(entry["mean_model"])))
        default, per_loop = _parse_tau_c(args.tau_c)
        if default == RECOMMENDED:
            # tau_c = effective delay, floored so tau_c + delay covers ten
            # integration steps; otherwise a near-zero-delay loop tunes to
            # gains the fixed-step co-simulation cannot resolve
            for cv, mv, tf in models:
                if cv in per_loop:
                    continue
                fopdt = half_rule(cancel_positive_zeros(tf)[0])
                per_loop[cv] = max(fopdt.taud, 10.0 * args.dt - fopdt.taud)
        payload, text = _tune_models(models, default, per_loop)
        _dump_json(payload, os.path.join(out, "gains.json"))
        with open(os.path.join(out, "tune_report.txt"), "w") as fh:
            fh.write(text)

        stage = "simulate"
        pairs = []
        controllers = []
        setpoints = {}
        for k, loop in enumerate(payload["loops"]):
            i = plant.cv_names.index(loop["cv"])
            j = plant.mv_names.index(loop["mv"])
            pairs.append((i, j))
            controllers.append(PiController(
                kp=loop["kp"], ki=loop["ki"],
                u_min=min(0.0, 2.0 * plant.u_ss[j]),
                u_max=max(0.0, 2.0 * plant.u_ss[j])))
            # staggered +1% setpoint steps, one loop per hour
            z0 = plant.z_ss[i]
            setpoints[loop["cv"]] = [(3600.0 * (k + 1), z0 * 1.01 if z0 != 0.0
                                      else 0.01)]
        cfg = LoopConfig(pairs=pairs, controllers=controllers, dt=args.dt,
                         horizon=args.sim_horizon,
                         cv_names=list(plant.cv_names),
                         mv_names=list(plant.mv_names),
                         setpoints=setpoints)
        _dump_json(loop_config_to_dict(cfg), os.path.join(out, "loops.json"))
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            trace = simulate_closed_loop(plant, cfg)
        trace.to_csv(os.path.join(out, "trace.csv"))
        report = saturation_report(trace, cfg)
        _dump_json({"kind": "saturation_report",
                    "intervals": {mv: [{"t_start": iv.t_start,
                                        "t_end": iv.t_end, "limit": iv.limit,
                                        "integrator_at_exit": iv.integrator_at_exit}
                                       for iv in intervals]
                                  for mv, intervals in report.items()}},
                   os.path.join(out, "saturation.json"))
        if args.plots:
            _plot_trace(trace, plant, out)
    except Exception as exc:
        raise type(exc)(f"[stage: {stage}] {exc}") from exc

    print(f"pipeline complete: battery, fits, pairing ({result.method}), "
          f"gains, {args.sim_horizon:.6g} s closed-loop trace -> {out}")
    return 0


# --- fixture -----------------------------------------------------------

def cmd_fixture(args) -> int:
    written = casestudy.write_fixture(_out_dir(args))
    for path in written:
        print(f"wrote {path}")
    return 0


# --- parser ------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="looptune",
        description=("Control-loop design toolkit: DAE linearization, "
                     "step-response identification, relative-gain pairing, "
                     "SIMC PI tuning, closed-loop simulation."))
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common(p):
        p.add_argument("--out", default=".", help="output directory")
        p.add_argument("--plots", action="store_true",
                       help="also emit SVG line charts")
        p.add_argument("--seed", type=int, default=0,
                       help="seed for any randomized fixture (noise)")

    p = sub.add_parser("linearize", help="DAE Jacobians -> state space + gains")
    p.add_argument("jacobians", help="dae_jacobians JSON file")
    p.add_argument("--frequency", type=float, default=0.0,
                   help="evaluation frequency in rad/s (default 0 = DC)")
    add_common(p)
    p.set_defaults(func=cmd_linearize)

    p = sub.add_parser("step", help="open-loop step battery on a plant file")
    p.add_argument("plant", help="plant_matrix JSON file")
    p.add_argument("--sample-rate", default=None,
                   help="samples per hour, or 'auto' (default) to resolve "
                        "the fastest lag per MV")
    p.add_argument("--horizon", type=float, default=None,
                   help="recording horizon in seconds (default: auto settle)")
    p.add_argument("--step-sizes", default=None,
                   help="comma-separated relative steps (default "
                        "-0.01,-0.005,0.005,0.01)")
    p.add_argument("--noise", type=float, default=0.0,
                   help="additive Gaussian noise std on normalized responses")
    add_common(p)
    p.set_defaults(func=cmd_step)

    p = sub.add_parser("fit", help="fit transfer functions to a step battery")
    p.add_argument("battery", help="directory with step_<mv>.csv files")
    add_common(p)
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("rga", help="relative gains, interactions, pairing")
    p.add_argument("input", help="gain CSV, state_space/plant/fit_index JSON")
    p.add_argument("--frequency", type=float, default=0.0,
                   help="evaluation frequency in rad/s for model inputs")
    p.add_argument("--method", choices=("sequential", "assignment"),
                   default="sequential")
    add_common(p)
    p.set_defaults(func=cmd_rga)

    p = sub.add_parser("tune", help="SIMC reduction and PI gains")
    p.add_argument("input", help="transfer-function JSON or fit_index JSON")
    p.add_argument("--pairing", default=None,
                   help="pairing.json restricting which pairs to tune")
    p.add_argument("--tau-c", action="append", default=None,
                   help="closed-loop time constant: VALUE | recommended | "
                        "CV=VALUE (repeatable)")
    add_common(p)
    p.set_defaults(func=cmd_tune)

    p = sub.add_parser("simulate", help="closed-loop simulation")
    p.add_argument("plant", help="plant_matrix JSON file")
    p.add_argument("config", help="loop_config JSON file")
    add_common(p)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("pipeline",
                       help="step -> fit -> rga -> tune -> simulate")
    p.add_argument("plant", help="plant_matrix JSON file")
    p.add_argument("--sample-rate", default=None,
                   help="samples per hour, or 'auto' (default)")
    p.add_argument("--horizon", type=float, default=None,
                   help="step-battery horizon override in seconds")
    p.add_argument("--step-sizes", default=None)
    p.add_argument("--method", choices=("sequential", "assignment"),
                   default="sequential")
    p.add_argument("--tau-c", action="append", default=None)
    p.add_argument("--dt", type=float, default=1.0,
                   help="closed-loop integration step in seconds")
    p.add_argument("--sim-horizon", type=float, default=18000.0,
                   help="closed-loop horizon in seconds (default 5 hours)")
    add_common(p)
    p.set_defaults(func=cmd_pipeline)

    p = sub.add_parser("fixture",
                       help="write the bundled cement pyro case-study files")
    add_common(p)
    p.set_defaults(func=cmd_fixture)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (SchemaError, DimensionMismatch) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except LoopTuneError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
