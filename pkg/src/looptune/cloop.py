"""Closed-loop simulation of a transfer-function plant under decentralized PI.

Continuous-time PI laws with output limits and deliberately no anti-windup:
the error integral keeps accumulating while the MV sits at a limit.  The
plant simulates in deviation coordinates around (u_ss, z_ss); traces are
reconstructed to absolute units.  Everything is fixed step, so identical
inputs give bit-identical traces.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .ioutil import SchemaError, require
from .lti import TimeSeries, to_state_space
from .plant import PlantMatrix


@dataclass
class PiController:
    """One SISO PI law  u = clamp(u_ss + kp e + ki int(e), u_min, u_max)."""

    kp: float
    ki: float
    setpoint: float | None = None
    u_min: float = -math.inf
    u_max: float = math.inf
    integrator: float = 0.0

    def __post_init__(self):
        if not self.u_min < self.u_max:
            raise SchemaError("u_min must be strictly below u_max")


@dataclass
class LoopConfig:
    """Pairing plus controllers plus the integration grid.

    ``pairs`` holds (cv_index, mv_index) tuples forming a (partial) matching;
    ``controllers`` one PiController per pair.  Optional name lists and
    breakpoint schedules travel with the config when loaded from a file.
    """

    pairs: list
    controllers: list
    dt: float
    horizon: float
    cv_names: list[str] = field(default_factory=list)
    mv_names: list[str] = field(default_factory=list)
    setpoints: dict = field(default_factory=dict)   # cv name -> [(t, value)]
    mv_moves: dict = field(default_factory=dict)    # mv name -> [(t, value)]

    def __post_init__(self):
        if self.dt <= 0.0:
            raise SchemaError("dt must be positive")
        if self.horizon < 0.0:
            raise SchemaError("horizon must be nonnegative")
        if len(self.pairs) != len(self.controllers):
            raise SchemaError("one controller per pair is required")
        rows = [i for i, _ in self.pairs]
        cols = [j for _, j in self.pairs]
        if len(set(rows)) != len(rows) or len(set(cols)) != len(cols):
            raise SchemaError("pairs must form a matching (no repeated CV or MV)")


def _sample_schedule(n_steps, dt, base, breakpoints):
    """Zero-order-hold samples of a breakpoint list [(t, value), ...]."""
    out = np.full(n_steps, float(base))
    for t_bp, value in sorted(breakpoints, key=lambda bv: bv[0]):
        k = int(math.ceil(t_bp / dt - 1e-12))
        if k < 0:
            k = 0
        if k < n_steps:
            out[k:] = float(value)
    return out


def simulate_closed_loop(plant: PlantMatrix, cfg: LoopConfig,
                         setpoint_schedule=None,
                         disturbance_schedule=None) -> TimeSeries:
    """Fixed-step co-simulation of the paired loops against the full plant.

    Schedules are breakpoint dicts keyed by channel name with absolute
    values, held between breakpoints; they default to the config's own
    schedules and otherwise to the steady state.  Unpaired MVs follow the
    disturbance schedule (open-loop moves).  The trace carries the absolute
    CVs and MVs, setpoints (sp_<cv>) and error integrals (int_<cv>).
    """
    q, p = plant.n_outputs, plant.n_inputs
    for i, j in cfg.pairs:
        if plant.entry(i, j) is None:
            raise SchemaError(
                f"paired entry {plant.cv_names[i]}/{plant.mv_names[j]} "
                "is missing from the plant")

    n_steps = int(math.floor(cfg.horizon / cfg.dt + 0.5)) + 1
    t = np.arange(n_steps) * cfg.dt

    sp = np.empty((n_steps, q))
    points = setpoint_schedule if setpoint_schedule is not None else cfg.setpoints
    for i, name in enumerate(plant.cv_names):
        sp[:, i] = _sample_schedule(n_steps, cfg.dt, plant.z_ss[i],
                                    points.get(name, []))
    # per-loop fixed setpoints override the schedule baseline
    for (i, _), ctl in zip(cfg.pairs, cfg.controllers):
        if ctl.setpoint is not None and plant.cv_names[i] not in points:
            sp[:, i] = ctl.setpoint

    u_open = np.empty((n_steps, p))
    moves = disturbance_schedule if disturbance_schedule is not None else cfg.mv_moves
    for j, name in enumerate(plant.mv_names):
        u_open[:, j] = _sample_schedule(n_steps, cfg.dt, plant.u_ss[j],
                                        moves.get(name, []))

    entries = []
    fastest = math.inf
    for (i, j), tf in sorted(plant.entries.items()):
        delay, ss = to_state_space(tf)
        m, nb = kernels.rk4_input_map(ss.A, ss.B, cfg.dt)
        nd = int(math.floor(delay / cfg.dt + 0.5))
        entries.append((i, j, m, nb, ss.C.ravel(), float(ss.D[0, 0]), nd))
        if tf.poles:
            fastest = min(fastest, min(tf.poles))
    if math.isfinite(fastest) and cfg.dt > fastest / 10.0:
        warnings.warn(
            f"dt = {cfg.dt} s does not resolve the fastest plant lag "
            f"({fastest} s) within a factor of 10", stacklevel=2)

    loops = [(i, j, c.kp, c.ki, c.u_min, c.u_max)
             for (i, j), c in zip(cfg.pairs, cfg.controllers)]

    Z, U, integ = kernels.closed_loop(entries, loops, plant.u_ss, plant.z_ss,
                                      sp, u_open, cfg.dt, n_steps)

    channels = {}
    for i, name in enumerate(plant.cv_names):
        channels[name] = Z[:, i]
    for j, name in enumerate(plant.mv_names):
        channels[name] = U[:, j]
    for i, name in enumerate(plant.cv_names):
        channels[f"sp_{name}"] = sp[:, i]
    for l, (i, _) in enumerate(cfg.pairs):
        channels[f"int_{plant.cv_names[i]}"] = integ[:, l]
    return TimeSeries(t=t, channels=channels)


@dataclass(frozen=True)
class SaturationInterval:
    mv_name: str
    t_start: float
    t_end: float
    limit: str              # "upper" or "lower"
    integrator_at_exit: float


def saturation_report(trace: TimeSeries, cfg: LoopConfig) -> dict:
    """Intervals where each paired MV sits exactly at a limit.

    The clamp is exact, so equality against the limit is a reliable test.
    Each interval carries the error-integral magnitude at its last sample,
    which quantifies the windup exposure of the limit episode.
    """
    if not cfg.mv_names or not cfg.cv_names:
        raise SchemaError("config must carry cv_names and mv_names for reporting")
    report = {}
    for (i, j), ctl in zip(cfg.pairs, cfg.controllers):
        mv = cfg.mv_names[j]
        cv = cfg.cv_names[i]
        u = trace.channels[mv]
        integ = trace.channels[f"int_{cv}"]
        intervals = []
        for limit_name, limit in (("lower", ctl.u_min), ("upper", ctl.u_max)):
            if not math.isfinite(limit):
                continue
            at = u == limit
            k = 0
            n = at.size
            while k < n:
                if at[k]:
                    start = k
                    while k + 1 < n and at[k + 1]:
                        k += 1
                    intervals.append(SaturationInterval(
                        mv_name=mv,
                        t_start=float(trace.t[start]),
                        t_end=float(trace.t[k]),
                        limit=limit_name,
                        integrator_at_exit=float(abs(integ[k]))))
                k += 1
        report[mv] = sorted(intervals, key=lambda iv: iv.t_start)
    return report


def loop_config_to_dict(cfg: LoopConfig) -> dict:
    return {
        "kind": "loop_config",
        "dt": cfg.dt,
        "horizon": cfg.horizon,
        "pairs": [
            {"cv": cfg.cv_names[i] if cfg.cv_names else i,
             "mv": cfg.mv_names[j] if cfg.mv_names else j,
             "kp": c.kp, "ki": c.ki,
             "setpoint": c.setpoint,
             "u_min": None if not math.isfinite(c.u_min) else c.u_min,
             "u_max": None if not math.isfinite(c.u_max) else c.u_max}
            for (i, j), c in zip(cfg.pairs, cfg.controllers)],
        "setpoints": {k: [[t, v] for t, v in pts]
                      for k, pts in cfg.setpoints.items()},
        "mv_moves": {k: [[t, v] for t, v in pts]
                     for k, pts in cfg.mv_moves.items()},
    }


def loop_config_from_dict(obj: dict, plant: PlantMatrix) -> LoopConfig:
    """Resolve a loop-config document against a plant.

    Pair entries name their CV and MV.  Missing limits default to
    [0, 2 u_ss] for that MV; the emitted config always records the limits
    actually used.
    """
    pairs = []
    controllers = []
    for k, entry in enumerate(require(obj, "pairs", "loop_config")):
        cv = require(entry, "cv", f"loop_config.pairs[{k}]")
        mv = require(entry, "mv", f"loop_config.pairs[{k}]")
        if cv not in plant.cv_names:
            raise SchemaError(f"loop_config.pairs[{k}] names unknown CV '{cv}'")
        if mv not in plant.mv_names:
            raise SchemaError(f"loop_config.pairs[{k}] names unknown MV '{mv}'")
        i = plant.cv_names.index(cv)
        j = plant.mv_names.index(mv)
        u_min = entry.get("u_min")
        u_max = entry.get("u_max")
        if u_min is None:
            u_min = min(0.0, 2.0 * plant.u_ss[j])
        if u_max is None:
            u_max = max(0.0, 2.0 * plant.u_ss[j])
        controllers.append(PiController(
            kp=float(require(entry, "kp", f"loop_config.pairs[{k}]")),
            ki=float(require(entry, "ki", f"loop_config.pairs[{k}]")),
            setpoint=entry.get("setpoint"),
            u_min=float(u_min), u_max=float(u_max)))
        pairs.append((i, j))
    return LoopConfig(
        pairs=pairs,
        controllers=controllers,
        dt=float(obj.get("dt", 1.0)),
        horizon=float(require(obj, "horizon", "loop_config")),
        cv_names=list(plant.cv_names),
        mv_names=list(plant.mv_names),
        setpoints={k: [(float(t), float(v)) for t, v in pts]
                   for k, pts in obj.get("setpoints", {}).items()},
        mv_moves={k: [(float(t), float(v)) for t, v in pts]
                  for k, pts in obj.get("mv_moves", {}).items()},
    )
