"""Bundled case study: decentralized PI control of a cement pyro process.

A five-stage preheater/calciner/kiln/cooler line with six control loops.
The data set carries:

* identified transfer functions for the six (MV, CV) loop pairs,
* two PI gain tables (IMC-rule based and hand tuned) with their tau_c values,
* the steady-state relative gain array for the extended 7x7 loop set, where
  the clinker outflow F_clink and the raw-meal feed F_feed are appended to
  square the system,
* a synthetic steady operating point.  Only the operating point is invented
  here (the loop dynamics are deviation models, so it anchors units and
  limits without affecting dynamics); the values are physically plausible
  for a kiln line and are documented below.

MVs: fan pressure above the preheater (P_ph), calciner and kiln fuel flows
(F_f_ca, F_f_k), primary air (F_1st), cooler air (F_cool), grate speed
(v_grate).  CVs: O2 fractions at the calciner outlet and kiln inlet
(X_o2_ca, X_o2_k), calcination degree (X_cao), burning-zone temperature
(T_burn), clinker exit temperature (T_clinker), cooler bed height (h_bed).
"""

from __future__ import annotations

import json
import os

import numpy as np

from .cloop import LoopConfig, PiController, loop_config_to_dict
from .lti import TransferFunction
from .plant import PlantMatrix, diagonal_plant
from .sysid import StepExperiment

CV_NAMES = ["X_o2_ca", "X_cao", "T_burn", "X_o2_k", "T_clinker", "h_bed"]
MV_NAMES = ["P_ph", "F_f_ca", "F_f_k", "F_1st", "F_cool", "v_grate"]

# Identified loop models, keyed (cv, mv): gain, zero, two lags, dead time.
MODELS = {
    ("X_o2_ca", "P_ph"):
        TransferFunction(-20.54, (21.74,), (7.93, 7.93), 0.18),
    ("X_cao", "F_f_ca"):
        TransferFunction(0.29, (3663.1,), (18103.3, 9.23), 0.04),
    ("T_burn", "F_f_k"):
        TransferFunction(103.35, (1187.8,), (19191.9, 2153.3), 162.02),
    ("X_o2_k", "F_1st"):
        TransferFunction(0.26, (32.07,), (16.4, 2.64), 0.024),
    ("T_clinker", "F_cool"):
        TransferFunction(-4.75, (2694.2,), (20072.9, 1001.1), 1073.9),
    ("h_bed", "v_grate"):
        TransferFunction(-36.88, (-0.38,), (969.2, 969.2), 920.3),
}

REFERENCE_GAINS_NOTE = (
    "The IMC and Manual gain tables bundled here are reference metadata that "
    "accompany the transfer-function set.  They are not reproducible from "
    "the bundled models with this package's tuning formulas under any single "
    "unit convention: the v_grate/h_bed row matches, the other rows differ "
    "by loop-specific factors, consistent with unrecorded MV/CV scaling. "
    "Regenerate gains with tune_loop for self-consistent units and treat "
    "these tables as qualitative references, not oracles.")

# Reference PI parameters per loop CV: (kp, ki) and the tau_c each used.
IMC_GAINS = {
    "X_o2_ca": (-0.0089, -0.006),
    "X_cao": (12.51, 1.35),
    "T_burn": (0.47, 3.6e-4),
    "X_o2_k": (0.014, 0.0069),
    "T_clinker": (-0.32, -3.2e-4),
    "h_bed": (-0.097, -6.7e-5),
}
MANUAL_GAINS = {
    "X_o2_ca": (-0.01, -0.001),
    "X_cao": (0.005, 0.011),
    "T_burn": (0.07, 1.4e-5),
    "X_o2_k": (0.008, 0.16),
    "T_clinker": (-2.8e-4, -2.8e-4),
    "h_bed": (-0.02, -0.0001),
}
TAU_C = {
    "X_o2_ca": 0.18,
    "X_cao": 10.0,
    "T_burn": 162.02,
    "X_o2_k": 0.5,
    "T_clinker": 1073.9,
    "h_bed": -1000.0,
}

# Synthetic steady operating point (documented anchors, see module docstring):
# MVs are normalized to 100 "percent of nominal" each; CV values are typical
# kiln-line magnitudes (O2 in %, calcination degree as fraction, temperatures
# in degC, bed height in m).
U_SS = {name: 100.0 for name in MV_NAMES}
Z_SS = {
    "X_o2_ca": 3.0,
    "X_cao": 0.90,
    "T_burn": 1400.0,
    "X_o2_k": 2.5,
    "T_clinker": 110.0,
    "h_bed": 0.60,
}

# Extended 7x7 steady-state RGA with F_clink / F_feed appended.
RGA_CV_NAMES = ["X_o2_ca", "X_cao", "X_o2_k", "T_burn", "F_clink",
                "T_clinker", "h_bed"]
RGA_MV_NAMES = ["v_grate", "P_ph", "F_feed", "F_f_ca", "F_f_k", "F_1st",
                "F_cool"]
RGA_TABLE = np.array([
    [-7e-6, 5.20, -0.08, -1.13, 1.61, -2.17, -2.43],
    [1e-5, -6.62, 1.30, 13.4, -14.4, 3.87, 3.51],
    [8e-5, -3.56, -0.02, -0.01, -4.23, 7.14, 1.69],
    [-0.01, 8.54, -1.38, -11.7, 19.4, -8.35, -5.51],
    [1e-3, -0.17, 1.04, 2e-3, 0.01, 0.04, 0.08],
    [-2e-6, -2.41, 0.18, 0.42, -1.26, 0.45, 3.61],
    [1.01, 0.02, -0.04, 0.02, -0.08, 0.02, 0.05],
])

# The two pairings marked in the table: the implemented loop structure and
# the relative-gain based suggestion, as (cv, mv) names.
LOOP_STRUCTURE_PAIRS = [
    ("X_o2_ca", "P_ph"), ("X_cao", "F_f_ca"), ("X_o2_k", "F_1st"),
    ("T_burn", "F_f_k"), ("F_clink", "F_feed"), ("T_clinker", "F_cool"),
    ("h_bed", "v_grate"),
]
RGA_SUGGESTED_PAIRS = [
    ("h_bed", "v_grate"), ("F_clink", "F_feed"), ("X_o2_ca", "F_f_k"),
    ("X_o2_k", "F_cool"), ("X_cao", "F_1st"), ("T_burn", "P_ph"),
    ("T_clinker", "F_f_ca"),
]


def plant() -> PlantMatrix:
    """The six-loop diagonal plant around the synthetic operating point."""
    models = [MODELS[(cv, mv)] for cv, mv in zip(CV_NAMES, MV_NAMES)]
    return diagonal_plant(CV_NAMES, MV_NAMES, models,
                          u_ss=[U_SS[m] for m in MV_NAMES],
                          z_ss=[Z_SS[c] for c in CV_NAMES])


def experiment() -> StepExperiment:
    """The plant-test protocol: +-1% and +-0.5% MV steps at 100 samples/hour."""
    return StepExperiment(step_sizes=(-0.01, -0.005, 0.005, 0.01),
                          sample_rate=100.0)


def default_setpoint_schedule() -> dict:
    """Staggered +1% setpoint steps on the calcination and burner loops.

    The original closed-loop schedules are not part of the data set, so this
    synthetic schedule exists to exercise the loops; comparisons against it
    are qualitative (which gain set settles faster), never trace-level.
    """
    return {
        "X_cao": [(3600.0, Z_SS["X_cao"] * 1.01)],
        "T_burn": [(7200.0, Z_SS["T_burn"] * 1.01)],
    }


def loop_config(gains: str = "imc", dt: float = 1.0,
                horizon: float = 180000.0) -> LoopConfig:
    """Loop configuration with the bundled gain set and [0, 2 u_ss] limits."""
    table = {"imc": IMC_GAINS, "manual": MANUAL_GAINS}[gains]
    pairs = []
    controllers = []
    for i, (cv, mv) in enumerate(zip(CV_NAMES, MV_NAMES)):
        kp, ki = table[cv]
        pairs.append((i, i))
        controllers.append(PiController(kp=kp, ki=ki,
                                        u_min=0.0, u_max=2.0 * U_SS[mv]))
    return LoopConfig(pairs=pairs, controllers=controllers, dt=dt,
                      horizon=horizon, cv_names=list(CV_NAMES),
                      mv_names=list(MV_NAMES),
                      setpoints=default_setpoint_schedule())


def write_fixture(outdir: str) -> list:
    """Write the case-study input files; returns the written paths."""
    os.makedirs(outdir, exist_ok=True)
    written = []

    def dump(name, obj):
        path = os.path.join(outdir, name)
        with open(path, "w") as fh:
            json.dump(obj, fh, indent=2)
            fh.write("\n")
        written.append(path)

    dump("plant.json", plant().to_dict())
    dump("loops_imc.json", loop_config_to_dict(loop_config("imc")))
    dump("loops_manual.json", loop_config_to_dict(loop_config("manual")))
    dump("experiment.json", experiment().to_dict())
    return written
