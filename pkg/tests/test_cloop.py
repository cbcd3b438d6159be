import math

import numpy as np
import pytest

from looptune.cloop import (LoopConfig, PiController, loop_config_from_dict,
                            loop_config_to_dict, saturation_report,
                            simulate_closed_loop)
from looptune.ioutil import SchemaError
from looptune.lti import TransferFunction
from looptune.plant import PlantMatrix, diagonal_plant


def single_loop_plant(k0=1.0, poles=(10.0,), delay=2.0, u_ss=50.0, z_ss=1.0):
    g = TransferFunction(k0, (), poles, delay)
    return diagonal_plant(["y"], ["u"], [g], u_ss=[u_ss], z_ss=[z_ss])


def single_loop_cfg(kp, ki, dt=0.01, horizon=80.0, u_min=0.0, u_max=100.0):
    return LoopConfig(pairs=[(0, 0)],
                      controllers=[PiController(kp=kp, ki=ki,
                                                u_min=u_min, u_max=u_max)],
                      dt=dt, horizon=horizon,
                      cv_names=["y"], mv_names=["u"])


def test_equilibrium_invariance():
    plant = single_loop_plant()
    trace = simulate_closed_loop(plant, single_loop_cfg(2.5, 0.25, dt=0.5,
                                                        horizon=200.0))
    assert np.max(np.abs(trace.channels["y"] - 1.0)) <= 1e-9
    assert np.max(np.abs(trace.channels["u"] - 50.0)) <= 1e-9


def test_zero_gains_hold_steady_state():
    plant = single_loop_plant()
    trace = simulate_closed_loop(plant, single_loop_cfg(0.0, 0.0, dt=0.5,
                                                        horizon=100.0),
                                 setpoint_schedule={"y": [(10.0, 5.0)]})
    assert np.all(trace.channels["y"] == 1.0)
    assert np.all(trace.channels["u"] == 50.0)


def test_textbook_simc_loop_behavior():
    # k=1, tau=10, taud=2 under the tau_c=2 gains (Kp=2.5, Ki=0.25):
    # overshoot under 5% of the step, settled into the 1% band inside
    # 10 (tau_c + taud) = 40 s
    plant = single_loop_plant()
    trace = simulate_closed_loop(plant, single_loop_cfg(2.5, 0.25),
                                 setpoint_schedule={"y": [(1.0, 2.0)]})
    y = trace.channels["y"]
    t = trace.t
    assert np.max(y) <= 2.0 + 0.05
    band = np.abs(y - 2.0) <= 0.01
    settle_idx = next(k for k in range(t.size)
                      if t[k] >= 1.0 and band[k:].all())
    assert t[settle_idx] - 1.0 <= 40.0
    assert abs(y[-1] - 2.0) < 0.01


def test_limit_compliance_is_exact():
    plant = single_loop_plant()
    cfg = single_loop_cfg(50.0, 20.0, dt=0.05, horizon=30.0,
                          u_min=45.0, u_max=52.0)
    trace = simulate_closed_loop(plant, cfg,
                                 setpoint_schedule={"y": [(0.0, 4.0)]})
    u = trace.channels["u"]
    assert np.all(u >= 45.0)
    assert np.all(u <= 52.0)
    assert np.any(u == 52.0)  # the clamp is equality, not a penalty


def test_plant_linearity_in_setpoint_deviation():
    plant = single_loop_plant()
    cfg = single_loop_cfg(2.5, 0.25, dt=0.05, horizon=60.0,
                          u_min=-math.inf, u_max=math.inf)
    t1 = simulate_closed_loop(plant, cfg, setpoint_schedule={"y": [(0.0, 2.0)]})
    t2 = simulate_closed_loop(plant, cfg, setpoint_schedule={"y": [(0.0, 3.0)]})
    d1 = t1.channels["y"] - 1.0
    d2 = t2.channels["y"] - 1.0
    scale = np.max(np.abs(d2))
    assert np.max(np.abs(d2 - 2.0 * d1)) <= 1e-6 * scale


def test_determinism_bit_identical():
    plant = single_loop_plant()
    cfg = single_loop_cfg(2.5, 0.25)
    sched = {"y": [(1.0, 2.0)]}
    a = simulate_closed_loop(plant, cfg, setpoint_schedule=sched)
    cfg2 = single_loop_cfg(2.5, 0.25)
    b = simulate_closed_loop(plant, cfg2, setpoint_schedule=sched)
    for name in a.channels:
        assert np.array_equal(a.channels[name], b.channels[name])


def test_integrator_keeps_accumulating_in_saturation():
    # no anti-windup: with the MV pinned at its limit the error integral
    # must keep growing
    plant = single_loop_plant()
    cfg = single_loop_cfg(2.5, 0.25, dt=0.1, horizon=50.0,
                          u_min=0.0, u_max=50.5)
    trace = simulate_closed_loop(plant, cfg,
                                 setpoint_schedule={"y": [(0.0, 5.0)]})
    integ = trace.channels["int_y"]
    sat = trace.channels["u"] == 50.5
    assert sat[-1]
    growth = np.diff(integ)[sat[1:]]
    assert np.all(growth > 0.0)


def test_saturation_report_infinite_limits_empty():
    plant = single_loop_plant()
    cfg = single_loop_cfg(2.5, 0.25, dt=0.1, horizon=20.0,
                          u_min=-math.inf, u_max=math.inf)
    trace = simulate_closed_loop(plant, cfg,
                                 setpoint_schedule={"y": [(0.0, 3.0)]})
    report = saturation_report(trace, cfg)
    assert report["u"] == []


def test_saturation_report_infeasible_setpoint():
    plant = single_loop_plant()
    cfg = single_loop_cfg(2.5, 0.25, dt=0.1, horizon=50.0,
                          u_min=0.0, u_max=50.5)
    trace = simulate_closed_loop(plant, cfg,
                                 setpoint_schedule={"y": [(0.0, 5.0)]})
    intervals = saturation_report(trace, cfg)["u"]
    assert len(intervals) == 1
    iv = intervals[0]
    assert iv.limit == "upper"
    assert iv.t_end == trace.t[-1]
    assert iv.integrator_at_exit > 0.0
    # the limit cannot deliver the setpoint: steady offset remains
    assert abs(trace.channels["y"][-1] - 5.0) > 0.5


def test_coupled_plant_interaction():
    # an off-diagonal entry makes loop 1's setpoint step disturb loop 2
    g11 = TransferFunction(1.0, (), (5.0,), 0.0)
    g22 = TransferFunction(1.0, (), (5.0,), 0.0)
    g21 = TransferFunction(0.5, (), (5.0,), 1.0)
    plant = PlantMatrix(cv_names=["y1", "y2"], mv_names=["u1", "u2"],
                        u_ss=[10.0, 10.0], z_ss=[0.0, 0.0],
                        entries={(0, 0): g11, (1, 1): g22, (1, 0): g21})
    cfg = LoopConfig(pairs=[(0, 0), (1, 1)],
                     controllers=[PiController(kp=2.0, ki=0.5, u_min=0.0,
                                               u_max=20.0),
                                  PiController(kp=2.0, ki=0.5, u_min=0.0,
                                               u_max=20.0)],
                     dt=0.05, horizon=60.0,
                     cv_names=["y1", "y2"], mv_names=["u1", "u2"])
    trace = simulate_closed_loop(plant, cfg,
                                 setpoint_schedule={"y1": [(1.0, 1.0)]})
    assert np.max(np.abs(trace.channels["y2"])) > 1e-3  # disturbed
    assert abs(trace.channels["y2"][-1]) < 1e-3         # and rejected
    assert abs(trace.channels["y1"][-1] - 1.0) < 1e-3


def test_missing_paired_entry_raises():
    plant = single_loop_plant()
    cfg = LoopConfig(pairs=[(0, 0)],
                     controllers=[PiController(kp=1.0, ki=0.1)],
                     dt=0.1, horizon=10.0, cv_names=["y"], mv_names=["u"])
    empty = PlantMatrix(cv_names=["y"], mv_names=["u"], u_ss=[1.0],
                        z_ss=[0.0], entries={})
    with pytest.raises(SchemaError):
        simulate_closed_loop(empty, cfg)
    simulate_closed_loop(plant, cfg)  # the populated plant is fine


def test_config_validation():
    with pytest.raises(SchemaError):
        LoopConfig(pairs=[(0, 0), (1, 0)],
                   controllers=[PiController(1.0, 0.1),
                                PiController(1.0, 0.1)],
                   dt=0.1, horizon=10.0)
    with pytest.raises(SchemaError):
        LoopConfig(pairs=[(0, 0)], controllers=[], dt=0.1, horizon=10.0)
    with pytest.raises(SchemaError):
        PiController(kp=1.0, ki=0.1, u_min=2.0, u_max=1.0)


def test_config_file_roundtrip_and_limit_defaults():
    plant = single_loop_plant(u_ss=40.0)
    obj = {"kind": "loop_config", "dt": 0.5, "horizon": 100.0,
           "pairs": [{"cv": "y", "mv": "u", "kp": 2.0, "ki": 0.3}],
           "setpoints": {"y": [[10.0, 2.0]]}}
    cfg = loop_config_from_dict(obj, plant)
    assert cfg.controllers[0].u_min == 0.0
    assert cfg.controllers[0].u_max == 80.0  # 2 u_ss default
    back = loop_config_to_dict(cfg)
    assert back["pairs"][0]["u_max"] == 80.0
    assert back["setpoints"]["y"] == [[10.0, 2.0]]
    with pytest.raises(SchemaError):
        loop_config_from_dict({"kind": "loop_config", "horizon": 1.0,
                               "pairs": [{"cv": "nope", "mv": "u",
                                          "kp": 1.0, "ki": 0.1}]}, plant)


def test_warns_on_unresolved_fast_lag():
    plant = single_loop_plant(poles=(0.5,), delay=0.0)
    cfg = single_loop_cfg(0.5, 0.1, dt=0.5, horizon=5.0)
    with pytest.warns(UserWarning, match="does not resolve"):
        simulate_closed_loop(plant, cfg)


def test_casestudy_primary_air_stays_off_its_limits():
    # the bundled IMC gain set moves the primary air gently enough that it
    # never reaches saturation during the staggered setpoint steps
    from looptune import casestudy
    plant = casestudy.plant()
    cfg = casestudy.loop_config("imc", dt=1.0, horizon=30000.0)
    with pytest.warns(UserWarning):
        trace = simulate_closed_loop(
            plant, cfg, setpoint_schedule=casestudy.default_setpoint_schedule())
    report = saturation_report(trace, cfg)
    assert report["F_1st"] == []
    assert all(report[mv] == [] for mv in casestudy.MV_NAMES)
