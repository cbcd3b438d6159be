import json
import os

import numpy as np
import pytest

from looptune.cli import main
from looptune.lti import TimeSeries, TransferFunction
from looptune.plant import diagonal_plant


def write_json(path, obj):
    with open(path, "w") as fh:
        json.dump(obj, fh, indent=2)


def read_json(path):
    with open(path) as fh:
        return json.load(fh)


def scalar_jacobians():
    def mat(v):
        return {"rows": 1, "cols": 1, "data": [v]}
    return {"kind": "dae_jacobians",
            "fx": mat(-1.0), "fy": mat(1.0), "fu": mat(1.0),
            "gx": mat(2.0), "gy": mat(-1.0), "gu": mat(0.0),
            "hx": mat(1.0), "hy": mat(0.0), "hu": mat(0.0)}


@pytest.fixture
def mini_plant_file(tmp_path):
    g1 = TransferFunction(1.5, (0.0,), (10.0, 4.0), 2.0)
    g2 = TransferFunction(-2.0, (1.0,), (8.0, 8.0), 1.0)
    plant = diagonal_plant(["y1", "y2"], ["u1", "u2"], [g1, g2],
                           u_ss=[50.0, 80.0], z_ss=[5.0, -3.0])
    path = tmp_path / "plant.json"
    write_json(path, plant.to_dict())
    return str(path)


def test_linearize_golden(tmp_path):
    jac = tmp_path / "jac.json"
    write_json(jac, scalar_jacobians())
    out = tmp_path / "out"
    assert main(["linearize", str(jac), "--out", str(out)]) == 0
    ss = read_json(out / "state_space.json")
    assert ss["a"]["data"] == [1.0]
    assert ss["b"]["data"] == [1.0]
    assert ss["c"]["data"] == [1.0]
    assert ss["d"]["data"] == [0.0]
    with open(out / "dc_gain.csv") as fh:
        header = fh.readline().strip()
        row = fh.readline().strip().split(",")
    assert header == "cv\\mv,u1"
    # DC gain of (A,B,C,D) = (1,1,1,0) is C(-A)^-1 B = -1
    assert float(row[1]) == -1.0


def test_linearize_empty_matrices_exit_2(tmp_path):
    jac = tmp_path / "jac.json"
    obj = scalar_jacobians()
    for key in obj:
        if key != "kind":
            obj[key] = {"rows": 0, "cols": 0, "data": []}
    write_json(jac, obj)
    assert main(["linearize", str(jac), "--out", str(tmp_path / "o")]) == 2


def test_linearize_missing_file_exit_2(tmp_path):
    assert main(["linearize", str(tmp_path / "nope.json"),
                 "--out", str(tmp_path)]) == 2


def test_linearize_frequency_consistency(tmp_path):
    from looptune.linss import StateSpaceModel, transfer_at
    jac = tmp_path / "jac.json"
    write_json(jac, scalar_jacobians())
    out = tmp_path / "out"
    assert main(["linearize", str(jac), "--frequency", "0", "--out",
                 str(out)]) == 0
    ss = StateSpaceModel.from_dict(read_json(out / "state_space.json"))
    want = transfer_at(ss, 0.0)[0, 0].real
    with open(out / "dc_gain.csv") as fh:
        fh.readline()
        got = float(fh.readline().split(",")[1])
    assert got == want


def test_rga_from_csv(tmp_path):
    gain = tmp_path / "gain.csv"
    with open(gain, "w") as fh:
        fh.write("cv\\mv,m1,m2\n")
        fh.write("c1,1.0,0.5\n")
        fh.write("c2,0.5,1.0\n")
    out = tmp_path / "out"
    assert main(["rga", str(gain), "--out", str(out)]) == 0
    pairing = read_json(out / "pairing.json")
    assert [(p["cv"], p["mv"]) for p in pairing["pairs"]] == \
        [("c1", "m1"), ("c2", "m2")]
    with open(out / "lambda.csv") as fh:
        fh.readline()
        first = fh.readline().split(",")
    assert float(first[1]) == pytest.approx(4.0 / 3.0)


def test_rga_from_state_space_at_frequency(tmp_path):
    from looptune.linss import StateSpaceModel
    ss = StateSpaceModel([[-1.0, 0.0], [0.0, -0.5]], [[1.0, 0.2], [0.1, 1.0]],
                         [[1.0, 0.0], [0.0, 1.0]], [[0.0, 0.0], [0.0, 0.0]],
                         input_names=["m1", "m2"], output_names=["c1", "c2"])
    path = tmp_path / "ss.json"
    write_json(path, ss.to_dict())
    out = tmp_path / "out"
    assert main(["rga", str(path), "--frequency", "0.3",
                 "--method", "assignment", "--out", str(out)]) == 0
    pairing = read_json(out / "pairing.json")
    assert pairing["method"] == "assignment"
    assert {(p["cv"], p["mv"]) for p in pairing["pairs"]} == \
        {("c1", "m1"), ("c2", "m2")}
    with open(out / "lambda.csv") as fh:
        fh.readline()
        cell = fh.readline().split(",")[1]
    assert "j" in cell  # complex at nonzero frequency


def test_tune_per_loop_tau_c(tmp_path, mini_plant_file):
    battery = tmp_path / "battery"
    fits = tmp_path / "fits"
    assert main(["step", mini_plant_file, "--out", str(battery)]) == 0
    assert main(["fit", str(battery), "--out", str(fits)]) == 0
    out = tmp_path / "gains"
    assert main(["tune", str(fits / "fits.json"), "--tau-c", "recommended",
                 "--tau-c", "y1=5.0", "--out", str(out)]) == 0
    loops = {l["cv"]: l for l in read_json(out / "gains.json")["loops"]}
    assert loops["y1"]["tau_c"] == 5.0
    # y2 follows the recommended policy: tau_c equals the effective delay
    assert loops["y2"]["tau_c"] == pytest.approx(
        loops["y2"]["fopdt"]["taud"], rel=1e-9)


def test_rga_singular_exit_1(tmp_path):
    gain = tmp_path / "gain.csv"
    with open(gain, "w") as fh:
        fh.write("cv\\mv,m1,m2\nc1,1.0,1.0\nc2,1.0,1.0\n")
    assert main(["rga", str(gain), "--out", str(tmp_path / "o")]) == 1


def test_tune_single_model(tmp_path):
    model = tmp_path / "model.json"
    write_json(model, {"k0": 1.0, "zeros": [], "poles": [10.0], "delay": 2.0})
    out = tmp_path / "out"
    assert main(["tune", str(model), "--tau-c", "2.0", "--out", str(out)]) == 0
    gains = read_json(out / "gains.json")
    assert gains["loops"][0]["kp"] == 2.5
    assert gains["loops"][0]["ki"] == 0.25
    assert os.path.exists(out / "tune_report.txt")


def test_step_fit_tune_simulate_chain(tmp_path, mini_plant_file):
    battery_dir = tmp_path / "battery"
    assert main(["step", mini_plant_file, "--out", str(battery_dir)]) == 0
    assert (battery_dir / "step_u1.csv").exists()
    assert (battery_dir / "responsiveness.csv").exists()

    fit_dir = tmp_path / "fits"
    assert main(["fit", str(battery_dir), "--out", str(fit_dir)]) == 0
    index = read_json(fit_dir / "fits.json")
    responsive = [p for p in index["pairs"] if p["responsive"]]
    assert len(responsive) == 2
    for entry in responsive:
        model = entry["mean_model"]
        assert entry["sign_flip"] is False
        assert abs(model["k0"]) > 0.1

    out = tmp_path / "gains"
    assert main(["tune", str(fit_dir / "fits.json"), "--out", str(out)]) == 0
    gains = read_json(out / "gains.json")
    assert len(gains["loops"]) == 2

    cfg = tmp_path / "loops.json"
    write_json(cfg, {
        "kind": "loop_config", "dt": 0.1, "horizon": 120.0,
        "pairs": [
            {"cv": loop["cv"], "mv": loop["mv"],
             "kp": loop["kp"], "ki": loop["ki"]}
            for loop in gains["loops"]],
        "setpoints": {"y1": [[5.0, 5.5]]},
    })
    sim = tmp_path / "sim"
    assert main(["simulate", mini_plant_file, str(cfg), "--out", str(sim),
                 "--plots"]) == 0
    trace = TimeSeries.from_csv(sim / "trace.csv")
    assert abs(trace.channels["y1"][-1] - 5.5) < 0.05
    assert (sim / "cvs.svg").exists()
    assert (sim / "mvs.svg").exists()
    assert read_json(sim / "saturation.json")["kind"] == "saturation_report"


def test_step_noise_is_seeded(tmp_path, mini_plant_file):
    a = tmp_path / "a"
    b = tmp_path / "b"
    for out in (a, b):
        assert main(["step", mini_plant_file, "--noise", "0.01",
                     "--seed", "3", "--out", str(out)]) == 0
    with open(a / "step_u1.csv") as fa, open(b / "step_u1.csv") as fb:
        assert fa.read() == fb.read()


def test_pipeline_mini(tmp_path, mini_plant_file):
    out = tmp_path / "run"
    assert main(["pipeline", mini_plant_file, "--sim-horizon", "300",
                 "--dt", "0.5", "--out", str(out)]) == 0
    pairing = read_json(out / "pairing.json")
    assert {(p["cv"], p["mv"]) for p in pairing["pairs"]} == \
        {("y1", "u1"), ("y2", "u2")}
    fits = read_json(out / "fits.json")
    models = {(p["cv"], p["mv"]): p["mean_model"] for p in fits["pairs"]
              if p["responsive"]}
    assert models[("y1", "u1")]["k0"] == pytest.approx(1.5, rel=0.01)
    assert models[("y2", "u2")]["k0"] == pytest.approx(-2.0, rel=0.01)
    for name in ("gains.json", "trace.csv", "loops.json", "gain_matrix.csv",
                 "tune_report.txt", "saturation.json"):
        assert (out / name).exists()


def test_pipeline_row_swap_permutes_pairing(tmp_path):
    g1 = TransferFunction(1.5, (0.0,), (10.0, 4.0), 2.0)
    g2 = TransferFunction(-2.0, (1.0,), (8.0, 8.0), 1.0)
    swapped = diagonal_plant(["y2", "y1"], ["u1", "u2"], [g1, g2],
                             u_ss=[50.0, 80.0], z_ss=[-3.0, 5.0])
    path = tmp_path / "plant.json"
    write_json(path, swapped.to_dict())
    out = tmp_path / "run"
    assert main(["pipeline", str(path), "--sim-horizon", "300",
                 "--dt", "0.5", "--out", str(out)]) == 0
    pairing = read_json(out / "pairing.json")
    assert {(p["cv"], p["mv"]) for p in pairing["pairs"]} == \
        {("y2", "u1"), ("y1", "u2")}


def test_pipeline_missing_z_ss_names_field(tmp_path, mini_plant_file, capsys):
    obj = read_json(mini_plant_file)
    del obj["z_ss"]
    path = tmp_path / "broken.json"
    write_json(path, obj)
    assert main(["pipeline", str(path), "--out", str(tmp_path / "o")]) == 2
    assert "z_ss" in capsys.readouterr().err


def test_fit_index_flags_sign_flips():
    from looptune.cli import _fit_battery
    from looptune.lti import step_response_analytic
    from looptune.sysid import BatteryResult, NormalizedStep
    t = np.arange(0.0, 120.0, 0.5)
    up = TransferFunction(1.0, (0.0,), (10.0, 5.0), 1.0)
    down = TransferFunction(-1.0, (0.0,), (10.0, 5.0), 1.0)
    steps = [NormalizedStep(t=t, s=step_response_analytic(m, t), cv_name="y",
                            mv_name="u", step_size=sz)
             for m, sz in ((up, 0.01), (down, -0.01))]
    battery = BatteryResult(cv_names=["y"], mv_names=["u"],
                            steps={("y", "u"): steps})
    index = _fit_battery(battery)
    assert index["pairs"][0]["sign_flip"] is True


def test_fixture_roundtrip(tmp_path):
    out = tmp_path / "fx"
    assert main(["fixture", "--out", str(out)]) == 0
    plant = read_json(out / "plant.json")
    assert plant["kind"] == "plant_matrix"
    assert len(plant["entries"]) == 6
    loops = read_json(out / "loops_imc.json")
    assert len(loops["pairs"]) == 6


def test_cli_idempotent_outputs(tmp_path, mini_plant_file):
    a = tmp_path / "a"
    b = tmp_path / "b"
    for out in (a, b):
        assert main(["pipeline", mini_plant_file, "--sim-horizon", "120",
                     "--dt", "0.5", "--out", str(out)]) == 0
    for name in sorted(os.listdir(a)):
        with open(a / name, "rb") as fa, open(b / name, "rb") as fb:
            assert fa.read() == fb.read(), name
