import json
import subprocess
import sys

import pytest

from polarlab import __version__
from polarlab.channel import channel_to_json, make_channel
from polarlab.cli import main
from polarlab.kernel import g_ye
from polarlab.multiterminal import dsbs


@pytest.fixture
def files(tmp_path):
    out = {}
    for name, W in (("bec", make_channel("bec", epsilon=0.5)), ("bsc", make_channel("bsc", crossover=0.05))):
        p = tmp_path / f"{name}.json"
        p.write_text(json.dumps(channel_to_json(W)))
        out[name] = str(p)
    p = tmp_path / "gye.json"
    p.write_text(json.dumps(g_ye().to_json()))
    out["gye"] = str(p)
    p = tmp_path / "src.json"
    p.write_text(json.dumps(dsbs(0.1).to_json()))
    out["src"] = str(p)
    p = tmp_path / "bad.json"
    p.write_text("{not json")
    out["bad"] = str(p)
    out["dir"] = tmp_path
    return out


def run(capsys, *argv):
    rc = main(list(argv))
    cap = capsys.readouterr()
    return rc, cap.out


def test_kernel_analyze(files, capsys):
    rc, out = run(capsys, "kernel", "analyze", files["gye"])
    assert rc == 0
    doc = json.loads(out)
    assert doc["dz"] == [1, 1, 3] and sorted(doc["ds"]) == [1, 2, 2]
    meta = doc["meta"]
    assert meta["version"] == __version__ and meta["seed"] == 0xC0DE
    assert len(meta["inputs"]["kernel"]) == 64


def test_region_binary(capsys):
    rc, out = run(capsys, "region", "--rho0", "0.21213", "--binary")
    assert rc == 0
    lines = out.splitlines()
    assert lines[0].startswith(f"# polarlab {__version__} seed=")
    data = [l for l in lines if not l.startswith("#")]
    assert data[0] == "pi,rho_boundary"
    pi, rho = map(float, data[1].split(","))
    assert pi == 0 and rho == pytest.approx(0.21213)


def test_parse_errors(files, capsys):
    assert run(capsys, "channel", files["bad"])[0] == 2
    assert run(capsys, "channel", str(files["dir"] / "missing.json"))[0] == 2
    assert run(capsys, "channel", files["bec"], "--bogus")[0] == 2
    assert run(capsys, "frobnicate")[0] == 2
    assert run(capsys, "sw", "duty", files["src"], "--knob", "{oops")[0] == 2
    assert run(capsys, "construct", files["bec"], "--depth", "3")[0] == 2


def test_computation_error(files, capsys):
    # target off the dominant face
    assert run(capsys, "sw", "solve", files["src"], "--target", "1,1")[0] == 1
    # rho0 outside (0, 1)
    assert run(capsys, "region", "--rho0", "1.5", "--binary")[0] == 1


def test_channel_and_transform(files, capsys):
    rc, out = run(capsys, "channel", files["bec"], "--e0", "1")
    doc = json.loads(out)
    assert rc == 0 and doc["erasure"] == pytest.approx(0.5)
    assert doc["params"]["Z"] == pytest.approx(0.5)
    assert "channel" in doc["meta"]["inputs"]
    rc, out = run(capsys, "transform", files["bec"])
    doc = json.loads(out)
    assert [c["params"]["Z"] for c in doc["children"]] == pytest.approx([0.75, 0.25])


def test_construct_then_sim(files, capsys, tmp_path):
    spec = str(tmp_path / "spec.json")
    assert run(capsys, "construct", files["bec"], "--depth", "6", "--pruned", "--theta", "1e-3", "--out", spec)[0] == 0
    outs = []
    for threads in ("1", "4"):
        o = str(tmp_path / f"sim{threads}.csv")
        assert run(capsys, "sim", "--spec", spec, "--channel", files["bec"], "--trials", "600", "--threads", threads, "--out", o)[0] == 0
        outs.append(open(o, "rb").read())
    assert outs[0] == outs[1]
    text = outs[0].decode()
    assert "# input spec sha256=" in text and "# input channel sha256=" in text
    assert text.splitlines()[-1].startswith("total,")


def test_process_deterministic_across_threads(files, capsys):
    outs = [run(capsys, "process", files["bsc"], "--depth", "5", "--trials", "300", "--threads", t)[1] for t in ("1", "3")]
    assert outs[0] == outs[1]
    assert run(capsys, "process", files["bsc"], "--depth", "5", "--trials", "300", "--seed", "7")[1] != outs[0]


def test_env_threads(files, capsys, monkeypatch):
    base = run(capsys, "process", files["bec"], "--depth", "6", "--trials", "300")[1]
    monkeypatch.setenv("POLARLAB_THREADS", "4")
    assert run(capsys, "process", files["bec"], "--depth", "6", "--trials", "300")[1] == base


def test_sw_commands(files, capsys):
    rc, out = run(capsys, "sw", "duty", files["src"], "--knob", '{"1": 1.0}')
    doc = json.loads(out)
    assert rc == 0 and doc["B"] == pytest.approx([1.0, 0.4689955935892812])
    rc, out = run(capsys, "sw", "check", files["src"], "--rates", "0.5,0.5")
    assert json.loads(out)["feasible"] is False


def test_scaling_and_kernel_random(capsys):
    rc, out = run(capsys, "scaling", "--kernel", "arikan")
    doc = json.loads(out)
    assert rc == 0 and doc["inverse_rho"] == pytest.approx(3.627, rel=0.02)
    rc, out = run(capsys, "kernel", "random", "--l", "6", "--trials", "3")
    assert rc == 0 and len(json.loads(out)["samples"]) == 3


def test_console_script(files):
    res = subprocess.run([sys.executable, "-m", "polarlab.cli", "kernel", "analyze", files["gye"]], capture_output=True, text=True)
    assert res.returncode == 0 and json.loads(res.stdout)["dz"] == [1, 1, 3]
    res = subprocess.run([sys.executable, "-m", "polarlab.cli", "kernel", "--nope"], capture_output=True, text=True)
    assert res.returncode == 2 and "usage" in res.stderr
