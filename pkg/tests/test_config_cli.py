import json
import subprocess
import sys

import numpy as np
import pytest

from epcyl._io import read_csv
from epcyl.cli_runner import main
from epcyl.config import load_config, parse_config
from epcyl.errors import ConfigError

from conftest import CONFIGS

MINIMAL = "params: {gamma: 2.0, J0: 1.0, S0: 1.0, b0: 0.6, rho0: 0.4}\ndomain: {L: 0.2}\n"


def write(tmp_path, text, name="scn.yaml"):
    f = tmp_path / name
    f.write_text(text)
    return str(f)


# ------------------------------------------------------------------ config

def test_minimal_defaults():
    scn = parse_config(MINIMAL)
    assert scn.domain["shape"] == "disk"
    assert scn.boundary["profiles"] == {} and scn.sweep is None
    assert scn.params.gamma == 2.0
    assert len(scn.hash) == 16
    assert parse_config(MINIMAL).hash == scn.hash


def test_hash_ignores_output_dir():
    a = parse_config(MINIMAL + "output: {dir: a}\n")
    b = parse_config(MINIMAL + "output: {dir: b}\n")
    assert a.hash == b.hash
    assert parse_config(MINIMAL.replace("0.2", "0.3")).hash != a.hash


def test_gamma_one_rejected():
    with pytest.raises(ConfigError) as ei:
        parse_config(MINIMAL.replace("gamma: 2.0", "gamma: 1.0"))
    assert any("line 1" in e and "gamma" in e for e in ei.value.info["errors"])


def test_unknown_key_has_line_number():
    text = MINIMAL + "solver:\n  tol: 1.0e-10\n  tolerance: 3\n"
    with pytest.raises(ConfigError) as ei:
        parse_config(text)
    assert any(e.startswith("line 5:") and "tolerance" in e for e in ei.value.info["errors"])


def test_every_error_reported():
    text = "params: {gamma: 0.5, J0: 1.0, S0: 1.0, b0: 0.6, rho0: 0.4}\ndomain: {L: -1}\nfoo: 1\n"
    with pytest.raises(ConfigError) as ei:
        parse_config(text)
    assert len(ei.value.info["errors"]) >= 3


def test_csv_profile_line_number(tmp_path):
    (tmp_path / "u.csv").write_text("r,value\n0,0\n0.5,1\n0.25,2\n1,0\n")
    text = MINIMAL + "boundary:\n  profiles:\n    u_en: {family: csv, path: u.csv}\n"
    with pytest.raises(ConfigError) as ei:
        load_config(write(tmp_path, text))
    assert "u.csv:4:" in str(ei.value)


def test_shipped_configs_parse():
    for f in sorted(CONFIGS.glob("*.yaml")):
        assert load_config(f).hash


# --------------------------------------------------------------------- CLI

def test_background_equilibrium(tmp_path):
    out = tmp_path / "o"
    assert main(["background", "--config", str(CONFIGS / "equilibrium.yaml"),
                 "--out", str(out)]) == 0
    scen, cols = read_csv(out / "background.csv")
    assert scen == load_config(CONFIGS / "equilibrium.yaml").hash
    for k in ("rho", "E", "u", "Phi"):
        assert np.ptp(cols[k]) == 0.0, k
    assert cols["rho"][0] == 0.5
    raw = (out / "background.csv").read_bytes()
    assert b"\r" not in raw and raw.startswith(b"# scenario ")


def test_sigma_guard_exits_before_solving(tmp_path):
    text = (CONFIGS / "potential_disk.yaml").read_text().replace("sigma_max: 2.0",
                                                                 "sigma_max: 1.0e-6")
    out = tmp_path / "o"
    assert main(["potential", "--config", write(tmp_path, text), "--out", str(out)]) == 3
    assert not (out / "potential_fields.csv").exists()


def test_potential_reproducible(tmp_path):
    runs = []
    for i in range(2):
        out = tmp_path / f"o{i}"
        assert main(["potential", "--config", str(CONFIGS / "potential_disk.yaml"),
                     "--out", str(out)]) == 0
        runs.append({p.name: p.read_bytes() for p in sorted(out.iterdir())})
    assert runs[0] == runs[1]


def test_norms_reproduce_summary(tmp_path):
    out = tmp_path / "o"
    cfg = str(CONFIGS / "potential_disk.yaml")
    assert main(["potential", "--config", cfg, "--out", str(out)]) == 0
    summary = json.loads((out / "summary.json").read_text())
    assert main(["norms", "--config", cfg, "--out", str(tmp_path / "n"),
                 "--field", str(out / "potential_fields.csv")]) == 0
    norms = json.loads((tmp_path / "n" / "norms.json").read_text())
    assert norms["source_scenario"] == summary["scenario"]
    for name, vals in summary["field_norms"].items():
        for k, v in vals.items():
            assert norms["field_norms"][name][k] == pytest.approx(v, rel=1e-12, abs=1e-300)


def test_exit_codes(tmp_path, capsys):
    assert main(["background", "--config", str(tmp_path / "missing.yaml")]) == 2
    bad = write(tmp_path, MINIMAL.replace("gamma: 2.0", "gamma: 1.0"))
    assert main(["background", "--config", bad]) == 2
    assert "line 1" in capsys.readouterr().err
    # rho0 close to sonic: breakdown at the entrance
    near = MINIMAL.replace("rho0: 0.4", "rho0: 0.79").replace("b0: 0.6", "b0: 0.5") \
        .replace("L: 0.2", "L: 5.0")
    assert main(["background", "--config", write(tmp_path, near, "near.yaml"),
                 "--out", str(tmp_path / "o")]) == 3
    assert main(["nonsense", "--config", bad]) == 2
    assert main(["background", "--config", bad, "--threads", "zero"]) == 2


def test_hash_in_every_artifact(tmp_path):
    for sub, cfg in (("axisym", "swirl.yaml"), ("coercivity", "coercivity.yaml")):
        out = tmp_path / sub
        assert main([sub, "--config", str(CONFIGS / cfg), "--out", str(out)]) == 0
        h = load_config(CONFIGS / cfg).hash
        for p in out.iterdir():
            text = p.read_text()
            if p.suffix == ".csv":
                assert text.startswith(f"# scenario {h}\n"), p.name
            else:
                assert json.loads(text)["scenario"] == h, p.name


def test_axisym_summary_bands(tmp_path):
    out = tmp_path / "o"
    assert main(["axisym", "--config", str(CONFIGS / "swirl.yaml"), "--out", str(out)]) == 0
    s = json.loads((out / "summary.json").read_text())
    assert s["violations"] == {"flux": 0, "radius": 0, "band": 0}
    assert s["mach_min_margin"] > 1e-6


def test_sweep(tmp_path):
    out = tmp_path / "o"
    assert main(["sweep", "--config", str(CONFIGS / "sweep_amplitude.yaml"),
                 "--out", str(out)]) == 0
    s = json.loads((out / "sweep.json").read_text())
    assert [p["exit"] for p in s["points"]] == [0, 0, 0]


def test_console_script(tmp_path):
    r = subprocess.run([sys.executable, "-m", "epcyl.cli_runner", "background", "--config",
                        str(CONFIGS / "equilibrium.yaml"), "--out", str(tmp_path)],
                       capture_output=True, text=True)
    assert r.returncode == 0
