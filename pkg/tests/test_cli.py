import csv
import io
import json
import os

import pytest

from ambitclt.cli import main
from ambitclt.config import ConfigError, config_hash, load_config

MSTOU = """
[model]
type = "mmaf"
[model.levy]
intensity = 1.0
jump_law = {name = "normal", params = {mean = 0.0, std = 1.0}}
mixing = {kind = "gamma", params = {alpha = 9.0, beta = 1.0}}
[model.kernel]
kind = "mstou-exp"
c = 1.0
m = 1
[plan]
n = 8
m = 2
reps = 12
seed = 3
eps_bias = 0.05
[task]
h = [1.0, 2.0, 4.0, 8.0, 16.0, 100.0, 1000.0, 10000.0]
max_lag = 2
pilot_reps = 24
"""

GAMMA5 = """
[model]
type = "mmaf"
[model.levy]
sigma = 1.0
mixing = {kind = "gamma", params = {alpha = 5.0, beta = 1.0}}
[model.kernel]
kind = "mstou-exp"
c = 1.0
m = 1
[task]
h = [1.0, 2.0, 4.0]
"""

GEOMETRIC = """
[model]
type = "geometric-ma"
[plan]
n = 512
m = 1
reps = 200
seed = 5
"""


@pytest.fixture
def cfg(tmp_path):
    def write(text, name="run.toml"):
        p = tmp_path / name
        p.write_text(text)
        return str(p)
    return write


def _rows(path):
    with open(path) as fh:
        return list(csv.reader(line for line in fh if not line.startswith("#")))


def test_coeffs_spot_value(cfg, tmp_path):
    out = tmp_path / "o"
    assert main(["coeffs", "--config", cfg(GAMMA5), "--out", str(out)]) == 0
    rows = _rows(out / "curve.csv")
    assert rows[0] == ["h", "bound", "kind", "case"]
    val = {float(r[0]): float(r[1]) for r in rows[1:]}
    assert abs(val[2.0] - 0.136083) < 1e-6
    report = json.loads((out / "coeffs.json").read_text())
    assert report["verdict"]["verdict"] == "fail"


def test_moments_centred_mean_column(cfg, tmp_path):
    out = tmp_path / "o"
    assert main(["moments", "--config", cfg(GAMMA5), "--out", str(out)]) == 0
    rows = _rows(out / "covariance.csv")
    mean_col = rows[0].index("mean")
    assert all(float(r[mean_col]) == 0.0 for r in rows[1:])


def test_clt_mean_geometric(cfg, tmp_path):
    out = tmp_path / "o"
    assert main(["clt-mean", "--config", cfg(GEOMETRIC), "--out", str(out)]) == 0
    rep = json.loads((out / "report.json").read_text())
    assert rep["targets"]["long_run_variance"] == 0.25
    assert rep["reps"] == 200
    assert "ks_p" in rep["tests"]


def test_every_output_embeds_hash_and_version(cfg, tmp_path):
    path = cfg(GAMMA5)
    out = tmp_path / "o"
    assert main(["coeffs", "--config", path, "--out", str(out)]) == 0
    h = config_hash(load_config(path, ['task.kind="coeffs"']))
    for name in os.listdir(out):
        text = (out / name).read_text()
        assert h in text and "0.1.0" in text


def test_validation_errors_exit_2(cfg, tmp_path, capsys):
    path = cfg(GAMMA5)
    assert main(["coeffs", "--config", path, "--set", "task.bogus=1",
                 "--out", str(tmp_path)]) == 2
    assert "task.bogus" in capsys.readouterr().err
    assert main(["coeffs", "--config", path, "--set", "model.kernel.c=-1",
                 "--out", str(tmp_path)]) == 2
    assert "model.kernel" in capsys.readouterr().err
    bad = cfg(GAMMA5 + "\n[extra]\nx = 1\n", "bad.toml")
    assert main(["coeffs", "--config", bad, "--out", str(tmp_path)]) == 2


def test_numeric_failure_exit_3(cfg, tmp_path):
    out = tmp_path / "o"
    code = main(["coeffs", "--config", cfg(GAMMA5), "--set", "task.h=[1.0, 2.0]",
                 "--set", 'task.method="quadrature"', "--out", str(out)])
    assert code == 3
    diag = json.loads((out / "diagnostics.json").read_text())
    assert diag["error"] == "NoPolynomialFit" and diag["config_path"] == "task"


def test_unknown_keys_rejected(cfg):
    with pytest.raises(ConfigError) as err:
        load_config(cfg(GAMMA5.replace("c = 1.0", "c = 1.0\nslope = 2.0")))
    assert "model.kernel" in str(err.value.path)


def test_overrides_change_hash(cfg):
    path = cfg(GAMMA5)
    a = config_hash(load_config(path))
    b = config_hash(load_config(path, ["plan.seed=9"]))
    assert a != b and a == config_hash(load_config(path))


def _tree(out):
    return {name: (out / name).read_bytes() for name in sorted(os.listdir(out))}


@pytest.mark.parametrize("task", ["moments", "coeffs", "simulate", "clt-mean", "clt-acf",
                                  "clt-pmoment", "fit"])
def test_threads_do_not_change_outputs(cfg, tmp_path, task):
    path = cfg(MSTOU)
    trees = []
    for threads in ("1", "8"):
        out = tmp_path / f"t{threads}"
        argv = [task, "--config", path, "--out", str(out), "--threads", threads]
        if task.startswith("clt"):
            argv += ["--set", "plan.reps=120", "--set", "task.pilot_reps=200"]
        if task == "fit":
            argv += ["--set", "plan.reps=2", "--set", "plan.eps_bias=0.01"]
        assert main(argv) == 0
        trees.append(_tree(out))
    assert trees[0] == trees[1]
    assert trees[0]
