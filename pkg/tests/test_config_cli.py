from __future__ import annotations

import math
import subprocess
import sys
import textwrap

import pytest

from proxsampler.cli import main
from proxsampler.config import parse_config, serialize_config
from proxsampler.errors import ConfigError
from proxsampler.experiments import (ReportRow, fitted_contraction, read_report,
                                     resolve_output, run_experiment, write_report)

GAUSS = textwrap.dedent("""
    experiment = "gaussian_exact"
    metrics = ["KL", "W2", "RENYI(2)"]
    bounds = ["LSI_KL", "SLC", "PI_RENYI"]
    [potential]
    name = "quadratic"
    params = [1.0]
    [sampler]
    eta = 1.0
    iterations = 5
    [init]
    mean = [1.0]
    var = [5.0]
""")

LAPLACE_MC = textwrap.dedent("""
    experiment = "mc_sampler"
    metrics = ["MEAN"]
    [potential]
    name = "abs_1d"
    [sampler]
    step_rule = "lipschitz_M"
    iterations = 2
    chains = 200
    seed = 3
    [init]
    mean = [2.0]
    var = [1.0]
""")


def write(tmp_path, text, name="c.toml"):
    p = tmp_path / name
    p.write_text(text)
    return p


def test_roundtrip():
    for text in (GAUSS, LAPLACE_MC):
        cfg = parse_config(text)
        assert parse_config(serialize_config(cfg)) == cfg


def test_step_rule_resolves_from_lipschitz_constant():
    assert parse_config(LAPLACE_MC).sampler.eta == 1 / 16


def test_renyi_order_below_two_rejected():
    bad = GAUSS.replace('"RENYI(2)"', '"RENYI(1.5)"')
    with pytest.raises(ConfigError) as info:
        parse_config(bad)
    assert info.value.key == "bounds"
    assert "RENYI(1.5)" in str(info.value)


@pytest.mark.parametrize("edit", [
    lambda t: t.replace("eta = 1.0", "eta = 1.0\nstep_rule = \"smooth_beta\""),
    lambda t: t.replace("iterations = 5", "iterations = 5\ncolour = 3"),
    lambda t: t.replace('name = "quadratic"', 'name = "nope"'),
    lambda t: t.replace("iterations = 5", 'iterations = "5"'),
    lambda t: t.replace('experiment = "gaussian_exact"', 'experiment = "x"'),
    lambda t: t.replace("[init]\nmean = [1.0]\nvar = [5.0]", "[init]\ndirac = [1.0]"),
    lambda t: t + "[",
])
def test_invalid_configs(edit):
    with pytest.raises(ConfigError):
        parse_config(edit(GAUSS))


def test_gaussian_report_values():
    rows = run_experiment(parse_config(GAUSS))
    kl = [r for r in rows if r.metric == "KL" and r.bound_name == "LSI_KL"]
    assert kl[0].measured == pytest.approx(0.5 * (5 - math.log(5)), abs=1e-15)
    assert all(r.satisfied for r in rows if r.satisfied is not None)


def test_fitted_contraction():
    assert fitted_contraction([1, 0.25, 0.0625]) == pytest.approx(0.25, abs=1e-15)


def test_report_roundtrip(tmp_path):
    rows = [ReportRow(0, "KL", 1.5, "LSI_KL", 1.5, True), ReportRow(1, "KL", 0.1)]
    p = tmp_path / "r.csv"
    write_report(rows, p)
    text = p.read_bytes().decode("utf-8")
    assert "\r" not in text
    assert text.splitlines()[2] == "1,KL,0.10000000000000001,,,"
    assert read_report(p) == rows


def test_output_dir_env(tmp_path, monkeypatch):
    cfg = parse_config(GAUSS)
    monkeypatch.setenv("PROXSAMPLER_OUTPUT_DIR", str(tmp_path))
    assert resolve_output(cfg) == tmp_path / "gaussian_exact.csv"
    assert resolve_output(cfg, "/abs/x.csv").as_posix() == "/abs/x.csv"


def test_cli_run_and_determinism(tmp_path, monkeypatch, capsys):
    monkeypatch.setenv("PROXSAMPLER_OUTPUT_DIR", str(tmp_path))
    cfg = write(tmp_path, LAPLACE_MC)
    assert main(["run", str(cfg), "-o", "a.csv"]) == 0
    assert main(["run", str(cfg), "-o", "b.csv"]) == 0
    assert (tmp_path / "a.csv").read_bytes() == (tmp_path / "b.csv").read_bytes()
    assert "rows" in capsys.readouterr().err


def test_cli_exit_codes(tmp_path, capsys):
    assert main(["run", str(tmp_path / "missing.toml")]) == 1
    bad = write(tmp_path, GAUSS.replace('"RENYI(2)"', '"RENYI(1.5)"'))
    assert main(["run", str(bad)]) == 1
    assert "q ≥ 2" in capsys.readouterr().err
    with pytest.raises(SystemExit) as info:
        main(["nonsense"])
    assert info.value.code == 1
    assert main(["rates", "PI_RENYI", "--params", "D_0=1", "alpha=1", "eta=1", "q=1.5"]) == 1
    assert main(["run", str(tmp_path), "-o", str(tmp_path / "x.csv")]) == 1


def test_cli_numeric_failure_exit_code(tmp_path):
    # heat kernel leaks past a narrow grid: a numeric failure
    text = textwrap.dedent("""
        experiment = "density1d"
        metrics = ["KL"]
        [potential]
        name = "quadratic"
        params = [1.0]
        [sampler]
        eta = 50.0
        iterations = 2
        [init]
        mean = [0.0]
        var = [1.0]
        [grid]
        lo = -12.0
        hi = 12.0
        n = 501
    """)
    assert main(["run", str(write(tmp_path, text)), "-o", str(tmp_path / "o.csv")]) == 2


def test_cli_rates(capsys):
    assert main(["rates", "PI_RENYI", "--params", "D_0=3", "alpha=1", "eta=1", "q=2",
                 "--k-max", "5"]) == 0
    lines = capsys.readouterr().out.splitlines()
    assert lines[0] == "k,bound"
    assert lines[2] == "1,2.3068528194400546"
    assert lines[6] == "5,0.25"


def test_cli_gaussian_exact(capsys):
    assert main(["gaussian-exact", "--sigma0", "5", "--m0", "1", "--eta", "1", "--k", "3"]) == 0
    lines = capsys.readouterr().out.splitlines()
    assert lines[0] == "k,mean,variance,kl,w2"
    k, m, v, kl, _ = lines[4].split(",")
    assert (k, float(m), float(v)) == ("3", 0.125, 1.0625)
    assert float(kl) == pytest.approx(0.5 * (1.0625 + 0.125 ** 2 - 1 - math.log(1.0625)), abs=1e-15)


def test_cli_prox_point(capsys):
    assert main(["prox-point", "--potential", "quadratic", "--params", "1", "--eta", "1",
                 "--x0", "2", "--k", "2"]) == 0
    out = capsys.readouterr().out.splitlines()
    assert out == ["k,f_value,residual", "0,2,", "1,0.5,0", "2,0.125,0"]


def test_module_entry_point():
    r = subprocess.run([sys.executable, "-m", "proxsampler", "rates", "SLC", "--params",
                        "W2_0=2", "alpha=1", "eta=1", "--k-max", "1"],
                       capture_output=True, text=True, check=False)
    assert r.returncode == 0
    assert r.stdout.splitlines()[-1] == "1,1"
