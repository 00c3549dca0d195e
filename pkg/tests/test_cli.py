"""Config parsing, slope fits, and the batch front-end plumbing."""

import os
import subprocess
import sys

import numpy as np
import pytest

from resnf.cli import (
    Check,
    ConfigError,
    RunConfig,
    SlopeFit,
    fit_slope,
    main,
    parse_config,
    run_scenario,
)


def write(tmp_path, text):
    p = tmp_path / "run.cfg"
    p.write_text(text)
    return str(p)


# ------------------------------------------------------------------ config


def test_parse_full_config(tmp_path):
    path = write(tmp_path, """
# comment
model = seagull
gamma = -1.5
Istar = 0.8
epsilon = 1e-4, 5e-4, 1e-3
r_max = 2
ell_max = 8
K = 6
scenario = seagull-order1
tolerances.flow = 1e-11
tolerances.newton = 1e-10
""")
    cfg = parse_config(path).validate()
    assert cfg.gamma == -1.5 and cfg.Istar == 0.8
    assert cfg.eps_list == (1e-4, 5e-4, 1e-3)
    assert cfg.K == 6
    assert cfg.tolerances.flow == 1e-11


def test_unknown_key_rejected(tmp_path):
    path = write(tmp_path, "modle = seagull\n")
    with pytest.raises(ConfigError):
        parse_config(path)


def test_bad_epsilon_lists(tmp_path):
    for eps in ("", "1e-3, 1e-4", "-1e-4"):
        path = write(tmp_path, f"epsilon = {eps}\n")
        with pytest.raises(ConfigError):
            parse_config(path).validate()


def test_cli_exit_codes(tmp_path):
    bad = write(tmp_path, "epsilon =\n")
    assert main(["--config", bad, "--out", str(tmp_path / "o")]) == 2
    assert main(["--config", str(tmp_path / "missing.cfg")]) == 2


# ------------------------------------------------------------------ slope fits


def test_fit_slope_exact_power():
    eps = np.geomspace(1e-4, 1e-3, 6)
    fit = fit_slope([(e, e ** 2) for e in eps], "quad", 2.0, 1e-12)
    assert abs(fit.slope - 2.0) < 1e-12
    assert fit.verdict == "pass"


def test_fit_slope_constant_data():
    eps = np.geomspace(1e-4, 1e-3, 6)
    fit = fit_slope([(e, 3.7) for e in eps], "flat", 0.0, 0.05)
    assert abs(fit.slope) < 1e-12


def test_fit_slope_requires_positive_values():
    with pytest.raises(ValueError):
        fit_slope([(1e-3, 0.0), (1e-2, 1.0)])
    with pytest.raises(ValueError):
        fit_slope([(1e-3, 1.0)])


def test_fit_slope_insufficient_span():
    pairs = [(1e-4, 1e-8), (2e-4, 4e-8), (3e-4, 9e-8)]
    fit = fit_slope(pairs, "narrow", 2.0, 0.1)
    assert fit.verdict == "insufficient"


def test_one_sided_verdict():
    eps = np.geomspace(1e-4, 1e-3, 5)
    fit = fit_slope([(e, e ** 3) for e in eps], "cube", 2.0, 0.2, one_sided=True)
    assert fit.verdict == "pass"


# ------------------------------------------------------------------ scenario plumbing


def test_check_strictness():
    soft = Check("x", False, "", report_only=True)
    assert soft.effective(strict=False)
    assert not soft.effective(strict=True)


def test_order1_scenario_runs_and_is_deterministic(tmp_path):
    cfg = RunConfig(out_dir=str(tmp_path / "a"), scenario="seagull-order1")
    assert run_scenario("seagull-order1", cfg) == 0
    cfg2 = RunConfig(out_dir=str(tmp_path / "b"), scenario="seagull-order1")
    assert run_scenario("seagull-order1", cfg2) == 0
    for name in ("manifest.txt", "summary.txt", "ledger.csv"):
        a = (tmp_path / "a" / name).read_bytes()
        b = (tmp_path / "b" / name).read_bytes()
        assert a == b
    assert (tmp_path / "a" / "normal_form_r1" / "f_l0_s1.series").exists()


def test_console_entry_point(tmp_path):
    out = subprocess.run(
        [sys.executable, "-m", "resnf.cli", "--scenario", "seagull-order1",
         "--out", str(tmp_path / "cli")],
        capture_output=True, text=True)
    assert out.returncode == 0
    manifest = (tmp_path / "cli" / "manifest.txt").read_text()
    assert "=pass" in manifest and "=fail" not in manifest
