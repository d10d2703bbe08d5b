"""CLI tests: config parsing, command outputs, exit codes, determinism."""

import json
import os
import re

import numpy as np
import pytest

from gpq.cli import (
    CSV_HEADER,
    STABILITY_RATE_K,
    main,
)
from gpq.config import (
    ConfigError,
    RunConfig,
    config_echo,
    from_mapping,
    load_config,
    parse_config,
    resolve_out_dir,
)
from gpq.evolution import load_snapshot

FLOAT_CELL = re.compile(r"^-?\d\.\d{16}e[+-]\d{2,3}$")

PROVENANCE_LABELS = {"config", "closed_form", "quadrature", "eigensolve",
                     "fit", "measured", "pinned"}


def write_cfg(tmp_path, name, text):
    path = tmp_path / name
    path.write_text(text)
    return str(path)


def read_summary(out_dir):
    with open(os.path.join(out_dir, "summary.json")) as fh:
        return json.load(fh)


def read_rows(out_dir):
    with open(os.path.join(out_dir, "series.csv")) as fh:
        lines = fh.read().splitlines()
    assert lines[0] == CSV_HEADER
    return [line.split(",") for line in lines[1:]]


# ---------------------------------------------------------------------------
# config parsing and validation
# ---------------------------------------------------------------------------

def parse(text):
    return from_mapping(parse_config(text))


def test_empty_config_gives_defaults():
    cfg = parse("")
    assert cfg == RunConfig()
    assert cfg.grid_N == 4097 and cfg.ic_kind == "black"
    echo = config_echo(cfg)
    assert echo["grid.L"] == 30.0
    assert "tolerances.verify" not in echo  # None entries are skipped


def test_parse_comments_and_values():
    cfg = parse(
        "# comment\n\ngrid.N = 257\nic.kind = dark\nic.c = -0.25\n"
        "output.dir = out\n")
    assert cfg.grid_N == 257 and cfg.ic_kind == "dark" and cfg.ic_c == -0.25


@pytest.mark.parametrize("text,needle", [
    ("grid.M = 3\n", "grid.M"),
    ("grid.N = 257\ngrid.N = 513\n", "duplicate"),
    ("grid.N\n", "line 1"),
    ("output.dir =\n", "output.dir"),
])
def test_parse_rejections(text, needle):
    with pytest.raises(ConfigError, match=needle):
        parse_config(text)


@pytest.mark.parametrize("text,needle", [
    ("grid.N = many\n", "grid.N"),
    ("grid.N = 4096\n", "grid.N"),
    ("grid.N = 7\n", "grid.N"),
    ("grid.L = 1.0\n", "grid.L"),
    ("time.dt = 0.0\n", "time.dt"),
    ("time.T = 0.0001\n", "time.T"),
    ("ic.kind = bright\n", "ic.kind"),
    ("ic.side = left\n", "ic.side"),
    ("ic.eps = 1.0\n", "ic.eps"),
    ("ic.c = 2.0\n", "ic.c"),
    ("ic.kind = dark\nic.c = -0.9\n", "speed_cap"),
    ("modulation.speed_cap = 0.0\n", "modulation.speed_cap"),
    ("tolerances.newton = 0.0\n", "tolerances.newton"),
])
def test_validate_rejections(text, needle):
    with pytest.raises(ConfigError, match=needle):
        parse(text)


def test_out_dir_precedence(monkeypatch):
    cfg = parse("output.dir = from-config\n")
    monkeypatch.delenv("GPQ_OUT", raising=False)
    assert resolve_out_dir(cfg, None) == "from-config"
    monkeypatch.setenv("GPQ_OUT", "from-env")
    assert resolve_out_dir(cfg, None) == "from-env"
    assert resolve_out_dir(cfg, "from-flag") == "from-flag"


def test_load_config_missing_file(tmp_path):
    with pytest.raises(ConfigError, match="config"):
        load_config(str(tmp_path / "absent.cfg"))


# ---------------------------------------------------------------------------
# argument handling and exit codes
# ---------------------------------------------------------------------------

def test_parser_requires_subcommand_and_config():
    with pytest.raises(SystemExit) as exc:
        main([])
    assert exc.value.code == 2
    with pytest.raises(SystemExit) as exc:
        main(["verify"])
    assert exc.value.code == 2


def test_jobs_below_one_exits_2(tmp_path, capsys):
    cfg = write_cfg(tmp_path, "a.cfg", "")
    assert main(["verify", "--config", cfg, "--jobs", "0"]) == 2


def test_missing_config_exits_2(tmp_path, capsys):
    code = main(["verify", "--config", str(tmp_path / "absent.cfg")])
    assert code == 2
    assert "config error" in capsys.readouterr().err


def test_invalid_config_exits_2(tmp_path, capsys):
    cfg = write_cfg(tmp_path, "bad.cfg", "grid.N = 4096\n")
    code = main(["verify", "--config", cfg])
    assert code == 2
    assert "grid.N" in capsys.readouterr().err


def test_stability_wrong_kind_exits_2(tmp_path, capsys):
    cfg = write_cfg(tmp_path, "k.cfg",
                    f"output.dir = {tmp_path / 'out'}\n")
    code = main(["stability", "--config", cfg])
    assert code == 2
    assert "ic.kind" in capsys.readouterr().out


def test_picard_divergence_exits_3(tmp_path, capsys):
    cfg = write_cfg(tmp_path, "pd.cfg", (
        "grid.N = 1025\nic.kind = dark\nic.c = -0.9\n"
        "modulation.speed_cap = 1.0\ntime.dt = 0.5\ntime.T = 1.0\n"
        f"output.dir = {tmp_path / 'out'}\n"))
    code = main(["evolve", "--config", cfg])
    assert code == 3
    assert "numerical failure (PicardDivergence)" in capsys.readouterr().out


# ---------------------------------------------------------------------------
# verify
# ---------------------------------------------------------------------------

def test_verify_defaults_pass(tmp_path, capsys):
    out = str(tmp_path / "out")
    cfg = write_cfg(tmp_path, "v.cfg", f"output.dir = {out}\n")
    assert main(["verify", "--config", cfg]) == 0
    assert "checks passed" in capsys.readouterr().out
    summary = read_summary(out)
    assert summary["command"] == "verify" and summary["passed"] is True
    assert len(summary["checks"]) == 27
    for check in summary["checks"]:
        assert check["passed"] is True
        assert check["value"] <= check["tol"]
        assert check["provenance"] in PROVENANCE_LABELS
    for entry in summary["config"].values():
        assert set(entry) == {"value", "provenance"}
        assert entry["provenance"] == "config"


def test_verify_injected_tolerance_fails(tmp_path, capsys):
    out = str(tmp_path / "out")
    cfg = write_cfg(tmp_path, "v.cfg",
                    f"tolerances.verify = 1e-30\noutput.dir = {out}\n")
    assert main(["verify", "--config", cfg]) == 1
    assert "verify: FAILED e2_black_quadrature" in capsys.readouterr().out
    assert read_summary(out)["passed"] is False


# ---------------------------------------------------------------------------
# spectrum
# ---------------------------------------------------------------------------

def test_spectrum_checks_and_scalars(tmp_path, capsys):
    out = str(tmp_path / "out")
    cfg = write_cfg(tmp_path, "s.cfg", f"output.dir = {out}\n")
    assert main(["spectrum", "--config", cfg]) == 0
    summary = read_summary(out)
    assert summary["passed"] is True
    scalars = summary["scalars"]
    assert scalars["sigma0"]["value"] < 1e-8
    assert abs(scalars["sigma1"]["value"] - 1.0) < 1e-4
    assert scalars["sigma2"]["value"] > 1.0
    assert scalars["lambda2"]["value"] > 0.0
    assert scalars["sturm_counts"]["value"] == [0, 1, 2]
    assert abs(scalars["sigma2_extrapolated"]["value"]
               - scalars["sigma2_reference"]["value"]) < 1e-6


# ---------------------------------------------------------------------------
# modulate
# ---------------------------------------------------------------------------

def test_modulate_round_trip(tmp_path, capsys):
    out = str(tmp_path / "out")
    cfg = write_cfg(tmp_path, "m.cfg", (
        "ic.kind = dark\nic.c = -0.3\nic.seed = 7\n"
        f"output.dir = {out}\n"))
    assert main(["modulate", "--config", cfg]) == 0
    summary = read_summary(out)
    assert summary["passed"] is True
    scalars = summary["scalars"]
    assert scalars["recovery_error"]["value"] <= 1e-8
    assert abs(scalars["c_fit"]["value"] - (-0.3)) <= 1e-8
    assert abs(scalars["a_fit"]["value"]
               - scalars["a_true"]["value"]) <= 1e-8
    field, grid, t0 = load_snapshot(os.path.join(out,
                                                 "snapshot_synthetic.dat"))
    assert t0 == 0.0 and field.shape == (grid.N,)


# ---------------------------------------------------------------------------
# evolve
# ---------------------------------------------------------------------------

def test_evolve_uniform_phase_rate_and_format(tmp_path, capsys):
    out = str(tmp_path / "out")
    cfg = write_cfg(tmp_path, "u.cfg", (
        "grid.N = 257\nic.kind = uniform\nic.eps = 0.1\ntime.T = 0.2\n"
        f"output.dir = {out}\n"))
    assert main(["evolve", "--config", cfg]) == 0
    rows = read_rows(out)
    assert len(rows) == 21  # T / 0.01 + 1 samples
    for row in rows:
        assert len(row) == len(CSV_HEADER.split(","))
        # no modulation observer: c, a, z_H0, d0 stay empty
        assert row[1] == "" and row[2] == "" and row[9] == "" and row[10] == ""
        for cell in row:
            assert cell == "" or FLOAT_CELL.match(cell)
    ts = np.array([float(r[0]) for r in rows])
    thetas = np.array([float(r[3]) for r in rows])
    expected = 1.0 - 0.9 ** 4
    slope = np.polyfit(ts, thetas, 1)[0]
    assert abs(slope - expected) < 1e-4
    summary = read_summary(out)
    assert abs(summary["scalars"]["phase_rate_measured"]["value"]
               - expected) < 1e-4
    assert summary["scalars"]["phase_rate"]["provenance"] == "closed_form"
    assert summary["scalars"]["mass_drift"]["value"] < 1e-10


def test_evolve_black_stays_on_kink(tmp_path, capsys):
    out = str(tmp_path / "out")
    cfg = write_cfg(tmp_path, "b.cfg", (
        f"grid.N = 1025\ntime.T = 0.05\noutput.dir = {out}\n"))
    assert main(["evolve", "--config", cfg]) == 0
    summary = read_summary(out)
    scalars = summary["scalars"]
    assert abs(scalars["c_final"]["value"]) < 1e-10
    assert abs(scalars["a_final"]["value"]) < 1e-10
    assert abs(scalars["theta_final"]["value"]) < 1e-6
    assert scalars["e2_drift"]["value"] < 1e-10
    for name in ("snapshot_initial.dat", "snapshot_final.dat"):
        field, grid, t_snap = load_snapshot(os.path.join(out, name))
        assert grid.N == 1025 and field.shape == (grid.N,)
    rows = read_rows(out)
    assert float(rows[-1][0]) == pytest.approx(0.05)
    assert all(row[1] != "" for row in rows)  # observer on every sample


# ---------------------------------------------------------------------------
# stability
# ---------------------------------------------------------------------------

def test_stability_smoke_and_byte_identity(tmp_path, capsys):
    cfg = write_cfg(tmp_path, "st.cfg", (
        "grid.N = 1025\nic.kind = perturbed_black\nic.eps = 0.01\n"
        "ic.seed = 7\ntime.T = 0.3\n"
        f"output.dir = {tmp_path / 'base'}\n"))
    out_a, out_b = str(tmp_path / "a"), str(tmp_path / "b")
    assert main(["stability", "--config", cfg, "--out", out_a]) == 0
    assert main(["stability", "--config", cfg, "--out", out_b]) == 0
    for name in ("series.csv", "summary.json"):
        with open(os.path.join(out_a, name), "rb") as fh:
            bytes_a = fh.read()
        with open(os.path.join(out_b, name), "rb") as fh:
            bytes_b = fh.read()
        assert bytes_a == bytes_b
    summary = read_summary(out_a)
    names = [c["name"] for c in summary["checks"]]
    assert names == ["d0_ratio_bound", "speed_bound", "rate_bound"]
    scalars = summary["scalars"]
    assert scalars["rate_bound_K"]["value"] == STABILITY_RATE_K
    assert scalars["rate_sum_max"]["value"] <= STABILITY_RATE_K * 0.01
    # the amplitude bisection hits the target distance exactly in the
    # kink frame; the fitted frame re-centers and absorbs a few percent
    assert scalars["d0_unshifted"]["value"] == pytest.approx(0.01,
                                                             abs=1e-12)
    assert scalars["d0_initial"]["value"] == pytest.approx(0.01, rel=0.1)


def test_stability_exact_soliton(tmp_path, capsys):
    out = str(tmp_path / "out")
    cfg = write_cfg(tmp_path, "ex.cfg", (
        "grid.N = 1025\nic.kind = perturbed_black\nic.eps = 0.0\n"
        f"time.T = 0.3\noutput.dir = {out}\n"))
    assert main(["stability", "--config", cfg]) == 0
    summary = read_summary(out)
    assert [c["name"] for c in summary["checks"]] == ["exact_soliton_d0"]
    assert summary["scalars"]["d0_max"]["value"] <= 1e-6


# ---------------------------------------------------------------------------
# fan-out and output routing
# ---------------------------------------------------------------------------

def test_jobs_fanout_uses_stem_subdirs(tmp_path, capsys):
    base = str(tmp_path / "fan")
    text = ("grid.N = 257\nic.kind = uniform\nic.eps = 0.1\ntime.T = 0.02\n"
            f"output.dir = {base}\n")
    cfg_a = write_cfg(tmp_path, "run_a.cfg", text)
    cfg_b = write_cfg(tmp_path, "run_b.cfg", text)
    code = main(["evolve", "--config", cfg_a, "--config", cfg_b,
                 "--jobs", "2"])
    assert code == 0
    for stem in ("run_a", "run_b"):
        assert os.path.exists(os.path.join(base, stem, "series.csv"))
        assert os.path.exists(os.path.join(base, stem, "summary.json"))


def test_exit_code_is_max_over_configs(tmp_path, capsys):
    ok = write_cfg(tmp_path, "ok.cfg",
                   f"output.dir = {tmp_path / 'out'}\n")
    bad = write_cfg(tmp_path, "strict.cfg", (
        f"tolerances.verify = 1e-30\noutput.dir = {tmp_path / 'out'}\n"))
    assert main(["verify", "--config", ok, "--config", bad]) == 1


def test_gpq_out_env_routes_outputs(tmp_path, capsys, monkeypatch):
    env_dir = str(tmp_path / "env-out")
    monkeypatch.setenv("GPQ_OUT", env_dir)
    monkeypatch.chdir(tmp_path)
    cfg = write_cfg(tmp_path, "e.cfg",
                    "grid.N = 257\nic.kind = uniform\nic.eps = 0.1\n"
                    "time.T = 0.02\n")
    assert main(["evolve", "--config", cfg]) == 0
    assert os.path.exists(os.path.join(env_dir, "summary.json"))
    assert not os.path.exists(os.path.join(str(tmp_path), "gpq-out"))
