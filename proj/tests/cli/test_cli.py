"""End-to-end tests of the shotcorr command-line tool.

SHOTCORR_CLI points at the executable. Set SHOTCORR_UPDATE_GOLDEN=1 to
rewrite the golden files instead of comparing against them.
"""

import csv
import json
import math
import os
import subprocess
from pathlib import Path

import pytest

HERE = Path(__file__).resolve().parent
CONFIGS = HERE / "configs"
GOLDEN = HERE / "golden"
CLI = os.environ.get("SHOTCORR_CLI", "shotcorr")
UPDATE = os.environ.get("SHOTCORR_UPDATE_GOLDEN") == "1"

TWO_PI = 2 * math.pi


def run(*args, check=True):
    proc = subprocess.run([CLI, *map(str, args)], capture_output=True, text=True)
    if check and proc.returncode != 0:
        raise AssertionError(f"shotcorr {' '.join(map(str, args))} failed ({proc.returncode}):\n{proc.stderr}")
    return proc


def read_rows(path):
    with open(path, newline="") as f:
        return list(csv.DictReader(f))


def write_config(tmp_path, name, config):
    path = tmp_path / name
    path.write_text(json.dumps(config))
    return path


def assert_matches_golden(produced: Path, golden_name: str, rel=1e-9):
    golden = GOLDEN / golden_name
    if UPDATE:
        golden.write_text(produced.read_text())
        return
    want = golden.read_text().splitlines()
    got = produced.read_text().splitlines()
    assert got[0] == want[0], "header changed"
    assert len(got) == len(want), "row count changed"
    for line, (g, w) in enumerate(zip(got[1:], want[1:]), start=2):
        for gf, wf in zip(g.split(","), w.split(",")):
            try:
                gv, wv = float(gf), float(wf)
            except ValueError:
                assert gf == wf, f"line {line}: {gf!r} != {wf!r}"
                continue
            assert gv == pytest.approx(wv, rel=rel, abs=1e-300), f"line {line}: {gv} != {wv}"


# chi

def test_chi_golden_and_columns(tmp_path):
    out = tmp_path / "chi.csv"
    run("chi", "--config", CONFIGS / "chi_overhauser_hz.json", "--out", out)
    assert_matches_golden(out, "chi_overhauser.csv")
    rows = read_rows(out)
    assert list(rows[0].keys()) == ["delta_t_s", "tau_s", "chi_minus", "chi_plus", "correlation", "regime"]
    assert len(rows) == 12
    for r in rows:
        if float(r["delta_t_s"]) == 0.0:
            assert float(r["chi_minus"]) == 0.0
        assert r["regime"] in {"quadratic", "linear", "plateau"}


def test_chi_white_noise_closed_form(tmp_path):
    out = tmp_path / "white.csv"
    run("chi", "--config", CONFIGS / "chi_white.json", "--out", out)
    rows = read_rows(out)
    assert "regime" not in rows[0]
    for r in rows:
        # chi_- = chi_+ = 2 S0 tau = 2 and the correlator is exp(-S0 tau).
        assert float(r["chi_minus"]) == pytest.approx(2.0, rel=1e-2)
        assert float(r["chi_plus"]) == pytest.approx(2.0, rel=1e-2)
        assert float(r["correlation"]) == pytest.approx(math.exp(-1.0), rel=1e-2)


def test_chi_deterministic_across_runs_and_threads(tmp_path):
    a, b, c = tmp_path / "a.csv", tmp_path / "b.csv", tmp_path / "c.csv"
    cfg = CONFIGS / "chi_overhauser_hz.json"
    run("chi", "--config", cfg, "--out", a)
    run("chi", "--config", cfg, "--out", b)
    run("chi", "--config", cfg, "--out", c, "--threads", 4)
    assert a.read_bytes() == b.read_bytes() == c.read_bytes()


def test_unit_round_trip_hz_and_rad(tmp_path):
    cfg = json.loads((CONFIGS / "chi_overhauser_hz.json").read_text())
    rad = json.loads(json.dumps(cfg))
    rad["freq_units"] = "rad"
    for key in ("omega_l", "omega_e"):
        rad["spectrum"][key] = TWO_PI * cfg["spectrum"][key]
    hz_out, rad_out, flag_out = tmp_path / "hz.csv", tmp_path / "rad.csv", tmp_path / "flag.csv"
    run("chi", "--config", CONFIGS / "chi_overhauser_hz.json", "--out", hz_out)
    run("chi", "--config", write_config(tmp_path, "rad.json", rad), "--out", rad_out)
    # The flag overrides the config.
    del cfg["freq_units"]
    run("chi", "--config", write_config(tmp_path, "plain.json", cfg), "--out", flag_out, "--freq-units", "hz")
    assert hz_out.read_bytes() == rad_out.read_bytes() == flag_out.read_bytes()


def test_sidecar_contents_and_atomic_write(tmp_path):
    out = tmp_path / "chi.csv"
    run("chi", "--config", CONFIGS / "chi_overhauser_hz.json", "--out", out)
    side = json.loads((tmp_path / "chi.csv.json").read_text())
    assert side["command"] == "chi"
    assert side["version"]
    assert side["freq_units"] == "hz"
    assert side["config"]["spectrum"]["family"] == "overhauser"
    assert side["outputs"] == ["chi.csv"]
    assert not list(tmp_path.glob("*.tmp"))


# schedule

def test_schedule_golden_and_variant_note(tmp_path):
    out = tmp_path / "s.csv"
    run("schedule", "--config", CONFIGS / "schedule_oneoverf.json", "--out", out)
    assert_matches_golden(out, "schedule_oneoverf.csv")
    side = json.loads((tmp_path / "s.csv.json").read_text())
    assert side["lambert_variant"] == "short_evolution"
    out2 = tmp_path / "c.csv"
    run("schedule", "--config", CONFIGS / "schedule_contrast.json", "--out", out2)
    assert_matches_golden(out2, "schedule_contrast.csv")
    rows = read_rows(out2)
    assert list(rows[0].keys()) == ["delta_t_s", "tau_s", "flags"]
    assert all(r["flags"] == "" for r in rows)


def test_schedule_unreachable_point_is_an_error(tmp_path):
    cfg = json.loads((CONFIGS / "schedule_oneoverf.json").read_text())
    cfg["grid"]["delta_t"] = [1e-6, 1e-2]
    proc = run("schedule", "--config", write_config(tmp_path, "bad.json", cfg), check=False)
    assert proc.returncode == 2
    assert "delta_t" in proc.stderr


# simulate / correlate

def test_simulate_golden_and_fidelity_columns(tmp_path):
    out = tmp_path / "sim.csv"
    run("simulate", "--config", CONFIGS / "simulate_small.json", "--out", out)
    assert_matches_golden(out, "simulate_small.csv")
    assert_matches_golden(tmp_path / "sim.csv.shots.csv", "simulate_small.shots.csv")
    rows = read_rows(out)
    assert list(rows[0].keys()) == [
        "delta_t_s", "tau_s", "correlation", "stderr", "n_pairs", "correlation_raw", "stderr_raw"]
    for r in rows:
        # epsilon = 0.25: corrected = raw / (1 - 2 eps)^2 = 4 raw.
        assert float(r["correlation"]) == pytest.approx(4.0 * float(r["correlation_raw"]), rel=1e-12)
        assert float(r["stderr"]) == pytest.approx(4.0 * float(r["stderr_raw"]), rel=1e-12)


def test_simulate_seed_and_threads(tmp_path):
    cfg = CONFIGS / "simulate_small.json"
    a, b, c, d = (tmp_path / f"{n}.csv" for n in "abcd")
    run("simulate", "--config", cfg, "--out", a)
    run("simulate", "--config", cfg, "--out", b, "--threads", 3)
    run("simulate", "--config", cfg, "--out", c, "--seed", 11)
    run("simulate", "--config", cfg, "--out", d, "--seed", 12)
    assert a.read_bytes() == b.read_bytes() == c.read_bytes()
    assert (tmp_path / "a.csv.shots.csv").read_bytes() == (tmp_path / "b.csv.shots.csv").read_bytes()
    assert (tmp_path / "a.csv.shots.csv").read_bytes() != (tmp_path / "d.csv.shots.csv").read_bytes()


def test_simulate_zero_noise_is_perfectly_correlated(tmp_path):
    cfg = {"spectrum": {"family": "white", "level": 0, "omega_high": 1e9},
           "protocol": {"tau": 1e-6, "delta_t": 1e-5, "n_cycles": 40, "n_records": 8, "max_lag": 4, "n_modes": 256}}
    out = tmp_path / "z.csv"
    run("simulate", "--config", write_config(tmp_path, "z.json", cfg), "--out", out)
    assert all(float(r["correlation"]) == 1.0 for r in read_rows(out))


def test_simulate_matches_chi_within_three_stderr(tmp_path):
    spectrum = {"family": "overhauser", "rms_field_T": 2e-3, "omega_l": 0.1, "omega_e": 1e4, "gamma": 1}
    sim = {"freq_units": "hz", "seed": 5, "spectrum": spectrum, "qubit": {"readout_flip_prob": 0.1},
           "protocol": {"tau": 5e-8, "delta_t": 1e-5, "n_cycles": 20, "n_records": 5000, "max_lag": 5,
                        "n_modes": 1024, "write_shots": False}}
    out = tmp_path / "sim.csv"
    run("simulate", "--config", write_config(tmp_path, "sim.json", sim), "--out", out, "--threads", 0)
    rows = read_rows(out)
    lags = [float(r["delta_t_s"]) for r in rows]
    chi = {"freq_units": "hz", "spectrum": spectrum, "grid": {"tau": [5e-8], "delta_t": lags}}
    chi_out = tmp_path / "chi.csv"
    run("chi", "--config", write_config(tmp_path, "chi.json", chi), "--out", chi_out)
    for r, a in zip(rows, read_rows(chi_out)):
        assert int(r["n_pairs"]) > 0
        se = float(r["stderr"])
        assert se <= 0.01
        assert abs(float(r["correlation"]) - float(a["correlation"])) <= 3.0 * se


def test_correlate_reproduces_simulate(tmp_path):
    out = tmp_path / "sim.csv"
    run("simulate", "--config", CONFIGS / "simulate_small.json", "--out", out)
    cfg = {"qubit": {"readout_flip_prob": 0.25}, "correlate": {"shots": "sim.csv.shots.csv", "max_lag": 3}}
    cor = tmp_path / "cor.csv"
    run("correlate", "--config", write_config(tmp_path, "cor.json", cfg), "--out", cor)
    assert cor.read_bytes() == out.read_bytes()


def test_correlate_rejects_bad_outcomes(tmp_path):
    shots = tmp_path / "shots.csv"
    shots.write_text("cycle_index,t_center_s,outcome\n0,1e-6,1\n1,2e-6,0\n")
    cfg = {"correlate": {"shots": "shots.csv"}}
    proc = run("correlate", "--config", write_config(tmp_path, "c.json", cfg), check=False)
    assert proc.returncode == 2
    assert "line 3" in proc.stderr


# fit

def curve_from_chi(tmp_path, spectrum, tau, delta_t, rel_error):
    chi = {"freq_units": "hz", "spectrum": spectrum, "grid": {"tau": [tau], "delta_t": delta_t}}
    out = tmp_path / "truth.csv"
    run("chi", "--config", write_config(tmp_path, "truth.json", chi), "--out", out)
    data = tmp_path / "data.csv"
    with open(data, "w") as f:
        f.write("delta_t_s,tau_s,correlation,stderr\n")
        for r in read_rows(out):
            v = float(r["correlation"])
            f.write(f"{r['delta_t_s']},{r['tau_s']},{v!r},{rel_error * v!r}\n")
    return data


def test_fit_missing_stderr_column(tmp_path):
    data = tmp_path / "d.csv"
    data.write_text("delta_t_s,tau_s,correlation\n1e-5,1e-7,0.3\n2e-5,1e-7,0.2\n")
    cfg = {"fit": {"data": "d.csv", "family": "power_law", "bounds": {"amplitude": [1, 1e12]},
                   "fixed": {"alpha": 1, "omega_low": 1e-3, "omega_high": 1e8}}}
    proc = run("fit", "--config", write_config(tmp_path, "f.json", cfg), check=False)
    assert proc.returncode != 0
    assert "supply per-point uncertainties" in proc.stderr


def test_fit_malformed_row_is_named(tmp_path):
    data = tmp_path / "d.csv"
    data.write_text("delta_t_s,tau_s,correlation,stderr\n1e-5,1e-7,0.3,0.01\n2e-5,1e-7,oops,0.01\n")
    cfg = {"fit": {"data": "d.csv", "family": "power_law", "bounds": {"amplitude": [1, 1e12]},
                   "fixed": {"alpha": 1, "omega_low": 1e-3, "omega_high": 1e8}}}
    proc = run("fit", "--config", write_config(tmp_path, "f.json", cfg), check=False)
    assert proc.returncode == 2
    assert "line 3" in proc.stderr


def test_fit_recovers_omega_e_in_hz(tmp_path):
    spectrum = {"family": "overhauser", "rms_field_T": 2e-2, "omega_l": 0.1, "omega_e": 1e4, "gamma": 1}
    grid = {"min": 1.6e-6, "max": 1.6e-4, "n": 20, "spacing": "log"}
    data = curve_from_chi(tmp_path, spectrum, 3e-7, grid, 1e-3)
    cfg = {"freq_units": "hz", "spectrum": spectrum,
           "fit": {"data": "data.csv", "bounds": {"omega_e": [2e3, 5e4]}, "init": {"omega_e": 4e3}}}
    out = tmp_path / "fit.json"
    run("fit", "--config", write_config(tmp_path, "f.json", cfg), "--out", out, "--threads", 0)
    doc = json.loads(out.read_text())
    assert doc["converged"]
    assert doc["parameters"]["omega_e"]["value"] == pytest.approx(TWO_PI * 1e4, rel=1e-4)
    assert doc["parameters"]["omega_l"]["free"] is False


def test_fit_round_trip_simulate_gamma1(tmp_path):
    spectrum = {"family": "overhauser", "rms_field_T": 2e-2, "omega_l": 0.1, "omega_e": 1e4, "gamma": 1}
    # 30 delays over [0.1, 10] / omega_e with tau from the constant-contrast
    # schedule, each an independent measurement.
    grid = {"min": 1.5e-6, "max": 1.7e-4, "n": 30}
    sched = {"freq_units": "hz", "spectrum": spectrum, "schedule": {"rule": "constant_contrast", "target": 2},
             "grid": {"delta_t": grid}}
    sched_out = tmp_path / "sched.csv"
    run("schedule", "--config", write_config(tmp_path, "sched.json", sched), "--out", sched_out)
    taus = [float(r["tau_s"]) for r in read_rows(sched_out)]
    sim = {"freq_units": "hz", "seed": 2, "spectrum": spectrum,
           "protocol": {"tau": taus, "delta_t": grid, "n_cycles": 16, "n_records": 6000, "n_modes": 512}}
    curve = tmp_path / "curve.csv"
    run("simulate", "--config", write_config(tmp_path, "sim.json", sim), "--out", curve, "--threads", 0)
    rows = read_rows(curve)
    assert len(rows) == 30
    assert max(float(r["stderr"]) / float(r["correlation"]) for r in rows) < 0.02
    cfg = {"freq_units": "hz", "spectrum": spectrum, "fit": {"data": "curve.csv", "discriminate_gamma": True}}
    out = tmp_path / "fit.json"
    run("fit", "--config", write_config(tmp_path, "f.json", cfg), "--out", out, "--threads", 0)
    doc = json.loads(out.read_text())
    assert doc["gamma_hat"] == 1
    assert doc["delta_chi_squared"] > 9.0
    assert doc["indeterminate"] is False


# figures

def test_figure2_bundle(tmp_path):
    out = tmp_path / "f2.csv"
    run("figure2", "--out", out, "--threads", 0)
    rows = read_rows(out)
    taus = sorted({float(r["tau_s"]) for r in rows})
    assert len(taus) == 5
    assert taus[0] == pytest.approx(50e-9) and taus[-1] == pytest.approx(5e-6)
    for r in rows:
        assert ("unphysical" in r["flags"]) == (float(r["delta_t_s"]) < float(r["tau_s"]))
    first = min((r for r in rows if float(r["tau_s"]) == taus[0]), key=lambda r: float(r["delta_t_s"]))
    # chi_- -> 0 at the shortest delay.
    assert float(first["exp_minus_half_chi_minus"]) > 0.99
    side = json.loads((tmp_path / "f2.csv.json").read_text())
    assert any("assumed" in n for n in side["notes"])


def figure3a_curves(tmp_path):
    out = tmp_path / "f3a.csv"
    run("figure3a", "--out", out, "--threads", 0)
    curves = {}
    for r in read_rows(out):
        curves.setdefault(r["curve"], {})[float(r["delta_t_s"])] = float(r["correlation"])
    return curves


def test_figure3a_bundle(tmp_path):
    curves = figure3a_curves(tmp_path)
    assert set(curves) == {"gamma1", "gamma2", "shifted_omega_e", "no_cutoff"}
    omega_l = TWO_PI * 0.1
    # The two cutoff exponents merge deep in the plateau.
    deep = [dt for dt in curves["gamma1"] if dt >= 1.0 / omega_l]
    assert deep
    for dt in deep:
        assert abs(curves["gamma2"][dt] / curves["gamma1"][dt] - 1) <= 0.01
    # Beyond 600 us the missing cutoff still shows.
    middle = [dt for dt in curves["gamma1"] if 600e-6 < dt < 1e-2]
    assert max(abs(curves["no_cutoff"][dt] / curves["gamma1"][dt] - 1) for dt in middle) > 0.01


@pytest.mark.xfail(strict=True, reason="gamma = 1 and 2 differ by 4.6% at 630 us; within 1% only from ~5 ms")
def test_figure3a_cutoffs_merge_from_600us(tmp_path):
    curves = figure3a_curves(tmp_path)
    for dt in (dt for dt in curves["gamma1"] if dt > 600e-6):
        assert abs(curves["gamma2"][dt] / curves["gamma1"][dt] - 1) <= 0.01


def test_figure3b_bundle(tmp_path):
    out = tmp_path / "f3b.csv"
    run("figure3b", "--out", out, "--threads", 0)
    rows = read_rows(out)
    chi = {}
    for r in rows:
        chi.setdefault(float(r["alpha"]), []).append((float(r["delta_t_s"]), float(r["chi_minus"])))
    assert set(chi) == {0.9, 1.0, 1.1}
    flat = [c for _, c in sorted(chi[1.0])]
    assert max(flat) / min(flat) - 1 < 0.05
    # chi_- scales as delta_t^(alpha - 1): falling for 0.9, rising for 1.1.
    low = [c for _, c in sorted(chi[0.9])]
    high = [c for _, c in sorted(chi[1.1])]
    assert all(b < a for a, b in zip(low, low[1:]))
    assert all(b > a for a, b in zip(high, high[1:]))


# errors

def test_config_errors_name_the_field(tmp_path):
    cfg = {"spectrum": {"family": "overhauser", "omega_l": 1, "rms_field_T": 1e-3, "omga_e": 3},
           "grid": {"tau": [1e-8], "delta_t": [0]}}
    proc = run("chi", "--config", write_config(tmp_path, "c.json", cfg), check=False)
    assert proc.returncode == 2
    assert "spectrum.omga_e" in proc.stderr
    cfg = {"spectrum": {"family": "white", "level": 1, "omega_high": 1e6}, "grid": {"tau": [1e-8]}}
    proc = run("chi", "--config", write_config(tmp_path, "d.json", cfg), check=False)
    assert proc.returncode == 2
    assert "grid.delta_t" in proc.stderr


def test_usage_errors(tmp_path):
    assert run("nonsense", check=False).returncode != 0
    assert run("chi", "--freq-units", "khz", check=False).returncode != 0
