"""End-to-end runs of the command-line interface.

Exercises exit codes, output-file schemas, and byte-level reproducibility
using small sample counts so the whole module stays fast.
"""

import csv
import math
import os
import textwrap

import pytest

from stvmeter.cli import main

# frozen headers: changing any of these is a format break and must be
# caught here, not discovered by a downstream CSV consumer
SWEEP_HEADER = "kappa1_over_kappa,psi,E,omega,n_th,n_sq,N_tot"
ESTIMATES_HEADER = "quantity,value,std_error,n"
SUMMARY_HEADER = "channel,a,b,a_err,b_err,n_points"
BUDGET_HEADER = "scheme,T,rel_error,N,N_ph"
KURTOSIS_HEADER = "case,n,kurtosis"
SAMPLES_HEADER = "theta,x"

EXPERIMENT_YAML = textwrap.dedent(
    """\
    schema_version: 1
    seed: 7
    experiment:
      source:
        state: {n_th: 0.2, n_sq: 0.3}
      detection:
        eta: 0.9
        n_samples: 2000
        tau_s: 1.0e-7
        phase_strategy: {kind: uniform_scan}
      t_values: [0.5, 0.8]
      repetitions: 2
    """
)

SWEEP_YAML = textwrap.dedent(
    """\
    schema_version: 1
    sweep:
      kappa1_over_kappa: [1.0]
      e: [0.0, 0.5, 1.5]
    """
)

BUDGET_YAML = textwrap.dedent(
    """\
    schema_version: 1
    budget:
      t_values: [0.5, 1.0]
      target_rel_error: 0.01
      kappa_tau_s: 6.0
      source:
        - opo: {kappa1_over_kappa: 1.0, e: 0.5}
        - state: {n_th: 0.55, n_sq: 0.11}
      classical:
        nep: 2.5e-9
        bandwidth_b: 1.0e+8
        omega0: 2.3706e+15
        n_samples: 10000
        tau_s: 1.0e-7
    """
)

KURTOSIS_YAML = textwrap.dedent(
    """\
    schema_version: 1
    seed: 11
    kurtosis:
      source:
        state: {n_th: 0.0, n_sq: 2.0}
      detection:
        eta: 1.0
        n_samples: 4000
        tau_s: 1.0e-7
        phase_strategy: {kind: fixed, phi: 0.0}
      gain_jitter_rel: 0.5
      block_size: 500
    """
)


def _write(tmp_path, text, name="run.yaml"):
    path = tmp_path / name
    path.write_text(text)
    return str(path)


def _read(out_dir, name):
    with open(os.path.join(out_dir, name), "rb") as fh:
        return fh.read()


def _csv_lines(out_dir, name):
    return _read(out_dir, name).decode().splitlines()


# --- config validation and exit codes -----------------------------------------

BAD_CONFIGS = [
    ("unknown-top-key", "experiment", EXPERIMENT_YAML + "extra: 1\n"),
    (
        "unknown-detection-key",
        "experiment",
        EXPERIMENT_YAML.replace("eta: 0.9", "eta: 0.9\n        dark_counts: 3"),
    ),
    ("bad-schema-version", "experiment",
     EXPERIMENT_YAML.replace("schema_version: 1", "schema_version: 2")),
    ("no-section", "experiment", "schema_version: 1\n"),
    ("wrong-section", "budget", EXPERIMENT_YAML),
    (
        "state-and-opo",
        "experiment",
        EXPERIMENT_YAML.replace(
            "state: {n_th: 0.2, n_sq: 0.3}",
            "state: {n_th: 0.2, n_sq: 0.3}\n        opo: {kappa1_over_kappa: 1.0, e: 0.5}",
        ),
    ),
    ("malformed-yaml", "experiment", "experiment: [unclosed\n"),
    ("empty-t-values", "experiment",
     EXPERIMENT_YAML.replace("t_values: [0.5, 0.8]", "t_values: []")),
    ("bool-as-number", "experiment",
     EXPERIMENT_YAML.replace("eta: 0.9", "eta: true")),
    ("negative-seed", "experiment",
     EXPERIMENT_YAML.replace("seed: 7", "seed: -5")),
    (
        "kurtosis-needs-fixed-phase",
        "kurtosis-check",
        KURTOSIS_YAML.replace(
            "phase_strategy: {kind: fixed, phi: 0.0}",
            "phase_strategy: {kind: uniform_scan}",
        ),
    ),
    ("above-threshold-source", "experiment",
     EXPERIMENT_YAML.replace(
         "state: {n_th: 0.2, n_sq: 0.3}",
         "opo: {kappa1_over_kappa: 1.0, e: 1.5}")),
]


@pytest.mark.parametrize(
    "command,text", [(cmd, text) for _, cmd, text in BAD_CONFIGS],
    ids=[name for name, _, _ in BAD_CONFIGS],
)
def test_invalid_configs_exit_2(tmp_path, capsys, command, text):
    cfg = _write(tmp_path, text)
    code = main([command, "--config", cfg, "--out", str(tmp_path / "out")])
    assert code == 2
    assert "config error:" in capsys.readouterr().err


def test_missing_config_file_exits_2(tmp_path, capsys):
    code = main(["experiment", "--config", str(tmp_path / "nope.yaml"),
                 "--out", str(tmp_path / "out")])
    assert code == 2
    assert "cannot read config" in capsys.readouterr().err


def test_missing_output_dir_exits_2(tmp_path, capsys):
    cfg = _write(tmp_path, SWEEP_YAML)
    code = main(["opo-sweep", "--config", cfg])
    assert code == 2
    assert "output" in capsys.readouterr().err


# --- opo-sweep ------------------------------------------------------------------

def test_sweep_outputs_and_error_row(tmp_path):
    cfg = _write(tmp_path, SWEEP_YAML)
    out = str(tmp_path / "out")
    assert main(["opo-sweep", "--config", cfg, "--out", out]) == 0
    lines = _csv_lines(out, "sweep.csv")
    assert lines[0] == SWEEP_HEADER
    assert len(lines) == 4
    vac = lines[1].split(",")
    assert abs(float(vac[4])) < 1e-12 and abs(float(vac[6])) < 1e-12
    mid = lines[2].split(",")
    assert math.isclose(float(mid[5]), 8.0, rel_tol=1e-9)
    # the above-threshold point keeps its inputs but has no derived values
    bad = lines[3].split(",")
    assert bad[0] == "1.0" and bad[2] == "1.5"
    assert bad[4:] == ["", "", ""]
    assert os.path.exists(os.path.join(out, "config_echo.yaml"))
    log = _read(out, "log.txt").decode()
    assert "command sweep" in log
    assert "failed 1" in log


def test_sweep_grid_size_and_determinism(tmp_path):
    text = SWEEP_YAML.replace(
        "e: [0.0, 0.5, 1.5]", "e: [0.0, 0.5]\n  psi: [0.0, 0.3]\n  omega: [0.0, 1.0, 2.0]"
    )
    cfg = _write(tmp_path, text)
    out1, out2 = str(tmp_path / "a"), str(tmp_path / "b")
    assert main(["opo-sweep", "--config", cfg, "--out", out1]) == 0
    assert main(["opo-sweep", "--config", cfg, "--out", out2]) == 0
    lines = _csv_lines(out1, "sweep.csv")
    assert len(lines) == 1 + 2 * 2 * 3
    assert _read(out1, "sweep.csv") == _read(out2, "sweep.csv")


# --- experiment -------------------------------------------------------------------

@pytest.fixture(scope="module")
def experiment_run(tmp_path_factory):
    base = tmp_path_factory.mktemp("exp")
    cfg = _write(base, EXPERIMENT_YAML)
    out = str(base / "out")
    code = main(["experiment", "--config", cfg, "--out", out])
    return code, cfg, out


def test_experiment_exit_and_files(experiment_run):
    code, _, out = experiment_run
    assert code == 0
    for name in ("config_echo.yaml", "log.txt", "estimates.csv", "summary.csv"):
        assert os.path.exists(os.path.join(out, name)), name


def test_experiment_estimates_schema(experiment_run):
    _, _, out = experiment_run
    lines = _csv_lines(out, "estimates.csv")
    assert lines[0] == ESTIMATES_HEADER
    quantities = {line.split(",")[0] for line in lines[1:]}
    for expected in (
        "t=upstream/rep=0/var_x",
        "t=upstream/rep=1/n_sq",
        "t=0.5/rep=0/n_tot",
        "t=0.8/rep=1/ratio_ntot",
        "t=0.5/rep=0/t_hat_variance",
        "t=0.8/rep=0/t_hat_ntot",
    ):
        assert expected in quantities, expected
    # every data row carries the sample count
    assert all(line.rsplit(",", 1)[1] == "2000" for line in lines[1:])


def test_experiment_summary_schema(experiment_run):
    _, _, out = experiment_run
    lines = _csv_lines(out, "summary.csv")
    assert lines[0] == SUMMARY_HEADER
    channels = [line.split(",")[0] for line in lines[1:]]
    assert channels == ["ntot_ratio", "nth_ratio", "nsq_ratio"]
    for line in lines[1:]:
        fields = line.split(",")
        assert fields[5] == "4"
        float(fields[1]), float(fields[2])


def test_experiment_log_is_structured(experiment_run):
    _, _, out = experiment_run
    log = _read(out, "log.txt").decode()
    assert "command experiment" in log
    assert "seed 7" in log
    assert "cells 6" in log
    assert "config_echo sha256" in log


def test_experiment_runs_are_reproducible(experiment_run, tmp_path):
    _, cfg, out = experiment_run
    redo = str(tmp_path / "redo")
    assert main(["experiment", "--config", cfg, "--out", redo]) == 0
    assert _read(out, "estimates.csv") == _read(redo, "estimates.csv")
    assert _read(out, "summary.csv") == _read(redo, "summary.csv")


def test_experiment_workers_do_not_change_results(experiment_run, tmp_path):
    _, cfg, out = experiment_run
    threaded = str(tmp_path / "threaded")
    assert main(["experiment", "--config", cfg, "--out", threaded,
                 "--workers", "3"]) == 0
    assert _read(out, "estimates.csv") == _read(threaded, "estimates.csv")
    assert _read(out, "summary.csv") == _read(threaded, "summary.csv")


def test_experiment_seed_override_changes_results(experiment_run, tmp_path):
    _, cfg, out = experiment_run
    other = str(tmp_path / "other")
    assert main(["experiment", "--config", cfg, "--out", other,
                 "--seed", "8"]) == 0
    assert _read(out, "estimates.csv") != _read(other, "estimates.csv")
    echo = _read(other, "config_echo.yaml").decode()
    assert "seed: 8" in echo


def test_experiment_samples_override_is_echoed(tmp_path):
    cfg = _write(tmp_path, EXPERIMENT_YAML)
    out = str(tmp_path / "out")
    assert main(["experiment", "--config", cfg, "--out", out,
                 "--samples", "1500"]) == 0
    assert "n_samples: 1500" in _read(out, "config_echo.yaml").decode()
    lines = _csv_lines(out, "estimates.csv")
    assert lines[1].rsplit(",", 1)[1] == "1500"


def test_experiment_keep_samples(tmp_path):
    cfg = _write(tmp_path, EXPERIMENT_YAML)
    out = str(tmp_path / "out")
    assert main(["experiment", "--config", cfg, "--out", out,
                 "--keep-samples"]) == 0
    samples_dir = os.path.join(out, "samples")
    names = sorted(os.listdir(samples_dir))
    assert names == [
        "t=0.5_rep=0.csv", "t=0.5_rep=1.csv",
        "t=0.8_rep=0.csv", "t=0.8_rep=1.csv",
        "t=upstream_rep=0.csv", "t=upstream_rep=1.csv",
    ]
    lines = _csv_lines(samples_dir, names[0])
    assert lines[0] == SAMPLES_HEADER
    assert len(lines) == 1 + 2000


def test_experiment_sample_dump_guard(tmp_path, capsys):
    cfg = _write(tmp_path, EXPERIMENT_YAML)
    code = main(["experiment", "--config", cfg, "--out", str(tmp_path / "out"),
                 "--keep-samples", "--samples", "2000000"])
    assert code == 2
    assert "keep-samples" in capsys.readouterr().err


# --- budget ---------------------------------------------------------------------

def test_budget_outputs(tmp_path):
    cfg = _write(tmp_path, BUDGET_YAML)
    out = str(tmp_path / "out")
    assert main(["budget", "--config", cfg, "--out", out]) == 0
    # source labels contain commas, so parse properly
    with open(os.path.join(out, "budget.csv"), newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        rows = list(reader)
    assert header == BUDGET_HEADER.split(",")
    schemes = [r[0] for r in rows]
    assert schemes == [
        "classical", "classical",
        "squeezed:kappa1_over_kappa=1.0,e=0.5",
        "squeezed:kappa1_over_kappa=1.0,e=0.5",
        "squeezed:n_th=0.55,n_sq=0.11",
        "squeezed:n_th=0.55,n_sq=0.11",
    ]
    for r in rows:
        assert int(r[3]) >= 1
        if r[0] == "classical":
            # limiting-SNR accuracy still carries the small shot-noise term
            assert float(r[2]) <= 0.0102
        else:
            # ceil on the sample count lands at or just under the target
            assert float(r[2]) <= 0.01
    by_scheme_t = {(r[0], r[1]): r for r in rows}
    classical_half = float(by_scheme_t[("classical", "0.5")][4])
    squeezed_half = min(
        float(r[4]) for r in rows if r[0].startswith("squeezed") and r[1] == "0.5"
    )
    assert squeezed_half < classical_half
    log = _read(out, "log.txt").decode()
    assert "dose_over_classical" in log


def test_budget_is_deterministic(tmp_path):
    cfg = _write(tmp_path, BUDGET_YAML)
    out1, out2 = str(tmp_path / "a"), str(tmp_path / "b")
    assert main(["budget", "--config", cfg, "--out", out1]) == 0
    assert main(["budget", "--config", cfg, "--out", out2]) == 0
    assert _read(out1, "budget.csv") == _read(out2, "budget.csv")


# --- kurtosis-check ----------------------------------------------------------------

def test_kurtosis_check_outputs(tmp_path):
    cfg = _write(tmp_path, KURTOSIS_YAML)
    out = str(tmp_path / "out")
    assert main(["kurtosis-check", "--config", cfg, "--out", out]) == 0
    lines = _csv_lines(out, "kurtosis.csv")
    assert lines[0] == KURTOSIS_HEADER
    rows = [line.split(",") for line in lines[1:]]
    assert [r[0] for r in rows] == ["gaussian", "jitter", "jitter_mixture_analytic"]
    assert all(r[1] == "4000" for r in rows)
    k_clean, k_jitter, k_mix = (float(r[2]) for r in rows)
    assert abs(k_clean) < 0.5
    assert k_jitter > 0.0
    assert k_mix > 0.0


def test_kurtosis_check_samples_override(tmp_path):
    cfg = _write(tmp_path, KURTOSIS_YAML)
    out = str(tmp_path / "out")
    assert main(["kurtosis-check", "--config", cfg, "--out", out,
                 "--samples", "3000"]) == 0
    lines = _csv_lines(out, "kurtosis.csv")
    assert lines[1].split(",")[1] == "3000"
