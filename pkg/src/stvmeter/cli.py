"""Command-line runner.

Four subcommands, each driven by a YAML config (see docs/formats.md):

  opo-sweep       photon numbers over a cavity design grid -> sweep.csv
  experiment      synthetic transmittivity measurement -> estimates.csv,
                  summary.csv
  budget          accuracy / photon-dose comparison against the classical
                  coherent scheme -> budget.csv
  kurtosis-check  Gaussianity diagnostic under gain jitter -> kurtosis.csv

Every run echoes its effective config (after CLI overrides) to
config_echo.yaml and writes a timestamp-free log.txt, so two runs with
the same config and seed produce byte-identical output trees.

Exit codes: 0 success, 1 runtime failure, 2 unusable config or usage.
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import hashlib
import math
import os
import sys
from concurrent.futures import ThreadPoolExecutor

import numpy as np

from . import estimator, kernels
from .config import (
    BudgetConfig,
    ConfigError,
    ExperimentConfig,
    KurtosisConfig,
    LoadedConfig,
    SweepConfig,
    canonical_yaml,
    load_config,
)
from .estimator import UnmeasurableError
from .homodyne import (
    inject_jitter,
    kurtosis,
    mixture_kurtosis,
    sample,
    save_samples_csv,
)
from .opo import SweepRow, params_from_design, sweep, write_sweep_csv
from .states import (
    VACUUM_VARIANCE,
    apply_loss,
    linearization_coefficients,
    quadrature_variance,
)
from .tomography import estimate_state, write_estimates_csv

# Refuse to dump raw samples past this many stored values (theta + x per
# sample); the guard keeps --keep-samples from filling the disk.
SAMPLE_DUMP_GUARD = 20_000_000

SUMMARY_CSV_HEADER = ["channel", "a", "b", "a_err", "b_err", "n_points"]
BUDGET_CSV_HEADER = ["scheme", "T", "rel_error", "N", "N_ph"]
KURTOSIS_CSV_HEADER = ["case", "n", "kurtosis"]

# Ratios against an upstream photon number below this carry no
# information (typically a clamped estimate pinned at zero).
RATIO_FLOOR = 1e-6


def _resolve_out(cfg) -> str:
    if cfg.output_dir is None:
        raise ConfigError("no output directory: set output_dir or pass --out")
    os.makedirs(cfg.output_dir, exist_ok=True)
    return cfg.output_dir


def _write_echo_and_log(out_dir: str, loaded: LoadedConfig, log_lines) -> None:
    echo = canonical_yaml(loaded.raw)
    with open(os.path.join(out_dir, "config_echo.yaml"), "w") as fh:
        fh.write(echo)
    digest = hashlib.sha256(echo.encode()).hexdigest()
    header = [
        f"command {loaded.section}",
        f"backend {kernels.BACKEND}",
        f"config_echo sha256 {digest}",
    ]
    with open(os.path.join(out_dir, "log.txt"), "w") as fh:
        for line in header + list(log_lines):
            fh.write(line + "\n")


def _cell_seed(run_seed: int, t_index: int, rep: int) -> int:
    ss = np.random.SeedSequence(run_seed, spawn_key=(t_index, rep))
    return int(ss.generate_state(2, dtype=np.uint64)[0])


def _run_experiment(loaded: LoadedConfig, workers: int, keep_samples: bool) -> int:
    cfg: ExperimentConfig = loaded.parsed
    out_dir = _resolve_out(cfg)
    n_cells = cfg.repetitions * (1 + len(cfg.t_values))
    if keep_samples:
        stored = 2 * cfg.detection.n_samples * n_cells
        if stored > SAMPLE_DUMP_GUARD:
            raise ConfigError(
                f"--keep-samples would store {stored} values "
                f"(guard: {SAMPLE_DUMP_GUARD}); lower n_samples or the grid"
            )

    # Cell (t_index, rep): t_index 0 is the upstream reference, i >= 1 is
    # t_values[i-1]. Each cell gets an independent seed derived from the
    # run seed, so results do not depend on evaluation order.
    cells = []
    for rep in range(cfg.repetitions):
        cells.append((0, rep, None))
        for i, t in enumerate(cfg.t_values, start=1):
            cells.append((i, rep, t))

    def run_cell(cell):
        t_index, rep, t = cell
        det = dataclasses.replace(
            cfg.detection, seed=_cell_seed(cfg.seed, t_index, rep)
        )
        state = cfg.source if t is None else apply_loss(cfg.source, t)
        batch = sample(state, det)
        return estimate_state(batch, det.eta), batch

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            outputs = list(pool.map(run_cell, cells))
    else:
        outputs = [run_cell(cell) for cell in cells]
    results = {(t_index, rep): out for (t_index, rep, _), out in zip(cells, outputs)}

    log = [f"seed {cfg.seed}", f"cells {n_cells}"]
    rows = []
    channel_points = {"ntot_ratio": [], "nth_ratio": [], "nsq_ratio": []}

    def state_rows(label: str, rep: int, est) -> None:
        pre = f"t={label}/rep={rep}"
        rows.append((f"{pre}/var_x", est.state.var_x, est.var_x_err, est.n_used))
        rows.append((f"{pre}/var_y", est.state.var_y, est.var_y_err, est.n_used))
        rows.append((f"{pre}/n_th", est.n_th, est.n_th_err, est.n_used))
        rows.append((f"{pre}/n_sq", est.n_sq, est.n_sq_err, est.n_used))
        rows.append((f"{pre}/n_tot", est.n_tot, est.n_tot_err, est.n_used))
        log.append(
            f"cell t={label} rep={rep} n_used={est.n_used} "
            f"clamped={int(est.clamped)}"
        )

    def ratio(num, den, num_err, den_err):
        value = num / den
        return value, math.hypot(num_err, value * den_err) / den

    for rep in range(cfg.repetitions):
        up, up_batch = results[(0, rep)]
        state_rows("upstream", rep, up)
        if keep_samples:
            _dump_samples(out_dir, "upstream", rep, up_batch)

        coeffs = linearization_coefficients(up.n_th, up.n_sq)
        for channel, reason in sorted(coeffs.channel_errors.items()):
            log.append(f"skip rep={rep} channel={channel} reason={reason}")

        # analysis quadrature: whichever upstream principal variance sits
        # farther from vacuum (best conditioning for the variance route)
        use_x = abs(up.state.var_x - VACUUM_VARIANCE) >= abs(
            up.state.var_y - VACUUM_VARIANCE
        )
        phi = 0.0 if use_x else math.pi / 2.0

        for i, t in enumerate(cfg.t_values, start=1):
            down, down_batch = results[(i, rep)]
            label = repr(float(t))
            state_rows(label, rep, down)
            if keep_samples:
                _dump_samples(out_dir, label, rep, down_batch)
            pre = f"t={label}/rep={rep}"

            pairs = (
                ("ratio_ntot", "ntot_ratio", down.n_tot, up.n_tot,
                 down.n_tot_err, up.n_tot_err),
                ("ratio_nth", "nth_ratio", down.n_th, up.n_th,
                 down.n_th_err, up.n_th_err),
                ("ratio_nsq", "nsq_ratio", down.n_sq, up.n_sq,
                 down.n_sq_err, up.n_sq_err),
            )
            ratios = {}
            for name, channel, num, den, num_err, den_err in pairs:
                if den <= RATIO_FLOOR:
                    log.append(
                        f"skip t={label} rep={rep} quantity={name} "
                        f"reason=upstream value {den!r} too small"
                    )
                    continue
                value, err = ratio(num, den, num_err, den_err)
                rows.append((f"{pre}/{name}", value, err, down.n_used))
                channel_points[channel].append((t, value))
                ratios[name] = (value, err)

            if use_x:
                vt, v0 = down.state.var_x, up.state.var_x
                et, e0 = down.var_x_err, up.var_x_err
            else:
                vt, v0 = down.state.var_y, up.state.var_y
                et, e0 = down.var_y_err, up.var_y_err

            attempts = [
                ("t_hat_variance",
                 lambda: estimator.t_from_variances(vt, v0, et, e0)),
                ("t_hat_photon",
                 lambda: estimator.t_from_photon_numbers(
                     down.n_th, down.n_sq, up.n_th, up.n_sq, phi)),
            ]
            if "ratio_ntot" in ratios:
                attempts.append(
                    ("t_hat_ntot",
                     lambda: estimator.t_from_ntot(
                         down.n_tot, up.n_tot, down.n_tot_err, up.n_tot_err)))
            for name, channel_key, chan in (
                ("t_hat_nth", "ratio_nth", "th"),
                ("t_hat_nsq", "ratio_nsq", "sq"),
            ):
                if channel_key in ratios:
                    value, err = ratios[channel_key]
                    attempts.append(
                        (name,
                         lambda v=value, e=err, c=chan:
                             estimator.t_from_channel_ratio(v, coeffs, c, e)))
            for name, call in attempts:
                try:
                    est = call()
                except UnmeasurableError as exc:
                    log.append(
                        f"skip t={label} rep={rep} quantity={name} reason={exc}"
                    )
                    continue
                rows.append((f"{pre}/{name}", est.t_hat, est.std_error, down.n_used))

    write_estimates_csv(rows, os.path.join(out_dir, "estimates.csv"))

    with open(os.path.join(out_dir, "summary.csv"), "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(SUMMARY_CSV_HEADER)
        for channel in ("ntot_ratio", "nth_ratio", "nsq_ratio"):
            points = channel_points[channel]
            if len(points) < 3:
                log.append(
                    f"skip channel={channel} reason=only {len(points)} points"
                )
                continue
            try:
                fit = estimator.fit_linear(
                    [p[0] for p in points], [p[1] for p in points]
                )
            except ValueError as exc:
                log.append(f"skip channel={channel} reason={exc}")
                continue
            writer.writerow(
                [channel, repr(fit.a), repr(fit.b), repr(fit.a_err),
                 repr(fit.b_err), fit.n_points]
            )
            log.append(
                f"fit channel={channel} a={fit.a!r} b={fit.b!r} "
                f"n_points={fit.n_points}"
            )

    _write_echo_and_log(out_dir, loaded, log)
    return 0


def _dump_samples(out_dir: str, label: str, rep: int, batch) -> None:
    samples_dir = os.path.join(out_dir, "samples")
    os.makedirs(samples_dir, exist_ok=True)
    save_samples_csv(batch, os.path.join(samples_dir, f"t={label}_rep={rep}.csv"))


def _run_sweep(loaded: LoadedConfig) -> int:
    cfg: SweepConfig = loaded.parsed
    out_dir = _resolve_out(cfg)
    rows = []
    for e in cfg.e:
        for psi in cfg.psi:
            for omega in cfg.omega:
                for k1 in cfg.kappa1_over_kappa:
                    try:
                        params = params_from_design(k1, e, psi=psi, omega=omega)
                    except ValueError as exc:
                        rows.append(
                            SweepRow(k1, psi, e, omega, None, None, None, str(exc))
                        )
                        continue
                    rows.extend(sweep([params]))
    write_sweep_csv(rows, os.path.join(out_dir, "sweep.csv"))
    n_failed = sum(1 for r in rows if r.error is not None)
    log = [f"seed {cfg.seed}", f"rows {len(rows)}", f"failed {n_failed}"]
    log += [
        f"skip point kappa1_over_kappa={r.kappa1_over_kappa!r} psi={r.psi!r} "
        f"e={r.e!r} omega={r.omega!r} reason={r.error}"
        for r in rows
        if r.error is not None
    ]
    _write_echo_and_log(out_dir, loaded, log)
    return 0


def _run_budget(loaded: LoadedConfig) -> int:
    cfg: BudgetConfig = loaded.parsed
    out_dir = _resolve_out(cfg)
    log = [f"seed {cfg.seed}", f"target_rel_error {cfg.target_rel_error!r}"]
    out_rows = []

    classical_dose_by_t = {}
    for t in cfg.t_values:
        snr = estimator.limiting_snr(t, cfg.target_rel_error)
        ccfg = dataclasses.replace(cfg.classical, snr=snr)
        rel = estimator.classical_accuracy(ccfg, t)
        dose = estimator.classical_dose(ccfg)
        classical_dose_by_t[t] = dose
        out_rows.append(("classical", t, rel, ccfg.n_samples, dose))
        log.append(f"classical T={t!r} snr={snr!r} shot_term={ccfg.shot_term!r}")

    for label, state in cfg.sources:
        vx = quadrature_variance(state, 0.0)
        vy = quadrature_variance(state, math.pi / 2.0)
        v_best = vx if abs(vx - VACUUM_VARIANCE) >= abs(vy - VACUUM_VARIANCE) else vy
        for t in cfg.t_values:
            try:
                n_needed = math.ceil(
                    estimator.samples_for_target_accuracy(
                        v_best, t, cfg.target_rel_error
                    )
                )
                rel = estimator.squeezed_accuracy(v_best, t, n_needed)
            except UnmeasurableError as exc:
                log.append(f"skip scheme={label} T={t!r} reason={exc}")
                continue
            dose = estimator.squeezed_dose(state, n_needed, cfg.kappa_tau_s)
            out_rows.append((label, t, rel, n_needed, dose))
            log.append(
                f"ratio scheme={label} T={t!r} "
                f"dose_over_classical={dose / classical_dose_by_t[t]!r}"
            )

    # classical rows first, then per-source rows, each block in t order
    with open(os.path.join(out_dir, "budget.csv"), "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(BUDGET_CSV_HEADER)
        for scheme, t, rel, n, dose in out_rows:
            writer.writerow([scheme, repr(float(t)), repr(rel), int(n), repr(dose)])

    _write_echo_and_log(out_dir, loaded, log)
    return 0


def _run_kurtosis(loaded: LoadedConfig) -> int:
    cfg: KurtosisConfig = loaded.parsed
    out_dir = _resolve_out(cfg)
    det = cfg.detection  # carries the run seed from parsing

    clean = kurtosis(sample(cfg.source, det))
    jittered = kurtosis(inject_jitter(cfg.source, cfg.jitter, det))
    analytic = mixture_kurtosis(cfg.source, cfg.jitter, det)

    with open(os.path.join(out_dir, "kurtosis.csv"), "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(KURTOSIS_CSV_HEADER)
        n = det.n_samples
        writer.writerow(["gaussian", n, repr(clean)])
        writer.writerow(["jitter", n, repr(jittered)])
        writer.writerow(["jitter_mixture_analytic", n, repr(analytic)])

    log = [
        f"seed {cfg.seed}",
        f"gain_jitter_rel {cfg.jitter.gain_jitter_rel!r}",
        f"block_size {cfg.jitter.block_size}",
    ]
    _write_echo_and_log(out_dir, loaded, log)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="stvmeter",
        description="Simulate and budget transmittivity measurements "
        "with squeezed vacuum",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", required=True, help="YAML run configuration")
        p.add_argument("--seed", type=int, default=None,
                       help="override the config seed")
        p.add_argument("--out", default=None,
                       help="override the config output directory")

    p = sub.add_parser("opo-sweep", help="photon numbers over a cavity grid")
    common(p)
    p.set_defaults(section="sweep", runner=lambda loaded, args: _run_sweep(loaded))

    p = sub.add_parser("experiment", help="synthetic transmittivity measurement")
    common(p)
    p.add_argument("--samples", type=int, default=None,
                   help="override detection.n_samples")
    p.add_argument("--keep-samples", action="store_true",
                   help="also write raw quadrature samples (size-guarded)")
    p.add_argument("--workers", type=int, default=1,
                   help="thread pool size for measurement cells")
    p.set_defaults(
        section="experiment",
        runner=lambda loaded, args: _run_experiment(
            loaded, max(1, args.workers), args.keep_samples
        ),
    )

    p = sub.add_parser("budget", help="squeezed vs classical dose comparison")
    common(p)
    p.set_defaults(section="budget", runner=lambda loaded, args: _run_budget(loaded))

    p = sub.add_parser("kurtosis-check", help="Gaussianity diagnostic")
    common(p)
    p.add_argument("--samples", type=int, default=None,
                   help="override detection.n_samples")
    p.set_defaults(section="kurtosis",
                   runner=lambda loaded, args: _run_kurtosis(loaded))

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        loaded = load_config(
            args.config,
            args.section,
            seed_override=args.seed,
            samples_override=getattr(args, "samples", None),
            out_override=args.out,
        )
        return args.runner(loaded, args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:  # noqa: BLE001 - CLI boundary
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
