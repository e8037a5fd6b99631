"""Configuration files for the command-line runner.

One YAML document drives a whole run so results are reproducible from
the file alone. The schema is strict: a `schema_version` field is
required and unknown keys anywhere are errors, so typos fail fast
instead of silently running a different experiment.

Exactly one of the section keys `experiment`, `sweep`, `budget`,
`kurtosis` must be present, matching the subcommand it is passed to.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import yaml

from .estimator import ClassicalConfig
from .homodyne import DetectionConfig, FixedPhase, JitterConfig, UniformScan
from .opo import OpoParams, output_state, params_from_design
from .states import StvState, from_photon_numbers

SCHEMA_VERSION = 1

SECTION_KEYS = ("experiment", "sweep", "budget", "kurtosis")


class ConfigError(ValueError):
    """Invalid or unusable run configuration (CLI exit code 2)."""


def _require_mapping(node, path):
    if not isinstance(node, dict):
        raise ConfigError(f"{path}: expected a mapping")
    return node


def _check_keys(node, path, required, optional=()):
    unknown = set(node) - set(required) - set(optional)
    if unknown:
        raise ConfigError(f"{path}: unknown keys {sorted(unknown)}")
    missing = set(required) - set(node)
    if missing:
        raise ConfigError(f"{path}: missing keys {sorted(missing)}")


def _number(node, path, minimum=None, maximum=None, strict_min=False):
    if isinstance(node, bool) or not isinstance(node, (int, float)):
        raise ConfigError(f"{path}: expected a number")
    value = float(node)
    if not math.isfinite(value):
        raise ConfigError(f"{path}: must be finite")
    if minimum is not None:
        if strict_min and value <= minimum:
            raise ConfigError(f"{path}: must be > {minimum}")
        if not strict_min and value < minimum:
            raise ConfigError(f"{path}: must be >= {minimum}")
    if maximum is not None and value > maximum:
        raise ConfigError(f"{path}: must be <= {maximum}")
    return value


def _integer(node, path, minimum=None):
    if isinstance(node, bool) or not isinstance(node, int):
        raise ConfigError(f"{path}: expected an integer")
    if minimum is not None and node < minimum:
        raise ConfigError(f"{path}: must be >= {minimum}")
    return node


def _number_list(node, path, minimum=None, maximum=None, nonempty=True):
    if not isinstance(node, list):
        raise ConfigError(f"{path}: expected a list of numbers")
    if nonempty and not node:
        raise ConfigError(f"{path}: must not be empty")
    return [
        _number(v, f"{path}[{i}]", minimum=minimum, maximum=maximum)
        for i, v in enumerate(node)
    ]


def _parse_source(node, path) -> StvState:
    node = _require_mapping(node, path)
    _check_keys(node, path, required=(), optional=("state", "opo"))
    if ("state" in node) == ("opo" in node):
        raise ConfigError(f"{path}: give exactly one of 'state' or 'opo'")
    if "state" in node:
        st = _require_mapping(node["state"], f"{path}.state")
        _check_keys(st, f"{path}.state", required=("n_th", "n_sq"))
        return from_photon_numbers(
            _number(st["n_th"], f"{path}.state.n_th", minimum=0.0),
            _number(st["n_sq"], f"{path}.state.n_sq", minimum=0.0),
        )
    op = _require_mapping(node["opo"], f"{path}.opo")
    try:
        if "kappa1_over_kappa" in op or "e" in op:
            _check_keys(
                op,
                f"{path}.opo",
                required=("kappa1_over_kappa", "e"),
                optional=("psi", "omega"),
            )
            params = params_from_design(
                _number(op["kappa1_over_kappa"], f"{path}.opo.kappa1_over_kappa", 0.0, 1.0),
                _number(op["e"], f"{path}.opo.e", minimum=0.0),
                psi=_number(op.get("psi", 0.0), f"{path}.opo.psi"),
                omega=_number(op.get("omega", 0.0), f"{path}.opo.omega"),
            )
        else:
            _check_keys(
                op,
                f"{path}.opo",
                required=("kappa1", "kappa2", "gamma"),
                optional=("psi", "omega"),
            )
            params = OpoParams(
                kappa1=_number(op["kappa1"], f"{path}.opo.kappa1", minimum=0.0),
                kappa2=_number(op["kappa2"], f"{path}.opo.kappa2", minimum=0.0),
                gamma=_number(op["gamma"], f"{path}.opo.gamma"),
                psi=_number(op.get("psi", 0.0), f"{path}.opo.psi"),
                omega=_number(op.get("omega", 0.0), f"{path}.opo.omega"),
            )
        return output_state(params)
    except ValueError as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(f"{path}.opo: {exc}") from exc


def _parse_phase_strategy(node, path):
    node = _require_mapping(node, path)
    kind = node.get("kind")
    if kind == "fixed":
        _check_keys(node, path, required=("kind", "phi"))
        return FixedPhase(_number(node["phi"], f"{path}.phi"))
    if kind == "uniform_scan":
        _check_keys(node, path, required=("kind",), optional=("iid",))
        iid = node.get("iid", False)
        if not isinstance(iid, bool):
            raise ConfigError(f"{path}.iid: expected a boolean")
        return UniformScan(iid=iid)
    raise ConfigError(f"{path}.kind: must be 'fixed' or 'uniform_scan'")


def _parse_detection(node, path, seed: int) -> DetectionConfig:
    node = _require_mapping(node, path)
    _check_keys(
        node,
        path,
        required=("eta", "n_samples", "tau_s", "phase_strategy"),
        optional=("electronic_noise_db",),
    )
    noise = node.get("electronic_noise_db")
    if noise is not None:
        noise = _number(noise, f"{path}.electronic_noise_db", minimum=0.0, strict_min=True)
    try:
        return DetectionConfig(
            eta=_number(node["eta"], f"{path}.eta", minimum=0.0, maximum=1.0, strict_min=True),
            n_samples=_integer(node["n_samples"], f"{path}.n_samples", minimum=1),
            tau_s=_number(node["tau_s"], f"{path}.tau_s", minimum=0.0, strict_min=True),
            phase_strategy=_parse_phase_strategy(node["phase_strategy"], f"{path}.phase_strategy"),
            electronic_noise_db=noise,
            seed=seed,
        )
    except ValueError as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(f"{path}: {exc}") from exc


@dataclass(frozen=True)
class ExperimentConfig:
    source: StvState
    detection: DetectionConfig
    t_values: list[float]
    repetitions: int
    seed: int
    output_dir: str | None


@dataclass(frozen=True)
class SweepConfig:
    kappa1_over_kappa: list[float]
    e: list[float]
    psi: list[float]
    omega: list[float]
    seed: int
    output_dir: str | None


@dataclass(frozen=True)
class BudgetConfig:
    t_values: list[float]
    target_rel_error: float
    kappa_tau_s: float
    sources: list[tuple[str, StvState]]  # (label, state)
    classical: ClassicalConfig
    seed: int
    output_dir: str | None


@dataclass(frozen=True)
class KurtosisConfig:
    source: StvState
    detection: DetectionConfig
    jitter: JitterConfig
    seed: int
    output_dir: str | None


def _parse_experiment(node, path, seed, output_dir) -> ExperimentConfig:
    node = _require_mapping(node, path)
    _check_keys(node, path, required=("source", "detection", "t_values", "repetitions"))
    t_values = _number_list(node["t_values"], f"{path}.t_values", minimum=0.0, maximum=1.0)
    return ExperimentConfig(
        source=_parse_source(node["source"], f"{path}.source"),
        detection=_parse_detection(node["detection"], f"{path}.detection", seed),
        t_values=t_values,
        repetitions=_integer(node["repetitions"], f"{path}.repetitions", minimum=1),
        seed=seed,
        output_dir=output_dir,
    )


def _parse_sweep(node, path, seed, output_dir) -> SweepConfig:
    node = _require_mapping(node, path)
    _check_keys(node, path, required=("kappa1_over_kappa", "e"), optional=("psi", "omega"))
    return SweepConfig(
        kappa1_over_kappa=_number_list(
            node["kappa1_over_kappa"], f"{path}.kappa1_over_kappa", minimum=0.0, maximum=1.0
        ),
        e=_number_list(node["e"], f"{path}.e", minimum=0.0),
        psi=_number_list(node.get("psi", [0.0]), f"{path}.psi"),
        omega=_number_list(node.get("omega", [0.0]), f"{path}.omega"),
        seed=seed,
        output_dir=output_dir,
    )


def _parse_classical(node, path) -> ClassicalConfig:
    node = _require_mapping(node, path)
    _check_keys(
        node,
        path,
        required=("nep", "bandwidth_b", "omega0", "n_samples", "tau_s"),
        optional=("snr",),
    )
    try:
        return ClassicalConfig(
            nep=_number(node["nep"], f"{path}.nep", minimum=0.0, strict_min=True),
            bandwidth_b=_number(node["bandwidth_b"], f"{path}.bandwidth_b", 0.0, strict_min=True),
            omega0=_number(node["omega0"], f"{path}.omega0", minimum=0.0, strict_min=True),
            snr=_number(node.get("snr", 1.0), f"{path}.snr", minimum=0.0, strict_min=True),
            n_samples=_integer(node["n_samples"], f"{path}.n_samples", minimum=1),
            tau_s=_number(node["tau_s"], f"{path}.tau_s", minimum=0.0, strict_min=True),
        )
    except ValueError as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(f"{path}: {exc}") from exc


def _parse_budget(node, path, seed, output_dir) -> BudgetConfig:
    node = _require_mapping(node, path)
    _check_keys(
        node,
        path,
        required=("t_values", "target_rel_error", "kappa_tau_s", "source", "classical"),
    )
    src_node = node["source"]
    sources: list[tuple[str, StvState]] = []
    if isinstance(src_node, list):
        if not src_node:
            raise ConfigError(f"{path}.source: must not be empty")
        for i, item in enumerate(src_node):
            state = _parse_source(item, f"{path}.source[{i}]")
            sources.append((_source_label(item, len(src_node) > 1), state))
    else:
        sources.append((_source_label(src_node, False), _parse_source(src_node, f"{path}.source")))
    return BudgetConfig(
        t_values=_number_list(
            node["t_values"], f"{path}.t_values", minimum=0.0, maximum=1.0
        ),
        target_rel_error=_number(
            node["target_rel_error"], f"{path}.target_rel_error", 0.0, strict_min=True
        ),
        kappa_tau_s=_number(node["kappa_tau_s"], f"{path}.kappa_tau_s", 0.0, strict_min=True),
        sources=sources,
        classical=_parse_classical(node["classical"], f"{path}.classical"),
        seed=seed,
        output_dir=output_dir,
    )


def _source_label(node, multi: bool) -> str:
    if not multi:
        return "squeezed"
    if isinstance(node, dict) and "opo" in node and isinstance(node["opo"], dict):
        op = node["opo"]
        bits = [f"{k}={op[k]}" for k in ("kappa1_over_kappa", "e", "psi", "omega") if k in op]
        if bits:
            return "squeezed:" + ",".join(bits)
    if isinstance(node, dict) and "state" in node and isinstance(node["state"], dict):
        st = node["state"]
        bits = [f"{k}={st[k]}" for k in ("n_th", "n_sq") if k in st]
        if bits:
            return "squeezed:" + ",".join(bits)
    return "squeezed"


def _parse_kurtosis(node, path, seed, output_dir) -> KurtosisConfig:
    node = _require_mapping(node, path)
    _check_keys(
        node, path, required=("source", "detection", "gain_jitter_rel", "block_size")
    )
    try:
        jitter = JitterConfig(
            gain_jitter_rel=_number(node["gain_jitter_rel"], f"{path}.gain_jitter_rel", 0.0),
            block_size=_integer(node["block_size"], f"{path}.block_size", minimum=1),
        )
    except ValueError as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(f"{path}: {exc}") from exc
    detection = _parse_detection(node["detection"], f"{path}.detection", seed)
    if not isinstance(detection.phase_strategy, FixedPhase):
        raise ConfigError(
            f"{path}.detection.phase_strategy: the mixture diagnostic is only "
            "defined at a fixed analysis phase"
        )
    return KurtosisConfig(
        source=_parse_source(node["source"], f"{path}.source"),
        detection=detection,
        jitter=jitter,
        seed=seed,
        output_dir=output_dir,
    )


_PARSERS = {
    "experiment": _parse_experiment,
    "sweep": _parse_sweep,
    "budget": _parse_budget,
    "kurtosis": _parse_kurtosis,
}


@dataclass(frozen=True)
class LoadedConfig:
    section: str
    parsed: object
    raw: dict = field(repr=False)


def load_config(path, section: str, seed_override=None, samples_override=None,
                out_override=None) -> LoadedConfig:
    """Parse and validate a config file for one subcommand.

    Overrides (from CLI flags) are applied to the raw tree before
    validation so the echoed config matches what actually ran.
    """
    try:
        with open(path) as fh:
            raw = yaml.safe_load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc}") from exc
    except yaml.YAMLError as exc:
        raise ConfigError(f"malformed YAML: {exc}") from exc
    raw = _require_mapping(raw, "config")
    _check_keys(
        raw,
        "config",
        required=("schema_version",),
        optional=SECTION_KEYS + ("seed", "output_dir"),
    )
    version = raw.get("schema_version")
    if version != SCHEMA_VERSION:
        raise ConfigError(
            f"config.schema_version: expected {SCHEMA_VERSION}, got {version!r}"
        )
    present = [key for key in SECTION_KEYS if key in raw]
    if len(present) != 1:
        raise ConfigError(
            f"config: exactly one of {list(SECTION_KEYS)} must be present, found {present}"
        )
    if present[0] != section:
        raise ConfigError(
            f"config: this subcommand needs a '{section}' section, found '{present[0]}'"
        )

    if seed_override is not None:
        raw["seed"] = seed_override
    if out_override is not None:
        raw["output_dir"] = str(out_override)
    if samples_override is not None:
        det = raw.get(section, {}).get("detection")
        if not isinstance(det, dict):
            raise ConfigError("--samples: this config has no detection block")
        det["n_samples"] = samples_override

    seed = raw.get("seed", 0)
    if isinstance(seed, bool) or not isinstance(seed, int) or seed < 0 or seed >= 2**64:
        raise ConfigError("config.seed: expected an unsigned 64-bit integer")
    output_dir = raw.get("output_dir")
    if output_dir is not None and not isinstance(output_dir, str):
        raise ConfigError("config.output_dir: expected a string path")

    parsed = _PARSERS[section](raw[section], f"config.{section}", seed, output_dir)
    return LoadedConfig(section=section, parsed=parsed, raw=raw)


def canonical_yaml(raw: dict) -> str:
    """Deterministic serialization of the (validated) raw config tree."""
    return yaml.safe_dump(raw, sort_keys=True, default_flow_style=False)
