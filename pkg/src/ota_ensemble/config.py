"""Flat key=value experiment config files.

One setting per line, ``key = value``, '#' starts a comment. The sweep axes
(method, epsilon, snr_db, participation_p) and seeds take comma-separated
lists; everything else is scalar. ``epsilon`` accepts the literal ``inf``.

Dataset source is either::

    dataset_file = scores.txt

or the synthetic generator::

    synthetic_seed = 90210
    synthetic_skill = 2.5          # scalar, or one value per client
    synthetic_logit_noise = 1.0
    num_samples = 2222
    num_classes = 10
    class_balance = uniform        # or one probability per class

Remaining keys and defaults: delta=1e-5, snr_db=10, participation_p=1,
power_scale=1, fading_scale=1/sqrt(2), extra_participation_prob=1,
orth_full_noise=true, count_abstained_as_error=false,
validation_fraction=0.1. ``method``, ``epsilon``, ``seeds``,
``num_clients`` and a dataset source are required.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from pathlib import Path

from .errors import ConfigError
from .harness import (
    METHODS,
    RAYLEIGH_UNIT_SCALE,
    DatasetSource,
    ExperimentConfig,
    FileSource,
    SyntheticSource,
)
from .providers import SyntheticModelSpec

_KNOWN_KEYS = {
    "method",
    "epsilon",
    "delta",
    "snr_db",
    "participation_p",
    "num_clients",
    "power_scale",
    "seeds",
    "fading_scale",
    "extra_participation_prob",
    "orth_full_noise",
    "count_abstained_as_error",
    "validation_fraction",
    "dataset_file",
    "synthetic_seed",
    "synthetic_skill",
    "synthetic_logit_noise",
    "num_samples",
    "num_classes",
    "class_balance",
}


@dataclass(frozen=True)
class SweepGrid:
    """A Cartesian grid of sweep cells sharing one dataset and scalar knobs."""

    methods: tuple[str, ...]
    epsilons: tuple[float, ...]
    snr_dbs: tuple[float, ...]
    participation_ps: tuple[float, ...]
    seeds: tuple[int, ...]
    num_clients: int
    dataset: DatasetSource
    delta: float = 1e-5
    power_scale: float = 1.0
    fading_scale: float = RAYLEIGH_UNIT_SCALE
    extra_participation_prob: float = 1.0
    orth_full_noise: bool = True
    count_abstained_as_error: bool = False

    def expand(self) -> list[ExperimentConfig]:
        """Cells in fixed axis order: method, epsilon, snr_db, p."""
        cells = []
        for method, eps, snr, p in itertools.product(
            self.methods, self.epsilons, self.snr_dbs, self.participation_ps
        ):
            cells.append(
                ExperimentConfig(
                    method=method,
                    epsilon=eps,
                    snr_db=snr,
                    participation_p=p,
                    num_clients=self.num_clients,
                    seeds=self.seeds,
                    dataset=self.dataset,
                    delta=self.delta,
                    power_scale=self.power_scale,
                    fading_scale=self.fading_scale,
                    extra_participation_prob=self.extra_participation_prob,
                    orth_full_noise=self.orth_full_noise,
                    count_abstained_as_error=self.count_abstained_as_error,
                )
            )
        return cells


def parse_config_text(text: str, origin: str = "<config>") -> dict[str, str]:
    """Parse key = value lines into a dict; rejects unknown or repeated keys."""
    values: dict[str, str] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{origin}:{lineno}: expected 'key = value', got {raw!r}")
        key, _, value = line.partition("=")
        key, value = key.strip(), value.strip()
        if key not in _KNOWN_KEYS:
            raise ConfigError(f"{origin}:{lineno}: unknown key {key!r}")
        if key in values:
            raise ConfigError(f"{origin}:{lineno}: duplicate key {key!r}")
        if not value:
            raise ConfigError(f"{origin}:{lineno}: empty value for {key!r}")
        values[key] = value
    return values


def _float(values: dict[str, str], key: str, default: float | None = None) -> float:
    if key not in values:
        if default is None:
            raise ConfigError(f"missing required key {key!r}")
        return default
    try:
        return float(values[key])
    except ValueError as exc:
        raise ConfigError(f"key {key!r}: {exc}") from exc


def _int(values: dict[str, str], key: str, default: int | None = None) -> int:
    if key not in values:
        if default is None:
            raise ConfigError(f"missing required key {key!r}")
        return default
    try:
        return int(values[key])
    except ValueError as exc:
        raise ConfigError(f"key {key!r}: {exc}") from exc


def _bool(values: dict[str, str], key: str, default: bool) -> bool:
    if key not in values:
        return default
    text = values[key].lower()
    if text in ("true", "1", "yes"):
        return True
    if text in ("false", "0", "no"):
        return False
    raise ConfigError(f"key {key!r}: expected true/false, got {values[key]!r}")


def _float_list(values: dict[str, str], key: str, default=None) -> tuple[float, ...]:
    if key not in values:
        if default is None:
            raise ConfigError(f"missing required key {key!r}")
        return default
    try:
        return tuple(float(v.strip()) for v in values[key].split(","))
    except ValueError as exc:
        raise ConfigError(f"key {key!r}: {exc}") from exc


def _dataset_source(values: dict[str, str], num_clients: int) -> DatasetSource:
    validation_fraction = _float(values, "validation_fraction", 0.1)
    has_file = "dataset_file" in values
    synthetic_keys = {"synthetic_seed", "synthetic_skill", "synthetic_logit_noise"}
    has_synth = bool(synthetic_keys & values.keys())
    if has_file and has_synth:
        raise ConfigError("give either dataset_file or synthetic_* keys, not both")
    if has_file:
        return FileSource(values["dataset_file"], validation_fraction)
    if not has_synth:
        raise ConfigError("no dataset source: need dataset_file or synthetic_* keys")
    skill = _float_list(values, "synthetic_skill")
    if len(skill) == 1:
        skill = skill * num_clients
    if len(skill) != num_clients:
        raise ConfigError(
            f"synthetic_skill has {len(skill)} values for {num_clients} clients"
        )
    num_classes = _int(values, "num_classes")
    balance: tuple[float, ...] | None
    if values.get("class_balance", "uniform").lower() == "uniform":
        balance = None
    else:
        balance = _float_list(values, "class_balance")
        if len(balance) != num_classes:
            raise ConfigError(
                f"class_balance has {len(balance)} entries for {num_classes} classes"
            )
    spec = SyntheticModelSpec(
        per_client_skill=skill,
        logit_noise_std=_float(values, "synthetic_logit_noise"),
        rng_seed=_int(values, "synthetic_seed"),
    )
    return SyntheticSource(
        spec=spec,
        num_samples=_int(values, "num_samples"),
        num_classes=num_classes,
        class_balance=balance,
        validation_fraction=validation_fraction,
    )


def build_sweep_grid(values: dict[str, str]) -> SweepGrid:
    """Turn parsed config values into a validated sweep grid."""
    if "method" not in values:
        raise ConfigError("missing required key 'method'")
    methods = tuple(v.strip() for v in values["method"].split(","))
    for method in methods:
        if method not in METHODS:
            raise ConfigError(f"unknown method {method!r}; expected one of {METHODS}")
    num_clients = _int(values, "num_clients")
    seeds_raw = values.get("seeds")
    if seeds_raw is None:
        raise ConfigError("missing required key 'seeds'")
    try:
        seeds = tuple(int(v.strip()) for v in seeds_raw.split(","))
    except ValueError as exc:
        raise ConfigError(f"key 'seeds': {exc}") from exc
    try:
        return SweepGrid(
            methods=methods,
            epsilons=_float_list(values, "epsilon"),
            snr_dbs=_float_list(values, "snr_db", (10.0,)),
            participation_ps=_float_list(values, "participation_p", (1.0,)),
            seeds=seeds,
            num_clients=num_clients,
            dataset=_dataset_source(values, num_clients),
            delta=_float(values, "delta", 1e-5),
            power_scale=_float(values, "power_scale", 1.0),
            fading_scale=_float(values, "fading_scale", RAYLEIGH_UNIT_SCALE),
            extra_participation_prob=_float(values, "extra_participation_prob", 1.0),
            orth_full_noise=_bool(values, "orth_full_noise", True),
            count_abstained_as_error=_bool(values, "count_abstained_as_error", False),
        )
    except ConfigError:
        raise
    except ValueError as exc:  # field validation from downstream dataclasses
        raise ConfigError(str(exc)) from exc


def load_sweep_grid(path) -> SweepGrid:
    """Read and validate a sweep config file."""
    text = Path(path).read_text()
    return build_sweep_grid(parse_config_text(text, origin=str(path)))


def load_single_cell(path) -> ExperimentConfig:
    """Read a config that must describe exactly one cell (no sweep axes)."""
    grid = load_sweep_grid(path)
    cells = grid.expand()
    if len(cells) != 1:
        raise ConfigError(
            f"{path}: expected a single cell but the config expands to {len(cells)}"
        )
    return cells[0]


def load_synthetic_source(path) -> SyntheticSource:
    """Read a generator spec (synthetic_* keys plus num_clients) for gen-data."""
    values = parse_config_text(Path(path).read_text(), origin=str(path))
    source = _dataset_source(values, _int(values, "num_clients"))
    if not isinstance(source, SyntheticSource):
        raise ConfigError(f"{path}: gen-data needs a synthetic dataset spec")
    return source
