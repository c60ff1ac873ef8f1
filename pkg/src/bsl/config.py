"""Run configuration: JSON config files, embedded presets and the value parsers they share with the CLI."""

from __future__ import annotations

import json
import logging
import re
from importlib import resources
from pathlib import Path
from typing import Any, Iterable, Mapping, Union

from .errors import ArgumentError
from .models import Algorithm, ProbabilityForm, SignalProfile, SweepConfig, TableRow, parse_choice

logger = logging.getLogger(__name__)

PRESETS = ("table1", "fig1", "fig1_small", "fig2", "fig2_small")

_ROW_METRICS = {"mu": "mu", "mu_b": "mu_block", "mu_block": "mu_block", "nu": "nu"}

# Keys of a sweep configuration, named after the sweep command's options.
SWEEP_KEYS = frozenset({
    "L", "M", "d", "k", "s", "xmin", "xmax", "sigma2", "profile", "trials", "signals",
    "algo", "seed", "confidence", "form",
})
# Keys that only steer a run (workers, output paths, logging).
RUN_KEYS = frozenset({"threads", "out", "plot", "verbose"})


def load_config(path: Union[str, Path]) -> dict[str, Any]:
    """Read a JSON object of parameter values."""
    try:
        with open(path) as f:
            data = json.load(f)
    except (json.JSONDecodeError, OSError) as e:
        raise ArgumentError(f"failed to load config {path}: {e}")
    if not isinstance(data, dict):
        raise ArgumentError(f"config {path} must hold a JSON object")
    return data


def load_preset(name: str) -> dict[str, Any]:
    """Read one of the presets shipped with the package."""
    if name not in PRESETS:
        raise ArgumentError(f"unknown preset '{name}'. Valid: {', '.join(PRESETS)}")
    text = resources.files("bsl").joinpath("presets").joinpath(f"{name}.json").read_text()
    logger.debug("loaded preset %s", name)
    return json.loads(text)


def check_keys(mapping: Mapping[str, Any], allowed: Iterable[str], source: str):
    """Reject configuration keys that name no parameter of the command."""
    unknown = sorted(set(mapping) - set(allowed))
    if unknown:
        raise ArgumentError(f"{source}: unknown key(s) {', '.join(unknown)}")


def parse_table_row(value) -> TableRow:
    """A table row from a mapping or from 'M,d,L,k[,mu=..,mu_B=..,nu=..]'."""
    if isinstance(value, TableRow):
        return value
    if isinstance(value, Mapping):
        fields = {_ROW_METRICS.get(key.lower(), key): v for key, v in value.items()}
        try:
            return TableRow(**fields)
        except TypeError as e:
            raise ArgumentError(f"invalid table row {dict(value)}: {e}")

    parts = [p.strip() for p in str(value).split(",") if p.strip()]
    if len(parts) < 4:
        raise ArgumentError(f"table row must be 'M,d,L,k[,mu=..,mu_B=..,nu=..]', got '{value}'")
    metrics = {}
    for part in parts[4:]:
        key, _, number = part.partition("=")
        if key.strip().lower() not in _ROW_METRICS:
            raise ArgumentError(f"unknown table row metric '{key}' in '{value}'")
        metrics[_ROW_METRICS[key.strip().lower()]] = number
    try:
        M, d, L, k = (int(p) for p in parts[:4])
        metrics = {name: float(number) for name, number in metrics.items()}
    except ValueError:
        raise ArgumentError(f"table row must be 'M,d,L,k[,mu=..,mu_B=..,nu=..]', got '{value}'")
    return TableRow(L=L, M=M, d=d, k=k, **metrics)


def parse_row_selection(spec: str, count: int) -> list[int]:
    """0-based indices from a 1-based selection such as '1-5' or '1,3,6-8'."""
    selected: list[int] = []
    for part in spec.split(","):
        part = part.strip()
        match = re.fullmatch(r"(\d+)(?:-(\d+))?", part)
        if not match:
            raise ArgumentError(f"row selection must look like '1-5' or '1,3', got '{spec}'")
        first = int(match.group(1))
        last = int(match.group(2) or first)
        if not 1 <= first <= last <= count:
            raise ArgumentError(f"row range '{part}' is outside 1..{count}")
        selected.extend(i for i in range(first - 1, last) if i not in selected)
    return selected


def parse_index_list(value: str, what: str = "support") -> list[int]:
    """0-based indices from a 1-based comma list such as '1,4,7'."""
    try:
        indices = [int(p) for p in value.replace(" ", "").split(",") if p]
    except ValueError:
        raise ArgumentError(f"{what} must be a comma-separated list of 1-based indices, got '{value}'")
    if not indices or min(indices) < 1:
        raise ArgumentError(f"{what} must list 1-based indices, got '{value}'")
    return [i - 1 for i in indices]


def parse_dims(value: str) -> tuple[int, int, int]:
    """(L, M, d) from 'L,M,d'."""
    try:
        L, M, d = (int(p) for p in value.split(","))
    except ValueError:
        raise ArgumentError(f"dimensions must be given as 'L,M,d', got '{value}'")
    return L, M, d


def sweep_config_from_mapping(mapping: Mapping[str, Any]) -> SweepConfig:
    """SweepConfig from sweep-command keys; run-only keys are accepted and ignored."""
    check_keys(mapping, SWEEP_KEYS | RUN_KEYS, "sweep config")
    missing = sorted({"L", "M", "d", "k", "xmin", "xmax", "sigma2"} - set(mapping))
    if missing:
        raise ArgumentError(f"sweep config is missing {', '.join(missing)}")

    profiles = [parse_choice(SignalProfile, p) for p in mapping.get("profile") or []]
    algorithms = [parse_choice(Algorithm, a) for a in mapping.get("algo") or []]
    try:
        config = SweepConfig(
            L=int(mapping["L"]),
            M=int(mapping["M"]),
            d=int(mapping["d"]),
            k=int(mapping["k"]),
            s=int(mapping.get("s") or mapping["k"]),
            xmin_norm=float(mapping["xmin"]),
            xmax_norm=float(mapping["xmax"]),
            sigma2_grid=[float(v) for v in mapping["sigma2"]],
            trials_per_cell=int(mapping.get("trials", 20)),
            num_signals=int(mapping.get("signals", 12)),
            master_seed=int(mapping.get("seed", 0)),
            guarantee_confidence=float(mapping.get("confidence", 0.5)),
            probability_form=parse_choice(ProbabilityForm, mapping.get("form", "lemma5")),
        )
    except (TypeError, ValueError) as e:
        raise ArgumentError(f"invalid sweep config: {e}")
    if profiles:
        config.profiles = profiles
    if algorithms:
        config.algorithms = algorithms
    config.validate()
    return config
