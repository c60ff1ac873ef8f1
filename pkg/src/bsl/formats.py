"""Readers and writers for dictionary (BSL1), signal and observation files."""

from __future__ import annotations

import json
import logging
import re
from pathlib import Path
from typing import Union

import numpy as np

from .errors import ArgumentError
from .models import BlockedDictionary, BlockSparseVector

logger = logging.getLogger(__name__)

PathLike = Union[str, Path]

_HEADER = re.compile(r"^BSL1\s+L=(\d+)\s+M=(\d+)\s+d=(\d+)\s*$")


def write_dictionary(D: BlockedDictionary, path: PathLike):
    """Write D as a BSL1 header line followed by L rows of N floats (17 significant digits)."""
    header = f"BSL1 L={D.L} M={D.num_blocks} d={D.block_size}"
    np.savetxt(path, D.entries, fmt="%.17g", delimiter=" ", header=header, comments="")
    logger.debug("wrote %s to %s", header, path)


def read_dictionary(path: PathLike) -> BlockedDictionary:
    """Load a BSL1 file, rejecting headers that disagree with the data."""
    path = Path(path)
    try:
        with open(path) as f:
            header = f.readline().strip()
            match = _HEADER.match(header)
            data = np.loadtxt(f, dtype=float, ndmin=2) if match else None
    except OSError as e:
        raise ArgumentError(f"cannot read dictionary {path}: {e}")
    except ValueError as e:
        raise ArgumentError(f"{path}: malformed dictionary data: {e}")

    if not match:
        raise ArgumentError(f"{path}: not a BSL1 dictionary (header {header!r})")
    L, M, d = (int(g) for g in match.groups())
    if data.shape != (L, M * d):
        raise ArgumentError(
            f"{path}: header declares {L} x {M * d} entries but the file holds {data.shape[0]} x "
            f"{data.shape[1] if data.ndim == 2 else 0}"
        )
    return BlockedDictionary(data, d)


def _load_json(path: PathLike, kind: str) -> dict:
    try:
        with open(path) as f:
            data = json.load(f)
    except (json.JSONDecodeError, OSError) as e:
        raise ArgumentError(f"failed to load {kind} file {path}: {e}")
    if not isinstance(data, dict):
        raise ArgumentError(f"{kind} file {path} must hold a JSON object")
    return data


def _dump_json(data: dict, path: PathLike):
    with open(path, "w") as f:
        json.dump(data, f, indent=2)
        f.write("\n")


def write_signal(x: BlockSparseVector, path: PathLike):
    """Signal JSON, with the 1-based block support for readers' convenience."""
    _dump_json(
        {
            "d": x.block_size,
            "values": [float(v) for v in x.values],
            "support": [i + 1 for i in x.support],
        },
        path,
    )


def read_signal(path: PathLike) -> BlockSparseVector:
    data = _load_json(path, "signal")
    try:
        return BlockSparseVector(np.asarray(data["values"], dtype=float), int(data["d"]))
    except (KeyError, TypeError, ValueError) as e:
        raise ArgumentError(f"invalid signal file {path}: {e}")


def write_observation(y, path: PathLike):
    y = np.asarray(y, dtype=float).reshape(-1)
    _dump_json({"L": int(y.size), "values": [float(v) for v in y]}, path)


def read_observation(path: PathLike) -> np.ndarray:
    data = _load_json(path, "observation")
    try:
        values = np.asarray(data["values"], dtype=float).reshape(-1)
        L = int(data.get("L", values.size))
    except (KeyError, TypeError, ValueError) as e:
        raise ArgumentError(f"invalid observation file {path}: {e}")
    if values.size != L:
        raise ArgumentError(f"observation file {path} declares L={L} but holds {values.size} values")
    return values
