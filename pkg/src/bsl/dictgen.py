"""Seeded generation of dictionaries, block-sparse signals and noisy measurements.

Every random draw comes from a Philox generator keyed by (seed, stream), so
the dictionary, support, block shapes and noise use independent streams:
changing one never shifts the others.
"""

from __future__ import annotations

import logging
from enum import IntEnum

import numpy as np

from .errors import ArgumentError, SingularityError
from .models import (
    BlockedDictionary,
    BlockSparseVector,
    NoiseModel,
    NoiseSpec,
    SignalProfile,
    SignalSpec,
)

logger = logging.getLogger(__name__)

# A block whose Gram-Schmidt residual shrinks below this fraction of the raw column is redrawn.
RANK_TOLERANCE = 1e-10
MAX_BLOCK_RETRIES = 3


class Stream(IntEnum):
    """Substream identifiers."""

    DICTIONARY = 0
    SUPPORT = 1
    SHAPES = 2
    NOISE = 3
    SAMPLING = 4
    SIGNALS = 5


def _seed_sequence(seed: int, keys) -> np.random.SeedSequence:
    seed = int(seed)
    if seed < 0:
        raise ArgumentError(f"seeds must be nonnegative 64-bit integers, got {seed}")
    return np.random.SeedSequence(entropy=seed, spawn_key=tuple(int(k) for k in keys))


def stream_rng(seed: int, *keys: int) -> np.random.Generator:
    """Counter-based generator for the substream (seed, *keys)."""
    return np.random.Generator(np.random.Philox(_seed_sequence(seed, keys)))


def derive_seed(seed: int, *keys: int) -> int:
    """A 64-bit seed hashed from (seed, *keys), for per-cell and per-trial seeding."""
    return int(_seed_sequence(seed, keys).generate_state(1, dtype=np.uint64)[0])


def _orthonormalize_blocks(raw: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Modified Gram-Schmidt with one re-orthogonalization pass, on every block at once.

    raw has shape L x B x d (B blocks of d columns). Returns the orthonormal
    blocks and a flag per block marking numerical rank deficiency.
    """
    Q = np.array(raw, dtype=float)
    d = Q.shape[2]
    deficient = np.zeros(Q.shape[1], dtype=bool)
    for j in range(d):
        v = Q[:, :, j]
        original = np.linalg.norm(v, axis=0)
        for _ in range(2):
            for i in range(j):
                q = Q[:, :, i]
                v -= np.sum(q * v, axis=0) * q
        norm = np.linalg.norm(v, axis=0)
        tiny = norm <= RANK_TOLERANCE * original
        deficient |= tiny
        Q[:, :, j] = v / np.where(tiny, 1.0, norm)
    return Q, deficient


def generate_dictionary(L: int, M: int, d: int, seed: int) -> BlockedDictionary:
    """I.i.d. Gaussian L x Md matrix with every block orthonormalized separately."""
    if min(L, M, d) < 1:
        raise ArgumentError(f"dimensions must be positive, got L={L}, M={M}, d={d}")
    if d > L:
        raise ArgumentError(f"block size d={d} exceeds L={L}; blocks cannot be orthonormal")

    rng = stream_rng(seed, Stream.DICTIONARY)
    raw = rng.standard_normal((L, M * d)).reshape(L, M, d)
    Q, deficient = _orthonormalize_blocks(raw)

    for attempt in range(MAX_BLOCK_RETRIES):
        if not deficient.any():
            break
        bad = np.flatnonzero(deficient)
        logger.debug("regenerating %d rank-deficient block(s), attempt %d", bad.size, attempt + 1)
        Q[:, bad, :], still_bad = _orthonormalize_blocks(rng.standard_normal((L, bad.size, d)))
        deficient[:] = False
        deficient[bad] = still_bad
    if deficient.any():
        raise SingularityError(
            f"could not draw full-rank blocks after {MAX_BLOCK_RETRIES} retries "
            f"(first failing block {int(np.flatnonzero(deficient)[0]) + 1})"
        )

    return BlockedDictionary(Q.reshape(L, M * d), d)


def _unit_block(profile: SignalProfile, d: int, rng: np.random.Generator) -> np.ndarray:
    if profile is SignalProfile.MIXED:
        profile = SignalProfile.SPIKE if rng.random() < 0.5 else SignalProfile.FLAT

    if profile is SignalProfile.SPIKE:
        shape = np.zeros(d)
        shape[rng.integers(d)] = 1.0
        return shape
    if profile is SignalProfile.FLAT:
        return np.full(d, 1.0 / np.sqrt(d))

    direction = rng.standard_normal(d)
    while not np.any(direction):
        direction = rng.standard_normal(d)
    return direction / np.linalg.norm(direction)


def generate_signal(spec: SignalSpec) -> BlockSparseVector:
    """Block-sparse vector with s nonzero blocks whose norms span [xmin_norm, xmax_norm].

    One block carries xmin_norm, one carries xmax_norm and the rest are
    uniform in between; which block gets which norm is random.
    """
    spec.validate()
    support_rng = stream_rng(spec.seed, Stream.SUPPORT)
    shape_rng = stream_rng(spec.seed, Stream.SHAPES)

    support = np.sort(support_rng.choice(spec.M, size=spec.s, replace=False))
    if spec.s == 1:
        norms = np.array([spec.xmin_norm])
    else:
        middle = shape_rng.uniform(spec.xmin_norm, spec.xmax_norm, spec.s - 2)
        norms = shape_rng.permutation(np.concatenate([[spec.xmin_norm, spec.xmax_norm], middle]))

    values = np.zeros((spec.M, spec.d))
    for block, norm in zip(support, norms):
        values[block] = norm * _unit_block(spec.profile, spec.d, shape_rng)
    return BlockSparseVector(values.reshape(-1), spec.d)


def draw_noise(L: int, noise: NoiseSpec) -> np.ndarray:
    """A noise vector w of length L under the given model."""
    noise.validate()
    rng = stream_rng(noise.seed, Stream.NOISE)
    if noise.model is NoiseModel.GAUSSIAN:
        return noise.sigma * rng.standard_normal(L)
    direction = rng.standard_normal(L)
    return noise.epsilon * direction / np.linalg.norm(direction)


def measure(D: BlockedDictionary, x: BlockSparseVector, noise: NoiseSpec) -> np.ndarray:
    """y = D x + w."""
    if x.N != D.N:
        raise ArgumentError(f"signal length {x.N} does not match dictionary width N = {D.N}")
    clean = D.entries @ x.values
    if noise.magnitude == 0:
        return clean
    return clean + draw_noise(D.L, noise)
