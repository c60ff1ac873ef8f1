"""Coherence metrics and Gram-matrix bound checks."""

from __future__ import annotations

import logging
from typing import Optional

import numpy as np
from scipy import linalg as sla

from .dictgen import Stream, stream_rng
from .errors import ArgumentError
from .linalg import block_columns, restricted_gram_inverse, spectral_norm
from .models import BlockedDictionary, CoherenceProfile, GramBoundReport

logger = logging.getLogger(__name__)

# Number of Gram-matrix rows formed per pass.
GRAM_CHUNK = 1024


def coherence(D: BlockedDictionary) -> float:
    """mu: largest |<d_i, d_j>| over distinct atoms."""
    A = D.entries
    N = D.N
    if N < 2:
        raise ArgumentError("coherence needs at least two atoms")

    worst = 0.0
    for start in range(0, N, GRAM_CHUNK):
        stop = min(start + GRAM_CHUNK, N)
        G = np.abs(A[:, start:stop].T @ A)
        G[np.arange(stop - start), np.arange(start, stop)] = 0.0
        worst = max(worst, float(G.max()))
    return worst


def block_coherence(D: BlockedDictionary) -> float:
    """mu_B: largest (1/d)||D[i]^T D[j]|| over distinct blocks."""
    A = D.entries
    M, d = D.num_blocks, D.block_size
    if M < 2:
        raise ArgumentError("block coherence needs at least two blocks")

    rows = max(1, GRAM_CHUNK // d)
    worst = 0.0
    for start in range(0, M, rows):
        stop = min(start + rows, M)
        G = (A[:, start * d:stop * d].T @ A).reshape(stop - start, d, M, d)
        if d == 1:
            norms = np.abs(G[:, 0, :, 0])
        else:
            norms = np.linalg.norm(G.transpose(0, 2, 1, 3), ord=2, axis=(-2, -1))
        norms[np.arange(stop - start), np.arange(start, stop)] = 0.0
        worst = max(worst, float(norms.max()))
    return worst / d


def sub_coherence(D: BlockedDictionary) -> float:
    """nu: largest |<d_i, d_j>| over distinct atoms of the same block (0 when d = 1)."""
    d = D.block_size
    if d == 1:
        return 0.0
    blocks = D.entries.reshape(D.L, D.num_blocks, d)
    G = np.einsum("lmi,lmj->mij", blocks, blocks)
    G[:, np.arange(d), np.arange(d)] = 0.0
    return float(np.abs(G).max())


def coherence_profile(D: BlockedDictionary, include_mu: bool = True) -> CoherenceProfile:
    """All three metrics of D. Skipping mu saves the full N x N Gram pass."""
    mu = coherence(D) if include_mu and D.N >= 2 else None
    mu_block = block_coherence(D) if D.num_blocks >= 2 else 0.0
    profile = CoherenceProfile(
        mu=mu,
        mu_block=mu_block,
        nu=sub_coherence(D),
        d=D.block_size,
        M=D.num_blocks,
        L=D.L,
    )
    logger.debug("coherence profile: %s", profile)
    return profile


def gram_bound_report(
    D: BlockedDictionary,
    k: int,
    trials: int,
    seed: int,
    profile: Optional[CoherenceProfile] = None,
) -> GramBoundReport:
    """Check the Gram-matrix norm bounds on randomly sampled block sets with |I| <= k.

    Four bounds are checked: ||D[i]^T D[j]|| <= d mu_B, ||D[i]^T D[i]|| <=
    1 + (d-1)nu, ||(D[i]^T D[i])^{-1}|| <= 1/(1 - (d-1)nu) and
    ||(D_I^T D_I)^{-1}|| <= 1/(1 - (d-1)nu - (k-1)d mu_B). The report holds
    the smallest observed slack for each; a bound whose denominator is not
    positive is listed as inapplicable instead.
    """
    M, d = D.num_blocks, D.block_size
    if not 1 <= k <= M or k * d > D.L:
        raise ArgumentError(f"need 1 <= k <= M and k*d <= L, got k={k}, d={d}, L={D.L}, M={M}")
    if trials < 1:
        raise ArgumentError("trials must be at least 1")
    if profile is None:
        profile = coherence_profile(D, include_mu=False)

    within = 1.0 - (d - 1) * profile.nu
    across = within - (k - 1) * d * profile.mu_block
    bounds = {
        "cross": d * profile.mu_block,
        "self": 1.0 + (d - 1) * profile.nu,
        "inverse_self": 1.0 / within if within > 0 else None,
        "inverse_set": 1.0 / across if across > 0 else None,
    }
    inapplicable = [name for name, bound in bounds.items() if bound is None]
    slacks: dict[str, Optional[float]] = {name: None for name in bounds}

    def observe(name: str, norm: float):
        slack = bounds[name] - norm
        if slacks[name] is None or slack < slacks[name]:
            slacks[name] = slack

    rng = stream_rng(seed, Stream.SAMPLING)
    for _ in range(trials):
        size = int(rng.integers(1, k + 1))
        I = np.sort(rng.choice(M, size=size, replace=False))
        columns = [block_columns(D, int(i)) for i in I]
        for a, Di in enumerate(columns):
            gram = Di.T @ Di
            observe("self", spectral_norm(gram))
            if bounds["inverse_self"] is not None:
                observe("inverse_self", spectral_norm(sla.inv(gram)))
            for Dj in columns[a + 1:]:
                observe("cross", spectral_norm(Di.T @ Dj))
        if bounds["inverse_set"] is not None:
            observe("inverse_set", spectral_norm(restricted_gram_inverse(D, I)))

    report = GramBoundReport(k=k, trials=trials, slacks=slacks, inapplicable=inapplicable)
    logger.debug("gram bound slacks: %s (inapplicable: %s)", slacks, inapplicable)
    return report
