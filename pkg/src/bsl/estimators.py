"""Greedy block-sparse recovery (BTH, BOMP), their scalar forms, the oracle and exhaustive ML."""

from __future__ import annotations

import itertools
import logging
import math
from typing import Iterable, Optional

import numpy as np

from .errors import ArgumentError, SingularityError, format_blocks
from .linalg import block_correlations, restricted_least_squares
from .models import Algorithm, BlockedDictionary, BlockSparseVector, EstimateResult

logger = logging.getLogger(__name__)

# Largest number of candidate supports exhaustive_ml will enumerate.
ML_SUPPORT_LIMIT = 10**6


def _check_problem(D: BlockedDictionary, y, k: int) -> np.ndarray:
    y = np.asarray(y, dtype=float).reshape(-1)
    if y.size != D.L:
        raise ArgumentError(f"measurement length {y.size} does not match L = {D.L}")
    if not 1 <= k <= D.num_blocks:
        raise ArgumentError(f"k={k} must lie in [1, M={D.num_blocks}]")
    if k * D.block_size > D.L:
        raise ArgumentError(f"k*d = {k * D.block_size} exceeds L = {D.L}")
    return y


def _result(
    algorithm: Algorithm,
    D: BlockedDictionary,
    y: np.ndarray,
    estimate: BlockSparseVector,
    selected: Iterable[int],
    iterations: int,
) -> EstimateResult:
    residual = float(np.linalg.norm(y - D.entries @ estimate.values))
    return EstimateResult(
        algorithm=algorithm,
        estimate=estimate,
        selected_support=tuple(int(i) for i in selected),
        residual_norm=residual,
        iterations=iterations,
    )


def bth(D: BlockedDictionary, y, k: int) -> EstimateResult:
    """Block thresholding: keep the k blocks most correlated with y, then refit.

    Ties in correlation go to the lowest block index.
    """
    y = _check_problem(D, y, k)
    rho = block_correlations(D, y)
    selected = np.argsort(-rho, kind="stable")[:k]
    estimate = restricted_least_squares(D, selected, y)
    logger.debug("bth selected %s", format_blocks(selected))
    return _result(Algorithm.BTH, D, y, estimate, selected, iterations=1)


def bomp(D: BlockedDictionary, y, k: int) -> EstimateResult:
    """Block OMP: k rounds of correlate, select a new block, refit on all selected blocks.

    A block is never selected twice; ties go to the lowest block index.
    """
    y = _check_problem(D, y, k)
    available = np.ones(D.num_blocks, dtype=bool)
    selected: list[int] = []
    residual = y
    estimate = BlockSparseVector.zeros(D.num_blocks, D.block_size)

    for _ in range(k):
        rho = block_correlations(D, residual)
        rho[~available] = -np.inf
        i = int(np.argmax(rho))
        selected.append(i)
        available[i] = False
        estimate = restricted_least_squares(D, selected, y)
        residual = y - D.entries @ estimate.values

    logger.debug("bomp selected %s in order", format_blocks(selected))
    return _result(Algorithm.BOMP, D, y, estimate, selected, iterations=k)


def _as_block_result(result: EstimateResult, D: BlockedDictionary, algorithm: Algorithm) -> EstimateResult:
    result.algorithm = algorithm
    result.estimate = BlockSparseVector(result.estimate.values, D.block_size)
    return result


def omp(D: BlockedDictionary, y, k: int) -> EstimateResult:
    """Scalar OMP with sparsity k*d on the d = 1 view of D.

    selected_support holds atom indices.
    """
    return _as_block_result(bomp(D.as_scalar(), y, k * D.block_size), D, Algorithm.OMP)


def thresholding(D: BlockedDictionary, y, k: int) -> EstimateResult:
    """Scalar thresholding with sparsity k*d on the d = 1 view of D."""
    return _as_block_result(bth(D.as_scalar(), y, k * D.block_size), D, Algorithm.THR)


def oracle(D: BlockedDictionary, y, support: Iterable[int]) -> EstimateResult:
    """Least squares on the true support S, zero elsewhere."""
    support = sorted(int(i) for i in support)
    y = np.asarray(y, dtype=float).reshape(-1)
    if y.size != D.L:
        raise ArgumentError(f"measurement length {y.size} does not match L = {D.L}")
    estimate = restricted_least_squares(D, support, y)
    return _result(Algorithm.ORACLE, D, y, estimate, support, iterations=1)


def exhaustive_ml(D: BlockedDictionary, y, k: int) -> EstimateResult:
    """Maximum likelihood by enumerating every size-k support. Test scale only.

    Among equal residuals the lexicographically smallest support wins;
    rank-deficient supports are skipped.
    """
    y = _check_problem(D, y, k)
    count = math.comb(D.num_blocks, k)
    if count > ML_SUPPORT_LIMIT:
        raise ArgumentError(
            f"exhaustive ML would enumerate C({D.num_blocks}, {k}) = {count} supports "
            f"(limit {ML_SUPPORT_LIMIT}); use it only on test-scale problems"
        )

    best: Optional[tuple[float, tuple[int, ...], BlockSparseVector]] = None
    for support in itertools.combinations(range(D.num_blocks), k):
        try:
            estimate = restricted_least_squares(D, support, y)
        except SingularityError:
            logger.debug("skipping rank-deficient support %s", format_blocks(support))
            continue
        residual = float(np.linalg.norm(y - D.entries @ estimate.values))
        if best is None or residual < best[0]:
            best = (residual, support, estimate)

    if best is None:
        raise SingularityError(f"every size-{k} support is rank deficient")
    return _result(Algorithm.ML, D, y, best[2], best[1], iterations=count)


def run_algorithm(
    algorithm: Algorithm,
    D: BlockedDictionary,
    y,
    k: int,
    support: Optional[Iterable[int]] = None,
) -> EstimateResult:
    """Dispatch by algorithm name. The oracle needs the true support."""
    if algorithm is Algorithm.BTH:
        return bth(D, y, k)
    if algorithm is Algorithm.BOMP:
        return bomp(D, y, k)
    if algorithm is Algorithm.OMP:
        return omp(D, y, k)
    if algorithm is Algorithm.THR:
        return thresholding(D, y, k)
    if algorithm is Algorithm.ML:
        return exhaustive_ml(D, y, k)
    if support is None:
        raise ArgumentError("the oracle estimator needs the true support")
    return oracle(D, y, support)


def support_recovered(result: EstimateResult, x: BlockSparseVector) -> bool:
    """Whether the selection contains the true support (atoms for scalar algorithms)."""
    truth = x.atom_support if result.algorithm.is_scalar else x.support
    return set(truth) <= set(result.selected_support)
