"""Monte Carlo harness: error-versus-noise sweeps and guarantee tables.

Every random draw is keyed off the master seed, so a sweep's output depends
only on its configuration, never on the worker count or scheduling order.
"""

from __future__ import annotations

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .bounds import crb, gaussian_guarantee
from .coherence import block_coherence, coherence, coherence_profile, sub_coherence
from .dictgen import Stream, derive_seed, generate_dictionary, generate_signal, measure, stream_rng
from .errors import ArgumentError
from .estimators import run_algorithm, support_recovered
from .models import (
    Algorithm,
    BlockedDictionary,
    BlockSparseVector,
    CoherenceProfile,
    NoiseModel,
    NoiseSpec,
    ProbabilityForm,
    SignalSpec,
    SweepConfig,
    SweepRecord,
    TableRecord,
    TableRow,
)

logger = logging.getLogger(__name__)


def median_squared_error(errors: Sequence[float]) -> float:
    """Median of the squared errors; mean of the two central values for even counts."""
    values = np.asarray(list(errors), dtype=float)
    if values.size == 0:
        raise ArgumentError("median of an empty error list is undefined")
    return float(np.median(values))


def sweep_dictionary(config: SweepConfig) -> BlockedDictionary:
    """The dictionary a sweep runs on, drawn once from the master seed."""
    return generate_dictionary(
        config.L, config.M, config.d, derive_seed(config.master_seed, Stream.DICTIONARY)
    )


def sweep_signals(config: SweepConfig) -> list[BlockSparseVector]:
    """Ground-truth signals of a sweep; signal i uses profile i mod len(profiles)."""
    signals = []
    for i in range(config.num_signals):
        spec = SignalSpec(
            M=config.M,
            d=config.d,
            s=config.s,
            xmin_norm=config.xmin_norm,
            xmax_norm=config.xmax_norm,
            profile=config.profiles[i % len(config.profiles)],
            seed=derive_seed(config.master_seed, Stream.SIGNALS, i),
        )
        signals.append(generate_signal(spec))
    return signals


@dataclass
class _CellResult:
    signal: int
    sigma2_index: int
    medians: dict[Algorithm, float]
    rates: dict[Algorithm, float]
    extremes: dict[Algorithm, tuple[float, float]]


def _run_cell(
    config: SweepConfig,
    D: BlockedDictionary,
    x: BlockSparseVector,
    signal: int,
    sigma2_index: int,
) -> _CellResult:
    sigma = math.sqrt(config.sigma2_grid[sigma2_index])
    errors: dict[Algorithm, list[float]] = {a: [] for a in config.algorithms}
    hits: dict[Algorithm, int] = {a: 0 for a in config.algorithms}

    for trial in range(config.trials_per_cell):
        noise = NoiseSpec(
            model=NoiseModel.GAUSSIAN,
            sigma=sigma,
            seed=derive_seed(config.master_seed, Stream.NOISE, signal, sigma2_index, trial),
        )
        y = measure(D, x, noise)
        for algorithm in config.algorithms:
            result = run_algorithm(algorithm, D, y, config.k, support=x.support)
            errors[algorithm].append(float(np.sum((result.estimate.values - x.values) ** 2)))
            hits[algorithm] += support_recovered(result, x)

    medians = {a: median_squared_error(errors[a]) for a in config.algorithms}
    rates = {a: hits[a] / config.trials_per_cell for a in config.algorithms}
    extremes = {a: (min(errors[a]), max(errors[a])) for a in config.algorithms}
    logger.info(
        "cell signal=%d sigma2=%.6g: %s",
        signal + 1,
        config.sigma2_grid[sigma2_index],
        " ".join(f"{a.value}={medians[a]:.4g}" for a in config.algorithms),
    )
    return _CellResult(signal, sigma2_index, medians, rates, extremes)


def mc_sweep(
    config: SweepConfig,
    threads: Optional[int] = None,
    dictionary: Optional[BlockedDictionary] = None,
) -> list[SweepRecord]:
    """Median squared error per (algorithm, sigma^2) cell over seeded noise realizations.

    Records come out ordered by algorithm (as configured) then by sigma^2;
    each holds one median, CRB value and recovery rate per signal.
    All algorithms see the same noise realizations.
    """
    config.validate()
    D = dictionary if dictionary is not None else sweep_dictionary(config)
    if (D.L, D.num_blocks, D.block_size) != (config.L, config.M, config.d):
        raise ArgumentError("dictionary dimensions do not match the sweep configuration")

    signals = sweep_signals(config)
    traces = [crb(D, x.support, 1.0).trace for x in signals]
    cells = [(i, j) for i in range(len(signals)) for j in range(len(config.sigma2_grid))]
    logger.debug("sweep: %d signals x %d noise levels, %d trials per cell",
                 len(signals), len(config.sigma2_grid), config.trials_per_cell)

    with ThreadPoolExecutor(max_workers=threads) as pool:
        results = list(pool.map(lambda cell: _run_cell(config, D, signals[cell[0]], *cell), cells))

    by_cell = {(r.signal, r.sigma2_index): r for r in results}
    records = []
    for algorithm in config.algorithms:
        for j, sigma2 in enumerate(config.sigma2_grid):
            cell_results = [by_cell[(i, j)] for i in range(len(signals))]
            records.append(SweepRecord(
                algorithm=algorithm,
                sigma2=float(sigma2),
                medians=[r.medians[algorithm] for r in cell_results],
                crb_values=[sigma2 * trace for trace in traces],
                support_rates=[r.rates[algorithm] for r in cell_results],
                trial_min=[r.extremes[algorithm][0] for r in cell_results],
                trial_max=[r.extremes[algorithm][1] for r in cell_results],
            ))
    return records


def guarantee_curve(
    config: SweepConfig,
    profile: CoherenceProfile,
    algorithm: Algorithm,
) -> list[Optional[float]]:
    """Gaussian error guarantee at each grid point, None where the condition fails."""
    curve = []
    for sigma2 in config.sigma2_grid:
        report = gaussian_guarantee(
            profile,
            config.k,
            config.xmin_norm,
            config.xmax_norm,
            math.sqrt(sigma2),
            config.guarantee_confidence,
            algorithm,
            config.probability_form,
        )
        curve.append(report.error_bound)
    return curve


def _row_profile(row: TableRow, D: BlockedDictionary) -> CoherenceProfile:
    return CoherenceProfile(
        mu=row.mu if row.mu is not None else coherence(D),
        mu_block=row.mu_block if row.mu_block is not None else block_coherence(D),
        nu=row.nu if row.nu is not None else sub_coherence(D),
        d=row.d,
        M=row.M,
        L=row.L,
    )


def guarantee_table(
    rows: Sequence[TableRow],
    confidence: float = 0.99,
    form=ProbabilityForm.LEMMA5,
    seed: int = 0,
    xmin: float = 1.0,
    threads: Optional[int] = None,
) -> list[TableRecord]:
    """OMP and BOMP Gaussian guarantees plus the CRB for each row.

    Blocks carry norm xmin with a flat shape, so the OMP columns see a
    k*d-sparse scalar signal whose smallest entry is xmin/sqrt(d).
    Guarantees are reported per sigma^2; a None entry means the condition
    fails even as sigma -> 0. The CRB is evaluated on one uniformly drawn
    size-k support of a dictionary generated from seed.
    """
    for row in rows:
        if min(row.L, row.M, row.d, row.k) < 1 or row.k > row.M or row.k * row.d > row.L:
            raise ArgumentError(f"infeasible table row L={row.L}, M={row.M}, d={row.d}, k={row.k}")

    dictionaries: dict[tuple[int, int, int], BlockedDictionary] = {}
    for row in rows:
        key = (row.L, row.M, row.d)
        if key not in dictionaries:
            dictionaries[key] = generate_dictionary(row.L, row.M, row.d, seed)

    def evaluate(indexed: tuple[int, TableRow]) -> TableRecord:
        index, row = indexed
        D = dictionaries[(row.L, row.M, row.d)]
        profile = _row_profile(row, D)

        bomp = gaussian_guarantee(profile, row.k, xmin, xmin, 0.0, confidence, Algorithm.BOMP, form)
        scalar_min = xmin / math.sqrt(row.d)
        omp = gaussian_guarantee(
            profile.as_scalar(), row.k * row.d, scalar_min, scalar_min, 0.0, confidence, Algorithm.OMP, form
        )

        rng = stream_rng(seed, Stream.SAMPLING, index)
        support = tuple(int(i) for i in np.sort(rng.choice(row.M, size=row.k, replace=False)))
        record = TableRecord(
            row=row,
            profile=profile,
            omp_guarantee=omp.error_bound_per_sigma2,
            omp_sigma_max=omp.sigma_max,
            bomp_guarantee=bomp.error_bound_per_sigma2,
            bomp_sigma_max=bomp.sigma_max,
            crb=crb(D, support, 1.0).trace,
            support=support,
        )
        logger.info("row M=%d d=%d L=%d k=%d: bomp=%s crb=%.4g",
                    row.M, row.d, row.L, row.k,
                    "---" if record.bomp_guarantee is None else f"{record.bomp_guarantee:.4g}",
                    record.crb)
        return record

    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(evaluate, enumerate(rows)))


def sweep_profile(D: BlockedDictionary) -> CoherenceProfile:
    """Block metrics used for a sweep's guarantee overlay."""
    return coherence_profile(D, include_mu=False)
