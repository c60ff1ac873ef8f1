"""JSON records, CSV writers, the SVG sweep plot and stderr summaries."""

from __future__ import annotations

import csv
import json
import math
import sys
from typing import IO, Optional, Sequence

import numpy as np

from .models import (
    Algorithm,
    CoherenceProfile,
    CrbResult,
    EstimateResult,
    GramBoundReport,
    GuaranteeReport,
    SweepRecord,
    TableRecord,
)

SWEEP_COLUMNS = ["algo", "signal_id", "sigma2", "median_sq_err", "min_sq_err", "max_sq_err", "crb", "support_rate"]
TABLE_COLUMNS = [
    "M", "d", "L", "k", "mu", "mu_B",
    "omp_guarantee", "omp_sigma_max", "bomp_guarantee", "bomp_sigma_max", "crb",
]
DASH = "---"


def _number(value: Optional[float]) -> Optional[float]:
    """JSON-safe float: non-finite values become null."""
    if value is None:
        return None
    value = float(value)
    return value if math.isfinite(value) else None


def _fmt(value: Optional[float]) -> str:
    return DASH if value is None else f"{value:.6g}"


def estimate_record(result: EstimateResult, k: int) -> dict:
    return {
        "algorithm": result.algorithm.value,
        "block_size": result.estimate.block_size,
        "k": k,
        "values": [float(v) for v in result.estimate.values],
        "selected_support": [i + 1 for i in result.selected_support],
        "residual_norm": _number(result.residual_norm),
        "iterations": result.iterations,
    }


def guarantee_record(report: GuaranteeReport, diagnostic: bool = False) -> dict:
    entry = {
        "algorithm": report.algorithm.value,
        "noise_model": report.noise_model.value,
        "condition_holds": report.condition_holds,
        "condition_margin": _number(report.condition_margin),
        "error_bound": _number(report.error_bound),
        "alpha": _number(report.alpha),
        "failure_probability_bound": _number(report.failure_probability_bound),
        "sigma_max": _number(report.sigma_max),
        "error_bound_per_sigma2": _number(report.error_bound_per_sigma2),
        "failure_probability_raw": _number(report.failure_probability_raw),
    }
    if diagnostic:
        entry["sigma_max_alternate"] = _number(report.sigma_max_alternate)
    return entry


def coherence_record(profile: CoherenceProfile, gram: Optional[GramBoundReport] = None) -> dict:
    entry = {
        "mu": _number(profile.mu),
        "mu_block": _number(profile.mu_block),
        "nu": _number(profile.nu),
        "L": profile.L,
        "M": profile.M,
        "d": profile.d,
    }
    if gram is not None:
        entry["gram_bounds"] = {
            "k": gram.k,
            "trials": gram.trials,
            "slacks": {name: _number(v) for name, v in gram.slacks.items()},
            "inapplicable": list(gram.inapplicable),
            "all_hold": gram.all_hold(),
        }
    return entry


def crb_record(result: CrbResult, sigma2: float) -> dict:
    return {
        "support": [i + 1 for i in result.support],
        "sigma2": sigma2,
        "trace": _number(result.trace),
        "unbiased_estimable": result.unbiased_estimable,
        "bound": _number(result.bound),
    }


def write_json(record: dict, stream: IO[str]):
    """One JSON document; floats keep their shortest round-trip repr."""
    stream.write(json.dumps(record, indent=2) + "\n")


def write_sweep_csv(records: Sequence[SweepRecord], stream: IO[str]):
    """One row per (algorithm, signal, sigma^2); signal ids are 1-based."""
    writer = csv.writer(stream, lineterminator="\n")
    writer.writerow(SWEEP_COLUMNS)
    for record in records:
        for i, median in enumerate(record.medians):
            writer.writerow([
                record.algorithm.value,
                i + 1,
                _fmt(record.sigma2),
                _fmt(median),
                _fmt(record.trial_min[i] if record.trial_min else None),
                _fmt(record.trial_max[i] if record.trial_max else None),
                _fmt(record.crb_values[i]),
                _fmt(record.support_rates[i]),
            ])


def write_table_csv(records: Sequence[TableRecord], stream: IO[str]):
    """Guarantee-table rows in the column order M, d, L, k, mu, mu_B, OMP, BOMP, CRB."""
    writer = csv.writer(stream, lineterminator="\n")
    writer.writerow(TABLE_COLUMNS)
    for record in records:
        row, profile = record.row, record.profile
        writer.writerow([
            row.M, row.d, row.L, row.k,
            _fmt(profile.mu),
            _fmt(profile.mu_block),
            _fmt(record.omp_guarantee),
            _fmt(record.omp_sigma_max),
            _fmt(record.bomp_guarantee),
            _fmt(record.bomp_sigma_max),
            _fmt(record.crb),
        ])


def plot_sweep(
    records: Sequence[SweepRecord],
    path,
    guarantees: Optional[dict[Algorithm, list[Optional[float]]]] = None,
):
    """Log-log SVG of median error versus sigma^2: one line per algorithm with its
    signal envelope shaded, the CRB dashed and any guarantee curves dotted.
    """
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    algorithms = list(dict.fromkeys(r.algorithm for r in records))
    with matplotlib.rc_context({"svg.hashsalt": "bsl", "svg.fonttype": "none"}):
        fig, ax = plt.subplots(figsize=(7, 5))
        crb_drawn = False
        for algorithm in algorithms:
            cells = [r for r in records if r.algorithm is algorithm and r.sigma2 > 0]
            if not cells:
                continue
            sigma2 = np.array([r.sigma2 for r in cells])
            line, = ax.plot(sigma2, [np.median(r.medians) for r in cells], label=algorithm.value.upper())
            ax.fill_between(
                sigma2,
                [r.envelope[0] for r in cells],
                [r.envelope[1] for r in cells],
                color=line.get_color(),
                alpha=0.2,
                linewidth=0,
            )
            if not crb_drawn:
                ax.plot(sigma2, [r.crb_value for r in cells], "k--", label="CRB")
                crb_drawn = True

        for algorithm, curve in (guarantees or {}).items():
            points = [
                (r.sigma2, bound)
                for r, bound in zip((r for r in records if r.algorithm is algorithm), curve)
                if bound is not None and r.sigma2 > 0
            ]
            if points:
                xs, ys = zip(*points)
                ax.plot(xs, ys, ":", label=f"{algorithm.value.upper()} guarantee")

        ax.set_xscale("log")
        ax.set_yscale("log")
        ax.set_xlabel("noise variance")
        ax.set_ylabel("median squared error")
        ax.legend()
        fig.savefig(path, format="svg", metadata={"Date": None})
        plt.close(fig)


def print_sweep_summary(records: Sequence[SweepRecord], stream: Optional[IO[str]] = None):
    """Per-algorithm recovery at the lowest and highest noise level."""
    stream = stream or sys.stderr
    print(file=stream)
    print("=" * 60, file=stream)
    print("bsl sweep summary", file=stream)
    print("=" * 60, file=stream)
    algorithms = list(dict.fromkeys(r.algorithm for r in records))
    for algorithm in algorithms:
        cells = [r for r in records if r.algorithm is algorithm]
        low, high = cells[0], cells[-1]
        print(
            f"  {algorithm.value:<7} sigma2 {low.sigma2:<9.3g} median {np.median(low.medians):<10.4g}"
            f" rate {low.support_recovery_rate:.2f}   |   sigma2 {high.sigma2:<9.3g}"
            f" rate {high.support_recovery_rate:.2f}",
            file=stream,
        )
    print("=" * 60, file=stream)


def print_table_summary(records: Sequence[TableRecord], stream: Optional[IO[str]] = None):
    stream = stream or sys.stderr
    satisfiable = sum(1 for r in records if r.bomp_guarantee is not None)
    print(file=stream)
    print("=" * 60, file=stream)
    print("bsl table summary", file=stream)
    print("=" * 60, file=stream)
    print(f"  Rows computed:            {len(records)}", file=stream)
    print(f"  BOMP condition satisfied: {satisfiable}", file=stream)
    print(f"  OMP condition satisfied:  {sum(1 for r in records if r.omp_guarantee is not None)}", file=stream)
    print("=" * 60, file=stream)
