"""CLI entry point: generation, metrics, estimation, guarantees, CRB, sweeps and tables."""

from __future__ import annotations

import logging
import sys
from contextlib import contextmanager
from typing import Optional

import click

from .bounds import adversarial_guarantee, crb, gaussian_guarantee
from .coherence import coherence_profile, gram_bound_report
from .config import (
    PRESETS,
    check_keys,
    load_config,
    load_preset,
    parse_dims,
    parse_index_list,
    parse_row_selection,
    parse_table_row,
    sweep_config_from_mapping,
)
from .dictgen import generate_dictionary, generate_signal, measure
from .errors import ArgumentError, NumericalError
from .estimators import run_algorithm
from .experiments import guarantee_curve, guarantee_table, mc_sweep, sweep_dictionary, sweep_profile
from .formats import (
    read_dictionary,
    read_observation,
    read_signal,
    write_dictionary,
    write_observation,
    write_signal,
)
from .models import (
    Algorithm,
    CoherenceProfile,
    NoiseModel,
    NoiseSpec,
    ProbabilityForm,
    SignalProfile,
    SignalSpec,
    TableRow,
    parse_choice,
)
from .report import (
    coherence_record,
    crb_record,
    estimate_record,
    guarantee_record,
    plot_sweep,
    print_sweep_summary,
    print_table_summary,
    write_json,
    write_sweep_csv,
    write_table_csv,
)

logger = logging.getLogger(__name__)

ALGORITHMS = [a.value for a in Algorithm]
SWEEP_ALGORITHMS = [a.value for a in Algorithm if a is not Algorithm.ML]
PROFILES = [p.value for p in SignalProfile]
FORMS = [f.value for f in ProbabilityForm]
NOISES = ["gauss", "adv"]


class ArgumentFailure(click.ClickException):
    """Validation failure: one line on stderr, exit status 2."""

    exit_code = 2


class NumericalFailure(click.ClickException):
    """Numerical failure (singular subdictionary, unreachable confidence): exit status 1."""

    exit_code = 1


@contextmanager
def _failures(operation: str):
    try:
        yield
    except ArgumentError as e:
        raise ArgumentFailure(f"{operation}: {e}") from e
    except NumericalError as e:
        raise NumericalFailure(f"{operation}: {e}") from e
    except OSError as e:
        raise ArgumentFailure(f"{operation}: cannot write {e.filename}: {e.strerror}") from e


def _setup_logging(verbose: bool):
    level = logging.DEBUG if verbose else logging.INFO
    logging.basicConfig(
        level=level,
        format="%(levelname)s: %(message)s",
        stream=sys.stderr,
    )


class TableRowType(click.ParamType):
    """'M,d,L,k[,mu=..,mu_B=..,nu=..]' on the command line, or an object in a config file."""

    name = "row"

    def convert(self, value, param, ctx):
        try:
            return parse_table_row(value)
        except ArgumentError as e:
            self.fail(str(e), param, ctx)


def _merge_defaults(ctx: click.Context, mapping: dict, source: str):
    allowed = {p.name for p in ctx.command.params} - {"config", "preset"}
    try:
        check_keys(mapping, allowed, source)
    except ArgumentError as e:
        raise ArgumentFailure(str(e))
    ctx.default_map = {**(ctx.default_map or {}), **mapping}


def _config_callback(ctx, param, value):
    if value is not None:
        try:
            mapping = load_config(value)
        except ArgumentError as e:
            raise ArgumentFailure(str(e))
        _merge_defaults(ctx, mapping, str(value))
    return value


def _preset_callback(ctx, param, value):
    if value is not None:
        _merge_defaults(ctx, load_preset(value), f"preset {value}")
    return value


config_option = click.option(
    "--config", type=click.Path(exists=True, dir_okay=False), is_eager=True, expose_value=False,
    callback=_config_callback, help="JSON file of parameter values (flags override it)",
)
preset_option = click.option(
    "--preset", type=click.Choice(PRESETS), is_eager=True, expose_value=False,
    callback=_preset_callback, help="Embedded parameter preset",
)
verbose_option = click.option("--verbose", "-v", is_flag=True, help="Enable debug logging")
threads_option = click.option(
    "--threads", type=click.IntRange(min=1), default=None, envvar="BSL_THREADS",
    help="Worker threads for sweeps and tables (env: BSL_THREADS)",
)


def _emit_json(record: dict, out: Optional[str]):
    if out is None:
        write_json(record, sys.stdout)
        return
    with open(out, "w") as f:
        write_json(record, f)


@click.group()
@click.version_option(package_name="bsl")
def main():
    """bsl: block-sparse recovery, coherence metrics, guarantees and Monte Carlo benchmarks."""
    pass


@main.command("gen-dict")
@config_option
@click.option("--L", "L", type=int, required=True, help="Measurements (rows)")
@click.option("--M", "M", type=int, required=True, help="Number of blocks")
@click.option("--d", "d", type=int, required=True, help="Block size")
@click.option("--seed", type=int, default=0, help="Random seed")
@click.option("--out", required=True, type=click.Path(dir_okay=False), help="BSL1 output file")
@verbose_option
def gen_dict_cmd(L, M, d, seed, out, verbose):
    """Generate a Gaussian dictionary with orthonormalized blocks."""
    _setup_logging(verbose)
    with _failures("gen-dict"):
        D = generate_dictionary(L, M, d, seed)
        write_dictionary(D, out)
    click.echo(f"Dictionary written to: {out}", err=True)


@main.command("gen-signal")
@config_option
@click.option("--M", "M", type=int, required=True, help="Number of blocks")
@click.option("--d", "d", type=int, required=True, help="Block size")
@click.option("--s", "s", type=int, required=True, help="Number of nonzero blocks")
@click.option("--xmin", type=float, required=True, help="Smallest nonzero block norm")
@click.option("--xmax", type=float, default=None, help="Largest nonzero block norm (default: xmin)")
@click.option("--profile", type=click.Choice(PROFILES), default="flat", help="Within-block shape")
@click.option("--seed", type=int, default=0, help="Random seed")
@click.option("--out", required=True, type=click.Path(dir_okay=False), help="Signal JSON output file")
@verbose_option
def gen_signal_cmd(M, d, s, xmin, xmax, profile, seed, out, verbose):
    """Generate a block-sparse ground-truth signal."""
    _setup_logging(verbose)
    spec = SignalSpec(
        M=M, d=d, s=s, xmin_norm=xmin, xmax_norm=xmin if xmax is None else xmax,
        profile=SignalProfile(profile), seed=seed,
    )
    with _failures("gen-signal"):
        x = generate_signal(spec)
        write_signal(x, out)
    click.echo(f"Signal written to: {out}", err=True)


@main.command("measure")
@config_option
@click.option("--dict", "dict_path", required=True, type=click.Path(exists=True, dir_okay=False),
              help="BSL1 dictionary file")
@click.option("--signal", "signal_path", required=True, type=click.Path(exists=True, dir_okay=False),
              help="Signal JSON file")
@click.option("--noise", type=click.Choice(NOISES), default="gauss", help="Noise model")
@click.option("--sigma", type=float, default=0.0, help="Gaussian noise standard deviation")
@click.option("--eps", type=float, default=0.0, help="Bounded noise l2 budget")
@click.option("--seed", type=int, default=0, help="Noise seed")
@click.option("--out", type=click.Path(dir_okay=False), default=None, help="Output file (default: stdout)")
@verbose_option
def measure_cmd(dict_path, signal_path, noise, sigma, eps, seed, out, verbose):
    """Form y = D x + w and write it as an observation file."""
    _setup_logging(verbose)
    with _failures("measure"):
        D = read_dictionary(dict_path)
        x = read_signal(signal_path)
        spec = NoiseSpec(model=parse_choice(NoiseModel, noise), sigma=sigma, epsilon=eps, seed=seed)
        y = measure(D, x, spec)
        if out is None:
            _emit_json({"L": int(y.size), "values": [float(v) for v in y]}, None)
        else:
            write_observation(y, out)


@main.command("coherence")
@config_option
@click.option("--dict", "dict_path", required=True, type=click.Path(exists=True, dir_okay=False),
              help="BSL1 dictionary file")
@click.option("--lemma-check", "lemma_k", type=int, default=None,
              help="Also check the Gram-matrix bounds on block sets of size <= K")
@click.option("--trials", type=int, default=100, help="Sampled block sets for --lemma-check")
@click.option("--seed", type=int, default=0, help="Sampling seed for --lemma-check")
@click.option("--out", type=click.Path(dir_okay=False), default=None, help="Output file (default: stdout)")
@verbose_option
def coherence_cmd(dict_path, lemma_k, trials, seed, out, verbose):
    """Report mu, mu_B and nu of a dictionary."""
    _setup_logging(verbose)
    with _failures("coherence"):
        D = read_dictionary(dict_path)
        profile = coherence_profile(D)
        gram = gram_bound_report(D, lemma_k, trials, seed, profile) if lemma_k is not None else None
        _emit_json(coherence_record(profile, gram), out)


@main.command("estimate")
@config_option
@click.option("--algo", type=click.Choice(ALGORITHMS), required=True, help="Recovery algorithm")
@click.option("--k", "k", type=int, required=True, help="Block sparsity")
@click.option("--dict", "dict_path", required=True, type=click.Path(exists=True, dir_okay=False),
              help="BSL1 dictionary file")
@click.option("--obs", "obs_path", required=True, type=click.Path(exists=True, dir_okay=False),
              help="Observation JSON file")
@click.option("--support", default=None, help="True support for the oracle, 1-based (e.g. 1,4,7)")
@click.option("--out", type=click.Path(dir_okay=False), default=None, help="Output file (default: stdout)")
@verbose_option
def estimate_cmd(algo, k, dict_path, obs_path, support, out, verbose):
    """Recover a block-sparse vector from an observation."""
    _setup_logging(verbose)
    algorithm = Algorithm(algo)
    with _failures("estimate"):
        if algorithm is Algorithm.ORACLE and support is None:
            raise ArgumentError("--support is required for the oracle")
        blocks = parse_index_list(support) if support is not None else None
        D = read_dictionary(dict_path)
        y = read_observation(obs_path)
        result = run_algorithm(algorithm, D, y, k, support=blocks)
        _emit_json(estimate_record(result, k), out)


def _guarantee_profile(dict_path, mu, mu_block, nu, dims) -> CoherenceProfile:
    if dict_path is not None:
        return coherence_profile(read_dictionary(dict_path))
    if mu_block is None or dims is None:
        raise ArgumentError("give either --dict or --mu-block with --dims")
    L, M, d = parse_dims(dims)
    return CoherenceProfile(mu=mu, mu_block=mu_block, nu=nu, d=d, M=M, L=L)


@main.command("guarantee")
@config_option
@click.option("--algo", type=click.Choice(["bth", "bomp", "omp", "thr"]), required=True,
              help="Algorithm whose guarantee to evaluate (omp/thr need d = 1)")
@click.option("--noise", type=click.Choice(NOISES), required=True, help="Noise model")
@click.option("--k", "k", type=int, required=True, help="Block sparsity")
@click.option("--xmin", type=float, required=True, help="Smallest nonzero block norm")
@click.option("--xmax", type=float, default=None, help="Largest nonzero block norm (default: xmin)")
@click.option("--eps", type=float, default=0.0, help="Bounded noise l2 budget")
@click.option("--sigma", type=float, default=0.0, help="Gaussian noise standard deviation")
@click.option("--confidence", type=float, default=0.99, help="Target success probability (Gaussian)")
@click.option("--form", type=click.Choice(FORMS), default="lemma5", help="Failure-probability expression")
@click.option("--dict", "dict_path", type=click.Path(exists=True, dir_okay=False), default=None,
              help="Compute metrics from this BSL1 dictionary")
@click.option("--mu", type=float, default=None, help="Coherence mu (needed for omp/thr)")
@click.option("--mu-block", type=float, default=None, help="Block coherence mu_B")
@click.option("--nu", type=float, default=0.0, help="Sub-coherence nu")
@click.option("--dims", default=None, help="Dimensions 'L,M,d' when metrics are given directly")
@click.option("--diagnostic", is_flag=True, help="Include the alternate sigma_max")
@click.option("--out", type=click.Path(dir_okay=False), default=None, help="Output file (default: stdout)")
@verbose_option
def guarantee_cmd(algo, noise, k, xmin, xmax, eps, sigma, confidence, form, dict_path,
                  mu, mu_block, nu, dims, diagnostic, out, verbose):
    """Evaluate a recovery guarantee from dictionary metrics."""
    _setup_logging(verbose)
    xmax = xmin if xmax is None else xmax
    with _failures("guarantee"):
        profile = _guarantee_profile(dict_path, mu, mu_block, nu, dims)
        if parse_choice(NoiseModel, noise) is NoiseModel.ADVERSARIAL:
            report = adversarial_guarantee(profile, k, xmin, xmax, eps, algo)
        else:
            report = gaussian_guarantee(profile, k, xmin, xmax, sigma, confidence, algo, form)
        _emit_json(guarantee_record(report, diagnostic=diagnostic), out)


@main.command("crb")
@config_option
@click.option("--dict", "dict_path", required=True, type=click.Path(exists=True, dir_okay=False),
              help="BSL1 dictionary file")
@click.option("--support", required=True, help="Support blocks, 1-based (e.g. 1,4,7)")
@click.option("--sigma2", type=float, default=1.0, help="Noise variance")
@click.option("--k", "k", type=int, default=None, help="Declared block sparsity (default: support size)")
@click.option("--out", type=click.Path(dir_okay=False), default=None, help="Output file (default: stdout)")
@verbose_option
def crb_cmd(dict_path, support, sigma2, k, out, verbose):
    """Cramer-Rao bound sigma^2 Tr((D_S^T D_S)^-1) on a support."""
    _setup_logging(verbose)
    with _failures("crb"):
        D = read_dictionary(dict_path)
        result = crb(D, parse_index_list(support), sigma2, k)
        _emit_json(crb_record(result, sigma2), out)


@main.command("sweep")
@preset_option
@config_option
@click.option("--L", "L", type=int, required=True, help="Measurements")
@click.option("--M", "M", type=int, required=True, help="Number of blocks")
@click.option("--d", "d", type=int, required=True, help="Block size")
@click.option("--k", "k", type=int, required=True, help="Block sparsity given to the algorithms")
@click.option("--s", "s", type=int, default=None, help="Nonzero blocks per signal (default: k)")
@click.option("--xmin", type=float, required=True, help="Smallest nonzero block norm")
@click.option("--xmax", type=float, required=True, help="Largest nonzero block norm")
@click.option("--sigma2", type=float, multiple=True, required=True, help="Noise variance grid point (repeatable)")
@click.option("--profile", type=click.Choice(PROFILES), multiple=True, help="Signal profile (repeatable)")
@click.option("--trials", type=int, default=20, help="Noise realizations per cell")
@click.option("--signals", type=int, default=12, help="Number of ground-truth signals")
@click.option("--algo", type=click.Choice(SWEEP_ALGORITHMS), multiple=True, help="Algorithm (repeatable)")
@click.option("--seed", type=int, default=0, help="Master seed")
@click.option("--confidence", type=float, default=0.5, help="Confidence of the plotted guarantee curves")
@click.option("--form", type=click.Choice(FORMS), default="lemma5", help="Failure-probability expression")
@threads_option
@click.option("--out", default="sweep.csv", type=click.Path(dir_okay=False), help="CSV output path")
@click.option("--plot", default=None, type=click.Path(dir_okay=False), help="Optional SVG plot path")
@verbose_option
def sweep_cmd(L, M, d, k, s, xmin, xmax, sigma2, profile, trials, signals, algo, seed,
              confidence, form, threads, out, plot, verbose):
    """Median squared error versus noise variance, with CRB reference."""
    _setup_logging(verbose)
    with _failures("sweep"):
        config = sweep_config_from_mapping({
            "L": L, "M": M, "d": d, "k": k, "s": s, "xmin": xmin, "xmax": xmax,
            "sigma2": list(sigma2), "profile": list(profile), "trials": trials,
            "signals": signals, "algo": list(algo), "seed": seed,
            "confidence": confidence, "form": form,
        })
        D = sweep_dictionary(config)
        records = mc_sweep(config, threads=threads, dictionary=D)
        curves = None
        if plot is not None:
            profile_metrics = sweep_profile(D)
            curves = {
                a: guarantee_curve(config, profile_metrics, a)
                for a in (Algorithm.BOMP, Algorithm.BTH)
                if a in config.algorithms
            }
        with open(out, "w") as f:
            write_sweep_csv(records, f)
        if plot is not None:
            plot_sweep(records, plot, guarantees=curves)
    print_sweep_summary(records)
    click.echo(f"Sweep written to: {out}", err=True)


@main.command("table")
@preset_option
@config_option
@click.option("--define", type=TableRowType(), multiple=True,
              help="Row 'M,d,L,k[,mu=..,mu_B=..,nu=..]' (repeatable)")
@click.option("--rows", "rows", default=None, help="1-based row selection, e.g. 1-5 or 1,3")
@click.option("--confidence", type=float, default=0.99, help="Target success probability")
@click.option("--form", type=click.Choice(FORMS), default="lemma5", help="Failure-probability expression")
@click.option("--seed", type=int, default=0, help="Seed for dictionaries and CRB supports")
@click.option("--xmin", type=float, default=1.0, help="Block norm of the reference signal")
@threads_option
@click.option("--out", default="table.csv", type=click.Path(dir_okay=False), help="CSV output path")
@verbose_option
def table_cmd(define, rows, confidence, form, seed, xmin, threads, out, verbose):
    """Guarantee table: OMP and BOMP guarantees per sigma^2, sigma_max and CRB."""
    _setup_logging(verbose)
    table_rows: list[TableRow] = list(define)
    with _failures("table"):
        if not table_rows:
            raise ArgumentError("no rows: pass --define or a preset/config with 'define'")
        if rows is not None:
            table_rows = [table_rows[i] for i in parse_row_selection(rows, len(table_rows))]
        records = guarantee_table(
            table_rows, confidence=confidence, form=form, seed=seed, xmin=xmin, threads=threads,
        )
        with open(out, "w") as f:
            write_table_csv(records, f)
    print_table_summary(records)
    click.echo(f"Table written to: {out}", err=True)
