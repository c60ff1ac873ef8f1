"""Data models for bsl."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Optional

import numpy as np

from .errors import ArgumentError

# Atoms must have unit Euclidean norm to within this tolerance.
ATOM_NORM_TOLERANCE = 1e-10


class Algorithm(Enum):
    """Recovery algorithm names, as spelled on the command line."""

    BTH = "bth"
    BOMP = "bomp"
    OMP = "omp"
    THR = "thr"
    ORACLE = "oracle"
    ML = "ml"

    @property
    def is_scalar(self) -> bool:
        """Whether the algorithm runs on the d = 1 view of the dictionary."""
        return self in (Algorithm.OMP, Algorithm.THR)


class NoiseModel(Enum):
    """Noise model for measurements and guarantees."""

    GAUSSIAN = "gaussian"
    ADVERSARIAL = "adversarial_bounded"

    @classmethod
    def _missing_(cls, value):
        aliases = {"gauss": cls.GAUSSIAN, "adv": cls.ADVERSARIAL, "adversarial": cls.ADVERSARIAL}
        return aliases.get(str(value).lower())


class SignalProfile(Enum):
    """Within-block shape of a generated signal block."""

    SPIKE = "spike"
    FLAT = "flat"
    MIXED = "mixed"
    RANDOM = "random"


class ProbabilityForm(Enum):
    """Which failure-probability expression the Gaussian guarantees use."""

    LEMMA5 = "lemma5"
    THEOREM4 = "theorem4"


def parse_choice(enum_cls: type[Enum], value) -> Enum:
    """Parse an enumeration member from a CLI or config string."""
    if isinstance(value, enum_cls):
        return value
    try:
        return enum_cls(str(value).lower())
    except ValueError:
        valid = ", ".join(m.value for m in enum_cls)
        raise ArgumentError(f"Invalid {enum_cls.__name__} '{value}'. Valid: {valid}")


@dataclass(frozen=True, eq=False)
class BlockedDictionary:
    """An L x N dictionary partitioned into M blocks of d consecutive unit-norm atoms.

    The entries are copied on construction and stored read-only, so a
    dictionary can be shared freely between threads.
    """

    entries: np.ndarray
    block_size: int

    def __post_init__(self):
        entries = np.array(self.entries, dtype=float)
        d = int(self.block_size)
        if entries.ndim != 2 or entries.size == 0:
            raise ArgumentError(f"dictionary must be a non-empty matrix, got shape {entries.shape}")
        if d < 1:
            raise ArgumentError(f"block size must be positive, got {d}")
        L, N = entries.shape
        if N % d:
            raise ArgumentError(f"N={N} columns is not a multiple of block size d={d}")

        norms = np.linalg.norm(entries, axis=0)
        bad = np.flatnonzero(np.abs(norms - 1.0) > ATOM_NORM_TOLERANCE)
        if bad.size:
            raise ArgumentError(
                f"atom {bad[0] + 1} has norm {norms[bad[0]]:.17g}; atoms must have unit norm"
            )

        entries.setflags(write=False)
        object.__setattr__(self, "entries", entries)
        object.__setattr__(self, "block_size", d)

    @property
    def L(self) -> int:
        return self.entries.shape[0]

    @property
    def N(self) -> int:
        return self.entries.shape[1]

    @property
    def num_blocks(self) -> int:
        return self.N // self.block_size

    def as_scalar(self) -> BlockedDictionary:
        """The same matrix viewed with d = 1 (every atom its own block)."""
        if self.block_size == 1:
            return self
        return BlockedDictionary(self.entries, 1)


@dataclass(frozen=True, eq=False)
class BlockSparseVector:
    """A length-N parameter vector split into M blocks of d entries."""

    values: np.ndarray
    block_size: int

    def __post_init__(self):
        values = np.array(self.values, dtype=float).reshape(-1)
        d = int(self.block_size)
        if d < 1:
            raise ArgumentError(f"block size must be positive, got {d}")
        if values.size == 0 or values.size % d:
            raise ArgumentError(f"vector length {values.size} is not a positive multiple of d={d}")
        values.setflags(write=False)
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "block_size", d)

    @classmethod
    def zeros(cls, num_blocks: int, block_size: int) -> BlockSparseVector:
        return cls(np.zeros(num_blocks * block_size), block_size)

    @property
    def N(self) -> int:
        return self.values.size

    @property
    def num_blocks(self) -> int:
        return self.N // self.block_size

    @property
    def blocks(self) -> np.ndarray:
        """M x d view, row i holding block i."""
        return self.values.reshape(self.num_blocks, self.block_size)

    @property
    def block_norms(self) -> np.ndarray:
        return np.linalg.norm(self.blocks, axis=1)

    @property
    def support(self) -> tuple[int, ...]:
        """Sorted 0-based indices of blocks with at least one exactly nonzero entry."""
        return tuple(int(i) for i in np.flatnonzero(np.any(self.blocks != 0, axis=1)))

    @property
    def atom_support(self) -> tuple[int, ...]:
        return tuple(int(i) for i in np.flatnonzero(self.values != 0))

    @property
    def xmin(self) -> float:
        """Smallest block norm over the support (0 for the zero vector)."""
        support = list(self.support)
        return float(self.block_norms[support].min()) if support else 0.0

    @property
    def xmax(self) -> float:
        support = list(self.support)
        return float(self.block_norms[support].max()) if support else 0.0

    def as_scalar(self) -> BlockSparseVector:
        if self.block_size == 1:
            return self
        return BlockSparseVector(self.values, 1)


@dataclass(frozen=True)
class CoherenceProfile:
    """Coherence metrics of a dictionary plus its dimensions.

    mu may be unknown (None) when only block metrics were supplied.
    """

    mu: Optional[float]
    mu_block: float
    nu: float
    d: int
    M: int
    L: int

    def __post_init__(self):
        if self.d < 1 or self.M < 1 or self.L < 1:
            raise ArgumentError(f"invalid dimensions L={self.L}, M={self.M}, d={self.d}")
        for name in ("mu", "mu_block", "nu"):
            value = getattr(self, name)
            if value is not None and (not math.isfinite(value) or value < 0):
                raise ArgumentError(f"{name} must be a nonnegative number, got {value}")

    @property
    def N(self) -> int:
        return self.M * self.d

    def as_scalar(self) -> CoherenceProfile:
        """The same dictionary viewed as a scalar (d = 1) dictionary."""
        if self.mu is None:
            raise ArgumentError("the scalar view needs the coherence mu")
        return CoherenceProfile(mu=self.mu, mu_block=self.mu, nu=0.0, d=1, M=self.N, L=self.L)


@dataclass
class GramBoundReport:
    """Worst observed slack (bound minus observed norm) per Gram-matrix bound."""

    k: int
    trials: int
    slacks: dict[str, Optional[float]] = field(default_factory=dict)
    inapplicable: list[str] = field(default_factory=list)

    def all_hold(self, tolerance: float = 1e-12) -> bool:
        return all(v >= -tolerance for v in self.slacks.values() if v is not None)


@dataclass(frozen=True)
class SignalSpec:
    """Recipe for a seeded block-sparse ground-truth signal."""

    M: int
    d: int
    s: int
    xmin_norm: float
    xmax_norm: float
    profile: SignalProfile = SignalProfile.FLAT
    seed: int = 0

    def validate(self):
        if self.M < 1 or self.d < 1:
            raise ArgumentError(f"invalid dimensions M={self.M}, d={self.d}")
        if not 1 <= self.s <= self.M:
            raise ArgumentError(f"support size s={self.s} must lie in [1, M={self.M}]")
        if not 0 < self.xmin_norm <= self.xmax_norm:
            raise ArgumentError(
                f"need 0 < xmin_norm <= xmax_norm, got {self.xmin_norm} and {self.xmax_norm}"
            )
        if self.s < 2 and self.xmin_norm != self.xmax_norm:
            raise ArgumentError("with s < 2 the extremes xmin_norm != xmax_norm cannot both be realized")


@dataclass(frozen=True)
class NoiseSpec:
    """Noise model plus its single meaningful magnitude and seed."""

    model: NoiseModel = NoiseModel.GAUSSIAN
    sigma: float = 0.0
    epsilon: float = 0.0
    seed: int = 0

    def validate(self):
        if self.sigma < 0 or self.epsilon < 0:
            raise ArgumentError("sigma and epsilon must be nonnegative")

    @property
    def magnitude(self) -> float:
        return self.sigma if self.model is NoiseModel.GAUSSIAN else self.epsilon


@dataclass
class EstimateResult:
    """Output of one recovery algorithm run."""

    algorithm: Algorithm
    estimate: BlockSparseVector
    selected_support: tuple[int, ...]  # 0-based, in selection order
    residual_norm: float
    iterations: int


@dataclass
class GuaranteeReport:
    """Outcome of one guarantee evaluation for an (algorithm, noise model) pair."""

    algorithm: Algorithm
    noise_model: NoiseModel
    condition_holds: bool
    condition_margin: float
    error_bound: Optional[float] = None
    alpha: Optional[float] = None
    failure_probability_bound: Optional[float] = None
    sigma_max: Optional[float] = None
    error_bound_per_sigma2: Optional[float] = None
    failure_probability_raw: Optional[float] = None
    sigma_max_alternate: Optional[float] = None


@dataclass
class CrbResult:
    """Cramer-Rao bound on a support set."""

    support: tuple[int, ...]
    trace: float  # Tr((D_S^T D_S)^{-1})
    unbiased_estimable: bool
    bound: Optional[float] = None


@dataclass
class ChiSquareTailBound:
    """Upper bounds on Pr{||u||^2 >= t^2}, clipped to [0, 1], with raw values alongside."""

    tight: float
    loose: float
    tight_raw: float
    loose_raw: float


def _default_algorithms() -> list[Algorithm]:
    return [Algorithm.BOMP, Algorithm.BTH, Algorithm.OMP, Algorithm.THR, Algorithm.ORACLE]


@dataclass
class SweepConfig:
    """Configuration of a median-error versus noise-variance sweep."""

    L: int
    M: int
    d: int
    k: int
    s: int
    xmin_norm: float
    xmax_norm: float
    sigma2_grid: list[float]
    profiles: list[SignalProfile] = field(default_factory=lambda: list(SignalProfile))
    trials_per_cell: int = 20
    num_signals: int = 12
    algorithms: list[Algorithm] = field(default_factory=_default_algorithms)
    master_seed: int = 0
    guarantee_confidence: float = 0.5
    probability_form: ProbabilityForm = ProbabilityForm.LEMMA5

    def validate(self):
        if min(self.L, self.M, self.d, self.k, self.s) < 1:
            raise ArgumentError("dimensions, k and s must be positive")
        if self.k * self.d > self.L:
            raise ArgumentError(f"infeasible dimensions: k*d = {self.k * self.d} exceeds L = {self.L}")
        if self.k > self.M or self.s > self.M:
            raise ArgumentError(f"k={self.k} and s={self.s} must not exceed M={self.M}")
        if not self.sigma2_grid:
            raise ArgumentError("sigma2 grid must not be empty")
        if any(v < 0 for v in self.sigma2_grid):
            raise ArgumentError("noise variances must be nonnegative")
        if any(b <= a for a, b in zip(self.sigma2_grid, self.sigma2_grid[1:])):
            raise ArgumentError("sigma2 grid must be strictly ascending")
        if self.trials_per_cell < 1 or self.num_signals < 1:
            raise ArgumentError("trials_per_cell and num_signals must be at least 1")
        if not self.profiles:
            raise ArgumentError("at least one signal profile is required")
        if not self.algorithms or Algorithm.ML in self.algorithms:
            raise ArgumentError("algorithms must be a non-empty subset of bth, bomp, omp, thr, oracle")
        if not 0 < self.guarantee_confidence < 1:
            raise ArgumentError("guarantee_confidence must lie in (0, 1)")
        SignalSpec(self.M, self.d, self.s, self.xmin_norm, self.xmax_norm).validate()


@dataclass
class SweepRecord:
    """One (algorithm, sigma2) cell of a sweep, aggregated over signals."""

    algorithm: Algorithm
    sigma2: float
    medians: list[float]  # per-signal median squared error
    crb_values: list[float]  # per-signal CRB reference
    support_rates: list[float]  # per-signal support recovery rate
    trial_min: list[float] = field(default_factory=list)  # per-signal smallest trial error
    trial_max: list[float] = field(default_factory=list)

    @property
    def envelope(self) -> tuple[float, float]:
        return min(self.medians), max(self.medians)

    @property
    def crb_value(self) -> float:
        return float(np.median(self.crb_values))

    @property
    def support_recovery_rate(self) -> float:
        return float(np.mean(self.support_rates))


@dataclass
class TableRow:
    """One guarantee-table row; metrics left as None are computed from a generated dictionary."""

    L: int
    M: int
    d: int
    k: int
    mu: Optional[float] = None
    mu_block: Optional[float] = None
    nu: Optional[float] = None


@dataclass
class TableRecord:
    """Computed guarantee-table row. Guarantees are in multiples of sigma^2."""

    row: TableRow
    profile: CoherenceProfile
    omp_guarantee: Optional[float]
    omp_sigma_max: Optional[float]
    bomp_guarantee: Optional[float]
    bomp_sigma_max: Optional[float]
    crb: float
    support: tuple[int, ...]
