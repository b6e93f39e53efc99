"""Per-record risk scores, pseudo-likelihood weights and Lipschitz accounting.

Everything here is a pure function of a log-likelihood matrix whose rows are
parameter draws and whose columns are database records.  Values are stored
signed; absolute values are taken where a risk or a bound is computed.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .errors import ConfigError, NumericError
from .kernels import colmax_abs

#: factor of safety applied to a local epsilon when n > 1000 / n <= 1000
SAFETY_FACTOR_LARGE_N = 1.025
SAFETY_FACTOR_SMALL_N = 1.075
SAFETY_N_CUTOFF = 1000

PDP_CAVEAT = (
    "Local guarantee only: the release is (epsilon, pi)-probabilistically "
    "differentially private (pDP). The local Lipschitz bound contracts onto the "
    "global bound as n grows, so pi (the probability that a database exceeds "
    "epsilon) tends to 0 asymptotically but is not computed."
)


def _frozen(a) -> np.ndarray:
    a = np.array(a, dtype=float)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class LogLikMatrix:
    """S x n table of log-likelihood values, one row per draw."""

    values: np.ndarray
    finite_mask: np.ndarray = field(init=False)

    def __post_init__(self):
        values = np.array(self.values, dtype=float)
        if values.ndim == 1:
            values = values[None, :]
        if values.ndim != 2 or values.shape[0] < 1 or values.shape[1] < 1:
            raise ValueError(f"log-likelihood matrix must be S x n with S, n >= 1, got shape {values.shape}")
        values.setflags(write=False)
        mask = np.isfinite(values)
        mask.setflags(write=False)
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "finite_mask", mask)

    @property
    def s_draws(self) -> int:
        return self.values.shape[0]

    @property
    def n_records(self) -> int:
        return self.values.shape[1]

    @property
    def all_finite(self) -> bool:
        return bool(self.finite_mask.all())


@dataclass(frozen=True)
class RiskScores:
    f: np.ndarray
    f_tilde: np.ndarray  # nan for non-finite records
    nonfinite: frozenset

    @property
    def n_records(self) -> int:
        return self.f.shape[0]


@dataclass(frozen=True)
class WeightConfig:
    c: float = 1.0
    g: float = 0.0
    m_threshold: Optional[float] = None

    def __post_init__(self):
        if not (0.0 < self.c <= 1.0):
            raise ConfigError(f"c must lie in (0, 1], got {self.c}")
        if not np.isfinite(self.g):
            raise ConfigError(f"g must be finite, got {self.g}")
        if self.m_threshold is not None and not self.m_threshold > 0:
            raise ConfigError(f"M must be positive, got {self.m_threshold}")


@dataclass(frozen=True)
class Weights:
    alpha: np.ndarray
    config: Optional[WeightConfig] = None
    zeroed: frozenset = frozenset()

    def __post_init__(self):
        object.__setattr__(self, "alpha", _frozen(self.alpha))

    @classmethod
    def ones(cls, n: int) -> "Weights":
        return cls(np.ones(n))

    @classmethod
    def constant(cls, value: float, n: int) -> "Weights":
        if not 0.0 <= value <= 1.0:
            raise ValueError(f"weight must lie in [0, 1], got {value}")
        zeroed = frozenset(range(n)) if value == 0.0 else frozenset()
        return cls(np.full(n, float(value)), zeroed=zeroed)

    @property
    def n_records(self) -> int:
        return self.alpha.shape[0]


@dataclass(frozen=True)
class LipschitzSummary:
    per_record: np.ndarray
    delta_local: float
    epsilon_per_db: float
    m_databases: int
    epsilon_total: float


def record_risk(L: LogLikMatrix) -> RiskScores:
    """Column-wise maximum absolute log-likelihood and its min-max rescaling.

    Records with any non-finite entry get ``f = inf`` and are left out of the
    normalisation pool.  When every finite ``f`` is equal the rescaled risk
    is 0 for all of them.
    """
    f, bad = colmax_abs(L.values)
    finite = ~bad
    if not finite.any():
        raise NumericError("no finite likelihood contributions")
    f = np.where(bad, np.inf, f)
    lo = f[finite].min()
    hi = f[finite].max()
    f_tilde = np.full(f.shape, np.nan)
    if hi > lo:
        f_tilde[finite] = (f[finite] - lo) / (hi - lo)
    else:
        f_tilde[finite] = 0.0
    return RiskScores(_frozen(f), _frozen(f_tilde), frozenset(np.flatnonzero(bad).tolist()))


def compute_weights(r: RiskScores, cfg: WeightConfig) -> Weights:
    """alpha_i = clip(c * (1 - f_tilde_i) + g, 0, 1); non-finite records get 0."""
    alpha = np.zeros(r.n_records)
    finite = np.isfinite(r.f)
    alpha[finite] = np.clip(cfg.c * (1.0 - r.f_tilde[finite]) + cfg.g, 0.0, 1.0)
    zeroed = frozenset(r.nonfinite) | frozenset(np.flatnonzero(alpha == 0.0).tolist())
    return Weights(alpha, cfg, zeroed)


def apply_m_truncation(w: Weights, r: RiskScores, M: float) -> Weights:
    """Zero every weight whose weighted risk ``alpha_i * f_i`` exceeds ``M``."""
    if not M > 0:
        raise ConfigError(f"M must be positive, got {M}")
    if w.n_records != r.n_records:
        raise ValueError("weights and risk scores cover different numbers of records")
    alpha = np.array(w.alpha)
    live = alpha > 0
    over = np.zeros_like(live)
    over[live] = alpha[live] * r.f[live] > M
    alpha[over] = 0.0
    cfg = w.config
    if cfg is not None and cfg.m_threshold != M:
        cfg = WeightConfig(cfg.c, cfg.g, M)
    return Weights(alpha, cfg, w.zeroed | frozenset(np.flatnonzero(over).tolist()))


def weights_from_loglik(L: LogLikMatrix, cfg: WeightConfig) -> tuple[RiskScores, Weights]:
    """Risk scores, weights and (if ``cfg.m_threshold``) truncation in one call."""
    r = record_risk(L)
    w = compute_weights(r, cfg)
    if cfg.m_threshold is not None:
        w = apply_m_truncation(w, r, cfg.m_threshold)
    return r, w


def weighted_loglik_matrix(L: LogLikMatrix, w: Weights) -> LogLikMatrix:
    """Scale column i by alpha_i; zero-weight columns become exactly 0."""
    if w.n_records != L.n_records:
        raise ValueError(f"weights cover {w.n_records} records, matrix has {L.n_records}")
    with np.errstate(invalid="ignore"):
        out = L.values * w.alpha[None, :]
    out[:, w.alpha == 0.0] = 0.0
    return LogLikMatrix(out)


def lipschitz_summary(L: LogLikMatrix, m: int = 1) -> LipschitzSummary:
    if m < 1:
        raise ValueError(f"number of databases must be >= 1, got {m}")
    if not L.all_finite:
        raise NumericError("non-finite log-likelihood entries; apply weights first")
    per_record, _ = colmax_abs(L.values)
    delta = float(per_record.max())
    eps = 2.0 * delta
    return LipschitzSummary(_frozen(per_record), delta, eps, int(m), eps * m)


def em_scalar_weight(epsilon_target: float, delta_unweighted: float) -> float:
    """Scalar weight of the exponential mechanism with log-likelihood utility.

    Returns ``epsilon_target / (2 * delta_unweighted)``, capped at 1.
    """
    if not epsilon_target > 0:
        raise ValueError(f"epsilon_target must be positive, got {epsilon_target}")
    if not delta_unweighted > 0:
        raise ValueError(f"delta_unweighted must be positive, got {delta_unweighted}")
    return min(1.0, epsilon_target / (2.0 * delta_unweighted))


def safety_factor(n: int) -> float:
    return SAFETY_FACTOR_LARGE_N if n > SAFETY_N_CUTOFF else SAFETY_FACTOR_SMALL_N


def recommend_global_epsilon(s: LipschitzSummary, n: int, factor: Optional[float] = None) -> float:
    """Inflate the total local epsilon by a factor of safety.

    ``factor`` overrides the default chosen from ``n``; it must be >= 1.
    """
    if n < 1:
        raise ValueError(f"n must be >= 1, got {n}")
    if factor is None:
        factor = safety_factor(n)
    elif factor < 1.0:
        raise ConfigError(f"factor of safety must be >= 1, got {factor}")
    return factor * s.epsilon_total
