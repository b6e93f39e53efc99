"""Release pipelines: unweighted, alpha-weighted and exponential-mechanism (scalar) synthesis.

Each pipeline fits the synthesizer, evaluates the per-record log-likelihood
matrix under the retained draws, accounts for the local Lipschitz bound, and
generates ``m`` synthetic databases from ``m`` distinct retained draws.

Random streams are keyed off one seed (see :mod:`pseudodp.rng`).  Under the
default ``seed_policy="shared"`` the stage-2 refit reuses the stage-1 stream,
so an all-ones weight vector reproduces the unweighted release bit for bit
and the refits inside EM calibration share common random numbers.
"""
from __future__ import annotations

import enum
import logging
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import rng as rngs
from .errors import ConfigError
from .models.base import Dataset, ModelBackend, ParamDraws
from .risk_weights import (
    LipschitzSummary,
    LogLikMatrix,
    RiskScores,
    WeightConfig,
    Weights,
    em_scalar_weight,
    lipschitz_summary,
    record_risk,
    weighted_loglik_matrix,
    weights_from_loglik,
)

log = logging.getLogger(__name__)

EM_CALIBRATION_RTOL = 0.02
EM_CALIBRATION_MAX_ITER = 20


class MechanismKind(str, enum.Enum):
    UNWEIGHTED = "Unweighted"
    ALPHA_WEIGHTED = "AlphaWeighted"
    EM_SCALAR = "EmScalar"


@dataclass
class SyntheticRelease:
    databases: list
    mechanism: MechanismKind
    lipschitz: LipschitzSummary
    weights: Weights
    risk: RiskScores
    seed: int
    config: dict
    draw_indices: np.ndarray
    warnings: list = field(default_factory=list)
    em_weight: Optional[float] = None
    delta_unweighted: Optional[float] = None
    posterior: dict = field(default_factory=dict)

    @property
    def m(self) -> int:
        return len(self.databases)

    @property
    def n(self) -> int:
        return self.weights.n_records


@dataclass(frozen=True)
class Stage1:
    """Unweighted fit shared by every pipeline (and reusable across sweep cells)."""

    draws: ParamDraws
    loglik: LogLikMatrix
    risk: RiskScores


def _fit_key(seed_policy: str, stage: int) -> int:
    if seed_policy == "shared" or stage == 1:
        return rngs.FIT
    if seed_policy == "independent":
        return rngs.REFIT
    raise ConfigError(f"seed_policy must be 'shared' or 'independent', got {seed_policy!r}")


def fit_stage1(data: Dataset, model: ModelBackend, S: int, seed: int, burn_in: Optional[int] = None) -> Stage1:
    draws = model.fit(data, Weights.ones(data.n), S, rngs.seed_sequence(seed, rngs.FIT), burn_in)
    L = model.loglik_matrix(draws, data)
    return Stage1(draws, L, record_risk(L))


def _refit(data, model, alpha: Weights, S, seed, burn_in, seed_policy) -> tuple[ParamDraws, LogLikMatrix]:
    draws = model.fit(data, alpha, S, rngs.seed_sequence(seed, _fit_key(seed_policy, 2)), burn_in)
    return draws, model.loglik_matrix(draws, data)


def generate_databases(data: Dataset, model: ModelBackend, draws: ParamDraws, m: int, seed: int):
    """``m`` synthetic databases, each from its own retained draw (chosen without replacement)."""
    S = len(draws)
    if not 1 <= m <= S:
        raise ConfigError(f"m must lie in [1, S={S}] so every database has its own draw, got {m}")
    idx = rngs.stream(seed, rngs.SELECT).choice(S, size=m, replace=False)
    dbs = [model.predict_from(draws, int(s), data, rngs.stream(seed, rngs.PREDICT, j)) for j, s in enumerate(idx)]
    return dbs, idx


def _release(data, model, kind, draws, L_final, weights, risk, m, seed, config, warnings=(), **extra) -> SyntheticRelease:
    summary = lipschitz_summary(weighted_loglik_matrix(L_final, weights), m)
    dbs, idx = generate_databases(data, model, draws, m, seed)
    return SyntheticRelease(
        databases=dbs,
        mechanism=kind,
        lipschitz=summary,
        weights=weights,
        risk=risk,
        seed=int(seed),
        config=config,
        draw_indices=idx,
        warnings=list(warnings),
        posterior=model.posterior_summary(draws),
        **extra,
    )


def run_unweighted(
    data: Dataset,
    model: ModelBackend,
    S: int,
    m: int,
    seed: int,
    burn_in: Optional[int] = None,
    stage1: Optional[Stage1] = None,
) -> SyntheticRelease:
    st = stage1 or fit_stage1(data, model, S, seed, burn_in)
    config = {"mechanism": MechanismKind.UNWEIGHTED.value, "S": S, "m": m, "seed": seed, "burn_in": burn_in}
    return _release(
        data, model, MechanismKind.UNWEIGHTED, st.draws, st.loglik, Weights.ones(data.n), st.risk, m, seed, config
    )


def run_alpha_weighted(
    data: Dataset,
    model: ModelBackend,
    cfg: WeightConfig,
    S: int,
    m: int,
    seed: int,
    burn_in: Optional[int] = None,
    refit: bool = True,
    seed_policy: str = "shared",
    stage1: Optional[Stage1] = None,
) -> SyntheticRelease:
    """Two-stage alpha-weighted release.

    With ``refit=False`` (harness mode) the stage-1 draws are reused for the
    Lipschitz bound and the synthetic data; this exists for exact dominance
    checks and is not a private release.
    """
    st = stage1 or fit_stage1(data, model, S, seed, burn_in)
    risk, weights = weights_from_loglik(st.loglik, cfg)
    warnings = []
    if not np.any(weights.alpha > 0):
        warnings.append("all weights are zero: release is drawn from the prior predictive")
        log.warning(warnings[-1])
    if refit:
        draws, L2 = _refit(data, model, weights, S, seed, burn_in, seed_policy)
    else:
        draws, L2 = st.draws, st.loglik
    config = {
        "mechanism": MechanismKind.ALPHA_WEIGHTED.value,
        "c": cfg.c,
        "g": cfg.g,
        "M": cfg.m_threshold,
        "S": S,
        "m": m,
        "seed": seed,
        "burn_in": burn_in,
        "refit": refit,
        "seed_policy": seed_policy,
    }
    return _release(
        data,
        model,
        MechanismKind.ALPHA_WEIGHTED,
        draws,
        L2,
        weights,
        risk,
        m,
        seed,
        config,
        warnings,
        delta_unweighted=float(np.abs(st.loglik.values).max()) if st.loglik.all_finite else None,
    )


def _em_delta(data, model, st, w, S, seed, burn_in, refit, seed_policy):
    weights = Weights.constant(w, data.n)
    if refit:
        draws, L2 = _refit(data, model, weights, S, seed, burn_in, seed_policy)
    else:
        draws, L2 = st.draws, st.loglik
    return weights, draws, L2, lipschitz_summary(weighted_loglik_matrix(L2, weights)).delta_local


def run_em_scalar(
    data: Dataset,
    model: ModelBackend,
    epsilon_target: float,
    S: int,
    m: int,
    seed: int,
    calibrate: bool = False,
    burn_in: Optional[int] = None,
    refit: bool = True,
    seed_policy: str = "shared",
    stage1: Optional[Stage1] = None,
) -> SyntheticRelease:
    """Exponential mechanism with log-likelihood utility, i.e. one scalar weight for all records.

    The one-shot weight is ``epsilon_target / (2 * delta_unweighted)``.  With
    ``calibrate`` the weight is re-solved by safeguarded bisection (at most 20
    refits) until the achieved per-database epsilon is within 2% of the target.
    """
    if not epsilon_target > 0:
        raise ConfigError(f"epsilon_target must be positive, got {epsilon_target}")
    st = stage1 or fit_stage1(data, model, S, seed, burn_in)
    delta_unw = lipschitz_summary(st.loglik).delta_local
    warnings = []
    if epsilon_target >= 2.0 * delta_unw:
        warnings.append(
            f"epsilon_target {epsilon_target:g} >= 2 * unweighted delta {2 * delta_unw:g}; scalar weight clamped to 1"
        )
        log.warning(warnings[-1])
    w = em_scalar_weight(epsilon_target, delta_unw)
    weights, draws, L2, delta = _em_delta(data, model, st, w, S, seed, burn_in, refit, seed_policy)

    iterations = 0
    if calibrate and w < 1.0:
        target = 0.5 * epsilon_target
        best = (abs(delta - target), w, weights, draws, L2, delta)
        lo, hi = 0.0, 1.0
        while abs(2.0 * delta - epsilon_target) > EM_CALIBRATION_RTOL * epsilon_target:
            if iterations >= EM_CALIBRATION_MAX_ITER:
                warnings.append(
                    f"EM calibration stopped after {iterations} refits; "
                    f"achieved epsilon {2 * best[5]:g} misses the 2% band"
                )
                log.warning(warnings[-1])
                break
            if delta > target:
                hi = w
            else:
                lo = w
            # delta is roughly proportional to w; take that step when it stays inside the bracket
            step = w * target / delta if delta > 0 else hi
            w = step if lo < step < hi else 0.5 * (lo + hi)
            iterations += 1
            weights, draws, L2, delta = _em_delta(data, model, st, w, S, seed, burn_in, refit, seed_policy)
            if abs(delta - target) < best[0]:
                best = (abs(delta - target), w, weights, draws, L2, delta)
        _, w, weights, draws, L2, delta = best

    config = {
        "mechanism": MechanismKind.EM_SCALAR.value,
        "epsilon_target": epsilon_target,
        "calibrate": calibrate,
        "calibration_refits": iterations,
        "S": S,
        "m": m,
        "seed": seed,
        "burn_in": burn_in,
        "refit": refit,
        "seed_policy": seed_policy,
    }
    return _release(
        data,
        model,
        MechanismKind.EM_SCALAR,
        draws,
        L2,
        weights,
        st.risk,
        m,
        seed,
        config,
        warnings,
        em_weight=float(w),
        delta_unweighted=delta_unw,
    )


def flatness_diagnostic(release) -> float:
    """Interquartile range (linear-interpolation quantiles) of the per-record bounds."""
    per_record = release.lipschitz.per_record if hasattr(release, "lipschitz") else release.per_record
    q1, q3 = np.percentile(per_record, [25, 75])
    return float(q3 - q1)
