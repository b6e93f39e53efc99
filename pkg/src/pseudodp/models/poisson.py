"""Poisson means model with a conjugate Gamma prior.

The weighted likelihood prod_i Pois(y_i | mu)^alpha_i keeps the Gamma family,
so pseudo posterior draws are exact and need no burn-in.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy.special import gammaln

from ..errors import DataError, NumericError
from ..risk_weights import LogLikMatrix
from .base import Dataset, ModelBackend, ParamDraws, SeedLike, alpha_vector, as_seed_sequence


@dataclass(frozen=True)
class PoissonMeanState:
    mu: float

    def __post_init__(self):
        if not self.mu > 0:
            raise ValueError(f"Poisson rate must be positive, got {self.mu}")


def _check_counts(y) -> np.ndarray:
    y = np.asarray(y, dtype=float)
    if np.any(y < 0) or np.any(y != np.floor(y)) or not np.all(np.isfinite(y)):
        raise DataError("Poisson responses must be non-negative integers")
    return y


def posterior_params(y, alpha, a0: float = 1.0, b0: float = 1.0) -> tuple[float, float]:
    """Shape and rate of Gamma(a0 + sum alpha_i y_i, b0 + sum alpha_i)."""
    y = _check_counts(y)
    a = alpha_vector(alpha, y.size)
    return a0 + float(a @ y), b0 + float(a.sum())


def poisson_loglik(state, y) -> float:
    mu = state.mu if isinstance(state, PoissonMeanState) else float(state["mu"])
    return float(y * np.log(mu) - mu - gammaln(y + 1.0))


class PoissonBackend(ModelBackend):
    model_id = "poisson"

    def __init__(self, a0: float = 1.0, b0: float = 1.0):
        if a0 < 0 or b0 < 0:
            raise ValueError("Gamma prior parameters must be non-negative")
        self.a0 = float(a0)
        self.b0 = float(b0)

    def fit(self, data: Dataset, alpha, S: int, seed: SeedLike, burn_in: Optional[int] = None) -> ParamDraws:
        if S < 1:
            raise ValueError("S must be >= 1")
        shape, rate = posterior_params(data.y, alpha, self.a0, self.b0)
        if not (shape > 0 and rate > 0):
            raise NumericError("posterior improper: no weighted data and a degenerate Gamma prior")
        ss = as_seed_sequence(seed)
        rng = np.random.Generator(np.random.PCG64(ss))
        mu = rng.gamma(shape, 1.0 / rate, size=S)
        return ParamDraws(
            self.model_id,
            {"mu": mu},
            seed=int(ss.entropy),
            stream_key=tuple(ss.spawn_key),
            burn_in=0,
            meta={"shape": shape, "rate": rate},
        )

    def loglik_matrix(self, draws: ParamDraws, data: Dataset) -> LogLikMatrix:
        y = _check_counts(data.y)
        mu = draws.params["mu"]
        with np.errstate(divide="ignore", invalid="ignore"):
            return LogLikMatrix(np.outer(np.log(mu), y) - mu[:, None] - gammaln(y + 1.0)[None, :])

    def loglik(self, state, y_i, x_i=None) -> float:
        return poisson_loglik(state, y_i)

    def predict(self, state, data: Dataset, rng: np.random.Generator) -> np.ndarray:
        mu = state.mu if isinstance(state, PoissonMeanState) else float(state["mu"])
        return rng.poisson(mu, size=data.n).astype(float)

    def posterior_summary(self, draws: ParamDraws) -> dict:
        return {"mu_mean": float(np.mean(draws.params["mu"]))}

    def describe(self) -> dict:
        return {"model": self.model_id, "prior": {"family": "Gamma", "a0": self.a0, "b0": self.b0}}


def poisson_fit(y, alpha, S: int, seed: SeedLike, a0: float = 1.0, b0: float = 1.0) -> ParamDraws:
    return PoissonBackend(a0, b0).fit(Dataset(y), alpha, S, seed)
