from __future__ import annotations

from abc import ABC, abstractmethod
from dataclasses import dataclass, field
from typing import Any, Optional, Union

import numpy as np

from ..errors import DataError
from ..risk_weights import LogLikMatrix, Weights

SeedLike = Union[int, np.random.SeedSequence]


@dataclass(frozen=True)
class Dataset:
    """A response vector plus an optional design matrix (one row per record)."""

    y: np.ndarray
    X: Optional[np.ndarray] = None

    def __post_init__(self):
        y = np.asarray(self.y, dtype=float)
        if y.ndim != 1 or y.size == 0:
            raise DataError("response must be a non-empty vector")
        object.__setattr__(self, "y", y)
        if self.X is not None:
            X = np.asarray(self.X, dtype=float)
            if X.ndim != 2 or X.shape[0] != y.size:
                raise DataError(f"design has shape {X.shape}, expected ({y.size}, R)")
            object.__setattr__(self, "X", X)

    @property
    def n(self) -> int:
        return self.y.size


@dataclass(frozen=True)
class ParamDraws:
    """S retained parameter states, stored as arrays with a leading draw axis."""

    model_id: str
    params: dict
    seed: int
    stream_key: tuple = ()
    burn_in: int = 0
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        for v in self.params.values():
            v.setflags(write=False)
        if len(self) < 1:
            raise ValueError("at least one retained draw is required")

    def __len__(self) -> int:
        return next(iter(self.params.values())).shape[0]

    def state(self, s: int) -> dict:
        return {k: v[s] for k, v in self.params.items()}

    def take(self, idx) -> "ParamDraws":
        idx = np.asarray(idx)
        return ParamDraws(
            self.model_id,
            {k: v[idx] for k, v in self.params.items()},
            self.seed,
            self.stream_key,
            self.burn_in,
            dict(self.meta),
        )


def as_seed_sequence(seed: SeedLike) -> np.random.SeedSequence:
    if isinstance(seed, np.random.SeedSequence):
        return seed
    if seed is None:
        raise ValueError("a seed is required")
    return np.random.SeedSequence(int(seed))


def alpha_vector(alpha: Union[Weights, np.ndarray, None], n: int) -> np.ndarray:
    if alpha is None:
        return np.ones(n)
    a = alpha.alpha if isinstance(alpha, Weights) else np.asarray(alpha, dtype=float)
    if a.shape != (n,):
        raise DataError(f"weights cover {a.shape} records, data has {n}")
    if not np.all(np.isfinite(a)) or np.any(a < 0):
        raise DataError("weights must be finite and non-negative")
    return a


class ModelBackend(ABC):
    """A Bayesian synthesizer that supports record-weighted likelihoods."""

    model_id: str = "abstract"
    default_burn_in: int = 0

    @abstractmethod
    def fit(self, data: Dataset, alpha, S: int, seed: SeedLike, burn_in: Optional[int] = None) -> ParamDraws:
        """Draw S states from the alpha-weighted pseudo posterior."""

    @abstractmethod
    def loglik_matrix(self, draws: ParamDraws, data: Dataset) -> LogLikMatrix:
        """S x n matrix of per-record log-likelihoods."""

    @abstractmethod
    def loglik(self, state: dict, y_i: float, x_i=None) -> float:
        ...

    @abstractmethod
    def predict(self, state: dict, data: Dataset, rng: np.random.Generator) -> np.ndarray:
        """One synthetic response per record of ``data`` under a single state."""

    def predict_from(self, draws: ParamDraws, s: int, data: Dataset, rng: np.random.Generator) -> np.ndarray:
        return self.predict(draws.state(s), data, rng)

    def posterior_summary(self, draws: ParamDraws) -> dict:
        return {}

    def describe(self) -> dict[str, Any]:
        return {"model": self.model_id}
