"""Finite mixture of normal linear regressions, fitted by weighted Gibbs sampling.

Model (on the standardized response):

    y_i | z_i = k  ~ Normal(x_i' beta_k, sigma_k)
    z_i            ~ Categorical(pi)
    pi             ~ Dirichlet(a / K, ..., a / K)
    beta_k         ~ Normal(0, tau^2 I)
    sigma_k^2      ~ InverseGamma(s_shape, s_rate)

Record i's likelihood enters every conditional raised to alpha_i, which keeps
all updates conjugate: alpha-weighted cross products for beta_k, weighted
residual sums and effective sizes for sigma_k, and weighted counts for pi.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from ..errors import DataError
from ..kernels import cluster_stats, cluster_wrss, mixture_logdens, sample_labels
from ..risk_weights import LogLikMatrix
from .base import Dataset, ModelBackend, ParamDraws, SeedLike, alpha_vector, as_seed_sequence

_HALF_LOG_2PI = 0.5 * np.log(2.0 * np.pi)


@dataclass(frozen=True)
class MixtureRegressionState:
    pi: np.ndarray
    beta: np.ndarray
    sigma: np.ndarray
    z: Optional[np.ndarray] = None

    def __post_init__(self):
        if abs(float(np.sum(self.pi)) - 1.0) > 1e-12:
            raise ValueError("mixture weights must sum to 1")
        if np.any(np.asarray(self.sigma) <= 0):
            raise ValueError("component scales must be positive")
        K = len(self.pi)
        if self.z is not None and (np.min(self.z) < 0 or np.max(self.z) >= K):
            raise ValueError("component labels out of range")

    @property
    def K(self) -> int:
        return len(self.pi)


def _as_state(state) -> MixtureRegressionState:
    if isinstance(state, MixtureRegressionState):
        return state
    return MixtureRegressionState(state["pi"], state["beta"], state["sigma"], state.get("z"))


def _design(data: Dataset) -> np.ndarray:
    if data.X is None:
        return np.ones((data.n, 1))
    return data.X


def mixture_loglik(state, y_i: float, x_i) -> float:
    """Marginal log density log sum_k pi_k Normal(y_i | x_i' beta_k, sigma_k)."""
    st = _as_state(state)
    x_i = np.atleast_1d(np.asarray(x_i, dtype=float))
    means = (st.beta @ x_i)[None, :]
    with np.errstate(divide="ignore"):
        log_pi = np.log(st.pi)
    return float(mixture_logdens(np.array([float(y_i)]), means, log_pi, st.sigma)[0])


class MixtureBackend(ModelBackend):
    model_id = "mixture"
    default_burn_in = 1000

    def __init__(
        self,
        K: int = 20,
        tau: float = 10.0,
        sigma_shape: float = 2.0,
        sigma_rate: float = 1.0,
        dirichlet_a: float = 1.0,
        standardize: bool = True,
        log_response: bool = False,
    ):
        if K < 1:
            raise ValueError(f"K must be >= 1, got {K}")
        self.K = int(K)
        self.tau = float(tau)
        self.sigma_shape = float(sigma_shape)
        self.sigma_rate = float(sigma_rate)
        self.dirichlet_a = float(dirichlet_a)
        self.standardize = standardize
        self.log_response = log_response

    # response scale ------------------------------------------------------

    def _transform(self, y: np.ndarray) -> np.ndarray:
        if not self.log_response:
            return y
        if np.any(y <= 0):
            raise DataError("log_response requires a strictly positive response")
        return np.log(y)

    def _scale(self, y: np.ndarray) -> tuple[float, float]:
        if not self.standardize:
            return 0.0, 1.0
        sd = float(np.std(y))
        return float(np.mean(y)), sd if sd > 0 else 1.0

    def _standardized(self, draws: ParamDraws, data: Dataset) -> np.ndarray:
        return (self._transform(data.y) - draws.meta["center"]) / draws.meta["scale"]

    # sampler ---------------------------------------------------------------

    def fit(self, data: Dataset, alpha, S: int, seed: SeedLike, burn_in: Optional[int] = None) -> ParamDraws:
        if S < 1:
            raise ValueError("S must be >= 1")
        if burn_in is None:
            burn_in = self.default_burn_in
        X = _design(data)
        n, R = X.shape
        w = alpha_vector(alpha, n)
        yt = self._transform(data.y)
        center, scale = self._scale(yt)
        ys = (yt - center) / scale
        K = self.K

        ss = as_seed_sequence(seed)
        rng = np.random.Generator(np.random.PCG64(ss))

        # quantile buckets of the response start the chain in a spread-out state
        z = np.empty(n, dtype=np.intp)
        z[np.argsort(ys, kind="stable")] = (np.arange(n) * K) // n
        sigma = np.ones(K)
        prior_prec = np.eye(R) / self.tau**2

        keep_pi = np.empty((S, K))
        keep_beta = np.empty((S, K, R))
        keep_sigma = np.empty((S, K))
        keep_z = np.empty((S, n), dtype=np.int16 if K < 2**15 else np.int32)

        for t in range(burn_in + S):
            xtwx, xtwy, sw = cluster_stats(X, ys, w, z, K)

            # beta_k | z, sigma
            prec = xtwx / sigma[:, None, None] ** 2 + prior_prec
            chol = np.linalg.cholesky(prec)
            mean = np.linalg.solve(prec, (xtwy / sigma[:, None] ** 2)[..., None])[..., 0]
            eps = rng.standard_normal((K, R))
            beta = mean + np.linalg.solve(np.swapaxes(chol, 1, 2), eps[..., None])[..., 0]

            # sigma_k^2 | z, beta
            wrss = cluster_wrss(X, ys, w, z, beta)
            shape = self.sigma_shape + 0.5 * sw
            rate = self.sigma_rate + 0.5 * wrss
            sigma = np.sqrt(rate / rng.gamma(shape))

            # pi | z
            g = rng.gamma(self.dirichlet_a / K + sw)
            pi = g / g.sum()

            # z_i | pi, beta, sigma, with the likelihood raised to alpha_i
            means = X @ beta.T
            zsc = (ys[:, None] - means) / sigma[None, :]
            log_norm = -np.log(sigma)[None, :] - _HALF_LOG_2PI - 0.5 * zsc**2
            with np.errstate(divide="ignore"):
                log_pi = np.log(pi)
            logp = log_pi[None, :] + w[:, None] * log_norm
            z = sample_labels(logp, rng.random(n))

            if t >= burn_in:
                s = t - burn_in
                keep_pi[s] = pi
                keep_beta[s] = beta
                keep_sigma[s] = sigma
                keep_z[s] = z

        return ParamDraws(
            self.model_id,
            {"pi": keep_pi, "beta": keep_beta, "sigma": keep_sigma, "z": keep_z},
            seed=int(ss.entropy),
            stream_key=tuple(ss.spawn_key),
            burn_in=int(burn_in),
            meta={"center": center, "scale": scale, "K": K, "R": R},
        )

    # evaluation ------------------------------------------------------------

    def loglik_matrix(self, draws: ParamDraws, data: Dataset) -> LogLikMatrix:
        X = _design(data)
        ys = self._standardized(draws, data)
        pi = draws.params["pi"]
        beta = draws.params["beta"]
        sigma = draws.params["sigma"]
        out = np.empty((len(draws), data.n))
        with np.errstate(divide="ignore"):
            log_pi = np.log(pi)
        for s in range(len(draws)):
            out[s] = mixture_logdens(ys, X @ beta[s].T, log_pi[s], sigma[s])
        return LogLikMatrix(out)

    def loglik(self, state, y_i, x_i=None) -> float:
        if x_i is None:
            x_i = np.ones(1)
        return mixture_loglik(state, y_i, x_i)

    def predict(self, state, data: Dataset, rng: np.random.Generator, center: float = 0.0, scale: float = 1.0) -> np.ndarray:
        """Partially synthetic responses: z_i ~ pi, then y_i ~ Normal(x_i' beta_z, sigma_z).

        ``center``/``scale`` map the standardized draw back to the modelled
        scale (then ``exp`` undoes ``log_response``);
        :meth:`predict_from` fills them in from a ``ParamDraws``.
        """
        if data.X is None and np.shape(_as_state(state).beta)[-1] != 1:
            raise DataError("covariates are required to predict from a regression mixture")
        X = _design(data)
        st = _as_state(state)
        pi, beta, sigma = np.asarray(st.pi), np.asarray(st.beta), np.asarray(st.sigma)
        # canonical component order, so relabelling a state cannot change its draws
        order = np.lexsort((sigma, *beta.T[::-1], pi))
        pi, beta, sigma = pi[order], beta[order], sigma[order]
        cum = np.cumsum(pi)
        z = np.minimum(np.searchsorted(cum, rng.random(data.n) * cum[-1], side="right"), len(pi) - 1)
        mean = np.einsum("ij,ij->i", X, beta[z])
        ys = mean + sigma[z] * rng.standard_normal(data.n)
        out = center + scale * ys
        return np.exp(out) if self.log_response else out

    def predict_from(self, draws: ParamDraws, s: int, data: Dataset, rng: np.random.Generator) -> np.ndarray:
        return self.predict(draws.state(s), data, rng, draws.meta["center"], draws.meta["scale"])

    def posterior_summary(self, draws: ParamDraws) -> dict:
        occ = np.sort(np.apply_along_axis(np.bincount, 1, draws.params["z"].astype(np.intp), minlength=self.K), axis=1)
        return {"mean_occupied_components": float(np.mean((occ > 0).sum(axis=1)))}

    def describe(self) -> dict:
        return {
            "model": self.model_id,
            "K": self.K,
            "prior": {
                "beta": f"Normal(0, {self.tau}^2 I) on the standardized response",
                "sigma2": f"InverseGamma({self.sigma_shape}, {self.sigma_rate})",
                "pi": f"Dirichlet({self.dirichlet_a}/K)",
                "note": "conjugate stand-ins for a correlation-matrix MVN prior with half-t scales "
                "and a Gamma hyperprior on the Dirichlet concentration",
            },
            "response_transform": "log" if self.log_response else "identity",
            "loglik_scale": "standardized response" if self.standardize else "data",
        }


def mixture_fit(y, X, alpha, K: int, S: int, burn_in: int, seed: SeedLike, **kwargs) -> ParamDraws:
    return MixtureBackend(K=K, **kwargs).fit(Dataset(y, X), alpha, S, seed, burn_in)
