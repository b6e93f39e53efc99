"""Monte Carlo study of how local Lipschitz bounds contract as n grows.

For each sample size and replicate a Poisson database is simulated and the
local bound is computed under three mechanisms that share the database and
the stage-1 fit: unweighted, alpha-weighted (c=1, g=0) and alpha-weighted
with weights truncated at ``M``.
"""
from __future__ import annotations

import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from typing import Optional, Sequence

import numpy as np

from . import rng as rngs
from .errors import ConfigError, NumericError
from .mechanisms import fit_stage1
from .models.base import Dataset
from .models.poisson import PoissonBackend
from .risk_weights import WeightConfig, lipschitz_summary, weighted_loglik_matrix, weights_from_loglik

log = logging.getLogger(__name__)

MECHANISMS = ("Unweighted", "Weighted", "WeightedM")


@dataclass(frozen=True)
class StudyConfig:
    ns: Sequence[int] = (100, 400, 1600, 6400)
    R: int = 400
    mu: float = 100.0
    M: float = 3.5
    mechanisms: Sequence[str] = MECHANISMS
    seed: int = 0
    S: int = 500
    # vague prior so the posterior mean is not shrunk towards the prior at n = 100
    a0: float = 0.01
    b0: float = 0.01
    refit: bool = True

    def __post_init__(self):
        ns = tuple(int(n) for n in self.ns)
        object.__setattr__(self, "ns", ns)
        object.__setattr__(self, "mechanisms", tuple(self.mechanisms))
        if not ns or any(n < 1 for n in ns) or any(b <= a for a, b in zip(ns, ns[1:])):
            raise ConfigError(f"ns must be a strictly increasing list of positive sizes, got {ns}")
        if self.R < 1:
            raise ConfigError(f"R must be >= 1, got {self.R}")
        if not self.mu > 0:
            raise ConfigError(f"mu must be positive, got {self.mu}")
        if not self.M > 0:
            raise ConfigError(f"M must be positive, got {self.M}")
        if self.S < 1:
            raise ConfigError(f"S must be >= 1, got {self.S}")
        bad = set(self.mechanisms) - set(MECHANISMS)
        if bad or not self.mechanisms:
            raise ConfigError(f"mechanisms must be a non-empty subset of {MECHANISMS}, got {self.mechanisms}")


@dataclass(frozen=True)
class ReplicateResult:
    delta: dict
    mu_mean: dict


def run_replicate(
    n: int,
    mu: float,
    M: float,
    seed: int,
    key: tuple = (),
    S: int = 500,
    a0: float = 0.01,
    b0: float = 0.01,
    refit: bool = True,
) -> ReplicateResult:
    """One simulated database, three mechanisms.

    With ``refit=False`` the weighted bounds are evaluated on the stage-1
    draws (harness mode), where ``delta_weightedM <= delta_weighted <=
    delta_unweighted`` holds exactly.
    """
    model = PoissonBackend(a0, b0)
    y = rngs.stream(seed, rngs.SIMULATE, *key).poisson(mu, size=n)
    data = Dataset(y)
    fit_seed = rngs.seed_sequence(seed, rngs.REPLICATE, *key)
    st = fit_stage1(data, model, S, fit_seed)
    delta = {"Unweighted": lipschitz_summary(st.loglik).delta_local}
    mu_mean = {"Unweighted": float(st.draws.params["mu"].mean())}
    for name, cfg in (("Weighted", WeightConfig(1.0, 0.0)), ("WeightedM", WeightConfig(1.0, 0.0, M))):
        _, w = weights_from_loglik(st.loglik, cfg)
        if refit:
            # stage-2 reuses the stage-1 stream, like the release pipelines
            draws = model.fit(data, w, S, fit_seed)
            L = model.loglik_matrix(draws, data)
        else:
            draws, L = st.draws, st.loglik
        delta[name] = lipschitz_summary(weighted_loglik_matrix(L, w)).delta_local
        mu_mean[name] = float(draws.params["mu"].mean())
    return ReplicateResult(delta, mu_mean)


def _replicate_task(args):
    cfg, i, n, r = args
    try:
        return i, r, run_replicate(n, cfg.mu, cfg.M, cfg.seed, (i, r), cfg.S, cfg.a0, cfg.b0, cfg.refit), None
    except Exception as exc:  # recorded, not fatal
        return i, r, None, f"{type(exc).__name__}: {exc}"


def _summary(v: np.ndarray) -> dict:
    if v.size == 0:
        return {"count": 0, "min": math.nan, "max": math.nan, "median": math.nan, "spread": math.nan}
    return {
        "count": int(v.size),
        "min": float(v.min()),
        "max": float(v.max()),
        "median": float(np.median(v)),
        "spread": float(v.max() - v.min()),
    }


@dataclass
class StudyResult:
    config: StudyConfig
    delta: dict  # (n, mechanism) -> array of length R (failed replicates dropped)
    mu_mean: dict
    replicate_ids: dict  # n -> replicate indices that succeeded
    failures: list = field(default_factory=list)

    @property
    def n_failures(self) -> int:
        return len(self.failures)

    def summaries(self) -> dict:
        return {key: _summary(v) for key, v in self.delta.items()}

    def mu_summaries(self) -> dict:
        out = {}
        for key, v in self.mu_mean.items():
            se = float(v.std(ddof=1) / np.sqrt(v.size)) if v.size > 1 else math.nan
            out[key] = {"mean": float(v.mean()), "median": float(np.median(v)), "mc_se": se}
        return out

    def rows(self):
        """Long-format records ``(n, mechanism, replicate, delta, mu_mean)``."""
        for n in self.config.ns:
            for mech in self.config.mechanisms:
                for r, d, mm in zip(self.replicate_ids[n], self.delta[(n, mech)], self.mu_mean[(n, mech)]):
                    yield n, mech, int(r), float(d), float(mm)

    def summary_json(self) -> dict:
        cfg = asdict(self.config)
        cfg["ns"] = list(cfg["ns"])
        cfg["mechanisms"] = list(cfg["mechanisms"])
        s, ms = self.summaries(), self.mu_summaries()
        return {
            "config": cfg,
            "failures": self.n_failures,
            "failure_messages": self.failures,
            "summaries": [
                {"n": n, "mechanism": mech, **s[(n, mech)], "mu_mean": ms[(n, mech)]}
                for n in self.config.ns
                for mech in self.config.mechanisms
            ],
        }


def run_study(cfg: StudyConfig, workers: Optional[int] = 1) -> StudyResult:
    """All replicates for every n; output depends only on ``cfg`` (never on ``workers``)."""
    tasks = [(cfg, i, n, r) for i, n in enumerate(cfg.ns) for r in range(cfg.R)]
    if workers is not None and workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as ex:
            results = list(ex.map(_replicate_task, tasks, chunksize=max(1, len(tasks) // (4 * workers))))
    else:
        results = [_replicate_task(t) for t in tasks]

    results.sort(key=lambda t: (t[0], t[1]))
    delta, mu_mean, ids, failures = {}, {}, {}, []
    for i, n in enumerate(cfg.ns):
        ok = [(r, res) for j, r, res, err in results if j == i and res is not None]
        failures += [f"n={n} r={r}: {err}" for j, r, res, err in results if j == i and err is not None]
        ids[n] = np.array([r for r, _ in ok], dtype=int)
        for mech in cfg.mechanisms:
            delta[(n, mech)] = np.array([res.delta[mech] for _, res in ok])
            mu_mean[(n, mech)] = np.array([res.mu_mean[mech] for _, res in ok])
    for msg in failures:
        log.warning("replicate failed: %s", msg)
    if failures and len(failures) == len(tasks):
        raise NumericError(f"every replicate failed; first error: {failures[0]}")
    return StudyResult(cfg, delta, mu_mean, ids, failures)


def utility_drift(cfg: StudyConfig, workers: Optional[int] = 1, result: Optional[StudyResult] = None) -> dict:
    """Per-(n, mechanism) distribution of pseudo-posterior means of mu."""
    result = result or run_study(cfg, workers)
    return dict(result.mu_mean)
