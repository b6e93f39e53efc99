"""Utility of synthetic releases: bootstrap statistic distributions, their
1-D Wasserstein barycenter across the m databases, and (c, g) sweeps."""
from __future__ import annotations

import logging
import warnings as _warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from . import rng as rngs
from .errors import ConfigError
from .mechanisms import (
    MechanismKind,
    Stage1,
    SyntheticRelease,
    fit_stage1,
    run_alpha_weighted,
    run_em_scalar,
    run_unweighted,
)
from .models.base import Dataset, ModelBackend
from .risk_weights import WeightConfig

log = logging.getLogger(__name__)

DEFAULT_B = 500
QUANTILE_METHOD = "linear"  # type-7 interpolation of the empirical CDF


@dataclass(frozen=True)
class StatSpec:
    kind: str = "mean"
    p: Optional[float] = None
    resamples: int = DEFAULT_B

    def __post_init__(self):
        if self.kind not in ("mean", "quantile"):
            raise ConfigError(f"statistic kind must be 'mean' or 'quantile', got {self.kind!r}")
        if self.kind == "quantile" and not (self.p is not None and 0.0 < self.p < 1.0):
            raise ConfigError(f"quantile level must lie in (0, 1), got {self.p}")
        if self.resamples < 1:
            raise ConfigError(f"resamples must be >= 1, got {self.resamples}")

    @property
    def name(self) -> str:
        return "mean" if self.kind == "mean" else f"q{round(100 * self.p):02d}"

    def evaluate(self, x, axis=-1):
        if self.kind == "mean":
            return np.mean(x, axis=axis)
        return np.quantile(x, self.p, axis=axis, method=QUANTILE_METHOD)


MEAN = StatSpec("mean")
Q90 = StatSpec("quantile", 0.9)


def statistic_distribution(db, spec: StatSpec, seed: int, key: tuple = (), resample: bool = True) -> np.ndarray:
    """B values of the statistic over bootstrap resamples (size n, with replacement).

    ``resample=False`` returns B copies of the statistic on ``db`` itself.
    """
    db = np.asarray(db, dtype=float)
    if db.size == 0:
        raise ValueError("cannot resample an empty database")
    B = spec.resamples
    if not resample:
        return np.full(B, float(spec.evaluate(db)))
    rng = rngs.stream(seed, rngs.BOOTSTRAP, *key)
    out = np.empty(B)
    # chunked so B x n index arrays stay small
    step = max(1, 2_000_000 // db.size)
    for lo in range(0, B, step):
        hi = min(B, lo + step)
        idx = rng.integers(0, db.size, size=(hi - lo, db.size))
        out[lo:hi] = spec.evaluate(db[idx], axis=1)
    return out


def barycenter(dists) -> np.ndarray:
    """Average of the sorted vectors (the quantile functions) elementwise."""
    arrs = [np.sort(np.asarray(d, dtype=float)) for d in dists]
    if not arrs:
        raise ValueError("need at least one distribution")
    if len({a.shape for a in arrs}) != 1 or arrs[0].ndim != 1:
        raise ValueError("all distributions must be 1-D vectors of equal length")
    stacked = np.stack(arrs)
    # offset form keeps m identical inputs exact (a plain mean can round)
    offset = np.mean(stacked - stacked[0], axis=0)
    return np.where(offset == 0, stacked[0], stacked[0] + offset)


def release_utility(release: SyntheticRelease, real_y, stats: Sequence[StatSpec], seed: int) -> dict:
    """Per statistic: barycenter over the m databases and |median(barycenter) - real statistic|."""
    out = {}
    for k, spec in enumerate(stats):
        dists = [statistic_distribution(db, spec, seed, (k, j)) for j, db in enumerate(release.databases)]
        bc = barycenter(dists)
        real = float(spec.evaluate(np.asarray(real_y, dtype=float)))
        out[spec.name] = {
            "barycenter": bc,
            "per_database": dists,
            "real": real,
            "abs_error": abs(float(np.median(bc)) - real),
        }
    return out


# sweeps -------------------------------------------------------------------


@dataclass
class SweepRow:
    c: float
    g: float
    delta: float
    epsilon_total: float
    abs_error: dict
    barycenters: dict = field(repr=False, default_factory=dict)
    error: Optional[str] = None


@dataclass
class SweepResult:
    rows: list
    stats: tuple
    real: dict

    def csv_rows(self):
        for row in self.rows:
            for spec in self.stats:
                yield row.c, row.g, row.delta, row.epsilon_total, spec.name, row.abs_error.get(spec.name, float("nan"))


def dedupe_grid(grid) -> list:
    seen, out = set(), []
    for c, g in grid:
        cell = (float(c), float(g))
        if cell in seen:
            _warnings.warn(f"duplicate (c, g) cell {cell} dropped", stacklevel=3)
            continue
        seen.add(cell)
        out.append(cell)
    return out


def _sweep_cell(args):
    data, model, cell, S, m, seed, burn_in, refit, stage1, stats = args
    c, g = cell
    try:
        rel = run_alpha_weighted(data, model, WeightConfig(c, g), S, m, seed, burn_in, refit=refit, stage1=stage1)
        util = release_utility(rel, data.y, stats, seed)
        return SweepRow(
            c,
            g,
            rel.lipschitz.delta_local,
            rel.lipschitz.epsilon_total,
            {k: v["abs_error"] for k, v in util.items()},
            {k: v["barycenter"] for k, v in util.items()},
        )
    except Exception as exc:  # recorded per cell
        return SweepRow(c, g, float("nan"), float("nan"), {}, {}, f"{type(exc).__name__}: {exc}")


def risk_utility_sweep(
    data: Dataset,
    model: ModelBackend,
    grid,
    S: int,
    m: int,
    seed: int,
    stats: Sequence[StatSpec] = (MEAN, Q90),
    burn_in: Optional[int] = None,
    refit: bool = True,
    stage1: Optional[Stage1] = None,
    workers: Optional[int] = 1,
) -> SweepResult:
    """Alpha-weighted release for every (c, g) cell, all cells sharing one stage-1 fit."""
    cells = dedupe_grid(grid)
    if not cells:
        raise ConfigError("grid must be non-empty")
    stats = tuple(stats)
    st = stage1 or fit_stage1(data, model, S, seed, burn_in)
    tasks = [(data, model, cell, S, m, seed, burn_in, refit, st, stats) for cell in cells]
    if workers is not None and workers > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=workers) as ex:
            rows = list(ex.map(_sweep_cell, tasks))
    else:
        rows = [_sweep_cell(t) for t in tasks]
    for row in rows:
        if row.error:
            log.warning("sweep cell (c=%g, g=%g) failed: %s", row.c, row.g, row.error)
    real = {spec.name: float(spec.evaluate(data.y)) for spec in stats}
    return SweepResult(rows, stats, real)


def compare_mechanisms(
    data: Dataset,
    model: ModelBackend,
    cfg: WeightConfig,
    S: int,
    m: int,
    seed: int,
    stats: Sequence[StatSpec] = (MEAN, Q90),
    burn_in: Optional[int] = None,
    calibrate: bool = True,
    include_unweighted: bool = True,
) -> dict:
    """Unweighted, alpha-weighted and EM releases at a matched privacy target.

    The EM target is the alpha-weighted release's per-database epsilon.
    Returns ``{kind: (release, utility)}``.
    """
    st = fit_stage1(data, model, S, seed, burn_in)
    out = {}
    if include_unweighted:
        rel = run_unweighted(data, model, S, m, seed, burn_in, stage1=st)
        out[MechanismKind.UNWEIGHTED] = (rel, release_utility(rel, data.y, stats, seed))
    rel_a = run_alpha_weighted(data, model, cfg, S, m, seed, burn_in, stage1=st)
    out[MechanismKind.ALPHA_WEIGHTED] = (rel_a, release_utility(rel_a, data.y, stats, seed))
    rel_e = run_em_scalar(
        data, model, rel_a.lipschitz.epsilon_per_db, S, m, seed, calibrate=calibrate, burn_in=burn_in, stage1=st
    )
    out[MechanismKind.EM_SCALAR] = (rel_e, release_utility(rel_e, data.y, stats, seed))
    return out


# skewed-income stand-in -----------------------------------------------------

#: categorical predictors (name, number of levels), after the CE interview schema
CE_PREDICTORS = (
    ("gender", 2),
    ("age", 5),
    ("education", 8),
    ("region", 4),
    ("urban", 2),
    ("marital", 5),
    ("urban_type", 3),
    ("cbsa", 3),
    ("family_size", 11),
    ("earner", 2),
)

# generator constants (version 1); changing them changes every seeded dataset
_CE_VERSION = 1
_LOG_INCOME_BASE = 3.6  # log of income in $1000s
_EFFECT_SCALE = {"education": 0.12, "age": 0.08, "earner": 0.45, "family_size": 0.05, "region": 0.04}
_NOISE_COMPONENTS = ((0.80, 0.0, 0.55), (0.17, 0.5, 0.75), (0.03, 1.6, 0.6))  # (weight, shift, sd) on log income


def simulate_ce_columns(n: int, seed: int) -> tuple[np.ndarray, dict]:
    """Skewed income (in $1000s) and raw integer-coded categorical predictors."""
    if n < 1:
        raise ValueError("n must be >= 1")
    rng = rngs.stream(seed, rngs.SIMULATE, _CE_VERSION)
    cats = {}
    for name, levels in CE_PREDICTORS:
        # geometric-ish level probabilities keep some levels sparse
        p = 0.75 ** np.arange(levels)
        cats[name] = rng.choice(levels, size=n, p=p / p.sum())
    eta = np.full(n, _LOG_INCOME_BASE)
    for name, scale in _EFFECT_SCALE.items():
        eta += scale * cats[name]
    eta -= 0.2 * (cats["age"] == 4)  # retirement-age dip
    w, shift, sd = map(np.array, zip(*_NOISE_COMPONENTS))
    comp = rng.choice(len(w), size=n, p=w)
    log_income = eta + shift[comp] + sd[comp] * rng.standard_normal(n)
    return np.exp(log_income), cats


def one_hot(cats: dict, levels: Optional[dict] = None, intercept: bool = True) -> np.ndarray:
    """Dummy-code categorical columns, dropping each column's first level."""
    cols = [np.ones(len(next(iter(cats.values()))))] if intercept else []
    for name, codes in cats.items():
        codes = np.asarray(codes)
        lv = levels[name] if levels is not None else np.unique(codes)
        for level in list(lv)[1:]:
            cols.append((codes == level).astype(float))
    return np.column_stack(cols)


def simulate_ce_like(n: int, seed: int) -> tuple[np.ndarray, np.ndarray]:
    """Right-skewed income response and a one-hot design (intercept plus dummies)."""
    y, cats = simulate_ce_columns(n, seed)
    levels = {name: np.arange(k) for name, k in CE_PREDICTORS}
    return y, one_hot(cats, levels)
