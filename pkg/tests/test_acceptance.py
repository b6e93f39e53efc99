"""Acceptance gate: one test per criterion, each printing a PASS/FAIL line.

Run alone with ``pytest tests/test_acceptance.py -v`` (lines are repeated in
the terminal summary) or ``python tests/test_acceptance.py``.
"""
import os
import time
from concurrent.futures import ProcessPoolExecutor

import numpy as np
import pytest

from pseudodp import rng as rngs
from pseudodp.cli import main as cli_main
from pseudodp.contraction import StudyConfig, run_study
from pseudodp.mechanisms import MechanismKind, fit_stage1, run_alpha_weighted, run_em_scalar, run_unweighted
from pseudodp.models import Dataset, MixtureBackend, PoissonBackend
from pseudodp.models.poisson import posterior_params
from pseudodp.risk_weights import (
    LogLikMatrix,
    RiskScores,
    WeightConfig,
    Weights,
    apply_m_truncation,
    compute_weights,
    em_scalar_weight,
    lipschitz_summary,
    record_risk,
    weighted_loglik_matrix,
    weights_from_loglik,
)
from pseudodp.utility import StatSpec, barycenter, compare_mechanisms, risk_utility_sweep, simulate_ce_like

RESULTS = {}
WORKERS = os.cpu_count() or 1


def record(num: int, ok: bool, detail: str) -> None:
    line = f"{'PASS' if ok else 'FAIL'} criterion {num}: {detail}"
    RESULTS[num] = line
    print(line)
    assert ok, line


# 1 ---------------------------------------------------------------------------


def test_criterion_01_conjugacy_oracle():
    t0 = time.perf_counter()
    y = rngs.stream(2024, rngs.SIMULATE).poisson(100, size=100)
    data = Dataset(y)
    model = PoissonBackend()
    st = fit_stage1(data, model, 1000, 2024)
    _, w = weights_from_loglik(st.loglik, WeightConfig(0.7, 0.0))
    S = 10_000
    mu = model.fit(data, w, S, rngs.seed_sequence(2024, rngs.FIT)).params["mu"]
    shape, rate = posterior_params(y, w, model.a0, model.b0)
    mean, var = shape / rate, shape / rate**2
    se_mean = np.sqrt(var / S)
    se_var = np.sqrt((3 * var**2 * (1 + 2 / shape) - var**2) / S)
    z_mean = abs(mu.mean() - mean) / se_mean
    z_var = abs(mu.var(ddof=1) - var) / se_var
    elapsed = time.perf_counter() - t0
    ok = z_mean < 4 and z_var < 4 and elapsed < 5
    record(1, ok, f"|mean err|={z_mean:.2f} SE, |var err|={z_var:.2f} SE (limit 4), {elapsed:.2f}s (limit 5s)")


# 2 ---------------------------------------------------------------------------


def _identity_case(data, model, S, m, seed, burn_in):
    st = fit_stage1(data, model, S, seed, burn_in)
    unw = run_unweighted(data, model, S, m, seed, burn_in, stage1=st)
    ones_cfg = WeightConfig(1.0, 1.0)  # clamps every weight to 1
    _, w = weights_from_loglik(st.loglik, ones_cfg)
    rel = run_alpha_weighted(data, model, ones_cfg, S, m, seed, burn_in, stage1=st)
    refit = model.fit(data, w, S, rngs.seed_sequence(seed, rngs.FIT), burn_in)
    same_draws = all(refit.params[k].tobytes() == st.draws.params[k].tobytes() for k in refit.params)
    same_delta = rel.lipschitz.delta_local == unw.lipschitz.delta_local
    same_records = all(a.tobytes() == b.tobytes() for a, b in zip(rel.databases, unw.databases))
    return bool(np.all(w.alpha == 1.0)) and same_draws and same_delta and same_records


def test_criterion_02_identity_reduction():
    pois = Dataset(rngs.stream(7, rngs.SIMULATE).poisson(100, size=200))
    y, X = simulate_ce_like(300, 7)
    ok_p = _identity_case(pois, PoissonBackend(), 500, 5, 7, None)
    ok_m = _identity_case(Dataset(y, X), MixtureBackend(K=5, log_response=True), 50, 5, 7, 50)
    record(2, ok_p and ok_m, f"bit-identical draws, delta and records: poisson={ok_p}, mixture={ok_m}")


# 3 ---------------------------------------------------------------------------


def test_criterion_03_dominance():
    rng = np.random.default_rng(3)
    bad_dom, bad_em = 0, 0
    for _ in range(200):
        S, n = rng.integers(1, 40), rng.integers(1, 60)
        L = LogLikMatrix(rng.standard_normal((S, n)) * rng.uniform(0.1, 100) - rng.uniform(0, 50))
        c, g = rng.uniform(0.05, 1.0), rng.uniform(-0.5, 0.5)
        _, w = weights_from_loglik(L, WeightConfig(c, g))
        d_unw = lipschitz_summary(L).delta_local
        if lipschitz_summary(weighted_loglik_matrix(L, w)).delta_local > d_unw:
            bad_dom += 1
        if d_unw > 0:
            w_em = em_scalar_weight(rng.uniform(0.01, 2.0) * d_unw, d_unw)
            d_em = lipschitz_summary(weighted_loglik_matrix(L, Weights.constant(w_em, L.n_records))).delta_local
            if d_em != w_em * d_unw:
                bad_em += 1
    # and through the pipeline in harness mode
    data = Dataset(rngs.stream(3, rngs.SIMULATE).poisson(100, size=150))
    model = PoissonBackend()
    st = fit_stage1(data, model, 300, 3)
    d_unw = lipschitz_summary(st.loglik).delta_local
    rel_a = run_alpha_weighted(data, model, WeightConfig(0.7, 0.0), 300, 2, 3, refit=False, stage1=st)
    rel_e = run_em_scalar(data, model, rel_a.lipschitz.epsilon_per_db, 300, 2, 3, refit=False, stage1=st)
    pipe_ok = rel_a.lipschitz.delta_local <= d_unw and rel_e.lipschitz.delta_local == rel_e.em_weight * d_unw
    ok = bad_dom == 0 and bad_em == 0 and pipe_ok
    record(3, ok, f"200 matrices: dominance violations={bad_dom}, EM w*delta mismatches={bad_em}; pipeline harness={pipe_ok}")


# 4 ---------------------------------------------------------------------------


def test_criterion_04_weight_contract():
    rng = np.random.default_rng(4)
    violations = 0
    checked = 0
    for _ in range(200):
        n = int(rng.integers(1, 80))
        vals = rng.standard_normal((int(rng.integers(1, 10)), n)) * rng.uniform(0.1, 30)
        bad_cols = rng.uniform(size=n) < 0.1
        vals[0, bad_cols] = rng.choice([np.inf, -np.inf, np.nan], size=int(bad_cols.sum()))
        if bad_cols.all():
            vals[0, 0] = 0.0
            bad_cols[0] = False
        r = record_risk(LogLikMatrix(vals))
        for c in (0.1, 0.5, 0.7, 1.0):
            for g in (-0.3, -0.1, 0.0, 0.2):
                w = compute_weights(r, WeightConfig(c, g))
                a = w.alpha
                violations += int(np.any(a < 0) or np.any(a > 1) or np.any(a[bad_cols] != 0))
                for M in (0.5, 3.5, 20.0):
                    t = apply_m_truncation(w, r, M).alpha
                    with np.errstate(invalid="ignore"):
                        ok_trunc = (t * r.f <= M) | (t == 0)
                    violations += int(not np.all(ok_trunc))
                    checked += 1
    record(4, violations == 0, f"{checked} (risk vector, c, g, M) cases, violations={violations}")


# 5 and 6 share one study --------------------------------------------------------

STUDY = StudyConfig(ns=(100, 400, 1600), R=50, mu=100.0, M=3.5, seed=0)


@pytest.fixture(scope="module")
def study():
    t0 = time.perf_counter()
    res = run_study(STUDY, workers=WORKERS)
    return res, time.perf_counter() - t0


def test_criterion_05_contraction(study):
    res, elapsed = study
    s = res.summaries()
    med = s[(1600, "WeightedM")]["median"]
    a = 0.85 * 3.5 <= med <= 1.15 * 3.5
    b = all(s[(n, "WeightedM")]["spread"] < s[(n, "Unweighted")]["spread"] for n in STUDY.ns)
    sp100, sp1600 = s[(100, "Weighted")]["spread"], s[(1600, "Weighted")]["spread"]
    c = sp1600 < sp100
    spreads = ", ".join(
        f"n={n}: M {s[(n, 'WeightedM')]['spread']:.3f} < U {s[(n, 'Unweighted')]['spread']:.3f}" for n in STUDY.ns
    )
    detail = (
        f"(a) median WeightedM@1600={med:.3f} in [2.975, 4.025]: {a}; "
        f"(b) {spreads}: {b}; "
        f"(c) spread Weighted@1600={sp1600:.3f} < @100={sp100:.3f}: {c}; "
        f"failures={res.n_failures}, {elapsed:.1f}s on {WORKERS} worker(s)"
    )
    record(5, a and b and c and res.n_failures == 0, detail)


def test_criterion_06_utility_drift(study):
    res, _ = study
    ms = res.mu_summaries()
    centered = {n: abs(ms[(n, "Unweighted")]["mean"] - 100.0) / ms[(n, "Unweighted")]["mc_se"] for n in STUDY.ns}
    a = all(z <= 2.0 for z in centered.values())
    bias_m = abs(ms[(1600, "WeightedM")]["median"] - 100.0)
    bias_u = abs(ms[(1600, "Unweighted")]["median"] - 100.0)
    b = bias_m >= bias_u
    zs = ", ".join(f"n={n}: {z:.2f}" for n, z in centered.items())
    record(6, a and b, f"Unweighted |mean-100|/MCSE ({zs}) <= 2: {a}; |median bias| M={bias_m:.3f} >= U={bias_u:.3f}: {b}")


# 7 ---------------------------------------------------------------------------

C7 = dict(n=2000, K=20, S=300, burn_in=300, m=20, c=0.7, g=0.0, B=500, seeds=range(25))


def _c7_run(seed):
    y, X = simulate_ce_like(C7["n"], seed)
    out = compare_mechanisms(
        Dataset(y, X),
        MixtureBackend(K=C7["K"], log_response=True),
        WeightConfig(C7["c"], C7["g"]),
        C7["S"],
        C7["m"],
        seed,
        (StatSpec("quantile", 0.9, C7["B"]),),
        C7["burn_in"],
        calibrate=True,
        include_unweighted=False,
    )
    rel_a, util_a = out[MechanismKind.ALPHA_WEIGHTED]
    rel_e, util_e = out[MechanismKind.EM_SCALAR]
    eps_a, eps_e = rel_a.lipschitz.epsilon_per_db, rel_e.lipschitz.epsilon_per_db
    return seed, util_a["q90"]["abs_error"], util_e["q90"]["abs_error"], abs(eps_e - eps_a) / eps_a


@pytest.mark.slow
def test_criterion_07_alpha_vs_em():
    t0 = time.perf_counter()
    if WORKERS > 1:
        with ProcessPoolExecutor(max_workers=WORKERS) as ex:
            runs = list(ex.map(_c7_run, C7["seeds"]))
    else:
        runs = [_c7_run(s) for s in C7["seeds"]]
    elapsed = time.perf_counter() - t0
    wins = sum(ea <= ee for _, ea, ee, _ in runs)
    band = sum(gap <= 0.02 for *_, gap in runs)
    frac = wins / len(runs)
    per_seed = " ".join(f"{s}:{ea:.2f}/{ee:.2f}" for s, ea, ee, _ in runs)
    print(f"criterion 7 per-seed q90 abs error alpha/EM: {per_seed}")
    ok = frac >= 0.8 and band == len(runs) and elapsed < 20 * 60
    record(
        7,
        ok,
        f"alpha q90 error <= EM in {wins}/{len(runs)} runs ({frac:.0%}, need >= 80%); "
        f"EM within 2% of target eps in {band}/{len(runs)}; {elapsed / 60:.1f} min (limit 20)",
    )


# 8 ---------------------------------------------------------------------------

SWEEP_GRID = [(0.7, 0.0), (0.6, 0.0), (0.6, -0.1), (0.5, 0.0), (0.5, -0.1), (0.5, -0.3)]


def test_criterion_08_sweep_monotone():
    y, X = simulate_ce_like(2000, 8)
    data = Dataset(y, X)
    model = MixtureBackend(K=20, log_response=True)
    st = fit_stage1(data, model, 300, 8, 300)
    res = risk_utility_sweep(
        data, model, SWEEP_GRID, 300, 5, 8, (StatSpec("mean", resamples=20),), 300, refit=False, stage1=st, workers=1
    )
    d = {(r.c, r.g): r.delta for r in res.rows}
    ok = d[(0.7, 0.0)] >= d[(0.6, 0.0)] >= d[(0.5, 0.0)] > d[(0.5, -0.3)]
    table = ", ".join(f"({c:g},{g:g})={d[(c, g)]:.3f}" for c, g in SWEEP_GRID)
    record(8, ok, f"harness deltas {table}; unweighted={lipschitz_summary(st.loglik).delta_local:.3f}")


# 9 ---------------------------------------------------------------------------


def test_criterion_09_barycenter():
    rng = np.random.default_rng(9)
    v = rng.standard_normal(50)
    idem = barycenter([v] * 7).tobytes() == np.sort(v).tobytes()
    ex1 = np.array_equal(barycenter([np.zeros(3), np.full(3, 2.0)]), [1.0, 1.0, 1.0])
    ex2 = np.array_equal(barycenter([[1.0, 3.0], [2.0, 10.0]]), [1.5, 6.5])
    bad = 0
    for _ in range(200):
        m, B = rng.integers(1, 10), rng.integers(1, 40)
        vs = rng.standard_normal((m, B)) * rng.uniform(0.1, 1e3, size=(m, 1))
        bc = barycenter(list(vs))
        srt = np.sort(vs, axis=1)
        bad += int(not (np.all(srt.min(axis=0) <= bc) and np.all(bc <= srt.max(axis=0))))
    record(9, idem and ex1 and ex2 and bad == 0, f"idempotent={idem}, examples={ex1 and ex2}, bound violations={bad}/200")


# 10 --------------------------------------------------------------------------


def test_criterion_10_replayability(tmp_path):
    import yaml

    y, _ = simulate_ce_like(200, 10)
    (tmp_path / "in.csv").write_text("income\n" + "\n".join(repr(float(v)) for v in y) + "\n")
    run = {"model": "mixture", "input": "in.csv", "response": "income", "seed": 10, "S": 40, "burn_in": 40, "m": 4, "K": 4}
    (tmp_path / "run.yaml").write_text(yaml.safe_dump(run))
    sweep = dict(run, grid=[[0.7, 0.0], [0.5, 0.0], [0.5, -0.3]], B=20)
    (tmp_path / "sweep.yaml").write_text(yaml.safe_dump(sweep))
    em = dict(run, mechanism="EmScalar", epsilon_target=2.0, calibrate=True)
    (tmp_path / "em.yaml").write_text(yaml.safe_dump(em))
    study = {"ns": [100, 400], "R": 6, "seed": 10, "S": 100}
    (tmp_path / "study.yaml").write_text(yaml.safe_dump(study))

    mismatched = []
    for cmd, cfg in (("synthesize", "run"), ("synthesize", "em"), ("sweep", "sweep"), ("contraction", "study")):
        outs = []
        for workers in ("1", "2"):
            out = tmp_path / f"{cfg}_{workers}"
            assert cli_main([cmd, "--config", str(tmp_path / f"{cfg}.yaml"), "--out", str(out), "--workers", workers]) == 0
            outs.append(out)
        for f in sorted(outs[0].iterdir()):
            if f.read_bytes() != (outs[1] / f.name).read_bytes():
                mismatched.append(f"{cfg}/{f.name}")
    record(10, not mismatched, f"synthesize(alpha, EM), sweep, contraction byte-identical across runs/--workers 1,2; mismatches={mismatched}")


if __name__ == "__main__":
    raise SystemExit(pytest.main([__file__, "-v", "-s"]))
