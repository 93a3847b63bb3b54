"""Numerical property and lemma suites, runnable from the CLI.

Each check returns (name, passed, detail).  Scales are desk-sized so the
whole suite finishes in about a minute; the pytest acceptance module runs
the same statements at their full published scales.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .choice import (
    AssortmentContexts,
    choice_probabilities,
    diag_derivative,
    diag_second_derivative,
)
from .confidence import build_confidence_state, in_set_C, in_set_E
from .estimation import History, fit_mle, g_vector, matrix_G, matrix_H, score
from .harness import ExperimentConfig, elliptical_potential_check, run_experiment
from .simulator import sample_ball

__all__ = ["CheckResult", "run_checks", "ALL_CHECKS"]


@dataclass
class CheckResult:
    name: str
    passed: bool
    detail: str


def _random_assortment(rng, d, k_max=5) -> AssortmentContexts:
    k = int(rng.integers(1, k_max + 1))
    ctx = sample_ball(rng, k, d)
    return AssortmentContexts(tuple(range(k)), ctx, np.ones(k))


def _softmax_ref(u: np.ndarray) -> np.ndarray:
    z = np.exp(u - max(float(u.max()), 0.0))
    return z / (math.exp(-max(float(u.max()), 0.0)) + z.sum())


def check_derivative_identities(n_draws: int = 2000, seed: int = 7) -> CheckResult:
    rng = np.random.default_rng(seed)
    h = 1e-5
    worst = 0.0
    for _ in range(n_draws):
        d = int(rng.integers(1, 11))
        ass = _random_assortment(rng, d)
        theta = sample_ball(rng, 1, d, radius=3.0)[0]
        i = int(rng.integers(ass.cardinality))
        u = ass.contexts @ theta
        up, um = u.copy(), u.copy()
        up[i] += h
        um[i] -= h
        fd = (_softmax_ref(up)[i] - _softmax_ref(um)[i]) / (2.0 * h)
        an = diag_derivative(ass, theta, i)
        worst = max(worst, abs(fd - an) / max(abs(an), 1e-12))
    return CheckResult(
        "derivative finite differences", worst < 1e-6, f"worst rel err {worst:.3g}"
    )


def check_self_concordance(n_draws: int = 5000, seed: int = 11) -> CheckResult:
    rng = np.random.default_rng(seed)
    violations = 0
    for _ in range(n_draws):
        d = int(rng.integers(1, 11))
        ass = _random_assortment(rng, d)
        theta = sample_ball(rng, 1, d, radius=3.0)[0]
        i = int(rng.integers(ass.cardinality))
        if abs(diag_second_derivative(ass, theta, i)) > diag_derivative(ass, theta, i) + 1e-15:
            violations += 1
    return CheckResult("self-concordance |mu''| <= mu'", violations == 0, f"{violations} violations")


def check_probability_normalization(n_draws: int = 2000, seed: int = 13) -> CheckResult:
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(n_draws):
        d = int(rng.integers(1, 11))
        ass = _random_assortment(rng, d)
        theta = sample_ball(rng, 1, d, radius=3.0)[0]
        dist = choice_probabilities(ass, theta)
        worst = max(worst, abs(float(dist.item_probs.sum()) + dist.no_purchase_prob - 1.0))
    return CheckResult("probability normalization", worst < 1e-12, f"worst gap {worst:.3g}")


def _random_history(rng, d, K, rounds) -> History:
    hist = History(d)
    for _ in range(rounds):
        k = int(rng.integers(1, K + 1))
        ctx = sample_ball(rng, k, d)
        ass = AssortmentContexts(tuple(range(k)), ctx, np.ones(k))
        hist.append(ass, int(rng.integers(0, k + 1)))
    return hist


def check_mle_stationarity(n_fits: int = 20, seed: int = 17) -> CheckResult:
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(n_fits):
        d = int(rng.integers(1, 6))
        hist = _random_history(rng, d, 3, int(rng.integers(1, 30)))
        lam = float(rng.uniform(1.0, 5.0))
        res = fit_mle(hist, lam)
        worst = max(worst, float(np.linalg.norm(score(hist, res.theta_hat, lam))))
    return CheckResult("MLE stationarity", worst <= 1e-8, f"worst score norm {worst:.3g}")


def check_lemma2_psd(n_configs: int = 200, seed: int = 19, S: float = 1.0) -> CheckResult:
    """G(th1, th2) dominates (1+2S)^-1 H(th_j) on single-item histories.

    The difference quotient behind G mixes in cross-item effects once an
    assortment has two or more items, and the ordering admits
    counterexamples there; with one item per round it is an exact mean
    value of the diagonal derivative and the ordering is sound.
    """
    rng = np.random.default_rng(seed)
    worst = math.inf
    for _ in range(n_configs):
        d = int(rng.integers(1, 6))
        hist = _random_history(rng, d, 1, int(rng.integers(1, 21)))
        lam = float(rng.uniform(1.0, 20.0))
        th1 = sample_ball(rng, 1, d, radius=S)[0]
        th2 = sample_ball(rng, 1, d, radius=S)[0]
        g = matrix_G(hist, th1, th2, lam).matrix
        for th in (th1, th2):
            h = matrix_H(hist, th, lam).matrix
            diff = g - h / (1.0 + 2.0 * S)
            worst = min(worst, float(np.linalg.eigvalsh(diff)[0]))
    return CheckResult("PSD ordering of G against H", worst >= -1e-9, f"min eigenvalue {worst:.3g}")


def check_g_identity(n_configs: int = 100, seed: int = 23) -> CheckResult:
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(n_configs):
        d = int(rng.integers(1, 5))
        hist = _random_history(rng, d, 3, int(rng.integers(1, 15)))
        lam = float(rng.uniform(1.0, 3.0))
        th1 = sample_ball(rng, 1, d, radius=2.0)[0]
        th2 = sample_ball(rng, 1, d, radius=2.0)[0]
        lhs = g_vector(hist, th1, lam) - g_vector(hist, th2, lam)
        rhs = matrix_G(hist, th1, th2, lam).matrix @ (th1 - th2)
        worst = max(worst, float(np.linalg.norm(lhs - rhs)))
    return CheckResult("difference-quotient identity for g", worst < 1e-8, f"worst gap {worst:.3g}")


def check_lemma8_inclusion(n_snapshots: int = 10, per_snapshot: int = 20, seed: int = 29) -> CheckResult:
    rng = np.random.default_rng(seed)
    cfg = ExperimentConfig(d=2, N=4, K=2, T=40, policy="random", seeds=[0])
    violations = 0
    tested = 0
    for snap in range(n_snapshots):
        run = run_experiment(cfg, seed=100 + snap)
        hist = run.history
        ccfg = cfg.confidence_config()
        state = build_confidence_state(hist, ccfg, t=hist.t + 1)
        members = _sample_c_members(rng, hist, ccfg, state, per_snapshot)
        for th in members:
            tested += 1
            if not in_set_E(th, hist, ccfg, state):
                violations += 1
    return CheckResult(
        "convex set contains the norm-based set",
        violations == 0 and tested > 0,
        f"{violations} violations over {tested} members",
    )


def _sample_c_members(rng, hist, ccfg, state, want, max_tries=4000):
    """Rejection-sample members of the norm-based set around the MLE."""
    d = hist.dim
    h_hat = state.H_hat.matrix
    chol = np.linalg.cholesky(np.linalg.inv(h_hat))
    members = []
    radius = 1.5 * state.gamma
    tries = 0
    while len(members) < want and tries < max_tries:
        tries += 1
        z = rng.standard_normal(d)
        z *= radius * rng.random() ** (1.0 / d) / float(np.linalg.norm(z))
        cand = state.theta_hat + chol @ z
        if in_set_C(cand, hist, ccfg, state):
            members.append(cand)
    return members


def check_elliptical_potential(seed: int = 31) -> CheckResult:
    cfg = ExperimentConfig(d=2, N=4, K=2, T=80, policy="random", seeds=[0])
    run = run_experiment(cfg, seed=seed)
    rep = elliptical_potential_check(run, run.history)
    return CheckResult(
        "elliptical potential and determinant-trace",
        rep.ok,
        f"potential {rep.potential_lhs:.3f} <= {rep.potential_rhs:.3f}, "
        f"det {rep.det_trace_lhs:.3f} <= {rep.det_trace_rhs:.3f}",
    )


def check_coverage_smoke(n_runs: int = 10, seed0: int = 300) -> CheckResult:
    cfg = ExperimentConfig(d=2, N=3, K=2, T=60, policy="cb_mnl_e", refine_top=1, n_dirs=8, seeds=[0])
    covered = sum(run_experiment(cfg, seed0 + i).coverage_all for i in range(n_runs))
    return CheckResult(
        "coverage smoke test", covered >= int(0.8 * n_runs), f"{covered}/{n_runs} runs fully covered"
    )


def check_lemma5_bound(seed: int = 37) -> CheckResult:
    cfg = ExperimentConfig(d=2, N=3, K=2, T=60, policy="cb_mnl_e", refine_top=1, n_dirs=8, seeds=[0])
    run = run_experiment(cfg, seed=seed)
    bad = [
        r.t
        for r in run.records
        if r.covered_C and r.theta_in_C and r.dev_H > r.dev_bound + 1e-9
    ]
    return CheckResult(
        "deviation bound in the H(theta_star) norm", not bad, f"{len(bad)} violating rounds"
    )


ALL_CHECKS = [
    check_probability_normalization,
    check_derivative_identities,
    check_self_concordance,
    check_mle_stationarity,
    check_g_identity,
    check_lemma2_psd,
    check_lemma8_inclusion,
    check_lemma5_bound,
    check_elliptical_potential,
    check_coverage_smoke,
]


def run_checks(names: list[str] | None = None) -> list[CheckResult]:
    results = []
    for fn in ALL_CHECKS:
        short = fn.__name__.removeprefix("check_")
        if names and short not in names:
            continue
        results.append(fn())
    return results
