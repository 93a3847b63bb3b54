"""Experiment orchestration: seeded runs, regret accounting, diagnostics, IO.

A run is fully determined by (config, seed).  Each round serves contexts,
fits the MLE, builds the confidence snapshot, lets the policy decide,
samples the consumer's choice, and appends the round to the history.  The
per-round trace is written as CSV with the fixed header

    t,assortment,outcome,opt_value,oracle_value,inst_regret,cum_regret,
    gamma,beta,covered,dev_H,dev_bound

and reals printed with 17 significant digits, so reruns are byte-identical.
Diagnostics that need theta_star (coverage, deviation norms, the potential
checks) are simulator-side only; the policy never reads them.
"""
from __future__ import annotations

import json
import math
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np

from . import __version__
from .choice import AssortmentContexts, choice_probabilities, expected_revenue
from .confidence import (
    ConfidenceConfig,
    ConfidenceState,
    build_confidence_state,
    default_lambda,
    in_set_C,
    in_set_E,
)
from .estimation import History, matrix_V
from .policy import (
    Decision,
    PolicyKind,
    bonus_ucb_step,
    cb_mnl_step,
    oracle_assortment,
    random_assortment,
)
from .simulator import (
    FIXED_POOL,
    Instance,
    InstanceConfig,
    TAG_OUTCOME,
    TAG_POLICY,
    environment_step,
    estimate_kappa,
    make_instance,
    serve_contexts,
    stream,
)

__all__ = [
    "ExperimentConfig",
    "RoundRecord",
    "RunLog",
    "EllipticalReport",
    "RunSummary",
    "run_experiment",
    "run_many",
    "elliptical_potential_check",
    "summarize_runs",
    "save_runs",
    "loglog_slope",
    "CSV_HEADER",
]

CSV_HEADER = (
    "t,assortment,outcome,opt_value,oracle_value,inst_regret,cum_regret,"
    "gamma,beta,covered,dev_H,dev_bound"
)


def _fmt(x: float) -> str:
    return format(float(x), ".17g")


@dataclass
class ExperimentConfig:
    """Everything a run needs besides the seed; JSON round-trippable."""

    d: int = 2
    N: int = 8
    K: int = 2
    T: int = 500
    S: float = 1.0
    S_true: float = 1.0
    context_mode: str = FIXED_POOL
    prices: list[float] | None = None
    policy: str = PolicyKind.CB_MNL_E.value
    delta: float = 0.1
    lambda_override: float | None = None
    L_const: float = 0.25
    restarts: int = 5
    n_dirs: int = 16
    refine_top: int | None = 1
    refine_iters: int = 40
    mle_tol: float = 1e-8
    mle_max_iter: int = 100
    kappa_grid: int = 256
    track_c_stats: bool = True  # per-round membership diagnostics for the norm-based set
    seeds: list[int] = field(default_factory=lambda: [0])
    out_dir: str | None = None

    def __post_init__(self) -> None:
        if self.T < 0:
            raise ValueError(f"T must be >= 0, got {self.T}")
        if not 0.0 < self.delta <= 1.0:
            raise ValueError(f"delta must be in (0, 1], got {self.delta}")
        if not self.seeds:
            raise ValueError("seeds must be nonempty")
        PolicyKind(self.policy)  # raises on unknown kinds

    @property
    def lam(self) -> float:
        if self.lambda_override is not None:
            return float(self.lambda_override)
        return default_lambda(self.d, self.K, max(self.T, 1))

    def instance_config(self) -> InstanceConfig:
        return InstanceConfig(
            d=self.d,
            N=self.N,
            K=self.K,
            S=self.S,
            S_true=self.S_true,
            context_mode=self.context_mode,
            prices=self.prices,
        )

    def confidence_config(self) -> ConfidenceConfig:
        return ConfidenceConfig(
            d=self.d,
            K=self.K,
            T=max(self.T, 1),
            delta=self.delta,
            lam=self.lam,
            S=self.S,
            L_const=self.L_const,
        )

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: dict) -> "ExperimentConfig":
        return cls(**data)

    @classmethod
    def load(cls, path) -> "ExperimentConfig":
        with open(path) as fh:
            return cls.from_dict(json.load(fh))

    def save(self, path) -> None:
        with open(path, "w") as fh:
            json.dump(self.to_dict(), fh, indent=2)


@dataclass
class RoundRecord:
    t: int
    assortment: tuple[int, ...]
    outcome: int
    opt_value: float
    oracle_value: float
    inst_regret: float
    cum_regret: float
    gamma: float
    beta: float
    covered: bool
    dev_H: float
    dev_bound: float
    covered_C: bool | None = None  # theta_star in the norm-based set (not in the CSV)
    theta_in_C: bool | None = None  # the played parameter lies in the norm-based set
    pred_error: float = 0.0


@dataclass
class EllipticalReport:
    potential_lhs: float
    potential_rhs: float
    det_trace_lhs: float
    det_trace_rhs: float

    @property
    def potential_ok(self) -> bool:
        return self.potential_lhs <= self.potential_rhs + 1e-9

    @property
    def det_trace_ok(self) -> bool:
        return self.det_trace_lhs <= self.det_trace_rhs * (1.0 + 1e-12) + 1e-9

    @property
    def ok(self) -> bool:
        return self.potential_ok and self.det_trace_ok


@dataclass
class RunLog:
    cfg: ExperimentConfig
    seed: int
    lam: float
    records: list[RoundRecord]
    theta_star: np.ndarray
    kappa_hat: float
    total_regret: float
    wall_time: float
    coverage_all: bool
    mle_failures: int
    elliptical: EllipticalReport | None = None
    history: History | None = None

    def cum_regret_curve(self) -> np.ndarray:
        return np.array([r.cum_regret for r in self.records])

    def csv_text(self) -> str:
        lines = [CSV_HEADER]
        for r in self.records:
            lines.append(
                ",".join(
                    [
                        str(r.t),
                        "|".join(str(i) for i in r.assortment),
                        str(r.outcome),
                        _fmt(r.opt_value),
                        _fmt(r.oracle_value),
                        _fmt(r.inst_regret),
                        _fmt(r.cum_regret),
                        _fmt(r.gamma),
                        _fmt(r.beta),
                        str(int(r.covered)),
                        _fmt(r.dev_H),
                        _fmt(r.dev_bound),
                    ]
                )
            )
        return "\n".join(lines) + "\n"

    def save_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            fh.write(self.csv_text())

    def metadata(self) -> dict:
        return {
            "config": self.cfg.to_dict(),
            "seed": self.seed,
            "lambda": self.lam,
            "kappa_hat": self.kappa_hat,
            "total_regret": self.total_regret,
            "coverage_all": self.coverage_all,
            "mle_failures": self.mle_failures,
            "wall_time_s": self.wall_time,
            "version": __version__,
        }

    def save_metadata(self, path) -> None:
        with open(path, "w") as fh:
            json.dump(self.metadata(), fh, indent=2)


def _policy_decision(
    kind: PolicyKind,
    pool: np.ndarray,
    history: History,
    ccfg: ConfidenceConfig,
    state: ConfidenceState,
    instance: Instance,
    cfg: ExperimentConfig,
    kappa_hat: float,
    rng: np.random.Generator,
) -> Decision:
    prices = instance.prices
    if kind in (PolicyKind.CB_MNL_E, PolicyKind.CB_MNL_C):
        return cb_mnl_step(
            pool,
            history,
            ccfg,
            state,
            set_kind="E" if kind is PolicyKind.CB_MNL_E else "C",
            rng=rng,
            prices=prices,
            restarts=cfg.restarts,
            n_dirs=cfg.n_dirs,
            refine_top=cfg.refine_top,
            refine_iters=cfg.refine_iters,
        )
    if kind is PolicyKind.BONUS_UCB:
        return bonus_ucb_step(pool, history, ccfg, state, kappa_hat=kappa_hat, prices=prices)
    if kind is PolicyKind.ORACLE:
        best = oracle_assortment(pool, instance.theta_star, instance.K, prices)
        ass = AssortmentContexts.from_pool(pool, best, prices)
        return Decision(ass, instance.theta_star.copy(), expected_revenue(ass, instance.theta_star))
    if kind is PolicyKind.RANDOM:
        a = random_assortment(instance.N, instance.K, rng)
        ass = AssortmentContexts.from_pool(pool, a, prices)
        return Decision(ass, state.theta_hat.copy(), expected_revenue(ass, state.theta_hat))
    raise ValueError(f"unhandled policy kind {kind}")


def run_experiment(cfg: ExperimentConfig, seed: int) -> RunLog:
    """One seeded run; deterministic in (cfg, seed)."""
    t_start = time.perf_counter()
    kind = PolicyKind(cfg.policy)
    instance = make_instance(cfg.instance_config(), seed)
    ccfg = cfg.confidence_config()
    lam = ccfg.lam
    kappa = estimate_kappa(instance, grid_size=cfg.kappa_grid)

    history = History(cfg.d)
    records: list[RoundRecord] = []
    theta_star = instance.theta_star
    cum = 0.0
    coverage_all = True
    mle_failures = 0
    theta_warm = None

    # Running H(theta_star) over played rounds, for deviation norms.
    j_sum = np.zeros((cfg.d, cfg.d))
    eye = np.eye(cfg.d)

    oracle_cache: tuple[tuple[int, ...], float] | None = None
    bound_factor = 2.0 * (1.0 + 2.0 * cfg.S)

    for t in range(1, cfg.T + 1):
        pool = serve_contexts(instance, t)
        state = build_confidence_state(
            history,
            ccfg,
            t=t,
            theta0=theta_warm,
            mle_tol=cfg.mle_tol,
            mle_max_iter=cfg.mle_max_iter,
        )
        if not state.mle.converged:
            mle_failures += 1
        theta_warm = state.theta_hat

        rng_policy = stream(seed, TAG_POLICY, t)
        decision = _policy_decision(
            kind, pool, history, ccfg, state, instance, cfg, kappa.value, rng_policy
        )

        outcome = environment_step(instance, decision.assortment, stream(seed, TAG_OUTCOME, t))

        if cfg.context_mode == FIXED_POOL and oracle_cache is not None:
            _, oracle_value = oracle_cache
        else:
            best_a = oracle_assortment(pool, theta_star, instance.K, instance.prices)
            oracle_value = expected_revenue(
                AssortmentContexts.from_pool(pool, best_a, instance.prices), theta_star
            )
            if cfg.context_mode == FIXED_POOL:
                oracle_cache = (best_a, oracle_value)

        played_value = expected_revenue(decision.assortment, theta_star)
        inst_regret = oracle_value - played_value
        cum += inst_regret

        covered_e = in_set_E(theta_star, history, ccfg, state)
        track_c = cfg.track_c_stats or kind is PolicyKind.CB_MNL_C
        covered_c = in_set_C(theta_star, history, ccfg, state) if track_c else None
        covered = covered_c if kind is PolicyKind.CB_MNL_C else covered_e
        coverage_all = coverage_all and covered

        j_mat = j_sum + lam * eye
        dtheta = decision.theta_used - theta_star
        dev_h = math.sqrt(max(float(dtheta @ j_mat @ dtheta), 0.0))
        dev_bound = bound_factor * state.gamma
        theta_in_c = in_set_C(decision.theta_used, history, ccfg, state) if track_c else None
        pred_error = abs(played_value - expected_revenue(decision.assortment, decision.theta_used))

        records.append(
            RoundRecord(
                t=t,
                assortment=decision.assortment.indices,
                outcome=outcome,
                opt_value=decision.optimistic_value,
                oracle_value=oracle_value,
                inst_regret=inst_regret,
                cum_regret=cum,
                gamma=state.gamma,
                beta=state.beta,
                covered=covered,
                dev_H=dev_h,
                dev_bound=dev_bound,
                covered_C=covered_c,
                theta_in_C=theta_in_c,
                pred_error=pred_error,
            )
        )

        history.append(decision.assortment, outcome)
        mu = choice_probabilities(decision.assortment, theta_star).item_probs
        if mu.size:
            w = mu * (1.0 - mu)
            ctx = decision.assortment.contexts
            j_sum += ctx.T @ (w[:, None] * ctx)

    run = RunLog(
        cfg=cfg,
        seed=seed,
        lam=lam,
        records=records,
        theta_star=theta_star,
        kappa_hat=kappa.value,
        total_regret=cum,
        wall_time=time.perf_counter() - t_start,
        coverage_all=coverage_all,
        mle_failures=mle_failures,
        history=history,
    )
    run.elliptical = elliptical_potential_check(run, history)
    return run


def _run_one(args) -> RunLog:
    cfg_dict, seed = args
    return run_experiment(ExperimentConfig.from_dict(cfg_dict), seed)


def run_many(cfg: ExperimentConfig, seeds=None, jobs: int = 1) -> list[RunLog]:
    """Independent runs across seeds, optionally in parallel processes."""
    if seeds is None:
        seeds = cfg.seeds
    seeds = list(seeds)
    if jobs <= 1 or len(seeds) <= 1:
        return [run_experiment(cfg, s) for s in seeds]
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(_run_one, [(cfg.to_dict(), s) for s in seeds]))


def elliptical_potential_check(run: RunLog, history: History | None = None) -> EllipticalReport:
    """Verify the potential and determinant-trace inequalities on a finished run.

    With J_t = H_t(theta_star) built from the rounds actually played,

        sum_t min(sum_i ||sqrt(w_i) x_i||^2_{J_t^-1}, 1) <= 2 log(det J_{T+1} / lam^d)
        det(V_{T+1}) <= (lam + T K / d)^d.
    """
    if history is None:
        history = run.history
    if history is None:
        raise ValueError("run carries no history; pass one explicitly")
    d = history.dim
    lam = run.lam
    theta_star = run.theta_star
    j_mat = lam * np.eye(d)
    lhs = 0.0
    for assortment, _ in history.rounds:
        if assortment.cardinality == 0:
            continue
        mu = choice_probabilities(assortment, theta_star).item_probs
        w = mu * (1.0 - mu)
        xt = np.sqrt(w)[:, None] * assortment.contexts
        sol = np.linalg.solve(j_mat, xt.T)
        lhs += min(float(np.einsum("kd,dk->", xt, sol)), 1.0)
        j_mat = j_mat + xt.T @ xt
    _, logdet = np.linalg.slogdet(j_mat)
    rhs = 2.0 * (logdet - d * math.log(lam))

    det_v = float(np.linalg.det(matrix_V(history, lam).matrix))
    n_rounds = sum(1 for a, _ in history.rounds if a.cardinality)
    k_max = max((a.cardinality for a, _ in history.rounds), default=0)
    dt_rhs = (lam + n_rounds * k_max / d) ** d
    return EllipticalReport(lhs, rhs, det_v, dt_rhs)


@dataclass
class RunSummary:
    n_runs: int
    T: int
    mean_cum_regret: np.ndarray
    stderr_cum_regret: np.ndarray
    coverage_rate: float
    final_mean_regret: float
    loglog_slope: float

    def to_dict(self) -> dict:
        return {
            "n_runs": self.n_runs,
            "T": self.T,
            "coverage_rate": self.coverage_rate,
            "final_mean_regret": self.final_mean_regret,
            "loglog_slope": self.loglog_slope,
        }


def loglog_slope(curve: np.ndarray, lo_frac: float = 0.5) -> float:
    """Least-squares slope of log cum-regret against log t on the tail window."""
    curve = np.asarray(curve, dtype=float)
    T = curve.shape[0]
    ts = np.arange(1, T + 1)
    lo = max(int(lo_frac * T), 1)
    sel = (ts >= lo) & (curve > 0)
    if sel.sum() < 2:
        return float("nan")
    coef = np.polyfit(np.log(ts[sel]), np.log(curve[sel]), 1)
    return float(coef[0])


def summarize_runs(logs: list[RunLog]) -> RunSummary:
    """Aggregate runs sharing one config: mean/se curves, coverage, tail slope."""
    if not logs:
        raise ValueError("no runs to summarize")
    ref = logs[0].cfg.to_dict()
    for log in logs[1:]:
        if log.cfg.to_dict() != ref:
            raise ValueError("runs were produced under different configs")
    curves = np.vstack([log.cum_regret_curve() for log in logs])
    mean = curves.mean(axis=0)
    if len(logs) > 1:
        stderr = curves.std(axis=0, ddof=1) / math.sqrt(len(logs))
    else:
        stderr = np.zeros_like(mean)
    coverage = sum(log.coverage_all for log in logs) / len(logs)
    return RunSummary(
        n_runs=len(logs),
        T=curves.shape[1],
        mean_cum_regret=mean,
        stderr_cum_regret=stderr,
        coverage_rate=coverage,
        final_mean_regret=float(mean[-1]) if mean.size else 0.0,
        loglog_slope=loglog_slope(mean),
    )


def save_runs(logs: list[RunLog], out_dir) -> list[str]:
    """Write per-run CSV and metadata JSON files; returns the CSV paths."""
    os.makedirs(out_dir, exist_ok=True)
    paths = []
    for log in logs:
        base = f"run_{log.cfg.policy}_seed{log.seed}"
        csv_path = os.path.join(out_dir, base + ".csv")
        log.save_csv(csv_path)
        log.save_metadata(os.path.join(out_dir, base + ".json"))
        paths.append(csv_path)
    return paths
