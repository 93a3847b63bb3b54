"""Synthetic environment: instances, context serving, choice sampling, kappa.

Randomness is organized as independent streams keyed on (seed, purpose,
round), so any part of a run can be regenerated in isolation and runs
parallelize without shared state.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .choice import AssortmentContexts, choice_probabilities, sample_choice
from .policy import enumerate_assortments

__all__ = [
    "Instance",
    "InstanceConfig",
    "KappaEstimate",
    "make_instance",
    "serve_contexts",
    "environment_step",
    "estimate_kappa",
    "sample_ball",
]

# Stream tags for keyed seeding.
TAG_INSTANCE = 0
TAG_CONTEXTS = 1
TAG_OUTCOME = 2
TAG_POLICY = 3
TAG_KAPPA = 4

FIXED_POOL = "fixed_pool"
FRESH_IID = "fresh_iid"


def stream(seed: int, tag: int, *rest: int) -> np.random.Generator:
    """Deterministic generator for one purpose inside one seeded run."""
    return np.random.default_rng(np.random.SeedSequence([int(seed), int(tag), *map(int, rest)]))


def sample_ball(rng: np.random.Generator, n: int, d: int, radius: float = 1.0) -> np.ndarray:
    """Exactly uniform draws from the d-ball: normalized Gaussian times U^(1/d)."""
    g = rng.standard_normal((n, d))
    g /= np.linalg.norm(g, axis=1, keepdims=True)
    r = radius * rng.random(n) ** (1.0 / d)
    return g * r[:, None]


@dataclass
class InstanceConfig:
    """Shape of the synthetic problem; see ``make_instance``."""

    d: int = 2
    N: int = 8
    K: int = 2
    S: float = 1.0  # norm bound given to the learner
    S_true: float = 1.0  # radius the hidden parameter is drawn from
    context_mode: str = FIXED_POOL
    prices: list[float] | None = None

    def __post_init__(self) -> None:
        if self.d < 1 or self.N < 1 or not 1 <= self.K <= self.N:
            raise ValueError(f"bad dimensions d={self.d}, N={self.N}, K={self.K}")
        if self.S_true > self.S:
            raise ValueError(f"S_true={self.S_true} exceeds the bound S={self.S} given to the learner")
        if self.context_mode not in (FIXED_POOL, FRESH_IID):
            raise ValueError(f"unknown context mode {self.context_mode!r}")


@dataclass
class Instance:
    """Ground truth for one synthetic problem."""

    d: int
    N: int
    K: int
    S: float
    S_true: float
    theta_star: np.ndarray
    context_mode: str
    pool: np.ndarray | None
    prices: np.ndarray
    seed: int

    def __post_init__(self) -> None:
        self.theta_star = np.asarray(self.theta_star, dtype=float).reshape(-1)
        self.prices = np.asarray(self.prices, dtype=float).reshape(-1)
        if self.pool is not None:
            self.pool = np.asarray(self.pool, dtype=float).reshape(self.N, self.d)
            norms = np.linalg.norm(self.pool, axis=1)
            if norms.size and float(norms.max()) > 1.0 + 1e-9:
                raise ValueError("pool context norm exceeds 1")
        if float(np.linalg.norm(self.theta_star)) > self.S_true * (1.0 + 1e-9):
            raise ValueError("theta_star norm exceeds S_true")

    def to_dict(self) -> dict:
        return {
            "d": self.d,
            "N": self.N,
            "K": self.K,
            "S": self.S,
            "S_true": self.S_true,
            "theta_star": [float(x) for x in self.theta_star],
            "context_mode": self.context_mode,
            "pool": None if self.pool is None else [float(x) for x in self.pool.ravel()],
            "prices": [float(x) for x in self.prices],
            "seed": self.seed,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "Instance":
        pool = data["pool"]
        if pool is not None:
            pool = np.asarray(pool, dtype=float).reshape(data["N"], data["d"])
        return cls(
            d=int(data["d"]),
            N=int(data["N"]),
            K=int(data["K"]),
            S=float(data["S"]),
            S_true=float(data["S_true"]),
            theta_star=np.asarray(data["theta_star"], dtype=float),
            context_mode=data["context_mode"],
            pool=pool,
            prices=np.asarray(data["prices"], dtype=float),
            seed=int(data["seed"]),
        )

    def save(self, path) -> None:
        with open(path, "w") as fh:
            json.dump(self.to_dict(), fh, indent=2)

    @classmethod
    def load(cls, path) -> "Instance":
        with open(path) as fh:
            return cls.from_dict(json.load(fh))


def make_instance(cfg: InstanceConfig, seed: int) -> Instance:
    """Draw theta_star from the S_true-ball and contexts from the unit ball."""
    rng = stream(seed, TAG_INSTANCE)
    theta_star = sample_ball(rng, 1, cfg.d, radius=cfg.S_true)[0]
    pool = sample_ball(rng, cfg.N, cfg.d) if cfg.context_mode == FIXED_POOL else None
    prices = np.ones(cfg.N) if cfg.prices is None else np.asarray(cfg.prices, dtype=float)
    return Instance(
        d=cfg.d,
        N=cfg.N,
        K=cfg.K,
        S=cfg.S,
        S_true=cfg.S_true,
        theta_star=theta_star,
        context_mode=cfg.context_mode,
        pool=pool,
        prices=prices,
        seed=int(seed),
    )


def serve_contexts(instance: Instance, t: int, rng: np.random.Generator | None = None) -> np.ndarray:
    """Contexts for round t: the fixed pool, or fresh draws keyed by (seed, t)."""
    if t < 1:
        raise ValueError(f"round index must be >= 1, got {t}")
    if instance.context_mode == FIXED_POOL:
        return instance.pool
    if rng is None:
        rng = stream(instance.seed, TAG_CONTEXTS, t)
    return sample_ball(rng, instance.N, instance.d)


def environment_step(
    instance: Instance,
    assortment: AssortmentContexts,
    rng: np.random.Generator,
) -> int:
    """Sample the consumer's choice under theta_star; 0 means no purchase."""
    dist = choice_probabilities(assortment, instance.theta_star)
    return sample_choice(dist, rng)


@dataclass
class KappaEstimate:
    """Largest observed reciprocal curvature 1 / (mu (1 - mu))."""

    value: float
    argmax_theta: np.ndarray
    argmax_context: np.ndarray
    argmax_assortment: tuple[int, ...] = field(default=())


def kappa_theta_candidates(instance: Instance, grid_size: int, pool: np.ndarray) -> np.ndarray:
    """Search points for kappa: origin, directed extremes, seeded ball draws."""
    cands = [np.zeros(instance.d)]
    for x in pool:
        nx = float(np.linalg.norm(x))
        if nx > 0.0:
            cands.append(instance.S * x / nx)
            cands.append(-instance.S * x / nx)
    if grid_size > 0 and instance.S > 0.0:
        rng = stream(instance.seed, TAG_KAPPA)
        cands.append(sample_ball(rng, grid_size, instance.d, radius=instance.S))
    return np.vstack([np.atleast_2d(c) for c in cands])


def kappa_over_candidates(
    instance: Instance,
    thetas: np.ndarray,
    pool: np.ndarray,
    max_assortments: int = 1000,
) -> KappaEstimate:
    """Evaluate 1/(mu(1-mu)) over assortments x items x candidate thetas."""
    assortments = enumerate_assortments(instance.N, instance.K)
    if len(assortments) > max_assortments:
        rng = stream(instance.seed, TAG_KAPPA, 1)
        keep = rng.choice(len(assortments), size=max_assortments, replace=False)
        assortments = [assortments[i] for i in sorted(keep)]
    thetas = np.atleast_2d(np.asarray(thetas, dtype=float))
    U = pool @ thetas.T  # (N, n_cand)
    best = -np.inf
    arg_theta = thetas[0]
    arg_ctx = pool[0]
    arg_a: tuple[int, ...] = ()
    for a in assortments:
        u = U[list(a)]
        shift = np.maximum(u.max(axis=0), 0.0)
        ez = np.exp(u - shift)
        mu = ez / (np.exp(-shift) + ez.sum(axis=0))
        w = mu * (1.0 - mu)
        i_flat = int(np.argmin(w))
        i_item, i_cand = np.unravel_index(i_flat, w.shape)
        val = 1.0 / float(w[i_item, i_cand])
        if val > best:
            best = val
            arg_theta = thetas[i_cand]
            arg_ctx = pool[a[i_item]]
            arg_a = a
    return KappaEstimate(best, arg_theta.copy(), arg_ctx.copy(), arg_a)


def estimate_kappa(instance: Instance, grid_size: int = 512) -> KappaEstimate:
    """Grid/random search for the instance's curvature constant.

    The infimum over an unbounded parameter space would be zero, so the
    search is restricted to the ball of radius S and the instance's own
    contexts and feasible assortments, which is how the constant enters
    every bound that uses it.
    """
    if instance.context_mode == FIXED_POOL:
        pool = instance.pool
    else:
        pool = serve_contexts(instance, 1)
    thetas = kappa_theta_candidates(instance, grid_size, pool)
    return kappa_over_candidates(instance, thetas, pool)
