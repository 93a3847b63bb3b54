"""Multinomial-logit choice model: probabilities, revenue, derivatives, sampling.

An assortment is an ordered set of items, each described by an attribute
vector x_i with ||x_i||_2 <= 1.  Utilities are linear, u_i = x_i . theta,
and a consumer buys at most one item.  The no-purchase option has utility
zero and is outcome index 0 everywhere; item outcomes are 1-based positions
within the assortment.

All probability computations shift by the maximum utility before
exponentiating, so chained evaluations stay finite for any |x . theta|
representable in float64.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = [
    "AssortmentContexts",
    "ChoiceDistribution",
    "choice_probabilities",
    "expected_revenue",
    "revenue_gradient",
    "diag_derivative",
    "diag_second_derivative",
    "sample_choice",
]

_NORM_TOL = 1e-9


@dataclass(frozen=True)
class AssortmentContexts:
    """Items offered in one round: original indices, attribute rows, prices.

    ``contexts`` has one row per item; ``prices`` defaults to 1 for every
    item.  Indices must be distinct and every row must have Euclidean norm
    at most 1.
    """

    indices: tuple[int, ...]
    contexts: np.ndarray
    prices: np.ndarray

    def __post_init__(self) -> None:
        ctx = np.atleast_2d(np.asarray(self.contexts, dtype=float))
        if len(self.indices) == 0:
            ctx = ctx.reshape(0, ctx.shape[-1])
        prices = np.asarray(self.prices, dtype=float).reshape(-1)
        object.__setattr__(self, "indices", tuple(int(i) for i in self.indices))
        object.__setattr__(self, "contexts", ctx)
        object.__setattr__(self, "prices", prices)
        k = len(self.indices)
        if ctx.shape[0] != k or prices.shape[0] != k:
            raise ValueError(
                f"inconsistent assortment: {k} indices, {ctx.shape[0]} context rows, "
                f"{prices.shape[0]} prices"
            )
        if len(set(self.indices)) != k:
            raise ValueError(f"duplicate item indices in assortment {self.indices}")
        if k and float(np.max(np.linalg.norm(ctx, axis=1))) > 1.0 + _NORM_TOL:
            raise ValueError("context norm exceeds 1")
        if k and float(prices.min()) < 0.0:
            raise ValueError("negative price")

    @classmethod
    def from_pool(
        cls,
        pool: np.ndarray,
        indices: tuple[int, ...],
        prices: np.ndarray | None = None,
    ) -> "AssortmentContexts":
        """Build an assortment by picking rows of an (N, d) context pool."""
        pool = np.asarray(pool, dtype=float)
        idx = tuple(int(i) for i in indices)
        ctx = pool[list(idx)].reshape(len(idx), pool.shape[1])
        if prices is None:
            pr = np.ones(len(idx))
        else:
            pr = np.asarray(prices, dtype=float)[list(idx)]
        return cls(idx, ctx, pr)

    @property
    def cardinality(self) -> int:
        return len(self.indices)

    @property
    def dim(self) -> int:
        return self.contexts.shape[1]


@dataclass(frozen=True)
class ChoiceDistribution:
    """Purchase distribution over one assortment plus the no-purchase slot."""

    item_probs: np.ndarray
    no_purchase_prob: float

    def __post_init__(self) -> None:
        probs = np.asarray(self.item_probs, dtype=float).reshape(-1)
        object.__setattr__(self, "item_probs", probs)
        object.__setattr__(self, "no_purchase_prob", float(self.no_purchase_prob))
        total = float(probs.sum()) + self.no_purchase_prob
        if abs(total - 1.0) > 1e-12:
            raise ValueError(f"probabilities sum to {total}, not 1")
        if self.no_purchase_prob <= 0.0 or (probs.size and (probs <= 0.0).any()):
            raise ValueError("degenerate choice probability")

    def outcome_probs(self) -> np.ndarray:
        """Probabilities indexed by outcome: slot 0 is no purchase."""
        return np.concatenate(([self.no_purchase_prob], self.item_probs))


def _utilities(assortment: AssortmentContexts, theta: np.ndarray) -> np.ndarray:
    theta = np.asarray(theta, dtype=float).reshape(-1)
    if assortment.cardinality and assortment.dim != theta.shape[0]:
        raise ValueError(
            f"dimension mismatch: contexts are d={assortment.dim}, theta is d={theta.shape[0]}"
        )
    return assortment.contexts @ theta


def choice_probabilities(
    assortment: AssortmentContexts, theta: np.ndarray
) -> ChoiceDistribution:
    """Softmax purchase probabilities for each item and the no-purchase slot.

    Each item gets exp(u_i) / (1 + sum_j exp(u_j)); the leading 1 is the
    zero-utility no-purchase option.  An empty assortment yields
    no-purchase probability 1.
    """
    u = _utilities(assortment, theta)
    if u.size == 0:
        return ChoiceDistribution(np.zeros(0), 1.0)
    shift = max(float(u.max()), 0.0)
    ez = np.exp(u - shift)
    denom = np.exp(-shift) + ez.sum()
    return ChoiceDistribution(ez / denom, float(np.exp(-shift) / denom))


def expected_revenue(assortment: AssortmentContexts, theta: np.ndarray) -> float:
    """Price-weighted purchase probability; with unit prices, the total
    probability that anything at all is bought."""
    dist = choice_probabilities(assortment, theta)
    if assortment.cardinality == 0:
        return 0.0
    return float(dist.item_probs @ assortment.prices)


def revenue_gradient(assortment: AssortmentContexts, theta: np.ndarray) -> np.ndarray:
    """Gradient of expected_revenue with respect to theta."""
    theta = np.asarray(theta, dtype=float).reshape(-1)
    dist = choice_probabilities(assortment, theta)
    if assortment.cardinality == 0:
        return np.zeros_like(theta)
    rev = float(dist.item_probs @ assortment.prices)
    w = dist.item_probs * (assortment.prices - rev)
    return w @ assortment.contexts


def diag_derivative(assortment: AssortmentContexts, theta: np.ndarray, i: int) -> float:
    """Derivative of item i's purchase probability along its own utility,
    mu_i (1 - mu_i)."""
    dist = choice_probabilities(assortment, theta)
    if not 0 <= i < assortment.cardinality:
        raise IndexError(f"item position {i} outside assortment of size {assortment.cardinality}")
    p = float(dist.item_probs[i])
    return p * (1.0 - p)


def diag_second_derivative(
    assortment: AssortmentContexts, theta: np.ndarray, i: int
) -> float:
    """Second derivative along item i's own utility, mu_i (1 - mu_i)(1 - 2 mu_i)."""
    dist = choice_probabilities(assortment, theta)
    if not 0 <= i < assortment.cardinality:
        raise IndexError(f"item position {i} outside assortment of size {assortment.cardinality}")
    p = float(dist.item_probs[i])
    return p * (1.0 - p) * (1.0 - 2.0 * p)


def sample_choice(dist: ChoiceDistribution, rng: np.random.Generator) -> int:
    """Draw one outcome: 0 for no purchase, else the 1-based item position."""
    r = float(rng.random())
    acc = dist.no_purchase_prob
    if r < acc:
        return 0
    for j, p in enumerate(dist.item_probs):
        acc += float(p)
        if r < acc:
            return j + 1
    return dist.item_probs.size  # guard against float round-off at the top end
