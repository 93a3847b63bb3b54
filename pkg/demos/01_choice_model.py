"""Walk through the choice-model math on a tiny two-item catalogue.

Run:  python demos/01_choice_model.py
"""
import numpy as np

from mnl_bandit import (
    AssortmentContexts,
    choice_probabilities,
    diag_derivative,
    diag_second_derivative,
    expected_revenue,
    sample_choice,
)

# Two items in one attribute dimension: one appealing, one off-putting.
assortment = AssortmentContexts((0, 1), np.array([[1.0], [-1.0]]), np.ones(2))
theta = np.array([1.0])

dist = choice_probabilities(assortment, theta)
print("purchase probabilities:", np.round(dist.item_probs, 6))
print("no-purchase probability:", round(dist.no_purchase_prob, 6))
print("expected revenue (unit prices):", round(expected_revenue(assortment, theta), 6))

# Curvature along each item's own utility: first derivative mu(1-mu),
# second derivative mu(1-mu)(1-2mu); the second never exceeds the first.
for i in range(2):
    d1 = diag_derivative(assortment, theta, i)
    d2 = diag_second_derivative(assortment, theta, i)
    print(f"item {i}: mu' = {d1:.6f}, mu'' = {d2:+.6f}, |mu''| <= mu': {abs(d2) <= d1}")

# Seeded sampling: outcome 0 is the no-purchase option.
rng = np.random.default_rng(0)
draws = [sample_choice(dist, rng) for _ in range(20_000)]
freq = np.bincount(draws, minlength=3) / len(draws)
print("empirical outcome frequencies (no-buy, item 0, item 1):", np.round(freq, 4))
