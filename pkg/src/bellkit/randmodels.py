"""Seed-deterministic random hidden-variable models for the equivalence suites.

Families (fixed mix 40/30/30):

``unconstrained``
    every per-component behavior row is an arbitrary probability vector.
``product``
    every per-component behavior is ``P(X|A,lam) * P(Y|B,lam)``.
``pi-only``
    per-component marginals do not depend on the distant setting, but the
    outcomes are correlated given ``lam`` (parameter independence without
    outcome independence).

Probability vectors are drawn by normalizing independent uniform(0, 1)
draws. Setting policies are uniform product (1/2), a random product shared
by all components (1/4), or an arbitrary per-component table (1/4); the
last breaks no-conspiracy.
"""

from __future__ import annotations

from typing import Optional, Sequence

import numpy as np

from .core import HvModel, Scenario
from .geometry import deterministic_table

FAMILIES = ("unconstrained", "product", "pi-only")
FAMILY_MIX = (0.4, 0.3, 0.3)


def trial_rng(seed: int, trial: int, stream: int = 0) -> np.random.Generator:
    """Independent generator for one trial, a pure function of ``(seed, stream, trial)``."""
    return np.random.default_rng(np.random.SeedSequence([int(seed), int(stream), int(trial)]))


def prob_vector(rng: np.random.Generator, shape: tuple, n: int) -> np.ndarray:
    """Probability vectors of length ``n`` stacked in ``shape``."""
    u = rng.random(tuple(shape) + (n,))
    return u / u.sum(axis=-1, keepdims=True)


def _pick_family(rng: np.random.Generator, families: Optional[Sequence[str]]) -> str:
    if families is None:
        families = FAMILIES
    weights = np.array([FAMILY_MIX[FAMILIES.index(f)] for f in families])
    u = rng.random()
    return families[int(np.searchsorted(np.cumsum(weights / weights.sum()), u, side="right").clip(max=len(families) - 1))]


def _unconstrained(rng, L, nA, nB, nX, nY):
    return prob_vector(rng, (L, nA, nB), nX * nY).reshape(L, nA, nB, nX, nY)


def _product(rng, L, nA, nB, nX, nY):
    pa = prob_vector(rng, (L, nA), nX)
    pb = prob_vector(rng, (L, nB), nY)
    return pa[:, :, None, :, None] * pb[:, None, :, None, :]


def _pi_only(rng, L, nA, nB, nX, nY):
    base = _product(rng, L, nA, nB, nX, nY)
    d = rng.random(base.shape) - 0.5
    # Double-centering keeps every one-sided marginal fixed.
    d = d - d.mean(axis=4, keepdims=True) - d.mean(axis=3, keepdims=True) + d.mean(axis=(3, 4), keepdims=True)
    with np.errstate(divide="ignore", invalid="ignore"):
        room = np.where(d < 0, base / -d, np.inf)
    eps = room.min(axis=(3, 4), keepdims=True) * rng.uniform(0.2, 0.9, size=(L, nA, nB, 1, 1))
    return np.clip(base + eps * d, 0.0, None)


_BUILDERS = {"unconstrained": _unconstrained, "product": _product, "pi-only": _pi_only}


def _policies(rng, L, nA, nB):
    u = rng.random()
    if u < 0.5:
        return [None] * L
    if u < 0.75:
        q = np.outer(prob_vector(rng, (), nA), prob_vector(rng, (), nB))
        return [q] * L
    return [prob_vector(rng, (), nA * nB).reshape(nA, nB) for _ in range(L)]


def random_model(
    rng: np.random.Generator,
    families: Optional[Sequence[str]] = None,
    scenario: Optional[tuple[int, int, int, int]] = None,
) -> tuple[str, HvModel]:
    """Draw ``(family, model)``; the scenario is random in ``{2,3}^4`` unless given."""
    family = _pick_family(rng, families)
    if scenario is None:
        nA, nB, nX, nY = (int(v) for v in rng.integers(2, 4, size=4))
    else:
        nA, nB, nX, nY = scenario
    L = int(rng.integers(1, 4))
    behaviors = _BUILDERS[family](rng, L, nA, nB, nX, nY)
    weights = prob_vector(rng, (), L)
    return family, HvModel.from_arrays(weights, behaviors, _policies(rng, L, nA, nB))


def random_local_behavior_table(rng: np.random.Generator, scenario: Scenario) -> np.ndarray:
    """Random convex mixture of the deterministic strategies of ``scenario``."""
    D = deterministic_table(scenario)
    w = prob_vector(rng, (), D.shape[0])
    return np.tensordot(w, D, axes=(0, 0))
