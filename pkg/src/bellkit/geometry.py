"""CHSH values, deterministic strategies and local-polytope membership.

Outcome labels map to signs as 0 -> +1, 1 -> -1 throughout.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .core import Behavior, Scenario
from .errors import ResourceError, SolverError, UsageError
from .simplex import phase_one

DEFAULT_CAP = 1_000_000
TOL_LP = 1e-8
TOL_BIS = 1e-6

# Variant v puts the minus sign on correlator MINUS_POSITION[v % 4] and flips
# the overall sign for v >= 4.
MINUS_POSITION = ((0, 0), (0, 1), (1, 0), (1, 1))


@dataclass(frozen=True)
class ChshResult:
    value: float
    variant: int
    correlators: np.ndarray

    @property
    def minus_at(self) -> tuple[int, int]:
        return MINUS_POSITION[self.variant % 4]


def _signs(n: int) -> np.ndarray:
    if n != 2:
        raise UsageError(f"correlators need binary outcomes, got {n}")
    return np.array([1.0, -1.0])


def correlators(b: Behavior) -> np.ndarray:
    """``E[a, b] = sum_{x,y} s(x) s(y) p[a, b, x, y]``."""
    sx = _signs(b.scenario.nX)
    sy = _signs(b.scenario.nY)
    return np.einsum("abxy,x,y->ab", b.p, sx, sy)


def chsh_variants(E: np.ndarray) -> np.ndarray:
    """Values of the 8 signed CHSH combinations for a 2x2 correlator table."""
    total = E.sum()
    signed = np.array([total - 2 * E[pos] for pos in MINUS_POSITION])
    return np.concatenate([signed, -signed])


def chsh_max(b: Behavior) -> ChshResult:
    s = b.scenario
    if (s.nA, s.nB) != (2, 2):
        raise UsageError(f"CHSH needs two settings per side, scenario has {s.nA} and {s.nB}")
    E = correlators(b)
    values = chsh_variants(E)
    v = int(np.argmax(values))
    return ChshResult(float(values[v]), v, E)


def deterministic_strategies(s: Scenario, cap: int = DEFAULT_CAP) -> list[tuple[tuple[int, ...], tuple[int, ...]]]:
    """All pairs ``(fA, fB)`` of response functions, ``fA[a]`` being Alice's outcome for setting ``a``.

    Index ``k`` of the returned list is the strategy index used by
    certificates: ``fA`` varies slowest.
    """
    count = s.n_deterministic
    if count > cap:
        raise ResourceError(f"scenario {s.shape} has {count} deterministic strategies, above the cap of {cap}")
    fas = list(itertools.product(range(s.nX), repeat=s.nA))
    fbs = list(itertools.product(range(s.nY), repeat=s.nB))
    return [(fa, fb) for fa in fas for fb in fbs]


def deterministic_table(s: Scenario, cap: int = DEFAULT_CAP) -> np.ndarray:
    """Deterministic behaviors stacked as ``[k, a, b, x, y]``."""
    strategies = deterministic_strategies(s, cap)
    # Product of one-hot tables per side.
    fa = np.array([st[0] for st in strategies], dtype=int).reshape(len(strategies), s.nA)
    fb = np.array([st[1] for st in strategies], dtype=int).reshape(len(strategies), s.nB)
    ha = np.eye(s.nX)[fa]  # [k, a, x]
    hb = np.eye(s.nY)[fb]  # [k, b, y]
    return ha[:, :, None, :, None] * hb[:, None, :, None, :]


def enumerate_deterministic(s: Scenario, cap: int = DEFAULT_CAP) -> list[Behavior]:
    return [Behavior(s, d) for d in deterministic_table(s, cap)]


@dataclass(frozen=True)
class LocalityCertificate:
    """Witness for a membership verdict.

    Members carry convex ``weights`` over strategy indices; non-members carry
    a ``functional`` ``c[a, b, x, y]`` whose value on every deterministic
    strategy is at most ``local_bound`` (zero) while ``functional_value`` on
    the tested behavior is positive.
    """

    member: bool
    weights: Optional[dict[int, float]] = None
    functional: Optional[np.ndarray] = None
    functional_value: Optional[float] = None
    local_bound: Optional[float] = None
    residual: float = 0.0
    reconstruction_error: Optional[float] = None


def local_membership(b: Behavior, tol_lp: float = TOL_LP, cap: int = DEFAULT_CAP,
                     max_iter: Optional[int] = None) -> LocalityCertificate:
    """Decide whether ``b`` is a convex mixture of deterministic strategies.

    Solved as phase-one feasibility over the strategy weights. Either verdict
    is checked against its certificate before returning; a certificate that
    does not check out raises :class:`SolverError` rather than reporting a
    verdict.
    """
    s = b.scenario
    D = deterministic_table(s, cap)
    S = D.shape[0]
    flat = D.reshape(S, -1)
    A = np.vstack([flat.T, np.ones((1, S))])
    rhs = np.concatenate([b.p.ravel(), [1.0]])
    res = phase_one(A, rhs, max_iter=max_iter)

    if res.objective <= tol_lp:
        w = np.clip(res.x, 0.0, None)
        recon = np.tensordot(w, D, axes=(0, 0))
        err = float(np.abs(recon - b.p).max())
        if err > tol_lp or abs(w.sum() - 1.0) > tol_lp:
            raise SolverError(f"membership weights reconstruct the behavior only to {err:.3g}")
        weights = {int(k): float(w[k]) for k in np.nonzero(w > 0)[0]}
        return LocalityCertificate(True, weights=weights, residual=res.objective, reconstruction_error=err)

    y = res.duals
    # Normalized behaviors sum to one on each settings pair, so the constant
    # attached to the sum-to-one row spreads evenly over the table.
    c = y[:-1].reshape(s.shape) + y[-1] / (s.nA * s.nB)
    c = c - (flat @ c.ravel()).max() / (s.nA * s.nB)
    det_values = flat @ c.ravel()
    bound = float(det_values.max())
    value = float(np.sum(c * b.p))
    if bound > 1e-12 or value <= bound + tol_lp:
        raise SolverError(f"separating functional failed verification (value {value:.3g}, bound {bound:.3g})")
    return LocalityCertificate(False, functional=c, functional_value=value, local_bound=0.0, residual=res.objective)


def local_visibility(b: Behavior, tol_bis: float = TOL_BIS, tol_lp: float = TOL_LP, cap: int = DEFAULT_CAP) -> float:
    """Largest ``v`` with ``v * b + (1 - v) * uniform`` local, by bisection."""
    if local_membership(b, tol_lp, cap).member:
        return 1.0
    noise = Behavior.uniform(b.scenario)
    lo, hi = 0.0, 1.0
    while hi - lo > tol_bis:
        mid = 0.5 * (lo + hi)
        if local_membership(b.mix(noise, mid), tol_lp, cap).member:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def pr_box() -> Behavior:
    """``p(x, y | a, b) = 1/2`` when ``x xor y = a * b``."""
    p = np.zeros((2, 2, 2, 2))
    for a, b_, x, y in itertools.product(range(2), repeat=4):
        if (x ^ y) == (a & b_):
            p[a, b_, x, y] = 0.5
    return Behavior(Scenario(2, 2, 2, 2), p)


def chsh_functional(variant: int) -> np.ndarray:
    """CHSH variant written as a table ``c[a, b, x, y]`` so that ``sum(c * p)`` is its value."""
    sign = 1.0 if variant < 4 else -1.0
    coeff = np.ones((2, 2))
    coeff[MINUS_POSITION[variant % 4]] = -1.0
    s = np.array([1.0, -1.0])
    return sign * coeff[:, :, None, None] * np.multiply.outer(s, s)[None, None]


def correlator_form(c: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Split a binary-outcome functional into correlator, Alice-marginal and Bob-marginal coefficients.

    Any ``c[a, b, x, y]`` acts on normalized behaviors as
    ``const + sum g[a,b] E[a,b] + sum ga[a,b] <A_a> + sum gb[a,b] <B_b>``;
    this returns ``(g, ga, gb)``.
    """
    s = np.array([1.0, -1.0])
    g = np.einsum("abxy,x,y->ab", c, s, s) / 4
    ga = np.einsum("abxy,x->ab", c, s) / 4
    gb = np.einsum("abxy,y->ab", c, s) / 4
    return g, ga, gb
