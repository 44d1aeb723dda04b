"""Run-by-run sampling of hidden-variable models and finite-sample estimates.

Each run draws three uniforms from its own substream (see :mod:`bellkit.rng`)
and uses them, in order, to pick ``lam`` from the weights, ``(a, b)`` from that
component's setting policy and ``(x, y)`` from its behavior at ``(a, b)``.
Discrete draws use the inverse CDF over row-major index order.
"""

from __future__ import annotations

import hashlib
import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace
from typing import Optional

import numpy as np

from .conditions import ConditionReport, reduce_terms
from .core import Behavior, HvModel, Scenario
from .errors import InvariantError, UsageError
from .geometry import chsh_variants
from .rng import run_uniforms

BLOCK = 1 << 16


@dataclass(frozen=True, eq=False)
class Transcript:
    """Per-run records; columns of ``runs`` are ``run, lam, a, b, x, y``."""

    scenario: Scenario
    runs: np.ndarray
    seed: int
    model_digest: str

    def __post_init__(self):
        arr = np.array(self.runs, dtype=np.int64).reshape(-1, 6)
        limits = (None, None) + self.scenario.shape
        for col, lim in enumerate(limits):
            if lim is not None and arr.size and (arr[:, col].min() < 0 or arr[:, col].max() >= lim):
                raise UsageError(f"transcript column {col} outside scenario range {lim}")
        arr.setflags(write=False)
        object.__setattr__(self, "runs", arr)

    def __len__(self):
        return self.runs.shape[0]

    def __eq__(self, other):
        if not isinstance(other, Transcript):
            return NotImplemented
        return (self.scenario == other.scenario and self.seed == other.seed
                and self.model_digest == other.model_digest and np.array_equal(self.runs, other.runs))


def model_digest(m: HvModel) -> str:
    text = json.dumps(m.to_dict(), sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(text.encode()).hexdigest()


def _cdf(p: np.ndarray) -> np.ndarray:
    """Cumulative sums along the last axis, pinned to 1 from the last positive entry on."""
    c = np.cumsum(p, axis=-1)
    positive = p > 0
    last = p.shape[-1] - 1 - np.argmax(positive[..., ::-1], axis=-1)
    idx = np.arange(p.shape[-1])
    c[idx >= last[..., None]] = 1.0
    return c


def _draw(u: np.ndarray, cdf_rows: np.ndarray) -> np.ndarray:
    # Smallest i with u < cdf[i].
    return np.minimum((u[:, None] >= cdf_rows).sum(axis=1), cdf_rows.shape[-1] - 1)


def _simulate_block(tables, seed: int, start: int, stop: int) -> np.ndarray:
    cdf_lam, cdf_pol, cdf_beh, nB, nY = tables
    runs = np.arange(start, stop, dtype=np.int64)
    u = run_uniforms(seed, runs.astype(np.uint64), 3)
    lam = _draw(u[:, 0], np.broadcast_to(cdf_lam, (len(runs), cdf_lam.size)))
    ab = _draw(u[:, 1], cdf_pol[lam])
    xy = _draw(u[:, 2], cdf_beh[lam, ab])
    return np.stack([runs, lam, ab // nB, ab % nB, xy // nY, xy % nY], axis=1)


def simulate(m: HvModel, n_runs: int, seed: int, workers: int = 1, block: int = BLOCK) -> Transcript:
    """Sample ``n_runs`` independent runs; output depends only on ``(m, n_runs, seed)``."""
    if n_runs < 1:
        raise UsageError(f"n_runs must be at least 1, got {n_runs}")
    report = m.validate()
    if report:
        raise InvariantError(f"model violates {len(report)} invariant(s): {report[0]}", report)
    s = m.scenario
    L = m.n_lambda
    tables = (
        _cdf(m.weights),
        _cdf(m.policy_table.reshape(L, s.nA * s.nB)),
        _cdf(m.behavior_table.reshape(L, s.nA * s.nB, s.nX * s.nY)),
        s.nB,
        s.nY,
    )
    bounds = [(i, min(i + block, n_runs)) for i in range(0, n_runs, block)]
    if workers > 1 and len(bounds) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(lambda se: _simulate_block(tables, seed, *se), bounds))
    else:
        parts = [_simulate_block(tables, seed, *se) for se in bounds]
    return Transcript(s, np.concatenate(parts), int(seed), model_digest(m))


def _counts(t: Transcript) -> np.ndarray:
    """Counts indexed ``[lam, a, b, x, y]``; ``lam`` spans the largest recorded index."""
    L = int(t.runs[:, 1].max()) + 1 if len(t) else 1
    shape = (L,) + t.scenario.shape
    flat = np.ravel_multi_index(tuple(t.runs[:, 1:].T), shape)
    return np.bincount(flat, minlength=int(np.prod(shape))).reshape(shape)


@dataclass(frozen=True)
class EmpiricalSummary:
    n_runs: int
    counts: np.ndarray  # [a, b, x, y]
    behavior: Behavior  # unsampled settings rows are uniform; see ``unsampled``
    stderr: np.ndarray
    unsampled: tuple[tuple[int, int], ...]
    chsh: Optional[float] = None
    chsh_stderr: Optional[float] = None
    chsh_variant: Optional[int] = None
    tv_distance: Optional[float] = None


def summarize(t: Transcript, reference: Optional[Behavior] = None) -> EmpiricalSummary:
    """Frequencies, per-cell standard errors, CHSH estimate and distance to ``reference``.

    Standard errors are ``sqrt(p(1-p)/n_ab)`` per cell; the CHSH standard
    error adds the four correlator variances ``(1 - E^2)/n_ab`` as if
    independent. The total-variation distance is the maximum over sampled
    settings pairs of ``0.5 * sum |p_hat - p_ref|``.
    """
    if len(t) == 0:
        raise UsageError("cannot summarize an empty transcript")
    s = t.scenario
    counts = _counts(t).sum(axis=0)
    n_ab = counts.sum(axis=(2, 3))
    sampled = n_ab > 0
    p_hat = np.full(counts.shape, 1.0 / (s.nX * s.nY))
    p_hat[sampled] = counts[sampled] / n_ab[sampled][:, None, None]
    stderr = np.zeros(counts.shape)
    stderr[sampled] = np.sqrt(p_hat[sampled] * (1 - p_hat[sampled]) / n_ab[sampled][:, None, None])
    unsampled = tuple((int(a), int(b)) for a, b in zip(*np.nonzero(~sampled)))
    behavior = Behavior(s, p_hat)

    chsh = chsh_se = variant = None
    if s.shape == (2, 2, 2, 2) and sampled.all():
        sign = np.array([1.0, -1.0])
        E = np.einsum("abxy,x,y->ab", p_hat, sign, sign)
        values = chsh_variants(E)
        variant = int(np.argmax(values))
        chsh = float(values[variant])
        chsh_se = float(np.sqrt(np.sum(np.clip(1 - E**2, 0, None) / n_ab)))

    tv = None
    if reference is not None:
        if reference.scenario != s:
            raise UsageError(f"reference scenario {reference.scenario} differs from transcript scenario {s}")
        per_ab = 0.5 * np.abs(p_hat - reference.p).sum(axis=(2, 3))
        tv = float(per_ab[sampled].max()) if sampled.any() else None
    return EmpiricalSummary(len(t), counts, behavior, stderr, unsampled, chsh, chsh_se, variant, tv)


def _z_subset(k_sub, n_sub, k_pool, n_pool):
    """z-score of a subsample frequency against the pool containing it.

    Under the null the difference has variance ``p(1-p)(1/n_sub - 1/n_pool)``
    with ``p`` the pooled frequency.
    """
    n_sub = np.broadcast_to(n_sub, k_sub.shape).astype(float)
    n_pool = np.broadcast_to(n_pool, k_sub.shape).astype(float)
    k_pool = np.broadcast_to(k_pool, k_sub.shape).astype(float)
    ok = (n_sub > 0) & (n_pool > 0)
    with np.errstate(divide="ignore", invalid="ignore"):
        p_sub = np.where(ok, k_sub / n_sub, 0.0)
        p_pool = np.where(ok, k_pool / n_pool, 0.0)
        var = p_pool * (1 - p_pool) * np.where(ok, 1 / n_sub - 1 / n_pool, 0.0)
    return _z(p_sub - p_pool, var, ok), ok, n_sub


def _z(diff, var, ok):
    diff = np.where(ok, np.abs(diff), 0.0)
    se = np.sqrt(np.clip(var, 0, None))
    with np.errstate(divide="ignore", invalid="ignore"):
        z = np.where(diff == 0, 0.0, np.where(se > 0, diff / se, np.inf))
    return z


_ALIASES = {
    "no-signaling": "no-signaling",
    "no-conspiracy": "no-conspiracy",
    "pi": "parameter-independence",
    "parameter-independence": "parameter-independence",
    "oi": "outcome-independence",
    "outcome-independence": "outcome-independence",
}


def empirical_condition_check(t: Transcript, condition: str, tol_stat: float = 5.0) -> ConditionReport:
    """Finite-sample version of a condition on the transcript frequencies.

    The reported deviation is the largest z-score, so the condition holds
    when every residual is within ``tol_stat`` estimated standard errors.
    Conditioning cells with no samples are vacuous.
    """
    name = _ALIASES.get(condition.lower())
    if name is None:
        raise UsageError(f"empirical check supports {sorted(set(_ALIASES.values()))}, not {condition!r}")
    if len(t) == 0:
        raise UsageError("cannot check an empty transcript")
    N = _counts(t)
    n_labx = N.sum(axis=4)
    n_laby = N.sum(axis=3)
    n_lab = n_labx.sum(axis=3)
    terms = {}
    if name == "no-signaling":
        m_a = N.sum(axis=(0, 4))  # [a, b, x]
        m_b = N.sum(axis=(0, 3))  # [a, b, y]
        n_ab = m_a.sum(axis=2)
        k1, k2 = m_a[:, :, None, :], m_a[:, None, :, :]
        n1, n2 = n_ab[:, :, None, None], n_ab[:, None, :, None]
        terms["X|A,B vs X|A,B'"] = _disjoint(k1, n1, k2, n2)
        k1, k2 = m_b[:, None, :, :], m_b[None, :, :, :]
        n1, n2 = n_ab[:, None, :, None], n_ab[None, :, :, None]
        terms["Y|A,B vs Y|A',B"] = _disjoint(k1, n1, k2, n2)
    elif name == "no-conspiracy":
        n_a = n_lab.sum(axis=(0, 2))
        n_b = n_lab.sum(axis=(0, 1))
        total = n_lab.sum()
        terms["A|B,lam"] = _z_subset(n_lab, n_lab.sum(axis=1)[:, None, :], n_a[None, :, None], total)
        terms["B|A,lam"] = _z_subset(n_lab, n_lab.sum(axis=2)[:, :, None], n_b[None, None, :], total)
    elif name == "parameter-independence":
        terms["X|A,B,lam"] = _z_subset(n_labx, n_lab[..., None], n_labx.sum(axis=2)[:, :, None, :],
                                       n_lab.sum(axis=2)[:, :, None, None])
        terms["Y|A,B,lam"] = _z_subset(n_laby, n_lab[..., None], n_laby.sum(axis=1)[:, None, :, :],
                                       n_lab.sum(axis=1)[:, None, :, None])
    else:
        terms["X|Y,A,B,lam"] = _z_subset(N, n_laby[:, :, :, None, :], n_labx[..., None], n_lab[..., None, None])
        terms["Y|X,A,B,lam"] = _z_subset(N, n_labx[..., None], n_laby[:, :, :, None, :], n_lab[..., None, None])

    support = [n[ok] for _, ok, n in terms.values() if ok.any()]
    min_support = int(min(s.min() for s in support)) if support else None
    report = reduce_terms(f"{name} (empirical)", {k: (z, ok) for k, (z, ok, _) in terms.items()}, tol_stat)
    return replace(report, min_support=min_support)


def _disjoint(k1, n1, k2, n2):
    shape = np.broadcast_shapes(k1.shape, k2.shape)
    k1, k2 = np.broadcast_to(k1, shape).astype(float), np.broadcast_to(k2, shape).astype(float)
    n1, n2 = np.broadcast_to(n1, shape).astype(float), np.broadcast_to(n2, shape).astype(float)
    ok = (n1 > 0) & (n2 > 0)
    with np.errstate(divide="ignore", invalid="ignore"):
        p1 = np.where(ok, k1 / n1, 0.0)
        p2 = np.where(ok, k2 / n2, 0.0)
        pool = np.where(ok, (k1 + k2) / (n1 + n2), 0.0)
        var = pool * (1 - pool) * np.where(ok, 1 / n1 + 1 / n2, 0.0)
    return _z(p1 - p2, var, ok), ok, np.minimum(n1, n2)
