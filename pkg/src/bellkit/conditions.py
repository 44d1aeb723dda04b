"""Locality and independence conditions as residual checkers.

Each checker builds one or more residual arrays ("terms") together with a
mask of cells whose conditioning event has non-negligible probability, then
reduces them to a :class:`ConditionReport`. Masked-out (vacuous) cells never
contribute to the deviation but are always counted.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional, Union

import numpy as np

from .core import EPS_NORM, EPS_ZERO, Behavior, HvModel, JointDistribution, build_joint
from .errors import UsageError

Terms = dict[str, tuple[np.ndarray, np.ndarray]]


@dataclass(frozen=True)
class ConditionReport:
    condition_name: str
    holds: bool
    max_deviation: float
    worst_cell: tuple
    vacuous_cells: int
    tolerance_used: float
    worst_term: str = ""
    # Smallest sample count behind a non-vacuous cell; only set by empirical checks.
    min_support: Optional[int] = None

    def summary(self, digits: int = 6) -> str:
        verdict = "holds" if self.holds else "FAILS"
        return f"{self.condition_name}: {verdict} (max deviation {self.max_deviation:.{digits}g}, vacuous {self.vacuous_cells})"


def _ratio(num: np.ndarray, den: np.ndarray, eps: float) -> tuple[np.ndarray, np.ndarray]:
    """``num / den`` where ``den >= eps``; zero and masked elsewhere."""
    den_b = np.broadcast_to(den, num.shape)
    ok = den_b >= eps
    out = np.zeros(num.shape)
    np.divide(num, den_b, out=out, where=ok)
    return out, ok


def reduce_terms(name: str, terms: Terms, tol: float) -> ConditionReport:
    best = 0.0
    best_cell: tuple = ()
    best_term = ""
    vacuous = 0
    for term, (resid, ok) in terms.items():
        vacuous += int(ok.size - np.count_nonzero(ok))
        if not ok.any():
            continue
        masked = np.where(ok, resid, -np.inf)
        flat = int(np.argmax(masked))
        value = float(masked.flat[flat])
        if not best_term or value > best:
            best = value
            best_cell = tuple(int(i) for i in np.unravel_index(flat, resid.shape))
            best_term = term
    return ConditionReport(name, bool(best <= tol), best, best_cell, vacuous, float(tol), best_term)


def _as_joint(source: Union[JointDistribution, HvModel]) -> JointDistribution:
    if isinstance(source, HvModel):
        return build_joint(source)
    if isinstance(source, JointDistribution):
        return source
    raise UsageError(f"expected a JointDistribution or HvModel, got {type(source).__name__}")


def _joint_pieces(j: JointDistribution):
    t = j.table
    p_labx = t.sum(axis=4)
    p_laby = t.sum(axis=3)
    p_lab = p_labx.sum(axis=3)
    return t, p_labx, p_laby, p_lab


def no_conspiracy_terms(j: JointDistribution) -> Terms:
    eps = j.eps_zero
    _, _, _, p_lab = _joint_pieces(j)
    p_a = p_lab.sum(axis=(0, 2))
    p_b = p_lab.sum(axis=(0, 1))
    a_given, a_ok = _ratio(p_lab, p_lab.sum(axis=1)[:, None, :], eps)
    b_given, b_ok = _ratio(p_lab, p_lab.sum(axis=2)[:, :, None], eps)
    return {
        "A|B,lam": (np.abs(a_given - p_a[None, :, None]), a_ok),
        "B|A,lam": (np.abs(b_given - p_b[None, None, :]), b_ok),
    }


def parameter_independence_terms(j: JointDistribution) -> Terms:
    eps = j.eps_zero
    _, p_labx, p_laby, p_lab = _joint_pieces(j)
    x_ab, x_ab_ok = _ratio(p_labx, p_lab[..., None], eps)
    x_a, x_a_ok = _ratio(p_labx.sum(axis=2), p_lab.sum(axis=2)[..., None], eps)
    y_ab, y_ab_ok = _ratio(p_laby, p_lab[..., None], eps)
    y_b, y_b_ok = _ratio(p_laby.sum(axis=1), p_lab.sum(axis=1)[..., None], eps)
    return {
        "X|A,B,lam": (np.abs(x_ab - x_a[:, :, None, :]), x_ab_ok & x_a_ok[:, :, None, :]),
        "Y|A,B,lam": (np.abs(y_ab - y_b[:, None, :, :]), y_ab_ok & y_b_ok[:, None, :, :]),
    }


def outcome_independence_terms(j: JointDistribution) -> Terms:
    eps = j.eps_zero
    t, p_labx, p_laby, p_lab = _joint_pieces(j)
    x_y, x_y_ok = _ratio(t, p_laby[:, :, :, None, :], eps)
    x_ab, _ = _ratio(p_labx, p_lab[..., None], eps)
    y_x, y_x_ok = _ratio(t, p_labx[..., None], eps)
    y_ab, _ = _ratio(p_laby, p_lab[..., None], eps)
    return {
        "X|Y,A,B,lam": (np.abs(x_y - x_ab[..., None]), x_y_ok),
        "Y|X,A,B,lam": (np.abs(y_x - y_ab[:, :, :, None, :]), y_x_ok),
    }


def fr_terms(j: JointDistribution) -> Terms:
    eps = j.eps_zero
    _, p_labx, p_laby, p_lab = _joint_pieces(j)
    p_a = p_lab.sum(axis=(0, 2))
    p_b = p_lab.sum(axis=(0, 1))
    a_given, a_ok = _ratio(p_laby, p_laby.sum(axis=1)[:, None, :, :], eps)
    b_given, b_ok = _ratio(p_labx, p_labx.sum(axis=2)[:, :, None, :], eps)
    return {
        "A|Y,B,lam": (np.abs(a_given - p_a[None, :, None, None]), a_ok),
        "B|X,A,lam": (np.abs(b_given - p_b[None, None, :, None]), b_ok),
    }


def _one_sided(m: HvModel):
    """Per-component behaviors, their one-sided marginals, and the settings-averaged marginals.

    ``P(X|A,lam)`` is the marginal averaged uniformly over B's setting; any
    dependence on B's setting shows up separately as a spread term.
    """
    p = m.behavior_table
    m_a = p.sum(axis=4)  # [l, a, b, x]
    m_b = p.sum(axis=3)  # [l, a, b, y]
    pa = m_a.mean(axis=2)  # [l, a, x]
    pb = m_b.mean(axis=1)  # [l, b, y]
    live = m.weights >= EPS_ZERO
    return p, m_a, m_b, pa, pb, live


def bell_local_terms(m: HvModel) -> Terms:
    p, m_a, m_b, pa, pb, live = _one_sided(m)
    prod = pa[:, :, None, :, None] * pb[:, None, :, None, :]
    return {
        "factorization": (np.abs(p - prod), np.broadcast_to(live[:, None, None, None, None], p.shape)),
        "X|A,lam spread": (np.abs(m_a - pa[:, :, None, :]), np.broadcast_to(live[:, None, None, None], m_a.shape)),
        "Y|B,lam spread": (np.abs(m_b - pb[:, None, :, :]), np.broadcast_to(live[:, None, None, None], m_b.shape)),
    }


def bell_local_conditional_terms(m: HvModel) -> Terms:
    p, m_a, m_b, pa, pb, live = _one_sided(m)
    x_y, x_ok = _ratio(p, m_b[:, :, :, None, :], EPS_ZERO)
    y_x, y_ok = _ratio(p, m_a[..., None], EPS_ZERO)
    live5 = live[:, None, None, None, None]
    return {
        "X|Y,A,B,lam": (np.abs(x_y - pa[:, :, None, :, None]), x_ok & live5),
        "Y|X,A,B,lam": (np.abs(y_x - pb[:, None, :, None, :]), y_ok & live5),
    }


def no_signaling_terms(b: Behavior) -> Terms:
    m_a = b.marginal_a()  # [a, b, x]
    m_b = b.marginal_b()  # [a, b, y]
    da = np.abs(m_a[:, :, None, :] - m_a[:, None, :, :])  # [a, b, b', x]
    db = np.abs(m_b[:, None, :, :] - m_b[None, :, :, :])  # [a, a', b, y]
    return {
        "X|A,B vs X|A,B'": (da, np.ones(da.shape, dtype=bool)),
        "Y|A,B vs Y|A',B": (db, np.ones(db.shape, dtype=bool)),
    }


def no_extension_terms(m: HvModel) -> Terms:
    """Per psi-group residuals ``|P(X,Y|A,B,psi,xi) - P(X,Y|A,B,psi)|`` indexed ``[xi, a, b, x, y]``."""
    if m.labels is None:
        raise UsageError("no-extension check needs psi/xi labels on every component")
    w = m.weights
    p = m.behavior_table
    terms: Terms = {}
    psi_order = list(dict.fromkeys(psi for psi, _ in m.labels))
    for psi in psi_order:
        members = [i for i, (ps, _) in enumerate(m.labels) if ps == psi]
        xi_order = list(dict.fromkeys(m.labels[i][1] for i in members))
        w_group = w[members].sum()
        xi_tables, xi_ok = [], []
        for xi in xi_order:
            idx = [i for i in members if m.labels[i][1] == xi]
            w_xi = w[idx].sum()
            ok = w_xi >= EPS_ZERO and w_group >= EPS_ZERO
            xi_tables.append(np.tensordot(w[idx], p[idx], axes=(0, 0)) / w_xi if ok else np.zeros(m.scenario.shape))
            xi_ok.append(ok)
        xi_tables = np.stack(xi_tables)
        if w_group >= EPS_ZERO:
            avg = np.tensordot(w[members], p[members], axes=(0, 0)) / w_group
        else:
            avg = np.zeros(m.scenario.shape)
        ok = np.broadcast_to(np.array(xi_ok)[:, None, None, None, None], xi_tables.shape)
        terms[f"psi={psi}"] = (np.abs(xi_tables - avg[None]), ok)
    return terms


def check_no_conspiracy(j, tol: float = EPS_NORM) -> ConditionReport:
    return reduce_terms("no-conspiracy", no_conspiracy_terms(_as_joint(j)), tol)


def check_bell_local_factorized(m: HvModel, tol: float = EPS_NORM) -> ConditionReport:
    return reduce_terms("bell-local", bell_local_terms(m), tol)


def check_bell_local_conditional(m: HvModel, tol: float = EPS_NORM) -> ConditionReport:
    return reduce_terms("bell-local-conditional", bell_local_conditional_terms(m), tol)


def check_parameter_independence(j, tol: float = EPS_NORM) -> ConditionReport:
    return reduce_terms("parameter-independence", parameter_independence_terms(_as_joint(j)), tol)


def check_outcome_independence(j, tol: float = EPS_NORM) -> ConditionReport:
    return reduce_terms("outcome-independence", outcome_independence_terms(_as_joint(j)), tol)


def check_fr(j, tol: float = EPS_NORM) -> ConditionReport:
    return reduce_terms("fr", fr_terms(_as_joint(j)), tol)


def check_no_signaling(b: Behavior, tol: float = EPS_NORM) -> ConditionReport:
    return reduce_terms("no-signaling", no_signaling_terms(b), tol)


def check_no_extension(m: HvModel, tol: float = EPS_NORM) -> ConditionReport:
    return reduce_terms("no-extension", no_extension_terms(m), tol)


# name -> (term builder, kind of input it consumes)
CHECKS: dict[str, tuple[Callable[..., Terms], str]] = {
    "no-conspiracy": (no_conspiracy_terms, "joint"),
    "bell-local": (bell_local_terms, "model"),
    "bell-local-conditional": (bell_local_conditional_terms, "model"),
    "parameter-independence": (parameter_independence_terms, "joint"),
    "outcome-independence": (outcome_independence_terms, "joint"),
    "fr": (fr_terms, "joint"),
    "no-signaling": (no_signaling_terms, "behavior"),
    "no-extension": (no_extension_terms, "model"),
}


def residual_terms(name: str, source) -> Terms:
    """Residual arrays and masks behind the named check, for auditing a report."""
    try:
        builder, kind = CHECKS[name]
    except KeyError:
        raise UsageError(f"unknown condition {name!r}") from None
    if kind == "joint":
        source = _as_joint(source)
    return builder(source)


def deviation_at(report: ConditionReport, source) -> float:
    """Re-evaluate the residual at ``report.worst_cell``."""
    resid, _ = residual_terms(report.condition_name, source)[report.worst_term]
    return float(resid[report.worst_cell])


# -- equivalence suites -------------------------------------------------------


@dataclass
class EquivalenceReport:
    name: str
    trials: int
    agreements: int
    counterexample: Optional[dict] = None
    direction_failures: dict[str, int] = field(default_factory=dict)
    family_counts: dict[str, int] = field(default_factory=dict)

    @property
    def ok(self) -> bool:
        return self.agreements == self.trials and not any(self.direction_failures.values())


def _record(report: EquivalenceReport, left: bool, right: bool, model: HvModel, names: tuple[str, str]):
    if left == right:
        report.agreements += 1
        return
    key = f"{names[0]} => {names[1]}" if left else f"{names[1]} => {names[0]}"
    report.direction_failures[key] = report.direction_failures.get(key, 0) + 1
    if report.counterexample is None:
        report.counterexample = model.to_dict()


def _trial_models(trials: int, seed: int, families):
    from .randmodels import random_model, trial_rng

    if trials < 1:
        raise UsageError(f"trials must be at least 1, got {trials}")
    for i in range(trials):
        yield random_model(trial_rng(seed, i), families=families)


def verify_appendix_a(trials: int, seed: int, tol: float = EPS_NORM, families=None) -> EquivalenceReport:
    """Property-test factorized Bell-locality against its conditional form.

    Besides agreement of the two verdicts, the two proof steps are checked
    on models where their premise holds: summing the factorization over X
    leaves ``P(Y|A,B,lam) = P(Y|B,lam)``, and substituting the conditional
    form into the chain rule recovers the factorization.
    """
    names = ("factorized", "conditional")
    report = EquivalenceReport("bell-local factorized <=> conditional", trials, 0)
    report.direction_failures = {f"{names[0]} => {names[1]}": 0, f"{names[1]} => {names[0]}": 0,
                                 "step: sum over X": 0, "step: substitution": 0}
    slack = 4 * tol
    for family, m in _trial_models(trials, seed, families):
        report.family_counts[family] = report.family_counts.get(family, 0) + 1
        fact = check_bell_local_factorized(m, tol).holds
        cond = check_bell_local_conditional(m, tol).holds
        _record(report, fact, cond, m, names)
        p, m_a, m_b, pa, pb, live = _one_sided(m)
        lv = live[:, None, None, None]
        if fact:
            resid = np.abs(m_b - pb[:, None, :, :])
            if np.any(np.where(lv, resid, 0.0) > slack):
                report.direction_failures["step: sum over X"] += 1
                report.counterexample = report.counterexample or m.to_dict()
        if cond:
            via_y = pa[:, :, None, :, None] * m_b[:, :, :, None, :]
            via_x = pb[:, None, :, None, :] * m_a[..., None]
            final = np.abs(p - pa[:, :, None, :, None] * pb[:, None, :, None, :])
            worst = max(np.abs(p - via_y).max(), np.abs(p - via_x).max(), np.where(lv[..., None], final, 0).max())
            if worst > slack:
                report.direction_failures["step: substitution"] += 1
                report.counterexample = report.counterexample or m.to_dict()
    return report


def verify_appendix_b(trials: int, seed: int, tol: float = EPS_NORM, families=None) -> EquivalenceReport:
    """Property-test the FR condition against no-conspiracy together with parameter independence."""
    names = ("fr", "no-conspiracy & PI")
    report = EquivalenceReport("fr <=> no-conspiracy & parameter-independence", trials, 0)
    report.direction_failures = {f"{names[0]} => {names[1]}": 0, f"{names[1]} => {names[0]}": 0}
    for family, m in _trial_models(trials, seed, families):
        report.family_counts[family] = report.family_counts.get(family, 0) + 1
        j = build_joint(m)
        fr = check_fr(j, tol).holds
        conj = check_no_conspiracy(j, tol).holds and check_parameter_independence(j, tol).holds
        _record(report, fr, conj, m, names)
    return report


def verify_jarrett(trials_per_family: int, seed: int, tol: float = EPS_NORM) -> EquivalenceReport:
    """Bell-locality verdict against parameter independence and outcome independence, per family."""
    from .randmodels import FAMILIES, random_model, trial_rng

    if trials_per_family < 1:
        raise UsageError(f"trials must be at least 1, got {trials_per_family}")
    names = ("bell-local", "PI & OI")
    report = EquivalenceReport("bell-local <=> PI & OI", 0, 0)
    report.direction_failures = {f"{names[0]} => {names[1]}": 0, f"{names[1]} => {names[0]}": 0}
    for k, family in enumerate(FAMILIES):
        for i in range(trials_per_family):
            _, m = random_model(trial_rng(seed, i, k + 1), families=(family,))
            j = build_joint(m)
            local = check_bell_local_factorized(m, tol).holds
            split = check_parameter_independence(j, tol).holds and check_outcome_independence(j, tol).holds
            report.trials += 1
            report.family_counts[family] = report.family_counts.get(family, 0) + 1
            _record(report, local, split, m, names)
    return report
