"""Scenarios, behaviors, hidden-variable models and their joint distribution.

Every conditional probability used elsewhere in the package is derived from
a :class:`JointDistribution` over the five variables ``(lam, A, B, X, Y)``,
stored as a dense table indexed ``[lam][a][b][x][y]``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Mapping, NamedTuple, Optional, Sequence

import numpy as np

from .errors import InvariantError, StructureError, UsageError

EPS_NORM = 1e-9
EPS_ZERO = 1e-12

VARIABLES = ("lam", "A", "B", "X", "Y")
_AXIS = {name: i for i, name in enumerate(VARIABLES)}


def _frozen(arr) -> np.ndarray:
    out = np.array(arr, dtype=float, copy=True)
    out.setflags(write=False)
    return out


@dataclass(frozen=True)
class Scenario:
    """Numbers of settings (``nA``, ``nB``) and outcomes (``nX``, ``nY``)."""

    nA: int
    nB: int
    nX: int
    nY: int

    def __post_init__(self):
        for name in ("nA", "nB", "nX", "nY"):
            value = getattr(self, name)
            if isinstance(value, bool) or not isinstance(value, (int, np.integer)) or value < 1:
                raise StructureError(f"scenario count {name} must be a positive integer, got {value!r}")
            object.__setattr__(self, name, int(value))

    @property
    def shape(self) -> tuple[int, int, int, int]:
        return (self.nA, self.nB, self.nX, self.nY)

    @property
    def n_deterministic(self) -> int:
        # Python ints do not overflow; callers compare against their own cap.
        return self.nX**self.nA * self.nY**self.nB

    def as_tuple(self) -> tuple[int, int, int, int]:
        return self.shape


@dataclass(frozen=True, eq=False)
class Behavior:
    """Conditional distribution ``p[a][b][x][y] = P(X=x, Y=y | A=a, B=b)``.

    Construction only checks the shape; use :func:`validate_behavior` for the
    probabilistic invariants.
    """

    scenario: Scenario
    p: np.ndarray

    def __post_init__(self):
        arr = _frozen(self.p)
        if arr.shape != self.scenario.shape:
            raise StructureError(
                f"behavior table has shape {arr.shape}, scenario requires {self.scenario.shape}"
            )
        object.__setattr__(self, "p", arr)

    @classmethod
    def uniform(cls, scenario: Scenario) -> "Behavior":
        return cls(scenario, np.full(scenario.shape, 1.0 / (scenario.nX * scenario.nY)))

    @classmethod
    def from_array(cls, p) -> "Behavior":
        arr = np.asarray(p, dtype=float)
        if arr.ndim != 4:
            raise StructureError(f"behavior table must be 4-dimensional, got {arr.ndim}")
        return cls(Scenario(*arr.shape), arr)

    def mix(self, other: "Behavior", weight: float) -> "Behavior":
        """Return ``weight * self + (1 - weight) * other``."""
        if other.scenario != self.scenario:
            raise StructureError("cannot mix behaviors of different scenarios")
        return Behavior(self.scenario, weight * self.p + (1.0 - weight) * other.p)

    def marginal_a(self) -> np.ndarray:
        """``sum_y p[a, b, x, y]`` indexed ``[a, b, x]``."""
        return self.p.sum(axis=3)

    def marginal_b(self) -> np.ndarray:
        """``sum_x p[a, b, x, y]`` indexed ``[a, b, y]``."""
        return self.p.sum(axis=2)

    def __eq__(self, other):
        if not isinstance(other, Behavior):
            return NotImplemented
        return self.scenario == other.scenario and np.array_equal(self.p, other.p)

    def __hash__(self):
        return hash((self.scenario, self.p.tobytes()))


@dataclass(frozen=True, eq=False)
class SettingPolicy:
    """Distribution ``q[a][b] = P(A=a, B=b | lam)`` of the settings."""

    q: np.ndarray

    def __post_init__(self):
        arr = _frozen(self.q)
        if arr.ndim != 2:
            raise StructureError(f"setting policy must be 2-dimensional, got shape {arr.shape}")
        object.__setattr__(self, "q", arr)

    @classmethod
    def uniform(cls, scenario: Scenario) -> "SettingPolicy":
        return cls(np.full((scenario.nA, scenario.nB), 1.0 / (scenario.nA * scenario.nB)))

    @classmethod
    def product(cls, pa: Sequence[float], pb: Sequence[float]) -> "SettingPolicy":
        return cls(np.outer(np.asarray(pa, dtype=float), np.asarray(pb, dtype=float)))

    def __eq__(self, other):
        if not isinstance(other, SettingPolicy):
            return NotImplemented
        return np.array_equal(self.q, other.q)

    def __hash__(self):
        return hash(self.q.tobytes())


@dataclass(frozen=True)
class Component:
    """One value of the hidden variable: its weight, setting policy and behavior.

    A ``policy`` of ``None`` means the uniform product policy.
    """

    weight: float
    behavior: Behavior
    policy: Optional[SettingPolicy] = None

    def resolved_policy(self) -> SettingPolicy:
        if self.policy is None:
            return SettingPolicy.uniform(self.behavior.scenario)
        return self.policy


@dataclass(frozen=True)
class HvModel:
    """Finite hidden-variable ensemble.

    ``labels``, when present, assigns each component a ``(psi_tag, xi_tag)``
    pair; components sharing a ``psi_tag`` form one group for the
    no-extension check.
    """

    scenario: Scenario
    components: tuple[Component, ...]
    labels: Optional[tuple[tuple[str, str], ...]] = None

    def __post_init__(self):
        comps = tuple(self.components)
        if not comps:
            raise StructureError("a hidden-variable model needs at least one component")
        for i, c in enumerate(comps):
            if c.behavior.scenario != self.scenario:
                raise StructureError(f"component {i} behavior has scenario {c.behavior.scenario}, model has {self.scenario}")
            if c.policy is not None and c.policy.q.shape != (self.scenario.nA, self.scenario.nB):
                raise StructureError(
                    f"component {i} policy has shape {c.policy.q.shape}, expected {(self.scenario.nA, self.scenario.nB)}"
                )
        object.__setattr__(self, "components", comps)
        if self.labels is not None:
            labels = tuple((str(p), str(x)) for p, x in self.labels)
            if len(labels) != len(comps):
                raise StructureError(f"{len(labels)} psi/xi labels given for {len(comps)} components")
            object.__setattr__(self, "labels", labels)

    @classmethod
    def single(cls, behavior: Behavior, policy: Optional[SettingPolicy] = None) -> "HvModel":
        return cls(behavior.scenario, (Component(1.0, behavior, policy),))

    @classmethod
    def from_arrays(cls, weights, behaviors, policies=None, labels=None) -> "HvModel":
        """Build a model from a weight vector and a ``[lam, a, b, x, y]`` table."""
        behaviors = np.asarray(behaviors, dtype=float)
        if behaviors.ndim != 5:
            raise StructureError("behaviors must be indexed [lam][a][b][x][y]")
        scenario = Scenario(*behaviors.shape[1:])
        weights = np.asarray(weights, dtype=float)
        if weights.shape != (behaviors.shape[0],):
            raise StructureError(f"{weights.shape} weights for {behaviors.shape[0]} components")
        if policies is None:
            policies = [None] * len(weights)
        comps = tuple(
            Component(float(w), Behavior(scenario, b), None if q is None else SettingPolicy(q))
            for w, b, q in zip(weights, behaviors, policies)
        )
        return cls(scenario, comps, labels)

    @property
    def n_lambda(self) -> int:
        return len(self.components)

    @property
    def weights(self) -> np.ndarray:
        return np.array([c.weight for c in self.components])

    @property
    def behavior_table(self) -> np.ndarray:
        """Per-component behaviors stacked as ``[lam, a, b, x, y]``."""
        return np.stack([c.behavior.p for c in self.components])

    @property
    def policy_table(self) -> np.ndarray:
        """Per-component setting policies stacked as ``[lam, a, b]``."""
        return np.stack([c.resolved_policy().q for c in self.components])

    def validate(self, tol: float = EPS_NORM) -> list["Violation"]:
        report: list[Violation] = []
        w = self.weights
        for i, wi in enumerate(w):
            if wi < -tol or wi > 1 + tol:
                report.append(Violation("weight-range", (i,), float(max(-wi, wi - 1))))
        if abs(w.sum() - 1.0) > tol:
            report.append(Violation("weight-normalization", (), float(abs(w.sum() - 1.0))))
        for i, c in enumerate(self.components):
            for v in validate_behavior(c.behavior, tol):
                report.append(Violation(v.kind, (i,) + v.location, v.magnitude, "behavior"))
            for v in validate_policy(c.resolved_policy(), tol):
                report.append(Violation(v.kind, (i,) + v.location, v.magnitude, "policy"))
        return report

    def to_dict(self) -> dict:
        comps = []
        for i, c in enumerate(self.components):
            entry = {"weight": c.weight, "behavior": c.behavior.p.tolist()}
            if c.policy is not None:
                entry["policy"] = c.policy.q.tolist()
            if self.labels is not None:
                entry["psi"], entry["xi"] = self.labels[i]
            comps.append(entry)
        return {"scenario": list(self.scenario.shape), "components": comps}


@dataclass(frozen=True)
class Violation:
    """One failed invariant: what failed, where, and by how much."""

    kind: str
    location: tuple
    magnitude: float
    part: str = "behavior"

    def __str__(self):
        return f"{self.part} {self.kind} at {self.location}: {self.magnitude:.3g}"


def validate_behavior(b: Behavior, tol: float = EPS_NORM) -> list[Violation]:
    """Return every violated probability invariant of ``b`` (empty when valid).

    Negativity and entries above one are reported per cell ``(a, b, x, y)``;
    normalization failures per settings pair ``(a, b)``.
    """
    p = b.p
    if p.shape != b.scenario.shape:
        raise StructureError(f"behavior table has shape {p.shape}, scenario requires {b.scenario.shape}")
    report = []
    for idx in zip(*np.nonzero(p < -tol)):
        report.append(Violation("negative", tuple(int(i) for i in idx), float(-p[idx])))
    for idx in zip(*np.nonzero(p > 1 + tol)):
        report.append(Violation("above-one", tuple(int(i) for i in idx), float(p[idx] - 1)))
    sums = p.sum(axis=(2, 3))
    dev = np.abs(sums - 1.0)
    for idx in zip(*np.nonzero(dev > tol)):
        report.append(Violation("normalization", tuple(int(i) for i in idx), float(dev[idx])))
    return report


def validate_policy(q: SettingPolicy, tol: float = EPS_NORM) -> list[Violation]:
    report = []
    for idx in zip(*np.nonzero(q.q < -tol)):
        report.append(Violation("negative", tuple(int(i) for i in idx), float(-q.q[idx]), "policy"))
    total = q.q.sum()
    if abs(total - 1.0) > tol:
        report.append(Violation("normalization", (), float(abs(total - 1.0)), "policy"))
    return report


@dataclass(frozen=True, eq=False)
class JointDistribution:
    """Joint table ``P(lam, A, B, X, Y)`` indexed ``[lam][a][b][x][y]``."""

    scenario: Scenario
    table: np.ndarray
    eps_zero: float = field(default=EPS_ZERO)

    def __post_init__(self):
        arr = _frozen(self.table)
        if arr.ndim != 5 or arr.shape[1:] != self.scenario.shape:
            raise StructureError(f"joint table has shape {arr.shape}, scenario requires (L,) + {self.scenario.shape}")
        object.__setattr__(self, "table", arr)

    @property
    def n_lambda(self) -> int:
        return self.table.shape[0]

    def marginal(self, keep: Iterable[str]) -> np.ndarray:
        """Sum out every variable not in ``keep``; remaining axes stay in canonical order."""
        keep_axes = {_axis(v) for v in keep}
        drop = tuple(i for i in range(5) if i not in keep_axes)
        return self.table.sum(axis=drop)


def _axis(name: str) -> int:
    try:
        return _AXIS[name]
    except KeyError:
        raise UsageError(f"unknown variable {name!r}; expected one of {VARIABLES}") from None


def build_joint(m: HvModel, external_policy: Optional[SettingPolicy] = None, tol: float = EPS_NORM) -> JointDistribution:
    """Compose ``P(lam) * P(A,B|lam) * P(X,Y|A,B,lam)`` into a joint table.

    An ``external_policy`` replaces every component's own policy.
    """
    report = m.validate(tol)
    if external_policy is not None:
        if external_policy.q.shape != (m.scenario.nA, m.scenario.nB):
            raise StructureError(f"external policy has shape {external_policy.q.shape}")
        report += validate_policy(external_policy, tol)
    if report:
        raise InvariantError(f"model violates {len(report)} invariant(s): {report[0]}", report)
    w = m.weights
    if external_policy is None:
        q = m.policy_table
    else:
        q = np.broadcast_to(external_policy.q, (m.n_lambda,) + external_policy.q.shape)
    table = w[:, None, None, None, None] * q[:, :, :, None, None] * m.behavior_table
    return JointDistribution(m.scenario, table)


class Conditional(NamedTuple):
    """Result of :func:`conditional`: a table over the targets, or ``None`` when vacuous."""

    table: Optional[np.ndarray]
    vacuous: bool
    probability: float


def conditional(
    j: JointDistribution,
    targets: Sequence[str],
    givens: Mapping[str, int],
    eps_zero: Optional[float] = None,
) -> Conditional:
    """``P(targets | givens)`` from the joint table.

    The returned table has one axis per target, in canonical variable order
    ``(lam, A, B, X, Y)``. If ``P(givens) < eps_zero`` the cell is vacuous: no
    division happens and ``table`` is ``None``.
    """
    eps = j.eps_zero if eps_zero is None else eps_zero
    t_axes = {_axis(v) for v in targets}
    g_axes = {_axis(v): int(val) for v, val in givens.items()}
    if t_axes & g_axes.keys():
        raise UsageError("target and given variables overlap")
    if not t_axes:
        raise UsageError("conditional needs at least one target variable")
    index = []
    for ax in range(5):
        if ax in g_axes:
            k = g_axes[ax]
            if not 0 <= k < j.table.shape[ax]:
                raise UsageError(f"value {k} out of range for {VARIABLES[ax]}")
            index.append(k)
        else:
            index.append(slice(None))
    sub = j.table[tuple(index)]
    # Remaining axes are the free (non-given) variables, in canonical order.
    free = [ax for ax in range(5) if ax not in g_axes]
    drop = tuple(i for i, ax in enumerate(free) if ax not in t_axes)
    marg = sub.sum(axis=drop) if drop else sub
    total = float(marg.sum())
    if total < eps:
        return Conditional(None, True, total)
    return Conditional(marg / total, False, total)


def averaged_behavior(m: HvModel) -> Behavior:
    """Weighted average ``sum_lam P(lam) * behavior_lam``; settings are free inputs."""
    report = m.validate()
    if report:
        raise InvariantError(f"model violates {len(report)} invariant(s): {report[0]}", report)
    p = np.tensordot(m.weights, m.behavior_table, axes=(0, 0))
    return Behavior(m.scenario, p)


def behavior_given_settings(j: JointDistribution) -> tuple[np.ndarray, np.ndarray]:
    """``P(X,Y|A,B)`` from the joint, marginalizing ``lam``.

    Returns the ``[a, b, x, y]`` table and a boolean ``[a, b]`` mask of
    settings pairs that are vacuous (their rows are left at zero).
    """
    pab_xy = j.table.sum(axis=0)
    pab = pab_xy.sum(axis=(2, 3))
    vac = pab < j.eps_zero
    out = np.zeros_like(pab_xy)
    ok = ~vac
    out[ok] = pab_xy[ok] / pab[ok][:, None, None]
    return out, vac
