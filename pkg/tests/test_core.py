import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from bellkit.core import (
    Behavior,
    Component,
    HvModel,
    JointDistribution,
    Scenario,
    SettingPolicy,
    averaged_behavior,
    build_joint,
    conditional,
    validate_behavior,
)
from bellkit.errors import InvariantError, StructureError, UsageError
from bellkit.geometry import deterministic_strategies, local_membership
from bellkit.quantum import tsirelson_singlet
from bellkit.randmodels import random_model, trial_rng

from conftest import S2222, point_mass


def test_scenario_rejects_nonpositive_counts():
    with pytest.raises(StructureError):
        Scenario(0, 2, 2, 2)
    with pytest.raises(StructureError):
        Scenario(2, 2, True, 2)
    assert Scenario(2, 3, 2, 2).n_deterministic == 2**2 * 2**3


def test_uniform_behavior_validates():
    assert validate_behavior(Behavior.uniform(Scenario(3, 2, 2, 3))) == []


def test_negative_entry_reported_at_its_cell():
    p = np.full((2, 2, 2, 2), 0.25)
    p[1, 0, 1, 1] = -0.1
    p[1, 0, 0, 0] = 0.6
    report = validate_behavior(Behavior(S2222, p), 1e-9)
    assert len(report) == 1
    assert report[0].kind == "negative"
    assert report[0].location == (1, 0, 1, 1)
    assert report[0].magnitude == pytest.approx(0.1)


def test_normalization_violation_magnitude():
    p = np.full((2, 2, 2, 2), 0.25)
    p[0, 1, 0, 0] += 1e-6
    report = validate_behavior(Behavior(S2222, p), 1e-9)
    assert [(v.kind, v.location) for v in report] == [("normalization", (0, 1))]
    assert report[0].magnitude == pytest.approx(1e-6, rel=1e-6)


def test_dimension_mismatch_is_structural():
    with pytest.raises(StructureError):
        Behavior(S2222, np.full((2, 2, 2, 3), 1 / 6))
    assert not issubclass(StructureError, InvariantError)


def test_behaviors_are_immutable():
    b = Behavior.uniform(S2222)
    with pytest.raises(ValueError):
        b.p[0, 0, 0, 0] = 1.0


def test_joint_of_uniforms_is_flat():
    j = build_joint(HvModel.single(Behavior.uniform(S2222)))
    assert j.table.shape == (1, 2, 2, 2, 2)
    np.testing.assert_array_equal(j.table, np.full(j.table.shape, 1 / 16))


def test_joint_of_deterministic_components_zero_off_support():
    m = HvModel.from_arrays([0.5, 0.5], [point_mass(0, 0).p, point_mass(1, 1).p])
    j = build_joint(m)
    assert j.table[0, :, :, 0, 1].sum() == 0 and j.table[0, :, :, 1, :].sum() == 0
    assert j.table[1, :, :, 0, :].sum() == 0
    assert j.table.sum() == pytest.approx(1.0, abs=1e-12)


def test_joint_entries_are_three_factor_products():
    _, m = random_model(trial_rng(11, 0))
    j = build_joint(m)
    l, a, b, x, y = 0, 1, 0, 1, 1
    c = m.components[l]
    assert j.table[l, a, b, x, y] == c.weight * c.resolved_policy().q[a, b] * c.behavior.p[a, b, x, y]


def test_external_policy_overrides_components():
    _, m = random_model(trial_rng(3, 1), scenario=(2, 2, 2, 2))
    q = SettingPolicy.product([1.0, 0.0], [0.5, 0.5])
    j = build_joint(m, external_policy=q)
    assert j.table[:, 1].sum() == 0


def test_build_joint_rejects_invalid_model():
    bad = Behavior(S2222, np.full((2, 2, 2, 2), 0.3))
    with pytest.raises(InvariantError) as exc:
        build_joint(HvModel.single(bad))
    assert exc.value.report and exc.value.report[0].kind == "normalization"
    with pytest.raises(InvariantError):
        build_joint(HvModel.from_arrays([0.5, 0.6], [Behavior.uniform(S2222).p] * 2))


def test_conditional_marginal_of_product_model():
    pa, pb = np.array([0.3, 0.7]), np.array([0.9, 0.1])
    p = np.zeros((2, 2, 2, 2))
    p[0] = np.outer(pa, pb)
    p[1] = np.outer(pa[::-1], pb)
    j = build_joint(HvModel.single(Behavior(S2222, p)))
    res = conditional(j, ["X"], {"A": 0})
    assert not res.vacuous
    np.testing.assert_allclose(res.table, pa, atol=1e-15)


def test_conditional_policy_is_free():
    _, m = random_model(trial_rng(5, 2), families=("product",))
    m = HvModel(m.scenario, tuple(Component(c.weight, c.behavior) for c in m.components))
    j = build_joint(m)
    for lam in range(m.n_lambda):
        for b in range(m.scenario.nB):
            res = conditional(j, ["A"], {"B": b, "lam": lam})
            np.testing.assert_allclose(res.table, np.full(m.scenario.nA, 1 / m.scenario.nA), atol=1e-14)


def test_conditional_vacuous_cell():
    m = HvModel.single(Behavior.uniform(S2222), SettingPolicy.product([1, 0], [0.5, 0.5]))
    res = conditional(build_joint(m), ["X"], {"A": 1, "lam": 0})
    assert res.vacuous and res.table is None and res.probability == 0.0


def test_conditional_rejects_overlap_and_unknown():
    j = build_joint(HvModel.single(Behavior.uniform(S2222)))
    with pytest.raises(UsageError):
        conditional(j, ["X", "A"], {"A": 0})
    with pytest.raises(UsageError):
        conditional(j, ["Z"], {})


def test_conditional_target_order_is_canonical():
    _, m = random_model(trial_rng(1, 9), scenario=(2, 3, 2, 2))
    j = build_joint(m)
    t1 = conditional(j, ["Y", "B"], {"A": 1}).table
    assert t1.shape == (3, 2)  # B before Y


def test_averaged_behavior_single_component_identity(singlet):
    assert averaged_behavior(HvModel.single(singlet)) == singlet


def test_averaged_behavior_convexity():
    m = HvModel.from_arrays([0.5, 0.5], [point_mass(0, 0).p, point_mass(1, 1).p])
    p = averaged_behavior(m).p
    assert np.all(p[:, :, 0, 0] == 0.5) and np.all(p[:, :, 1, 1] == 0.5)
    assert np.all(p[:, :, 0, 1] == 0) and np.all(p[:, :, 1, 0] == 0)


def test_local_decomposition_reproduces_noisy_singlet():
    target = tsirelson_singlet().mix(Behavior.uniform(S2222), 0.5)
    cert = local_membership(target)
    assert cert.member
    strategies = deterministic_strategies(S2222)
    comps = []
    for k, w in cert.weights.items():
        fa, fb = strategies[k]
        p = np.zeros((2, 2, 2, 2))
        for a in range(2):
            for b in range(2):
                p[a, b, fa[a], fb[b]] = 1.0
        comps.append(Component(w, Behavior(S2222, p)))
    total = sum(c.weight for c in comps)
    comps = [Component(c.weight / total, c.behavior) for c in comps]
    avg = averaged_behavior(HvModel(S2222, tuple(comps)))
    np.testing.assert_allclose(avg.p, target.p, atol=1e-12, rtol=0)


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 10_000))
def test_chain_rule_identity(seed):
    _, m = random_model(trial_rng(seed, 0))
    j = build_joint(m)
    s = m.scenario
    for lam in range(m.n_lambda):
        for a in range(s.nA):
            for b in range(s.nB):
                g = {"A": a, "B": b, "lam": lam}
                xy = conditional(j, ["X", "Y"], g)
                if xy.vacuous:
                    continue
                py = conditional(j, ["Y"], g).table
                for y in range(s.nY):
                    px_y = conditional(j, ["X"], {**g, "Y": y})
                    if px_y.vacuous:
                        continue
                    np.testing.assert_allclose(xy.table[:, y], px_y.table * py[y], atol=1e-12, rtol=0)


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 10_000))
def test_joint_marginal_matches_average_for_free_policy(seed):
    rng = trial_rng(seed, 4)
    _, m = random_model(rng)
    q = rng.random((m.scenario.nA, m.scenario.nB)) + 0.05
    q = SettingPolicy(q / q.sum())
    j = build_joint(m, external_policy=q)
    pab_xy = j.table.sum(axis=0)
    recovered = pab_xy / pab_xy.sum(axis=(2, 3), keepdims=True)
    np.testing.assert_allclose(recovered, averaged_behavior(m).p, atol=1e-12, rtol=0)


def test_operations_are_pure():
    _, m = random_model(trial_rng(2, 2))
    assert build_joint(m).table.tobytes() == build_joint(m).table.tobytes()
    assert averaged_behavior(m) == averaged_behavior(m)


def test_hv_model_label_count_checked():
    with pytest.raises(StructureError):
        HvModel.from_arrays([1.0], [Behavior.uniform(S2222).p], labels=[("a", "0"), ("a", "1")])


def test_joint_distribution_shape_checked():
    with pytest.raises(StructureError):
        JointDistribution(S2222, np.zeros((2, 2, 2, 2)))
