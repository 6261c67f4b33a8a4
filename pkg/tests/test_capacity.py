import numpy as np
import pytest

import src.relaycap.capacity as capacity
from src.relaycap.capacity import (
    _compressed_probs,
    ah_optimal,
    ah_rate,
    audit_curve,
    backward_crossover,
    binary_backward_test_channel,
    blahut_arimoto,
    capacity_curve,
    cf_optimal,
    cf_rate,
    chf_rate,
    constant_test_channel,
    cutset_rate,
    cutset_terms,
    erasure_mix,
    identity_test_channel,
    project_to_simplex,
    theorem1_capacity,
)
from src.relaycap.channel import bsc_state_channel, random_relay_channel
from src.relaycap.constants import BRANCH_BROADCAST, BRANCH_LINK
from src.relaycap.errors import DimensionMismatch
from src.relaycap.info import binary_entropy, conditional_mutual_information
from src.relaycap.schemas import JointPmf, Pmf, RateCurve, RatePoint, TestChannel


def test_simplex_projection():
    np.testing.assert_allclose(project_to_simplex(np.array([0.5, 0.5])), [0.5, 0.5])
    np.testing.assert_allclose(project_to_simplex(np.array([2.0, 0.0])), [1.0, 0.0])
    projected = project_to_simplex(np.array([0.9, -0.3, 0.6]))
    assert projected.sum() == pytest.approx(1.0)
    assert np.all(projected >= 0)


def test_blahut_arimoto_on_bsc():
    p = 0.11
    value, r = blahut_arimoto(np.array([[1 - p, p], [p, 1 - p]]))
    assert value == pytest.approx(1 - binary_entropy(p), abs=1e-9)
    np.testing.assert_allclose(r, [0.5, 0.5], atol=1e-6)


def test_blahut_arimoto_on_z_channel():
    value, r = blahut_arimoto(np.array([[1.0, 0.0], [0.5, 0.5]]))
    # Z-channel with crossover 1/2: C = log2(5/4)
    assert value == pytest.approx(np.log2(1.25), abs=1e-8)
    assert r[1] == pytest.approx(0.4, abs=1e-5)


def test_cutset_terms_bsc_state(bsc_state):
    link, broadcast = cutset_terms(Pmf.uniform(2), bsc_state, 0.1)
    assert link == pytest.approx(1 - binary_entropy(0.2) + 0.1)
    assert broadcast == pytest.approx(1.0)
    with pytest.raises(ValueError):
        cutset_terms(Pmf.uniform(2), bsc_state, -0.1)


@pytest.mark.parametrize(
    "r0, branch",
    [
        pytest.param(0.1, BRANCH_LINK, id="link-limited"),
        pytest.param(0.8, BRANCH_BROADCAST, id="plateau"),
    ],
)
def test_theorem1_on_bsc_state(bsc_state, cfg, r0, branch):
    point = theorem1_capacity(bsc_state, r0, cfg)
    assert point.rate == pytest.approx(min(1 - binary_entropy(0.2) + r0, 1.0), abs=2e-3)
    assert point.active_branch == branch
    assert point.converged
    np.testing.assert_allclose(point.argmax_input, [0.5, 0.5], atol=1e-3)


def test_theorem1_at_zero_is_point_to_point_capacity(rng, cfg):
    ch = random_relay_channel(3, 3, 2, rng)
    reference, _ = blahut_arimoto(ch.transition.sum(axis=2))
    assert theorem1_capacity(ch, 0.0, cfg).rate == pytest.approx(reference, abs=1e-4)


def test_theorem1_never_exceeds_broadcast_capacity(rng, cfg):
    ch = random_relay_channel(3, 2, 3, rng)
    ceiling, _ = blahut_arimoto(ch.transition.reshape(3, -1))
    point = theorem1_capacity(ch, 5.0, cfg)
    assert point.rate == pytest.approx(ceiling, abs=1e-4)


def test_capacity_curve_is_monotone_and_concave(rng, cfg):
    ch = random_relay_channel(3, 3, 3, rng)
    curve = capacity_curve(ch, np.linspace(0.0, 1.0, 11), cfg, workers=2)
    assert len(curve.points) == 11
    assert all(b >= a - 1e-9 for a, b in zip(curve.rates, curve.rates[1:]))
    assert audit_curve(curve, tolerance=1e-4) == []


def test_capacity_curve_rejects_bad_grid(bsc_state, cfg):
    with pytest.raises(ValueError):
        capacity_curve(bsc_state, [0.2, 0.1], cfg)
    with pytest.raises(ValueError):
        capacity_curve(bsc_state, [-0.1, 0.1], cfg)


def test_capacity_curve_marks_failed_rows(bsc_state, cfg, monkeypatch):
    original = capacity.theorem1_capacity

    def flaky(ch, r0, cfg, execution_start=None):
        if r0 == 0.2:
            raise RuntimeError("boom")
        return original(ch, r0, cfg, execution_start)

    monkeypatch.setattr(capacity, "theorem1_capacity", flaky)
    curve = capacity_curve(bsc_state, [0.0, 0.2, 0.4], cfg)
    assert [point.error is None for point in curve.points] == [True, False, True]
    assert "boom" in curve.points[1].error


def test_audit_flags_decrease_and_steep_slope():
    curve = RateCurve(
        points=[
            RatePoint(r0=0.0, rate=0.5, argmax_input=[]),
            RatePoint(r0=0.1, rate=0.4, argmax_input=[]),
            RatePoint(r0=0.2, rate=0.7, argmax_input=[]),
        ]
    )
    violations = audit_curve(curve)
    assert any("decreases" in v for v in violations)
    assert any("slope exceeds 1" in v for v in violations)
    assert any("not concave" in v for v in violations)


def test_test_channel_constructors():
    tc = identity_test_channel(2, extra_columns=1)
    np.testing.assert_array_equal(tc.matrix, [[1, 0, 0], [0, 1, 0]])
    np.testing.assert_allclose(erasure_mix(tc, 0.25).matrix, [[0.75, 0, 0.25], [0, 0.75, 0.25]])
    assert constant_test_channel(3, 2, column=1).matrix[:, 1].tolist() == [1.0, 1.0, 1.0]
    with pytest.raises(ValueError):
        TestChannel(matrix=[[0.5, 0.4]])


def test_repair_lands_on_erasure_mix_at_link_rate(bsc_state):
    px = np.array([0.5, 0.5])
    tc = identity_test_channel(2, extra_columns=1)
    repaired = capacity._repair(px, bsc_state.transition, tc.matrix, 0.3)
    theta = repaired[0, -1]
    assert 0.0 < theta < 1.0
    np.testing.assert_allclose(repaired, erasure_mix(tc, theta).matrix)
    _, link_cost = cf_rate(Pmf(probs=px), bsc_state, TestChannel(matrix=repaired))
    assert link_cost <= 0.3 + 1e-9
    assert link_cost == pytest.approx(0.3, abs=1e-6)


def test_cf_with_identity_description(bsc_state):
    rate, link_cost = cf_rate(Pmf.uniform(2), bsc_state, identity_test_channel(2))
    assert rate == pytest.approx(1.0)
    assert link_cost == pytest.approx(binary_entropy(0.2))


def test_cf_dimension_check(bsc_state):
    with pytest.raises(DimensionMismatch):
        cf_rate(Pmf.uniform(2), bsc_state, identity_test_channel(3))


@pytest.mark.parametrize("p, r0", [(0.2, 0.3), (0.3, 0.1), (0.11, 0.25)])
def test_backward_channel_meets_link_rate_exactly(p, r0):
    q = backward_crossover(p, r0)
    assert binary_entropy(p) - binary_entropy(q) == pytest.approx(r0, abs=1e-10)
    rate, link_cost = cf_rate(Pmf.uniform(2), bsc_state_channel(p), binary_backward_test_channel(p, q))
    assert link_cost == pytest.approx(r0, abs=1e-9)
    assert rate == pytest.approx(1 - binary_entropy(p) + r0, abs=1e-9)


def test_backward_crossover_saturates():
    assert backward_crossover(0.2, 5.0) == 0.0
    assert backward_crossover(0.2, 0.0) == pytest.approx(0.2)


def test_chf_matches_cutset(rng):
    for _ in range(25):
        ch = random_relay_channel(3, 2, 3, rng, sparsity=0.3)
        px = Pmf(probs=rng.dirichlet(np.ones(3)))
        tc = TestChannel(matrix=rng.dirichlet(np.ones(4), size=3))
        r0 = float(rng.uniform(0.0, 1.5))
        assert chf_rate(px, ch, tc, r0) == pytest.approx(cutset_rate(px, ch, r0), abs=1e-10)


def test_ah_rate_on_state_form(bsc_state_form):
    q = backward_crossover(0.2, 0.3)
    rate, link_cost = ah_rate(Pmf.uniform(2), bsc_state_form, binary_backward_test_channel(0.2, q))
    assert rate == pytest.approx(1 - binary_entropy(q), abs=1e-9)
    assert link_cost == pytest.approx(0.3, abs=1e-9)


def test_cf_optimal_reaches_capacity(bsc_state, cfg):
    point = cf_optimal(bsc_state, 0.3, cfg)
    assert point.rate == pytest.approx(1 - binary_entropy(0.2) + 0.3, abs=1e-2)
    assert point.link_cost <= 0.3 + 1e-9
    assert point.witness.size_y1hat == 3


@pytest.mark.parametrize("seed", [3, 17, 101])
def test_cf_optimal_with_ample_link_reaches_broadcast_capacity(seed, cfg):
    ch = random_relay_channel(3, 3, 3, np.random.default_rng(seed))
    ceiling, _ = blahut_arimoto(ch.transition.reshape(3, -1))
    # 3 bits exceed H(Y1|Y) for every input
    point = cf_optimal(ch, 3.0, cfg)
    assert point.rate == pytest.approx(ceiling, abs=1e-2)


def test_cf_optimal_without_link(bsc_state, cfg):
    point = cf_optimal(bsc_state, 0.0, cfg)
    assert point.rate == pytest.approx(1 - binary_entropy(0.2), abs=1e-2)


def test_ah_optimal_against_theorem1(bsc_state_form, cfg):
    point = ah_optimal(bsc_state_form, 0.1, cfg, compare_theorem1=True)
    assert point.theorem1 == pytest.approx(1 - binary_entropy(0.2) + 0.1, abs=2e-3)
    assert abs(point.gap) <= 1e-2


def test_cutset_value_on_bsc_state():
    value = cutset_rate(Pmf.uniform(2), bsc_state_channel(0.25), 0.5)
    assert value == pytest.approx(1 - binary_entropy(0.25) + 0.5, abs=1e-12)
    assert value == pytest.approx(0.68872, abs=1e-5)


def test_description_never_beats_the_relay_output(rng):
    for _ in range(50):
        ch = random_relay_channel(3, 3, 2, rng, sparsity=0.3)
        px = Pmf(probs=rng.dirichlet(np.ones(3)))
        tc = TestChannel(matrix=rng.dirichlet(np.ones(3), size=2))
        rate, link_cost = cf_rate(px, ch, tc)
        j = JointPmf(probs=_compressed_probs(px, ch, tc))
        assert rate <= cutset_terms(px, ch, 0.0)[1] + 1e-12
        assert conditional_mutual_information(j, [0], [3], [1]) >= link_cost - 1e-12


def test_constant_description_carries_nothing(bsc_state):
    rate, link_cost = cf_rate(Pmf.uniform(2), bsc_state, constant_test_channel(2, 3))
    assert rate == pytest.approx(1 - binary_entropy(0.2))
    assert link_cost == pytest.approx(0.0, abs=1e-12)
    for r0 in (0.0, 0.3, 1.0):
        chf = chf_rate(Pmf.uniform(2), bsc_state, constant_test_channel(2, 3), r0)
        assert chf == pytest.approx(min(1 - binary_entropy(0.2) + r0, 1.0))
