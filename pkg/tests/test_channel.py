import json

import numpy as np
import pytest
from pydantic import ValidationError

from src.relaycap.channel import (
    DiscreteRelayChannel,
    GaussianRelaySpec,
    StateChannel,
    bsc_state_channel,
    check_state_recoverable,
    dump_channel,
    dump_state_channel,
    gaussian_capacity,
    gaussian_c0,
    gaussian_cf_r0,
    gaussian_cf_rate,
    gaussian_cf_rstar,
    gaussian_invert_r0,
    induced_joint,
    parse_channel,
    parse_gaussian,
    parse_state_channel,
    random_relay_channel,
    sample,
    validate,
)
from src.relaycap.errors import (
    DimensionMismatch,
    NotDeterministic,
    RowNotNormalized,
    StateNotRecoverable,
    SymbolOutOfRange,
    UnsupportedCorrelation,
)
from src.relaycap.info import conditional_entropy, mutual_information
from src.relaycap.schemas import Pmf


def test_bsc_state_relay_is_xor(bsc_state):
    f = validate(bsc_state)
    assert f.as_dict() == {(0, 0): 0, (0, 1): 1, (1, 0): 1, (1, 1): 0}
    assert f(1, 0) == 1


def test_nondeterministic_channel_names_the_pair():
    transition = np.zeros((2, 2, 2))
    transition[0, 0] = [0.25, 0.25]
    transition[0, 1, 0] = 0.5
    transition[1, 1, 1] = 1.0
    with pytest.raises(NotDeterministic) as excinfo:
        validate(DiscreteRelayChannel(transition=transition))
    assert (excinfo.value.x, excinfo.value.y) == (0, 0)


def test_unnormalized_row():
    transition = np.zeros((2, 1, 1))
    transition[0, 0, 0] = 1.0
    transition[1, 0, 0] = 0.9
    with pytest.raises(RowNotNormalized) as excinfo:
        validate(DiscreteRelayChannel(transition=transition))
    assert excinfo.value.x == 1


def test_undefined_pairs_stay_undefined():
    transition = np.zeros((2, 2, 2))
    transition[0, 0, 1] = 1.0
    transition[1, 1, 0] = 1.0
    f = validate(DiscreteRelayChannel(transition=transition))
    assert f(0, 1) is None
    assert f.as_dict() == {(0, 0): 1, (1, 1): 0}


def test_state_form_matches_relay_form(bsc_state, bsc_state_form):
    np.testing.assert_allclose(bsc_state_form.to_relay_channel().transition, bsc_state.transition)


def test_state_not_recoverable():
    law = np.full((2, 2, 2), 0.5)
    state_ch = StateChannel(state_pmf=[0.5, 0.5], law=law)
    with pytest.raises(StateNotRecoverable):
        check_state_recoverable(state_ch)


def test_random_relay_channels_are_deterministic(rng):
    for sparsity in (0.0, 0.5):
        ch = random_relay_channel(3, 4, 2, rng, sparsity=sparsity)
        validate(ch)
        np.testing.assert_allclose(ch.transition.sum(axis=(1, 2)), 1.0)


def _leak_one_cell(ch, delta):
    transition = np.array(ch.transition)
    x = 0
    y = int(np.argmax(transition[x].sum(axis=1)))
    y1 = int(np.argmax(transition[x, y]))
    moved = delta * transition[x, y, y1]
    transition[x, y, y1] -= moved
    transition[x, y, (y1 + 1) % ch.size_y1] += moved
    return DiscreteRelayChannel(transition=transition)


def _blend(ch, rng, weight):
    noise = rng.dirichlet(np.ones(ch.size_y * ch.size_y1), size=ch.size_x).reshape(ch.transition.shape)
    return DiscreteRelayChannel(transition=(1.0 - weight) * ch.transition + weight * noise)


@pytest.mark.parametrize("seed", range(6))
def test_validate_agrees_with_relay_equivocation(seed):
    rng = np.random.default_rng(seed)
    ch = random_relay_channel(3, 2, 3, rng, sparsity=0.3 if seed % 2 else 0.0)
    px = Pmf(probs=rng.dirichlet(np.full(3, 5.0)))
    outcomes = []
    for candidate in (ch, _leak_one_cell(ch, 1e-3), _blend(ch, rng, 0.05)):
        equivocation = conditional_entropy(induced_joint(px, candidate), [2], [0, 1])
        if equivocation > 1e-10:
            with pytest.raises(NotDeterministic):
                validate(candidate)
        else:
            validate(candidate)
        outcomes.append(equivocation > 1e-10)
    assert outcomes == [False, True, True]


def test_induced_joint_size_check(bsc_state):
    with pytest.raises(DimensionMismatch):
        induced_joint(Pmf.uniform(3), bsc_state)


def test_sample_frequencies(bsc_state, rng):
    xs = np.zeros(20000, dtype=int)
    ys, y1s = sample(bsc_state, xs, rng)
    assert np.all(ys == y1s)
    assert np.mean(y1s) == pytest.approx(0.2, abs=0.02)


def test_sample_never_hits_zero_cells(rng):
    ch = random_relay_channel(3, 3, 3, rng, sparsity=0.6)
    xs = rng.integers(0, 3, size=5000)
    ys, y1s = sample(ch, xs, rng)
    assert np.all(ch.transition[xs, ys, y1s] > 0)


def test_sample_rejects_bad_symbols(bsc_state):
    with pytest.raises(SymbolOutOfRange):
        sample(bsc_state, [0, 2], 0)


@pytest.mark.parametrize(
    "rho, message",
    [
        pytest.param(0.0, "open problem", id="independent"),
        pytest.param(0.5, "not supported", id="partial"),
    ],
)
def test_gaussian_rejects_unsupported_rho(rho, message):
    with pytest.raises(UnsupportedCorrelation, match=message):
        GaussianRelaySpec(P=1.0, N=1.0, rho=rho)


def test_gaussian_closed_forms():
    spec = GaussianRelaySpec(P=1.0, N=1.0, rho=-1.0)
    assert gaussian_c0(spec) == pytest.approx(0.5)
    for r0 in (0.0, 0.1, 0.5, 2.0):
        assert gaussian_capacity(spec, r0) == pytest.approx(0.5 + r0, abs=1e-12)
        assert gaussian_cf_rate(spec, r0) == pytest.approx(0.5 + r0, abs=1e-9)

    same_noise = GaussianRelaySpec(P=1.0, N=1.0, rho=1.0)
    assert gaussian_capacity(same_noise, 0.7) == pytest.approx(0.5)
    with pytest.raises(UnsupportedCorrelation):
        gaussian_cf_rstar(same_noise, 1.0)


def test_gaussian_inversion_round_trip():
    spec = GaussianRelaySpec(P=4.0, N=1.0, rho=-1.0)
    for sigma2 in (1e-3, 0.5, 1.0, 10.0, 1e3):
        assert gaussian_invert_r0(spec, gaussian_cf_r0(spec, sigma2)) == pytest.approx(sigma2, rel=1e-10)


def test_gaussian_spec_from_json():
    spec = parse_gaussian('{"P": 2.0, "N": 0.5, "rho": -1}')
    assert spec.power == 2.0
    assert spec.snr == pytest.approx(4.0)


def test_channel_json_keeps_probabilities_exactly(bsc_state):
    text = dump_channel(bsc_state)
    assert json.loads(text)["transition"][0][0][0] == "0.80000000000000004"
    np.testing.assert_array_equal(parse_channel(text).transition, bsc_state.transition)


def test_state_channel_json(bsc_state_form):
    parsed = parse_state_channel(dump_state_channel(bsc_state_form))
    np.testing.assert_array_equal(parsed.law, bsc_state_form.law)


def test_declared_sizes_must_match():
    text = json.dumps({"sizeX": 2, "sizeY": 2, "sizeY1": 3, "transition": bsc_state_channel(0.2).transition.tolist()})
    with pytest.raises(DimensionMismatch):
        parse_channel(text)


def test_malformed_json_is_a_validation_error():
    with pytest.raises(ValidationError):
        parse_channel('{"sizeX": 2, "sizeY": ')


@pytest.mark.parametrize(
    "power, noise, expected",
    [
        pytest.param(1.0, 1.0, 0.5, id="equal"),
        pytest.param(3.0, 1.0, 1.0, id="snr-3"),
        pytest.param(1.0, 0.1, 0.5 * np.log2(11.0), id="snr-10"),
    ],
)
def test_gaussian_direct_capacity(power, noise, expected):
    assert gaussian_c0(GaussianRelaySpec(P=power, N=noise, rho=-1.0)) == pytest.approx(expected)


def test_gaussian_compression_values():
    spec = GaussianRelaySpec(P=1.0, N=1.0, rho=-1.0)
    assert gaussian_cf_r0(spec, 4.0) == pytest.approx(0.5 * np.log2(12 / 8))
    assert gaussian_cf_rstar(spec, 4.0) == pytest.approx(0.5 * np.log2(3.0))
    assert gaussian_invert_r0(spec, 0.5) == pytest.approx(2.0)
    assert gaussian_capacity(spec, 0.7) == pytest.approx(1.2)


def test_bsc_state_extremes():
    pure_noise = induced_joint(Pmf.uniform(2), bsc_state_channel(0.5))
    assert mutual_information(pure_noise, [0], [1]) == pytest.approx(0.0, abs=1e-12)

    j = induced_joint(Pmf.uniform(2), bsc_state_channel(0.11))
    assert conditional_entropy(j, [2], [1]) == pytest.approx(
        -(0.11 * np.log2(0.11) + 0.89 * np.log2(0.89)), abs=1e-10
    )

    ys, y1s = sample(bsc_state_channel(0.0), [0, 1, 1, 0], 3)
    assert ys.tolist() == [0, 1, 1, 0]
    assert y1s.tolist() == [0, 0, 0, 0]


def test_sample_respects_relay_function(rng):
    ch = random_relay_channel(3, 4, 3, rng, sparsity=0.4)
    f = validate(ch)
    xs = rng.integers(0, 3, size=2000)
    ys, y1s = sample(ch, xs, 99)
    np.testing.assert_array_equal(f.apply(xs, ys), y1s)
    again_ys, again_y1s = sample(ch, xs, 99)
    np.testing.assert_array_equal(ys, again_ys)
