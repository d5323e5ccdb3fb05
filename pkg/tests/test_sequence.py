"""Blocked sequence estimation, ideal risk, and schedule checks."""

import math

import numpy as np
import pytest

from gebshrink.blocks import TuningConfig, james_stein
from gebshrink.mixture import bayes_risk, from_atoms
from gebshrink.sequence import (
    BlockedSequence,
    check_blocks,
    dyadic_sequence,
    estimate_sequence,
    ideal_risk,
)


def make_dyadic(rng, j_max, epsilon, scale=1.0, truth=False):
    blocks = {}
    truths = {}
    for j in range(-1, j_max + 1):
        n = 2 ** max(j, 0)
        truths[j] = rng.standard_normal(n) * scale
        blocks[j] = truths[j] + rng.standard_normal(n) * epsilon
    return dyadic_sequence(epsilon, blocks, truth=truths if truth else None)


# ---------------------------------------------------------------- structure


def test_dyadic_sequence_sizes():
    seq = dyadic_sequence(0.1, {j: np.zeros(2 ** max(j, 0)) for j in range(-1, 5)})
    assert [(j, len(v)) for j, v in seq.blocks] == [
        (-1, 1), (0, 1), (1, 2), (2, 4), (3, 8), (4, 16)
    ]


def test_dyadic_sequence_validates_shape():
    with pytest.raises(ValueError):
        dyadic_sequence(0.1, {-1: np.zeros(1), 0: np.zeros(2)})  # wrong size
    with pytest.raises(ValueError):
        dyadic_sequence(0.1, {0: np.zeros(1)})  # must start at -1
    with pytest.raises(ValueError):
        dyadic_sequence(0.1, {-1: np.zeros(1), 1: np.zeros(2)})  # gap
    with pytest.raises(ValueError):
        dyadic_sequence(0.0, {-1: np.zeros(1)})


def test_truth_shape_must_match():
    with pytest.raises(ValueError):
        dyadic_sequence(0.1, {-1: np.zeros(1)}, truth={-1: np.zeros(2)})


# ---------------------------------------------------------------- estimation


def test_zero_sequence_estimates_to_zero():
    seq = dyadic_sequence(0.5, {j: np.zeros(2 ** max(j, 0)) for j in range(-1, 8)})
    estimates, fits = estimate_sequence(seq, TuningConfig())
    for est in estimates:
        assert np.array_equal(est, np.zeros_like(est))
    for fit in fits:
        if fit.n >= 64:
            assert fit.branch == "threshold"


def test_small_levels_pass_through_under_mle_policy():
    rng = np.random.default_rng(3)
    seq = make_dyadic(rng, 5, 0.2)  # largest block is 32 < 64
    estimates, fits = estimate_sequence(seq, TuningConfig())
    for (j, values), est, fit in zip(seq.blocks, estimates, fits):
        assert np.array_equal(est, values)
        assert fit.branch == "mle"


def test_james_stein_policy_on_small_levels():
    rng = np.random.default_rng(4)
    seq = make_dyadic(rng, 4, 0.3)
    cfg = TuningConfig(small_block_policy="james_stein")
    estimates, fits = estimate_sequence(seq, cfg)
    for (j, values), est, fit in zip(seq.blocks, estimates, fits):
        assert fit.branch == "james_stein"
        assert np.allclose(est, james_stein(values, 0.3), rtol=1e-12, atol=0.0)


def test_scale_equivariance_power_of_two_is_bitwise():
    rng = np.random.default_rng(5)
    seq = make_dyadic(rng, 8, 0.25, scale=1.5)
    base, _ = estimate_sequence(seq, TuningConfig())
    doubled = dyadic_sequence(0.5, {j: 2.0 * v for j, v in seq.blocks})
    scaled, _ = estimate_sequence(doubled, TuningConfig())
    for a, b in zip(base, scaled):
        assert np.array_equal(2.0 * a, b)


def test_scale_equivariance_generic_factor():
    rng = np.random.default_rng(6)
    seq = make_dyadic(rng, 8, 0.25, scale=1.5)
    base, _ = estimate_sequence(seq, TuningConfig())
    c = 3.7
    scaled_seq = dyadic_sequence(c * 0.25, {j: c * v for j, v in seq.blocks})
    scaled, _ = estimate_sequence(scaled_seq, TuningConfig())
    for a, b in zip(base, scaled):
        denom = np.maximum(np.abs(c * a), 1e-300)
        assert float(np.max(np.abs(c * a - b) / denom)) < 1e-12


def test_shape_preserved():
    rng = np.random.default_rng(7)
    seq = make_dyadic(rng, 7, 0.4)
    estimates, fits = estimate_sequence(seq, TuningConfig())
    assert len(estimates) == len(seq.blocks) == len(fits)
    for (j, values), est in zip(seq.blocks, estimates):
        assert est.shape == values.shape


def test_within_block_permutation_acts_coordinatewise():
    rng = np.random.default_rng(8)
    seq = make_dyadic(rng, 7, 0.4, scale=2.0)
    estimates, _ = estimate_sequence(seq, TuningConfig())
    blocks = dict(seq.blocks)
    perm = rng.permutation(128)
    blocks[7] = blocks[7][perm]
    permuted, _ = estimate_sequence(dyadic_sequence(0.4, blocks), TuningConfig())
    assert np.array_equal(permuted[-1], estimates[-1][perm])
    for a, b in zip(estimates[:-1], permuted[:-1]):
        assert np.array_equal(a, b)


def test_fit_determinism_repeated_runs():
    rng = np.random.default_rng(9)
    seq = make_dyadic(rng, 8, 0.3)
    a, _ = estimate_sequence(seq, TuningConfig())
    b, _ = estimate_sequence(seq, TuningConfig())
    for x, y in zip(a, b):
        assert np.array_equal(x, y)


# ---------------------------------------------------------------- ideal risk


def test_ideal_risk_zero_truth():
    blocks = {j: np.zeros(2 ** max(j, 0)) for j in range(-1, 6)}
    seq = dyadic_sequence(0.2, blocks, truth=blocks)
    assert ideal_risk(seq) == 0.0


def test_ideal_risk_constant_block_is_zero():
    vals = {-1: np.array([4.0]), 0: np.array([4.0]), 1: np.array([4.0, 4.0])}
    seq = dyadic_sequence(1.0, vals, truth=vals)
    assert ideal_risk(seq) == 0.0


def test_ideal_risk_two_point_block():
    truth = {-1: np.array([0.0]), 0: np.array([0.0]), 1: np.array([-3.0, 3.0])}
    seq = dyadic_sequence(1.0, truth, truth=truth)
    expected = 2.0 * bayes_risk(from_atoms([-3.0, 3.0], [0.5, 0.5]))
    assert ideal_risk(seq) == pytest.approx(expected, rel=1e-9)


def test_ideal_risk_scales_with_epsilon_squared_and_adds():
    truth = {-1: np.array([1.0]), 0: np.array([-2.0]), 1: np.array([0.5, 3.0])}
    r1 = ideal_risk(dyadic_sequence(1.0, truth, truth=truth))
    half = {j: 0.5 * v for j, v in truth.items()}
    r2 = ideal_risk(dyadic_sequence(0.5, half, truth=half))
    # same standardized atoms, quarter the scale
    assert r2 == pytest.approx(0.25 * r1, rel=1e-9)


def test_ideal_risk_requires_truth():
    seq = dyadic_sequence(0.1, {-1: np.zeros(1)})
    with pytest.raises(ValueError):
        ideal_risk(seq)


# ---------------------------------------------------------------- schedules


def test_dyadic_preset_recognized():
    rep = check_blocks([1, 1, 2, 4, 8, 16])
    assert rep.preset == "dyadic"
    assert rep.warnings == ()
    assert rep.nondecreasing


def test_geometric_partial_sum_matches_hand_computation():
    sizes = [2**j for j in range(0, 11)]
    rep = check_blocks(sizes)
    hand = sum((1.0 + j * math.log(2.0)) ** -1.5 for j in range(0, 11))
    assert rep.tail_weight_sum == pytest.approx(hand, rel=1e-12)
    assert rep.preset == "geometric"


def test_constant_sizes_warn_but_do_not_fail():
    rep = check_blocks([7, 7, 7])
    assert rep.preset is None
    assert len(rep.warnings) >= 1


def test_check_blocks_rejects_nonpositive():
    with pytest.raises(ValueError):
        check_blocks([4, 0, 2])
