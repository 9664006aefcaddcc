"""Tests for the corruption pipeline: region masses and sampled bias."""

import numpy as np
import pytest

from biased_erm_lab import (
    BiasParams,
    GROUP_A,
    GROUP_B,
    InsufficientData,
    RangeError,
    TrueModel,
    apply_bias,
    estimate_beta,
    estimate_nu,
    region_masses,
    sample_true,
)

# A worked example: r = 1/3, p = 1/2, eta = 1/3, beta_pos = 1/3 with full
# negative retention and no label flips.  The eight masses are simple
# fractions of 54ths.
_EXAMPLE_MODEL = TrueModel(r=1 / 3, p=0.5, eta=1 / 3)
_EXAMPLE_BIAS = BiasParams(beta_pos=1 / 3, beta_neg=1.0, nu=0.0)
_EXAMPLE_MASSES = (2 / 9, 1 / 9, 1 / 9, 2 / 9, 1 / 27, 1 / 18, 1 / 54, 1 / 9)


def test_region_masses_worked_example():
    m = region_masses(_EXAMPLE_MODEL, _EXAMPLE_BIAS)
    got = (m.r1, m.r2, m.r3, m.r4, m.r5, m.r6, m.r7, m.r8)
    for i, (g, want) in enumerate(zip(got, _EXAMPLE_MASSES), start=1):
        assert abs(g - want) < 1e-15, f"r{i}: {g} != {want}"
    assert abs(m.group_a_total() - 2 / 3) < 1e-15
    assert abs(m.group_b_total() - 2 / 9) < 1e-15
    assert abs(m.total() - (2 / 3 + 2 / 9)) < 1e-15


def test_region_masses_reduce_to_clean_shares_without_bias():
    rng = np.random.default_rng(3)
    none = BiasParams.none()
    for _ in range(100):
        model = TrueModel(
            r=rng.uniform(0.05, 0.95),
            p=rng.uniform(0.05, 0.95),
            eta=rng.uniform(0.0, 0.49),
        )
        m = region_masses(model, none)
        scale = model.r / (1 - model.r)
        assert abs(m.r5 - scale * m.r1) < 1e-12
        assert abs(m.r6 - scale * m.r2) < 1e-12
        assert abs(m.r7 - scale * m.r3) < 1e-12
        assert abs(m.r8 - scale * m.r4) < 1e-12
        assert abs(m.total() - 1.0) < 1e-12


def test_group_a_masses_ignore_bias():
    model = TrueModel(r=0.4, p=0.3, eta=0.2)
    m0 = region_masses(model, BiasParams.none())
    m1 = region_masses(model, BiasParams(beta_pos=0.1, beta_neg=0.5, nu=0.8))
    assert (m0.r1, m0.r2, m0.r3, m0.r4) == (m1.r1, m1.r2, m1.r3, m1.r4)


def test_bias_params_validation():
    with pytest.raises(RangeError, match="beta_pos"):
        BiasParams(beta_pos=0.0, beta_neg=1.0, nu=0.0)
    with pytest.raises(RangeError, match="beta_neg"):
        BiasParams(beta_pos=1.0, beta_neg=1.5, nu=0.0)
    with pytest.raises(RangeError, match="nu"):
        BiasParams(beta_pos=1.0, beta_neg=1.0, nu=1.0)


def test_apply_bias_region_frequencies_match_masses():
    """Empirical region shares of the corrupted sample sit within binomial
    noise of the closed-form masses.  Region membership is decided by the
    feature side and the apparent label."""
    n = 400_000
    model = TrueModel(r=1 / 3, p=0.5, eta=0.25)
    bias = BiasParams(beta_pos=0.4, beta_neg=0.7, nu=0.3)
    data = sample_true(model, n, seed=23)
    out = apply_bias(data, bias, seed=24)
    m = region_masses(model, bias)

    pos_side = np.where(out.group == GROUP_A, out.x >= model.theta_a, out.x >= model.theta_b)
    counts = {
        "r1": ((out.group == GROUP_A) & pos_side & (out.label == 1)).sum(),
        "r2": ((out.group == GROUP_A) & pos_side & (out.label == 0)).sum(),
        "r3": ((out.group == GROUP_A) & ~pos_side & (out.label == 1)).sum(),
        "r4": ((out.group == GROUP_A) & ~pos_side & (out.label == 0)).sum(),
        "r5": ((out.group == GROUP_B) & pos_side & (out.label == 1)).sum(),
        "r6": ((out.group == GROUP_B) & pos_side & (out.label == 0)).sum(),
        "r7": ((out.group == GROUP_B) & ~pos_side & (out.label == 1)).sum(),
        "r8": ((out.group == GROUP_B) & ~pos_side & (out.label == 0)).sum(),
    }
    for name, count in counts.items():
        mass = getattr(m, name)
        sigma = np.sqrt(n * mass * (1 - mass))
        assert abs(count - n * mass) < 4 * sigma + 1, (
            f"{name}: count {count} vs expected {n * mass:.1f}"
        )


def test_apply_bias_keeps_group_a_untouched():
    model = TrueModel(r=0.5, p=0.5, eta=0.2)
    data = sample_true(model, 50_000, seed=5)
    out = apply_bias(data, BiasParams(beta_pos=0.2, beta_neg=0.5, nu=0.6), seed=6)
    a_in = data.group == GROUP_A
    a_out = out.group == GROUP_A
    assert a_in.sum() == a_out.sum()
    assert np.array_equal(data.x[a_in], out.x[a_out])
    assert np.array_equal(data.label[a_in], out.label[a_out])


def test_apply_bias_knife_edge_counts():
    """Noiseless quarter-positive model with nu = 1/2, beta_neg = 1/3: half
    of group B survives and exactly an r/8 share carries an apparent
    positive label."""
    n = 800_000
    model = TrueModel(r=1 / 3, p=0.25, eta=0.0)
    bias = BiasParams(beta_pos=1.0, beta_neg=1 / 3, nu=0.5)
    data = sample_true(model, n, seed=31)
    out = apply_bias(data, bias, seed=32)

    b_mask = out.group == GROUP_B
    b_count = int(b_mask.sum())
    want_b = n * model.r / 2
    assert abs(b_count - want_b) < 4 * np.sqrt(want_b) + 1

    b_pos = int((b_mask & (out.label == 1)).sum())
    want_pos = n * model.r / 8
    assert abs(b_pos - want_pos) < 4 * np.sqrt(want_pos) + 1


def test_apply_bias_is_deterministic_per_seed():
    model = TrueModel(r=0.4, p=0.5, eta=0.2)
    data = sample_true(model, 20_000, seed=1)
    bias = BiasParams(beta_pos=0.5, beta_neg=0.8, nu=0.25)
    o1 = apply_bias(data, bias, seed=9)
    o2 = apply_bias(data, bias, seed=9)
    o3 = apply_bias(data, bias, seed=10)
    assert np.array_equal(o1.x, o2.x) and np.array_equal(o1.label, o2.label)
    assert not (np.array_equal(o1.x, o3.x) and np.array_equal(o1.label, o3.label))


def test_apply_bias_draws_are_index_aligned():
    """Changing beta_neg must not disturb which positives survive or flip:
    per-row draws are aligned to the clean sample's row order, so the
    apparent-positive rows of group B are identical across the two runs."""
    model = TrueModel(r=0.5, p=0.5, eta=0.2)
    data = sample_true(model, 100_000, seed=13)
    bias_full = BiasParams(beta_pos=0.6, beta_neg=1.0, nu=0.3)
    bias_half = BiasParams(beta_pos=0.6, beta_neg=0.5, nu=0.3)
    out_full = apply_bias(data, bias_full, seed=14)
    out_half = apply_bias(data, bias_half, seed=14)

    pos_full = np.sort(out_full.x[(out_full.group == GROUP_B) & (out_full.label == 1)])
    pos_half = np.sort(out_half.x[(out_half.group == GROUP_B) & (out_half.label == 1)])
    assert np.array_equal(pos_full, pos_half)


def test_estimators_recover_planted_parameters():
    n = 1_000_000
    model = TrueModel(r=1 / 3, p=0.5, eta=0.2)

    ur = BiasParams.underrepresentation(0.35)
    data_ur = apply_bias(sample_true(model, n, seed=41), ur, seed=42)
    assert abs(estimate_beta(data_ur) - 0.35) < 0.01

    lb = BiasParams.labeling(0.45)
    data_lb = apply_bias(sample_true(model, n, seed=43), lb, seed=44)
    assert abs(estimate_nu(data_lb) - 0.45) < 0.01


def test_estimate_beta_without_bias_is_near_one():
    model = TrueModel(r=0.5, p=0.4, eta=0.1)
    data = apply_bias(sample_true(model, 500_000, seed=51), BiasParams.none(), seed=52)
    assert abs(estimate_beta(data) - 1.0) < 0.02


def test_estimators_raise_on_missing_groups():
    model = TrueModel(r=0.5, p=0.5, eta=0.1)
    data = sample_true(model, 1000, seed=61)
    a_only = type(data)(
        x=data.x[data.group == GROUP_A],
        group=data.group[data.group == GROUP_A],
        label=data.label[data.group == GROUP_A],
        weight=data.weight[data.group == GROUP_A],
        seed=-1,
    )
    with pytest.raises(InsufficientData):
        estimate_beta(a_only)
    with pytest.raises(InsufficientData):
        estimate_nu(a_only)
