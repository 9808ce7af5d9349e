from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from proxsampler.errors import UndefinedBoundError, ValidationError
from proxsampler.rates import (LOI_CONSTANT_PROOF, RateBound, bound_lc, bound_loi, bound_pi,
                               bound_slc, loi_threshold, pi_renyi_threshold,
                               rejection_trials_bound, suggest_step_size)


def test_slc_example():
    assert bound_slc(2.0, 1.0, 1.0, 3) == pytest.approx(0.25, abs=1e-15)


def test_lc_needs_k_or_entropy():
    with pytest.raises(UndefinedBoundError):
        bound_lc(1.0, None, 0.1, 0)
    assert bound_lc(2.0, None, 0.5, 4) == 2.0
    assert bound_lc(2.0, 3.0, 0.5, 0) == 3.0
    # refined form is never worse than the plain one
    assert bound_lc(2.0, 3.0, 0.5, 4) <= bound_lc(2.0, None, 0.5, 4)


def test_pi_renyi_curve_example():
    b = RateBound("PI_RENYI", {"D_0": 3.0, "alpha": 1.0, "eta": 1.0, "q": 2.0})
    assert b(1) == pytest.approx(3 - math.log(2), abs=1e-15)
    assert b(1) == pytest.approx(2.3068528194400546, abs=1e-15)
    assert b(5) == pytest.approx(0.25, abs=1e-15)


def test_pi_renyi_requires_order_two():
    with pytest.raises(ValidationError):
        RateBound("PI_RENYI", {"D_0": 1.0, "alpha": 1.0, "eta": 1.0, "q": 1.5})
    with pytest.raises(ValidationError):
        bound_loi(1.0, 1.0, 1.0, 1.5, 1.5, 0)


def test_step_rules():
    assert suggest_step_size("lipschitz_M", 1.0, 1) == 1 / 16
    assert suggest_step_size("smooth_beta", 4.0, 2) == 1 / 16
    with pytest.raises(ValidationError):
        suggest_step_size("other", 1.0, 1)
    assert rejection_trials_bound(1.0, 0.5, 2) == pytest.approx(3.0)
    with pytest.raises(ValidationError):
        rejection_trials_bound(2.0, 0.5, 2)


def test_unknown_theorem_and_missing_params():
    with pytest.raises(ValidationError):
        RateBound("XYZ", {})
    with pytest.raises(ValidationError):
        RateBound("SLC", {"alpha": 1.0})


def test_curve_and_metric():
    b = RateBound("LSI_KL", {"D_0": 1.0, "alpha": 1.0, "eta": 1.0})
    assert b.metric == "KL"
    assert b.curve(2) == [(0, 1.0), (1, 0.25), (2, 0.0625)]


def test_negative_k_rejected():
    with pytest.raises(ValidationError):
        bound_slc(1.0, 1.0, 1.0, -1)


def draw_params(rng):
    return dict(D_0=float(rng.uniform(1.0, 20)), W2_0=float(rng.uniform(0.1, 5)),
                H_0=float(rng.uniform(0.1, 5)), alpha=float(rng.uniform(0.01, 3)),
                eta=float(rng.uniform(0.01, 3)), q=float(rng.uniform(2, 8)),
                r=float(rng.uniform(1, 1.95)))


def all_bounds(p):
    return [RateBound(t, p) for t in ("SLC", "LC", "LSI_KL", "LSI_RENYI", "PI_CHI2",
                                      "PI_RENYI", "LOI", "EPS_GENERALIZED", "PROX_PL")]


def test_monotone_over_random_draws():
    rng = np.random.default_rng(0)
    for _ in range(100):
        p = draw_params(rng)
        for b in all_bounds(p):
            vals = [b(k) for k in range(0, 400)]
            assert np.all(np.diff(vals) <= 1e-12 * max(1.0, vals[0])), b.theorem


def test_pi_renyi_continuity_at_threshold():
    rng = np.random.default_rng(1)
    for _ in range(100):
        p = draw_params(rng)
        T = pi_renyi_threshold(p["D_0"], p["alpha"], p["eta"], p["q"])
        L = math.log1p(p["alpha"] * p["eta"])
        # linear branch meets exp branch at the junction: both equal at most ~1 at T
        left = p["D_0"] - 2 * T * L / p["q"]
        assert left == pytest.approx(1.0, abs=1e-12)
        k0 = math.ceil(T)
        step = 2 * L / p["q"]
        # jump across the junction is bounded by one step of the linear decay
        before = bound_pi("RENYI", p["D_0"], p["alpha"], p["eta"], p["q"], math.floor(T))
        after = bound_pi("RENYI", p["D_0"], p["alpha"], p["eta"], p["q"], k0 if k0 > T else k0 + 1)
        assert after <= before + 1e-12
        assert before - after <= 2 * step + 1e-12


@pytest.mark.parametrize("c", [68.0, LOI_CONSTANT_PROOF])
def test_loi_continuity_at_threshold(c):
    rng = np.random.default_rng(2)
    for _ in range(100):
        p = draw_params(rng)
        c0 = loi_threshold(p["D_0"], p["alpha"], p["eta"], p["q"], p["r"], c)
        s = 2 / p["r"] - 1
        base = p["D_0"] ** s - s * c0 * math.log1p(p["alpha"] * p["eta"]) / (c * p["q"])
        assert base == pytest.approx(1.0, abs=1e-9)
        k = math.floor(c0)
        assert bound_loi(p["D_0"], p["alpha"], p["eta"], p["q"], p["r"], k + 1, c) <= \
            bound_loi(p["D_0"], p["alpha"], p["eta"], p["q"], p["r"], k, c) + 1e-12


@settings(max_examples=200, deadline=None)
@given(st.floats(0.01, 50), st.floats(0.001, 5), st.floats(0.001, 5), st.integers(0, 500))
def test_exponential_bounds_agree(D, a, eta, k):
    lsi = RateBound("LSI_KL", {"D_0": D, "alpha": a, "eta": eta})(k)
    eps = RateBound("EPS_GENERALIZED", {"D_0": D, "alpha": a, "eta": eta})(k)
    chi = RateBound("PI_CHI2", {"D_0": D, "alpha": a, "eta": eta})(k)
    assert lsi == eps == chi
    assert lsi <= D


@settings(max_examples=200, deadline=None)
@given(st.floats(1.0, 30), st.floats(0.01, 3), st.floats(0.01, 3), st.floats(2, 10),
       st.integers(0, 300))
def test_pi_renyi_nonincreasing(D, a, eta, q, k):
    b = RateBound("PI_RENYI", {"D_0": D, "alpha": a, "eta": eta, "q": q})
    assert b(k + 1) <= b(k) + 1e-12
