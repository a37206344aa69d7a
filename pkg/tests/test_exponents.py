import math
from fractions import Fraction as F

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from maxreg.exponents import (
    Cap,
    ExponentQuery,
    as_fraction,
    bootstrap_ladder,
    mr_admissible,
)

INF = math.inf


def test_as_fraction_accepts_exact_inputs():
    assert as_fraction("3/5") == F(3, 5)
    assert as_fraction(2) == F(2)
    assert as_fraction(F(7, 3)) == F(7, 3)


def test_as_fraction_rejects_floats_and_garbage():
    with pytest.raises(TypeError):
        as_fraction(0.6)
    with pytest.raises(ValueError):
        as_fraction("three fifths")
    with pytest.raises(TypeError):
        as_fraction(True)


def test_query_range_validation():
    with pytest.raises(ValueError):
        ExponentQuery(F(0), F(2), F(1, 2))
    with pytest.raises(ValueError):
        ExponentQuery(F(1, 2), F(1), F(1, 2))
    with pytest.raises(ValueError):
        ExponentQuery(F(1, 2), F(2), F(1))


# -- admissibility cases --------------------------------------------------------------


def test_large_p_case():
    result = mr_admissible(ExponentQuery(F(1, 2), F(2), F(3, 5)))
    assert result.admissible
    assert result.rule == "p-at-or-above-pivot"
    assert result.required_q == F(2)


def test_small_p_case():
    result = mr_admissible(ExponentQuery(F(1, 2), F(3, 2), F(3, 5)))
    assert result.admissible
    assert result.rule == "p-below-pivot"
    assert result.required_q == F(2)


def test_critical_alpha_excluded_exactly():
    result = mr_admissible(ExponentQuery(F(1, 2), F(2), F(1, 2)))
    assert not result.admissible
    assert any("strict" in note for note in result.notes)
    barely = mr_admissible(ExponentQuery(F(1, 2), F(2), F(1, 2) + F(1, 10**12)))
    assert barely.admissible


def test_pivot_p_belongs_to_upper_case():
    result = mr_admissible(ExponentQuery(F(1, 2), F(2), F(2, 3)))
    assert result.rule == "p-at-or-above-pivot"
    assert result.required_q == F(2)


def test_mismatched_q_is_rejected():
    result = mr_admissible(ExponentQuery(F(1, 2), F(3, 2), F(3, 5), q=F(3)))
    assert not result.admissible
    assert any("requires q" in note for note in result.notes)


def test_theta_one_endpoint_flagged():
    result = mr_admissible(ExponentQuery(F(1), F(5), F(1, 3)))
    assert result.admissible
    assert result.required_q == INF
    assert result.rule == "constant-domain-endpoint"
    assert any("endpoint" in note for note in result.notes)


def test_half_scale_split_on_rational_grid():
    # theta = 1/2: p in (1, 2] requires q = 2, p in [2, inf) requires q = p
    theta = F(1, 2)
    for k in range(1, 101):
        p = 1 + F(k, 25)  # 1.04 .. 5
        result = mr_admissible(ExponentQuery(theta, p, F(3, 4)))
        if p < 2:
            assert result.required_q == F(2)
        else:
            assert result.required_q == p
        assert result.admissible


@settings(max_examples=200, deadline=None)
@given(
    theta=st.fractions(min_value=F(1, 100), max_value=F(1, 1)),
    p=st.fractions(min_value=F(101, 100), max_value=F(20, 1)),
    alpha=st.fractions(min_value=F(1, 100), max_value=F(99, 100)),
    bump=st.fractions(min_value=F(0), max_value=F(1, 2)),
)
def test_admissibility_monotone_in_alpha(theta, p, alpha, bump):
    better = alpha + bump
    if not better < 1:
        better = alpha
    base = mr_admissible(ExponentQuery(theta, p, alpha))
    improved = mr_admissible(ExponentQuery(theta, p, better))
    if base.admissible:
        assert improved.admissible


# -- the bootstrap ladder ---------------------------------------------------------------


def test_ladder_above_pivot_terminates_immediately():
    plan = bootstrap_ladder("1/2", 4, "3/5")
    assert plan.required_q == INF
    assert len(plan.ladder) == 1
    assert plan.rule == "p-above-pivot"


def test_ladder_below_pivot_caps_at_forcing_bound():
    plan = bootstrap_ladder("1/2", "3/2", "3/5")
    assert plan.required_q == F(6)  # (3/2) / (1 - (3/2)(1/2))
    rung = plan.ladder[0]
    assert rung.history_cap.value == F(15)  # (3/2) / (1 - (3/2)(3/5))
    assert rung.forcing_cap.value == F(6)
    assert rung.binding == "forcing"


def test_ladder_climbs_by_alpha_increments():
    plan = bootstrap_ladder("1/2", "3/2", "1/10")
    starts = [r.start for r in plan.ladder]
    # each rung lowers 1/p by exactly alpha until the forcing ceiling binds
    for a, b in zip(starts, starts[1:]):
        assert F(1, 1) / a - F(1, 1) / b == F(1, 10)
    assert plan.required_q == F(6)
    assert plan.ladder[-1].result.value == F(6)


def test_ladder_at_pivot_gives_open_endpoint():
    plan = bootstrap_ladder("1/2", 2, "3/5")
    assert plan.required_q == INF
    assert any("supremum not attained" in n for n in plan.notes)


def test_ladder_theta_one_flagged():
    plan = bootstrap_ladder(1, 3, "1/2")
    assert plan.required_q == INF
    assert any("marginal" in n for n in plan.notes)


def test_ladder_soundness_against_independent_predicate():
    # re-check every emitted rung with a direct transcription of the
    # integrability improvement cases
    def history_bound(p, alpha):
        # L^p -> L^q for q <= p/(1 - p alpha) when p < 1/alpha, else unbounded
        if p * alpha < 1:
            return p / (1 - p * alpha)
        return INF

    def forcing_bound(p, theta):
        if p * (1 - theta) < 1:
            return p / (1 - p * (1 - theta))
        return INF

    cases = [
        (F(1, 2), F(3, 2), F(1, 10)),
        (F(1, 2), F(3, 2), F(3, 5)),
        (F(1, 3), F(5, 4), F(1, 5)),
        (F(3, 4), F(9, 8), F(1, 4)),
        (F(1, 4), F(7, 5), F(2, 5)),
    ]
    for theta, p0, alpha in cases:
        plan = bootstrap_ladder(theta, p0, alpha)
        for rung in plan.ladder:
            p = rung.start
            assert rung.history_cap.value == history_bound(p, alpha)
            assert rung.forcing_cap.value == forcing_bound(p0, theta)
            expected = min(rung.history_cap.value, rung.forcing_cap.value)
            assert rung.result.value == expected
        final = plan.required_q
        # the final exponent never exceeds the forcing bound of the data
        assert final <= forcing_bound(p0, theta)


def test_cap_minimum_prefers_open_endpoint_on_tie():
    closed = Cap(INF, attainable=True)
    open_ = Cap(INF, attainable=False)
    assert Cap.minimum(closed, open_) == open_
    assert Cap.minimum(Cap(F(3)), Cap(F(4))) == Cap(F(3))


def test_plan_serialization():
    plan = bootstrap_ladder("1/2", "3/2", "3/5")
    data = plan.to_dict()
    assert data["required_q"] == "6"
    assert data["ladder"][0]["forcing_cap"] == "6"
    assert data["alpha_threshold"] == "1/2"
