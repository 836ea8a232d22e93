"""Smoke tests for the python bindings: every exposed surface gets one touch."""

import math

import pytest

import becsim_py as bc


def test_protocol_listing():
    names = bc.protocols()
    assert "nn-semiblind" in names and "case-c" in names
    assert len(names) == 6


def test_region_vertices_match_closed_form():
    p = bc.ChannelParams(0.5, 0.5, eps1=0.5, eps2=0.5)
    region = bc.region_dd_outer(p)
    assert region.label == "dd-outer"
    assert len(region.halfplanes) == 4
    assert any(
        math.isclose(r1, 0.375) and math.isclose(r2, 0.375) for r1, r2 in region.vertices()
    )
    assert region.contains(0.2, 0.2)
    assert not region.contains(0.5, 0.5)
    v = region.max_sum_rate_vertex()
    assert math.isclose(v.r1 + v.r2, 0.75)
    assert region.csv().startswith("dd-outer,")


def test_corners_and_message_sizes():
    p = bc.ChannelParams(1 / 3, 0.5, eps1=2 / 3, eps2=1 / 6)
    corner = bc.default_corner("nn-semiblind", p)
    assert math.isclose(corner.r1, 4 / 11)
    assert math.isclose(corner.r2, 5 / 11)
    assert bc.message_sizes("nn-semiblind", 20000, corner) == (16000, 20000)

    b = bc.corner_case_b(bc.ChannelParams(0.5, 0.5, eps1=0.0, eps2=0.5))
    assert math.isclose(b.r1, 0.5) and math.isclose(b.r2, 1 / 3)

    with pytest.raises(ValueError):
        bc.default_corner("nn-oracle", p)


def test_run_trials_is_deterministic_and_near_corner():
    p = bc.ChannelParams(0.5, 0.5, eps1=0.0, eps2=0.5)
    first = bc.run_trials("case-b", p, m=3000, trials=6, seed=7)
    again = bc.run_trials("case-b", p, m=3000, trials=6, seed=7)
    assert first.to_json() == again.to_json()
    assert first.m1 == 3000 and first.m2 == 2000
    assert first.trials == 6

    report = bc.compare_to_corner(first, first.corner, rel_tol=0.08)
    assert report.passed
    assert report.rates_ok and report.failures_ok

    # ARQ bookkeeping comes through the optional fields.
    assert first.mean_rx2_receptions == pytest.approx(1.0, rel=0.1)
    assert first.mean_excess_receptions == pytest.approx(1 / 3, rel=0.2)
    assert len(first.phase_ids) == len(first.mean_phase_lengths)


def test_outer_region_contains_simulated_rates():
    p = bc.ChannelParams(0.5, 0.5, eps1=0.5, eps2=0.5)
    stats = bc.run_trials("dd-blind-symmetric", p, m=1000, trials=4, seed=3)
    outer = bc.outer_region("dd-blind-symmetric", p)
    r = stats.mean_rate
    assert outer.contains(r.r1, r.r2, tol=0.01)


def test_regime_violations_raise():
    asym = bc.ChannelParams(0.5, 0.4, eps1=0.5, eps2=0.5)
    with pytest.raises(ValueError):
        bc.run_trials("dd-blind-symmetric", asym, m=500, trials=1)
    with pytest.raises(ValueError):
        bc.ChannelParams(1.5, 0.5, eps1=0.0, eps2=0.0)
    with pytest.raises(ValueError):
        bc.region_nn_blind_inner(bc.ChannelParams(0.5, 0.25, eps1=0.0, eps2=0.5))
