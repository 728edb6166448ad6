import numpy as np
import pytest

from kinwave.core import Boundary, ClassId, ClusterField, InvariantViolation, ScenarioConfig, Segment, TrafficLight
from kinwave.ftl import (
    CAR_LANE,
    FTLRun,
    SubLaneLayout,
    Vehicles,
    fig9_scenario,
    ftl_step,
    initial_vehicles,
    leader_gaps,
    local_state,
    place_vehicles,
    trajectory_crossings,
)
from kinwave.lag1 import godunov_step_m1


def make(positions, cls, lanes, t=0.0):
    n = len(positions)
    return Vehicles(np.arange(n), np.array(cls), np.array(lanes), np.array(positions, dtype=float), t)


def test_place_vehicles_half_offsets():
    x = place_vehicles((Segment(0.0, 20.0, 0.2, 0.0),), ClassId.PTW)
    np.testing.assert_allclose(x, [17.5, 12.5, 7.5, 2.5])
    assert len(place_vehicles((Segment(0.0, 20.0, 0.2, 0.0),), ClassId.CAR)) == 0


def test_round_robin_sublanes():
    np.testing.assert_array_equal(SubLaneLayout(2).assign(5), [0, 1, 0, 1, 0])


def test_initial_vehicles_for_signal_scenario():
    veh = initial_vehicles(fig9_scenario())
    assert np.sum(veh.cls == 1) == 60 and np.sum(veh.cls == 2) == 15
    assert set(np.unique(veh.sublane)) == {CAR_LANE, 0, 1}


def brute_local_state(veh, light=None):
    """Direct per-vehicle loop over every other vehicle."""
    n = len(veh)
    s_ptw, s_car = np.full(n, np.inf), np.full(n, np.inf)
    for i in range(n):
        x = veh.position[i]
        ahead = [j for j in range(n) if j != i and veh.sublane[j] == veh.sublane[i] and veh.position[j] > x]
        g = min((veh.position[j] - x for j in ahead), default=np.inf)
        if light is not None and light.is_red(veh.t) and x < light.position:
            g = min(g, light.position - x)
        if not np.isfinite(g):
            continue
        inside = [j for j in range(n) if j != i and x <= veh.position[j] < x + g]
        n_car = sum(veh.cls[j] == 2 for j in inside)
        n_ptw = sum(veh.cls[j] == 1 for j in inside)
        if veh.cls[i] == 1:
            s_ptw[i] = g / (1 + n_ptw)
            s_car[i] = g / n_car if n_car else np.inf
        else:
            s_car[i] = g
            s_ptw[i] = g / n_ptw if n_ptw else np.inf
    return s_ptw, s_car


def test_local_state_matches_brute_force(rng):
    for _ in range(30):
        n = int(rng.integers(2, 30))
        cls = rng.integers(1, 3, n)
        lanes = np.where(cls == 1, rng.integers(0, 3, n), CAR_LANE)
        pos = rng.permutation(np.linspace(0, 300, n) + rng.uniform(0, 5, n))
        veh = make(pos, cls, lanes, t=float(rng.uniform(0, 60)))
        light = TrafficLight(float(rng.uniform(100, 400)), 30.0) if rng.random() < 0.5 else None
        got = local_state(veh, light)
        want = brute_local_state(veh, light)
        for a, b in zip(got, want):
            np.testing.assert_allclose(a, b, rtol=1e-12)


def test_red_light_is_a_stopped_leader():
    veh = make([390.0, 410.0], [2, 2], [CAR_LANE, CAR_LANE], t=10.0)
    gaps = leader_gaps(veh, TrafficLight(400.0, 40.0))
    assert gaps[1] == np.inf and gaps[0] == pytest.approx(10.0)
    assert leader_gaps(veh, TrafficLight(400.0, 5.0))[0] == pytest.approx(20.0)


def test_overtaking_within_group_is_refused(law):
    ftl_step(make([100.0, 50.0], [2, 2], [CAR_LANE, CAR_LANE]), 0.05, law)
    # two PTWs on the same spot in one sub-lane have no defined order
    bad = make([100.0, 100.0], [1, 1], [0, 0])
    with pytest.raises((InvariantViolation, ValueError)):
        ftl_step(bad, 0.05, law)


def test_single_lane_ptw_matches_method_one(law):
    # dn = 1 clusters: vehicle k sits on edge k, edge 0 is the free leader
    spacing = np.linspace(3.0, 8.0, 25)
    edges = 500.0 - np.concatenate([[0.0], np.cumsum(spacing)])
    ptw = ClusterField(ClassId.PTW, 1.0, edges, spacing)
    cars = ClusterField.uniform(ClassId.CAR, 1e7, 10.0, 1, 1.0)
    veh = make(edges, [1] * len(edges), [0] * len(edges))
    dt = 0.05
    for _ in range(400):
        ptw, cars = godunov_step_m1(ptw, cars, dt, law, Boundary.FREE_DOWNSTREAM)
        veh = ftl_step(veh, dt, law)
    np.testing.assert_allclose(veh.position, ptw.edges, rtol=0, atol=1e-9)


def test_crossings_count():
    a = make([0.0, 1.0], [1, 1], [0, 1])
    b = make([2.0, 1.5], [1, 1], [0, 1])
    snaps = [(a, None), (b, None)]
    assert trajectory_crossings(snaps, np.array([True, True])) == 1
    assert trajectory_crossings(snaps, np.array([True, False]), np.array([False, True])) == 1


def test_signal_run_is_deterministic():
    cfg = fig9_scenario()
    a, _ = FTLRun.start(cfg).run_to(10.0)
    b, _ = FTLRun.start(cfg).run_to(10.0)
    np.testing.assert_array_equal(a.vehicles.position, b.vehicles.position)
