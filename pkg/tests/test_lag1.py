import numpy as np
import pytest

from conftest import half_length_green
from kinwave.core import (
    Boundary,
    CFLViolation,
    ClassId,
    ClusterField,
    InvariantViolation,
    ScenarioConfig,
    Segment,
    cluster_density_profile,
)
from kinwave.lag1 import (
    Lag1Run,
    cluster_cross_spacing,
    cross_class_spacing,
    direct_difference_update,
    ghost_speed,
    godunov_fluxes,
    godunov_step_m1,
    godunov_update,
    vehicles_between,
)
from kinwave.speedlaw import max_wave_speed


def far_away_cars():
    return ClusterField.uniform(ClassId.CAR, head=1e7, spacing=10.0, n_clusters=1, dn=1.0)


def test_two_cluster_hand_step():
    law = half_length_green()
    # head cluster spacing 5 m, follower 2.5 m, dn = 1, no cars nearby
    ptw = ClusterField(ClassId.PTW, 1.0, np.array([100.0, 95.0, 92.5]), np.array([5.0, 2.5]))
    # v = 20 (1 - 0.5 / s): 18 and 16 m/s; the zero-gradient ghost copies 18
    p, _ = godunov_step_m1(ptw, far_away_cars(), 0.02, law)
    np.testing.assert_allclose(p.spacing, [5.0, 2.5 + 0.02 * 2.0])
    np.testing.assert_allclose(p.edges, [100.36, 95.36, 92.82])


def test_free_downstream_ghost():
    v = np.array([3.0, 4.0])
    assert ghost_speed(v, 20.0, Boundary.FREE_DOWNSTREAM) == 20.0
    assert ghost_speed(v, 20.0, Boundary.ZERO_GRADIENT) == 3.0
    assert ghost_speed(v, 20.0, Boundary.PERIODIC) == 4.0


def test_godunov_matches_direct_difference(rng):
    for _ in range(20):
        s = rng.uniform(1, 10, 30)
        v = rng.uniform(0, 20, 30)
        g = float(rng.uniform(0, 20))
        a = godunov_update(s, godunov_fluxes(v, g), 0.1, 7.5)
        b = direct_difference_update(s, v, g, 0.1, 7.5)
        np.testing.assert_array_equal(a, b)


def brute_force_count(other, lo, hi):
    total = 0.0
    for k in range(len(other)):
        a, b = other.edges[k + 1], other.edges[k]
        total += max(0.0, min(b, hi) - max(a, lo)) / other.spacing[k]
    return total


def random_field(rng, cls, x_head):
    n = int(rng.integers(1, 25))
    dn = float(rng.choice([1.0, 2.5, 7.5]))
    spacing = rng.uniform(0.3, 30.0, n)
    edges = x_head - np.concatenate([[0.0], np.cumsum(dn * spacing)])
    return ClusterField(cls, dn, edges, spacing)


def test_cross_spacing_matches_piecewise_integral(rng):
    for _ in range(200):
        own = random_field(rng, ClassId.PTW, float(rng.uniform(0, 400)))
        other = random_field(rng, ClassId.CAR, float(rng.uniform(0, 400)))
        got = cross_class_spacing(own, other)
        for k in range(len(own)):
            n = brute_force_count(other, own.edges[k + 1], own.edges[k])
            expected = np.inf if n == 0 else own.dn * own.spacing[k] / n
            if np.isinf(expected):
                assert np.isinf(got[k])
            else:
                assert got[k] == pytest.approx(expected, rel=1e-9)
            assert cluster_cross_spacing(own.cluster(k), other) == pytest.approx(got[k], rel=1e-12)


def test_cross_spacing_against_itself():
    f = ClusterField.uniform(ClassId.PTW, 50.0, 4.0, 3, 2.0)
    np.testing.assert_array_equal(cross_class_spacing(f, f), f.spacing)


def test_vehicles_between_counts_uniform_field():
    f = ClusterField.uniform(ClassId.CAR, 100.0, 5.0, 4, 2.0)
    assert vehicles_between(f, 70.0, 90.0) == pytest.approx(4.0)
    assert vehicles_between(f, -50.0, 0.0) == 0.0


def test_uniform_state_is_steady():
    cfg = ScenarioConfig(profile=(Segment(0, 3000, 0.2, 0.1),))
    run, _ = Lag1Run.start(cfg).run_to(10.0)
    # platoon ends live in the padding; the road itself stays uniform
    x = np.linspace(0.5, 2999.5, 3000)
    np.testing.assert_allclose(cluster_density_profile(run.ptw, x), 0.2, rtol=1e-12)
    np.testing.assert_allclose(cluster_density_profile(run.car, x), 0.1, rtol=1e-12)


def test_cfl_guard(law):
    f = ClusterField.uniform(ClassId.PTW, 100.0, 5.0, 3, 1.0)
    dt = 1.01 / max_wave_speed(law, "lagrangian")
    with pytest.raises(CFLViolation):
        godunov_step_m1(f, far_away_cars(), dt, law)


def test_overlap_is_refused(law):
    # spacing far below what the speed law allows at this dt would invert edges
    f = ClusterField(ClassId.PTW, 1.0, np.array([10.0, 9.99, 0.0]), np.array([0.01, 9.99]))
    with pytest.raises((InvariantViolation, ValueError)):
        godunov_step_m1(f, far_away_cars(), 0.05, law)


def ring_fields(rng, ring):
    out = []
    for cls, dn in ((ClassId.PTW, 2.0), (ClassId.CAR, 1.0)):
        n = 40
        raw = rng.uniform(1.0, 3.0, n)
        spacing = raw * ring / (dn * raw.sum())
        edges = ring - np.concatenate([[0.0], np.cumsum(dn * spacing)])
        edges[-1] = 0.0
        out.append(ClusterField(cls, dn, edges, spacing))
    return out


def test_periodic_conservation_per_step(law, rng):
    ring = 500.0
    ptw, car = ring_fields(rng, ring)
    cfg = ScenarioConfig(dt=0.05, boundary=Boundary.PERIODIC)
    run = Lag1Run(ptw, car, cfg, ring=ring)
    for _ in range(200):
        run = run.step()
        for f in (run.ptw, run.car):
            # platoon length equals the ring and is dn * sum(s)
            assert f.dn * f.spacing.sum() == pytest.approx(ring, rel=1e-10)
            assert f.edges[0] - f.edges[-1] == pytest.approx(ring, rel=1e-10)
    assert np.all(np.diff(run.ptw.edges) < 0)


def test_periodic_needs_ring(law):
    f = ClusterField.uniform(ClassId.PTW, 100.0, 5.0, 3, 1.0)
    with pytest.raises(ValueError):
        godunov_step_m1(f, f, 0.01, law, Boundary.PERIODIC)
