import numpy as np
import pytest

from kinwave.core import ClassId, ClusterField, ScenarioConfig
from kinwave.euler import EulerianRun, EulerianState, run_to
from kinwave.harness import (
    EXPERIMENTS,
    _grid,
    _lag1_at,
    detect_fronts,
    front_windows,
    l1_error,
    resample_to_grid,
    run_experiment,
    total_variation,
)


def test_l1_examples():
    b = np.full(10, 0.2)
    assert l1_error(b, b) == 0.0
    assert l1_error(np.full(10, 0.22), b) == pytest.approx(0.1)


def test_l1_exclusion_and_missing():
    x = np.arange(10.0)
    a = np.array([1.0, 1, 1, 5, 5, 1, 1, 1, np.nan, 1])
    b = np.ones(10)
    assert l1_error(a, b, [(2.5, 4.5)], x) == 0.0
    with pytest.raises(ValueError):
        l1_error(a, b, [(-1.0, 11.0)], x)
    with pytest.raises(ValueError):
        l1_error(a, b, [(0.0, 1.0)])


def test_resample_uniform_and_single_cluster():
    st = EulerianState(10.0, np.full(5, 0.2), np.full(5, 0.1))
    p, c = resample_to_grid(st, np.array([5.0, 25.0, 49.0, 60.0]))
    np.testing.assert_allclose(p[:3], 0.2)
    assert np.isnan(p[3]) and c[0] == 0.1
    f = ClusterField.uniform(ClassId.PTW, 30.0, 5.0, 1, 2.0)
    np.testing.assert_allclose(resample_to_grid(f, np.array([21.0, 29.0])), 0.2)
    with pytest.raises(TypeError):
        resample_to_grid("nope", np.zeros(2))


def test_fronts_and_total_variation():
    x = np.arange(0.0, 1000.0)
    p = np.where(x < 300, 0.1, np.where(x < 700, 0.3, 0.2))
    assert detect_fronts(x, [p]) == [299.0, 699.0]
    assert total_variation(x, p, (200, 400)) == pytest.approx(0.2)
    assert front_windows([500.0]) == [(400.0, 600.0)]


def test_lag1_vs_euler_regression_baseline():
    # pinned after the first validated run
    cfg = ScenarioConfig()
    x = _grid(cfg)
    e, _ = run_to(EulerianRun.start(cfg), 40.0)
    ref = resample_to_grid(e.state, x)
    lag = resample_to_grid(_lag1_at(cfg, 40.0), x)
    windows = front_windows(detect_fronts(x, lag))
    assert l1_error(lag[0], ref[0], windows, x) == pytest.approx(0.008766628684016476, rel=1e-9)
    assert l1_error(lag[1], ref[1], windows, x) == pytest.approx(0.004807646092531669, rel=1e-9)


def test_unknown_experiment():
    with pytest.raises(ValueError, match="unknown experiment"):
        run_experiment("fig10")
    assert len(EXPERIMENTS) == 5


def test_experiment_bundle_is_deterministic(tmp_path):
    a = run_experiment("fig6_euler_vs_lag2", out=tmp_path / "a")
    run_experiment("fig6_euler_vs_lag2", out=tmp_path / "b")
    for name in ("euler.csv", "lag_ref_ptw.csv", "lag_ref_car.csv", "profiles.csv"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()
    meta = (tmp_path / "a" / "metadata.txt").read_text()
    for key in ("r_crit_ptw", "r_crit_car", "eff_length_ptw", "eff_length_car", "boundary", "platoon_pad"):
        assert f"{key} = " in meta
    assert a.metrics["front_0_x"] < a.metrics["front_1_x"]


def test_swapped_experiment_uses_swapped_speeds(tmp_path):
    run_experiment("fig8_swapped_speeds", out=tmp_path)
    meta = (tmp_path / "metadata.txt").read_text()
    assert "v_free_ptw = 15.0" in meta and "v_free_car = 20.0" in meta
