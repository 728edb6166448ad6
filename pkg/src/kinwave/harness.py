"""Comparison metrics and the experiment runner."""

from __future__ import annotations

import time
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from . import io
from .core import ClassId, ClusterField, ScenarioConfig, cluster_density_profile, format_scenario
from .euler import EulerianRun, EulerianState, run_to
from .ftl import CAR_LANE, FTLRun, fig9_scenario, trajectory_crossings
from .lag1 import Lag1Run, default_pad
from .lag2 import CarrierField, Lag2Run, carrier_density_profiles

FRONT_HALF_WIDTH = 100.0

EXPERIMENTS = (
    "fig6_euler_vs_lag2",
    "fig7_lag_methods",
    "fig8_swapped_speeds",
    "fig9_trajectories",
    "refinement_study",
)


def resample_to_grid(output, grid):
    """Piecewise-constant density at the sample points ``grid``.

    Accepts an :class:`EulerianState`, a :class:`Lag1Run`, a
    :class:`Lag2Run`/:class:`CarrierField` (all returning
    ``(rho_ptw, rho_car)``) or a single :class:`ClusterField` (returning one
    array). Points the output does not cover are NaN.
    """
    grid = np.asarray(grid, dtype=float)
    if isinstance(output, EulerianState):
        idx = np.floor((grid - output.x0) / output.dx).astype(int)
        inside = (idx >= 0) & (idx < len(output.rho_ptw))
        out = []
        for rho in (output.rho_ptw, output.rho_car):
            a = np.full(grid.shape, np.nan)
            a[inside] = rho[idx[inside]]
            out.append(a)
        return tuple(out)
    if isinstance(output, ClusterField):
        return cluster_density_profile(output, grid)
    if isinstance(output, Lag1Run):
        return cluster_density_profile(output.ptw, grid), cluster_density_profile(output.car, grid)
    if isinstance(output, Lag2Run):
        output = output.field
    if isinstance(output, CarrierField):
        return carrier_density_profiles(output, grid)
    raise TypeError(f"cannot resample {type(output).__name__}")


def _included(x, windows):
    keep = np.ones(len(x), dtype=bool)
    for lo, hi in windows:
        keep &= ~((x >= lo) & (x <= hi))
    return keep


def l1_error(a, b, exclusion_windows=(), x=None) -> float:
    """Relative L1 distance ``sum|a - b| / sum|b|``.

    Samples that are NaN in either profile, or whose ``x`` falls in an
    exclusion window, are left out.
    """
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    keep = np.isfinite(a) & np.isfinite(b)
    if exclusion_windows:
        if x is None:
            raise ValueError("exclusion windows need sample positions")
        keep &= _included(np.asarray(x, dtype=float), exclusion_windows)
    if not np.any(keep):
        raise ValueError("no samples left to compare")
    denom = np.sum(np.abs(b[keep]))
    if denom == 0:
        raise ValueError("reference profile is zero on the compared samples")
    return float(np.sum(np.abs(a[keep] - b[keep])) / denom)


def detect_fronts(x, profiles, n_fronts=2, min_separation=2 * FRONT_HALF_WIDTH) -> list[float]:
    """Locations of the steepest jumps, summed over the given profiles."""
    x = np.asarray(x, dtype=float)
    g = np.zeros(len(x))
    for p in profiles:
        g += np.abs(np.nan_to_num(np.gradient(np.asarray(p, dtype=float))))
    fronts: list[float] = []
    for _ in range(n_fronts):
        if not np.any(g > 0):
            break
        k = int(np.argmax(g))
        fronts.append(float(x[k]))
        g[np.abs(x - x[k]) < min_separation] = 0.0
    return sorted(fronts)


def front_windows(fronts, half_width=FRONT_HALF_WIDTH):
    return [(f - half_width, f + half_width) for f in fronts]


def total_variation(x, profile, window) -> float:
    x = np.asarray(x, dtype=float)
    p = np.asarray(profile, dtype=float)
    m = (x >= window[0]) & (x <= window[1]) & np.isfinite(p)
    return float(np.sum(np.abs(np.diff(p[m]))))


# ---------------------------------------------------------------------------
# experiments


@dataclass
class ExperimentResult:
    name: str
    x: np.ndarray
    profiles: dict[str, np.ndarray] = field(default_factory=dict)
    metrics: dict[str, float] = field(default_factory=dict)
    metadata: dict[str, object] = field(default_factory=dict)
    # CSV name -> (columns, rows)
    tables: dict[str, tuple] = field(default_factory=dict)

    def write(self, out: Path | str) -> Path:
        out = Path(out)
        out.mkdir(parents=True, exist_ok=True)
        if self.profiles:
            io.write_profiles(out / "profiles.csv", self.x, self.profiles)
        for fname, (cols, rows) in self.tables.items():
            io.write_csv(out / fname, cols, rows)
        io.write_metrics(out / "metrics.csv", self.metrics)
        io.write_metadata(out / "metadata.txt", self.metadata)
        return out


def run_metadata(cfg: ScenarioConfig, **extra) -> dict[str, object]:
    meta: dict[str, object] = {
        "dt": cfg.dt,
        "dx": cfg.dx,
        "dn": cfg.dn,
        "road_length": cfg.road_length,
        "sim_time": cfg.sim_time,
        "output_time": cfg.output_time,
        "boundary": cfg.boundary.value,
        "epsilon_space": cfg.epsilon_space,
        "num_sublanes": cfg.num_sublanes,
        "platoon_pad": default_pad(cfg),
    }
    meta.update(cfg.law().describe())
    for i, seg in enumerate(cfg.profile):
        meta[f"segment_{i}"] = f"{seg.x_start!r} {seg.x_end!r} {seg.rho_ptw!r} {seg.rho_car!r}"
    if cfg.traffic_light is not None:
        meta["light_position"] = cfg.traffic_light.position
        meta["light_red_until"] = cfg.traffic_light.red_until
    meta.update(extra)
    return meta


def _grid(cfg: ScenarioConfig) -> np.ndarray:
    return cfg.dx * (np.arange(int(round(cfg.road_length / cfg.dx))) + 0.5)


def _lag1_at(cfg, t, dn=None, dt=None):
    c = cfg if dt is None else replace(cfg, dt=dt)
    run, _ = Lag1Run.start(c, dn=dn).run_to(t)
    return run


def _lag2_at(cfg, ref, t, dn=None):
    run, _ = Lag2Run.start(cfg, ref, dn=dn).run_to(t)
    return run


def fig6_euler_vs_lag2(cfg: ScenarioConfig | None = None) -> ExperimentResult:
    cfg = cfg or ScenarioConfig()
    t = cfg.output_time
    x = _grid(cfg)
    start = time.perf_counter()
    euler, euler_snaps = run_to(EulerianRun.start(cfg), t)
    lag_p = _lag2_at(cfg, ClassId.PTW, t)
    lag_c = _lag2_at(cfg, ClassId.CAR, t)
    elapsed = time.perf_counter() - start
    # fronts are located on the sharpest solution available, method 1
    sharp = resample_to_grid(_lag1_at(cfg, t), x)
    fronts = detect_fronts(x, sharp)
    windows = front_windows(fronts)

    res = ExperimentResult("fig6_euler_vs_lag2", x, metadata=run_metadata(cfg, experiment="fig6_euler_vs_lag2"))
    series = {"euler": resample_to_grid(euler.state, x), "lag_ref_ptw": resample_to_grid(lag_p, x),
              "lag_ref_car": resample_to_grid(lag_c, x)}
    for name, (r1, r2) in series.items():
        res.profiles[f"{name}_rho_ptw"] = r1
        res.profiles[f"{name}_rho_car"] = r2
    for name in ("lag_ref_ptw", "lag_ref_car"):
        for c, cls in enumerate(("ptw", "car")):
            res.metrics[f"l1_{name}_vs_euler_{cls}"] = l1_error(series[name][c], series["euler"][c], windows, x)
    for i, f in enumerate(fronts):
        res.metrics[f"front_{i}_x"] = f
    res.metrics["runtime_s"] = elapsed
    res.metadata["front_half_width"] = FRONT_HALF_WIDTH
    res.tables["euler.csv"] = (io.EULER_COLUMNS, list(io.euler_rows([euler_snaps[0], euler.state], cfg.law())))
    res.tables["lag_ref_ptw.csv"] = (io.CARRIER_COLUMNS, list(io.lag2_rows([lag_p])))
    res.tables["lag_ref_car.csv"] = (io.CARRIER_COLUMNS, list(io.lag2_rows([lag_c])))
    return res


def fig7_lag_methods(cfg: ScenarioConfig | None = None, refine: int = 4) -> ExperimentResult:
    cfg = cfg or ScenarioConfig()
    t = cfg.output_time
    x = _grid(cfg)
    lag1 = _lag1_at(cfg, t)
    ref = _lag1_at(cfg, t, dn=cfg.dn / refine)
    runs = {
        "lag1": resample_to_grid(lag1, x),
        "lag2_ref_ptw": resample_to_grid(_lag2_at(cfg, ClassId.PTW, t), x),
        "lag2_ref_car": resample_to_grid(_lag2_at(cfg, ClassId.CAR, t), x),
    }
    ref_prof = resample_to_grid(ref, x)
    fronts = detect_fronts(x, runs["lag1"])
    res = ExperimentResult("fig7_lag_methods", x, metadata=run_metadata(cfg, experiment="fig7_lag_methods",
                                                                       reference_dn=cfg.dn / refine))
    for name, (r1, r2) in runs.items():
        res.profiles[f"{name}_rho_ptw"] = r1
        res.profiles[f"{name}_rho_car"] = r2
        for c, cls in enumerate(("ptw", "car")):
            res.metrics[f"l1_{name}_vs_refined_{cls}"] = l1_error(runs[name][c], ref_prof[c])
            for i, w in enumerate(front_windows(fronts)):
                res.metrics[f"tv_{name}_front{i}_{cls}"] = total_variation(x, runs[name][c], w)
    res.profiles["refined_rho_ptw"], res.profiles["refined_rho_car"] = ref_prof
    for i, f in enumerate(fronts):
        res.metrics[f"front_{i}_x"] = f
    res.tables["lag1.csv"] = (io.CLUSTER_COLUMNS, list(io.lag1_rows([lag1])))
    return res


def fig8_swapped_speeds(cfg: ScenarioConfig | None = None) -> ExperimentResult:
    cfg = (cfg or ScenarioConfig()).with_speeds(v_ptw=15.0, v_car=20.0)
    x = _grid(cfg)
    law = cfg.law()
    res = ExperimentResult("fig8_swapped_speeds", x, metadata=run_metadata(cfg, experiment="fig8_swapped_speeds",
                                                                          carried_flux="conservative"))
    for ref in (ClassId.PTW, ClassId.CAR):
        tag = f"ref_{ref.name.lower()}"
        run0 = Lag2Run.start(cfg, ref)
        mass0 = run0.field.carried_mass
        run, snaps = run0.run_to(cfg.sim_time)
        worst_occ, min_rho = 0.0, np.inf
        for s in snaps:
            s_ptw, s_car = s.field.class_spacings()
            r1, r2 = 1.0 / s_ptw, 1.0 / s_car
            worst_occ = max(worst_occ, float(np.max(law.occupancy(r1, r2))))
            min_rho = min(min_rho, float(min(r1.min(), r2.min())))
        balance = run.field.carried_mass - mass0 - run.field.exchanged
        res.metrics[f"{tag}_carried_mass_rel_error"] = abs(balance) / mass0
        res.metrics[f"{tag}_max_occupancy"] = worst_occ
        res.metrics[f"{tag}_min_density"] = min_rho
        res.metrics[f"{tag}_t_end"] = run.t
        at = _lag2_at(cfg, ref, cfg.output_time)
        r1, r2 = resample_to_grid(at, x)
        res.profiles[f"{tag}_rho_ptw"] = r1
        res.profiles[f"{tag}_rho_car"] = r2
        res.tables[f"lag2_{tag}.csv"] = (io.CARRIER_COLUMNS, list(io.lag2_rows(snaps)))
    return res


def fig9_trajectories(cfg: ScenarioConfig | None = None) -> ExperimentResult:
    cfg = cfg or fig9_scenario()
    run, snaps = FTLRun.start(cfg).run_to(cfg.sim_time, every=1)
    veh = run.vehicles
    light = cfg.traffic_light
    res = ExperimentResult("fig9_trajectories", np.array([]), metadata=run_metadata(cfg, experiment="fig9_trajectories"))
    cars = veh.sublane == CAR_LANE
    ptw = ~cars
    res.metrics["crossings_between_sublanes"] = sum(
        trajectory_crossings(snaps, veh.sublane == a, veh.sublane == b)
        for a in range(cfg.num_sublanes) for b in range(a + 1, cfg.num_sublanes)
    )
    res.metrics["crossings_within_sublanes"] = sum(
        trajectory_crossings(snaps, veh.sublane == a) for a in range(cfg.num_sublanes)
    )
    res.metrics["crossings_among_cars"] = trajectory_crossings(snaps, cars)
    res.metrics["n_ptw"] = int(np.sum(ptw))
    res.metrics["n_car"] = int(np.sum(cars))
    if light is not None:
        red = [s for s in snaps if s[0].t < light.red_until]
        green = [s for s in snaps if s[0].t >= light.red_until]
        # vehicles that started upstream of the light
        approach = snaps[0][0].position < light.position
        res.metrics["max_position_while_red"] = max(float(np.max(s[0].position[approach])) for s in red)
        last_red = red[-1]
        res.metrics["queued_at_red_end"] = int(np.sum(approach & (last_red[1] < 0.5)))
        res.metrics["passed_light_by_end"] = int(np.sum(approach & (green[-1][0].position >= light.position)))
    every = max(1, cfg.snapshot_every)
    res.tables["trajectories.csv"] = (io.TRAJECTORY_COLUMNS, list(io.trajectory_rows(snaps[::every])))
    return res


def refinement_study(cfg: ScenarioConfig | None = None, levels=(7.5, 3.75, 1.875)) -> ExperimentResult:
    """Self-convergence of method 1 towards a 16x finer run (dt / 4)."""
    cfg = cfg or ScenarioConfig()
    t = cfg.output_time
    x = _grid(cfg)
    fine_dn = min(levels) / 4
    ref = resample_to_grid(_lag1_at(cfg, t, dn=fine_dn, dt=cfg.dt / 4), x)
    res = ExperimentResult("refinement_study", x, metadata=run_metadata(
        cfg, experiment="refinement_study", reference_dn=fine_dn, reference_dt=cfg.dt / 4))
    res.profiles["reference_rho_ptw"], res.profiles["reference_rho_car"] = ref
    for dn in levels:
        prof = resample_to_grid(_lag1_at(cfg, t, dn=dn), x)
        for c, cls in enumerate(("ptw", "car")):
            res.profiles[f"dn{dn!r}_rho_{cls}"] = prof[c]
            res.metrics[f"l1_dn{dn!r}_{cls}"] = l1_error(prof[c], ref[c])
    return res


_RUNNERS = {
    "fig6_euler_vs_lag2": fig6_euler_vs_lag2,
    "fig7_lag_methods": fig7_lag_methods,
    "fig8_swapped_speeds": fig8_swapped_speeds,
    "fig9_trajectories": fig9_trajectories,
    "refinement_study": refinement_study,
}


def run_experiment(name: str, cfg: ScenarioConfig | None = None, out: Path | str | None = None) -> ExperimentResult:
    try:
        runner = _RUNNERS[name]
    except KeyError:
        raise ValueError(f"unknown experiment {name!r}; choose from {', '.join(EXPERIMENTS)}") from None
    res = runner(cfg)
    if out is not None:
        res.write(out)
        scenario_cfg = cfg or (fig9_scenario() if name == "fig9_trajectories" else ScenarioConfig())
        if name == "fig8_swapped_speeds":
            scenario_cfg = scenario_cfg.with_speeds(15.0, 20.0)
        Path(out, "scenario.txt").write_text(format_scenario(scenario_cfg))
    return res
