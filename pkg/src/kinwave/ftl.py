"""Follow-the-leader mode: Lagrangian clusters of exactly one vehicle.

Cars follow the nearest car ahead. PTWs ride in sub-lanes and follow the
nearest PTW ahead in their own sub-lane, so PTWs in different sub-lanes can
move abreast and pass each other. A vehicle's speed comes from the same
two-class speed law as the macroscopic solvers, evaluated on the densities
seen inside the gap to its leader.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .core import (
    INF,
    ClassId,
    InvariantViolation,
    ScenarioConfig,
    Segment,
    TrafficLight,
    steps_for,
)
from .speedlaw import SpeedLaw, check_cfl, max_wave_speed

CAR_LANE = -1


@dataclass(frozen=True)
class Vehicles:
    """Per-vehicle arrays; ``sublane`` is ``CAR_LANE`` for cars."""

    ids: np.ndarray
    cls: np.ndarray
    sublane: np.ndarray
    position: np.ndarray
    t: float = 0.0

    def __len__(self) -> int:
        return len(self.ids)

    def groups(self):
        """Yield ``(key, indices sorted downstream-first)`` per ordering group."""
        for key in np.unique(self.sublane):
            idx = np.nonzero(self.sublane == key)[0]
            yield int(key), idx[np.argsort(-self.position[idx], kind="stable")]


@dataclass(frozen=True)
class SubLaneLayout:
    num_sublanes: int = 2

    def assign(self, n_ptw: int) -> np.ndarray:
        """Round-robin by initial order, most downstream PTW first."""
        return np.arange(n_ptw) % self.num_sublanes


def place_vehicles(segments, class_id: ClassId) -> np.ndarray:
    """Positions where the cumulative count from downstream hits k + 1/2."""
    segs = sorted(segments, key=lambda s: s.x_start, reverse=True)
    xs, counts = [segs[0].x_end], [0.0]
    for seg in segs:
        xs.append(seg.x_start)
        counts.append(counts[-1] + seg.rho(class_id) * (seg.x_end - seg.x_start))
    n = int(np.floor(counts[-1] + 0.5 + 1e-9))
    targets = np.arange(n) + 0.5
    targets = targets[targets <= counts[-1]]
    return np.interp(targets, counts, xs)


def initial_vehicles(cfg: ScenarioConfig) -> Vehicles:
    ptw = place_vehicles(cfg.profile, ClassId.PTW)
    car = place_vehicles(cfg.profile, ClassId.CAR)
    lanes = SubLaneLayout(cfg.num_sublanes).assign(len(ptw))
    pos = np.concatenate([ptw, car])
    return Vehicles(
        ids=np.arange(len(pos)),
        cls=np.concatenate([np.full(len(ptw), int(ClassId.PTW)), np.full(len(car), int(ClassId.CAR))]),
        sublane=np.concatenate([lanes, np.full(len(car), CAR_LANE)]),
        position=pos,
    )


def leader_gaps(veh: Vehicles, light: TrafficLight | None = None) -> np.ndarray:
    """Gap from each vehicle to its leader (``inf`` for a group head).

    A red light acts as a stopped leader for every vehicle upstream of it.
    """
    gaps = np.full(len(veh), INF)
    for _, idx in veh.groups():
        x = veh.position[idx]
        gaps[idx[1:]] = x[:-1] - x[1:]
    if light is not None and light.is_red(veh.t):
        before = veh.position < light.position
        gaps[before] = np.minimum(gaps[before], light.position - veh.position[before])
    return gaps


def local_state(veh: Vehicles, light: TrafficLight | None = None) -> tuple[np.ndarray, np.ndarray]:
    """Effective ``(s_ptw, s_car)`` seen by every vehicle.

    The gap ``[x, x + g)`` to the leader is shared by the vehicle, the other
    class and PTWs of other sub-lanes: a PTW sees ``s_ptw = g / (1 + m)``
    with ``m`` other-sub-lane PTWs in the gap and ``s_car = g / n_cars``; a
    car sees ``s_car = g`` and ``s_ptw = g / n_ptw``. Empty counts give
    ``inf``, as does an unbounded gap.
    """
    gaps = leader_gaps(veh, light)
    x = veh.position
    lo, hi = x, x + gaps
    is_ptw = veh.cls == int(ClassId.PTW)

    def count_in(mask):
        pts = np.sort(x[mask])
        return np.searchsorted(pts, hi, side="left") - np.searchsorted(pts, lo, side="left")

    n_car = count_in(~is_ptw)
    n_ptw_all = count_in(is_ptw)
    # PTWs of the vehicle's own sub-lane inside its gap: itself only
    n_ptw_other = np.where(is_ptw, n_ptw_all - 1, n_ptw_all)
    finite = np.isfinite(gaps)
    with np.errstate(divide="ignore", invalid="ignore"):
        s_ptw = np.where(is_ptw, gaps / (1 + n_ptw_other), np.where(n_ptw_other > 0, gaps / n_ptw_other, INF))
        s_car = np.where(is_ptw, np.where(n_car > 0, gaps / n_car, INF), gaps)
    s_ptw = np.where(finite, s_ptw, INF)
    s_car = np.where(finite, s_car, INF)
    return s_ptw, s_car


def vehicle_speeds(veh: Vehicles, law: SpeedLaw, light: TrafficLight | None = None) -> np.ndarray:
    s_ptw, s_car = local_state(veh, light)
    # sub-lanes let local occupancy exceed one lane's jam bound; clamp to a stop
    v_ptw, v_car = law.speeds_from_spacing(s_ptw, s_car, strict=False)
    return np.where(veh.cls == int(ClassId.PTW), v_ptw, v_car)


def ftl_step(
    veh: Vehicles,
    dt: float,
    law: SpeedLaw,
    light: TrafficLight | None = None,
    lam: float | None = None,
) -> Vehicles:
    """Move every vehicle by ``dt * V`` from a frozen snapshot.

    With one-vehicle clusters the Godunov spacing update and the position
    update coincide: the new gap is the old gap minus ``dt`` times the
    speed difference to the leader.
    """
    if lam is None:
        lam = max_wave_speed(law, "lagrangian")
    check_cfl(dt, 1.0, lam)
    v = vehicle_speeds(veh, law, light)
    new = replace(veh, position=veh.position + dt * v, t=veh.t + dt)
    for key, idx in veh.groups():
        if np.any(np.diff(new.position[idx]) >= 0):
            where = "cars" if key == CAR_LANE else f"PTW sub-lane {key}"
            raise InvariantViolation(f"overtaking within {where} at t={new.t:g}")
    if light is not None and light.is_red(veh.t):
        crossed = (veh.position < light.position) & (new.position >= light.position)
        if np.any(crossed):
            raise InvariantViolation(f"vehicle {int(veh.ids[np.argmax(crossed)])} ran the red light")
    return new


@dataclass(frozen=True)
class FTLRun:
    vehicles: Vehicles
    cfg: ScenarioConfig
    step_count: int = 0

    @classmethod
    def start(cls, cfg: ScenarioConfig, vehicles: Vehicles | None = None) -> "FTLRun":
        return cls(initial_vehicles(cfg) if vehicles is None else vehicles, cfg)

    def step(self) -> "FTLRun":
        law = self.cfg.law()
        veh = ftl_step(self.vehicles, self.cfg.dt, law, self.cfg.traffic_light, max_wave_speed(law, "lagrangian"))
        veh = replace(veh, t=(self.step_count + 1) * self.cfg.dt)
        return replace(self, vehicles=veh, step_count=self.step_count + 1)

    def speeds(self) -> np.ndarray:
        return vehicle_speeds(self.vehicles, self.cfg.law(), self.cfg.traffic_light)

    def run_to(self, t_end: float, every: int = 1) -> tuple["FTLRun", list[tuple[Vehicles, np.ndarray]]]:
        """Step to ``t_end``; snapshots pair the state with its speeds."""
        n = steps_for(t_end - self.vehicles.t, self.cfg.dt)
        run = self
        snaps = [(run.vehicles, run.speeds())]
        for i in range(1, n + 1):
            run = run.step()
            if i % every == 0 or i == n:
                snaps.append((run.vehicles, run.speeds()))
        return run, snaps


def fig9_scenario() -> ScenarioConfig:
    """Signal scenario: mixed platoon approaching a light red until 40 s."""
    return ScenarioConfig(
        dt=0.05,
        dn=1.0,
        road_length=1000.0,
        sim_time=80.0,
        profile=(Segment(0.0, 300.0, 0.2, 0.05), Segment(300.0, 1000.0, 0.0, 0.0)),
        num_sublanes=2,
        traffic_light=TrafficLight(400.0, 40.0),
        snapshot_every=10,
    )


def trajectory_crossings(snaps, a_mask: np.ndarray, b_mask: np.ndarray | None = None) -> int:
    """Count vehicle pairs whose order flips between consecutive snapshots.

    Pairs are taken within ``a_mask`` or, if ``b_mask`` is given, between
    the two masks.
    """
    pos = np.array([s[0].position for s in snaps])
    ia = np.nonzero(a_mask)[0]
    ib = ia if b_mask is None else np.nonzero(b_mask)[0]
    d = pos[:, ia][:, :, None] - pos[:, ib][:, None, :]
    sign = np.sign(d)
    flips = np.any(sign[1:] * sign[:-1] < 0, axis=0)
    if b_mask is None:
        flips = np.triu(flips, 1)
    return int(np.sum(flips))
