"""Eulerian two-class solver (classic Lax-Friedrichs)."""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .core import Boundary, ClassId, InvariantViolation, ScenarioConfig, steps_for
from .speedlaw import SpeedLaw, check_cfl, max_wave_speed


@dataclass(frozen=True)
class EulerianState:
    """Cell-averaged densities on a uniform grid starting at ``x0``."""

    dx: float
    rho_ptw: np.ndarray
    rho_car: np.ndarray
    t: float = 0.0
    x0: float = 0.0

    @property
    def x(self) -> np.ndarray:
        """Cell centres."""
        return self.x0 + self.dx * (np.arange(len(self.rho_ptw)) + 0.5)

    @property
    def cells(self) -> np.ndarray:
        return np.column_stack([self.rho_ptw, self.rho_car])

    def vehicle_counts(self) -> tuple[float, float]:
        return float(np.sum(self.rho_ptw) * self.dx), float(np.sum(self.rho_car) * self.dx)

    @classmethod
    def from_config(cls, cfg: ScenarioConfig) -> "EulerianState":
        n = int(round(cfg.road_length / cfg.dx))
        if abs(n * cfg.dx - cfg.road_length) > 1e-9 * cfg.road_length:
            raise ValueError("road_length must be a multiple of dx")
        # cell averages of the piecewise-constant profile
        edges = cfg.dx * np.arange(n + 1)
        rho = []
        for cid in (ClassId.PTW, ClassId.CAR):
            cum = np.zeros(n + 1)
            for seg in cfg.profile:
                lo = np.clip(edges, seg.x_start, seg.x_end)
                cum += seg.rho(cid) * (lo - seg.x_start)
            rho.append(np.diff(cum) / cfg.dx)
        return cls(cfg.dx, rho[0], rho[1], 0.0)


def _pad(a: np.ndarray, boundary: Boundary) -> np.ndarray:
    if boundary is Boundary.PERIODIC:
        return np.concatenate([a[-1:], a, a[:1]])
    downstream = 0.0 if boundary is Boundary.FREE_DOWNSTREAM else a[-1]
    return np.concatenate([a[:1], a, [downstream]])


def lax_friedrichs(u: np.ndarray, q: np.ndarray, ratio: float) -> np.ndarray:
    """One classic Lax-Friedrichs update of padded arrays.

    ``u`` and ``q`` carry one ghost cell on each side; ``ratio = dt/dx``.
    """
    return 0.5 * (u[:-2] + u[2:]) - 0.5 * ratio * (q[2:] - q[:-2])


def euler_step(
    state: EulerianState,
    dt: float,
    law: SpeedLaw,
    boundary: Boundary = Boundary.ZERO_GRADIENT,
    lam: float | None = None,
) -> EulerianState:
    """Advance both classes one step from the same time level."""
    if lam is None:
        lam = max_wave_speed(law, "euler")
    check_cfl(dt, state.dx, lam, "dx")
    r1 = _pad(state.rho_ptw, boundary)
    r2 = _pad(state.rho_car, boundary)
    v1, v2 = law.speeds(r1, r2)
    ratio = dt / state.dx
    new1 = lax_friedrichs(r1, r1 * v1, ratio)
    new2 = lax_friedrichs(r2, r2 * v2, ratio)
    if np.any(new1 < 0) or np.any(new2 < 0):
        raise InvariantViolation(f"negative density at t={state.t + dt}")
    occ = law.occupancy(new1, new2)
    if np.any(occ > 1.0 + 1e-12):
        raise InvariantViolation(f"occupancy {occ.max():.6g} beyond jam at t={state.t + dt}")
    return replace(state, rho_ptw=new1, rho_car=new2, t=state.t + dt)


@dataclass(frozen=True)
class EulerianRun:
    state: EulerianState
    cfg: ScenarioConfig
    step_count: int = 0

    @classmethod
    def start(cls, cfg: ScenarioConfig) -> "EulerianRun":
        return cls(EulerianState.from_config(cfg), cfg)

    def step(self) -> "EulerianRun":
        law = self.cfg.law()
        new = euler_step(self.state, self.cfg.dt, law, self.cfg.boundary, max_wave_speed(law, "euler"))
        # recompute t from the step count so long runs do not drift
        new = replace(new, t=(self.step_count + 1) * self.cfg.dt)
        return replace(self, state=new, step_count=self.step_count + 1)


def run_to(run: EulerianRun, t_end: float, every: int | None = None) -> tuple[EulerianRun, list[EulerianState]]:
    """Step until ``t_end``; return the final run and snapshots.

    Snapshots are taken at the start and after every ``every`` steps
    (and always at the end).
    """
    n = steps_for(t_end - run.state.t, run.cfg.dt)
    if n < 0:
        raise ValueError("t_end lies before the current time")
    every = every or run.cfg.snapshot_every
    snaps = [run.state]
    for i in range(1, n + 1):
        run = run.step()
        if i % every == 0 or i == n:
            snaps.append(run.state)
    return run, snaps


def speeds_of(state: EulerianState, law: SpeedLaw) -> tuple[np.ndarray, np.ndarray]:
    return law.speeds(state.rho_ptw, state.rho_car)
