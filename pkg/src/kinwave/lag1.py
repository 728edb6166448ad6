"""Lagrangian method 1: one (n, t) coordinate system per vehicle class.

Each class is grouped into clusters of ``dn`` vehicles. Cluster spacings
follow the Godunov update; cluster boundaries move with the speed of the
cluster they trail. The speed of a cluster depends on the other class
through the average spacing of that class over the cluster's extent.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .core import (
    INF,
    Boundary,
    Cluster,
    ClusterField,
    ClassId,
    InvariantViolation,
    ScenarioConfig,
    padded_profile,
    steps_for,
)
from .speedlaw import SpeedLaw, check_cfl, max_wave_speed


def _count_knots(other: ClusterField, ring: float | None = None):
    """Knots of the count of ``other`` vehicles downstream of x.

    Returns increasing positions and the matching non-increasing counts;
    piecewise-linear interpolation between them is the exact integral of
    the piecewise-constant density ``1/s``.
    """
    edges = other.edges
    per_cluster = (edges[:-1] - edges[1:]) / other.spacing
    # count downstream of each edge, edges in decreasing order
    downstream = np.concatenate([[0.0], np.cumsum(per_cluster)])
    if ring is None:
        return edges[::-1], downstream[::-1]
    total = downstream[-1]
    xs = np.concatenate([edges + ring, edges, edges - ring])
    cs = np.concatenate([downstream - total, downstream, downstream + total])
    return xs[::-1], cs[::-1]


def vehicles_between(other: ClusterField, lo, hi, ring: float | None = None):
    """Number of ``other`` vehicles in ``[lo, hi]``: the integral of its density."""
    xs, cs = _count_knots(other, ring)
    if ring is None:
        # outside the platoon the count is flat
        left, right = cs[0], cs[-1]
    else:
        left = right = None
    c_lo = np.interp(lo, xs, cs, left=left, right=right)
    c_hi = np.interp(hi, xs, cs, left=left, right=right)
    return c_lo - c_hi


def cross_class_spacing(own: ClusterField, other: ClusterField, ring: float | None = None) -> np.ndarray:
    """Average spacing of ``other`` over each cluster of ``own``.

    ``dn_j * s_j / integral(1/s_c)`` over the cluster extent; an extent with
    no ``other`` vehicles gives ``inf`` (the class is locally absent).
    Querying a class against itself returns its own spacing.
    """
    if other is own:
        return own.spacing.copy()
    count = vehicles_between(other, own.edges[1:], own.edges[:-1], ring)
    length = own.dn * own.spacing
    with np.errstate(divide="ignore"):
        return np.where(count > 0, length / np.where(count > 0, count, 1.0), INF)


def cluster_cross_spacing(cluster: Cluster, other: ClusterField) -> float:
    """Single-cluster version of :func:`cross_class_spacing`."""
    count = float(vehicles_between(other, cluster.tail, cluster.position))
    if count <= 0:
        return INF
    return cluster.dn * cluster.spacing / count


def cluster_speeds(
    f_ptw: ClusterField, f_car: ClusterField, law: SpeedLaw, ring: float | None = None
) -> tuple[np.ndarray, np.ndarray]:
    """Speed of every cluster of both classes from the current state."""
    s_car_at_ptw = cross_class_spacing(f_ptw, f_car, ring)
    s_ptw_at_car = cross_class_spacing(f_car, f_ptw, ring)
    v_ptw = law.speed_from_spacing(ClassId.PTW, f_ptw.spacing, s_car_at_ptw)
    v_car = law.speed_from_spacing(ClassId.CAR, s_ptw_at_car, f_car.spacing)
    return np.asarray(v_ptw), np.asarray(v_car)


def ghost_speed(v: np.ndarray, v_free: float, boundary: Boundary) -> float:
    """Speed of the fictitious cluster ahead of the leader."""
    if boundary is Boundary.FREE_DOWNSTREAM:
        return v_free
    if boundary is Boundary.PERIODIC:
        return float(v[-1])
    return float(v[0])


def godunov_fluxes(v: np.ndarray, v_ghost: float) -> np.ndarray:
    """Interface fluxes: ``F[k]`` is the speed of edge ``k``.

    The upwind side in (n, t) is the leader, so the tail edge of cluster
    ``k`` carries ``V(s_k)`` and the leading edge carries the ghost speed.
    """
    return np.concatenate([[v_ghost], v])


def godunov_update(spacing: np.ndarray, fluxes: np.ndarray, dt: float, dn: float) -> np.ndarray:
    return spacing - (dt / dn) * (fluxes[1:] - fluxes[:-1])


def direct_difference_update(spacing: np.ndarray, v: np.ndarray, v_ghost: float, dt: float, dn: float) -> np.ndarray:
    """``s_i - dt/dn (V(s_i) - V(s_{i-1}))`` written out without fluxes."""
    v_prev = np.concatenate([[v_ghost], v[:-1]])
    return spacing - (dt / dn) * (v - v_prev)


def _check(field_: ClusterField, t: float) -> None:
    if np.any(~(field_.spacing > 0)):
        k = int(np.argmin(field_.spacing))
        raise InvariantViolation(
            f"nonpositive spacing {field_.spacing[k]:.6g} in {field_.class_id.name} cluster {k} at t={t:g}"
            " (check CFL or speed law)"
        )
    if np.any(np.diff(field_.edges) >= 0):
        k = int(np.argmax(np.diff(field_.edges) >= 0))
        raise InvariantViolation(f"{field_.class_id.name} cluster {k} overtook its leader at t={t:g}")


def advance_positions(field_: ClusterField, fluxes: np.ndarray, dt: float) -> ClusterField:
    """Move every cluster edge by ``dt`` times its speed."""
    edges = field_.edges + dt * fluxes
    if np.any(np.diff(edges) >= 0):
        k = int(np.argmax(np.diff(edges) >= 0))
        raise InvariantViolation(f"{field_.class_id.name} edge {k + 1} passed edge {k}")
    return replace(field_, edges=edges)


def godunov_step_m1(
    f_ptw: ClusterField,
    f_car: ClusterField,
    dt: float,
    law: SpeedLaw,
    boundary: Boundary = Boundary.ZERO_GRADIENT,
    lam: float | None = None,
    ring: float | None = None,
    t: float = 0.0,
) -> tuple[ClusterField, ClusterField]:
    """Advance both classes one step, each reading a frozen copy of the other."""
    if lam is None:
        lam = max_wave_speed(law, "lagrangian")
    check_cfl(dt, min(f_ptw.dn, f_car.dn), lam)
    if boundary is Boundary.PERIODIC and ring is None:
        raise ValueError("periodic boundary needs the ring length")
    v_ptw, v_car = cluster_speeds(f_ptw, f_car, law, ring)
    out = []
    for f, v, params in ((f_ptw, v_ptw, law.ptw), (f_car, v_car, law.car)):
        flux = godunov_fluxes(v, ghost_speed(v, params.v_free, boundary))
        new = replace(f, spacing=godunov_update(f.spacing, flux, dt, f.dn))
        new = advance_positions(new, flux, dt)
        _check(new, t + dt)
        out.append(new)
    return out[0], out[1]


@dataclass(frozen=True)
class Lag1Run:
    ptw: ClusterField
    car: ClusterField
    cfg: ScenarioConfig
    step_count: int = 0
    ring: float | None = None

    @property
    def t(self) -> float:
        return self.step_count * self.cfg.dt

    @classmethod
    def start(cls, cfg: ScenarioConfig, dn: float | None = None, pad: float | None = None) -> "Lag1Run":
        """Build clusters from the scenario's initial profile.

        ``pad`` extends the profile beyond both road ends (default: far
        enough that no platoon end reaches the road within ``sim_time``).
        """
        dn = cfg.dn if dn is None else dn
        if pad is None:
            pad = default_pad(cfg)
        prof = padded_profile(cfg.profile, pad, pad)
        return cls(
            ClusterField.from_profile(ClassId.PTW, prof, dn),
            ClusterField.from_profile(ClassId.CAR, prof, dn),
            cfg,
        )

    def step(self) -> "Lag1Run":
        law = self.cfg.law()
        p, c = godunov_step_m1(
            self.ptw, self.car, self.cfg.dt, law, self.cfg.boundary,
            max_wave_speed(law, "lagrangian"), self.ring, self.t,
        )
        return replace(self, ptw=p, car=c, step_count=self.step_count + 1)

    def run_to(self, t_end: float, every: int | None = None) -> tuple["Lag1Run", list["Lag1Run"]]:
        n = steps_for(t_end - self.t, self.cfg.dt)
        every = every or self.cfg.snapshot_every
        run, snaps = self, [self]
        for i in range(1, n + 1):
            run = run.step()
            if i % every == 0 or i == n:
                snaps.append(run)
        return run, snaps

    def speeds(self) -> tuple[np.ndarray, np.ndarray]:
        return cluster_speeds(self.ptw, self.car, self.cfg.law(), self.ring)


def default_pad(cfg: ScenarioConfig) -> float:
    return max(cfg.ptw.v_free, cfg.car.v_free) * cfg.sim_time
