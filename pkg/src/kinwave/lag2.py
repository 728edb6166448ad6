"""Lagrangian method 2: one coordinate system moving with a reference class.

Only the reference class is clustered. The other (carried) class lives in
each reference cluster as the ratio ``y = s_r / s_c``, i.e. carried
vehicles per reference vehicle; ``y = 0`` means the carried class is
absent there.

Carried vehicles cross a cluster edge when their speed differs from the
edge's speed (the speed of the reference cluster the edge trails). The
flux through an edge is ``(v_r - v_c) / s_c`` evaluated on the upwind
side: the downstream cluster when its carried vehicles fall back, the
upstream one when its carried vehicles catch up and pass the edge.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .core import (
    INF,
    Boundary,
    ClassId,
    ClusterField,
    InvariantViolation,
    CFLViolation,
    ScenarioConfig,
    padded_profile,
    steps_for,
)
from .lag1 import advance_positions, default_pad, ghost_speed, godunov_fluxes, godunov_update, _check
from .speedlaw import SpeedLaw, check_cfl, max_wave_speed

VARIANTS = ("conservative", "cellwise")


@dataclass(frozen=True)
class CarrierField:
    """Reference-class clusters plus the carried class's ratio state."""

    reference: ClusterField
    y: np.ndarray
    # carried vehicles that entered (+) or left (-) through the platoon ends
    exchanged: float = 0.0

    @property
    def reference_class_id(self) -> ClassId:
        return self.reference.class_id

    @property
    def carried_class_id(self) -> ClassId:
        return self.reference.class_id.other

    @property
    def dn(self) -> float:
        return self.reference.dn

    @property
    def s_r(self) -> np.ndarray:
        return self.reference.spacing

    @property
    def s_c(self) -> np.ndarray:
        with np.errstate(divide="ignore"):
            return np.where(self.y > 0, self.s_r / np.where(self.y > 0, self.y, 1.0), INF)

    @property
    def carried_mass(self) -> float:
        return float(self.dn * np.sum(self.y))

    def class_spacings(self) -> tuple[np.ndarray, np.ndarray]:
        """``(s_ptw, s_car)`` per reference cluster."""
        if self.reference_class_id is ClassId.PTW:
            return self.s_r, self.s_c
        return self.s_c, self.s_r

    def speeds(self, law: SpeedLaw) -> tuple[np.ndarray, np.ndarray]:
        """``(v_r, v_c)`` per reference cluster."""
        v_ptw, v_car = law.speeds_from_spacing(*self.class_spacings())
        v_ptw, v_car = np.asarray(v_ptw), np.asarray(v_car)
        if self.reference_class_id is ClassId.PTW:
            return v_ptw, v_car
        return v_car, v_ptw

    @classmethod
    def from_profile(cls, reference: ClassId, segments, dn: float) -> "CarrierField":
        ref = ClusterField.from_profile(reference, segments, dn)
        # carried vehicles inside each reference cluster's extent
        carried = reference.other
        counts = np.zeros(len(ref))
        for seg in segments:
            lo = np.clip(ref.edges[1:], seg.x_start, seg.x_end)
            hi = np.clip(ref.edges[:-1], seg.x_start, seg.x_end)
            counts += seg.rho(carried) * (hi - lo)
        return cls(ref, counts / dn)


# ---------------------------------------------------------------------------
# fluxes


def _gate(dv):
    """``max(0, dv) / dv`` with the 0/0 limit taken as 0."""
    return np.where(dv > 0, 1.0, 0.0)


def tail_flux(v_r_d, v_c_d, rho_c_d, v_c_u, rho_c_u):
    """Carried flux through the tail edge of a cluster ``d`` (speed ``v_r_d``)
    whose upstream neighbour is ``u``. Positive flux moves vehicles from
    ``d`` to ``u``.

    If the carried class in ``d`` is slower than the edge it falls back
    through it; if it is faster, only vehicles from ``u`` that are faster
    than the edge can cross it, forwards.
    """
    left = (v_r_d - v_c_d) * rho_c_d
    right = _gate(v_c_u - v_r_d) * (v_r_d - v_c_u) * rho_c_u
    return np.where(v_r_d > v_c_d, left, np.where(v_r_d < v_c_d, right, 0.0))


def flux_select(v_r, v_c, rho_c, i):
    """Edge fluxes ``(V_{i+1/2}, V_{i-1/2})`` of cell ``i`` from its own sign test.

    ``v_r``, ``v_c`` and ``rho_c = 1/s_c`` are sequences over cells
    ``i-1, i, i+1`` (index ``i`` addresses the middle). The max(0, .)/(.)
    selectors switch a flux off when the vehicles on its upwind side do
    not actually cross the edge.
    """
    vr_m, vr_0 = v_r[i - 1], v_r[i]
    vc_m, vc_0, vc_p = v_c[i - 1], v_c[i], v_c[i + 1]
    rc_m, rc_0, rc_p = rho_c[i - 1], rho_c[i], rho_c[i + 1]
    if vr_0 > vc_0:
        up = (vr_0 - vc_0) * rc_0
        down = float(_gate(vr_m - vc_m)) * (vr_m - vc_m) * rc_m
    elif vr_0 < vc_0:
        up = float(_gate(vc_p - vr_0)) * (vr_0 - vc_p) * rc_p
        down = float(_gate(vc_0 - vr_m)) * (vr_m - vc_0) * rc_0
    else:
        up = down = 0.0
    return float(up), float(down)


def _cellwise_fluxes(v_r, v_c, rho_c):
    """Vectorised :func:`flux_select` over interior cells of ghost-padded arrays."""
    vr_m, vr_0 = v_r[:-2], v_r[1:-1]
    vc_m, vc_0, vc_p = v_c[:-2], v_c[1:-1], v_c[2:]
    rc_m, rc_0, rc_p = rho_c[:-2], rho_c[1:-1], rho_c[2:]
    pos = vr_0 > vc_0
    neg = vr_0 < vc_0
    up = np.where(pos, (vr_0 - vc_0) * rc_0, np.where(neg, _gate(vc_p - vr_0) * (vr_0 - vc_p) * rc_p, 0.0))
    down = np.where(
        pos,
        _gate(vr_m - vc_m) * (vr_m - vc_m) * rc_m,
        np.where(neg, _gate(vc_0 - vr_m) * (vr_m - vc_0) * rc_0, 0.0),
    )
    return up, down


def _pad_cells(a: np.ndarray, ghost_down, boundary: Boundary) -> np.ndarray:
    up = a[0] if boundary is Boundary.PERIODIC else a[-1]
    return np.concatenate([[ghost_down], a, [up]])


def _ghost_state(v_r, v_c, rho_c, law: SpeedLaw, reference: ClassId, boundary: Boundary):
    if boundary is Boundary.FREE_DOWNSTREAM:
        return law.params(reference).v_free, law.params(reference.other).v_free, 0.0
    k = -1 if boundary is Boundary.PERIODIC else 0
    return v_r[k], v_c[k], rho_c[k]


def carried_fluxes(v_r, v_c, rho_c, law, reference, boundary, variant="conservative"):
    """Return ``(up, down)`` edge fluxes for every reference cluster.

    ``up[k]`` leaves cluster ``k`` through its tail, ``down[k]`` enters it
    through its head. With ``variant="conservative"`` both neighbours of an
    edge use the same value, the tail flux of the downstream cluster. With
    ``variant="cellwise"`` each cluster applies its own sign test to both of
    its edges, which matches the conservative form unless neighbouring
    clusters disagree about direction.
    """
    if variant not in VARIANTS:
        raise ValueError(f"variant must be one of {VARIANTS}")
    g_r, g_c, g_rho = _ghost_state(v_r, v_c, rho_c, law, reference, boundary)
    vr = _pad_cells(v_r, g_r, boundary)
    vc = _pad_cells(v_c, g_c, boundary)
    rc = _pad_cells(rho_c, g_rho, boundary)
    if variant == "cellwise":
        return _cellwise_fluxes(vr, vc, rc)
    # edge k sits behind padded cell k
    edge = tail_flux(vr[:-1], vc[:-1], rc[:-1], vc[1:], rc[1:])
    if boundary is Boundary.PERIODIC:
        edge[-1] = edge[0]
    return edge[1:], edge[:-1]


# ---------------------------------------------------------------------------
# steps


def reference_step(field_: CarrierField, dt: float, law: SpeedLaw, boundary=Boundary.ZERO_GRADIENT, lam=None):
    """Godunov update of the reference class; carried state untouched."""
    if lam is None:
        lam = max_wave_speed(law, "lagrangian")
    check_cfl(dt, field_.dn, lam)
    v_r, _ = field_.speeds(law)
    ref = field_.reference
    flux = godunov_fluxes(v_r, ghost_speed(v_r, law.params(ref.class_id).v_free, boundary))
    new = replace(ref, spacing=godunov_update(ref.spacing, flux, dt, ref.dn))
    new = advance_positions(new, flux, dt)
    _check(new, 0.0)
    return replace(field_, reference=new)


def carried_step(
    field_: CarrierField,
    dt: float,
    law: SpeedLaw,
    boundary=Boundary.ZERO_GRADIENT,
    variant="conservative",
    speeds=None,
):
    """Update ``y = s_r/s_c`` of every cluster from the edge fluxes."""
    v_r, v_c = field_.speeds(law) if speeds is None else speeds
    rho_c = field_.y / field_.s_r
    rel = np.max(np.abs(v_r - v_c) / field_.s_r) if len(v_r) else 0.0
    if dt * rel > field_.dn:
        raise CFLViolation(f"CFL violation for the carried class: dt={dt} > {field_.dn / rel:.6g}")
    up, down = carried_fluxes(v_r, v_c, rho_c, law, field_.reference_class_id, boundary, variant)
    y = field_.y - (dt / field_.dn) * (up - down)
    if np.any(y < 0):
        k = int(np.argmin(y))
        if y[k] < -1e-12 * max(1.0, float(np.max(field_.y))):
            raise InvariantViolation(f"carried ratio went negative ({y[k]:.3g}) in cluster {k}")
        y = np.maximum(y, 0.0)
    exchanged = field_.exchanged + dt * (down[0] - up[-1])
    return replace(field_, y=y, exchanged=exchanged)


def lag2_step(field_: CarrierField, dt, law, boundary=Boundary.ZERO_GRADIENT, variant="conservative", lam=None):
    """Full step: reference and carried updates read the same pre-step state."""
    speeds = field_.speeds(law)
    moved = reference_step(field_, dt, law, boundary, lam)
    carried = carried_step(field_, dt, law, boundary, variant, speeds)
    return replace(moved, y=carried.y, exchanged=carried.exchanged)


def density_form_step(rho_r, rho_c, reference: ClassId, dt, dn, law, boundary=Boundary.ZERO_GRADIENT):
    """Advance ``(1/rho_r, rho_c/rho_r)`` with fluxes ``v_r`` and ``rho_c (v_r - v_c)``.

    Same scheme as the spacing form, written in densities. Returns the
    new ``(rho_r, rho_c)``.
    """
    rho_r = np.asarray(rho_r, dtype=float)
    rho_c = np.asarray(rho_c, dtype=float)
    if np.any(~(rho_r > 0)):
        raise ValueError("reference density must be positive everywhere")
    reference = ClassId.parse(reference)
    if reference is ClassId.PTW:
        v_r, v_c = law.speeds(rho_r, rho_c)
    else:
        v_c, v_r = law.speeds(rho_c, rho_r)
    v_r, v_c = np.asarray(v_r), np.asarray(v_c)
    flux_r = godunov_fluxes(v_r, ghost_speed(v_r, law.params(reference).v_free, boundary))
    u1 = godunov_update(1.0 / rho_r, flux_r, dt, dn)
    up, down = carried_fluxes(v_r, v_c, rho_c, law, reference, boundary)
    u2 = rho_c / rho_r - (dt / dn) * (up - down)
    new_r = 1.0 / u1
    return new_r, u2 * new_r


# ---------------------------------------------------------------------------
# runs


@dataclass(frozen=True)
class Lag2Run:
    field: CarrierField
    cfg: ScenarioConfig
    variant: str = "conservative"
    step_count: int = 0

    @property
    def t(self) -> float:
        return self.step_count * self.cfg.dt

    @classmethod
    def start(cls, cfg: ScenarioConfig, reference: ClassId, dn=None, pad=None, variant="conservative") -> "Lag2Run":
        dn = cfg.dn if dn is None else dn
        pad = default_pad(cfg) if pad is None else pad
        prof = padded_profile(cfg.profile, pad, pad)
        return cls(CarrierField.from_profile(ClassId.parse(reference), prof, dn), cfg, variant)

    def step(self) -> "Lag2Run":
        law = self.cfg.law()
        new = lag2_step(self.field, self.cfg.dt, law, self.cfg.boundary, self.variant, max_wave_speed(law, "lagrangian"))
        return replace(self, field=new, step_count=self.step_count + 1)

    def run_to(self, t_end: float, every: int | None = None):
        n = steps_for(t_end - self.t, self.cfg.dt)
        every = every or self.cfg.snapshot_every
        run, snaps = self, [self]
        for i in range(1, n + 1):
            run = run.step()
            if i % every == 0 or i == n:
                snaps.append(run)
        return run, snaps

    def class_density_profiles(self, x):
        return carrier_density_profiles(self.field, x)


def carrier_density_profiles(field_: CarrierField, x):
    """Densities ``(rho_ptw, rho_car)`` at points ``x`` (NaN off the platoon)."""
    ref = field_.reference
    x = np.asarray(x, dtype=float)
    edges_up = ref.edges[::-1]
    idx = np.searchsorted(edges_up, x, side="right") - 1
    inside = (idx >= 0) & (idx < len(ref))
    k = len(ref) - 1 - idx[inside]
    rho_r = np.full(x.shape, np.nan)
    rho_c = np.full(x.shape, np.nan)
    rho_r[inside] = 1.0 / field_.s_r[k]
    rho_c[inside] = field_.y[k] / field_.s_r[k]
    if field_.reference_class_id is ClassId.PTW:
        return rho_r, rho_c
    return rho_c, rho_r
