"""Two-class fundamental diagrams.

Speeds are functions of both class densities (or, equivalently, spacings;
``rho = 1/s``). Every law works elementwise on numpy arrays.
"""

from __future__ import annotations

import functools
from dataclasses import dataclass

import numpy as np

from .core import INF, BeyondJamError, ClassId, VehicleClassParams

# occupancy this far above 1 is treated as rounding, not as a jam violation
_OCC_TOL = 1e-12


class SpeedLaw:
    """Base class; subclasses implement :meth:`speeds`."""

    ptw: VehicleClassParams
    car: VehicleClassParams

    def params(self, class_id: ClassId) -> VehicleClassParams:
        return self.ptw if ClassId(class_id) is ClassId.PTW else self.car

    def occupancy(self, rho_ptw, rho_car):
        return np.asarray(rho_ptw) * self.ptw.eff_length + np.asarray(rho_car) * self.car.eff_length

    def check_domain(self, rho_ptw, rho_car, strict=True):
        rho_ptw = np.asarray(rho_ptw, dtype=float)
        rho_car = np.asarray(rho_car, dtype=float)
        if np.any(rho_ptw < 0) or np.any(rho_car < 0):
            raise ValueError("densities must be non-negative")
        if strict:
            occ = self.occupancy(rho_ptw, rho_car)
            if np.any(occ > 1.0 + _OCC_TOL):
                raise BeyondJamError(f"beyond jam: occupancy {float(np.max(occ)):.6g} > 1")
        return rho_ptw, rho_car

    def speeds(self, rho_ptw, rho_car, strict=True):
        """Return ``(v_ptw, v_car)``."""
        raise NotImplementedError

    def speed(self, class_id, rho_ptw, rho_car, strict=True):
        v_ptw, v_car = self.speeds(rho_ptw, rho_car, strict=strict)
        return v_ptw if ClassId(class_id) is ClassId.PTW else v_car

    def speeds_from_spacing(self, s_ptw, s_car, strict=True):
        s_ptw = np.asarray(s_ptw, dtype=float)
        s_car = np.asarray(s_car, dtype=float)
        if np.any(~(s_ptw > 0)) or np.any(~(s_car > 0)):
            raise ValueError("spacings must be positive")
        # 1/inf == 0 gives the empty-class convention for free
        return self.speeds(1.0 / s_ptw, 1.0 / s_car, strict=strict)

    def speed_from_spacing(self, class_id, s_ptw, s_car, strict=True):
        v_ptw, v_car = self.speeds_from_spacing(s_ptw, s_car, strict=strict)
        return v_ptw if ClassId(class_id) is ClassId.PTW else v_car

    def describe(self) -> dict[str, object]:
        out: dict[str, object] = {"speed_law": self.name}
        for p, tag in ((self.ptw, "ptw"), (self.car, "car")):
            out[f"v_free_{tag}"] = p.v_free
            out[f"r_crit_{tag}"] = p.r_crit
            out[f"eff_length_{tag}"] = p.eff_length
        return out


@dataclass(frozen=True)
class FreeSpaceLaw(SpeedLaw):
    """Speed from the probability that the free space ahead exceeds a
    class-specific critical gap.

    Free space is taken as exponentially distributed with mean
    ``l = (1 - rho_1 L_1 - rho_2 L_2) / (rho_1 + rho_2)``, so
    ``P(gap > r_i) = exp(-r_i / l)`` and ``v_i = v_i^f exp(-r_i / l)``.
    """

    ptw: VehicleClassParams
    car: VehicleClassParams
    epsilon_space: float = 1e-9

    name = "freespace"

    def __post_init__(self):
        if not self.epsilon_space > 0:
            raise ValueError("epsilon_space must be positive")

    def mean_free_space(self, rho_ptw, rho_car, strict=True):
        rho_ptw, rho_car = self.check_domain(rho_ptw, rho_car, strict=strict)
        total = rho_ptw + rho_car
        free = 1.0 - self.occupancy(rho_ptw, rho_car)
        with np.errstate(divide="ignore", invalid="ignore"):
            l_mean = np.where(total > 0, free / np.where(total > 0, total, 1.0), INF)
        l_mean = np.maximum(l_mean, self.epsilon_space)
        return l_mean if l_mean.ndim else float(l_mean)

    def speeds(self, rho_ptw, rho_car, strict=True):
        l_mean = np.asarray(self.mean_free_space(rho_ptw, rho_car, strict=strict))
        v_ptw = self.ptw.v_free * np.exp(-self.ptw.r_crit / l_mean)
        v_car = self.car.v_free * np.exp(-self.car.r_crit / l_mean)
        if v_ptw.ndim == 0:
            return float(v_ptw), float(v_car)
        return v_ptw, v_car


@dataclass(frozen=True)
class GreenshieldsLaw(SpeedLaw):
    """Linear law ``v_i = v_i^f (1 - rho_1 L_1 - rho_2 L_2)``.

    Kept for cross-validation: its single-class Riemann problems have
    closed-form solutions.
    """

    ptw: VehicleClassParams
    car: VehicleClassParams

    name = "greenshields"

    def speeds(self, rho_ptw, rho_car, strict=True):
        rho_ptw, rho_car = self.check_domain(rho_ptw, rho_car, strict=strict)
        free = np.maximum(1.0 - self.occupancy(rho_ptw, rho_car), 0.0)
        v_ptw = self.ptw.v_free * free
        v_car = self.car.v_free * free
        if v_ptw.ndim == 0:
            return float(v_ptw), float(v_car)
        return v_ptw, v_car


def make_law(name: str, ptw: VehicleClassParams, car: VehicleClassParams, epsilon_space: float = 1e-9) -> SpeedLaw:
    if name == "freespace":
        return FreeSpaceLaw(ptw, car, epsilon_space)
    if name == "greenshields":
        return GreenshieldsLaw(ptw, car)
    raise ValueError(f"unknown speed law {name!r}")


@functools.lru_cache(maxsize=64)
def max_wave_speed(
    law: SpeedLaw,
    coords: str = "lagrangian",
    box: tuple[tuple[float, float], tuple[float, float]] | None = None,
    n_samples: int = 201,
    safety: float = 1.1,
) -> float:
    """Sampled bound on the characteristic speed, for the CFL condition.

    The density box (default: everything up to jam) is sampled on an
    ``n_samples``-per-axis grid and the largest finite-difference slope
    between neighbouring admissible samples along each class's own axis
    is taken.

    * ``coords="euler"``: slope of the flow ``|dq_i / drho_i|`` in m/s;
      stable when ``dt <= dx / lambda``.
    * ``coords="lagrangian"``: slope of the speed-spacing law
      ``|dV_i / ds_i|`` in veh/s; stable when ``dt <= dn / lambda``.

    A box with a single point has no neighbouring pairs and returns 0.
    """
    if coords not in ("euler", "lagrangian"):
        raise ValueError(f"coords must be 'euler' or 'lagrangian', got {coords!r}")
    if box is None:
        box = ((0.0, 1.0 / law.ptw.eff_length), (0.0, 1.0 / law.car.eff_length))
    axes = []
    for lo, hi in box:
        axes.append(np.array([lo]) if hi <= lo else np.linspace(lo, hi, n_samples))
    r1, r2 = np.meshgrid(axes[0], axes[1], indexing="ij")
    admissible = law.occupancy(r1, r2) <= 1.0 + _OCC_TOL
    v1, v2 = law.speeds(r1, r2, strict=False)

    best = 0.0
    for axis, rho, v in ((0, r1, v1), (1, r2, v2)):
        if rho.shape[axis] < 2:
            continue
        sl_a = [slice(None), slice(None)]
        sl_b = [slice(None), slice(None)]
        sl_a[axis] = slice(None, -1)
        sl_b[axis] = slice(1, None)
        a, b = tuple(sl_a), tuple(sl_b)
        ok = admissible[a] & admissible[b]
        if coords == "euler":
            num = rho[b] * v[b] - rho[a] * v[a]
            den = rho[b] - rho[a]
        else:
            ok &= rho[a] > 0
            with np.errstate(divide="ignore"):
                num = v[b] - v[a]
                den = 1.0 / rho[b] - 1.0 / np.where(rho[a] > 0, rho[a], 1.0)
        if np.any(ok):
            slopes = np.abs(num[ok] / den[ok])
            best = max(best, float(np.max(slopes)))
    return safety * best


def check_cfl(dt: float, step: float, lam: float, what: str = "dn") -> None:
    from .core import CFLViolation

    if lam > 0 and dt > step / lam:
        raise CFLViolation(f"CFL violation: dt={dt} > {what}/lambda_max = {step / lam:.6g}")
