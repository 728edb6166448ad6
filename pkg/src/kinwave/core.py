"""Domain types, scenario configuration and cluster fields shared by all solvers.

Units are SI throughout: metres, seconds, vehicles per metre.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

INF = math.inf


class ClassId(enum.IntEnum):
    PTW = 1
    CAR = 2

    @property
    def other(self) -> "ClassId":
        return ClassId.CAR if self is ClassId.PTW else ClassId.PTW

    @classmethod
    def parse(cls, text: str | int | "ClassId") -> "ClassId":
        if isinstance(text, ClassId):
            return text
        if isinstance(text, int):
            return cls(text)
        key = text.strip().upper()
        if key in ("1", "PTW"):
            return cls.PTW
        if key in ("2", "CAR"):
            return cls.CAR
        raise ValueError(f"unknown vehicle class {text!r}")


class Boundary(enum.Enum):
    ZERO_GRADIENT = "zero_gradient"
    FREE_DOWNSTREAM = "free_downstream"
    # closed ring; only used by the conservation test harness
    PERIODIC = "periodic"


class KinwaveError(Exception):
    """Base class for solver errors."""


class BeyondJamError(KinwaveError, ValueError):
    """Occupancy exceeds the jam bound of the speed law."""


class CFLViolation(KinwaveError):
    pass


class InvariantViolation(KinwaveError):
    """A state invariant (positivity, ordering) broke during a step."""


@dataclass(frozen=True)
class VehicleClassParams:
    class_id: ClassId
    v_free: float
    r_crit: float
    eff_length: float

    def __post_init__(self):
        if not self.v_free > 0:
            raise ValueError(f"v_free must be positive, got {self.v_free}")
        if not self.r_crit >= 0:
            raise ValueError(f"r_crit must be non-negative, got {self.r_crit}")
        if not self.eff_length > 0:
            raise ValueError(f"eff_length must be positive, got {self.eff_length}")


# 2.0 x 0.8 m PTW and 4.0 x 1.8 m car footprints spread over a 3.5 m lane
DEFAULT_PTW = VehicleClassParams(ClassId.PTW, v_free=20.0, r_crit=1.0, eff_length=2.0 * 0.8 / 3.5)
DEFAULT_CAR = VehicleClassParams(ClassId.CAR, v_free=15.0, r_crit=1.5, eff_length=4.0 * 1.8 / 3.5)


@dataclass(frozen=True)
class Segment:
    x_start: float
    x_end: float
    rho_ptw: float
    rho_car: float

    def rho(self, class_id: ClassId) -> float:
        return self.rho_ptw if ClassId(class_id) is ClassId.PTW else self.rho_car


@dataclass(frozen=True)
class TrafficLight:
    position: float
    red_until: float

    def is_red(self, t: float) -> bool:
        return t < self.red_until


@dataclass(frozen=True)
class ScenarioConfig:
    """Everything needed to reproduce one run.

    ``profile`` is a piecewise-constant initial density given as segments
    that must tile ``[0, road_length]``. ``num_sublanes`` and
    ``traffic_light`` only matter for the follow-the-leader mode.
    """

    dt: float = 0.125
    dx: float = 10.0
    dn: float = 7.5
    road_length: float = 3000.0
    sim_time: float = 45.0
    profile: tuple[Segment, ...] = (
        Segment(0.0, 1400.0, 0.15, 0.15),
        Segment(1400.0, 3000.0, 0.3, 0.3),
    )
    boundary: Boundary = Boundary.ZERO_GRADIENT
    ptw: VehicleClassParams = DEFAULT_PTW
    car: VehicleClassParams = DEFAULT_CAR
    speed_law: str = "freespace"
    epsilon_space: float = 1e-9
    num_sublanes: int = 2
    traffic_light: TrafficLight | None = None
    output_time: float = 40.0
    snapshot_every: int = 8

    def class_params(self, class_id: ClassId) -> VehicleClassParams:
        return self.ptw if ClassId(class_id) is ClassId.PTW else self.car

    @property
    def n_steps(self) -> int:
        return steps_for(self.sim_time, self.dt)

    def with_speeds(self, v_ptw: float, v_car: float) -> "ScenarioConfig":
        return replace(self, ptw=replace(self.ptw, v_free=v_ptw), car=replace(self.car, v_free=v_car))

    def law(self):
        from .speedlaw import make_law

        return make_law(self.speed_law, self.ptw, self.car, self.epsilon_space)

    def density_at(self, x: np.ndarray, class_id: ClassId) -> np.ndarray:
        """Initial density of one class at points ``x`` (0 outside the road)."""
        x = np.asarray(x, dtype=float)
        out = np.zeros_like(x)
        for seg in self.profile:
            mask = (x >= seg.x_start) & (x < seg.x_end)
            out[mask] = seg.rho(class_id)
        return out


def steps_for(duration: float, dt: float) -> int:
    """Number of whole steps of size ``dt`` in ``duration``.

    Raises if ``duration`` is not a multiple of ``dt`` to within rounding.
    """
    n = round(duration / dt)
    if abs(n * dt - duration) > 1e-9 * max(1.0, abs(duration)):
        raise ValueError(f"duration {duration} is not a multiple of dt={dt}")
    return int(n)


# ---------------------------------------------------------------------------
# validation


@dataclass
class ValidationReport:
    failures: list[str] = field(default_factory=list)
    cfl_bound: float | None = None

    @property
    def ok(self) -> bool:
        return not self.failures

    def __bool__(self) -> bool:
        return self.ok

    def __str__(self) -> str:
        if self.ok:
            return "pass"
        return "fail: " + "; ".join(self.failures)


def validate_scenario(cfg: ScenarioConfig, solver: str = "lagrangian") -> ValidationReport:
    """Check a scenario's invariants, including a CFL pre-check.

    ``solver`` selects which CFL bound applies: ``"lagrangian"`` checks
    ``dt <= dn / lambda``, ``"euler"`` checks ``dt <= dx / lambda``.
    """
    report = ValidationReport()
    fail = report.failures.append
    for name in ("dt", "dx", "dn", "road_length", "sim_time"):
        value = getattr(cfg, name)
        if not value > 0:
            label = {"dt": "time step", "dx": "space step", "dn": "cluster size"}.get(name, name)
            fail(f"nonpositive {label} ({name}={value})")

    if not cfg.profile:
        fail("empty initial density profile")
    else:
        segs = sorted(cfg.profile, key=lambda s: s.x_start)
        edge = 0.0
        for seg in segs:
            if seg.x_end <= seg.x_start:
                fail(f"empty segment [{seg.x_start}, {seg.x_end})")
            if seg.x_start != edge:
                kind = "overlap" if seg.x_start < edge else "gap"
                fail(f"profile {kind} at x={seg.x_start}")
            if seg.rho_ptw < 0 or seg.rho_car < 0:
                fail(f"negative density in segment starting at x={seg.x_start}")
            occ = seg.rho_ptw * cfg.ptw.eff_length + seg.rho_car * cfg.car.eff_length
            if occ > 1.0:
                fail(f"occupancy {occ:.4g} beyond jam in segment starting at x={seg.x_start}")
            edge = seg.x_end
        if edge != cfg.road_length:
            fail(f"profile ends at {edge}, road_length is {cfg.road_length}")

    if cfg.num_sublanes < 1:
        fail("num_sublanes must be at least 1")
    if cfg.traffic_light is not None and not 0 <= cfg.traffic_light.position <= cfg.road_length:
        fail("traffic light outside the road")
    if cfg.sim_time > 0 and cfg.dt > 0:
        try:
            steps_for(cfg.sim_time, cfg.dt)
        except ValueError as exc:
            fail(str(exc))

    if report.ok:
        from .speedlaw import max_wave_speed

        law = cfg.law()
        coords = "euler" if solver == "euler" else "lagrangian"
        lam = max_wave_speed(law, coords)
        step = cfg.dx if coords == "euler" else cfg.dn
        report.cfl_bound = step / lam if lam > 0 else INF
        if cfg.dt > report.cfl_bound:
            fail(f"CFL violation: dt={cfg.dt} > {report.cfl_bound:.6g} ({'dx' if coords == 'euler' else 'dn'}/lambda_max)")
    return report


# ---------------------------------------------------------------------------
# Lagrangian clusters


@dataclass(frozen=True)
class Cluster:
    """One group of ``dn`` same-class vehicles.

    ``position`` is the downstream (head) edge; the group occupies
    ``[tail, position)`` with ``position - tail == dn * spacing``.
    """

    index: int
    dn: float
    spacing: float
    position: float
    tail: float


@dataclass(frozen=True)
class ClusterField:
    """Ordered clusters of one class in Lagrangian (n, t) coordinates.

    ``edges`` holds the ``N + 1`` cluster boundary trajectories, strictly
    decreasing: cluster ``k`` spans ``[edges[k + 1], edges[k])``. The tail
    edge ``edges[k + 1]`` moves with the speed of cluster ``k``; the leading
    edge ``edges[0]`` moves with the downstream boundary speed.
    """

    class_id: ClassId
    dn: float
    edges: np.ndarray
    spacing: np.ndarray
    first_label: float = 0.0

    def __post_init__(self):
        if len(self.edges) != len(self.spacing) + 1:
            raise ValueError("edges must have one more entry than spacing")

    def __len__(self) -> int:
        return len(self.spacing)

    @property
    def total_vehicles(self) -> float:
        return self.dn * len(self.spacing)

    @property
    def labels(self) -> np.ndarray:
        """Label n of each cluster's leading boundary."""
        return self.first_label + self.dn * np.arange(len(self.spacing))

    def cluster(self, k: int) -> Cluster:
        return Cluster(
            index=k,
            dn=self.dn,
            spacing=float(self.spacing[k]),
            position=float(self.edges[k]),
            tail=float(self.edges[k + 1]),
        )

    def __iter__(self):
        return (self.cluster(k) for k in range(len(self)))

    def density(self) -> np.ndarray:
        return 1.0 / self.spacing

    @classmethod
    def from_profile(
        cls,
        class_id: ClassId,
        segments: Sequence[Segment],
        dn: float,
    ) -> "ClusterField":
        """Group the vehicles of a piecewise-constant profile into clusters.

        Cluster boundaries sit where the cumulative count from the downstream
        end reaches multiples of ``dn``; a partial tail cluster is dropped.
        """
        segs = sorted(segments, key=lambda s: s.x_start, reverse=True)
        # knots of the cumulative count N(x), walking upstream
        xs = [segs[0].x_end]
        counts = [0.0]
        for seg in segs:
            xs.append(seg.x_start)
            counts.append(counts[-1] + seg.rho(class_id) * (seg.x_end - seg.x_start))
        xs_a = np.array(xs)
        counts_a = np.array(counts)
        n_clusters = int(math.floor(counts_a[-1] / dn + 1e-9))
        if n_clusters < 1:
            raise ValueError(f"profile holds fewer than dn={dn} vehicles of class {class_id.name}")
        targets = dn * np.arange(n_clusters + 1)
        # N(x) is non-decreasing along xs (walking upstream); invert it
        edges = np.interp(targets, counts_a, xs_a)
        # a zero-density stretch makes N flat; interp lands on its downstream end
        spacing = (edges[:-1] - edges[1:]) / dn
        return cls(class_id, float(dn), edges, spacing)

    @classmethod
    def uniform(cls, class_id: ClassId, head: float, spacing: float, n_clusters: int, dn: float) -> "ClusterField":
        edges = head - dn * spacing * np.arange(n_clusters + 1)
        return cls(class_id, float(dn), edges, np.full(n_clusters, float(spacing)))


def cluster_density_profile(field_: ClusterField, x: np.ndarray) -> np.ndarray:
    """Density ``1/s`` of the cluster covering each point, NaN outside the platoon."""
    x = np.asarray(x, dtype=float)
    edges_up = field_.edges[::-1]  # increasing
    idx = np.searchsorted(edges_up, x, side="right") - 1
    out = np.full(x.shape, np.nan)
    inside = (idx >= 0) & (idx < len(field_))
    # edges_up[j] is the tail of cluster N-1-j
    k = len(field_) - 1 - idx[inside]
    out[inside] = 1.0 / field_.spacing[k]
    return out


def clusters_from_density(field_: ClusterField, rho: np.ndarray) -> ClusterField:
    """Inverse of taking ``1/s``: rebuild spacings from per-cluster densities."""
    return replace(field_, spacing=1.0 / np.asarray(rho, dtype=float))


# ---------------------------------------------------------------------------
# scenario files

_FLOAT_KEYS = {
    "dt", "dx", "dn", "road_length", "sim_time", "epsilon_space", "output_time",
}
_CLASS_KEYS = {"v_free", "r_crit", "eff_length"}


def _parse_bool_or_none(value: str) -> str | None:
    return None if value.lower() in ("none", "off", "") else value


def parse_scenario(text: str, base: ScenarioConfig | None = None) -> ScenarioConfig:
    """Parse the flat ``key = value`` scenario format.

    One key per line, ``#`` starts a comment. Segments are given as repeated
    ``segment = x_start x_end rho_ptw rho_car`` lines; any segment line
    replaces the base profile entirely. Decimal literals go through
    ``float()``, which rounds correctly, so parsing is bit-exact.
    """
    cfg = base or ScenarioConfig()
    updates: dict = {}
    ptw: dict = {}
    car: dict = {}
    segments: list[Segment] = []
    light: dict = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"line {lineno}: expected 'key = value', got {raw!r}")
        key, value = (part.strip() for part in line.split("=", 1))
        try:
            if key in _FLOAT_KEYS:
                updates[key] = float(value)
            elif key in ("num_sublanes", "snapshot_every"):
                updates[key] = int(value)
            elif key == "boundary":
                updates[key] = Boundary(value.lower())
            elif key == "speed_law":
                if value not in ("freespace", "greenshields"):
                    raise ValueError(f"unknown speed law {value!r}")
                updates[key] = value
            elif key == "segment":
                parts = value.split()
                if len(parts) != 4:
                    raise ValueError("segment needs x_start x_end rho_ptw rho_car")
                segments.append(Segment(*(float(p) for p in parts)))
            elif key in ("light_position", "light_red_until"):
                if _parse_bool_or_none(value) is not None:
                    light[key] = float(value)
            elif "_" in key and key.rsplit("_", 1)[0] in _CLASS_KEYS and key.rsplit("_", 1)[1] in ("ptw", "car"):
                name, cls_name = key.rsplit("_", 1)
                (ptw if cls_name == "ptw" else car)[name] = float(value)
            else:
                raise ValueError(f"unknown key {key!r}")
        except ValueError as exc:
            raise ValueError(f"line {lineno}: {exc}") from None
    if segments:
        updates["profile"] = tuple(segments)
    if ptw:
        updates["ptw"] = replace(cfg.ptw, **ptw)
    if car:
        updates["car"] = replace(cfg.car, **car)
    if light:
        if set(light) != {"light_position", "light_red_until"}:
            raise ValueError("light_position and light_red_until must be given together")
        updates["traffic_light"] = TrafficLight(light["light_position"], light["light_red_until"])
    return replace(cfg, **updates)


def load_scenario(path: str | Path) -> ScenarioConfig:
    return parse_scenario(Path(path).read_text())


def format_scenario(cfg: ScenarioConfig) -> str:
    """Serialise a config; ``parse_scenario(format_scenario(c)) == c``."""
    lines = [
        f"dt = {cfg.dt!r}",
        f"dx = {cfg.dx!r}",
        f"dn = {cfg.dn!r}",
        f"road_length = {cfg.road_length!r}",
        f"sim_time = {cfg.sim_time!r}",
        f"output_time = {cfg.output_time!r}",
        f"snapshot_every = {cfg.snapshot_every}",
        f"boundary = {cfg.boundary.value}",
        f"speed_law = {cfg.speed_law}",
        f"epsilon_space = {cfg.epsilon_space!r}",
        f"num_sublanes = {cfg.num_sublanes}",
    ]
    for params, tag in ((cfg.ptw, "ptw"), (cfg.car, "car")):
        for name in ("v_free", "r_crit", "eff_length"):
            lines.append(f"{name}_{tag} = {getattr(params, name)!r}")
    for seg in cfg.profile:
        lines.append(f"segment = {seg.x_start!r} {seg.x_end!r} {seg.rho_ptw!r} {seg.rho_car!r}")
    if cfg.traffic_light is not None:
        lines.append(f"light_position = {cfg.traffic_light.position!r}")
        lines.append(f"light_red_until = {cfg.traffic_light.red_until!r}")
    return "\n".join(lines) + "\n"


def padded_profile(segments: Iterable[Segment], upstream: float, downstream: float) -> tuple[Segment, ...]:
    """Extend the first and last segments outwards by the given lengths.

    Lagrangian platoons have ends; padding keeps those ends off the road the
    comparison looks at, which plays the role of zero-gradient boundaries.
    """
    segs = sorted(segments, key=lambda s: s.x_start)
    first, last = segs[0], segs[-1]
    if len(segs) == 1:
        return (replace(first, x_start=first.x_start - upstream, x_end=first.x_end + downstream),)
    return (
        (replace(first, x_start=first.x_start - upstream),)
        + tuple(segs[1:-1])
        + (replace(last, x_end=last.x_end + downstream),)
    )
