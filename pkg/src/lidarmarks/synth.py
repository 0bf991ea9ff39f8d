"""Deterministic labeled road-scene generator for a spinning LIDAR.

Rays are cast from the sensor origin over a (layer elevation, column
azimuth) grid and intersected analytically with a flat road strip, an
apron at road level, a curb step with a sidewalk/verge plane beyond it,
optional vehicle boxes, and rough terrain past the modeled area. Every
return samples reflectivity from its surface material's distribution,
which is range invariant; intensity instead decays with inverse-square
range and incidence angle, so the two channels genuinely differ.

All randomness flows through one generator seeded from the config, so
the same config reproduces the same cloud byte for byte.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .cloud import PointCloud
from .errors import ConfigError

LABEL_ROAD = "road"
LABEL_MARKING = "marking"
LABEL_OTHER = "other"

# surface kind codes
_K_NONE = -1
_K_ROAD = 0
_K_APRON = 1
_K_SIDEWALK = 2
_K_FACE = 3
_K_VEHICLE = 4
_K_TERRAIN = 5
_K_ENV = 6
_K_CLUTTER = 7


@dataclass(frozen=True)
class StripeSpec:
    """A painted lane line parallel to the x axis."""

    offset: float
    width: float
    mean: float
    sigma: float
    dashed: bool = False
    period: float = 6.0
    duty: float = 0.5
    phase: float = 0.0


@dataclass(frozen=True)
class VehicleBox:
    """Axis-aligned box sitting on the road surface."""

    cx: float
    cy: float
    length: float
    width: float
    height: float


@dataclass(frozen=True)
class SceneConfig:
    sensor_height: float = 1.9
    n_layers: int = 64
    n_cols: int = 1024
    elev_min_deg: float = -11.25
    elev_max_deg: float = 5.25
    road_half_width: float = 4.0
    road_length: float = 45.0
    stripes: tuple[StripeSpec, ...] = (
        StripeSpec(offset=-3.8, width=0.15, mean=135.0, sigma=8.0),
        StripeSpec(offset=3.8, width=0.15, mean=135.0, sigma=8.0),
        StripeSpec(offset=0.0, width=0.15, mean=135.0, sigma=8.0,
                   dashed=True, period=6.0, duty=0.5),
    )
    asphalt_mean: float = 36.0
    asphalt_sigma: float = 6.0
    apron_mean: float = 40.0
    apron_sigma: float = 7.0
    curb_offset: float = 10.0
    curb_height: float = -0.12
    sidewalk_extent: float = 36.0
    sidewalk_mean: float = 42.0
    sidewalk_sigma: float = 6.0
    face_mean: float = 44.0
    face_sigma: float = 7.0
    vehicles: tuple[VehicleBox, ...] = ()
    vehicle_mean: float = 85.0
    vehicle_sigma: float = 25.0
    terrain_mean: float = 35.0
    terrain_sigma: float = 10.0
    terrain_jitter: tuple[float, float] = (-0.35, 0.65)
    env_mean: float = 55.0
    env_sigma: float = 20.0
    env_range: tuple[float, float] = (6.0, 60.0)
    clutter_count: int = 120
    clutter_box: tuple[float, float, float, float, float, float] = (
        -20.0, 20.0, -15.0, 15.0, -1.2, 0.6)
    clutter_mean: float = 60.0
    clutter_sigma: float = 25.0
    range_noise_sigma: float = 0.02
    dropout_prob: float = 0.02
    intensity_mode: str = "physical"  # physical | mirror
    intensity_r_ref: float = 15.0
    intensity_gain: float = 6.0
    intensity_cos_floor: float = 0.02
    intensity_noise_sigma: float = 0.8
    intensity_max: float = 1023.0
    seed: int = 0
    frame_id: str = "synth"

    def __post_init__(self):
        if self.n_layers <= 0 or self.n_cols <= 0:
            raise ConfigError("n_layers and n_cols must be positive")
        if self.sensor_height <= 0:
            raise ConfigError("sensor_height must be positive")
        if not self.elev_min_deg < self.elev_max_deg:
            raise ConfigError("elevation range must be increasing")
        if self.road_half_width <= 0 or self.road_length <= 0:
            raise ConfigError("road dimensions must be positive")
        if self.curb_offset < self.road_half_width:
            raise ConfigError("curb_offset must not be inside the road")
        if self.curb_height >= self.sensor_height:
            raise ConfigError("curb_height must stay below the sensor")
        for s in self.stripes:
            if s.width <= 0:
                raise ConfigError("stripe widths must be positive")
            if s.dashed and (s.period <= 0 or not 0 < s.duty <= 1):
                raise ConfigError("dashed stripes need period > 0 and duty in (0, 1]")
            if abs(s.offset) + s.width / 2 > self.road_half_width:
                raise ConfigError("stripes must lie inside the road")
        if not 0 <= self.dropout_prob < 1:
            raise ConfigError("dropout_prob must be in [0, 1)")
        if self.intensity_mode not in ("physical", "mirror"):
            raise ConfigError(f"unknown intensity_mode '{self.intensity_mode}'")
        if self.clutter_count < 0:
            raise ConfigError("clutter_count must be non-negative")
        x0, x1, y0, y1, z0, z1 = self.clutter_box
        if not (x0 < x1 and y0 < y1 and z0 < z1):
            raise ConfigError("clutter_box must have positive extent")


@dataclass
class GroundTruth:
    """Per-point truth labels and stripe membership (-1 for no stripe)."""

    labels: np.ndarray
    stripe_ids: np.ndarray


def _painted(stripe: StripeSpec, x: np.ndarray) -> np.ndarray:
    if not stripe.dashed:
        return np.ones_like(x, dtype=bool)
    return np.mod(x - stripe.phase, stripe.period) < stripe.period * stripe.duty


def generate(config: SceneConfig) -> tuple[PointCloud, GroundTruth]:
    """Cast one full revolution and label every return."""
    rng = np.random.default_rng(config.seed)
    nl, nc = config.n_layers, config.n_cols
    H = config.sensor_height
    L = config.road_length
    n = nl * nc

    elev = np.radians(np.linspace(config.elev_min_deg, config.elev_max_deg, nl))
    az = -np.pi + 2.0 * np.pi * np.arange(nc) / nc
    ring = np.repeat(np.arange(nl, dtype=np.int32), nc)
    col = np.tile(np.arange(nc, dtype=np.int32), nl)
    ce = np.cos(elev)[ring.astype(np.int64)]
    se = np.sin(elev)[ring.astype(np.int64)]
    dx = ce * np.cos(az)[col.astype(np.int64)]
    dy = ce * np.sin(az)[col.astype(np.int64)]
    dz = se

    t = np.full(n, np.inf)
    kind = np.full(n, _K_NONE, dtype=np.int8)
    cos_inc = np.ones(n)
    desc = dz < -1e-9

    def hit(mask, t_new, k, cos_new):
        closer = mask & (t_new < t)
        t[closer] = t_new[closer]
        kind[closer] = k
        cos_inc[closer] = cos_new[closer] if isinstance(cos_new, np.ndarray) else cos_new

    # road-level plane (road strip plus apron up to the curb)
    with np.errstate(divide="ignore", invalid="ignore"):
        t_g = np.where(desc, -H / dz, np.inf)
        xg, yg = t_g * dx, t_g * dy
    on_plane = desc & (np.abs(yg) <= config.curb_offset) & (np.abs(xg) <= L)
    hit(on_plane & (np.abs(yg) <= config.road_half_width), t_g, _K_ROAD, np.abs(dz))
    hit(on_plane & (np.abs(yg) > config.road_half_width), t_g, _K_APRON, np.abs(dz))

    # sidewalk / verge plane beyond the curb
    z_side = -H + config.curb_height
    with np.errstate(divide="ignore", invalid="ignore"):
        t_s = np.where(desc, z_side / dz, np.inf)
        xs, ys = t_s * dx, t_s * dy
    side_ok = desc & (np.abs(ys) > config.curb_offset) \
        & (np.abs(ys) <= config.curb_offset + config.sidewalk_extent) & (np.abs(xs) <= L)
    hit(side_ok, t_s, _K_SIDEWALK, np.abs(dz))

    # vertical curb face, only visible when the sidewalk is raised
    if config.curb_height > 0:
        for side in (1.0, -1.0):
            toward = side * dy > 1e-9
            with np.errstate(divide="ignore", invalid="ignore"):
                t_f = np.where(toward, side * config.curb_offset / dy, np.inf)
                zf, xf = t_f * dz, t_f * dx
            face_ok = toward & (zf >= -H) & (zf <= z_side) & (np.abs(xf) <= L)
            hit(face_ok, t_f, _K_FACE, np.abs(dy))

    # vehicle boxes (slab intersection)
    for box in config.vehicles:
        lo = np.array([box.cx - box.length / 2, box.cy - box.width / 2, -H])
        hi = np.array([box.cx + box.length / 2, box.cy + box.width / 2, -H + box.height])
        t_enter = np.full(n, -np.inf)
        t_exit = np.full(n, np.inf)
        enter_axis = np.zeros(n, dtype=np.int8)
        for axis, d_ax in enumerate((dx, dy, dz)):
            with np.errstate(divide="ignore", invalid="ignore"):
                t1 = np.where(np.abs(d_ax) > 1e-12, (lo[axis]) / d_ax, -np.inf)
                t2 = np.where(np.abs(d_ax) > 1e-12, (hi[axis]) / d_ax, np.inf)
            near = np.minimum(t1, t2)
            far = np.maximum(t1, t2)
            grows = near > t_enter
            enter_axis[grows] = axis
            t_enter = np.maximum(t_enter, near)
            t_exit = np.minimum(t_exit, far)
        box_ok = (t_enter > 0.1) & (t_enter < t_exit)
        d_stack = np.stack([dx, dy, dz], axis=1)
        cos_box = np.abs(d_stack[np.arange(n), enter_axis.astype(np.int64)])
        hit(box_ok, np.where(box_ok, t_enter, np.inf), _K_VEHICLE, cos_box)

    # rough terrain for downward rays that missed everything modeled
    open_down = (kind == _K_NONE) & (dz < -0.005)
    n_terr = int(open_down.sum())
    z_terr = -H + rng.uniform(config.terrain_jitter[0], config.terrain_jitter[1], n_terr)
    t_terr = np.full(n, np.inf)
    t_terr[open_down] = z_terr / dz[open_down]
    hit(open_down, t_terr, _K_TERRAIN, np.abs(dz))

    # distant environment for every remaining ray, so only dropout removes slots
    leftover = kind == _K_NONE
    n_env = int(leftover.sum())
    t_env = np.full(n, np.inf)
    t_env[leftover] = rng.uniform(config.env_range[0], config.env_range[1], n_env)
    cos_env = np.ones(n)
    cos_env[leftover] = rng.uniform(0.2, 1.0, n_env)
    hit(leftover, t_env, _K_ENV, cos_env)

    # stripe membership from true geometry
    stripe_id = np.full(n, -1, dtype=np.int32)
    road_rows = kind == _K_ROAD
    for sid, stripe in enumerate(config.stripes):
        in_band = road_rows & (np.abs(yg - stripe.offset) <= stripe.width / 2)
        idx = np.nonzero(in_band & (stripe_id < 0))[0]
        if idx.size:
            painted = _painted(stripe, xg[idx])
            stripe_id[idx[painted]] = sid

    # clutter returns snapped onto the nearest beam, kept when closer
    if config.clutter_count:
        x0, x1, y0, y1, z0, z1 = config.clutter_box
        cx = rng.uniform(x0, x1, config.clutter_count)
        cy = rng.uniform(y0, y1, config.clutter_count)
        cz = rng.uniform(z0, z1, config.clutter_count)
        rr = np.sqrt(cx * cx + cy * cy + cz * cz)
        elev_step = (config.elev_max_deg - config.elev_min_deg) / (nl - 1) if nl > 1 else 1.0
        e_deg = np.degrees(np.arcsin(np.clip(cz / np.maximum(rr, 1e-9), -1, 1)))
        a = np.arctan2(cy, cx)
        r_idx = np.rint((e_deg - config.elev_min_deg) / elev_step).astype(np.int64)
        c_idx = np.rint((a + np.pi) / (2 * np.pi / nc)).astype(np.int64) % nc
        for p in range(config.clutter_count):
            if not 0 <= r_idx[p] < nl:
                continue
            flat = r_idx[p] * nc + c_idx[p]
            if rr[p] > 0.5 and rr[p] < t[flat]:
                t[flat] = rr[p]
                kind[flat] = _K_CLUTTER
                cos_inc[flat] = 1.0
                stripe_id[flat] = -1

    # dropout removes whole slots
    keep = rng.uniform(size=n) >= config.dropout_prob

    # range noise moves returns along their ray
    r = t + rng.standard_normal(n) * config.range_noise_sigma
    np.clip(r, 1e-3, None, out=r)
    if config.range_noise_sigma == 0:
        r = t.copy()

    px, py, pz = r * dx, r * dy, r * dz

    # reflectivity by material, range invariant
    mat_mean = np.empty(n)
    mat_sigma = np.empty(n)
    material = {
        _K_ROAD: (config.asphalt_mean, config.asphalt_sigma),
        _K_APRON: (config.apron_mean, config.apron_sigma),
        _K_SIDEWALK: (config.sidewalk_mean, config.sidewalk_sigma),
        _K_FACE: (config.face_mean, config.face_sigma),
        _K_VEHICLE: (config.vehicle_mean, config.vehicle_sigma),
        _K_TERRAIN: (config.terrain_mean, config.terrain_sigma),
        _K_ENV: (config.env_mean, config.env_sigma),
        _K_CLUTTER: (config.clutter_mean, config.clutter_sigma),
    }
    for code, (mu, sg) in material.items():
        rows = kind == code
        mat_mean[rows] = mu
        mat_sigma[rows] = sg
    for sid, stripe in enumerate(config.stripes):
        rows = stripe_id == sid
        mat_mean[rows] = stripe.mean
        mat_sigma[rows] = stripe.sigma
    refl = np.clip(np.rint(mat_mean + mat_sigma * rng.standard_normal(n)), 0, 255)

    # intensity: inverse-square range and incidence attenuation, or a mirror
    if config.intensity_mode == "mirror":
        inten = refl.astype(np.float32)
    else:
        factor = (config.intensity_r_ref / np.maximum(r, 1e-3)) ** 2
        inten = refl * factor * np.maximum(cos_inc, config.intensity_cos_floor) \
            * config.intensity_gain
        inten = inten + rng.standard_normal(n) * config.intensity_noise_sigma
        inten = np.clip(inten, 0.0, config.intensity_max).astype(np.float32)

    labels = np.full(n, LABEL_OTHER, dtype="U7")
    labels[kind == _K_ROAD] = LABEL_ROAD
    labels[stripe_id >= 0] = LABEL_MARKING

    cloud = PointCloud(
        x=px[keep], y=py[keep], z=pz[keep], r=r[keep],
        intensity=inten[keep], reflectivity=refl[keep],
        ring=ring[keep], col=col[keep],
        valid=np.ones(int(keep.sum()), dtype=bool),
        n_layers=nl, n_cols=nc, frame_id=config.frame_id,
    )
    truth = GroundTruth(labels[keep], stripe_id[keep])
    return cloud, truth


def test_track_profile(frame_seed: int, frame_index: int = 0,
                       n_cols: int = 1024) -> SceneConfig:
    """Two-lane track: solid edge lines, dashed center line, curbs both sides."""
    rng = np.random.default_rng([frame_seed, 1])
    phase = float(rng.uniform(0.0, 6.0))
    stripes = (
        StripeSpec(offset=-3.8, width=0.15, mean=135.0, sigma=8.0),
        StripeSpec(offset=3.8, width=0.15, mean=135.0, sigma=8.0),
        StripeSpec(offset=0.0, width=0.15, mean=135.0, sigma=8.0,
                   dashed=True, period=6.0, duty=0.5, phase=phase),
    )
    return SceneConfig(
        n_cols=n_cols, stripes=stripes, seed=frame_seed,
        frame_id=f"test_track_{frame_index:04d}",
    )


def highway_profile(frame_seed: int, frame_index: int = 0,
                    n_cols: int = 1024) -> SceneConfig:
    """Motorway: worn markings, sparse center dashes, vehicles, sloped verge.

    The asphalt extends across the shoulder on one plane; past the edge
    the terrain drops away, so there is no raised side surface competing
    with the road.
    """
    rng = np.random.default_rng([frame_seed, 1])
    phase_c = float(rng.uniform(0.0, 12.0))
    phase_l = float(rng.uniform(0.0, 9.0))
    phase_r = float(rng.uniform(0.0, 9.0))
    stripes = (
        StripeSpec(offset=-5.4, width=0.25, mean=120.0, sigma=13.0),
        StripeSpec(offset=5.4, width=0.25, mean=120.0, sigma=13.0),
        StripeSpec(offset=0.0, width=0.15, mean=116.0, sigma=15.0,
                   dashed=True, period=12.0, duty=0.25, phase=phase_c),
        StripeSpec(offset=2.7, width=0.15, mean=116.0, sigma=15.0,
                   dashed=True, period=9.0, duty=0.3, phase=phase_l),
        StripeSpec(offset=-2.7, width=0.15, mean=116.0, sigma=15.0,
                   dashed=True, period=9.0, duty=0.3, phase=phase_r),
    )
    n_veh = int(rng.integers(2, 5))
    vehicles = []
    for _ in range(n_veh):
        lane = float(rng.choice([-4.05, -1.35, 1.35, 4.05]))
        sign = float(rng.choice([-1.0, 1.0]))
        vx = sign * float(rng.uniform(14.0, 40.0))
        vehicles.append(VehicleBox(cx=vx, cy=lane, length=4.4, width=1.8, height=1.5))
    # the paved shoulder reaches past the nearest ground ring so the
    # front and back road arcs stay one connected surface; beyond it the
    # embankment drops far enough to never enter the height band
    return SceneConfig(
        n_cols=n_cols,
        road_half_width=7.0,
        stripes=stripes,
        asphalt_mean=36.0, asphalt_sigma=7.0,
        apron_mean=37.0, apron_sigma=7.0,
        curb_offset=9.8, curb_height=0.0, sidewalk_extent=0.0,
        terrain_jitter=(-1.0, -0.6),
        vehicles=tuple(vehicles),
        dropout_prob=0.03,
        seed=frame_seed,
        frame_id=f"highway_{frame_index:04d}",
    )


PROFILES = {
    "test_track": test_track_profile,
    "highway": highway_profile,
}


def scene_suite(profile: str, n_frames: int, seed: int, n_cols: int = 1024):
    """Yield (cloud, truth) frames with per-frame derived seeds."""
    if profile not in PROFILES:
        raise ConfigError(f"unknown profile '{profile}'")
    if n_frames < 1:
        raise ConfigError("n_frames must be at least 1")
    build = PROFILES[profile]
    children = np.random.SeedSequence(seed).spawn(n_frames)
    for f in range(n_frames):
        frame_seed = int(children[f].generate_state(1)[0])
        config = build(frame_seed, f, n_cols=n_cols)
        yield generate(config)
