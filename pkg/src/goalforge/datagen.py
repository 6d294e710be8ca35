"""Procedural generation of the domino, rolling-ball and sway families.

Every sample owns an independent random stream seeded by a stable 64-bit hash
of ``(base_seed, family, index)``, so a dataset is a pure function of its seed,
split and config no matter how many workers produce it.
"""

import hashlib
import json
import math
import os
import shutil
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path
from typing import Dict, List, Optional, Tuple

import numpy as np
from PIL import Image

from . import geometry as gm
from .control import ControlTensor, EncodingCfg, MaskPolicy, assemble, encode_force_channel, encode_goal_channel, encode_mass_channel, write_tensor
from .errors import InvalidScene, PlacementFailure
from .physics import (
    Ball,
    Domino,
    ForceSpec,
    Obstacle,
    Scene,
    SwayOscillator,
    chain_outcome,
    domino_neighbor,
    from_normalized,
    min_impulse_for_collision,
    simulate,
    to_normalized,
    topple_threshold,
    _circle_toi,
)
from .planner import GoalForceSpec, aim_window, is_path_blocked
from .render import COLOR_NAMES, render_frames

SCHEMA_VERSION = 1
FAMILIES = ("dominos", "balls-collide", "balls-miss", "sway")
FAMILY_DIR = {"dominos": "dominos", "balls-collide": "balls", "balls-miss": "balls", "sway": "sway"}
BALL_COLORS = [c for c in COLOR_NAMES if c not in ("gray", "green")]


@dataclass(frozen=True)
class DomainCfg:
    resolution: Tuple[int, int] = (240, 416)
    frames: int = 81
    fps: int = 16
    camera_mode: str = "orthographic"
    camera_jitter: float = 0.05  # fraction of the view window
    max_attempts: int = 1000
    # dominos
    domino_count: Tuple[int, int] = (3, 10)
    domino_height: float = 0.5
    domino_width: float = 0.25
    domino_thickness: float = 0.08
    domino_mass: Tuple[float, float] = (0.05, 0.2)
    domino_spacing: Tuple[float, float] = (0.4, 0.75)  # fraction of height
    domino_force_span: float = 20.0  # max push as a multiple of the topple threshold
    domino_goal_range: Tuple[float, float] = (0.0, 4.0)
    domino_view: float = 4.0  # view window height, meters
    # balls
    collide_count: Tuple[int, int] = (3, 9)
    miss_count: Tuple[int, int] = (3, 5)
    ball_radius: float = 0.2
    ball_mass: Tuple[float, float] = (1.0, 4.0)
    collision_time: Tuple[float, float] = (2.5, 4.5)
    overscale: Tuple[float, float] = (1.2, 1.6)
    ball_force_range: Tuple[float, float] = (0.0, 20.0)
    ball_goal_range: Tuple[float, float] = (0.0, 8.0)
    ball_view: float = 6.0
    ball_separation: float = 0.05
    # sway
    sway_frequency: Tuple[float, float] = (0.8, 1.5)  # Hz
    sway_damping: Tuple[float, float] = (0.05, 0.2)
    sway_mass: Tuple[float, float] = (0.05, 0.2)
    sway_stem: Tuple[float, float] = (0.4, 0.7)
    sway_force_range: Tuple[float, float] = (0.005, 0.05)
    sway_view: float = 2.0
    encoding: EncodingCfg = field(default_factory=EncodingCfg)
    policy: MaskPolicy = field(default_factory=MaskPolicy)

    @property
    def duration(self) -> float:
        return self.frames / self.fps

    def to_dict(self):
        return asdict(self)


@dataclass(frozen=True)
class SplitSpec:
    dominos: int = 3000
    balls_collide: int = 4500
    balls_miss: int = 1500
    sway: int = 3000
    straight_ratio: float = 0.5

    def __post_init__(self):
        if min(self.dominos, self.balls_collide, self.balls_miss, self.sway) < 0:
            raise ValueError("split counts must be non-negative")
        if not 0.0 <= self.straight_ratio <= 1.0:
            raise ValueError("straight_ratio must lie in [0, 1]")

    @classmethod
    def from_totals(cls, dominos: int, balls: int, sway: int, collide_fraction: float = 0.75,
                    straight_ratio: float = 0.5):
        collide = int(round(balls * collide_fraction))
        return cls(dominos, collide, balls - collide, sway, straight_ratio)

    @property
    def total(self) -> int:
        return self.dominos + self.balls_collide + self.balls_miss + self.sway

    def tasks(self) -> List[Tuple[str, int, Optional[str]]]:
        out = [("dominos", i, None) for i in range(self.dominos)]
        n_straight = int(round(self.balls_collide * self.straight_ratio))
        out += [("balls-collide", i, "straight" if i < n_straight else "indirect")
                for i in range(self.balls_collide)]
        out += [("balls-miss", i, None) for i in range(self.balls_miss)]
        out += [("sway", i, None) for i in range(self.sway)]
        return out


def stable_seed(*parts) -> int:
    """64-bit seed from a blake2b hash of the parts' string forms."""
    key = ":".join(str(p) for p in parts).encode()
    return int.from_bytes(hashlib.blake2b(key, digest_size=8).digest(), "little")


def _rng(seed):
    return seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)


def _camera(rng, cfg: DomainCfg, view_height: float, center=(0.0, 0.0)):
    h, w = cfg.resolution
    window = (view_height * w / h, view_height)
    jitter = cfg.camera_jitter
    cx = center[0] + rng.uniform(-jitter, jitter) * window[0]
    cy = center[1] + rng.uniform(-jitter, jitter) * window[1]
    if cfg.camera_mode == "orthographic":
        return gm.Camera.top_down((cx, cy), window, (h, w))
    # pinhole placed so the nominal window just fills the image at ground level, slightly tilted
    dist = 10.0
    focal = h * dist / view_height
    tilt = rng.uniform(-0.05, 0.05) * view_height
    return gm.Camera("pinhole", (cx, cy - tilt, dist), (cx, cy, 0.0), (0.0, 1.0, 0.0), focal, (h, w), window)


def _placement_box(camera: gm.Camera, view_height: float, resolution, margin: float):
    h, w = resolution
    half_w, half_h = view_height * w / h / 2.0, view_height / 2.0
    cx, cy = camera.look_at[0], camera.look_at[1]
    return (cx - half_w + margin, cy - half_h + margin, cx + half_w - margin, cy + half_h - margin)


# ---------------------------------------------------------------------------
# Scene samplers
# ---------------------------------------------------------------------------


def _place_balls(rng, n, box, radius, separation, tries=200):
    pts = []
    for _ in range(n):
        for _ in range(tries):
            p = (rng.uniform(box[0] + radius, box[2] - radius), rng.uniform(box[1] + radius, box[3] - radius))
            if all(math.hypot(p[0] - q[0], p[1] - q[1]) >= 2 * radius + separation for q in pts):
                pts.append(p)
                break
        else:
            return None
    return pts


def _ball_scene(rng, cfg: DomainCfg, count_range):
    camera = _camera(rng, cfg, cfg.ball_view)
    box = _placement_box(camera, cfg.ball_view, cfg.resolution, 0.05)
    n = int(rng.integers(count_range[0], count_range[1] + 1))
    pts = _place_balls(rng, n, box, cfg.ball_radius, cfg.ball_separation)
    if pts is None:
        return None
    masses = rng.uniform(cfg.ball_mass[0], cfg.ball_mass[1], size=n)
    colors = rng.permutation(len(BALL_COLORS))[:n]
    balls = [Ball(f"ball_{i}", pts[i], cfg.ball_radius, float(masses[i]), color=BALL_COLORS[colors[i] % len(BALL_COLORS)])
             for i in range(n)]
    return Scene(balls=balls, camera=camera, bounds=box, family="balls", force_range=cfg.ball_force_range,
                 goal_range=cfg.ball_goal_range, mass_range=cfg.ball_mass)


def _gen_collide(rng, cfg: DomainCfg, variant: str):
    for _ in range(cfg.max_attempts):
        scene = _ball_scene(rng, cfg, cfg.collide_count)
        if scene is None:
            continue
        proj, target = scene.balls[0], scene.balls[1]
        win = aim_window(proj, target)
        angle = win.center_angle if variant == "straight" else win.center_angle + rng.uniform(-1, 1) * win.half_angle
        T = float(rng.uniform(*cfg.collision_time))
        overscale = float(rng.uniform(*cfg.overscale))
        gap = gm.norm(gm.sub(target.position, proj.position)) - proj.radius - target.radius
        j_min = min_impulse_for_collision(proj.mass, gap, T)
        J = j_min * overscale
        if J > cfg.ball_force_range[1]:
            continue
        u = gm.unit(angle)
        v = gm.scale(u, J / proj.mass)
        t_hit = _circle_toi(gm.sub(proj.position, target.position), v, proj.radius + target.radius)
        if t_hit is None or t_hit <= 0 or t_hit > cfg.duration - 2.0 / cfg.fps:
            continue
        contact = gm.add(proj.position, gm.scale(v, t_hit))
        if is_path_blocked(scene, proj.position, contact, proj.radius, ignore=(proj.id, target.id))[0]:
            continue
        force = ForceSpec(proj.id, gm.sub(proj.position, gm.scale(u, proj.radius)), angle,
                          to_normalized(J, scene.force_range), J)
        notes = {"projectile": proj.id, "target": target.id, "variant": variant, "collision_time_sampled": T,
                 "overscale": overscale, "min_impulse": j_min, "impulse": J, "gap": gap,
                 "aim_window": {"center": win.center_angle, "half_angle": win.half_angle},
                 "aim_angle": angle, "predicted_contact_time": t_hit}
        return scene, force, notes
    raise PlacementFailure(f"could not place a collide scene in {cfg.max_attempts} attempts")


def _gen_miss(rng, cfg: DomainCfg):
    margin = 1e-3
    for _ in range(cfg.max_attempts):
        scene = _ball_scene(rng, cfg, cfg.miss_count)
        if scene is None:
            continue
        proj, target = scene.balls[0], scene.balls[1]
        windows = [aim_window(proj, b) for b in scene.balls[1:]]
        for _ in range(cfg.max_attempts):
            angle = float(rng.uniform(0.0, 2.0 * math.pi))
            if not any(abs(gm.wrap_angle(angle - w.center_angle)) < w.half_angle + margin for w in windows):
                break
        else:
            continue
        mag = float(rng.uniform(0.0, 1.0))
        J = from_normalized(mag, scene.force_range)
        force = ForceSpec(proj.id, gm.sub(proj.position, gm.scale(gm.unit(angle), proj.radius)), angle, mag, J)
        notes = {"projectile": proj.id, "target": target.id, "variant": "miss", "aim_angle": angle,
                 "impulse": J}
        return scene, force, notes
    raise PlacementFailure(f"could not place a miss scene in {cfg.max_attempts} attempts")


def _gen_dominos(rng, cfg: DomainCfg):
    H, W, t = cfg.domino_height, cfg.domino_width, cfg.domino_thickness
    for _ in range(cfg.max_attempts):
        camera = _camera(rng, cfg, cfg.domino_view)
        box = _placement_box(camera, cfg.domino_view, cfg.resolution, 0.05)
        n = int(rng.integers(cfg.domino_count[0], cfg.domino_count[1] + 1))
        facing = float(rng.uniform(0.0, 2.0 * math.pi))
        gaps = rng.uniform(cfg.domino_spacing[0], cfg.domino_spacing[1], size=n - 1) * H
        offsets = np.concatenate([[0.0], np.cumsum(gaps)])
        offsets -= offsets[-1] / 2.0
        # the line plus a fallen domino's reach at either end must stay in view
        half_len = offsets[-1] + H + t
        ax = gm.unit(facing)
        ext_x = abs(ax[0]) * half_len + abs(ax[1]) * W / 2
        ext_y = abs(ax[1]) * half_len + abs(ax[0]) * W / 2
        if box[2] - box[0] < 2 * ext_x or box[3] - box[1] < 2 * ext_y:
            continue
        c = (rng.uniform(box[0] + ext_x, box[2] - ext_x), rng.uniform(box[1] + ext_y, box[3] - ext_y))
        mass = float(rng.uniform(*cfg.domino_mass))
        color = BALL_COLORS[int(rng.integers(len(BALL_COLORS)))]
        dominos = [Domino(f"domino_{i}", gm.add(c, gm.scale(ax, float(offsets[i]))), facing, W, H, t, mass,
                          color=color) for i in range(n)]
        thr = topple_threshold(dominos[0], H)
        scene = Scene(dominos=dominos, camera=camera, bounds=box, family="dominos",
                      force_range=(thr, thr * cfg.domino_force_span), goal_range=cfg.domino_goal_range,
                      mass_range=cfg.domino_mass)
        k = int(rng.integers(n))
        sign = 1.0 if rng.random() < 0.5 else -1.0
        direction = facing if sign > 0 else facing + math.pi
        mag = float(rng.uniform(0.0, 1.0))
        push = from_normalized(mag, scene.force_range)
        first = dominos[k]
        fall = gm.scale(ax, sign)
        point = gm.sub(first.base_center, gm.scale(fall, t / 2.0))
        force = ForceSpec(first.id, point, gm.wrap_angle(direction), mag, push)
        hop = domino_neighbor(dominos, first, fall)
        notes = {"initial_domino": first.id, "chain_direction": "forward" if sign > 0 else "backward",
                 "geometric_neighbor": None if hop is None else hop[0].id, "push": push,
                 "topple_threshold": thr}
        return scene, force, notes
    raise PlacementFailure(f"could not place a domino line in {cfg.max_attempts} attempts")


def _gen_sway(rng, cfg: DomainCfg):
    camera = _camera(rng, cfg, cfg.sway_view)
    box = _placement_box(camera, cfg.sway_view, cfg.resolution, 0.1)
    stem_len = float(rng.uniform(*cfg.sway_stem))
    stem_angle = float(rng.uniform(0.0, 2.0 * math.pi))
    stem = gm.scale(gm.unit(stem_angle), stem_len)
    cx, cy = camera.look_at[0], camera.look_at[1]
    anchor = (cx - stem[0] / 2.0, cy - stem[1] / 2.0)
    osc = SwayOscillator("carnation", anchor, 2.0 * math.pi * float(rng.uniform(*cfg.sway_frequency)),
                         float(rng.uniform(*cfg.sway_damping)), stem, float(rng.uniform(*cfg.sway_mass)))
    scene = Scene(oscillators=[osc], camera=camera, bounds=box, family="sway",
                  force_range=cfg.sway_force_range, goal_range=(0.0, 1.0), mass_range=cfg.sway_mass)
    frac = float(rng.uniform(0.3, 1.0))
    point = gm.add(anchor, gm.scale(stem, frac))
    direction = float(rng.uniform(-math.pi, math.pi))
    mag = float(rng.uniform(0.0, 1.0))
    force = ForceSpec(osc.id, point, direction, mag, from_normalized(mag, scene.force_range))
    notes = {"contact_fraction": frac}
    return scene, force, notes


def gen_scene(family: str, seed, cfg: Optional[DomainCfg] = None, variant: Optional[str] = None):
    """Sample ``(scene, force, annotations)`` for one family.

    ``variant`` selects straight-on vs indirect aim for ``balls-collide``; a
    seeded coin decides when it is omitted.
    """
    cfg = cfg or DomainCfg()
    rng = _rng(seed)
    if family == "dominos":
        return _gen_dominos(rng, cfg)
    if family == "balls-collide":
        if variant is None:
            variant = "straight" if rng.random() < 0.5 else "indirect"
        if variant not in ("straight", "indirect"):
            raise ValueError(f"unknown collide variant {variant!r}")
        return _gen_collide(rng, cfg, variant)
    if family == "balls-miss":
        return _gen_miss(rng, cfg)
    if family == "sway":
        return _gen_sway(rng, cfg)
    raise ValueError(f"unknown family {family!r}")


# ---------------------------------------------------------------------------
# Blocker scenes for planning accuracy
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class BlockerCfg:
    n_candidates: int = 3
    distance: Tuple[float, float] = (1.2, 2.5)
    approach_spread: float = math.radians(50.0)
    min_separation: float = math.radians(25.0)
    goal_magnitude: Tuple[float, float] = (0.15, 0.3)
    wall_half_length: float = 0.4
    wall_thickness: float = 0.06
    max_attempts: int = 1000


def gen_blocker_scene(seed, cfg: Optional[BlockerCfg] = None, domain: Optional[DomainCfg] = None):
    """Scene where exactly one candidate can reach the target; the rest are walled off.

    Returns ``(scene, goal, truth)`` with ``truth = {"valid", "distractors", "candidates"}``.
    """
    cfg = cfg or BlockerCfg()
    domain = domain or DomainCfg()
    if cfg.n_candidates < 2:
        raise ValueError("need at least two candidate initiators")
    rng = _rng(seed)
    r = domain.ball_radius
    for _ in range(cfg.max_attempts):
        camera = _camera(rng, domain, domain.ball_view)
        box = _placement_box(camera, domain.ball_view, domain.resolution, 0.05)
        tpos = (camera.look_at[0] + rng.uniform(-0.5, 0.5), camera.look_at[1] + rng.uniform(-0.5, 0.5))
        phi = float(rng.uniform(-math.pi, math.pi))
        n = gm.unit(phi)
        contact = gm.sub(tpos, gm.scale(n, 2 * r))
        offsets = np.sort(rng.uniform(-cfg.approach_spread, cfg.approach_spread, size=cfg.n_candidates))
        if np.any(np.diff(offsets) < cfg.min_separation):
            continue
        masses = rng.uniform(domain.ball_mass[0], domain.ball_mass[1], size=cfg.n_candidates + 1)
        balls = [Ball("target", tpos, r, float(masses[0]), color="red")]
        colors = ["white", "orange", "blue", "yellow", "purple", "teal", "pink", "navy"]
        starts = []
        for i, off in enumerate(offsets):
            u = gm.unit(phi + float(off))
            d = float(rng.uniform(*cfg.distance))
            p = gm.sub(contact, gm.scale(u, d))
            starts.append((p, u, d))
            balls.append(Ball(f"cand_{i}", p, r, float(masses[i + 1]), color=colors[i % len(colors)]))
        if any(not (box[0] + r <= b.position[0] <= box[2] - r and box[1] + r <= b.position[1] <= box[3] - r)
               for b in balls):
            continue
        valid_idx = int(rng.integers(cfg.n_candidates))
        obstacles = []
        for i, (p, u, d) in enumerate(starts):
            if i == valid_idx:
                continue
            mid = gm.add(p, gm.scale(u, d * float(rng.uniform(0.35, 0.65))))
            lat = (-u[1], u[0])
            obstacles.append(Obstacle(f"wall_{i}", "segment", gm.sub(mid, gm.scale(lat, cfg.wall_half_length)),
                                      gm.add(mid, gm.scale(lat, cfg.wall_half_length)), cfg.wall_thickness))
        try:
            scene = Scene(balls=balls, obstacles=obstacles, camera=camera, bounds=box, family="balls",
                          force_range=domain.ball_force_range, goal_range=domain.ball_goal_range,
                          mass_range=domain.ball_mass)
        except InvalidScene:
            continue
        goal = GoalForceSpec("target", phi, float(rng.uniform(*cfg.goal_magnitude)))
        valid = f"cand_{valid_idx}"
        distractors = [b.id for b in balls[1:] if b.id != valid]
        ok = not is_path_blocked(scene, scene.ball(valid).position, contact, r, ignore=(valid, "target"))[0]
        for dist_id in distractors:
            blocked, by = is_path_blocked(scene, scene.ball(dist_id).position, contact, r,
                                          ignore=(dist_id, "target"))
            ok = ok and blocked and by is not None and by.startswith("wall_")
        if not ok:
            continue
        # the unblocked shot must also fit the force budget and land inside the clip
        p, u, d = starts[valid_idx]
        cos_a = gm.dot(u, n)
        v_goal = from_normalized(goal.magnitude, scene.goal_range)
        speed = v_goal * (masses[valid_idx + 1] + masses[0]) / (2.0 * masses[valid_idx + 1]) / cos_a
        if masses[valid_idx + 1] * speed > scene.force_range[1] or d / speed > domain.duration - 1.0 / domain.fps:
            continue
        truth = {"valid": valid, "distractors": distractors, "candidates": [b.id for b in balls[1:]],
                 "random_baseline": 1.0 / cfg.n_candidates}
        return scene, goal, truth
    raise PlacementFailure(f"could not build a blocker scene in {cfg.max_attempts} attempts")


# ---------------------------------------------------------------------------
# Records
# ---------------------------------------------------------------------------


@dataclass
class DatasetRecord:
    sample_id: str
    family: str
    variant: Optional[str]
    seed: int
    scene: dict
    force: dict
    outcome: Optional[dict]
    pixel_coords: Dict[str, list]
    extras: dict
    masking: dict
    annotations: dict
    settings: dict

    def to_dict(self) -> dict:
        d = asdict(self)
        d["schema_version"] = SCHEMA_VERSION
        return d

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, indent=1, ensure_ascii=False)


def _z(scene: Scene, obj_id: str) -> float:
    for b in scene.balls:
        if b.id == obj_id:
            return b.radius
    return 0.0


def _pixel_force(camera, scene, obj_id, point, angle, magnitude):
    z = _z(scene, obj_id)
    p, pixel_angle, _ = gm.project_force(camera, (point[0], point[1], z), (*gm.unit(angle), 0.0), magnitude)
    return p.uv, pixel_angle


def _goal_target(family: str, annotations: dict, sim) -> Optional[str]:
    if family == "balls-collide" or family == "balls-miss":
        return annotations.get("target")
    if family == "dominos":
        initial = annotations["initial_domino"]
        for e in sim.events:
            if e.kind == "domino" and e.a == initial:
                return e.b
    return None


def encoding_for(scene: Scene, cfg: DomainCfg, f: int) -> EncodingCfg:
    """The domain's encoding constants with the scene's mass range and clip length applied."""
    return replace(cfg.encoding, mass_lo=scene.mass_range[0], mass_hi=scene.mass_range[1],
                   frames_max=min(cfg.encoding.frames_max, f), frames_min=min(cfg.encoding.frames_min, f))


def encode_sample(scene: Scene, force: ForceSpec, sim, target: Optional[str], enc: EncodingCfg,
                  resolution, policy: Optional[MaskPolicy], mask_seed: int = 0):
    """Build the three channels for a simulated force and combine them under ``policy``.

    With ``policy=None`` every available channel is kept (no masking).

    Returns ``(tensor, masking, outcome)`` where ``outcome`` is the goal force
    received by ``target`` (None when it was never struck).
    """
    camera = scene.camera
    h, w = resolution
    f = sim.n_frames
    pt, ang = _pixel_force(camera, scene, force.initiator_id, force.point, force.direction, force.magnitude)
    direct = encode_force_channel(pt, ang, force.magnitude, 0, enc, f, h, w)

    outcome = chain_outcome(sim, target) if target is not None else None
    goal = None
    if outcome is not None:
        tpos = sim.positions[target][0]
        gpt, gang = _pixel_force(camera, scene, target, tpos, outcome.direction, outcome.magnitude)
        goal = encode_goal_channel(gpt, gang, outcome.magnitude, enc, f, h, w)

    masses = [(sim.pixels[b.id][0], b.mass) for b in scene.balls]
    masses += [(sim.pixels[d.id][0], d.mass) for d in scene.dominos]
    masses += [(sim.pixels[o.id][0], o.modal_mass) for o in scene.oscillators]
    mass = encode_mass_channel(masses, enc, f, h, w) if masses else None

    if policy is None:
        data = np.zeros((f, 3, h, w), dtype=np.float32)
        for c, ch in enumerate((direct, goal, mass)):
            if ch is not None:
                data[:, c] = ch
        masking = {"causal": "both" if goal is not None else "direct", "mass": mass is not None}
        return ControlTensor(data), masking, outcome
    tensor, masking = assemble(direct, goal, mass, policy, mask_seed)
    return tensor, masking, outcome


def build_record(scene: Scene, force: ForceSpec, sim, policy: MaskPolicy, cfg: DomainCfg, *,
                 family: str, annotations: dict, sample_id: str = "sample", seed: int = 0,
                 variant: Optional[str] = None):
    """Encode one simulated sample; returns ``(record, tensor, frames)``."""
    h, w = cfg.resolution
    f = sim.n_frames
    enc = encoding_for(scene, cfg, f)
    target = _goal_target(family, annotations, sim)
    tensor, masking, outcome = encode_sample(scene, force, sim, target, enc, (h, w), policy,
                                             stable_seed(seed, "mask"))
    frames = render_frames(sim, scene.camera, h, w)

    extras = {}
    if family == "dominos":
        extras["initial_domino"] = annotations["initial_domino"]
        extras["adjacent_domino"] = target
        extras["coordinate_reference"] = "base_center"
    elif family == "balls-collide":
        if annotations.get("variant") == "indirect":
            extras["target_trajectory"] = sim.pixels[annotations["target"]].tolist()
    elif family == "balls-miss":
        extras["final_trajectory_angle"] = final_trajectory_angle(sim.pixels[annotations["projectile"]])

    record = DatasetRecord(
        sample_id=sample_id,
        family=family,
        variant=variant,
        seed=int(seed),
        scene=scene.to_dict(),
        force=force.to_dict(),
        outcome=None if outcome is None else {**outcome.to_dict(), "target": target},
        pixel_coords={k: v.tolist() for k, v in sorted(sim.pixels.items())},
        extras=extras,
        masking=masking,
        annotations=annotations,
        settings={"frames": f, "fps": sim.fps, "resolution": list(cfg.resolution), "encoding": enc.to_dict(),
                  "policy": policy.to_dict(),
                  "ranges": {"force": list(scene.force_range), "goal": list(scene.goal_range),
                             "mass": list(scene.mass_range)}},
    )
    return record, tensor, frames


def final_trajectory_angle(pixels: np.ndarray) -> Optional[float]:
    """Pixel angle of the last non-zero frame-to-frame displacement, or None if static."""
    d = np.diff(pixels, axis=0)
    moving = np.flatnonzero(np.hypot(d[:, 0], d[:, 1]) > 1e-9)
    if len(moving) == 0:
        return None
    du, dv = d[moving[-1]]
    return float(math.atan2(dv, du))


def make_sample(family: str, index: int, base_seed: int, cfg: DomainCfg, variant: Optional[str] = None):
    """Generate, simulate and encode one sample in memory."""
    seed = stable_seed(base_seed, family, index)
    scene, force, notes = gen_scene(family, seed, cfg, variant)
    sim = simulate(scene, force, cfg.duration, cfg.fps)
    sample_id = f"{family}-{index:05d}"
    record, tensor, frames = build_record(scene, force, sim, cfg.policy, cfg, family=family, annotations=notes,
                                          sample_id=sample_id, seed=seed, variant=variant)
    return record, tensor, frames


def write_frames(frames: np.ndarray, directory) -> None:
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    for k, frame in enumerate(frames):
        Image.fromarray(frame, mode="RGB").save(directory / f"{k:05d}.png", optimize=False)


def read_frames(directory) -> np.ndarray:
    files = sorted(Path(directory).glob("*.png"))
    return np.stack([np.asarray(Image.open(p).convert("RGB")) for p in files])


def _write_sample(args):
    out_dir, family, index, variant, base_seed, cfg = args
    record, tensor, frames = make_sample(family, index, base_seed, cfg, variant)
    final = Path(out_dir) / FAMILY_DIR[family] / record.sample_id
    tmp = final.with_name(final.name + ".partial")
    try:
        if tmp.exists():
            shutil.rmtree(tmp)
        write_frames(frames, tmp / "frames")
        write_tensor(tensor, tmp / "tensor.gfct")
        (tmp / "meta.json").write_text(record.to_json(), encoding="utf-8")
        if final.exists():
            shutil.rmtree(final)
        os.replace(tmp, final)
    except BaseException:
        shutil.rmtree(tmp, ignore_errors=True)
        raise
    return {
        "sample_id": record.sample_id,
        "family": family,
        "variant": variant,
        "seed": record.seed,
        "path": f"{FAMILY_DIR[family]}/{record.sample_id}",
        "has_outcome": record.outcome is not None,
        "masking": record.masking,
    }


def generate_dataset(out_dir, split: SplitSpec, base_seed: int, workers: int = 1,
                     cfg: Optional[DomainCfg] = None) -> dict:
    """Write every sample plus ``manifest.json`` and ``config.json`` under ``out_dir``."""
    cfg = cfg or DomainCfg()
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    jobs = [(str(out), fam, i, var, base_seed, cfg) for fam, i, var in split.tasks()]
    if workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            entries = list(pool.map(_write_sample, jobs, chunksize=1))
    else:
        entries = [_write_sample(j) for j in jobs]
    counts = {}
    for e in entries:
        counts[e["family"]] = counts.get(e["family"], 0) + 1
    manifest = {
        "schema_version": SCHEMA_VERSION,
        "base_seed": int(base_seed),
        "split": asdict(split),
        "counts": dict(sorted(counts.items())),
        "samples": entries,
    }
    (out / "config.json").write_text(json.dumps({"domain": cfg.to_dict(), "split": asdict(split),
                                                 "base_seed": int(base_seed)}, sort_keys=True, indent=1),
                                     encoding="utf-8")
    (out / "manifest.json").write_text(json.dumps(manifest, sort_keys=True, indent=1), encoding="utf-8")
    return manifest
