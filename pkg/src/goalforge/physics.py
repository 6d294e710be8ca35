"""Deterministic planar simulation of balls, domino chains and sway oscillators.

Balls move at constant velocity between contacts and are advanced in fixed
substeps of ``1 / (substeps * fps)`` seconds. Within a substep every contact is
found by swept-sphere time-of-impact and resolved exactly, so no frame ever
shows interpenetration. Dominos are event based: a toppling domino strikes its
neighbour after ``spacing / (topple_rate * height)`` seconds. Oscillators follow
the closed-form underdamped response to an impulse.
"""

import math
from dataclasses import dataclass, field, replace
from typing import Dict, List, Optional, Tuple

import numpy as np

from . import geometry as gm
from .errors import InvalidScene, InvalidTarget, NonConvergent, UnknownTarget

GRAVITY = 9.81
DEFAULT_FPS = 16
DEFAULT_FRAMES = 81
MAX_FRAMES = 1024

Vec2 = gm.Vec2


# ---------------------------------------------------------------------------
# Scene objects
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Ball:
    id: str
    position: Vec2
    radius: float
    mass: float
    velocity: Vec2 = (0.0, 0.0)
    color: str = "white"

    def __post_init__(self):
        if not self.radius > 0:
            raise InvalidScene(f"ball {self.id}: radius must be positive")
        if not self.mass > 0:
            raise InvalidScene(f"ball {self.id}: mass must be positive")


@dataclass(frozen=True)
class Domino:
    id: str
    base_center: Vec2
    facing: float
    width: float = 0.25
    height: float = 0.5
    thickness: float = 0.08
    mass: float = 0.1
    state: str = "standing"
    color: str = "ivory"

    def __post_init__(self):
        if min(self.width, self.height, self.thickness, self.mass) <= 0:
            raise InvalidScene(f"domino {self.id}: dimensions and mass must be positive")
        if self.state not in ("standing", "toppling", "fallen"):
            raise InvalidScene(f"domino {self.id}: bad state {self.state!r}")

    @property
    def axis(self) -> Vec2:
        return gm.unit(self.facing)


@dataclass(frozen=True)
class SwayOscillator:
    id: str
    anchor: Vec2
    natural_frequency: float
    damping_ratio: float
    stem: Vec2 = (0.0, 0.5)
    modal_mass: float = 0.1
    tip_displacement: Vec2 = (0.0, 0.0)
    color: str = "magenta"

    def __post_init__(self):
        if not 0.0 < self.damping_ratio < 1.0:
            raise InvalidScene(f"oscillator {self.id}: damping ratio must be in (0, 1)")
        if not self.natural_frequency > 0 or not self.modal_mass > 0:
            raise InvalidScene(f"oscillator {self.id}: frequency and mass must be positive")

    @property
    def damped_frequency(self) -> float:
        z = self.damping_ratio
        return self.natural_frequency * math.sqrt(1.0 - z * z)


@dataclass(frozen=True)
class Obstacle:
    """Static blocker: a thick segment ``a``-``b`` or an axis-aligned box with corners ``a``, ``b``."""

    id: str
    kind: str
    a: Vec2
    b: Vec2
    thickness: float = 0.05

    def __post_init__(self):
        if self.kind not in ("segment", "box"):
            raise InvalidScene(f"obstacle {self.id}: unknown kind {self.kind!r}")
        if self.kind == "segment" and gm.norm(gm.sub(self.b, self.a)) == 0.0:
            raise InvalidScene(f"obstacle {self.id}: zero-length segment")
        if self.kind == "box" and (self.b[0] <= self.a[0] or self.b[1] <= self.a[1]):
            raise InvalidScene(f"obstacle {self.id}: box needs min corner a and max corner b")
        if self.kind == "segment" and self.thickness < 0:
            raise InvalidScene(f"obstacle {self.id}: negative thickness")

    def capsules(self) -> List[Tuple[Vec2, Vec2, float]]:
        if self.kind == "segment":
            return [(self.a, self.b, self.thickness / 2.0)]
        (x0, y0), (x1, y1) = self.a, self.b
        c = [(x0, y0), (x1, y0), (x1, y1), (x0, y1)]
        return [(c[i], c[(i + 1) % 4], 0.0) for i in range(4)]

    def contains(self, p: Vec2) -> bool:
        if self.kind != "box":
            return False
        return self.a[0] <= p[0] <= self.b[0] and self.a[1] <= p[1] <= self.b[1]

    def distance(self, p: Vec2) -> float:
        """Distance from ``p`` to the obstacle footprint (0 inside)."""
        if self.contains(p):
            return 0.0
        return max(0.0, min(point_segment_distance(p, a, b) - rc for a, b, rc in self.capsules()))

    def polygon(self) -> List[Vec2]:
        if self.kind == "box":
            (x0, y0), (x1, y1) = self.a, self.b
            return [(x0, y0), (x1, y0), (x1, y1), (x0, y1)]
        e = gm.normalize(gm.sub(self.b, self.a))
        n = gm.scale((-e[1], e[0]), self.thickness / 2.0)
        return [gm.add(self.a, n), gm.add(self.b, n), gm.sub(self.b, n), gm.sub(self.a, n)]


@dataclass(frozen=True)
class Scene:
    balls: Tuple[Ball, ...] = ()
    dominos: Tuple[Domino, ...] = ()
    oscillators: Tuple[SwayOscillator, ...] = ()
    obstacles: Tuple[Obstacle, ...] = ()
    camera: gm.Camera = field(default_factory=gm.Camera)
    bounds: Tuple[float, float, float, float] = (-5.2, -3.0, 5.2, 3.0)
    gravity: float = GRAVITY
    family: str = "balls"
    # per-family normalization ranges: direct impulse/force, goal quantity, mass
    force_range: Tuple[float, float] = (0.0, 20.0)
    goal_range: Tuple[float, float] = (0.0, 8.0)
    mass_range: Tuple[float, float] = (1.0, 4.0)

    def __post_init__(self):
        for name in ("balls", "dominos", "oscillators", "obstacles"):
            object.__setattr__(self, name, tuple(getattr(self, name)))
        ids = self.ids()
        if len(ids) != len(set(ids)):
            raise InvalidScene("object ids must be unique")
        for lo, hi in (self.force_range, self.goal_range, self.mass_range):
            if not hi > lo:
                raise InvalidScene("normalization ranges must be ordered")
        self._check_overlap()

    def _check_overlap(self, tol=1e-9):
        balls = self.balls
        for i in range(len(balls)):
            for j in range(i + 1, len(balls)):
                d = gm.norm(gm.sub(balls[i].position, balls[j].position))
                if d < balls[i].radius + balls[j].radius - tol:
                    raise InvalidScene(f"balls {balls[i].id} and {balls[j].id} interpenetrate")
            for ob in self.obstacles:
                if ob.distance(balls[i].position) < balls[i].radius - tol:
                    raise InvalidScene(f"ball {balls[i].id} overlaps obstacle {ob.id}")

    def ids(self) -> List[str]:
        return [o.id for group in (self.balls, self.dominos, self.oscillators, self.obstacles) for o in group]

    def get(self, obj_id: str):
        for group in (self.balls, self.dominos, self.oscillators, self.obstacles):
            for o in group:
                if o.id == obj_id:
                    return o
        raise KeyError(obj_id)

    def has(self, obj_id: str) -> bool:
        return obj_id in self.ids()

    def ball(self, obj_id: str) -> Ball:
        for b in self.balls:
            if b.id == obj_id:
                return b
        raise KeyError(obj_id)

    def replace(self, **changes) -> "Scene":
        return replace(self, **changes)

    def to_dict(self) -> dict:
        return {
            "family": self.family,
            "bounds": list(self.bounds),
            "gravity": self.gravity,
            "force_range": list(self.force_range),
            "goal_range": list(self.goal_range),
            "mass_range": list(self.mass_range),
            "camera": self.camera.to_dict(),
            "balls": [
                {"id": b.id, "position": list(b.position), "radius": b.radius, "mass": b.mass,
                 "velocity": list(b.velocity), "color": b.color}
                for b in self.balls
            ],
            "dominos": [
                {"id": d.id, "base_center": list(d.base_center), "facing": d.facing, "width": d.width,
                 "height": d.height, "thickness": d.thickness, "mass": d.mass, "state": d.state,
                 "color": d.color}
                for d in self.dominos
            ],
            "oscillators": [
                {"id": o.id, "anchor": list(o.anchor), "natural_frequency": o.natural_frequency,
                 "damping_ratio": o.damping_ratio, "stem": list(o.stem), "modal_mass": o.modal_mass,
                 "tip_displacement": list(o.tip_displacement), "color": o.color}
                for o in self.oscillators
            ],
            "obstacles": [
                {"id": o.id, "kind": o.kind, "a": list(o.a), "b": list(o.b), "thickness": o.thickness}
                for o in self.obstacles
            ],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "Scene":
        known = {"family", "bounds", "gravity", "force_range", "goal_range", "mass_range", "camera",
                 "balls", "dominos", "oscillators", "obstacles"}
        unknown = set(d) - known
        if unknown:
            raise InvalidScene(f"unknown scene keys: {sorted(unknown)}")

        def t(x):
            return tuple(float(v) for v in x)

        try:
            balls = [Ball(b["id"], t(b["position"]), float(b["radius"]), float(b["mass"]),
                          t(b.get("velocity", (0, 0))), b.get("color", "white")) for b in d.get("balls", [])]
            dominos = [Domino(x["id"], t(x["base_center"]), float(x["facing"]), float(x.get("width", 0.25)),
                              float(x.get("height", 0.5)), float(x.get("thickness", 0.08)),
                              float(x.get("mass", 0.1)), x.get("state", "standing"), x.get("color", "ivory"))
                       for x in d.get("dominos", [])]
            oscs = [SwayOscillator(o["id"], t(o["anchor"]), float(o["natural_frequency"]),
                                   float(o["damping_ratio"]), t(o.get("stem", (0.0, 0.5))),
                                   float(o.get("modal_mass", 0.1)), t(o.get("tip_displacement", (0, 0))),
                                   o.get("color", "magenta"))
                    for o in d.get("oscillators", [])]
            obstacles = [Obstacle(o["id"], o["kind"], t(o["a"]), t(o["b"]), float(o.get("thickness", 0.05)))
                         for o in d.get("obstacles", [])]
            kwargs = {}
            for key in ("force_range", "goal_range", "mass_range", "bounds"):
                if key in d:
                    kwargs[key] = t(d[key])
            if "camera" in d:
                kwargs["camera"] = gm.Camera.from_dict(d["camera"])
            return cls(balls=balls, dominos=dominos, oscillators=oscs, obstacles=obstacles,
                       family=d.get("family", "balls"), gravity=float(d.get("gravity", GRAVITY)), **kwargs)
        except (KeyError, TypeError, ValueError) as exc:
            raise InvalidScene(f"malformed scene: {exc}") from exc


@dataclass(frozen=True)
class ForceSpec:
    """A direct force on ``initiator_id``.

    ``magnitude`` is the domain-normalized value that goes into the control
    signal; ``impulse`` is the physical value the simulator applies (kg*m/s for
    balls and oscillators, a push in N for dominos).
    """

    initiator_id: str
    point: Vec2
    direction: float
    magnitude: float
    impulse: float

    def __post_init__(self):
        if not 0.0 <= self.magnitude <= 1.0:
            raise ValueError("normalized magnitude must lie in [0, 1]")

    def to_dict(self):
        return {"initiator_id": self.initiator_id, "point": list(self.point), "direction": self.direction,
                "magnitude": self.magnitude, "impulse": self.impulse}

    @classmethod
    def from_dict(cls, d):
        return cls(d["initiator_id"], tuple(d["point"]), float(d["direction"]), float(d["magnitude"]),
                   float(d["impulse"]))


def to_normalized(value: float, value_range) -> float:
    lo, hi = value_range
    return min(1.0, max(0.0, (value - lo) / (hi - lo)))


def from_normalized(magnitude: float, value_range) -> float:
    lo, hi = value_range
    return lo + magnitude * (hi - lo)


# ---------------------------------------------------------------------------
# Closed-form mechanics
# ---------------------------------------------------------------------------


def elastic_collision(m1, v1, m2, v2, normal):
    """Perfectly elastic contact along ``normal`` (unit, pointing from body 1 to body 2).

    Returns the inputs unchanged unless the bodies approach along the normal.
    """
    nx, ny = normal
    v1n = v1[0] * nx + v1[1] * ny
    v2n = v2[0] * nx + v2[1] * ny
    if v1n - v2n <= 0.0:
        return (v1[0], v1[1]), (v2[0], v2[1])
    total = m1 + m2
    d1 = ((m1 - m2) * v1n + 2.0 * m2 * v2n) / total - v1n
    d2 = ((m2 - m1) * v2n + 2.0 * m1 * v1n) / total - v2n
    return (v1[0] + d1 * nx, v1[1] + d1 * ny), (v2[0] + d2 * nx, v2[1] + d2 * ny)


def min_impulse_for_collision(m: float, gap_distance: float, T: float) -> float:
    """Impulse that covers ``gap_distance`` in ``T`` seconds at constant velocity."""
    if gap_distance < 0 or T <= 0:
        raise ValueError("need gap_distance >= 0 and T > 0")
    return m * gap_distance / T


def topple_threshold(d: Domino, contact_height: float, gravity: float = GRAVITY) -> float:
    """Quasi-static push at ``contact_height`` that tips ``d`` over its pivot edge."""
    if not 0.0 < contact_height <= d.height + 1e-12:
        raise ValueError("contact height must lie in (0, height]")
    return d.mass * gravity * (d.thickness / 2.0) / contact_height


# ---------------------------------------------------------------------------
# Geometry helpers shared with the planner
# ---------------------------------------------------------------------------


def point_segment_distance(p, a, b) -> float:
    ab = gm.sub(b, a)
    denom = gm.dot(ab, ab)
    s = 0.0 if denom == 0 else min(1.0, max(0.0, gm.dot(gm.sub(p, a), ab) / denom))
    return gm.norm(gm.sub(p, gm.add(a, gm.scale(ab, s))))


def _closest_point(p, a, b):
    ab = gm.sub(b, a)
    denom = gm.dot(ab, ab)
    s = 0.0 if denom == 0 else min(1.0, max(0.0, gm.dot(gm.sub(p, a), ab) / denom))
    return gm.add(a, gm.scale(ab, s))


def _orient(a, b, c):
    return (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0])


def segments_intersect(p1, p2, q1, q2) -> bool:
    d1, d2 = _orient(q1, q2, p1), _orient(q1, q2, p2)
    d3, d4 = _orient(p1, p2, q1), _orient(p1, p2, q2)
    if ((d1 > 0) != (d2 > 0)) and ((d3 > 0) != (d4 > 0)) and d1 != 0 and d2 != 0 and d3 != 0 and d4 != 0:
        return True
    return False


def segment_segment_distance(p1, p2, q1, q2) -> float:
    if segments_intersect(p1, p2, q1, q2):
        return 0.0
    return min(
        point_segment_distance(p1, q1, q2),
        point_segment_distance(p2, q1, q2),
        point_segment_distance(q1, p1, p2),
        point_segment_distance(q2, p1, p2),
    )


def _circle_toi(dp, dv, radius):
    """Earliest t >= 0 with |dp + dv t| = radius while approaching, else None."""
    a = dv[0] * dv[0] + dv[1] * dv[1]
    if a == 0.0:
        return None
    b = dp[0] * dv[0] + dp[1] * dv[1]
    if b >= 0.0:
        return None
    c = dp[0] * dp[0] + dp[1] * dp[1] - radius * radius
    if c <= 0.0:
        return 0.0
    disc = b * b - a * c
    if disc < 0.0:
        return None
    return max(0.0, (-b - math.sqrt(disc)) / a)


def _capsule_toi(p, v, radius, a, b, rc):
    """Time of impact of a moving disc with a static capsule, with the contact normal."""
    R = radius + rc
    best = None
    for end in (a, b):
        t = _circle_toi((p[0] - end[0], p[1] - end[1]), v, R)
        if t is not None and (best is None or t < best):
            best = t
    ab = gm.sub(b, a)
    L = gm.norm(ab)
    e = (ab[0] / L, ab[1] / L)
    n = (-e[1], e[0])
    d0 = (p[0] - a[0]) * n[0] + (p[1] - a[1]) * n[1]
    rate = v[0] * n[0] + v[1] * n[1]
    side = 1.0 if d0 >= 0 else -1.0
    if abs(d0) >= R and side * rate < 0.0:
        t = (abs(d0) - R) / (-side * rate)
        q = (p[0] + v[0] * t - a[0], p[1] + v[1] * t - a[1])
        s = q[0] * e[0] + q[1] * e[1]
        if 0.0 <= s <= L and (best is None or t < best):
            best = t
    if best is None:
        return None
    hit = (p[0] + v[0] * best, p[1] + v[1] * best)
    normal = gm.sub(hit, _closest_point(hit, a, b))
    nn = gm.norm(normal)
    if nn == 0.0:
        return None
    normal = (normal[0] / nn, normal[1] / nn)
    if v[0] * normal[0] + v[1] * normal[1] >= 0.0:
        return None
    return best, normal


# ---------------------------------------------------------------------------
# Simulation
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class SimConfig:
    substeps: int = 8
    linear_damping: float = 0.0
    max_events_per_substep: int = 256
    topple_rate: float = 2.0  # domino heights per second
    direct_push_height: float = 1.0  # fraction of domino height where a direct push lands


@dataclass(frozen=True)
class CollisionEvent:
    time: float
    a: str
    b: str
    normal: Vec2  # from a towards b
    impulse: float
    kind: str = "ball-ball"
    post_a: Optional[Vec2] = None
    post_b: Optional[Vec2] = None

    def to_dict(self):
        return {
            "time": self.time, "a": self.a, "b": self.b, "normal": list(self.normal),
            "impulse": self.impulse, "kind": self.kind,
            "post_a": None if self.post_a is None else list(self.post_a),
            "post_b": None if self.post_b is None else list(self.post_b),
        }


@dataclass
class SimResult:
    scene: Scene
    fps: float
    times: np.ndarray
    positions: Dict[str, np.ndarray]  # world xy per frame (ball center, domino base, oscillator tip)
    tilt: Dict[str, np.ndarray]  # domino tilt fraction in [0, 1]
    displacement: Dict[str, np.ndarray]  # oscillator tip displacement
    events: List[CollisionEvent]
    topple_times: Dict[str, float]
    pixels: Dict[str, np.ndarray]
    out_of_window: Dict[str, np.ndarray]

    @property
    def n_frames(self) -> int:
        return len(self.times)

    def domino_state(self, domino_id: str, frame: int) -> str:
        f = self.tilt[domino_id][frame]
        if f >= 1.0:
            return "fallen"
        if domino_id in self.topple_times and self.times[frame] >= self.topple_times[domino_id]:
            return "toppling"
        return "standing"

    def to_dict(self) -> dict:
        return {
            "fps": self.fps,
            "n_frames": self.n_frames,
            "times": self.times.tolist(),
            "events": [e.to_dict() for e in self.events],
            "topple_times": dict(sorted(self.topple_times.items())),
            "positions": {k: v.tolist() for k, v in sorted(self.positions.items())},
            "pixels": {k: v.tolist() for k, v in sorted(self.pixels.items())},
        }


def simulate(scene: Scene, applied: Optional[ForceSpec] = None, duration: float = DEFAULT_FRAMES / DEFAULT_FPS,
             fps: float = DEFAULT_FPS, config: Optional[SimConfig] = None) -> SimResult:
    cfg = config or SimConfig()
    n_frames = int(round(duration * fps))
    if n_frames < 1 or n_frames > MAX_FRAMES:
        raise ValueError(f"frame count {n_frames} outside [1, {MAX_FRAMES}]")
    if applied is not None and not scene.has(applied.initiator_id):
        raise InvalidTarget(f"applied force targets unknown object {applied.initiator_id!r}")
    if applied is not None and any(o.id == applied.initiator_id for o in scene.obstacles):
        raise InvalidTarget(f"cannot apply a force to static obstacle {applied.initiator_id!r}")

    times = np.arange(n_frames, dtype=np.float64) / fps
    events: List[CollisionEvent] = []
    positions: Dict[str, np.ndarray] = {}

    ball_pos = _simulate_balls(scene, applied, n_frames, fps, cfg, events)
    positions.update(ball_pos)

    topple_times, tilt, dom_events = _simulate_dominos(scene, applied, cfg)
    events.extend(dom_events)
    tilt_arr = {}
    for d in scene.dominos:
        positions[d.id] = np.tile(np.asarray(d.base_center, dtype=np.float64), (n_frames, 1))
        tilt_arr[d.id] = np.array([tilt(d.id, t) for t in times])

    disp = {}
    for o in scene.oscillators:
        J = applied.impulse if applied is not None and applied.initiator_id == o.id else 0.0
        direction = applied.direction if J else 0.0
        lever = _stem_lever(o, applied.point) if J else 1.0
        disp[o.id] = oscillator_displacement(o, J * lever, direction, times)
        positions[o.id] = np.asarray(gm.add(o.anchor, o.stem)) + disp[o.id]

    events.sort(key=lambda e: (e.time, e.a, e.b))

    pixels, oow = {}, {}
    radius = {b.id: b.radius for b in scene.balls}
    for obj_id, xy in positions.items():
        z = radius.get(obj_id, 0.0)
        pts = [gm.project_point(scene.camera, (x, y, z)) for x, y in xy]
        pixels[obj_id] = np.array([[p.u, p.v] for p in pts], dtype=np.float64)
        oow[obj_id] = np.array([p.out_of_window for p in pts], dtype=bool)

    return SimResult(scene, fps, times, positions, tilt_arr, disp, events, topple_times, pixels, oow)


def _simulate_balls(scene, applied, n_frames, fps, cfg, events):
    balls = scene.balls
    n = len(balls)
    ids = [b.id for b in balls]
    pos = [list(b.position) for b in balls]
    vel = [list(b.velocity) for b in balls]
    mass = [b.mass for b in balls]
    rad = [b.radius for b in balls]
    if applied is not None and applied.initiator_id in ids:
        i = ids.index(applied.initiator_id)
        c, s = gm.unit(applied.direction)
        vel[i][0] += applied.impulse / mass[i] * c
        vel[i][1] += applied.impulse / mass[i] * s
    capsules = [(ob.id, cap) for ob in scene.obstacles for cap in ob.capsules()]

    out = {bid: np.empty((n_frames, 2), dtype=np.float64) for bid in ids}
    dt = 1.0 / (fps * cfg.substeps)
    damp = math.exp(-cfg.linear_damping * dt) if cfg.linear_damping else 1.0
    for k in range(n_frames):
        for i, bid in enumerate(ids):
            out[bid][k, 0] = pos[i][0]
            out[bid][k, 1] = pos[i][1]
        if k == n_frames - 1 or n == 0:
            continue
        for s in range(cfg.substeps):
            t0 = (k * cfg.substeps + s) * dt
            _substep(ids, pos, vel, mass, rad, capsules, dt, t0, cfg, events)
            if damp != 1.0:
                for v in vel:
                    v[0] *= damp
                    v[1] *= damp
    return out


def _substep(ids, pos, vel, mass, rad, capsules, dt, t0, cfg, events):
    n = len(ids)
    remaining = dt
    elapsed = 0.0
    for _ in range(cfg.max_events_per_substep):
        moving = [i for i in range(n) if vel[i][0] != 0.0 or vel[i][1] != 0.0]
        best = None  # (toi, kind, i, j_or_capsule_index, normal)
        for i in moving:
            for j in range(n):
                if j == i or (j in moving and j < i):
                    continue
                dp = (pos[i][0] - pos[j][0], pos[i][1] - pos[j][1])
                dv = (vel[i][0] - vel[j][0], vel[i][1] - vel[j][1])
                t = _circle_toi(dp, dv, rad[i] + rad[j])
                if t is not None and t <= remaining and (best is None or t < best[0]):
                    best = (t, "ball", i, j, None)
            for ci, (_, (a, b, rc)) in enumerate(capsules):
                hit = _capsule_toi(pos[i], vel[i], rad[i], a, b, rc)
                if hit is not None and hit[0] <= remaining and (best is None or hit[0] < best[0]):
                    best = (hit[0], "obstacle", i, ci, hit[1])
        step = remaining if best is None else best[0]
        for i in moving:
            pos[i][0] += vel[i][0] * step
            pos[i][1] += vel[i][1] * step
        if best is None:
            return
        remaining -= step
        elapsed += step
        t_event = t0 + elapsed
        _, kind, i, j, normal = best
        if kind == "ball":
            d = (pos[j][0] - pos[i][0], pos[j][1] - pos[i][1])
            dn = math.hypot(*d)
            nrm = (d[0] / dn, d[1] / dn)
            v1, v2 = elastic_collision(mass[i], tuple(vel[i]), mass[j], tuple(vel[j]), nrm)
            J = mass[j] * math.hypot(v2[0] - vel[j][0], v2[1] - vel[j][1])
            vel[i][:] = v1
            vel[j][:] = v2
            a, b = (i, j) if ids[i] < ids[j] else (j, i)
            sign = 1.0 if a == i else -1.0
            events.append(CollisionEvent(t_event, ids[a], ids[b], (sign * nrm[0], sign * nrm[1]), J,
                                         "ball-ball", tuple(vel[a]), tuple(vel[b])))
        else:
            vn = vel[i][0] * normal[0] + vel[i][1] * normal[1]
            vel[i][0] -= 2.0 * vn * normal[0]
            vel[i][1] -= 2.0 * vn * normal[1]
            events.append(CollisionEvent(t_event, ids[i], capsules[j][0], (-normal[0], -normal[1]),
                                         2.0 * mass[i] * abs(vn), "ball-obstacle", tuple(vel[i]), None))
    raise NonConvergent(f"more than {cfg.max_events_per_substep} contacts in one substep at t={t0:.4f}s")


def domino_neighbor(dominos, current: Domino, direction: Vec2) -> Optional[Tuple[Domino, float]]:
    """Closest domino ahead of ``current`` along ``direction``, with the center spacing."""
    best = None
    lateral_dir = (-direction[1], direction[0])
    for d in dominos:
        if d.id == current.id:
            continue
        rel = gm.sub(d.base_center, current.base_center)
        ahead = gm.dot(rel, direction)
        lateral = abs(gm.dot(rel, lateral_dir))
        if ahead > 0 and lateral <= max(current.width, d.width) / 2.0:
            if best is None or ahead < best[1]:
                best = (d, ahead)
    return best


def chain_hop(prev: Domino, nxt: Domino, spacing: float, gravity: float = GRAVITY):
    """Whether a falling ``prev`` topples ``nxt``; returns (propagates, incoming force, threshold)."""
    if spacing >= prev.height:
        return False, 0.0, math.inf
    gap = max(spacing - (prev.thickness + nxt.thickness) / 2.0, 0.0)
    contact_h = min(math.sqrt(max(prev.height ** 2 - gap ** 2, 1e-12)), nxt.height)
    incoming = prev.mass * gravity
    threshold = topple_threshold(nxt, contact_h, gravity)
    return incoming >= threshold, incoming, threshold


def topple_direction(d: Domino, force_angle: float) -> Vec2:
    """Fall direction along the domino's axis for a push at ``force_angle``."""
    s = 1.0 if math.cos(force_angle - d.facing) >= 0.0 else -1.0
    return gm.scale(d.axis, s)


def _simulate_dominos(scene, applied, cfg):
    topple_times: Dict[str, float] = {}
    events: List[CollisionEvent] = []
    by_id = {d.id: d for d in scene.dominos}
    fall_time = 1.0 / cfg.topple_rate
    for d in scene.dominos:
        if d.state in ("toppling", "fallen"):
            topple_times[d.id] = -math.inf if d.state == "fallen" else 0.0

    if applied is not None and applied.initiator_id in by_id:
        first = by_id[applied.initiator_id]
        push_h = cfg.direct_push_height * first.height
        if first.state == "standing" and applied.impulse >= topple_threshold(first, push_h, scene.gravity):
            direction = topple_direction(first, applied.direction)
            topple_times[first.id] = 0.0
            current, t = first, 0.0
            while True:
                hop = domino_neighbor(scene.dominos, current, direction)
                if hop is None:
                    break
                nxt, spacing = hop
                if nxt.id in topple_times:
                    break
                ok, incoming, _ = chain_hop(current, nxt, spacing, scene.gravity)
                if not ok:
                    break
                t += spacing / (cfg.topple_rate * current.height)
                topple_times[nxt.id] = t
                events.append(CollisionEvent(t, current.id, nxt.id, direction, incoming, "domino"))
                current = nxt

    def tilt(domino_id, t):
        start = topple_times.get(domino_id)
        if start is None or t < start:
            return 0.0
        return min(1.0, (t - start) / fall_time)

    return topple_times, tilt, events


def _stem_lever(o: SwayOscillator, point: Vec2) -> float:
    """Fraction of the stem length at which ``point`` lies (projected), clipped to [0.1, 1]."""
    stem = o.stem
    L2 = gm.dot(stem, stem)
    if L2 == 0.0:
        return 1.0
    s = gm.dot(gm.sub(point, o.anchor), stem) / L2
    return min(1.0, max(0.1, s))


def oscillator_displacement(o: SwayOscillator, impulse: float, direction: float, times) -> np.ndarray:
    """Tip displacement of an underdamped oscillator kicked at t=0."""
    times = np.asarray(times, dtype=np.float64)
    out = np.zeros((len(times), 2), dtype=np.float64)
    if impulse == 0.0:
        return out
    v0 = impulse / o.modal_mass
    wd = o.damped_frequency
    amp = v0 / wd * np.exp(-o.damping_ratio * o.natural_frequency * times) * np.sin(wd * times)
    c, s = gm.unit(direction)
    out[:, 0] = amp * c
    out[:, 1] = amp * s
    return out


def oscillator_energy(o: SwayOscillator, impulse: float, t) -> np.ndarray:
    """Modal energy 0.5*m*(x'^2 + w^2 x^2) of the kicked oscillator."""
    t = np.asarray(t, dtype=np.float64)
    v0 = impulse / o.modal_mass
    w, z, wd = o.natural_frequency, o.damping_ratio, o.damped_frequency
    env = np.exp(-z * w * t)
    x = v0 / wd * env * np.sin(wd * t)
    xd = v0 / wd * env * (wd * np.cos(wd * t) - z * w * np.sin(wd * t))
    return 0.5 * o.modal_mass * (xd ** 2 + w ** 2 * x ** 2)


@dataclass(frozen=True)
class Outcome:
    time: float
    direction: float  # world radians
    magnitude: float  # normalized within the scene's goal range
    value: float  # physical value: speed (m/s) for balls, force (N) for dominos
    source: str  # object that delivered the strike

    def to_dict(self):
        return {"time": self.time, "direction": self.direction, "magnitude": self.magnitude,
                "value": self.value, "source": self.source}


def chain_outcome(result: SimResult, target_id: str) -> Optional[Outcome]:
    """First strike received by ``target_id`` and the resulting goal force, or None."""
    scene = result.scene
    if not scene.has(target_id):
        raise UnknownTarget(f"unknown target {target_id!r}")
    for e in result.events:
        if e.kind == "ball-ball" and target_id in (e.a, e.b):
            post = e.post_a if e.a == target_id else e.post_b
            speed = math.hypot(*post)
            return Outcome(e.time, math.atan2(post[1], post[0]), to_normalized(speed, scene.goal_range),
                           speed, e.b if e.a == target_id else e.a)
        if e.kind == "domino" and e.b == target_id:
            return Outcome(e.time, gm.angle_of(e.normal), to_normalized(e.impulse, scene.goal_range),
                           e.impulse, e.a)
    return None
