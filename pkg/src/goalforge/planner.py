"""Inverse planning: derive a direct force that produces a requested goal force.

Ball scenes use a single antecedent hop (projectile strikes target). Domino
scenes pick any standing upstream domino whose chain reaches the target.
When several initiators are valid the choice is a seeded draw, never
nearest-first, so repeated sampling covers every valid plan.
"""

import math
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from . import geometry as gm
from .errors import AlreadyTouching, NoFeasiblePlan, UnknownTarget
from .physics import (
    DEFAULT_FPS,
    DEFAULT_FRAMES,
    Ball,
    ForceSpec,
    Scene,
    SimConfig,
    chain_hop,
    domino_neighbor,
    from_normalized,
    point_segment_distance,
    segment_segment_distance,
    to_normalized,
    topple_threshold,
)

BLOCKED = "blocked"
OUT_OF_RANGE = "out-of-range"
LEVERAGE = "insufficient-mass-leverage"

# approach directions more oblique than this are rejected as out-of-range
MAX_APPROACH_ANGLE = math.radians(75.0)
# goal direction must lie this close to a domino line's axis
DOMINO_AXIS_TOLERANCE = math.radians(30.0)


@dataclass(frozen=True)
class GoalForceSpec:
    target_id: str
    direction: float
    magnitude: float
    time_window: Optional[Tuple[float, float]] = None

    def __post_init__(self):
        if not 0.0 <= self.magnitude <= 1.0:
            raise ValueError("goal magnitude must lie in [0, 1]")
        if self.time_window is not None and not self.time_window[0] < self.time_window[1]:
            raise ValueError("time window start must precede its end")

    def to_dict(self):
        return {"target_id": self.target_id, "direction": self.direction, "magnitude": self.magnitude,
                "time_window": None if self.time_window is None else list(self.time_window)}


@dataclass(frozen=True)
class AimWindow:
    center_angle: float
    half_angle: float

    def contains(self, angle: float) -> bool:
        return abs(gm.wrap_angle(angle - self.center_angle)) < self.half_angle


@dataclass
class PlanResult:
    force: Optional[ForceSpec]
    predicted_collision_time: float
    predicted_goal_magnitude: float
    feasible: bool
    rejected_candidates: List[Tuple[str, str]] = field(default_factory=list)
    support: List[str] = field(default_factory=list)

    @property
    def initiator(self) -> Optional[str]:
        return None if self.force is None else self.force.initiator_id

    def to_dict(self):
        return {
            "initiator": self.initiator,
            "force": None if self.force is None else self.force.to_dict(),
            "predicted_collision_time": self.predicted_collision_time,
            "predicted_goal_magnitude": self.predicted_goal_magnitude,
            "feasible": self.feasible,
            "rejected_candidates": [{"id": i, "reason": r} for i, r in self.rejected_candidates],
            "support": list(self.support),
        }


def aim_window(projectile: Ball, target: Ball) -> AimWindow:
    """Launch directions from ``projectile`` that make contact with ``target``."""
    rel = gm.sub(target.position, projectile.position)
    d = gm.norm(rel)
    reach = projectile.radius + target.radius
    if d <= reach:
        raise AlreadyTouching(f"{projectile.id} and {target.id} are already in contact")
    return AimWindow(gm.angle_of(rel), math.asin(reach / d))


def is_path_blocked(scene: Scene, start, end, sweep_radius: float, ignore: Sequence[str] = ()):
    """Does the capsule ``start``-``end`` inflated by ``sweep_radius`` hit anything?

    Returns ``(blocked, blocking_id)``. Obstacles are checked before balls;
    objects listed in ``ignore`` (the participants) are skipped.
    """
    if tuple(start) == tuple(end):
        raise ValueError("path endpoints must differ")
    for ob in scene.obstacles:
        if ob.id in ignore:
            continue
        if ob.contains(start) or ob.contains(end):
            return True, ob.id
        for a, b, rc in ob.capsules():
            if segment_segment_distance(start, end, a, b) <= sweep_radius + rc:
                return True, ob.id
    for ball in scene.balls:
        if ball.id in ignore:
            continue
        if point_segment_distance(ball.position, start, end) <= sweep_radius + ball.radius:
            return True, ball.id
    return False, None


def required_projectile_speed(m_p: float, m_t: float, v_goal: float) -> float:
    """Head-on projectile speed that leaves a resting target moving at ``v_goal``."""
    if m_p <= 0 or m_t <= 0:
        raise ValueError("masses must be positive")
    return v_goal * (m_p + m_t) / (2.0 * m_p)


def _default_window(duration: float, fps: float) -> Tuple[float, float]:
    # the collision must land inside the clip, leaving a frame to show the response
    return (0.0, duration - 1.0 / fps)


@dataclass
class _Candidate:
    force: ForceSpec
    time: float
    goal_magnitude: float


def _ball_candidates(scene: Scene, goal: GoalForceSpec, duration: float, fps: float):
    target = scene.ball(goal.target_id)
    n = gm.unit(goal.direction)
    v_goal = from_normalized(goal.magnitude, scene.goal_range)
    window = goal.time_window or _default_window(duration, fps)
    feasible: Dict[str, _Candidate] = {}
    rejected: List[Tuple[str, str]] = []
    for p in scene.balls:
        if p.id == target.id:
            continue
        reach = p.radius + target.radius
        contact = gm.sub(target.position, gm.scale(n, reach))
        path = gm.sub(contact, p.position)
        dist = gm.norm(path)
        if dist < 1e-9 or gm.norm(gm.sub(p.position, target.position)) <= reach:
            rejected.append((p.id, OUT_OF_RANGE))
            continue
        u = gm.scale(path, 1.0 / dist)
        cos_a = gm.dot(u, n)
        if cos_a <= math.cos(MAX_APPROACH_ANGLE):
            rejected.append((p.id, OUT_OF_RANGE))
            continue
        blocked, _ = is_path_blocked(scene, p.position, contact, p.radius, ignore=(p.id, target.id))
        if blocked:
            rejected.append((p.id, BLOCKED))
            continue
        speed = required_projectile_speed(p.mass, target.mass, v_goal) / cos_a
        if v_goal > 0 and speed == 0:
            rejected.append((p.id, OUT_OF_RANGE))
            continue
        impulse = p.mass * speed
        if impulse > scene.force_range[1]:
            rejected.append((p.id, LEVERAGE))
            continue
        t = dist / speed if speed > 0 else math.inf
        if not window[0] <= t <= window[1]:
            rejected.append((p.id, OUT_OF_RANGE))
            continue
        # target leaves along the contact normal with 2 m_p / (m_p + m_t) of the normal speed
        v_t = 2.0 * p.mass / (p.mass + target.mass) * speed * cos_a
        force = ForceSpec(p.id, gm.sub(p.position, gm.scale(u, p.radius)), gm.angle_of(u),
                          to_normalized(impulse, scene.force_range), impulse)
        feasible[p.id] = _Candidate(force, t, to_normalized(v_t, scene.goal_range))
    return feasible, rejected


def _domino_candidates(scene: Scene, goal: GoalForceSpec, config: SimConfig):
    target = next(d for d in scene.dominos if d.id == goal.target_id)
    n = gm.unit(goal.direction)
    axis = target.axis
    c = gm.dot(n, axis)
    feasible: Dict[str, _Candidate] = {}
    rejected: List[Tuple[str, str]] = []
    if abs(c) < math.cos(DOMINO_AXIS_TOLERANCE):
        return feasible, [(d.id, OUT_OF_RANGE) for d in scene.dominos if d.id != target.id]
    fall = gm.scale(axis, 1.0 if c > 0 else -1.0)
    fall_angle = gm.angle_of(fall)
    for d in scene.dominos:
        if d.id == target.id:
            continue
        if d.state != "standing":
            rejected.append((d.id, OUT_OF_RANGE))
            continue
        current, t, reached, incoming = d, 0.0, False, 0.0
        visited = {d.id}
        while True:
            hop = domino_neighbor(scene.dominos, current, fall)
            if hop is None:
                break
            nxt, spacing = hop
            if nxt.id in visited or nxt.state != "standing":
                break
            ok, incoming, _ = chain_hop(current, nxt, spacing, scene.gravity)
            if not ok:
                break
            t += spacing / (config.topple_rate * current.height)
            visited.add(nxt.id)
            if nxt.id == target.id:
                reached = True
                break
            current = nxt
        if not reached:
            rejected.append((d.id, OUT_OF_RANGE))
            continue
        need = topple_threshold(d, config.direct_push_height * d.height, scene.gravity)
        push = max(from_normalized(goal.magnitude, scene.force_range), need)
        if push > scene.force_range[1]:
            rejected.append((d.id, LEVERAGE))
            continue
        point = gm.sub(d.base_center, gm.scale(fall, d.thickness / 2.0))
        force = ForceSpec(d.id, point, fall_angle, to_normalized(push, scene.force_range), push)
        feasible[d.id] = _Candidate(force, t, to_normalized(incoming, scene.goal_range))
    return feasible, rejected


def _candidates(scene, goal, duration, fps, config):
    if not scene.has(goal.target_id):
        raise UnknownTarget(f"unknown target {goal.target_id!r}")
    if any(b.id == goal.target_id for b in scene.balls):
        return _ball_candidates(scene, goal, duration, fps)
    if any(d.id == goal.target_id for d in scene.dominos):
        return _domino_candidates(scene, goal, config)
    raise UnknownTarget(f"{goal.target_id!r} is not a ball or domino")


def _weights(ids: List[str], bias: Optional[Dict[str, float]]) -> np.ndarray:
    if bias is None:
        return np.full(len(ids), 1.0 / len(ids))
    w = np.array([float(bias.get(i, 0.0)) for i in ids])
    if (w < 0).any() or w.sum() <= 0:
        raise ValueError("bias must put positive weight on at least one feasible initiator")
    return w / w.sum()


def sample_plans(scene: Scene, goal: GoalForceSpec, n: int, seed: int = 0,
                 bias: Optional[Dict[str, float]] = None, duration: float = DEFAULT_FRAMES / DEFAULT_FPS,
                 fps: float = DEFAULT_FPS, config: Optional[SimConfig] = None) -> List[PlanResult]:
    """Draw ``n`` plans; initiators are uniform over the feasible set unless ``bias`` is given."""
    if n < 1:
        raise ValueError("n must be at least 1")
    feasible, rejected = _candidates(scene, goal, duration, fps, config or SimConfig())
    if not feasible:
        raise NoFeasiblePlan(f"no feasible initiator for target {goal.target_id!r}", rejected)
    ids = sorted(feasible)
    rng = np.random.default_rng(seed)
    picks = rng.choice(len(ids), size=n, p=_weights(ids, bias))
    plans = []
    for k in picks:
        c = feasible[ids[k]]
        plans.append(PlanResult(c.force, c.time, c.goal_magnitude, True, list(rejected), list(ids)))
    return plans


def plan_goal_force(scene: Scene, goal: GoalForceSpec, seed: int = 0, **kwargs) -> PlanResult:
    """Plan one antecedent direct force for ``goal``; see :func:`sample_plans`."""
    return sample_plans(scene, goal, 1, seed, **kwargs)[0]
