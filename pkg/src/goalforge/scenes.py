"""Canonical demo scenes and scene-file loading."""

import json
import re
from pathlib import Path

import numpy as np

from . import geometry as gm
from .errors import ConfigError, InvalidScene
from .physics import Ball, Domino, Obstacle, Scene, topple_threshold
from .planner import GoalForceSpec

DEMOS = ("dominos6", "pool-blocker", "mass-grid-<mp>-<mt>")
MASS_GRID_GOAL = 0.2


def _ball_camera(resolution):
    h, w = resolution
    return gm.Camera.top_down((0.0, 0.0), (6.0 * w / h, 6.0), (h, w))


def dominos6(resolution=(240, 416)):
    """Six dominos in a line along +x; the goal topples the last one."""
    h, w = resolution
    dominos = [Domino(f"domino_{i}", (-0.75 + 0.3 * i, 0.0), 0.0) for i in range(6)]
    thr = topple_threshold(dominos[0], dominos[0].height)
    scene = Scene(dominos=dominos, camera=gm.Camera.top_down((0.0, 0.0), (4.0 * w / h, 4.0), (h, w)),
                  bounds=(-2.0 * w / h, -2.0, 2.0 * w / h, 2.0), family="dominos",
                  force_range=(thr, 20.0 * thr), goal_range=(0.0, 4.0), mass_range=(0.05, 0.2))
    return scene, GoalForceSpec("domino_5", 0.0, 0.5)


def pool_blocker(resolution=(240, 416)):
    """Pool-style scene: the white ball is free, a cue stick blocks the orange ball."""
    target = Ball("red", (1.0, 0.0), 0.2, 2.0, color="red")
    white = Ball("white", (-1.5, 0.0), 0.2, 2.0, color="white")
    orange = Ball("orange", (-1.2, -1.2), 0.2, 2.0, color="orange")
    contact = (0.6, 0.0)
    u = gm.normalize(gm.sub(contact, orange.position))
    mid = gm.add(orange.position, gm.scale(gm.sub(contact, orange.position), 0.5))
    lat = (-u[1], u[0])
    stick = Obstacle("cue_stick", "segment", gm.sub(mid, gm.scale(lat, 0.35)), gm.add(mid, gm.scale(lat, 0.35)), 0.06)
    h, w = resolution
    scene = Scene(balls=[target, white, orange], obstacles=[stick], camera=_ball_camera(resolution),
                  bounds=(-3.0 * w / h, -3.0, 3.0 * w / h, 3.0), family="balls")
    return scene, GoalForceSpec("red", 0.0, 0.2)


def mass_grid(m_p: float, m_t: float, seed: int = 0, resolution=(240, 416)):
    """Head-on projectile/target pair with a fixed goal speed; ``seed`` jitters the distance."""
    rng = np.random.default_rng(seed)
    d = 2.0 + float(rng.uniform(-0.3, 0.3))
    h, w = resolution
    scene = Scene(balls=[Ball("projectile", (-d, 0.0), 0.2, float(m_p), color="white"),
                         Ball("target", (0.0, 0.0), 0.2, float(m_t), color="red")],
                  camera=_ball_camera(resolution), bounds=(-3.0 * w / h, -3.0, 3.0 * w / h, 3.0), family="balls")
    return scene, GoalForceSpec("target", 0.0, MASS_GRID_GOAL)


def demo_scene(name: str, seed: int = 0, resolution=(240, 416)):
    if name == "dominos6":
        return dominos6(resolution)
    if name == "pool-blocker":
        return pool_blocker(resolution)
    m = re.fullmatch(r"mass-grid-([0-9.]+)-([0-9.]+)", name)
    if m:
        return mass_grid(float(m.group(1)), float(m.group(2)), seed, resolution)
    raise ConfigError(f"unknown demo {name!r}; choose from {', '.join(DEMOS)}", code="unknown-demo")


def load_scene(path):
    """Load a scene JSON file; returns ``(scene, goal or None)``.

    The file holds either a bare scene object or ``{"scene": ..., "goal": ...}``.
    """
    try:
        data = json.loads(Path(path).read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise InvalidScene(f"cannot read scene file {path}: {exc}") from exc
    goal = None
    if "scene" in data:
        g = data.get("goal")
        if g is not None:
            goal = GoalForceSpec(g["target_id"], float(g["direction"]), float(g["magnitude"]),
                                 tuple(g["time_window"]) if g.get("time_window") else None)
        data = data["scene"]
    return Scene.from_dict(data), goal


def save_scene(path, scene: Scene, goal=None):
    payload = {"scene": scene.to_dict(), "goal": None if goal is None else goal.to_dict()}
    Path(path).write_text(json.dumps(payload, sort_keys=True, indent=1), encoding="utf-8")
