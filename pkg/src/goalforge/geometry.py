"""Vector helpers, camera projection and Gaussian blob fields.

Image convention: ``u`` grows rightward, ``v`` grows downward, origin at the
top-left, and pixel ``(row i, col j)`` has its center at ``(u=j, v=i)``.
Pixel angles are ``atan2(dv, du)`` in that frame, i.e. the counterclockwise
angle in a y-up frame, negated.
"""

import math
from dataclasses import dataclass
from typing import NamedTuple, Sequence, Tuple

import numpy as np

from .errors import DegenerateProjection, PointBehindCamera

Vec2 = Tuple[float, float]
Vec3 = Tuple[float, float, float]

FORCE_EPSILON = 1e-3
DEGENERATE_PX = 1e-9


def add(a, b):
    return tuple(x + y for x, y in zip(a, b))


def sub(a, b):
    return tuple(x - y for x, y in zip(a, b))


def scale(a, s):
    return tuple(x * s for x in a)


def dot(a, b):
    return sum(x * y for x, y in zip(a, b))


def norm(a):
    return math.sqrt(dot(a, a))


def normalize(a):
    n = norm(a)
    if n == 0.0:
        raise ValueError("cannot normalize a zero vector")
    return tuple(x / n for x in a)


def cross(a, b):
    return (
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    )


def unit(angle: float) -> Vec2:
    return (math.cos(angle), math.sin(angle))


def angle_of(v: Vec2) -> float:
    return math.atan2(v[1], v[0])


def wrap_angle(a: float) -> float:
    """Wrap to [-pi, pi)."""
    return (a + math.pi) % (2.0 * math.pi) - math.pi


class PixelPoint(NamedTuple):
    u: float
    v: float
    out_of_window: bool = False

    @property
    def uv(self) -> Vec2:
        return (self.u, self.v)


@dataclass(frozen=True)
class Camera:
    mode: str = "orthographic"
    position: Vec3 = (0.0, 0.0, 10.0)
    look_at: Vec3 = (0.0, 0.0, 0.0)
    up: Vec3 = (0.0, 1.0, 0.0)
    focal: float = 100.0
    image_size: Tuple[int, int] = (240, 416)  # (h, w)
    window: Vec2 = (10.4, 6.0)  # (width, height) meters, orthographic only

    def __post_init__(self):
        if self.mode not in ("orthographic", "pinhole"):
            raise ValueError(f"unknown camera mode {self.mode!r}")
        h, w = self.image_size
        if h <= 0 or w <= 0:
            raise ValueError("image size must be positive")
        if norm(sub(self.look_at, self.position)) == 0.0:
            raise ValueError("look-at must differ from camera position")
        if self.mode == "orthographic" and (self.window[0] <= 0 or self.window[1] <= 0):
            raise ValueError("orthographic window must be positive")
        if self.mode == "pinhole" and self.focal <= 0:
            raise ValueError("focal length must be positive")

    @classmethod
    def top_down(cls, center: Vec2, window: Vec2, image_size, height: float = 10.0):
        cx, cy = center
        return cls(
            mode="orthographic",
            position=(cx, cy, height),
            look_at=(cx, cy, 0.0),
            up=(0.0, 1.0, 0.0),
            image_size=tuple(image_size),
            window=tuple(window),
        )

    def basis(self):
        """Return (right, true_up, forward) unit vectors."""
        fwd = normalize(sub(self.look_at, self.position))
        right = cross(fwd, self.up)
        if norm(right) < 1e-12:
            raise ValueError("camera up vector is parallel to the view direction")
        right = normalize(right)
        true_up = cross(right, fwd)
        return right, true_up, fwd

    def to_camera(self, p: Sequence[float]) -> Vec3:
        right, up, fwd = self.basis()
        d = sub(_as3(p), self.position)
        return dot(d, right), dot(d, up), dot(d, fwd)

    def pixels_per_meter(self, depth: float = None) -> float:
        """Horizontal scale at the given depth (pinhole) or everywhere (orthographic)."""
        h, w = self.image_size
        if self.mode == "orthographic":
            return w / self.window[0]
        return self.focal / depth

    def to_dict(self):
        return {
            "mode": self.mode,
            "position": list(self.position),
            "look_at": list(self.look_at),
            "up": list(self.up),
            "focal": self.focal,
            "image_size": list(self.image_size),
            "window": list(self.window),
        }

    @classmethod
    def from_dict(cls, d):
        return cls(
            mode=d.get("mode", "orthographic"),
            position=tuple(d["position"]),
            look_at=tuple(d["look_at"]),
            up=tuple(d.get("up", (0.0, 1.0, 0.0))),
            focal=float(d.get("focal", 100.0)),
            image_size=tuple(int(x) for x in d["image_size"]),
            window=tuple(d.get("window", (10.4, 6.0))),
        )


def _as3(p) -> Vec3:
    if len(p) == 2:
        return (float(p[0]), float(p[1]), 0.0)
    return (float(p[0]), float(p[1]), float(p[2]))


def _raw_project(camera: Camera, p) -> Vec2:
    h, w = camera.image_size
    x, y, z = camera.to_camera(p)
    if camera.mode == "orthographic":
        return w / 2.0 + x * (w / camera.window[0]), h / 2.0 - y * (h / camera.window[1])
    if z <= 0.0:
        raise PointBehindCamera(f"point {tuple(p)} is at or behind the camera plane")
    return w / 2.0 + camera.focal * x / z, h / 2.0 - camera.focal * y / z


def project_point(camera: Camera, p) -> PixelPoint:
    """Map a world point to pixel coordinates.

    Points outside the image are clamped to ``[0, w-1] x [0, h-1]`` and the
    returned ``out_of_window`` flag is set.
    """
    h, w = camera.image_size
    u, v = _raw_project(camera, p)
    if 0.0 <= u < w and 0.0 <= v < h:
        return PixelPoint(u, v, False)
    return PixelPoint(min(max(u, 0.0), w - 1.0), min(max(v, 0.0), h - 1.0), True)


def project_force(camera: Camera, point, direction, magnitude: float):
    """Project a force at ``point`` along unit ``direction``.

    Returns ``(pixel point, pixel angle, magnitude)``; the magnitude is passed
    through untouched since it is already normalized within its domain.
    """
    d = _as3(direction)
    if abs(norm(d) - 1.0) > 1e-6:
        raise ValueError("force direction must be unit-norm")
    p = _as3(point)
    u0, v0 = _raw_project(camera, p)
    u1, v1 = _raw_project(camera, add(p, scale(d, FORCE_EPSILON)))
    du, dv = u1 - u0, v1 - v0
    if math.hypot(du, dv) < DEGENERATE_PX:
        raise DegenerateProjection("force direction projects to a zero-length image step")
    return project_point(camera, p), math.atan2(dv, du), magnitude


def world_to_pixel_angle(camera: Camera, point, angle: float) -> float:
    """Pixel angle of a planar world direction applied at ``point``."""
    c, s = unit(angle)
    return project_force(camera, point, (c, s, 0.0), 0.0)[1]


@dataclass(frozen=True)
class GaussianBlobCfg:
    sigma: float
    amplitude: float = 1.0

    def __post_init__(self):
        if not self.sigma > 0:
            raise ValueError("sigma must be positive")
        if not 0.0 < self.amplitude <= 1.0:
            raise ValueError("amplitude must lie in (0, 1]")


def gaussian_field(center: Vec2, cfg: GaussianBlobCfg, h: int, w: int) -> np.ndarray:
    """Evaluate ``amplitude * exp(-|p - c|^2 / (2 sigma^2))`` at every pixel center."""
    if h <= 0 or w <= 0:
        raise ValueError("field dimensions must be positive")
    cu, cv = center
    k = 1.0 / (2.0 * cfg.sigma * cfg.sigma)
    gu = np.exp(-((np.arange(w, dtype=np.float64) - cu) ** 2) * k)
    gv = np.exp(-((np.arange(h, dtype=np.float64) - cv) ** 2) * k)
    return cfg.amplitude * np.outer(gv, gu)
