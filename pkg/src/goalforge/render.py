"""Flat-shaded schematic rasterizer for simulated scenes."""

import math

import numpy as np

from . import geometry as gm

# fixed 16-color palette; color tags on scene objects index into it
PALETTE = {
    "white": (245, 245, 245),
    "black": (20, 20, 20),
    "red": (220, 40, 40),
    "orange": (245, 140, 30),
    "yellow": (240, 220, 40),
    "green": (40, 170, 70),
    "teal": (30, 150, 150),
    "blue": (40, 80, 220),
    "navy": (20, 30, 110),
    "purple": (130, 60, 180),
    "magenta": (220, 50, 170),
    "pink": (245, 160, 190),
    "brown": (120, 80, 40),
    "tan": (200, 170, 120),
    "ivory": (235, 230, 205),
    "gray": (128, 128, 128),
}
COLOR_NAMES = sorted(PALETTE)
BACKGROUND = (60, 110, 70)
OBSTACLE_COLOR = PALETTE["gray"]


def _grid(h, w):
    vv, uu = np.mgrid[0:h, 0:w]
    return uu.astype(np.float64), vv.astype(np.float64)


def _box(uu, lo_u, hi_u, lo_v, hi_v):
    """Index slices of the pixel grid covering [lo_u, hi_u] x [lo_v, hi_v]."""
    h, w = uu.shape
    u0, u1 = max(0, int(math.floor(lo_u))), min(w, int(math.ceil(hi_u)) + 1)
    v0, v1 = max(0, int(math.floor(lo_v))), min(h, int(math.ceil(hi_v)) + 1)
    if u0 >= u1 or v0 >= v1:
        return None
    return slice(v0, v1), slice(u0, u1)


def _disc(img, uu, vv, center, radius, color):
    box = _box(uu, center[0] - radius, center[0] + radius, center[1] - radius, center[1] + radius)
    if box is None:
        return
    su, sv = uu[box], vv[box]
    mask = (su - center[0]) ** 2 + (sv - center[1]) ** 2 <= radius * radius
    img[box][mask] = color


def _polygon(img, uu, vv, pts, color):
    """Fill a convex polygon given in pixel coordinates."""
    pts = np.asarray(pts, dtype=np.float64)
    box = _box(uu, pts[:, 0].min(), pts[:, 0].max(), pts[:, 1].min(), pts[:, 1].max())
    if box is None:
        return
    su, sv = uu[box], vv[box]
    n = len(pts)
    area = 0.0
    for i in range(n):
        a, b = pts[i], pts[(i + 1) % n]
        area += a[0] * b[1] - b[0] * a[1]
    sign = 1.0 if area >= 0 else -1.0
    mask = np.ones(su.shape, dtype=bool)
    for i in range(n):
        a, b = pts[i], pts[(i + 1) % n]
        mask &= sign * ((b[0] - a[0]) * (sv - a[1]) - (b[1] - a[1]) * (su - a[0])) >= 0
    img[box][mask] = color


def _capsule(img, uu, vv, a, b, radius, color):
    ab = (b[0] - a[0], b[1] - a[1])
    denom = ab[0] ** 2 + ab[1] ** 2
    if denom == 0:
        _disc(img, uu, vv, a, radius, color)
        return
    box = _box(uu, min(a[0], b[0]) - radius, max(a[0], b[0]) + radius,
               min(a[1], b[1]) - radius, max(a[1], b[1]) + radius)
    if box is None:
        return
    su, sv = uu[box], vv[box]
    s = np.clip(((su - a[0]) * ab[0] + (sv - a[1]) * ab[1]) / denom, 0.0, 1.0)
    du = su - (a[0] + s * ab[0])
    dv = sv - (a[1] + s * ab[1])
    img[box][du * du + dv * dv <= radius * radius] = color


def _px(camera, p, z=0.0):
    u, v = gm._raw_project(camera, (p[0], p[1], z))
    return (u, v)


def _px_radius(camera, center, radius, z):
    right, _, _ = camera.basis()
    c = _px(camera, center, z)
    e = _px(camera, (center[0] + radius * right[0], center[1] + radius * right[1]), z + radius * right[2])
    return math.hypot(e[0] - c[0], e[1] - c[1])


def _domino_footprint(d, tilt):
    """World-space footprint of a domino tilted by ``tilt`` (0 standing, 1 flat)."""
    ang = tilt * math.pi / 2.0
    ax = d.axis
    lat = (-ax[1], ax[0])
    back = -d.thickness / 2.0
    front = back + d.thickness * math.cos(ang) + d.height * math.sin(ang)
    hw = d.width / 2.0
    c = d.base_center
    return [
        gm.add(c, gm.add(gm.scale(ax, back), gm.scale(lat, -hw))),
        gm.add(c, gm.add(gm.scale(ax, front), gm.scale(lat, -hw))),
        gm.add(c, gm.add(gm.scale(ax, front), gm.scale(lat, hw))),
        gm.add(c, gm.add(gm.scale(ax, back), gm.scale(lat, hw))),
    ]


def render_frames(sim, camera=None, h=None, w=None, background=BACKGROUND) -> np.ndarray:
    """Rasterize every frame of ``sim`` into a uint8 array (f, h, w, 3)."""
    scene = sim.scene
    camera = camera or scene.camera
    if h is None or w is None:
        h, w = camera.image_size
    if h <= 0 or w <= 0:
        raise ValueError("image dimensions must be positive")
    if tuple(camera.image_size) != (h, w):
        camera = gm.Camera(camera.mode, camera.position, camera.look_at, camera.up,
                           camera.focal * h / camera.image_size[0], (h, w), camera.window)
    uu, vv = _grid(h, w)
    base = np.empty((h, w, 3), dtype=np.uint8)
    base[:] = background

    # static layer
    line_r = max(1.0, 0.5 * h / 120.0)
    for ob in scene.obstacles:
        if ob.kind == "segment":
            r = max(line_r, ob.thickness / 2.0 * camera.pixels_per_meter(_depth(camera, ob.a)))
            _capsule(base, uu, vv, _px(camera, ob.a), _px(camera, ob.b), r, OBSTACLE_COLOR)
        else:
            _polygon(base, uu, vv, [_px(camera, p) for p in ob.polygon()], OBSTACLE_COLOR)

    frames = np.empty((sim.n_frames, h, w, 3), dtype=np.uint8)
    for k in range(sim.n_frames):
        img = base.copy()
        for d in scene.dominos:
            tilt = float(sim.tilt[d.id][k])
            color = np.array(PALETTE.get(d.color, PALETTE["ivory"]), dtype=np.float64)
            if tilt >= 1.0:
                color = color * 0.5
            _polygon(img, uu, vv, [_px(camera, p) for p in _domino_footprint(d, tilt)],
                     color.astype(np.uint8))
        for o in scene.oscillators:
            tip = sim.positions[o.id][k]
            a = _px(camera, o.anchor)
            t = _px(camera, tip)
            _capsule(img, uu, vv, a, t, line_r, PALETTE["green"])
            _disc(img, uu, vv, a, 2.0 * line_r, PALETTE["brown"])
            _disc(img, uu, vv, t, 4.0 * line_r, PALETTE.get(o.color, PALETTE["magenta"]))
        for b in scene.balls:
            p = sim.positions[b.id][k]
            z = b.radius
            if camera.mode == "pinhole" and camera.to_camera((p[0], p[1], z))[2] <= 0:
                continue
            _disc(img, uu, vv, _px(camera, p, z), _px_radius(camera, p, b.radius, z),
                  PALETTE.get(b.color, PALETTE["white"]))
        frames[k] = img
    return frames


def _depth(camera, p):
    return max(camera.to_camera((p[0], p[1], 0.0))[2], 1e-9)
