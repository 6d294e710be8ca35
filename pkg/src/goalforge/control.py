"""The f x 3 x h x w control tensor: direct force, goal force and mass channels.

Force channels are moving Gaussian blobs whose path length and duration grow
affinely with the normalized magnitude. The mass channel holds one static blob
per object with a width affine in its mass. Overlapping mass blobs combine by
per-pixel maximum so every value stays in [0, 1].
"""

import math
import os
import struct
from dataclasses import asdict, dataclass
from typing import Optional, Sequence, Tuple

import numpy as np

from .errors import (
    BadMagic,
    BadVersion,
    DimensionMismatch,
    DurationOverflow,
    MassOutOfRange,
    MissingChannel,
    ShapeMismatch,
    TensorIOError,
)
from .geometry import GaussianBlobCfg, gaussian_field

DIRECT, GOAL, MASS = 0, 1, 2
MAGIC = b"GFCT"
VERSION = 1
HEADER = struct.Struct("<4sIIII")  # magic, version, f, h, w
TINTS = np.array([[255.0, 0.0, 0.0], [0.0, 255.0, 0.0], [0.0, 0.0, 255.0]])


@dataclass(frozen=True)
class EncodingCfg:
    sigma_frac: float = 0.02
    path_min: float = 0.05
    path_max: float = 0.35
    frames_min: int = 12
    frames_max: int = 81
    mass_sigma_min: float = 6.0  # px at reference_height
    mass_sigma_max: float = 24.0
    reference_height: int = 240
    mass_lo: float = 1.0
    mass_hi: float = 4.0
    amplitude: float = 1.0

    def __post_init__(self):
        if not (0 < self.path_min <= self.path_max and 0 < self.frames_min <= self.frames_max
                and 0 < self.mass_sigma_min <= self.mass_sigma_max and self.mass_lo < self.mass_hi):
            raise ValueError("encoding ranges must be positive and ordered")
        if self.sigma_frac <= 0:
            raise ValueError("sigma_frac must be positive")

    def to_dict(self):
        return asdict(self)


@dataclass(frozen=True)
class MaskPolicy:
    mode: str = "random-causal"
    p_goal: float = 0.5
    p_massdrop: float = 0.5

    def __post_init__(self):
        if self.mode not in ("direct-only", "goal-only", "random-causal"):
            raise ValueError(f"unknown mask mode {self.mode!r}")
        if not (0.0 <= self.p_goal <= 1.0 and 0.0 <= self.p_massdrop <= 1.0):
            raise ValueError("mask probabilities must lie in [0, 1]")

    def to_dict(self):
        return asdict(self)


@dataclass(frozen=True)
class ControlTensor:
    data: np.ndarray  # float32, (f, 3, h, w)

    def __post_init__(self):
        d = self.data
        if d.ndim != 4 or d.shape[1] != 3:
            raise ValueError(f"control tensor must be f x 3 x h x w, got {d.shape}")
        if d.dtype != np.float32:
            object.__setattr__(self, "data", d.astype(np.float32))
        if d.size and (np.nanmin(d) < 0.0 or np.nanmax(d) > 1.0 or np.isnan(d).any()):
            raise ValueError("control tensor values must lie in [0, 1]")

    @property
    def shape(self):
        return self.data.shape

    @property
    def frames(self) -> int:
        return self.data.shape[0]

    @property
    def height(self) -> int:
        return self.data.shape[2]

    @property
    def width(self) -> int:
        return self.data.shape[3]

    def channel(self, c: int) -> np.ndarray:
        return self.data[:, c]

    def active(self, c: int) -> bool:
        return bool(np.any(self.data[:, c]))


def blob_sigma(cfg: EncodingCfg, h: int, w: int) -> float:
    return cfg.sigma_frac * math.hypot(h, w)


def force_duration(magnitude: float, cfg: EncodingCfg) -> int:
    return int(round(cfg.frames_min + magnitude * (cfg.frames_max - cfg.frames_min)))


def force_path_length(magnitude: float, cfg: EncodingCfg, h: int, w: int) -> float:
    return (cfg.path_min + magnitude * (cfg.path_max - cfg.path_min)) * math.hypot(h, w)


def blob_centers(point, angle: float, magnitude: float, cfg: EncodingCfg, h: int, w: int):
    """Per-active-frame blob centers of a force blob (frame 0 = application point)."""
    n = force_duration(magnitude, cfg)
    L = force_path_length(magnitude, cfg, h, w)
    s = np.linspace(0.0, 1.0, n) if n > 1 else np.zeros(1)
    return np.stack([point[0] + s * L * math.cos(angle), point[1] + s * L * math.sin(angle)], axis=1)


def encode_force_channel(point, angle: float, magnitude: float, start_frame: int, cfg: EncodingCfg,
                         f: int, h: int, w: int) -> np.ndarray:
    """Moving blob starting at ``point`` (pixels) and heading along pixel ``angle``."""
    if not 0.0 <= magnitude <= 1.0:
        raise ValueError("magnitude must lie in [0, 1]")
    duration = force_duration(magnitude, cfg)
    if start_frame < 0 or start_frame + duration > f:
        raise DurationOverflow(f"blob spans frames {start_frame}..{start_frame + duration - 1} but clip has {f}")
    blob = GaussianBlobCfg(blob_sigma(cfg, h, w), cfg.amplitude)
    out = np.zeros((f, h, w), dtype=np.float32)
    for k, c in enumerate(blob_centers(point, angle, magnitude, cfg, h, w)):
        out[start_frame + k] = gaussian_field((c[0], c[1]), blob, h, w)
    return out


def encode_goal_channel(point, angle: float, magnitude: float, cfg: EncodingCfg, f: int, h: int, w: int):
    """Goal blob anchored on the target's initial pixel position, starting at frame 0."""
    return encode_force_channel(point, angle, magnitude, 0, cfg, f, h, w)


def mass_sigma(mass: float, cfg: EncodingCfg, h: int) -> float:
    if not cfg.mass_lo <= mass <= cfg.mass_hi:
        raise MassOutOfRange(f"mass {mass} outside [{cfg.mass_lo}, {cfg.mass_hi}]")
    frac = (mass - cfg.mass_lo) / (cfg.mass_hi - cfg.mass_lo)
    px_scale = h / cfg.reference_height
    return (cfg.mass_sigma_min + frac * (cfg.mass_sigma_max - cfg.mass_sigma_min)) * px_scale


def encode_mass_channel(objects: Sequence[Tuple[Sequence[float], float]], cfg: EncodingCfg,
                        f: int, h: int, w: int) -> np.ndarray:
    frame = np.zeros((h, w), dtype=np.float64)
    for point, mass in objects:
        blob = GaussianBlobCfg(mass_sigma(mass, cfg, h), cfg.amplitude)
        np.maximum(frame, gaussian_field((point[0], point[1]), blob, h, w), out=frame)
    return np.repeat(frame.astype(np.float32)[None], f, axis=0)


def assemble(direct: Optional[np.ndarray], goal: Optional[np.ndarray], mass: Optional[np.ndarray],
             policy: MaskPolicy, seed: int = 0) -> Tuple[ControlTensor, dict]:
    """Combine channels under the masking curriculum.

    Returns the tensor and a dict recording which channels were kept.
    """
    present = [c for c in (direct, goal, mass) if c is not None]
    if not present:
        raise MissingChannel("no channels supplied")
    shape = present[0].shape
    if any(c.shape != shape for c in present):
        raise DimensionMismatch("channel shapes differ")
    rng = np.random.default_rng(seed)
    # draw both variates unconditionally so the stream layout never depends on inputs
    u_causal, u_mass = rng.random(2)

    if policy.mode == "direct-only":
        if direct is None:
            raise MissingChannel("direct-only policy needs a direct channel")
        use = "direct"
    elif policy.mode == "goal-only":
        if goal is None:
            raise MissingChannel("goal-only policy needs a goal channel")
        use = "goal"
    else:
        if direct is None and goal is None:
            raise MissingChannel("random-causal policy needs a direct or goal channel")
        if goal is None:
            use = "direct"
        elif direct is None:
            use = "goal"
        else:
            use = "goal" if u_causal < policy.p_goal else "direct"
    keep_mass = mass is not None and not u_mass < policy.p_massdrop

    data = np.zeros((shape[0], 3) + shape[1:], dtype=np.float32)
    if use == "direct":
        data[:, DIRECT] = direct
    else:
        data[:, GOAL] = goal
    if keep_mass:
        data[:, MASS] = mass
    return ControlTensor(data), {"causal": use, "mass": bool(keep_mass)}


def overlay(frames: np.ndarray, tensor: ControlTensor, alpha: float) -> np.ndarray:
    """Alpha-blend the channels over RGB ``frames`` (red=direct, green=goal, blue=mass)."""
    if not 0.0 <= alpha <= 1.0:
        raise ValueError("alpha must lie in [0, 1]")
    frames = np.asarray(frames)
    f, _, h, w = tensor.shape
    if frames.shape != (f, h, w, 3):
        raise DimensionMismatch(f"frames {frames.shape} do not match tensor {tensor.shape}")
    out = frames.astype(np.float64)
    for c in range(3):
        a = alpha * tensor.data[:, c].astype(np.float64)[..., None]
        out = (1.0 - a) * out + a * TINTS[c]
    return np.clip(np.rint(out), 0, 255).astype(np.uint8)


def write_tensor(tensor: ControlTensor, path) -> None:
    f, _, h, w = tensor.shape
    payload = np.ascontiguousarray(tensor.data, dtype="<f4").tobytes()
    try:
        with open(path, "wb") as fh:
            fh.write(HEADER.pack(MAGIC, VERSION, f, h, w))
            fh.write(payload)
    except OSError as exc:
        raise TensorIOError(str(exc)) from exc


def read_tensor(path) -> ControlTensor:
    try:
        with open(path, "rb") as fh:
            raw = fh.read()
    except OSError as exc:
        raise TensorIOError(str(exc)) from exc
    if len(raw) < 4 or raw[:4] != MAGIC:
        raise BadMagic(f"{os.fspath(path)}: not a GFCT file")
    if len(raw) < HEADER.size:
        raise ShapeMismatch(f"{os.fspath(path)}: truncated header")
    _, version, f, h, w = HEADER.unpack_from(raw)
    if version != VERSION:
        raise BadVersion(f"{os.fspath(path)}: unsupported version {version}")
    expected = f * 3 * h * w * 4
    if len(raw) - HEADER.size != expected:
        raise ShapeMismatch(f"{os.fspath(path)}: payload has {len(raw) - HEADER.size} bytes, "
                            f"header declares {expected}")
    data = np.frombuffer(raw, dtype="<f4", offset=HEADER.size).reshape(f, 3, h, w)
    return ControlTensor(data.astype(np.float32))
