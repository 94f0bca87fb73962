"""Rigid transforms and pinhole camera math.

Conventions used throughout the package:

* quaternions are stored ``(w, x, y, z)``;
* a camera extrinsic maps *world* coordinates to *camera* coordinates;
* camera axes are x-right, y-down, z-forward (optical axis).
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import TYPE_CHECKING, Sequence

import numpy as np

if TYPE_CHECKING:  # pragma: no cover
    from trajvqa.trajmodel.model import CameraRig

QUAT_TOL = 1e-9
MIN_DIRECTION_NORM = 0.01  # meters
MIN_DEPTH = 1e-6  # meters


@dataclass(frozen=True)
class RigidTransform:
    translation: tuple[float, float, float] = (0.0, 0.0, 0.0)
    rotation: tuple[float, float, float, float] = (1.0, 0.0, 0.0, 0.0)

    def __post_init__(self):
        object.__setattr__(self, "translation", tuple(float(v) for v in self.translation))
        object.__setattr__(self, "rotation", tuple(float(v) for v in self.rotation))
        if len(self.translation) != 3 or len(self.rotation) != 4:
            raise ValueError("translation must have 3 entries and rotation 4 (wxyz)")

    @classmethod
    def identity(cls) -> "RigidTransform":
        return cls()

    @classmethod
    def from_matrix(cls, rot: np.ndarray, trans: Sequence[float]) -> "RigidTransform":
        return cls(tuple(trans), matrix_to_quat(rot))

    def quat_norm(self) -> float:
        return math.sqrt(sum(q * q for q in self.rotation))

    def matrix(self) -> np.ndarray:
        return quat_to_matrix(self.rotation)

    def apply(self, p) -> np.ndarray:
        return transform_point(self, p)

    def inverse(self) -> "RigidTransform":
        return invert(self)

    def __matmul__(self, other: "RigidTransform") -> "RigidTransform":
        return compose(self, other)


def quat_to_matrix(q: Sequence[float]) -> np.ndarray:
    w, x, y, z = q
    n = w * w + x * x + y * y + z * z
    s = 2.0 / n
    return np.array(
        [
            [1 - s * (y * y + z * z), s * (x * y - w * z), s * (x * z + w * y)],
            [s * (x * y + w * z), 1 - s * (x * x + z * z), s * (y * z - w * x)],
            [s * (x * z - w * y), s * (y * z + w * x), 1 - s * (x * x + y * y)],
        ]
    )


def matrix_to_quat(m: np.ndarray) -> tuple[float, float, float, float]:
    """Shepperd's method; returns the quaternion with w >= 0."""
    m = np.asarray(m, dtype=float)
    tr = m[0, 0] + m[1, 1] + m[2, 2]
    if tr > 0:
        s = math.sqrt(tr + 1.0) * 2
        w, x, y, z = 0.25 * s, (m[2, 1] - m[1, 2]) / s, (m[0, 2] - m[2, 0]) / s, (m[1, 0] - m[0, 1]) / s
    elif m[0, 0] > m[1, 1] and m[0, 0] > m[2, 2]:
        s = math.sqrt(1.0 + m[0, 0] - m[1, 1] - m[2, 2]) * 2
        w, x, y, z = (m[2, 1] - m[1, 2]) / s, 0.25 * s, (m[0, 1] + m[1, 0]) / s, (m[0, 2] + m[2, 0]) / s
    elif m[1, 1] > m[2, 2]:
        s = math.sqrt(1.0 + m[1, 1] - m[0, 0] - m[2, 2]) * 2
        w, x, y, z = (m[0, 2] - m[2, 0]) / s, (m[0, 1] + m[1, 0]) / s, 0.25 * s, (m[1, 2] + m[2, 1]) / s
    else:
        s = math.sqrt(1.0 + m[2, 2] - m[0, 0] - m[1, 1]) * 2
        w, x, y, z = (m[1, 0] - m[0, 1]) / s, (m[0, 2] + m[2, 0]) / s, (m[1, 2] + m[2, 1]) / s, 0.25 * s
    q = np.array([w, x, y, z])
    q /= np.linalg.norm(q)
    if q[0] < 0:
        q = -q
    return tuple(float(v) for v in q)


def quat_mul(a: Sequence[float], b: Sequence[float]) -> tuple[float, float, float, float]:
    aw, ax, ay, az = a
    bw, bx, by, bz = b
    return (
        aw * bw - ax * bx - ay * by - az * bz,
        aw * bx + ax * bw + ay * bz - az * by,
        aw * by - ax * bz + ay * bw + az * bx,
        aw * bz + ax * by - ay * bx + az * bw,
    )


def quat_about_axis(axis: Sequence[float], angle_rad: float) -> tuple[float, float, float, float]:
    a = np.asarray(axis, dtype=float)
    a = a / np.linalg.norm(a)
    h = angle_rad / 2.0
    return (math.cos(h), *(float(v) for v in a * math.sin(h)))


def transform_point(x: RigidTransform, p) -> np.ndarray:
    return x.matrix() @ np.asarray(p, dtype=float) + np.asarray(x.translation)


def compose(a: RigidTransform, b: RigidTransform) -> RigidTransform:
    """``compose(a, b)`` applies ``b`` first, then ``a``."""
    q = np.array(quat_mul(a.rotation, b.rotation))
    q /= np.linalg.norm(q)
    t = transform_point(a, b.translation)
    return RigidTransform(tuple(t), tuple(q))


def invert(x: RigidTransform) -> RigidTransform:
    w, qx, qy, qz = x.rotation
    n = x.quat_norm()
    conj = (w / n, -qx / n, -qy / n, -qz / n)
    t = -(quat_to_matrix(conj) @ np.asarray(x.translation))
    return RigidTransform(tuple(t), conj)


def geodesic_angle(q1: Sequence[float], q2: Sequence[float]) -> float:
    """Rotation angle (radians) between two orientations."""
    a = np.asarray(q1, dtype=float)
    b = np.asarray(q2, dtype=float)
    d = abs(float(a @ b) / (np.linalg.norm(a) * np.linalg.norm(b)))
    return 2.0 * math.acos(min(1.0, d))


def look_at(eye: Sequence[float], target: Sequence[float], up=(0.0, 0.0, 1.0)) -> RigidTransform:
    """World-to-camera extrinsic for a camera at ``eye`` looking at ``target``."""
    eye = np.asarray(eye, dtype=float)
    fwd = np.asarray(target, dtype=float) - eye
    fwd /= np.linalg.norm(fwd)
    right = np.cross(fwd, np.asarray(up, dtype=float))
    right /= np.linalg.norm(right)
    down = np.cross(fwd, right)
    rot = np.stack([right, down, fwd])  # rows: camera axes in world coordinates
    return RigidTransform.from_matrix(rot, -(rot @ eye))


# ---------------------------------------------------------------------------
# pinhole camera


def world_to_camera(cam: "CameraRig", p_world) -> np.ndarray:
    return transform_point(cam.extrinsic, p_world)


def project_camera_point(cam: "CameraRig", p_cam) -> tuple[float, float] | None:
    x, y, z = (float(v) for v in p_cam)
    if z <= MIN_DEPTH:
        return None
    return (cam.fx * x / z + cam.cx, cam.fy * y / z + cam.cy)


def project(cam: "CameraRig", p_world) -> tuple[float, float] | None:
    """Pixel coordinates of a world point, or ``None`` when it is behind the camera."""
    return project_camera_point(cam, world_to_camera(cam, p_world))


def in_image(cam: "CameraRig", uv: tuple[float, float] | None, margin: float = 0.0) -> bool:
    if uv is None:
        return False
    u, v = uv
    return margin <= u < cam.width - margin and margin <= v < cam.height - margin


def backproject(cam: "CameraRig", uv: tuple[float, float], depth: float) -> np.ndarray:
    if not depth > 0:
        raise ValueError(f"depth must be positive, got {depth}")
    u, v = uv
    if not (0 <= u < cam.width and 0 <= v < cam.height):
        raise ValueError(f"pixel {uv} outside {cam.width}x{cam.height} image")
    p_cam = np.array([(u - cam.cx) * depth / cam.fx, (v - cam.cy) * depth / cam.fy, depth])
    return transform_point(invert(cam.extrinsic), p_cam)


def depth_from_disparity(disparity_px: float, fx: float, baseline_m: float) -> float:
    if not disparity_px > 0:
        raise ValueError(f"disparity must be positive, got {disparity_px}")
    return fx * baseline_m / disparity_px


# ---------------------------------------------------------------------------
# directions

VERTICAL = ("Upper", "Lower")
HORIZONTAL = ("Left", "Right")
DEPTH = ("Forward", "Backward")


@dataclass(frozen=True)
class DirectionLabel:
    vertical: str | None = None
    horizontal: str | None = None
    depth: str | None = None

    def __post_init__(self):
        if self.vertical not in (None, *VERTICAL):
            raise ValueError(f"bad vertical component {self.vertical!r}")
        if self.horizontal not in (None, *HORIZONTAL):
            raise ValueError(f"bad horizontal component {self.horizontal!r}")
        if self.depth not in (None, *DEPTH):
            raise ValueError(f"bad depth component {self.depth!r}")
        if self.vertical is None and self.horizontal is None and self.depth is None:
            raise ValueError("direction label needs at least one component")

    @property
    def components(self) -> tuple[str, ...]:
        return tuple(c for c in (self.vertical, self.horizontal, self.depth) if c is not None)

    @property
    def text(self) -> str:
        return " ".join(self.components)

    def __str__(self) -> str:
        return self.text

    def opposite(self) -> "DirectionLabel":
        flip = {"Upper": "Lower", "Lower": "Upper", "Left": "Right", "Right": "Left",
                "Forward": "Backward", "Backward": "Forward", None: None}
        return DirectionLabel(flip[self.vertical], flip[self.horizontal], flip[self.depth])

    def shares_component(self, other: "DirectionLabel") -> bool:
        return bool(set(self.components) & set(other.components))

    @classmethod
    def parse(cls, text: str) -> "DirectionLabel":
        parts = text.split()
        kw = {}
        for p in parts:
            if p in VERTICAL:
                kw["vertical"] = p
            elif p in HORIZONTAL:
                kw["horizontal"] = p
            elif p in DEPTH:
                kw["depth"] = p
            else:
                raise ValueError(f"unknown direction component {p!r}")
        return cls(**kw)


def all_direction_labels() -> list[DirectionLabel]:
    """The 26 non-empty combinations, in a fixed order."""
    out = []
    for v, h, d in itertools.product((None, *VERTICAL), (None, *HORIZONTAL), (None, *DEPTH)):
        if v is None and h is None and d is None:
            continue
        out.append(DirectionLabel(v, h, d))
    return out


def direction_bucket(v, theta: float = 0.33) -> DirectionLabel | None:
    """Bucket a camera-frame displacement; ``None`` when it is shorter than 1 cm."""
    x, y, z = (float(c) for c in v)
    norm = math.sqrt(x * x + y * y + z * z)
    if norm < MIN_DIRECTION_NORM:
        return None
    cut = theta * norm
    vert = ("Upper" if y < 0 else "Lower") if abs(y) > cut else None
    horiz = ("Right" if x > 0 else "Left") if abs(x) > cut else None
    depth = ("Forward" if z > 0 else "Backward") if abs(z) > cut else None
    return DirectionLabel(vert, horiz, depth)


def angular_separation(a: Sequence[float], b: Sequence[float]) -> float:
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    na, nb = np.linalg.norm(a), np.linalg.norm(b)
    if na == 0 or nb == 0:
        raise ValueError("angular separation of a zero vector is undefined")
    c = float(a @ b) / (na * nb)
    return math.degrees(math.acos(max(-1.0, min(1.0, c))))
