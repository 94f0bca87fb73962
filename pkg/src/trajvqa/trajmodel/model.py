from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping

import numpy as np

from trajvqa.geom import RigidTransform


@dataclass(frozen=True)
class StereoPartner:
    right_camera_name: str
    baseline_m: float


@dataclass(frozen=True)
class CameraRig:
    name: str
    fx: float
    fy: float
    cx: float
    cy: float
    width: int
    height: int
    extrinsic: RigidTransform = field(default_factory=RigidTransform)
    stereo: StereoPartner | None = None

    @property
    def image_size(self) -> tuple[int, int]:
        return (self.width, self.height)

    def check(self) -> list[tuple[str, str]]:
        """Return ``(field, message)`` pairs for every violated invariant."""
        problems = []
        if not (self.fx > 0 and self.fy > 0):
            problems.append(("intrinsics", "fx and fy must be positive"))
        if not 0 <= self.cx < self.width:
            problems.append(("intrinsics.cx", f"cx={self.cx} outside [0, {self.width})"))
        if not 0 <= self.cy < self.height:
            problems.append(("intrinsics.cy", f"cy={self.cy} outside [0, {self.height})"))
        if abs(self.extrinsic.quat_norm() - 1.0) > 1e-6:
            problems.append(("extrinsic.q", "bad quaternion: norm differs from 1"))
        if self.stereo is not None and not self.stereo.baseline_m > 0:
            problems.append(("stereo.baseline_m", "baseline must be positive"))
        return problems


@dataclass(frozen=True)
class FrameObservation:
    time_s: float
    images: Mapping[str, str]
    ee_pose: RigidTransform
    gripper_raw: float
    depth: Mapping[str, str | None] = field(default_factory=dict)
    wrench: tuple[float, ...] | None = None

    @property
    def ee_position(self) -> np.ndarray:
        return np.asarray(self.ee_pose.translation)

    @property
    def force_magnitude(self) -> float | None:
        """Norm of the force part of the wrench; torque is ignored."""
        if self.wrench is None:
            return None
        fx, fy, fz = self.wrench[:3]
        return math.sqrt(fx * fx + fy * fy + fz * fz)


@dataclass(frozen=True)
class GripperRange:
    open_raw: float
    closed_raw: float


@dataclass(frozen=True)
class TargetObject:
    name: str
    point_world: tuple[float, float, float] | None = None


@dataclass(frozen=True)
class TrajectoryRecord:
    id: str
    instruction: str
    frames: tuple[FrameObservation, ...]
    cameras: tuple[CameraRig, ...]
    gripper_range: GripperRange
    success: bool | None = None
    target_object: TargetObject | None = None
    scene_tag: str | None = None
    # directory that media references are relative to
    root: Path = field(default=Path("."), compare=False)

    @property
    def T(self) -> int:
        return len(self.frames)

    def camera(self, name: str) -> CameraRig:
        for cam in self.cameras:
            if cam.name == name:
                return cam
        raise KeyError(name)

    def media_path(self, ref: str) -> Path:
        p = Path(ref)
        return p if p.is_absolute() else self.root / p

    def ee_positions(self) -> np.ndarray:
        return np.array([f.ee_pose.translation for f in self.frames])

    @property
    def object_point(self) -> np.ndarray | None:
        if self.target_object is None or self.target_object.point_world is None:
            return None
        return np.asarray(self.target_object.point_world, dtype=float)

    @property
    def has_force(self) -> bool:
        return any(f.wrench is not None for f in self.frames)

    def depth_ref(self, frame_index: int, camera: str) -> str | None:
        return self.frames[frame_index].depth.get(camera)


def normalize_aperture(raw: float, rng: GripperRange) -> float:
    """Map a raw gripper reading to [0, 1] with 0 = fully open and 1 = fully closed."""
    span = rng.closed_raw - rng.open_raw
    if span == 0:
        raise ValueError("degenerate gripper range: open_raw == closed_raw")
    s = (raw - rng.open_raw) / span
    return min(1.0, max(0.0, s))
