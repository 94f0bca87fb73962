"""JSON manifest reading/writing and PFM depth maps."""

from __future__ import annotations

import json
import math
import re
from pathlib import Path
from typing import Any

import jsonschema
import numpy as np
from PIL import Image

from trajvqa.geom import RigidTransform
from trajvqa.trajmodel.model import (
    CameraRig,
    FrameObservation,
    GripperRange,
    StereoPartner,
    TargetObject,
    TrajectoryRecord,
)

QUAT_NORM_TOL = 1e-6


class ManifestError(ValueError):
    def __init__(self, traj_id: str | None, path: str, message: str):
        self.traj_id = traj_id
        self.path = path
        self.message = message
        super().__init__(f"{traj_id or '<unknown>'}: {path}: {message}")


def _obj(props: dict, required: list[str], strict: bool) -> dict:
    schema: dict[str, Any] = {"type": "object", "properties": props, "required": required}
    if strict:
        schema["additionalProperties"] = False
    return schema


def manifest_schema(strict: bool = False) -> dict:
    num = {"type": "number"}
    vec3 = {"type": "array", "items": num, "minItems": 3, "maxItems": 3}
    vec4 = {"type": "array", "items": num, "minItems": 4, "maxItems": 4}
    pose = _obj({"t": vec3, "q": vec4}, ["t", "q"], strict)
    camera = _obj(
        {
            "name": {"type": "string", "minLength": 1},
            "intrinsics": _obj({k: num for k in ("fx", "fy", "cx", "cy")}, ["fx", "fy", "cx", "cy"], strict),
            "image_size": _obj({"w": {"type": "integer"}, "h": {"type": "integer"}}, ["w", "h"], strict),
            "extrinsic": pose,
            "stereo": {
                "oneOf": [
                    {"type": "null"},
                    _obj({"right_camera_name": {"type": "string"}, "baseline_m": num},
                         ["right_camera_name", "baseline_m"], strict),
                ]
            },
        },
        ["name", "intrinsics", "image_size", "extrinsic"],
        strict,
    )
    frame = _obj(
        {
            "time_s": num,
            "images": {"type": "object", "additionalProperties": {"type": "string"}},
            "depth": {"type": "object", "additionalProperties": {"type": ["string", "null"]}},
            "ee_pose": pose,
            "gripper_raw": num,
            "wrench": {
                "oneOf": [{"type": "null"}, {"type": "array", "items": num, "minItems": 6, "maxItems": 6}]
            },
        },
        ["time_s", "images", "ee_pose", "gripper_raw"],
        strict,
    )
    return _obj(
        {
            "id": {"type": "string", "minLength": 1},
            "instruction": {"type": "string"},
            "success": {"type": ["boolean", "null"]},
            "scene_tag": {"type": ["string", "null"]},
            "gripper_range": _obj({"open_raw": num, "closed_raw": num}, ["open_raw", "closed_raw"], strict),
            "target_object": {
                "oneOf": [
                    {"type": "null"},
                    _obj({"name": {"type": "string"}, "point_world": {"oneOf": [{"type": "null"}, vec3]}},
                         ["name"], strict),
                ]
            },
            "cameras": {"type": "array", "items": camera, "minItems": 1},
            "frames": {"type": "array", "items": frame, "minItems": 1},
        },
        ["id", "instruction", "gripper_range", "cameras", "frames"],
        strict,
    )


def _field_path(parts) -> str:
    out = ""
    for p in parts:
        out += f"[{p}]" if isinstance(p, int) else (f".{p}" if out else str(p))
    return out or "<root>"


def _pose(d: dict) -> RigidTransform:
    return RigidTransform(tuple(d["t"]), tuple(d["q"]))


def _pose_dict(x: RigidTransform) -> dict:
    return {"t": list(x.translation), "q": list(x.rotation)}


def record_from_dict(data: dict, root: Path = Path("."), strict: bool = False) -> TrajectoryRecord:
    """Validate a parsed manifest (schema and invariants) and build the record.

    Media files are not touched here; see :func:`check_media`.
    """
    traj_id = data.get("id") if isinstance(data, dict) else None
    validator = jsonschema.Draft7Validator(manifest_schema(strict))
    errors = sorted(validator.iter_errors(data), key=lambda e: list(e.absolute_path))
    if errors:
        e = errors[0]
        raise ManifestError(traj_id, _field_path(e.absolute_path), f"schema violation: {e.message}")

    cameras = []
    for i, c in enumerate(data["cameras"]):
        st = c.get("stereo")
        cam = CameraRig(
            name=c["name"],
            fx=c["intrinsics"]["fx"],
            fy=c["intrinsics"]["fy"],
            cx=c["intrinsics"]["cx"],
            cy=c["intrinsics"]["cy"],
            width=c["image_size"]["w"],
            height=c["image_size"]["h"],
            extrinsic=_pose(c["extrinsic"]),
            stereo=StereoPartner(st["right_camera_name"], st["baseline_m"]) if st else None,
        )
        for fld, msg in cam.check():
            raise ManifestError(traj_id, f"cameras[{i}].{fld}", msg)
        cameras.append(cam)
    names = [c.name for c in cameras]
    if len(set(names)) != len(names):
        raise ManifestError(traj_id, "cameras", "duplicate camera names")
    for i, cam in enumerate(cameras):
        if cam.stereo is not None and cam.stereo.right_camera_name not in names:
            raise ManifestError(traj_id, f"cameras[{i}].stereo.right_camera_name",
                                f"unknown camera {cam.stereo.right_camera_name!r}")

    gr = GripperRange(data["gripper_range"]["open_raw"], data["gripper_range"]["closed_raw"])
    if gr.open_raw == gr.closed_raw:
        raise ManifestError(traj_id, "gripper_range", "degenerate gripper range: open_raw == closed_raw")

    frames = []
    prev_t = -math.inf
    for i, f in enumerate(data["frames"]):
        if not f["time_s"] > prev_t:
            raise ManifestError(traj_id, f"frames[{i}].time_s", "non-monotone timestamps")
        prev_t = f["time_s"]
        pose = _pose(f["ee_pose"])
        if abs(pose.quat_norm() - 1.0) > QUAT_NORM_TOL:
            raise ManifestError(traj_id, f"frames[{i}].ee_pose.q", "bad quaternion: norm differs from 1")
        for key in (*f["images"], *f.get("depth", {})):
            if key not in names:
                raise ManifestError(traj_id, f"frames[{i}]", f"camera {key!r} not in camera list")
        wrench = f.get("wrench")
        frames.append(
            FrameObservation(
                time_s=f["time_s"],
                images=dict(f["images"]),
                ee_pose=pose,
                gripper_raw=f["gripper_raw"],
                depth=dict(f.get("depth", {})),
                wrench=tuple(float(w) for w in wrench) if wrench is not None else None,
            )
        )

    tobj = data.get("target_object")
    target = None
    if tobj is not None:
        pt = tobj.get("point_world")
        target = TargetObject(tobj["name"], tuple(float(v) for v in pt) if pt is not None else None)

    return TrajectoryRecord(
        id=data["id"],
        instruction=data["instruction"],
        frames=tuple(frames),
        cameras=tuple(cameras),
        gripper_range=gr,
        success=data.get("success"),
        target_object=target,
        scene_tag=data.get("scene_tag"),
        root=root,
    )


def check_media(rec: TrajectoryRecord) -> None:
    """Every referenced image/depth file must exist and have a parseable header of the rig's size."""
    seen: dict[str, tuple[int, int]] = {}
    for i, f in enumerate(rec.frames):
        for kind, refs in (("images", f.images), ("depth", f.depth)):
            for cam_name, ref in refs.items():
                if ref is None:
                    continue
                path = rec.media_path(ref)
                fpath = f"frames[{i}].{kind}.{cam_name}"
                if ref not in seen:
                    if not path.is_file():
                        raise ManifestError(rec.id, fpath, f"missing media file {ref}")
                    try:
                        if kind == "images":
                            with Image.open(path) as im:
                                seen[ref] = im.size
                        else:
                            seen[ref] = read_pfm_header(path)[:2]
                    except (OSError, ValueError) as exc:
                        raise ManifestError(rec.id, fpath, f"unreadable media file {ref}: {exc}") from exc
                cam = rec.camera(cam_name)
                if seen[ref] != cam.image_size:
                    raise ManifestError(rec.id, fpath,
                                        f"media size {seen[ref]} does not match camera size {cam.image_size}")


def load_manifest(path, strict: bool = False, check_files: bool = True) -> TrajectoryRecord:
    path = Path(path)
    try:
        data = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ManifestError(None, "<root>", f"invalid JSON: {exc}") from exc
    rec = record_from_dict(data, root=path.parent, strict=strict)
    if check_files:
        check_media(rec)
    return rec


def record_to_dict(rec: TrajectoryRecord) -> dict:
    cams = []
    for c in rec.cameras:
        cams.append(
            {
                "name": c.name,
                "intrinsics": {"fx": c.fx, "fy": c.fy, "cx": c.cx, "cy": c.cy},
                "image_size": {"w": c.width, "h": c.height},
                "extrinsic": _pose_dict(c.extrinsic),
                "stereo": (
                    {"right_camera_name": c.stereo.right_camera_name, "baseline_m": c.stereo.baseline_m}
                    if c.stereo else None
                ),
            }
        )
    frames = [
        {
            "time_s": f.time_s,
            "images": dict(f.images),
            "depth": dict(f.depth),
            "ee_pose": _pose_dict(f.ee_pose),
            "gripper_raw": f.gripper_raw,
            "wrench": list(f.wrench) if f.wrench is not None else None,
        }
        for f in rec.frames
    ]
    t = rec.target_object
    return {
        "id": rec.id,
        "instruction": rec.instruction,
        "success": rec.success,
        "scene_tag": rec.scene_tag,
        "gripper_range": {"open_raw": rec.gripper_range.open_raw, "closed_raw": rec.gripper_range.closed_raw},
        "target_object": (
            {"name": t.name, "point_world": list(t.point_world) if t.point_world is not None else None}
            if t else None
        ),
        "cameras": cams,
        "frames": frames,
    }


def dumps_manifest(rec: TrajectoryRecord) -> str:
    return json.dumps(record_to_dict(rec), indent=1, ensure_ascii=False) + "\n"


def write_manifest(rec: TrajectoryRecord, path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(dumps_manifest(rec), encoding="utf-8")
    return path


# ---------------------------------------------------------------------------
# PFM (portable float map), grayscale "Pf" only

_PFM_HEADER = re.compile(rb"^(P[fF])\s+(\d+)\s+(\d+)\s+(-?[0-9.eE+-]+)\s")


def read_pfm_header(path) -> tuple[int, int, int, float, int]:
    """Return ``(width, height, channels, scale, data_offset)``."""
    with open(path, "rb") as fh:
        head = fh.read(256)
    m = _PFM_HEADER.match(head)
    if m is None:
        raise ValueError("not a PFM file")
    channels = 1 if m.group(1) == b"Pf" else 3
    return int(m.group(2)), int(m.group(3)), channels, float(m.group(4)), m.end()


def read_pfm(path) -> np.ndarray:
    """Read a grayscale PFM as a (H, W) float32 array, top row first."""
    w, h, ch, scale, offset = read_pfm_header(path)
    if ch != 1:
        raise ValueError("only single-channel PFM depth maps are supported")
    dtype = "<f4" if scale < 0 else ">f4"
    data = np.frombuffer(Path(path).read_bytes()[offset:], dtype=dtype, count=w * h)
    return np.flipud(data.reshape(h, w)).astype(np.float32)


def write_pfm(path, depth: np.ndarray) -> None:
    """Little-endian grayscale PFM; rows are stored bottom-to-top per the format."""
    depth = np.asarray(depth, dtype="<f4")
    h, w = depth.shape
    with open(path, "wb") as fh:
        fh.write(f"Pf\n{w} {h}\n-1.0\n".encode("ascii"))
        fh.write(np.ascontiguousarray(np.flipud(depth)).tobytes())
