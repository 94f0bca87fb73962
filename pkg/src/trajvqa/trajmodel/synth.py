"""Scripted synthetic episodes.

A scripted episode is a JSON-like dict listing segments; each segment ramps
aperture, force and end-effector position linearly from the previous
segment's end values to its own targets over ``frames`` frames. The intended
per-frame phase labels come straight from the segment list and are written to
a sidecar next to the manifest, so downstream code can be checked against it.
"""

from __future__ import annotations

import json
import math
from pathlib import Path
from typing import Any

import numpy as np
from PIL import Image

from trajvqa.geom import RigidTransform, look_at, quat_about_axis, quat_mul, transform_point, invert
from trajvqa.trajmodel.manifest import dumps_manifest, write_pfm
from trajvqa.trajmodel.model import (
    CameraRig,
    FrameObservation,
    GripperRange,
    StereoPartner,
    TargetObject,
    TrajectoryRecord,
)

PHASE_NAMES = {
    "approach": "Approach",
    "stabilize": "Stabilize",
    "contact": "Contact",
    "release": "Release",
    "reset": "Reset",
    "transition": "Transition",
}

DEFAULT_CAMERAS = [
    {"name": "ext1", "eye": [1.15, 0.0, 0.6], "target": [0.45, 0.0, 0.05]},
    {"name": "ext2", "eye": [0.45, 0.85, 0.55], "target": [0.45, 0.0, 0.05]},
]

# gripper pointing down (tool z along world -z)
_DOWN = quat_about_axis((1.0, 0.0, 0.0), math.pi)

TABLE_COLORS = np.array([[196, 170, 130], [176, 150, 112]], dtype=np.uint8)
WALL_COLOR = np.array([215, 222, 230], dtype=np.uint8)
MAX_DEPTH = 4.0


class SynthSpecError(ValueError):
    pass


def _rig(spec: dict) -> list[CameraRig]:
    w, h = spec.get("image_size", [320, 240])
    cams_spec = spec.get("cameras") or DEFAULT_CAMERAS
    cams = []
    for c in cams_spec:
        f = c.get("focal_scale", 0.8) * w
        cams.append(
            CameraRig(
                name=c["name"], fx=f, fy=f, cx=w / 2.0, cy=h / 2.0, width=w, height=h,
                extrinsic=look_at(c["eye"], c["target"]),
            )
        )
    if spec.get("stereo", True) and len(cams) >= 2:
        left, right = cams[0], cams[1]
        eye_l = np.asarray(cams_spec[0]["eye"], dtype=float)
        eye_r = np.asarray(cams_spec[1]["eye"], dtype=float)
        baseline = round(float(np.linalg.norm(eye_l - eye_r)), 6)
        cams[0] = CameraRig(left.name, left.fx, left.fy, left.cx, left.cy, left.width, left.height,
                            left.extrinsic, StereoPartner(right.name, baseline))
    return cams


def _tool_quat(yaw_deg: float) -> tuple[float, float, float, float]:
    q = np.array(quat_mul(quat_about_axis((0.0, 0.0, 1.0), math.radians(yaw_deg)), _DOWN))
    q /= np.linalg.norm(q)
    return tuple(round(float(v), 12) for v in q)


def script_profile(spec: dict) -> dict[str, np.ndarray | list[str]]:
    """Noise-free per-frame profiles (aperture, force, position, yaw, phase)."""
    segs = spec.get("segments") or []
    if not segs:
        raise SynthSpecError("spec has no segments")
    start = spec.get("start", {})
    ap = float(start.get("aperture", 0.0))
    force = float(start.get("force", 0.0))
    pos = np.asarray(start.get("position", [0.3, -0.2, 0.35]), dtype=float)
    yaw = float(start.get("yaw_deg", 0.0))
    aps, fs, ps, yaws, phases = [], [], [], [], []
    for i, seg in enumerate(segs):
        n = int(seg.get("frames", 0))
        if n <= 0:
            raise SynthSpecError(f"segment {i} has zero duration")
        phase = seg.get("phase", "transition")
        if phase not in PHASE_NAMES:
            raise SynthSpecError(f"segment {i}: unknown phase {phase!r}")
        ap_to = float(seg.get("aperture", ap))
        f_to = float(seg.get("force", force))
        p_to = np.asarray(seg.get("ee", pos), dtype=float)
        yaw_to = float(seg.get("yaw_deg", yaw))
        for k in range(1, n + 1):
            a = k / n
            aps.append(ap + (ap_to - ap) * a)
            fs.append(force + (f_to - force) * a)
            ps.append(pos + (p_to - pos) * a)
            yaws.append(yaw + (yaw_to - yaw) * a)
            phases.append(PHASE_NAMES[phase])
        ap, force, pos, yaw = ap_to, f_to, p_to, yaw_to
    return {
        "aperture": np.array(aps),
        "force": np.array(fs),
        "position": np.array(ps),
        "yaw": np.array(yaws),
        "phases": phases,
    }


def _object_track(spec: dict, positions: np.ndarray, phases: list[str]) -> np.ndarray | None:
    """Object follows the gripper from the first Contact frame to the end of the first Release."""
    obj = spec.get("object")
    if not obj or obj.get("point") is None:
        return None
    p0 = np.asarray(obj["point"], dtype=float)
    track = np.tile(p0, (len(phases), 1))
    try:
        grab = phases.index("Contact")
    except ValueError:
        return track
    offset = p0 - positions[grab]
    held = True
    last = p0
    for t in range(grab, len(phases)):
        if held:
            last = positions[t] + offset
            if phases[t] == "Release" and (t + 1 == len(phases) or phases[t + 1] != "Release"):
                held = False
        track[t] = last
    return track


def synthesize(spec: dict, seed: int) -> tuple[TrajectoryRecord, dict]:
    """Build the record in memory (image/depth refs are the paths ``gen_synthetic`` would write)."""
    prof = script_profile(spec)
    rng = np.random.default_rng(seed)
    noise = spec.get("noise", {})
    T = len(prof["phases"])
    ap = prof["aperture"] + rng.normal(0.0, noise.get("aperture", 0.0), T) if noise.get("aperture") else prof["aperture"]
    ap = np.clip(ap, 0.0, 1.0)
    force = prof["force"]
    if noise.get("force"):
        force = force + rng.normal(0.0, noise["force"], T)
    force = np.abs(force)
    pos = prof["position"]
    if noise.get("position"):
        pos = pos + rng.normal(0.0, noise["position"], pos.shape)

    gr_spec = spec.get("gripper_range", {"open_raw": 0.08, "closed_raw": 0.0})
    gr = GripperRange(float(gr_spec["open_raw"]), float(gr_spec["closed_raw"]))
    cams = _rig(spec)
    depth_cam = cams[0].name if spec.get("depth", True) else None
    fps = float(spec.get("fps", 10.0))
    has_force = spec.get("force", True)

    frames = []
    for t in range(T):
        raw = gr.open_raw + float(ap[t]) * (gr.closed_raw - gr.open_raw)
        wrench = None
        if has_force:
            wrench = (0.0, 0.0, round(float(force[t]), 9), 0.0, 0.0, 0.0)
        frames.append(
            FrameObservation(
                time_s=round(t / fps, 9),
                images={c.name: f"frames/{c.name}/{t:04d}.png" for c in cams},
                ee_pose=RigidTransform(tuple(round(float(v), 9) for v in pos[t]), _tool_quat(prof["yaw"][t])),
                gripper_raw=round(raw, 12),
                depth={c.name: (f"depth/{c.name}.pfm" if c.name == depth_cam else None) for c in cams},
                wrench=wrench,
            )
        )
    obj = spec.get("object")
    target = None
    if obj:
        pt = obj.get("point")
        target = TargetObject(obj["name"], tuple(float(v) for v in pt) if pt is not None else None)
    rec = TrajectoryRecord(
        id=spec.get("id", "synthetic"),
        instruction=spec.get("instruction", "pick up the object"),
        frames=tuple(frames),
        cameras=tuple(cams),
        gripper_range=gr,
        success=spec.get("success"),
        target_object=target,
        scene_tag=spec.get("scene_tag"),
    )
    sidecar = {
        "id": rec.id,
        "seed": seed,
        "phases": prof["phases"],
        "object_point": list(target.point_world) if target and target.point_world else None,
        "success": rec.success,
        "aperture": [round(float(a), 9) for a in ap],
    }
    return rec, sidecar


# ---------------------------------------------------------------------------
# rendering


def _camera_rays(cam: CameraRig) -> tuple[np.ndarray, np.ndarray]:
    """World-space eye and per-pixel ray directions (camera z component = 1)."""
    us, vs = np.meshgrid(np.arange(cam.width, dtype=float), np.arange(cam.height, dtype=float))
    d_cam = np.stack([(us - cam.cx) / cam.fx, (vs - cam.cy) / cam.fy, np.ones_like(us)], axis=-1)
    cam_to_world = invert(cam.extrinsic)
    rot = cam_to_world.matrix()
    return np.asarray(cam_to_world.translation), d_cam @ rot.T


def render_background(cam: CameraRig) -> tuple[np.ndarray, np.ndarray]:
    """Checkered table plane at z=0; returns (RGB image, z-depth map with NaN where no hit)."""
    eye, dirs = _camera_rays(cam)
    dz = dirs[..., 2]
    with np.errstate(divide="ignore", invalid="ignore"):
        lam = np.where(dz < -1e-9, -eye[2] / dz, np.inf)
    hit = np.isfinite(lam) & (lam < MAX_DEPTH)
    pts = eye + dirs * np.where(hit, lam, 0.0)[..., None]
    checker = ((np.floor(pts[..., 0] / 0.1) + np.floor(pts[..., 1] / 0.1)) % 2).astype(int)
    img = np.where(hit[..., None], TABLE_COLORS[checker], WALL_COLOR).astype(np.uint8)
    depth = np.where(hit, lam, np.nan).astype(np.float32)
    return img, depth


def _disc(img: np.ndarray, cam: CameraRig, p_world, radius_m: float, color) -> None:
    pc = transform_point(cam.extrinsic, p_world)
    if pc[2] <= 0.05:
        return
    u = cam.fx * pc[0] / pc[2] + cam.cx
    v = cam.fy * pc[1] / pc[2] + cam.cy
    r = max(1.5, cam.fx * radius_m / pc[2])
    h, w = img.shape[:2]
    x0, x1 = int(max(0, math.floor(u - r))), int(min(w - 1, math.ceil(u + r)))
    y0, y1 = int(max(0, math.floor(v - r))), int(min(h - 1, math.ceil(v + r)))
    if x0 > x1 or y0 > y1:
        return
    yy, xx = np.mgrid[y0:y1 + 1, x0:x1 + 1]
    mask = (xx - u) ** 2 + (yy - v) ** 2 <= r * r
    img[y0:y1 + 1, x0:x1 + 1][mask] = color


def render_frame(cam: CameraRig, background: np.ndarray, ee_pos, obj_pos) -> np.ndarray:
    img = background.copy()
    items = [(ee_pos, 0.025, (70, 70, 78))]
    if obj_pos is not None:
        items.append((obj_pos, 0.03, (235, 200, 30)))
    # far to near
    items.sort(key=lambda it: -transform_point(cam.extrinsic, it[0])[2])
    for p, r, col in items:
        _disc(img, cam, p, r, col)
    return img


def save_png(path: Path, arr: np.ndarray) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    Image.fromarray(arr).save(path, format="PNG", compress_level=6)


def gen_synthetic(spec: dict, seed: int, out_dir) -> tuple[Path, Path]:
    """Write manifest, media and sidecar under ``out_dir``; returns (manifest, sidecar) paths."""
    out_dir = Path(out_dir)
    rec, sidecar = synthesize(spec, seed)
    out_dir.mkdir(parents=True, exist_ok=True)
    positions = rec.ee_positions()
    obj_track = _object_track(spec, positions, sidecar["phases"])
    for cam in rec.cameras:
        bg, depth = render_background(cam)
        if rec.frames[0].depth.get(cam.name):
            (out_dir / "depth").mkdir(exist_ok=True)
            write_pfm(out_dir / rec.frames[0].depth[cam.name], depth)
        for t, f in enumerate(rec.frames):
            img = render_frame(cam, bg, positions[t], None if obj_track is None else obj_track[t])
            save_png(out_dir / f.images[cam.name], img)
    manifest = out_dir / "manifest.json"
    manifest.write_text(dumps_manifest(rec), encoding="utf-8")
    side = out_dir / "sidecar.json"
    side.write_text(json.dumps(sidecar, indent=1) + "\n", encoding="utf-8")
    return manifest, side


# ---------------------------------------------------------------------------
# episode builders


def cycle_segments(
    grasp: list[float],
    place: list[float],
    home: list[float],
    *,
    release: bool = True,
    contact_frames: int = 34,
    rest_frames: int = 31,
) -> list[dict[str, Any]]:
    """One pick-and-place cycle whose aperture profile walks the five phases.

    The profile follows the literal case rule (aperture rising during
    Release/Reset); see ``phaseseg.classify_frame``.
    """
    above = [grasp[0], grasp[1], grasp[2] + 0.09]
    lift = [place[0], place[1], place[2] + 0.1]
    segs = [
        {"phase": "transition", "frames": 8, "aperture": 0.24, "force": 0.0},
        {"phase": "approach", "frames": 10, "aperture": 0.0, "ee": above},
        {"phase": "stabilize", "frames": 10, "aperture": 0.0, "ee": [grasp[0], grasp[1], grasp[2] + 0.03]},
        {"phase": "transition", "frames": 4, "aperture": 0.7},
        {"phase": "transition", "frames": 8, "aperture": 0.9, "force": 6.0},
        {"phase": "contact", "frames": contact_frames, "aperture": 0.9, "ee": place, "yaw_deg": 30.0},
    ]
    if release:
        segs += [
            {"phase": "release", "frames": 3, "aperture": 0.97},
            {"phase": "transition", "frames": 3, "aperture": 0.97},
            {"phase": "transition", "frames": 4, "aperture": 0.05, "force": 0.0, "ee": lift},
            {"phase": "reset", "frames": 5, "aperture": 0.2, "ee": home, "yaw_deg": 0.0},
            {"phase": "transition", "frames": rest_frames, "aperture": 0.2},
        ]
    else:
        segs += [
            {"phase": "transition", "frames": 4, "aperture": 0.05, "force": 0.0, "ee": lift},
            {"phase": "transition", "frames": rest_frames + 11, "aperture": 0.05, "ee": home},
        ]
    return segs


def pickplace_spec(
    *,
    id: str = "pickplace",
    instruction: str = "put the yellow and black object in the box",
    object_name: str = "yellow and black object",
    object_point=(0.5, 0.1, 0.03),
    place=(0.42, -0.2, 0.12),
    home=(0.3, -0.05, 0.35),
    cycles: int = 1,
    release: bool = True,
    image_size=(320, 240),
    scene_tag: str | None = "lab",
    success: bool | None = True,
    force: bool = True,
    depth: bool = True,
    stereo: bool = True,
    with_object_point: bool = True,
    noise: dict | None = None,
) -> dict:
    obj = [float(v) for v in object_point]
    segs = []
    for c in range(cycles):
        segs += cycle_segments(obj, list(place), list(home), release=release,
                               contact_frames=34 if cycles == 1 else 20,
                               rest_frames=31 if cycles == 1 else 6)
    return {
        "id": id,
        "instruction": instruction,
        "scene_tag": scene_tag,
        "success": success,
        "fps": 10,
        "image_size": list(image_size),
        "force": force,
        "depth": depth,
        "stereo": stereo,
        "object": {"name": object_name, "point": obj if with_object_point else None},
        "gripper_range": {"open_raw": 0.08, "closed_raw": 0.0},
        "start": {"position": list(home), "aperture": 0.24, "force": 0.0},
        "segments": segs,
        "noise": noise or {},
    }


def random_episode_spec(rng: np.random.Generator, id: str = "random") -> dict:
    """Arbitrary (not necessarily phase-complete) episode for property tests."""
    n_seg = int(rng.integers(3, 14))
    segs = []
    for _ in range(n_seg):
        seg = {
            "phase": str(rng.choice(list(PHASE_NAMES))),
            "frames": int(rng.integers(1, 16)),
            "aperture": float(rng.uniform(0, 1)),
            "force": float(rng.uniform(0, 8)),
            "ee": [float(rng.uniform(0.2, 0.7)), float(rng.uniform(-0.3, 0.3)), float(rng.uniform(0.02, 0.4))],
        }
        segs.append(seg)
    return {
        "id": id,
        "instruction": "pick up the block",
        "force": bool(rng.random() < 0.6),
        "depth": False,
        "image_size": [160, 120],
        "start": {"aperture": float(rng.uniform(0, 1))},
        "segments": segs,
        "noise": {"aperture": float(rng.choice([0.0, 0.005, 0.03])), "force": 0.3},
    }
