from __future__ import annotations

import json
from pathlib import Path

import numpy as np
import pytest

from trajvqa.geom import RigidTransform, look_at
from trajvqa.trajmodel import CameraRig, FrameObservation, GripperRange, TargetObject, TrajectoryRecord, load_manifest
from trajvqa.trajmodel.synth import gen_synthetic

FIXTURES = Path(__file__).parent / "fixtures"


def load_spec(name: str) -> dict:
    return json.loads((FIXTURES / f"{name}.spec.json").read_text())


def pinhole(name="cam", f=100.0, w=128, h=128, extrinsic=None, stereo=None) -> CameraRig:
    return CameraRig(name, f, f, w / 2, h / 2, w, h, extrinsic or RigidTransform.identity(), stereo)


def make_record(positions, apertures=None, *, cams=None, obj=None, wrench=None, success=None,
                instruction="pick up the block", id="rec") -> TrajectoryRecord:
    """In-memory record with normalized apertures (open_raw 0, closed_raw 1) and no media."""
    positions = np.asarray(positions, dtype=float)
    T = len(positions)
    apertures = np.zeros(T) if apertures is None else np.asarray(apertures, dtype=float)
    cams = cams or [pinhole()]
    frames = tuple(
        FrameObservation(
            time_s=0.1 * t,
            images={c.name: f"{c.name}/{t:04d}.png" for c in cams},
            ee_pose=RigidTransform(tuple(positions[t]), (1.0, 0.0, 0.0, 0.0)),
            gripper_raw=float(apertures[t]),
            wrench=None if wrench is None else (0.0, 0.0, float(wrench[t]), 0.0, 0.0, 0.0),
        )
        for t in range(T)
    )
    target = TargetObject("block", None if obj is None else tuple(map(float, obj)))
    return TrajectoryRecord(id, instruction, frames, tuple(cams), GripperRange(0.0, 1.0),
                            success=success, target_object=target)


@pytest.fixture(scope="session")
def pickplace_manifest() -> Path:
    return FIXTURES / "pickplace" / "manifest.json"


@pytest.fixture(scope="session")
def pickplace(pickplace_manifest):
    return load_manifest(pickplace_manifest)


@pytest.fixture(scope="session")
def pickplace_sidecar() -> dict:
    return json.loads((FIXTURES / "pickplace" / "sidecar.json").read_text())


@pytest.fixture(scope="session")
def scripted(tmp_path_factory):
    """All scripted fixtures rendered once per session: name -> (manifest path, sidecar dict)."""
    root = tmp_path_factory.mktemp("scripted")
    out = {}
    for name in ("pickplace", "twocycle", "skip"):
        m, s = gen_synthetic(load_spec(name), 7, root / name)
        out[name] = (m, json.loads(s.read_text()))
    return out


__all__ = ["FIXTURES", "load_spec", "look_at", "make_record", "pinhole"]


def pytest_terminal_summary(terminalreporter):
    import sys

    mod = sys.modules.get("test_acceptance")
    results = getattr(mod, "RESULTS", None)
    if results:
        terminalreporter.section("acceptance criteria")
        for n in sorted(results):
            terminalreporter.write_line(results[n])
