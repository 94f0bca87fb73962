"""Ground-truth answers from proprioception and geometry, plus instruction parsing."""

from __future__ import annotations

import enum
import re
from dataclasses import dataclass
from typing import Any, Callable, Sequence

import numpy as np

from trajvqa.geom import DirectionLabel, direction_bucket, world_to_camera
from trajvqa.phaseseg import PhaseLabel, PhaseRun, SegThresholds, aperture_series, run_at
from trajvqa.resources import load_json_resource
from trajvqa.trajmodel import CameraRig, TrajectoryRecord

STABLE_WINDOW = 5
EMPTY_CLOSE = 0.98


class GTKind(str, enum.Enum):
    GRIPPER_OPEN = "GripperOpen"
    REACHABLE = "Reachable"
    STABLE_GRASP = "StableGrasp"
    TASK_SUCCESS = "TaskSuccess"
    DIRECTION = "Direction"
    DEPTH = "Depth"
    CORRESPONDENCE = "Correspondence"
    PHASE = "Phase"
    NEXT_PHASE = "NextPhase"
    GOAL_FRAME = "GoalFrame"
    SEQUENCE = "Sequence"
    ARROW_DIRECTION = "ArrowDirection"
    INSTRUCTION = "Instruction"


_BOOL_KINDS = {GTKind.GRIPPER_OPEN, GTKind.REACHABLE, GTKind.STABLE_GRASP, GTKind.TASK_SUCCESS}
_PAYLOAD_TYPES: dict[GTKind, tuple[type, ...]] = {
    GTKind.DIRECTION: (DirectionLabel,),
    GTKind.DEPTH: (int,),
    GTKind.CORRESPONDENCE: (tuple,),
    GTKind.PHASE: (PhaseLabel,),
    GTKind.NEXT_PHASE: (PhaseLabel,),
    GTKind.GOAL_FRAME: (int,),
    GTKind.SEQUENCE: (tuple,),
    GTKind.ARROW_DIRECTION: (tuple,),
    GTKind.INSTRUCTION: (str,),
}


@dataclass(frozen=True)
class GroundTruth:
    kind: GTKind
    value: Any
    confidence: str = "certain"
    reason: str | None = None

    def __post_init__(self):
        if self.confidence not in ("certain", "undetermined"):
            raise ValueError(f"bad confidence {self.confidence!r}")
        if self.confidence == "certain":
            allowed = (bool,) if self.kind in _BOOL_KINDS else _PAYLOAD_TYPES[self.kind]
            if not isinstance(self.value, allowed):
                raise TypeError(f"{self.kind.value} payload must be {allowed}, got {type(self.value).__name__}")

    @property
    def certain(self) -> bool:
        return self.confidence == "certain"

    @classmethod
    def undetermined(cls, kind: GTKind, reason: str) -> "GroundTruth":
        return cls(kind, None, "undetermined", reason)


# ---------------------------------------------------------------------------
# instruction parsing


@dataclass(frozen=True)
class ParsedInstruction:
    skill_verb: str
    target_object: str
    location: str | None
    raw: str

    @property
    def object_noun(self) -> str:
        return strip_article(self.target_object)

    @property
    def location_noun(self) -> str | None:
        return strip_article(self.location) if self.location else None


@dataclass(frozen=True)
class Lexicon:
    verbs: tuple[str, ...]
    prepositions: tuple[str, ...]
    objects: tuple[str, ...] = ()
    locations: tuple[str, ...] = ()


def default_lexicon() -> Lexicon:
    d = load_json_resource("lexicon.json")
    return Lexicon(tuple(d["verbs"]), tuple(d["prepositions"]), tuple(d["objects"]), tuple(d["locations"]))


def strip_article(phrase: str) -> str:
    return re.sub(r"^(the|a|an)\s+", "", phrase.strip())


def parse_instruction(
    instr: str,
    vocab: Lexicon | None = None,
    endpoint: Callable[[str], dict] | None = None,
) -> ParsedInstruction | None:
    """Rule-based parse: longest verb phrase, object up to a preposition, location after it.

    Returns None when no verb matches. ``endpoint`` (a callable returning a
    dict with ``skill_verb``, ``target_object``, ``location``) replaces the
    rules entirely when given.
    """
    if not instr or not instr.strip():
        raise ValueError("empty instruction")
    if endpoint is not None:
        d = endpoint(instr)
        if not d or not d.get("skill_verb"):
            return None
        return ParsedInstruction(d["skill_verb"], d.get("target_object") or "", d.get("location"), instr)
    vocab = vocab or default_lexicon()
    words = re.findall(r"[a-z0-9']+", instr.lower())
    verbs = set(vocab.verbs)
    lengths = sorted({len(v.split()) for v in verbs}, reverse=True)
    # earliest position wins; at a position the longest phrase wins
    verb, start = None, None
    for i in range(len(words)):
        for n in lengths:
            cand = " ".join(words[i:i + n])
            if len(words[i:i + n]) == n and cand in verbs:
                verb, start = cand, i
                break
        if verb is not None:
            break
    if verb is None:
        return None
    rest = words[start + len(verb.split()):]
    preps = set(vocab.prepositions)
    cut = next((i for i, w in enumerate(rest) if w in preps and i > 0), None)
    if cut is None:
        return ParsedInstruction(verb, " ".join(rest), None, instr)
    location = " ".join(rest[cut + 1:]) or None
    return ParsedInstruction(verb, " ".join(rest[:cut]), location, instr)


# ---------------------------------------------------------------------------
# proprioceptive / geometric grounding


def ground_gripper_open(s_t: float, th: SegThresholds) -> GroundTruth:
    if s_t < th.tau_g:
        return GroundTruth(GTKind.GRIPPER_OPEN, True)
    if s_t >= th.tau_c:
        return GroundTruth(GTKind.GRIPPER_OPEN, False)
    return GroundTruth.undetermined(GTKind.GRIPPER_OPEN, "aperture between thresholds")


@dataclass(frozen=True)
class ReachConfig:
    base_point: tuple[float, float, float] = (0.0, 0.0, 0.0)
    radius_m: float = 0.8
    workspace_aabb: tuple[tuple[float, float, float], tuple[float, float, float]] = (
        (-0.2, -0.6, -0.05),
        (0.9, 0.6, 0.8),
    )

    def to_dict(self) -> dict:
        return {"base_point": list(self.base_point), "radius_m": self.radius_m,
                "workspace_aabb": [list(self.workspace_aabb[0]), list(self.workspace_aabb[1])]}


def ground_reachable(traj: TrajectoryRecord, frame_index: int, reach: ReachConfig = ReachConfig()) -> GroundTruth:
    # the object point is static in the manifest, so frame_index only anchors the question
    p = traj.object_point
    if p is None:
        return GroundTruth.undetermined(GTKind.REACHABLE, "no object point")
    lo, hi = np.asarray(reach.workspace_aabb[0]), np.asarray(reach.workspace_aabb[1])
    within = float(np.linalg.norm(p - np.asarray(reach.base_point))) <= reach.radius_m
    inside = bool(np.all(p >= lo) and np.all(p <= hi))
    return GroundTruth(GTKind.REACHABLE, within and inside)


def ground_stable_grasp(
    traj: TrajectoryRecord,
    runs: Sequence[PhaseRun],
    t: int,
    th: SegThresholds,
    s: Sequence[float] | None = None,
    k: int = STABLE_WINDOW,
    empty_close: float = EMPTY_CLOSE,
) -> GroundTruth:
    if run_at(runs, t).label is not PhaseLabel.CONTACT:
        raise ValueError(f"frame {t} is not inside a Contact run")
    if s is None:
        s, _ = aperture_series(traj, th)
    lo = max(0, t - k)
    window = np.asarray(s[lo:t + 1], dtype=float)
    forces = [traj.frames[i].force_magnitude for i in range(lo, t + 1)]
    if np.any(window >= empty_close):
        return GroundTruth(GTKind.STABLE_GRASP, False)
    if any(f is not None and f <= th.tau_f for f in forces):
        return GroundTruth(GTKind.STABLE_GRASP, False)
    if np.all(window >= th.tau_c):
        return GroundTruth(GTKind.STABLE_GRASP, True)
    return GroundTruth.undetermined(GTKind.STABLE_GRASP, "aperture below closure threshold in window")


def ground_task_success(traj: TrajectoryRecord) -> GroundTruth:
    if traj.success is None:
        return GroundTruth.undetermined(GTKind.TASK_SUCCESS, "no success flag")
    return GroundTruth(GTKind.TASK_SUCCESS, bool(traj.success))


def ground_direction(traj: TrajectoryRecord, cam: CameraRig, frame_index: int, theta: float = 0.33) -> GroundTruth:
    p = traj.object_point
    if p is None:
        return GroundTruth.undetermined(GTKind.DIRECTION, "no object point")
    ee_c = world_to_camera(cam, traj.frames[frame_index].ee_position)
    obj_c = world_to_camera(cam, p)
    if ee_c[2] <= 1e-6 or obj_c[2] <= 1e-6:
        return GroundTruth.undetermined(GTKind.DIRECTION, "point behind camera")
    label = direction_bucket(obj_c - ee_c, theta)
    if label is None:
        return GroundTruth.undetermined(GTKind.DIRECTION, "degenerate distance")
    return GroundTruth(GTKind.DIRECTION, label)


def next_phase_run(runs: Sequence[PhaseRun], t: int) -> PhaseRun | None:
    """First non-Transition run starting after the run containing ``t``."""
    cur = run_at(runs, t)
    for r in runs:
        if r.start_index > cur.end_index and r.label is not PhaseLabel.TRANSITION:
            return r
    return None
