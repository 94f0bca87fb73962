"""Question prototypes: gating, per-category generators, and the per-trajectory driver."""

from __future__ import annotations

import math
from collections import Counter
from dataclasses import asdict, dataclass, field
from typing import Callable, Sequence

import numpy as np

from trajvqa.annotate import MARKER_COLORS, Arrow, Dot, MediaJob, TextLabel, resolution_filter
from trajvqa.geom import DirectionLabel, backproject, in_image, project
from trajvqa.ground import (
    EMPTY_CLOSE,
    STABLE_WINDOW,
    GroundTruth,
    Lexicon,
    ParsedInstruction,
    ReachConfig,
    default_lexicon,
    ground_direction,
    ground_gripper_open,
    ground_reachable,
    ground_stable_grasp,
    ground_task_success,
    next_phase_run,
    parse_instruction,
    strip_article,
)
from trajvqa.keyframe import Keyframe
from trajvqa.phaseseg import PhaseLabel, PhaseRun, SegThresholds, run_at
from trajvqa.qgen import distractors as dx
from trajvqa.qgen.items import CATEGORIES, LETTERS, VQAItem, item_id
from trajvqa.qgen.rng import RngStream
from trajvqa.resources import templates
from trajvqa.trajmodel import CameraRig, TrajectoryRecord

A, S, C, R, X = (PhaseLabel.APPROACH, PhaseLabel.STABILIZE, PhaseLabel.CONTACT,
                 PhaseLabel.RELEASE, PhaseLabel.RESET)

PHASE_GATE: dict[str, frozenset[PhaseLabel]] = {
    "RS": frozenset({S, C, R}),
    "OS": frozenset({A}),
    "SR": frozenset({A, S}),
    "SU": frozenset({A, S}),
    "MV": frozenset({A, S, R, X}),
    "TS-S": frozenset({X}),
    "TS-G": frozenset({S, C, R}),
    "TS-GL": frozenset({A, S, C, R}),
    "AU": frozenset({A, S, C, R, X}),
    "IP": frozenset({A, S, C, R}),
    "TU": frozenset({A}),
    "AD": frozenset({A, S, C, R}),
    "TSeq": frozenset({R, X}),
}

# modalities each prototype needs besides the always-present proprioception
MODALITY_GATE: dict[str, frozenset[str]] = {
    "RS": frozenset(),
    "OS": frozenset({"object"}),
    "SR": frozenset({"object"}),
    "SU": frozenset({"depth"}),
    "MV": frozenset({"stereo"}),
    "TS-S": frozenset({"success"}),
    "TS-G": frozenset({"object"}),
    "TS-GL": frozenset({"object"}),
    "AU": frozenset({"object"}),
    "IP": frozenset({"object"}),
    "TU": frozenset({"object"}),
    "AD": frozenset({"object"}),
    "TSeq": frozenset({"object"}),
}


@dataclass(frozen=True)
class QGenConfig:
    nab_p: float = 0.2
    direction_theta: float = 0.33
    share_weight: float = 3.0
    arrow_min_sep_deg: float = 45.0
    arrow_horizon: int = 10
    arrow_min_px: float = 10.0
    corr_min_px: float = 40.0
    corr_draws: int = 100
    depth_min_sep_m: float = 0.05
    depth_sep_frac: float = 0.10
    goal_min_gap: int = 10
    tseq_max_k: int = 5
    stable_window: int = STABLE_WINDOW
    empty_close: float = EMPTY_CLOSE
    reach: ReachConfig = field(default_factory=ReachConfig)
    categories: tuple[str, ...] = CATEGORIES

    def __post_init__(self):
        if not 0.0 <= self.nab_p <= 1.0:
            raise ValueError("nab_p must be in [0, 1]")
        bad = set(self.categories) - set(CATEGORIES)
        if bad:
            raise ValueError(f"unknown categories {sorted(bad)}")

    def to_dict(self) -> dict:
        d = asdict(self)
        d["reach"] = self.reach.to_dict()
        d["categories"] = list(self.categories)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "QGenConfig":
        d = dict(d)
        if "reach" in d:
            r = d["reach"]
            d["reach"] = ReachConfig(tuple(r["base_point"]), r["radius_m"],
                                     (tuple(r["workspace_aabb"][0]), tuple(r["workspace_aabb"][1])))
        if "categories" in d:
            d["categories"] = tuple(d["categories"])
        return cls(**d)


class Skip(Exception):
    """Prototype not instantiable here; ``str(exc)`` is the reason."""


DepthFn = Callable[[str, int], "np.ndarray | None"]


@dataclass
class TrajContext:
    traj: TrajectoryRecord
    runs: Sequence[PhaseRun]
    s: np.ndarray
    keyframes: Sequence[Keyframe]
    th: SegThresholds
    cfg: QGenConfig
    seed: int
    depth_fn: DepthFn
    sign_mode: str = "paper"
    lexicon: Lexicon | None = None
    parsed: ParsedInstruction | None = None

    def __post_init__(self):
        if self.lexicon is None:
            self.lexicon = default_lexicon()
        if self.parsed is None and self.traj.instruction.strip():
            self.parsed = parse_instruction(self.traj.instruction, self.lexicon)


@dataclass
class Draft:
    """An item before shuffling, plus the media it needs."""

    category: str
    question: str
    choices: list[str]
    correct_index: int
    images: list[str]
    frames: list[int]
    jobs: list[MediaJob]
    meta: dict


# ---------------------------------------------------------------------------
# gating


def modalities(traj: TrajectoryRecord, t: int) -> set[str]:
    m = {"aperture"}
    if traj.has_force:
        m.add("force")
    if traj.object_point is not None:
        m.add("object")
    if traj.success is not None:
        m.add("success")
    depth = traj.frames[t].depth
    if any(depth.get(c.name) for c in traj.cameras):
        m.add("depth")
    names = {c.name for c in traj.cameras}
    if any(c.stereo and c.stereo.right_camera_name in names and depth.get(c.name) for c in traj.cameras):
        m.add("stereo")
    return m


def applicable_prototypes(traj: TrajectoryRecord, keyframe: Keyframe,
                          categories: Sequence[str] = CATEGORIES) -> set[str]:
    mods = modalities(traj, keyframe.frame_index)
    return {
        c for c in categories
        if keyframe.phase in PHASE_GATE[c] and MODALITY_GATE[c] <= mods
    }


# ---------------------------------------------------------------------------
# helpers


def _tpl() -> dict:
    return templates()


def frame_media(traj: TrajectoryRecord, cam: str, t: int) -> tuple[str, MediaJob]:
    out = f"media/{traj.id}/{cam}_{t:05d}.png"
    return out, MediaJob(out, (str(traj.media_path(traj.frames[t].images[cam])),))


def _out(traj: TrajectoryRecord, iid: str) -> str:
    return f"media/{traj.id}/{iid}.png"


def _object_name(ctx: TrajContext) -> str:
    if ctx.traj.target_object is not None and ctx.traj.target_object.name:
        return ctx.traj.target_object.name
    if ctx.parsed is not None and ctx.parsed.target_object:
        return strip_article(ctx.parsed.target_object)
    raise Skip("no object name")


def _instruction_clause(instr: str) -> str:
    s = instr.strip().rstrip(".")
    return s[:1].lower() + s[1:]


def _marker_radius(cam: CameraRig) -> int:
    return max(3, round(min(cam.width, cam.height) / 40))


def _binary(ctx, kf, cam, category, gt: GroundTruth, question: str, grounding: str) -> Draft:
    if not gt.certain:
        raise Skip(gt.reason or "undetermined")
    choices = dx.binary_choices(_tpl()["binary_partial"][category])
    ref, job = frame_media(ctx.traj, cam.name, kf.frame_index)
    return Draft(category, question, choices, 0 if gt.value else 1, [ref], [kf.frame_index], [job],
                 {"grounding": grounding, "camera": cam.name})


# ---------------------------------------------------------------------------
# generators


def gen_gripper_open(ctx, kf, cam, rng, iid) -> Draft:
    gt = ground_gripper_open(float(ctx.s[kf.frame_index]), ctx.th)
    return _binary(ctx, kf, cam, "RS", gt, _tpl()["questions"]["RS"], "proprioceptive")


def gen_reachable(ctx, kf, cam, rng, iid) -> Draft:
    gt = ground_reachable(ctx.traj, kf.frame_index, ctx.cfg.reach)
    q = _tpl()["questions"]["OS"].format(object=_object_name(ctx))
    d = _binary(ctx, kf, cam, "OS", gt, q, "geometric")
    d.meta["reach"] = ctx.cfg.reach.to_dict()
    return d


def gen_task_success(ctx, kf, cam, rng, iid) -> Draft:
    gt = ground_task_success(ctx.traj)
    q = _tpl()["questions"]["TS-S"].format(instruction=_instruction_clause(ctx.traj.instruction))
    return _binary(ctx, kf, cam, "TS-S", gt, q, "manifest")


def gen_stable_grasp(ctx, kf, cam, rng, iid) -> Draft:
    if run_at(ctx.runs, kf.frame_index).label is not PhaseLabel.CONTACT:
        raise Skip("not in a Contact run")
    gt = ground_stable_grasp(ctx.traj, ctx.runs, kf.frame_index, ctx.th, ctx.s,
                             ctx.cfg.stable_window, ctx.cfg.empty_close)
    q = _tpl()["questions"]["TS-G"].format(object=_object_name(ctx))
    d = _binary(ctx, kf, cam, "TS-G", gt, q, "force" if ctx.traj.has_force else "proprioceptive")
    d.meta.update(stable_window=ctx.cfg.stable_window, empty_close=ctx.cfg.empty_close)
    return d


def direction_choices(correct: DirectionLabel, rng: RngStream, share_weight: float) -> list[str]:
    return [correct.text] + [d.text for d in dx.sample_direction_distractors(correct, rng, 4, share_weight)]


def gen_direction(ctx, kf, cam, rng, iid) -> Draft:
    t = kf.frame_index
    gt = ground_direction(ctx.traj, cam, t, ctx.cfg.direction_theta)
    if not gt.certain:
        raise Skip(gt.reason)
    q = _tpl()["questions"]["SR"].format(camera=cam.name, step=t, object=_object_name(ctx))
    ref, job = frame_media(ctx.traj, cam.name, t)
    return Draft("SR", q, direction_choices(gt.value, rng, ctx.cfg.share_weight), 0, [ref], [t], [job],
                 {"grounding": "proprioceptive", "camera": cam.name, "theta": ctx.cfg.direction_theta,
                  "share_weight": ctx.cfg.share_weight})


def gen_depth(ctx, kf, cam, rng, iid) -> Draft:
    t = kf.frame_index
    depth = ctx.depth_fn(cam.name, t)
    if depth is None:
        raise Skip("no depth map")
    avoid = [uv for uv in (project(cam, ctx.traj.frames[t].ee_position),
                           project(cam, ctx.traj.object_point) if ctx.traj.object_point is not None else None)
             if uv is not None]
    r = _marker_radius(cam)
    pts = dx.pick_depth_points(depth, rng, 5, ctx.cfg.depth_min_sep_m, ctx.cfg.depth_sep_frac,
                               margin=r + 2, min_px=2 * r + 4, avoid=avoid)
    if pts is None:
        raise Skip("depth separation unsatisfiable")
    colors = [MARKER_COLORS[i] for i in rng.permutation(5)]
    variant = "closest" if rng.random() < 0.5 else "farthest"
    depths = [p[2] for p in pts]
    answer = dx.depth_answer(colors, depths, variant)
    q = _tpl()["questions"]["SU"].format(camera=cam.name, extreme=variant)
    out = _out(ctx.traj, iid)
    prims = tuple(Dot((p[0], p[1]), r, col) for p, col in zip(pts, colors))
    src = str(ctx.traj.media_path(ctx.traj.frames[t].images[cam.name]))
    choices = list(MARKER_COLORS)
    return Draft("SU", q, choices, choices.index(answer), [out], [t], [MediaJob(out, (src,), (prims,))],
                 {"grounding": "depth", "camera": cam.name, "variant": variant,
                  "points": [[p[0], p[1], round(p[2], 6)] for p in pts], "colors": colors,
                  "depth_min_sep_m": ctx.cfg.depth_min_sep_m, "depth_sep_frac": ctx.cfg.depth_sep_frac})


def correspondence_pixel(cam_a: CameraRig, cam_b: CameraRig, uv, depth: float):
    p = backproject(cam_a, uv, depth)
    return project(cam_b, p)


def gen_correspondence(ctx, kf, cam, rng, iid) -> Draft:
    t = kf.frame_index
    traj = ctx.traj
    if cam.stereo is None:
        raise Skip("camera has no stereo partner")
    cam_b = traj.camera(cam.stereo.right_camera_name)
    if not resolution_filter(cam_b.image_size):
        raise Skip("partner below minimum resolution")
    depth = ctx.depth_fn(cam.name, t)
    if depth is None:
        raise Skip("no depth map")
    r = _marker_radius(cam)
    src_uv = dst = None
    for _ in range(ctx.cfg.corr_draws):
        u, v = rng.integers(r + 2, cam.width - r - 2), rng.integers(r + 2, cam.height - r - 2)
        d = float(depth[v, u])
        if not (np.isfinite(d) and d > 0):
            continue
        cand = correspondence_pixel(cam, cam_b, (u, v), d)
        if cand is not None and in_image(cam_b, cand, margin=r + 2):
            src_uv, dst = (u, v), cand
            break
    if dst is None:
        raise Skip("no source pixel projects into the partner view")
    want = 3 + rng.integers(0, 2)
    others = dx.quadrant_points(dst, cam_b.width, cam_b.height, rng, want, ctx.cfg.corr_min_px,
                                margin=r + 2, draws=ctx.cfg.corr_draws)
    if len(others) < 3:
        raise Skip("distractor placement infeasible")
    pts = [tuple(dst)] + [tuple(map(float, p)) for p in others]
    # letters in raster order so position gives nothing away
    order = sorted(range(len(pts)), key=lambda i: (round(pts[i][1]), round(pts[i][0]), i))
    letter_of = {i: LETTERS[k] for k, i in enumerate(order)}
    prims_b = []
    for i in order:
        u, v = pts[i]
        prims_b.append(Dot((u, v), r, "Yellow"))
        lx = min(cam_b.width - 1, round(u) + r + 1)
        ly = max(0, min(cam_b.height - 12, round(v) - 6))
        prims_b.append(TextLabel((lx, ly), letter_of[i], "White"))
    q = _tpl()["questions"]["MV"].format(camera1=cam.name, camera2=cam_b.name)
    out = _out(traj, iid)
    srcs = (str(traj.media_path(traj.frames[t].images[cam.name])),
            str(traj.media_path(traj.frames[t].images[cam_b.name])))
    job = MediaJob(out, srcs, ((Dot(src_uv, r, "Red"),), tuple(prims_b)), "side_by_side")
    choices = [f"Point {LETTERS[k]}" for k in range(len(pts))]
    return Draft("MV", q, choices, choices.index(f"Point {letter_of[0]}"), [out], [t], [job],
                 {"grounding": "stereo", "camera": cam.name, "camera2": cam_b.name,
                  "source_px": list(src_uv), "correct_px": [round(dst[0], 6), round(dst[1], 6)],
                  "points": {letter_of[i]: [round(pts[i][0], 6), round(pts[i][1], 6)] for i in order},
                  "min_px": ctx.cfg.corr_min_px})


def goal_frames(runs: Sequence[PhaseRun], T: int, rng: RngStream, gap: int,
                n: int = 4) -> tuple[int, list[int]] | None:
    """Goal frame plus ``n`` earlier frames, pairwise and to the goal at least ``gap`` apart.

    Trailing Transition frames after the final Reset are the settled end state, so the goal
    is the last frame then; otherwise it is the end of the last Reset run (or the final frame).
    Distractors are uniform over all valid sets: a sorted draw without replacement from a
    shrunken range, spread back out by ``gap - 1`` per rank.
    """
    phased = [r for r in runs if r.label is not PhaseLabel.TRANSITION]
    resets = [r for r in phased if r.label is PhaseLabel.RESET]
    if not resets or phased[-1].label is PhaseLabel.RESET:
        goal = T - 1
    else:
        goal = resets[-1].end_index
    slots = goal - gap - (n - 1) * (gap - 1) + 1
    if slots < n:
        return None
    base = sorted(int(i) for i in rng.gen.choice(slots, size=n, replace=False))
    return goal, [b + k * (gap - 1) for k, b in enumerate(base)]


def gen_goal_config(ctx, kf, cam, rng, iid) -> Draft:
    traj = ctx.traj
    res = goal_frames(ctx.runs, traj.T, rng, ctx.cfg.goal_min_gap)
    if res is None:
        raise Skip("too few frames for goal distractors")
    goal, others = res
    frames = [goal] + others
    perm = rng.permutation(5)
    tiles = [frames[i] for i in perm]
    labels = tuple(f"Configuration {LETTERS[k]}" for k in range(5))
    correct_label = labels[tiles.index(goal)]
    out = _out(traj, iid)
    srcs = tuple(str(traj.media_path(traj.frames[f].images[cam.name])) for f in tiles)
    job = MediaJob(out, srcs, tuple(() for _ in srcs), "grid", labels)
    q = _tpl()["questions"]["TS-GL"].format(instruction=_instruction_clause(traj.instruction))
    choices = list(labels)
    return Draft("TS-GL", q, choices, choices.index(correct_label), [out], tiles, [job],
                 {"grounding": "phase", "camera": cam.name, "goal_frame": goal, "min_gap": ctx.cfg.goal_min_gap})


def phase_choices(correct: PhaseLabel) -> list[str]:
    desc = _tpl()["phase_descriptions"]
    return [desc[correct.value]] + [desc[p.value] for p in (A, S, C, R, X) if p is not correct]


def gen_phase_current(ctx, kf, cam, rng, iid) -> Draft:
    if kf.phase is PhaseLabel.TRANSITION:
        raise Skip("transition keyframe")
    q = _tpl()["questions"]["AU"].format(instruction=_instruction_clause(ctx.traj.instruction))
    ref, job = frame_media(ctx.traj, cam.name, kf.frame_index)
    return Draft("AU", q, phase_choices(kf.phase), 0, [ref], [kf.frame_index], [job],
                 {"grounding": "phase", "camera": cam.name})


def gen_phase_next(ctx, kf, cam, rng, iid) -> Draft:
    if kf.phase is PhaseLabel.TRANSITION:
        raise Skip("transition keyframe")
    nxt = next_phase_run(ctx.runs, kf.frame_index)
    if nxt is None:
        raise Skip("no later phase")
    q = _tpl()["questions"]["IP"].format(current_phase=_tpl()["phase_names"][kf.phase.value])
    ref, job = frame_media(ctx.traj, cam.name, kf.frame_index)
    return Draft("IP", q, phase_choices(nxt.label), 0, [ref], [kf.frame_index], [job],
                 {"grounding": "phase", "camera": cam.name, "next_phase": nxt.label.value,
                  "next_frame": nxt.start_index})


def gen_trajectory_q(ctx, kf, cam, rng, iid) -> Draft:
    traj, t = ctx.traj, kf.frame_index
    if ctx.parsed is None:
        raise Skip("instruction parse failed")
    r = max(2, _marker_radius(cam) // 2)
    pts = []
    for i in range(t, traj.T, 2):
        uv = project(cam, traj.frames[i].ee_position)
        if uv is not None and in_image(cam, uv, margin=r):
            pts.append((round(uv[0]), round(uv[1])))
    if len(pts) < 2:
        raise Skip("path does not project into the camera")
    lex = ctx.lexicon
    dis = dx.instruction_distractors(traj.instruction, ctx.parsed.object_noun, ctx.parsed.location_noun,
                                     _tpl()["instruction_templates"], lex.objects, lex.locations, rng)
    if dis is None:
        raise Skip("not enough instruction distractors")
    prims = [Dot(pts[0], r + 1, "Green")] + [Dot(p, r, "Red") for p in pts[1:]]
    out = _out(traj, iid)
    src = str(traj.media_path(traj.frames[t].images[cam.name]))
    return Draft("TU", _tpl()["questions"]["TU"], [traj.instruction] + dis, 0, [out], [t],
                 [MediaJob(out, (src,), (tuple(prims),))],
                 {"grounding": "manifest", "camera": cam.name})


def gen_arrow(ctx, kf, cam, rng, iid) -> Draft:
    traj, t = ctx.traj, kf.frame_index
    h = ctx.cfg.arrow_horizon
    if t + h >= traj.T:
        raise Skip("horizon past trajectory end")
    a = project(cam, traj.frames[t].ee_position)
    b = project(cam, traj.frames[t + h].ee_position)
    if not (in_image(cam, a) and in_image(cam, b)):
        raise Skip("end effector not visible at both ends")
    du, dv = b[0] - a[0], b[1] - a[1]
    if math.hypot(du, dv) < ctx.cfg.arrow_min_px:
        raise Skip("image displacement too small")
    start = (round(a[0]), round(a[1]))
    length = max(0.2 * min(cam.width, cam.height), 20.0)
    correct_deg = math.degrees(math.atan2(dv, du)) % 360.0

    def usable(deg):
        end = dx.clip_ray(start, deg, length, cam.width, cam.height)
        return math.hypot(end[0] - start[0], end[1] - start[1]) >= 0.5 * length

    if not usable(correct_deg):
        raise Skip("correct arrow clipped by image border")
    angles = dx.arrow_angles(correct_deg, rng, 4, ctx.cfg.arrow_min_sep_deg, accept=usable)
    if angles is None:
        raise Skip("arrow separation infeasible")
    colors = [MARKER_COLORS[i] for i in rng.permutation(5)]
    head = max(6, round(length / 4))
    prims = tuple(
        Arrow(start, tuple(round(c) for c in dx.clip_ray(start, deg, length, cam.width, cam.height)), col, head)
        for deg, col in zip([correct_deg, *angles], colors)
    )
    out = _out(traj, iid)
    src = str(traj.media_path(traj.frames[t].images[cam.name]))
    choices = list(MARKER_COLORS)
    return Draft("AD", _tpl()["questions"]["AD"], choices, choices.index(colors[0]), [out], [t, t + h],
                 [MediaJob(out, (src,), (prims,))],
                 {"grounding": "proprioceptive", "camera": cam.name, "correct_angle_deg": round(correct_deg, 6),
                  "angles_deg": [round(correct_deg, 6)] + angles, "colors": colors,
                  "horizon": h, "min_sep_deg": ctx.cfg.arrow_min_sep_deg})


def sequence_keyframes(keyframes: Sequence[Keyframe], t: int, k_max: int) -> list[Keyframe]:
    """Latest keyframe per distinct phase up to ``t``, chronological, at most ``k_max``."""
    latest: dict[PhaseLabel, Keyframe] = {}
    for kf in keyframes:
        if kf.frame_index <= t and kf.phase is not PhaseLabel.TRANSITION:
            latest[kf.phase] = kf
    chosen = sorted(latest.values(), key=lambda k: k.frame_index)
    return chosen[-k_max:]


def gen_temporal_sequence(ctx, kf, cam, rng, iid) -> Draft:
    traj = ctx.traj
    seq = sequence_keyframes(ctx.keyframes, kf.frame_index, ctx.cfg.tseq_max_k)
    if len(seq) < 3:
        raise Skip("fewer than 3 distinct phases")
    k = len(seq)
    shown = rng.permutation(k)  # shown[j] = chronological index displayed as image j+1
    chrono = tuple(shown.index(c) + 1 for c in range(k))
    dist = dx.permutation_distractors(chrono, rng, 4)
    choices = [dx.sequence_text(chrono)] + [dx.sequence_text(p) for p in dist]
    frames = [seq[c].frame_index for c in shown]
    out = _out(traj, iid)
    srcs = tuple(str(traj.media_path(traj.frames[f].images[cam.name])) for f in frames)
    job = MediaJob(out, srcs, tuple(() for _ in srcs), "grid", tuple(str(j + 1) for j in range(k)))
    return Draft("TSeq", _tpl()["questions"]["TSeq"], choices, 0, [out], frames, [job],
                 {"grounding": "phase", "camera": cam.name, "phases": [seq[c].phase.value for c in shown]})


GENERATORS: dict[str, Callable] = {
    "RS": gen_gripper_open,
    "OS": gen_reachable,
    "SR": gen_direction,
    "SU": gen_depth,
    "MV": gen_correspondence,
    "TS-G": gen_stable_grasp,
    "TS-S": gen_task_success,
    "TS-GL": gen_goal_config,
    "AU": gen_phase_current,
    "IP": gen_phase_next,
    "TU": gen_trajectory_q,
    "AD": gen_arrow,
    "TSeq": gen_temporal_sequence,
}


def _camera_options(ctx: TrajContext, kf: Keyframe, category: str) -> list[CameraRig]:
    cams = [c for c in ctx.traj.cameras if c.name in kf.cameras_visible and resolution_filter(c.image_size)]
    depth = ctx.traj.frames[kf.frame_index].depth
    if category == "SU":
        cams = [c for c in cams if depth.get(c.name)]
    elif category == "MV":
        cams = [c for c in cams if c.stereo is not None and depth.get(c.name)]
    return cams


# ---------------------------------------------------------------------------
# consistency


def contradictions(items: Sequence[VQAItem]) -> set[str]:
    """Ids of gripper-open items and phase items on the same frame that disagree."""
    desc = _tpl()["phase_descriptions"]
    open_only = {desc["Approach"], desc["Stabilize"]}
    closed_only = {desc["Contact"]}
    by_frame: dict[tuple[str, int], list[VQAItem]] = {}
    for it in items:
        if it.category in ("RS", "AU"):
            by_frame.setdefault((it.traj_id, it.frame_indices[0]), []).append(it)
    bad: set[str] = set()
    for group in by_frame.values():
        rs = [i for i in group if i.category == "RS"]
        au = [i for i in group if i.category == "AU"]
        for r in rs:
            for a in au:
                ans_r, ans_a = r.meta.get("answer", r.answer), a.meta.get("answer", a.answer)
                if (ans_r == "Yes" and ans_a in closed_only) or (ans_r == "No" and ans_a in open_only):
                    bad.update({r.id, a.id})
    return bad


# ---------------------------------------------------------------------------
# driver


@dataclass
class GenResult:
    items: list[VQAItem]
    jobs: dict[str, MediaJob]
    skips: Counter


def generate_for_trajectory(ctx: TrajContext) -> GenResult:
    items: list[VQAItem] = []
    jobs: dict[str, MediaJob] = {}
    skips: Counter = Counter()
    traj = ctx.traj
    base_meta = {
        "seed": ctx.seed,
        "thresholds": ctx.th.to_dict(),
        "sign_mode": ctx.sign_mode,
        "scene_tag": traj.scene_tag,
        "skill_verb": ctx.parsed.skill_verb if ctx.parsed else None,
    }
    for kf in ctx.keyframes:
        allowed = applicable_prototypes(traj, kf, ctx.cfg.categories)
        for cat in CATEGORIES:
            if cat not in allowed:
                continue
            iid = item_id(traj.id, kf.frame_index, cat)
            rng = RngStream(ctx.seed, traj.id, cat, kf.frame_index)
            cams = _camera_options(ctx, kf, cat)
            if not cams:
                skips[f"{cat}: no eligible camera"] += 1
                continue
            cam = cams[rng.integers(0, len(cams))]
            try:
                draft = GENERATORS[cat](ctx, kf, cam, rng, iid)
            except Skip as exc:
                skips[f"{cat}: {exc}"] += 1
                continue
            meta = {**base_meta, **draft.meta}
            item = VQAItem(iid, cat, draft.question, draft.choices, draft.correct_index, draft.images,
                           traj.id, draft.frames, kf.phase.value, meta)
            item = dx.shuffle_and_nab(item, ctx.cfg.nab_p, rng.child("shuffle"))
            items.append(item)
            for job in draft.jobs:
                jobs.setdefault(job.output, job)
    bad = contradictions(items)
    if bad:
        skips["consistency: contradiction"] += len(bad)
        items = [i for i in items if i.id not in bad]
        used = {ref for i in items for ref in i.images}
        jobs = {k: v for k, v in jobs.items() if k in used}
    return GenResult(items, jobs, skips)
