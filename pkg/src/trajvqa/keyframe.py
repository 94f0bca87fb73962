"""Keyframe selection: phase-change candidates, visibility filter, pose-diversity greedy."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from trajvqa.geom import geodesic_angle, in_image, project
from trajvqa.phaseseg import PhaseLabel, PhaseRun, run_at
from trajvqa.trajmodel import CameraRig, TrajectoryRecord

POSE_LAMBDA = 0.1  # metres per radian
MIN_GAP = 5
BUDGET = 8


@dataclass(frozen=True)
class Keyframe:
    frame_index: int
    phase: PhaseLabel
    cameras_visible: frozenset[str]
    diversity_score: float


def visibility(traj: TrajectoryRecord, cam: CameraRig, frame_index: int) -> bool:
    """EE (and the object point, when known) must project inside the image."""
    if not in_image(cam, project(cam, traj.frames[frame_index].ee_position)):
        return False
    obj = traj.object_point
    return obj is None or in_image(cam, project(cam, obj))


def pose_distance(traj: TrajectoryRecord, i: int, j: int, lam: float = POSE_LAMBDA) -> float:
    a, b = traj.frames[i].ee_pose, traj.frames[j].ee_pose
    dt = float(np.linalg.norm(np.subtract(a.translation, b.translation)))
    return dt + lam * geodesic_angle(a.rotation, b.rotation)


def candidate_frames(runs: Sequence[PhaseRun], min_gap: int = MIN_GAP) -> list[int]:
    """Run starts plus midpoints of long runs.

    Candidates closer than ``min_gap`` frames to an already accepted one are
    dropped; phase-run starts are accepted first, then Transition-run starts,
    then midpoints, so a one-frame phase run never loses to its neighbour.
    """
    tiers = [
        [r.start_index for r in runs if r.label is not PhaseLabel.TRANSITION],
        [r.start_index for r in runs if r.label is PhaseLabel.TRANSITION],
        [(r.start_index + r.end_index) // 2 for r in runs if r.length > 2 * min_gap],
    ]
    kept: list[int] = []
    for tier in tiers:
        for t in tier:
            if all(abs(t - k) >= min_gap for k in kept):
                kept.append(t)
    return sorted(kept)


def greedy_maxmin(dist: np.ndarray, budget: int, priority: Sequence[int] | None = None) -> list[int]:
    """Farthest-point selection in priority tiers.

    The lowest tier is exhausted before the next one is considered; within a
    tier the candidate farthest from everything chosen so far wins, ties going
    to the lower index. The first pick is the lowest index of the first tier.
    Returns positions in selection order.
    """
    n = dist.shape[0]
    if n == 0 or budget <= 0:
        return []
    prio = list(priority) if priority is not None else [0] * n
    first = min(range(n), key=lambda i: (prio[i], i))
    chosen = [first]
    mind = dist[first].copy()
    while len(chosen) < min(budget, n):
        best = None
        for i in range(n):
            if i in chosen:
                continue
            key = (prio[i], -round(float(mind[i]), 12), i)
            if best is None or key < best[0]:
                best = (key, i)
        i = best[1]
        chosen.append(i)
        mind = np.minimum(mind, dist[i])
    return chosen


def min_pairwise(dist: np.ndarray, idx: Sequence[int]) -> float:
    idx = list(idx)
    if len(idx) < 2:
        return float("inf")
    return min(float(dist[a, b]) for k, a in enumerate(idx) for b in idx[k + 1:])


def select_keyframes(
    traj: TrajectoryRecord,
    runs: Sequence[PhaseRun],
    budget: int = BUDGET,
    min_gap: int = MIN_GAP,
    lam: float = POSE_LAMBDA,
) -> list[Keyframe]:
    cands = []
    for t in candidate_frames(runs, min_gap):
        vis = frozenset(c.name for c in traj.cameras if visibility(traj, c, t))
        if vis:
            cands.append((t, vis))
    if not cands:
        return []
    n = len(cands)
    dist = np.zeros((n, n))
    for a in range(n):
        for b in range(a + 1, n):
            dist[a, b] = dist[b, a] = pose_distance(traj, cands[a][0], cands[b][0], lam)
    prio = [0 if run_at(runs, t).label is not PhaseLabel.TRANSITION else 1 for t, _ in cands]
    picked = sorted(greedy_maxmin(dist, budget, prio))
    out = []
    for p in picked:
        others = [q for q in picked if q != p]
        score = min((float(dist[p, q]) for q in others), default=0.0)
        t, vis = cands[p]
        out.append(Keyframe(t, run_at(runs, t).label, vis, score))
    return out
