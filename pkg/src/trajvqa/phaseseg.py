"""Manipulation phase segmentation from gripper aperture and force.

Frames are labelled with a six-way case rule evaluated in a fixed order, and
the label stream is then constrained to the forward chain
Approach < Stabilize < Contact < Release < Reset, with Reset -> Approach as
the only allowed loop.
"""

from __future__ import annotations

import enum
from dataclasses import asdict, dataclass
from typing import Iterable, Sequence

import numpy as np

from trajvqa.trajmodel import TrajectoryRecord, normalize_aperture


class PhaseLabel(str, enum.Enum):
    APPROACH = "Approach"
    STABILIZE = "Stabilize"
    CONTACT = "Contact"
    RELEASE = "Release"
    RESET = "Reset"
    TRANSITION = "Transition"

    def __str__(self) -> str:
        return self.value


CHAIN = (PhaseLabel.APPROACH, PhaseLabel.STABILIZE, PhaseLabel.CONTACT, PhaseLabel.RELEASE, PhaseLabel.RESET)
_RANK = {p: i for i, p in enumerate(CHAIN)}

SIGN_MODES = ("paper", "kinematic")


@dataclass(frozen=True)
class SegThresholds:
    tau_g: float = 0.25
    tau_c: float = 0.75
    tau_f: float = 2.0
    epsilon: float = 0.02
    smooth_window: int = 5

    def __post_init__(self):
        if not 0 < self.tau_g < self.tau_c < 1:
            raise ValueError("thresholds must satisfy 0 < tau_g < tau_c < 1")
        if self.tau_f < 0:
            raise ValueError("tau_f must be nonnegative")
        if not self.epsilon > 0:
            raise ValueError("epsilon must be positive")
        if self.smooth_window < 1 or self.smooth_window % 2 == 0:
            raise ValueError("smooth_window must be an odd count >= 1")

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass(frozen=True)
class PhaseRun:
    label: PhaseLabel
    start_index: int
    end_index: int

    @property
    def length(self) -> int:
        return self.end_index - self.start_index + 1

    def __contains__(self, t: int) -> bool:
        return self.start_index <= t <= self.end_index


def median_smooth(x: Sequence[float], window: int) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if window <= 1 or len(x) == 0:
        return x.copy()
    half = window // 2
    padded = np.pad(x, half, mode="edge")
    return np.median(np.lib.stride_tricks.sliding_window_view(padded, window), axis=1)


def aperture_series(traj: TrajectoryRecord, th: SegThresholds) -> tuple[np.ndarray, np.ndarray]:
    """Smoothed normalized aperture ``s`` and its backward difference ``ds`` (``ds[0] = 0``)."""
    raw = [normalize_aperture(f.gripper_raw, traj.gripper_range) for f in traj.frames]
    s = median_smooth(raw, th.smooth_window)
    ds = np.zeros_like(s)
    ds[1:] = np.diff(s)
    return s, ds


def classify_frame(
    s_t: float,
    ds_t: float,
    force_mag: float | None,
    prev: PhaseLabel,
    th: SegThresholds,
    sign_mode: str = "paper",
) -> PhaseLabel:
    eps = th.epsilon
    # kinematic mode flips the direction tests of the Approach/Release/Reset cases
    d = -ds_t if sign_mode == "kinematic" else ds_t
    steady = abs(ds_t) <= eps
    if s_t < th.tau_g and d < -eps:
        return PhaseLabel.APPROACH
    if prev is PhaseLabel.APPROACH and s_t < th.tau_g and steady:
        return PhaseLabel.STABILIZE
    if (
        prev is PhaseLabel.STABILIZE
        and s_t >= th.tau_c
        and steady
        and (force_mag is None or force_mag > th.tau_f)
    ):
        return PhaseLabel.CONTACT
    if prev is PhaseLabel.CONTACT and s_t >= th.tau_c and d > eps:
        return PhaseLabel.RELEASE
    if prev is PhaseLabel.RELEASE and s_t < th.tau_g and d > eps:
        return PhaseLabel.RESET
    return PhaseLabel.TRANSITION


def allowed_after(state: PhaseLabel | None, label: PhaseLabel) -> bool:
    """Whether a non-Transition ``label`` may follow the current chain ``state``."""
    if state is None:
        return True
    if state is PhaseLabel.RESET and label is PhaseLabel.APPROACH:
        return True
    return _RANK[label] >= _RANK[state]


def enforce_order(labels: Iterable[PhaseLabel]) -> list[PhaseLabel]:
    out = []
    state = None
    for lab in labels:
        if lab is PhaseLabel.TRANSITION:
            out.append(lab)
        elif allowed_after(state, lab):
            out.append(lab)
            state = lab
        else:
            out.append(PhaseLabel.TRANSITION)
    return out


def run_length(labels: Sequence[PhaseLabel]) -> list[PhaseRun]:
    runs: list[PhaseRun] = []
    start = 0
    for i in range(1, len(labels) + 1):
        if i == len(labels) or labels[i] != labels[start]:
            runs.append(PhaseRun(labels[start], start, i - 1))
            start = i
    return runs


def label_frames(
    s: Sequence[float],
    ds: Sequence[float],
    forces: Sequence[float | None],
    th: SegThresholds,
    sign_mode: str = "paper",
) -> list[PhaseLabel]:
    """Per-frame labels with the partial order already applied.

    ``prev`` in the case rule is the current phase of the chain, i.e. the last
    accepted non-Transition label. Transition frames leave it untouched, which
    is what lets e.g. Contact follow Stabilize across the closing frames.
    """
    if sign_mode not in SIGN_MODES:
        raise ValueError(f"sign_mode must be one of {SIGN_MODES}")
    labels = []
    state: PhaseLabel | None = None
    for s_t, ds_t, f_t in zip(s, ds, forces):
        lab = classify_frame(float(s_t), float(ds_t), f_t, state or PhaseLabel.TRANSITION, th, sign_mode)
        if lab is not PhaseLabel.TRANSITION and allowed_after(state, lab):
            state = lab
        elif lab is not PhaseLabel.TRANSITION:
            lab = PhaseLabel.TRANSITION
        labels.append(lab)
    return enforce_order(labels)


def segment_labels(traj: TrajectoryRecord, th: SegThresholds, sign_mode: str = "paper") -> list[PhaseLabel]:
    s, ds = aperture_series(traj, th)
    return label_frames(s, ds, [f.force_magnitude for f in traj.frames], th, sign_mode)


def segment(traj: TrajectoryRecord, th: SegThresholds | None = None, sign_mode: str = "paper") -> list[PhaseRun]:
    return run_length(segment_labels(traj, th or SegThresholds(), sign_mode))


def run_at(runs: Sequence[PhaseRun], t: int) -> PhaseRun:
    for r in runs:
        if t in r:
            return r
    raise IndexError(f"frame {t} not covered by runs")


def order_violations(labels: Sequence[PhaseLabel]) -> list[tuple[int, PhaseLabel, PhaseLabel]]:
    """Consecutive non-Transition pairs that break the chain/loop rule."""
    bad = []
    prev = None
    for i, lab in enumerate(labels):
        if lab is PhaseLabel.TRANSITION:
            continue
        if prev is not None and not allowed_after(prev, lab):
            bad.append((i, prev, lab))
        prev = lab
    return bad
