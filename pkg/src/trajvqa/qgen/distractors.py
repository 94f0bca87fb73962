"""Distractor construction and answer-order randomisation."""

from __future__ import annotations

import itertools
import math
from dataclasses import replace
from typing import Sequence

import numpy as np

from trajvqa.geom import DirectionLabel, all_direction_labels, angular_separation
from trajvqa.qgen.items import BINARY_CATEGORIES, NAB, VQAItem
from trajvqa.qgen.rng import RngStream


def fisher_yates(seq: Sequence, rng: RngStream) -> tuple[list, list[int]]:
    """Shuffled copy plus ``perm`` with ``out[i] = seq[perm[i]]``."""
    perm = list(range(len(seq)))
    for i in range(len(perm) - 1, 0, -1):
        j = rng.integers(0, i + 1)
        perm[i], perm[j] = perm[j], perm[i]
    return [seq[p] for p in perm], perm


def shuffle_and_nab(item: VQAItem, nab_p: float, rng: RngStream) -> VQAItem:
    """Shuffle choices; five-choice non-binary items may get the answer swapped for NAB."""
    answer = item.answer
    choices, _ = fisher_yates(item.choices, rng)
    meta = dict(item.meta)
    meta["answer"] = answer
    meta["choices_pre_nab"] = list(choices)
    nab = False
    if len(choices) == 5 and item.category not in BINARY_CATEGORIES and rng.random() < nab_p:
        choices = [c for c in choices if c != answer] + [NAB]
        choices, _ = fisher_yates(choices, rng)
        nab = True
    meta["nab"] = nab
    correct = choices.index(NAB if nab else answer)
    return replace(item, choices=choices, correct_index=correct, meta=meta)


def binary_choices(partial: str) -> list[str]:
    return ["Yes", "No", "Cannot be determined", partial]


def sample_direction_distractors(
    correct: DirectionLabel, rng: RngStream, n: int = 4, share_weight: float = 3.0
) -> list[DirectionLabel]:
    pool = [d for d in all_direction_labels() if d != correct]
    w = np.array([share_weight if d.shares_component(correct) else 1.0 for d in pool])
    idx = rng.gen.choice(len(pool), size=n, replace=False, p=w / w.sum())
    return [pool[int(i)] for i in idx]


def depth_separation(depth_range: float, min_m: float = 0.05, frac: float = 0.10) -> float:
    return max(min_m, frac * depth_range)


def pick_depth_points(
    depth: np.ndarray,
    rng: RngStream,
    n: int = 5,
    min_m: float = 0.05,
    frac: float = 0.10,
    margin: int = 8,
    min_px: float = 14.0,
    avoid: Sequence[tuple[float, float]] = (),
    avoid_px: float = 15.0,
    draws: int = 400,
) -> list[tuple[int, int, float]] | None:
    """``n`` pixels ``(u, v, depth)`` with pairwise depth gaps of at least the separation."""
    h, w = depth.shape
    valid = np.isfinite(depth) & (depth > 0)
    if valid.sum() < n:
        return None
    sep = depth_separation(float(np.nanmax(depth[valid]) - np.nanmin(depth[valid])), min_m, frac)
    picked: list[tuple[int, int, float]] = []
    for _ in range(draws):
        u = rng.integers(margin, w - margin)
        v = rng.integers(margin, h - margin)
        if not valid[v, u]:
            continue
        d = float(depth[v, u])
        if any(math.hypot(u - a, v - b) < avoid_px for a, b in avoid):
            continue
        if all(abs(d - q[2]) >= sep and math.hypot(u - q[0], v - q[1]) >= min_px for q in picked):
            picked.append((u, v, d))
            if len(picked) == n:
                return picked
    return None


def depth_answer(colors: Sequence[str], depths: Sequence[float], variant: str) -> str:
    if variant == "closest":
        return colors[int(np.argmin(depths))]
    if variant == "farthest":
        return colors[int(np.argmax(depths))]
    raise ValueError(f"unknown depth variant {variant!r}")


def quadrant(u: float, v: float, w: int, h: int) -> int:
    return (1 if u >= w / 2 else 0) + (2 if v >= h / 2 else 0)


def quadrant_points(
    correct: tuple[float, float],
    w: int,
    h: int,
    rng: RngStream,
    n: int,
    min_px: float = 40.0,
    margin: int = 10,
    draws: int = 100,
) -> list[tuple[int, int]]:
    """Up to ``n`` points outside the correct point's quadrant, all ``min_px`` apart."""
    q0 = quadrant(*correct, w, h)
    others = [q for q in range(4) if q != q0]
    pts: list[tuple[int, int]] = []
    for _ in range(draws):
        q = others[rng.integers(0, 3)]
        ux0, ux1 = (margin, w // 2) if q % 2 == 0 else (int(math.ceil(w / 2)), w - margin)
        vy0, vy1 = (margin, h // 2) if q < 2 else (int(math.ceil(h / 2)), h - margin)
        if ux1 <= ux0 or vy1 <= vy0:
            continue
        p = (rng.integers(ux0, ux1), rng.integers(vy0, vy1))
        if quadrant(*p, w, h) == q0:
            continue
        if all(math.hypot(p[0] - a, p[1] - b) >= min_px for a, b in [correct, *pts]):
            pts.append(p)
            if len(pts) == n:
                break
    return pts


def clip_ray(start: tuple[float, float], angle_deg: float, length: float, w: int, h: int) -> tuple[float, float]:
    """End point of a ray from ``start``, shortened so it stays inside [0, w-1] x [0, h-1]."""
    dx, dy = math.cos(math.radians(angle_deg)), math.sin(math.radians(angle_deg))
    lim = length
    for s, d, hi in ((start[0], dx, w - 1), (start[1], dy, h - 1)):
        if d > 1e-12:
            lim = min(lim, (hi - s) / d)
        elif d < -1e-12:
            lim = min(lim, (0 - s) / d)
    lim = max(0.0, lim)
    return (start[0] + dx * lim, start[1] + dy * lim)


def arrow_angles(correct_deg: float, rng: RngStream, n: int = 4, min_sep: float = 45.0,
                 draws: int = 500, accept=None) -> list[float] | None:
    """``n`` angles at least ``min_sep`` from the correct one and from each other."""
    out: list[float] = []
    for _ in range(draws):
        a = round(rng.uniform(0.0, 360.0), 3)
        vecs = [(math.cos(math.radians(b)), math.sin(math.radians(b))) for b in [correct_deg, *out]]
        va = (math.cos(math.radians(a)), math.sin(math.radians(a)))
        if all(angular_separation(va, vb) >= min_sep for vb in vecs) and (accept is None or accept(a)):
            out.append(a)
            if len(out) == n:
                return out
    return None


def sequence_text(order: Sequence[int]) -> str:
    return " → ".join(str(i) for i in order)


def permutation_distractors(correct: Sequence[int], rng: RngStream, n: int = 4) -> list[tuple[int, ...]]:
    correct = tuple(correct)
    pool = [p for p in itertools.permutations(sorted(correct)) if p != correct]
    if len(pool) < n:
        raise ValueError("not enough orderings")
    idx = rng.gen.choice(len(pool), size=n, replace=False)
    return [pool[int(i)] for i in idx]


def instruction_distractors(
    instruction: str,
    obj: str | None,
    loc: str | None,
    templates: Sequence[str],
    objects: Sequence[str],
    locations: Sequence[str],
    rng: RngStream,
    n: int = 4,
    draws: int = 200,
) -> list[str] | None:
    """Template fills whose nouns do not occur in the instruction."""
    words = set(instruction.lower().replace(",", " ").split())
    objs = [o for o in objects if o not in words]
    locs = [x for x in locations if x not in words]
    if not objs or not locs:
        return None
    out: list[str] = []
    seen = {instruction.strip().lower()}
    for _ in range(draws):
        tpl = templates[rng.integers(0, len(templates))]
        o = objs[rng.integers(0, len(objs))]
        x = locs[rng.integers(0, len(locs))] if "{location}" in tpl else None
        if x is not None and x == o:
            continue
        if o == obj and x == loc:
            continue
        text = tpl.format(object=o, location=x) if x is not None else tpl.format(object=o)
        if text.lower() in seen:
            continue
        seen.add(text.lower())
        out.append(text)
        if len(out) == n:
            return out
    return None
