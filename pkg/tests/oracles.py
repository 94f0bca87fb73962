"""Independent reference implementations used as test oracles.

Nothing here imports the code under test except for enum/value types.
"""

from __future__ import annotations

import itertools

import numpy as np

from trajvqa.phaseseg import PhaseLabel as P

PREVS = (P.APPROACH, P.STABILIZE, P.CONTACT, P.RELEASE, P.RESET, P.TRANSITION)

# Rule table over binned inputs, first match wins, "*" matches anything.
#   s bins:  lo (< tau_g), mid, hi (>= tau_c)
#   ds bins: neg (< -eps), flat (|ds| <= eps), pos (> eps)
#   f bins:  none (absent), weak (<= tau_f), strong (> tau_f)
PAPER_TABLE = [
    ("lo", "neg", "*", "*", P.APPROACH),
    ("lo", "flat", "*", P.APPROACH, P.STABILIZE),
    ("hi", "flat", "none", P.STABILIZE, P.CONTACT),
    ("hi", "flat", "strong", P.STABILIZE, P.CONTACT),
    ("hi", "pos", "*", P.CONTACT, P.RELEASE),
    ("lo", "pos", "*", P.RELEASE, P.RESET),
]
KINEMATIC_TABLE = [
    ("lo", "pos", "*", "*", P.APPROACH),
    ("lo", "flat", "*", P.APPROACH, P.STABILIZE),
    ("hi", "flat", "none", P.STABILIZE, P.CONTACT),
    ("hi", "flat", "strong", P.STABILIZE, P.CONTACT),
    ("hi", "neg", "*", P.CONTACT, P.RELEASE),
    ("lo", "neg", "*", P.RELEASE, P.RESET),
]

S_BINS, D_BINS, F_BINS = ("lo", "mid", "hi"), ("neg", "flat", "pos"), ("none", "weak", "strong")


def lookup_table(table) -> dict:
    out = {}
    for cell in itertools.product(S_BINS, D_BINS, F_BINS, PREVS):
        label = P.TRANSITION
        for row in table:
            if all(r == "*" or r == c for r, c in zip(row[:4], cell)):
                label = row[4]
                break
        out[cell] = label
    return out


def bins(s, ds, f, tau_g, tau_c, tau_f, eps):
    """Vectorized binning; ``f`` uses NaN for an absent force channel."""
    s, ds, f = map(np.asarray, (s, ds, f))
    sb = np.where(s < tau_g, 0, np.where(s >= tau_c, 2, 1))
    db = np.where(ds < -eps, 0, np.where(np.abs(ds) <= eps, 1, 2))
    fb = np.where(np.isnan(f), 0, np.where(f > tau_f, 2, 1))
    return sb, db, fb


def oracle_labels(s, ds, f, prev, tau_g=0.25, tau_c=0.75, tau_f=2.0, eps=0.02, mode="paper"):
    table = lookup_table(PAPER_TABLE if mode == "paper" else KINEMATIC_TABLE)
    sb, db, fb = bins(s, ds, f, tau_g, tau_c, tau_f, eps)
    return [table[(S_BINS[a], D_BINS[b], F_BINS[c], p)] for a, b, c, p in zip(sb, db, fb, prev)]


def random_tuples(n: int, seed: int, tau_g=0.25, tau_c=0.75, tau_f=2.0, eps=0.02):
    """Random inputs with a share of exact-threshold values to probe boundaries."""
    rng = np.random.default_rng(seed)
    s = rng.uniform(0, 1, n)
    ds = rng.uniform(-0.1, 0.1, n)
    f = rng.uniform(0, 6, n)
    edge = rng.random(n)
    s[edge < 0.05] = tau_g
    s[(edge >= 0.05) & (edge < 0.1)] = tau_c
    edge = rng.random(n)
    ds[edge < 0.04] = eps
    ds[(edge >= 0.04) & (edge < 0.08)] = -eps
    ds[(edge >= 0.08) & (edge < 0.1)] = 0.0
    edge = rng.random(n)
    f[edge < 0.05] = tau_f
    f[edge > 0.7] = np.nan
    prev = [PREVS[i] for i in rng.integers(0, len(PREVS), n)]
    return s, ds, f, prev


CHAIN = {P.APPROACH: 0, P.STABILIZE: 1, P.CONTACT: 2, P.RELEASE: 3, P.RESET: 4}


def chain_ok(labels) -> bool:
    """Consecutive non-Transition labels never step backwards except Reset -> Approach."""
    seq = [lab for lab in labels if lab is not P.TRANSITION]
    for a, b in zip(seq, seq[1:]):
        if CHAIN[b] < CHAIN[a] and not (a is P.RESET and b is P.APPROACH):
            return False
    return True


def brute_force_maxmin(dist: np.ndarray, k: int) -> float:
    best = -1.0
    for combo in itertools.combinations(range(len(dist)), k):
        sub = dist[np.ix_(combo, combo)]
        best = max(best, float(sub[np.triu_indices(k, 1)].min()))
    return best


def quat_matrix(q) -> np.ndarray:
    """Rotation matrix of a unit quaternion (w, x, y, z), written out longhand."""
    w, x, y, z = q
    return np.array([
        [1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y)],
        [2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x)],
        [2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y)],
    ])


def camera_point(cam_json: dict, p) -> np.ndarray:
    ext = cam_json["extrinsic"]
    return quat_matrix(ext["q"]) @ np.asarray(p, float) + np.asarray(ext["t"], float)


def pixel(cam_json: dict, p) -> tuple[float, float]:
    x, y, z = camera_point(cam_json, p)
    k = cam_json["intrinsics"]
    return (k["fx"] * x / z + k["cx"], k["fy"] * y / z + k["cy"])


def bucket_text(v, theta=0.33) -> str:
    n = float(np.linalg.norm(v))
    parts = []
    if abs(v[1]) > theta * n:
        parts.append("Upper" if v[1] < 0 else "Lower")
    if abs(v[0]) > theta * n:
        parts.append("Right" if v[0] > 0 else "Left")
    if abs(v[2]) > theta * n:
        parts.append("Forward" if v[2] > 0 else "Backward")
    return " ".join(parts)
