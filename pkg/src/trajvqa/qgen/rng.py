from __future__ import annotations

import hashlib

import numpy as np


def stream_seed(*parts) -> int:
    """Stable 64-bit hash of the parts (independent of PYTHONHASHSEED)."""
    h = hashlib.blake2b(digest_size=8)
    for p in parts:
        h.update(repr(p).encode("utf-8"))
        h.update(b"\x1f")
    return int.from_bytes(h.digest(), "little")


class RngStream:
    """numpy Generator keyed by (dataset_seed, traj_id, category, frame_index[, salt])."""

    def __init__(self, dataset_seed: int, traj_id: str, category: str, frame_index: int, salt: str = ""):
        self.key = (int(dataset_seed), str(traj_id), str(category), int(frame_index), salt)
        self.seed = stream_seed(*self.key)
        self.gen = np.random.default_rng(self.seed)

    def child(self, salt: str) -> "RngStream":
        s = self.key[4]
        return RngStream(*self.key[:4], salt=f"{s}/{salt}" if s else salt)

    def integers(self, lo: int, hi: int) -> int:
        return int(self.gen.integers(lo, hi))

    def random(self) -> float:
        return float(self.gen.random())

    def uniform(self, lo: float, hi: float) -> float:
        return float(self.gen.uniform(lo, hi))

    def permutation(self, n: int) -> list[int]:
        return [int(i) for i in self.gen.permutation(n)]

    def choice(self, seq, p=None):
        return seq[int(self.gen.choice(len(seq), p=p))]
