from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any

CATEGORIES = ("RS", "OS", "SR", "SU", "MV", "TS-G", "TS-S", "TS-GL", "AU", "IP", "TU", "AD", "TSeq")
BINARY_CATEGORIES = frozenset({"RS", "OS", "TS-S", "TS-G"})
NAB = "None of the above"
LETTERS = "ABCDE"


class ItemError(ValueError):
    pass


@dataclass
class VQAItem:
    id: str
    category: str
    question: str
    choices: list[str]
    correct_index: int
    images: list[str]
    traj_id: str
    frame_indices: list[int]
    phase: str
    meta: dict[str, Any] = field(default_factory=dict)

    def __post_init__(self):
        self.validate()

    def validate(self) -> None:
        n = len(self.choices)
        if self.category not in CATEGORIES:
            raise ItemError(f"{self.id}: unknown category {self.category!r}")
        if not 4 <= n <= 5:
            raise ItemError(f"{self.id}: {n} choices")
        if self.category in BINARY_CATEGORIES and n != 4:
            raise ItemError(f"{self.id}: binary item must have exactly 4 choices")
        if not 0 <= self.correct_index < n:
            raise ItemError(f"{self.id}: correct_index {self.correct_index} out of range")
        if len(set(self.choices)) != n:
            raise ItemError(f"{self.id}: duplicate choices")
        if not self.images:
            raise ItemError(f"{self.id}: no images")

    @property
    def answer(self) -> str:
        return self.choices[self.correct_index]

    @property
    def answer_letter(self) -> str:
        return LETTERS[self.correct_index]

    def to_dict(self) -> dict:
        return {
            "id": self.id,
            "category": self.category,
            "question": self.question,
            "choices": list(self.choices),
            "correct_index": self.correct_index,
            "images": list(self.images),
            "traj_id": self.traj_id,
            "frame_indices": list(self.frame_indices),
            "phase": self.phase,
            "meta": self.meta,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "VQAItem":
        return cls(
            id=d["id"], category=d["category"], question=d["question"], choices=list(d["choices"]),
            correct_index=int(d["correct_index"]), images=list(d["images"]), traj_id=d["traj_id"],
            frame_indices=[int(i) for i in d["frame_indices"]], phase=d["phase"], meta=dict(d.get("meta", {})),
        )


def item_id(traj_id: str, frame: int, category: str, k: int = 0) -> str:
    return f"{traj_id}-{frame:05d}-{category}-{k}"
