"""JSONL dataset writing/reading, statistics, and stratified curation."""

from __future__ import annotations

import json
import shutil
import statistics
from collections import Counter, defaultdict
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Iterable, Mapping, Sequence

from PIL import Image

from trajvqa.qgen.items import LETTERS, VQAItem
from trajvqa.qgen.rng import RngStream

ITEMS_FILE = "items.jsonl"


class DatasetError(ValueError):
    pass


def sort_key(item: VQAItem) -> tuple:
    return (item.traj_id, item.frame_indices[0] if item.frame_indices else -1, item.category, item.id)


def item_line(item: VQAItem) -> str:
    return json.dumps(item.to_dict(), ensure_ascii=False, sort_keys=True, separators=(",", ":"))


def write_jsonl(items: Iterable[VQAItem], out_dir, media_src=None) -> dict:
    """Write ``items.jsonl`` in stable order and make sure every image lives under ``out_dir``.

    With ``media_src`` the referenced files are copied from there; otherwise
    they must already exist in ``out_dir``.
    """
    out_dir = Path(out_dir)
    items = sorted(items, key=sort_key)
    seen: set[str] = set()
    for it in items:
        if it.id in seen:
            raise DatasetError(f"duplicate item id {it.id}")
        seen.add(it.id)
    (out_dir / "media").mkdir(parents=True, exist_ok=True)
    media: list[str] = []
    for ref in sorted({r for it in items for r in it.images}):
        dst = out_dir / ref
        if media_src is not None:
            src = Path(media_src) / ref
            if src.resolve() != dst.resolve():
                dst.parent.mkdir(parents=True, exist_ok=True)
                shutil.copyfile(src, dst)
        if not dst.is_file():
            raise DatasetError(f"missing media {ref}")
        media.append(ref)
    path = out_dir / ITEMS_FILE
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for it in items:
            fh.write(item_line(it) + "\n")
    return {"items": str(path.relative_to(out_dir)), "count": len(items), "media": media}


def read_jsonl(path) -> list[VQAItem]:
    out = []
    with open(path, encoding="utf-8") as fh:
        for n, line in enumerate(fh, 1):
            if not line.strip():
                continue
            try:
                out.append(VQAItem.from_dict(json.loads(line)))
            except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
                raise DatasetError(f"{path}:{n}: malformed line: {exc}") from exc
    return out


def _summary(values: Sequence[float]) -> dict:
    if not values:
        return {"mean": None, "median": None, "min": None, "max": None}
    return {
        "mean": round(statistics.fmean(values), 6),
        "median": statistics.median(values),
        "min": min(values),
        "max": max(values),
    }


def compute_stats(path, image_size: Callable[[str], tuple[int, int]] | None = None) -> dict:
    """Dataset statistics keyed like the appendix statistics table.

    ``image_size`` maps an image reference to (w, h); by default the PNG
    header next to the JSONL is read.
    """
    path = Path(path)
    items = read_jsonl(path)
    if image_size is None:
        root = path.parent

        def image_size(ref: str) -> tuple[int, int]:
            with Image.open(root / ref) as im:
                return im.size

    q_len = [len(i.question) for i in items]
    n_choices = [len(i.choices) for i in items]
    choice_len = [len(c) for i in items for c in i.choices]
    total_len = [sum(len(c) for c in i.choices) for i in items]
    letters = Counter(LETTERS[i.correct_index] for i in items)
    n = len(items)
    res = Counter()
    sizes: dict[str, tuple[int, int]] = {}
    for it in items:
        for ref in it.images:
            if ref not in sizes:
                sizes[ref] = image_size(ref)
            w, h = sizes[ref]
            res[f"{w}x{h}"] += 1
    widths = [s[0] for s in sizes.values()]
    heights = [s[1] for s in sizes.values()]
    return {
        "Number of questions": n,
        "Question length (chars)": _summary(q_len),
        "Number of choices per question": _summary(n_choices),
        "Choice length (chars)": _summary(choice_len),
        "Total choice length per question (chars)": _summary(total_len),
        "Answer distribution": {
            L: {"count": letters.get(L, 0), "percent": round(100.0 * letters.get(L, 0) / n, 4) if n else 0.0}
            for L in LETTERS
        },
        "Image resolution": {
            "histogram": dict(sorted(res.items(), key=lambda kv: (-kv[1], kv[0]))),
            "unique resolutions": len(res),
            "width": _summary(widths),
            "height": _summary(heights),
        },
        "Categories": dict(sorted(Counter(i.category for i in items).items())),
    }


# ---------------------------------------------------------------------------
# curation

StratumKey = tuple


@dataclass
class CurationReport:
    target: dict[str, float]
    achieved: dict[str, float]
    available: dict[str, int]
    taken: dict[str, int]

    def to_dict(self) -> dict:
        return {"target": self.target, "achieved": self.achieved, "available": self.available, "taken": self.taken}


def stratum_of(item: VQAItem, fields: Sequence[str]) -> tuple:
    out = []
    for f in fields:
        if f == "category":
            out.append(item.category)
        else:
            out.append(item.meta.get(f))
    return tuple(out)


def _key_text(key: tuple) -> str:
    return "|".join("*" if k is None else str(k) for k in key)


def curate(
    items: Sequence[VQAItem],
    targets: Mapping[tuple, float],
    fields: Sequence[str] = ("scene_tag", "skill_verb", "category"),
    caps: Mapping[tuple, int] | None = None,
    seed: int = 0,
) -> tuple[list[VQAItem], CurationReport]:
    """Stratified downsampling toward ``targets`` (weights per stratum key).

    Output size is set by the scarcest stratum relative to its weight; each
    stratum then contributes ``floor(weight * N)`` items, never more than its
    cap. ``None`` in a target key matches any value in that field.
    """
    if not items:
        raise DatasetError("nothing to curate")
    total = sum(targets.values())
    if total <= 0:
        raise DatasetError("targets must have positive total weight")
    weights = {tuple(k): v / total for k, v in targets.items() if v > 0}
    pools: dict[tuple, list[VQAItem]] = defaultdict(list)
    for it in sorted(items, key=sort_key):
        s = stratum_of(it, fields)
        for k in weights:
            if all(kk is None or kk == ss for kk, ss in zip(k, s)):
                pools[k].append(it)
                break
    caps = caps or {}
    avail = {k: min(len(pools[k]), caps.get(k, len(pools[k]))) for k in weights}
    N = min(avail[k] / w for k, w in weights.items())
    out: list[VQAItem] = []
    taken: dict[tuple, int] = {}
    for k in sorted(weights, key=_key_text):
        take = min(avail[k], int(weights[k] * N + 1e-9))
        pool = pools[k]
        rng = RngStream(seed, "curate", _key_text(k), 0)
        idx = sorted(int(i) for i in rng.gen.choice(len(pool), size=take, replace=False)) if take else []
        out.extend(pool[i] for i in idx)
        taken[k] = take
    n_out = len(out)
    report = CurationReport(
        target={_key_text(k): round(w, 6) for k, w in sorted(weights.items(), key=lambda kv: _key_text(kv[0]))},
        achieved={_key_text(k): round(taken[k] / n_out, 6) if n_out else 0.0 for k in sorted(taken, key=_key_text)},
        available={_key_text(k): len(pools[k]) for k in sorted(weights, key=_key_text)},
        taken={_key_text(k): taken[k] for k in sorted(taken, key=_key_text)},
    )
    return sorted(out, key=sort_key), report


def parse_targets(spec: Mapping[str, float], n_fields: int) -> dict[tuple, float]:
    """``{"office|pick|RS": 0.2, "*|*|SU": 0.1}`` -> tuple keys (``*`` = wildcard)."""
    out = {}
    for k, v in spec.items():
        parts = k.split("|")
        if len(parts) != n_fields:
            raise DatasetError(f"target key {k!r} needs {n_fields} fields")
        out[tuple(None if p == "*" else p for p in parts)] = float(v)
    return out
