"""End-to-end generation: manifests -> phases -> keyframes -> items -> media -> JSONL."""

from __future__ import annotations

import json
import shutil
from collections import Counter
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Iterable, Sequence

import numpy as np

from trajvqa.annotate import execute_job
from trajvqa.datasetio import write_jsonl
from trajvqa.keyframe import BUDGET, MIN_GAP, POSE_LAMBDA, select_keyframes
from trajvqa.phaseseg import SIGN_MODES, SegThresholds, aperture_series, segment
from trajvqa.qgen import QGenConfig, TrajContext, VQAItem, generate_for_trajectory
from trajvqa.trajmodel import ManifestError, TrajectoryRecord, load_manifest, read_pfm

RUN_FILE = "run.json"
SUMMARY_FILE = "summary.json"
FORMAT_VERSION = 1


@dataclass(frozen=True)
class GenConfig:
    seed: int = 0
    thresholds: SegThresholds = field(default_factory=SegThresholds)
    sign_mode: str = "paper"
    keyframe_budget: int = BUDGET
    min_gap: int = MIN_GAP
    pose_lambda: float = POSE_LAMBDA
    strict: bool = False
    qgen: QGenConfig = field(default_factory=QGenConfig)

    def __post_init__(self):
        if self.sign_mode not in SIGN_MODES:
            raise ValueError(f"sign_mode must be one of {SIGN_MODES}")
        if self.keyframe_budget < 1 or self.min_gap < 1:
            raise ValueError("keyframe budget and min_gap must be positive")

    def to_dict(self) -> dict:
        return {
            "seed": self.seed,
            "thresholds": self.thresholds.to_dict(),
            "sign_mode": self.sign_mode,
            "keyframe_budget": self.keyframe_budget,
            "min_gap": self.min_gap,
            "pose_lambda": self.pose_lambda,
            "strict": self.strict,
            "qgen": self.qgen.to_dict(),
            "camera_convention": "x-right, y-down, z-forward",
        }

    @classmethod
    def from_dict(cls, d: dict) -> "GenConfig":
        d = {k: v for k, v in d.items() if k != "camera_convention"}
        if "thresholds" in d:
            d["thresholds"] = SegThresholds(**d["thresholds"])
        if "qgen" in d:
            d["qgen"] = QGenConfig.from_dict(d["qgen"])
        unknown = set(d) - set(cls.__dataclass_fields__)
        if unknown:
            raise ValueError(f"unknown config keys {sorted(unknown)}")
        return cls(**d)

    @classmethod
    def load(cls, path) -> "GenConfig":
        return cls.from_dict(json.loads(Path(path).read_text(encoding="utf-8")))


def pfm_depth_fn(traj: TrajectoryRecord) -> Callable[[str, int], np.ndarray | None]:
    cache: dict[str, np.ndarray] = {}

    def depth(cam: str, t: int):
        ref = traj.frames[t].depth.get(cam)
        if not ref:
            return None
        if ref not in cache:
            cache[ref] = read_pfm(traj.media_path(ref))
        return cache[ref]

    return depth


@dataclass
class TrajOutcome:
    traj_id: str | None
    items: list[VQAItem]
    skips: Counter
    keyframes: int
    error: str | None = None


def process_record(traj: TrajectoryRecord, cfg: GenConfig, depth_fn=None, out_dir=None) -> TrajOutcome:
    """Segment, select keyframes and build items; media is rendered only when ``out_dir`` is given."""
    runs = segment(traj, cfg.thresholds, cfg.sign_mode)
    s, _ = aperture_series(traj, cfg.thresholds)
    kfs = select_keyframes(traj, runs, cfg.keyframe_budget, cfg.min_gap, cfg.pose_lambda)
    skips: Counter = Counter()
    if not kfs:
        skips["trajectory: no visible keyframes"] += 1
        return TrajOutcome(traj.id, [], skips, 0)
    ctx = TrajContext(traj, runs, s, kfs, cfg.thresholds, cfg.qgen, cfg.seed,
                      depth_fn or pfm_depth_fn(traj), cfg.sign_mode)
    if ctx.parsed is None:
        skips["trajectory: instruction parse failed"] += 1
    res = generate_for_trajectory(ctx)
    skips.update(res.skips)
    if out_dir is not None:
        for ref in sorted(res.jobs):
            execute_job(res.jobs[ref], Path(out_dir) / ref)
    return TrajOutcome(traj.id, res.items, skips, len(kfs))


def _work(args) -> TrajOutcome:
    path, cfg, out_dir = args
    try:
        traj = load_manifest(path, strict=cfg.strict)
    except (ManifestError, OSError) as exc:
        return TrajOutcome(None, [], Counter(), 0, f"{path}: {exc}")
    try:
        return process_record(traj, cfg, out_dir=out_dir)
    except Exception as exc:  # noqa: BLE001 - reported as a hard error for this trajectory
        return TrajOutcome(traj.id, [], Counter(), 0, f"{traj.id}: {type(exc).__name__}: {exc}")


def _prepare_out_dir(out_dir: Path) -> None:
    if out_dir.exists() and any(out_dir.iterdir()):
        if not (out_dir / RUN_FILE).is_file():
            raise FileExistsError(f"{out_dir} is not empty and holds no previous run")
        shutil.rmtree(out_dir / "media", ignore_errors=True)
        for name in ("items.jsonl", RUN_FILE, SUMMARY_FILE):
            (out_dir / name).unlink(missing_ok=True)
    out_dir.mkdir(parents=True, exist_ok=True)


def run_generate(manifests: Sequence, out_dir, cfg: GenConfig, jobs: int = 1) -> dict:
    out_dir = Path(out_dir)
    _prepare_out_dir(out_dir)
    paths = sorted(Path(p) for p in manifests)
    work = [(p, cfg, out_dir) for p in paths]
    if jobs > 1 and len(work) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            outcomes = list(pool.map(_work, work))
    else:
        outcomes = [_work(w) for w in work]

    items: list[VQAItem] = []
    skips: Counter = Counter()
    errors: list[str] = []
    seen: set[str] = set()
    ids: list[str] = []
    for o in outcomes:
        if o.error:
            errors.append(o.error)
            continue
        if o.traj_id in seen:
            errors.append(f"{o.traj_id}: duplicate trajectory id")
            continue
        seen.add(o.traj_id)
        ids.append(o.traj_id)
        items.extend(o.items)
        skips.update(o.skips)
    write_jsonl(items, out_dir)
    summary = {
        "trajectories": len(paths),
        "trajectories_processed": len(ids),
        "items": len(items),
        "items_per_category": dict(sorted(Counter(i.category for i in items).items())),
        "skip_reasons": dict(sorted(skips.items())),
        "errors": errors,
    }
    run = {"format_version": FORMAT_VERSION, "config": cfg.to_dict(), "trajectories": sorted(ids)}
    (out_dir / RUN_FILE).write_text(json.dumps(run, indent=1, sort_keys=True) + "\n", encoding="utf-8")
    (out_dir / SUMMARY_FILE).write_text(json.dumps(summary, indent=1, sort_keys=True) + "\n", encoding="utf-8")
    return summary


def generate_records(records: Iterable[TrajectoryRecord], cfg: GenConfig,
                     depth_fn_for: Callable[[TrajectoryRecord], Callable] | None = None) -> tuple[list[VQAItem], Counter]:
    """In-memory generation without media; used for large synthetic batches."""
    items: list[VQAItem] = []
    skips: Counter = Counter()
    for rec in records:
        o = process_record(rec, cfg, depth_fn_for(rec) if depth_fn_for else None)
        items.extend(o.items)
        skips.update(o.skips)
    return items, skips
