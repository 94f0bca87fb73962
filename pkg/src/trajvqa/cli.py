"""Command-line entrypoint: ``trajvqa <subcommand> ...``."""

from __future__ import annotations

import argparse
import json
import logging
import shutil
import sys
from pathlib import Path
from typing import Sequence

from trajvqa.datasetio import DatasetError, compute_stats, curate, parse_targets, read_jsonl, write_jsonl
from trajvqa.evalharness import EvalConfig, canned_responder, evaluate
from trajvqa.keyframe import select_keyframes
from trajvqa.phaseseg import SIGN_MODES, SegThresholds, segment
from trajvqa.pipeline import GenConfig, run_generate
from trajvqa.qgen import QGenConfig
from trajvqa.trajmodel import ManifestError, load_manifest
from trajvqa.trajmodel.synth import SynthSpecError, gen_synthetic

log = logging.getLogger("trajvqa")


def _dump(obj, out: str | None) -> None:
    text = json.dumps(obj, indent=1, sort_keys=True) + "\n"
    if out:
        Path(out).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)


def find_manifests(paths: Sequence[str]) -> list[Path]:
    """Expand directories to every ``manifest.json`` beneath them."""
    found: list[Path] = []
    for p in map(Path, paths):
        if p.is_dir():
            found.extend(sorted(p.rglob("manifest.json")))
        else:
            found.append(p)
    return found


# ---------------------------------------------------------------------------
# shared option groups


def _add_seg_flags(p: argparse.ArgumentParser) -> None:
    g = p.add_argument_group("segmentation")
    g.add_argument("--config", help="run-config JSON; flags override its values")
    g.add_argument("--tau-g", type=float)
    g.add_argument("--tau-c", type=float)
    g.add_argument("--tau-f", type=float)
    g.add_argument("--epsilon", type=float)
    g.add_argument("--smooth-window", type=int)
    g.add_argument("--sign-mode", choices=SIGN_MODES)
    g.add_argument("--strict", action="store_true", default=None, help="reject unknown manifest keys")


def _add_gen_flags(p: argparse.ArgumentParser) -> None:
    g = p.add_argument_group("generation")
    g.add_argument("--keyframe-budget", type=int)
    g.add_argument("--min-gap", type=int)
    g.add_argument("--seed", type=int)
    g.add_argument("--nab-p", type=float)
    g.add_argument("--categories", help="comma-separated subset of prototypes")


def build_config(args) -> GenConfig:
    base = GenConfig.load(args.config) if getattr(args, "config", None) else GenConfig()
    th = base.thresholds.to_dict()
    for flag, key in (("tau_g", "tau_g"), ("tau_c", "tau_c"), ("tau_f", "tau_f"),
                      ("epsilon", "epsilon"), ("smooth_window", "smooth_window")):
        v = getattr(args, flag, None)
        if v is not None:
            th[key] = v
    d = base.to_dict()
    d["thresholds"] = th
    for flag in ("sign_mode", "strict", "keyframe_budget", "min_gap", "seed"):
        v = getattr(args, flag, None)
        if v is not None:
            d[flag] = v
    q = d["qgen"]
    if getattr(args, "nab_p", None) is not None:
        q["nab_p"] = args.nab_p
    if getattr(args, "categories", None):
        q["categories"] = [c.strip() for c in args.categories.split(",") if c.strip()]
    d["thresholds"] = SegThresholds(**th).to_dict()
    d["qgen"] = QGenConfig.from_dict(q).to_dict()
    return GenConfig.from_dict(d)


# ---------------------------------------------------------------------------
# subcommands


def cmd_ingest_check(args) -> int:
    bad = 0
    for path in find_manifests(args.manifests):
        try:
            rec = load_manifest(path, strict=args.strict)
            print(f"ok    {path}  id={rec.id} frames={rec.T} cameras={len(rec.cameras)}")
        except ManifestError as exc:
            bad += 1
            print(f"FAIL  {path}  {exc}")
    return 1 if bad else 0


def cmd_segment(args) -> int:
    cfg = build_config(args)
    rec = load_manifest(args.manifest, strict=cfg.strict)
    runs = segment(rec, cfg.thresholds, cfg.sign_mode)
    out = {
        "id": rec.id,
        "thresholds": cfg.thresholds.to_dict(),
        "sign_mode": cfg.sign_mode,
        "runs": [{"label": r.label.value, "start": r.start_index, "end": r.end_index} for r in runs],
    }
    if args.keyframes:
        kfs = select_keyframes(rec, runs, cfg.keyframe_budget, cfg.min_gap, cfg.pose_lambda)
        out["keyframes"] = [
            {"frame": k.frame_index, "phase": k.phase.value, "cameras": sorted(k.cameras_visible)} for k in kfs
        ]
    _dump(out, args.out)
    return 0


def cmd_generate(args) -> int:
    cfg = build_config(args)
    manifests = find_manifests(args.manifests)
    if not manifests:
        print("no manifests found", file=sys.stderr)
        return 2
    summary = run_generate(manifests, args.out, cfg, jobs=args.jobs)
    print(f"trajectories processed: {summary['trajectories_processed']}/{summary['trajectories']}")
    print(f"items: {summary['items']}")
    for cat, n in summary["items_per_category"].items():
        print(f"  {cat:6s} {n}")
    if summary["skip_reasons"]:
        print("skips:")
        for reason, n in summary["skip_reasons"].items():
            print(f"  {n:5d}  {reason}")
    for e in summary["errors"]:
        print(f"error: {e}", file=sys.stderr)
    return 1 if summary["errors"] else 0


def cmd_stats(args) -> int:
    _dump(compute_stats(args.items), args.out)
    return 0


def cmd_curate(args) -> int:
    items = read_jsonl(args.items)
    fields = tuple(args.fields.split(","))
    spec = json.loads(Path(args.targets).read_text(encoding="utf-8"))
    targets = parse_targets(spec.get("targets", spec), len(fields))
    caps = parse_targets(spec["caps"], len(fields)) if "caps" in spec else None
    subset, report = curate(items, targets, fields, caps, seed=args.seed)
    out = Path(args.out)
    write_jsonl(subset, out, media_src=Path(args.items).parent)
    (out / "curation.json").write_text(json.dumps(report.to_dict(), indent=1, sort_keys=True) + "\n",
                                       encoding="utf-8")
    print(f"curated {len(subset)} of {len(items)} items into {out}")
    return 0


def cmd_eval(args) -> int:
    cfg = EvalConfig(
        endpoint_url=args.endpoint,
        model=args.model,
        temperature=args.temperature,
        max_new_tokens=args.max_new_tokens,
        context_length=args.context_length,
        prompt_mode=args.mode,
        max_parallel=args.max_parallel,
        nab_fraction=args.nab_fraction,
        seed=args.seed,
        sample_size=args.sample,
        verifier_url=args.verifier_endpoint,
        verifier_model=args.verifier_model,
    )
    responder = None
    if args.dry_run:
        canned = None
        if args.canned:
            canned = json.loads(Path(args.canned).read_text(encoding="utf-8"))
        responder = canned_responder(args.dry_run, canned, seed=args.seed)
    report = evaluate(args.items, cfg, responder, cache_path=args.cache, report_path=args.report)
    ov = report["overall"]
    print(f"{cfg.model} [{cfg.prompt_mode}] accuracy {ov['accuracy']} on {ov['n']} items; "
          f"extraction failures {report['extraction_failure_rate']}")
    for cat, v in report["per_category"].items():
        if v:
            print(f"  {cat:6s} {v['accuracy']:.4f}  (n={v['n']})")
    if report["endpoint_errors"]:
        print(f"endpoint errors: {len(report['endpoint_errors'])}", file=sys.stderr)
    return 0


def cmd_synth(args) -> int:
    spec = json.loads(Path(args.spec).read_text(encoding="utf-8"))
    out = Path(args.out) if args.out else Path(spec.get("id", "synthetic"))
    if out.exists() and any(out.iterdir()):
        if not args.force:
            print(f"error: {out} is not empty (use --force to replace it)", file=sys.stderr)
            return 1
        shutil.rmtree(out)
    manifest, sidecar = gen_synthetic(spec, args.seed, out)
    print(f"wrote {manifest} and {sidecar}")
    return 0


# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="trajvqa", description="Trajectory-grounded VQA dataset tooling.")
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("ingest-check", help="validate trajectory manifests")
    p.add_argument("manifests", nargs="+", help="manifest files or directories")
    p.add_argument("--strict", action="store_true")
    p.set_defaults(func=cmd_ingest_check)

    p = sub.add_parser("segment", help="print phase runs for one manifest")
    p.add_argument("manifest")
    _add_seg_flags(p)
    p.add_argument("--keyframes", action="store_true", help="also select keyframes")
    p.add_argument("--keyframe-budget", type=int)
    p.add_argument("--min-gap", type=int)
    p.add_argument("--out")
    p.set_defaults(func=cmd_segment)

    p = sub.add_parser("generate", help="build a VQA dataset from manifests")
    p.add_argument("manifests", nargs="+", help="manifest files or directories")
    p.add_argument("--out", required=True)
    p.add_argument("--jobs", type=int, default=1)
    _add_seg_flags(p)
    _add_gen_flags(p)
    p.set_defaults(func=cmd_generate)

    p = sub.add_parser("stats", help="dataset statistics for an items.jsonl")
    p.add_argument("items")
    p.add_argument("--out")
    p.set_defaults(func=cmd_stats)

    p = sub.add_parser("curate", help="stratified downsampling toward target weights")
    p.add_argument("items")
    p.add_argument("--targets", required=True, help='JSON {"targets": {"a|b|c": w}, "caps": {...}}')
    p.add_argument("--fields", default="scene_tag,skill_verb,category")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_curate)

    p = sub.add_parser("eval", help="score a model endpoint on a dataset")
    p.add_argument("items")
    p.add_argument("--endpoint", help="defaults to $ROBO2VLM_ENDPOINT")
    p.add_argument("--model", default="model")
    p.add_argument("--mode", default="zero_shot", choices=("zero_shot", "cot_appendix", "cot_maintext"))
    p.add_argument("--temperature", type=float, default=0.7)
    p.add_argument("--max-new-tokens", type=int, default=4096)
    p.add_argument("--context-length", type=int, default=10240)
    p.add_argument("--max-parallel", type=int, default=4)
    p.add_argument("--nab-fraction", type=float)
    p.add_argument("--sample", type=int)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--verifier-endpoint")
    p.add_argument("--verifier-model")
    p.add_argument("--dry-run", nargs="?", const="correct", choices=("correct", "random"),
                   help="answer from canned responses instead of an endpoint")
    p.add_argument("--canned", help="JSON {item_id: response} used with --dry-run")
    p.add_argument("--cache", help="response cache JSONL (resumable)")
    p.add_argument("--report", help="write the report JSON here")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("synth", help="render a scripted synthetic trajectory")
    p.add_argument("--spec", required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out")
    p.add_argument("--force", action="store_true", help="replace an existing output directory")
    p.set_defaults(func=cmd_synth)
    return ap


def run(argv: Sequence[str] | None = None) -> int:
    ap = build_parser()
    args = ap.parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except (ManifestError, DatasetError, SynthSpecError, FileExistsError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
