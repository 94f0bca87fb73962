"""End-to-end acceptance checks, one test per criterion.

Each test records a PASS/FAIL line; conftest prints them in the terminal summary.
"""

from __future__ import annotations

import collections
import contextlib
import hashlib
import itertools
import math
import time

import numpy as np
import pytest
from PIL import Image

from oracles import chain_ok, oracle_labels, pixel, quat_matrix, random_tuples
from test_evalharness import EXTRACT_CASES, HASHES
from trajvqa.datasetio import curate, read_jsonl, write_jsonl
from trajvqa.evalharness import EvalConfig, canned_responder, evaluate, extract_letter
from trajvqa.evalharness.prompts import template_hash
from trajvqa.geom import backproject, look_at, project
from trajvqa.keyframe import select_keyframes
from trajvqa.phaseseg import PhaseLabel, SegThresholds, classify_frame, segment
from trajvqa.pipeline import GenConfig, generate_records, run_generate
from trajvqa.qgen import BINARY_CATEGORIES, CATEGORIES, NAB, QGenConfig, applicable_prototypes, contradictions
from trajvqa.qgen import distractors as dx
from trajvqa.qgen.items import VQAItem
from trajvqa.trajmodel import CameraRig
from trajvqa.trajmodel.synth import (
    gen_synthetic,
    pickplace_spec,
    random_episode_spec,
    render_background,
    synthesize,
)

RESULTS: dict[int, str] = {}


@contextlib.contextmanager
def criterion(n: int, name: str):
    try:
        yield
    except BaseException as exc:
        RESULTS[n] = f"FAIL  criterion {n:2d}: {name} ({type(exc).__name__}: {str(exc).splitlines()[0][:120] if str(exc) else ''})"
        print(RESULTS[n])
        raise
    RESULTS[n] = f"PASS  criterion {n:2d}: {name}"
    print(RESULTS[n])


# ---------------------------------------------------------------------------
# shared synthetic corpus


def varied_specs(n: int, seed: int = 0):
    rng = np.random.default_rng(seed)
    for k in range(n):
        yield pickplace_spec(
            id=f"bulk{k:04d}",
            object_point=(rng.uniform(0.42, 0.58), rng.uniform(-0.05, 0.2), 0.03),
            place=(rng.uniform(0.36, 0.48), rng.uniform(-0.25, -0.12), rng.uniform(0.08, 0.15)),
            home=(rng.uniform(0.25, 0.35), rng.uniform(-0.1, 0.0), rng.uniform(0.3, 0.4)),
            cycles=int(rng.choice([1, 1, 1, 2])),
            scene_tag=str(rng.choice(["lab", "kitchen", "office"])),
            success=bool(rng.random() < 0.8),
        )


def depth_fn_for(rec):
    maps = {c.name: render_background(c)[1] for c in rec.cameras}
    return lambda cam, t: maps.get(cam) if rec.frames[t].depth.get(cam) else None


@pytest.fixture(scope="module")
def bulk():
    t0 = time.perf_counter()
    records = {}
    for k, spec in enumerate(varied_specs(1000)):
        rec, _ = synthesize(spec, k)
        records[rec.id] = rec
    items, skips = generate_records(records.values(), GenConfig(seed=11, qgen=QGenConfig(nab_p=0.2)),
                                    depth_fn_for=depth_fn_for)
    return records, items, skips, time.perf_counter() - t0


# ---------------------------------------------------------------------------


def test_c01_phase_rule_oracle():
    with criterion(1, "classify_frame == table oracle on 10^6 tuples, < 10 s"):
        t0 = time.perf_counter()
        s, ds, f, prev = random_tuples(10**6, seed=2024)
        expected = oracle_labels(s, ds, f, prev)
        th = SegThresholds()
        got = [classify_frame(a, b, None if c != c else c, p, th)
               for a, b, c, p in zip(s.tolist(), ds.tolist(), f.tolist(), prev)]
        elapsed = time.perf_counter() - t0
        mismatches = sum(g is not e for g, e in zip(got, expected))
        print(f"  mismatches={mismatches} elapsed={elapsed:.2f}s")
        assert mismatches == 0
        assert elapsed < 10.0


def test_c02_partial_order():
    with criterion(2, "zero chain violations on 1000 random synthetic trajectories"):
        rng = np.random.default_rng(99)
        violations = 0
        for k in range(1000):
            rec, _ = synthesize(random_episode_spec(rng, f"r{k}"), k)
            runs = segment(rec)
            violations += not chain_ok([r.label for r in runs])
        print(f"  violations={violations}")
        assert violations == 0


def _phase_runs(labels):
    return [lab for i, lab in enumerate(labels) if lab != "Transition" and (i == 0 or labels[i - 1] != lab)]


def test_c03_phase_recovery(scripted):
    with criterion(3, "single-cycle, two-cycle, phase-skip runs match the sidecar"):
        from trajvqa.trajmodel import load_manifest

        for name in ("pickplace", "twocycle", "skip"):
            m, side = scripted[name]
            got = [r.label.value for r in segment(load_manifest(m)) if r.label is not PhaseLabel.TRANSITION]
            exp = _phase_runs(side["phases"])
            print(f"  {name}: {' '.join(got)}")
            assert got == exp, name
        assert "Approach" in _phase_runs(scripted["twocycle"][1]["phases"])[4:]
        assert "Release" not in _phase_runs(scripted["skip"][1]["phases"])


def _cam_json(cam: CameraRig) -> dict:
    return {"name": cam.name,
            "intrinsics": {"fx": cam.fx, "fy": cam.fy, "cx": cam.cx, "cy": cam.cy},
            "extrinsic": {"q": list(cam.extrinsic.rotation), "t": list(cam.extrinsic.translation)}}


def _mv_expected(cam_a: CameraRig, cam_b: CameraRig, depth: np.ndarray, uv) -> tuple[float, float]:
    a = _cam_json(cam_a)
    u, v = uv
    z = float(depth[v, u])
    k = a["intrinsics"]
    p_cam = np.array([(u - k["cx"]) / k["fx"] * z, (v - k["cy"]) / k["fy"] * z, z])
    world = quat_matrix(a["extrinsic"]["q"]).T @ (p_cam - np.asarray(a["extrinsic"]["t"]))
    return pixel(_cam_json(cam_b), world)


def test_c04_geometry(bulk, pickplace, pickplace_items_fixture):
    with criterion(4, "round-trip <= 1e-6 px on 10^4 points; 1000 MV items correct with valid distractors"):
        rng = np.random.default_rng(4)
        worst = 0.0
        for k in range(100):
            cam = CameraRig("c", rng.uniform(80, 600), rng.uniform(80, 600), rng.uniform(40, 300),
                            rng.uniform(40, 200), 640, 400,
                            look_at(rng.uniform(-2, 2, 3) + [0, 0, 2.0], rng.uniform(-0.3, 0.3, 3)))
            for _ in range(100):
                uv = (rng.uniform(0, 640), rng.uniform(0, 400))
                z = rng.uniform(0.05, 20.0)
                back = project(cam, backproject(cam, uv, z))
                worst = max(worst, math.dist(uv, back))
        print(f"  worst round-trip error {worst:.2e} px")
        assert worst <= 1e-6

        records, items, _, _ = bulk
        mv = [i for i in items if i.category == "MV"] + [i for i in pickplace_items_fixture if i.category == "MV"]
        print(f"  MV items checked: {len(mv)}")
        assert len(mv) >= 1000
        recs = dict(records, pickplace=pickplace)
        for it in mv:
            rec = recs[it.traj_id]
            a, b = rec.camera(it.meta["camera"]), rec.camera(it.meta["camera2"])
            exp = _mv_expected(a, b, render_background(a)[1], it.meta["source_px"])
            assert math.dist(exp, it.meta["correct_px"]) < 1e-5, it.id
            pts = it.meta["points"]
            correct = it.meta["answer"].split()[-1]
            assert pts[correct] == it.meta["correct_px"]
            q0 = dx.quadrant(*pts[correct], b.width, b.height)
            assert all(dx.quadrant(*pts[x], b.width, b.height) != q0 for x in pts if x != correct)
            assert all(math.dist(pts[x], pts[y]) >= 40 for x, y in itertools.combinations(pts, 2))


@pytest.fixture(scope="module")
def pickplace_items_fixture(pickplace):
    items, _ = generate_records([pickplace], GenConfig(seed=7))
    return items


def _letter_shares(items):
    counts = collections.Counter("ABCDE"[i.correct_index] for i in items)
    return {x: counts[x] / len(items) for x in "ABCDE"}


def test_c05_distribution(bulk):
    with criterion(5, ">= 10k items at five-choice share 0.65, nab_p 0.2: letter shares and mean choices"):
        t0 = time.perf_counter()
        _, items, _, gen_time = bulk
        five = [c for c in CATEGORIES if c not in BINARY_CATEGORIES and c != "MV"]
        targets = {(c,): 0.35 / len(BINARY_CATEGORIES) for c in BINARY_CATEGORIES}
        targets.update({(c,): 0.65 / len(five) for c in five})
        subset, rep = curate(items, targets, fields=("category",), seed=5)
        elapsed = gen_time + time.perf_counter() - t0
        n = len(subset)
        n_choices = collections.Counter(len(i.choices) for i in subset)
        share5 = n_choices[5] / n
        mean_choices = sum(len(i.choices) for i in subset) / n
        shares = _letter_shares(subset)
        expected_ad = (n_choices[4] * 0.25 + n_choices[5] * 0.20) / n
        expected_e = share5 * 0.20
        print(f"  items={n} five-choice share={share5:.4f} mean choices={mean_choices:.4f} "
              f"runtime={elapsed:.1f}s")
        print("  " + " ".join(f"{x}={100 * shares[x]:.2f}%" for x in "ABCDE")
              + f" (expected A-D {100 * expected_ad:.2f}%, E {100 * expected_e:.2f}%)")
        assert n >= 10_000
        assert abs(share5 - 0.65) < 0.005
        for x in "ABCD":
            assert abs(shares[x] - expected_ad) <= 0.015, x
        assert abs(shares["E"] - 0.13) <= 0.010
        assert abs(mean_choices - 4.65) <= 0.05
        assert elapsed < 300


def test_c06_binary_rule(bulk, pickplace_items_fixture):
    with criterion(6, "binary categories always have 4 choices and no NAB"):
        _, items, _, _ = bulk
        binary = [i for i in items + pickplace_items_fixture if i.category in BINARY_CATEGORIES]
        print(f"  binary items checked: {len(binary)}")
        assert binary
        for it in binary:
            assert len(it.choices) == 4 and NAB not in it.choices, it.id


def test_c07_resolution_filter(tmp_path):
    with criterion(7, "no media below 100x100"):
        small = pickplace_spec(id="tiny", image_size=(96, 72))
        mixed = pickplace_spec(id="mixed")
        mixed["cameras"] = [
            {"name": "ext1", "eye": [1.2, 0.0, 0.8], "target": [0.45, 0.0, 0.05]},
            {"name": "ext2", "eye": [1.1, 0.3, 0.8], "target": [0.45, 0.0, 0.05]},
        ]
        paths = [gen_synthetic(small, 7, tmp_path / "tiny")[0], gen_synthetic(mixed, 7, tmp_path / "mixed")[0],
                 gen_synthetic(pickplace_spec(id="wide", image_size=(640, 90)), 7, tmp_path / "wide")[0]]
        out = tmp_path / "out"
        summary = run_generate(paths, out, GenConfig(seed=7))
        items = read_jsonl(out / "items.jsonl")
        sizes = [Image.open(out / r).size for i in items for r in i.images]
        print(f"  items={len(items)} images={len(sizes)} smallest={min(sizes, key=min) if sizes else None}")
        assert not [i for i in items if i.traj_id in ("tiny", "wide")]
        assert summary["items"] == len(items) > 0
        assert all(w >= 100 and h >= 100 for w, h in sizes)
        for p in (out / "media").rglob("*.png"):
            w, h = Image.open(p).size
            assert w >= 100 and h >= 100, p


def _tree(root):
    return {str(p.relative_to(root)): hashlib.sha256(p.read_bytes()).hexdigest()
            for p in sorted(root.rglob("*")) if p.is_file()}


def test_c08_determinism(scripted, tmp_path):
    with criterion(8, "byte-identical JSONL and PNG trees for --jobs 1, 2, 4"):
        manifests = [scripted[n][0] for n in ("pickplace", "twocycle", "skip")]
        trees = []
        for jobs in (1, 2, 4):
            run_generate(manifests, tmp_path / f"j{jobs}", GenConfig(seed=13), jobs=jobs)
            trees.append(_tree(tmp_path / f"j{jobs}"))
        pngs = sum(k.endswith(".png") for k in trees[0])
        print(f"  files={len(trees[0])} pngs={pngs}")
        assert pngs > 0 and "items.jsonl" in trees[0]
        assert trees[0] == trees[1] == trees[2]


def _generated_and_applicable(spec):
    rec, _ = synthesize(spec, 7)
    runs = segment(rec)
    kfs = select_keyframes(rec, runs)
    applicable = set().union(*(applicable_prototypes(rec, k) for k in kfs))
    items, skips = generate_records([rec], GenConfig(seed=7), depth_fn_for=depth_fn_for)
    return {i.category for i in items}, applicable, skips


def test_c09_modality_gating():
    with criterion(9, "stripped manifest gives RS only; each restored modality enables its prototypes"):
        bare = dict(depth=False, stereo=False, with_object_point=False, success=None)
        got, applicable, _ = _generated_and_applicable(pickplace_spec(**bare))
        print(f"  stripped: {sorted(got)}")
        assert got == applicable == {"RS"}
        restores = {
            "depth": (dict(bare, depth=True), {"SU"}),
            "stereo+depth": (dict(bare, depth=True, stereo=True), {"SU", "MV"}),
            "object": (dict(bare, with_object_point=True),
                       {"OS", "SR", "TS-G", "TS-GL", "AU", "IP", "TU", "AD", "TSeq"}),
            "success": (dict(bare, success=True), {"TS-S"}),
        }
        for name, (kw, enabled) in restores.items():
            got, applicable, skips = _generated_and_applicable(pickplace_spec(**kw))
            print(f"  +{name}: {sorted(got - {'RS'})}")
            assert applicable == {"RS"} | enabled, name
            assert got == applicable, (name, dict(skips))


def test_c10_eval_harness(tmp_path):
    with criterion(10, "prompt hashes, 50-case extraction, random 20% +- 3%, cached re-aggregation"):
        for name, h in HASHES.items():
            assert template_hash(name) == h, name
        assert len(EXTRACT_CASES) == 50
        passed = sum(extract_letter(r, n).letter == e for r, n, e in EXTRACT_CASES)
        print(f"  extraction suite {passed}/50")
        assert passed == 50

        items = [VQAItem(f"q{k:05d}", "AU", "Which?", [f"opt {j}" for j in range(5)], k % 5,
                         ["media/x.png"], f"t{k // 10}", [k % 10], "Approach", {})
                 for k in range(2000)]
        root = tmp_path / "ds"
        (root / "media").mkdir(parents=True)
        Image.new("RGB", (128, 128)).save(root / "media" / "x.png")
        write_jsonl(items, root / "out", media_src=root)
        ds = root / "out" / "items.jsonl"
        cache, r1, r2 = tmp_path / "cache.jsonl", tmp_path / "r1.json", tmp_path / "r2.json"
        first = evaluate(ds, EvalConfig(), canned_responder("random", seed=3), cache, r1)
        acc = first["overall"]["accuracy"]
        print(f"  random accuracy {100 * acc:.2f}% on {first['overall']['n']} items")
        assert first["overall"]["n"] == 2000
        assert abs(acc - 0.20) <= 0.03

        def refuse(*_a, **_k):
            raise AssertionError("responder called despite cache")

        evaluate(ds, EvalConfig(), refuse, cache, r2)
        assert r1.read_bytes() == r2.read_bytes()


def test_c11_consistency(bulk, pickplace_items_fixture, scripted):
    with criterion(11, "zero RS/AU contradictions on every generated set"):
        _, items, _, _ = bulk
        sets = {"bulk": items, "pickplace": pickplace_items_fixture}
        for name in ("twocycle", "skip"):
            from trajvqa.trajmodel import load_manifest

            sets[name], _ = generate_records([load_manifest(scripted[name][0])], GenConfig(seed=7))
        for name, its in sets.items():
            bad = contradictions(its)
            print(f"  {name}: items={len(its)} contradictions={len(bad)}")
            assert not bad
        assert any(i.category == "RS" for i in items) and any(i.category == "AU" for i in items)
