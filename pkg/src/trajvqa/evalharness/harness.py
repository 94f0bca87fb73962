"""Scoring loop: prompts out, letters back, accuracy per category."""

from __future__ import annotations

import json
import statistics
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path
from typing import Callable, Mapping

from trajvqa.datasetio import read_jsonl
from trajvqa.evalharness.client import API_KEY_ENV, ChatClient, EndpointError, RetryPolicy, user_message
from trajvqa.evalharness.extract import extract_letter
from trajvqa.evalharness.prompts import PROMPT_MODES, render_prompt, render_verifier
from trajvqa.qgen.distractors import fisher_yates
from trajvqa.qgen.items import CATEGORIES, LETTERS, NAB, VQAItem
from trajvqa.qgen.rng import RngStream

REPORT_CATEGORIES = CATEGORIES


@dataclass(frozen=True)
class EvalConfig:
    endpoint_url: str | None = None
    api_key_env: str = API_KEY_ENV
    model: str = "model"
    temperature: float = 0.7
    max_new_tokens: int = 4096
    context_length: int | None = 10240
    prompt_mode: str = "zero_shot"
    max_parallel: int = 4
    retry: RetryPolicy = field(default_factory=RetryPolicy)
    nab_fraction: float | None = None
    seed: int = 0
    sample_size: int | None = None
    verifier_url: str | None = None
    verifier_model: str | None = None

    def __post_init__(self):
        if self.temperature < 0:
            raise ValueError("temperature must be >= 0")
        if self.max_parallel < 1:
            raise ValueError("max_parallel must be >= 1")
        if self.prompt_mode not in PROMPT_MODES:
            raise ValueError(f"prompt_mode must be one of {PROMPT_MODES}")
        if self.nab_fraction is not None and not 0.0 <= self.nab_fraction <= 1.0:
            raise ValueError("nab_fraction must be in [0, 1]")

    def public_dict(self) -> dict:
        d = asdict(self)
        d.pop("endpoint_url")
        d.pop("verifier_url")
        d["retry"]["retry_status"] = list(d["retry"]["retry_status"])
        return d


def apply_nab_override(item: VQAItem, p: float, seed: int) -> VQAItem:
    """Restore the pre-NAB choice list from meta and redraw NAB at rate ``p``."""
    pre = item.meta.get("choices_pre_nab")
    answer = item.meta.get("answer")
    if pre is None or answer is None:
        return item
    choices = list(pre)
    nab = False
    rng = RngStream(seed, item.traj_id, item.category, item.frame_indices[0], salt="eval-nab")
    if len(choices) == 5 and item.category not in ("RS", "OS", "TS-S", "TS-G") and rng.random() < p:
        choices, _ = fisher_yates([c for c in choices if c != answer] + [NAB], rng)
        nab = True
    meta = {**item.meta, "nab": nab}
    return replace(item, choices=choices, correct_index=choices.index(NAB if nab else answer), meta=meta)


# ---------------------------------------------------------------------------
# responders


Responder = Callable[[VQAItem, str], tuple[str, float]]


def canned_responder(policy: str = "correct", responses: Mapping[str, str] | None = None,
                     seed: int = 0) -> Responder:
    """Offline responder: fixed texts by item id, else the ``correct``/``random`` policy."""
    if policy not in ("correct", "random"):
        raise ValueError("policy must be 'correct' or 'random'")

    def respond(item: VQAItem, prompt: str) -> tuple[str, float]:
        if responses is not None and item.id in responses:
            return responses[item.id], 0.0
        if policy == "correct":
            return f"Final Answer: {item.answer_letter}", 0.0
        rng = RngStream(seed, item.id, "dry-run", 0)
        return f"Final Answer: {LETTERS[rng.integers(0, len(item.choices))]}", 0.0

    return respond


def http_responder(cfg: EvalConfig, root: Path) -> tuple[Responder, ChatClient]:
    extra = {"context_length": cfg.context_length} if cfg.context_length else {}
    client = ChatClient(cfg.endpoint_url, cfg.model, cfg.api_key_env, retry=cfg.retry, extra_body=extra)

    def respond(item: VQAItem, prompt: str) -> tuple[str, float]:
        msg = user_message(prompt, [root / ref for ref in item.images])
        return client.complete([msg], cfg.temperature, cfg.max_new_tokens)

    return respond, client


# ---------------------------------------------------------------------------
# cache


def cache_key(item_id: str, model: str, mode: str) -> str:
    return f"{item_id}|{model}|{mode}"


def load_cache(path: Path | None) -> dict[str, dict]:
    if path is None or not path.is_file():
        return {}
    out = {}
    for line in path.read_text(encoding="utf-8").splitlines():
        if line.strip():
            rec = json.loads(line)
            out[rec["key"]] = rec
    return out


def save_cache(path: Path, cache: Mapping[str, dict]) -> None:
    tmp = path.with_suffix(path.suffix + ".tmp")
    with open(tmp, "w", encoding="utf-8") as fh:
        for k in sorted(cache):
            fh.write(json.dumps(cache[k], sort_keys=True, ensure_ascii=False) + "\n")
    tmp.replace(path)


# ---------------------------------------------------------------------------


def _latency(values: list[float]) -> dict:
    if not values:
        return {"mean": None, "p50": None, "p95": None, "max": None}
    v = sorted(values)
    return {
        "mean": round(statistics.fmean(v), 6),
        "p50": round(v[(len(v) - 1) // 2], 6),
        "p95": round(v[min(len(v) - 1, int(0.95 * (len(v) - 1) + 0.5))], 6),
        "max": round(v[-1], 6),
    }


def select_items(items: list[VQAItem], cfg: EvalConfig) -> list[VQAItem]:
    items = sorted(items, key=lambda i: i.id)
    if cfg.nab_fraction is not None:
        items = [apply_nab_override(i, cfg.nab_fraction, cfg.seed) for i in items]
    if cfg.sample_size is not None and cfg.sample_size < len(items):
        rng = RngStream(cfg.seed, "eval-sample", "", 0)
        idx = sorted(int(i) for i in rng.gen.choice(len(items), size=cfg.sample_size, replace=False))
        items = [items[i] for i in idx]
    return items


def evaluate(
    dataset,
    cfg: EvalConfig,
    responder: Responder | None = None,
    cache_path=None,
    report_path=None,
    verifier: Callable[[str], str] | None = None,
) -> dict:
    """Score every item; endpoint errors are recorded per item and never abort the run."""
    dataset = Path(dataset)
    items = select_items(read_jsonl(dataset), cfg)
    root = dataset.parent
    cache_path = Path(cache_path) if cache_path else None
    cache = load_cache(cache_path)
    client = None
    vclient = None
    if responder is None:
        responder, client = http_responder(cfg, root)
    if verifier is None and cfg.verifier_url:
        vclient = ChatClient(cfg.verifier_url, cfg.verifier_model or cfg.model, cfg.api_key_env, retry=cfg.retry)

        def verifier(prompt: str) -> str:
            try:
                return vclient.ask(prompt, temperature=0.0, max_tokens=16)
            except EndpointError:
                return ""

    todo = [it for it in items if cache_key(it.id, cfg.model, cfg.prompt_mode) not in cache]

    def run(it: VQAItem) -> dict:
        key = cache_key(it.id, cfg.model, cfg.prompt_mode)
        try:
            text, lat = responder(it, render_prompt(it, cfg.prompt_mode))
            return {"key": key, "id": it.id, "response": text, "latency_s": round(lat, 6), "error": None}
        except EndpointError as exc:
            return {"key": key, "id": it.id, "response": None, "latency_s": None, "error": str(exc)}

    errors: dict[str, str] = {}
    try:
        if todo:
            with ThreadPoolExecutor(max_workers=cfg.max_parallel) as pool:
                for rec in pool.map(run, todo):
                    # errors are not cached so a later run retries them
                    if rec["error"] is None:
                        cache[rec["key"]] = rec
                    else:
                        errors[rec["id"]] = rec["error"]
        if cache_path is not None:
            cache_path.parent.mkdir(parents=True, exist_ok=True)
            save_cache(cache_path, cache)

        per_cat = {c: {"n": 0, "correct": 0} for c in REPORT_CATEGORIES}
        n_fail = n_correct = 0
        stages = {"pattern": 0, "verifier": 0, "failed": 0}
        latencies = []
        for it in items:
            key = cache_key(it.id, cfg.model, cfg.prompt_mode)
            rec = cache.get(key)
            cat = per_cat.setdefault(it.category, {"n": 0, "correct": 0})
            cat["n"] += 1
            if rec is None:
                n_fail += 1
                stages["failed"] += 1
                continue
            latencies.append(rec["latency_s"])
            ex = extract_letter(
                rec["response"], len(it.choices), verifier,
                (lambda r, it=it: render_verifier(it.question, it.choices, r)),
            )
            if ex.letter is None:
                n_fail += 1
                stages["failed"] += 1
                continue
            stages["pattern" if ex.stage == 1 else "verifier"] += 1
            if ex.letter == it.answer_letter:
                cat["correct"] += 1
                n_correct += 1
    finally:
        if client is not None:
            client.close()
        if vclient is not None:
            vclient.close()

    n = len(items)
    report = {
        "model": cfg.model,
        "prompt_mode": cfg.prompt_mode,
        "config": cfg.public_dict(),
        "n_items": n,
        "overall": {"n": n, "correct": n_correct, "accuracy": round(n_correct / n, 6) if n else None},
        "per_category": {
            c: ({"n": v["n"], "correct": v["correct"], "accuracy": round(v["correct"] / v["n"], 6)}
                if v["n"] else None)
            for c, v in per_cat.items()
        },
        "extraction": stages,
        "extraction_failure_rate": round(n_fail / n, 6) if n else None,
        "endpoint_errors": dict(sorted(errors.items())),
        "latency_s": _latency([x for x in latencies if x is not None]),
    }
    if report_path is not None:
        Path(report_path).write_text(json.dumps(report, indent=1, sort_keys=True) + "\n", encoding="utf-8")
    return report
