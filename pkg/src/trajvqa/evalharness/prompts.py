from __future__ import annotations

import hashlib

from trajvqa.qgen.items import LETTERS, VQAItem
from trajvqa.resources import load_json_resource

PROMPT_MODES = ("zero_shot", "cot_appendix", "cot_maintext")


def prompt_templates() -> dict[str, str]:
    d = load_json_resource("prompts.json")
    return {k: v for k, v in d.items() if k != "version"}


def template_hash(name: str) -> str:
    return hashlib.sha256(prompt_templates()[name].encode("utf-8")).hexdigest()


def question_block(item: VQAItem) -> str:
    lines = [item.question] + [f"{LETTERS[i]}. {c}" for i, c in enumerate(item.choices)]
    return "\n".join(lines)


def render_prompt(item: VQAItem, mode: str) -> str:
    if mode not in PROMPT_MODES:
        raise ValueError(f"unknown prompt mode {mode!r}")
    # plain replace: choices may contain braces
    return prompt_templates()[mode].replace("{Question}", question_block(item))


def render_verifier(question: str, choices: list[str], response: str) -> str:
    ch = " ".join(f"({LETTERS[i]}) {c}" for i, c in enumerate(choices))
    tpl = prompt_templates()["verifier"]
    return tpl.replace("{question}", question).replace("{choices}", ch).replace("{response}", response)
