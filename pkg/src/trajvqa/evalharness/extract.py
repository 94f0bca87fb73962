"""Two-stage answer-letter extraction.

Stage 1 is pattern based: explicit "final answer"/"answer is" statements win
(last one in the text); otherwise weaker cues such as "(C)", "**C**" or a
bare letter must all agree. Stage 2 hands undecided responses to a verifier
callable, if one is configured.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Callable

from trajvqa.qgen.items import LETTERS

_STRONG = [
    re.compile(r"(?i:final\s+answer)\s*(?i:is)?\s*[:\-]?\s*\**\s*(?i:option\s+)?\(?([A-E])\)?(?![A-Za-z])"),
    re.compile(r"(?i:answer)\s*(?:(?i:is)\s*[:\-]?|[:\-])\s*\**\s*(?i:option\s+)?\(?([A-E])\)?(?![A-Za-z])"),
    re.compile(r"(?i:extracted\s+answer)\s*[:\-]\s*\(?([A-E])\)?(?![A-Za-z])"),
]
_WEAK = [
    re.compile(r"^\s*\(?([A-E])\)?\s*[.):]?\s*$", re.M),
    re.compile(r"\(([A-E])\)"),
    re.compile(r"\*\*\(?([A-E])\)?\*\*"),
    re.compile(r"\\boxed\{([A-E])\}"),
    re.compile(r"(?i:option)\s+([A-E])(?![A-Za-z])"),
    re.compile(r"^\s*([A-E])[.)]\s", re.M),
]


@dataclass(frozen=True)
class Extraction:
    letter: str | None
    stage: int  # 1 pattern, 2 verifier, 0 none
    status: str  # "ok", "ambiguous", "failure"


def _in_range(letter: str, n_choices: int) -> bool:
    return letter in LETTERS[:n_choices]


def extract_stage1(response: str, n_choices: int = 5) -> Extraction:
    if not response or not response.strip():
        return Extraction(None, 0, "failure")
    strong = []
    for pat in _STRONG:
        strong.extend((m.start(), m.group(1)) for m in pat.finditer(response) if _in_range(m.group(1), n_choices))
    if strong:
        return Extraction(max(strong)[1], 1, "ok")
    weak = set()
    for pat in _WEAK:
        weak.update(m.group(1) for m in pat.finditer(response) if _in_range(m.group(1), n_choices))
    if len(weak) == 1:
        return Extraction(weak.pop(), 1, "ok")
    return Extraction(None, 0, "ambiguous" if weak else "failure")


_VERIFIER_OUT = re.compile(r"(?<![A-Za-z])([A-E])(?![A-Za-z])")


def extract_letter(
    response: str,
    n_choices: int = 5,
    verifier: Callable[[str], str] | None = None,
    verifier_prompt: Callable[[str], str] | None = None,
) -> Extraction:
    """``verifier`` receives the rendered verifier prompt and returns raw text."""
    first = extract_stage1(response, n_choices)
    if first.status == "ok" or verifier is None or not (response and response.strip()):
        return first
    prompt = verifier_prompt(response) if verifier_prompt else response
    out = verifier(prompt) or ""
    m = _VERIFIER_OUT.search(out.strip())
    if m and _in_range(m.group(1), n_choices):
        return Extraction(m.group(1), 2, "ok")
    return Extraction(None, 0, first.status)
