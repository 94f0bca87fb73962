"""Versioned JSON data shipped with the package (lexicon, templates, prompts)."""

from __future__ import annotations

import json
from functools import lru_cache
from importlib import resources


@lru_cache(maxsize=None)
def load_json_resource(name: str) -> dict:
    return json.loads(resources.files("trajvqa.data").joinpath(name).read_text(encoding="utf-8"))


def templates() -> dict:
    return load_json_resource("templates.json")
