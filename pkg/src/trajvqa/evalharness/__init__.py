from trajvqa.evalharness.client import ChatClient, EndpointError, RetryPolicy
from trajvqa.evalharness.extract import Extraction, extract_letter, extract_stage1
from trajvqa.evalharness.harness import EvalConfig, apply_nab_override, canned_responder, evaluate
from trajvqa.evalharness.prompts import PROMPT_MODES, render_prompt, render_verifier, template_hash

__all__ = [
    "ChatClient", "EndpointError", "EvalConfig", "Extraction", "PROMPT_MODES", "RetryPolicy",
    "apply_nab_override", "canned_responder", "evaluate", "extract_letter", "extract_stage1",
    "render_prompt", "render_verifier", "template_hash",
]
