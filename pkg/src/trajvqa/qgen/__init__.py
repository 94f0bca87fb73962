from trajvqa.qgen.distractors import fisher_yates, shuffle_and_nab
from trajvqa.qgen.items import BINARY_CATEGORIES, CATEGORIES, LETTERS, NAB, ItemError, VQAItem, item_id
from trajvqa.qgen.prototypes import (
    GENERATORS,
    MODALITY_GATE,
    PHASE_GATE,
    GenResult,
    QGenConfig,
    Skip,
    TrajContext,
    applicable_prototypes,
    contradictions,
    generate_for_trajectory,
    modalities,
)
from trajvqa.qgen.rng import RngStream, stream_seed

__all__ = [
    "BINARY_CATEGORIES", "CATEGORIES", "GENERATORS", "GenResult", "ItemError", "LETTERS", "MODALITY_GATE",
    "NAB", "PHASE_GATE", "QGenConfig", "RngStream", "Skip", "TrajContext", "VQAItem", "applicable_prototypes",
    "contradictions", "fisher_yates", "generate_for_trajectory", "item_id", "modalities", "shuffle_and_nab",
    "stream_seed",
]
