"""Entity-aware multi-document summarization kit.

Preprocessing of clinical trial abstracts, PICO entity marking, token-budgeted
input packing, global-attention mask construction with a local+global attention
kernel, and the summarization evaluation suite.
"""

from picosum.attention import (
    AttentionConfig,
    AttentionMasks,
    Setting,
    build_masks,
    dense_attention_oracle,
    local_global_attention,
    masks_to_dense,
)
from picosum.corpus import (
    CleaningRules,
    Review,
    StatsReport,
    clean_document,
    concat_with_separators,
    dataset_stats,
    load_reviews,
)
from picosum.humaneval import AnnotationRecord, EvalTable, aggregate_annotations, factual, pico_alignment
from picosum.metrics import RougeScore, delta_ei, delta_ei_f1, extractiveness, rouge_l, rouge_n
from picosum.packing import PackConfig, PackedInput, distribute_budget, last_k_sentences, pack_input
from picosum.spans import PicoSpan, insert_entity_markers, lexicon_tag, normalize_spans, strip_entity_markers
from picosum.tokenizer import WordTokenizer

__version__ = "0.1.0"

__all__ = [
    "AnnotationRecord",
    "AttentionConfig",
    "AttentionMasks",
    "CleaningRules",
    "EvalTable",
    "PackConfig",
    "PackedInput",
    "PicoSpan",
    "Review",
    "RougeScore",
    "Setting",
    "StatsReport",
    "WordTokenizer",
    "aggregate_annotations",
    "build_masks",
    "clean_document",
    "concat_with_separators",
    "dataset_stats",
    "delta_ei",
    "delta_ei_f1",
    "dense_attention_oracle",
    "distribute_budget",
    "extractiveness",
    "factual",
    "insert_entity_markers",
    "last_k_sentences",
    "lexicon_tag",
    "load_reviews",
    "local_global_attention",
    "masks_to_dense",
    "normalize_spans",
    "pack_input",
    "pico_alignment",
    "rouge_l",
    "rouge_n",
    "strip_entity_markers",
]
