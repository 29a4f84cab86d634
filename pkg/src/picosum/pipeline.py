"""End-to-end drivers: clean -> tag -> pack -> mask, and scoring of generated summaries."""

from __future__ import annotations

import hashlib
import json
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping

from picosum.attention import AttentionMasks, build_masks, replace_padded_ids
from picosum.config import RunConfig
from picosum.corpus import CleaningRules, DataError, Review, clean_abstract, load_reviews, read_jsonl
from picosum.humaneval import EvalTable, aggregate_annotations, load_annotations
from picosum.metrics import MetricsReport, delta_ei_f1, direction_label, score_review
from picosum.packing import PackedInput, check_packed, pack_input, prepare_document
from picosum.spans import SpanIndex, lexicon_tag, load_lexicon, load_span_annotations
from picosum.tokenizer import WordTokenizer

logger = logging.getLogger(__name__)


@dataclass
class PipelineResult:
    output_dir: Path
    manifest: dict
    packed: list[PackedInput] = field(default_factory=list)
    failures: list[tuple[str, str]] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.failures


def sha256_text(text: str) -> str:
    return hashlib.sha256(text.encode("utf-8")).hexdigest()


def sha256_file(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


def _jsonl_line(obj) -> str:
    return json.dumps(obj, separators=(",", ":"), ensure_ascii=False) + "\n"


def tag_reviews(reviews: list[Review], lexicon: Mapping[str, str], rules: CleaningRules) -> SpanIndex:
    """Lexicon-tag every cleaned abstract (and target summary, as doc -1)."""
    index: SpanIndex = {}
    for review in reviews:
        docs = {i: lexicon_tag(clean_abstract(a, rules), lexicon) for i, a in enumerate(review.abstracts)}
        if review.target_summary is not None:
            docs[-1] = lexicon_tag(review.target_summary, lexicon)
        index[review.review_id] = docs
    return index


def load_rules(config: RunConfig) -> CleaningRules:
    return CleaningRules.load(config.cleaning_rules) if config.cleaning_rules else CleaningRules.default()


def load_spans(config: RunConfig, reviews: list[Review], rules: CleaningRules) -> SpanIndex:
    if config.spans is not None:
        return load_span_annotations(config.spans)
    if config.lexicon is not None:
        return tag_reviews(reviews, load_lexicon(config.lexicon), rules)
    return {}


def run_pipeline(config: RunConfig) -> PipelineResult:
    """Pack every review and build its attention masks.

    Writes ``packed.jsonl``, ``masks.jsonl``, ``vocab.json`` and a
    ``manifest.json`` with a SHA-256 for every artifact and review record.
    Reviews that fail are logged and left out; see ``PipelineResult.failures``.
    """
    config.check_pipeline_inputs()
    rules = load_rules(config)
    reviews = sorted(load_reviews(config.reviews), key=lambda r: r.review_id)
    ids = [r.review_id for r in reviews]
    if len(set(ids)) != len(ids):
        raise DataError(f"{config.reviews}: duplicate review ids")
    span_index = load_spans(config, reviews, rules) if config.needs_entities else {}

    failures: list[tuple[str, str]] = []
    texts = []
    usable = []
    for review in reviews:
        doc_spans = span_index.get(review.review_id, {})
        try:
            texts.extend(prepare_document(a, doc_spans.get(i, ()), config.pack, rules) for i, a in enumerate(review.abstracts))
        except ValueError as exc:
            logger.error("review %s: %s", review.review_id, exc)
            failures.append((review.review_id, str(exc)))
            continue
        usable.append(review)
    tokenizer = WordTokenizer.from_texts(texts)

    def process(review: Review):
        try:
            packed = pack_input(review, span_index.get(review.review_id, {}), config.pack, tokenizer, rules)
            problems = check_packed(packed, config.pack.budget)
            if problems:
                raise DataError("; ".join(problems))
            return packed, build_masks(packed, config.attention), None
        except ValueError as exc:
            return None, None, str(exc)

    with ThreadPoolExecutor(max_workers=config.worker_count()) as pool:
        results = list(pool.map(process, usable))

    out = Path(config.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    packed_items: list[PackedInput] = []
    review_entries = []
    packed_lines = []
    mask_lines = []
    for review, (packed, masks, error) in zip(usable, results):
        if error is not None:
            logger.error("review %s: %s", review.review_id, error)
            failures.append((review.review_id, error))
            continue
        mask_record = masks.to_record(review.review_id)
        if config.replace_padded_ids:
            mask_record["masked_token_ids"] = replace_padded_ids(packed, masks)
        packed_line = _jsonl_line(packed.to_record())
        mask_line = _jsonl_line(mask_record)
        packed_lines.append(packed_line)
        mask_lines.append(mask_line)
        packed_items.append(packed)
        review_entries.append(
            {
                "review_id": review.review_id,
                "length": len(packed),
                "packed_sha256": sha256_text(packed_line),
                "masks_sha256": sha256_text(mask_line),
            }
        )

    (out / "packed.jsonl").write_text("".join(packed_lines), encoding="utf-8")
    (out / "masks.jsonl").write_text("".join(mask_lines), encoding="utf-8")
    tokenizer.save(out / "vocab.json")
    failures.sort()
    manifest = {
        "config": config.describe(),
        "cleaning_rules_version": rules.version,
        "artifacts": [
            {"path": name, "sha256": sha256_file(out / name)} for name in ("packed.jsonl", "masks.jsonl", "vocab.json")
        ],
        "reviews": review_entries,
        "failed": [{"review_id": rid, "error": err} for rid, err in failures],
    }
    (out / "manifest.json").write_text(json.dumps(manifest, indent=2) + "\n", encoding="utf-8")
    return PipelineResult(out, manifest, packed_items, failures)


def _index_by_review(path: Path, what: str) -> dict[str, dict]:
    index = {}
    for lineno, obj in read_jsonl(path):
        rid = obj.get("review_id")
        if not isinstance(rid, str):
            raise DataError(f"{path}:{lineno}: {what} record lacks a review_id")
        if rid in index:
            raise DataError(f"{path}:{lineno}: duplicate review_id {rid!r}")
        index[rid] = obj
    return index


@dataclass
class EvaluationResult:
    metrics: MetricsReport
    human: EvalTable | None
    written: list[Path]
    warnings: list[str]


def evaluate(config: RunConfig) -> EvaluationResult:
    """Score generated summaries against targets and aggregate annotations."""
    config.check_eval_inputs()
    rules = load_rules(config)
    reviews = {r.review_id: r for r in load_reviews(config.reviews) if r.target_summary is not None}
    generated = _index_by_review(config.generated, "generated summary")
    missing = sorted(set(reviews) - set(generated))
    extra = sorted(set(generated) - set(reviews))
    if missing or extra:
        raise DataError(f"review-id mismatch: no generated summary for {missing}; no target for {extra}")

    warnings = []
    directions: dict[str, dict] = {}
    if config.directions is not None:
        directions = _index_by_review(config.directions, "direction")
        absent = sorted(set(reviews) - set(directions))
        if absent:
            raise DataError(f"{config.directions}: no direction scores for {absent}")
    else:
        warnings.append("no direction-score file configured; ΔEI columns omitted")
    if config.bertscore is not None:
        for rid, obj in _index_by_review(config.bertscore, "BERTScore").items():
            directions.setdefault(rid, {})["bertscore"] = obj.get("bertscore")

    report = MetricsReport(config.model_id)
    for rid in sorted(reviews):
        review = reviews[rid]
        summary = generated[rid].get("summary")
        if not isinstance(summary, str):
            raise DataError(f"{config.generated}: record {rid!r} has no summary text")
        report.rows.append(
            score_review(
                rid, summary, review.target_summary, review.abstracts, directions.get(rid),
                rules=rules, stem=config.stem, distance=config.distance,
            )
        )
    if config.directions is not None:
        gold = [direction_label(directions[rid]["target_direction"]) for rid in sorted(reviews)]
        pred = [direction_label(directions[rid]["generated_direction"]) for rid in sorted(reviews)]
        report.delta_ei_f1 = delta_ei_f1(gold, pred)

    human = aggregate_annotations(load_annotations(config.annotations)) if config.annotations else None

    out = Path(config.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    written = []

    def emit(name: str, text: str):
        path = out / name
        path.write_text(text, encoding="utf-8")
        written.append(path)

    if "csv" in config.report_formats:
        emit("metrics.csv", report.to_csv())
    if "json" in config.report_formats:
        emit("metrics.json", report.to_json())
    if human is not None:
        if "csv" in config.report_formats:
            emit("humaneval.csv", human.to_csv())
        if "txt" in config.report_formats:
            emit("humaneval.txt", human.to_text())
        if "json" in config.report_formats:
            emit("humaneval.json", json.dumps(human.to_dict(), indent=2) + "\n")
    for w in warnings:
        logger.warning(w)
    return EvaluationResult(report, human, written, warnings)


def read_masks(path: str | Path) -> dict[str, AttentionMasks]:
    return {obj["review_id"]: AttentionMasks.from_record(obj) for _, obj in read_jsonl(path)}
