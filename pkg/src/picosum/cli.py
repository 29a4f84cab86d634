"""Command-line interface: ``picosum <subcommand> ...``.

Subcommands:
    clean   strip metadata from review abstracts
    tag     lexicon-tag PICO spans
    pack    pack reviews into budgeted token sequences and build masks (writes a manifest)
    mask    rebuild masks for another global-attention setting
    attend  run the local+global kernel on one packed input and compare with the dense oracle
    stats   dataset statistics
    eval    score generated summaries (and aggregate human annotations)
    report  cross-model tables and figures
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import logging
import sys
from pathlib import Path

import numpy as np

from picosum.attention import AttentionConfig, AttentionTensors, Setting, build_masks, dense_attention_oracle, local_global_attention, masks_to_dense, replace_padded_ids
from picosum.config import ConfigError, RunConfig
from picosum.corpus import CleaningRules, DataError, clean_document, dataset_stats, load_reviews, write_reviews
from picosum.humaneval import aggregate_annotations, load_annotations
from picosum.packing import InputMode, read_packed
from picosum.pipeline import evaluate, read_masks, run_pipeline, tag_reviews
from picosum.report import load_metrics, write_report
from picosum.spans import load_lexicon, load_span_annotations, write_span_annotations
from picosum.tokenizer import WordTokenizer

logger = logging.getLogger("picosum")

DENSE_LIMIT = 64


def _rules(path) -> CleaningRules:
    return CleaningRules.load(path) if path else CleaningRules.default()


def cmd_clean(args) -> int:
    rules = _rules(args.rules)
    reviews = load_reviews(args.reviews)
    cleaned = [
        dataclasses.replace(
            r,
            abstracts=tuple(clean_document(a, rules) for a in r.abstracts),
            target_summary=clean_document(r.target_summary, rules) if args.clean_targets and r.target_summary else r.target_summary,
        )
        for r in reviews
    ]
    write_reviews(cleaned, args.out)
    logger.info("cleaned %d reviews -> %s", len(cleaned), args.out)
    return 0


def cmd_tag(args) -> int:
    index = tag_reviews(load_reviews(args.reviews), load_lexicon(args.lexicon), _rules(args.rules))
    write_span_annotations(index, args.out)
    logger.info("tagged %d reviews -> %s", len(index), args.out)
    return 0


def _run_config(args) -> RunConfig:
    if args.config:
        config = RunConfig.load(args.config)
    else:
        if not args.reviews or not args.out_dir:
            raise ConfigError("give --config, or both --reviews and --out-dir")
        config = RunConfig.from_dict({"output_dir": args.out_dir})
    for key in ("reviews", "spans", "lexicon"):
        value = getattr(args, key, None)
        if value:
            setattr(config, key, Path(value))
    if getattr(args, "out_dir", None):
        config.output_dir = Path(args.out_dir)
    pack_overrides = {
        k: v
        for k, v in {"budget": args.budget, "input_mode": args.mode, "k": args.k, "marking": args.marking}.items()
        if v is not None
    }
    if pack_overrides:
        config.pack = dataclasses.replace(config.pack, **pack_overrides)
    att_overrides = {k: v for k, v in {"setting": args.setting, "window": args.window}.items() if v is not None}
    if att_overrides:
        config.attention = dataclasses.replace(config.attention, **att_overrides)
    if args.replace_ids:
        config.replace_padded_ids = True
    return config


def cmd_pack(args) -> int:
    result = run_pipeline(_run_config(args))
    logger.info(
        "packed %d reviews (%d failed) -> %s",
        len(result.packed), len(result.failures), result.output_dir,
    )
    return 0 if result.ok else 1


def cmd_mask(args) -> int:
    config = AttentionConfig(setting=args.setting, window=args.window)
    packed = read_packed(args.packed)
    with open(args.out, "w", encoding="utf-8") as fh:
        for item in packed:
            masks = build_masks(item, config)
            record = masks.to_record(item.review_id)
            if args.replace_ids:
                record["masked_token_ids"] = replace_padded_ids(item, masks)
            fh.write(json.dumps(record, separators=(",", ":")) + "\n")
    logger.info("wrote %s masks for %d inputs -> %s", config.setting.value, len(packed), args.out)
    return 0


def cmd_attend(args) -> int:
    packed = {p.review_id: p for p in read_packed(args.packed)}
    review_id = args.review_id or sorted(packed)[0]
    if review_id not in packed:
        raise DataError(f"review {review_id!r} not in {args.packed}")
    item = packed[review_id]
    if args.masks:
        masks = read_masks(args.masks)[review_id]
    else:
        masks = build_masks(item, AttentionConfig(setting=args.setting or Setting.DOC_SEP, window=args.window or 4))
    window = args.window or 4
    n = len(item)
    t = AttentionTensors.random(n, args.dim, np.random.default_rng(args.seed))
    out = local_global_attention(*t, masks, window)
    summary = {"review_id": review_id, "n": n, "window": window, "global": int(masks.global_mask.sum()), "padded": int(masks.pad_mask.sum())}
    if n <= DENSE_LIMIT:
        allowed = masks_to_dense(masks, window, n)
        ref = dense_attention_oracle(*t, allowed)
        summary["max_abs_diff"] = float(np.max(np.abs(out - ref))) if n else 0.0
        if args.dense_csv:
            np.savetxt(args.dense_csv, allowed.astype(int), fmt="%d", delimiter=",")
        if args.figure:
            from picosum.plotting import attention_pattern

            attention_pattern(allowed, masks.global_mask, masks.pad_mask, args.figure, title=review_id)
    elif args.dense_csv or args.figure:
        logger.warning("dense matrix output skipped: n=%d exceeds %d", n, DENSE_LIMIT)
    print(json.dumps(summary))
    return 0 if summary.get("max_abs_diff", 0.0) <= 1e-6 else 1


def cmd_stats(args) -> int:
    reviews = load_reviews(args.reviews)
    spans = load_span_annotations(args.spans) if args.spans else {}
    report = dataset_stats(reviews, spans, WordTokenizer(), _rules(args.rules))
    sys.stdout.write(report.to_json() + "\n" if args.format == "json" else report.to_table())
    return 0


def cmd_eval(args) -> int:
    config = RunConfig.load(args.config)
    if args.out_dir:
        config.output_dir = Path(args.out_dir)
    result = evaluate(config)
    for path in result.written:
        logger.info("wrote %s", path)
    return 0


def cmd_report(args) -> int:
    reports = load_metrics(args.metrics)
    human = aggregate_annotations(load_annotations(args.annotations)) if args.annotations else None
    for path in write_report(reports, args.out_dir, human, figures=not args.no_figures):
        logger.info("wrote %s", path)
    return 0


def _add_pack_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="run config (YAML/JSON)")
    p.add_argument("--reviews")
    p.add_argument("--spans")
    p.add_argument("--lexicon")
    p.add_argument("--out-dir")
    p.add_argument("--budget", type=int)
    p.add_argument("--mode", choices=[m.value for m in InputMode])
    p.add_argument("--k", type=int)
    marking = p.add_mutually_exclusive_group()
    marking.add_argument("--marking", dest="marking", action="store_true", default=None)
    marking.add_argument("--no-marking", dest="marking", action="store_false")
    p.add_argument("--setting", choices=[s.value for s in Setting])
    p.add_argument("--window", type=int)
    p.add_argument("--replace-ids", action="store_true", help="also emit token ids with padded positions set to <pad>")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="picosum", description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("clean", help="strip metadata from abstracts")
    p.add_argument("--reviews", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--rules")
    p.add_argument("--clean-targets", action="store_true", help="also clean target summaries")
    p.set_defaults(func=cmd_clean)

    p = sub.add_parser("tag", help="lexicon-tag PICO spans")
    p.add_argument("--reviews", required=True)
    p.add_argument("--lexicon", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--rules")
    p.set_defaults(func=cmd_tag)

    p = sub.add_parser("pack", help="pack reviews and build masks")
    _add_pack_flags(p)
    p.set_defaults(func=cmd_pack)

    p = sub.add_parser("mask", help="build masks for a packed file")
    p.add_argument("--packed", required=True)
    p.add_argument("--setting", required=True, choices=[s.value for s in Setting])
    p.add_argument("--window", type=int, default=512)
    p.add_argument("--out", required=True)
    p.add_argument("--replace-ids", action="store_true")
    p.set_defaults(func=cmd_mask)

    p = sub.add_parser("attend", help="debug the attention kernel on one packed input")
    p.add_argument("--packed", required=True)
    p.add_argument("--masks")
    p.add_argument("--review-id")
    p.add_argument("--setting", choices=[s.value for s in Setting])
    p.add_argument("--window", type=int)
    p.add_argument("--dim", type=int, default=16)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--dense-csv", help=f"write the dense attendance matrix (n <= {DENSE_LIMIT})")
    p.add_argument("--figure", help="render the attendance matrix to a PNG")
    p.set_defaults(func=cmd_attend)

    p = sub.add_parser("stats", help="dataset statistics")
    p.add_argument("--reviews", required=True)
    p.add_argument("--spans")
    p.add_argument("--rules")
    p.add_argument("--format", choices=["json", "table"], default="table")
    p.set_defaults(func=cmd_stats)

    p = sub.add_parser("eval", help="score generated summaries")
    p.add_argument("--config", required=True)
    p.add_argument("--out-dir")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("report", help="cross-model tables and figures")
    p.add_argument("--metrics", nargs="+", required=True, help="metrics.json files, one per model")
    p.add_argument("--annotations")
    p.add_argument("--out-dir", required=True)
    p.add_argument("--no-figures", action="store_true")
    p.set_defaults(func=cmd_report)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.INFO, format="%(levelname)s: %(message)s")
    try:
        return args.func(args)
    except (ConfigError, DataError, ValueError, OSError) as exc:
        logger.error("%s", exc)
        return 2


if __name__ == "__main__":
    sys.exit(main())
