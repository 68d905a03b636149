"""Command-line front door: reproducible batch workflows.

Subcommands: ``synth``, ``segment``, ``extract``, ``train``, ``identify``,
``evaluate``, ``import-muscima``.  Flags mirror config-file keys one to
one and win over the file; the ``SCRIBEID_CONFIG`` environment variable
names a default config file.  A single ``--seed`` governs all randomness.
Diagnostics go to stderr, data to files or stdout.
"""

import argparse
import os
import sys

from . import evaluation, imgproc, pipeline, segmentation, synth
from . import features as feat
from .config import MODE_BLOCK, RunConfig, build_config, parse_config_file
from .errors import ConfigError, ScribeError
from .seqmodel import load_grammar

_CONFIG_ENV = "SCRIBEID_CONFIG"

_CONFIG_FLAGS = [
    ("window-width", int),
    ("overlap", float),
    ("grid-rows", int),
    ("grid-cols", int),
    ("orientation-bins", int),
    ("states", int),
    ("mixtures", int),
    ("train-iters", int),
    ("zone-states", int),
    ("zone-mixtures", int),
    ("zone-iters", int),
    ("switch-prob", float),
    ("realign-rounds", int),
    ("transform", str),
    ("transform-dim", int),
    ("mode", str),
    ("strips", int),
    ("segment-threshold", float),
    ("segment-min-gap", int),
    ("staff-line-count", int),
    ("weight-fn", str),
    ("weight-constant", float),
    ("weight-decay", float),
    ("seed", int),
    ("jobs", int),
]


def _add_config_flags(parser):
    for name, typ in _CONFIG_FLAGS:
        parser.add_argument(f"--{name}", type=typ, default=None)
    parser.add_argument("--config", default=None, help="config file (key = value)")


def _resolve_config(args):
    path = args.config or os.environ.get(_CONFIG_ENV)
    file_values = parse_config_file(path) if path else {}
    overrides = {
        name.replace("-", "_"): getattr(args, name.replace("-", "_"))
        for name, _ in _CONFIG_FLAGS
    }
    return build_config(file_values, **overrides)


def _weight_function(config):
    return pipeline.WeightFunction(
        config.weight_fn, config.weight_constant, config.weight_decay
    )


def cmd_synth(args):
    config = _resolve_config(args)
    os.makedirs(args.out, exist_ok=True)
    records = []
    for w in range(args.writers):
        wid = f"w{w:02d}"
        spec = synth.SynthPageSpec(
            style_seed=config.seed * 1000 + w,
            lines_per_page=args.lines,
            staff_gap=args.staff_gap,
            symbol_density=args.density,
            stroke_thickness=args.thickness,
            curvature_amplitude=args.curvature_amplitude,
            curvature_period=args.curvature_period,
            width=args.page_width,
            height=args.page_height,
        )
        for p in range(args.pages):
            page, gt = synth.generate_page(spec, seed=config.seed + w * 10007 + p)
            if args.noise > 0:
                page = synth.add_gaussian_noise(
                    page, args.noise, seed=config.seed + w * 10007 + p
                )
            pid = f"p{p:02d}"
            fname = f"{wid}-{pid}.png"
            imgproc.save_page(page, os.path.join(args.out, fname))
            synth.write_ground_truth(gt, os.path.join(args.out, fname + ".gt.txt"))
            records.append(evaluation.PageRecord(wid, pid, fname))
    evaluation.write_manifest(records, os.path.join(args.out, "manifest.tsv"))
    print(f"wrote {len(records)} pages to {args.out}")
    return 0


def cmd_segment(args):
    config = _resolve_config(args)
    page = imgproc.load_page(args.image)
    if config.mode == MODE_BLOCK:
        if not args.grammar:
            raise ConfigError("block-line mode needs --grammar")
        grammar = load_grammar(args.grammar)
        boxes = []
        cfg = config.feature_config()
        for si, strip in enumerate(imgproc.split_strips(page, config.strips)):
            boxes.extend(segmentation.detect_block_lines(strip, grammar, cfg, si))
    else:
        boxes = segmentation.segment_lines_projection(
            page,
            threshold_ratio=config.segment_threshold,
            min_gap=config.segment_min_gap,
            staff_lines=config.staff_line_count,
        )
    text = segmentation.format_line_records(boxes)
    if args.out:
        with open(args.out, "w", encoding="utf-8") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    return 0


def cmd_extract(args):
    config = _resolve_config(args)
    page = imgproc.load_page(args.image)
    boxes = segmentation.segment_lines_projection(
        page,
        threshold_ratio=config.segment_threshold,
        min_gap=config.segment_min_gap,
        staff_lines=config.staff_line_count,
    )
    os.makedirs(args.out, exist_ok=True)
    cfg = config.feature_config()
    for i, box in enumerate(boxes):
        seq = feat.sliding_lgh(page[box.top : box.bottom + 1, :], cfg)
        feat.save_features(seq, os.path.join(args.out, f"line_{i:03d}.fseq"))
    print(f"extracted {len(boxes)} feature file(s) to {args.out}")
    return 0


def _load_training_pages(records):
    pages = {}
    for r in records:
        pages.setdefault(r.writer_id, []).append(imgproc.load_page(r.path))
    return pages


def cmd_train(args):
    config = _resolve_config(args)
    records = evaluation.read_manifest(args.manifest)
    pages = _load_training_pages(records)
    grammar = None
    if config.mode == MODE_BLOCK:
        if args.grammar:
            grammar = load_grammar(args.grammar)
        else:
            cache = {}
            grammar = evaluation._train_grammar(records, config, cache, {})
    registry = pipeline.train_writer_models(pages, config, grammar)
    pipeline.save_registry(registry, args.out)
    print(f"trained {len(registry.models)} writer model(s) into {args.out}")
    return 0


def cmd_identify(args):
    config = _resolve_config(args)
    registry = pipeline.load_registry(args.registry)
    if registry.digest != config.digest() and _explicit_model_flags(args):
        raise ConfigError(
            "requested configuration conflicts with the registry "
            f"({config.digest()} != {registry.digest})"
        )
    page = imgproc.load_page(args.image)
    result = pipeline.identify_page(
        page, registry, _weight_function(config), jobs=config.jobs
    )
    report = pipeline.format_identification_report(result, registry)
    if args.out:
        with open(args.out, "w", encoding="utf-8") as fh:
            fh.write(report)
    else:
        sys.stdout.write(report)
    return 0


def _explicit_model_flags(args):
    """True when the user pinned any digest-relevant flag."""
    runtime = {"seed", "jobs", "weight_fn", "weight_constant", "weight_decay"}
    for name, _ in _CONFIG_FLAGS:
        attr = name.replace("-", "_")
        if attr in runtime:
            continue
        if getattr(args, attr) is not None:
            return True
    return args.config is not None


def cmd_evaluate(args):
    config = _resolve_config(args)
    records = evaluation.read_manifest(args.manifest)
    report = evaluation.run_benchmark(
        records,
        grid=[config],
        folds=args.folds,
        seed=config.seed,
        sweep_weights=args.sweep_weights,
    )
    os.makedirs(args.out, exist_ok=True)
    with open(os.path.join(args.out, "report.txt"), "w", encoding="utf-8") as fh:
        fh.write(evaluation.format_report(report))
    with open(os.path.join(args.out, "timings.txt"), "w", encoding="utf-8") as fh:
        fh.write(evaluation.format_timings(report))
    best = report.entries[report.selected]
    print(
        f"page accuracy {best.page_accuracy:.2f} "
        f"(unit {best.unit_accuracy:.2f}) over {report.folds} fold(s); "
        f"report in {args.out}"
    )
    return 0


def cmd_import_muscima(args):
    records = evaluation.import_muscima_tree(args.root)
    if not records:
        raise ConfigError(f"no writer folders with pages found under {args.root}")
    evaluation.write_manifest(records, args.out)
    print(f"wrote {len(records)} records to {args.out}")
    return 0


def build_parser():
    parser = argparse.ArgumentParser(
        prog="scribeid",
        description="Writer identification for music scores without staff-line removal",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="generate a ground-truthed synthetic dataset")
    p.add_argument("--out", required=True)
    p.add_argument("--writers", type=int, default=5)
    p.add_argument("--pages", type=int, default=10)
    p.add_argument("--lines", type=int, default=3)
    p.add_argument("--staff-gap", type=int, default=10)
    p.add_argument("--density", type=float, default=4.0)
    p.add_argument("--thickness", type=int, default=2)
    p.add_argument("--curvature-amplitude", type=float, default=0.0)
    p.add_argument("--curvature-period", type=float, default=200.0)
    p.add_argument("--page-width", type=int, default=800)
    p.add_argument("--page-height", type=int, default=620)
    p.add_argument("--noise", type=float, default=0.0)
    _add_config_flags(p)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("segment", help="detect score-lines or block-lines")
    p.add_argument("--image", required=True)
    p.add_argument("--grammar", default=None)
    p.add_argument("--out", default=None)
    _add_config_flags(p)
    p.set_defaults(func=cmd_segment)

    p = sub.add_parser("extract", help="write per-line feature files")
    p.add_argument("--image", required=True)
    p.add_argument("--out", required=True)
    _add_config_flags(p)
    p.set_defaults(func=cmd_extract)

    p = sub.add_parser("train", help="train writer models from a manifest")
    p.add_argument("--manifest", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--grammar", default=None)
    _add_config_flags(p)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("identify", help="identify the writer of a page")
    p.add_argument("--registry", required=True)
    p.add_argument("--image", required=True)
    p.add_argument("--out", default=None)
    _add_config_flags(p)
    p.set_defaults(func=cmd_identify)

    p = sub.add_parser("evaluate", help="cross-validated benchmark run")
    p.add_argument("--manifest", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--folds", type=int, default=10)
    p.add_argument("--sweep-weights", action="store_true")
    _add_config_flags(p)
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("import-muscima", help="build a manifest from writer folders")
    p.add_argument("--root", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_import_muscima)

    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ScribeError as exc:
        print(f"error: {exc.category}: {exc}", file=sys.stderr)
        return 1
    except (ValueError, OSError) as exc:
        category = "argument" if isinstance(exc, ValueError) else "io"
        print(f"error: {category}: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
