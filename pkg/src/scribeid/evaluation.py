"""Experiment harness: folds, accuracy metrics and benchmark runs.

The cross-validation protocol partitions each writer's pages into
``folds`` groups; fold ``f`` tests on group ``f``, validates on group
``f + 1`` (mod folds) and trains on the rest, so with 10 folds the split
is 8:1:1 and every page is tested exactly once.  Validation metrics drive
grid selection; test metrics are reported.

Reports serialize to deterministic text (stable key order, fixed float
formatting).  Wall-clock timings are collected separately so two runs
with the same seed produce byte-identical reports.
"""

import os
import time
from dataclasses import dataclass, field

import numpy as np

from . import imgproc, pipeline, segmentation, synth
from .config import MODE_BLOCK, RunConfig
from .errors import DataError, IdentificationError
from .seqmodel import train_filler_grammar

# ---------------------------------------------------------------------------
# Manifests
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class PageRecord:
    writer_id: str
    page_id: str
    path: str


def read_manifest(path):
    """TSV manifest: ``writer-id <tab> page-id <tab> path`` per line.

    Relative paths resolve against the manifest's own directory.
    """
    base = os.path.dirname(os.path.abspath(path))
    records = []
    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, 1):
            line = raw.rstrip("\n")
            if not line or line.startswith("#"):
                continue
            parts = line.split("\t")
            if len(parts) != 3:
                raise DataError(f"{path}:{lineno}: expected 3 tab-separated fields")
            wid, pid, p = parts
            if not os.path.isabs(p):
                p = os.path.join(base, p)
            records.append(PageRecord(wid, pid, p))
    return records


def write_manifest(records, path):
    with open(path, "w", encoding="utf-8") as fh:
        for r in records:
            fh.write(f"{r.writer_id}\t{r.page_id}\t{r.path}\n")
    return path


def import_muscima_tree(root):
    """Build records from a directory of writer folders holding page images."""
    records = []
    for wid in sorted(os.listdir(root)):
        wdir = os.path.join(root, wid)
        if not os.path.isdir(wdir):
            continue
        for fname in sorted(os.listdir(wdir)):
            if fname.lower().endswith((".png", ".pgm")):
                records.append(
                    PageRecord(wid, os.path.splitext(fname)[0], os.path.join(wdir, fname))
                )
    return records


# ---------------------------------------------------------------------------
# Folds
# ---------------------------------------------------------------------------


@dataclass
class FoldSplit:
    train: list
    validation: list
    test: list


@dataclass
class FoldPlan:
    folds: int
    seed: int
    splits: list  # FoldSplit per fold


def make_folds(records, folds=10, seed=0):
    """Stratified rotation folds; every page tests exactly once.

    With one fold the plan degenerates to a single fixed 8:1:1 split.
    """
    by_writer = {}
    for r in records:
        by_writer.setdefault(r.writer_id, []).append(r)
    rng = np.random.default_rng(seed)
    shuffled = {}
    for wid in sorted(by_writer):
        pages = sorted(by_writer[wid], key=lambda r: r.page_id)
        if len(pages) < max(folds, 3):
            raise DataError(
                f"writer {wid!r} has {len(pages)} pages, needs >= {max(folds, 3)}"
            )
        order = rng.permutation(len(pages))
        shuffled[wid] = [pages[i] for i in order]

    if folds == 1:
        split = FoldSplit([], [], [])
        for wid, pages in shuffled.items():
            n = len(pages)
            n_test = max(1, n // 10)
            n_val = max(1, n // 10)
            split.test.extend(pages[:n_test])
            split.validation.extend(pages[n_test : n_test + n_val])
            split.train.extend(pages[n_test + n_val :])
        return FoldPlan(1, seed, [split])

    splits = []
    for f in range(folds):
        split = FoldSplit([], [], [])
        for wid, pages in shuffled.items():
            groups = np.array_split(np.arange(len(pages)), folds)
            test_idx = set(groups[f].tolist())
            val_idx = set(groups[(f + 1) % folds].tolist()) if folds > 2 else set()
            for i, page in enumerate(pages):
                if i in test_idx:
                    split.test.append(page)
                elif i in val_idx:
                    split.validation.append(page)
                else:
                    split.train.append(page)
        splits.append(split)
    return FoldPlan(folds, seed, splits)


# ---------------------------------------------------------------------------
# Metrics
# ---------------------------------------------------------------------------


def top_n_accuracy(results, n):
    """Percentage of units whose true writer is among the n best."""
    if n < 1:
        raise ValueError("n must be >= 1")
    if not results:
        return 0.0
    hits = sum(1 for true, ranked in results if true in ranked.order[:n])
    return 100.0 * hits / len(results)


def error_rate(expected, observed):
    """Relative shortfall of the observed accuracy, in percent."""
    if expected <= 0:
        raise ValueError("expected accuracy must be > 0")
    return 100.0 * (expected - observed) / expected


def confusion_matrix(results):
    """(writers, matrix) with rows = true writer, columns = predicted."""
    writers = sorted({t for t, _ in results} | {r.order[0] for _, r in results})
    index = {w: i for i, w in enumerate(writers)}
    matrix = np.zeros((len(writers), len(writers)), dtype=np.int64)
    for true, ranked in results:
        matrix[index[true], index[ranked.order[0]]] += 1
    return writers, matrix


# ---------------------------------------------------------------------------
# Benchmark
# ---------------------------------------------------------------------------


@dataclass
class GridEntry:
    """Aggregated metrics of one configuration over all folds."""

    config: RunConfig
    weight_kind: str
    fold_page_acc: list
    fold_unit_acc: list
    page_accuracy: float
    unit_accuracy: float
    validation_page_accuracy: float
    top_n: list  # page-level top-N curve, N = 1..n_writers
    per_writer_error: dict
    confusion_writers: list
    confusion: np.ndarray
    failed_pages: int


@dataclass
class EvalReport:
    folds: int
    seed: int
    n_writers: int
    entries: list  # GridEntry
    selected: int  # index of the entry with the best validation accuracy
    timings: dict = field(default_factory=dict)


class _Timer:
    def __init__(self, sink, key):
        self.sink, self.key = sink, key

    def __enter__(self):
        self.start = time.perf_counter()

    def __exit__(self, *exc):
        self.sink[self.key] = self.sink.get(self.key, 0.0) + (
            time.perf_counter() - self.start
        )


def _load_pages(records, cache):
    pages = {}
    for r in records:
        if r.path not in cache:
            cache[r.path] = imgproc.load_page(r.path)
        pages.setdefault(r.writer_id, []).append(cache[r.path])
    return pages


def _reference_boxes(record, page, config):
    """Zone-label reference boxes: ground-truth sidecar when present,
    projection segmentation otherwise."""
    sidecar = record.path + ".gt.txt"
    if os.path.exists(sidecar):
        _, boxes, _ = synth.read_ground_truth(sidecar)
        return [segmentation.LineBox(t, b) for t, b in boxes]
    return segmentation.segment_lines_projection(
        page,
        threshold_ratio=config.segment_threshold,
        min_gap=config.segment_min_gap,
        staff_lines=config.staff_line_count,
    )


def _train_grammar(train_records, config, cache, timings):
    with _Timer(timings, "grammar_training"):
        pages_with_boxes = []
        for r in train_records:
            page = cache.get(r.path)
            if page is None:
                page = cache[r.path] = imgproc.load_page(r.path)
            pages_with_boxes.append((page, _reference_boxes(r, page, config)))
        labeled = segmentation.zone_training_set(
            pages_with_boxes, config.strips, config.feature_config()
        )
        pools = segmentation.pool_zone_segments(labeled)
        return train_filler_grammar(
            pools,
            n_states=config.zone_states,
            n_mixtures=config.zone_mixtures,
            iters=config.zone_iters,
            switch_prob=config.switch_prob,
        )


def _evaluate_records(records, registry, fn, cache, timings):
    """Score pages; identification failures count as misses."""
    page_results = []
    unit_results = []
    failed = 0
    for r in records:
        page = cache.get(r.path)
        if page is None:
            page = cache[r.path] = imgproc.load_page(r.path)
        try:
            with _Timer(timings, "scoring"):
                result = pipeline.identify_page(
                    page, registry, fn, jobs=registry.config.jobs
                )
        except IdentificationError:
            failed += 1
            continue
        page_results.append((r.writer_id, result.ranking))
        for ls in result.unit_scores:
            unit_results.append(
                (r.writer_id, pipeline.rank_writers(ls.probabilities))
            )
    return page_results, unit_results, failed


def run_benchmark(records, grid=None, folds=10, seed=0, sweep_weights=False):
    """Train/evaluate every grid configuration across all folds.

    ``grid`` defaults to a single default RunConfig.  When
    ``sweep_weights`` is set, each configuration is fused with all four
    weight functions (scoring once, fusing cheaply), mirroring a
    weight-function comparison table.
    """
    grid = list(grid) if grid else [RunConfig(seed=seed)]
    writers = sorted({r.writer_id for r in records})
    plan = make_folds(records, folds, seed)
    cache = {}
    timings = {}
    entries = []
    total_start = time.perf_counter()

    for config in grid:
        weight_kinds = (
            list(pipeline.WEIGHT_KINDS) if sweep_weights else [config.weight_fn]
        )
        per_kind = {
            k: {"page": [], "unit": [], "val": [], "results": [], "failed": 0}
            for k in weight_kinds
        }
        for split in plan.splits:
            train_pages = _load_pages(split.train, cache)
            grammar = None
            if config.mode == MODE_BLOCK:
                grammar = _train_grammar(split.train, config, cache, timings)
            with _Timer(timings, "training"):
                registry = pipeline.train_writer_models(train_pages, config, grammar)
            for kind in weight_kinds:
                fn = pipeline.WeightFunction(
                    kind, config.weight_constant, config.weight_decay
                )
                page_res, unit_res, failed = _evaluate_records(
                    split.test, registry, fn, cache, timings
                )
                val_res, _, _ = _evaluate_records(
                    split.validation, registry, fn, cache, timings
                )
                bucket = per_kind[kind]
                denom = max(len(split.test), 1)
                bucket["page"].append(
                    100.0 * sum(t == r.order[0] for t, r in page_res) / denom
                )
                bucket["unit"].append(top_n_accuracy(unit_res, 1))
                bucket["val"].append(
                    100.0
                    * sum(t == r.order[0] for t, r in val_res)
                    / max(len(split.validation), 1)
                )
                bucket["results"].extend(page_res)
                bucket["failed"] += failed

        for kind in weight_kinds:
            bucket = per_kind[kind]
            results = bucket["results"]
            conf_writers, conf = confusion_matrix(results) if results else (writers, np.zeros((len(writers), len(writers)), dtype=np.int64))
            per_writer_err = {}
            for w in writers:
                own = [(t, r) for t, r in results if t == w]
                acc = top_n_accuracy(own, 1) if own else 0.0
                per_writer_err[w] = error_rate(100.0, acc)
            entries.append(
                GridEntry(
                    config=config,
                    weight_kind=kind,
                    fold_page_acc=bucket["page"],
                    fold_unit_acc=bucket["unit"],
                    page_accuracy=float(np.mean(bucket["page"])) if bucket["page"] else 0.0,
                    unit_accuracy=float(np.mean(bucket["unit"])) if bucket["unit"] else 0.0,
                    validation_page_accuracy=float(np.mean(bucket["val"])) if bucket["val"] else 0.0,
                    top_n=[top_n_accuracy(results, n) for n in range(1, len(writers) + 1)],
                    per_writer_error=per_writer_err,
                    confusion_writers=conf_writers,
                    confusion=conf,
                    failed_pages=bucket["failed"],
                )
            )

    timings["total"] = time.perf_counter() - total_start
    selected = max(
        range(len(entries)), key=lambda i: entries[i].validation_page_accuracy
    )
    return EvalReport(
        folds=plan.folds,
        seed=seed,
        n_writers=len(writers),
        entries=entries,
        selected=selected,
        timings=timings,
    )


# ---------------------------------------------------------------------------
# Report serialization (deterministic; timings go to a separate file)
# ---------------------------------------------------------------------------


def format_report(report):
    lines = [
        "# scribeid evaluation report v1",
        f"folds {report.folds}",
        f"seed {report.seed}",
        f"writers {report.n_writers}",
        f"entries {len(report.entries)}",
        f"selected {report.selected}",
    ]
    for i, e in enumerate(report.entries):
        lines.append(f"entry {i}")
        lines.append(f"  config {e.config.digest()} mode {e.config.mode}")
        lines.append(f"  weight {e.weight_kind}")
        lines.append(f"  page_accuracy {e.page_accuracy:.4f}")
        lines.append(f"  unit_accuracy {e.unit_accuracy:.4f}")
        lines.append(f"  validation_page_accuracy {e.validation_page_accuracy:.4f}")
        lines.append(
            "  fold_page_acc " + " ".join(f"{a:.4f}" for a in e.fold_page_acc)
        )
        lines.append(
            "  fold_unit_acc " + " ".join(f"{a:.4f}" for a in e.fold_unit_acc)
        )
        lines.append("  top_n " + " ".join(f"{a:.4f}" for a in e.top_n))
        lines.append(f"  failed_pages {e.failed_pages}")
        for w in e.confusion_writers:
            lines.append(f"  error {w} {e.per_writer_error.get(w, 0.0):.4f}")
        lines.append("  confusion " + " ".join(e.confusion_writers))
        for wi, w in enumerate(e.confusion_writers):
            row = " ".join(str(int(v)) for v in e.confusion[wi])
            lines.append(f"  row {w} {row}")
    return "\n".join(lines) + "\n"


def format_timings(report):
    lines = ["# scribeid timings v1 (seconds)"]
    for key in sorted(report.timings):
        lines.append(f"{key} {report.timings[key]:.3f}")
    return "\n".join(lines) + "\n"
