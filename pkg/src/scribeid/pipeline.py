"""Writer-model training, line scoring and page-level fusion.

One HMM is trained per writer on the silence-stripped feature sequences of
that writer's training units (score-lines or block-lines, depending on the
mode).  At inference every unit is scored by Viterbi under every writer
model; the per-unit probabilities are rank-weighted and summed over the
page, and the writer with the highest fused score wins.

Unit probabilities are the softmax of the length-normalized log scores,
rescaled so the best writer has probability 1.  The plain exponential of a
raw log-likelihood underflows for realistic frame counts; softmax over
``score / frames`` is a monotone rescaling of the same ordering.
"""

import logging
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace

import numpy as np

from . import dimred, imgproc, segmentation
from . import features as feat
from .config import MODE_BLOCK, MODE_LINE, RunConfig
from .errors import (
    ConfigError,
    DataError,
    IdentificationError,
    ScoreError,
    TrainingError,
)
from .seqmodel import (
    FillerGrammar,
    baum_welch,
    hmm_init_flat,
    load_grammar,
    load_hmm,
    save_grammar,
    save_hmm,
    viterbi_loglik,
)

log = logging.getLogger(__name__)

UNIFORM = "uniform"
INVERTED_DISTANCE = "inverted-distance"
INVERTED_DISTANCE_SQUARED = "inverted-distance-squared"
EXPONENTIAL_DECAY = "exponential-decay"
WEIGHT_KINDS = (
    UNIFORM,
    INVERTED_DISTANCE,
    INVERTED_DISTANCE_SQUARED,
    EXPONENTIAL_DECAY,
)


@dataclass(frozen=True)
class WeightFunction:
    """Rank-to-weight rule used by the page-level fusion."""

    kind: str = INVERTED_DISTANCE
    constant: float = 1.0  # K of the uniform rule
    decay: float = 0.5  # a of the exponential rule

    def __post_init__(self):
        if self.kind not in WEIGHT_KINDS:
            raise ValueError(f"unknown weight function {self.kind!r}")


def weight(rank, fn, n_writers):
    """Weight of rank ``rank`` (1 = best) among ``n_writers`` candidates."""
    if not 1 <= rank <= n_writers:
        raise ValueError(f"rank must be in [1, {n_writers}], got {rank}")
    if fn.kind == UNIFORM:
        return fn.constant
    if fn.kind == INVERTED_DISTANCE:
        return n_writers / rank
    if fn.kind == INVERTED_DISTANCE_SQUARED:
        return n_writers / rank**2
    return float(np.exp(-fn.decay * rank))


@dataclass
class LineScore:
    """Per-writer evidence from one scored unit."""

    logliks: dict  # writer id -> Viterbi log-likelihood
    n_frames: int  # frames used (silence excluded)
    probabilities: dict  # writer id -> max-normalized probability


@dataclass
class RankedResult:
    """Writers ordered by descending score; ties break on ascending id."""

    order: list  # writer ids, best first
    ranks: dict  # writer id -> 1-based rank
    scores: dict  # writer id -> the score that was ranked


def rank_writers(scores):
    order = sorted(scores, key=lambda wid: (-scores[wid], wid))
    return RankedResult(
        order=order,
        ranks={wid: i + 1 for i, wid in enumerate(order)},
        scores=dict(scores),
    )


@dataclass
class WriterModel:
    writer_id: str
    hmm: object  # HmmParams
    feature_digest: str
    transform_id: str = "none"


@dataclass
class ModelRegistry:
    """Everything needed to score pages: models, config and transform."""

    models: dict  # writer id -> WriterModel, insertion-sorted by id
    config: RunConfig
    transform: object = None  # FaModel / PcaModel / LdaModel / None
    grammar: FillerGrammar = None  # required for block-line mode

    @property
    def writer_ids(self):
        return list(self.models)

    @property
    def digest(self):
        return self.config.digest()


# ---------------------------------------------------------------------------
# Unit extraction and scoring
# ---------------------------------------------------------------------------


def unit_frames(unit_image, config, transform=None):
    """Silence-stripped, transformed frames of one unit image.

    Raises ``ScoreError`` when nothing scorable remains.
    """
    cfg = config.feature_config()
    seq = feat.sliding_lgh(unit_image, cfg)
    silence = feat.detect_silence(
        imgproc.binarize(unit_image), seq, config.staff_line_count
    )
    frames = seq.frames[~silence]
    if frames.shape[0] == 0:
        raise ScoreError("unit contains only silence frames")
    if transform is not None:
        frames = dimred.apply_transform(frames, transform)
    return frames


def score_frames(frames, registry):
    """Viterbi score of prepared frames under every writer model."""
    if not registry.models:
        raise ValueError("registry is empty")
    n = frames.shape[0]
    if n < 1:
        raise ScoreError("no frames to score")
    logliks = {}
    for wid, model in registry.models.items():
        ll, _ = viterbi_loglik(frames, model.hmm)
        logliks[wid] = ll
    if all(ll == -np.inf for ll in logliks.values()):
        raise ScoreError(
            f"unit of {n} frames is shorter than every writer model's state chain"
        )
    normalized = np.array([logliks[w] / n for w in registry.writer_ids])
    shifted = np.exp(normalized - normalized.max())
    softmax = shifted / shifted.sum()
    probs = softmax / softmax.max()
    return LineScore(
        logliks=logliks,
        n_frames=n,
        probabilities={w: float(p) for w, p in zip(registry.writer_ids, probs)},
    )


def score_line(unit_image, registry):
    """Features, silence removal, transform and scoring for one unit."""
    _check_digest(registry, registry.config)
    frames = unit_frames(unit_image, registry.config, registry.transform)
    return score_frames(frames, registry)


def fuse_page(line_scores, fn):
    """Rank-weighted accumulation of unit probabilities over a page.

    Each unit contributes weight(rank) * probability per writer; the fused
    scores are ranked descending and the best writer wins the page.
    """
    if not line_scores:
        raise ValueError("cannot fuse an empty list of unit scores")
    writer_ids = sorted(line_scores[0].probabilities)
    n = len(writer_ids)
    fused = {wid: 0.0 for wid in writer_ids}
    for ls in line_scores:
        ranking = rank_writers(ls.probabilities)
        for wid in writer_ids:
            fused[wid] += weight(ranking.ranks[wid], fn, n) * ls.probabilities[wid]
    return rank_writers(fused)


def page_units(page, registry):
    """Crop the scorable unit images of a page for the registry's mode."""
    config = registry.config
    if config.mode == MODE_LINE:
        boxes = segmentation.segment_lines_projection(
            page,
            threshold_ratio=config.segment_threshold,
            min_gap=config.segment_min_gap,
            staff_lines=config.staff_line_count,
        )
        return [(b, page[b.top : b.bottom + 1, :]) for b in boxes]
    if registry.grammar is None:
        raise ConfigError("block-line mode requires a trained filler grammar")
    units = []
    cfg = config.feature_config()
    for si, strip in enumerate(imgproc.split_strips(page, config.strips)):
        for b in segmentation.detect_block_lines(strip, registry.grammar, cfg, si):
            units.append((b, strip[b.top : b.bottom + 1, :]))
    return units


@dataclass
class PageIdentification:
    ranking: RankedResult
    unit_scores: list  # LineScore per scored unit
    unit_boxes: list  # LineBox per scored unit
    skipped: int  # units dropped (all-silence or too short)


def identify_page(page, registry, fn=None, jobs=1):
    """Segment, score and fuse one page; returns a PageIdentification."""
    fn = fn or WeightFunction()
    units = page_units(page, registry)

    def try_score(item):
        _, image = item
        try:
            return score_line(image, registry)
        except ScoreError as exc:
            log.warning("unit skipped: %s", exc)
            return None

    if jobs > 1 and len(units) > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(try_score, units))
    else:
        results = [try_score(u) for u in units]

    scored = [(b, r) for (b, _), r in zip(units, results) if r is not None]
    if not scored:
        raise IdentificationError("page yields no scorable units")
    boxes = [b for b, _ in scored]
    scores = [r for _, r in scored]
    return PageIdentification(
        ranking=fuse_page(scores, fn),
        unit_scores=scores,
        unit_boxes=boxes,
        skipped=len(units) - len(scored),
    )


# ---------------------------------------------------------------------------
# Training
# ---------------------------------------------------------------------------


def _training_units(page, config, grammar):
    if config.mode == MODE_LINE:
        boxes = segmentation.segment_lines_projection(
            page,
            threshold_ratio=config.segment_threshold,
            min_gap=config.segment_min_gap,
            staff_lines=config.staff_line_count,
        )
        return [page[b.top : b.bottom + 1, :] for b in boxes]
    cfg = config.feature_config()
    units = []
    for si, strip in enumerate(imgproc.split_strips(page, config.strips)):
        for b in segmentation.detect_block_lines(strip, grammar, cfg, si):
            units.append(strip[b.top : b.bottom + 1, :])
    return units


def train_writer_models(pages_by_writer, config, grammar=None):
    """Train one HMM per writer; returns a ModelRegistry.

    ``pages_by_writer`` maps writer id to that writer's training pages.
    Units are segmented per the configured mode, silence frames dropped,
    the optional transform fitted globally on all writers' frames, and
    each writer model flat-started and Baum-Welch trained to the
    configured size.
    """
    if len(pages_by_writer) < 1:
        raise ValueError("at least one writer is required")
    if config.mode == MODE_BLOCK and grammar is None:
        raise ConfigError("block-line mode requires a trained filler grammar")
    cfg = config.feature_config()

    sequences = {}
    for wid in sorted(pages_by_writer):
        seqs = []
        for page in pages_by_writer[wid]:
            for unit in _training_units(page, config, grammar):
                if unit.shape[1] < cfg.window_width:
                    continue
                seq = feat.sliding_lgh(unit, cfg)
                silence = feat.detect_silence(
                    imgproc.binarize(unit), seq, config.staff_line_count
                )
                frames = seq.frames[~silence]
                if frames.shape[0]:
                    seqs.append(frames)
        if not seqs:
            raise TrainingError(f"writer {wid!r} has no usable training frames")
        sequences[wid] = seqs

    transform = None
    if config.transform != "none":
        pooled = np.vstack([f for seqs in sequences.values() for f in seqs])
        labels = [
            wid for wid, seqs in sequences.items() for f in seqs for _ in range(len(f))
        ]
        transform = fit_transform(pooled, labels, config)
        sequences = {
            wid: [dimred.apply_transform(f, transform) for f in seqs]
            for wid, seqs in sequences.items()
        }

    models = {}
    for wid, seqs in sequences.items():
        usable = [s for s in seqs if s.shape[0] >= config.states]
        dropped = len(seqs) - len(usable)
        if dropped:
            log.warning(
                "writer %s: dropped %d unit(s) shorter than %d frames",
                wid,
                dropped,
                config.states,
            )
        if not usable:
            raise TrainingError(
                f"writer {wid!r} has no unit longer than the state chain"
            )
        init = hmm_init_flat(usable, config.states)
        hmm, _ = baum_welch(
            usable,
            init,
            iters=config.train_iters,
            mixture_target=config.mixtures,
        )
        models[wid] = WriterModel(
            writer_id=wid,
            hmm=hmm,
            feature_digest=cfg.digest(),
            transform_id=config.transform,
        )
    return ModelRegistry(
        models=models, config=config, transform=transform, grammar=grammar
    )


def fit_transform(pooled_frames, labels, config):
    """Fit the configured feature-selection transform on pooled frames."""
    dim = pooled_frames.shape[1]
    target = config.transform_dim or max(1, dim // 2)
    if config.transform == "fa":
        model, _ = dimred.fa_fit(pooled_frames, min(target, dim - 1))
        return model
    if config.transform == "pca":
        return dimred.pca_fit(pooled_frames, min(target, dim))
    if config.transform == "lda":
        n_classes = len(set(labels))
        if n_classes < 2:
            raise DataError("LDA needs at least two writers")
        return dimred.lda_fit(pooled_frames, labels, min(target, n_classes - 1))
    raise ConfigError(f"unknown transform {config.transform!r}")


def _check_digest(registry, config):
    if registry.digest != config.digest():
        raise ConfigError(
            "configuration digest mismatch between registry "
            f"({registry.digest}) and request ({config.digest()})"
        )


# ---------------------------------------------------------------------------
# Registry persistence: one model file per writer plus a text manifest.
# ---------------------------------------------------------------------------

_REGISTRY_MANIFEST = "registry.txt"
_TRANSFORM_FILE = "transform.bin"
_GRAMMAR_FILE = "grammar.bin"


def save_registry(registry, dirpath):
    os.makedirs(dirpath, exist_ok=True)
    lines = ["# scribeid registry v1", f"digest\t{registry.digest}"]
    from .config import format_config

    with open(os.path.join(dirpath, "config.txt"), "w", encoding="utf-8") as fh:
        fh.write(format_config(registry.config))
    for wid, model in registry.models.items():
        fname = f"writer-{wid}.hmm"
        save_hmm(model.hmm, os.path.join(dirpath, fname))
        lines.append(
            f"writer\t{wid}\t{fname}\t{model.feature_digest}\t{model.transform_id}"
        )
    if registry.transform is not None:
        dimred.save_transform(
            registry.transform, os.path.join(dirpath, _TRANSFORM_FILE)
        )
        lines.append(f"transform\t{_TRANSFORM_FILE}")
    if registry.grammar is not None:
        save_grammar(registry.grammar, os.path.join(dirpath, _GRAMMAR_FILE))
        lines.append(f"grammar\t{_GRAMMAR_FILE}")
    with open(os.path.join(dirpath, _REGISTRY_MANIFEST), "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines) + "\n")
    return dirpath


def load_registry(dirpath):
    from .config import build_config, parse_config_file

    config = build_config(parse_config_file(os.path.join(dirpath, "config.txt")))
    manifest = os.path.join(dirpath, _REGISTRY_MANIFEST)
    models = {}
    transform = None
    grammar = None
    stored_digest = None
    with open(manifest, encoding="utf-8") as fh:
        for raw in fh:
            parts = raw.rstrip("\n").split("\t")
            if not parts or parts[0].startswith("#"):
                continue
            if parts[0] == "digest":
                stored_digest = parts[1]
            elif parts[0] == "writer":
                _, wid, fname, fdigest, tid = parts
                models[wid] = WriterModel(
                    writer_id=wid,
                    hmm=load_hmm(os.path.join(dirpath, fname)),
                    feature_digest=fdigest,
                    transform_id=tid,
                )
            elif parts[0] == "transform":
                transform = dimred.load_transform(os.path.join(dirpath, parts[1]))
            elif parts[0] == "grammar":
                grammar = load_grammar(os.path.join(dirpath, parts[1]))
    registry = ModelRegistry(
        models=dict(sorted(models.items())),
        config=config,
        transform=transform,
        grammar=grammar,
    )
    if stored_digest and stored_digest != registry.digest:
        raise ConfigError(
            f"registry digest {stored_digest} does not match its config "
            f"({registry.digest}); files were tampered with or mixed"
        )
    return registry


# ---------------------------------------------------------------------------
# Identification report
# ---------------------------------------------------------------------------


def format_identification_report(result, registry, page_name="page"):
    """Machine-readable report: one line per unit, then the page block."""
    writer_ids = registry.writer_ids
    lines = [
        "# scribeid identification report v1",
        f"config {registry.digest}",
        f"units {len(result.unit_scores)} skipped {result.skipped}",
    ]
    for box, ls in zip(result.unit_boxes, result.unit_scores):
        src = box.source if box.source == "page" else f"strip:{box.source}"
        scores = " ".join(f"{w}={ls.logliks[w]:.6f}" for w in writer_ids)
        probs = " ".join(f"{w}={ls.probabilities[w]:.6f}" for w in writer_ids)
        lines.append(
            f"unit {src} rows {box.top}:{box.bottom} frames {ls.n_frames} "
            f"loglik {scores} prob {probs}"
        )
    fused = " ".join(f"{w}={result.ranking.scores[w]:.6f}" for w in writer_ids)
    lines.append(f"{page_name} winner {result.ranking.order[0]} fused {fused}")
    lines.append(f"{page_name} ranking " + " ".join(result.ranking.order))
    return "\n".join(lines) + "\n"
