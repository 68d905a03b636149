"""Score-line extraction: projection segmentation and block-line detection.

Two routes produce scorable units from a page:

- ``segment_lines_projection`` thresholds the smoothed horizontal ink
  profile of the whole page and returns one box per score-line;
- ``detect_block_lines`` scans one vertical strip top to bottom with
  horizontal windows, labels the frames Score / WithoutScore by forced
  alignment against a filler grammar, and converts the Score segments to
  row boxes.

Strips are scanned by rotating them 90 degrees and reusing the horizontal
sliding-window extractor, so the frame axis is the row axis.
"""

import logging
from dataclasses import dataclass

import numpy as np

from . import features as feat
from . import imgproc
from .errors import AlignmentError
from .seqmodel import LABEL_SCORE, forced_align

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class LineBox:
    """Inclusive row interval of one score-line or block-line."""

    top: int
    bottom: int
    source: object = "page"  # "page" or the strip index

    def __post_init__(self):
        if self.top > self.bottom:
            raise ValueError(f"empty line box [{self.top}, {self.bottom}]")


@dataclass
class StripAlignment:
    """Zone alignment of one strip plus the frame-to-row mapping."""

    strip_index: int
    alignment: object  # ZoneAlignment
    frame_positions: np.ndarray  # top row of each frame's window
    window: int


def _profile_runs(values, threshold):
    """Maximal runs of profile entries strictly above ``threshold``."""
    above = values > threshold
    runs = []
    start = None
    for i, flag in enumerate(above):
        if flag and start is None:
            start = i
        elif not flag and start is not None:
            runs.append((start, i - 1))
            start = None
    if start is not None:
        runs.append((start, len(above) - 1))
    return runs


def estimate_staff_height(profile, staff_lines=5, threshold_ratio=0.1):
    """Rough span of one staff from the raw horizontal profile.

    The raw runs above threshold approximate individual staff lines; the
    typical line height plus four typical intra-staff gaps give the span.
    The 25th-percentile gap is used because inter-staff gaps are outliers.
    """
    peak = profile.max()
    if peak <= 0:
        return 0
    runs = _profile_runs(profile, threshold_ratio * peak)
    if not runs:
        return 0
    heights = [b - a + 1 for a, b in runs]
    line_h = float(np.median(heights))
    if len(runs) < 2:
        return int(max(staff_lines * line_h, 4))
    gaps = [runs[i + 1][0] - runs[i][1] - 1 for i in range(len(runs) - 1)]
    small_gap = float(np.percentile(gaps, 25))
    return int(max(staff_lines * line_h + (staff_lines - 1) * small_gap, 4))


def segment_lines_projection(page, threshold_ratio=0.1, min_gap=3, staff_lines=5):
    """Detect score-lines from the smoothed horizontal projection.

    The binary profile is smoothed with a moving average half a staff
    height wide and thresholded at ``threshold_ratio`` of its peak above
    the valley baseline (the profile median; zero on clean pages, the
    noise floor on degraded ones).  Runs separated by fewer than
    ``min_gap`` rows are merged.  A blank page yields an empty list.
    """
    mask = imgproc.binarize(page)
    profile = imgproc.projection(mask, imgproc.HORIZONTAL).astype(np.float64)
    if profile.max() <= 0:
        return []
    staff_h = estimate_staff_height(profile, staff_lines, threshold_ratio)
    width = max(1, int(0.5 * staff_h))
    smoothed = np.convolve(profile, np.ones(width) / width, mode="same")
    baseline = float(np.median(smoothed))
    threshold = baseline + threshold_ratio * (smoothed.max() - baseline)
    runs = _profile_runs(smoothed, threshold)
    merged = []
    for a, b in runs:
        if merged and a - merged[-1][1] - 1 < min_gap:
            merged[-1] = (merged[-1][0], b)
        else:
            merged.append((a, b))
    # Snap to ink: grow each run over adjacent above-baseline rows so
    # faint symbol tails at the line edges stay inside the box.  Growth is
    # capped at the smoothing width; on noisy pages nearly every row has
    # some foreground, and an uncapped walk would swallow the whole page.
    raw_baseline = float(np.median(profile))
    grown = []
    for a, b in merged:
        lo = max(0, a - width)
        hi = min(len(profile) - 1, b + width)
        while a > lo and profile[a - 1] > raw_baseline:
            a -= 1
        while b < hi and profile[b + 1] > raw_baseline:
            b += 1
        if grown and a <= grown[-1][1] + 1:
            grown[-1] = (grown[-1][0], max(b, grown[-1][1]))
        else:
            grown.append((a, b))
    return [LineBox(a, b, source="page") for a, b in grown]


def extract_strip_frames(strip, cfg=None):
    """Top-to-bottom sliding-window features of a vertical strip.

    Equivalent to rotating the strip 90 degrees counter-clockwise and
    running the left-to-right extractor; frame positions index rows.
    """
    cfg = cfg or feat.SlidingWindowConfig()
    rotated = np.rot90(np.asarray(strip), k=1)
    return feat.sliding_lgh(rotated, cfg)


def align_strip(strip, grammar, cfg=None, strip_index=0):
    """Forced-align one strip; returns a StripAlignment."""
    cfg = cfg or feat.SlidingWindowConfig()
    seq = extract_strip_frames(strip, cfg)
    alignment = forced_align(seq.frames, grammar)
    return StripAlignment(
        strip_index=strip_index,
        alignment=alignment,
        frame_positions=seq.positions,
        window=seq.window,
    )


def detect_block_lines(strip, grammar, cfg=None, strip_index=0):
    """Score-zone boxes of one strip via forced alignment.

    Each Score segment spans from its first frame's top row to its last
    frame's bottom row; overlap between adjacent window spans is resolved
    by clipping each box below its predecessor.  Alignment failure is
    reported as a warning and yields an empty result.
    """
    strip = np.asarray(strip)
    try:
        sa = align_strip(strip, grammar, cfg, strip_index)
    except AlignmentError as exc:
        log.warning("strip %d alignment failed: %s", strip_index, exc)
        return []
    boxes = []
    height = strip.shape[0]
    prev_bottom = -1
    for seg in sa.alignment.segments:
        if seg.label != LABEL_SCORE:
            continue
        top = int(sa.frame_positions[seg.start])
        bottom = min(int(sa.frame_positions[seg.end]) + sa.window - 1, height - 1)
        top = max(top, prev_bottom + 1)
        if top > bottom:
            continue
        boxes.append(LineBox(top, bottom, source=strip_index))
        prev_bottom = bottom
    return boxes


@dataclass
class LabeledStrip:
    """Strip features with a per-frame Score/WithoutScore ground truth."""

    strip_index: int
    features: feat.FeatureSequence
    labels: np.ndarray  # bool, True = Score


def zone_training_set(pages_with_boxes, n_strips=8, cfg=None, overlap_ratio=0.5):
    """Cut pages into strips and label every frame from reference boxes.

    A frame is Score iff its window rows overlap some reference line box
    by at least ``overlap_ratio`` of the window height.
    """
    cfg = cfg or feat.SlidingWindowConfig()
    labeled = []
    for page, boxes in pages_with_boxes:
        intervals = [(b.top, b.bottom) for b in boxes]
        for si, strip in enumerate(imgproc.split_strips(page, n_strips)):
            seq = extract_strip_frames(strip, cfg)
            labels = np.zeros(len(seq), dtype=bool)
            need = overlap_ratio * seq.window
            for i, p in enumerate(seq.positions):
                lo, hi = int(p), int(p) + seq.window - 1
                best = 0
                for top, bottom in intervals:
                    best = max(best, min(hi, bottom) - max(lo, top) + 1)
                labels[i] = best >= need
            labeled.append(LabeledStrip(si, seq, labels))
    return labeled


def pool_zone_segments(labeled):
    """Contiguous same-label frame runs pooled per zone label."""
    from .seqmodel import LABEL_GAP  # local to avoid a cycle at import time

    pools = {LABEL_GAP: [], LABEL_SCORE: []}
    for item in labeled:
        frames = item.features.frames
        labels = item.labels
        start = 0
        for t in range(1, len(labels) + 1):
            if t == len(labels) or labels[t] != labels[start]:
                key = LABEL_SCORE if labels[start] else LABEL_GAP
                pools[key].append(frames[start:t])
                start = t
    return pools


def format_line_records(boxes):
    """Line-oriented record per box: ``<source> score <top> <bottom>``."""
    out = []
    for b in boxes:
        src = b.source if b.source == "page" else f"strip {b.source}"
        out.append(f"{src} score {b.top} {b.bottom}")
    return "\n".join(out) + ("\n" if out else "")


def parse_line_records(text):
    """Inverse of ``format_line_records``."""
    boxes = []
    for raw in text.splitlines():
        parts = raw.split()
        if not parts:
            continue
        if parts[0] == "page":
            boxes.append(LineBox(int(parts[2]), int(parts[3]), source="page"))
        elif parts[0] == "strip":
            boxes.append(LineBox(int(parts[3]), int(parts[4]), source=int(parts[1])))
    return boxes
