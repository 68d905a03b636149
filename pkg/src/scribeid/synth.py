"""Ground-truthed synthetic score pages and degradation models.

``generate_page`` draws staves (optionally sinusoidal) and style-seeded
note glyphs onto a white page and records exact ground truth: the row
extent of every score-line, the column intervals that carry no symbol ink
(silence), the full ink mask and the staff-only ink mask.  Two pages built
from the same spec and seed are bitwise identical.

The glyph repertoire is deliberately parametric rather than musical: a
filled elliptical head, a stem, an optional beam and optional accidental
ticks.  The per-writer style seed fixes the parameter ranges, so different
seeds produce measurably different stroke statistics, which is all the
downstream writer models need.
"""

import math
from dataclasses import dataclass

import numpy as np

from .errors import LayoutError


@dataclass(frozen=True)
class SynthPageSpec:
    """Layout and style knobs for one synthetic page."""

    style_seed: int = 0
    lines_per_page: int = 3
    staff_lines: int = 5
    staff_gap: int = 10
    symbol_density: float = 4.0  # expected symbols per 100 px of width
    stroke_thickness: int = 2
    curvature_amplitude: float = 0.0
    curvature_period: float = 200.0
    width: int = 800
    height: int = 620

    def __post_init__(self):
        if min(self.lines_per_page, self.staff_lines, self.staff_gap) < 0:
            raise ValueError("counts must be non-negative")
        if self.stroke_thickness < 1 or self.symbol_density < 0:
            raise ValueError("stroke thickness must be >= 1 and density >= 0")
        if self.curvature_amplitude > 0 and self.curvature_period <= 0:
            raise ValueError("curvature period must be > 0 when amplitude > 0")


@dataclass
class SynthGroundTruth:
    """Exact per-page ground truth recorded during generation."""

    line_boxes: list  # [(top_row, bottom_row)] inclusive, disjoint, sorted
    silence_intervals: list  # per line: [(start_col, end_col)] inclusive
    ink_mask: np.ndarray  # bool (h, w), all drawn ink
    staff_mask: np.ndarray = None  # bool (h, w), staff-line ink only


@dataclass(frozen=True)
class _WriterStyle:
    """Symbol-drawing parameters sampled once per style seed.

    The slant of stems and the tilt of heads shift the gradient-orientation
    distribution, the stroke thicknesses shift its magnitude profile, and
    the density/placement biases shift how symbol mass spreads over the
    window grid; together they give each seed a measurably distinct
    feature distribution.
    """

    head_rx: float
    head_ry: float
    head_tilt: float
    stem_len: int
    stem_thick: int
    stem_slant: float  # horizontal drift per row of stem
    stem_up_prob: float
    beam_prob: float
    beam_len: int
    accid_prob: float
    density_scale: float  # writer-specific multiplier on symbol density
    anchor_bias: float  # probability of placing a note in the upper staff half


def writer_style(style_seed):
    """Sample the fixed stroke style for one writer."""
    rng = np.random.default_rng(style_seed)
    return _WriterStyle(
        head_rx=float(rng.uniform(2.5, 6.0)),
        head_ry=float(rng.uniform(2.0, 4.5)),
        head_tilt=float(rng.uniform(-0.9, 0.9)),
        stem_len=int(rng.integers(6, 24)),
        stem_thick=int(rng.integers(1, 5)),
        stem_slant=float(rng.uniform(-0.4, 0.4)),
        stem_up_prob=float(rng.uniform(0.15, 0.85)),
        beam_prob=float(rng.uniform(0.0, 0.7)),
        beam_len=int(rng.integers(6, 16)),
        accid_prob=float(rng.uniform(0.0, 0.5)),
        density_scale=float(rng.uniform(0.7, 1.4)),
        anchor_bias=float(rng.uniform(0.2, 0.8)),
    )


def _draw_glyph(block, x, anchor_y, style, rng):
    """Draw one note glyph into ``block`` (bool buffer). Returns (x0, x1)."""
    h, w = block.shape
    rx = style.head_rx * float(rng.uniform(0.9, 1.1))
    ry = style.head_ry * float(rng.uniform(0.9, 1.1))
    ct, st = math.cos(style.head_tilt), math.sin(style.head_tilt)

    # Filled, tilted elliptical head.
    x0 = max(0, int(math.floor(x - rx - 1)))
    x1 = min(w - 1, int(math.ceil(x + rx + 1)))
    y0 = max(0, int(math.floor(anchor_y - ry - abs(st) * rx - 1)))
    y1 = min(h - 1, int(math.ceil(anchor_y + ry + abs(st) * rx + 1)))
    if x1 < x0 or y1 < y0:
        return None
    ys, xs = np.mgrid[y0 : y1 + 1, x0 : x1 + 1]
    dx = xs - x
    dy = ys - anchor_y
    u = dx * ct + dy * st
    v = -dx * st + dy * ct
    head = (u / rx) ** 2 + (v / ry) ** 2 <= 1.0
    block[y0 : y1 + 1, x0 : x1 + 1] |= head

    lo, hi = x0, x1

    # Slanted stem at the head edge, clipped to the block.
    up = rng.random() < style.stem_up_prob
    sx = int(round(x + rx - 1)) if up else int(round(x - rx))
    sx = min(max(sx, 0), w - style.stem_thick)
    if up:
        sy0 = max(0, int(anchor_y) - style.stem_len)
        sy1 = int(anchor_y)
    else:
        sy0 = int(anchor_y)
        sy1 = min(h - 1, int(anchor_y) + style.stem_len)
    tip_x = sx
    for sy in range(sy0, sy1 + 1):
        cx = sx + int(round(style.stem_slant * (sy - int(anchor_y))))
        cx = min(max(cx, 0), w - style.stem_thick)
        block[sy, cx : cx + style.stem_thick] = True
        lo, hi = min(lo, cx), max(hi, cx + style.stem_thick - 1)
        if sy == (sy0 if up else sy1):
            tip_x = cx

    # Optional beam at the stem tip.
    if rng.random() < style.beam_prob:
        by = sy0 if up else sy1 - 1
        by = min(max(by, 0), h - 2)
        bx1 = min(w - 1, tip_x + style.beam_len)
        block[by : by + 2, tip_x : bx1 + 1] = True
        hi = max(hi, bx1)

    # Optional accidental: two short vertical ticks left of the head.
    if rng.random() < style.accid_prob:
        ax = max(0, x0 - 4)
        ay0 = max(0, int(anchor_y) - 4)
        ay1 = min(h - 1, int(anchor_y) + 4)
        block[ay0 : ay1 + 1, ax : ax + 1] = True
        block[ay0 : ay1 + 1, min(w - 1, ax + 2) : min(w, ax + 3)] = True
        lo = min(lo, ax)
    return lo, hi


def _shift_column(col, s):
    """Shift a boolean column down by ``s`` (up if negative), zero-filled."""
    out = np.zeros_like(col)
    if s > 0:
        out[s:] = col[:-s]
    else:
        out[: s or None] = col[-s:]
    return out


def _merge_intervals(spans, width):
    """Union of closed column spans and its complement within [0, width)."""
    covered = np.zeros(width, dtype=bool)
    for lo, hi in spans:
        covered[max(0, lo) : min(width, hi + 1)] = True
    silence = []
    start = None
    for x in range(width):
        if not covered[x]:
            if start is None:
                start = x
        elif start is not None:
            silence.append((start, x - 1))
            start = None
    if start is not None:
        silence.append((start, width - 1))
    return silence


def generate_page(spec, seed=0):
    """Render one page; returns ``(gray_image, SynthGroundTruth)``.

    The style seed fixes the writer's glyph parameters; ``seed`` drives the
    layout randomness (symbol positions, stem directions, phases).
    """
    h, w = spec.height, spec.width
    page = np.full((h, w), 255, dtype=np.uint8)
    ink = np.zeros((h, w), dtype=bool)
    staff_only = np.zeros((h, w), dtype=bool)
    if spec.lines_per_page == 0:
        return page, SynthGroundTruth([], [], ink, staff_only)

    gap, t = spec.staff_gap, spec.stroke_thickness
    amp = int(math.ceil(spec.curvature_amplitude))
    # One line block: symbol margin of one gap above and below the staff,
    # plus curvature headroom.
    staff_span = max(0, spec.staff_lines - 1) * gap + t
    block_h = staff_span + 2 * gap + 2 * amp
    inter = (h - spec.lines_per_page * block_h) // (spec.lines_per_page + 1)
    if inter < max(2 * gap, 4):
        raise LayoutError(
            f"page height {h} too small for {spec.lines_per_page} lines "
            f"(need >= {spec.lines_per_page * block_h + (spec.lines_per_page + 1) * max(2 * gap, 4)})"
        )

    rng = np.random.default_rng(seed)
    style = writer_style(spec.style_seed)
    line_boxes = []
    silence_per_line = []

    for li in range(spec.lines_per_page):
        block_top = inter + li * (block_h + inter)
        block = np.zeros((block_h, w), dtype=bool)
        block_staff = np.zeros((block_h, w), dtype=bool)

        # Staves: straight within the block; curvature applied by a
        # per-column vertical roll afterwards, so symbols follow the curve.
        staff_top = amp + gap
        for k in range(spec.staff_lines):
            y = staff_top + k * gap
            block_staff[y : y + t, :] = True

        # Symbols anchored on lines and gaps, spread along x; the writer's
        # density scale and vertical placement bias shape the distribution.
        n_sym = rng.poisson(style.density_scale * spec.symbol_density * w / 100.0)
        spans = []
        anchor_slots = max(1, 2 * (spec.staff_lines - 1))
        half = anchor_slots // 2
        for _ in range(n_sym):
            x = float(rng.uniform(6, w - 6))
            if rng.random() < style.anchor_bias:
                slot = int(rng.integers(0, half + 1))
            else:
                slot = int(rng.integers(half, anchor_slots + 1))
            y = staff_top + slot * gap / 2.0
            span = _draw_glyph(block, x, y, style, rng)
            if span is not None:
                spans.append(span)

        block |= block_staff

        if spec.curvature_amplitude > 0:
            phase = float(rng.uniform(0, 2 * math.pi))
            shifts = np.rint(
                spec.curvature_amplitude
                * np.sin(2 * math.pi * np.arange(w) / spec.curvature_period + phase)
            ).astype(int)
            for x in range(w):
                if shifts[x]:
                    block[:, x] = _shift_column(block[:, x], shifts[x])
                    block_staff[:, x] = _shift_column(block_staff[:, x], shifts[x])

        ink[block_top : block_top + block_h, :] |= block
        staff_only[block_top : block_top + block_h, :] |= block_staff

        rows = np.flatnonzero(block.any(axis=1))
        line_boxes.append((block_top + int(rows[0]), block_top + int(rows[-1])))
        silence_per_line.append(_merge_intervals(spans, w))

    page[ink] = 0
    return page, SynthGroundTruth(line_boxes, silence_per_line, ink, staff_only)


def add_gaussian_noise(img, level, seed=0):
    """Additive zero-mean Gaussian noise with sigma = level * 255.

    Values are clamped to [0, 255] and rounded back to the 8-bit grid.
    ``level=0`` returns the input unchanged.
    """
    if not 0.0 <= level <= 1.0:
        raise ValueError(f"noise level must be in [0, 1], got {level}")
    img = np.asarray(img, dtype=np.uint8)
    if level == 0.0:
        return img.copy()
    rng = np.random.default_rng(seed)
    noisy = img.astype(np.float64) + level * 255.0 * rng.standard_normal(img.shape)
    return np.rint(np.clip(noisy, 0, 255)).astype(np.uint8)


def apply_curvature(img, amplitude, period):
    """Shift every column vertically along a sinusoid.

    Column ``x`` moves down by ``round(amplitude * sin(2 pi x / period))``;
    rows shifted in from outside the image are filled with background.
    """
    if period <= 0:
        raise ValueError(f"curvature period must be > 0, got {period}")
    img = np.asarray(img, dtype=np.uint8)
    h, w = img.shape
    out = np.full_like(img, 255)
    shifts = np.rint(
        amplitude * np.sin(2 * math.pi * np.arange(w) / period)
    ).astype(int)
    for x in range(w):
        s = shifts[x]
        if s == 0:
            out[:, x] = img[:, x]
        elif s > 0:
            out[s:, x] = img[: h - s, x]
        else:
            out[: h + s, x] = img[-s:, x]
    return out


def write_ground_truth(gt, path):
    """Write the line-oriented ground-truth sidecar.

    One record per score-line::

        line <top> <bottom> silence <s>:<e> <s>:<e> ...
    """
    h, w = gt.ink_mask.shape
    lines = [f"page {h} {w}"]
    for (top, bottom), silences in zip(gt.line_boxes, gt.silence_intervals):
        rec = f"line {top} {bottom} silence " + " ".join(
            f"{s}:{e}" for s, e in silences
        )
        lines.append(rec.rstrip())
    return _write_text(path, "\n".join(lines) + "\n")


def read_ground_truth(path):
    """Parse a sidecar written by ``write_ground_truth``.

    Returns ``(page_shape, line_boxes, silence_intervals)``.
    """
    shape = None
    boxes = []
    silences = []
    with open(path, encoding="utf-8") as fh:
        for raw in fh:
            parts = raw.split()
            if not parts:
                continue
            if parts[0] == "page":
                shape = (int(parts[1]), int(parts[2]))
            elif parts[0] == "line":
                boxes.append((int(parts[1]), int(parts[2])))
                ivals = []
                if "silence" in parts:
                    for tok in parts[parts.index("silence") + 1 :]:
                        s, e = tok.split(":")
                        ivals.append((int(s), int(e)))
                silences.append(ivals)
    return shape, boxes, silences


def _write_text(path, text):
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(text)
    return path
