"""Sliding-window gradient-histogram features and silence detection.

A line image is scanned left to right by full-height windows.  Each window
is divided into a grid of cells; every pixel votes its gradient magnitude
into the orientation bin of its gradient direction, and the concatenated
cell histograms (L2-normalized) form one feature frame.  A 4x4 grid with
8 orientation bins gives 128 dimensions, 16 bins give 256.

Silence frames are windows whose columns carry no more ink than the staff
lines alone can explain; they are flagged here and dropped before writer
scoring.
"""

import hashlib
import math
import struct
from dataclasses import dataclass

import numpy as np
from scipy.signal import convolve2d

from . import imgproc
from .errors import FormatError

_TWO_PI = 2.0 * math.pi


@dataclass(frozen=True)
class SlidingWindowConfig:
    """Geometry of the sliding-window feature extractor."""

    window_width: int = 34
    overlap: float = 0.5
    grid_rows: int = 4
    grid_cols: int = 4
    orientation_bins: int = 8

    def __post_init__(self):
        if not 0.0 <= self.overlap < 1.0:
            raise ValueError(f"overlap must be in [0, 1), got {self.overlap}")
        if self.window_width < self.grid_cols:
            raise ValueError("window width must be >= grid columns")
        if min(self.grid_rows, self.grid_cols, self.orientation_bins) < 1:
            raise ValueError("grid dims and orientation bins must be >= 1")

    @property
    def dim(self):
        return self.grid_rows * self.grid_cols * self.orientation_bins

    @property
    def stride(self):
        return max(1, int(round(self.window_width * (1.0 - self.overlap))))

    def digest(self):
        key = (
            f"window={self.window_width};overlap={self.overlap!r};"
            f"grid={self.grid_rows}x{self.grid_cols};bins={self.orientation_bins}"
        )
        return hashlib.sha256(key.encode()).hexdigest()[:12]


@dataclass
class FeatureSequence:
    """T x D feature frames with their left-edge window positions."""

    frames: np.ndarray  # (T, D) float64
    positions: np.ndarray  # (T,) int, strictly increasing
    window: int  # window width in pixels
    config_digest: str = ""

    def __len__(self):
        return self.frames.shape[0]

    @property
    def dim(self):
        return self.frames.shape[1]


def gradient(img):
    """Central-difference gradients (Gx, Gy) with replicate border padding."""
    img = np.asarray(img, dtype=np.float64)
    if img.shape[0] < 3 or img.shape[1] < 3:
        raise ValueError(f"image must be at least 3x3, got {img.shape}")
    padded = np.pad(img, 1, mode="edge")
    gx = padded[1:-1, 2:] - padded[1:-1, :-2]
    gy = padded[2:, 1:-1] - padded[:-2, 1:-1]
    return gx, gy


def _split_edges(n, parts):
    """Cell boundaries over n pixels; the first n % parts cells are larger."""
    base, extra = divmod(n, parts)
    edges = [0]
    for i in range(parts):
        edges.append(edges[-1] + base + (1 if i < extra else 0))
    return edges


def lgh_window(patch, cfg):
    """Gradient-orientation histogram for one window, unit L2 norm.

    The patch is cut into grid cells; per pixel the gradient magnitude is
    added to the orientation bin of atan2(Gy, Gx) quantized over [0, 2pi).
    Cell histograms are concatenated row-major.  An all-constant patch has
    zero gradients and stays the zero vector.
    """
    gx, gy = gradient(patch)
    mag = np.hypot(gx, gy)
    ang = np.arctan2(gy, gx) % _TWO_PI
    bins = cfg.orientation_bins
    idx = np.minimum((ang * (bins / _TWO_PI)).astype(np.int64), bins - 1)

    h, w = mag.shape
    rows = _split_edges(h, cfg.grid_rows)
    cols = _split_edges(w, cfg.grid_cols)
    feats = np.zeros(cfg.dim)
    k = 0
    for r in range(cfg.grid_rows):
        for c in range(cfg.grid_cols):
            cell_idx = idx[rows[r] : rows[r + 1], cols[c] : cols[c + 1]].ravel()
            cell_mag = mag[rows[r] : rows[r + 1], cols[c] : cols[c + 1]].ravel()
            feats[k : k + bins] = np.bincount(
                cell_idx, weights=cell_mag, minlength=bins
            )
            k += bins
    norm = float(np.linalg.norm(feats))
    if norm > 0.0:
        feats /= norm
    return feats


def window_positions(width, cfg):
    """Left edges of the sliding windows over a line of ``width`` pixels.

    Positions advance by the stride; if the last full-stride window stops
    short of the right edge, one final window is emitted flush right.
    """
    w = cfg.window_width
    if width < w:
        raise ValueError(f"line width {width} is narrower than window {w}")
    pos = list(range(0, width - w + 1, cfg.stride))
    if pos[-1] + w < width:
        pos.append(width - w)
    return pos


def sliding_lgh(line, cfg=None):
    """Extract the left-to-right LGH feature sequence of a line image."""
    cfg = cfg or SlidingWindowConfig()
    line = np.asarray(line)
    positions = window_positions(line.shape[1], cfg)
    frames = np.stack(
        [lgh_window(line[:, p : p + cfg.window_width], cfg) for p in positions]
    )
    return FeatureSequence(
        frames=frames,
        positions=np.asarray(positions, dtype=np.int64),
        window=cfg.window_width,
        config_digest=cfg.digest(),
    )


def staff_line_thickness(mask):
    """Median vertical foreground run length, 0.0 for an empty mask.

    Staff-line crossings dominate the vertical runs of a score line, so
    the median run length is a robust estimate of one line's thickness.
    """
    mask = np.asarray(mask, dtype=bool)
    cols = mask.T  # one row per image column
    padded = np.zeros((cols.shape[0], cols.shape[1] + 2), dtype=np.int8)
    padded[:, 1:-1] = cols
    d = np.diff(padded, axis=1)
    starts = np.flatnonzero(d.ravel() == 1)
    ends = np.flatnonzero(d.ravel() == -1)
    if starts.size == 0:
        return 0.0
    return float(np.median(ends - starts))


def detect_silence(mask, seq, staff_line_count=5):
    """Flag frames whose windows carry no more ink than the staff lines.

    A frame is silence iff every column in its window has a foreground
    count <= ceil(staff_line_count * t), where t is the estimated single
    staff-line thickness.  All-background windows are always silence.
    """
    mask = np.asarray(mask, dtype=bool)
    thickness = staff_line_thickness(mask)
    budget = math.ceil(staff_line_count * thickness - 1e-9) if thickness else 0
    col_counts = mask.sum(axis=0)
    flags = np.zeros(len(seq), dtype=bool)
    for i, p in enumerate(seq.positions):
        flags[i] = col_counts[p : p + seq.window].max(initial=0) <= budget
    return flags


@dataclass(frozen=True)
class GaborConfig:
    """Gabor filter-bank parameters; wavelength defaults to 8x the
    estimated staff-line thickness (at least 8 px) when left unset."""

    wavelength: float = None
    sigma_ratio: float = 0.56
    aspect: float = 0.5
    phase: float = 0.0


def gabor_kernel(wavelength, sigma, theta, aspect=0.5, phase=0.0):
    """Oriented sinusoid under a Gaussian envelope, made DC-free.

    Subtracting the kernel mean removes the response to constant input,
    which would otherwise differ slightly across orientations on the
    truncated square support.
    """
    half = max(2, int(math.ceil(3.0 * sigma)))
    ys, xs = np.mgrid[-half : half + 1, -half : half + 1].astype(np.float64)
    xp = xs * math.cos(theta) + ys * math.sin(theta)
    yp = -xs * math.sin(theta) + ys * math.cos(theta)
    g = np.exp(-(xp**2 + (aspect * yp) ** 2) / (2.0 * sigma**2)) * np.cos(
        _TWO_PI * xp / wavelength + phase
    )
    return g - g.mean()


GABOR_ORIENTATIONS = (0.0, math.pi / 4, math.pi / 2, 3 * math.pi / 4)


def gabor_features(window, rows=12, cfg=None):
    """Band-averaged Gabor magnitude responses, one value per band and
    orientation (rows x 4 dimensions, band-major)."""
    cfg = cfg or GaborConfig()
    window = np.asarray(window, dtype=np.float64)
    if window.shape[0] < rows:
        raise ValueError(f"window height {window.shape[0]} < {rows} bands")
    wavelength = cfg.wavelength
    if wavelength is None:
        t = staff_line_thickness(imgproc.binarize(window.astype(np.uint8)))
        wavelength = max(8.0, 8.0 * t)
    sigma = cfg.sigma_ratio * wavelength

    band_edges = _split_edges(window.shape[0], rows)
    feats = np.zeros(rows * len(GABOR_ORIENTATIONS))
    for oi, theta in enumerate(GABOR_ORIENTATIONS):
        k = gabor_kernel(wavelength, sigma, theta, cfg.aspect, cfg.phase)
        resp = np.abs(convolve2d(window, k, mode="same", boundary="symm"))
        for b in range(rows):
            feats[b * len(GABOR_ORIENTATIONS) + oi] = resp[
                band_edges[b] : band_edges[b + 1]
            ].mean()
    return feats


# ---------------------------------------------------------------------------
# Feature file format: magic, u32 version, u32 T, u32 D, then T*D little-
# endian float64 values, row-major.
# ---------------------------------------------------------------------------

_FSEQ_MAGIC = b"SCRIBFTS"
_FSEQ_VERSION = 1


def save_features(frames, path):
    """Write a feature matrix (or FeatureSequence) to the versioned format."""
    if isinstance(frames, FeatureSequence):
        frames = frames.frames
    frames = np.ascontiguousarray(frames, dtype="<f8")
    if frames.ndim != 2 or not np.isfinite(frames).all():
        raise ValueError("frames must be a finite 2-D matrix")
    t, d = frames.shape
    with open(path, "wb") as fh:
        fh.write(_FSEQ_MAGIC)
        fh.write(struct.pack("<III", _FSEQ_VERSION, t, d))
        fh.write(frames.tobytes())
    return path


def load_feature_frames(path):
    """Read back a (T, D) float64 matrix written by ``save_features``."""
    with open(path, "rb") as fh:
        magic = fh.read(len(_FSEQ_MAGIC))
        if magic != _FSEQ_MAGIC:
            raise FormatError(f"not a feature file: {path}")
        version, t, d = struct.unpack("<III", fh.read(12))
        if version != _FSEQ_VERSION:
            raise FormatError(f"unsupported feature file version {version}")
        data = np.frombuffer(fh.read(8 * t * d), dtype="<f8")
    if data.size != t * d:
        raise FormatError(f"truncated feature file: {path}")
    return data.reshape(t, d).copy()
