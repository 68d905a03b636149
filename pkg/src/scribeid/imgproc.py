"""Raster image primitives: loading, binarization, projections, strips.

Images are plain numpy arrays throughout the package:

- gray page: 2-D ``uint8`` array of shape ``(height, width)``,
  0 = black ink, 255 = white background;
- binary mask: 2-D ``bool`` array, ``True`` = foreground (ink);
- projection profile: 1-D ``int64`` array of foreground counts, one entry
  per row (horizontal axis) or per column (vertical axis).

Only lossless raster input is accepted: PNG and binary (P5) PGM.  Color
input is reduced to luminance with the ITU-R BT.601 weights.
"""

import numpy as np
from PIL import Image, UnidentifiedImageError

from .errors import FormatError

HORIZONTAL = "horizontal"
VERTICAL = "vertical"

# Pillow reports PGM under its PPM plugin.
_SUPPORTED_FORMATS = {"PNG", "PPM"}


def load_page(path):
    """Load a PNG or binary-PGM page as a ``(height, width)`` uint8 array.

    Raises ``FormatError`` for any other format and lets ``OSError``
    propagate for unreadable files.
    """
    try:
        with Image.open(path) as im:
            if im.format not in _SUPPORTED_FORMATS:
                raise FormatError(
                    f"unsupported image format {im.format!r} (PNG/PGM only): {path}"
                )
            if im.mode != "L":
                im = im.convert("L")  # BT.601 luminance
            data = np.asarray(im, dtype=np.uint8)
    except UnidentifiedImageError as exc:
        raise FormatError(f"not a decodable raster file: {path}") from exc
    if data.ndim != 2 or data.size == 0:
        raise FormatError(f"expected a non-empty single-channel raster: {path}")
    return data


def save_page(img, path):
    """Write a gray page as PNG or binary PGM, chosen by file extension."""
    suffix = str(path).lower().rsplit(".", 1)[-1]
    if suffix not in ("png", "pgm"):
        raise FormatError(f"unsupported output extension .{suffix} (png/pgm only)")
    Image.fromarray(np.asarray(img, dtype=np.uint8), mode="L").save(path)


def otsu_threshold(img):
    """Otsu's threshold from the 256-bin histogram.

    Returns ``t`` such that foreground is intensity <= t; the lowest
    maximizing t wins ties.
    """
    hist = np.bincount(np.asarray(img, dtype=np.uint8).ravel(), minlength=256)
    hist = hist.astype(np.float64)
    total = hist.sum()
    w0 = np.cumsum(hist)
    w1 = total - w0
    cum = np.cumsum(hist * np.arange(256))
    mean0 = np.divide(cum, w0, out=np.zeros(256), where=w0 > 0)
    mean1 = np.divide(cum[-1] - cum, w1, out=np.zeros(256), where=w1 > 0)
    between = w0 * w1 * (mean0 - mean1) ** 2
    return int(np.argmax(between))


def binarize(img):
    """Foreground = pixels darker than the Otsu threshold.

    A constant image has no separable classes and maps to all-background.
    """
    img = np.asarray(img, dtype=np.uint8)
    if img.min() == img.max():
        return np.zeros(img.shape, dtype=bool)
    return img <= otsu_threshold(img)


def projection(mask, axis=HORIZONTAL):
    """Count foreground pixels per row (horizontal) or column (vertical)."""
    mask = np.asarray(mask, dtype=bool)
    if axis == HORIZONTAL:
        return mask.sum(axis=1, dtype=np.int64)
    if axis == VERTICAL:
        return mask.sum(axis=0, dtype=np.int64)
    raise ValueError(f"axis must be {HORIZONTAL!r} or {VERTICAL!r}, got {axis!r}")


def split_strips(img, n=8):
    """Split a page into ``n`` vertical strips of near-equal width.

    The first ``width % n`` strips are one pixel wider, so horizontal
    concatenation of the result reproduces the page exactly.
    """
    img = np.asarray(img)
    width = img.shape[1]
    if not 1 <= n <= width:
        raise ValueError(f"strip count must be in [1, {width}], got {n}")
    base, extra = divmod(width, n)
    strips = []
    x = 0
    for i in range(n):
        w = base + (1 if i < extra else 0)
        strips.append(img[:, x : x + w].copy())
        x += w
    return strips
