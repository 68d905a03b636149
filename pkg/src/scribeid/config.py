"""Tool-wide run configuration with a provenance digest.

A ``RunConfig`` collects every knob that affects what a trained registry
means: feature geometry, model sizes, transform choice, strip count and
segmentation parameters.  Its digest is embedded in registries and
reports, and scoring refuses to run when the requested configuration does
not match the registry's digest.  Runtime-only knobs (seed, jobs, weight
function, iteration counts) are recorded but excluded from the digest.
"""

import hashlib
from dataclasses import dataclass, fields, replace

from .errors import ConfigError
from .features import SlidingWindowConfig

MODE_LINE = "line"
MODE_BLOCK = "block-line"

TRANSFORM_KINDS = ("none", "fa", "pca", "lda")

# Fields that do not change what a trained model is compatible with.
_RUNTIME_FIELDS = {
    "seed",
    "jobs",
    "weight_fn",
    "weight_constant",
    "weight_decay",
    "train_iters",
    "zone_iters",
    "realign_rounds",
}


@dataclass(frozen=True)
class RunConfig:
    # Feature geometry
    window_width: int = 34
    overlap: float = 0.5
    grid_rows: int = 4
    grid_cols: int = 4
    orientation_bins: int = 8
    # Writer models
    states: int = 4
    mixtures: int = 64
    train_iters: int = 10
    # Zone models / filler grammar
    zone_states: int = 4
    zone_mixtures: int = 2
    zone_iters: int = 8
    switch_prob: float = 0.1
    realign_rounds: int = 0
    # Feature selection
    transform: str = "none"
    transform_dim: int = 0  # 0 = keep the input dimension heuristically
    # Segmentation
    mode: str = MODE_LINE
    strips: int = 8
    segment_threshold: float = 0.1
    segment_min_gap: int = 3
    staff_line_count: int = 5
    # Fusion
    weight_fn: str = "inverted-distance"
    weight_constant: float = 1.0
    weight_decay: float = 0.5
    # Runtime
    seed: int = 0
    jobs: int = 1

    def __post_init__(self):
        if self.transform not in TRANSFORM_KINDS:
            raise ConfigError(f"unknown transform {self.transform!r}")
        if self.mode not in (MODE_LINE, MODE_BLOCK):
            raise ConfigError(f"unknown mode {self.mode!r}")
        if not 1 <= self.strips <= 16:
            raise ConfigError(f"strip count must be in [1, 16], got {self.strips}")

    def feature_config(self):
        return SlidingWindowConfig(
            window_width=self.window_width,
            overlap=self.overlap,
            grid_rows=self.grid_rows,
            grid_cols=self.grid_cols,
            orientation_bins=self.orientation_bins,
        )

    def digest(self):
        items = []
        for f in sorted(fields(self), key=lambda f: f.name):
            if f.name in _RUNTIME_FIELDS:
                continue
            items.append(f"{f.name}={getattr(self, f.name)!r}")
        return hashlib.sha256(";".join(items).encode()).hexdigest()[:16]

    def with_overrides(self, **kwargs):
        return replace(self, **kwargs)


def _coerce(name, value, target_type):
    try:
        if target_type is bool:
            return value.lower() in ("1", "true", "yes") if isinstance(value, str) else bool(value)
        return target_type(value)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"bad value for {name}: {value!r}") from exc


def parse_config_file(path):
    """Read ``key = value`` lines (# comments allowed) into a dict."""
    values = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, 1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ConfigError(f"{path}:{lineno}: expected 'key = value'")
            key, _, value = line.partition("=")
            values[key.strip().replace("-", "_")] = value.strip()
    return values


def build_config(file_values=None, **overrides):
    """Assemble a RunConfig from config-file values and flag overrides."""
    known = {f.name: f.type for f in fields(RunConfig)}
    types = {f.name: type(getattr(RunConfig(), f.name)) for f in fields(RunConfig)}
    del known
    merged = {}
    for source in (file_values or {}, overrides):
        for key, value in source.items():
            if value is None:
                continue
            if key not in types:
                raise ConfigError(f"unknown configuration key {key!r}")
            merged[key] = _coerce(key, value, types[key])
    return RunConfig(**merged)


def format_config(config):
    """Stable ``key = value`` rendering, one line per field."""
    lines = [
        f"{f.name} = {getattr(config, f.name)}"
        for f in sorted(fields(config), key=lambda f: f.name)
    ]
    return "\n".join(lines) + "\n"
