"""Shared fixtures: small synthetic datasets reused across test modules."""

import os

import numpy as np
import pytest

from scribeid import imgproc, synth
from scribeid.config import RunConfig
from scribeid.evaluation import PageRecord, write_manifest

# Small models keep the suite fast; feature geometry stays at the defaults.
FAST_CONFIG = RunConfig(states=3, mixtures=2, train_iters=6, zone_iters=6)

BENCH_WRITERS = 5
BENCH_PAGES = 10
BENCH_SEED = 20240811


def benchmark_spec(style_seed, **overrides):
    base = dict(
        style_seed=style_seed,
        lines_per_page=3,
        staff_gap=10,
        symbol_density=4.0,
        stroke_thickness=2,
        width=800,
        height=620,
    )
    base.update(overrides)
    return synth.SynthPageSpec(**base)


def generate_benchmark_pages(noise_level=0.0, seed=BENCH_SEED):
    """5 writers x 10 pages, deterministic; optional Gaussian degradation."""
    pages = {}
    truths = {}
    for w in range(BENCH_WRITERS):
        wid = f"w{w}"
        spec = benchmark_spec(style_seed=seed + w)
        pages[wid] = []
        truths[wid] = []
        for p in range(BENCH_PAGES):
            page, gt = synth.generate_page(spec, seed=seed + w * 10007 + p)
            if noise_level > 0:
                page = synth.add_gaussian_noise(
                    page, noise_level, seed=seed + w * 10007 + p
                )
            pages[wid].append(page)
            truths[wid].append(gt)
    return pages, truths


@pytest.fixture(scope="session")
def benchmark_pages():
    return generate_benchmark_pages()


def write_benchmark_dataset(root, noise_level=0.0, seed=BENCH_SEED):
    """Materialize the benchmark on disk with sidecars and a manifest."""
    os.makedirs(root, exist_ok=True)
    pages, truths = generate_benchmark_pages(noise_level, seed)
    records = []
    for wid in sorted(pages):
        for p, (page, gt) in enumerate(zip(pages[wid], truths[wid])):
            pid = f"p{p:02d}"
            fname = f"{wid}-{pid}.png"
            imgproc.save_page(page, os.path.join(root, fname))
            synth.write_ground_truth(gt, os.path.join(root, fname + ".gt.txt"))
            records.append(PageRecord(wid, pid, fname))
    manifest = os.path.join(root, "manifest.tsv")
    write_manifest(records, manifest)
    return manifest


@pytest.fixture(scope="session")
def benchmark_manifest(tmp_path_factory):
    root = tmp_path_factory.mktemp("bench")
    return write_benchmark_dataset(str(root))


@pytest.fixture()
def rng():
    return np.random.default_rng(12345)
