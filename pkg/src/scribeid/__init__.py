"""scribeid: writer identification in music scores without staff-line removal.

The package is organized by pipeline stage:

- :mod:`scribeid.imgproc` -- page loading, Otsu binarization, projection
  profiles and strip division;
- :mod:`scribeid.synth` -- ground-truthed synthetic pages and degradations;
- :mod:`scribeid.features` -- sliding-window gradient histograms, silence
  detection and Gabor features;
- :mod:`scribeid.seqmodel` -- GMM/HMM engine: EM training, Viterbi and
  forward scoring, filler-grammar forced alignment;
- :mod:`scribeid.dimred` -- factor analysis with varimax, PCA and LDA;
- :mod:`scribeid.segmentation` -- projection line segmentation and
  HMM block-line detection;
- :mod:`scribeid.pipeline` -- writer-model training, unit scoring and
  page-level fusion;
- :mod:`scribeid.evaluation` -- cross-validation, metrics and benchmarks;
- :mod:`scribeid.cli` -- the ``scribeid`` command.
"""

from .config import RunConfig
from .errors import ScribeError
from .features import SlidingWindowConfig
from .pipeline import WeightFunction, identify_page, train_writer_models
from .synth import SynthPageSpec, generate_page

__version__ = "0.1.0"

__all__ = [
    "RunConfig",
    "ScribeError",
    "SlidingWindowConfig",
    "SynthPageSpec",
    "WeightFunction",
    "generate_page",
    "identify_page",
    "train_writer_models",
    "__version__",
]
