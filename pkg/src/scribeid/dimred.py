"""Feature-selection transforms: factor analysis, varimax, PCA, LDA.

All three transforms are fitted on pooled training frames and applied per
frame before model training and scoring.  The factor model assumes
isotropic noise, ``x = W y + mu + c`` with ``c ~ N(0, sigma^2 I)``, fitted
by EM from a PCA initialization and finished with a varimax rotation of
the loadings; the rotation changes neither the likelihood nor the spanned
subspace, only the axes within it.
"""

import math
import struct
from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .errors import DataError, FitError, FormatError

_LOG_2PI = math.log(2.0 * math.pi)


@dataclass
class FaModel:
    """Isotropic-noise factor model."""

    loadings: np.ndarray  # (n, m)
    mean: np.ndarray  # (n,)
    noise_variance: float  # sigma^2 shared by all dimensions


@dataclass
class PcaModel:
    components: np.ndarray  # (k, n), orthonormal rows
    mean: np.ndarray  # (n,)
    eigenvalues: np.ndarray  # (k,), non-increasing, >= 0


@dataclass
class LdaModel:
    projection: np.ndarray  # (n, m)
    mean: np.ndarray  # (n,) global mean
    classes: list  # class labels, sorted
    class_means: np.ndarray  # (c, n)
    class_counts: np.ndarray  # (c,)
    eigenvalues: np.ndarray  # (m,) generalized eigenvalues, descending


# ---------------------------------------------------------------------------
# Factor analysis (probabilistic PCA form)
# ---------------------------------------------------------------------------


def _fa_loglik(cov, trace_cov, w, sigma2, n_obs, dim):
    """Gaussian log-likelihood of the factor model via the m x m form."""
    m = w.shape[1]
    mmat = w.T @ w + sigma2 * np.eye(m)
    sign, logdet_m = np.linalg.slogdet(mmat)
    if sign <= 0:
        raise FitError("factor-model covariance is not positive definite")
    logdet_c = (dim - m) * math.log(sigma2) + logdet_m
    inner = np.linalg.solve(mmat, w.T @ cov @ w)
    tr_cinv_s = (trace_cov - np.trace(inner)) / sigma2
    return -0.5 * n_obs * (dim * _LOG_2PI + logdet_c + tr_cinv_s)


def fa_fit(frames, n_factors, iters=50, seed=0):
    """EM fit of the isotropic factor model, then varimax rotation.

    Returns ``(FaModel, trace)``; ``trace`` holds the data log-likelihood
    at the start of each EM iteration and never decreases.  The ``seed``
    argument is accepted for interface parity; the PCA initialization is
    deterministic.
    """
    del seed
    x = np.asarray(frames, dtype=np.float64)
    if x.ndim != 2:
        raise ValueError("frames must be an (N, n) matrix")
    n_obs, dim = x.shape
    if not (n_obs > dim >= n_factors >= 1):
        raise ValueError(
            f"need N > n >= m >= 1, got N={n_obs}, n={dim}, m={n_factors}"
        )
    mean = x.mean(axis=0)
    xc = x - mean
    cov = (xc.T @ xc) / n_obs
    evals = np.linalg.eigvalsh(cov)[::-1]
    if (evals > 1e-10 * max(evals[0], 1e-300)).sum() < n_factors:
        raise FitError(
            f"sample covariance rank is below the requested {n_factors} factors"
        )
    trace_cov = float(np.trace(cov))

    # PCA start: principal axes scaled by sqrt(eigenvalue), noise from the
    # discarded spectrum.
    vals, vecs = np.linalg.eigh(cov)
    order = np.argsort(vals)[::-1]
    vals, vecs = vals[order], vecs[:, order]
    w = vecs[:, :n_factors] * np.sqrt(np.maximum(vals[:n_factors], 0.0))
    sigma2 = float(max(vals[n_factors:].mean() if dim > n_factors else 1e-6, 1e-12))

    trace = []
    eye_m = np.eye(n_factors)
    for _ in range(iters):
        trace.append(_fa_loglik(cov, trace_cov, w, sigma2, n_obs, dim))
        mmat = w.T @ w + sigma2 * eye_m
        minv = np.linalg.inv(mmat)
        proj = minv @ w.T  # E[y|x] = proj (x - mean)
        ey = xc @ proj.T  # (N, m)
        sum_eyy = n_obs * sigma2 * minv + ey.T @ ey
        xty = xc.T @ ey  # (n, m)
        w = np.linalg.solve(sum_eyy.T, xty.T).T
        sigma2 = float(
            (
                n_obs * trace_cov
                - 2.0 * np.einsum("ij,ij->", w, xty)
                + np.einsum("ij,ij->", sum_eyy @ w.T, w.T)
            )
            / (n_obs * dim)
        )
        sigma2 = max(sigma2, 1e-12 * max(trace_cov, 1.0))
    return FaModel(varimax(w), mean, sigma2), trace


def varimax_criterion(w):
    """Sum over factors of the variance of the squared loadings."""
    return float((w**2).var(axis=0).sum())


def varimax(w, max_sweeps=100, tol=1e-8):
    """Orthogonal rotation maximizing the varimax criterion.

    Classic pairwise sweeps: every factor pair is rotated by its exact
    optimal angle, so the criterion never decreases; sweeps stop when a
    full pass gains less than ``tol``.  A single factor cannot rotate.
    """
    w = np.array(w, dtype=np.float64)
    n, m = w.shape
    if m < 2:
        return w
    crit = varimax_criterion(w)
    for _ in range(max_sweeps):
        for p in range(m - 1):
            for q in range(p + 1, m):
                a, b = w[:, p], w[:, q]
                u = a**2 - b**2
                v = 2.0 * a * b
                su, sv = u.sum(), v.sum()
                num = 2.0 * (u @ v) - 2.0 * su * sv / n
                den = (u @ u - v @ v) - (su**2 - sv**2) / n
                phi = 0.25 * math.atan2(num, den)
                if abs(phi) < 1e-15:
                    continue
                c, s = math.cos(phi), math.sin(phi)
                w[:, p], w[:, q] = a * c + b * s, -a * s + b * c
        new_crit = varimax_criterion(w)
        if new_crit - crit < tol:
            break
        crit = new_crit
    return w


def fa_transform(x, model):
    """Posterior mean of the style factors, E[y | x].

    Computed via the m x m system (W'W + sigma^2 I) y = W'(x - mean);
    accepts a single vector or an (N, n) batch.
    """
    x = np.asarray(x, dtype=np.float64)
    w = model.loadings
    single = x.ndim == 1
    xc = np.atleast_2d(x) - model.mean
    if xc.shape[1] != w.shape[0]:
        raise ValueError(f"input dimension {xc.shape[1]} != model {w.shape[0]}")
    mmat = w.T @ w + model.noise_variance * np.eye(w.shape[1])
    y = np.linalg.solve(mmat, w.T @ xc.T).T
    return y[0] if single else y


# ---------------------------------------------------------------------------
# PCA
# ---------------------------------------------------------------------------


def pca_fit(frames, n_components):
    """Principal axes of the mean-centered frames, by SVD.

    Eigenvalues use the 1/N covariance convention so they agree with the
    factor-model likelihood above.
    """
    x = np.asarray(frames, dtype=np.float64)
    if x.ndim != 2 or x.shape[0] < 2:
        raise ValueError("need at least two frames")
    n_obs, dim = x.shape
    if not 1 <= n_components <= dim:
        raise ValueError(f"component count must be in [1, {dim}]")
    mean = x.mean(axis=0)
    _, svals, vt = np.linalg.svd(x - mean, full_matrices=True)
    eigenvalues = np.zeros(dim)
    eigenvalues[: svals.shape[0]] = svals**2 / n_obs
    return PcaModel(
        components=vt[:n_components].copy(),
        mean=mean,
        eigenvalues=eigenvalues[:n_components],
    )


def pca_transform(x, model):
    x = np.asarray(x, dtype=np.float64)
    single = x.ndim == 1
    xc = np.atleast_2d(x) - model.mean
    if xc.shape[1] != model.components.shape[1]:
        raise ValueError("input dimension does not match the PCA model")
    y = xc @ model.components.T
    return y[0] if single else y


# ---------------------------------------------------------------------------
# LDA
# ---------------------------------------------------------------------------


def lda_fit(frames, labels, n_components):
    """Fisher discriminant directions from the generalized eigenproblem.

    The within-class scatter is ridge-regularized only when it is not
    positive definite.
    """
    x = np.asarray(frames, dtype=np.float64)
    labels = list(labels)
    if x.ndim != 2 or len(labels) != x.shape[0]:
        raise ValueError("frames and labels must have matching length")
    classes = sorted(set(labels))
    n_classes = len(classes)
    if n_classes < 2:
        raise ValueError("need at least two classes")
    if not 1 <= n_components <= n_classes - 1:
        raise ValueError(f"component count must be in [1, {n_classes - 1}]")
    dim = x.shape[1]
    label_arr = np.asarray(labels)

    mean = x.mean(axis=0)
    class_means = np.zeros((n_classes, dim))
    counts = np.zeros(n_classes)
    s_w = np.zeros((dim, dim))
    for i, c in enumerate(classes):
        members = x[label_arr == c]
        if members.shape[0] < 2:
            raise DataError(f"class {c!r} has fewer than 2 samples")
        counts[i] = members.shape[0]
        class_means[i] = members.mean(axis=0)
        centered = members - class_means[i]
        s_w += centered.T @ centered
    spread = np.abs(class_means - mean).max()
    if spread <= 1e-12 * max(1.0, np.abs(mean).max()):
        raise FitError("all class means coincide; Fisher objective is degenerate")
    diff = class_means - mean
    s_b = (counts[:, None] * diff).T @ diff

    try:
        np.linalg.cholesky(s_w)
        s_w_reg = s_w
    except np.linalg.LinAlgError:
        s_w_reg = s_w + (1e-6 * np.trace(s_w) / dim) * np.eye(dim)
    vals, vecs = scipy.linalg.eigh(s_b, s_w_reg)
    order = np.argsort(vals)[::-1][:n_components]
    return LdaModel(
        projection=vecs[:, order].copy(),
        mean=mean,
        classes=classes,
        class_means=class_means,
        class_counts=counts,
        eigenvalues=np.maximum(vals[order], 0.0),
    )


def lda_transform(x, model):
    x = np.asarray(x, dtype=np.float64)
    single = x.ndim == 1
    xc = np.atleast_2d(x) - model.mean
    if xc.shape[1] != model.projection.shape[0]:
        raise ValueError("input dimension does not match the LDA model")
    y = xc @ model.projection
    return y[0] if single else y


def apply_transform(x, model):
    """Dispatch on the model type; ``None`` passes frames through."""
    if model is None:
        return np.asarray(x, dtype=np.float64)
    if isinstance(model, FaModel):
        return fa_transform(x, model)
    if isinstance(model, PcaModel):
        return pca_transform(x, model)
    if isinstance(model, LdaModel):
        return lda_transform(x, model)
    raise TypeError(f"unknown transform model {type(model).__name__}")


def output_dim(model):
    if model is None:
        return None
    if isinstance(model, FaModel):
        return model.loadings.shape[1]
    if isinstance(model, PcaModel):
        return model.components.shape[0]
    if isinstance(model, LdaModel):
        return model.projection.shape[1]
    raise TypeError(f"unknown transform model {type(model).__name__}")


# ---------------------------------------------------------------------------
# Transform files: 4-byte kind tag, u32 version, dims, float64 payload.
# ---------------------------------------------------------------------------

_TRANSFORM_VERSION = 1
_KIND_TAGS = {"FA\0\0": FaModel, "PCA\0": PcaModel, "LDA\0": LdaModel}


def _write_array(fh, arr):
    arr = np.ascontiguousarray(arr, dtype="<f8")
    fh.write(struct.pack("<I", arr.size))
    fh.write(arr.tobytes())


def _read_array(fh, shape=None):
    (size,) = struct.unpack("<I", fh.read(4))
    data = np.frombuffer(fh.read(8 * size), dtype="<f8").copy()
    return data.reshape(shape) if shape else data


def save_transform(model, path):
    with open(path, "wb") as fh:
        fh.write(struct.pack("<I", _TRANSFORM_VERSION))
        if isinstance(model, FaModel):
            fh.write(b"FA\0\0")
            n, m = model.loadings.shape
            fh.write(struct.pack("<II", n, m))
            _write_array(fh, model.loadings)
            _write_array(fh, model.mean)
            fh.write(struct.pack("<d", model.noise_variance))
        elif isinstance(model, PcaModel):
            fh.write(b"PCA\0")
            k, n = model.components.shape
            fh.write(struct.pack("<II", n, k))
            _write_array(fh, model.components)
            _write_array(fh, model.mean)
            _write_array(fh, model.eigenvalues)
        elif isinstance(model, LdaModel):
            fh.write(b"LDA\0")
            n, m = model.projection.shape
            fh.write(struct.pack("<II", n, m))
            _write_array(fh, model.projection)
            _write_array(fh, model.mean)
            _write_array(fh, model.class_means)
            _write_array(fh, model.class_counts)
            _write_array(fh, model.eigenvalues)
            names = "\n".join(str(c) for c in model.classes).encode("utf-8")
            fh.write(struct.pack("<I", len(names)))
            fh.write(names)
        else:
            raise TypeError(f"cannot serialize {type(model).__name__}")
    return path


def load_transform(path):
    with open(path, "rb") as fh:
        (version,) = struct.unpack("<I", fh.read(4))
        if version != _TRANSFORM_VERSION:
            raise FormatError(f"unsupported transform version {version}")
        kind = fh.read(4).decode("latin-1")
        if kind == "FA\0\0":
            n, m = struct.unpack("<II", fh.read(8))
            loadings = _read_array(fh, (n, m))
            mean = _read_array(fh, (n,))
            (sigma2,) = struct.unpack("<d", fh.read(8))
            return FaModel(loadings, mean, sigma2)
        if kind == "PCA\0":
            n, k = struct.unpack("<II", fh.read(8))
            return PcaModel(
                components=_read_array(fh, (k, n)),
                mean=_read_array(fh, (n,)),
                eigenvalues=_read_array(fh, (k,)),
            )
        if kind == "LDA\0":
            n, m = struct.unpack("<II", fh.read(8))
            projection = _read_array(fh, (n, m))
            mean = _read_array(fh, (n,))
            class_means = _read_array(fh)
            counts = _read_array(fh)
            eigenvalues = _read_array(fh, (m,))
            (nbytes,) = struct.unpack("<I", fh.read(4))
            classes = fh.read(nbytes).decode("utf-8").split("\n")
            return LdaModel(
                projection=projection,
                mean=mean,
                classes=classes,
                class_means=class_means.reshape(len(classes), n),
                class_counts=counts,
                eigenvalues=eigenvalues,
            )
        raise FormatError(f"unknown transform kind tag {kind!r} in {path}")
