"""Diagonal-covariance GMMs and left-to-right HMMs, trained from scratch.

All probability arithmetic is in the log domain.  HMMs are strictly
left-to-right (self-loop or advance-by-one, no skips), start in the first
state and must end in the last one; a sequence shorter than the state
count therefore has no admissible path and scores ``-inf``.

The same engine drives the per-writer models and the Score/WithoutScore
zone models: a ``FillerGrammar`` composes the two zone models into one
alternating decode graph, and ``forced_align`` labels strip frames by
Viterbi over that graph.  Because every label model is entered at its
first state and left from its last, a zone can never be shorter than the
label model's state count.
"""

import math
import struct
from dataclasses import dataclass, replace

import numpy as np
from scipy.special import logsumexp

from .errors import AlignmentError, DataError, FormatError, NumericalError

_LOG_2PI = math.log(2.0 * math.pi)

# Absolute lower bound so floored variances always yield finite densities.
_ABS_VAR_FLOOR = 1e-8

LABEL_SCORE = "score"
LABEL_GAP = "without-score"


# ---------------------------------------------------------------------------
# Gaussian mixtures
# ---------------------------------------------------------------------------


@dataclass
class GmmParams:
    """Mixture of diagonal-covariance Gaussians."""

    weights: np.ndarray  # (M,), simplex
    means: np.ndarray  # (M, D)
    variances: np.ndarray  # (M, D), all >= floor

    @property
    def n_components(self):
        return self.weights.shape[0]

    @property
    def dim(self):
        return self.means.shape[1]

    def validate(self, atol=1e-9):
        if abs(self.weights.sum() - 1.0) > atol or (self.weights < -atol).any():
            raise ValueError("mixture weights must form a simplex")
        if (self.variances <= 0).any():
            raise ValueError("variances must be positive")


def variance_floor(frames, factor=1e-3):
    """Per-dimension floor: ``factor`` times the global variance."""
    v = np.asarray(frames, dtype=np.float64).var(axis=0)
    return np.maximum(factor * v, _ABS_VAR_FLOOR)


def _component_logliks(frames, gmm):
    """(T, M) matrix of log(w_k N(x_t; mu_k, var_k))."""
    x = np.asarray(frames, dtype=np.float64)
    inv2 = 0.5 / gmm.variances  # (M, D)
    with np.errstate(divide="ignore"):
        const = (
            np.log(gmm.weights)
            - 0.5 * np.log(gmm.variances).sum(axis=1)
            - 0.5 * gmm.dim * _LOG_2PI
        )
    quad = (
        (x**2) @ inv2.T
        - x @ (gmm.means / gmm.variances).T
        + (gmm.means**2 * inv2).sum(axis=1)
    )
    return const - quad


def gmm_frame_logliks(frames, gmm):
    """(T,) per-frame log densities under the mixture."""
    if np.shape(frames)[1] != gmm.dim:
        raise ValueError(
            f"frame dimension {np.shape(frames)[1]} != model dimension {gmm.dim}"
        )
    comp = _component_logliks(frames, gmm)
    with np.errstate(divide="ignore"):
        return logsumexp(comp, axis=1)


def gmm_loglik(frames, gmm):
    """Total log-likelihood of a frame sequence; empty sequences score 0."""
    frames = np.asarray(frames, dtype=np.float64)
    if frames.size == 0:
        return 0.0
    return float(gmm_frame_logliks(frames, gmm).sum())


def _kmeanspp_centers(x, k, rng):
    """k-means++ seeding: distance-squared sampling of k data points."""
    n = x.shape[0]
    chosen = [int(rng.integers(n))]
    d2 = ((x - x[chosen[0]]) ** 2).sum(axis=1)
    for _ in range(k - 1):
        total = d2.sum()
        if total > 0:
            i = int(rng.choice(n, p=d2 / total))
        else:
            i = int(rng.integers(n))
        chosen.append(i)
        d2 = np.minimum(d2, ((x - x[i]) ** 2).sum(axis=1))
    return x[chosen].copy()


def gmm_fit(frames, n_components, iters=20, seed=0):
    """EM fit with k-means++ initialization.

    Returns ``(GmmParams, trace)`` where ``trace`` holds the total
    log-likelihood at the start of every EM iteration; the sequence is
    non-decreasing up to the variance floor.
    """
    x = np.asarray(frames, dtype=np.float64)
    if x.ndim != 2 or x.shape[0] == 0:
        raise ValueError("frames must be a non-empty (N, D) matrix")
    if not np.isfinite(x).all():
        raise DataError("non-finite values in training frames")
    n, d = x.shape
    if n < n_components:
        raise ValueError(f"need at least {n_components} frames, got {n}")

    floor = variance_floor(x)
    rng = np.random.default_rng(seed)
    centers = _kmeanspp_centers(x, n_components, rng)

    # Hard-assignment initial parameters.
    d2 = ((x[:, None, :] - centers[None, :, :]) ** 2).sum(axis=2)
    assign = d2.argmin(axis=1)
    weights = np.zeros(n_components)
    means = centers.copy()
    variances = np.tile(np.maximum(x.var(axis=0), floor), (n_components, 1))
    for k in range(n_components):
        members = x[assign == k]
        weights[k] = max(len(members), 1) / n
        if len(members):
            means[k] = members.mean(axis=0)
            variances[k] = np.maximum(members.var(axis=0), floor)
    weights /= weights.sum()
    gmm = GmmParams(weights, means, variances)

    trace = []
    for _ in range(iters):
        comp = _component_logliks(x, gmm)
        with np.errstate(divide="ignore"):
            frame_ll = logsumexp(comp, axis=1)
        trace.append(float(frame_ll.sum()))
        resp = np.exp(comp - frame_ll[:, None])
        nk = resp.sum(axis=0)
        for k in np.flatnonzero(nk < 1e-9):
            # Re-seed a starved component on the worst-explained frame.
            worst = int(frame_ll.argmin())
            resp[:, k] = 0.0
            resp[worst, k] = 1.0
            nk[k] = 1.0
        weights = nk / nk.sum()
        means = (resp.T @ x) / nk[:, None]
        variances = np.maximum((resp.T @ (x**2)) / nk[:, None] - means**2, floor)
        gmm = GmmParams(weights, means, variances)
    return gmm, trace


def gmm_to_hmm(gmm):
    """Wrap a GMM as the single emitting state of a 1-state HMM."""
    return HmmParams(
        initial=np.array([1.0]),
        transitions=np.array([[1.0]]),
        emissions=[gmm],
    )


# ---------------------------------------------------------------------------
# Left-to-right HMMs
# ---------------------------------------------------------------------------


@dataclass
class HmmParams:
    """Left-to-right HMM with per-state diagonal-covariance GMM emissions."""

    initial: np.ndarray  # (S,), all mass on state 0
    transitions: np.ndarray  # (S, S), row-stochastic, a[i][j]=0 unless j in {i, i+1}
    emissions: list  # S GmmParams, shared dimension

    @property
    def n_states(self):
        return self.initial.shape[0]

    @property
    def dim(self):
        return self.emissions[0].dim

    @property
    def n_mixtures(self):
        return self.emissions[0].n_components

    def validate(self, atol=1e-9):
        s = self.n_states
        a = self.transitions
        if not np.allclose(a.sum(axis=1), 1.0, atol=atol):
            raise ValueError("transition rows must sum to 1")
        mask = ~(np.eye(s, dtype=bool) | np.eye(s, k=1, dtype=bool))
        if (np.abs(a[mask]) > atol).any():
            raise ValueError("left-to-right structure violated")
        if abs(self.initial[0] - 1.0) > atol or (np.abs(self.initial[1:]) > atol).any():
            raise ValueError("initial distribution must sit on state 0")
        for g in self.emissions:
            g.validate(atol)


def hmm_init_flat(seqs, n_states):
    """Flat start: each sequence is cut into equal chunks, one per state,
    and state ``s`` gets a single Gaussian with the pooled chunk statistics.

    Transitions start at self-loop 0.6 / advance 0.4 (final state loops with
    probability 1 until training adjusts nothing there -- its row has no
    other legal entry)."""
    seqs = [np.asarray(s, dtype=np.float64) for s in seqs]
    if not seqs:
        raise ValueError("at least one training sequence is required")
    for s in seqs:
        if s.shape[0] < n_states:
            raise DataError(
                f"sequence of length {s.shape[0]} is shorter than {n_states} states"
            )
    floor = variance_floor(np.vstack(seqs))
    emissions = []
    for state in range(n_states):
        chunk = np.vstack([np.array_split(s, n_states)[state] for s in seqs])
        emissions.append(
            GmmParams(
                weights=np.array([1.0]),
                means=chunk.mean(axis=0, keepdims=True),
                variances=np.maximum(chunk.var(axis=0, keepdims=True), floor),
            )
        )
    a = np.zeros((n_states, n_states))
    for i in range(n_states - 1):
        a[i, i], a[i, i + 1] = 0.6, 0.4
    a[-1, -1] = 1.0
    return HmmParams(
        initial=np.eye(n_states)[0].copy(), transitions=a, emissions=emissions
    )


def _state_logliks(frames, hmm):
    """(T, S) per-state emission log densities."""
    return np.column_stack([gmm_frame_logliks(frames, g) for g in hmm.emissions])


def _log(a):
    with np.errstate(divide="ignore"):
        return np.log(a)


def forward_loglik(frames, hmm):
    """Sum over all state paths that start in state 0 and end in the last."""
    frames = np.asarray(frames, dtype=np.float64)
    if frames.shape[0] < 1:
        raise ValueError("sequence must contain at least one frame")
    logb = _state_logliks(frames, hmm)
    loga = _log(hmm.transitions)
    alpha = _log(hmm.initial) + logb[0]
    with np.errstate(invalid="ignore"):
        for t in range(1, frames.shape[0]):
            alpha = logsumexp(alpha[:, None] + loga, axis=0) + logb[t]
    return float(alpha[-1])


def viterbi_loglik(frames, hmm):
    """Best path log-likelihood and the path itself.

    Ties break toward the lower state index.  When no admissible path
    exists (sequence shorter than the state chain) the result is
    ``(-inf, empty path)``.
    """
    frames = np.asarray(frames, dtype=np.float64)
    t_len = frames.shape[0]
    if t_len < 1:
        raise ValueError("sequence must contain at least one frame")
    s = hmm.n_states
    logb = _state_logliks(frames, hmm)
    loga = _log(hmm.transitions)
    delta = _log(hmm.initial) + logb[0]
    back = np.zeros((t_len, s), dtype=np.int64)
    for t in range(1, t_len):
        scores = delta[:, None] + loga
        back[t] = scores.argmax(axis=0)  # first max = lowest predecessor
        delta = scores[back[t], np.arange(s)] + logb[t]
    best = float(delta[-1])
    if not np.isfinite(best):
        return -np.inf, np.array([], dtype=np.int64)
    path = np.zeros(t_len, dtype=np.int64)
    path[-1] = s - 1
    for t in range(t_len - 1, 0, -1):
        path[t - 1] = back[t, path[t]]
    return best, path


def _grow_mixtures(gmm, target, perturb=0.2):
    """Binary mixture splitting: heaviest components split first, the two
    children move +-perturb standard deviations apart."""
    while gmm.n_components < target:
        order = np.argsort(-gmm.weights, kind="stable")
        n_split = min(gmm.n_components, target - gmm.n_components)
        split = set(order[:n_split].tolist())
        w, mu, var = [], [], []
        for k in range(gmm.n_components):
            if k in split:
                offset = perturb * np.sqrt(gmm.variances[k])
                w.extend([gmm.weights[k] / 2.0] * 2)
                mu.extend([gmm.means[k] + offset, gmm.means[k] - offset])
                var.extend([gmm.variances[k].copy()] * 2)
            else:
                w.append(gmm.weights[k])
                mu.append(gmm.means[k].copy())
                var.append(gmm.variances[k].copy())
        gmm = GmmParams(np.asarray(w), np.asarray(mu), np.asarray(var))
    return gmm


def split_mixtures(hmm, target):
    """Grow every state's mixture toward ``target`` components."""
    return replace(hmm, emissions=[_grow_mixtures(g, target) for g in hmm.emissions])


def _baum_welch_epochs(seqs, hmm, iters, floor):
    """Fixed-architecture Baum-Welch iterations. Returns (hmm, trace)."""
    s = hmm.n_states
    allowed = np.eye(s, dtype=bool) | np.eye(s, k=1, dtype=bool)
    trace = []
    for _ in range(iters):
        loga = _log(hmm.transitions)
        trans_acc = np.zeros((s, s))
        m = hmm.n_mixtures
        d = hmm.dim
        nk = np.zeros((s, m))
        mean_acc = np.zeros((s, m, d))
        sq_acc = np.zeros((s, m, d))
        total_ll = 0.0

        for x in seqs:
            t_len = x.shape[0]
            comp = [_component_logliks(x, g) for g in hmm.emissions]  # S of (T, M)
            with np.errstate(divide="ignore"):
                logb = np.column_stack([logsumexp(c, axis=1) for c in comp])

            alpha = np.full((t_len, s), -np.inf)
            alpha[0] = _log(hmm.initial) + logb[0]
            with np.errstate(invalid="ignore"):
                for t in range(1, t_len):
                    alpha[t] = logsumexp(alpha[t - 1][:, None] + loga, axis=0) + logb[t]
            beta = np.full((t_len, s), -np.inf)
            beta[-1, -1] = 0.0  # paths must end in the final state
            with np.errstate(invalid="ignore"):
                for t in range(t_len - 2, -1, -1):
                    beta[t] = logsumexp(loga + (logb[t + 1] + beta[t + 1])[None, :], axis=1)

            ll = float(alpha[-1, -1])
            if math.isnan(ll):
                raise NumericalError("sequence likelihood is NaN during training")
            if ll == -np.inf:
                raise DataError("sequence admits no path through the model")
            total_ll += ll

            log_gamma = alpha + beta - ll
            if t_len > 1:
                with np.errstate(invalid="ignore"):
                    xi = np.exp(
                        alpha[:-1, :, None]
                        + loga[None, :, :]
                        + (logb[1:] + beta[1:])[:, None, :]
                        - ll
                    )
                trans_acc += np.where(allowed, xi.sum(axis=0), 0.0)

            for j in range(s):
                with np.errstate(invalid="ignore"):
                    r = np.exp(
                        log_gamma[:, j][:, None] + comp[j] - logb[:, j][:, None]
                    )
                r[~np.isfinite(r)] = 0.0
                nk[j] += r.sum(axis=0)
                mean_acc[j] += r.T @ x
                sq_acc[j] += r.T @ (x**2)

        trace.append(total_ll)

        # M-step: transitions (structural zeros preserved), then emissions.
        a_new = hmm.transitions.copy()
        for i in range(s - 1):
            row = trans_acc[i]
            tot = row.sum()
            if tot > 0:
                a_new[i] = np.where(allowed[i], row / tot, 0.0)
        emissions = []
        for j in range(s):
            tot = nk[j].sum()
            if tot <= 0:
                emissions.append(hmm.emissions[j])
                continue
            w = np.maximum(nk[j], 1e-12)
            mu = mean_acc[j] / np.maximum(nk[j][:, None], 1e-12)
            var = sq_acc[j] / np.maximum(nk[j][:, None], 1e-12) - mu**2
            starved = nk[j] < 1e-9
            if starved.any():
                mu[starved] = hmm.emissions[j].means[starved]
                var[starved] = hmm.emissions[j].variances[starved]
            emissions.append(
                GmmParams(w / w.sum(), mu, np.maximum(var, floor))
            )
        hmm = HmmParams(hmm.initial.copy(), a_new, emissions)
    return hmm, trace


def baum_welch(seqs, hmm, iters=10, mixture_target=None, iters_per_stage=5):
    """Train an HMM on one or more sequences.

    Mixtures grow toward ``mixture_target`` by binary splitting: each stage
    runs ``iters_per_stage`` EM iterations, then doubles the mixture count
    (capped at the target); a final ``iters`` iterations run at the target
    size.  Returns ``(HmmParams, trace)``; within a fixed-architecture
    stretch the log-likelihood trace is non-decreasing.
    """
    seqs = [np.asarray(x, dtype=np.float64) for x in seqs]
    if not seqs:
        raise ValueError("at least one training sequence is required")
    for x in seqs:
        if not np.isfinite(x).all():
            raise DataError("non-finite values in training frames")
        if x.shape[0] < hmm.n_states:
            raise DataError("training sequence shorter than the state chain")
        if x.shape[1] != hmm.dim:
            raise ValueError("sequence dimension does not match the model")
    floor = variance_floor(np.vstack(seqs))
    target = mixture_target or hmm.n_mixtures
    trace = []
    while hmm.n_mixtures < target:
        hmm, t = _baum_welch_epochs(seqs, hmm, iters_per_stage, floor)
        trace.extend(t)
        hmm = split_mixtures(hmm, min(target, 2 * hmm.n_mixtures))
    hmm, t = _baum_welch_epochs(seqs, hmm, iters, floor)
    trace.extend(t)
    return hmm, trace


# ---------------------------------------------------------------------------
# Filler grammar and forced alignment
# ---------------------------------------------------------------------------


@dataclass
class FillerGrammar:
    """Two zone models composed into an alternating loop.

    The decode graph enters either label at its first state, alternates
    labels through a switch transition from each label's final state, and
    may stop in either label's final state.  ``switch_prob`` is the exit
    probability of a label's final state; the rest stays on the self-loop.
    """

    score_model: HmmParams
    gap_model: HmmParams
    switch_prob: float = 0.1
    enter_gap: bool = True
    enter_score: bool = True

    def __post_init__(self):
        if self.score_model.dim != self.gap_model.dim:
            raise ValueError("zone models must share the feature dimension")
        if not 0.0 < self.switch_prob < 1.0:
            raise ValueError("switch probability must be in (0, 1)")
        if not (self.enter_gap or self.enter_score):
            raise ValueError("at least one entry label is required")


@dataclass(frozen=True)
class ZoneSegment:
    label: str
    start: int  # first frame, inclusive
    end: int  # last frame, inclusive


@dataclass
class ZoneAlignment:
    """Contiguous alternating zone segments covering [0, T-1]."""

    segments: list
    log_likelihood: float


def _composite_graph(grammar):
    """Stack gap states then score states into one Viterbi graph."""
    gap, score = grammar.gap_model, grammar.score_model
    sg, ss = gap.n_states, score.n_states
    n = sg + ss
    loga = np.full((n, n), -np.inf)
    loga[:sg, :sg] = _log(gap.transitions)
    loga[sg:, sg:] = _log(score.transitions)
    stay = math.log1p(-grammar.switch_prob)
    switch = math.log(grammar.switch_prob)
    # Final state of each label: keep its self-loop mass minus the exit.
    loga[sg - 1, sg - 1] = stay
    loga[sg - 1, sg] = switch
    loga[n - 1, n - 1] = stay
    loga[n - 1, 0] = switch
    init = np.full(n, -np.inf)
    entries = []
    if grammar.enter_gap:
        entries.append(0)
    if grammar.enter_score:
        entries.append(sg)
    for e in entries:
        init[e] = -math.log(len(entries))
    labels = np.array([LABEL_GAP] * sg + [LABEL_SCORE] * ss)
    finals = (sg - 1, n - 1)
    return loga, init, labels, finals


def forced_align(frames, grammar):
    """Viterbi over the composed filler graph; segments from label runs."""
    frames = np.asarray(frames, dtype=np.float64)
    if frames.shape[0] < 1:
        raise AlignmentError("cannot align an empty sequence")
    loga, init, labels, finals = _composite_graph(grammar)
    logb = np.hstack(
        [
            _state_logliks(frames, grammar.gap_model),
            _state_logliks(frames, grammar.score_model),
        ]
    )
    t_len, n = logb.shape
    delta = init + logb[0]
    back = np.zeros((t_len, n), dtype=np.int64)
    for t in range(1, t_len):
        scores = delta[:, None] + loga
        back[t] = scores.argmax(axis=0)
        delta = scores[back[t], np.arange(n)] + logb[t]
    final_scores = [delta[f] for f in finals]
    best_final = finals[int(np.argmax(final_scores))]
    best = float(delta[best_final])
    if not np.isfinite(best):
        raise AlignmentError(
            "no admissible alignment (sequence shorter than a zone model?)"
        )
    states = np.zeros(t_len, dtype=np.int64)
    states[-1] = best_final
    for t in range(t_len - 1, 0, -1):
        states[t - 1] = back[t, states[t]]
    frame_labels = labels[states]
    segments = []
    start = 0
    for t in range(1, t_len):
        if frame_labels[t] != frame_labels[t - 1]:
            segments.append(ZoneSegment(str(frame_labels[start]), start, t - 1))
            start = t
    segments.append(ZoneSegment(str(frame_labels[start]), start, t_len - 1))
    return ZoneAlignment(segments, best)


def train_filler_grammar(
    segments_by_label, n_states=4, n_mixtures=2, iters=8, switch_prob=0.1
):
    """Fit both zone models from pooled labelled segments.

    Segments shorter than the state count cannot thread the left-to-right
    chain and are dropped.
    """
    models = {}
    for label in (LABEL_GAP, LABEL_SCORE):
        segs = [
            np.asarray(s, dtype=np.float64)
            for s in segments_by_label.get(label, [])
            if len(s) >= n_states
        ]
        if not segs:
            raise DataError(f"no usable training segments for label {label!r}")
        init = hmm_init_flat(segs, n_states)
        models[label], _ = baum_welch(
            segs, init, iters=iters, mixture_target=n_mixtures
        )
    return FillerGrammar(
        score_model=models[LABEL_SCORE],
        gap_model=models[LABEL_GAP],
        switch_prob=switch_prob,
    )


def realign_retrain(strips, grammar, rounds, iters=3):
    """Iterative forced alignment and zone-model retraining.

    Each round aligns every strip, re-pools frames per label and continues
    Baum-Welch training of both label models on the new pools.  Returns
    ``(grammar, trace)`` where ``trace[r]`` is the total alignment
    log-likelihood before round ``r`` (plus one final entry); the sequence
    is non-decreasing for well-posed data.
    """
    strips = [np.asarray(s, dtype=np.float64) for s in strips]
    trace = []
    for _ in range(rounds):
        aligns = [forced_align(s, grammar) for s in strips]
        trace.append(sum(a.log_likelihood for a in aligns))
        pools = {LABEL_GAP: [], LABEL_SCORE: []}
        for strip, align in zip(strips, aligns):
            for seg in align.segments:
                pools[seg.label].append(strip[seg.start : seg.end + 1])
        new_models = {}
        for label, model in (
            (LABEL_GAP, grammar.gap_model),
            (LABEL_SCORE, grammar.score_model),
        ):
            segs = [p for p in pools[label] if len(p) >= model.n_states]
            if segs:
                new_models[label], _ = baum_welch(segs, model, iters=iters)
            else:
                new_models[label] = model
        grammar = replace(
            grammar,
            gap_model=new_models[LABEL_GAP],
            score_model=new_models[LABEL_SCORE],
        )
    if rounds:
        trace.append(
            sum(forced_align(s, grammar).log_likelihood for s in strips)
        )
    return grammar, trace


# ---------------------------------------------------------------------------
# Model files: magic, u32 version, u32 D, u32 S, u32 M, then pi, A and the
# per-state weights/means/variances as little-endian float64.
# ---------------------------------------------------------------------------

_HMM_MAGIC = b"SCRIBHMM"
_GRAMMAR_MAGIC = b"SCRIBGRM"
_MODEL_VERSION = 1


def _hmm_to_bytes(hmm):
    if any(g.n_components != hmm.n_mixtures for g in hmm.emissions):
        raise ValueError("model file format requires one mixture count per model")
    parts = [
        _HMM_MAGIC,
        struct.pack(
            "<IIII", _MODEL_VERSION, hmm.dim, hmm.n_states, hmm.n_mixtures
        ),
        np.ascontiguousarray(hmm.initial, dtype="<f8").tobytes(),
        np.ascontiguousarray(hmm.transitions, dtype="<f8").tobytes(),
    ]
    for g in hmm.emissions:
        parts.append(np.ascontiguousarray(g.weights, dtype="<f8").tobytes())
        parts.append(np.ascontiguousarray(g.means, dtype="<f8").tobytes())
        parts.append(np.ascontiguousarray(g.variances, dtype="<f8").tobytes())
    return b"".join(parts)


def _hmm_from_stream(fh, path):
    magic = fh.read(len(_HMM_MAGIC))
    if magic != _HMM_MAGIC:
        raise FormatError(f"not an HMM model file: {path}")
    version, d, s, m = struct.unpack("<IIII", fh.read(16))
    if version != _MODEL_VERSION:
        raise FormatError(f"unsupported model version {version}")

    def arr(count, shape):
        data = np.frombuffer(fh.read(8 * count), dtype="<f8")
        if data.size != count:
            raise FormatError(f"truncated model file: {path}")
        return data.reshape(shape).copy()

    initial = arr(s, (s,))
    transitions = arr(s * s, (s, s))
    emissions = []
    for _ in range(s):
        w = arr(m, (m,))
        mu = arr(m * d, (m, d))
        var = arr(m * d, (m, d))
        emissions.append(GmmParams(w, mu, var))
    return HmmParams(initial, transitions, emissions)


def save_hmm(hmm, path):
    with open(path, "wb") as fh:
        fh.write(_hmm_to_bytes(hmm))
    return path


def load_hmm(path):
    with open(path, "rb") as fh:
        return _hmm_from_stream(fh, path)


def save_grammar(grammar, path):
    with open(path, "wb") as fh:
        fh.write(_GRAMMAR_MAGIC)
        fh.write(
            struct.pack(
                "<IdBB",
                _MODEL_VERSION,
                grammar.switch_prob,
                int(grammar.enter_gap),
                int(grammar.enter_score),
            )
        )
        fh.write(_hmm_to_bytes(grammar.gap_model))
        fh.write(_hmm_to_bytes(grammar.score_model))
    return path


def load_grammar(path):
    with open(path, "rb") as fh:
        magic = fh.read(len(_GRAMMAR_MAGIC))
        if magic != _GRAMMAR_MAGIC:
            raise FormatError(f"not a grammar file: {path}")
        version, switch_prob, enter_gap, enter_score = struct.unpack(
            "<IdBB", fh.read(14)
        )
        if version != _MODEL_VERSION:
            raise FormatError(f"unsupported grammar version {version}")
        gap = _hmm_from_stream(fh, path)
        score = _hmm_from_stream(fh, path)
    return FillerGrammar(
        score_model=score,
        gap_model=gap,
        switch_prob=switch_prob,
        enter_gap=bool(enter_gap),
        enter_score=bool(enter_score),
    )
