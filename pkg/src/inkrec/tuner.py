"""Decoder weight tuning with batched Gaussian-process bandits.

Recognition quality is treated as a black-box function of the
feature-function weights. A small GP surrogate with a squared-exponential
kernel is fit to the trials seen so far, batches of expected-improvement
maximizers are proposed and evaluated, and several independent studies
race; the best trial across all of them wins.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np
from scipy.linalg import cho_solve, cholesky, solve_triangular
from scipy.special import ndtr

from .decoder import DecoderWeights, FeatureFunctionSet, beam_search
from .metrics import character_error_rate
from .model_io import ModelBundle
from .net import forward

WEIGHT_NAMES = ("char_lm", "word_lm", "char_class")

SEED_TRIALS = 8
DEFAULT_BATCH = 4
CANDIDATES = 256
REFINE_STEPS = 16

# Shrunk study schedule for desk-scale runs; the full-size default
# lives in tune()'s signature.
DESK_STUDIES = 3
DESK_TRIALS = 60

_JITTER = 1e-12
_LENGTH_GRID = (0.05, 0.1, 0.2, 0.5, 1.0, 2.0)
_SIGNAL_GRID = (0.25, 1.0, 4.0)
_NOISE_GRID = (1e-6, 1e-4, 1e-2)


class EmptyTuningSet(ValueError):
    """Tuning needs at least one held-out item."""


@dataclass(frozen=True)
class SearchSpace:
    """Axis-aligned box of weight values, one closed interval per name."""

    names: tuple
    bounds: tuple

    def __post_init__(self):
        if not self.names or len(self.names) != len(self.bounds):
            raise ValueError("need one (lo, hi) interval per weight name")
        for lo, hi in self.bounds:
            if not (np.isfinite(lo) and np.isfinite(hi) and lo < hi):
                raise ValueError(f"bad interval [{lo}, {hi}]")

    @property
    def dim(self) -> int:
        return len(self.names)

    def clip(self, point):
        lo, hi = self._corners()
        return np.minimum(np.maximum(np.asarray(point, dtype=np.float64), lo), hi)

    def from_unit(self, z):
        lo, hi = self._corners()
        return lo + np.asarray(z, dtype=np.float64) * (hi - lo)

    def to_unit(self, point):
        lo, hi = self._corners()
        return (np.asarray(point, dtype=np.float64) - lo) / (hi - lo)

    def _corners(self):
        lo = np.array([b[0] for b in self.bounds], dtype=np.float64)
        hi = np.array([b[1] for b in self.bounds], dtype=np.float64)
        return lo, hi


def default_space() -> SearchSpace:
    return SearchSpace(WEIGHT_NAMES, ((0.0, 10.0),) * len(WEIGHT_NAMES))


@dataclass(frozen=True)
class Trial:
    weights: tuple
    objective: float
    study: int
    index: int


@dataclass
class TuneResult:
    best: Trial
    trials: list


class GPSurrogate:
    """GP regression with a squared-exponential kernel and constant mean.

    Holds a Cholesky factor of the noisy kernel matrix; posterior queries
    are vectorized over rows. Variance is the latent-function variance and
    is clamped at zero.
    """

    def __init__(self, x, y, length_scale, signal_var, noise_var):
        self.x = np.atleast_2d(np.asarray(x, dtype=np.float64))
        self.y = np.asarray(y, dtype=np.float64)
        if self.x.shape[0] != self.y.shape[0]:
            raise ValueError("points and values must align")
        self.length_scale = float(length_scale)
        self.signal_var = float(signal_var)
        self.noise_var = float(noise_var)
        self._mean = float(self.y.mean())
        k = self.signal_var * _se_kernel(self.x, self.x, self.length_scale)
        k[np.diag_indices_from(k)] += self.noise_var + _JITTER
        self._chol = cholesky(k, lower=True)
        self._alpha = cho_solve((self._chol, True), self.y - self._mean)

    def posterior(self, xq):
        """Mean and variance arrays for query rows xq (m, d)."""
        xq = np.atleast_2d(np.asarray(xq, dtype=np.float64))
        ks = self.signal_var * _se_kernel(xq, self.x, self.length_scale)
        mean = self._mean + ks @ self._alpha
        v = solve_triangular(self._chol, ks.T, lower=True)
        var = self.signal_var - np.sum(v * v, axis=0)
        return mean, np.maximum(var, 0.0)

    def log_marginal_likelihood(self) -> float:
        r = self.y - self._mean
        n = self.y.shape[0]
        return float(
            -0.5 * r @ self._alpha
            - np.sum(np.log(np.diag(self._chol)))
            - 0.5 * n * math.log(2.0 * math.pi)
        )

    def with_observation(self, x_new, y_new) -> "GPSurrogate":
        return GPSurrogate(
            np.vstack([self.x, np.atleast_2d(x_new)]),
            np.append(self.y, y_new),
            self.length_scale,
            self.signal_var,
            self.noise_var,
        )


def _se_kernel(a, b, length_scale):
    sq = (
        np.sum(a * a, axis=1)[:, None]
        + np.sum(b * b, axis=1)[None, :]
        - 2.0 * a @ b.T
    )
    return np.exp(-np.maximum(sq, 0.0) / (2.0 * length_scale**2))


def fit_surrogate(points, values) -> GPSurrogate:
    """Pick kernel hyperparameters by marginal likelihood on a small grid.

    Signal and noise variances are scaled to the sample variance of the
    observed values so the grid covers any objective range.
    """
    y = np.asarray(values, dtype=np.float64)
    scale = float(np.var(y))
    if not np.isfinite(scale) or scale <= 0.0:
        scale = 1.0
    best = None
    for ls in _LENGTH_GRID:
        for sf in _SIGNAL_GRID:
            for nf in _NOISE_GRID:
                gp = GPSurrogate(points, y, ls, sf * scale, nf * scale)
                lml = gp.log_marginal_likelihood()
                if best is None or lml > best[0]:
                    best = (lml, gp)
    return best[1]


def ei_closed_form(mean, variance, best):
    """E[max(best - f, 0)] for Gaussian f, elementwise.

    Zero variance collapses to the hinge max(best - mean, 0).
    """
    mean = np.asarray(mean, dtype=np.float64)
    sd = np.sqrt(np.maximum(np.asarray(variance, dtype=np.float64), 0.0))
    gap = best - mean
    safe = np.where(sd > 0.0, sd, 1.0)
    # both tails saturate far before |z| = 39, so clipping costs nothing
    z = np.clip(np.where(sd > 0.0, gap / safe, 0.0), -39.0, 39.0)
    pdf = np.exp(-0.5 * z * z) / math.sqrt(2.0 * math.pi)
    ei = np.where(sd > 0.0, gap * ndtr(z) + sd * pdf, np.maximum(gap, 0.0))
    return np.maximum(ei, 0.0)


def expected_improvement(surrogate: GPSurrogate, x, best_so_far) -> float:
    mean, var = surrogate.posterior(np.atleast_2d(x))
    return float(ei_closed_form(mean, var, best_so_far)[0])


def _propose(surrogate, rng, dim, best):
    """One EI maximizer: best of random candidates, then coordinate polish.

    The polish probes both neighbors along one axis per step with a width
    that halves every full cycle, so late steps make sub-percent moves.
    """
    cands = rng.uniform(size=(CANDIDATES, dim))
    mean, var = surrogate.posterior(cands)
    scores = ei_closed_form(mean, var, best)
    pick = int(np.argmax(scores))
    z = cands[pick].copy()
    score = float(scores[pick])
    for step in range(REFINE_STEPS):
        axis = step % dim
        width = 0.25 * 0.5 ** (step // dim)
        for delta in (-width, width):
            probe = z.copy()
            probe[axis] = min(1.0, max(0.0, probe[axis] + delta))
            m, v = surrogate.posterior(probe[None, :])
            s = float(ei_closed_form(m, v, best)[0])
            if s > score:
                z, score = probe, s
    return z


def run_study(
    objective: Callable,
    space: SearchSpace,
    n_trials: int,
    batch: int = DEFAULT_BATCH,
    seed=0,
    study: int = 0,
) -> list:
    """One study: seed points, then batched EI proposals until budget runs out.

    The first seed is the origin clipped into the box, so the all-zero
    weight configuration is always among the trials; the rest are uniform.
    Within a batch, already-proposed points are folded into the surrogate
    at the incumbent value so the batch spreads out instead of piling onto
    one maximizer. Deterministic given seed.
    """
    if n_trials < 1:
        raise ValueError("n_trials must be positive")
    if batch < 1:
        raise ValueError("batch must be positive")
    rng = np.random.default_rng(seed)
    dim = space.dim
    unit_points = []
    trials = []

    def evaluate(z):
        point = space.from_unit(z)
        value = float(objective(point))
        trials.append(
            Trial(
                weights=tuple(float(v) for v in point),
                objective=value,
                study=study,
                index=len(trials),
            )
        )
        unit_points.append(np.asarray(z, dtype=np.float64))

    seeds = [space.to_unit(space.clip(np.zeros(dim)))]
    seeds += [rng.uniform(size=dim) for _ in range(SEED_TRIALS - 1)]
    for z in seeds[:n_trials]:
        evaluate(z)

    while len(trials) < n_trials:
        x_obs = np.vstack(unit_points)
        y_obs = np.array([t.objective for t in trials])
        gp = fit_surrogate(x_obs, y_obs)
        incumbent = float(y_obs.min())
        liar = gp
        proposals = []
        for _ in range(min(batch, n_trials - len(trials))):
            z = _propose(liar, rng, dim, incumbent)
            proposals.append(z)
            liar = liar.with_observation(z, incumbent)
        for z in proposals:
            evaluate(z)
    return trials


def minimize(
    objective: Callable,
    space: SearchSpace,
    *,
    n_studies: int,
    n_trials: int,
    batch: int = DEFAULT_BATCH,
    seed: int = 0,
) -> TuneResult:
    """Independent restarts with distinct derived seeds; best trial wins."""
    if n_studies < 1:
        raise ValueError("n_studies must be positive")
    if seed < 0:
        raise ValueError("seed must be non-negative")
    all_trials = []
    for study in range(n_studies):
        child = np.random.SeedSequence([seed, study])
        all_trials.extend(
            run_study(objective, space, n_trials, batch=batch, seed=child, study=study)
        )
    best = min(all_trials, key=lambda t: (t.objective, t.study, t.index))
    return TuneResult(best=best, trials=all_trials)


def weights_at(space: SearchSpace, point, beam_width: int = 16) -> DecoderWeights:
    """Map a named search point onto DecoderWeights; unsearched names stay 0."""
    values = dict(zip(space.names, point))
    unknown = set(values) - set(WEIGHT_NAMES)
    if unknown:
        raise ValueError(f"unknown weight names: {sorted(unknown)}")
    filled = {name: float(values.get(name, 0.0)) for name in WEIGHT_NAMES}
    return DecoderWeights(beam_width=beam_width, **filled)


def cer_objective(
    model: ModelBundle,
    tuning_set: Sequence,
    features: FeatureFunctionSet,
    *,
    space: SearchSpace | None = None,
    beam_width: int = 16,
) -> Callable:
    """CER over the tuning set as a function of a weight point.

    Items are (feature matrix, reference text) pairs. Network outputs are
    computed once up front; each objective call only re-runs the decoder.
    """
    if not tuning_set:
        raise EmptyTuningSet("no tuning items")
    space = space if space is not None else default_space()
    items = [
        (forward(model.spec, model.params, np.asarray(inputs, dtype=np.float64)), text)
        for inputs, text in tuning_set
    ]
    refs = [text for _, text in items]

    def objective(point):
        weights = weights_at(space, point, beam_width=beam_width)
        hyps = [
            beam_search(logits, model.chars, features, weights).text
            for logits, _ in items
        ]
        return character_error_rate(refs, hyps)

    return objective


def tune(
    model: ModelBundle,
    tuning_set: Sequence,
    features: FeatureFunctionSet,
    space: SearchSpace | None = None,
    n_studies: int = 7,
    n_trials: int = 500,
    *,
    batch: int = DEFAULT_BATCH,
    beam_width: int = 16,
    seed: int = 0,
) -> DecoderWeights:
    """Best decoder weights found across all studies, as measured on held-out items.

    The tuning set must be disjoint from the data the model was trained on,
    otherwise the weights overfit quirks the network has already absorbed.
    """
    space = space if space is not None else default_space()
    objective = cer_objective(
        model, tuning_set, features, space=space, beam_width=beam_width
    )
    result = minimize(
        objective, space, n_studies=n_studies, n_trials=n_trials, batch=batch, seed=seed
    )
    return weights_at(space, result.best.weights, beam_width=beam_width)


def tuning_report(space: SearchSpace, trials: Sequence) -> dict:
    """JSON-ready record of every trial plus the winner."""
    rows = [
        {
            "study": t.study,
            "trial": t.index,
            "weights": dict(zip(space.names, t.weights)),
            "objective": t.objective,
        }
        for t in trials
    ]
    best = min(trials, key=lambda t: (t.objective, t.study, t.index))
    return {
        "space": {name: list(b) for name, b in zip(space.names, space.bounds)},
        "trials": rows,
        "best": {
            "study": best.study,
            "trial": best.index,
            "weights": dict(zip(space.names, best.weights)),
            "objective": best.objective,
        },
    }
