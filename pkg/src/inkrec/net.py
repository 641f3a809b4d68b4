"""Bidirectional LSTM stack with CTC training.

Each layer runs the sequence in both directions and concatenates the
per-step outputs; a linear projection produces per-step logits over the
character classes plus a trailing blank. Training is minibatch Adam with
global gradient-norm clipping, inverted dropout, and early stopping on the
evaluation character error rate. Everything runs in float64 so results are
bit-reproducible across backends.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ._backend import kernels
from .metrics import edit_distance

INIT_SCALE = 0.08
FORGET_BIAS = 1.0
ADAM_BETA1 = 0.9
ADAM_BETA2 = 0.999
ADAM_EPS = 1e-8


class ShapeMismatch(ValueError):
    """Input rows do not match the network's input dimension."""


class InfeasibleLabel(Exception):
    """The label cannot be aligned: the sequence has too few frames.

    The loss is +infinity and no gradient exists; callers skip or filter
    such pairs.
    """


class EmptyDataset(ValueError):
    """Training requires at least one example."""


@dataclass(frozen=True)
class NetworkSpec:
    """Architecture description; output dimension is num_classes + 1."""

    input_dim: int
    layers: int
    nodes_per_layer: int
    num_classes: int

    def __post_init__(self):
        if self.layers < 1 or self.nodes_per_layer < 1 or self.num_classes < 1:
            raise ValueError("layers, nodes and classes must be positive")
        if self.input_dim < 1:
            raise ValueError("input_dim must be positive")

    @property
    def output_dim(self) -> int:
        return self.num_classes + 1

    @property
    def blank(self) -> int:
        return self.num_classes


@dataclass(frozen=True)
class TrainConfig:
    batch_size: int = 8
    learning_rate: float = 1e-4
    grad_clip_l2: float = 9.0
    dropout_rate: float = 0.5
    patience: int = 20
    eval_every: int = 100
    max_steps: int = 100_000
    seed: int = 0


@dataclass
class TrainResult:
    params: dict
    history: list = field(default_factory=list)  # (step, train_loss, eval_cer)
    best_cer: float = float("inf")
    steps: int = 0


def init_parameters(spec: NetworkSpec, seed: int = 0) -> dict:
    """Fresh weights: uniform in [-0.08, 0.08], forget-gate bias 1."""
    rng = np.random.default_rng(seed)
    H = spec.nodes_per_layer
    params = {}
    in_dim = spec.input_dim
    for layer in range(spec.layers):
        for d in ("fwd", "bwd"):
            params[f"l{layer}.{d}.w_x"] = rng.uniform(
                -INIT_SCALE, INIT_SCALE, size=(in_dim, 4 * H)
            )
            params[f"l{layer}.{d}.w_h"] = rng.uniform(
                -INIT_SCALE, INIT_SCALE, size=(H, 4 * H)
            )
            b = rng.uniform(-INIT_SCALE, INIT_SCALE, size=4 * H)
            b[H : 2 * H] = FORGET_BIAS
            params[f"l{layer}.{d}.b"] = b
        in_dim = 2 * H
    params["proj.w"] = rng.uniform(
        -INIT_SCALE, INIT_SCALE, size=(in_dim, spec.output_dim)
    )
    params["proj.b"] = rng.uniform(-INIT_SCALE, INIT_SCALE, size=spec.output_dim)
    return params


def _run_direction(x, w_x, w_h, b, reverse):
    kern = kernels()
    seq = x[::-1] if reverse else x
    gates_in = seq @ w_x + b
    H = w_h.shape[0]
    h, c, gates = kern.lstm_forward(gates_in, w_h, np.zeros(H), np.zeros(H))
    return (h[::-1] if reverse else h), h, c, gates


def forward(spec, params, x, *, dropout_rate=0.0, dropout_rng=None, cache=None):
    """Per-step logits for one feature sequence (T, input_dim).

    Dropout fires only when both a positive rate and an rng are supplied;
    masks go into the cache so the backward pass reuses them.
    """
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 2 or x.shape[1] != spec.input_dim:
        raise ShapeMismatch(
            f"expected (T, {spec.input_dim}) input, got {x.shape}"
        )
    y = x
    for layer in range(spec.layers):
        h_f, raw_f, c_f, g_f = _run_direction(
            y,
            params[f"l{layer}.fwd.w_x"],
            params[f"l{layer}.fwd.w_h"],
            params[f"l{layer}.fwd.b"],
            reverse=False,
        )
        h_b, raw_b, c_b, g_b = _run_direction(
            y,
            params[f"l{layer}.bwd.w_x"],
            params[f"l{layer}.bwd.w_h"],
            params[f"l{layer}.bwd.b"],
            reverse=True,
        )
        merged = np.concatenate([h_f, h_b], axis=1)
        mask = None
        if dropout_rate > 0.0 and dropout_rng is not None:
            keep = dropout_rng.random(merged.shape) >= dropout_rate
            mask = keep / (1.0 - dropout_rate)
            merged = merged * mask
        if cache is not None:
            cache.append(
                {
                    "x": y,
                    "raw_f": raw_f,
                    "c_f": c_f,
                    "g_f": g_f,
                    "raw_b": raw_b,
                    "c_b": c_b,
                    "g_b": g_b,
                    "mask": mask,
                }
            )
        y = merged
    logits = y @ params["proj.w"] + params["proj.b"]
    if cache is not None:
        cache.append({"proj_in": y})
    return logits


def backward(spec, params, cache, dlogits):
    """Gradients for every parameter given d(loss)/d(logits)."""
    kern = kernels()
    grads = {}
    proj_in = cache[-1]["proj_in"]
    grads["proj.w"] = proj_in.T @ dlogits
    grads["proj.b"] = dlogits.sum(axis=0)
    dy = dlogits @ params["proj.w"].T
    H = spec.nodes_per_layer
    for layer in range(spec.layers - 1, -1, -1):
        entry = cache[layer]
        if entry["mask"] is not None:
            dy = dy * entry["mask"]
        dh_f = dy[:, :H]
        dh_b = dy[:, H:]
        x_in = entry["x"]

        da_f = kern.lstm_backward_da(
            entry["g_f"], entry["c_f"], np.zeros(H), dh_f, params[f"l{layer}.fwd.w_h"]
        )
        h_shift_f = np.vstack([np.zeros(H), entry["raw_f"][:-1]])
        grads[f"l{layer}.fwd.w_x"] = x_in.T @ da_f
        grads[f"l{layer}.fwd.w_h"] = h_shift_f.T @ da_f
        grads[f"l{layer}.fwd.b"] = da_f.sum(axis=0)

        da_b = kern.lstm_backward_da(
            entry["g_b"], entry["c_b"], np.zeros(H), dh_b[::-1],
            params[f"l{layer}.bwd.w_h"],
        )
        x_rev = x_in[::-1]
        h_shift_b = np.vstack([np.zeros(H), entry["raw_b"][:-1]])
        grads[f"l{layer}.bwd.w_x"] = x_rev.T @ da_b
        grads[f"l{layer}.bwd.w_h"] = h_shift_b.T @ da_b
        grads[f"l{layer}.bwd.b"] = da_b.sum(axis=0)

        dy = da_f @ params[f"l{layer}.fwd.w_x"].T
        dy = dy + (da_b @ params[f"l{layer}.bwd.w_x"].T)[::-1]
    return grads


def softmax(logits_row):
    z = np.asarray(logits_row, dtype=np.float64)
    z = z - z.max(axis=-1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=-1, keepdims=True)


def log_softmax(logits):
    z = np.asarray(logits, dtype=np.float64)
    z = z - z.max(axis=-1, keepdims=True)
    return z - np.log(np.exp(z).sum(axis=-1, keepdims=True))


def _count_repeats(label):
    return int(np.sum(np.asarray(label[1:]) == np.asarray(label[:-1]))) if len(label) > 1 else 0


def label_lattice(label, blank):
    """Blank-augmented lattice symbols and the skip-allowed mask."""
    label = np.asarray(label, dtype=np.int64)
    S = 2 * len(label) + 1
    ext = np.full(S, blank, dtype=np.int64)
    ext[1::2] = label
    skip = np.zeros(S, dtype=np.uint8)
    for s in range(3, S, 2):
        if ext[s] != ext[s - 2]:
            skip[s] = 1
    return ext, skip


def ctc_loss(logits, label, blank):
    """Negative log-likelihood of the label and its exact logits gradient."""
    logits = np.asarray(logits, dtype=np.float64)
    label = np.asarray(label, dtype=np.int64)
    T = logits.shape[0]
    if np.any(label < 0) or np.any(label >= blank):
        raise ValueError("label indices must lie in [0, blank)")
    if T < len(label) + _count_repeats(label):
        raise InfeasibleLabel(
            f"{T} frames cannot spell a label of length {len(label)} "
            f"with {_count_repeats(label)} repeats"
        )
    log_probs = log_softmax(logits)
    ext, skip = label_lattice(label, blank)
    logp_ext = np.ascontiguousarray(log_probs[:, ext])
    la, lb, loglik = kernels().ctc_alpha_beta(logp_ext, skip)
    gamma = la + lb - logp_ext
    # fold lattice positions onto classes, then convert the posterior into
    # the softmax-gradient form
    post = np.full((T, logits.shape[1]), -np.inf)
    for s in range(len(ext)):
        post[:, ext[s]] = np.logaddexp(post[:, ext[s]], gamma[:, s])
    grad = softmax(logits)
    grad -= np.exp(post - loglik)
    return -loglik, grad


def greedy_labels(logits, blank):
    """Best-path collapse: argmax per frame, merge runs, drop blanks."""
    best = np.argmax(np.asarray(logits), axis=1)
    out = []
    prev = -1
    for b in best:
        if b != prev and b != blank:
            out.append(int(b))
        prev = b
    return out


def time_reversed_parameters(spec: NetworkSpec, params: dict) -> dict:
    """Parameters that compute exactly the time-reversed logits.

    Swapping each layer's direction pair changes which half of the merged
    output each direction writes, so consumers' input weights swap their
    row halves to match.
    """
    H = spec.nodes_per_layer
    out = {}
    for layer in range(spec.layers):
        for name in ("w_x", "w_h", "b"):
            out[f"l{layer}.fwd.{name}"] = params[f"l{layer}.bwd.{name}"]
            out[f"l{layer}.bwd.{name}"] = params[f"l{layer}.fwd.{name}"]
    for layer in range(1, spec.layers):
        for d in ("fwd", "bwd"):
            w = out[f"l{layer}.{d}.w_x"]
            out[f"l{layer}.{d}.w_x"] = np.vstack([w[H:], w[:H]])
    w = params["proj.w"]
    out["proj.w"] = np.vstack([w[H:], w[:H]])
    out["proj.b"] = params["proj.b"]
    return out


def _global_clip(grads, limit):
    if not np.isfinite(limit):
        return grads
    total = np.sqrt(sum(float(np.sum(g * g)) for g in grads.values()))
    if total > limit:
        scale = limit / total
        return {k: g * scale for k, g in grads.items()}
    return grads


def dataset_cer(spec, params, pairs, charset_size=None):
    """Percent character error of greedy decoding over (features, label) pairs."""
    errors = 0
    total = 0
    for x, label in pairs:
        logits = forward(spec, params, x)
        hyp = greedy_labels(logits, spec.blank)
        errors += edit_distance(hyp, list(label))
        total += len(label)
    return 100.0 * errors / max(total, 1)


def train(spec, dataset, config, eval_set) -> TrainResult:
    """Minibatch Adam with early stopping on eval CER.

    Returns the best-on-eval parameters. Pairs whose label cannot be
    aligned to their frame count are rejected up front.
    """
    data = list(dataset)
    if not data:
        raise EmptyDataset("no training examples")
    for x, label in data:
        if len(x) < len(label) + _count_repeats(label):
            raise InfeasibleLabel(
                f"training pair with {len(x)} frames cannot spell its label"
            )
    rng = np.random.default_rng(config.seed)
    params = init_parameters(spec, seed=config.seed)
    m = {k: np.zeros_like(v) for k, v in params.items()}
    v = {k: np.zeros_like(vv) for k, vv in params.items()}
    result = TrainResult(params={k: p.copy() for k, p in params.items()})
    order = rng.permutation(len(data))
    cursor = 0
    bad_evals = 0
    loss_window = []
    for step in range(1, config.max_steps + 1):
        batch_grads = None
        batch_loss = 0.0
        for _ in range(config.batch_size):
            if cursor >= len(order):
                order = rng.permutation(len(data))
                cursor = 0
            x, label = data[order[cursor]]
            cursor += 1
            cache = []
            logits = forward(
                spec,
                params,
                x,
                dropout_rate=config.dropout_rate,
                dropout_rng=rng,
                cache=cache,
            )
            loss, dlogits = ctc_loss(logits, label, spec.blank)
            grads = backward(spec, params, cache, dlogits)
            batch_loss += loss
            if batch_grads is None:
                batch_grads = grads
            else:
                for k in batch_grads:
                    batch_grads[k] += grads[k]
        inv = 1.0 / config.batch_size
        batch_grads = {k: g * inv for k, g in batch_grads.items()}
        batch_grads = _global_clip(batch_grads, config.grad_clip_l2)
        b1t = 1.0 - ADAM_BETA1**step
        b2t = 1.0 - ADAM_BETA2**step
        for k, g in batch_grads.items():
            m[k] = ADAM_BETA1 * m[k] + (1.0 - ADAM_BETA1) * g
            v[k] = ADAM_BETA2 * v[k] + (1.0 - ADAM_BETA2) * (g * g)
            params[k] -= config.learning_rate * (m[k] / b1t) / (
                np.sqrt(v[k] / b2t) + ADAM_EPS
            )
        loss_window.append(batch_loss * inv)
        if step % config.eval_every == 0 or step == config.max_steps:
            cer = dataset_cer(spec, params, eval_set)
            result.history.append(
                (step, float(np.mean(loss_window)), float(cer))
            )
            loss_window = []
            if cer < result.best_cer:
                result.best_cer = float(cer)
                result.params = {k: p.copy() for k, p in params.items()}
                bad_evals = 0
            else:
                bad_evals += 1
                if bad_evals >= config.patience:
                    break
    result.steps = step
    return result
