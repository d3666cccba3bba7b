"""Stacked recurrent classifiers: forward, exact BPTT, serialization.

A model is a plain dict of named float64 arrays (``l{i}.Wx``, ``l{i}.Wh``,
``l{i}.b``, ``out.W``, ``out.b``) plus an immutable :class:`RnnSpec`.  The
read-out is linear into 3 classes with a softmax; the training loss is the
mean per-step cross-entropy over the sequence.

Raw series are fed as first differences normalized by the series' own
median absolute increment, which makes classification invariant to the
scale of the input series.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .. import modelio
from . import cells

CLASS_LABELS = np.array([-1, 0, 1], dtype=np.int8)


class InputError(ValueError):
    """Non-finite or malformed model inputs."""


@dataclass(frozen=True)
class RnnSpec:
    cell: str = "gru"
    n_layers: int = 2
    hidden_dim: int = 20
    dropout: float = 0.0
    out_classes: int = 3

    def validate(self) -> None:
        if self.cell not in cells.GATE_MULT:
            raise ValueError(f"unknown cell {self.cell!r}")
        if self.n_layers < 1 or self.hidden_dim < 1:
            raise ValueError("n_layers and hidden_dim must be >= 1")
        if not 0.0 <= self.dropout < 1.0:
            raise ValueError("dropout must lie in [0, 1)")
        if self.out_classes != 3:
            raise ValueError("only 3-class output is supported")

    def to_dict(self) -> dict:
        return {"cell": self.cell, "n_layers": self.n_layers,
                "hidden_dim": self.hidden_dim, "dropout": self.dropout,
                "out_classes": self.out_classes}

    @classmethod
    def from_dict(cls, doc: dict) -> "RnnSpec":
        spec = cls(**doc)
        spec.validate()
        return spec


def param_shapes(spec: RnnSpec, input_dim: int = 1) -> dict[str, tuple[int, ...]]:
    g = cells.GATE_MULT[spec.cell]
    H = spec.hidden_dim
    shapes: dict[str, tuple[int, ...]] = {}
    d = input_dim
    for layer in range(spec.n_layers):
        shapes[f"l{layer}.Wx"] = (g * H, d)
        shapes[f"l{layer}.Wh"] = (g * H, H)
        shapes[f"l{layer}.b"] = (g * H,)
        d = H
    shapes["out.W"] = (spec.out_classes, H)
    shapes["out.b"] = (spec.out_classes,)
    return shapes


def init_params(spec: RnnSpec, rng: np.random.Generator,
                input_dim: int = 1) -> dict[str, np.ndarray]:
    """Uniform init in +-1/sqrt(hidden_dim); biases start at zero."""
    spec.validate()
    bound = 1.0 / np.sqrt(spec.hidden_dim)
    params = {}
    for name, shape in param_shapes(spec, input_dim).items():
        if name.endswith(".b"):
            params[name] = np.zeros(shape)
        else:
            params[name] = rng.uniform(-bound, bound, size=shape)
    return params


def _softmax_rows(z: np.ndarray) -> np.ndarray:
    z = z - z.max(axis=1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=1, keepdims=True)


def forward(params: dict, spec: RnnSpec, inputs: np.ndarray,
            dropout: float = 0.0, rng: np.random.Generator | None = None):
    """Run the stack over one sequence.

    Returns ``(probs, cache)`` where ``probs`` has one probability triple
    per step (rows sum to 1).  ``dropout`` > 0 applies inverted dropout to
    the hidden outputs between stacked layers (never inside the recurrence)
    and requires ``rng``; inference is a pure function of the arguments.
    """
    x = np.asarray(inputs, dtype=float)
    if x.ndim == 1:
        x = x[:, None]
    if x.ndim != 2 or x.shape[0] == 0:
        raise InputError("inputs must be a non-empty 1-D or 2-D sequence")
    if not np.all(np.isfinite(x)):
        raise InputError("inputs contain NaN or Inf")
    if dropout > 0.0 and rng is None:
        raise ValueError("dropout requires an rng")

    fwd = cells.FORWARD[spec.cell]
    layer_caches = []
    masks: list[np.ndarray | None] = []
    for layer in range(spec.n_layers):
        h, cache = fwd(params[f"l{layer}.Wx"], params[f"l{layer}.Wh"],
                       params[f"l{layer}.b"], x)
        layer_caches.append(cache)
        if dropout > 0.0 and layer < spec.n_layers - 1:
            mask = (rng.random(h.shape) >= dropout) / (1.0 - dropout)
            x = h * mask
        else:
            mask = None
            x = h
        masks.append(mask)

    logits = x @ params["out.W"].T + params["out.b"]
    probs = _softmax_rows(logits)
    cache = {"layers": layer_caches, "masks": masks, "top": x, "probs": probs}
    return probs, cache


def sequence_loss(probs: np.ndarray, labels: np.ndarray) -> float:
    """Mean per-step cross-entropy against labels in {-1, 0, +1}."""
    targets = np.asarray(labels, dtype=int) + 1
    picked = probs[np.arange(len(targets)), targets]
    return float(-np.mean(np.log(np.maximum(picked, 1e-300))))


def backward(params: dict, spec: RnnSpec, cache: dict,
             labels: np.ndarray) -> dict[str, np.ndarray]:
    """Exact gradients of the mean per-step cross-entropy."""
    probs = cache["probs"]
    T = probs.shape[0]
    targets = np.asarray(labels, dtype=int) + 1
    if targets.shape[0] != T:
        raise ValueError(f"target length {targets.shape[0]} != sequence length {T}")

    dlogits = probs.copy()
    dlogits[np.arange(T), targets] -= 1.0
    dlogits /= T

    grads = {
        "out.W": dlogits.T @ cache["top"],
        "out.b": dlogits.sum(axis=0),
    }
    dh = dlogits @ params["out.W"]
    bwd = cells.BACKWARD[spec.cell]
    for layer in range(spec.n_layers - 1, -1, -1):
        mask = cache["masks"][layer]
        if mask is not None:
            dh = dh * mask
        dWx, dWh, db, dx = bwd(params[f"l{layer}.Wx"], params[f"l{layer}.Wh"],
                               cache["layers"][layer], dh)
        grads[f"l{layer}.Wx"] = dWx
        grads[f"l{layer}.Wh"] = dWh
        grads[f"l{layer}.b"] = db
        dh = dx
    return grads


# ---------------------------------------------------------------------------
# preprocessing and series-level API
# ---------------------------------------------------------------------------

def series_to_inputs(y: np.ndarray, scale: float | None = None):
    """First differences scaled to unit typical magnitude.

    ``scale=None`` uses the series' own median absolute increment (falling
    back to 1 for constant series); passing a scale reuses a stored one.
    Returns ``(inputs, scale_used)``.
    """
    y = np.asarray(y, dtype=float)
    d = np.concatenate([[0.0], np.diff(y)])
    if scale is None:
        scale = float(np.median(np.abs(d[1:]))) if len(d) > 1 else 1.0
        if not np.isfinite(scale) or scale <= 0.0:
            scale = 1.0
    return d / scale, scale


def classify_series(params: dict, spec: RnnSpec, y: np.ndarray):
    """Predict per-step labels and probability triples for a raw series."""
    inputs, _ = series_to_inputs(y)
    probs, _ = forward(params, spec, inputs)
    labels = CLASS_LABELS[np.argmax(probs, axis=1)]
    return labels, probs


# ---------------------------------------------------------------------------
# serialization
# ---------------------------------------------------------------------------

def save_model(path, spec: RnnSpec, params: dict, meta: dict | None = None) -> None:
    payload = {
        "spec": spec.to_dict(),
        "params": {k: v.tolist() for k, v in sorted(params.items())},
        "meta": dict(meta or {}),
    }
    modelio.save_container(path, "rnn", payload)


def load_model(path):
    """Load a model file; returns ``(spec, params, meta)``.

    Array shapes are validated against the declared spec so truncated or
    edited files fail loudly.
    """
    doc = modelio.load_container(path, expect_kind="rnn")
    try:
        spec = RnnSpec.from_dict(doc["spec"])
        raw = doc["params"]
    except (KeyError, TypeError, ValueError) as exc:
        raise modelio.ModelFormatError(f"bad rnn model file {path}: {exc}") from exc
    expected = param_shapes(spec)
    if set(raw) != set(expected):
        raise modelio.ModelFormatError(
            f"parameter names {sorted(raw)} do not match spec {sorted(expected)}")
    params = {}
    for name, shape in expected.items():
        arr = np.asarray(raw[name], dtype=float)
        if arr.shape != shape:
            raise modelio.ModelFormatError(
                f"shape mismatch for {name}: file has {arr.shape}, spec needs {shape}")
        params[name] = arr
    return spec, params, doc.get("meta", {})
