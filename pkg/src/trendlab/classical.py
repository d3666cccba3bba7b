"""Non-model trend baselines.

* a dual exponential-moving-average crossover with a no-trend band,
* its generalization: an identity-activation recurrent net whose combined
  recurrent/input weight rows form a stochastic matrix ("convex net"),
* a uniform random (dummy) classifier.

The convex net consumes raw series levels (it is a bank of moving
averages); the crossover does too.  Both are pure at inference.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import modelio
from .simgen import Dataset

_ARGMAX_PREF = (1, 0, 2)  # column order flat, down, up for tie-breaking


class ParameterError(ValueError):
    """Convex-net parameters violate the stochastic-matrix constraints."""


# ---------------------------------------------------------------------------
# moving-average crossover
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class MaConfig:
    """Decay factors of the slow/fast averages plus the no-trend band."""

    mu_slow: float = 0.95
    mu_fast: float = 0.48
    epsilon: float = 0.1

    def validate(self) -> None:
        if not (0.0 < self.mu_fast < self.mu_slow < 1.0):
            raise ValueError(
                f"need 0 < mu_fast < mu_slow < 1, got {self.mu_fast}, {self.mu_slow}")
        if self.epsilon < 0.0:
            raise ValueError(f"epsilon must be >= 0, got {self.epsilon}")


DEFAULT_MA = MaConfig()


def ma_classify(cfg: MaConfig, series) -> np.ndarray:
    """Label +1/-1 when fast minus slow leaves the epsilon band, else 0.

    Both averages follow ``ma <- mu * ma + (1 - mu) * x`` and start at the
    first value, so a constant level never produces a spurious trend.
    """
    cfg.validate()
    x = np.asarray(getattr(series, "y", series), dtype=float)
    if x.size == 0:
        raise ValueError("series must be non-empty")
    slow = np.empty_like(x)
    fast = np.empty_like(x)
    slow[0] = fast[0] = x[0]
    for t in range(1, len(x)):
        slow[t] = cfg.mu_slow * slow[t - 1] + (1.0 - cfg.mu_slow) * x[t]
        fast[t] = cfg.mu_fast * fast[t - 1] + (1.0 - cfg.mu_fast) * x[t]
    gap = fast - slow
    labels = np.zeros(len(x), dtype=np.int8)
    labels[gap > cfg.epsilon] = 1
    labels[gap < -cfg.epsilon] = -1
    return labels


def ma_grid_search(dataset: Dataset, slow_grid, fast_grid, eps_grid):
    """Pick the config with the best overall median label loss on a dataset."""
    best = None
    for mu_s in slow_grid:
        for mu_f in fast_grid:
            if not mu_f < mu_s:
                continue
            for eps in eps_grid:
                cfg = MaConfig(mu_s, mu_f, eps)
                losses = [
                    float(np.mean(ma_classify(cfg, s) != s.labels)) for s in dataset
                ]
                score = float(np.median(losses))
                if best is None or score < best[0]:
                    best = (score, cfg)
    if best is None:
        raise ValueError("empty parameter grid")
    return best[1], best[0]


# ---------------------------------------------------------------------------
# convex net
# ---------------------------------------------------------------------------

@dataclass
class ConvexNetParams:
    """Identity-activation recurrent bank with stochastic weight rows.

    Row i of ``[W_hh | w_ih]`` sums to exactly 1 with nonnegative entries,
    so each state coordinate is a convex combination of the previous state
    and the current input (a generalized moving average).
    """

    W_hh: np.ndarray
    w_ih: np.ndarray
    W_out: np.ndarray

    def __post_init__(self) -> None:
        self.W_hh = np.asarray(self.W_hh, dtype=float)
        self.w_ih = np.asarray(self.w_ih, dtype=float)
        self.W_out = np.asarray(self.W_out, dtype=float)

    @property
    def hidden_dim(self) -> int:
        return self.w_ih.shape[0]

    def validate(self) -> None:
        m = self.hidden_dim
        if self.W_hh.shape != (m, m) or self.W_out.shape != (3, m):
            raise ParameterError("inconsistent convex-net shapes")
        if np.any(self.W_hh < 0) or np.any(self.w_ih < 0):
            raise ParameterError("weights must be nonnegative")
        rows = self.W_hh.sum(axis=1) + self.w_ih
        if np.any(np.abs(rows - 1.0) > 1e-12):
            raise ParameterError("rows of [W_hh | w_ih] must sum to exactly 1")
        if spectral_radius(self.W_hh) >= 1.0:
            raise ParameterError("spectral radius of W_hh must be < 1")

    def to_payload(self) -> dict:
        return {"W_hh": self.W_hh.tolist(), "w_ih": self.w_ih.tolist(),
                "W_out": self.W_out.tolist()}

    @classmethod
    def from_payload(cls, doc: dict) -> "ConvexNetParams":
        params = cls(np.asarray(doc["W_hh"]), np.asarray(doc["w_ih"]),
                     np.asarray(doc["W_out"]))
        params.validate()
        return params


def spectral_radius(W: np.ndarray, iters: int = 200) -> float:
    """Largest absolute eigenvalue estimated by power iteration."""
    v = np.full(W.shape[0], 1.0 / np.sqrt(W.shape[0]))
    lam = 0.0
    for _ in range(iters):
        w = W @ v
        norm = np.linalg.norm(w)
        if norm == 0.0:
            return 0.0
        v = w / norm
        lam = norm
    return float(lam)


def ema_bank(alphas) -> ConvexNetParams:
    """Diagonal convex net holding one EMA per coordinate."""
    alphas = np.asarray(alphas, dtype=float)
    m = len(alphas)
    params = ConvexNetParams(np.diag(alphas), 1.0 - alphas, np.zeros((3, m)))
    if m >= 2:
        # compare the slowest and fastest averages for the trend read-out
        hi, lo = int(np.argmax(alphas)), int(np.argmin(alphas))
        params.W_out[2, lo] = 1.0
        params.W_out[2, hi] = -1.0
        params.W_out[0] = -params.W_out[2]
    return params


def project_stochastic_rows(W_hh: np.ndarray, w_ih: np.ndarray):
    """Clip negatives to 0, renormalize each row of [W_hh | w_ih] to sum 1."""
    M = np.concatenate([W_hh, w_ih[:, None]], axis=1)
    M = np.maximum(M, 0.0)
    sums = M.sum(axis=1)
    dead = sums <= 0.0
    if np.any(dead):
        M[dead] = 1.0 / M.shape[1]
        sums[dead] = 1.0
    M /= sums[:, None]
    return M[:, :-1], M[:, -1]


def _argmax_prefer_flat(scores: np.ndarray) -> np.ndarray:
    # ties resolve to flat first, then down, then up
    reordered = scores[:, _ARGMAX_PREF]
    pick = np.argmax(reordered, axis=1)
    classes = np.asarray(_ARGMAX_PREF, dtype=np.int8)[pick]
    return (classes - 1).astype(np.int8)


def convex_forward(params: ConvexNetParams, series):
    """Run the linear recursion; returns ``(labels, states)``.

    ``h_0 = y_0 * w_ih`` and ``h_t = W_hh h_{t-1} + y_t w_ih``; labels are
    the tie-broken argmax of ``W_out h_t``.
    """
    params.validate()
    y = np.asarray(getattr(series, "y", series), dtype=float)
    states = np.empty((len(y), params.hidden_dim))
    states[0] = y[0] * params.w_ih
    for t in range(1, len(y)):
        states[t] = params.W_hh @ states[t - 1] + y[t] * params.w_ih
    scores = states @ params.W_out.T
    return _argmax_prefer_flat(scores), states


def convex_probs(params: ConvexNetParams, series):
    labels, states = convex_forward(params, series)
    z = states @ params.W_out.T
    z = z - z.max(axis=1, keepdims=True)
    e = np.exp(z)
    return labels, e / e.sum(axis=1, keepdims=True)


@dataclass(frozen=True)
class ConvexTrainOpts:
    hidden_dim: int = 5
    lr: float = 1e-3
    epochs: int = 20
    seed: int = 0


class ConvexTrainingFailure(RuntimeError):
    pass


def convex_train(dataset: Dataset, opts: ConvexTrainOpts = ConvexTrainOpts()):
    """Projected gradient descent on per-step cross-entropy.

    After every step the recurrent rows are pulled back onto the simplex by
    clip-and-renormalize, so the stochastic-matrix invariant holds exactly
    throughout training.  Returns ``(params, log)``.
    """
    if dataset.role != "train":
        raise ValueError(f"training needs a train dataset, got role={dataset.role!r}")
    rng = np.random.default_rng(opts.seed)
    m = opts.hidden_dim
    W_hh, w_ih = project_stochastic_rows(rng.random((m, m)), rng.random(m))
    params = ConvexNetParams(W_hh, w_ih, rng.uniform(-0.1, 0.1, size=(3, m)))

    data = [(np.asarray(s.y, dtype=float), np.asarray(s.labels, dtype=int) + 1)
            for s in dataset]
    log: list[dict] = []
    initial_loss = None
    bad = 0
    for epoch in range(opts.epochs):
        total = 0.0
        for idx in rng.permutation(len(data)):
            y, targets = data[idx]
            _, states = convex_forward(params, y)
            z = states @ params.W_out.T
            z -= z.max(axis=1, keepdims=True)
            e = np.exp(z)
            probs = e / e.sum(axis=1, keepdims=True)
            T = len(y)
            picked = probs[np.arange(T), targets]
            total += float(-np.mean(np.log(np.maximum(picked, 1e-300))))

            dlogits = probs.copy()
            dlogits[np.arange(T), targets] -= 1.0
            dlogits /= T
            dW_out = dlogits.T @ states
            dh = dlogits @ params.W_out
            dtot = np.empty_like(dh)
            carry = np.zeros(m)
            for t in range(T - 1, -1, -1):
                dtot[t] = dh[t] + carry
                carry = params.W_hh.T @ dtot[t]
            dW_hh = dtot[1:].T @ states[:-1]
            dw_ih = dtot.T @ y

            params.W_out -= opts.lr * dW_out
            W_hh = params.W_hh - opts.lr * dW_hh
            w_ih = params.w_ih - opts.lr * dw_ih
            params.W_hh, params.w_ih = project_stochastic_rows(W_hh, w_ih)
        mean_loss = total / len(data)
        log.append({"epoch": epoch, "loss": mean_loss})
        if not np.isfinite(mean_loss):
            raise ConvexTrainingFailure(f"loss became non-finite at epoch {epoch}")
        if initial_loss is None:
            initial_loss = mean_loss
        bad = bad + 1 if mean_loss > 10.0 * initial_loss else 0
        if bad >= 3:
            raise ConvexTrainingFailure("loss exceeded 10x the initial level")
    return params, log


# ---------------------------------------------------------------------------
# dummy
# ---------------------------------------------------------------------------

def dummy_classify(series, seed: int) -> np.ndarray:
    """Uniform random label per step (expected mismatch 2/3)."""
    n = len(getattr(series, "y", series))
    rng = np.random.default_rng(seed)
    return rng.choice(np.array([-1, 0, 1], dtype=np.int8), size=n)


# ---------------------------------------------------------------------------
# serialization
# ---------------------------------------------------------------------------

def save_ma(path, cfg: MaConfig, meta: dict | None = None) -> None:
    modelio.save_container(path, "ma", {
        "config": {"mu_slow": cfg.mu_slow, "mu_fast": cfg.mu_fast,
                   "epsilon": cfg.epsilon},
        "meta": dict(meta or {}),
    })


def load_ma(path) -> MaConfig:
    doc = modelio.load_container(path, expect_kind="ma")
    cfg = MaConfig(**doc["config"])
    cfg.validate()
    return cfg


def save_convex(path, params: ConvexNetParams, meta: dict | None = None) -> None:
    params.validate()
    modelio.save_container(path, "convex", {
        "params": params.to_payload(),
        "meta": dict(meta or {}),
    })


def load_convex(path) -> ConvexNetParams:
    doc = modelio.load_container(path, expect_kind="convex")
    try:
        return ConvexNetParams.from_payload(doc["params"])
    except (KeyError, TypeError) as exc:
        raise modelio.ModelFormatError(f"bad convex model file {path}: {exc}") from exc
