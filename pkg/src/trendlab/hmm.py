"""Three-state Gaussian-emission hidden Markov model on log-returns.

Fitting uses Baum-Welch (EM) with the scaled forward-backward recursions,
pooled across series.  Classification decodes per-step posterior state
probabilities and maps states to trend labels by sorting the fitted state
means in increasing order (down, flat, up).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import modelio
from .simgen import Dataset, Series, series_log_returns

_VAR_FLOOR = 1e-12
_PDF_FLOOR = 1e-300


class HmmInputError(ValueError):
    """Series unsuitable for log-return modeling (non-positive values)."""


@dataclass
class HmmModel:
    initial: np.ndarray
    transition: np.ndarray
    means: np.ndarray
    vars: np.ndarray

    def __post_init__(self) -> None:
        self.initial = np.asarray(self.initial, dtype=float)
        self.transition = np.asarray(self.transition, dtype=float)
        self.means = np.asarray(self.means, dtype=float)
        self.vars = np.asarray(self.vars, dtype=float)

    @property
    def n_states(self) -> int:
        return len(self.means)

    def validate(self) -> None:
        k = self.n_states
        if self.initial.shape != (k,) or self.transition.shape != (k, k):
            raise ValueError("inconsistent HMM shapes")
        if abs(self.initial.sum() - 1.0) > 1e-12 or np.any(self.initial < 0):
            raise ValueError("initial must be a probability vector")
        if np.any(np.abs(self.transition.sum(axis=1) - 1.0) > 1e-12):
            raise ValueError("transition rows must sum to 1 within 1e-12")
        if np.any(self.transition < 0):
            raise ValueError("transition entries must be >= 0")
        if np.any(self.vars <= 0):
            raise ValueError("emission variances must be > 0")

    def to_payload(self) -> dict:
        return {"initial": self.initial.tolist(),
                "transition": self.transition.tolist(),
                "means": self.means.tolist(),
                "vars": self.vars.tolist()}

    @classmethod
    def from_payload(cls, doc: dict) -> "HmmModel":
        model = cls(np.asarray(doc["initial"]), np.asarray(doc["transition"]),
                    np.asarray(doc["means"]), np.asarray(doc["vars"]))
        model.validate()
        return model


def _emission_probs(obs: np.ndarray, means: np.ndarray, vars_: np.ndarray):
    diff = obs[:, None] - means[None, :]
    B = np.exp(-0.5 * diff * diff / vars_[None, :]) / np.sqrt(2 * np.pi * vars_[None, :])
    return np.maximum(B, _PDF_FLOOR)


def _forward_backward(obs: np.ndarray, model: HmmModel):
    """Scaled recursions; returns (loglik, gamma, xi_sum).

    gamma[t, i] is the posterior state probability per step and xi_sum the
    posterior transition-count matrix summed over steps.
    """
    K = model.n_states
    T = len(obs)
    B = _emission_probs(obs, model.means, model.vars)
    A = model.transition

    alpha = np.empty((T, K))
    c = np.empty(T)
    a0 = model.initial * B[0]
    c[0] = a0.sum()
    alpha[0] = a0 / c[0]
    for t in range(1, T):
        at = (alpha[t - 1] @ A) * B[t]
        c[t] = at.sum()
        alpha[t] = at / c[t]

    beta = np.empty((T, K))
    beta[-1] = 1.0
    for t in range(T - 2, -1, -1):
        beta[t] = (A @ (B[t + 1] * beta[t + 1])) / c[t + 1]

    gamma = alpha * beta
    gamma /= gamma.sum(axis=1, keepdims=True)

    xi_sum = np.zeros((K, K))
    for t in range(T - 1):
        xi = (alpha[t][:, None] * A) * (B[t + 1] * beta[t + 1])[None, :] / c[t + 1]
        xi_sum += xi
    return float(np.sum(np.log(c))), gamma, xi_sum


def _observation_sequences(data) -> list[np.ndarray]:
    if isinstance(data, Dataset):
        items = list(data.series)
    else:
        items = list(data)
    seqs = []
    for item in items:
        if isinstance(item, Series):
            values = item.y
        else:
            values = np.asarray(item, dtype=float)
        try:
            seqs.append(series_log_returns(values))
        except ValueError as exc:
            raise HmmInputError(str(exc)) from exc
    if not seqs:
        raise HmmInputError("no observation sequences")
    return seqs


class _VarianceCollapse(RuntimeError):
    pass


def _fit_once(seqs: list[np.ndarray], n_states: int, max_iters: int,
              tol: float, rng: np.random.Generator,
              init: HmmModel | None = None):
    if init is not None:
        model = init
    else:
        pooled = np.concatenate(seqs)
        # spread the initial means over the data quantiles, jittered per restart
        probs = np.linspace(0.1, 0.9, n_states)
        means = np.quantile(pooled, probs)
        means = means + rng.normal(0.0, 0.1 * (pooled.std() + 1e-12), size=n_states)
        vars_ = np.full(n_states, max(pooled.var(), 1e-8))
        A = np.full((n_states, n_states), 0.2 / max(n_states - 1, 1))
        np.fill_diagonal(A, 0.8)
        initial = np.full(n_states, 1.0 / n_states)
        model = HmmModel(initial, A, means, vars_)

    history: list[float] = []
    for _ in range(max_iters):
        total_ll = 0.0
        gamma0 = np.zeros(n_states)
        xi_sum = np.zeros((n_states, n_states))
        gamma_sum = np.zeros(n_states)
        obs_sum = np.zeros(n_states)
        obs_sq_sum = np.zeros(n_states)
        gamma_no_last = np.zeros(n_states)
        for obs in seqs:
            ll, gamma, xi = _forward_backward(obs, model)
            total_ll += ll
            gamma0 += gamma[0]
            xi_sum += xi
            gamma_sum += gamma.sum(axis=0)
            gamma_no_last += gamma[:-1].sum(axis=0)
            obs_sum += gamma.T @ obs
            obs_sq_sum += gamma.T @ (obs * obs)
        history.append(total_ll)

        new_means = obs_sum / gamma_sum
        new_vars = obs_sq_sum / gamma_sum - new_means * new_means
        if np.any(new_vars < _VAR_FLOOR):
            raise _VarianceCollapse()
        model = HmmModel(
            initial=gamma0 / gamma0.sum(),
            transition=xi_sum / np.maximum(gamma_no_last, _PDF_FLOOR)[:, None],
            means=new_means,
            vars=new_vars,
        )
        # guard against rounding drift in the row normalizations
        model.transition /= model.transition.sum(axis=1, keepdims=True)
        if len(history) >= 2 and history[-1] - history[-2] < tol:
            break
    return model, history


def hmm_fit(data, n_states: int = 3, max_iters: int = 100, tol: float = 1e-6,
            seed: int = 0, max_restarts: int = 5, init: HmmModel | None = None):
    """Fit by EM; returns ``(model, loglik_history)``.

    The log-likelihood history is non-decreasing (EM guarantee).  Variance
    collapse triggers a re-seeded restart, up to ``max_restarts`` times.
    ``init`` overrides the default quantile-spread initialization.
    """
    seqs = _observation_sequences(data)
    last_exc: Exception | None = None
    for attempt in range(max_restarts + 1):
        rng = np.random.default_rng(np.random.SeedSequence([seed, attempt]))
        try:
            return _fit_once(seqs, n_states, max_iters, tol, rng,
                             init=init if attempt == 0 else None)
        except _VarianceCollapse as exc:
            last_exc = exc
    raise RuntimeError(f"variance collapsed in all {max_restarts + 1} attempts") from last_exc


def state_label_order(model: HmmModel) -> np.ndarray:
    """Permutation mapping sorted-mean rank -> state index (down, flat, up)."""
    return np.argsort(model.means, kind="stable")


def hmm_classify(model: HmmModel, series):
    """Posterior-decode a series; returns ``(labels, probs)``.

    ``probs[t]`` is the posterior over (down, flat, up) for the return that
    ends at step t; step 0 has no return and copies step 1.
    """
    model.validate()
    if model.n_states != 3:
        raise ValueError("trend classification needs a 3-state model")
    obs = series_log_returns(getattr(series, "y", series))
    _, gamma, _ = _forward_backward(obs, model)
    order = state_label_order(model)
    post = gamma[:, order]  # columns now ordered down, flat, up
    label_values = np.array([-1, 0, 1], dtype=np.int8)
    labels_tail = label_values[np.argmax(post, axis=1)]

    n = len(obs) + 1
    labels = np.empty(n, dtype=np.int8)
    labels[1:] = labels_tail
    labels[0] = labels_tail[0]
    probs = np.empty((n, 3))
    probs[1:] = post
    probs[0] = post[0]
    return labels, probs


def save_hmm(path, model: HmmModel, meta: dict | None = None) -> None:
    model.validate()
    modelio.save_container(path, "hmm", {
        "params": model.to_payload(),
        "meta": dict(meta or {}),
    })


def load_hmm(path) -> HmmModel:
    doc = modelio.load_container(path, expect_kind="hmm")
    try:
        return HmmModel.from_payload(doc["params"])
    except (KeyError, TypeError) as exc:
        raise modelio.ModelFormatError(f"bad hmm model file {path}: {exc}") from exc
