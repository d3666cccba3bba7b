"""Labeled synthetic time series under three trend dynamics.

Three generators produce univariate series together with a per-step
ground-truth trend label in {-1, 0, +1}:

* ``noisy_line``     piecewise linear drift plus i.i.d. Gaussian noise,
* ``piecewise_ou``   piecewise mean-reverting diffusion (exact discretization),
* ``markov_switch``  log-returns driven by a hidden 3-state Markov chain.

The piecewise generators glue segments at a *noiseless* anchor: the
deterministic skeleton is continuous across segment boundaries and segment
noise never leaks into the next segment.  Every generator is a pure
function of ``(config, seed)``.

Datasets are assembled from per-series seeds derived from one root seed and
serialized as JSON lines (one record per series).
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from typing import Iterable

import numpy as np

LABELS = (-1, 0, 1)
DYNAMICS = ("noisy_line", "piecewise_ou", "markov_switch")
ROLES = ("train", "test", "validation")


class ConfigError(ValueError):
    """Invalid generator or dataset configuration."""


class DegenerateLabelError(ValueError):
    """A segment label cannot be computed (e.g. zero anchor value)."""


def child_seed(root: int, *path: int) -> int:
    """Derive a reproducible 64-bit seed from a root seed and an index path."""
    ss = np.random.SeedSequence([int(root), *[int(p) for p in path]])
    return int(ss.generate_state(1, np.uint64)[0])


def _check_range(name: str, lo, hi, minimum=None) -> None:
    if lo > hi:
        raise ConfigError(f"{name}: empty range [{lo}, {hi}]")
    if minimum is not None and lo < minimum:
        raise ConfigError(f"{name}: lower bound {lo} below {minimum}")


# ---------------------------------------------------------------------------
# configs
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class NoisyLineConfig:
    """Piecewise linear trend with additive Gaussian noise (unit time step).

    Segment slopes are drawn from the symmetric grid
    ``{-gamma, ..., -gamma/n_slopes, 0, gamma/n_slopes, ..., gamma}`` and the
    per-segment noise level uniformly from ``(0, sigma_max]``.
    """

    gamma: float = 1.0
    n_slopes: int = 5
    sigma_max: float = 1.0
    n_segments_range: tuple[int, int] = (1, 5)
    segment_len_range: tuple[int, int] = (50, 200)
    y0: float = 0.0

    def validate(self) -> None:
        if self.gamma <= 0:
            raise ConfigError(f"gamma must be > 0, got {self.gamma}")
        if self.n_slopes < 1:
            raise ConfigError(f"n_slopes must be >= 1, got {self.n_slopes}")
        if self.sigma_max <= 0:
            raise ConfigError(f"sigma_max must be > 0, got {self.sigma_max}")
        _check_range("n_segments_range", *self.n_segments_range, minimum=1)
        _check_range("segment_len_range", *self.segment_len_range, minimum=1)

    def slope_grid(self) -> np.ndarray:
        k = np.arange(-self.n_slopes, self.n_slopes + 1)
        return k * (self.gamma / self.n_slopes)

    def with_noise_scale(self, scale: float) -> "NoisyLineConfig":
        return replace(self, sigma_max=self.sigma_max * scale)


@dataclass(frozen=True)
class OuConfig:
    """Piecewise mean-reverting segments pulled toward ``mu_i / a_i``.

    ``a_range`` must be strictly positive so the attractor is finite.  The
    per-step transition uses the exact discretization of the continuous
    dynamics, so statistics do not depend on the step size beyond sampling
    resolution.
    """

    a_range: tuple[float, float] = (0.05, 0.5)
    sigma: float = 1.0
    mu_range: tuple[float, float] = (0.0, 2.0)
    n_segments_range: tuple[int, int] = (1, 6)
    segment_len_range: tuple[int, int] = (80, 400)
    y0: float = 1.0
    dt: float = 1.0
    flat_tol: float = 0.02

    def validate(self) -> None:
        _check_range("a_range", *self.a_range)
        if self.a_range[0] <= 0:
            raise ConfigError(f"a_range must be strictly positive, got {self.a_range}")
        if self.sigma < 0:
            raise ConfigError(f"sigma must be >= 0, got {self.sigma}")
        _check_range("mu_range", *self.mu_range, minimum=0.0)
        _check_range("n_segments_range", *self.n_segments_range, minimum=1)
        _check_range("segment_len_range", *self.segment_len_range, minimum=1)
        if self.dt <= 0:
            raise ConfigError(f"dt must be > 0, got {self.dt}")
        if self.flat_tol < 0:
            raise ConfigError(f"flat_tol must be >= 0, got {self.flat_tol}")

    def with_noise_scale(self, scale: float) -> "OuConfig":
        return replace(self, sigma=self.sigma * scale)


def _sticky_transition(stay: float = 0.98) -> tuple[tuple[float, ...], ...]:
    off = (1.0 - stay) / 2.0
    return tuple(
        tuple(stay if i == j else off for j in range(3)) for i in range(3)
    )


@dataclass(frozen=True)
class MarkovSwitchConfig:
    """Log-price driven by a 3-state trend chain over states (-1, 0, +1).

    Each log-return is ``gamma * state + sigma * eps`` with independent
    standard normal ``eps`` (noise enters per return, so the series is an
    HMM with Gaussian emissions on log-returns).  ``gamma`` and ``sigma``
    are held constant within a series.
    """

    transition: tuple[tuple[float, ...], ...] = field(default_factory=_sticky_transition)
    gamma: float = 0.05
    sigma: float = 0.05
    initial_dist: tuple[float, float, float] = (1 / 3, 1 / 3, 1 / 3)
    length_range: tuple[int, int] = (500, 1000)

    def validate(self) -> None:
        P = np.asarray(self.transition, dtype=float)
        if P.shape != (3, 3):
            raise ConfigError(f"transition must be 3x3, got shape {P.shape}")
        if np.any(P < 0):
            raise ConfigError("transition entries must be >= 0")
        if np.any(np.abs(P.sum(axis=1) - 1.0) > 1e-12):
            raise ConfigError("transition rows must sum to 1 within 1e-12")
        pi = np.asarray(self.initial_dist, dtype=float)
        if pi.shape != (3,) or np.any(pi < 0) or abs(pi.sum() - 1.0) > 1e-12:
            raise ConfigError("initial_dist must be a probability 3-vector")
        if self.gamma < 0:
            raise ConfigError(f"gamma must be >= 0, got {self.gamma}")
        if self.sigma <= 0:
            raise ConfigError(f"sigma must be > 0, got {self.sigma}")
        _check_range("length_range", *self.length_range, minimum=2)

    def with_noise_scale(self, scale: float) -> "MarkovSwitchConfig":
        return replace(self, sigma=self.sigma * scale)


AnyConfig = NoisyLineConfig | OuConfig | MarkovSwitchConfig

_CONFIG_CLASSES = {
    "noisy_line": NoisyLineConfig,
    "piecewise_ou": OuConfig,
    "markov_switch": MarkovSwitchConfig,
}


def config_to_dict(cfg: AnyConfig) -> dict:
    for tag, cls in _CONFIG_CLASSES.items():
        if isinstance(cfg, cls):
            d = {"dynamic": tag}
            for name in cls.__dataclass_fields__:
                value = getattr(cfg, name)
                if isinstance(value, tuple):
                    value = list(
                        list(v) if isinstance(v, tuple) else v for v in value
                    )
                d[name] = value
            return d
    raise ConfigError(f"unknown config type {type(cfg)!r}")


def config_from_dict(doc: dict) -> AnyConfig:
    doc = dict(doc)
    tag = doc.pop("dynamic", None)
    if tag not in _CONFIG_CLASSES:
        raise ConfigError(f"unknown dynamic tag {tag!r}")
    cls = _CONFIG_CLASSES[tag]
    kwargs = {}
    for name, fld in cls.__dataclass_fields__.items():
        if name not in doc:
            continue
        value = doc[name]
        if isinstance(value, list):
            value = tuple(tuple(v) if isinstance(v, list) else v for v in value)
        kwargs[name] = value
    unknown = set(doc) - set(cls.__dataclass_fields__)
    if unknown:
        raise ConfigError(f"unknown config fields for {tag}: {sorted(unknown)}")
    cfg = cls(**kwargs)
    cfg.validate()
    return cfg


# ---------------------------------------------------------------------------
# series / dataset containers
# ---------------------------------------------------------------------------

@dataclass
class Series:
    """One simulated path with per-step trend labels."""

    t: np.ndarray
    y: np.ndarray
    labels: np.ndarray
    dynamic: str
    gen_params: dict
    seed: int

    def __post_init__(self) -> None:
        self.t = np.asarray(self.t, dtype=float)
        self.y = np.asarray(self.y, dtype=float)
        self.labels = np.asarray(self.labels, dtype=np.int8)
        if not (len(self.t) == len(self.y) == len(self.labels)):
            raise ValueError("t, y and labels must have equal length")
        if len(self.t) < 2:
            raise ValueError("a series needs at least 2 points")
        if np.any(np.diff(self.t) <= 0):
            raise ValueError("t must be strictly increasing")
        if not np.isin(self.labels, LABELS).all():
            raise ValueError("labels must lie in {-1, 0, +1}")
        if self.dynamic not in DYNAMICS:
            raise ValueError(f"unknown dynamic tag {self.dynamic!r}")

    def __len__(self) -> int:
        return len(self.y)

    def to_record(self) -> dict:
        return {
            "dynamic": self.dynamic,
            "gen_params": self.gen_params,
            "labels": [int(v) for v in self.labels],
            "seed": int(self.seed),
            "t": [float(v) for v in self.t],
            "y": [float(v) for v in self.y],
        }

    @classmethod
    def from_record(cls, rec: dict) -> "Series":
        return cls(
            t=np.asarray(rec["t"], dtype=float),
            y=np.asarray(rec["y"], dtype=float),
            labels=np.asarray(rec["labels"], dtype=np.int8),
            dynamic=rec["dynamic"],
            gen_params=rec.get("gen_params", {}),
            seed=int(rec["seed"]),
        )


@dataclass
class Dataset:
    series: list[Series]
    role: str = "train"

    def __post_init__(self) -> None:
        if self.role not in ROLES:
            raise ValueError(f"unknown role {self.role!r}")

    def __len__(self) -> int:
        return len(self.series)

    def __iter__(self):
        return iter(self.series)

    @property
    def composition(self) -> dict[str, int]:
        counts: dict[str, int] = {}
        for s in self.series:
            counts[s.dynamic] = counts.get(s.dynamic, 0) + 1
        return counts


# ---------------------------------------------------------------------------
# generators
# ---------------------------------------------------------------------------

def generate_noisy_line(cfg: NoisyLineConfig, seed: int) -> Series:
    """Simulate a piecewise noisy line; labels are the sign of the slope."""
    cfg.validate()
    rng = np.random.default_rng(seed)
    n_seg = int(rng.integers(cfg.n_segments_range[0], cfg.n_segments_range[1] + 1))
    grid = cfg.slope_grid()
    slopes, sigmas, lengths = [], [], []
    for _ in range(n_seg):
        slopes.append(float(rng.choice(grid)))
        # uniform on (0, sigma_max]; excludes an exactly zero noise level
        sigmas.append(float(cfg.sigma_max * (1.0 - rng.random())))
        lengths.append(int(rng.integers(cfg.segment_len_range[0],
                                        cfg.segment_len_range[1] + 1)))

    total = 1 + sum(lengths)
    y = np.empty(total)
    labels = np.empty(total, dtype=np.int8)
    y[0] = cfg.y0
    labels[0] = int(np.sign(slopes[0]))
    anchor = cfg.y0
    pos = 1
    for mu, sig, length in zip(slopes, sigmas, lengths):
        k = np.arange(1, length + 1, dtype=float)
        eps = rng.standard_normal(length)
        y[pos:pos + length] = anchor + mu * k + sig * eps
        labels[pos:pos + length] = int(np.sign(mu))
        anchor = anchor + mu * length
        pos += length

    params = {"slopes": slopes, "sigmas": sigmas, "lengths": lengths, "y0": cfg.y0}
    return Series(np.arange(total, dtype=float), y, labels, "noisy_line", params, seed)


def generate_piecewise_ou(cfg: OuConfig, seed: int) -> Series:
    """Simulate piecewise mean-reverting segments via exact discretization.

    Per step of size dt the update is
    ``y' = y e^{-a dt} + y_inf (1 - e^{-a dt}) + sigma sqrt((1-e^{-2 a dt})/(2a)) xi``
    which matches the continuous-time transition law exactly.  A segment's
    label is the thresholded sign of ``y_inf / anchor - 1``.
    """
    cfg.validate()
    rng = np.random.default_rng(seed)
    n_seg = int(rng.integers(cfg.n_segments_range[0], cfg.n_segments_range[1] + 1))
    a_s, mu_s, lengths = [], [], []
    for _ in range(n_seg):
        a_s.append(float(rng.uniform(cfg.a_range[0], cfg.a_range[1])))
        mu_s.append(float(rng.uniform(cfg.mu_range[0], cfg.mu_range[1])))
        lengths.append(int(rng.integers(cfg.segment_len_range[0],
                                        cfg.segment_len_range[1] + 1)))

    total = 1 + sum(lengths)
    y = np.empty(total)
    labels = np.empty(total, dtype=np.int8)
    y[0] = cfg.y0
    anchor = cfg.y0
    pos = 1
    first_label = None
    for a, mu, length in zip(a_s, mu_s, lengths):
        if anchor == 0.0:
            raise DegenerateLabelError("segment anchor is exactly 0; label undefined")
        y_inf = mu / a
        ratio = y_inf / anchor - 1.0
        label = 0 if abs(ratio) <= cfg.flat_tol else int(np.sign(ratio))
        if first_label is None:
            first_label = label
        decay = np.exp(-a * cfg.dt)
        noise_sd = cfg.sigma * np.sqrt((1.0 - decay * decay) / (2.0 * a))
        prev = anchor
        eps = rng.standard_normal(length)
        for j in range(length):
            prev = prev * decay + y_inf * (1.0 - decay) + noise_sd * eps[j]
            y[pos + j] = prev
        labels[pos:pos + length] = label
        # noiseless relaxation of the anchor, so gluing stays deterministic
        seg_decay = np.exp(-a * length * cfg.dt)
        anchor = anchor * seg_decay + y_inf * (1.0 - seg_decay)
        pos += length
    labels[0] = first_label

    t = np.arange(total, dtype=float) * cfg.dt
    params = {"a": a_s, "mu": mu_s, "lengths": lengths,
              "sigma": cfg.sigma, "y0": cfg.y0, "dt": cfg.dt}
    return Series(t, y, labels, "piecewise_ou", params, seed)


def generate_markov_switch(cfg: MarkovSwitchConfig, seed: int) -> Series:
    """Simulate a 3-state switching log-price; labels are the hidden states."""
    cfg.validate()
    rng = np.random.default_rng(seed)
    length = int(rng.integers(cfg.length_range[0], cfg.length_range[1] + 1))
    P = np.asarray(cfg.transition, dtype=float)
    cum = np.cumsum(P, axis=1)
    states = np.empty(length, dtype=np.int64)
    states[0] = np.searchsorted(np.cumsum(cfg.initial_dist), rng.random())
    u = rng.random(length - 1)
    for k in range(1, length):
        states[k] = np.searchsorted(cum[states[k - 1]], u[k - 1])
    state_values = np.array(LABELS, dtype=float)[states]

    log_ret = np.zeros(length)
    log_ret[1:] = cfg.gamma * state_values[1:] + cfg.sigma * rng.standard_normal(length - 1)
    y = np.exp(np.cumsum(log_ret))  # y[0] = 1

    params = {"gamma": cfg.gamma, "sigma": cfg.sigma, "length": length}
    return Series(np.arange(length, dtype=float), y,
                  state_values.astype(np.int8), "markov_switch", params, seed)


_GENERATORS = {
    "noisy_line": generate_noisy_line,
    "piecewise_ou": generate_piecewise_ou,
    "markov_switch": generate_markov_switch,
}


def generate(dynamic: str, cfg: AnyConfig, seed: int) -> Series:
    if dynamic not in _GENERATORS:
        raise ConfigError(f"unknown dynamic tag {dynamic!r}")
    return _GENERATORS[dynamic](cfg, seed)


# ---------------------------------------------------------------------------
# dataset assembly
# ---------------------------------------------------------------------------

# Training-set defaults.  Per-dynamic length ranges differ on purpose: line
# segments are short and numerous, mean-reverting segments longer, switching
# series 500-1000 points.
DEFAULT_TRAIN_CONFIGS: dict[str, AnyConfig] = {
    "noisy_line": NoisyLineConfig(),
    "piecewise_ou": OuConfig(),
    "markov_switch": MarkovSwitchConfig(),
}

# Validation defaults: 500-1000 points per series.  The noisy-line scale is
# deliberately small in absolute units: trend detection is a scale-free
# problem and fixed absolute thresholds ought to be penalized for not being
# scale-free.  The slope-to-noise ratio matches the training defaults.
DEFAULT_VALIDATION_CONFIGS: dict[str, AnyConfig] = {
    "noisy_line": NoisyLineConfig(
        gamma=0.004, n_slopes=5, sigma_max=2e-4,
        n_segments_range=(4, 5), segment_len_range=(125, 200),
    ),
    "piecewise_ou": OuConfig(
        n_segments_range=(4, 5), segment_len_range=(125, 200),
    ),
    "markov_switch": MarkovSwitchConfig(),
}

DEFAULT_COUNTS = {"train": 1000, "test": 1000, "validation": 300}


def default_configs(role: str) -> dict[str, AnyConfig]:
    if role == "validation":
        return dict(DEFAULT_VALIDATION_CONFIGS)
    return dict(DEFAULT_TRAIN_CONFIGS)


def make_dataset(
    role: str,
    seed: int,
    dynamic: str = "mixed",
    count: int | None = None,
    configs: dict[str, AnyConfig] | None = None,
    noise_scale: float = 1.0,
) -> Dataset:
    """Assemble a dataset of labeled series, deterministic under ``seed``.

    ``dynamic`` is one of the three tags or ``"mixed"``; the mixture assigns
    dynamics round-robin so ``count=9`` yields 3 series per dynamic.  Series
    i is generated from a child seed derived from ``(seed, i)``, so the
    result does not depend on generation order.
    """
    if role not in ROLES:
        raise ConfigError(f"unknown role {role!r}")
    if dynamic != "mixed" and dynamic not in DYNAMICS:
        raise ConfigError(f"unknown dynamic tag {dynamic!r}")
    if count is None:
        count = DEFAULT_COUNTS[role]
    if count < 1:
        raise ConfigError(f"count must be >= 1, got {count}")

    cfgs = default_configs(role)
    if configs:
        cfgs.update(configs)
    if noise_scale != 1.0:
        cfgs = {k: v.with_noise_scale(noise_scale) for k, v in cfgs.items()}

    series = []
    for i in range(count):
        tag = DYNAMICS[i % 3] if dynamic == "mixed" else dynamic
        series.append(generate(tag, cfgs[tag], child_seed(seed, i)))
    return Dataset(series=series, role=role)


# ---------------------------------------------------------------------------
# serialization
# ---------------------------------------------------------------------------

def dumps_record(rec: dict) -> str:
    return json.dumps(rec, sort_keys=True, separators=(",", ":"))


def save_dataset(dataset: Dataset, path) -> None:
    """Write one compact JSON record per series (byte-deterministic)."""
    with open(path, "w", encoding="utf-8") as fh:
        for s in dataset.series:
            fh.write(dumps_record(s.to_record()))
            fh.write("\n")


def load_dataset(path, role: str = "validation") -> Dataset:
    series = []
    with open(path, "r", encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if line:
                series.append(Series.from_record(json.loads(line)))
    if not series:
        raise ValueError(f"empty dataset file: {path}")
    return Dataset(series=series, role=role)


def export_series_csv(series: Series, path) -> None:
    """Per-series CSV with columns t,y,label."""
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("t,y,label\n")
        for t, y, lab in zip(series.t, series.y, series.labels):
            fh.write(f"{t!r},{y!r},{int(lab)}\n")


def series_log_returns(series: Series | np.ndarray) -> np.ndarray:
    """Log-returns of a strictly positive series (raises otherwise)."""
    y = np.asarray(getattr(series, "y", series), dtype=float)
    if np.any(y <= 0):
        raise ValueError("log-returns require strictly positive values")
    return np.diff(np.log(y))


def series_returns(series: Series) -> np.ndarray:
    """Return sample used for distribution matching: log-returns for the
    switching dynamic (a price-like process), first differences otherwise."""
    if series.dynamic == "markov_switch":
        return series_log_returns(series)
    return np.diff(series.y)
