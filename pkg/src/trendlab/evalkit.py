"""Scoring and statistical comparison of trend classifiers.

Per-series loss is the label mismatch rate.  Model comparison uses
percentile-bootstrap confidence intervals for differences of median losses,
ordinary least squares of loss on one-hot-encoded categorical features, and
probability pooling.  Simulator calibration against an empirical return
sample minimizes the 1-D Wasserstein distance by random search.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import simgen


# ---------------------------------------------------------------------------
# losses and summaries
# ---------------------------------------------------------------------------

def series_loss(predicted, truth) -> float:
    """Fraction of steps where the predicted label differs from the truth."""
    p = np.asarray(predicted)
    t = np.asarray(truth)
    if p.shape != t.shape or p.size == 0:
        raise ValueError(f"label sequences must match and be non-empty: "
                         f"{p.shape} vs {t.shape}")
    return float(np.mean(p != t))


def labels_to_probs(labels) -> np.ndarray:
    """One-hot probability triples for a hard label sequence."""
    idx = np.asarray(labels, dtype=int) + 1
    probs = np.zeros((len(idx), 3))
    probs[np.arange(len(idx)), idx] = 1.0
    return probs


@dataclass
class GroupStats:
    count: int
    median: float
    q1: float
    q3: float

    @property
    def iqr(self) -> float:
        return self.q3 - self.q1


@dataclass
class EvalReport:
    """Per-series losses plus quartile summaries per dynamic and overall."""

    per_series: list[tuple[int, str, float]]
    groups: dict[str, GroupStats]
    overall: GroupStats

    def table_rows(self) -> list[dict]:
        rows = []
        for tag in sorted(self.groups):
            g = self.groups[tag]
            rows.append({"dynamic": tag, "count": g.count, "median": g.median,
                         "q1": g.q1, "q3": g.q3, "iqr": g.iqr})
        g = self.overall
        rows.append({"dynamic": "all", "count": g.count, "median": g.median,
                     "q1": g.q1, "q3": g.q3, "iqr": g.iqr})
        return rows


def _stats(losses) -> GroupStats:
    arr = np.asarray(losses, dtype=float)
    q1, med, q3 = np.percentile(arr, [25, 50, 75])  # linear interpolation
    return GroupStats(count=len(arr), median=float(med), q1=float(q1), q3=float(q3))


def summarize(per_series) -> EvalReport:
    """Quartile summary of (series id, dynamic tag, loss) triples."""
    rows = [(int(i), str(tag), float(loss)) for i, tag, loss in per_series]
    if not rows:
        raise ValueError("no losses to summarize")
    groups: dict[str, GroupStats] = {}
    for tag in {r[1] for r in rows}:
        groups[tag] = _stats([r[2] for r in rows if r[1] == tag])
    return EvalReport(per_series=rows, groups=groups,
                      overall=_stats([r[2] for r in rows]))


# ---------------------------------------------------------------------------
# bootstrap
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class BootstrapResult:
    point_diff: float
    ci_low: float
    ci_high: float
    level: float
    n_resamples: int


def bootstrap_median_diff(losses_a, losses_b, level: float = 0.99,
                          n_resamples: int = 10_000, seed: int = 0) -> BootstrapResult:
    """Percentile CI for median(a) - median(b) under independent resampling."""
    a = np.asarray(losses_a, dtype=float)
    b = np.asarray(losses_b, dtype=float)
    if a.size == 0 or b.size == 0:
        raise ValueError("both samples must be non-empty")
    if not 0.0 < level < 1.0:
        raise ValueError(f"level must lie in (0, 1), got {level}")
    rng = np.random.default_rng(seed)
    idx_a = rng.integers(0, a.size, size=(n_resamples, a.size))
    idx_b = rng.integers(0, b.size, size=(n_resamples, b.size))
    diffs = np.median(a[idx_a], axis=1) - np.median(b[idx_b], axis=1)
    alpha = (1.0 - level) / 2.0
    lo, hi = np.percentile(diffs, [100 * alpha, 100 * (1 - alpha)])
    return BootstrapResult(point_diff=float(np.median(a) - np.median(b)),
                           ci_low=float(lo), ci_high=float(hi),
                           level=level, n_resamples=n_resamples)


# ---------------------------------------------------------------------------
# ols with one-hot categoricals
# ---------------------------------------------------------------------------

@dataclass
class OlsFit:
    names: list[str]
    coef: np.ndarray
    std_err: np.ndarray
    t_stat: np.ndarray
    p_value: np.ndarray
    ci_low: np.ndarray
    ci_high: np.ndarray
    n_obs: int
    residuals: np.ndarray = field(repr=False)
    design: np.ndarray = field(repr=False)

    def table_rows(self) -> list[dict]:
        return [
            {"name": n, "coefficient": float(c), "std_err": float(s),
             "t_stat": float(t), "p_value": float(p),
             "ci_low": float(lo), "ci_high": float(hi)}
            for n, c, s, t, p, lo, hi in zip(
                self.names, self.coef, self.std_err, self.t_stat,
                self.p_value, self.ci_low, self.ci_high)
        ]


class RankDeficientError(ValueError):
    def __init__(self, columns):
        self.columns = list(columns)
        super().__init__(f"design matrix is rank deficient; collinear columns: "
                         f"{self.columns}")


def _normal_sf(x: float) -> float:
    return 0.5 * math.erfc(x / math.sqrt(2.0))


def ols_fit(rows, loss_key: str = "loss") -> OlsFit:
    """Regress loss on one-hot encodings of every other (categorical) key.

    Per feature the modalities are sorted and the first is dropped, so the
    intercept is the reference cell.  Standard errors come from the usual
    homoskedastic formula; p-values use the normal approximation of the
    t-statistics (two-sided).
    """
    rows = list(rows)
    if not rows:
        raise ValueError("no rows")
    y = np.array([float(r[loss_key]) for r in rows])
    features = sorted(k for k in rows[0] if k != loss_key)
    names = ["intercept"]
    columns = [np.ones(len(rows))]
    for feat in features:
        modalities = sorted({str(r[feat]) for r in rows})
        if len(modalities) < 2:
            raise ValueError(f"feature {feat!r} needs >= 2 observed modalities")
        for mod in modalities[1:]:  # first modality is the reference
            names.append(f"{feat}[{mod}]")
            columns.append(np.array([1.0 if str(r[feat]) == mod else 0.0
                                     for r in rows]))
    X = np.column_stack(columns)
    n, k = X.shape
    if n <= k:
        raise ValueError(f"need more rows ({n}) than columns ({k})")

    rank = np.linalg.matrix_rank(X)
    if rank < k:
        collinear = []
        for j in range(k):
            reduced = np.delete(X, j, axis=1)
            if np.linalg.matrix_rank(reduced) == rank:
                collinear.append(names[j])
        raise RankDeficientError(collinear)

    xtx = X.T @ X
    xty = X.T @ y
    try:
        beta = np.linalg.solve(xtx, xty)
    except np.linalg.LinAlgError:
        beta = np.linalg.lstsq(X, y, rcond=None)[0]
    resid = y - X @ beta
    s2 = float(resid @ resid) / (n - k)
    cov = s2 * np.linalg.inv(xtx)
    se = np.sqrt(np.diag(cov))
    with np.errstate(divide="ignore", invalid="ignore"):
        t = np.where(se > 0, beta / se, np.inf * np.sign(beta))
    p = np.array([2.0 * _normal_sf(abs(v)) for v in t])
    half = 1.959963984540054 * se  # two-sided 5% normal quantile
    return OlsFit(names=names, coef=beta, std_err=se, t_stat=t, p_value=p,
                  ci_low=beta - half, ci_high=beta + half, n_obs=n,
                  residuals=resid, design=X)


# ---------------------------------------------------------------------------
# probability pooling
# ---------------------------------------------------------------------------

def pool_probabilities(estimator_outputs) -> np.ndarray:
    """Per-step arithmetic mean of (T, 3) probability arrays."""
    arrays = [np.asarray(a, dtype=float) for a in estimator_outputs]
    if not arrays:
        raise ValueError("need at least one estimator")
    shape = arrays[0].shape
    for a in arrays:
        if a.shape != shape:
            raise ValueError(f"probability sequences disagree in shape: "
                             f"{a.shape} vs {shape}")
    return np.mean(arrays, axis=0)


def probs_to_labels(probs: np.ndarray) -> np.ndarray:
    """Argmax labels from probability triples; ties prefer flat, then down."""
    pref = np.asarray(probs)[:, [1, 0, 2]]
    pick = np.argmax(pref, axis=1)
    classes = np.array([1, 0, 2], dtype=np.int8)[pick]
    return (classes - 1).astype(np.int8)


# ---------------------------------------------------------------------------
# 1-D Wasserstein distance and calibration
# ---------------------------------------------------------------------------

def wasserstein_1d(sample_a, sample_b) -> float:
    """Exact W1 between the empirical distributions of two samples.

    Equal sizes reduce to the mean absolute difference of sorted samples;
    unequal sizes integrate |quantile_a - quantile_b| over the merged
    quantile breakpoints.
    """
    a = np.sort(np.asarray(sample_a, dtype=float))
    b = np.sort(np.asarray(sample_b, dtype=float))
    if a.size == 0 or b.size == 0:
        raise ValueError("both samples must be non-empty")
    if a.size == b.size:
        return float(np.mean(np.abs(a - b)))
    na, nb = a.size, b.size
    edges = np.union1d(np.arange(1, na) / na, np.arange(1, nb) / nb)
    edges = np.concatenate([[0.0], edges, [1.0]])
    widths = np.diff(edges)
    mids = (edges[:-1] + edges[1:]) / 2.0
    ia = np.minimum((mids * na).astype(int), na - 1)
    ib = np.minimum((mids * nb).astype(int), nb - 1)
    return float(np.sum(widths * np.abs(a[ia] - b[ib])))


@dataclass(frozen=True)
class CalibrationResult:
    config: simgen.AnyConfig
    distance: float
    n_evaluated: int


def _sample_candidate(dynamic: str, rng: np.random.Generator) -> simgen.AnyConfig:
    """Candidate configs for random-search calibration (log-uniform scales)."""
    def logu(lo, hi):
        return float(np.exp(rng.uniform(np.log(lo), np.log(hi))))

    if dynamic == "noisy_line":
        return simgen.NoisyLineConfig(gamma=logu(1e-3, 3.0),
                                      sigma_max=logu(1e-3, 3.0))
    if dynamic == "piecewise_ou":
        a_hi = logu(0.02, 1.0)
        return simgen.OuConfig(a_range=(a_hi / 4.0, a_hi),
                               sigma=logu(1e-3, 3.0),
                               mu_range=(0.0, logu(1e-2, 4.0)))
    if dynamic == "markov_switch":
        stay = rng.uniform(0.8, 0.999)
        transition = tuple(
            tuple(stay if i == j else (1.0 - stay) / 2.0 for j in range(3))
            for i in range(3)
        )
        return simgen.MarkovSwitchConfig(transition=transition,
                                         gamma=logu(1e-4, 0.2),
                                         sigma=logu(1e-4, 0.2))
    raise ValueError(f"unknown dynamic tag {dynamic!r}")


def candidate_distance(cfg: simgen.AnyConfig, dynamic: str, target: np.ndarray,
                       n_draws: int, seed: int) -> float:
    dists = []
    for d in range(n_draws):
        s = simgen.generate(dynamic, cfg, simgen.child_seed(seed, d))
        dists.append(wasserstein_1d(simgen.series_returns(s), target))
    return float(np.mean(dists))


def calibrate(dynamic: str, target_returns, n_draws: int = 4,
              n_candidates: int = 32, seed: int = 0) -> CalibrationResult:
    """Random-search the dynamic's config space for the smallest average W1
    between simulated and target return distributions.

    Candidate i is derived deterministically from ``(seed, i)``, so growing
    ``n_candidates`` extends the same schedule and the best distance is a
    running minimum.
    """
    target = np.asarray(target_returns, dtype=float)
    if target.size < 100:
        raise ValueError(f"need at least 100 target returns, got {target.size}")
    if n_candidates < 1:
        raise ValueError("n_candidates must be >= 1")
    best: tuple[float, simgen.AnyConfig] | None = None
    for i in range(n_candidates):
        rng = np.random.default_rng(np.random.SeedSequence([seed, i]))
        cfg = _sample_candidate(dynamic, rng)
        dist = candidate_distance(cfg, dynamic, target, n_draws,
                                  simgen.child_seed(seed, i, 1))
        if best is None or dist < best[0]:
            best = (dist, cfg)
    return CalibrationResult(config=best[1], distance=best[0],
                             n_evaluated=n_candidates)
