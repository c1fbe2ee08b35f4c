"""Gaussian window statistics and the two divergences used for segmentation.

Two measures decide whether the halves of a feature window come from
different speakers:

* delta BIC: log-likelihood gain of modeling the halves with separate
  full-covariance Gaussians, minus a complexity penalty. Needs three
  covariance fits per evaluation (whole window plus both halves).
* Hotelling's T^2: squared Mahalanobis distance between the half means
  under the pooled covariance. Needs a single covariance fit, which is
  why it is the cheap pre-filter.

A ComputeCounter tracks covariance fits and divergence evaluations so the
relative cost of the two methods can be measured exactly.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DimensionMismatch, SingularCovariance, WindowTooSmall

DEFAULT_REGULARIZATION_EPS = 1e-6


@dataclass
class ComputeCounter:
    """Monotone counters for divergence cost accounting."""

    covariance_count: int = 0
    delta_bic_count: int = 0
    t2_count: int = 0

    def merge(self, other: "ComputeCounter") -> None:
        self.covariance_count += other.covariance_count
        self.delta_bic_count += other.delta_bic_count
        self.t2_count += other.t2_count

    def snapshot(self) -> dict:
        return {
            "covariance_count": self.covariance_count,
            "delta_bic_count": self.delta_bic_count,
            "t2_count": self.t2_count,
        }


@dataclass(frozen=True)
class BicConfig:
    """Penalty settings for delta BIC.

    delta_k defaults to the parameter count of one extra full-covariance
    Gaussian, d + d(d+1)/2 (90 for d = 12). Natural log throughout.
    """

    lambda_: float = 1.0
    delta_k: int | None = None
    regularization_eps: float = DEFAULT_REGULARIZATION_EPS

    def __post_init__(self):
        if self.lambda_ < 0:
            raise ValueError("lambda_ must be non-negative")
        if self.delta_k is not None and self.delta_k <= 0:
            raise ValueError("delta_k must be positive")

    def resolve_delta_k(self, d: int) -> int:
        if self.delta_k is not None:
            return self.delta_k
        return d + d * (d + 1) // 2


@dataclass(frozen=True)
class GaussianStats:
    """Sample mean and covariance of a window of feature rows."""

    mean: np.ndarray
    covariance: np.ndarray
    log_det: float
    n: int
    estimator: str            # "mle" (divide by n) or "unbiased" (n - 1)
    regularized: bool = False


def _as_window(rows) -> np.ndarray:
    w = np.asarray(rows, dtype=np.float64)
    if w.ndim == 1:
        w = w[:, None]
    return w


def gaussian_fit(
    window,
    estimator: str = "mle",
    regularization_eps: float = DEFAULT_REGULARIZATION_EPS,
    counter: ComputeCounter | None = None,
) -> GaussianStats:
    """Fit mean and covariance to a window of shape (n, d).

    Near-singular covariances get a ridge of (eps * trace / d) * I so the
    log-determinant stays finite; a zero covariance (all rows equal) falls
    back to eps * I. Counts one covariance computation.
    """
    w = _as_window(window)
    n, d = w.shape
    if n < 2:
        raise WindowTooSmall(f"covariance fit needs >= 2 rows, got {n}")
    if estimator not in ("mle", "unbiased"):
        raise ValueError(f"unknown estimator '{estimator}'")

    mean = w.mean(axis=0)
    centered = w - mean
    divisor = n if estimator == "mle" else n - 1
    cov = (centered.T @ centered) / divisor

    regularized = False
    if regularization_eps > 0.0:
        trace = float(np.trace(cov))
        # rounding dust from centering identical rows is O(eps_mach^2 * |x|^2)
        # per dimension; anything at that level is a zero variance, and the
        # proportional ridge below would be dust too
        dust = 1e-24 * max(float(np.mean(w * w)), 1e-30) * d
        if trace <= dust:
            cov = cov + regularization_eps * np.eye(d)
            regularized = True
        else:
            # ridge when the smallest eigenvalue collapses relative to the mean one
            min_eig = float(np.linalg.eigvalsh(cov)[0])
            if min_eig <= regularization_eps * (trace / d):
                cov = cov + (regularization_eps * trace / d) * np.eye(d)
                regularized = True

    sign, log_det = np.linalg.slogdet(cov)
    if sign <= 0 or not np.isfinite(log_det):
        log_det = -np.inf

    if counter is not None:
        counter.covariance_count += 1

    return GaussianStats(
        mean=mean,
        covariance=cov,
        log_det=float(log_det),
        n=n,
        estimator=estimator,
        regularized=regularized,
    )


def gaussian_log_likelihood(window, stats: GaussianStats) -> float:
    """Sum of per-row Gaussian log densities under the fitted parameters."""
    w = _as_window(window)
    d = w.shape[1]
    centered = w - stats.mean
    solved = np.linalg.solve(stats.covariance, centered.T).T
    mahal = np.einsum("ij,ij->i", centered, solved)
    return float(-0.5 * np.sum(mahal + d * np.log(2.0 * np.pi) + stats.log_det))


def delta_bic(
    x_window,
    y_window,
    cfg: BicConfig | None = None,
    counter: ComputeCounter | None = None,
) -> float:
    """Penalized likelihood gain of splitting the pooled window at the boundary.

    Evaluates (Ns/2) ln|C_s| - (Nx/2) ln|C_x| - (Ny/2) ln|C_y|
    - (lambda/2) * delta_k * ln(Ns) with MLE covariances, which equals the
    two-model log-likelihood difference at the fitted parameters. Positive
    values indicate the halves are better modeled separately, i.e. a
    speaker change. Counts three covariance computations.
    """
    cfg = cfg or BicConfig()
    x = _as_window(x_window)
    y = _as_window(y_window)
    if x.shape[1] != y.shape[1]:
        raise DimensionMismatch(f"window dims differ: {x.shape[1]} vs {y.shape[1]}")
    if x.shape[0] < 2 or y.shape[0] < 2:
        raise WindowTooSmall("each sub-window needs >= 2 rows")

    s = np.concatenate([x, y], axis=0)
    eps = cfg.regularization_eps
    stats_s = gaussian_fit(s, "mle", eps, counter)
    stats_x = gaussian_fit(x, "mle", eps, counter)
    stats_y = gaussian_fit(y, "mle", eps, counter)

    n_s, n_x, n_y = stats_s.n, stats_x.n, stats_y.n
    d = x.shape[1]
    penalty = 0.5 * cfg.lambda_ * cfg.resolve_delta_k(d) * np.log(n_s)
    value = (
        0.5 * n_s * stats_s.log_det
        - 0.5 * n_x * stats_x.log_det
        - 0.5 * n_y * stats_y.log_det
        - penalty
    )

    if counter is not None:
        counter.delta_bic_count += 1
    return float(value)


def hotelling_t2(
    x_window,
    y_window,
    regularization_eps: float = DEFAULT_REGULARIZATION_EPS,
    counter: ComputeCounter | None = None,
) -> float:
    """Hotelling's two-sample T^2 between the sub-window means.

    T^2 = (Nx * Ny / Ns) * (mx - my)' Sigma^-1 (mx - my), where Sigma is the
    unbiased covariance of the pooled window. Counts a single covariance
    computation. Pass regularization_eps=0 to get SingularCovariance instead
    of a ridge on degenerate windows.
    """
    x = _as_window(x_window)
    y = _as_window(y_window)
    if x.shape[1] != y.shape[1]:
        raise DimensionMismatch(f"window dims differ: {x.shape[1]} vs {y.shape[1]}")
    if x.shape[0] < 1 or y.shape[0] < 1:
        raise WindowTooSmall("each sub-window needs >= 1 row")

    s = np.concatenate([x, y], axis=0)
    if s.shape[0] < 2:
        raise WindowTooSmall("pooled window needs >= 2 rows")

    stats = gaussian_fit(s, "unbiased", regularization_eps, counter)
    if regularization_eps <= 0.0 and not np.isfinite(stats.log_det):
        raise SingularCovariance("pooled covariance is singular")

    n_x, n_y = x.shape[0], y.shape[0]
    diff = x.mean(axis=0) - y.mean(axis=0)
    try:
        solved = np.linalg.solve(stats.covariance, diff)
    except np.linalg.LinAlgError as exc:
        raise SingularCovariance(str(exc)) from exc
    value = (n_x * n_y / (n_x + n_y)) * float(diff @ solved)

    if counter is not None:
        counter.t2_count += 1
    # the quadratic form is non-negative up to roundoff
    return max(0.0, value)
