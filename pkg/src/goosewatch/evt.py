"""Peaks-over-threshold calibration of per-view anomaly thresholds.

Reconstruction errors from normal traffic are thresholded at a high
empirical quantile u; the excesses above u are fitted with a Generalized
Pareto Distribution by profile maximum likelihood, and the final decision
threshold is the extreme quantile at risk q:

    z* = u + (sigma/xi) * ((q*n/n_u)^(-xi) - 1)      for xi != 0
    z* = u - sigma * ln(q*n/n_u)                      for xi  = 0

The profile search runs over the reparameterization theta = xi/sigma, for
which xi has the closed form xi(theta) = mean(log1p(theta*y)); candidate
solutions are kept inside xi in [-0.5, 1.0] and refined by golden-section
search. A method-of-moments fallback covers degenerate tails where the
likelihood cannot be bracketed.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np

XI_MIN = -0.5
XI_MAX = 1.0
XI_ZERO_TOL = 1e-6
MIN_EXCEEDANCES = 30
COMFORTABLE_EXCEEDANCES = 100


class TooFewExceedances(ValueError):
    pass


@dataclass
class EvtThreshold:
    view: str
    u: float
    xi: float
    sigma: float
    n: int
    n_u: int
    q: float
    z_star: float

    def to_dict(self) -> dict:
        return {
            "view": self.view,
            "u": self.u,
            "xi": self.xi,
            "sigma": self.sigma,
            "n": self.n,
            "n_u": self.n_u,
            "q": self.q,
            "z_star": self.z_star,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "EvtThreshold":
        return cls(**d)


def _profile(theta: float, y: np.ndarray) -> tuple[float, float, float]:
    """(xi, sigma, log-likelihood) for a fixed theta = xi/sigma."""
    n = y.size
    if abs(theta) < 1e-12:
        sigma = float(y.mean())
        return 0.0, sigma, -n * (math.log(sigma) + 1.0)
    xi = float(np.mean(np.log1p(theta * y)))
    if xi == 0.0 or xi / theta <= 0.0:
        return math.nan, math.nan, -math.inf
    sigma = xi / theta
    return xi, sigma, -n * (math.log(sigma) + xi + 1.0)


def _moments_fallback(y: np.ndarray) -> tuple[float, float]:
    mean = float(y.mean())
    var = float(y.var())
    if var <= 0.0:
        xi = XI_MIN
    else:
        xi = min(max(0.5 * (1.0 - mean**2 / var), XI_MIN), XI_MAX)
    sigma = mean * (1.0 - xi)
    return xi, max(sigma, 1e-12)


def fit_gpd(excesses) -> tuple[float, float]:
    """Maximum-likelihood GPD fit (location 0) for positive excesses.

    Returns (xi, sigma). Requires at least 30 excesses; warns below 100
    and for degenerate tails that force the moments fallback.
    """
    y = np.asarray(excesses, dtype=float)
    if y.ndim != 1:
        y = y.ravel()
    if y.size < MIN_EXCEEDANCES:
        raise TooFewExceedances(f"{y.size} excesses, need >= {MIN_EXCEEDANCES}")
    if np.any(y <= 0) or not np.all(np.isfinite(y)):
        raise ValueError("excesses must be positive finite reals")
    if y.size < COMFORTABLE_EXCEEDANCES:
        warnings.warn(f"only {y.size} excesses; GPD fit may be unstable",
                      stacklevel=2)

    y_max = float(y.max())
    y_mean = float(y.mean())
    if (y_max - float(y.min())) < 1e-12 * max(y_mean, 1e-300):
        warnings.warn("degenerate tail (all excesses equal); moments fallback",
                      stacklevel=2)
        return _moments_fallback(y)

    # candidate grid over theta = xi/sigma, spanning xi in [-0.5, 1.0]
    neg = -(1.0 - np.geomspace(1e-9, 1.0, 400)[:-1]) / y_max
    pos = np.geomspace(1e-9, 1e4, 400) / y_mean
    candidates = np.concatenate((neg, [0.0], pos))

    best = (-math.inf, 0.0)  # (log-likelihood, theta)
    for theta in candidates:
        xi, _sigma, ll = _profile(float(theta), y)
        if math.isfinite(ll) and XI_MIN <= xi <= XI_MAX and ll > best[0]:
            best = (ll, float(theta))
    if not math.isfinite(best[0]):
        warnings.warn("profile likelihood could not be bracketed; moments fallback",
                      stacklevel=2)
        return _moments_fallback(y)

    # golden-section refinement between the grid neighbours of the optimum
    order = np.argsort(candidates)
    ranked = candidates[order]
    i = int(np.searchsorted(ranked, best[1]))
    lo = float(ranked[max(i - 1, 0)])
    hi = float(ranked[min(i + 1, ranked.size - 1)])
    phi = (math.sqrt(5.0) - 1.0) / 2.0
    a, b = lo, hi
    c = b - phi * (b - a)
    d = a + phi * (b - a)
    fc = _profile(c, y)[2]
    fd = _profile(d, y)[2]
    for _ in range(80):
        if fc > fd:
            b, d, fd = d, c, fc
            c = b - phi * (b - a)
            fc = _profile(c, y)[2]
        else:
            a, c, fc = c, d, fd
            d = a + phi * (b - a)
            fd = _profile(d, y)[2]
    theta_best = c if fc > fd else d
    xi, sigma, ll = _profile(float(theta_best), y)
    if not math.isfinite(ll) or ll < best[0]:
        xi, sigma, _ = _profile(best[1], y)
    xi = min(max(xi, XI_MIN), XI_MAX)
    return float(xi), float(sigma)


def pot_quantile(u: float, xi: float, sigma: float, ratio: float) -> float:
    """Extreme quantile above u for exceedance ratio = q*n/n_u."""
    if abs(xi) > XI_ZERO_TOL:
        return u + (sigma / xi) * (ratio ** (-xi) - 1.0)
    return u - sigma * math.log(ratio)


def calibrate(errors, q: float = 1e-3, u_quantile: float = 0.98,
              view: str = "") -> EvtThreshold:
    """Fit the error tail and derive the decision threshold z*.

    ``errors`` must come from normal traffic only; the CLI enforces this
    with its training-purity guard.
    """
    e = np.asarray(errors, dtype=float).ravel()
    if e.size == 0:
        raise TooFewExceedances("no calibration errors")
    if not 0.0 < q < 1.0:
        raise ValueError("risk q must lie in (0, 1)")
    if not 0.0 < u_quantile < 1.0:
        raise ValueError("u_quantile must lie in (0, 1)")

    u = float(np.quantile(e, u_quantile))
    excesses = e[e > u] - u
    n, n_u = int(e.size), int(excesses.size)
    if n_u < MIN_EXCEEDANCES:
        raise TooFewExceedances(
            f"{n_u} exceedances above the {u_quantile} quantile; "
            f"need >= {MIN_EXCEEDANCES} calibration errors in the tail"
        )
    ratio = q * n / n_u
    if ratio > 1.0 + 1e-9:
        raise ValueError(f"risk q={q} exceeds the tail fraction {n_u / n:.4g}")

    xi, sigma = fit_gpd(excesses)
    z_star = max(pot_quantile(u, xi, sigma, ratio), u)
    return EvtThreshold(view=view, u=u, xi=xi, sigma=sigma, n=n, n_u=n_u, q=q,
                        z_star=z_star)
