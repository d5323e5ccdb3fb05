"""Threshold maps and the exact risk of soft thresholding.

For X ~ N(mu, 1) the soft-threshold risk has the distribution-function
representation

    R(mu; lam) = integral_0^lam P{|X| > u} d(u^2) + 2 P{|X| > lam} - 1,

obtained by integrating the squared-error identity by parts.  It is
computed here by adaptive quadrature of 2u P{|X| > u} to 1e-10, which the
tests cross-check against direct Monte Carlo.
"""

from __future__ import annotations

import numpy as np
from scipy.special import ndtr

from .quadrature import integrate


def threshold(values, level, mode="soft"):
    """Apply a soft or hard threshold coordinatewise.

    soft: sgn(x) (|x| - level)_+      hard: x 1{|x| > level}
    """
    if level < 0:
        raise ValueError(f"threshold level must be nonnegative, got {level}")
    x = np.asarray(values, dtype=float)
    if mode == "soft":
        return np.sign(x) * np.maximum(np.abs(x) - level, 0.0)
    if mode == "hard":
        return np.where(np.abs(x) > level, x, 0.0)
    raise ValueError(f"unknown threshold mode {mode!r}")


def _two_sided_tail(u, mu):
    # P{|N(mu,1)| > u} = P{N > u} + P{N < -u}
    return ndtr(mu - u) + ndtr(-u - mu)


def soft_threshold_risk(mu, level, *, tol=1e-10):
    """Mean squared error of soft thresholding at ``level`` when X ~ N(mu, 1).

    Equals 1 at level 0 (the identity map) and approaches level**2 + 1 as
    |mu| grows.  Monotone in |mu|.
    """
    if level < 0:
        raise ValueError(f"threshold level must be nonnegative, got {level}")
    mu = float(mu)
    lam = float(level)
    if lam == 0.0:
        return 1.0
    body = integrate(
        lambda u: 2.0 * u * _two_sided_tail(u, mu), 0.0, lam, tol=tol
    )
    return body + 2.0 * _two_sided_tail(lam, mu) - 1.0
