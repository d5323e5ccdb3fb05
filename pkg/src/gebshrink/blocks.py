"""Blockwise estimation of standardized normal means.

Given one block of observations X_k = theta_k + z_k with unit noise, the
hybrid estimator either applies the kernel plug-in posterior-mean rule or
falls back to soft thresholding at the universal level, depending on
whether the signal-mass statistic

    kappa_hat = 1 - (sqrt 2 / n) sum_k exp(-X_k^2 / 2)

exceeds the schedule b(n) = b0 log(n) / sqrt(n).  All logarithms are
natural.  The density floor follows rho(n) = (1 + eta_n) rho0
sqrt(2 log(n) / n) and the threshold uses sqrt(2 (1 + A0) log n).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, NamedTuple

import numpy as np

from .errors import InvalidConfigError
from .kde import kde_fit
from .mixture import (
    DENSITY_FLOOR_LIMIT,
    GebRule,
    ScalarRule,
    SoftThresholdRule,
)
from .thresholds import soft_threshold_risk, threshold  # noqa: F401  (re-export)

#: density-floor coefficient matching the balanced-rate schedule
RHO0_BALANCED = 0.6094

_POLICIES = ("mle", "james_stein")


@dataclass(frozen=True)
class TuningConfig:
    """Tuning constants for the hybrid fit.

    rho0, b0            coefficients of the floor and branch schedules
    eta                 optional callable n -> eta_n perturbing the floor
                        schedule (None means identically zero)
    n_star              smallest block size the hybrid path accepts
    threshold_inflation the A0 in the threshold sqrt(2 (1 + A0) log n)
    small_block_policy  "mle" or "james_stein", applied below n_star
    """

    rho0: float = 0.4
    b0: float = 2.0
    eta: Callable[[int], float] | None = None
    n_star: int = 64
    threshold_inflation: float = 0.0
    small_block_policy: str = "mle"

    def __post_init__(self):
        if not self.rho0 > 0:
            raise InvalidConfigError(f"rho0 must be positive, got {self.rho0}")
        if not self.b0 > 0:
            raise InvalidConfigError(f"b0 must be positive, got {self.b0}")
        if self.n_star <= 2:
            raise InvalidConfigError(f"n_star must exceed 2, got {self.n_star}")
        if self.threshold_inflation < 0:
            raise InvalidConfigError(
                f"threshold_inflation must be nonnegative, got {self.threshold_inflation}"
            )
        if self.small_block_policy not in _POLICIES:
            raise InvalidConfigError(
                f"small_block_policy must be one of {_POLICIES}, got {self.small_block_policy!r}"
            )


class TuningValues(NamedTuple):
    rho: float
    b: float
    lam: float


def tuning(n, cfg: TuningConfig = TuningConfig()) -> TuningValues:
    """Evaluate the tuning schedules at block size ``n``.

    Raises InvalidConfigError when the implied density floor reaches
    1/sqrt(2 pi), where the plug-in rule's denominator guard would be
    vacuous.
    """
    n = int(n)
    if n < 3:
        raise ValueError(f"block size must be at least 3, got {n}")
    log_n = math.log(n)
    eta_n = 0.0 if cfg.eta is None else float(cfg.eta(n))
    rho = (1.0 + eta_n) * cfg.rho0 * math.sqrt(2.0 * log_n / n)
    if rho >= DENSITY_FLOOR_LIMIT:
        raise InvalidConfigError(
            f"density floor {rho:.6f} at n={n} reaches the 1/sqrt(2 pi) limit; "
            "reduce rho0 or eta"
        )
    if rho <= 0:
        raise InvalidConfigError(f"density floor {rho:.6f} at n={n} is not positive")
    b = cfg.b0 * log_n / math.sqrt(n)
    lam = math.sqrt(2.0 * (1.0 + cfg.threshold_inflation) * log_n)
    return TuningValues(rho=rho, b=b, lam=lam)


def kappa_hat(values) -> float:
    """Signal-mass statistic 1 - (sqrt 2 / n) sum exp(-X_k^2 / 2).

    Lies in [1 - sqrt 2, 1); summation runs over sorted values so the
    statistic is bit-identical under permutations of the input.
    """
    x = np.asarray(values, dtype=float).ravel()
    if x.size == 0:
        raise ValueError("need at least one value")
    if not np.all(np.isfinite(x)):
        raise ValueError("values must be finite")
    terms = np.exp(-0.5 * np.sort(x) ** 2)
    return 1.0 - math.sqrt(2.0) * float(terms.sum()) / x.size


def geb_rule(values, floor, *, kde_mode="direct") -> GebRule:
    """Kernel plug-in posterior-mean rule fitted to ``values``.

    The rule is x + f_hat'(x) / max(f_hat(x), floor); negative density
    values are kept (only the floor protects the ratio) and the output is
    not clipped.
    """
    floor = float(floor)
    if not 0.0 < floor < DENSITY_FLOOR_LIMIT:
        raise ValueError(
            f"floor must lie in (0, {DENSITY_FLOOR_LIMIT:.6f}), got {floor}"
        )
    return GebRule(density=kde_fit(values, mode=kde_mode), floor=floor)


@dataclass(frozen=True, eq=False)
class FittedBlockRule:
    """Outcome of fitting one block.

    ``branch`` is "geb" or "threshold" for hybrid fits, "mle" or
    "james_stein" for small-block fallbacks.  For hybrid fits the branch
    is "geb" exactly when kappa_hat > b and n >= n_star.  Schedule fields
    are NaN on fallback branches, where no schedule was evaluated.
    """

    rule: ScalarRule
    branch: str
    kappa_hat: float
    rho: float
    b: float
    lam: float
    n: int

    def __post_init__(self):
        if self.branch in ("geb", "threshold"):
            picked_geb = self.kappa_hat > self.b
            if picked_geb != (self.branch == "geb"):
                raise ValueError(
                    f"branch {self.branch!r} contradicts kappa_hat={self.kappa_hat} "
                    f"vs b={self.b}"
                )


def hybrid_fit(values, cfg: TuningConfig = TuningConfig(), *, kde_mode="direct") -> FittedBlockRule:
    """Fit the hybrid rule to one standardized block.

    Picks the kernel plug-in branch when kappa_hat > b(n), otherwise soft
    thresholding at the universal level.  Requires n >= cfg.n_star.
    """
    x = np.asarray(values, dtype=float).ravel()
    if x.size < cfg.n_star:
        raise ValueError(
            f"hybrid fit needs at least n_star={cfg.n_star} values, got {x.size}"
        )
    if not np.all(np.isfinite(x)):
        raise ValueError("values must be finite")
    vals = tuning(x.size, cfg)
    mass = kappa_hat(x)
    if mass > vals.b:
        rule: ScalarRule = geb_rule(x, vals.rho, kde_mode=kde_mode)
        branch = "geb"
    else:
        rule = SoftThresholdRule(vals.lam)
        branch = "threshold"
    return FittedBlockRule(
        rule=rule,
        branch=branch,
        kappa_hat=mass,
        rho=vals.rho,
        b=vals.b,
        lam=vals.lam,
        n=x.size,
    )


def james_stein(values, epsilon):
    """Positive-part spherical shrinkage toward the origin.

    For n >= 3 returns (1 - (n - 2) eps^2 / ||y||^2)_+ y; the identity for
    n <= 2; exact zeros when ||y|| = 0.  The squared norm is accumulated
    over sorted values so the output is permutation-equivariant bit for
    bit.
    """
    y = np.asarray(values, dtype=float).ravel()
    epsilon = float(epsilon)
    if not epsilon > 0:
        raise ValueError(f"noise scale must be positive, got {epsilon}")
    if not np.all(np.isfinite(y)):
        raise ValueError("values must be finite")
    n = y.size
    if n <= 2:
        return y.copy()
    norm_sq = float(np.sum(np.sort(y) ** 2))
    if norm_sq == 0.0:
        return np.zeros_like(y)
    factor = max(1.0 - (n - 2) * epsilon * epsilon / norm_sq, 0.0)
    return factor * y


def james_stein_factor(values, epsilon) -> float:
    """The scalar shrinkage factor applied by :func:`james_stein`."""
    y = np.asarray(values, dtype=float).ravel()
    n = y.size
    if n <= 2:
        return 1.0
    norm_sq = float(np.sum(np.sort(y) ** 2))
    if norm_sq == 0.0:
        return 0.0
    return max(1.0 - (n - 2) * float(epsilon) ** 2 / norm_sq, 0.0)
