"""Exact compound-risk computations for finite mixing distributions.

A mean parameter theta drawn from a discrete distribution G and observed
through X ~ N(theta, 1) yields the marginal density

    phi_G(x) = sum_i w_i phi(x - u_i),

whose score determines the posterior-mean (Tweedie) rule
t*(x) = x + phi_G'(x) / phi_G(x).  This module computes that rule, the
risk of any separable rule against G, the corresponding Bayes risk, the
signal-mass functionals used by the hybrid branch decision, and the
oracle-approximation bound suite.  Everything here is deterministic
quadrature-grade arithmetic; it serves as the reference oracle for the
estimation code.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .kde import KernelDensityEstimate, kde_eval
from .quadrature import integrate
from .thresholds import soft_threshold_risk, threshold

_INV_SQRT_2PI = 1.0 / math.sqrt(2.0 * math.pi)
DENSITY_FLOOR_LIMIT = _INV_SQRT_2PI  # valid floors satisfy 0 < rho < this
_TAIL_PAD = 8.0  # integration window extends this many sigmas past the atoms
_WEIGHT_TOL = 1e-12


# ---------------------------------------------------------------------------
# mixing distributions


@dataclass(frozen=True, eq=False)
class MixingDistribution:
    """Finitely supported mixing distribution.

    Atoms are sorted by location, duplicates merged, weights nonnegative
    and summing to one within 1e-12.  Instances are immutable; build them
    through :func:`from_atoms`, :func:`point_mass` or
    :func:`empirical_mixing`.
    """

    locations: np.ndarray
    weights: np.ndarray

    def __post_init__(self):
        locs = np.asarray(self.locations, dtype=float)
        wts = np.asarray(self.weights, dtype=float)
        if locs.ndim != 1 or locs.shape != wts.shape or locs.size == 0:
            raise ValueError("locations and weights must be matching nonempty 1-d arrays")
        if not (np.all(np.isfinite(locs)) and np.all(np.isfinite(wts))):
            raise ValueError("atoms must be finite")
        if np.any(wts < 0):
            raise ValueError("weights must be nonnegative")
        if abs(float(wts.sum()) - 1.0) > _WEIGHT_TOL:
            raise ValueError(f"weights sum to {float(wts.sum())}, expected 1 within {_WEIGHT_TOL}")
        if np.any(np.diff(locs) <= 0):
            raise ValueError("locations must be strictly increasing; use from_atoms to merge")
        locs.setflags(write=False)
        wts.setflags(write=False)
        object.__setattr__(self, "locations", locs)
        object.__setattr__(self, "weights", wts)

    @property
    def atom_count(self) -> int:
        return self.locations.size

    def support_window(self, pad: float = _TAIL_PAD) -> tuple[float, float]:
        """Window [min atom - pad, max atom + pad] carrying the marginal mass."""
        return float(self.locations[0]) - pad, float(self.locations[-1]) + pad


def from_atoms(locations, weights) -> MixingDistribution:
    """Build a mixing distribution, sorting atoms and merging duplicates."""
    locs = np.asarray(locations, dtype=float).ravel()
    wts = np.asarray(weights, dtype=float).ravel()
    if locs.size != wts.size:
        raise ValueError("locations and weights must have equal length")
    order = np.argsort(locs, kind="stable")
    locs = locs[order]
    wts = wts[order]
    uniq, inverse = np.unique(locs, return_inverse=True)
    merged = np.zeros(uniq.size)
    np.add.at(merged, inverse, wts)
    return MixingDistribution(uniq, merged)


def point_mass(location) -> MixingDistribution:
    return MixingDistribution(np.array([float(location)]), np.array([1.0]))


def empirical_mixing(values, scale) -> MixingDistribution:
    """Empirical distribution of ``values / scale``.

    Each of the n values contributes weight 1/n; coincident rescaled
    values merge into a single atom.
    """
    vals = np.asarray(values, dtype=float).ravel()
    if vals.size == 0:
        raise ValueError("cannot build an empirical mixing distribution from no values")
    scale = float(scale)
    if not scale > 0:
        raise ValueError(f"scale must be positive, got {scale}")
    if not np.all(np.isfinite(vals)):
        raise ValueError("values must be finite")
    return from_atoms(vals / scale, np.full(vals.size, 1.0 / vals.size))


def mix(first: MixingDistribution, second: MixingDistribution, weight_first: float) -> MixingDistribution:
    """Convex combination of two mixing distributions."""
    w = float(weight_first)
    if not 0.0 <= w <= 1.0:
        raise ValueError("mixing weight must lie in [0, 1]")
    return from_atoms(
        np.concatenate([first.locations, second.locations]),
        np.concatenate([w * first.weights, (1.0 - w) * second.weights]),
    )


def gaussian_grid_prior(tau=1.0, atoms=201, span=6.0) -> MixingDistribution:
    """Grid discretization of N(0, tau^2) on [-span*tau, span*tau]."""
    if atoms < 2:
        raise ValueError("need at least 2 grid atoms")
    u = np.linspace(-span * tau, span * tau, atoms)
    w = np.exp(-0.5 * (u / tau) ** 2)
    return from_atoms(u, w / w.sum())


def uniform_grid_prior(lo, hi, atoms) -> MixingDistribution:
    """Equal-weight grid on [lo, hi]."""
    if atoms < 2:
        raise ValueError("need at least 2 grid atoms")
    if not hi > lo:
        raise ValueError("need hi > lo")
    u = np.linspace(lo, hi, atoms)
    return from_atoms(u, np.full(atoms, 1.0 / atoms))


# ---------------------------------------------------------------------------
# marginal density and the posterior-mean shift


def mixture_density(prior: MixingDistribution, points):
    """Marginal density of X ~ N(theta, 1), theta ~ prior, and its x-derivative.

    Returns ``(value, derivative)`` with the shape of ``points``.  Raw
    Gaussian sums; far from every atom both outputs underflow to zero.
    """
    pts = np.asarray(points, dtype=float)
    scalar = pts.ndim == 0
    x = np.atleast_1d(pts).astype(float)
    d = x[:, None] - prior.locations[None, :]
    kern = _INV_SQRT_2PI * np.exp(-0.5 * d * d)
    value = kern @ prior.weights
    deriv = (-d * kern) @ prior.weights
    if scalar:
        return float(value[0]), float(deriv[0])
    return value.reshape(pts.shape), deriv.reshape(pts.shape)


def _posterior_shift(prior: MixingDistribution, x):
    """phi_G'(x)/phi_G(x), evaluated stably for any finite x.

    The shared Gaussian scale factor cancels in the ratio, so exponents
    are re-centered per point before exponentiation; the result never
    degenerates to 0/0 even when the raw density underflows.
    """
    d = x[:, None] - prior.locations[None, :]
    e = 0.5 * d * d
    e -= e.min(axis=1, keepdims=True)
    r = np.exp(-e) * prior.weights[None, :]
    den = r.sum(axis=1)
    num = (-d * r).sum(axis=1)
    return num / den


# ---------------------------------------------------------------------------
# separable rules


class ScalarRule:
    """A deterministic coordinatewise estimator map.

    Subclasses implement ``__call__`` accepting any finite real (scalar or
    array) and returning values of the same shape.  ``breakpoints`` lists
    points where the map is not smooth, for quadrature splitting.
    """

    def __call__(self, x):
        raise NotImplementedError

    def breakpoints(self) -> tuple:
        return ()

    def _wrap(self, pts, values):
        return float(values[0]) if np.ndim(pts) == 0 else values.reshape(np.shape(pts))

    def _flat(self, pts):
        x = np.atleast_1d(np.asarray(pts, dtype=float)).ravel()
        if not np.all(np.isfinite(x)):
            raise ValueError("rule inputs must be finite")
        return x


@dataclass(frozen=True)
class IdentityRule(ScalarRule):
    def __call__(self, x):
        return self._wrap(x, self._flat(x).copy())


@dataclass(frozen=True)
class ZeroRule(ScalarRule):
    def __call__(self, x):
        return self._wrap(x, np.zeros_like(self._flat(x)))


@dataclass(frozen=True)
class SoftThresholdRule(ScalarRule):
    level: float

    def __call__(self, x):
        return self._wrap(x, threshold(self._flat(x), self.level, "soft"))

    def breakpoints(self):
        return (-self.level, self.level)


@dataclass(frozen=True)
class HardThresholdRule(ScalarRule):
    level: float

    def __call__(self, x):
        return self._wrap(x, threshold(self._flat(x), self.level, "hard"))

    def breakpoints(self):
        return (-self.level, self.level)


@dataclass(frozen=True)
class LinearShrinkRule(ScalarRule):
    """x -> factor * x; the per-block form of spherical shrinkage."""

    factor: float

    def __call__(self, x):
        return self._wrap(x, self.factor * self._flat(x))


@dataclass(frozen=True, eq=False)
class OracleRule(ScalarRule):
    """Posterior-mean rule for a known mixing distribution."""

    prior: MixingDistribution

    def __call__(self, x):
        flat = self._flat(x)
        return self._wrap(x, flat + _posterior_shift(self.prior, flat))


@dataclass(frozen=True, eq=False)
class GebRule(ScalarRule):
    """Plug-in posterior-mean rule from a fitted kernel density.

    x -> x + f_hat'(x) / max(f_hat(x), floor).  The fitted density may go
    negative; only the floor guards the denominator, and the output is
    not clipped.
    """

    density: KernelDensityEstimate
    floor: float

    def __call__(self, x):
        flat = self._flat(x)
        value, deriv = kde_eval(self.density, flat)
        return self._wrap(x, flat + deriv / np.maximum(value, self.floor))


def oracle_rule(prior: MixingDistribution) -> OracleRule:
    """Posterior-mean rule t*(x) = x + phi_G'(x)/phi_G(x) for ``prior``."""
    return OracleRule(prior)


# ---------------------------------------------------------------------------
# risks


def rule_risk(rule: ScalarRule, prior: MixingDistribution, *, tol=1e-8) -> float:
    """Compound risk of a separable rule: E (rule(X) - theta)^2, theta ~ prior.

    Soft-threshold rules use the exact per-atom risk formula; every other
    rule is integrated over the mass window [min atom - 8, max atom + 8]
    with panel edges at the rule's breakpoints.
    """
    if isinstance(rule, SoftThresholdRule):
        return float(
            sum(
                w * soft_threshold_risk(u, rule.level)
                for u, w in zip(prior.locations, prior.weights)
            )
        )
    lo, hi = prior.support_window()

    def integrand(x):
        t = np.asarray(rule(x), dtype=float)
        d = x[:, None] - prior.locations[None, :]
        err = t[:, None] - prior.locations[None, :]
        kern = _INV_SQRT_2PI * np.exp(-0.5 * d * d)
        return (err * err * kern) @ prior.weights

    return integrate(integrand, lo, hi, tol=tol, breakpoints=rule.breakpoints())


def bayes_risk(prior: MixingDistribution, *, tol=1e-8) -> float:
    """Risk of the posterior-mean rule: 1 - E (phi_G'/phi_G)^2(X).

    Exactly zero for a point mass.  The quadrature result is clamped to
    [0, 1]; tiny negatives from roundoff are zeroed.
    """
    if prior.atom_count == 1:
        return 0.0
    lo, hi = prior.support_window()

    def integrand(x):
        shift = _posterior_shift(prior, x)
        value, _ = mixture_density(prior, x)
        return shift * shift * value

    fisher = integrate(integrand, lo, hi, tol=tol)
    return min(max(1.0 - fisher, 0.0), 1.0)


# ---------------------------------------------------------------------------
# signal-mass summaries


@dataclass(frozen=True)
class MixtureSummary:
    """Signal-mass functionals of a mixing distribution.

    kappa       = sum w (u^2 and 1, whichever is smaller)
    kappa_tilde = 1 - sum w exp(-u^2/4)
    tail_at_x   = mass strictly outside [-x, x]
    mu_p        = (sum w |u|^p)^(1/p), the p-th moment norm

    The exact sandwich (e-1)/(4e) * kappa <= kappa_tilde <= kappa holds
    for every instance.
    """

    kappa: float
    kappa_tilde: float
    tail_at_x: float
    mu_p: float


def mixture_summaries(prior: MixingDistribution, p, x) -> MixtureSummary:
    """Compute the signal-mass summary at moment order ``p`` and tail point ``x``."""
    p = float(p)
    x = float(x)
    if not p > 0:
        raise ValueError(f"moment order must be positive, got {p}")
    if x < 0:
        raise ValueError(f"tail point must be nonnegative, got {x}")
    u = prior.locations
    w = prior.weights
    kappa = float(w @ np.minimum(u * u, 1.0))
    kappa_tilde = float(1.0 - w @ np.exp(-0.25 * u * u))
    tail = float(w[np.abs(u) > x].sum())
    if math.isinf(p):
        mu_p = float(np.abs(u[w > 0]).max())
    else:
        mu_p = float((w @ np.abs(u) ** p) ** (1.0 / p))
    return MixtureSummary(kappa=kappa, kappa_tilde=kappa_tilde, tail_at_x=tail, mu_p=mu_p)


# ---------------------------------------------------------------------------
# oracle-approximation bounds


def _check_floor(rho) -> float:
    rho = float(rho)
    if not 0.0 < rho < DENSITY_FLOOR_LIMIT:
        raise ValueError(
            f"density floor must lie in (0, {DENSITY_FLOOR_LIMIT:.6f}), got {rho}"
        )
    return rho


def _check_size(n) -> int:
    n = int(n)
    if n < 3:
        raise ValueError(f"sample size must be at least 3, got {n}")
    return n


def density_floor_loss(rho, prior: MixingDistribution, *, tol=1e-8) -> float:
    """Risk lost to flooring the marginal density at ``rho``.

    integral of (phi_G'/phi_G)^2 (1 - phi_G/(phi_G v rho))^2 phi_G over
    the mass window.  The integrand has kinks where phi_G crosses rho;
    those crossings are located by scan-and-bisect and passed to the
    quadrature as panel edges.
    """
    rho = _check_floor(rho)
    lo, hi = prior.support_window()

    def factor(x):
        shift = _posterior_shift(prior, x)
        value, _ = mixture_density(prior, x)
        damp = 1.0 - value / np.maximum(value, rho)
        return shift * shift * damp * damp * value

    return integrate(
        factor, lo, hi, tol=tol, breakpoints=_floor_crossings(prior, rho, lo, hi)
    )


def _floor_crossings(prior, rho, lo, hi, scan=4096):
    """Solutions of phi_G(x) = rho located by bisection on a scan grid."""
    grid = np.linspace(lo, hi, scan)
    value, _ = mixture_density(prior, grid)
    sign = np.sign(value - rho)
    flips = np.nonzero(np.diff(sign) != 0)[0]
    roots = []
    for i in flips:
        a, b = grid[i], grid[i + 1]
        fa = float(mixture_density(prior, a)[0] - rho)
        for _ in range(60):
            m = 0.5 * (a + b)
            fm = float(mixture_density(prior, m)[0] - rho)
            if (fa < 0) == (fm < 0):
                a, fa = m, fm
            else:
                b = m
        roots.append(0.5 * (a + b))
    return tuple(roots)


def kernel_estimation_loss(n, rho) -> float:
    """Closed-form bound on the risk of estimating the score from n draws.

    {sqrt((2/3) log n) + sqrt(-log rho^2)}^2 sqrt(2 log n) / (pi rho n)
    """
    n = _check_size(n)
    rho = _check_floor(rho)
    log_n = math.log(n)
    bracket = math.sqrt(2.0 / 3.0 * log_n) + math.sqrt(-math.log(rho * rho))
    return bracket * bracket * math.sqrt(2.0 * log_n) / (math.pi * rho * n)


def sparse_rate_bound(n, magnitude, p) -> float:
    """Regret rate for p-th-moment-bounded signals of size ``magnitude``.

    min(1, C^p / (log n)^(p/2 - 1),
        max[(log n)^2 / sqrt n, {C (log n)^(3/2) / sqrt n}^(p/(p+1))])
    """
    n = _check_size(n)
    c = float(magnitude)
    p = float(p)
    if c < 0:
        raise ValueError(f"signal magnitude must be nonnegative, got {c}")
    if not p > 0:
        raise ValueError(f"moment order must be positive, got {p}")
    log_n = math.log(n)
    moment_term = c**p / log_n ** (p / 2.0 - 1.0)
    dense = log_n**2 / math.sqrt(n)
    sparse = (c * log_n**1.5 / math.sqrt(n)) ** (p / (p + 1.0))
    return min(1.0, moment_term, max(dense, sparse))


def signal_rate_bound(n, prior: MixingDistribution) -> float:
    """Distribution-specific regret rate.

    min(1, integral_0^{log n} Gbar(sqrt u) du,
        (log n)^2/sqrt n + inf_{x >= 1} [Gbar(x) + x (log n)^(3/2)/sqrt n])

    The inner integral is exact for atomic G (piecewise constant in u) and
    the infimum is attained on the atom magnitudes union {1}.
    """
    n = _check_size(n)
    log_n = math.log(n)
    u = np.abs(prior.locations)
    w = prior.weights
    # integral of Gbar(sqrt t) dt over [0, log n]: each atom contributes
    # weight * min(u^2, log n) since it counts while u^2 > t
    mass_integral = float(w @ np.minimum(u * u, log_n))
    drift = log_n**1.5 / math.sqrt(n)
    candidates = np.unique(np.concatenate([[1.0], u[u > 1.0]]))
    tail_mass = np.array([float(w[u > x].sum()) for x in candidates])
    sparse = float(np.min(tail_mass + candidates * drift))
    return min(1.0, mass_integral, log_n**2 / math.sqrt(n) + sparse)


@dataclass(frozen=True)
class OracleBounds:
    delta: float
    delta_star: float
    r_p: float
    r0: float


def oracle_bound_suite(n, rho, prior: MixingDistribution, p, magnitude) -> OracleBounds:
    """All four oracle-approximation bound functionals in one record."""
    return OracleBounds(
        delta=density_floor_loss(rho, prior),
        delta_star=kernel_estimation_loss(n, rho),
        r_p=sparse_rate_bound(n, magnitude, p),
        r0=signal_rate_bound(n, prior),
    )


def kl_bernoulli(p1, p2) -> float:
    """Kullback-Leibler divergence K(p1, p2) between Bernoulli laws.

    Both arguments must lie strictly inside (0, 1).  Always at least
    2 (p1 - p2)^2.
    """
    p1 = float(p1)
    p2 = float(p2)
    for name, value in (("p1", p1), ("p2", p2)):
        if not 0.0 < value < 1.0:
            raise ValueError(f"{name} must lie strictly in (0, 1), got {value}")
    return p1 * math.log(p1 / p2) + (1.0 - p1) * math.log((1.0 - p1) / (1.0 - p2))
