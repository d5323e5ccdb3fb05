"""Orthonormal periodic wavelet transforms and regression pipelines.

The analysis convention: for a signal of length N = 2^(J+1) the transform
returns levels j = -1, 0, ..., J (sizes 1, 1, 2, ..., 2^J) scaled by
1/sqrt(N), so that i.i.d. N(0, sigma^2) observation noise becomes i.i.d.
N(0, sigma^2/N) coefficient noise and

    sum_jk y_jk^2 = sum_i Y_i^2 / N.

Levels are dictionaries {j: array}; the single coarsest coefficient is
y[-1][0], written (j, k) = (-1, 1) in 1-based text output.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import ndtri

from .blocks import TuningConfig, hybrid_fit
from .sequence import dyadic_sequence, estimate_sequence, _fit_small_block

#: upper quartile of the standard normal, for MAD noise calibration
Z_THREE_QUARTERS = float(ndtri(0.75))

_SQRT_3 = math.sqrt(3.0)
_SQRT_2 = math.sqrt(2.0)

# scaling (low-pass) analysis filters, each with sum h = sqrt 2, sum h^2 = 1;
# "s8" is the 8-tap least-asymmetric family member
_FILTERS = {
    "haar": np.array([1.0 / _SQRT_2, 1.0 / _SQRT_2]),
    "d4": np.array(
        [
            (1.0 + _SQRT_3) / (4.0 * _SQRT_2),
            (3.0 + _SQRT_3) / (4.0 * _SQRT_2),
            (3.0 - _SQRT_3) / (4.0 * _SQRT_2),
            (1.0 - _SQRT_3) / (4.0 * _SQRT_2),
        ]
    ),
    "s8": np.array(
        [
            -0.07576571478927333,
            -0.02963552764599851,
            0.49761866763201545,
            0.8037387518059161,
            0.29785779560527736,
            -0.09921954357684722,
            -0.012603967262037833,
            0.03222310060404270,
        ]
    ),
}


@dataclass(frozen=True, eq=False)
class WaveletBasis:
    """Orthonormal two-channel filter bank with periodic boundary."""

    name: str
    lowpass: np.ndarray
    highpass: np.ndarray

    def __post_init__(self):
        h = np.asarray(self.lowpass, dtype=float)
        g = np.asarray(self.highpass, dtype=float)
        if h.size % 2 or h.size < 2 or g.size != h.size:
            raise ValueError("filters must share an even length >= 2")
        if abs(float(h @ h) - 1.0) > 1e-12:
            raise ValueError(f"lowpass filter of {self.name!r} is not unit-norm")
        for shift in range(2, h.size, 2):
            if abs(float(h[:-shift] @ h[shift:])) > 1e-12:
                raise ValueError(
                    f"lowpass filter of {self.name!r} fails double-shift orthogonality"
                )
        h.setflags(write=False)
        g.setflags(write=False)
        object.__setattr__(self, "lowpass", h)
        object.__setattr__(self, "highpass", g)


def wavelet_basis(name) -> WaveletBasis:
    """Look up one of the built-in bases: haar, d4, s8."""
    try:
        h = _FILTERS[name]
    except KeyError:
        raise ValueError(f"unknown wavelet basis {name!r}; choose from {sorted(_FILTERS)}")
    g = ((-1.0) ** np.arange(h.size)) * h[::-1]
    return WaveletBasis(name=name, lowpass=h, highpass=g)


def _window_indices(m, taps):
    k = np.arange(m // 2)[:, None]
    i = np.arange(taps)[None, :]
    return (2 * k + i) % m


def _analysis_step(x, basis):
    idx = _window_indices(x.size, basis.lowpass.size)
    windows = x[idx]
    # multiply-then-sum, not matmul: fused multiply-adds would leave
    # rounding residue where the two-tap bank cancels a constant exactly
    approx = (windows * basis.lowpass).sum(axis=1)
    detail = (windows * basis.highpass).sum(axis=1)
    return approx, detail


def _synthesis_step(approx, detail, basis):
    m = 2 * approx.size
    idx = _window_indices(m, basis.lowpass.size)
    out = np.zeros(m)
    contrib = approx[:, None] * basis.lowpass[None, :] + detail[:, None] * basis.highpass[None, :]
    np.add.at(out, idx, contrib)
    return out


def _check_dyadic_length(n) -> int:
    if n < 2 or n & (n - 1):
        raise ValueError(
            f"signal length must be a power of two of at least 2, got {n}"
        )
    return int(math.log2(n)) - 1  # J


def dwt(signal, basis: WaveletBasis):
    """Full periodic analysis of a length-2^(J+1) signal.

    Returns {j: coefficients} for j = -1 .. J under the 1/sqrt(N)
    normalization described in the module docstring.
    """
    x = np.asarray(signal, dtype=float).ravel()
    j_max = _check_dyadic_length(x.size)
    if not np.all(np.isfinite(x)):
        raise ValueError("signal must be finite")
    scale = 1.0 / math.sqrt(x.size)
    levels = {}
    approx = x
    j = j_max
    while approx.size > 1:
        approx, detail = _analysis_step(approx, basis)
        levels[j] = scale * detail
        j -= 1
    levels[-1] = scale * approx
    return dict(sorted(levels.items()))


def idwt(levels, basis: WaveletBasis):
    """Inverse of :func:`dwt`; accepts the same {j: array} layout."""
    levels = {int(j): np.asarray(v, dtype=float).ravel() for j, v in dict(levels).items()}
    js = sorted(levels)
    if js[0] != -1 or levels[-1].size != 1:
        raise ValueError("levels must start at j = -1 with a single coefficient")
    n_total = sum(v.size for v in levels.values())
    _check_dyadic_length(n_total)
    approx = levels[-1].copy()
    for j in js[1:]:
        detail = levels[j]
        if detail.size != approx.size:
            raise ValueError(f"level {j} has size {detail.size}, expected {approx.size}")
        approx = _synthesis_step(approx, detail, basis)
    return approx * math.sqrt(n_total)


def mad_sigma(finest, n_signal) -> float:
    """Median-absolute-deviation noise scale from the finest-level details.

    sqrt(N) median(|y_Jk|) / z_{0.75}; an even count takes the midpoint of
    the central order statistics.  All-zero input gives 0.
    """
    y = np.asarray(finest, dtype=float).ravel()
    if y.size == 0:
        raise ValueError("need at least one finest-level coefficient")
    n_signal = int(n_signal)
    if n_signal < 1:
        raise ValueError("signal length must be positive")
    return math.sqrt(n_signal) * float(np.median(np.abs(y))) / Z_THREE_QUARTERS


@dataclass(frozen=True)
class EquispacedReport:
    """Noise calibration and per-level branch diagnostics of a denoise run."""

    sigma_hat: float
    epsilon: float
    levels: tuple
    fits: tuple


def denoise_equispaced(observations, basis: WaveletBasis, cfg: TuningConfig = TuningConfig(), sigma=None, *, kde_mode="direct"):
    """Shrink an equispaced noisy signal in the given wavelet basis.

    Analyzes, calibrates the noise scale (MAD on the finest level unless
    ``sigma`` is given), runs the blockwise hybrid estimator on the dyadic
    level structure, and synthesizes.  Returns ``(estimate, report)``.  A
    zero noise scale short-circuits: the observations are returned as the
    estimate.
    """
    y = np.asarray(observations, dtype=float).ravel()
    levels = dwt(y, basis)
    j_max = max(levels)
    n = y.size
    sigma_hat = mad_sigma(levels[j_max], n) if sigma is None else float(sigma)
    if sigma_hat < 0:
        raise ValueError(f"sigma must be nonnegative, got {sigma_hat}")
    if sigma_hat == 0.0:
        return y.copy(), EquispacedReport(sigma_hat=0.0, epsilon=0.0, levels=(), fits=())
    epsilon = sigma_hat / math.sqrt(n)
    seq = dyadic_sequence(epsilon, levels)
    estimates, fits = estimate_sequence(seq, cfg, kde_mode=kde_mode)
    shrunk = {j: est for (j, _), est in zip(seq.blocks, estimates)}
    f_hat = idwt(shrunk, basis)
    return f_hat, EquispacedReport(
        sigma_hat=sigma_hat,
        epsilon=epsilon,
        levels=tuple(j for j, _ in seq.blocks),
        fits=tuple(fits),
    )


# ---------------------------------------------------------------------------
# Haar analysis of piecewise-constant functions and random-design regression


def haar_coefficients(cell_values, j_max=None):
    """Haar coefficients of a function constant on 2^(J+1) dyadic cells.

    beta_{j,k} = (mean over left child - mean over right child) / 2^(j/2+1)
    for j >= 0, and beta_{-1,1} is the global mean.  Returns {j: array}.
    """
    cells = np.asarray(cell_values, dtype=float).ravel()
    j_from_len = _check_dyadic_length(cells.size)
    if j_max is not None and int(j_max) != j_from_len:
        raise ValueError(
            f"cell count {cells.size} encodes resolution {j_from_len}, not {j_max}"
        )
    levels = {}
    current = cells
    for j in range(j_from_len, -1, -1):
        left = current[0::2]
        right = current[1::2]
        levels[j] = (left - right) / 2.0 ** (0.5 * j + 1.0)
        current = 0.5 * (left + right)
    levels[-1] = current.copy()
    return dict(sorted(levels.items()))


def haar_reconstruct(levels):
    """Inverse of :func:`haar_coefficients`: cell values on the finest grid."""
    levels = {int(j): np.asarray(v, dtype=float).ravel() for j, v in dict(levels).items()}
    js = sorted(levels)
    if js[0] != -1 or levels[-1].size != 1:
        raise ValueError("levels must start at j = -1 with a single coefficient")
    current = levels[-1].copy()
    for j in js[1:]:
        beta = levels[j]
        if beta.size != current.size:
            raise ValueError(f"level {j} has size {beta.size}, expected {current.size}")
        bump = beta * 2.0 ** (0.5 * j)
        out = np.empty(2 * current.size)
        out[0::2] = current + bump
        out[1::2] = current - bump
        current = out
    return current


@dataclass(frozen=True, eq=False)
class RandomDesignData:
    """Standardized Haar contrasts of responses at random design points.

    counts[j][k-1]   number of design points in cell ((k-1)/2^j, k/2^j],
                     for j = 0 .. J+1
    deltas[j]        1 where both children of cell (j, k) are nonempty
                     (always 1 at j = -1), else 0
    coefficients[j]  the standardized contrast where delta is 1, else 0;
                     each has conditional noise variance sigma^2 / N
    effective[j]     number of usable coefficients at level j
    """

    t: np.ndarray
    y: np.ndarray
    j_max: int
    counts: dict
    deltas: dict
    coefficients: dict
    effective: dict

    @property
    def n_points(self) -> int:
        return self.t.size


def random_design_transform(t, y, j_max) -> RandomDesignData:
    """Cell counts, indicators and standardized contrasts up to level ``j_max``."""
    t = np.asarray(t, dtype=float).ravel()
    y = np.asarray(y, dtype=float).ravel()
    if t.size == 0:
        raise ValueError("need at least one design point")
    if t.shape != y.shape:
        raise ValueError("design points and responses must have equal length")
    if not (np.all(np.isfinite(t)) and np.all(np.isfinite(y))):
        raise ValueError("inputs must be finite")
    if np.any(t <= 0.0) or np.any(t > 1.0):
        raise ValueError("design points must lie in (0, 1]")
    j_max = int(j_max)
    if j_max < 0:
        raise ValueError(f"j_max must be nonnegative, got {j_max}")
    n = t.size

    counts = {}
    sums = {}
    for j in range(0, j_max + 2):
        cells = 2**j
        k = np.ceil(t * cells).astype(int)  # 1-based cell index, right-closed cells
        np.clip(k, 1, cells, out=k)
        counts[j] = np.bincount(k - 1, minlength=cells)
        sums[j] = np.bincount(k - 1, weights=y, minlength=cells)

    means = {
        j: np.divide(sums[j], counts[j], out=np.zeros(counts[j].size), where=counts[j] > 0)
        for j in counts
    }

    deltas = {-1: np.array([1], dtype=int)}
    coefficients = {-1: np.array([means[0][0]])}
    effective = {-1: 1}
    root_n = math.sqrt(n)
    for j in range(0, j_max + 1):
        left_n = counts[j + 1][0::2]
        right_n = counts[j + 1][1::2]
        usable = (left_n > 0) & (right_n > 0)
        delta = usable.astype(int)
        coef = np.zeros(delta.size)
        if np.any(usable):
            diff = means[j + 1][0::2][usable] - means[j + 1][1::2][usable]
            spread = np.sqrt(1.0 / left_n[usable] + 1.0 / right_n[usable])
            coef[usable] = diff / (root_n * spread)
        deltas[j] = delta
        coefficients[j] = coef
        effective[j] = int(delta.sum())

    t_ro = t.copy()
    y_ro = y.copy()
    t_ro.setflags(write=False)
    y_ro.setflags(write=False)
    return RandomDesignData(
        t=t_ro,
        y=y_ro,
        j_max=j_max,
        counts=counts,
        deltas=deltas,
        coefficients=coefficients,
        effective=effective,
    )


@dataclass(frozen=True)
class RandomDesignReport:
    """Per-level diagnostics of a random-design fit."""

    epsilon: float
    levels: tuple
    fits: tuple
    effective: tuple


def random_design_estimate(data: RandomDesignData, cfg: TuningConfig = TuningConfig(), sigma=1.0, *, kde_mode="direct"):
    """Estimate the regression function from standardized Haar contrasts.

    Where the usability indicator is zero the coefficient estimate is
    zero.  Levels whose usable count reaches cfg.n_star run the hybrid
    fit on the standardized values; smaller levels follow the small-block
    policy.  ``sigma = 0`` short-circuits to the identity on the raw
    contrasts.  Returns ``(cell_values, report)`` where ``cell_values``
    is the estimated function on the 2^(J+1) finest dyadic cells.
    """
    sigma = float(sigma)
    if sigma < 0:
        raise ValueError(f"sigma must be nonnegative, got {sigma}")
    estimates = {}
    fits = []
    levels = sorted(data.coefficients)
    if sigma == 0.0:
        estimates = {j: data.coefficients[j].copy() for j in levels}
        cells = haar_reconstruct(estimates)
        return cells, RandomDesignReport(
            epsilon=0.0, levels=tuple(levels), fits=(), effective=tuple(data.effective[j] for j in levels)
        )
    epsilon = sigma / math.sqrt(data.n_points)
    for j in levels:
        coef = data.coefficients[j]
        mask = data.deltas[j] == 1
        beta_hat = np.zeros(coef.size)
        active = coef[mask]
        if active.size:
            x = active / epsilon
            if active.size >= cfg.n_star:
                fit = hybrid_fit(x, cfg, kde_mode=kde_mode)
            else:
                fit = _fit_small_block(x, epsilon, cfg)
            beta_hat[mask] = epsilon * np.asarray(fit.rule(x), dtype=float)
            fits.append(fit)
        else:
            fits.append(None)
        estimates[j] = beta_hat
    cells = haar_reconstruct(estimates)
    return cells, RandomDesignReport(
        epsilon=epsilon,
        levels=tuple(levels),
        fits=tuple(fits),
        effective=tuple(data.effective[j] for j in levels),
    )
