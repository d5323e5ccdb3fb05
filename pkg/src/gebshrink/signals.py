"""The four standard piecewise test signals, sampled on a regular grid.

Each signal is evaluated at t_i = i/N for i = 1..N from its closed form,
so repeated calls are identical.  The returned noise scale is
sd(samples) / snr, making the sample signal-to-noise ratio exact by
construction.
"""

from __future__ import annotations

import numpy as np

SIGNAL_NAMES = ("blocks", "bumps", "heavisine", "doppler")

_JUMP_T = np.array([0.10, 0.13, 0.15, 0.23, 0.25, 0.40, 0.44, 0.65, 0.76, 0.78, 0.81])
_BLOCKS_H = np.array([4.0, -5.0, 3.0, -4.0, 5.0, -4.2, 2.1, 4.3, -3.1, 2.1, -4.2])
_BUMPS_H = np.array([4.0, 5.0, 3.0, 4.0, 5.0, 4.2, 2.1, 4.3, 3.1, 5.1, 4.2])
_BUMPS_W = np.array(
    [0.005, 0.005, 0.006, 0.01, 0.01, 0.03, 0.01, 0.01, 0.005, 0.008, 0.005]
)


def _blocks(t):
    steps = 0.5 * (1.0 + np.sign(t[:, None] - _JUMP_T[None, :]))
    return steps @ _BLOCKS_H


def _bumps(t):
    pulses = (1.0 + np.abs((t[:, None] - _JUMP_T[None, :]) / _BUMPS_W[None, :])) ** -4.0
    return pulses @ _BUMPS_H


def _heavisine(t):
    return 4.0 * np.sin(4.0 * np.pi * t) - np.sign(t - 0.3) - np.sign(0.72 - t)


def _doppler(t):
    return np.sqrt(t * (1.0 - t)) * np.sin(2.0 * np.pi * 1.05 / (t + 0.05))


_FORMS = {
    "blocks": _blocks,
    "bumps": _bumps,
    "heavisine": _heavisine,
    "doppler": _doppler,
}


def test_signal(name, n, snr):
    """Sample a named test signal and size its noise for the requested SNR.

    Returns ``(samples, sigma)`` where ``samples`` has length ``n`` on the
    grid t_i = i/n and ``sigma = sd(samples) / snr`` (population standard
    deviation).
    """
    if name not in _FORMS:
        raise ValueError(f"unknown test signal {name!r}; choose from {SIGNAL_NAMES}")
    n = int(n)
    if n < 2:
        raise ValueError(f"need at least 2 samples, got {n}")
    snr = float(snr)
    if not snr > 0:
        raise ValueError(f"snr must be positive, got {snr}")
    t = np.arange(1, n + 1) / n
    samples = _FORMS[name](t)
    sigma = float(np.std(samples)) / snr
    return samples, sigma
