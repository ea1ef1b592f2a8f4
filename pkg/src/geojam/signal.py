"""Link budgets and complex-baseband synthesis of the jammed uplink.

Received sample model::

    r_k = s_k + n_k + f * j_k

where ``s_k`` is the ground station's 4QAM symbol already scaled to its
received power, ``j_k`` an independent 4QAM jamming symbol scaled to the
jammer's received power, ``n_k`` circular complex Gaussian noise and ``f``
the jamming indicator.  Powers are linear watts unless a name ends in
``_db``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, fields

import numpy as np

SPEED_OF_LIGHT = 299_792_458.0  # m/s
BOLTZMANN = 1.380649e-23  # J/K

FEATURE_NAMES = (
    "rss",
    "distance_to_target",
    "total_received_power",
    "total_amplitude_mean",
    "total_amplitude_std",
    "total_phase_variance",
)


@dataclass(frozen=True)
class RfLinkConfig:
    frequency: float = 14e9  # Hz
    bandwidth: float = 1e6  # Hz
    tx_power: float = 100.0  # W, ground station
    tx_gain: float = 40.0  # dBi, ground station
    rx_gain: float = 30.0  # dBi, target satellite
    noise_temperature: float = 290.0  # K

    def __post_init__(self):
        for f in fields(self):
            v = getattr(self, f.name)
            if not (math.isfinite(v) and v > 0):
                raise ValueError(f"{f.name} must be strictly positive, got {v}")


@dataclass(frozen=True)
class SignalFeatures:
    rss: float
    total_received_power: float
    total_amplitude_mean: float
    total_amplitude_std: float
    total_phase_variance: float
    distance_to_target: float
    sjnr_at_target: float

    def vector(self) -> np.ndarray:
        """The six classifier inputs in ``FEATURE_NAMES`` order."""
        return np.array([getattr(self, name) for name in FEATURE_NAMES])


def db(x):
    return 10.0 * np.log10(x)


def from_db(x):
    return 10.0 ** (np.asarray(x, dtype=float) / 10.0)


def fspl_linear(distance, frequency):
    """Free-space path loss ``(4 pi d f / c)**2`` for ``distance`` in metres."""
    d = np.asarray(distance, dtype=float)
    if np.any(d <= 0) or frequency <= 0:
        raise ValueError("distance and frequency must be positive")
    loss = (4.0 * math.pi * d * frequency / SPEED_OF_LIGHT) ** 2
    return float(loss) if loss.ndim == 0 else loss


def noise_power(temperature: float, bandwidth: float) -> float:
    if temperature <= 0 or bandwidth <= 0:
        raise ValueError("temperature and bandwidth must be positive")
    return BOLTZMANN * temperature * bandwidth


def received_power(tx_power, tx_gain, rx_gain, distance, frequency):
    """Friis received power in W; gains in dBi, distance in metres."""
    gain = 10.0 ** (tx_gain / 10.0) * 10.0 ** (rx_gain / 10.0)
    return tx_power * gain / fspl_linear(distance, frequency)


def snr_db(signal_rx, noise):
    return 10.0 * np.log10(signal_rx / noise)


def sjnr_db(signal_rx, jam_rx, noise):
    """Signal to jamming-plus-noise ratio; with no jamming it is the SNR."""
    if np.any(np.asarray(noise) <= 0):
        raise ValueError("noise power must be positive")
    return 10.0 * np.log10(signal_rx / (noise + jam_rx))


def qam4_burst(count: int, avg_power: float, seed) -> np.ndarray:
    """Uniform 4QAM symbols ``(+-1 +-1j) / sqrt(2)`` scaled to ``avg_power``.

    ``seed`` may be an int or an existing ``numpy.random.Generator``.
    """
    if count < 0 or avg_power < 0:
        raise ValueError("count and avg_power must be non-negative")
    rng = np.random.default_rng(seed)
    bits = rng.integers(0, 2, size=(2, count))
    amp = math.sqrt(avg_power / 2.0)
    return amp * ((2 * bits[0] - 1) + 1j * (2 * bits[1] - 1))


def complex_noise(count: int, noise: float, seed) -> np.ndarray:
    """Circular complex Gaussian samples, variance ``noise/2`` per quadrature."""
    rng = np.random.default_rng(seed)
    sigma = math.sqrt(noise / 2.0)
    return sigma * (rng.standard_normal(count) + 1j * rng.standard_normal(count))


def synthesize_received(
    signal_rx: float, jam_rx: float, noise: float, count: int, jammed: bool, seed
) -> np.ndarray:
    """Received burst at the target satellite.

    The jamming burst is always drawn so that, for one seed, the jammed and
    clear variants share identical signal and noise samples.
    """
    if count < 1:
        raise ValueError("count must be at least 1")
    rng = np.random.default_rng(seed)
    s = qam4_burst(count, signal_rx, rng)
    j = qam4_burst(count, jam_rx, rng)
    n = complex_noise(count, noise, rng)
    return s + n + (j if jammed else 0.0)


def rss(samples) -> float:
    """Mean squared magnitude of the received samples."""
    r = np.asarray(samples)
    if r.size == 0:
        raise ValueError("rss of an empty burst is undefined")
    return float(np.mean(r.real**2 + r.imag**2))


def extract_features(
    samples, distance_to_target: float, analytic_sjnr: float, analytic_total_power: float
) -> SignalFeatures:
    """Per-burst features.

    ``total_phase_variance`` is the linear variance of ``arg(r_k)`` wrapped
    to (-pi, pi]; amplitude statistics use the population std.
    """
    r = np.asarray(samples)
    if r.ndim != 1 or r.size < 2:
        raise ValueError("feature extraction needs at least 2 samples")
    amp = np.abs(r)
    return SignalFeatures(
        rss=rss(r),
        total_received_power=float(analytic_total_power),
        total_amplitude_mean=float(amp.mean()),
        total_amplitude_std=float(amp.std()),
        total_phase_variance=float(np.var(np.angle(r))),
        distance_to_target=float(distance_to_target),
        sjnr_at_target=float(analytic_sjnr),
    )


def feature_columns(bursts: np.ndarray) -> dict[str, np.ndarray]:
    """Sample-derived features for a (records, samples) matrix of bursts."""
    amp = np.abs(bursts)
    return {
        "rss": np.mean(bursts.real**2 + bursts.imag**2, axis=1),
        "total_amplitude_mean": amp.mean(axis=1),
        "total_amplitude_std": amp.std(axis=1),
        "total_phase_variance": np.var(np.angle(bursts), axis=1),
    }
