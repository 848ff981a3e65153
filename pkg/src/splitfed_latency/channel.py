"""Path loss, shadowing and FDMA uplink rate/power helpers.

All arithmetic here is in linear SI units. dB/dBm only appear in the
conversion helpers used at config boundaries.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

PATH_LOSS_INTERCEPT_DB = 128.1
PATH_LOSS_SLOPE_DB = 37.6


def dbm_to_watts(dbm: float) -> float:
    return 10.0 ** ((dbm - 30.0) / 10.0)


def watts_to_dbm(watts: float) -> float:
    return 10.0 * math.log10(watts) + 30.0


def db_to_linear(db: float) -> float:
    return 10.0 ** (db / 10.0)


def path_loss_db(d_km: float) -> float:
    """Log-distance path loss ``128.1 + 37.6 log10(d)`` with ``d`` in km."""
    if not d_km > 0:
        raise ValueError(f"distance must be positive, got {d_km!r} km")
    return PATH_LOSS_INTERCEPT_DB + PATH_LOSS_SLOPE_DB * math.log10(d_km)


def channel_gain(d_km: float, shadow_db: float = 0.0) -> float:
    """Linear large-scale gain for a link of length ``d_km``.

    ``shadow_db`` is the (already drawn) log-normal shadowing term; a
    positive value means extra attenuation.
    """
    return 10.0 ** (-(path_loss_db(d_km) + shadow_db) / 10.0)


@dataclass(frozen=True)
class LinkAssignment:
    """The subchannels one client holds towards one server."""

    client: int
    bandwidths: Sequence[float]
    psd: Sequence[float]
    gain: float
    antenna_product: float
    noise_psd: float
    subchannels: Sequence[int] = field(default=())

    def __post_init__(self):
        if len(self.bandwidths) != len(self.psd):
            raise ValueError("bandwidths and psd must have equal length")
        if self.subchannels and len(set(self.subchannels)) != len(self.subchannels):
            raise ValueError(f"client {self.client}: duplicate subchannel indices")
        if any(p < 0 for p in self.psd):
            raise ValueError(f"client {self.client}: negative PSD")

    @property
    def snr_per_watt_hz(self) -> float:
        return self.antenna_product * self.gain / self.noise_psd


def uplink_rate(link: LinkAssignment) -> float:
    """Shannon rate summed over the client's subchannels, in bit/s."""
    if len(link.bandwidths) == 0:
        return 0.0
    bw = np.asarray(link.bandwidths, dtype=float)
    psd = np.asarray(link.psd, dtype=float)
    return float(np.sum(bw * np.log2(1.0 + psd * link.snr_per_watt_hz)))


def link_power(link: LinkAssignment) -> float:
    """Total transmit power ``sum(psd * bandwidth)`` in watts."""
    if len(link.bandwidths) == 0:
        return 0.0
    return float(np.dot(np.asarray(link.psd, float), np.asarray(link.bandwidths, float)))


def rates_from_psd(bandwidths, psd, snr_per_watt_hz):
    """Vectorised per-subchannel rate ``B log2(1 + p * g)``."""
    bandwidths = np.asarray(bandwidths, dtype=float)
    return bandwidths * np.log2(1.0 + np.asarray(psd, dtype=float) * snr_per_watt_hz)


def psd_for_rate(theta: float, bandwidth: float, antenna_product: float,
                 gain: float, noise_psd: float) -> float:
    """PSD needed on one subchannel to carry ``theta`` bit/s.

    Exact inverse of the rate formula; the power drawn on the subchannel
    is ``bandwidth`` times the returned value.
    """
    if not bandwidth > 0:
        raise ValueError("bandwidth must be positive")
    if theta < 0:
        raise ValueError("rate must be non-negative")
    if theta == 0:
        return 0.0
    try:
        growth = math.expm1(theta / bandwidth * math.log(2.0))
    except OverflowError:
        return math.inf
    return noise_psd * growth / (antenna_product * gain)
