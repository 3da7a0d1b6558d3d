"""Received power from traced paths, and a sounder-like delay-domain view."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .scene import C0
from .tracer import PropagationPath

# File representation of "no signal" (-inf dBm).
SENTINEL_DBM = -400.0
# Largest path loss the channel sounder can measure.
MAX_MEASURABLE_LOSS_DB = 185.0
# 2 GHz sounder mode: delay resolution and sounding-signal duration.
SOUNDER_BIN_WIDTH = 0.65e-9
SOUNDER_MAX_EXCESS_DELAY = 1.33e-6


def coherent_sum(amplitudes: np.ndarray, lengths: np.ndarray, keys: np.ndarray) -> complex:
    """Phase-aware sum in the canonical order (length, then interaction ids).

    Uses exactly rounded summation so the result is independent of input order.
    """
    if len(amplitudes) == 0:
        return 0j
    cols = [keys[:, c] for c in range(keys.shape[1] - 1, -1, -1)] if keys.size else []
    order = np.lexsort(cols + [lengths])
    a = np.asarray(amplitudes)[order]
    return complex(math.fsum(a.real), math.fsum(a.imag))


def power_dbm(total: complex, tx_power_dbm: float) -> float:
    mag = abs(total)
    return tx_power_dbm + 20.0 * math.log10(mag) if mag > 0 else -math.inf


@dataclass(frozen=True)
class LinkResult:
    rx_power: float                      # dBm, -inf when nothing arrives
    path_count: int
    strongest_path: Optional[PropagationPath]
    measurable: bool
    tx_power: float = 0.0

    @property
    def path_loss(self) -> float:
        return self.tx_power - self.rx_power


def _keys_matrix(paths: Sequence[PropagationPath]) -> np.ndarray:
    keys = [p.key() for p in paths]
    width = max((len(k) for k in keys), default=0)
    out = np.full((len(keys), width), -1, dtype=np.int64)
    for i, k in enumerate(keys):
        out[i, :len(k)] = k
    return out


def coherent_power(paths: Sequence[PropagationPath], tx_power: float = 0.0) -> LinkResult:
    """Received power from the coherent sum of path amplitudes."""
    if not paths:
        return LinkResult(-math.inf, 0, None, False, tx_power)
    amps = np.array([p.amplitude for p in paths], dtype=complex)
    if not np.all(np.isfinite(amps)):
        raise ValueError("path amplitudes must be finite")
    lengths = np.array([p.total_length for p in paths])
    total = coherent_sum(amps, lengths, _keys_matrix(paths))
    rx = power_dbm(total, tx_power)
    mags = np.abs(amps)
    # Ties resolved by the canonical order so the choice is reproducible.
    order = sorted(range(len(paths)), key=lambda i: (-mags[i], lengths[i], paths[i].key()))
    measurable = tx_power - rx <= MAX_MEASURABLE_LOSS_DB
    return LinkResult(rx, len(paths), paths[order[0]], measurable, tx_power)


@dataclass
class ChannelImpulseResponse:
    bin_width: float
    max_excess_delay: float
    taps: np.ndarray
    first_delay: float = 0.0
    dropped: int = 0
    counts: np.ndarray = field(default=None, repr=False)

    @property
    def delays(self) -> np.ndarray:
        """Excess delay at the start of each bin."""
        return np.arange(len(self.taps)) * self.bin_width

    def energy(self) -> float:
        return float(np.sum(np.abs(self.taps) ** 2))

    def pdp_db(self) -> np.ndarray:
        with np.errstate(divide="ignore"):
            return 20 * np.log10(np.abs(self.taps))


def bin_cir(paths: Sequence[PropagationPath], bin_width: float = SOUNDER_BIN_WIDTH,
            max_excess_delay: float = SOUNDER_MAX_EXCESS_DELAY) -> ChannelImpulseResponse:
    """Bin path amplitudes by excess delay over the first arrival."""
    if not bin_width > 0 or not max_excess_delay > 0:
        raise ValueError("bin width and delay window must be > 0")
    n_taps = math.ceil(max_excess_delay / bin_width - 1e-9)
    taps = np.zeros(n_taps, dtype=complex)
    counts = np.zeros(n_taps, dtype=int)
    if not paths:
        return ChannelImpulseResponse(bin_width, max_excess_delay, taps, 0.0, 0, counts)
    paths = sorted(paths, key=lambda p: (p.total_length, p.key()))
    t0 = paths[0].total_length / C0
    dropped = 0
    for p in paths:
        excess = p.total_length / C0 - t0
        if excess > max_excess_delay:
            dropped += 1
            continue
        i = min(int(excess // bin_width), n_taps - 1)
        taps[i] += p.amplitude
        counts[i] += 1
    return ChannelImpulseResponse(bin_width, max_excess_delay, taps, t0, dropped, counts)
