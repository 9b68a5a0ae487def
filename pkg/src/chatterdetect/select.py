"""Selection of the informative wavelet packet and the informative IMF for a
cutting configuration.

The informative component is the one whose frequency band overlaps the
configuration's chatter band and carries the highest relative energy,
averaged over the chatter-labeled training data.  It is not necessarily the
highest-energy component overall: stable cutting concentrates energy in the
low packets, so candidates are restricted to the chatter-band overlap set.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DomainError
from .wavelet import FrequencyBand, energy_ratios, packet_band, predict_informative_packets


@dataclass(frozen=True)
class PacketChoice:
    level: int
    packet_index: int
    mean_energy_ratio: float
    band: FrequencyBand
    candidate_ratios: dict


@dataclass(frozen=True)
class ImfChoice:
    imf_index: int
    band_overlap_score: float
    scores: tuple


def select_informative_packet(training_trees, level, config):
    """Pick the packet with the highest mean energy ratio among the packets
    overlapping the configuration's chatter band.  Ties break low."""
    trees = list(training_trees)
    if not trees:
        raise DomainError("need at least one training tree")
    fs = trees[0].sample_rate_hz
    band = FrequencyBand(*config.chatter_band_hz)
    candidates = sorted(predict_informative_packets(band, level, fs))
    if not candidates:
        raise DomainError(
            f"chatter band {config.chatter_band_hz} overlaps no packet "
            f"below the Nyquist frequency {fs / 2} Hz"
        )
    ratio_sum = np.zeros(len(candidates))
    for tree in trees:
        ratios = energy_ratios(tree, level)
        ratio_sum += [ratios[j - 1] for j in candidates]
    means = ratio_sum / len(trees)
    best = int(np.argmax(means))  # argmax takes the first (lowest index) tie
    chosen = candidates[best]
    return PacketChoice(
        level=level,
        packet_index=chosen,
        mean_energy_ratio=float(means[best]),
        band=packet_band(level, chosen, fs),
        candidate_ratios={j: float(m) for j, m in zip(candidates, means)},
    )


def _in_band_fraction(imf, band, sample_rate_hz):
    imf = np.asarray(imf, dtype=float)
    spectrum = np.abs(np.fft.rfft(imf)) ** 2
    total = float(spectrum.sum())
    if total == 0.0:
        return 0.0
    freqs = np.arange(spectrum.size) * sample_rate_hz / imf.size
    mask = (freqs >= band.low_hz) & (freqs <= band.high_hz)
    return float(spectrum[mask].sum()) / total


def select_informative_imf(training_sets, config, sample_rate_hz):
    """Pick the IMF index whose spectral energy falls most heavily inside the
    chatter band, averaged over the training sets.  Ties break low.

    IMF indices absent from a decomposition contribute zero to the average.
    """
    sets = list(training_sets)
    if not sets:
        raise DomainError("need at least one training decomposition")
    if any(s.n_imfs < 1 for s in sets):
        raise DomainError("every training decomposition needs at least one IMF")
    band = FrequencyBand(*config.chatter_band_hz)
    max_imfs = max(s.n_imfs for s in sets)
    scores = np.zeros(max_imfs)
    for s in sets:
        for i in range(s.n_imfs):
            scores[i] += _in_band_fraction(s.imfs[i], band, sample_rate_hz)
    scores /= len(sets)
    best = int(np.argmax(scores))
    return ImfChoice(
        imf_index=best + 1,
        band_overlap_score=float(scores[best]),
        scores=tuple(float(v) for v in scores),
    )
