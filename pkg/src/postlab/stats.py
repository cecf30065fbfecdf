"""Seeded random streams and the statistics used to compare samples with predictions.

The generator is fixed to Philox4x64-10 (a counter-based bit generator) driven
through ``numpy.random.Generator``. Uniform doubles are produced with 53 bits of
mantissa, so a given seed yields the same sequence on every platform.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import HardMismatch

__all__ = [
    "RandomStream",
    "EmpiricalHistogram",
    "GofResult",
    "chi_square_gof",
    "chi_square_critical",
    "mutual_information",
    "binomial_margin",
    "z_scores",
]

_SEED_MASK = (1 << 64) - 1


class RandomStream:
    """Deterministic, single-consumer source of random numbers.

    Parameters
    ----------
    seed : int
        Reduced modulo 2**64.
    """

    def __init__(self, seed: int = 0):
        self.seed = int(seed) & _SEED_MASK
        self._gen = np.random.Generator(np.random.Philox(self.seed))

    def __repr__(self):
        return f"RandomStream(seed={self.seed})"

    def spawn(self, index: int) -> "RandomStream":
        """Independent stream for job ``index``, seeded with ``seed XOR index``."""
        return RandomStream(self.seed ^ (int(index) & _SEED_MASK))

    def random(self, size=None):
        return self._gen.random(size)

    def normal(self, size=None):
        return self._gen.standard_normal(size)

    def complex_normal(self, size=None):
        """Standard complex Gaussian samples (real and imaginary parts each N(0, 1/2))."""
        re = self._gen.standard_normal(size)
        im = self._gen.standard_normal(size)
        return (re + 1j * im) / np.sqrt(2.0)

    def integers(self, low, high=None, size=None):
        return self._gen.integers(low, high, size=size)

    def permutation(self, n):
        return self._gen.permutation(n)


@dataclass
class EmpiricalHistogram:
    """Outcome counts aligned with a list of labels."""

    labels: tuple
    counts: np.ndarray
    total: int = field(init=False)

    def __post_init__(self):
        self.labels = tuple(self.labels)
        self.counts = np.asarray(self.counts, dtype=np.int64)
        if self.counts.shape != (len(self.labels),):
            raise ValueError("one count per label required")
        if np.any(self.counts < 0):
            raise ValueError("counts must be nonnegative")
        self.total = int(self.counts.sum())

    @classmethod
    def from_indices(cls, indices, labels) -> "EmpiricalHistogram":
        counts = np.bincount(np.asarray(indices, dtype=np.int64), minlength=len(labels))
        return cls(labels, counts[: len(labels)])

    def frequencies(self) -> np.ndarray:
        if self.total == 0:
            return np.zeros(len(self.labels))
        return self.counts / self.total

    def __add__(self, other: "EmpiricalHistogram") -> "EmpiricalHistogram":
        if self.labels != other.labels:
            raise ValueError("cannot merge histograms over different labels")
        return EmpiricalHistogram(self.labels, self.counts + other.counts)


# Upper critical values of the chi-square distribution for dof 1..30.
_CRIT_05 = (
    3.8415, 5.9915, 7.8147, 9.4877, 11.0705, 12.5916, 14.0671, 15.5073, 16.9190, 18.3070,
    19.6751, 21.0261, 22.3620, 23.6848, 24.9958, 26.2962, 27.5871, 28.8693, 30.1435, 31.4104,
    32.6706, 33.9244, 35.1725, 36.4150, 37.6525, 38.8851, 40.1133, 41.3371, 42.5570, 43.7730,
)
_CRIT_001 = (
    10.8276, 13.8155, 16.2662, 18.4668, 20.5150, 22.4577, 24.3219, 26.1245, 27.8772, 29.5883,
    31.2641, 32.9095, 34.5282, 36.1233, 37.6973, 39.2524, 40.7902, 42.3124, 43.8202, 45.3147,
    46.7970, 48.2679, 49.7282, 51.1786, 52.6197, 54.0520, 55.4760, 56.8923, 58.3012, 59.7031,
)
_Z = {0.05: 1.6448536269514722, 0.001: 3.090232306167813}


def chi_square_critical(dof: int, level: float) -> float:
    """Upper critical value at ``level`` (0.05 or 0.001).

    Tabulated up to 30 degrees of freedom, Wilson-Hilferty beyond.
    """
    if level not in _Z:
        raise ValueError("level must be 0.05 or 0.001")
    if dof < 1:
        raise ValueError("dof must be >= 1")
    if dof <= 30:
        return (_CRIT_05 if level == 0.05 else _CRIT_001)[dof - 1]
    c = 2.0 / (9.0 * dof)
    return dof * (1.0 - c + _Z[level] * np.sqrt(c)) ** 3


@dataclass(frozen=True)
class GofResult:
    statistic: float
    dof: int
    band: str  # "pass" (< 5% critical), "flag" (between), "reject" (>= 0.1% critical)

    @property
    def rejected(self) -> bool:
        return self.band == "reject"


def chi_square_gof(hist: EmpiricalHistogram, expected: Sequence[float]) -> GofResult:
    """Pearson goodness-of-fit of ``hist`` against probabilities ``expected``.

    Outcomes with zero expected probability are excluded from the statistic, but
    observing any of them raises :class:`HardMismatch`.
    """
    p = np.asarray(expected, dtype=float)
    if p.shape != hist.counts.shape:
        raise ValueError("expected probabilities must align with histogram labels")
    zero = p <= 0.0
    if np.any(hist.counts[zero] > 0):
        bad = [hist.labels[i] for i in np.flatnonzero(zero & (hist.counts > 0))]
        raise HardMismatch(f"counts observed on zero-probability outcomes {bad}")
    live = ~zero
    dof = int(live.sum()) - 1
    if dof == 0:
        return GofResult(0.0, 0, "pass")
    exp_counts = hist.total * p[live]
    if exp_counts.min() < 5:
        raise ValueError("expected count below 5; chi-square approximation invalid")
    obs = hist.counts[live]
    stat = float(np.sum((obs - exp_counts) ** 2 / exp_counts))
    if stat < chi_square_critical(dof, 0.05):
        band = "pass"
    elif stat < chi_square_critical(dof, 0.001):
        band = "flag"
    else:
        band = "reject"
    return GofResult(stat, dof, band)


def mutual_information(joint) -> float:
    """Mutual information in nats of a two-way probability table."""
    p = np.asarray(joint, dtype=float)
    if p.ndim != 2:
        raise ValueError("joint table must be two-dimensional")
    if np.any(p < 0):
        raise ValueError("joint table has negative entries")
    if abs(p.sum() - 1.0) > 1e-10:
        raise ValueError(f"joint table sums to {p.sum()!r}, not 1")
    pa = p.sum(axis=1)
    pb = p.sum(axis=0)
    mask = p > 0
    outer = np.outer(pa, pb)
    return float(np.sum(p[mask] * np.log(p[mask] / outer[mask])))


def binomial_margin(p: float, trials: int, k_sigma: float) -> float:
    """``k_sigma`` binomial standard errors for a frequency estimate of ``p``."""
    if not 0.0 <= p <= 1.0:
        raise ValueError("p must lie in [0, 1]")
    if trials < 1:
        raise ValueError("trials must be >= 1")
    return k_sigma * float(np.sqrt(p * (1.0 - p) / trials))


def z_scores(hist: EmpiricalHistogram, expected: Sequence[float]) -> np.ndarray:
    """Per-outcome deviation of the observed frequency in binomial standard errors.

    Zero-variance outcomes score 0 when matched exactly and ``inf`` otherwise.
    """
    p = np.asarray(expected, dtype=float)
    freq = hist.frequencies()
    sd = np.sqrt(np.clip(p * (1.0 - p), 0.0, None) / max(hist.total, 1))
    dev = np.abs(freq - p)
    with np.errstate(divide="ignore", invalid="ignore"):
        z = np.where(sd > 0, dev / np.where(sd > 0, sd, 1.0), np.where(dev > 1e-15, np.inf, 0.0))
    return z
