"""Outcome probabilities and collapse under interchangeable projection rules.

Three rules are provided:

* ``BORN``: ``p_i = ||P_i psi||^2``.
* ``APP``: every branch with a nonvanishing projection gets ``1/n``, where
  ``n`` is the number of such branches; all other branches get 0.
* ``generalized(alpha)``: ``alpha/n + (1 - alpha) ||P_i psi||^2`` on the
  nonvanishing branches, 0 elsewhere.

All rules share the same collapse ``P_u psi / ||P_u psi||``.

A projection counts as nonvanishing when its squared norm exceeds ``tau``
(default ``1e-12``).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InvariantViolation, OffSupportError
from .hilbert import ProjectorDecomposition, as_state
from .stats import RandomStream

TAU = 1e-12

__all__ = [
    "TAU",
    "MeasurementRule",
    "BORN",
    "APP",
    "generalized",
    "parse_rule",
    "OutcomeDistribution",
    "projection_weights",
    "support_count",
    "distribution",
    "collapse",
    "sample_outcome",
    "sample_indices",
]


@dataclass(frozen=True)
class MeasurementRule:
    kind: str  # "born", "app" or "generalized"
    alpha: float | None = None

    def __post_init__(self):
        if self.kind not in ("born", "app", "generalized"):
            raise ValueError(f"unknown rule kind {self.kind!r}")
        if self.kind == "generalized":
            if self.alpha is None or not 0.0 <= self.alpha <= 1.0:
                raise ValueError(f"alpha must lie in [0, 1], got {self.alpha!r}")
        elif self.alpha is not None:
            raise ValueError(f"rule {self.kind!r} takes no alpha")

    def __str__(self):
        if self.kind == "generalized":
            return f"generalized({self.alpha:g})"
        return self.kind


BORN = MeasurementRule("born")
APP = MeasurementRule("app")


def generalized(alpha: float) -> MeasurementRule:
    return MeasurementRule("generalized", float(alpha))


def parse_rule(text: str) -> MeasurementRule:
    """Inverse of ``str(rule)``: ``"born"``, ``"app"`` or ``"generalized(0.5)"``."""
    t = text.strip().lower()
    if t in ("born", "pp"):
        return BORN
    if t == "app":
        return APP
    if t.startswith("generalized(") and t.endswith(")"):
        return generalized(float(t[len("generalized("):-1]))
    raise ValueError(f"cannot parse measurement rule {text!r}")


@dataclass(frozen=True, eq=False)
class OutcomeDistribution:
    labels: tuple
    probabilities: np.ndarray

    def __post_init__(self):
        self.probabilities.flags.writeable = False

    def __iter__(self):
        return iter(zip(self.labels, self.probabilities.tolist()))

    def __len__(self):
        return len(self.labels)

    def __getitem__(self, label):
        label = tuple(np.atleast_1d(label).astype(float))
        for lab, p in self:
            if np.allclose(lab, label, rtol=0.0, atol=1e-9):
                return p
        raise KeyError(label)

    def as_dict(self):
        return {lab: p for lab, p in self}


def projection_weights(state, dec: ProjectorDecomposition) -> np.ndarray:
    """Squared norms ``||P_i psi||^2`` for every branch."""
    psi = as_state(state, dec.dim)
    return np.array([float(np.sum(np.abs(b.conj().T @ psi) ** 2)) for b in dec.bases])


def _support(weights, tau):
    if tau <= 0:
        raise ValueError("tau must be positive")
    flags = weights > tau
    n = int(flags.sum())
    if n == 0:
        raise InvariantViolation(
            "no branch carries the state above the support threshold; "
            "state or decomposition tolerances are inconsistent"
        )
    return n, flags


def support_count(state, dec: ProjectorDecomposition, tau: float = TAU):
    """Number of branches with ``||P_i psi||^2 > tau``, and the per-branch flags."""
    return _support(projection_weights(state, dec), tau)


def _probabilities(weights, rule, tau):
    n, flags = _support(weights, tau)
    if rule.kind == "born":
        return weights.copy()
    equal = np.where(flags, 1.0 / n, 0.0)
    if rule.kind == "app":
        return equal
    a = rule.alpha
    return np.where(flags, a * equal + (1.0 - a) * weights, 0.0)


def distribution(state, dec: ProjectorDecomposition, rule: MeasurementRule = BORN, tau: float = TAU) -> OutcomeDistribution:
    """Outcome distribution of measuring ``dec`` on ``state`` under ``rule``."""
    p = _probabilities(projection_weights(state, dec), rule, tau)
    return OutcomeDistribution(dec.labels, p)


def collapse(state, dec: ProjectorDecomposition, branch_index: int, tau: float = TAU):
    """Normalized projection of ``state`` onto branch ``branch_index``."""
    psi = as_state(state, dec.dim)
    b = dec.bases[branch_index]
    proj = b @ (b.conj().T @ psi)
    n2 = float(np.vdot(proj, proj).real)
    if n2 <= tau:
        raise OffSupportError(
            f"branch {branch_index} {dec.labels[branch_index]} has squared projection {n2:.3g} <= tau"
        )
    out = proj / np.sqrt(n2)
    out.flags.writeable = False
    return out


def sample_indices(probabilities, size, stream: RandomStream) -> np.ndarray:
    """Inverse-CDF draws of branch indices, in decomposition order.

    Zero-probability branches are never returned. Consumes ``size`` uniforms.
    """
    p = np.asarray(probabilities, dtype=float)
    cdf = np.cumsum(p)
    u = stream.random(size) * cdf[-1]
    idx = np.searchsorted(cdf, u, side="right")
    last = int(np.flatnonzero(p > 0)[-1])
    return np.minimum(idx, last)


def sample_outcome(state, dec: ProjectorDecomposition, rule: MeasurementRule, tau: float, stream: RandomStream):
    """Draw one outcome and return ``(branch_index, post_state)``."""
    dist = distribution(state, dec, rule, tau)
    i = int(sample_indices(dist.probabilities, 1, stream)[0])
    return i, collapse(state, dec, i, tau)
