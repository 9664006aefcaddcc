"""Corruption of group-B training data and the induced region masses.

Two mechanisms compose, retention first and flipping second:

* under-representation, keeping true positives of group B with probability
  beta_pos and true negatives with probability beta_neg;
* labeling bias, flipping each retained true positive of group B to negative
  with probability nu.

Group A is never touched.  The expected (un-normalized) mass of every
(group, region, apparent label) event is in closed form below; the eight
masses drive all analytic computations downstream.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .distribution import GROUP_B, Dataset, TrueModel, validate_model
from .errors import InsufficientData, RangeError


@dataclass(frozen=True)
class BiasParams:
    """beta_pos, beta_neg in (0, 1]; nu in [0, 1)."""

    beta_pos: float
    beta_neg: float
    nu: float

    def __post_init__(self):
        if not (0.0 < self.beta_pos <= 1.0):
            raise RangeError(f"beta_pos={self.beta_pos!r} outside (0, 1]")
        if not (0.0 < self.beta_neg <= 1.0):
            raise RangeError(f"beta_neg={self.beta_neg!r} outside (0, 1]")
        if not (0.0 <= self.nu < 1.0):
            raise RangeError(f"nu={self.nu!r} outside [0, 1)")

    @classmethod
    def none(cls) -> "BiasParams":
        return cls(1.0, 1.0, 0.0)

    @classmethod
    def underrepresentation(cls, beta: float) -> "BiasParams":
        return cls(beta, 1.0, 0.0)

    @classmethod
    def labeling(cls, nu: float) -> "BiasParams":
        return cls(1.0, 1.0, nu)


@dataclass(frozen=True)
class RegionMasses:
    """Expected un-normalized masses by (group, reference region, apparent label).

    r1..r4 belong to group A, r5..r8 to group B after corruption:

    r1 A positive-region apparent-positive    r5 B positive-region apparent-positive
    r2 A positive-region apparent-negative    r6 B positive-region apparent-negative
    r3 A negative-region apparent-positive    r7 B negative-region apparent-positive
    r4 A negative-region apparent-negative    r8 B negative-region apparent-negative
    """

    r1: float
    r2: float
    r3: float
    r4: float
    r5: float
    r6: float
    r7: float
    r8: float

    def total(self) -> float:
        return self.r1 + self.r2 + self.r3 + self.r4 + self.r5 + self.r6 + self.r7 + self.r8

    def group_a_total(self) -> float:
        return self.r1 + self.r2 + self.r3 + self.r4

    def group_b_total(self) -> float:
        return self.r5 + self.r6 + self.r7 + self.r8


def region_masses(model: TrueModel, bias: BiasParams) -> RegionMasses:
    """Closed-form expected masses of the eight events under ``bias``."""
    validate_model(model)
    r, p, eta = model.r, model.p, model.eta
    bp, bn, nu = bias.beta_pos, bias.beta_neg, bias.nu
    a = 1.0 - r
    return RegionMasses(
        r1=a * p * (1.0 - eta),
        r2=a * p * eta,
        r3=a * (1.0 - p) * eta,
        r4=a * (1.0 - p) * (1.0 - eta),
        r5=r * p * (1.0 - eta) * bp * (1.0 - nu),
        r6=r * p * ((1.0 - eta) * bp * nu + eta * bn),
        r7=r * (1.0 - p) * eta * bp * (1.0 - nu),
        r8=r * (1.0 - p) * ((1.0 - eta) * bn + eta * bp * nu),
    )


def apply_bias(data: Dataset, bias: BiasParams, seed: int) -> Dataset:
    """Corrupt a true-label sample; group A rows pass through untouched.

    Each example consumes its own retention draw and its own flip draw from
    index-aligned streams, so changing one bias parameter never perturbs the
    decisions made for other examples.
    """
    rng = np.random.default_rng(seed)
    n = len(data)
    u_keep = rng.random(n)
    u_flip = rng.random(n)

    in_b = data.group == GROUP_B
    pos = data.label == 1
    keep = np.ones(n, dtype=bool)
    keep[in_b & pos] = u_keep[in_b & pos] < bias.beta_pos
    keep[in_b & ~pos] = u_keep[in_b & ~pos] < bias.beta_neg

    label = data.label.copy()
    flipped = in_b & pos & keep & (u_flip < bias.nu)
    label[flipped] = 0

    return Dataset(
        x=data.x[keep].copy(),
        group=data.group[keep].copy(),
        label=label[keep],
        weight=data.weight[keep].copy(),
        seed=seed,
    )


def _positive_fraction(data: Dataset, group: int) -> float:
    mask = data.group == group
    total = float(np.sum(data.weight[mask]))
    if total <= 0.0:
        raise InsufficientData(f"group {'AB'[group]} has no examples")
    positive = float(np.sum(data.weight[mask & (data.label == 1)]))
    return positive / total


def estimate_beta(data: Dataset) -> float:
    """Retention-rate estimate from the apparent positive odds of the groups.

    Under pure under-representation the apparent positive odds of group B are
    beta times those of group A, so the odds ratio recovers beta.
    """
    q_a = _positive_fraction(data, 0)
    q_b = _positive_fraction(data, 1)
    for name, q in (("A", q_a), ("B", q_b)):
        if q <= 0.0:
            raise InsufficientData(f"group {name} has no positive examples")
        if q >= 1.0:
            raise InsufficientData(f"group {name} has no negative examples")
    return (q_b / (1.0 - q_b)) / (q_a / (1.0 - q_a))


def estimate_nu(data: Dataset) -> float:
    """Flip-rate estimate 1 - q_B / q_A, clamped to [0, 1).

    Under pure labeling bias the apparent positive fraction of group B is
    (1 - nu) times that of group A.
    """
    q_a = _positive_fraction(data, 0)
    q_b = _positive_fraction(data, 1)
    if q_a <= 0.0:
        raise InsufficientData("group A has no positive examples")
    nu_hat = 1.0 - q_b / q_a
    return min(max(nu_hat, 0.0), np.nextafter(1.0, 0.0))
