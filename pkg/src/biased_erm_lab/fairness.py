"""Fairness criteria and group rates, analytic and empirical.

All rates are evaluated on apparent (possibly corrupted) labels, because that
is all a learner ever sees.  Analytic rates come from the closed-form region
masses; empirical rates from weighted counts.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from .bias import BiasParams, RegionMasses, region_masses
from .distribution import (
    GROUP_A,
    GROUP_B,
    Dataset,
    DeviationParams,
    TrueModel,
    predict,
    validate_deviations,
)
from .errors import DegenerateDenominator, InsufficientData, RangeError


class Criterion(enum.Enum):
    EQUAL_OPPORTUNITY = "equal_opportunity"
    EQUALIZED_ODDS = "equalized_odds"
    DEMOGRAPHIC_PARITY = "demographic_parity"


@dataclass(frozen=True)
class ConstraintKind:
    """A criterion plus the tolerance at which a gap counts as satisfied.

    Analytic checks keep the default 1e-12; empirical checks need a positive
    tolerance sized to sampling noise (0.01 at n = 1e5, scaling as n^-1/2).
    """

    criterion: Criterion
    tolerance: float = 1e-12

    def __post_init__(self):
        if self.tolerance < 0.0:
            raise RangeError(f"tolerance={self.tolerance!r} must be >= 0")


def empirical_tolerance(n: int, at_1e5: float = 0.01) -> float:
    """Constraint tolerance matched to sampling noise, n^-1/2 scaling."""
    if n < 1:
        raise RangeError(f"n={n!r} must be >= 1")
    return at_1e5 * (1e5 / float(n)) ** 0.5


@dataclass(frozen=True)
class ConstraintLevel:
    """Per-group level c = p2 eta - p1 (1 - eta).

    Equal opportunity holds exactly when the two groups' levels agree; the
    true positive rate of a hypothesis is an affine function of c alone.
    """

    c: float

    @classmethod
    def from_deviations(cls, p1: float, p2: float, eta: float) -> "ConstraintLevel":
        return cls(p2 * eta - p1 * (1.0 - eta))


def constraint_level(p1: float, p2: float, eta: float) -> float:
    return p2 * eta - p1 * (1.0 - eta)


def _group_deviations(params: DeviationParams, group: int) -> tuple[float, float]:
    if group == GROUP_A:
        return params.p1a, params.p2a
    if group == GROUP_B:
        return params.p1b, params.p2b
    raise RangeError(f"group={group!r} not in {{0, 1}}")


def biased_tpr(
    params: DeviationParams, group: int, model: TrueModel, bias: BiasParams
) -> float:
    """Apparent true positive rate of the group's hypothesis.

    Retention and flipping scale both apparent-positive region masses by the
    same factor beta_pos (1 - nu), so the normalized form is identical for
    both groups and independent of the bias parameters.
    """
    validate_deviations(params, model)
    masses = region_masses(model, bias)
    pos_mass = (masses.r1 + masses.r3) if group == GROUP_A else (masses.r5 + masses.r7)
    if pos_mass <= 0.0:
        raise DegenerateDenominator(
            f"group {'AB'[group]} has no apparent-positive mass"
        )
    p, eta = model.p, model.eta
    p1, p2 = _group_deviations(params, group)
    return ((p - p1) * (1.0 - eta) + p2 * eta) / (p * (1.0 - eta) + (1.0 - p) * eta)


def _fpr_from_masses(
    neg_hi: float, neg_lo: float, p1: float, p2: float, p: float
) -> float:
    # neg_hi: apparent-negative mass of the reference positive region,
    # neg_lo: of the negative region; a 0/0 share is treated as 0 (p = 1 edge).
    denom = neg_hi + neg_lo
    if denom <= 0.0:
        raise DegenerateDenominator("group has no apparent-negative mass")
    hi_share = (p - p1) / p if p > 0.0 else 0.0
    lo_share = p2 / (1.0 - p) if p < 1.0 else 0.0
    return (neg_hi * hi_share + neg_lo * lo_share) / denom


def biased_fpr(
    params: DeviationParams, group: int, model: TrueModel, bias: BiasParams
) -> float:
    """Apparent false positive rate of the group's hypothesis."""
    validate_deviations(params, model)
    masses = region_masses(model, bias)
    p1, p2 = _group_deviations(params, group)
    if group == GROUP_A:
        return _fpr_from_masses(masses.r2, masses.r4, p1, p2, model.p)
    return _fpr_from_masses(masses.r6, masses.r8, p1, p2, model.p)


def biased_positive_rate(
    params: DeviationParams, group: int, model: TrueModel, bias: BiasParams
) -> float:
    """Fraction of the group's surviving sample classified positive.

    Survival in the reference positive region is s_pos = (1-eta) beta_pos +
    eta beta_neg per unit mass, s_neg symmetrically in the negative region;
    flipping moves labels but removes nothing.
    """
    validate_deviations(params, model)
    p, eta = model.p, model.eta
    p1, p2 = _group_deviations(params, group)
    if group == GROUP_A:
        return (p - p1) + p2
    s_pos = (1.0 - eta) * bias.beta_pos + eta * bias.beta_neg
    s_neg = eta * bias.beta_pos + (1.0 - eta) * bias.beta_neg
    return ((p - p1) * s_pos + p2 * s_neg) / (p * s_pos + (1.0 - p) * s_neg)


def constraint_gap(
    kind: ConstraintKind,
    params: DeviationParams,
    model: TrueModel,
    bias: BiasParams,
) -> float:
    """Signed A-minus-B rate difference of the criterion's defining rate.

    For equal opportunity the gap reduces to (c_A - c_B) / base rate, which is
    exactly zero whenever the per-group constraint levels agree.  For
    equalized odds the gap is max(|TPR gap|, |FPR gap|), hence non-negative.
    """
    validate_deviations(params, model)
    eta = model.eta
    q = model.p * (1.0 - eta) + (1.0 - model.p) * eta
    if kind.criterion is Criterion.EQUAL_OPPORTUNITY:
        c_a = constraint_level(params.p1a, params.p2a, eta)
        c_b = constraint_level(params.p1b, params.p2b, eta)
        return (c_a - c_b) / q
    if kind.criterion is Criterion.DEMOGRAPHIC_PARITY:
        return biased_positive_rate(params, GROUP_A, model, bias) - biased_positive_rate(
            params, GROUP_B, model, bias
        )
    if kind.criterion is Criterion.EQUALIZED_ODDS:
        c_a = constraint_level(params.p1a, params.p2a, eta)
        c_b = constraint_level(params.p1b, params.p2b, eta)
        tpr_gap = (c_a - c_b) / q
        fpr_gap = biased_fpr(params, GROUP_A, model, bias) - biased_fpr(
            params, GROUP_B, model, bias
        )
        return max(abs(tpr_gap), abs(fpr_gap))
    raise RangeError(f"unknown criterion {kind.criterion!r}")


def satisfies(
    kind: ConstraintKind,
    params: DeviationParams,
    model: TrueModel,
    bias: BiasParams,
) -> bool:
    return abs(constraint_gap(kind, params, model, bias)) <= kind.tolerance


@dataclass(frozen=True)
class GroupRates:
    tpr: float
    fpr: float
    positive_rate: float


@dataclass(frozen=True)
class EmpiricalRates:
    a: GroupRates
    b: GroupRates

    def gap(self, criterion: Criterion) -> float:
        if criterion is Criterion.EQUAL_OPPORTUNITY:
            return self.a.tpr - self.b.tpr
        if criterion is Criterion.DEMOGRAPHIC_PARITY:
            return self.a.positive_rate - self.b.positive_rate
        if criterion is Criterion.EQUALIZED_ODDS:
            return max(abs(self.a.tpr - self.b.tpr), abs(self.a.fpr - self.b.fpr))
        raise RangeError(f"unknown criterion {criterion!r}")


def empirical_rates(h: tuple[float, float], data: Dataset) -> EmpiricalRates:
    """Weighted per-group rates of the threshold pair ``h`` on ``data``.

    Raises InsufficientData naming the group and rate whose denominator
    weight is zero.
    """
    t_a, t_b = h
    yhat = predict(data.x, data.group, t_a, t_b)
    out = []
    for group, name in ((GROUP_A, "A"), (GROUP_B, "B")):
        mask = data.group == group
        w = data.weight[mask]
        label = data.label[mask]
        pred = yhat[mask]
        w_total = float(np.sum(w))
        if w_total <= 0.0:
            raise InsufficientData(f"group {name} has no examples")
        w_pos = float(np.sum(w[label == 1]))
        w_neg = w_total - w_pos
        if w_pos <= 0.0:
            raise InsufficientData(f"group {name} has no positive examples (TPR undefined)")
        if w_neg <= 0.0:
            raise InsufficientData(f"group {name} has no negative examples (FPR undefined)")
        tpr = float(np.sum(w[(label == 1) & (pred == 1)])) / w_pos
        fpr = float(np.sum(w[(label == 0) & (pred == 1)])) / w_neg
        rate = float(np.sum(w[pred == 1])) / w_total
        out.append(GroupRates(tpr=tpr, fpr=fpr, positive_rate=rate))
    return EmpiricalRates(a=out[0], b=out[1])
