"""Constrained empirical risk minimization on the biased distribution.

The biased (apparent) error of a hypothesis pair is bilinear in the deviation
masses, with the region masses as coefficients.  Under the equal-opportunity
constraint the search space collapses onto three candidates: the reference
pair, all-negative, and all-positive.  The grid solver performs the same
minimization on a lattice and exists mostly as an oracle for the exact one,
plus as the only solver for criteria without a three-candidate reduction.

Reweighting interventions return copies of the data with apparent group-B
positives upweighted; ``labelbias_z`` gives the correction factor that
restores the true positive odds under label flipping.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .bias import BiasParams, RegionMasses, region_masses
from .distribution import (
    GROUP_B,
    Dataset,
    DeviationParams,
    TrueModel,
    analytic_true_error,
    predict,
    validate_deviations,
    validate_model,
)
from .errors import DegenerateDenominator, NoFeasiblePoint, RangeError
from .fairness import ConstraintKind, Criterion, constraint_gap, constraint_level

BAYES = "bayes_optimal"
ALL_NEGATIVE = "all_negative"
ALL_POSITIVE = "all_positive"


def biased_error(
    params: DeviationParams, masses: RegionMasses, model: TrueModel
) -> float:
    """Un-normalized apparent misclassification mass of the hypothesis pair.

    Within each reference region the hypothesis misclassifies the share of
    the region it flips, applied to the apparent-label mass it disagrees
    with.  Comparisons between hypotheses are unaffected by the missing
    normalization by surviving mass.
    """
    validate_deviations(params, model)
    p = model.p
    err = (masses.r1 * params.p1a + masses.r2 * (p - params.p1a)) / p
    err += (masses.r5 * params.p1b + masses.r6 * (p - params.p1b)) / p
    if p < 1.0:
        q = 1.0 - p
        err += (masses.r3 * (q - params.p2a) + masses.r4 * params.p2a) / q
        err += (masses.r7 * (q - params.p2b) + masses.r8 * params.p2b) / q
    return err


def shrink(params: DeviationParams, model: TrueModel) -> DeviationParams:
    """Reduce each group's deviations until at most one is nonzero, keeping
    the group's constraint level c = p2 eta - p1 (1 - eta) fixed.

    Moving (p1, p2) down along the fixed-c line never increases the biased
    error for masses generated by any bias applied to ``model``.  Inputs
    whose groups disagree on c keep their original gap; the operation
    repairs nothing, it only canonicalizes each group separately.
    """
    validate_deviations(params, model)
    eta = model.eta
    p = model.p

    def one(p1: float, p2: float) -> tuple[float, float]:
        c = constraint_level(p1, p2, eta)
        if c < 0.0:
            return min(-c / (1.0 - eta), p), 0.0
        if c > 0.0:
            # c > 0 requires eta > 0 because p2 eta bounds c from above
            return 0.0, min(c / eta, 1.0 - p)
        return 0.0, 0.0

    p1a, p2a = one(params.p1a, params.p2a)
    p1b, p2b = one(params.p1b, params.p2b)
    return DeviationParams(p1a, p2a, p1b, p2b)


@dataclass(frozen=True)
class Candidate:
    label: str
    params: DeviationParams
    biased_error: float
    feasible: bool


@dataclass(frozen=True)
class SolveReport:
    chosen: DeviationParams
    chosen_label: str
    biased_error: float
    biased_error_normalized: float
    true_error: float
    constraint_gap: float
    candidates: tuple[Candidate, ...]
    tie: bool
    method: str
    n_feasible: int | None = None


def _report(
    chosen: DeviationParams,
    label: str,
    err: float,
    model: TrueModel,
    bias: BiasParams,
    kind: ConstraintKind,
    candidates: tuple[Candidate, ...],
    tie: bool,
    method: str,
    n_feasible: int | None,
) -> SolveReport:
    masses = region_masses(model, bias)
    total = masses.total()
    return SolveReport(
        chosen=chosen,
        chosen_label=label,
        biased_error=err,
        biased_error_normalized=err / total,
        true_error=analytic_true_error(chosen, model),
        constraint_gap=constraint_gap(kind, chosen, model, bias),
        candidates=candidates,
        tie=tie,
        method=method,
        n_feasible=n_feasible,
    )


def exact_constrained_erm(
    model: TrueModel, bias: BiasParams, kind: ConstraintKind | None = None
) -> SolveReport:
    """Equal-opportunity constrained minimizer of the biased error.

    Any feasible pair canonicalizes, group by group, to a single-deviation
    pair with matched parameters, on which the error is affine; the minimum
    is therefore attained at the reference pair, all-negative, or
    all-positive.  Exact ties prefer the reference pair and set ``tie``.
    """
    validate_model(model)
    if kind is None:
        kind = ConstraintKind(Criterion.EQUAL_OPPORTUNITY)
    if kind.criterion is not Criterion.EQUAL_OPPORTUNITY:
        raise RangeError(
            "the exact solver supports only the equal-opportunity constraint"
        )
    masses = region_masses(model, bias)
    p = model.p
    entries = (
        (BAYES, DeviationParams.bayes_optimal()),
        (ALL_NEGATIVE, DeviationParams.all_negative(p)),
        (ALL_POSITIVE, DeviationParams.all_positive(p)),
    )
    candidates = tuple(
        Candidate(label, params, biased_error(params, masses, model), True)
        for label, params in entries
    )
    best = min(c.biased_error for c in candidates)
    ties = [c for c in candidates if c.biased_error == best]
    # preference on exact ties: reference pair first, then all-positive,
    # whose parameter tuple precedes all-negative lexicographically
    order = {BAYES: 0, ALL_POSITIVE: 1, ALL_NEGATIVE: 2}
    ties.sort(key=lambda c: order[c.label])
    chosen = ties[0]
    return _report(
        chosen.params,
        chosen.label,
        chosen.biased_error,
        model,
        bias,
        kind,
        candidates,
        tie=len(ties) > 1,
        method="exact",
        n_feasible=None,
    )


def _lattice(model: TrueModel, resolution: int):
    p = model.p
    p1_axis = np.linspace(0.0, p, resolution)
    p2_axis = np.linspace(0.0, 1.0 - p, resolution)
    g1 = np.repeat(p1_axis, resolution)
    g2 = np.tile(p2_axis, resolution)
    return g1, g2


def _lattice_errors(
    g1: np.ndarray, g2: np.ndarray, masses: RegionMasses, model: TrueModel, group_b: bool
) -> np.ndarray:
    p = model.p
    if group_b:
        m_hi_pos, m_hi_neg, m_lo_pos, m_lo_neg = masses.r5, masses.r6, masses.r7, masses.r8
    else:
        m_hi_pos, m_hi_neg, m_lo_pos, m_lo_neg = masses.r1, masses.r2, masses.r3, masses.r4
    err = (m_hi_pos * g1 + m_hi_neg * (p - g1)) / p
    if p < 1.0:
        q = 1.0 - p
        err = err + (m_lo_pos * (q - g2) + m_lo_neg * g2) / q
    return err


def _min_per_key(keys: np.ndarray, errs: np.ndarray, g1: np.ndarray, g2: np.ndarray):
    # index of the minimum error per distinct key, ties broken by (p1, p2)
    order = np.lexsort((g2, g1, errs))
    uniq, first = np.unique(keys[order], return_index=True)
    return uniq, order[first]


def _grid_equal_opportunity(
    kind: ConstraintKind, model: TrueModel, bias: BiasParams, resolution: int
) -> SolveReport:
    masses = region_masses(model, bias)
    g1, g2 = _lattice(model, resolution)
    errs_a = _lattice_errors(g1, g2, masses, model, group_b=False)
    errs_b = _lattice_errors(g1, g2, masses, model, group_b=True)
    # matched lattices: identical key arrays, so feasibility is exact equality
    keys = constraint_level(g1, g2, model.eta)
    uniq_a, idx_a = _min_per_key(keys, errs_a, g1, g2)
    uniq_b, idx_b = _min_per_key(keys, errs_b, g1, g2)
    assert uniq_a.shape == uniq_b.shape and np.array_equal(uniq_a, uniq_b)
    totals = errs_a[idx_a] + errs_b[idx_b]
    j = int(np.argmin(totals))
    ia, ib = idx_a[j], idx_b[j]
    chosen = DeviationParams(float(g1[ia]), float(g2[ia]), float(g1[ib]), float(g2[ib]))
    err = float(totals[j])
    _, counts = np.unique(keys, return_counts=True)
    n_feasible = int(np.sum(counts.astype(np.int64) ** 2))
    candidates = _canonical_candidates(kind, model, bias, masses)
    label = _match_label(chosen, model)
    tie = bool(np.sum(totals == totals[j]) > 1)
    return _report(
        chosen, label, err, model, bias, kind, candidates, tie, "grid", n_feasible
    )


def _grid_pairwise(
    kind: ConstraintKind, model: TrueModel, bias: BiasParams, resolution: int
) -> SolveReport:
    masses = region_masses(model, bias)
    p, eta = model.p, model.eta
    g1, g2 = _lattice(model, resolution)
    errs_a = _lattice_errors(g1, g2, masses, model, group_b=False)
    errs_b = _lattice_errors(g1, g2, masses, model, group_b=True)
    q = p * (1.0 - eta) + (1.0 - p) * eta
    tpr = ((p - g1) * (1.0 - eta) + g2 * eta) / q

    def fpr_array(neg_hi: float, neg_lo: float) -> np.ndarray:
        denom = neg_hi + neg_lo
        if denom <= 0.0:
            raise DegenerateDenominator("group has no apparent-negative mass")
        out = neg_hi * (p - g1) / p
        if p < 1.0:
            out = out + neg_lo * g2 / (1.0 - p)
        return out / denom

    if kind.criterion is Criterion.EQUALIZED_ODDS:
        rate_a_arrays = (tpr, fpr_array(masses.r2, masses.r4))
        rate_b_arrays = (tpr, fpr_array(masses.r6, masses.r8))
    elif kind.criterion is Criterion.DEMOGRAPHIC_PARITY:
        s_pos = (1.0 - eta) * bias.beta_pos + eta * bias.beta_neg
        s_neg = eta * bias.beta_pos + (1.0 - eta) * bias.beta_neg
        rate_b = ((p - g1) * s_pos + g2 * s_neg) / (p * s_pos + (1.0 - p) * s_neg)
        rate_a_arrays = ((p - g1) + g2,)
        rate_b_arrays = (rate_b,)
    else:
        raise RangeError(f"unsupported criterion {kind.criterion!r}")

    tol = kind.tolerance
    n = g1.shape[0]
    best_err = np.inf
    best_pair = None
    n_feasible = 0
    chunk = max(1, min(512, n))
    for start in range(0, n, chunk):
        stop = min(start + chunk, n)
        mask = np.ones((stop - start, n), dtype=bool)
        for ra, rb in zip(rate_a_arrays, rate_b_arrays):
            mask &= np.abs(ra[start:stop, None] - rb[None, :]) <= tol
        n_feasible += int(np.count_nonzero(mask))
        if not mask.any():
            continue
        totals = errs_a[start:stop, None] + errs_b[None, :]
        totals = np.where(mask, totals, np.inf)
        flat = int(np.argmin(totals))
        i, jj = divmod(flat, n)
        if totals[i, jj] < best_err:
            best_err = float(totals[i, jj])
            best_pair = (start + i, jj)
    if best_pair is None:
        raise NoFeasiblePoint(
            f"no lattice pair satisfies {kind.criterion.value} within {tol!r}"
        )
    ia, ib = best_pair
    chosen = DeviationParams(float(g1[ia]), float(g2[ia]), float(g1[ib]), float(g2[ib]))
    candidates = _canonical_candidates(kind, model, bias, masses)
    label = _match_label(chosen, model)
    return _report(
        chosen, label, best_err, model, bias, kind, candidates, False, "grid", n_feasible
    )


def _canonical_candidates(
    kind: ConstraintKind, model: TrueModel, bias: BiasParams, masses: RegionMasses
) -> tuple[Candidate, ...]:
    entries = (
        (BAYES, DeviationParams.bayes_optimal()),
        (ALL_NEGATIVE, DeviationParams.all_negative(model.p)),
        (ALL_POSITIVE, DeviationParams.all_positive(model.p)),
    )
    out = []
    for label, params in entries:
        gap = constraint_gap(kind, params, model, bias)
        out.append(
            Candidate(
                label,
                params,
                biased_error(params, masses, model),
                abs(gap) <= kind.tolerance,
            )
        )
    return tuple(out)


def _match_label(chosen: DeviationParams, model: TrueModel) -> str:
    if chosen == DeviationParams.bayes_optimal():
        return BAYES
    if chosen == DeviationParams.all_negative(model.p):
        return ALL_NEGATIVE
    if chosen == DeviationParams.all_positive(model.p):
        return ALL_POSITIVE
    return "interior"


def grid_constrained_erm(
    kind: ConstraintKind, model: TrueModel, bias: BiasParams, resolution: int
) -> SolveReport:
    """Constrained minimization over a matched per-group deviation lattice.

    Each group ranges over resolution x resolution points covering
    [0, p] x [0, 1-p].  Equal opportunity filters pairs by exact equality of
    the per-group constraint levels (the matched lattices make the canonical
    candidates exactly feasible); the other criteria filter by the kind's
    tolerance, since exact feasibility is measure zero on a lattice.
    """
    validate_model(model)
    if resolution < 2:
        raise RangeError(f"resolution={resolution!r} must be >= 2")
    if kind.criterion is Criterion.EQUAL_OPPORTUNITY:
        return _grid_equal_opportunity(kind, model, bias, resolution)
    return _grid_pairwise(kind, model, bias, resolution)


def reweight_underrep(data: Dataset, beta: float) -> Dataset:
    """Upweight apparent group-B positives by 1/beta.

    Under pure under-representation with retention rate beta this makes the
    weighted empirical risk an unbiased estimate of the true risk (per
    original example, before discarding).
    """
    if not (0.0 < beta <= 1.0):
        raise RangeError(f"beta={beta!r} outside (0, 1]")
    return _scale_apparent_b_positives(data, 1.0 / beta)


def labelbias_z(p_a1: float, nu: float) -> float:
    """Weight restoring the true positive odds under flip rate nu.

    p_a1 is the apparent positive fraction of the unbiased group.  The value
    always lies strictly between (eta + (1-eta) nu) / ((1-eta)(1-nu)) and
    (1-eta + eta nu) / (eta (1-nu)) whenever p_a1 comes from a valid model
    with eta > 0.
    """
    if not (0.0 < p_a1 < 1.0):
        raise RangeError(f"p_a1={p_a1!r} outside (0, 1)")
    if not (0.0 <= nu < 1.0):
        raise RangeError(f"nu={nu!r} outside [0, 1)")
    return (1.0 - p_a1 * (1.0 - nu)) / ((1.0 - nu) * (1.0 - p_a1))


def reweight_labelbias(data: Dataset, z: float) -> Dataset:
    """Upweight apparent group-B positives by z."""
    if not (z > 0.0):
        raise RangeError(f"z={z!r} must be > 0")
    return _scale_apparent_b_positives(data, z)


def _scale_apparent_b_positives(data: Dataset, factor: float) -> Dataset:
    weight = data.weight.copy()
    mask = (data.group == GROUP_B) & (data.label == 1)
    weight[mask] *= factor
    return Dataset(
        x=data.x.copy(),
        group=data.group.copy(),
        label=data.label.copy(),
        weight=weight,
        seed=data.seed,
    )


def empirical_weighted_risk(
    data: Dataset, t_a: float, t_b: float, denominator: float | None = None
) -> float:
    """Weighted misclassification mass of the threshold pair on ``data``.

    The default denominator is the total weight; pass the pre-corruption
    sample size to estimate the true risk from reweighted biased data.
    """
    yhat = predict(data.x, data.group, t_a, t_b)
    wrong = float(np.sum(data.weight[yhat != data.label]))
    denom = float(np.sum(data.weight)) if denominator is None else float(denominator)
    if denom <= 0.0:
        raise RangeError(f"denominator={denom!r} must be > 0")
    return wrong / denom


def _json_value(obj):
    if isinstance(obj, float):
        return ("raw", format(obj, ".17g"))
    if isinstance(obj, (int, bool)) or obj is None or isinstance(obj, str):
        return ("plain", obj)
    if isinstance(obj, DeviationParams):
        return _json_value(
            {"p1a": obj.p1a, "p2a": obj.p2a, "p1b": obj.p1b, "p2b": obj.p2b}
        )
    if isinstance(obj, Candidate):
        return _json_value(
            {
                "label": obj.label,
                "params": obj.params,
                "biased_error": obj.biased_error,
                "feasible": obj.feasible,
            }
        )
    if isinstance(obj, dict):
        return ("dict", [(k, _json_value(v)) for k, v in obj.items()])
    if isinstance(obj, (list, tuple)):
        return ("list", [_json_value(v) for v in obj])
    raise TypeError(f"cannot serialize {type(obj)!r}")


def _render(node) -> str:
    tag, payload = node
    if tag == "raw":
        return payload
    if tag == "plain":
        return json.dumps(payload)
    if tag == "dict":
        inner = ", ".join(f"{json.dumps(k)}: {_render(v)}" for k, v in payload)
        return "{" + inner + "}"
    inner = ", ".join(_render(v) for v in payload)
    return "[" + inner + "]"


def solve_report_to_json(report: SolveReport) -> str:
    """Serialize with every float as a 17-significant-digit decimal."""
    doc = {
        "chosen": report.chosen,
        "chosen_label": report.chosen_label,
        "biased_error": report.biased_error,
        "biased_error_normalized": report.biased_error_normalized,
        "true_error": report.true_error,
        "constraint_gap": report.constraint_gap,
        "candidates": list(report.candidates),
        "tie": report.tie,
        "method": report.method,
        "n_feasible": report.n_feasible,
    }
    return _render(_json_value(doc))
