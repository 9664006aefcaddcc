"""When does constrained training on biased data return the reference pair.

Two closed-form margins decide the equal-opportunity solve.  The reference
pair beats all-negative by p * cond_neg and all-positive by (1-p) * cond_pos
in biased error, with

    cond_neg = (1-r)(1-2 eta) + r ((1-eta) beta_pos (1-2 nu) - eta beta_neg)
    cond_pos = (1-r)(1-2 eta) + r ((1-eta) beta_neg - (1-2 nu) beta_pos eta)

so recovery holds exactly when both are positive, and each condition is tight
(a negative value hands the solve to the corresponding extreme).  Both are
affine in every single parameter, which gives exact sweep boundaries and
vertex-based certificates over parameter boxes.
"""

from __future__ import annotations

import csv
import enum
from dataclasses import dataclass, replace

import numpy as np

from .bias import BiasParams
from .distribution import TrueModel, validate_model
from .errors import RangeError
from .solver import ALL_NEGATIVE, ALL_POSITIVE, BAYES, exact_constrained_erm


class FailureExtreme(enum.Enum):
    ALL_NEGATIVE = "all_negative"
    ALL_POSITIVE = "all_positive"
    BOTH = "both"


@dataclass(frozen=True)
class ConditionReport:
    cond_neg: float
    cond_pos: float
    recovers: bool
    failing_extreme: FailureExtreme | None


def _conditions(
    r: float, eta: float, beta_pos: float, beta_neg: float, nu: float
) -> tuple[float, float]:
    base = (1.0 - r) * (1.0 - 2.0 * eta)
    cond_neg = base + r * ((1.0 - eta) * beta_pos * (1.0 - 2.0 * nu) - eta * beta_neg)
    cond_pos = base + r * ((1.0 - eta) * beta_neg - (1.0 - 2.0 * nu) * beta_pos * eta)
    return cond_neg, cond_pos


def check_conditions(model: TrueModel, bias: BiasParams) -> ConditionReport:
    """Evaluate both recovery margins; recovers iff both are strictly positive."""
    validate_model(model)
    cond_neg, cond_pos = _conditions(
        model.r, model.eta, bias.beta_pos, bias.beta_neg, bias.nu
    )
    recovers = cond_neg > 0.0 and cond_pos > 0.0
    if recovers:
        failing = None
    elif cond_neg <= 0.0 and cond_pos <= 0.0:
        failing = FailureExtreme.BOTH
    elif cond_neg <= 0.0:
        failing = FailureExtreme.ALL_NEGATIVE
    else:
        failing = FailureExtreme.ALL_POSITIVE
    return ConditionReport(cond_neg, cond_pos, recovers, failing)


class Verdict(enum.Enum):
    RECOVERS = "recovers"
    FAILS_TO_ALL_NEGATIVE = "fails_to_all_negative"
    FAILS_TO_ALL_POSITIVE = "fails_to_all_positive"
    TIE = "tie"


def verdict_from_conditions(cond_neg: float, cond_pos: float) -> Verdict:
    if cond_neg > 0.0 and cond_pos > 0.0:
        return Verdict.RECOVERS
    if cond_neg < 0.0:
        return Verdict.FAILS_TO_ALL_NEGATIVE
    if cond_pos < 0.0:
        return Verdict.FAILS_TO_ALL_POSITIVE
    return Verdict.TIE


_AXIS_DOMAINS = {
    "r": (0.0, 1.0, False, False),
    "eta": (0.0, 0.5, True, False),
    "beta_pos": (0.0, 1.0, False, True),
    "beta_neg": (0.0, 1.0, False, True),
    "nu": (0.0, 1.0, True, False),
}


@dataclass(frozen=True)
class AxisSpec:
    """A swept parameter: name in {r, eta, beta_pos, beta_neg, nu} and range."""

    name: str
    start: float
    stop: float
    steps: int


def _validate_axis(axis: AxisSpec) -> None:
    if axis.name not in _AXIS_DOMAINS:
        raise RangeError(f"axis {axis.name!r} not in {sorted(_AXIS_DOMAINS)}")
    lo, hi, lo_closed, hi_closed = _AXIS_DOMAINS[axis.name]
    for value in (axis.start, axis.stop):
        above = value >= lo if lo_closed else value > lo
        below = value <= hi if hi_closed else value < hi
        if not (above and below):
            raise RangeError(f"{axis.name}={value!r} outside its domain")
    if axis.stop < axis.start:
        raise RangeError(f"axis {axis.name!r} has stop < start")
    if axis.steps < 1:
        raise RangeError(f"axis {axis.name!r} needs steps >= 1")


def _apply_axis(
    model: TrueModel, bias: BiasParams, name: str, value: float
) -> tuple[TrueModel, BiasParams]:
    if name == "r":
        return replace(model, r=value), bias
    if name == "eta":
        return replace(model, eta=value), bias
    return model, replace(bias, **{name: value})


@dataclass
class RegionSweep:
    axis1: AxisSpec
    axis2: AxisSpec
    values1: np.ndarray
    values2: np.ndarray
    verdicts: np.ndarray  # Verdict values as strings, shape (steps1, steps2)
    cond_neg: np.ndarray
    cond_pos: np.ndarray
    boundary: tuple[tuple[str, np.ndarray], ...]  # (condition name, (k, 2) points)


_CROSS_VALIDATION_MARGIN = 1e-9


def recovery_region(
    model: TrueModel, bias: BiasParams, axis1: AxisSpec, axis2: AxisSpec
) -> RegionSweep:
    """Sweep two parameters and classify every cell by the recovery margins.

    Every cell whose margins clear 1e-9 is cross-validated against the exact
    constrained solver.  The boundary polylines are the zero level sets of
    the binding condition, solved in closed form column by column (each
    condition is affine in the swept parameter).
    """
    validate_model(model)
    _validate_axis(axis1)
    _validate_axis(axis2)
    if axis1.name == axis2.name:
        raise RangeError(f"axes must differ, both are {axis1.name!r}")
    values1 = np.linspace(axis1.start, axis1.stop, axis1.steps)
    values2 = np.linspace(axis2.start, axis2.stop, axis2.steps)

    shape = (axis1.steps, axis2.steps)
    verdicts = np.empty(shape, dtype=object)
    cond_neg = np.empty(shape, dtype=np.float64)
    cond_pos = np.empty(shape, dtype=np.float64)
    label_for = {
        Verdict.RECOVERS: BAYES,
        Verdict.FAILS_TO_ALL_NEGATIVE: ALL_NEGATIVE,
        Verdict.FAILS_TO_ALL_POSITIVE: ALL_POSITIVE,
    }
    for i, v1 in enumerate(values1):
        m1, b1 = _apply_axis(model, bias, axis1.name, float(v1))
        for j, v2 in enumerate(values2):
            m2, b2 = _apply_axis(m1, b1, axis2.name, float(v2))
            report = check_conditions(m2, b2)
            cond_neg[i, j] = report.cond_neg
            cond_pos[i, j] = report.cond_pos
            verdict = verdict_from_conditions(report.cond_neg, report.cond_pos)
            verdicts[i, j] = verdict.value
            margin = min(abs(report.cond_neg), abs(report.cond_pos))
            if margin > _CROSS_VALIDATION_MARGIN:
                solve = exact_constrained_erm(m2, b2)
                if solve.chosen_label != label_for[verdict]:
                    raise RuntimeError(
                        f"condition verdict {verdict.value} disagrees with the "
                        f"exact solver ({solve.chosen_label}) at "
                        f"{axis1.name}={v1!r}, {axis2.name}={v2!r}"
                    )
    boundary = _boundary_polylines(model, bias, axis1, axis2, values1, values2)
    return RegionSweep(
        axis1, axis2, values1, values2, verdicts, cond_neg, cond_pos, boundary
    )


def _boundary_polylines(model, bias, axis1, axis2, values1, values2):
    y0, y1 = float(values2[0]), float(values2[-1])
    probe_a, probe_b = y0, y1
    if probe_a == probe_b:
        return ()
    out = []
    for cond_index, name in ((0, "cond_neg"), (1, "cond_pos")):
        points = []
        for v1 in values1:
            m1, b1 = _apply_axis(model, bias, axis1.name, float(v1))

            def value_at(y: float) -> tuple[float, float]:
                m2, b2 = _apply_axis(m1, b1, axis2.name, y)
                return _conditions(m2.r, m2.eta, b2.beta_pos, b2.beta_neg, b2.nu)

            ca = value_at(probe_a)[cond_index]
            cb = value_at(probe_b)[cond_index]
            slope = (cb - ca) / (probe_b - probe_a)
            if slope == 0.0:
                continue
            y_star = probe_a - ca / slope
            if not (y0 <= y_star <= y1):
                continue
            other = value_at(y_star)[1 - cond_index]
            if other < 0.0:
                continue  # the other condition binds first there
            points.append((float(v1), float(y_star)))
        if points:
            out.append((name, np.asarray(points, dtype=np.float64)))
    return tuple(out)


def sweep_to_csv(sweep: RegionSweep, path: str) -> None:
    """One row per cell: axis1, axis2, verdict, cond_neg, cond_pos."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow([sweep.axis1.name, sweep.axis2.name, "verdict", "cond_neg", "cond_pos"])
        for i, v1 in enumerate(sweep.values1):
            for j, v2 in enumerate(sweep.values2):
                writer.writerow([
                    repr(float(v1)),
                    repr(float(v2)),
                    sweep.verdicts[i, j],
                    repr(float(sweep.cond_neg[i, j])),
                    repr(float(sweep.cond_pos[i, j])),
                ])


def recheck_sweep_csv(path: str) -> int:
    """Recompute every verdict from the stored margins; return mismatch count."""
    mismatches = 0
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        next(reader)
        for row in reader:
            verdict = verdict_from_conditions(float(row[3]), float(row[4]))
            if verdict.value != row[2]:
                mismatches += 1
    return mismatches


@dataclass(frozen=True)
class Certificate:
    """Result of a strong-recovery search over a parameter box.

    The box is r in (0, r0), eta in [0, eta0), all retention rates in (0, 1],
    flip rates in [0, 1), optionally restricted to a pure bias family.  Both
    margins are affine in each parameter separately, so their infimum over
    the box is attained at a closure vertex; the certificate passes when no
    vertex goes negative and no sampled interior point fails.
    """

    r0: float
    eta0: float
    family: str
    trials: int
    passed: bool
    corner_min: float
    counterexample: dict | None


_FAMILIES = ("combined", "underrepresentation", "labeling")


def strong_recovery_certificate(
    r0: float,
    eta0: float,
    trials: int,
    seed: int,
    family: str = "combined",
) -> Certificate:
    if not (0.0 < r0 < 1.0):
        raise RangeError(f"r0={r0!r} outside (0, 1)")
    if not (0.0 < eta0 <= 0.5):
        raise RangeError(f"eta0={eta0!r} outside (0, 0.5]")
    if trials < 1:
        raise RangeError(f"trials={trials!r} must be >= 1")
    if family not in _FAMILIES:
        raise RangeError(f"family={family!r} not in {_FAMILIES}")

    rng = np.random.default_rng(seed)
    r = rng.uniform(0.0, r0, trials)
    eta = rng.uniform(0.0, eta0, trials)
    if family == "underrepresentation":
        beta_pos = 1.0 - rng.random(trials)
        beta_neg = np.ones(trials)
        nu = np.zeros(trials)
    elif family == "labeling":
        beta_pos = np.ones(trials)
        beta_neg = np.ones(trials)
        nu = rng.random(trials)
    else:
        beta_pos = 1.0 - rng.random(trials)
        beta_neg = 1.0 - rng.random(trials)
        nu = rng.random(trials)

    base = (1.0 - r) * (1.0 - 2.0 * eta)
    cond_neg = base + r * ((1.0 - eta) * beta_pos * (1.0 - 2.0 * nu) - eta * beta_neg)
    cond_pos = base + r * ((1.0 - eta) * beta_neg - (1.0 - 2.0 * nu) * beta_pos * eta)
    failing = np.flatnonzero((cond_neg <= 0.0) | (cond_pos <= 0.0))

    corner_min, worst_corner = _corner_infimum(r0, eta0, family)

    counterexample = None
    if failing.size:
        k = int(failing[0])
        counterexample = {
            "r": float(r[k]),
            "eta": float(eta[k]),
            "beta_pos": float(beta_pos[k]),
            "beta_neg": float(beta_neg[k]),
            "nu": float(nu[k]),
            "cond_neg": float(cond_neg[k]),
            "cond_pos": float(cond_pos[k]),
        }
    elif corner_min < -1e-15:
        counterexample = _nudge_inside(worst_corner, r0, eta0)

    passed = corner_min >= -1e-15 and failing.size == 0
    return Certificate(
        r0=r0,
        eta0=eta0,
        family=family,
        trials=trials,
        passed=passed,
        corner_min=corner_min,
        counterexample=counterexample,
    )


def _corner_infimum(r0: float, eta0: float, family: str):
    if family == "underrepresentation":
        beta_pos_set, beta_neg_set, nu_set = (0.0, 1.0), (1.0,), (0.0,)
    elif family == "labeling":
        beta_pos_set, beta_neg_set, nu_set = (1.0,), (1.0,), (0.0, 1.0)
    else:
        beta_pos_set, beta_neg_set, nu_set = (0.0, 1.0), (0.0, 1.0), (0.0, 1.0)
    best = np.inf
    worst = None
    for r in (0.0, r0):
        for eta in (0.0, eta0):
            for bp in beta_pos_set:
                for bn in beta_neg_set:
                    for nu in nu_set:
                        cn, cp = _conditions(r, eta, bp, bn, nu)
                        value = min(cn, cp)
                        if value < best:
                            best = value
                            worst = (r, eta, bp, bn, nu)
    return float(best), worst


def _nudge_inside(corner, r0: float, eta0: float) -> dict | None:
    r, eta, bp, bn, nu = corner
    for scale in (1e-9, 1e-6, 1e-3, 1e-2):
        cand = (
            min(max(r, r0 * scale), r0 * (1.0 - scale)),
            min(eta, eta0 * (1.0 - scale)),
            max(bp, scale),
            max(bn, scale),
            min(nu, 1.0 - scale),
        )
        cn, cp = _conditions(*cand)
        if cn <= 0.0 or cp <= 0.0:
            return {
                "r": cand[0],
                "eta": cand[1],
                "beta_pos": cand[2],
                "beta_neg": cand[3],
                "nu": cand[4],
                "cond_neg": cn,
                "cond_pos": cp,
            }
    return None
