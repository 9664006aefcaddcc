"""Finite-sample experiments over the threshold hypothesis class.

Each repetition draws a clean sample, corrupts it, optionally reweights it or
filters the hypothesis grid by an empirical fairness constraint, minimizes
the weighted empirical risk over a (t_A, t_B) grid, and scores the chosen
pair by its exact population error.  Scoring analytically removes all
evaluation noise; a held-out estimate is available behind a flag as a sanity
check.

Threshold pairs realize exactly the one-sided deviation families that the
analytic solver reasons about, so large-sample experiments should (and do,
see the verification suites) reproduce the closed-form verdicts.
"""

from __future__ import annotations

import csv
import enum
import io
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .bias import BiasParams, apply_bias, estimate_beta, estimate_nu, region_masses
from .distribution import (
    GROUP_A,
    GROUP_B,
    Dataset,
    TrueModel,
    analytic_true_error,
    sample_true,
    thresholds_to_deviations,
    validate_model,
)
from .errors import DegenerateDenominator, InsufficientData, RangeError
from .fairness import ConstraintKind, Criterion, empirical_tolerance
from .recovery import check_conditions
from .solver import (
    ALL_NEGATIVE,
    ALL_POSITIVE,
    BAYES,
    labelbias_z,
    reweight_labelbias,
    reweight_underrep,
)

_THREADS_ENV = "BIASED_ERM_LAB_THREADS"


class InterventionKind(enum.Enum):
    NONE = "none"
    CONSTRAINT = "constraint"
    REWEIGHT_UNDERREP = "reweight_underrep"
    REWEIGHT_LABELBIAS = "reweight_labelbias"


@dataclass(frozen=True)
class Intervention:
    """What the learner does about the corruption, if anything."""

    kind: InterventionKind
    constraint: ConstraintKind | None = None

    def __post_init__(self):
        if not isinstance(self.kind, InterventionKind):
            object.__setattr__(self, "kind", InterventionKind(self.kind))
        if self.kind is InterventionKind.CONSTRAINT:
            if self.constraint is None:
                raise RangeError("constraint intervention needs a ConstraintKind")
        elif self.constraint is not None:
            raise RangeError(f"{self.kind.value} intervention takes no constraint")

    @classmethod
    def none(cls) -> "Intervention":
        return cls(InterventionKind.NONE)

    @classmethod
    def constrained(cls, kind: ConstraintKind) -> "Intervention":
        return cls(InterventionKind.CONSTRAINT, kind)

    @classmethod
    def reweight_underrep(cls) -> "Intervention":
        return cls(InterventionKind.REWEIGHT_UNDERREP)

    @classmethod
    def reweight_labelbias(cls) -> "Intervention":
        return cls(InterventionKind.REWEIGHT_LABELBIAS)


@dataclass(frozen=True)
class ExperimentConfig:
    model: TrueModel
    bias: BiasParams
    intervention: Intervention
    n_train: int
    n_reps: int
    threshold_grid: int = 101
    seed: int = 0
    recovery_tol: float = 0.02
    held_out_n: int = 0


def validate_config(config: ExperimentConfig) -> ExperimentConfig:
    validate_model(config.model)
    if config.n_train < 1:
        raise RangeError(f"n_train={config.n_train!r} must be >= 1")
    if config.n_reps < 1:
        raise RangeError(f"n_reps={config.n_reps!r} must be >= 1")
    if config.threshold_grid < 2:
        raise RangeError(f"threshold_grid={config.threshold_grid!r} must be >= 2")
    if not (config.recovery_tol > 0.0):
        raise RangeError(f"recovery_tol={config.recovery_tol!r} must be > 0")
    if config.held_out_n < 0:
        raise RangeError(f"held_out_n={config.held_out_n!r} must be >= 0")
    return config


@dataclass
class ExperimentResult:
    """Per-rep chosen thresholds and scores plus cross-rep aggregates.

    Reps whose feasible set is empty (or whose reweighting estimate is
    degenerate) carry NaN thresholds and scores; they count against the
    recovery rate but are excluded from the error aggregates.
    """

    config: ExperimentConfig
    t_a: np.ndarray
    t_b: np.ndarray
    feasible: np.ndarray
    recovered: np.ndarray
    true_errors: np.ndarray
    biased_risks: np.ndarray
    held_out_errors: np.ndarray
    recovery_rate: float = field(init=False)
    mean_true_error: float = field(init=False)
    std_true_error: float = field(init=False)
    n_infeasible: int = field(init=False)

    def __post_init__(self):
        self.n_infeasible = int((~self.feasible).sum())
        self.recovery_rate = float(self.recovered.mean())
        kept = self.true_errors[self.feasible]
        self.mean_true_error = float(np.mean(kept)) if kept.size else float("nan")
        self.std_true_error = (
            float(np.std(kept, ddof=1)) if kept.size >= 2 else 0.0
        )


def _thread_count() -> int:
    raw = os.environ.get(_THREADS_ENV, "").strip()
    if not raw:
        return 1
    try:
        return max(1, int(raw))
    except ValueError:
        raise RangeError(f"{_THREADS_ENV}={raw!r} is not an integer") from None


def _group_curves(data: Dataset, group: int, grid: np.ndarray):
    """Weighted error and rate curves of 'predict positive iff x >= t'.

    Returns (err, tpr, fpr, rate) arrays over the grid; rates are NaN where
    the group lacks the corresponding apparent class.
    """
    mask = data.group == group
    x = data.x[mask]
    label = data.label[mask]
    w = data.weight[mask]

    def tails(selector: np.ndarray) -> tuple[float, np.ndarray]:
        xs = x[selector]
        ws = w[selector]
        order = np.argsort(xs, kind="stable")
        xs = xs[order]
        cum = np.concatenate(([0.0], np.cumsum(ws[order])))
        total = cum[-1]
        below = cum[np.searchsorted(xs, grid, side="left")]
        return float(total), total - below

    pos_total, pos_tail = tails(label == 1)
    neg_total, neg_tail = tails(label == 0)
    err = (pos_total - pos_tail) + neg_tail
    with np.errstate(invalid="ignore", divide="ignore"):
        tpr = pos_tail / pos_total if pos_total > 0.0 else np.full_like(grid, np.nan)
        fpr = neg_tail / neg_total if neg_total > 0.0 else np.full_like(grid, np.nan)
        both = pos_total + neg_total
        rate = (
            (pos_tail + neg_tail) / both
            if both > 0.0
            else np.full_like(grid, np.nan)
        )
    return err, tpr, fpr, rate


def _feasible_mask(constraint: ConstraintKind, curves_a, curves_b) -> np.ndarray:
    _, tpr_a, fpr_a, rate_a = curves_a
    _, tpr_b, fpr_b, rate_b = curves_b
    tol = constraint.tolerance
    with np.errstate(invalid="ignore"):
        if constraint.criterion is Criterion.EQUAL_OPPORTUNITY:
            return np.abs(tpr_a[:, None] - tpr_b[None, :]) <= tol
        if constraint.criterion is Criterion.DEMOGRAPHIC_PARITY:
            return np.abs(rate_a[:, None] - rate_b[None, :]) <= tol
        tpr_ok = np.abs(tpr_a[:, None] - tpr_b[None, :]) <= tol
        fpr_ok = np.abs(fpr_a[:, None] - fpr_b[None, :]) <= tol
        return tpr_ok & fpr_ok


def _reweight_for(intervention: Intervention, biased: Dataset) -> Dataset:
    if intervention.kind is InterventionKind.REWEIGHT_UNDERREP:
        beta_hat = min(max(estimate_beta(biased), 1e-12), 1.0)
        return reweight_underrep(biased, beta_hat)
    if intervention.kind is InterventionKind.REWEIGHT_LABELBIAS:
        nu_hat = estimate_nu(biased)
        mask = biased.group == GROUP_A
        w = biased.weight[mask]
        if w.sum() <= 0.0:
            raise InsufficientData("no group A rows to estimate the base rate")
        p_a1 = float(np.sum(w * biased.label[mask]) / np.sum(w))
        return reweight_labelbias(biased, labelbias_z(p_a1, nu_hat))
    return biased


def _one_rep(
    config: ExperimentConfig,
    grid: np.ndarray,
    sample_seed: int,
    bias_seed: int,
    held_out_seed: int,
):
    model = config.model
    data = sample_true(model, config.n_train, seed=sample_seed)
    biased = apply_bias(data, config.bias, seed=bias_seed)
    nan = float("nan")
    try:
        working = _reweight_for(config.intervention, biased)
    except (InsufficientData, DegenerateDenominator, RangeError):
        return nan, nan, False, False, nan, nan, nan

    curves_a = _group_curves(working, GROUP_A, grid)
    curves_b = _group_curves(working, GROUP_B, grid)
    total_weight = float(np.sum(working.weight))
    if total_weight <= 0.0:
        return nan, nan, False, False, nan, nan, nan
    objective = (curves_a[0][:, None] + curves_b[0][None, :]) / total_weight

    if config.intervention.kind is InterventionKind.CONSTRAINT:
        mask = _feasible_mask(config.intervention.constraint, curves_a, curves_b)
        if not mask.any():
            return nan, nan, False, False, nan, nan, nan
        objective = np.where(mask, objective, np.inf)

    flat = int(np.argmin(objective))
    i, j = divmod(flat, grid.size)
    t_a, t_b = float(grid[i]), float(grid[j])
    biased_risk = float(objective[i, j])

    deviations = thresholds_to_deviations(t_a, t_b, model)
    true_error = analytic_true_error(deviations, model)
    recovered = (
        abs(t_a - model.theta_a) < config.recovery_tol
        and abs(t_b - model.theta_b) < config.recovery_tol
    )
    held_out = nan
    if config.held_out_n > 0:
        fresh = sample_true(model, config.held_out_n, seed=held_out_seed)
        yhat = (
            np.where(fresh.group == GROUP_A, fresh.x >= t_a, fresh.x >= t_b)
        ).astype(np.uint8)
        held_out = float(np.mean(yhat != fresh.label))
    return t_a, t_b, True, recovered, true_error, biased_risk, held_out


def run_experiment(config: ExperimentConfig) -> ExperimentResult:
    """Run all reps; deterministic given the config seed, independent of the
    thread count (reps use counter-derived seeds and land by index)."""
    validate_config(config)
    n = config.n_reps
    grid = np.linspace(0.0, 1.0, config.threshold_grid)
    seeds = np.random.SeedSequence(config.seed).generate_state(3 * n, dtype=np.uint64)

    t_a = np.full(n, np.nan)
    t_b = np.full(n, np.nan)
    feasible = np.zeros(n, dtype=bool)
    recovered = np.zeros(n, dtype=bool)
    true_errors = np.full(n, np.nan)
    biased_risks = np.full(n, np.nan)
    held_out = np.full(n, np.nan)

    def run(k: int) -> None:
        out = _one_rep(
            config,
            grid,
            int(seeds[3 * k]),
            int(seeds[3 * k + 1]),
            int(seeds[3 * k + 2]),
        )
        t_a[k], t_b[k], feasible[k], recovered[k] = out[:4]
        true_errors[k], biased_risks[k], held_out[k] = out[4:]

    threads = _thread_count()
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            list(pool.map(run, range(n)))
    else:
        for k in range(n):
            run(k)

    return ExperimentResult(
        config=config,
        t_a=t_a,
        t_b=t_b,
        feasible=feasible,
        recovered=recovered,
        true_errors=true_errors,
        biased_risks=biased_risks,
        held_out_errors=held_out,
    )


def classify_thresholds(t_a: float, t_b: float, model: TrueModel) -> str:
    """Nearest canonical pair: the reference thresholds, all-negative (1,1),
    or all-positive (0,0)."""
    candidates = (
        (BAYES, model.theta_a, model.theta_b),
        (ALL_NEGATIVE, 1.0, 1.0),
        (ALL_POSITIVE, 0.0, 0.0),
    )
    best = min(candidates, key=lambda c: (t_a - c[1]) ** 2 + (t_b - c[2]) ** 2)
    return best[0]


def _float_cell(value: float) -> str:
    return "" if np.isnan(value) else repr(float(value))


def result_to_csv(result: ExperimentResult) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(
        ["rep", "t_a", "t_b", "feasible", "recovered", "true_error",
         "biased_risk", "held_out_error"]
    )
    for k in range(result.config.n_reps):
        writer.writerow([
            k,
            _float_cell(result.t_a[k]),
            _float_cell(result.t_b[k]),
            int(result.feasible[k]),
            int(result.recovered[k]),
            _float_cell(result.true_errors[k]),
            _float_cell(result.biased_risks[k]),
            _float_cell(result.held_out_errors[k]),
        ])
    return buf.getvalue()


def _json_float(value: float):
    return None if np.isnan(value) else float(value)


def result_to_dict(result: ExperimentResult) -> dict:
    config = result.config
    intervention = {"kind": config.intervention.kind.value}
    if config.intervention.constraint is not None:
        intervention["criterion"] = config.intervention.constraint.criterion.value
        intervention["tolerance"] = config.intervention.constraint.tolerance
    return {
        "config": {
            "model": {
                "r": config.model.r,
                "p": config.model.p,
                "eta": config.model.eta,
                "theta_a": config.model.theta_a,
                "theta_b": config.model.theta_b,
            },
            "bias": {
                "beta_pos": config.bias.beta_pos,
                "beta_neg": config.bias.beta_neg,
                "nu": config.bias.nu,
            },
            "intervention": intervention,
            "n_train": config.n_train,
            "n_reps": config.n_reps,
            "threshold_grid": config.threshold_grid,
            "seed": config.seed,
            "recovery_tol": config.recovery_tol,
            "held_out_n": config.held_out_n,
        },
        "reps": [
            {
                "t_a": _json_float(result.t_a[k]),
                "t_b": _json_float(result.t_b[k]),
                "feasible": bool(result.feasible[k]),
                "recovered": bool(result.recovered[k]),
                "true_error": _json_float(result.true_errors[k]),
                "biased_risk": _json_float(result.biased_risks[k]),
                "held_out_error": _json_float(result.held_out_errors[k]),
            }
            for k in range(config.n_reps)
        ],
        "recovery_rate": result.recovery_rate,
        "mean_true_error": _json_float(result.mean_true_error),
        "std_true_error": result.std_true_error,
        "n_infeasible": result.n_infeasible,
    }


# --- intervention comparison table -----------------------------------------

_UNDERREP = "underrepresentation"
_LABELING = "labeling"
_BOTH = "both"

_ROW_NONE = "unconstrained"
_ROW_EO = "equal_opportunity"
_ROW_EODDS = "equalized_odds"
_ROW_RW = "reweighting"

TABLE_ROWS = (_ROW_NONE, _ROW_EO, _ROW_EODDS, _ROW_RW)
TABLE_COLUMNS = (_UNDERREP, _LABELING, _BOTH)


@dataclass(frozen=True)
class TableCell:
    row: str
    column: str
    config: ExperimentConfig


@dataclass
class CellOutcome:
    row: str
    column: str
    analytic: str  # "yes" | "no"
    analytic_margin: float
    analytic_detail: str
    empirical_rate: float | None
    empirical: str | None
    agree: bool | None


@dataclass
class TableResult:
    cells: list[CellOutcome]
    recovery_threshold: float
    agreement_margin: float

    def disagreements(self) -> list[CellOutcome]:
        return [
            c
            for c in self.cells
            if c.empirical is not None
            and c.analytic_margin > self.agreement_margin
            and c.analytic != c.empirical
        ]


def _population_odds(model: TrueModel, bias: BiasParams) -> tuple[float, float]:
    masses = region_masses(model, bias)
    q_a = (masses.r1 + masses.r3) / masses.group_a_total()
    q_b = (masses.r5 + masses.r7) / masses.group_b_total()
    return q_a, q_b


def analytic_prediction(config: ExperimentConfig) -> tuple[bool, float, str]:
    """Large-sample verdict for a cell: does this intervention recover?

    Returns (recovers, margin, detail); the margin is the smallest absolute
    decisive quantity, so verdicts with margin above the table's agreement
    threshold are enforced against the Monte Carlo column.
    """
    model, bias = config.model, config.bias
    masses = region_masses(model, bias)
    kind = config.intervention.kind

    def vote_margins(w: float) -> tuple[float, float]:
        return w * masses.r5 - masses.r6, masses.r8 - w * masses.r7

    if kind is InterventionKind.NONE:
        m1, m2 = vote_margins(1.0)
        m_a = min(masses.r1 - masses.r2, masses.r4 - masses.r3)
        recovers = m1 > 0.0 and m2 > 0.0 and m_a > 0.0
        margin = min(abs(m1), abs(m2), abs(m_a))
        detail = _vote_detail(m1, m2)
        return recovers, margin, detail

    if kind is InterventionKind.CONSTRAINT:
        report = check_conditions(model, bias)
        margin = min(
            model.p * abs(report.cond_neg),
            (1.0 - model.p) * abs(report.cond_pos) if model.p < 1.0 else np.inf,
        )
        detail = (
            "both margins positive"
            if report.recovers
            else f"fails toward {report.failing_extreme.value}"
        )
        criterion = config.intervention.constraint.criterion
        if criterion is Criterion.EQUAL_OPPORTUNITY:
            return report.recovers, margin, detail
        if criterion is Criterion.EQUALIZED_ODDS:
            if bias.nu == 0.0:
                return report.recovers, margin, detail + " (matched false positive rates)"
            gap = _matched_fpr_gap(masses, model.p)
            return False, abs(gap), f"false positive rate gap {gap:.4g} blocks the reference pair"
        raise RangeError(
            f"no analytic prediction for criterion {criterion.value!r}"
        )

    q_a, q_b = _population_odds(model, bias)
    if not (0.0 < q_a < 1.0 and 0.0 < q_b < 1.0):
        raise DegenerateDenominator(
            f"apparent positive fractions ({q_a!r}, {q_b!r}) leave the "
            "reweighting estimate undefined"
        )
    if kind is InterventionKind.REWEIGHT_UNDERREP:
        beta_pop = (q_b / (1.0 - q_b)) / (q_a / (1.0 - q_a))
        w = 1.0 / min(beta_pop, 1.0)
    else:
        nu_pop = max(0.0, 1.0 - q_b / q_a)
        w = labelbias_z(q_a, nu_pop)
    m1, m2 = vote_margins(w)
    recovers = m1 > 0.0 and m2 > 0.0
    return recovers, min(abs(m1), abs(m2)), _vote_detail(m1, m2)


def _vote_detail(m1: float, m2: float) -> str:
    if m1 > 0.0 and m2 > 0.0:
        return "group B regions keep their majority apparent label"
    if m1 <= 0.0 and m2 <= 0.0:
        return "both group B regions flip"
    if m1 <= 0.0:
        return "collapses toward all_negative on group B"
    return "collapses toward all_positive on group B"


def _matched_fpr_gap(masses, p: float) -> float:
    fpr_a = masses.r2 / (masses.r2 + masses.r4)
    fpr_b = masses.r6 / (masses.r6 + masses.r8)
    return fpr_a - fpr_b


def default_table_cells(
    n_train: int = 100_000, n_reps: int = 20, seed: int = 20240
) -> list[TableCell]:
    """Twelve cells: four interventions crossed with three corruption modes.

    The reweighting row uses the retention-rate correction in the pure
    under-representation column and the flip-rate correction elsewhere; the
    parameters put every cell's analytic margin well above the agreement
    threshold, with the expected verdict pattern
    unconstrained No/No/No, equal opportunity Yes/Yes/Yes,
    equalized odds Yes/No/No, reweighting Yes/Yes/No.
    """
    tol = empirical_tolerance(n_train)
    columns = {
        _UNDERREP: (
            TrueModel(r=1.0 / 3.0, p=0.5, eta=0.25),
            BiasParams(beta_pos=0.2, beta_neg=1.0, nu=0.0),
            Intervention.reweight_underrep(),
        ),
        _LABELING: (
            TrueModel(r=1.0 / 3.0, p=0.5, eta=0.1),
            BiasParams(beta_pos=1.0, beta_neg=1.0, nu=0.6),
            Intervention.reweight_labelbias(),
        ),
        _BOTH: (
            TrueModel(r=1.0 / 3.0, p=0.25, eta=0.0),
            BiasParams(beta_pos=0.95, beta_neg=1.0 / 3.0, nu=0.6),
            Intervention.reweight_labelbias(),
        ),
    }
    rows = {
        _ROW_NONE: lambda _: Intervention.none(),
        _ROW_EO: lambda _: Intervention.constrained(
            ConstraintKind(Criterion.EQUAL_OPPORTUNITY, tol)
        ),
        _ROW_EODDS: lambda _: Intervention.constrained(
            ConstraintKind(Criterion.EQUALIZED_ODDS, tol)
        ),
        _ROW_RW: lambda reweight: reweight,
    }
    cells = []
    for i, row in enumerate(TABLE_ROWS):
        for j, column in enumerate(TABLE_COLUMNS):
            model, bias, reweight = columns[column]
            cells.append(
                TableCell(
                    row=row,
                    column=column,
                    config=ExperimentConfig(
                        model=model,
                        bias=bias,
                        intervention=rows[row](reweight),
                        n_train=n_train,
                        n_reps=n_reps,
                        seed=seed + 17 * i + j,
                    ),
                )
            )
    return cells


def intervention_table(
    cells: list[TableCell],
    recovery_threshold: float = 0.9,
    agreement_margin: float = 1e-3,
    analytic_only: bool = False,
) -> TableResult:
    """Yes/No recovery matrix, analytic next to Monte Carlo.

    Cells whose analytic margin exceeds ``agreement_margin`` must agree; the
    ``disagreements`` accessor lists violations (the command line front end
    turns a non-empty list into a failing exit)."""
    outcomes = []
    for cell in cells:
        recovers, margin, detail = analytic_prediction(cell.config)
        rate = None
        empirical = None
        agree = None
        if not analytic_only:
            rate = run_experiment(cell.config).recovery_rate
            empirical = "yes" if rate >= recovery_threshold else "no"
            agree = empirical == ("yes" if recovers else "no")
        outcomes.append(
            CellOutcome(
                row=cell.row,
                column=cell.column,
                analytic="yes" if recovers else "no",
                analytic_margin=margin,
                analytic_detail=detail,
                empirical_rate=rate,
                empirical=empirical,
                agree=agree,
            )
        )
    return TableResult(outcomes, recovery_threshold, agreement_margin)


def table_to_csv(table: TableResult) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(
        ["intervention", "bias_model", "analytic", "analytic_margin",
         "analytic_detail", "empirical_rate", "empirical", "agree"]
    )
    for c in table.cells:
        writer.writerow([
            c.row,
            c.column,
            c.analytic,
            repr(c.analytic_margin),
            c.analytic_detail,
            "" if c.empirical_rate is None else repr(c.empirical_rate),
            "" if c.empirical is None else c.empirical,
            "" if c.agree is None else str(c.agree).lower(),
        ])
    return buf.getvalue()


def table_to_markdown(table: TableResult) -> str:
    columns = []
    for c in table.cells:
        if c.column not in columns:
            columns.append(c.column)
    rows = []
    for c in table.cells:
        if c.row not in rows:
            rows.append(c.row)
    by_key = {(c.row, c.column): c for c in table.cells}
    lines = ["| intervention | " + " | ".join(columns) + " |"]
    lines.append("|" + " --- |" * (len(columns) + 1))
    for row in rows:
        parts = [row]
        for column in columns:
            cell = by_key.get((row, column))
            if cell is None:
                parts.append("")
            elif cell.empirical is None:
                parts.append(cell.analytic.capitalize())
            else:
                parts.append(
                    f"{cell.analytic.capitalize()} / {cell.empirical.capitalize()}"
                )
        lines.append("| " + " | ".join(parts) + " |")
    return "\n".join(lines) + "\n"
