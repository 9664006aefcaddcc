"""Self-contained verification suites behind the ``verify`` command.

Each suite stress-tests one analytic claim with exact values or seeded
randomized trials and reports counterexample parameters on failure, so a
wrong sign anywhere in the condition algebra surfaces as a failing suite
rather than a silently wrong figure.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import bias as bias_mod
from . import distribution as dist_mod
from . import fairness as fair_mod
from . import recovery as rec_mod
from . import solver as solver_mod
from .bias import BiasParams
from .distribution import DeviationParams, TrueModel
from .errors import RangeError
from .fairness import ConstraintKind, Criterion

_DEFAULT_SEED = 20240819


@dataclass
class SuiteResult:
    name: str
    passed: bool
    checks: int
    failures: list[str]

    def summary(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        line = f"{self.name}: {status} ({self.checks} checks"
        if self.failures:
            line += f", {len(self.failures)} failures"
        return line + ")"


def _random_setup(rng) -> tuple[TrueModel, BiasParams]:
    model = TrueModel(
        r=rng.uniform(0.005, 0.995),
        p=rng.uniform(0.01, 0.99),
        eta=rng.uniform(0.0, 0.499),
    )
    bias = BiasParams(
        beta_pos=rng.uniform(1e-6, 1.0),
        beta_neg=rng.uniform(1e-6, 1.0),
        nu=rng.uniform(0.0, 0.999),
    )
    return model, bias


def _suite_region(trials: int | None, seed: int) -> SuiteResult:
    """200 x 200 sweep of the pure under-representation recovery boundary.

    The sweep itself cross-validates every clear cell against the exact
    solver; on top of that, re-derive the specialized margin
    (1-r)(1-2 eta) + r((1-eta) beta - eta) per cell and require the verdict
    to be its sign wherever it clears 1e-9.
    """
    steps = 200
    model = TrueModel(r=1.0 / 3.0, p=0.5, eta=0.25)
    bias = BiasParams(beta_pos=1.0, beta_neg=1.0, nu=0.0)
    failures: list[str] = []
    try:
        sweep = rec_mod.recovery_region(
            model,
            bias,
            rec_mod.AxisSpec("eta", 0.0, 0.499, steps),
            rec_mod.AxisSpec("beta_pos", 0.005, 1.0, steps),
        )
    except RuntimeError as exc:
        return SuiteResult("region", False, 0, [str(exc)])
    r = model.r
    checks = 0
    for i, eta in enumerate(sweep.values1):
        for j, beta in enumerate(sweep.values2):
            margin = (1.0 - r) * (1.0 - 2.0 * eta) + r * ((1.0 - eta) * beta - eta)
            checks += 1
            if abs(margin - sweep.cond_neg[i, j]) > 1e-15:
                failures.append(
                    f"margin formula drift at eta={eta!r}, beta={beta!r}"
                )
                continue
            if abs(margin) <= 1e-9:
                continue
            recovered = sweep.verdicts[i, j] == rec_mod.Verdict.RECOVERS.value
            if recovered != (margin > 0.0):
                failures.append(
                    f"verdict {sweep.verdicts[i, j]} against margin {margin!r} "
                    f"at eta={eta!r}, beta={beta!r}"
                )
    return SuiteResult("region", not failures, checks, failures[:5])


def _suite_tightness(trials: int | None, seed: int) -> SuiteResult:
    """Random parameter tuples with clear margins: the exact solver must pick
    the reference pair iff both margins are positive, and otherwise the
    extreme named by the failing margin."""
    n = 10_000 if trials is None else trials
    rng = np.random.default_rng(seed)
    failures: list[str] = []
    checks = 0
    while checks < n:
        model, bias = _random_setup(rng)
        report = rec_mod.check_conditions(model, bias)
        if min(abs(report.cond_neg), abs(report.cond_pos)) <= 1e-6:
            continue
        checks += 1
        solve = solver_mod.exact_constrained_erm(model, bias)
        if report.cond_neg > 0.0 and report.cond_pos > 0.0:
            want = solver_mod.BAYES
        elif report.cond_neg < 0.0:
            want = solver_mod.ALL_NEGATIVE
        else:
            want = solver_mod.ALL_POSITIVE
        if solve.chosen_label != want:
            failures.append(
                f"expected {want}, solver chose {solve.chosen_label} at "
                f"model={model}, bias={bias}"
            )
            if len(failures) >= 5:
                break
    return SuiteResult("tightness", not failures, checks, failures)


def _suite_oracle(trials: int | None, seed: int) -> SuiteResult:
    """Grid solver at resolution 200 agrees with the exact solver whenever
    the winning margin among the canonical candidates clears 1e-6."""
    n = 1_000 if trials is None else trials
    rng = np.random.default_rng(seed)
    kind = ConstraintKind(Criterion.EQUAL_OPPORTUNITY)
    failures: list[str] = []
    checks = 0
    attempts = 0
    while checks < n and attempts < 20 * n:
        attempts += 1
        model, bias = _random_setup(rng)
        exact = solver_mod.exact_constrained_erm(model, bias)
        errs = sorted(c.biased_error for c in exact.candidates)
        if errs[1] - errs[0] <= 1e-6:
            continue
        checks += 1
        grid = solver_mod.grid_constrained_erm(kind, model, bias, resolution=200)
        if grid.chosen_label != exact.chosen_label:
            failures.append(
                f"grid chose {grid.chosen_label}, exact chose "
                f"{exact.chosen_label} at model={model}, bias={bias}"
            )
            if len(failures) >= 5:
                break
    return SuiteResult("oracle", not failures, checks, failures)


def _suite_eo_invariance(trials: int | None, seed: int) -> SuiteResult:
    """The apparent true positive rate is bias-invariant, so matched
    deviation pairs have an exactly zero equal-opportunity gap."""
    n = 10_000 if trials is None else trials
    rng = np.random.default_rng(seed)
    kind = ConstraintKind(Criterion.EQUAL_OPPORTUNITY)
    failures: list[str] = []
    checks = 0
    for _ in range(n):
        model, bias = _random_setup(rng)
        p1 = rng.uniform(0.0, model.p)
        p2 = rng.uniform(0.0, 1.0 - model.p)
        for params in (
            DeviationParams.bayes_optimal(),
            DeviationParams(p1, p2, p1, p2),
        ):
            gap = fair_mod.constraint_gap(kind, params, model, bias)
            checks += 1
            if abs(gap) >= 1e-12:
                failures.append(f"gap {gap!r} at model={model}, bias={bias}")
        if len(failures) >= 5:
            break
    return SuiteResult("eo-invariance", not failures, checks, failures)


def _suite_shrink(trials: int | None, seed: int) -> SuiteResult:
    """Canonicalization: at most one nonzero deviation per group, constraint
    level preserved exactly, biased error never increased under any bias."""
    n = 10_000 if trials is None else trials
    rng = np.random.default_rng(seed)
    failures: list[str] = []
    checks = 0
    for _ in range(n):
        model, _ = _random_setup(rng)
        params = DeviationParams(
            rng.uniform(0.0, model.p),
            rng.uniform(0.0, 1.0 - model.p),
            rng.uniform(0.0, model.p),
            rng.uniform(0.0, 1.0 - model.p),
        )
        shrunk = solver_mod.shrink(params, model)
        checks += 1
        eta = model.eta
        ok = (shrunk.p1a == 0.0 or shrunk.p2a == 0.0) and (
            shrunk.p1b == 0.0 or shrunk.p2b == 0.0
        )
        level = fair_mod.constraint_level
        drift = max(
            abs(level(shrunk.p1a, shrunk.p2a, eta) - level(params.p1a, params.p2a, eta)),
            abs(level(shrunk.p1b, shrunk.p2b, eta) - level(params.p1b, params.p2b, eta)),
        )
        if not ok or drift > 1e-12:
            failures.append(
                f"shrink broke shape or level (drift {drift!r}) at "
                f"params={params}, model={model}"
            )
            continue
        for _ in range(10):
            _, mass_bias = _random_setup(rng)
            masses = bias_mod.region_masses(model, mass_bias)
            before = solver_mod.biased_error(params, masses, model)
            after = solver_mod.biased_error(shrunk, masses, model)
            checks += 1
            if after > before + 1e-12:
                failures.append(
                    f"error rose {before!r} -> {after!r} at params={params}, "
                    f"model={model}, bias={mass_bias}"
                )
                break
        if len(failures) >= 5:
            break
    return SuiteResult("shrink", not failures, checks, failures)


def _suite_dp(trials: int | None, seed: int) -> SuiteResult:
    """Noiseless half-retention: the reference pair's group B positive rate
    is exactly 1/3 against 1/2 for group A, so demographic parity rejects it
    at any tolerance below 1/6."""
    model = TrueModel(r=1.0 / 3.0, p=0.5, eta=0.0)
    bias = BiasParams(beta_pos=0.5, beta_neg=1.0, nu=0.0)
    bayes = DeviationParams.bayes_optimal()
    failures: list[str] = []
    checks = 0

    rate_b = fair_mod.biased_positive_rate(bayes, dist_mod.GROUP_B, model, bias)
    checks += 1
    if rate_b != 1.0 / 3.0:
        failures.append(f"group B rate {rate_b!r} != 1/3")
    kind = ConstraintKind(Criterion.DEMOGRAPHIC_PARITY)
    gap = fair_mod.constraint_gap(kind, bayes, model, bias)
    checks += 1
    if abs(gap - 1.0 / 6.0) > 1e-15:
        failures.append(f"gap {gap!r} != 1/6")
    checks += 1
    if fair_mod.satisfies(ConstraintKind(Criterion.DEMOGRAPHIC_PARITY, 0.16), bayes, model, bias):
        failures.append("reference pair passed below the 1/6 gap")
    checks += 1
    if not fair_mod.satisfies(
        ConstraintKind(Criterion.DEMOGRAPHIC_PARITY, 0.17), bayes, model, bias
    ):
        failures.append("reference pair rejected above the 1/6 gap")
    grid = solver_mod.grid_constrained_erm(
        ConstraintKind(Criterion.DEMOGRAPHIC_PARITY, 0.01), model, bias, resolution=41
    )
    checks += 1
    if grid.chosen_label == solver_mod.BAYES:
        failures.append("grid solver returned the reference pair under parity")
    return SuiteResult("dp", not failures, checks, failures)


def _suite_eqodds(trials: int | None, seed: int) -> SuiteResult:
    """Pure labeling bias at nu = 1/2: the reference pair's false positive
    rates split 0 vs 1/3, so equalized odds rejects it."""
    model = TrueModel(r=1.0 / 3.0, p=0.5, eta=0.0)
    bias = BiasParams(beta_pos=1.0, beta_neg=1.0, nu=0.5)
    bayes = DeviationParams.bayes_optimal()
    failures: list[str] = []
    checks = 0

    fpr_a = fair_mod.biased_fpr(bayes, dist_mod.GROUP_A, model, bias)
    fpr_b = fair_mod.biased_fpr(bayes, dist_mod.GROUP_B, model, bias)
    masses = bias_mod.region_masses(model, bias)
    expected = -masses.r6 / (masses.r6 + masses.r8)
    checks += 1
    if abs((fpr_a - fpr_b) - expected) > 1e-15 or abs(expected + 1.0 / 3.0) > 1e-15:
        failures.append(f"false positive rate gap {fpr_a - fpr_b!r} != -1/3")
    kind = ConstraintKind(Criterion.EQUALIZED_ODDS, 1e-3)
    grid = solver_mod.grid_constrained_erm(kind, model, bias, resolution=60)
    checks += 1
    if grid.chosen_label == solver_mod.BAYES:
        failures.append("grid solver kept the reference pair under equalized odds")
    checks += 1
    bayes_candidate = next(c for c in grid.candidates if c.label == solver_mod.BAYES)
    if bayes_candidate.feasible:
        failures.append("reference pair flagged feasible despite the rate gap")
    return SuiteResult("eqodds", not failures, checks, failures)


def _suite_reweighting(trials: int | None, seed: int) -> SuiteResult:
    """Correction-weight algebra plus two sampled unbiasedness checks."""
    n = 10_000 if trials is None else trials
    rng = np.random.default_rng(seed)
    failures: list[str] = []
    checks = 0

    z = solver_mod.labelbias_z(0.5, 0.5)
    checks += 1
    if z != 3.0:
        failures.append(f"labelbias_z(0.5, 0.5) = {z!r} != 3")

    for _ in range(n):
        eta = rng.uniform(1e-6, 0.499)
        nu = rng.uniform(0.0, 0.999)
        p = rng.uniform(1e-6, 1.0)
        q = p * (1.0 - eta) + (1.0 - p) * eta
        value = solver_mod.labelbias_z(q, nu)
        lower = (eta + (1.0 - eta) * nu) / ((1.0 - eta) * (1.0 - nu))
        upper = (1.0 - eta + eta * nu) / (eta * (1.0 - nu))
        checks += 1
        if not (lower < value < upper):
            failures.append(
                f"weight {value!r} outside ({lower!r}, {upper!r}) at "
                f"eta={eta!r}, nu={nu!r}, p={p!r}"
            )
            if len(failures) >= 5:
                break

    failures += _reweighting_unbiasedness(seed)
    checks += 50
    failures += _reweighting_knife_edge(seed)
    checks += 3
    return SuiteResult("reweighting", not failures, checks, failures[:8])


def _reweighting_unbiasedness(seed: int) -> list[str]:
    model = TrueModel(r=1.0 / 3.0, p=0.5, eta=0.3)
    beta = 0.5
    bias = BiasParams.underrepresentation(beta)
    n = 1_000_000
    data = dist_mod.sample_true(model, n, seed=seed + 1)
    biased = bias_mod.apply_bias(data, bias, seed=seed + 2)
    reweighted = solver_mod.reweight_underrep(biased, beta)
    failures = []
    for t in np.linspace(0.0, 1.0, 50):
        estimate = solver_mod.empirical_weighted_risk(
            reweighted, t, t, denominator=float(n)
        )
        wrong = (
            dist_mod.predict(reweighted.x, reweighted.group, t, t)
            != reweighted.label
        )
        contrib = reweighted.weight * wrong
        var = max(float(np.sum(contrib**2) / n - (np.sum(contrib) / n) ** 2), 0.0)
        se = float(np.sqrt(var / n))
        truth = dist_mod.analytic_true_error(
            dist_mod.thresholds_to_deviations(float(t), float(t), model), model
        )
        if abs(estimate - truth) > 3.0 * se + 1e-9:
            failures.append(
                f"reweighted risk {estimate!r} vs analytic {truth!r} "
                f"(se {se!r}) at t={t!r}"
            )
    return failures


def _reweighting_knife_edge(seed: int) -> list[str]:
    model = TrueModel(r=1.0 / 3.0, p=0.25, eta=0.0)
    bias = BiasParams(beta_pos=1.0, beta_neg=1.0 / 3.0, nu=0.5)
    masses = bias_mod.region_masses(model, bias)
    failures = []

    bayes = DeviationParams.bayes_optimal()
    allneg_b = DeviationParams(0.0, 0.0, model.p, 0.0)
    diff = solver_mod.biased_error(bayes, masses, model) - solver_mod.biased_error(
        allneg_b, masses, model
    )
    if abs(diff) > 1e-12:
        failures.append(f"analytic indifference broken: error gap {diff!r}")

    q_a = (masses.r1 + masses.r3) / masses.group_a_total()
    q_b = (masses.r5 + masses.r7) / masses.group_b_total()
    nu_pop = max(0.0, 1.0 - q_b / q_a)
    if abs(solver_mod.labelbias_z(q_a, nu_pop) - 1.0) > 1e-12:
        failures.append("population flip-rate estimate is not weight one here")

    n = 1_000_000
    data = dist_mod.sample_true(model, n, seed=seed + 3)
    biased = bias_mod.apply_bias(data, bias, seed=seed + 4)
    nu_hat = bias_mod.estimate_nu(biased)
    mask = biased.group == dist_mod.GROUP_A
    p_a1 = float(np.mean(biased.label[mask]))
    reweighted = solver_mod.reweight_labelbias(
        biased, solver_mod.labelbias_z(p_a1, nu_hat)
    )
    theta_a, theta_b = model.theta_a, model.theta_b
    wrong_ref = dist_mod.predict(
        reweighted.x, reweighted.group, theta_a, theta_b
    ) != reweighted.label
    wrong_neg = dist_mod.predict(
        reweighted.x, reweighted.group, theta_a, 1.0
    ) != reweighted.label
    d = reweighted.weight * (wrong_ref.astype(float) - wrong_neg.astype(float))
    total_w = float(np.sum(reweighted.weight))
    gap = float(np.sum(d)) / total_w
    se = float(np.sqrt(max(np.sum(d**2) - np.sum(d) ** 2 / d.size, 0.0))) / total_w
    if abs(gap) > 3.0 * se + 1e-9:
        failures.append(
            f"sampled indifference broken: weighted risk gap {gap!r} (se {se!r})"
        )
    return failures


def _suite_strong_recovery(trials: int | None, seed: int) -> SuiteResult:
    """Four certificates that must pass and one that must fail, each backed
    by the vertex check plus random interior tuples."""
    n = 10_000 if trials is None else trials
    cases = (
        (0.5, 1.0 / 3.0, "underrepresentation", True),
        (0.25, 3.0 / 7.0, "underrepresentation", True),
        (1.0 / 3.0, 0.25, "combined", True),
        (0.25, 1.0 / 3.0, "combined", True),
        (0.5, 0.49, "combined", False),
    )
    failures: list[str] = []
    checks = 0
    for k, (r0, eta0, family, want) in enumerate(cases):
        cert = rec_mod.strong_recovery_certificate(
            r0, eta0, trials=n, seed=seed + k, family=family
        )
        checks += 1
        if cert.passed != want:
            failures.append(
                f"certificate (r0={r0!r}, eta0={eta0!r}, {family}) "
                f"{'passed' if cert.passed else 'failed'} unexpectedly "
                f"(corner_min={cert.corner_min!r})"
            )
            continue
        if not want:
            checks += 1
            ce = cert.counterexample
            if ce is None:
                failures.append("failing certificate produced no counterexample")
                continue
            cn, cp = rec_mod._conditions(
                ce["r"], ce["eta"], ce["beta_pos"], ce["beta_neg"], ce["nu"]
            )
            if min(cn, cp) > 0.0:
                failures.append(f"counterexample {ce!r} does not violate a margin")
    return SuiteResult("strong-recovery", not failures, checks, failures)


_SUITES = {
    "region": _suite_region,
    "tightness": _suite_tightness,
    "oracle": _suite_oracle,
    "eo-invariance": _suite_eo_invariance,
    "shrink": _suite_shrink,
    "dp": _suite_dp,
    "eqodds": _suite_eqodds,
    "reweighting": _suite_reweighting,
    "strong-recovery": _suite_strong_recovery,
}

SUITE_NAMES = tuple(_SUITES)


def run_suite(name: str, trials: int | None = None, seed: int = _DEFAULT_SEED) -> SuiteResult:
    if name not in _SUITES:
        raise RangeError(f"unknown suite {name!r}; choose from {SUITE_NAMES}")
    return _SUITES[name](trials, seed)


def run_all(
    names: tuple[str, ...] | None = None,
    trials: int | None = None,
    seed: int = _DEFAULT_SEED,
) -> list[SuiteResult]:
    return [run_suite(name, trials, seed) for name in (names or SUITE_NAMES)]
