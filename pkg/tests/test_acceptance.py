"""Acceptance suite: one test per shipped guarantee, with timing bounds.

Each test prints a single machine-scannable line
``acceptance criterion NN: PASS/FAIL - detail`` before asserting, so a
plain pytest run doubles as a checklist.
"""

import time

import numpy as np

from biased_erm_lab import (
    BiasParams,
    ConstraintKind,
    Criterion,
    ExperimentConfig,
    Intervention,
    TrueModel,
    empirical_tolerance,
    run_experiment,
    run_suite,
    strong_recovery_certificate,
)
from biased_erm_lab.cli import main as cli_main


def _report(num: int, ok: bool, detail: str) -> None:
    status = "PASS" if ok else "FAIL"
    print(f"acceptance criterion {num:02d}: {status} - {detail}")
    assert ok, f"criterion {num:02d}: {detail}"


def _timed_suite(name: str):
    started = time.perf_counter()
    result = run_suite(name)
    return result, time.perf_counter() - started


def test_criterion_01_region_sweep_matches_solver():
    """200 x 200 pure under-representation sweep: every cell's closed-form
    sign agrees with the exact constrained solver; under 10 seconds."""
    result, elapsed = _timed_suite("region")
    ok = result.passed and elapsed < 10.0
    _report(1, ok, f"{result.checks} checks in {elapsed:.1f}s; {result.summary()}")


def test_criterion_02_condition_tightness():
    """1e4 random parameter tuples with clear margins: solver picks the
    clean rule iff both conditions are positive, otherwise the extreme named
    by the failing condition; under 5 seconds."""
    result, elapsed = _timed_suite("tightness")
    ok = result.passed and elapsed < 5.0
    _report(2, ok, f"{result.checks} tuples in {elapsed:.1f}s; {result.summary()}")


def test_criterion_03_grid_oracle_equivalence():
    """Grid solver at resolution 200 matches the exact solver on 1e3 random
    draws whenever the winning margin clears 1e-6; under 2 minutes."""
    result, elapsed = _timed_suite("oracle")
    ok = result.passed and elapsed < 120.0
    _report(3, ok, f"{result.checks} draws in {elapsed:.1f}s; {result.summary()}")


def test_criterion_04_equal_opportunity_invariance():
    """Matched hypotheses have an exactly zero equal-opportunity gap under
    1e4 random corruptions (analytic, tolerance 1e-12)."""
    result, elapsed = _timed_suite("eo-invariance")
    _report(4, result.passed, f"{result.checks} gaps in {elapsed:.1f}s; {result.summary()}")


def test_criterion_05_shrink_canonicalization():
    """Shrinking leaves at most one nonzero deviation per group, preserves
    the constraint level to 1e-12, and never increases the biased error on
    sampled mass vectors."""
    result, elapsed = _timed_suite("shrink")
    _report(5, result.passed, f"{result.checks} checks in {elapsed:.1f}s; {result.summary()}")


def test_criterion_06_demographic_parity_failure():
    """At p = 1/2, eta = 0, beta_pos = 1/2 the clean rule's group-B positive
    rate is exactly float 1/3, so parity is infeasible below gap 1/6."""
    result, elapsed = _timed_suite("dp")
    _report(6, result.passed, f"{result.checks} checks in {elapsed:.1f}s; {result.summary()}")


def test_criterion_07_equalized_odds_failure():
    """Pure labeling bias at eta = 0 leaves a nonzero false-positive-rate
    gap for the clean rule, and the grid solver finds no feasible point that
    matches it at tolerance 1e-3 for nu = 0.5."""
    result, elapsed = _timed_suite("eqodds")
    _report(7, result.passed, f"{result.checks} checks in {elapsed:.1f}s; {result.summary()}")


def test_criterion_08_reweighting_corrections():
    """Weight formula value, strict sandwich bounds, weighted-risk
    unbiasedness at n = 1e6 within 3 standard errors, and the knife-edge
    indifference case."""
    result, elapsed = _timed_suite("reweighting")
    _report(8, result.passed, f"{result.checks} checks in {elapsed:.1f}s; {result.summary()}")


def test_criterion_09_strong_recovery_certificates():
    """The four safe boxes certify: corner infimum non-negative and 1e4
    random tuples clean, each certificate under 5 seconds."""
    cases = (
        ("underrepresentation", 0.5, 1 / 3),
        ("combined", 1 / 3, 0.25),
        ("combined", 0.25, 1 / 3),
        ("underrepresentation", 0.25, 3 / 7),
    )
    ok = True
    details = []
    for family, r0, eta0 in cases:
        started = time.perf_counter()
        cert = strong_recovery_certificate(r0, eta0, trials=10_000, seed=20240819, family=family)
        elapsed = time.perf_counter() - started
        ok = ok and cert.passed and elapsed < 5.0
        details.append(
            f"({r0:.3g},{eta0:.3g},{family[:5]}): "
            f"{'ok' if cert.passed else 'FAIL'} {elapsed:.2f}s"
        )
    _report(9, ok, "; ".join(details))


def test_criterion_10_end_to_end_finite_sample():
    """Stated collapse configuration (r = 1/3, p = 1/2, eta = 0.2,
    beta_pos = 0.3) at n = 1e5, 50 reps: unconstrained recovery rate must be
    below 0.1 and the equal-opportunity rate at least 0.95 with every
    trained B threshold within 0.02 of the clean one."""
    model = TrueModel(r=1 / 3, p=0.5, eta=0.2)
    bias = BiasParams(beta_pos=0.3, beta_neg=1.0, nu=0.0)
    started = time.perf_counter()
    unconstrained = run_experiment(
        ExperimentConfig(
            model=model,
            bias=bias,
            intervention=Intervention.none(),
            n_train=100_000,
            n_reps=50,
            seed=1010,
        )
    )
    eo = run_experiment(
        ExperimentConfig(
            model=model,
            bias=bias,
            intervention=Intervention.constrained(
                ConstraintKind(Criterion.EQUAL_OPPORTUNITY, empirical_tolerance(100_000))
            ),
            n_train=100_000,
            n_reps=50,
            seed=1011,
        )
    )
    elapsed = time.perf_counter() - started

    eo_threshold_drift = float(np.max(np.abs(eo.t_b - model.theta_b)))
    clause_unconstrained = unconstrained.recovery_rate < 0.1
    clause_eo = eo.recovery_rate >= 0.95 and eo_threshold_drift < 0.02
    ok = clause_unconstrained and clause_eo and elapsed < 120.0
    _report(
        10,
        ok,
        f"unconstrained rate {unconstrained.recovery_rate:.2f} (need < 0.1), "
        f"eo rate {eo.recovery_rate:.2f} (need >= 0.95), "
        f"eo max |t_b - theta| {eo_threshold_drift:.3f} (need < 0.02), "
        f"{elapsed:.1f}s",
    )


def test_criterion_11_verify_command():
    """The verify front end runs the nine suites and exits 0, well inside a
    ten-minute budget."""
    started = time.perf_counter()
    code = cli_main(["verify"])
    elapsed = time.perf_counter() - started
    ok = code == 0 and elapsed < 600.0
    _report(11, ok, f"exit code {code} in {elapsed:.1f}s")
