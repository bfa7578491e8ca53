//! Acceptance suite: one test per checklist item, each printing a pass/fail
//! line. Every tolerance is pinned inside gapkit::verify. The randomized
//! suites run with the fixed seed 7.

use gapkit::verify::{
    criterion_01_free_problem, criterion_02_limit_constant, criterion_03_endpoint_value,
    criterion_04_reduced_minimum, criterion_05_monotone_convergence, criterion_06_minimizer_bounds,
    criterion_07_expansion, criterion_08_two_crossings, criterion_09_fh_consistency,
    criterion_10_step_vs_oracle, criterion_11_convex_class, criterion_12_grid_confirmation,
    criterion_13_truncation, CriterionOutcome,
};

const SEED: u64 = 7;

fn report(outcome: CriterionOutcome) {
    println!(
        "criterion {:02} [{}]: {} {}",
        outcome.id,
        outcome.name,
        if outcome.passed { "PASS" } else { "FAIL" },
        outcome.detail
    );
    assert!(outcome.passed, "criterion {:02} failed: {}", outcome.id, outcome.detail);
}

#[test]
fn criterion_01() {
    report(criterion_01_free_problem());
}

#[test]
fn criterion_02() {
    report(criterion_02_limit_constant());
}

#[test]
fn criterion_03() {
    report(criterion_03_endpoint_value());
}

#[test]
fn criterion_04() {
    report(criterion_04_reduced_minimum());
}

#[test]
fn criterion_05() {
    report(criterion_05_monotone_convergence());
}

#[test]
fn criterion_06() {
    report(criterion_06_minimizer_bounds());
}

#[test]
fn criterion_07() {
    report(criterion_07_expansion());
}

#[test]
fn criterion_08() {
    report(criterion_08_two_crossings(SEED));
}

#[test]
fn criterion_09() {
    report(criterion_09_fh_consistency(SEED));
}

#[test]
fn criterion_10() {
    report(criterion_10_step_vs_oracle(SEED));
}

#[test]
fn criterion_11() {
    report(criterion_11_convex_class(SEED));
}

#[test]
fn criterion_12() {
    report(criterion_12_grid_confirmation(SEED));
}

#[test]
fn criterion_13() {
    report(criterion_13_truncation());
}
