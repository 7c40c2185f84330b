mod common;

use melnikov_core::io::{fixtures, ScalarMode, SystemFile};
use melnikov_core::pipeline::{run_pipeline, BranchReport, ResultDocument, RunConfig};
use melnikov_core::puiseux::BranchStatus;
use melnikov_core::scalar::{Number, Scalar};
use proptest::prelude::*;

fn run(file: &SystemFile, kmax: usize, mode: ScalarMode) -> Option<ResultDocument> {
    let sys = file.to_system().ok()?;
    let mut o = file.options.clone();
    o.kmax = Some(kmax);
    o.scalar_mode = mode;
    let mut cfg = RunConfig::new(o);
    cfg.residual = false;
    run_pipeline(&sys, &cfg).ok()
}

fn solved(doc: &ResultDocument) -> impl Iterator<Item = &BranchReport> {
    doc.branches().filter(|b| b.status == BranchStatus::SimpleRootFound && b.eta.is_some())
}

fn check_branch(b: &BranchReport) -> Result<(), TestCaseError> {
    let eta = b.eta.as_ref().unwrap();
    let d = b.diagnostics.as_ref().unwrap();
    for c in &d.oracle_checks {
        prop_assert!(c.passed, "{}: {} ({})", b.id, c.name, c.detail);
    }
    prop_assert!(d.periodicity_max < 1e-20, "{}: periodicity {}", b.id, d.periodicity_max);
    if eta.c.is_exact() {
        prop_assert_eq!(d.composition_defect, 0.0);
    }
    // below the last Puiseux exponent β0 is exactly the chain of leading terms
    let h_last = b.h_list.last().copied().unwrap_or(0) as usize;
    for m in 0..=h_last.min(eta.beta0.len() - 1) {
        let lead = b.h_list.iter().position(|&h| h as usize == m).map(|i| &b.steps[i].c);
        let got = &eta.beta0[m];
        match lead {
            Some(c) => prop_assert!(got.to_approx().sub(&c.to_approx()).abs_f64() < 1e-40 * c.to_approx().abs_f64().max(1.0), "{}: β0[{m}]", b.id),
            None => prop_assert!(got.re_f64() == 0.0 && got.im_f64() == 0.0, "{}: β0[{m}] = {:?}", b.id, got),
        }
    }
    Ok(())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn random_branches_pass_their_checks(file in common::arb_system()) {
        let Some(doc) = run(&file, 3, ScalarMode::Auto) else { return Ok(()) };
        for b in solved(&doc) {
            check_branch(b)?;
        }
    }

    #[test]
    fn numeric_mode_agrees_with_exact(file in common::arb_system()) {
        let Some(exact) = run(&file, 3, ScalarMode::Auto) else { return Ok(()) };
        let Some(numeric) = run(&file, 3, ScalarMode::Numeric) else { return Ok(()) };
        let a: Vec<_> = solved(&exact).collect();
        let b: Vec<_> = solved(&numeric).collect();
        prop_assert_eq!(a.len(), b.len());
        for (x, y) in a.iter().zip(&b) {
            prop_assert_eq!(&x.id, &y.id);
            let (ex, ey) = (x.eta.as_ref().unwrap(), y.eta.as_ref().unwrap());
            for (u, v) in ex.beta0.iter().zip(&ey.beta0) {
                let gap = u.to_approx().sub(&v.to_approx()).abs_f64();
                prop_assert!(gap < 1e-40 * u.to_approx().abs_f64().max(1.0), "{}: {:?} vs {:?}", x.id, u, v);
            }
        }
    }
}

#[test]
fn fixture_branches_pass_their_checks() {
    for f in [fixtures::pendulum(), fixtures::mixed(), fixtures::cascade(), fixtures::forced_pendulum()] {
        let doc = run(&f, 4, ScalarMode::Auto).unwrap();
        assert!(solved(&doc).count() > 0, "{:?}", f.name);
        for b in solved(&doc) {
            check_branch(b).unwrap();
        }
        let exact: Vec<Number> = solved(&doc).flat_map(|b| b.eta.as_ref().unwrap().beta0.clone()).collect();
        assert!(exact.iter().all(Number::is_exact), "{:?} fell back to numeric", f.name);
    }
}
