use melnikov_core::io::{fixtures, SystemFile};
use melnikov_core::pipeline::{branch_solution, AnySolution, RunConfig};
use melnikov_core::scalar::{Exact, Scalar};
use melnikov_core::trees::{compare_with_solution, compare_with_table, AllowedBranch, BoundsReport, TreeComparison};

/// `ω = A² + A − 1`: same frequency at `A0 = 1`, nonzero `ω''`.
fn curved(mut f: SystemFile) -> SystemFile {
    f.omega = vec!["-1".into(), "1".into(), "1".into()];
    f
}

fn allowed(f: &SystemFile, id: &str, kmax: usize) -> (usize, Vec<TreeComparison>, BoundsReport) {
    let sys = f.to_system().unwrap();
    let mut o = f.options.clone();
    o.kmax = Some(kmax);
    let (_, _, sol) = branch_solution(&sys, &RunConfig::new(o), id).unwrap();
    let AnySolution::Exact(s) = sol else { panic!("{id} is not exact") };
    let k = AllowedBranch::from_solution(&s).cap().min(s.kmax);
    let (rows, bounds) = compare_with_solution(&sys, &s, k).unwrap();
    (k, rows, bounds)
}

fn assert_all_match(rows: &[TreeComparison]) {
    assert!(!rows.is_empty());
    for r in rows {
        assert!(r.matches, "{r:?}");
    }
}

#[test]
fn table_identity_with_curved_frequency() {
    let sys = curved(fixtures::forced_pendulum()).to_system().unwrap();
    let (rows, bounds) = compare_with_table(&sys, &Exact::one(), 3, 2).unwrap();
    assert_all_match(&rows);
    // the order-and-leaf line bound still holds with ω-nodes
    assert_eq!(bounds.violations, 0, "{:?}", bounds.first_violation);
}

#[test]
fn allowed_trees_with_curved_frequency() {
    // ω = (A + A²)/2
    let mut f = fixtures::mixed();
    f.omega = vec!["0".into(), "1/2".into(), "1/2".into()];
    let (k, rows, bounds) = allowed(&f, "0:+:0", 6);
    assert!(k >= 3);
    assert_all_match(&rows);
    // ω-nodes add lines without adding order, so the line bound is exceeded
    // by some trees while the sums still agree
    assert!(bounds.violations > 0);
    assert!(bounds.min_slack.unwrap() >= -1.0 - 1e-9);
    assert!(bounds.first_violation.is_some());
}

#[test]
fn allowed_trees_with_flat_frequency_respect_the_bound() {
    for id in ["0:+:0", "0:-:0"] {
        let (_, rows, bounds) = allowed(&fixtures::forced_pendulum(), id, 4);
        assert_all_match(&rows);
        assert_eq!(bounds.violations, 0, "{id}: {:?}", bounds.first_violation);
    }
}

#[test]
fn allowed_trees_on_a_cascade() {
    let f = fixtures::cascade();
    let (k, rows, bounds) = allowed(&f, "0:+:0", 4);
    assert!(k >= 2);
    assert_all_match(&rows);
    assert_eq!(bounds.violations, 0, "{:?}", bounds.first_violation);
}
