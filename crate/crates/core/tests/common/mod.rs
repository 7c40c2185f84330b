#![allow(dead_code)]

use melnikov_core::io::{Basis, ResonanceSpec, SystemFile, Term};
use proptest::prelude::*;

pub fn term(basis: Basis, sigma: i64, sigma_prime: i64, apoly: &[i64]) -> Term {
    Term { basis, sigma, sigma_prime, apoly: apoly.iter().map(|c| c.to_string()).collect() }
}

pub fn arb_term() -> impl Strategy<Value = Term> {
    (any::<bool>(), -3i64..=3, -3i64..=3, prop::collection::vec(-4i64..=4, 1..=3)).prop_map(|(s, a, b, c)| {
        term(if s { Basis::Sin } else { Basis::Cos }, a, b, &c)
    })
}

/// `ω = A`, `A0 = 1`, `p = q = 1` with random `F` and `G`.
pub fn arb_system() -> impl Strategy<Value = SystemFile> {
    (prop::collection::vec(arb_term(), 0..=3), prop::collection::vec(arb_term(), 1..=4)).prop_map(|(f, g)| SystemFile {
        format: Some(1),
        name: None,
        omega: vec!["0".into(), "1".into()],
        a0: "1".into(),
        f,
        g,
        resonance: ResonanceSpec { p: 1, q: 1 },
        options: Default::default(),
    })
}

/// Direct evaluation of a list of terms at `(α, A, τ)`.
pub fn eval_terms(terms: &[Term], alpha: f64, a: f64, tau: f64) -> f64 {
    terms
        .iter()
        .map(|t| {
            let p: f64 = t.apoly.iter().enumerate().map(|(i, c)| c.parse::<f64>().unwrap() * a.powi(i as i32)).sum();
            let x = t.sigma as f64 * alpha + t.sigma_prime as f64 * tau;
            p * match t.basis {
                Basis::Sin => x.sin(),
                Basis::Cos => x.cos(),
            }
        })
        .sum()
}
