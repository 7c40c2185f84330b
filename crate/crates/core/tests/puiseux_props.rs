use std::collections::BTreeMap;

use melnikov_core::coefficients::{general_order, BivariateSeries};
use melnikov_core::eta::compose_bifurcation;
use melnikov_core::puiseux::{assemble_exponents, expand_branches, face_polynomial, newton_polygon, BranchStatus, PolygonResult};
use melnikov_core::scalar::{set_precision, Approx, Exact, Number, Scalar};
use proptest::prelude::*;
use rug::Rational;

/// `Π (β^d − a ε^e)` as a polynomial in `(ε, β)`.
fn product(factors: &[(usize, usize, i64)]) -> BivariateSeries<Exact> {
    let mut acc: BTreeMap<(usize, usize), Rational> = BTreeMap::from([((0, 0), Rational::from(1))]);
    for &(d, e, a) in factors {
        let mut next = BTreeMap::new();
        for ((k, j), v) in &acc {
            *next.entry((*k, j + d)).or_insert_with(Rational::new) += v;
            *next.entry((k + e, *j)).or_insert_with(Rational::new) -= Rational::from(v * a);
        }
        acc = next;
    }
    let terms: Vec<_> = acc.into_iter().filter(|(_, v)| *v != 0).map(|((k, j), v)| (k, j, Exact::from_rational(&v))).collect();
    BivariateSeries::polynomial(&terms)
}

fn arb_factors() -> impl Strategy<Value = Vec<(usize, usize, i64)>> {
    prop::collection::vec((1usize..=3, 1usize..=3, prop_oneof![-3i64..=-1, 1i64..=3]), 1..=3)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn hull_supports_the_carrier(factors in arb_factors()) {
        let f = product(&factors);
        let PolygonResult::Polygon(poly) = newton_polygon(&f) else { panic!("F(ε, 0) has a pure ε term") };
        let carrier = f.carrier();
        let n = general_order(&f).unwrap();
        prop_assert_eq!(poly.vertices.first().unwrap(), &(0, n));
        prop_assert_eq!(poly.vertices.last().unwrap().1, 0);
        prop_assert_eq!(poly.segments.iter().map(|s| s.jproj_len).sum::<usize>(), n);
        for w in poly.segments.windows(2) {
            prop_assert!(w[0].mu < w[1].mu);
        }
        for s in &poly.segments {
            let on = |(k, j): (usize, usize)| Rational::from(&s.mu * j as i64) + k as i64;
            prop_assert_eq!(on(s.start), s.r.clone());
            prop_assert_eq!(on(s.end), s.r.clone());
            for &pt in &carrier {
                prop_assert!(on(pt) >= s.r, "{:?} below segment {:?}", pt, s);
            }
            let face = face_polynomial(&f, s, 1, 0);
            prop_assert_eq!(face.degree(), s.start.1);
            prop_assert_eq!((0..).find(|&j| face.coeff(j) != 0).unwrap(), s.end.1);
        }
    }

    #[test]
    fn branch_steps_descend(factors in arb_factors(), sigma0 in prop_oneof![Just(1), Just(-1)]) {
        set_precision(256);
        let f = product(&factors);
        let n = general_order(&f).unwrap();
        for br in expand_branches(&f, sigma0, n + 2).unwrap() {
            let mut budget = n;
            for st in &br.steps {
                prop_assert!(st.n_in <= budget, "generality order grew: {:?}", br.steps);
                prop_assert!(st.mult * st.segment.p as usize <= st.segment.jproj_len);
                if st.mult == st.segment.jproj_len {
                    prop_assert_eq!(st.segment.p, 1);
                }
                budget = st.mult;
            }
        }
    }

    #[test]
    fn leading_terms_cancel_through_the_last_weight(factors in arb_factors(), sigma0 in prop_oneof![Just(1), Just(-1)]) {
        set_precision(256);
        let f = product(&factors);
        let n = general_order(&f).unwrap();
        for br in expand_branches(&f, sigma0, n + 2).unwrap() {
            if br.status != BranchStatus::SimpleRootFound || br.steps.is_empty() {
                continue;
            }
            let ex = assemble_exponents(&br).unwrap();
            let s_last = *ex.s_list.last().unwrap() as usize;
            let pp = ex.pp as usize;
            if br.is_exact() {
                let mut b = vec![Exact::zero(); s_last + 1];
                for (h, c) in &ex.leading_terms {
                    let Number::Exact(c) = c else { unreachable!() };
                    b[*h as usize] = b[*h as usize].add(c);
                }
                let out = compose_bifurcation(&f, sigma0, pp, &b, s_last);
                prop_assert!(out.iter().all(|x| x.is_zero()), "{:?}", br.steps);
            } else {
                let mut b = vec![Approx::zero(); s_last + 1];
                for (h, c) in &ex.leading_terms {
                    b[*h as usize] = b[*h as usize].add(&c.to_approx());
                }
                let out = compose_bifurcation(&f.to_approx(), sigma0, pp, &b, s_last);
                prop_assert!(out.iter().all(|x| x.abs_f64() < 1e-40), "{:?}", out);
            }
        }
    }
}
