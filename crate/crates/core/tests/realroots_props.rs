use melnikov_core::realroots::{isolate_real_roots, resultant, RealPoly};
use proptest::prelude::*;
use rug::{Float, Rational};


fn q(n: i64, d: i64) -> Rational {
    Rational::from((n, d))
}

fn arb_roots(max: usize) -> impl Strategy<Value = Vec<Rational>> {
    prop::collection::vec((-6i64..=6, 1i64..=3), 1..=max).prop_map(|v| v.into_iter().map(|(n, d)| q(n, d)).collect())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn resultant_is_the_root_product(r1 in arb_roots(4), r2 in arb_roots(4), a in 1i64..4, b in -3i64..=3) {
        prop_assume!(b != 0);
        let (a, b) = (q(a, 1), q(b, 1));
        let p1 = RealPoly::from_roots(&r1).scale(&a);
        let p2 = RealPoly::from_roots(&r2).scale(&b);
        let mut expect = q(1, 1);
        for _ in &r2 {
            expect *= &a;
        }
        for _ in &r1 {
            expect *= &b;
        }
        for x in &r1 {
            for y in &r2 {
                expect *= Rational::from(x - y);
            }
        }
        prop_assert_eq!(resultant(&p1, &p2).unwrap(), expect);
    }

    #[test]
    fn sturm_counts_agree_with_isolation(r in arb_roots(5), c in 1i64..=4, b in -1i64..=1, complex in any::<bool>()) {
        // x^2 + b x + c has no real roots for these values
        let mut p = RealPoly::from_roots(&r);
        if complex {
            p = p.mul(&RealPoly::new(vec![q(c, 1), q(b, 1), q(1, 1)]));
        }
        let roots = isolate_real_roots(&p).unwrap();
        let total: usize = roots.iter().map(|x| x.multiplicity).sum();
        prop_assert_eq!(total, r.len());
        let bound = p.root_bound();
        let (sf, _) = p.square_free().unwrap().into_iter().fold((RealPoly::one(), 0), |(acc, n), (f, _)| (acc.mul(&f), n + 1));
        prop_assert_eq!(sf.sturm_count(&Rational::from(-&bound), &bound).unwrap(), roots.len());
        let positive = roots.iter().filter(|x| x.value > 0).map(|x| x.multiplicity).sum::<usize>();
        prop_assert!(positive <= p.sign_variations());
        prop_assert!((positive + p.sign_variations()) % 2 == 0 || p.coeff(0) == 0);
    }

    #[test]
    fn float_isolation_matches_rational(r in arb_roots(4)) {
        let p = RealPoly::from_roots(&r);
        let pf = RealPoly::new(p.coeffs().iter().map(|c| Float::with_val(256, c)).collect());
        let exact = isolate_real_roots(&p).unwrap();
        let approx = isolate_real_roots(&pf).unwrap();
        prop_assert_eq!(exact.len(), approx.len());
        for (e, a) in exact.iter().zip(&approx) {
            prop_assert_eq!(e.multiplicity, a.multiplicity);
            let root = Float::with_val(256, &e.value);
            // the square-free split rounds the coefficients once
            let slack = Float::with_val(256, 1e-60);
            let (lo, hi) = (Float::with_val(256, &a.lo - &slack), Float::with_val(256, &a.hi + &slack));
            prop_assert!(lo <= root && root <= hi, "{} not in [{}, {}]", e.value, a.lo, a.hi);
            prop_assert!(Float::with_val(256, &a.hi - &a.lo) < 1e-30);
        }
    }
}
