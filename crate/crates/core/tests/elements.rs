mod common;

use common::finite_vector;
use evoalg_core::{axpy, inner_product, norm, truncate, Element, TruncationPolicy};
use proptest::prelude::*;

#[test]
fn basis_is_orthonormal() {
    for i in 0..40 {
        for j in 0..40 {
            let ip = inner_product(&Element::basis(i), &Element::basis(j));
            assert_eq!((ip.value, ip.uncertainty), (if i == j { 1.0 } else { 0.0 }, 0.0));
        }
    }
}

#[test]
fn geometric_vector_against_e0() {
    let v = Element::from_pairs((0..10).map(|i| (i, 0.5f64.powi(i as i32 + 1)))).unwrap();
    let ip = inner_product(&v, &Element::basis(0));
    assert_eq!((ip.value, ip.uncertainty), (0.5, 0.0));
}

#[test]
fn truncation_examples() {
    let v = Element::from_pairs([(0, 1.0), (100, 0.3)]).unwrap();
    let t = truncate(&v, &TruncationPolicy::new(50, 1e-12, 1.0).unwrap()).unwrap();
    assert_eq!(t.iter().collect::<Vec<_>>(), vec![(0, 1.0)]);
    assert_eq!(t.tail_bound(), 0.3);
    let far = Element::from_pairs([(100, 0.9)]).unwrap();
    assert!(truncate(&far, &TruncationPolicy::new(50, 1e-12, 0.5).unwrap()).is_err());
}

proptest! {
    #[test]
    fn norm_matches_inner_product(v in finite_vector(50, 12)) {
        let n = norm(&v).value;
        prop_assert!((n * n - inner_product(&v, &v).value).abs() <= 1e-12 * (1.0 + n * n));
    }

    #[test]
    fn triangle_inequality(v in finite_vector(30, 10), w in finite_vector(30, 10)) {
        let sum = norm(&axpy(1.0, &v, &w)).value;
        prop_assert!(sum <= norm(&v).value + norm(&w).value + 1e-12);
    }

    #[test]
    fn truncation_is_sound(v in finite_vector(80, 20), cutoff in 1usize..80) {
        let p = TruncationPolicy::new(cutoff, 1e-12, f64::MAX).unwrap();
        let t = truncate(&v, &p).unwrap();
        let dropped = evoalg_core::sum::sum(v.iter().filter(|&(i, _)| i >= cutoff).map(|(_, x)| x * x)).sqrt();
        prop_assert!(dropped <= t.tail_bound());
        prop_assert!(t.iter().all(|(i, x)| i < cutoff && v.get(i) == x));
    }

    #[test]
    fn inner_product_uncertainty_covers_tails(
        v in finite_vector(40, 10),
        w in finite_vector(40, 10),
        cutoff in 1usize..40,
    ) {
        let p = TruncationPolicy::new(cutoff, 1e-12, f64::MAX).unwrap();
        let (tv, tw) = (truncate(&v, &p).unwrap(), truncate(&w, &p).unwrap());
        let exact = inner_product(&v, &w).value;
        let est = inner_product(&tv, &tw);
        prop_assert!((exact - est.value).abs() <= est.uncertainty + 1e-9);
    }
}
