#![allow(dead_code)]

use evoalg_core::markov::{
    build_branching, build_house_of_cards, build_renewal, IdentityKernel, ProbSeq, TransitionKernel,
};
use evoalg_core::{Element, TruncationPolicy};
use proptest::prelude::*;

pub fn policy(cutoff: usize) -> TruncationPolicy {
    TruncationPolicy::new(cutoff, 1e-12, 1e-3).unwrap()
}

/// Finitely supported vectors on indices `< max_index`.
pub fn finite_vector(max_index: usize, max_len: usize) -> impl Strategy<Value = Element> {
    prop::collection::btree_map(0..max_index, -10.0..10.0f64, 0..=max_len).prop_map(|m| Element::from_pairs(m).unwrap())
}

/// Dense `n × n` stochastic kernel `p[i][k]` with some zeros.
pub fn stochastic_matrix(max_n: usize) -> impl Strategy<Value = Vec<Vec<f64>>> {
    (1..=max_n).prop_flat_map(|n| {
        prop::collection::vec(prop::collection::vec(prop_oneof![1 => Just(0.0), 3 => 0.0..1.0f64], n), n).prop_map(
            |mut rows| {
                for (i, row) in rows.iter_mut().enumerate() {
                    let total: f64 = row.iter().sum();
                    if total == 0.0 {
                        row[i] = 1.0;
                    } else {
                        row.iter_mut().for_each(|x| *x /= total);
                    }
                }
                rows
            },
        )
    })
}

/// `c[k][i]` from `p[i][k]`.
pub fn transpose(p: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let n = p.len();
    (0..n).map(|k| (0..n).map(|i| p[i][k]).collect()).collect()
}

pub fn dense(v: &Element, n: usize) -> Vec<f64> {
    (0..n).map(|i| v.get(i)).collect()
}

/// `C(v)_k = Σ_i c_ki v_i`, plain loops.
pub fn dense_apply(c: &[Vec<f64>], v: &[f64]) -> Vec<f64> {
    c.iter().map(|row| row.iter().zip(v).map(|(a, b)| a * b).sum()).collect()
}

/// `(v · w)_k = Σ_i c_ki v_i w_i`.
pub fn dense_product(c: &[Vec<f64>], v: &[f64], w: &[f64]) -> Vec<f64> {
    let vw: Vec<f64> = v.iter().zip(w).map(|(a, b)| a * b).collect();
    dense_apply(c, &vw)
}

pub fn max_diff(a: &Element, b: &[f64]) -> f64 {
    let n = b.len().max(a.max_index().map_or(0, |m| m + 1));
    (0..n).map(|i| (a.get(i) - b.get(i).copied().unwrap_or(0.0)).abs()).fold(0.0, f64::max)
}

pub fn builtin_chains() -> Vec<(&'static str, Box<dyn TransitionKernel>)> {
    vec![
        ("renewal", Box::new(build_renewal(ProbSeq::Geometric { start: 1, ratio: 0.5 }).unwrap())),
        (
            "house-of-cards geometric",
            Box::new(build_house_of_cards(ProbSeq::Geometric { start: 0, ratio: 0.5 }).unwrap()),
        ),
        ("house-of-cards constant", Box::new(build_house_of_cards(ProbSeq::Constant(0.5)).unwrap())),
        ("branching (1/2, 1/2)", Box::new(build_branching(vec![0.5, 0.5], 256).unwrap())),
        ("branching (1/4, 1/4, 1/2)", Box::new(build_branching(vec![0.25, 0.25, 0.5], 256).unwrap())),
        ("identity", Box::new(IdentityKernel)),
    ]
}
