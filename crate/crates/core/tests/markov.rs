mod common;

use common::{builtin_chains, policy};
use evoalg_core::markov::{
    build_branching, build_house_of_cards, build_renewal, evolve_distribution, nstep_oracle, simulate,
    to_structure_map, validate_kernel, Distribution, IdentityKernel, ProbSeq, TransitionKernel,
};
use evoalg_core::{power_apply, Element, StructureMap, TruncationPolicy};

fn renewal() -> evoalg_core::markov::RenewalKernel {
    build_renewal(ProbSeq::Geometric { start: 1, ratio: 0.5 }).unwrap()
}

fn loose(cutoff: usize) -> TruncationPolicy {
    TruncationPolicy::new(cutoff, 1e-12, 1.0).unwrap()
}

#[test]
fn validation_of_builtins() {
    assert!(validate_kernel(&renewal(), 50, &policy(64)).is_valid());
    assert!(validate_kernel(&IdentityKernel, 50, &policy(64)).is_valid());
    for (name, k) in builtin_chains() {
        assert!(validate_kernel(&k, 64, &policy(64)).is_valid(), "{name}");
    }
}

#[test]
fn bridge_columns_are_kernel_rows() {
    for (name, k) in builtin_chains() {
        let rows: Vec<_> = (0..40).map(|i| k.row(i, 64)).collect();
        let s = to_structure_map(k, &policy(64)).unwrap();
        for (i, row) in rows.iter().enumerate() {
            assert_eq!(&s.column(i, 64), row, "{name} column {i}");
        }
    }
    let s = to_structure_map(renewal(), &policy(64)).unwrap();
    assert_eq!(s.column(0, 64).entries[..3], [(1, 0.5), (2, 0.25), (3, 0.125)]);
    assert_eq!(s.column(5, 64).entries, vec![(4, 1.0)]);
    let h = to_structure_map(build_house_of_cards(ProbSeq::Constant(0.3)).unwrap(), &policy(64)).unwrap();
    assert_eq!(h.column(4, 64).entries, vec![(0, 0.3), (5, 0.7)]);
}

#[test]
fn nstep_examples() {
    let t = nstep_oracle(&renewal(), 0, 2, &policy(64)).unwrap();
    for k in 0..62 {
        assert!((t.get(k) - 0.5f64.powi(k as i32 + 1)).abs() < 1e-15, "k={k}");
    }
    let hoc = build_house_of_cards(ProbSeq::Constant(0.5)).unwrap();
    let t = nstep_oracle(&hoc, 0, 2, &policy(64)).unwrap();
    assert_eq!(t.probabilities.into_iter().collect::<Vec<_>>(), vec![(0, 0.5), (1, 0.25), (2, 0.25)]);
    assert_eq!(t.deficit, 0.0);
}

#[test]
fn evolve_examples() {
    let s = to_structure_map(renewal(), &policy(64)).unwrap();
    let init = Distribution::new(Element::from_pairs([(0, 0.5), (1, 0.5)]).unwrap(), 0.0, 1e-12).unwrap();
    let d = evolve_distribution(&s, &init, 1, &policy(64)).unwrap();
    assert_eq!(d.probability(0), 0.5);
    // mixing the one-step rows of states 0 and 1
    let (a, b) =
        (nstep_oracle(&renewal(), 0, 1, &policy(64)).unwrap(), nstep_oracle(&renewal(), 1, 1, &policy(64)).unwrap());
    for k in 0..64 {
        assert!((d.probability(k) - 0.5 * (a.get(k) + b.get(k))).abs() < 1e-15);
    }

    let id = to_structure_map(IdentityKernel, &policy(64)).unwrap();
    let init = Distribution::new(Element::from_pairs([(1, 0.2), (7, 0.8)]).unwrap(), 0.0, 1e-12).unwrap();
    assert_eq!(evolve_distribution(&id, &init, 9, &policy(64)).unwrap(), init);
}

#[test]
fn simulate_examples() {
    let out = simulate(&IdentityKernel, &Distribution::point_mass(3), 5, 1000, 11, &policy(64)).unwrap();
    assert_eq!(out.counts.get(&3), Some(&1000));
    let out = simulate(&renewal(), &Distribution::point_mass(2), 2, 1000, 11, &policy(64)).unwrap();
    assert_eq!(out.counts.get(&0), Some(&1000));
    let paths = 100_000;
    let out = simulate(&renewal(), &Distribution::point_mass(0), 1, paths, 12, &policy(64)).unwrap();
    let f = out.frequency(1);
    assert!((f - 0.5).abs() <= 3.0 * (0.25f64 / paths as f64).sqrt(), "{f}");
}

#[test]
fn bridge_equivalence_for_all_chains() {
    let p = loose(64);
    for (name, k) in builtin_chains() {
        let s = to_structure_map(&k, &p).unwrap();
        for i in 0..16 {
            for n in 0..=8 {
                let alg = power_apply(&s, &Element::basis(i), n, &p).unwrap().element;
                let oracle = nstep_oracle(&k, i, n, &p).unwrap();
                let tol = 1e-10 + alg.tail_bound() + oracle.deficit;
                for state in 0..64 {
                    let d = (alg.get(state) - oracle.get(state)).abs();
                    assert!(d <= tol, "{name}: i={i} n={n} k={state}: {d}");
                }
            }
        }
    }
}

#[test]
fn mass_is_conserved() {
    let p = loose(64);
    for (name, k) in builtin_chains() {
        let s = to_structure_map(&k, &p).unwrap();
        for n in [0, 1, 3, 8] {
            for i in [0, 3, 10] {
                let d = evolve_distribution(&s, &Distribution::point_mass(i), n, &p).unwrap();
                let total = d.total_mass() + d.mass_deficit();
                assert!((total - 1.0).abs() <= p.abs_tol(), "{name}: i={i} n={n}: {total}");
            }
        }
    }
}

#[test]
fn chapman_kolmogorov() {
    let p = loose(64);
    for (name, k) in builtin_chains() {
        for i in 0..8 {
            for n1 in 1..=3 {
                for n2 in 1..=3 {
                    let whole = nstep_oracle(&k, i, n1 + n2, &p).unwrap();
                    let first = nstep_oracle(&k, i, n1, &p).unwrap();
                    let mut composed = vec![0.0; 64];
                    let mut deficit = first.deficit;
                    for (&m, &pm) in &first.probabilities {
                        let second = nstep_oracle(&k, m, n2, &p).unwrap();
                        deficit += pm * second.deficit;
                        for (&j, &pj) in &second.probabilities {
                            composed[j] += pm * pj;
                        }
                    }
                    for (j, &cj) in composed.iter().enumerate() {
                        let d = (whole.get(j) - cj).abs();
                        assert!(d <= 1e-8 + deficit + whole.deficit, "{name}: i={i} n1={n1} n2={n2} j={j}: {d}");
                    }
                }
            }
        }
    }
}

#[test]
fn monte_carlo_matches_evolution() {
    let p = policy(64);
    let paths = 100_000u64;
    let chains: Vec<(&str, Box<dyn TransitionKernel>)> =
        vec![("renewal", Box::new(renewal())), ("branching", Box::new(build_branching(vec![0.5, 0.5], 64).unwrap()))];
    for (name, k) in chains {
        let s = to_structure_map(&k, &p).unwrap();
        let init = Distribution::new(Element::from_pairs([(0, 0.5), (1, 0.5)]).unwrap(), 0.0, 1e-12).unwrap();
        let exact = evolve_distribution(&s, &init, 3, &p).unwrap();
        let sim = simulate(&k, &init, 3, paths, 2024, &p).unwrap();
        for state in 0..64 {
            let q = exact.probability(state);
            let tol = 4.0 * (q * (1.0 - q) / paths as f64).sqrt();
            assert!((sim.frequency(state) - q).abs() <= tol, "{name} state {state}");
        }
    }
}
