use amtrl::allocation::{
    allocate_fixed_nu, lpnq_allocation, nu_tilde_objective, passive_allocation, round_largest_remainder,
};
use nalgebra::DVector;
use proptest::prelude::*;

fn relevance() -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(prop_oneof![1 => Just(0.0), 6 => -10.0..10.0f64], 1..25)
        .prop_filter("not all zero", |v| v.iter().any(|x| *x != 0.0))
}

fn problem() -> impl Strategy<Value = (Vec<f64>, u64, u64)> {
    (relevance(), 0..30u64, 0..5000u64).prop_map(|(nu, floor, spare)| {
        let n_tot = floor * nu.len() as u64 + spare + nu.len() as u64;
        (nu, floor, n_tot)
    })
}

proptest! {
    #[test]
    fn budget_is_spent_exactly((nu, floor, n_tot) in problem()) {
        let a = allocate_fixed_nu(&DVector::from_vec(nu), n_tot, floor).unwrap();
        prop_assert_eq!(a.n.iter().sum::<u64>(), n_tot);
        prop_assert!(a.n.iter().all(|&c| c >= floor));
        let cont: f64 = a.continuous.iter().sum();
        prop_assert!((cont - n_tot as f64).abs() <= 1e-9 * n_tot as f64);
        prop_assert!(a.continuous.iter().all(|&c| c >= floor as f64 - 1e-9));
    }

    #[test]
    fn rounding_stays_within_one_sample((nu, floor, n_tot) in problem()) {
        let a = allocate_fixed_nu(&DVector::from_vec(nu.clone()), n_tot, floor).unwrap();
        for (i, (&c, &r)) in a.n.iter().zip(&a.continuous).enumerate() {
            // A zero-floor task may be lifted to one sample to keep its term finite.
            let slack = if floor == 0 && nu[i] != 0.0 { 1.0 } else { 0.0 };
            prop_assert!((c as f64 - r).abs() < 1.0 + slack + 1e-9, "task {}: {} vs {}", i, c, r);
        }
    }

    #[test]
    fn integer_objective_is_finite((nu, floor, n_tot) in problem()) {
        let support = nu.iter().filter(|v| **v != 0.0).count() as u64;
        prop_assume!(n_tot >= support);
        let nu = DVector::from_vec(nu);
        let a = allocate_fixed_nu(&nu, n_tot, floor).unwrap();
        prop_assert!(nu_tilde_objective(&nu, &a.counts_f64()).unwrap().is_finite());
    }

    #[test]
    fn invariant_to_positive_scaling((nu, floor, n_tot) in problem(), scale in 1e-3..1e3f64) {
        let nu = DVector::from_vec(nu);
        let a = allocate_fixed_nu(&nu, n_tot, floor).unwrap();
        let b = allocate_fixed_nu(&(&nu * scale), n_tot, floor).unwrap();
        for (x, y) in a.continuous.iter().zip(&b.continuous) {
            prop_assert!((x - y).abs() <= 1e-9 * (1.0 + x.abs()));
        }
    }

    #[test]
    fn sign_does_not_matter((nu, floor, n_tot) in problem()) {
        let nu = DVector::from_vec(nu);
        let a = allocate_fixed_nu(&nu, n_tot, floor).unwrap();
        let b = allocate_fixed_nu(&nu.abs(), n_tot, floor).unwrap();
        prop_assert_eq!(a.n, b.n);
    }

    #[test]
    fn permutation_equivariant((nu, floor, n_tot) in problem(), rot in 0usize..25) {
        let t = nu.len();
        let shifted: Vec<f64> = (0..t).map(|i| nu[(i + rot) % t]).collect();
        let a = allocate_fixed_nu(&DVector::from_vec(nu), n_tot, floor).unwrap();
        let b = allocate_fixed_nu(&DVector::from_vec(shifted), n_tot, floor).unwrap();
        for i in 0..t {
            let (x, y) = (a.continuous[(i + rot) % t], b.continuous[i]);
            prop_assert!((x - y).abs() <= 1e-9 * (1.0 + x.abs()));
        }
    }

    #[test]
    fn larger_relevance_gets_more((nu, floor, n_tot) in problem()) {
        let a = allocate_fixed_nu(&DVector::from_vec(nu.clone()), n_tot, floor).unwrap();
        for i in 0..nu.len() {
            for j in 0..nu.len() {
                if nu[i].abs() >= nu[j].abs() {
                    prop_assert!(a.continuous[i] >= a.continuous[j] - 1e-9);
                }
            }
        }
    }

    #[test]
    fn never_worse_than_uniform((nu, floor, n_tot) in problem()) {
        let nu = DVector::from_vec(nu);
        let a = allocate_fixed_nu(&nu, n_tot, floor).unwrap();
        let u = passive_allocation(nu.len(), n_tot, floor).unwrap();
        let ours = nu_tilde_objective(&nu, &a.continuous).unwrap();
        let uniform: f64 = nu.iter().map(|v| v * v).sum::<f64>() * nu.len() as f64 / n_tot as f64;
        prop_assert!(ours <= uniform * (1.0 + 1e-12));
        prop_assert!(u.n.iter().max().unwrap() - u.n.iter().min().unwrap() <= 1);
    }

    #[test]
    fn zero_floor_is_proportional(nu in relevance(), n_tot in 1u64..1_000_000) {
        let nu = DVector::from_vec(nu);
        let a = allocate_fixed_nu(&nu, n_tot, 0).unwrap();
        let l1: f64 = nu.iter().map(|v| v.abs()).sum();
        for (v, c) in nu.iter().zip(&a.continuous) {
            prop_assert!((c - n_tot as f64 * v.abs() / l1).abs() <= 1e-9 * n_tot as f64);
        }
    }

    #[test]
    fn unit_exponent_matches_l1_rule((nu, floor, n_tot) in problem()) {
        let nu = DVector::from_vec(nu);
        let a = allocate_fixed_nu(&nu, n_tot, floor).unwrap();
        let b = lpnq_allocation(&nu, 1.0, n_tot, floor).unwrap();
        prop_assert_eq!(a.n, b.n);
    }

    #[test]
    fn rounding_preserves_integers(counts in prop::collection::vec(0u64..500, 1..20)) {
        let n_tot: u64 = counts.iter().sum();
        let cont: Vec<f64> = counts.iter().map(|&c| c as f64).collect();
        prop_assert_eq!(round_largest_remainder(&cont, n_tot, 0), counts);
    }
}

#[test]
fn infeasible_budget_is_rejected() {
    let nu = DVector::from_vec(vec![1.0, 2.0, 3.0]);
    assert!(allocate_fixed_nu(&nu, 29, 10).is_err());
    assert!(allocate_fixed_nu(&nu, 30, 10).is_ok());
}

#[test]
fn tiny_relevance_keeps_a_sample_without_floor() {
    let nu = DVector::from_vec(vec![1.0, 1e-9, 0.0]);
    let a = allocate_fixed_nu(&nu, 10, 0).unwrap();
    assert_eq!(a.n.iter().sum::<u64>(), 10);
    assert_eq!(a.n[1], 1);
    assert_eq!(a.n[2], 0);
}

proptest! {
    #[test]
    fn rounded_counts_are_monotone_within_one((nu, floor, n_tot) in problem()) {
        let a = allocate_fixed_nu(&DVector::from_vec(nu.clone()), n_tot, floor).unwrap();
        for i in 0..nu.len() {
            for j in 0..nu.len() {
                if nu[i].abs() >= nu[j].abs() {
                    prop_assert!(a.n[i] + 1 >= a.n[j], "{:?} -> {:?}", nu, a.n);
                }
            }
        }
    }
}
