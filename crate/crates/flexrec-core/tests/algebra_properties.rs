//! Property tests and oracle checks for the belief-mass algebra.
//!
//! The oracle enumerates the 2^K branch outcomes of the K binary mass
//! assignments and intersects focal elements sequentially, independent of
//! the closed-form product route the library uses.

use std::collections::BTreeMap;

use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use flexrec_core::opinion::{ClassSubset, PlausibilityVector};

/// Walks every yes/no outcome of the K plausibility functions: the "yes"
/// branch of function j puts mass pl[j] on the full frame, the "no" branch
/// puts 1 - pl[j] on the frame minus {j}; focal elements intersect.
fn branch_enumeration_oracle(pl: &[f64]) -> BTreeMap<u64, f64> {
    let k = pl.len();
    let full: u64 = (1 << k) - 1;
    let mut masses = BTreeMap::new();
    for outcome in 0u64..(1 << k) {
        let mut mass = 1.0;
        let mut focal = full;
        for (j, &p) in pl.iter().enumerate() {
            if outcome & (1 << j) != 0 {
                mass *= p;
            } else {
                mass *= 1.0 - p;
                focal &= !(1 << j);
            }
        }
        *masses.entry(focal).or_insert(0.0) += mass;
    }
    masses
}

fn random_pl(rng: &mut ChaCha8Rng, k: usize) -> PlausibilityVector {
    PlausibilityVector::new((0..k).map(|_| rng.random_range(0.0..=1.0)).collect()).unwrap()
}

#[test]
fn enumeration_matches_branch_oracle_and_normalizes() {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    for k in 2..=8 {
        for _ in 0..200 {
            let pl = random_pl(&mut rng, k);
            let masses = pl.enumerate_masses().unwrap();
            let oracle = branch_enumeration_oracle(pl.values());
            assert_eq!(masses.len(), 1 << k);

            let total: f64 = masses.values().sum();
            assert!((total - 1.0).abs() < 1e-9, "K={k}: total {total}");

            for (subset, mass) in &masses {
                let expect = oracle[&subset.bits()];
                assert!(
                    (mass - expect).abs() < 1e-12,
                    "K={k} subset {subset}: {mass} vs {expect}"
                );
                // Closed form agrees with its own enumeration entry exactly.
                assert_eq!(*mass, pl.subset_mass(*subset).unwrap());
            }
        }
    }
}

#[test]
fn derived_masses_match_the_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    for k in 2..=7 {
        for _ in 0..100 {
            let pl = random_pl(&mut rng, k);
            let oracle = branch_enumeration_oracle(pl.values());

            let beliefs = pl.singleton_beliefs();
            for (i, b) in beliefs.iter().enumerate() {
                assert!((b - oracle[&(1u64 << i)]).abs() < 1e-12);
            }
            assert!((pl.ignorance() - oracle[&0]).abs() < 1e-12);

            let confusion_oracle: f64 = oracle
                .iter()
                .filter(|(bits, _)| bits.count_ones() >= 2)
                .map(|(_, m)| *m)
                .sum();
            assert!((pl.total_confusion() - confusion_oracle).abs() < 1e-9);
            assert!(
                (pl.total_uncertainty() - (confusion_oracle + oracle[&0])).abs() < 1e-9,
                "U = C + I"
            );

            for i in 0..k {
                let related: f64 = oracle
                    .iter()
                    .filter(|(bits, _)| bits.count_ones() >= 2 && *bits & (1 << i) != 0)
                    .map(|(_, m)| *m)
                    .sum();
                assert!(
                    (pl.class_related_confusion(i).unwrap() - related).abs() < 1e-12,
                    "K={k} class {i}"
                );
            }
            for i in 0..k {
                for j in (i + 1)..k {
                    let pair = oracle[&((1u64 << i) | (1u64 << j))];
                    assert!((pl.pairwise_confusion(i, j).unwrap() - pair).abs() < 1e-12);
                }
            }
        }
    }
}

proptest! {
    #[test]
    fn plausibility_splits_into_belief_and_confusion(
        values in proptest::collection::vec(0.0f64..=1.0, 2..=10)
    ) {
        let pl = PlausibilityVector::new(values.clone()).unwrap();
        let beliefs = pl.singleton_beliefs();
        for i in 0..values.len() {
            let c_i = pl.class_related_confusion(i).unwrap();
            prop_assert!((beliefs[i] + c_i - values[i]).abs() < 1e-12);
        }
        // C_i + C_not_i = C for every class.
        let c = pl.total_confusion();
        let op = pl.hyper_opinion().unwrap();
        prop_assert!((op.uncertainty() - (op.total_confusion() + op.ignorance())).abs() < 1e-12);
        for i in 0..values.len() {
            let c_i = pl.class_related_confusion(i).unwrap();
            prop_assert!(c_i <= c + 1e-12);
        }
    }

    #[test]
    fn permutation_equivariance_is_bit_exact(
        values in proptest::collection::vec(0.0f64..=1.0, 2..=10),
        perm_seed in any::<u64>()
    ) {
        let k = values.len();
        let mut perm: Vec<usize> = (0..k).collect();
        let mut rng = ChaCha8Rng::seed_from_u64(perm_seed);
        for i in (1..k).rev() {
            let j = rng.random_range(0..=i);
            perm.swap(i, j);
        }
        let permuted: Vec<f64> = perm.iter().map(|&p| values[p]).collect();

        let base = PlausibilityVector::new(values).unwrap();
        let shuffled = PlausibilityVector::new(permuted).unwrap();

        let base_beliefs = base.singleton_beliefs();
        let shuffled_beliefs = shuffled.singleton_beliefs();
        for (new_index, &old_index) in perm.iter().enumerate() {
            prop_assert_eq!(shuffled_beliefs[new_index], base_beliefs[old_index]);
        }
        prop_assert_eq!(base.ignorance(), shuffled.ignorance());
        prop_assert_eq!(base.total_uncertainty(), shuffled.total_uncertainty());
        prop_assert_eq!(base.total_confusion(), shuffled.total_confusion());
    }

    #[test]
    fn belief_grows_and_ignorance_shrinks_in_plausibility(
        values in proptest::collection::vec(0.0f64..=0.95, 2..=8),
        index in any::<proptest::sample::Index>(),
        bump in 0.01f64..=0.05,
    ) {
        let i = index.index(values.len());
        let mut bumped = values.clone();
        bumped[i] = (bumped[i] + bump).min(1.0);
        prop_assume!(bumped[i] > values[i]);

        let base = PlausibilityVector::new(values).unwrap();
        let more = PlausibilityVector::new(bumped).unwrap();
        prop_assert!(more.singleton_beliefs()[i] > base.singleton_beliefs()[i]);
        prop_assert!(more.ignorance() < base.ignorance());
    }
}

#[test]
fn set_belief_is_bounded_by_one_minus_ignorance() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for _ in 0..200 {
        let pl = random_pl(&mut rng, 5);
        let ceiling = 1.0 - pl.ignorance();
        for bits in 0u64..32 {
            let belief = pl.set_belief(ClassSubset::from_bits(bits)).unwrap();
            assert!(belief <= ceiling + 1e-12);
        }
        let full = pl.set_belief(ClassSubset::full(5).unwrap()).unwrap();
        assert!((full - ceiling).abs() < 1e-12);
    }
}
