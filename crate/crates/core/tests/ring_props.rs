use std::collections::BTreeSet;

use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use ringcode_core::ring::{
    add_vectors, apply_linear_map, enumerate_left_ideals, is_left_ideal, quotient_partition, random_linear_map,
    FiniteRing,
};

/// Every subset of the ring that is a left ideal, by exhaustive search.
fn brute_force_ideals(ring: &FiniteRing) -> BTreeSet<Vec<usize>> {
    let m = ring.order();
    (0u64..1 << m)
        .map(|mask| (0..m).filter(|&e| mask >> e & 1 == 1).collect::<BTreeSet<_>>())
        .filter(|s| is_left_ideal(ring, s))
        .map(|s| s.into_iter().collect())
        .collect()
}

fn fast_ideals(ring: &FiniteRing) -> BTreeSet<Vec<usize>> {
    enumerate_left_ideals(ring)
        .unwrap()
        .iter()
        .map(|i| i.members().to_vec())
        .collect()
}

fn divisor_count(q: usize) -> usize {
    (1..=q).filter(|d| q % d == 0).count()
}

fn small_ring() -> impl Strategy<Value = FiniteRing> {
    prop_oneof![
        (2usize..=16).prop_map(|q| FiniteRing::modular(q).unwrap()),
        Just(FiniteRing::triangular(2).unwrap()),
        (2usize..=4, 2usize..=4).prop_map(|(a, b)| FiniteRing::product(
            &FiniteRing::modular(a).unwrap(),
            &FiniteRing::modular(b).unwrap()
        )),
    ]
}

#[test]
fn ideal_enumeration_matches_brute_force() {
    let mut rings: Vec<FiniteRing> = (2..=16).map(|q| FiniteRing::modular(q).unwrap()).collect();
    rings.push(FiniteRing::triangular(2).unwrap());
    rings.push(FiniteRing::triangular(3).unwrap());
    for (a, b) in [(2, 2), (2, 3), (2, 4), (3, 3), (2, 5)] {
        rings.push(FiniteRing::product(
            &FiniteRing::modular(a).unwrap(),
            &FiniteRing::modular(b).unwrap(),
        ));
    }
    for ring in &rings {
        assert_eq!(fast_ideals(ring), brute_force_ideals(ring), "{}", ring.name());
    }
}

#[test]
fn modular_ideals_follow_divisors() {
    for q in 2..=30 {
        let ring = FiniteRing::modular(q).unwrap();
        assert_eq!(enumerate_left_ideals(&ring).unwrap().len(), divisor_count(q), "Z{q}");
    }
}

#[test]
fn triangular_rings_have_one_proper_ideal() {
    for p in [2, 3, 5, 7] {
        let ring = FiniteRing::triangular(p).unwrap();
        let ideals = enumerate_left_ideals(&ring).unwrap();
        assert_eq!(ideals.len(), 3, "p = {p}");
        let proper: Vec<_> = ideals.iter().filter(|i| !i.is_zero() && i.len() < ring.order()).collect();
        assert_eq!(proper.len(), 1);
        // It is the set of elements with zero first coordinate.
        let zero_first: Vec<usize> = (0..p).collect();
        assert_eq!(proper[0].members(), zero_first.as_slice());
        assert!(!ring.is_field());
    }
}

proptest! {
    #[test]
    fn axioms_hold(ring in small_ring()) {
        prop_assert!(ring.verify_axioms().all_pass());
    }

    #[test]
    fn cosets_partition_the_ring(ring in small_ring(), pick in 0usize..64) {
        let ideals = enumerate_left_ideals(&ring).unwrap();
        let ideal = &ideals[pick % ideals.len()];
        let q = quotient_partition(&ring, ideal);
        let mut seen = vec![0usize; ring.order()];
        for c in q.cosets() {
            prop_assert_eq!(c.len(), ideal.len());
            for &x in c {
                seen[x] += 1;
            }
        }
        prop_assert!(seen.iter().all(|&s| s == 1));
        prop_assert_eq!(&q.cosets()[0], &ideal.members().to_vec());
        for x in 0..ring.order() {
            for y in 0..ring.order() {
                let same = q.coset_of(x) == q.coset_of(y);
                prop_assert_eq!(same, ideal.contains(ring.sub(x, y)));
            }
        }
    }

    #[test]
    fn encoder_is_linear(seed in any::<u64>(), q in 2usize..=9, k in 1usize..5, n in 1usize..8) {
        let ring = FiniteRing::modular(q).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let a = random_linear_map(&ring, k, n, &mut rng);
        let x: Vec<usize> = (0..n).map(|i| (seed as usize >> i) % q).collect();
        let y: Vec<usize> = (0..n).map(|i| (seed as usize >> (i + 7)) % q).collect();
        let lhs = apply_linear_map(&ring, &a, &add_vectors(&ring, &x, &y)).unwrap();
        let rhs = add_vectors(
            &ring,
            &apply_linear_map(&ring, &a, &x).unwrap(),
            &apply_linear_map(&ring, &a, &y).unwrap(),
        );
        prop_assert_eq!(lhs, rhs);
    }
}

#[test]
fn random_matrix_entries_are_uniform() {
    // Chi-square goodness of fit over Z6 with 60000 draws, 5 degrees of freedom.
    let ring = FiniteRing::modular(6).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let a = random_linear_map(&ring, 100, 600, &mut rng);
    let mut counts = [0f64; 6];
    for &e in &a.entries {
        counts[e] += 1.0;
    }
    let expected = a.entries.len() as f64 / 6.0;
    let chi2: f64 = counts.iter().map(|c| (c - expected).powi(2) / expected).sum();
    // 99.9% quantile of chi-square with 5 degrees of freedom.
    assert!(chi2 < 20.52, "chi2 = {chi2}");
}
