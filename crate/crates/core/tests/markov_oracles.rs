use num::rational::BigRational;
use num::{BigInt, One, ToPrimitive, Zero};
use proptest::prelude::*;

use ringcode_core::linalg::{mat_mul, Mat};
use ringcode_core::markov::{
    bound_profile, conditional_entropy, data_processing, entropy, entropy_rate, quotient_entropy_rate_bounds,
    stationarity_residual, BoundsConfig, Labeling, MarkovChain,
};

/// Rows of small positive integers, normalized exactly.
fn int_chain() -> impl Strategy<Value = Vec<Vec<u32>>> {
    (2usize..=5).prop_flat_map(|n| prop::collection::vec(prop::collection::vec(1u32..20, n), n))
}

fn rational_rows(w: &[Vec<u32>]) -> Vec<Vec<BigRational>> {
    w.iter()
        .map(|r| {
            let s: u32 = r.iter().sum();
            r.iter()
                .map(|&x| BigRational::new(BigInt::from(x), BigInt::from(s)))
                .collect()
        })
        .collect()
}

fn float_rows(q: &[Vec<BigRational>]) -> Mat {
    q.iter().map(|r| r.iter().map(|x| x.to_f64().unwrap()).collect()).collect()
}

/// Solves `pi (P - I) = 0`, `sum pi = 1` in exact arithmetic.
fn exact_invariant(p: &[Vec<BigRational>]) -> Vec<BigRational> {
    let n = p.len();
    // Rows of the system: columns j of (P^T - I), last one replaced by ones.
    let mut a: Vec<Vec<BigRational>> = (0..n)
        .map(|j| {
            let mut row: Vec<BigRational> = (0..n)
                .map(|i| {
                    let mut v = p[i][j].clone();
                    if i == j {
                        v -= BigRational::one();
                    }
                    v
                })
                .collect();
            row.push(BigRational::zero());
            row
        })
        .collect();
    a[n - 1] = vec![BigRational::one(); n + 1];
    for col in 0..n {
        let piv = (col..n).find(|&r| !a[r][col].is_zero()).expect("non-singular");
        a.swap(col, piv);
        let lead = a[col][col].clone();
        for x in a[col].iter_mut() {
            *x /= lead.clone();
        }
        for r in 0..n {
            if r != col && !a[r][col].is_zero() {
                let f = a[r][col].clone();
                for c in col..=n {
                    let d = a[col][c].clone() * f.clone();
                    a[r][c] -= d;
                }
            }
        }
    }
    a.into_iter().map(|r| r[n].clone()).collect()
}

fn power_iteration(p: &Mat) -> Vec<f64> {
    // Rows are renormalized after each squaring; otherwise rounding in the
    // row sums doubles every step.
    let mut m = p.clone();
    for _ in 0..40 {
        m = mat_mul(&m, &m);
        for row in m.iter_mut() {
            let s: f64 = row.iter().sum();
            row.iter_mut().for_each(|x| *x /= s);
        }
    }
    m[0].clone()
}

proptest! {
    #[test]
    fn invariant_matches_exact_rational(w in int_chain()) {
        let q = rational_rows(&w);
        let c = MarkovChain::with_index_states(float_rows(&q)).unwrap();
        let pi = c.invariant_distribution().unwrap();
        let exact = exact_invariant(&q);
        for (a, b) in pi.iter().zip(&exact) {
            prop_assert!((a - b.to_f64().unwrap()).abs() < 1e-13);
        }
        prop_assert!(stationarity_residual(c.matrix(), &pi) < 1e-12);
    }

    #[test]
    fn invariant_matches_power_iteration(w in int_chain()) {
        let c = MarkovChain::with_index_states(float_rows(&rational_rows(&w))).unwrap();
        let pi = c.invariant_distribution().unwrap();
        let pw = power_iteration(c.matrix());
        for (a, b) in pi.iter().zip(&pw) {
            prop_assert!((a - b).abs() < 1e-10);
        }
    }

    #[test]
    fn complement_is_stochastic_and_keeps_restricted_invariant(w in int_chain(), mask in 1u32..31) {
        let c = MarkovChain::with_index_states(float_rows(&rational_rows(&w))).unwrap();
        let n = c.len();
        let a: Vec<usize> = (0..n).filter(|&i| mask >> i & 1 == 1).collect();
        prop_assume!(!a.is_empty());
        let s = c.stochastic_complement(&a).unwrap();
        for row in &s {
            prop_assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-12);
            prop_assert!(row.iter().all(|&x| x >= -1e-15));
        }
        // pi restricted to A and renormalized is invariant for S_A.
        let pi = c.invariant_distribution().unwrap();
        let mass: f64 = a.iter().map(|&i| pi[i]).sum();
        let pa: Vec<f64> = a.iter().map(|&i| pi[i] / mass).collect();
        prop_assert!(stationarity_residual(&s, &pa) < 1e-12);
        let reduced = c.reduced_invariant(&a).unwrap();
        for (x, y) in reduced.iter().zip(&pa) {
            prop_assert!((x - y).abs() < 1e-12);
        }
    }

    #[test]
    fn burke_form_makes_every_labeling_lumpable(
        u in prop::collection::vec(1u32..20, 2..=5),
        c1 in 0.05f64..1.0,
        keys in prop::collection::vec(0usize..3, 5),
    ) {
        let n = u.len();
        let s: u32 = u.iter().sum();
        let u: Vec<f64> = u.iter().map(|&x| x as f64 / s as f64).collect();
        let p: Mat = (0..n)
            .map(|i| (0..n).map(|j| c1 * u[j] + if i == j { 1.0 - c1 } else { 0.0 }).collect())
            .collect();
        let c = MarkovChain::with_index_states(p).unwrap();
        let form = c.check_burke_form().expect("built in Burke form");
        prop_assert!(form.residual < 1e-12);
        let g = Labeling::from_keys(&keys[..n]);
        prop_assert!(c.is_lumpable(&g));
        let dp = data_processing(&c, &g).unwrap();
        prop_assert!(dp.h_lumped <= dp.h_chain + 1e-12);
    }

    #[test]
    fn bounds_bracket_and_tighten(w in int_chain(), keys in prop::collection::vec(0usize..2, 5)) {
        let c = MarkovChain::with_index_states(float_rows(&rational_rows(&w))).unwrap();
        let g = Labeling::from_keys(&keys[..c.len()]);
        prop_assume!(g.num_blocks() > 1);
        let profile = bound_profile(&c, &g, 6, BoundsConfig::default()).unwrap();
        for b in &profile {
            prop_assert!(b.lower <= b.upper + 1e-12);
        }
        for w in profile.windows(2) {
            prop_assert!(w[1].lower >= w[0].lower - 1e-12);
            prop_assert!(w[1].upper <= w[0].upper + 1e-12);
        }
        // A function of the chain never has a larger entropy rate.
        let h = entropy_rate(&c).unwrap();
        prop_assert!(profile.last().unwrap().lower <= h + 1e-12);
    }
}

#[test]
fn lumpable_bounds_are_exact_and_match_the_lumped_chain() {
    let c = MarkovChain::with_index_states(vec![
        vec![0.5, 0.2, 0.3],
        vec![0.1, 0.6, 0.3],
        vec![0.4, 0.3, 0.3],
    ])
    .unwrap();
    let g = Labeling::from_keys(&[0, 0, 1]);
    assert!(c.is_lumpable(&g));
    let b = quotient_entropy_rate_bounds(&c, &g, 4).unwrap();
    assert!(b.exact);
    let lumped = c.lump(&g).unwrap();
    let h = entropy_rate(&lumped).unwrap();
    assert!((b.lower - h).abs() < 1e-12 && (b.upper - h).abs() < 1e-12);
    // Without the lumpable shortcut the depth bounds close onto the same value.
    let profile = bound_profile(&c, &g, 8, BoundsConfig::default()).unwrap();
    let last = profile.last().unwrap();
    assert!(last.lower <= h + 1e-12 && h <= last.upper + 1e-12);
    assert!(last.upper - last.lower < 1e-9);
}

#[test]
fn iid_chain_rate_is_marginal_entropy() {
    let row = vec![0.1, 0.2, 0.3, 0.4];
    let c = MarkovChain::with_index_states(vec![row.clone(); 4]).unwrap();
    let h = entropy_rate(&c).unwrap();
    assert!((h - entropy(&row)).abs() < 1e-12);
    let pi = c.invariant_distribution().unwrap();
    assert!((conditional_entropy(c.matrix(), &pi) - h).abs() < 1e-15);
}
