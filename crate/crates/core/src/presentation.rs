//! Discrete functions and their sum presentations `g = h(sum_t k_t(x_t))`
//! over a finite ring, plus the sum process they induce on a joint chain.

use std::collections::BTreeSet;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::markov::{quotient_entropy_rate_bounds, EntropyRateBounds, Labeling, MarkovChain};
use crate::ring::{Elem, FiniteRing};

/// A total function on `X_1 x ... x X_s`, stored as a dense table with the
/// first argument most significant.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct FunctionSpec {
    alphabets: Vec<Vec<String>>,
    codomain: Vec<String>,
    table: Vec<usize>,
}

impl FunctionSpec {
    pub fn new(alphabets: Vec<Vec<String>>, codomain: Vec<String>, table: Vec<usize>) -> Result<FunctionSpec> {
        if alphabets.is_empty() || alphabets.iter().any(|a| a.is_empty()) {
            return Err(Error::InvalidPresentation("every alphabet must be non-empty".into()));
        }
        let size: usize = alphabets.iter().map(Vec::len).product();
        if table.len() != size {
            return Err(Error::InvalidPresentation(format!(
                "table has {} entries, domain has {size}",
                table.len()
            )));
        }
        if table.iter().any(|&v| v >= codomain.len()) {
            return Err(Error::InvalidPresentation("table value outside the codomain".into()));
        }
        Ok(FunctionSpec {
            alphabets,
            codomain,
            table,
        })
    }

    pub fn from_fn(
        alphabets: Vec<Vec<String>>,
        codomain: Vec<String>,
        f: impl Fn(&[usize]) -> usize,
    ) -> Result<FunctionSpec> {
        let sizes: Vec<usize> = alphabets.iter().map(Vec::len).collect();
        let table = tuples(&sizes).map(|x| f(&x)).collect();
        FunctionSpec::new(alphabets, codomain, table)
    }

    pub fn arity(&self) -> usize {
        self.alphabets.len()
    }

    pub fn alphabets(&self) -> &[Vec<String>] {
        &self.alphabets
    }

    pub fn codomain(&self) -> &[String] {
        &self.codomain
    }

    pub fn table(&self) -> &[usize] {
        &self.table
    }

    pub fn sizes(&self) -> Vec<usize> {
        self.alphabets.iter().map(Vec::len).collect()
    }

    pub fn index(&self, x: &[usize]) -> usize {
        x.iter()
            .zip(&self.alphabets)
            .fold(0, |acc, (&xi, a)| acc * a.len() + xi)
    }

    pub fn eval(&self, x: &[usize]) -> usize {
        self.table[self.index(x)]
    }

    pub fn domain(&self) -> impl Iterator<Item = Vec<usize>> {
        tuples(&self.sizes())
    }

    /// Decodes a joint-state label like `(0,1,1)` into alphabet indices.
    pub fn parse_tuple(&self, label: &str) -> Result<Vec<usize>> {
        let body = label.trim();
        let body = body
            .strip_prefix('(')
            .and_then(|b| b.strip_suffix(')'))
            .unwrap_or(body);
        let parts: Vec<&str> = body.split(',').map(str::trim).collect();
        if parts.len() != self.arity() {
            return Err(Error::InvalidLabeling(format!(
                "state {label:?} does not have {} components",
                self.arity()
            )));
        }
        parts
            .iter()
            .zip(&self.alphabets)
            .map(|(p, a)| {
                a.iter()
                    .position(|s| s == p)
                    .ok_or_else(|| Error::InvalidLabeling(format!("{p:?} is not in the alphabet {a:?}")))
            })
            .collect()
    }
}

/// All tuples of the given radices in lexicographic order.
pub fn tuples(sizes: &[usize]) -> impl Iterator<Item = Vec<usize>> {
    let total: usize = sizes.iter().product();
    let sizes = sizes.to_vec();
    (0..total).map(move |mut v| {
        let mut x = vec![0; sizes.len()];
        for (slot, &s) in x.iter_mut().zip(&sizes).rev() {
            *slot = v % s;
            v /= s;
        }
        x
    })
}

/// `(R, {k_t}, h)`. `h` is partial: `None` marks ring elements outside the
/// reachable sum set.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Presentation {
    pub ring: FiniteRing,
    pub k: Vec<Vec<Elem>>,
    pub h: Vec<Option<usize>>,
}

impl Presentation {
    pub fn new(ring: FiniteRing, k: Vec<Vec<Elem>>, h: Vec<Option<usize>>) -> Result<Presentation> {
        let m = ring.order();
        if h.len() != m {
            return Err(Error::InvalidPresentation(format!("h has {} entries, ring has {m}", h.len())));
        }
        if k.iter().flatten().any(|&e| e >= m) {
            return Err(Error::InvalidPresentation("k maps outside the ring".into()));
        }
        Ok(Presentation { ring, k, h })
    }

    pub fn sum(&self, x: &[usize]) -> Elem {
        x.iter()
            .zip(&self.k)
            .fold(self.ring.zero(), |acc, (&xi, kt)| self.ring.add(acc, kt[xi]))
    }

    /// Sorted set `S = {sum_t k_t(x_t)}` over the product domain.
    pub fn reachable_sums(&self) -> Vec<Elem> {
        let sizes: Vec<usize> = self.k.iter().map(Vec::len).collect();
        let s: BTreeSet<Elem> = tuples(&sizes).map(|x| self.sum(&x)).collect();
        s.into_iter().collect()
    }

    /// Restricts `h` to the reachable set, marking everything else unreached.
    pub fn trimmed(mut self) -> Presentation {
        let reach = self.reachable_sums();
        for (e, v) in self.h.iter_mut().enumerate() {
            if reach.binary_search(&e).is_err() {
                *v = None;
            }
        }
        self
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct PresentationCheck {
    pub valid: bool,
    pub counterexample: Option<Vec<usize>>,
}

/// Exhaustive check of `g(x) = h(sum_t k_t(x_t))`.
pub fn verify_presentation(g: &FunctionSpec, p: &Presentation) -> PresentationCheck {
    let shapes_ok = p.k.len() == g.arity()
        && p.k.iter().zip(g.alphabets()).all(|(kt, a)| kt.len() == a.len());
    if !shapes_ok {
        return PresentationCheck {
            valid: false,
            counterexample: None,
        };
    }
    let bad = g.domain().find(|x| p.h[p.sum(x)] != Some(g.eval(x)));
    PresentationCheck {
        valid: bad.is_none(),
        counterexample: bad,
    }
}

/// Presentation over `(Z_p)^s` with `x_t` placed in coordinate `t`.
pub fn canonical_presentation(g: &FunctionSpec, p: usize) -> Result<Presentation> {
    if !crate::ring::is_prime(p) {
        return Err(Error::InvalidRing(format!("{p} is not prime")));
    }
    let sizes = g.sizes();
    if let Some(&big) = sizes.iter().find(|&&sz| sz > p) {
        return Err(Error::InvalidPresentation(format!("alphabet of size {big} does not fit in Z{p}")));
    }
    let zp = FiniteRing::modular(p)?;
    let mut ring = zp.clone();
    for _ in 1..sizes.len() {
        ring = FiniteRing::product(&ring, &zp);
    }
    let s = sizes.len();
    // Product indices are mixed-radix with the first factor most significant.
    let weight = |t: usize| p.pow((s - 1 - t) as u32);
    let k: Vec<Vec<Elem>> = sizes
        .iter()
        .enumerate()
        .map(|(t, &sz)| (0..sz).map(|x| x * weight(t)).collect())
        .collect();
    let mut h = vec![None; ring.order()];
    for x in g.domain() {
        let e: usize = x.iter().enumerate().map(|(t, &xt)| xt * weight(t)).sum();
        h[e] = Some(g.eval(&x));
    }
    Presentation::new(ring, k, h)
}

/// True when `h` restricted to the reachable sums is injective.
pub fn injectivity_obstruction_check(p: &Presentation) -> bool {
    let reach = p.reachable_sums();
    let image: BTreeSet<Option<usize>> = reach.iter().map(|&e| p.h[e]).collect();
    image.len() == reach.len()
}

/// Per-state ring elements `sum_t k_t(x_t)` of a joint chain.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct SumLabeling {
    pub labeling: Labeling,
    /// Ring element of each state.
    pub sums: Vec<Elem>,
    /// Ring element of each block.
    pub elems: Vec<Elem>,
}

pub fn induced_sum_labeling(joint: &MarkovChain, g: &FunctionSpec, p: &Presentation) -> Result<SumLabeling> {
    let sums: Vec<Elem> = joint
        .states()
        .iter()
        .map(|s| g.parse_tuple(s).map(|x| p.sum(&x)))
        .collect::<Result<_>>()?;
    let elems: Vec<Elem> = sums.iter().copied().collect::<BTreeSet<_>>().into_iter().collect();
    let assign = sums
        .iter()
        .map(|e| elems.binary_search(e).expect("present"))
        .collect();
    let names = elems.iter().map(|&e| p.ring.label(e).to_string()).collect();
    Ok(SumLabeling {
        labeling: Labeling::new(assign, names)?,
        sums,
        elems,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "mode", rename_all = "kebab-case")]
pub enum SumProcess {
    /// The sum process is Markov; `chain` has one state per element in `elems`.
    Lumped {
        chain: MarkovChain,
        elems: Vec<Elem>,
        via_burke: bool,
    },
    /// Not certified Markov; only truncated entropy-rate bounds are available.
    Bounded {
        labeling: SumLabeling,
        bounds: EntropyRateBounds,
    },
}

/// The `Z = sum_t k_t(X_t)` process of a joint chain.
pub fn sum_process_chain(
    joint: &MarkovChain,
    g: &FunctionSpec,
    p: &Presentation,
    depth: usize,
) -> Result<SumProcess> {
    if !joint.is_irreducible() {
        return Err(Error::Reducible);
    }
    let lab = induced_sum_labeling(joint, g, p)?;
    let via_burke = joint.check_burke_form().is_some();
    if !joint.is_lumpable(&lab.labeling) {
        let bounds = quotient_entropy_rate_bounds(joint, &lab.labeling, depth)?;
        return Ok(SumProcess::Bounded { labeling: lab, bounds });
    }
    let lumped = joint.lump(&lab.labeling)?;
    let pi = lumped.invariant_distribution()?;
    let keep: Vec<usize> = (0..lumped.len()).filter(|&i| pi[i] > 0.0).collect();
    let (chain, elems) = if keep.len() == lumped.len() {
        (lumped, lab.elems)
    } else {
        let states = keep.iter().map(|&i| lumped.states()[i].clone()).collect();
        let m = keep
            .iter()
            .map(|&i| keep.iter().map(|&j| lumped.prob(i, j)).collect())
            .collect();
        (
            MarkovChain::renormalized(states, m)?,
            keep.iter().map(|&i| lab.elems[i]).collect(),
        )
    };
    Ok(SumProcess::Lumped {
        chain,
        elems,
        via_burke,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn bits(s: usize) -> Vec<Vec<String>> {
        vec![vec!["0".into(), "1".into()]; s]
    }

    fn labels(n: usize) -> Vec<String> {
        (0..n).map(|i| i.to_string()).collect()
    }

    #[test]
    fn min_over_z3() {
        let g = FunctionSpec::from_fn(bits(2), labels(2), |x| x[0].min(x[1])).unwrap();
        let z3 = FiniteRing::modular(3).unwrap();
        // h(z) = z - z^2 on the sums {0, 1, 2}: 0, 0, 2 - 4 = 1 (mod 3).
        let p = Presentation::new(z3, vec![vec![0, 1], vec![0, 1]], vec![Some(0), Some(0), Some(1)]).unwrap();
        assert!(verify_presentation(&g, &p).valid);
        assert!(!injectivity_obstruction_check(&p));
    }

    #[test]
    fn weighted_sum_over_z4() {
        let g = FunctionSpec::from_fn(bits(3), labels(4), |x| (x[0] + 2 * x[1] + 3 * x[2]) % 4).unwrap();
        let z4 = FiniteRing::modular(4).unwrap();
        let p = Presentation::new(z4, vec![vec![0, 1], vec![0, 2], vec![0, 3]], (0..4).map(Some).collect()).unwrap();
        assert!(verify_presentation(&g, &p).valid);
        assert!(injectivity_obstruction_check(&p));
        assert_eq!(p.reachable_sums(), vec![0, 1, 2, 3]);
        let mut wrong = p.clone();
        wrong.h[3] = Some(1);
        let check = verify_presentation(&g, &wrong);
        assert!(!check.valid && check.counterexample.is_some());
    }

    #[test]
    fn canonical_presentations_verify() {
        let id = FunctionSpec::from_fn(bits(1), labels(2), |x| x[0]).unwrap();
        let p = canonical_presentation(&id, 2).unwrap();
        assert!(verify_presentation(&id, &p).valid);
        assert!(injectivity_obstruction_check(&p));
        let min = FunctionSpec::from_fn(bits(2), labels(2), |x| x[0].min(x[1])).unwrap();
        let p = canonical_presentation(&min, 2).unwrap();
        assert_eq!(p.ring.order(), 4);
        assert!(verify_presentation(&min, &p).valid);
        let g = FunctionSpec::from_fn(bits(3), labels(4), |x| (x[0] + 2 * x[1] + 3 * x[2]) % 4).unwrap();
        let p = canonical_presentation(&g, 2).unwrap();
        assert_eq!(p.ring.order(), 8);
        assert!(verify_presentation(&g, &p).valid);
        assert!(canonical_presentation(&g, 4).is_err());
        let wide = FunctionSpec::from_fn(vec![labels(3)], labels(3), |x| x[0]).unwrap();
        assert!(canonical_presentation(&wide, 2).is_err());
    }

    #[test]
    fn tuple_parsing() {
        let g = FunctionSpec::from_fn(bits(3), labels(2), |x| x[0]).unwrap();
        assert_eq!(g.parse_tuple("(1, 0,1)").unwrap(), vec![1, 0, 1]);
        assert!(g.parse_tuple("(1,0)").is_err());
        assert!(g.parse_tuple("(1,0,2)").is_err());
        let one = FunctionSpec::from_fn(bits(1), labels(2), |x| x[0]).unwrap();
        assert_eq!(one.parse_tuple("1").unwrap(), vec![1]);
    }

    #[test]
    fn iid_joint_lumps() {
        let g = FunctionSpec::from_fn(bits(2), labels(3), |x| x[0] + x[1]).unwrap();
        let z3 = FiniteRing::modular(3).unwrap();
        let p = Presentation::new(z3, vec![vec![0, 1], vec![0, 1]], (0..3).map(Some).collect()).unwrap();
        let row = vec![0.1, 0.2, 0.3, 0.4];
        let joint = MarkovChain::new(
            vec!["(0,0)".into(), "(0,1)".into(), "(1,0)".into(), "(1,1)".into()],
            vec![row; 4],
        )
        .unwrap();
        match sum_process_chain(&joint, &g, &p, 4).unwrap() {
            SumProcess::Lumped { chain, elems, via_burke } => {
                assert!(via_burke);
                assert_eq!(elems, vec![0, 1, 2]);
                assert!((chain.prob(0, 1) - 0.5).abs() < 1e-12);
            }
            other => panic!("expected a lumped chain, got {other:?}"),
        }
    }
}
