//! Achievable rates for linear coding over finite rings.
//!
//! Every rate is built from the same per-ideal record: the scale factor
//! `log|R| / log|I|`, the block-diagonal complement entropy of the coset
//! partition, and `H(P|pi)` minus the entropy rate of the coset process. The
//! rate threshold is the maximum over non-zero left ideals of the scaled
//! minimum. When the coset process is not known to be Markov its rate is only
//! bracketed, so terms are carried as intervals.

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::markov::{
    blockdiag_complement_entropy, entropy_rate, quotient_entropy_rate_bounds, EntropyRateBounds, Labeling,
    MarkovChain,
};
use crate::presentation::{injectivity_obstruction_check, sum_process_chain, FunctionSpec, Presentation, SumProcess};
use crate::ring::{enumerate_left_ideals, quotient_partition, Elem, FiniteRing};

/// Default cap on `|R|` for the injection sweep.
pub const INJECTION_ORDER_BOUND: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
}

impl Interval {
    pub fn point(x: f64) -> Interval {
        Interval { lo: x, hi: x }
    }

    pub fn is_exact(&self) -> bool {
        self.lo == self.hi
    }

    pub fn width(&self) -> f64 {
        self.hi - self.lo
    }

    fn scale(self, s: f64) -> Interval {
        Interval {
            lo: self.lo * s,
            hi: self.hi * s,
        }
    }

    fn min_with(self, x: f64) -> Interval {
        Interval {
            lo: self.lo.min(x),
            hi: self.hi.min(x),
        }
    }

    fn max(self, o: Interval) -> Interval {
        Interval {
            lo: self.lo.max(o.lo),
            hi: self.hi.max(o.hi),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IdealTerm {
    /// Labels of the ideal's members.
    pub ideal: Vec<String>,
    pub ideal_order: usize,
    pub scale: f64,
    /// `H(S_{R/I} | pi)`; absent when the source process is not Markov.
    pub term_complement: Option<f64>,
    /// `H(P|pi)` minus the coset-process entropy rate.
    pub term_quotient: Interval,
    pub quotient_exact: bool,
    pub scaled_complement: Option<f64>,
    pub scaled_quotient: Interval,
    pub min_term: Interval,
    pub scaled_term: Interval,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct InjectionRate {
    /// Ring element assigned to each source symbol.
    pub injection: Vec<Elem>,
    pub r0: Interval,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RateRegionReport {
    pub ring: String,
    pub ring_order: usize,
    pub is_field: bool,
    /// Entropy rate of the encoded process.
    pub entropy_rate: Interval,
    pub terms: Vec<IdealTerm>,
    pub r0: Interval,
    /// Indices into `terms` attaining the maximum.
    pub argmax: Vec<usize>,
    pub exact: bool,
    pub depth: usize,
    pub injection: Option<Vec<Elem>>,
    pub injection_rates: Vec<InjectionRate>,
}

impl RateRegionReport {
    /// Smallest `k` with `k log|R| / n > R0`, using the upper end of `R0`.
    pub fn min_code_length(&self, n: usize) -> usize {
        let need = n as f64 * self.r0.hi / (self.ring_order as f64).log2();
        (need.floor() as usize + 1).min(n)
    }
}

/// Per-ideal terms for a Markov chain whose state `i` sits at ring element `elem_of[i]`.
fn markov_report(
    ring: &FiniteRing,
    c: &MarkovChain,
    elem_of: &[Elem],
    depth: usize,
) -> Result<RateRegionReport> {
    let h = entropy_rate(c)?;
    let ideals = enumerate_left_ideals(ring)?;
    let log_r = (ring.order() as f64).log2();
    let mut terms = Vec::new();
    for ideal in ideals.iter().filter(|i| !i.is_zero()) {
        let q = quotient_partition(ring, ideal);
        let keys: Vec<usize> = elem_of.iter().map(|&e| q.coset_of(e)).collect();
        let lab = Labeling::from_keys(&keys);
        let complement = blockdiag_complement_entropy(c, &lab.blocks())?;
        let b = quotient_entropy_rate_bounds(c, &lab, depth)?;
        let quotient = Interval {
            lo: (h - b.upper).max(0.0),
            hi: (h - b.lower).max(0.0),
        };
        let scale = log_r / (ideal.len() as f64).log2();
        let min_term = quotient.min_with(complement);
        terms.push(IdealTerm {
            ideal: ideal.members().iter().map(|&e| ring.label(e).to_string()).collect(),
            ideal_order: ideal.len(),
            scale,
            term_complement: Some(complement),
            term_quotient: quotient,
            quotient_exact: b.exact,
            scaled_complement: Some(scale * complement),
            scaled_quotient: quotient.scale(scale),
            min_term,
            scaled_term: min_term.scale(scale),
        });
    }
    Ok(finish(ring, Interval::point(h), terms, depth))
}

/// Quotient-branch terms when only a hidden process `Z = z_of(X)` is available.
fn bounded_report(
    ring: &FiniteRing,
    c: &MarkovChain,
    z_of: &[Elem],
    z_bounds: EntropyRateBounds,
    depth: usize,
) -> Result<RateRegionReport> {
    let ideals = enumerate_left_ideals(ring)?;
    let log_r = (ring.order() as f64).log2();
    let mut terms = Vec::new();
    for ideal in ideals.iter().filter(|i| !i.is_zero()) {
        let q = quotient_partition(ring, ideal);
        let keys: Vec<usize> = z_of.iter().map(|&e| q.coset_of(e)).collect();
        let b = quotient_entropy_rate_bounds(c, &Labeling::from_keys(&keys), depth)?;
        let quotient = Interval {
            lo: (z_bounds.lower - b.upper).max(0.0),
            hi: (z_bounds.upper - b.lower).max(0.0),
        };
        let scale = log_r / (ideal.len() as f64).log2();
        terms.push(IdealTerm {
            ideal: ideal.members().iter().map(|&e| ring.label(e).to_string()).collect(),
            ideal_order: ideal.len(),
            scale,
            term_complement: None,
            term_quotient: quotient,
            quotient_exact: false,
            scaled_complement: None,
            scaled_quotient: quotient.scale(scale),
            min_term: quotient,
            scaled_term: quotient.scale(scale),
        });
    }
    let h = Interval {
        lo: z_bounds.lower,
        hi: z_bounds.upper,
    };
    Ok(finish(ring, h, terms, depth))
}

fn finish(ring: &FiniteRing, h: Interval, terms: Vec<IdealTerm>, depth: usize) -> RateRegionReport {
    let r0 = terms
        .iter()
        .map(|t| t.scaled_term)
        .fold(Interval::point(0.0), Interval::max);
    let argmax = terms
        .iter()
        .enumerate()
        .filter(|(_, t)| t.scaled_term.hi >= r0.hi - 1e-12)
        .map(|(i, _)| i)
        .collect();
    let exact = h.is_exact() && terms.iter().all(|t| t.scaled_term.is_exact());
    RateRegionReport {
        ring: ring.name().to_string(),
        ring_order: ring.order(),
        is_field: ring.is_field(),
        entropy_rate: h,
        terms,
        r0,
        argmax,
        exact,
        depth,
        injection: None,
        injection_rates: Vec::new(),
    }
}

/// Rate threshold for a chain whose states are the ring elements, in index order.
pub fn single_source_rate(ring: &FiniteRing, c: &MarkovChain, depth: usize) -> Result<RateRegionReport> {
    if c.len() != ring.order() {
        return Err(Error::Dimension(format!(
            "chain has {} states, ring has {} elements",
            c.len(),
            ring.order()
        )));
    }
    if !c.is_irreducible() {
        return Err(Error::Reducible);
    }
    let id: Vec<Elem> = (0..ring.order()).collect();
    markov_report(ring, c, &id, depth)
}

/// Rate for symbols placed into the ring by `injection` (state `i` to `injection[i]`).
pub fn injected_rate(ring: &FiniteRing, c: &MarkovChain, injection: &[Elem], depth: usize) -> Result<RateRegionReport> {
    let mut seen = vec![false; ring.order()];
    if injection.len() != c.len() || injection.iter().any(|&e| e >= ring.order() || std::mem::replace(&mut seen[e], true)) {
        return Err(Error::Dimension("injection must map states to distinct ring elements".into()));
    }
    let mut rep = markov_report(ring, c, injection, depth)?;
    rep.injection = Some(injection.to_vec());
    Ok(rep)
}

fn injections(m: usize, k: usize) -> Vec<Vec<Elem>> {
    let mut out = Vec::new();
    let mut cur = Vec::with_capacity(k);
    let mut used = vec![false; m];
    fn rec(m: usize, k: usize, cur: &mut Vec<Elem>, used: &mut [bool], out: &mut Vec<Vec<Elem>>) {
        if cur.len() == k {
            out.push(cur.clone());
            return;
        }
        for e in 0..m {
            if !used[e] {
                used[e] = true;
                cur.push(e);
                rec(m, k, cur, used, out);
                cur.pop();
                used[e] = false;
            }
        }
    }
    rec(m, k, &mut cur, &mut used, &mut out);
    out
}

/// Sweeps every injection of the alphabet into the ring and keeps the best.
pub fn injection_search_rate(ring: &FiniteRing, c: &MarkovChain, depth: usize) -> Result<RateRegionReport> {
    injection_search_rate_bounded(ring, c, depth, INJECTION_ORDER_BOUND)
}

pub fn injection_search_rate_bounded(
    ring: &FiniteRing,
    c: &MarkovChain,
    depth: usize,
    bound: usize,
) -> Result<RateRegionReport> {
    if ring.order() > bound {
        return Err(Error::OrderBound {
            order: ring.order(),
            bound,
        });
    }
    if c.len() > ring.order() {
        return Err(Error::Dimension("alphabet larger than the ring".into()));
    }
    if !c.is_irreducible() {
        return Err(Error::Reducible);
    }
    let all = injections(ring.order(), c.len());
    let reports: Vec<RateRegionReport> = all
        .par_iter()
        .map(|phi| injected_rate(ring, c, phi, depth))
        .collect::<Result<_>>()?;
    let rates = reports
        .iter()
        .map(|r| InjectionRate {
            injection: r.injection.clone().expect("set"),
            r0: r.r0,
        })
        .collect();
    let mut best = reports
        .into_iter()
        .min_by(|a, b| a.r0.hi.total_cmp(&b.r0.hi))
        .expect("at least one injection");
    best.injection_rates = rates;
    Ok(best)
}

/// Symmetric-rate threshold for computing `g` with identical encoders.
pub fn computing_rate(g: &FunctionSpec, p: &Presentation, joint: &MarkovChain, depth: usize) -> Result<RateRegionReport> {
    match sum_process_chain(joint, g, p, depth)? {
        SumProcess::Lumped { chain, elems, .. } => markov_report(&p.ring, &chain, &elems, depth),
        SumProcess::Bounded { labeling, bounds } => {
            bounded_report(&p.ring, joint, &labeling.sums, bounds, depth)
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CoverConstraint {
    /// Zero-based source indices in `T`.
    pub subset: Vec<usize>,
    /// Lower limit on `sum_{t in T} R_t`.
    pub bound: Interval,
    pub exact: bool,
}

/// Sum-rate constraints `sum_{t in T} R_t > H(P|pi) - rate(X_{T^c})` for
/// every non-empty `T`. States must be tuple labels like `(0,1)`.
pub fn cover_region(joint: &MarkovChain, depth: usize) -> Result<Vec<CoverConstraint>> {
    let comps: Vec<Vec<String>> = joint
        .states()
        .iter()
        .map(|s| {
            let b = s.trim();
            let b = b.strip_prefix('(').and_then(|b| b.strip_suffix(')')).unwrap_or(b);
            b.split(',').map(|x| x.trim().to_string()).collect()
        })
        .collect();
    let s = comps[0].len();
    if comps.iter().any(|c| c.len() != s) {
        return Err(Error::InvalidLabeling("joint states have differing arity".into()));
    }
    let h = entropy_rate(joint)?;
    let mut out = Vec::new();
    for mask in 1u32..(1 << s) {
        let t: Vec<usize> = (0..s).filter(|&i| mask >> i & 1 == 1).collect();
        let rest: Vec<usize> = (0..s).filter(|&i| mask >> i & 1 == 0).collect();
        let (bound, exact) = if rest.is_empty() {
            (Interval::point(h), true)
        } else {
            let keys: Vec<Vec<String>> = comps
                .iter()
                .map(|c| rest.iter().map(|&i| c[i].clone()).collect())
                .collect();
            let keys: Vec<String> = keys.into_iter().map(|k| k.join(",")).collect();
            let b = quotient_entropy_rate_bounds(joint, &Labeling::from_keys(&keys), depth)?;
            (
                Interval {
                    lo: h - b.upper,
                    hi: h - b.lower,
                },
                b.exact,
            )
        };
        out.push(CoverConstraint { subset: t, bound, exact });
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PresentationOutcome {
    pub ring: String,
    pub report: RateRegionReport,
    /// Whether `h` is injective on the reachable sums.
    pub injective_on_reachable: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Comparison {
    pub outcomes: Vec<PresentationOutcome>,
    /// Indices with the smallest `R0` upper end.
    pub best: Vec<usize>,
}

/// `R0` for each presentation; ranking uses the upper end of each interval.
pub fn compare_presentations(
    g: &FunctionSpec,
    presentations: &[Presentation],
    joint: &MarkovChain,
    depth: usize,
) -> Result<Comparison> {
    if presentations.is_empty() {
        return Err(Error::InvalidPresentation("nothing to compare".into()));
    }
    let mut outcomes = Vec::new();
    for p in presentations {
        let check = crate::presentation::verify_presentation(g, p);
        if !check.valid {
            return Err(Error::InvalidPresentation(format!(
                "presentation over {} fails at {:?}",
                p.ring.name(),
                check.counterexample
            )));
        }
        outcomes.push(PresentationOutcome {
            ring: p.ring.name().to_string(),
            report: computing_rate(g, p, joint, depth)?,
            injective_on_reachable: injectivity_obstruction_check(p),
        });
    }
    let lowest = outcomes.iter().map(|o| o.report.r0.hi).fold(f64::INFINITY, f64::min);
    let best = outcomes
        .iter()
        .enumerate()
        .filter(|(_, o)| o.report.r0.hi <= lowest + 1e-12)
        .map(|(i, _)| i)
        .collect();
    Ok(Comparison { outcomes, best })
}
