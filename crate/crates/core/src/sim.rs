//! Monte Carlo runs of random linear encoding over a ring.
//!
//! Each trial draws a source path and a fresh uniform matrix `A`, encodes
//! `z = A x`, and decodes within the solution set `{y : A y = z}`. The
//! maximum-likelihood decoder runs a Viterbi pass over a trellis whose state is
//! the partial syndrome plus the previous symbol, which is the same maximum
//! as a scan of the whole solution coset without enumerating it.

use std::collections::{BTreeMap, HashMap};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::markov::MarkovChain;
use crate::presentation::{sum_process_chain, verify_presentation, FunctionSpec, Presentation, SumProcess};
use crate::ring::{apply_unchecked, random_linear_map, Elem, FiniteRing, RingMatrix};
use crate::typicality::{sample_path, ChainSchedule, Scratch, SubsetFamily, SupremusTester, TransitionSource, TypicalityMode};

/// Largest `|R|^n` that exhaustive coset enumeration will walk.
pub const COSET_BUDGET: f64 = 1e7;
/// Largest `n |R|^(k+1)` trellis the ML decoder will build.
pub const TRELLIS_BUDGET: f64 = 4e6;

const TIE_TOL: f64 = 1e-9;

fn pow(m: usize, e: usize) -> f64 {
    (m as f64).powi(e as i32)
}

fn check_coset_budget(m: usize, n: usize) -> Result<()> {
    let size = pow(m, n);
    if size > COSET_BUDGET {
        return Err(Error::Budget {
            size,
            budget: COSET_BUDGET,
        });
    }
    Ok(())
}

/// Syndromes as base-`|R|` integers, with precomputed column additions.
struct Syndromes {
    m: usize,
    count: usize,
    /// `shift[j][y][s]` = index of `s + a_j y`.
    shift: Vec<Vec<Vec<u32>>>,
}

impl Syndromes {
    fn new(ring: &FiniteRing, a: &RingMatrix) -> Syndromes {
        let m = ring.order();
        let k = a.rows;
        let count = m.pow(k as u32);
        let decode = |mut s: usize| {
            let mut v = vec![0; k];
            for slot in v.iter_mut() {
                *slot = s % m;
                s /= m;
            }
            v
        };
        let encode = |v: &[Elem]| v.iter().rev().fold(0usize, |acc, &e| acc * m + e);
        let vectors: Vec<Vec<Elem>> = (0..count).map(decode).collect();
        let shift = (0..a.cols)
            .map(|j| {
                (0..m)
                    .map(|y| {
                        let col: Vec<Elem> = (0..k).map(|i| ring.mul(a.get(i, j), y)).collect();
                        vectors
                            .iter()
                            .map(|v| {
                                let w: Vec<Elem> = v.iter().zip(&col).map(|(&p, &q)| ring.add(p, q)).collect();
                                encode(&w) as u32
                            })
                            .collect()
                    })
                    .collect()
            })
            .collect();
        Syndromes { m, count, shift }
    }

    fn encode(&self, v: &[Elem]) -> usize {
        v.iter().rev().fold(0usize, |acc, &e| acc * self.m + e)
    }
}

/// Size of `A R^n`.
pub fn image_size(ring: &FiniteRing, a: &RingMatrix) -> Result<u64> {
    let cells = pow(ring.order(), a.rows) * a.cols as f64 * ring.order() as f64;
    if cells > TRELLIS_BUDGET {
        return Err(Error::Budget {
            size: cells,
            budget: TRELLIS_BUDGET,
        });
    }
    let syn = Syndromes::new(ring, a);
    let mut cur = vec![false; syn.count];
    cur[0] = true;
    for j in 0..a.cols {
        let mut next = vec![false; syn.count];
        for s in (0..syn.count).filter(|&s| cur[s]) {
            for y in 0..syn.m {
                next[syn.shift[j][y][s] as usize] = true;
            }
        }
        cur = next;
    }
    Ok(cur.iter().filter(|&&b| b).count() as u64)
}

/// `|ker A| = |R|^n / |A R^n|`.
pub fn kernel_size(ring: &FiniteRing, a: &RingMatrix) -> Result<u64> {
    let total = (ring.order() as u64).pow(a.cols as u32);
    Ok(total / image_size(ring, a)?)
}

/// Every `x` with `A x = z`, in lexicographic order.
pub fn solution_coset(ring: &FiniteRing, a: &RingMatrix, z: &[Elem]) -> Result<Vec<Vec<Elem>>> {
    if z.len() != a.rows {
        return Err(Error::Dimension("syndrome length differs from code length".into()));
    }
    let m = ring.order();
    let n = a.cols;
    check_coset_budget(m, n)?;
    let h = n / 2;
    let half = |lo: usize, hi: usize| -> Vec<(Vec<Elem>, Vec<Elem>)> {
        crate::presentation::tuples(&vec![m; hi - lo])
            .map(|u| {
                let mut x = vec![ring.zero(); n];
                x[lo..hi].copy_from_slice(&u);
                let s = apply_unchecked(ring, a, &x);
                (u, s)
            })
            .collect()
    };
    let left = half(0, h);
    let mut right: HashMap<Vec<Elem>, Vec<Vec<Elem>>> = HashMap::new();
    for (v, s) in half(h, n) {
        right.entry(s).or_default().push(v);
    }
    let mut out = Vec::new();
    for (u, su) in left {
        let need: Vec<Elem> = z.iter().zip(&su).map(|(&zi, &si)| ring.sub(zi, si)).collect();
        if let Some(vs) = right.get(&need) {
            for v in vs {
                let mut x = u.clone();
                x.extend_from_slice(v);
                out.push(x);
            }
        }
    }
    out.sort();
    Ok(out)
}

pub fn kernel(ring: &FiniteRing, a: &RingMatrix) -> Result<Vec<Vec<Elem>>> {
    solution_coset(ring, a, &vec![ring.zero(); a.rows])
}

/// Path log-probabilities of a chain whose states sit at ring elements,
/// started from its invariant distribution.
#[derive(Debug, Clone)]
pub struct SourceModel {
    log_init: Vec<f64>,
    log_p: Vec<Vec<f64>>,
}

impl SourceModel {
    pub fn new(ring: &FiniteRing, c: &MarkovChain, elems: &[Elem]) -> Result<SourceModel> {
        let m = ring.order();
        if elems.len() != c.len() || elems.iter().any(|&e| e >= m) {
            return Err(Error::Dimension("model states must map to ring elements".into()));
        }
        let pi = c.invariant_distribution()?;
        let mut log_init = vec![f64::NEG_INFINITY; m];
        let mut log_p = vec![vec![f64::NEG_INFINITY; m]; m];
        let mut seen = vec![false; m];
        for (i, &ei) in elems.iter().enumerate() {
            if std::mem::replace(&mut seen[ei], true) {
                return Err(Error::Dimension("two model states share a ring element".into()));
            }
            log_init[ei] = pi[i].log2();
            for (j, &ej) in elems.iter().enumerate() {
                log_p[ei][ej] = c.prob(i, j).log2();
            }
        }
        Ok(SourceModel { log_init, log_p })
    }

    pub fn log2_prob(&self, x: &[Elem]) -> f64 {
        let mut lp = self.log_init[x[0]];
        for w in x.windows(2) {
            lp += self.log_p[w[0]][w[1]];
        }
        lp
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MlDecode {
    /// Lexicographically smallest maximizer; `None` if the coset has no
    /// sequence of positive probability.
    pub path: Option<Vec<Elem>>,
    pub log2_prob: f64,
    /// Number of maximizers.
    pub ties: u64,
}

/// Maximum-probability member of `{y : A y = z}`.
pub fn ml_decode(ring: &FiniteRing, a: &RingMatrix, z: &[Elem], model: &SourceModel) -> Result<MlDecode> {
    let m = ring.order();
    let n = a.cols;
    if z.len() != a.rows {
        return Err(Error::Dimension("syndrome length differs from code length".into()));
    }
    let cells = pow(m, a.rows + 1) * n as f64;
    if cells > TRELLIS_BUDGET {
        return Err(Error::Budget {
            size: cells,
            budget: TRELLIS_BUDGET,
        });
    }
    let syn = Syndromes::new(ring, a);
    let target = syn.encode(z);
    let width = syn.count * m;
    // v[j][s*m + y]: best log-probability of completing positions j+1.. given
    // syndrome s after position j with y there. c[j] counts the maximizers.
    let mut v = vec![vec![f64::NEG_INFINITY; width]; n];
    let mut c = vec![vec![0u64; width]; n];
    for s in 0..syn.count {
        if s == target {
            for y in 0..m {
                v[n - 1][s * m + y] = 0.0;
                c[n - 1][s * m + y] = 1;
            }
        }
    }
    for j in (0..n - 1).rev() {
        let (head, tail) = v.split_at_mut(j + 1);
        let (vj, vn) = (&mut head[j], &tail[0]);
        let (chead, ctail) = c.split_at_mut(j + 1);
        let (cj, cn) = (&mut chead[j], &ctail[0]);
        for s in 0..syn.count {
            for y in 0..m {
                let mut best = f64::NEG_INFINITY;
                let mut cnt = 0u64;
                for y2 in 0..m {
                    let s2 = syn.shift[j + 1][y2][s] as usize;
                    let val = model.log_p[y][y2] + vn[s2 * m + y2];
                    accumulate(&mut best, &mut cnt, val, cn[s2 * m + y2]);
                }
                vj[s * m + y] = best;
                cj[s * m + y] = cnt;
            }
        }
    }
    let mut best = f64::NEG_INFINITY;
    let mut ties = 0u64;
    for y in 0..m {
        let s = syn.shift[0][y][0] as usize;
        accumulate(&mut best, &mut ties, model.log_init[y] + v[0][s * m + y], c[0][s * m + y]);
    }
    if best == f64::NEG_INFINITY {
        return Ok(MlDecode {
            path: None,
            log2_prob: best,
            ties: 0,
        });
    }
    let mut path = Vec::with_capacity(n);
    let first = (0..m)
        .find(|&y| {
            let s = syn.shift[0][y][0] as usize;
            model.log_init[y] + v[0][s * m + y] >= best - TIE_TOL
        })
        .expect("maximizer exists");
    let mut s = syn.shift[0][first][0] as usize;
    path.push(first);
    for j in 0..n - 1 {
        let y = path[j];
        let here = v[j][s * m + y];
        let next = (0..m)
            .find(|&y2| {
                let s2 = syn.shift[j + 1][y2][s] as usize;
                model.log_p[y][y2] + v[j + 1][s2 * m + y2] >= here - TIE_TOL
            })
            .expect("maximizer continues");
        s = syn.shift[j + 1][next][s] as usize;
        path.push(next);
    }
    Ok(MlDecode {
        path: Some(path),
        log2_prob: best,
        ties,
    })
}

fn accumulate(best: &mut f64, cnt: &mut u64, val: f64, ways: u64) {
    if val == f64::NEG_INFINITY || ways == 0 {
        return;
    }
    if val > *best + TIE_TOL {
        *best = val;
        *cnt = ways;
    } else if val >= *best - TIE_TOL {
        *cnt = cnt.saturating_add(ways);
        if val > *best {
            *best = val;
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(tag = "outcome", rename_all = "kebab-case")]
pub enum TypicalityDecode {
    Decoded { path: Vec<Elem> },
    /// No member of the coset is typical.
    NoneTypical,
    /// More than one member is typical.
    Ambiguous { count: u64 },
}

/// Unique Supremus-typical member of `{y : A y = z}`. `state_of` maps ring
/// elements to the tester's states; unmapped elements are atypical.
pub fn typicality_decode(
    ring: &FiniteRing,
    a: &RingMatrix,
    z: &[Elem],
    tester: &SupremusTester,
    state_of: &[Option<usize>],
) -> Result<TypicalityDecode> {
    let coset = solution_coset(ring, a, z)?;
    let mut scratch = Scratch::default();
    let mut found: Option<Vec<Elem>> = None;
    let mut count = 0u64;
    let mut mapped = Vec::with_capacity(a.cols);
    for y in coset {
        mapped.clear();
        if !y.iter().all(|&e| match state_of[e] {
            Some(s) => {
                mapped.push(s);
                true
            }
            None => false,
        }) {
            continue;
        }
        if tester.is_typical_with(&mapped, &mut scratch) {
            count += 1;
            if found.is_none() {
                found = Some(y);
            }
        }
    }
    Ok(match (count, found) {
        (0, _) => TypicalityDecode::NoneTypical,
        (1, Some(path)) => TypicalityDecode::Decoded { path },
        (c, _) => TypicalityDecode::Ambiguous { count: c },
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum DecoderKind {
    MaxLikelihood,
    Typicality {
        eps: f64,
        #[serde(default)]
        mode: TypicalityMode,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimParams {
    pub n: usize,
    pub k: usize,
    pub trials: usize,
    pub decoder: DecoderKind,
    pub seed: u64,
}

impl SimParams {
    fn validate(&self) -> Result<()> {
        if self.n < 2 || self.k < 1 || self.trials < 1 {
            return Err(Error::Dimension("need n >= 2, k >= 1 and trials >= 1".into()));
        }
        if let DecoderKind::Typicality { eps, .. } = self.decoder {
            if !(eps > 0.0) {
                return Err(Error::Typicality("decoder eps must be positive".into()));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct SimResult {
    pub trials: u64,
    pub errors: u64,
    pub error_prob: f64,
    pub std_error: f64,
    /// Coding rate `(k/n) log2 |R|` in bits per symbol.
    pub rate: f64,
    /// ML decodes with more than one maximizer (counted as errors).
    pub ties: u64,
    /// Typicality decodes with no typical candidate.
    pub none_typical: u64,
    /// Typicality decodes with several typical candidates.
    pub ambiguous: u64,
    /// Kernel size of each drawn matrix, as a histogram.
    pub kernel_sizes: BTreeMap<u64, u64>,
    /// Trials where the summed codewords differed from the encoded sum path.
    pub identity_failures: u64,
}

#[derive(Debug, Clone, Default)]
struct Tally {
    trials: u64,
    errors: u64,
    ties: u64,
    none_typical: u64,
    ambiguous: u64,
    kernel_sizes: BTreeMap<u64, u64>,
    identity_failures: u64,
}

impl Tally {
    fn merge(mut self, o: Tally) -> Tally {
        self.trials += o.trials;
        self.errors += o.errors;
        self.ties += o.ties;
        self.none_typical += o.none_typical;
        self.ambiguous += o.ambiguous;
        self.identity_failures += o.identity_failures;
        for (k, v) in o.kernel_sizes {
            *self.kernel_sizes.entry(k).or_insert(0) += v;
        }
        self
    }

    fn finish(self, rate: f64) -> SimResult {
        let t = self.trials as f64;
        let p = self.errors as f64 / t;
        SimResult {
            trials: self.trials,
            errors: self.errors,
            error_prob: p,
            std_error: (p * (1.0 - p) / t).sqrt(),
            rate,
            ties: self.ties,
            none_typical: self.none_typical,
            ambiguous: self.ambiguous,
            kernel_sizes: self.kernel_sizes,
            identity_failures: self.identity_failures,
        }
    }
}

fn trial_rng(seed: u64, trial: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(trial as u64);
    rng
}

enum Decoder {
    Ml(SourceModel),
    Typ(SupremusTester, Vec<Option<usize>>),
}

impl Decoder {
    fn build(ring: &FiniteRing, model: &MarkovChain, elems: &[Elem], kind: DecoderKind) -> Result<Decoder> {
        Ok(match kind {
            DecoderKind::MaxLikelihood => Decoder::Ml(SourceModel::new(ring, model, elems)?),
            DecoderKind::Typicality { eps, mode } => {
                let t = SupremusTester::new(model, &SubsetFamily::AllSubsets, eps, mode)?;
                let mut state_of = vec![None; ring.order()];
                for (i, &e) in elems.iter().enumerate() {
                    state_of[e] = Some(i);
                }
                Decoder::Typ(t, state_of)
            }
        })
    }

    fn check_budget(&self, ring: &FiniteRing, p: &SimParams) -> Result<()> {
        match self {
            Decoder::Ml(_) => {
                let cells = pow(ring.order(), p.k + 1) * p.n as f64;
                if cells > TRELLIS_BUDGET {
                    return Err(Error::Budget {
                        size: cells,
                        budget: TRELLIS_BUDGET,
                    });
                }
                Ok(())
            }
            Decoder::Typ(t, _) => {
                if p.n < 2 * t.num_states() {
                    return Err(Error::Typicality("n is below twice the number of model states".into()));
                }
                check_coset_budget(ring.order(), p.n)
            }
        }
    }

    /// Decodes and updates the tally; returns the estimate when unique.
    fn decode(&self, ring: &FiniteRing, a: &RingMatrix, z: &[Elem], tally: &mut Tally) -> Result<Option<Vec<Elem>>> {
        match self {
            Decoder::Ml(model) => {
                let d = ml_decode(ring, a, z, model)?;
                if d.ties > 1 {
                    tally.ties += 1;
                    return Ok(None);
                }
                Ok(d.path)
            }
            Decoder::Typ(t, state_of) => match typicality_decode(ring, a, z, t, state_of)? {
                TypicalityDecode::Decoded { path } => Ok(Some(path)),
                TypicalityDecode::NoneTypical => {
                    tally.none_typical += 1;
                    Ok(None)
                }
                TypicalityDecode::Ambiguous { .. } => {
                    tally.ambiguous += 1;
                    Ok(None)
                }
            },
        }
    }
}

fn rate_of(ring: &FiniteRing, p: &SimParams) -> f64 {
    p.k as f64 / p.n as f64 * (ring.order() as f64).log2()
}

/// Single source over the ring: chain state `i` is ring element `i`.
pub fn run_single_source_sim(ring: &FiniteRing, chain: &MarkovChain, params: &SimParams) -> Result<SimResult> {
    params.validate()?;
    if chain.len() != ring.order() {
        return Err(Error::Dimension("chain states must be the ring elements".into()));
    }
    let elems: Vec<Elem> = (0..ring.order()).collect();
    let dec = Decoder::build(ring, chain, &elems, params.decoder)?;
    dec.check_budget(ring, params)?;
    let pi = chain.invariant_distribution()?;
    let tally = (0..params.trials)
        .into_par_iter()
        .map(|trial| -> Result<Tally> {
            let mut rng = trial_rng(params.seed, trial);
            let x = sample_path(chain, &pi, params.n, &mut rng)?;
            let a = random_linear_map(ring, params.k, params.n, &mut rng);
            let z = apply_unchecked(ring, &a, &x);
            let mut t = Tally {
                trials: 1,
                ..Tally::default()
            };
            *t.kernel_sizes.entry(kernel_size(ring, &a)?).or_insert(0) += 1;
            if dec.decode(ring, &a, &z, &mut t)?.as_deref() != Some(x.as_slice()) {
                t.errors += 1;
            }
            Ok(t)
        })
        .try_reduce(Tally::default, |a, b| Ok(a.merge(b)))?;
    Ok(tally.finish(rate_of(ring, params)))
}

/// Where joint symbols come from in a computing simulation.
#[derive(Debug, Clone, PartialEq)]
pub enum JointSource {
    Homogeneous(MarkovChain),
    Schedule(ChainSchedule),
}

impl TransitionSource for JointSource {
    fn num_states(&self) -> usize {
        match self {
            JointSource::Homogeneous(c) => c.len(),
            JointSource::Schedule(s) => s.num_states(),
        }
    }

    fn row(&self, t: usize, i: usize) -> &[f64] {
        match self {
            JointSource::Homogeneous(c) => TransitionSource::row(c, t, i),
            JointSource::Schedule(s) => s.row(t, i),
        }
    }
}

/// Everything needed to simulate computing `g` with identical encoders.
#[derive(Debug, Clone)]
pub struct ComputingSetup {
    pub function: FunctionSpec,
    pub presentation: Presentation,
    pub source: JointSource,
    pub init: Vec<f64>,
    /// Decoder model of the sum process; state `i` is ring element `z_elems[i]`.
    pub z_model: MarkovChain,
    pub z_elems: Vec<Elem>,
    tuples: Vec<Vec<usize>>,
}

impl ComputingSetup {
    /// Homogeneous joint chain from its invariant distribution; the decoder
    /// model is the lumped sum process.
    pub fn homogeneous(g: FunctionSpec, p: Presentation, joint: MarkovChain) -> Result<ComputingSetup> {
        let (z_model, z_elems) = match sum_process_chain(&joint, &g, &p, 2)? {
            SumProcess::Lumped { chain, elems, .. } => (chain, elems),
            SumProcess::Bounded { .. } => {
                return Err(Error::NotLumpable);
            }
        };
        let init = joint.invariant_distribution()?;
        ComputingSetup::new(g, p, JointSource::Homogeneous(joint), init, z_model, z_elems)
    }

    pub fn new(
        g: FunctionSpec,
        p: Presentation,
        source: JointSource,
        init: Vec<f64>,
        z_model: MarkovChain,
        z_elems: Vec<Elem>,
    ) -> Result<ComputingSetup> {
        let check = verify_presentation(&g, &p);
        if !check.valid {
            return Err(Error::InvalidPresentation(format!("fails at {:?}", check.counterexample)));
        }
        let states: &[String] = match &source {
            JointSource::Homogeneous(c) => c.states(),
            JointSource::Schedule(s) => &s.states,
        };
        let tuples = states.iter().map(|s| g.parse_tuple(s)).collect::<Result<Vec<_>>>()?;
        if init.len() != tuples.len() {
            return Err(Error::Dimension("initial distribution size".into()));
        }
        Ok(ComputingSetup {
            function: g,
            presentation: p,
            source,
            init,
            z_model,
            z_elems,
            tuples,
        })
    }
}

/// Sum process of a joint path: per-source embedded sequences, their sum and the `g` path.
pub fn embed_joint_path(setup: &ComputingSetup, x: &[usize]) -> (Vec<Vec<Elem>>, Vec<Elem>, Vec<usize>) {
    let p = &setup.presentation;
    let s = setup.function.arity();
    let per_source: Vec<Vec<Elem>> = (0..s)
        .map(|t| x.iter().map(|&st| p.k[t][setup.tuples[st][t]]).collect())
        .collect();
    let z: Vec<Elem> = x.iter().map(|&st| p.sum(&setup.tuples[st])).collect();
    let gp: Vec<usize> = x.iter().map(|&st| setup.function.eval(&setup.tuples[st])).collect();
    (per_source, z, gp)
}

pub fn run_computing_sim(setup: &ComputingSetup, params: &SimParams) -> Result<SimResult> {
    params.validate()?;
    let ring = &setup.presentation.ring;
    let dec = Decoder::build(ring, &setup.z_model, &setup.z_elems, params.decoder)?;
    dec.check_budget(ring, params)?;
    let tally = (0..params.trials)
        .into_par_iter()
        .map(|trial| -> Result<Tally> {
            let mut rng = trial_rng(params.seed, trial);
            let x = sample_path(&setup.source, &setup.init, params.n, &mut rng)?;
            let a = random_linear_map(ring, params.k, params.n, &mut rng);
            let (per_source, z, gpath) = embed_joint_path(setup, &x);
            let combined = per_source
                .iter()
                .map(|xt| apply_unchecked(ring, &a, xt))
                .fold(vec![ring.zero(); params.k], |acc, c| crate::ring::add_vectors(ring, &acc, &c));
            let mut t = Tally {
                trials: 1,
                ..Tally::default()
            };
            if combined != apply_unchecked(ring, &a, &z) {
                t.identity_failures += 1;
            }
            *t.kernel_sizes.entry(kernel_size(ring, &a)?).or_insert(0) += 1;
            let ok = match dec.decode(ring, &a, &combined, &mut t)? {
                Some(zhat) => zhat
                    .iter()
                    .zip(&gpath)
                    .all(|(&e, &gv)| setup.presentation.h[e] == Some(gv)),
                None => false,
            };
            if !ok {
                t.errors += 1;
            }
            Ok(t)
        })
        .try_reduce(Tally::default, |a, b| Ok(a.merge(b)))?;
    Ok(tally.finish(rate_of(ring, params)))
}
