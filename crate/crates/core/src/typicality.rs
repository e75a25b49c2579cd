//! Strong Markov and Supremus typicality, path sampling, and the exhaustive
//! enumerators used to check the counting bounds at small block lengths.

use std::collections::HashMap;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::Mat;
use crate::markov::{conditional_entropy, reduced_invariant_from, MarkovChain};
use crate::ring::QuotientPartition;

/// Largest `|X|^n` the exhaustive enumerators will walk.
pub const ENUMERATION_BUDGET: f64 = 2e7;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TransitionCounts {
    pub pairs: Vec<Vec<u64>>,
    /// `N(i) = sum_j N(i, j)`.
    pub from: Vec<u64>,
}

pub fn transition_counts(x: &[usize], num_states: usize) -> Result<TransitionCounts> {
    if x.len() < 2 {
        return Err(Error::Typicality("paths need length at least 2".into()));
    }
    if let Some(&bad) = x.iter().find(|&&s| s >= num_states) {
        return Err(Error::Typicality(format!("state {bad} out of range")));
    }
    let mut pairs = vec![vec![0u64; num_states]; num_states];
    let mut from = vec![0u64; num_states];
    for w in x.windows(2) {
        pairs[w[0]][w[1]] += 1;
        from[w[0]] += 1;
    }
    Ok(TransitionCounts { pairs, from })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TypicalityMode {
    /// Every entry within `eps`.
    #[default]
    PerEntry,
    /// Sums of absolute deviations within `eps`.
    Summed,
}

/// Typicality of a path given its counts, against `(p, pi)`.
///
/// A state that never starts a transition passes only if `pi_i < eps` and
/// every `p_ij < eps`; its row is then skipped.
fn counts_typical(
    pairs: &[u64],
    from: &[u64],
    k: usize,
    n: usize,
    p: &Mat,
    pi: &[f64],
    eps: f64,
    mode: TypicalityMode,
) -> bool {
    let nf = n as f64;
    let mut state_dev = 0.0;
    let mut trans_dev = 0.0;
    for i in 0..k {
        let ni = from[i];
        let d = (ni as f64 / nf - pi[i]).abs();
        if ni == 0 {
            if !(pi[i] < eps && p[i].iter().all(|&x| x < eps)) {
                return false;
            }
            state_dev += d;
            continue;
        }
        match mode {
            TypicalityMode::PerEntry => {
                if d >= eps {
                    return false;
                }
                let nif = ni as f64;
                for j in 0..k {
                    if (pairs[i * k + j] as f64 / nif - p[i][j]).abs() >= eps {
                        return false;
                    }
                }
            }
            TypicalityMode::Summed => {
                state_dev += d;
                let nif = ni as f64;
                for j in 0..k {
                    trans_dev += (pairs[i * k + j] as f64 / nif - p[i][j]).abs();
                }
            }
        }
    }
    mode == TypicalityMode::PerEntry || (state_dev < eps && trans_dev < eps)
}

/// Strong Markov typicality against an explicit `(p, pi)`.
pub fn is_typical_for(x: &[usize], p: &Mat, pi: &[f64], eps: f64, mode: TypicalityMode) -> Result<bool> {
    let k = p.len();
    let c = transition_counts(x, k)?;
    let flat: Vec<u64> = c.pairs.concat();
    Ok(counts_typical(&flat, &c.from, k, x.len(), p, pi, eps, mode))
}

pub fn is_strongly_markov_typical(
    x: &[usize],
    c: &MarkovChain,
    eps: f64,
    mode: TypicalityMode,
) -> Result<bool> {
    check_eps(eps)?;
    let pi = c.invariant_distribution()?;
    is_typical_for(x, c.matrix(), &pi, eps, mode)
}

fn check_eps(eps: f64) -> Result<()> {
    if eps > 0.0 && eps.is_finite() {
        Ok(())
    } else {
        Err(Error::Typicality(format!("eps must be positive, got {eps}")))
    }
}

/// Which state subsets a Supremus test ranges over.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SubsetFamily {
    /// Every non-empty subset of the state set.
    AllSubsets,
    Subsets(Vec<Vec<usize>>),
}

impl SubsetFamily {
    /// The cosets of each partition, deduplicated.
    pub fn from_partitions(parts: &[QuotientPartition]) -> SubsetFamily {
        let mut out: Vec<Vec<usize>> = Vec::new();
        for q in parts {
            for c in q.cosets() {
                if !out.contains(c) {
                    out.push(c.clone());
                }
            }
        }
        SubsetFamily::Subsets(out)
    }

    fn resolve(&self, n: usize) -> Vec<Vec<usize>> {
        match self {
            SubsetFamily::AllSubsets => (1u64..1 << n)
                .map(|m| (0..n).filter(|&i| m >> i & 1 == 1).collect())
                .collect(),
            SubsetFamily::Subsets(v) => v
                .iter()
                .map(|s| {
                    let mut s = s.clone();
                    s.sort_unstable();
                    s.dedup();
                    s
                })
                .collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct SupremusVerdict {
    pub typical: bool,
    /// First subset whose subsequence failed.
    pub failed: Option<Vec<usize>>,
    /// Subsets whose subsequence had fewer than two symbols and passed by default.
    pub vacuous: Vec<Vec<usize>>,
}

#[derive(Debug, Clone)]
struct Reduced {
    members: Vec<usize>,
    local: Vec<usize>,
    s: Mat,
    pi: Vec<f64>,
}

/// Supremus typicality test with the stochastic complements precomputed.
#[derive(Debug, Clone)]
pub struct SupremusTester {
    num_states: usize,
    eps: f64,
    mode: TypicalityMode,
    subsets: Vec<Reduced>,
}

/// Reusable buffers for [`SupremusTester::is_typical_with`].
#[derive(Debug, Default, Clone)]
pub struct Scratch {
    pairs: Vec<u64>,
    from: Vec<u64>,
}

impl SupremusTester {
    pub fn new(c: &MarkovChain, family: &SubsetFamily, eps: f64, mode: TypicalityMode) -> Result<SupremusTester> {
        check_eps(eps)?;
        let n = c.len();
        if matches!(family, SubsetFamily::AllSubsets) && n > 16 {
            return Err(Error::Budget {
                size: 2f64.powi(n as i32),
                budget: 65536.0,
            });
        }
        let sets = family.resolve(n);
        if sets.is_empty() {
            return Err(Error::Typicality("subset family is empty".into()));
        }
        let pi = c.invariant_distribution()?;
        let subsets = sets
            .into_iter()
            .map(|members| {
                let s = c.stochastic_complement(&members)?;
                let pa = reduced_invariant_from(&pi, &s, &members)?;
                let mut local = vec![usize::MAX; n];
                for (li, &m) in members.iter().enumerate() {
                    local[m] = li;
                }
                Ok(Reduced {
                    members,
                    local,
                    s,
                    pi: pa,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(SupremusTester {
            num_states: n,
            eps,
            mode,
            subsets,
        })
    }

    pub fn eps(&self) -> f64 {
        self.eps
    }

    pub fn num_states(&self) -> usize {
        self.num_states
    }

    /// The complement and reduced invariant for one subset of the family.
    pub fn reduced(&self, members: &[usize]) -> Option<(&Mat, &[f64])> {
        self.subsets
            .iter()
            .find(|r| r.members == members)
            .map(|r| (&r.s, r.pi.as_slice()))
    }

    pub fn check(&self, x: &[usize]) -> Result<SupremusVerdict> {
        self.check_len(x)?;
        let mut scratch = Scratch::default();
        let mut vacuous = Vec::new();
        for r in &self.subsets {
            match self.subset_passes(r, x, &mut scratch) {
                None => vacuous.push(r.members.clone()),
                Some(true) => {}
                Some(false) => {
                    return Ok(SupremusVerdict {
                        typical: false,
                        failed: Some(r.members.clone()),
                        vacuous,
                    })
                }
            }
        }
        Ok(SupremusVerdict {
            typical: true,
            failed: None,
            vacuous,
        })
    }

    fn check_len(&self, x: &[usize]) -> Result<()> {
        if x.len() < 2 * self.num_states {
            return Err(Error::Typicality(format!(
                "length {} is below twice the number of states ({})",
                x.len(),
                self.num_states
            )));
        }
        if x.iter().any(|&s| s >= self.num_states) {
            return Err(Error::Typicality("state out of range".into()));
        }
        Ok(())
    }

    pub fn is_typical(&self, x: &[usize]) -> Result<bool> {
        self.check_len(x)?;
        Ok(self.is_typical_with(x, &mut Scratch::default()))
    }

    /// Unchecked fast path for enumeration loops.
    pub fn is_typical_with(&self, x: &[usize], scratch: &mut Scratch) -> bool {
        self.subsets
            .iter()
            .all(|r| self.subset_passes(r, x, scratch) != Some(false))
    }

    /// `None` when the subsequence is too short to test.
    fn subset_passes(&self, r: &Reduced, x: &[usize], scratch: &mut Scratch) -> Option<bool> {
        let k = r.members.len();
        scratch.pairs.clear();
        scratch.pairs.resize(k * k, 0);
        scratch.from.clear();
        scratch.from.resize(k, 0);
        let mut prev = usize::MAX;
        let mut len = 0usize;
        for &s in x {
            let l = r.local[s];
            if l == usize::MAX {
                continue;
            }
            if prev != usize::MAX {
                scratch.pairs[prev * k + l] += 1;
                scratch.from[prev] += 1;
            }
            prev = l;
            len += 1;
        }
        if len < 2 {
            return None;
        }
        Some(counts_typical(
            &scratch.pairs,
            &scratch.from,
            k,
            len,
            &r.s,
            &r.pi,
            self.eps,
            self.mode,
        ))
    }
}

pub fn is_supremus_typical(
    x: &[usize],
    c: &MarkovChain,
    eps: f64,
    family: &SubsetFamily,
    mode: TypicalityMode,
) -> Result<SupremusVerdict> {
    SupremusTester::new(c, family, eps, mode)?.check(x)
}

/// Anything that yields transition rows, possibly depending on time.
pub trait TransitionSource {
    fn num_states(&self) -> usize;
    /// Row of the transition taken from time `t` to `t + 1`.
    fn row(&self, t: usize, i: usize) -> &[f64];
}

impl TransitionSource for MarkovChain {
    fn num_states(&self) -> usize {
        self.len()
    }

    fn row(&self, _t: usize, i: usize) -> &[f64] {
        &self.matrix()[i]
    }
}

/// Time-varying chain cycling through `matrices`: the step from time `t`
/// uses `matrices[t % len]`, with the first path symbol at time 0.
#[derive(Debug, Clone, PartialEq)]
pub struct ChainSchedule {
    pub states: Vec<String>,
    pub matrices: Vec<MarkovChain>,
}

impl ChainSchedule {
    pub fn new(matrices: Vec<MarkovChain>) -> Result<ChainSchedule> {
        let first = matrices
            .first()
            .ok_or_else(|| Error::InvalidChain("empty schedule".into()))?;
        if matrices.iter().any(|m| m.states() != first.states()) {
            return Err(Error::InvalidChain("schedule matrices disagree on states".into()));
        }
        Ok(ChainSchedule {
            states: first.states().to_vec(),
            matrices,
        })
    }
}

impl TransitionSource for ChainSchedule {
    fn num_states(&self) -> usize {
        self.states.len()
    }

    fn row(&self, t: usize, i: usize) -> &[f64] {
        &self.matrices[t % self.matrices.len()].matrix()[i]
    }
}

pub(crate) fn sample_index<R: Rng + ?Sized>(w: &[f64], rng: &mut R) -> usize {
    let u: f64 = rng.random::<f64>() * w.iter().sum::<f64>();
    let mut acc = 0.0;
    let mut last = 0;
    for (i, &p) in w.iter().enumerate() {
        if p > 0.0 {
            acc += p;
            last = i;
            if u < acc {
                return i;
            }
        }
    }
    last
}

/// Ancestral sampling of `n` symbols.
pub fn sample_path<S: TransitionSource + ?Sized, R: Rng + ?Sized>(
    src: &S,
    init: &[f64],
    n: usize,
    rng: &mut R,
) -> Result<Vec<usize>> {
    if init.len() != src.num_states() {
        return Err(Error::Dimension("initial distribution size".into()));
    }
    if !(init.iter().sum::<f64>() > 0.0) || init.iter().any(|&x| x < 0.0) {
        return Err(Error::InvalidChain("initial distribution has no mass".into()));
    }
    let mut x = Vec::with_capacity(n);
    if n == 0 {
        return Ok(x);
    }
    x.push(sample_index(init, rng));
    for t in 0..n - 1 {
        let next = sample_index(src.row(t, x[t]), rng);
        x.push(next);
    }
    Ok(x)
}

/// `log2 P(X = x)` under the chain started at `init`.
pub fn path_log2_prob(p: &Mat, init: &[f64], x: &[usize]) -> f64 {
    let mut lp = init[x[0]].log2();
    for w in x.windows(2) {
        lp += p[w[0]][w[1]].log2();
    }
    lp
}

/// Slack `eta(eps, n)` for which every strongly typical `x` of length `n`
/// satisfies `2^{-n(H+eta)} <= P(x) <= 2^{-n(H-eta)}` under a stationary start.
///
/// Typicality bounds `|N(i,j)/n - p_i p_ij| < eps (p_i + p_ij + eps)`, which
/// bounds the per-symbol log-likelihood; the initial symbol adds at most
/// `|log2 pi_min| / n`. Infinite if some transition has probability zero.
pub fn calibrated_eta(p: &Mat, pi: &[f64], eps: f64, n: usize) -> f64 {
    let mut eta = 0.0;
    for (i, row) in p.iter().enumerate() {
        for &pij in row {
            if pij <= 0.0 {
                return f64::INFINITY;
            }
            eta += eps * (pi[i] + pij + eps) * pij.log2().abs();
        }
    }
    let pi_min = pi.iter().cloned().fold(f64::INFINITY, f64::min);
    eta + pi_min.log2().abs() / n as f64
}

fn check_budget(k: usize, n: usize) -> Result<()> {
    let size = (k as f64).powi(n as i32);
    if size > ENUMERATION_BUDGET {
        return Err(Error::Budget {
            size,
            budget: ENUMERATION_BUDGET,
        });
    }
    Ok(())
}

/// Visits every sequence in `[0, k)^n`, split over rayon tasks by prefix.
fn par_enumerate<T, I, F, M>(k: usize, n: usize, init: I, visit: F, merge: M) -> Result<T>
where
    T: Send,
    I: Fn() -> T + Sync + Send,
    F: Fn(&mut T, &[usize]) + Sync + Send,
    M: Fn(T, T) -> T + Sync + Send,
{
    check_budget(k, n)?;
    let prefix = n.min(3);
    let heads = k.pow(prefix as u32);
    let out = (0..heads)
        .into_par_iter()
        .fold(&init, |mut acc, h| {
            let mut x = vec![0usize; n];
            let mut v = h;
            for slot in x[..prefix].iter_mut().rev() {
                *slot = v % k;
                v /= k;
            }
            loop {
                visit(&mut acc, &x);
                let mut pos = n;
                loop {
                    if pos == prefix {
                        return acc;
                    }
                    pos -= 1;
                    x[pos] += 1;
                    if x[pos] < k {
                        break;
                    }
                    x[pos] = 0;
                }
            }
        })
        .reduce(&init, merge);
    Ok(out)
}

/// Exhaustive list of the Supremus-typical sequences of length `n`.
pub fn supremus_typical_set(t: &SupremusTester, n: usize) -> Result<Vec<Vec<usize>>> {
    t.check_len(&vec![0; n])?;
    par_enumerate(
        t.num_states,
        n,
        || (Vec::new(), Scratch::default()),
        |(acc, s), x| {
            if t.is_typical_with(x, s) {
                acc.push(x.to_vec());
            }
        },
        |(mut a, s), (b, _)| {
            a.extend(b);
            (a, s)
        },
    )
    .map(|(mut v, _)| {
        v.sort();
        v
    })
}

/// Number of strongly typical sequences of length `m` for `(p, pi)`.
pub fn count_strongly_typical(p: &Mat, pi: &[f64], m: usize, eps: f64, mode: TypicalityMode) -> Result<u64> {
    if m < 2 {
        return Err(Error::Typicality("length below 2".into()));
    }
    let k = p.len();
    par_enumerate(
        k,
        m,
        || 0u64,
        |acc, x| {
            if is_typical_for(x, p, pi, eps, mode).unwrap_or(false) {
                *acc += 1;
            }
        },
        |a, b| a + b,
    )
}

/// Counts of Supremus-typical sequences per block pattern.
///
/// The key is the block index at every position. For a typical `x`, the
/// entry under `x`'s pattern is `|S_eps(x, I)|`.
pub fn confusable_counts(t: &SupremusTester, blocks: &[Vec<usize>], n: usize) -> Result<HashMap<Vec<u8>, u64>> {
    t.check_len(&vec![0; n])?;
    let mut block_of = vec![u8::MAX; t.num_states];
    for (b, members) in blocks.iter().enumerate() {
        for &s in members {
            block_of[s] = b as u8;
        }
    }
    if block_of.contains(&u8::MAX) {
        return Err(Error::InvalidLabeling("blocks must cover the state set".into()));
    }
    par_enumerate(
        t.num_states,
        n,
        || (HashMap::new(), Scratch::default()),
        |(acc, s), x| {
            if t.is_typical_with(x, s) {
                let key: Vec<u8> = x.iter().map(|&v| block_of[v]).collect();
                *acc.entry(key).or_insert(0u64) += 1;
            }
        },
        |(mut a, s), (b, _)| {
            for (k, v) in b {
                *a.entry(k).or_insert(0) += v;
            }
            (a, s)
        },
    )
    .map(|(m, _)| m)
}

/// `|S_eps(x, I)|`: typical `y` that sit in the same block as `x` at every position.
pub fn enumerate_confusable(t: &SupremusTester, blocks: &[Vec<usize>], x: &[usize]) -> Result<u64> {
    t.check_len(x)?;
    let mut block_of = vec![usize::MAX; t.num_states];
    for (b, members) in blocks.iter().enumerate() {
        for &s in members {
            block_of[s] = b;
        }
    }
    if block_of.contains(&usize::MAX) {
        return Err(Error::InvalidLabeling("blocks must cover the state set".into()));
    }
    let choices: Vec<&[usize]> = x.iter().map(|&s| blocks[block_of[s]].as_slice()).collect();
    let size: f64 = choices.iter().map(|c| c.len() as f64).product();
    if size > ENUMERATION_BUDGET {
        return Err(Error::Budget {
            size,
            budget: ENUMERATION_BUDGET,
        });
    }
    let n = x.len();
    let mut idx = vec![0usize; n];
    let mut y: Vec<usize> = choices.iter().map(|c| c[0]).collect();
    let mut scratch = Scratch::default();
    let mut count = 0u64;
    loop {
        if t.is_typical_with(&y, &mut scratch) {
            count += 1;
        }
        let mut pos = n;
        loop {
            if pos == 0 {
                return Ok(count);
            }
            pos -= 1;
            idx[pos] += 1;
            if idx[pos] < choices[pos].len() {
                y[pos] = choices[pos][idx[pos]];
                break;
            }
            idx[pos] = 0;
            y[pos] = choices[pos][0];
        }
    }
}

/// `H(S_A | pi_A)` for each block, as used in the confusable-set bounds.
pub fn block_complement_entropies(t: &SupremusTester, blocks: &[Vec<usize>]) -> Option<Vec<f64>> {
    blocks
        .iter()
        .map(|b| {
            let mut b = b.clone();
            b.sort_unstable();
            t.reduced(&b).map(|(s, pa)| conditional_entropy(s, pa))
        })
        .collect()
}
