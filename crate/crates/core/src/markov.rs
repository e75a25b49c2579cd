//! Finite Markov chains and the quantities derived from them.
//!
//! A chain stores its transition matrix only. The invariant distribution is
//! recomputed on demand by an exact linear solve. Stochastic complements,
//! lumpings and entropy-rate bounds for functions of the chain live here too.

use std::collections::BTreeMap;
use std::fmt::Display;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::{self, Mat};

/// Row-sum slack accepted by [`MarkovChain::new`].
pub const ROW_TOLERANCE: f64 = 1e-9;
/// Block-sum tolerance for lumpability.
pub const LUMP_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MarkovChain {
    states: Vec<String>,
    p: Mat,
    tolerance: f64,
}

impl MarkovChain {
    pub fn new(states: Vec<String>, p: Mat) -> Result<MarkovChain> {
        let n = states.len();
        if n == 0 {
            return Err(Error::InvalidChain("no states".into()));
        }
        if p.len() != n || p.iter().any(|r| r.len() != n) {
            return Err(Error::InvalidChain(format!("transition matrix must be {n}x{n}")));
        }
        for (i, row) in p.iter().enumerate() {
            if row.iter().any(|&x| !(x >= 0.0) || !x.is_finite()) {
                return Err(Error::InvalidChain(format!("row {i} has a negative or non-finite entry")));
            }
            let s: f64 = row.iter().sum();
            if (s - 1.0).abs() > ROW_TOLERANCE {
                return Err(Error::InvalidChain(format!("row {i} sums to {s}")));
            }
        }
        Ok(MarkovChain {
            states,
            p,
            tolerance: ROW_TOLERANCE,
        })
    }

    /// Divides every row by its sum first. Used for matrices printed to a
    /// fixed number of decimals, whose rows are only approximately stochastic.
    pub fn renormalized(states: Vec<String>, mut p: Mat) -> Result<MarkovChain> {
        for (i, row) in p.iter_mut().enumerate() {
            let s: f64 = row.iter().sum();
            if !(s > 0.0) || !s.is_finite() {
                return Err(Error::InvalidChain(format!("row {i} has no positive mass")));
            }
            row.iter_mut().for_each(|x| *x /= s);
        }
        MarkovChain::new(states, p)
    }

    /// States labeled `0..n`.
    pub fn with_index_states(p: Mat) -> Result<MarkovChain> {
        let states = (0..p.len()).map(|i| i.to_string()).collect();
        MarkovChain::new(states, p)
    }

    /// Joint chain of independent components; states are tuples like `(0,1)`.
    pub fn independent_product(parts: &[&MarkovChain]) -> Result<MarkovChain> {
        if parts.is_empty() {
            return Err(Error::InvalidChain("no components".into()));
        }
        let mut tuples: Vec<Vec<usize>> = vec![vec![]];
        for c in parts {
            tuples = tuples
                .into_iter()
                .flat_map(|t| {
                    (0..c.len()).map(move |i| {
                        let mut t = t.clone();
                        t.push(i);
                        t
                    })
                })
                .collect();
        }
        let states = tuples
            .iter()
            .map(|t| {
                let inner: Vec<&str> = t.iter().zip(parts).map(|(&i, c)| c.states[i].as_str()).collect();
                format!("({})", inner.join(","))
            })
            .collect();
        let p = tuples
            .iter()
            .map(|a| {
                tuples
                    .iter()
                    .map(|b| a.iter().zip(b).zip(parts).map(|((&i, &j), c)| c.p[i][j]).product())
                    .collect()
            })
            .collect();
        MarkovChain::new(states, p)
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn states(&self) -> &[String] {
        &self.states
    }

    pub fn matrix(&self) -> &Mat {
        &self.p
    }

    pub fn tolerance(&self) -> f64 {
        self.tolerance
    }

    #[inline]
    pub fn prob(&self, i: usize, j: usize) -> f64 {
        self.p[i][j]
    }

    pub fn state_index(&self, label: &str) -> Option<usize> {
        self.states.iter().position(|s| s == label)
    }

    /// Strong connectivity of the graph of positive entries.
    pub fn is_irreducible(&self) -> bool {
        let n = self.len();
        let reach = |forward: bool| {
            let mut seen = vec![false; n];
            let mut stack = vec![0];
            seen[0] = true;
            while let Some(i) = stack.pop() {
                for j in 0..n {
                    let w = if forward { self.p[i][j] } else { self.p[j][i] };
                    if w > 0.0 && !seen[j] {
                        seen[j] = true;
                        stack.push(j);
                    }
                }
            }
            seen.into_iter().all(|s| s)
        };
        reach(true) && reach(false)
    }

    /// The unique `pi` with `pi P = pi`.
    pub fn invariant_distribution(&self) -> Result<Vec<f64>> {
        if !self.is_irreducible() {
            return Err(Error::Reducible);
        }
        let n = self.len();
        if n == 1 {
            return Ok(vec![1.0]);
        }
        // (P^T - I) pi = 0 with the last equation swapped for sum(pi) = 1.
        let mut a: Mat = (0..n)
            .map(|i| (0..n).map(|j| self.p[j][i] - if i == j { 1.0 } else { 0.0 }).collect())
            .collect();
        a[n - 1] = vec![1.0; n];
        let mut b = vec![0.0; n];
        b[n - 1] = 1.0;
        let mut pi = linalg::solve(&a, &b)?;
        for x in &mut pi {
            if *x < 0.0 {
                *x = 0.0;
            }
        }
        let s: f64 = pi.iter().sum();
        pi.iter_mut().for_each(|x| *x /= s);
        let res = stationarity_residual(&self.p, &pi);
        if res >= 1e-12 {
            log::warn!("invariant distribution residual {res:.3e}");
        }
        Ok(pi)
    }

    /// `S_A = P_AA + P_AAc (I - P_AcAc)^{-1} P_AcA`, indexed in the order of `a`.
    pub fn stochastic_complement(&self, a: &[usize]) -> Result<Mat> {
        let n = self.len();
        check_subset(a, n)?;
        let mut in_a = vec![false; n];
        a.iter().for_each(|&i| in_a[i] = true);
        let ac: Vec<usize> = (0..n).filter(|&i| !in_a[i]).collect();
        let mut s: Mat = a.iter().map(|&i| a.iter().map(|&j| self.p[i][j]).collect()).collect();
        if ac.is_empty() {
            return Ok(s);
        }
        let m: Mat = ac
            .iter()
            .map(|&i| {
                ac.iter()
                    .map(|&j| if i == j { 1.0 } else { 0.0 } - self.p[i][j])
                    .collect()
            })
            .collect();
        let (inv, _) = linalg::inverse(&m).map_err(|_| {
            Error::Singular("I - P restricted to the complement is singular".into())
        })?;
        let p_ac_a: Mat = ac.iter().map(|&i| a.iter().map(|&j| self.p[i][j]).collect()).collect();
        let w = linalg::mat_mul(&inv, &p_ac_a);
        for (r, &i) in a.iter().enumerate() {
            for (ci, &k) in ac.iter().enumerate() {
                let pik = self.p[i][k];
                if pik != 0.0 {
                    for (c, v) in s[r].iter_mut().enumerate() {
                        *v += pik * w[ci][c];
                    }
                }
            }
        }
        Ok(s)
    }

    /// `pi` restricted to `a` and renormalized, checked against `S_A`.
    pub fn reduced_invariant(&self, a: &[usize]) -> Result<Vec<f64>> {
        let pi = self.invariant_distribution()?;
        let s = self.stochastic_complement(a)?;
        reduced_invariant_from(&pi, &s, a)
    }

    /// Off-diagonal columns constant and a common diagonal excess `1 - c1`.
    pub fn check_burke_form(&self) -> Option<BurkeForm> {
        self.check_burke_form_tol(1e-9)
    }

    pub fn check_burke_form_tol(&self, tol: f64) -> Option<BurkeForm> {
        let n = self.len();
        if n == 1 {
            return Some(BurkeForm {
                c1: 1.0,
                u: vec![1.0],
                residual: 0.0,
            });
        }
        let mut v = vec![0.0; n];
        for j in 0..n {
            let off: Vec<f64> = (0..n).filter(|&i| i != j).map(|i| self.p[i][j]).collect();
            let mean = off.iter().sum::<f64>() / off.len() as f64;
            if off.iter().any(|x| (x - mean).abs() > tol) {
                return None;
            }
            v[j] = mean;
        }
        let d: Vec<f64> = (0..n).map(|j| self.p[j][j] - v[j]).collect();
        let dm = d.iter().sum::<f64>() / n as f64;
        if d.iter().any(|x| (x - dm).abs() > tol) {
            return None;
        }
        let c1 = 1.0 - dm;
        if c1 < -tol || c1 > 1.0 + tol {
            return None;
        }
        let c1 = c1.clamp(0.0, 1.0);
        let u: Vec<f64> = if c1 <= tol {
            vec![1.0 / n as f64; n]
        } else {
            let s: f64 = v.iter().sum();
            v.iter().map(|x| x / s).collect()
        };
        let residual = (0..n)
            .flat_map(|i| (0..n).map(move |j| (i, j)))
            .map(|(i, j)| {
                let rec = c1 * u[j] + if i == j { 1.0 - c1 } else { 0.0 };
                (rec - self.p[i][j]).abs()
            })
            .fold(0.0, f64::max);
        (residual <= tol.max(1e-12) * 10.0).then_some(BurkeForm { c1, u, residual })
    }

    pub fn is_lumpable(&self, g: &Labeling) -> bool {
        g.len() == self.len() && self.block_sums(g).is_some()
    }

    /// The block-level chain when `g` is lumpable.
    pub fn lump(&self, g: &Labeling) -> Result<MarkovChain> {
        if g.len() != self.len() {
            return Err(Error::InvalidLabeling(format!(
                "labeling has {} entries, chain has {} states",
                g.len(),
                self.len()
            )));
        }
        let q = self.block_sums(g).ok_or(Error::NotLumpable)?;
        MarkovChain::renormalized(g.names().to_vec(), q)
    }

    fn block_sums(&self, g: &Labeling) -> Option<Mat> {
        let k = g.num_blocks();
        let mut q: Mat = vec![vec![f64::NAN; k]; k];
        for x in 0..self.len() {
            let mut sums = vec![0.0; k];
            for (y, &b) in g.assignment().iter().enumerate() {
                sums[b] += self.p[x][y];
            }
            let row = &mut q[g.block(x)];
            for (qb, &sb) in row.iter_mut().zip(&sums) {
                if qb.is_nan() {
                    *qb = sb;
                } else if (*qb - sb).abs() > LUMP_TOLERANCE {
                    return None;
                }
            }
        }
        Some(q)
    }
}

/// `max_j |(pi P)_j - pi_j|`.
pub fn stationarity_residual(p: &Mat, pi: &[f64]) -> f64 {
    linalg::vec_mat(pi, p)
        .iter()
        .zip(pi)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max)
}

fn check_subset(a: &[usize], n: usize) -> Result<()> {
    if a.is_empty() {
        return Err(Error::InvalidChain("empty state subset".into()));
    }
    let mut seen = vec![false; n];
    for &i in a {
        if i >= n || seen[i] {
            return Err(Error::InvalidChain(format!("bad subset member {i}")));
        }
        seen[i] = true;
    }
    Ok(())
}

/// Renormalizes `pi` on `a` and requires it to be a fixed point of `s`.
pub fn reduced_invariant_from(pi: &[f64], s: &Mat, a: &[usize]) -> Result<Vec<f64>> {
    let mass: f64 = a.iter().map(|&i| pi[i]).sum();
    if !(mass > 0.0) {
        return Err(Error::Numeric("subset has zero stationary mass".into()));
    }
    let pa: Vec<f64> = a.iter().map(|&i| pi[i] / mass).collect();
    let res = stationarity_residual(s, &pa);
    if res > 1e-10 {
        return Err(Error::Numeric(format!("pi_A S_A differs from pi_A by {res:.3e}")));
    }
    Ok(pa)
}

fn plogp(x: f64) -> f64 {
    if x > 0.0 {
        x * x.log2()
    } else {
        0.0
    }
}

/// Shannon entropy in bits.
pub fn entropy(w: &[f64]) -> f64 {
    -w.iter().map(|&x| plogp(x)).sum::<f64>()
}

/// `H(P | w) = -sum_i w_i sum_j p_ij log2 p_ij`.
pub fn conditional_entropy(p: &Mat, w: &[f64]) -> f64 {
    w.iter().zip(p).map(|(&wi, row)| wi * entropy(row)).sum()
}

/// Entropy rate `H(P | pi)` of an irreducible chain.
pub fn entropy_rate(c: &MarkovChain) -> Result<f64> {
    let pi = c.invariant_distribution()?;
    Ok(conditional_entropy(c.matrix(), &pi))
}

/// `sum_A pi(A) H(S_A | pi_A)` over the blocks of a partition.
pub fn blockdiag_complement_entropy(c: &MarkovChain, partition: &[Vec<usize>]) -> Result<f64> {
    let n = c.len();
    let mut covered = vec![0usize; n];
    for b in partition {
        for &i in b {
            if i >= n {
                return Err(Error::InvalidLabeling(format!("state {i} out of range")));
            }
            covered[i] += 1;
        }
    }
    if covered.iter().any(|&k| k != 1) {
        return Err(Error::InvalidLabeling("blocks must partition the state set".into()));
    }
    let pi = c.invariant_distribution()?;
    let mut total = 0.0;
    for b in partition {
        let s = c.stochastic_complement(b)?;
        let pa = reduced_invariant_from(&pi, &s, b)?;
        let mass: f64 = b.iter().map(|&i| pi[i]).sum();
        total += mass * conditional_entropy(&s, &pa);
    }
    Ok(total)
}

/// `P = c1 U + (1 - c1) I` with identical rows `u` in `U`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BurkeForm {
    pub c1: f64,
    pub u: Vec<f64>,
    /// Max entrywise error of the reconstruction.
    pub residual: f64,
}

/// A partition of the state set, given as a block index per state.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Labeling {
    assign: Vec<usize>,
    names: Vec<String>,
}

impl Labeling {
    pub fn new(assign: Vec<usize>, names: Vec<String>) -> Result<Labeling> {
        let k = names.len();
        let mut used = vec![false; k];
        for &b in &assign {
            if b >= k {
                return Err(Error::InvalidLabeling(format!("block {b} has no name")));
            }
            used[b] = true;
        }
        if used.iter().any(|u| !u) {
            return Err(Error::InvalidLabeling("every block must be non-empty".into()));
        }
        Ok(Labeling { assign, names })
    }

    /// Groups states by key; blocks are ordered by key.
    pub fn from_keys<K: Ord + Clone + Display>(keys: &[K]) -> Labeling {
        let mut index: BTreeMap<K, usize> = keys.iter().cloned().map(|k| (k, 0)).collect();
        let names = index.keys().map(|k| k.to_string()).collect();
        for (i, v) in index.values_mut().enumerate() {
            *v = i;
        }
        Labeling {
            assign: keys.iter().map(|k| index[k]).collect(),
            names,
        }
    }

    pub fn identity(n: usize) -> Labeling {
        Labeling::from_keys(&(0..n).collect::<Vec<_>>())
    }

    pub fn constant(n: usize) -> Labeling {
        Labeling::from_keys(&vec![0usize; n])
    }

    /// Labeling whose blocks are the given partition, in the given order.
    pub fn from_partition(n: usize, blocks: &[Vec<usize>]) -> Result<Labeling> {
        let mut assign = vec![usize::MAX; n];
        for (b, members) in blocks.iter().enumerate() {
            for &i in members {
                if i >= n || assign[i] != usize::MAX {
                    return Err(Error::InvalidLabeling(format!("state {i} misplaced")));
                }
                assign[i] = b;
            }
        }
        if assign.contains(&usize::MAX) {
            return Err(Error::InvalidLabeling("partition does not cover every state".into()));
        }
        Labeling::new(assign, (0..blocks.len()).map(|b| b.to_string()).collect())
    }

    pub fn len(&self) -> usize {
        self.assign.len()
    }

    pub fn is_empty(&self) -> bool {
        self.assign.is_empty()
    }

    pub fn num_blocks(&self) -> usize {
        self.names.len()
    }

    #[inline]
    pub fn block(&self, state: usize) -> usize {
        self.assign[state]
    }

    pub fn assignment(&self) -> &[usize] {
        &self.assign
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn blocks(&self) -> Vec<Vec<usize>> {
        let mut out = vec![Vec::new(); self.num_blocks()];
        for (i, &b) in self.assign.iter().enumerate() {
            out[b].push(i);
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EntropyRateBounds {
    pub lower: f64,
    pub upper: f64,
    pub depth: usize,
    /// Set when the labeling is lumpable and both bounds are the exact rate.
    pub exact: bool,
}

impl EntropyRateBounds {
    pub fn width(&self) -> f64 {
        self.upper - self.lower
    }
}

#[derive(Debug, Clone, Copy)]
pub struct BoundsConfig {
    pub max_depth: usize,
    /// Cap on the number of (prefix, filter) nodes visited by the recursion.
    pub max_nodes: usize,
}

impl Default for BoundsConfig {
    fn default() -> Self {
        BoundsConfig {
            max_depth: 10,
            max_nodes: 4_000_000,
        }
    }
}

/// `H(Y_m | Y_{m-1..1})` and `H(Y_m | Y_{m-1..1}, X_1)` for `Y = g(X)` started at `pi`.
pub fn quotient_entropy_rate_bounds(
    c: &MarkovChain,
    g: &Labeling,
    depth: usize,
) -> Result<EntropyRateBounds> {
    quotient_entropy_rate_bounds_with(c, g, depth, BoundsConfig::default())
}

pub fn quotient_entropy_rate_bounds_with(
    c: &MarkovChain,
    g: &Labeling,
    depth: usize,
    cfg: BoundsConfig,
) -> Result<EntropyRateBounds> {
    if c.is_lumpable(g) {
        let h = entropy_rate(&c.lump(g)?)?;
        return Ok(EntropyRateBounds {
            lower: h,
            upper: h,
            depth,
            exact: true,
        });
    }
    let profile = bound_profile(c, g, depth, cfg)?;
    Ok(*profile.last().expect("depth >= 1"))
}

/// Bounds at every depth `1..=depth`, without the lumpable shortcut.
pub fn bound_profile(
    c: &MarkovChain,
    g: &Labeling,
    depth: usize,
    cfg: BoundsConfig,
) -> Result<Vec<EntropyRateBounds>> {
    if depth == 0 || depth > cfg.max_depth {
        return Err(Error::DepthCap {
            depth,
            reason: format!("depth must lie in 1..={}", cfg.max_depth),
        });
    }
    if g.len() != c.len() {
        return Err(Error::InvalidLabeling("labeling size differs from chain size".into()));
    }
    let pi = c.invariant_distribution()?;
    let n = c.len();
    let by_label: Vec<Vec<f64>> = (0..g.num_blocks())
        .map(|b| (0..n).map(|i| if g.block(i) == b { pi[i] } else { 0.0 }).collect())
        .collect();
    let by_state: Vec<Vec<f64>> = (0..n)
        .filter(|&i| pi[i] > 0.0)
        .map(|i| {
            let mut v = vec![0.0; n];
            v[i] = pi[i];
            v
        })
        .collect();
    let mut budget = cfg.max_nodes;
    let f = block_entropies(c, g, by_label, depth, &mut budget)?;
    let gx = block_entropies(c, g, by_state, depth, &mut budget)?;
    let h_x1 = entropy(&pi);
    let mut out = Vec::with_capacity(depth);
    for t in 0..depth {
        let (fp, gp) = if t == 0 { (0.0, h_x1) } else { (f[t - 1], gx[t - 1]) };
        let upper = (f[t] - fp).max(0.0);
        let lower = (gx[t] - gp).clamp(0.0, upper);
        out.push(EntropyRateBounds {
            lower,
            upper,
            depth: t + 1,
            exact: false,
        });
    }
    Ok(out)
}

/// Block entropies `H_t = -sum m log2 m` over the nodes reached after `t`
/// label steps, where level one is `roots`. Each node carries the
/// unnormalized filter `alpha(x) = P(prefix, X_t = x)`.
fn block_entropies(
    c: &MarkovChain,
    g: &Labeling,
    roots: Vec<Vec<f64>>,
    depth: usize,
    budget: &mut usize,
) -> Result<Vec<f64>> {
    let mut h = vec![0.0; depth];
    let mut stack: Vec<(Vec<f64>, usize)> = roots.into_iter().map(|a| (a, 1)).collect();
    let n = c.len();
    let k = g.num_blocks();
    while let Some((alpha, level)) = stack.pop() {
        if *budget == 0 {
            return Err(Error::DepthCap {
                depth,
                reason: "node budget exhausted".into(),
            });
        }
        *budget -= 1;
        let mass: f64 = alpha.iter().sum();
        if mass <= 0.0 {
            continue;
        }
        h[level - 1] -= plogp(mass);
        if level == depth {
            continue;
        }
        let beta = linalg::vec_mat(&alpha, c.matrix());
        let mut children = vec![vec![0.0; n]; k];
        for (j, &b) in beta.iter().enumerate() {
            children[g.block(j)][j] = b;
        }
        for child in children {
            if child.iter().any(|&x| x > 0.0) {
                stack.push((child, level + 1));
            }
        }
    }
    Ok(h)
}

/// Numbers behind the data-processing comparison for a lumpable labeling.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DataProcessing {
    pub h_chain: f64,
    pub h_lumped: f64,
    /// Every block holds at most one reachable successor of each state.
    pub equality_condition: bool,
}

/// `H(P'|pi') <= H(P|pi)` for a lumpable labeling, with the condition under
/// which equality is expected.
pub fn data_processing(c: &MarkovChain, g: &Labeling) -> Result<DataProcessing> {
    let lumped = c.lump(g)?;
    let h_chain = entropy_rate(c)?;
    let h_lumped = entropy_rate(&lumped)?;
    let pi = c.invariant_distribution()?;
    let equality_condition = (0..c.len()).filter(|&i| pi[i] > 0.0).all(|i| {
        let mut hits = vec![0usize; g.num_blocks()];
        for j in 0..c.len() {
            if c.prob(i, j) > 0.0 {
                hits[g.block(j)] += 1;
            }
        }
        hits.iter().all(|&h| h <= 1)
    });
    Ok(DataProcessing {
        h_chain,
        h_lumped,
        equality_condition,
    })
}
