//! Finite rings given by explicit operation tables.
//!
//! Elements are plain indices `0..order` with display labels. All arithmetic
//! goes through the add/mul tables, so the modular rings, the triangular
//! matrix rings and their products share one representation.

use std::collections::BTreeSet;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type Elem = usize;

/// Default cap on `|R|` for ideal enumeration.
pub const DEFAULT_ORDER_BOUND: usize = 64;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FiniteRing {
    name: String,
    labels: Vec<String>,
    add: Vec<Vec<Elem>>,
    mul: Vec<Vec<Elem>>,
    neg: Vec<Elem>,
    zero: Elem,
    one: Elem,
    characteristic: usize,
}

/// Outcome of an exhaustive axiom check. Each flag covers one group of axioms.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct AxiomReport {
    pub additive_group: bool,
    pub additive_commutative: bool,
    pub mul_associative: bool,
    pub mul_identity: bool,
    pub distributive: bool,
}

impl AxiomReport {
    pub fn all_pass(&self) -> bool {
        self.additive_group
            && self.additive_commutative
            && self.mul_associative
            && self.mul_identity
            && self.distributive
    }
}

pub fn is_prime(p: usize) -> bool {
    p >= 2 && (2..).take_while(|d| d * d <= p).all(|d| p % d != 0)
}

fn gcd(a: usize, b: usize) -> usize {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

impl FiniteRing {
    /// Builds a ring from raw tables. Identities are located from the tables;
    /// the remaining axioms are not enforced here (see [`verify_axioms`]).
    ///
    /// [`verify_axioms`]: FiniteRing::verify_axioms
    pub fn from_tables(
        name: impl Into<String>,
        labels: Vec<String>,
        add: Vec<Vec<Elem>>,
        mul: Vec<Vec<Elem>>,
    ) -> Result<FiniteRing> {
        let m = labels.len();
        if m == 0 {
            return Err(Error::InvalidRing("empty carrier".into()));
        }
        for (what, t) in [("add", &add), ("mul", &mul)] {
            if t.len() != m || t.iter().any(|r| r.len() != m || r.iter().any(|&v| v >= m)) {
                return Err(Error::InvalidRing(format!(
                    "{what} table must be {m}x{m} with entries below {m}"
                )));
            }
        }
        let zero = (0..m)
            .find(|&z| (0..m).all(|a| add[z][a] == a && add[a][z] == a))
            .ok_or_else(|| Error::InvalidRing("no additive identity".into()))?;
        let one = (0..m)
            .find(|&u| (0..m).all(|a| mul[u][a] == a && mul[a][u] == a))
            .ok_or_else(|| Error::InvalidRing("no multiplicative identity".into()))?;
        let neg = (0..m)
            .map(|a| {
                (0..m)
                    .find(|&b| add[a][b] == zero)
                    .ok_or_else(|| Error::InvalidRing(format!("element {a} has no negative")))
            })
            .collect::<Result<Vec<_>>>()?;
        let mut acc = one;
        let mut characteristic = 0;
        for c in 1..=m {
            if acc == zero {
                characteristic = c;
                break;
            }
            acc = add[acc][one];
        }
        if characteristic == 0 {
            return Err(Error::InvalidRing("repeated sums of one never reach zero".into()));
        }
        Ok(FiniteRing {
            name: name.into(),
            labels,
            add,
            mul,
            neg,
            zero,
            one,
            characteristic,
        })
    }

    /// The integers modulo `q`.
    pub fn modular(q: usize) -> Result<FiniteRing> {
        if q < 2 {
            return Err(Error::InvalidRing(format!("modulus {q} is below 2")));
        }
        let add = (0..q).map(|a| (0..q).map(|b| (a + b) % q).collect()).collect();
        let mul = (0..q).map(|a| (0..q).map(|b| (a * b) % q).collect()).collect();
        let labels = (0..q).map(|a| a.to_string()).collect();
        FiniteRing::from_tables(format!("Z{q}"), labels, add, mul)
    }

    /// Lower-triangular matrices `[[x, 0], [y, x]]` over `Z_p`, indexed `x*p + y`.
    pub fn triangular(p: usize) -> Result<FiniteRing> {
        if !is_prime(p) {
            return Err(Error::InvalidRing(format!("{p} is not prime")));
        }
        let m = p * p;
        let split = |i: usize| (i / p, i % p);
        let join = |x: usize, y: usize| (x % p) * p + (y % p);
        let mut add = vec![vec![0; m]; m];
        let mut mul = vec![vec![0; m]; m];
        for a in 0..m {
            let (x, y) = split(a);
            for b in 0..m {
                let (x2, y2) = split(b);
                add[a][b] = join(x + x2, y + y2);
                mul[a][b] = join(x * x2, y * x2 + x * y2);
            }
        }
        let labels = (0..m)
            .map(|i| {
                let (x, y) = split(i);
                format!("[{x},{y}]")
            })
            .collect();
        FiniteRing::from_tables(format!("ML{p}"), labels, add, mul)
    }

    /// Componentwise product; element `(i, j)` has index `i*|b| + j`.
    pub fn product(a: &FiniteRing, b: &FiniteRing) -> FiniteRing {
        let (ma, mb) = (a.order(), b.order());
        let m = ma * mb;
        let split = |i: usize| (i / mb, i % mb);
        let mut add = vec![vec![0; m]; m];
        let mut mul = vec![vec![0; m]; m];
        for u in 0..m {
            let (i, j) = split(u);
            for v in 0..m {
                let (k, l) = split(v);
                add[u][v] = a.add(i, k) * mb + b.add(j, l);
                mul[u][v] = a.mul(i, k) * mb + b.mul(j, l);
            }
        }
        let labels = (0..m)
            .map(|u| {
                let (i, j) = split(u);
                format!("({},{})", a.label(i), b.label(j))
            })
            .collect();
        let ca = a.characteristic;
        let cb = b.characteristic;
        FiniteRing {
            name: format!("{}x{}", a.name, b.name),
            labels,
            add,
            mul,
            neg: (0..m)
                .map(|u| {
                    let (i, j) = split(u);
                    a.neg(i) * mb + b.neg(j)
                })
                .collect(),
            zero: a.zero * mb + b.zero,
            one: a.one * mb + b.one,
            characteristic: ca / gcd(ca, cb) * cb,
        }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn order(&self) -> usize {
        self.labels.len()
    }

    pub fn zero(&self) -> Elem {
        self.zero
    }

    pub fn one(&self) -> Elem {
        self.one
    }

    pub fn characteristic(&self) -> usize {
        self.characteristic
    }

    pub fn label(&self, a: Elem) -> &str {
        &self.labels[a]
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn elem_by_label(&self, s: &str) -> Option<Elem> {
        self.labels.iter().position(|l| l == s)
    }

    #[inline]
    pub fn add(&self, a: Elem, b: Elem) -> Elem {
        self.add[a][b]
    }

    #[inline]
    pub fn mul(&self, a: Elem, b: Elem) -> Elem {
        self.mul[a][b]
    }

    #[inline]
    pub fn neg(&self, a: Elem) -> Elem {
        self.neg[a]
    }

    #[inline]
    pub fn sub(&self, a: Elem, b: Elem) -> Elem {
        self.add[a][self.neg[b]]
    }

    pub fn add_table(&self) -> &[Vec<Elem>] {
        &self.add
    }

    pub fn mul_table(&self) -> &[Vec<Elem>] {
        &self.mul
    }

    /// True when every non-zero element has a multiplicative inverse.
    pub fn is_field(&self) -> bool {
        (0..self.order())
            .filter(|&a| a != self.zero)
            .all(|a| (0..self.order()).any(|b| self.mul(a, b) == self.one))
    }

    /// Checks every ring axiom over all element triples.
    pub fn verify_axioms(&self) -> AxiomReport {
        let m = self.order();
        let els = 0..m;
        let mut rep = AxiomReport {
            additive_group: true,
            additive_commutative: true,
            mul_associative: true,
            mul_identity: true,
            distributive: true,
        };
        for a in els.clone() {
            if self.add(a, self.zero) != a || self.add(self.neg(a), a) != self.zero {
                rep.additive_group = false;
            }
            if self.mul(a, self.one) != a || self.mul(self.one, a) != a {
                rep.mul_identity = false;
            }
            for b in els.clone() {
                if self.add(a, b) != self.add(b, a) {
                    rep.additive_commutative = false;
                }
                for c in els.clone() {
                    if self.add(self.add(a, b), c) != self.add(a, self.add(b, c)) {
                        rep.additive_group = false;
                    }
                    if self.mul(self.mul(a, b), c) != self.mul(a, self.mul(b, c)) {
                        rep.mul_associative = false;
                    }
                    if self.mul(a, self.add(b, c)) != self.add(self.mul(a, b), self.mul(a, c))
                        || self.mul(self.add(a, b), c) != self.add(self.mul(a, c), self.mul(b, c))
                    {
                        rep.distributive = false;
                    }
                }
            }
        }
        rep
    }

    /// `k`-fold sum of `a`.
    pub fn scale(&self, k: usize, a: Elem) -> Elem {
        (0..k).fold(self.zero, |acc, _| self.add(acc, a))
    }
}

/// A left ideal, stored as its sorted member indices.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct LeftIdeal {
    members: Vec<Elem>,
}

impl LeftIdeal {
    /// Validates `members` against the left-ideal conditions in `ring`.
    pub fn new(ring: &FiniteRing, members: impl IntoIterator<Item = Elem>) -> Result<LeftIdeal> {
        let set: BTreeSet<Elem> = members.into_iter().collect();
        if !is_left_ideal(ring, &set) {
            return Err(Error::InvalidRing(format!("{set:?} is not a left ideal")));
        }
        Ok(LeftIdeal {
            members: set.into_iter().collect(),
        })
    }

    pub fn members(&self) -> &[Elem] {
        &self.members
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn contains(&self, a: Elem) -> bool {
        self.members.binary_search(&a).is_ok()
    }

    pub fn is_zero(&self) -> bool {
        self.members.len() == 1
    }
}

/// Direct check of the left-ideal conditions on a subset.
pub fn is_left_ideal(ring: &FiniteRing, set: &BTreeSet<Elem>) -> bool {
    if !set.contains(&ring.zero()) {
        return false;
    }
    set.iter().all(|&x| {
        set.contains(&ring.neg(x))
            && set.iter().all(|&y| set.contains(&ring.add(x, y)))
            && (0..ring.order()).all(|r| set.contains(&ring.mul(r, x)))
    })
}

/// All left ideals, sorted by cardinality then by members.
pub fn enumerate_left_ideals(ring: &FiniteRing) -> Result<Vec<LeftIdeal>> {
    enumerate_left_ideals_bounded(ring, DEFAULT_ORDER_BOUND)
}

pub fn enumerate_left_ideals_bounded(ring: &FiniteRing, bound: usize) -> Result<Vec<LeftIdeal>> {
    let m = ring.order();
    if m > bound {
        return Err(Error::OrderBound { order: m, bound });
    }
    // R·a is already closed under addition: ra + r'a = (r + r')a.
    let mut found: BTreeSet<Vec<Elem>> = (0..m)
        .map(|a| {
            let s: BTreeSet<Elem> = (0..m).map(|r| ring.mul(r, a)).collect();
            s.into_iter().collect()
        })
        .collect();
    loop {
        let current: Vec<Vec<Elem>> = found.iter().cloned().collect();
        let mut grew = false;
        for (i, a) in current.iter().enumerate() {
            for b in &current[i + 1..] {
                let s: BTreeSet<Elem> = a
                    .iter()
                    .flat_map(|&x| b.iter().map(move |&y| ring.add(x, y)))
                    .collect();
                grew |= found.insert(s.into_iter().collect());
            }
        }
        if !grew {
            break;
        }
    }
    let mut ideals: Vec<LeftIdeal> = found.into_iter().map(|members| LeftIdeal { members }).collect();
    ideals.sort_by(|a, b| a.len().cmp(&b.len()).then_with(|| a.members.cmp(&b.members)));
    Ok(ideals)
}

/// Cosets `x + I` of a left ideal; the zero coset comes first and the rest
/// are ordered by their smallest member.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct QuotientPartition {
    ideal: LeftIdeal,
    cosets: Vec<Vec<Elem>>,
    coset_of: Vec<usize>,
}

impl QuotientPartition {
    pub fn new(ring: &FiniteRing, ideal: &LeftIdeal) -> QuotientPartition {
        let m = ring.order();
        let mut coset_of = vec![usize::MAX; m];
        let mut cosets: Vec<Vec<Elem>> = Vec::new();
        let order = std::iter::once(ring.zero()).chain((0..m).filter(|&x| x != ring.zero()));
        for x in order {
            if coset_of[x] != usize::MAX {
                continue;
            }
            let mut c: Vec<Elem> = ideal.members.iter().map(|&i| ring.add(x, i)).collect();
            c.sort_unstable();
            for &y in &c {
                coset_of[y] = cosets.len();
            }
            cosets.push(c);
        }
        QuotientPartition {
            ideal: ideal.clone(),
            cosets,
            coset_of,
        }
    }

    pub fn ideal(&self) -> &LeftIdeal {
        &self.ideal
    }

    pub fn cosets(&self) -> &[Vec<Elem>] {
        &self.cosets
    }

    /// Index of the coset containing `a`.
    pub fn coset_of(&self, a: Elem) -> usize {
        self.coset_of[a]
    }

    /// Element-to-coset map, one entry per ring element.
    pub fn assignment(&self) -> &[usize] {
        &self.coset_of
    }
}

pub fn quotient_partition(ring: &FiniteRing, ideal: &LeftIdeal) -> QuotientPartition {
    QuotientPartition::new(ring, ideal)
}

/// A `rows x cols` matrix over a ring, row-major.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RingMatrix {
    pub rows: usize,
    pub cols: usize,
    pub entries: Vec<Elem>,
}

impl RingMatrix {
    pub fn new(rows: usize, cols: usize, entries: Vec<Elem>) -> Result<RingMatrix> {
        if entries.len() != rows * cols {
            return Err(Error::Dimension(format!(
                "{} entries for a {rows}x{cols} matrix",
                entries.len()
            )));
        }
        Ok(RingMatrix { rows, cols, entries })
    }

    pub fn zero(ring: &FiniteRing, rows: usize, cols: usize) -> RingMatrix {
        RingMatrix {
            rows,
            cols,
            entries: vec![ring.zero(); rows * cols],
        }
    }

    pub fn identity(ring: &FiniteRing, n: usize) -> RingMatrix {
        let mut m = RingMatrix::zero(ring, n, n);
        for i in 0..n {
            m.entries[i * n + i] = ring.one();
        }
        m
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> Elem {
        self.entries[i * self.cols + j]
    }

    pub fn row(&self, i: usize) -> &[Elem] {
        &self.entries[i * self.cols..(i + 1) * self.cols]
    }
}

/// Entries i.i.d. uniform over the ring.
pub fn random_linear_map<R: Rng + ?Sized>(
    ring: &FiniteRing,
    k: usize,
    n: usize,
    rng: &mut R,
) -> RingMatrix {
    let m = ring.order();
    RingMatrix {
        rows: k,
        cols: n,
        entries: (0..k * n).map(|_| rng.random_range(0..m)).collect(),
    }
}

/// `y_i = sum_j a_ij x_j`.
pub fn apply_linear_map(ring: &FiniteRing, a: &RingMatrix, x: &[Elem]) -> Result<Vec<Elem>> {
    if x.len() != a.cols {
        return Err(Error::Dimension(format!(
            "vector of length {} for a matrix with {} columns",
            x.len(),
            a.cols
        )));
    }
    Ok(apply_unchecked(ring, a, x))
}

pub(crate) fn apply_unchecked(ring: &FiniteRing, a: &RingMatrix, x: &[Elem]) -> Vec<Elem> {
    (0..a.rows)
        .map(|i| {
            a.row(i)
                .iter()
                .zip(x)
                .fold(ring.zero(), |acc, (&aij, &xj)| ring.add(acc, ring.mul(aij, xj)))
        })
        .collect()
}

pub fn add_vectors(ring: &FiniteRing, x: &[Elem], y: &[Elem]) -> Vec<Elem> {
    x.iter().zip(y).map(|(&a, &b)| ring.add(a, b)).collect()
}
