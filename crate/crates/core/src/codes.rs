//! Prime-field arithmetic and unionized coset codes.
//!
//! A code over `F_p` with sizes `(n, k, l)` is a `k × n` generator `G` and a
//! table `h` of `p^l` shift vectors. Codeword `W(a, i) = aG + h(i)`. Vectors
//! in `F_p^m` are indexed as base-`p` integers, most significant digit first.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{dim_err, Error, Result};

/// Largest `p^n` handled by the word-indexed tables.
pub const WORD_SPACE_CAP: u64 = 1 << 20;

/// Largest number of `(G, h)` realisations enumerated exhaustively.
pub const ENUMERATION_CAP: u64 = 1 << 24;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PrimeField {
    p: u64,
}

fn is_prime(p: u64) -> bool {
    p >= 2 && (2..).take_while(|d| d * d <= p).all(|d| p % d != 0)
}

impl PrimeField {
    pub fn new(p: u64) -> Result<Self> {
        if !is_prime(p) {
            return Err(Error::Argument(format!("{p} is not prime")));
        }
        Ok(Self { p })
    }

    pub fn p(&self) -> u64 {
        self.p
    }

    pub fn add(&self, a: u64, b: u64) -> u64 {
        (a + b) % self.p
    }

    pub fn sub(&self, a: u64, b: u64) -> u64 {
        (a + self.p - b % self.p) % self.p
    }

    pub fn mul(&self, a: u64, b: u64) -> u64 {
        (a * b) % self.p
    }

    pub fn neg(&self, a: u64) -> u64 {
        (self.p - a % self.p) % self.p
    }

    /// Multiplicative inverse by Fermat; `None` for zero.
    pub fn inv(&self, a: u64) -> Option<u64> {
        if a % self.p == 0 {
            return None;
        }
        let (mut base, mut exp, mut acc) = (a % self.p, self.p - 2, 1u64);
        while exp > 0 {
            if exp & 1 == 1 {
                acc = acc * base % self.p;
            }
            base = base * base % self.p;
            exp >>= 1;
        }
        Some(acc)
    }

    pub fn add_vec(&self, a: &[u64], b: &[u64]) -> Vec<u64> {
        a.iter().zip(b).map(|(&x, &y)| self.add(x, y)).collect()
    }

    /// `a M` for a row vector `a` and a matrix given by rows.
    pub fn vec_mat(&self, a: &[u64], m: &[Vec<u64>], cols: usize) -> Vec<u64> {
        let mut out = vec![0; cols];
        for (&coef, row) in a.iter().zip(m) {
            if coef != 0 {
                for (o, &r) in out.iter_mut().zip(row) {
                    *o = (*o + coef * r) % self.p;
                }
            }
        }
        out
    }

    /// Rank of a matrix over `F_p` by Gaussian elimination.
    pub fn rank(&self, m: &[Vec<u64>]) -> usize {
        let mut rows: Vec<Vec<u64>> = m.to_vec();
        let cols = rows.first().map_or(0, |r| r.len());
        let mut rank = 0;
        for col in 0..cols {
            let Some(pivot) = (rank..rows.len()).find(|&r| rows[r][col] % self.p != 0) else {
                continue;
            };
            rows.swap(rank, pivot);
            let inv = self.inv(rows[rank][col]).expect("nonzero pivot");
            for r in 0..rows.len() {
                if r != rank && rows[r][col] != 0 {
                    let factor = self.mul(rows[r][col], inv);
                    for c in 0..cols {
                        let delta = self.mul(factor, rows[rank][c]);
                        rows[r][c] = self.sub(rows[r][c], delta);
                    }
                }
            }
            rank += 1;
        }
        rank
    }
}

pub fn pow_checked(p: u64, e: usize) -> Option<u64> {
    (0..e).try_fold(1u64, |acc, _| acc.checked_mul(p))
}

/// Base-`p` digits of `index`, length `len`, most significant first.
pub fn index_to_vec(mut index: u64, p: u64, len: usize) -> Vec<u64> {
    let mut out = vec![0; len];
    for slot in out.iter_mut().rev() {
        *slot = index % p;
        index /= p;
    }
    out
}

pub fn vec_to_index(v: &[u64], p: u64) -> u64 {
    v.iter().fold(0, |acc, &d| acc * p + d)
}

/// All `p^k` words `aG + b`, enumerated over `a` in index order.
pub fn coset_code(field: PrimeField, g: &[Vec<u64>], b: &[u64]) -> Result<Vec<Vec<u64>>> {
    let n = b.len();
    if g.iter().any(|row| row.len() != n) {
        return dim_err(format!("generator rows must have length {n}"));
    }
    let p = field.p();
    let count = pow_checked(p, g.len()).ok_or_else(|| Error::Size("p^k overflows".into()))?;
    Ok((0..count)
        .map(|ai| field.add_vec(&field.vec_mat(&index_to_vec(ai, p, g.len()), g, n), b))
        .collect())
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "UccCodeJson", into = "UccCodeJson")]
pub struct UccCode {
    field: PrimeField,
    n: usize,
    k: usize,
    l: usize,
    g: Vec<Vec<u64>>,
    h: Vec<Vec<u64>>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct UccCodeJson {
    pub p: u64,
    pub n: usize,
    pub k: usize,
    pub l: usize,
    #[serde(rename = "G")]
    pub g: Vec<Vec<u64>>,
    pub h: Vec<Vec<u64>>,
}

impl TryFrom<UccCodeJson> for UccCode {
    type Error = Error;
    fn try_from(j: UccCodeJson) -> Result<Self> {
        Self::new(PrimeField::new(j.p)?, j.n, j.k, j.l, j.g, j.h)
    }
}

impl From<UccCode> for UccCodeJson {
    fn from(c: UccCode) -> Self {
        Self { p: c.field.p(), n: c.n, k: c.k, l: c.l, g: c.g, h: c.h }
    }
}

fn check_sizes(p: u64, n: usize, k: usize, l: usize) -> Result<()> {
    match pow_checked(p, n) {
        Some(v) if v <= WORD_SPACE_CAP => {}
        _ => return Err(Error::Size(format!("p^n = {p}^{n} exceeds {WORD_SPACE_CAP}"))),
    }
    match pow_checked(p, k + l) {
        Some(v) if v <= WORD_SPACE_CAP => Ok(()),
        _ => Err(Error::Size(format!("p^(k+l) = {p}^{} exceeds {WORD_SPACE_CAP}", k + l))),
    }
}

impl UccCode {
    pub fn new(
        field: PrimeField,
        n: usize,
        k: usize,
        l: usize,
        g: Vec<Vec<u64>>,
        h: Vec<Vec<u64>>,
    ) -> Result<Self> {
        let p = field.p();
        check_sizes(p, n, k, l)?;
        if g.len() != k || g.iter().any(|r| r.len() != n) {
            return dim_err(format!("G must be {k}x{n}"));
        }
        let bins = pow_checked(p, l).expect("checked") as usize;
        if h.len() != bins || h.iter().any(|r| r.len() != n) {
            return dim_err(format!("h must hold {bins} shift vectors of length {n}"));
        }
        if g.iter().chain(&h).flatten().any(|&x| x >= p) {
            return Err(Error::Validation(format!("entries must lie in [0, {p})")));
        }
        Ok(Self { field, n, k, l, g, h })
    }

    /// Uniform `G` and `h` under `rng`.
    pub fn random<R: Rng + ?Sized>(field: PrimeField, n: usize, k: usize, l: usize, rng: &mut R) -> Result<Self> {
        check_sizes(field.p(), n, k, l)?;
        let g = random_matrix(field, k, n, rng);
        let h = random_shifts(field, n, l, rng);
        Self::new(field, n, k, l, g, h)
    }

    pub fn field(&self) -> PrimeField {
        self.field
    }

    pub fn p(&self) -> u64 {
        self.field.p()
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn l(&self) -> usize {
        self.l
    }

    pub fn generator(&self) -> &[Vec<u64>] {
        &self.g
    }

    pub fn shifts(&self) -> &[Vec<u64>] {
        &self.h
    }

    pub fn num_messages(&self) -> usize {
        self.p().pow(self.k as u32) as usize
    }

    pub fn num_bins(&self) -> usize {
        self.h.len()
    }

    pub fn word_space(&self) -> usize {
        self.p().pow(self.n as u32) as usize
    }

    /// Same `G`, new shift table.
    pub fn with_shifts(&self, h: Vec<Vec<u64>>, l: usize) -> Result<Self> {
        Self::new(self.field, self.n, self.k, l, self.g.clone(), h)
    }

    /// `aG` for a message index.
    pub fn linear_part(&self, a: usize) -> Vec<u64> {
        let av = index_to_vec(a as u64, self.p(), self.k);
        self.field.vec_mat(&av, &self.g, self.n)
    }

    pub fn codeword(&self, a: &[u64], i: &[u64]) -> Result<Vec<u64>> {
        let p = self.p();
        if a.len() != self.k || i.len() != self.l || a.iter().chain(i).any(|&x| x >= p) {
            return Err(Error::Argument(format!(
                "indices must lie in F_{p}^{} x F_{p}^{}",
                self.k, self.l
            )));
        }
        Ok(self.codeword_at(vec_to_index(a, p) as usize, vec_to_index(i, p) as usize))
    }

    /// `W(a, i)` by message and bin index.
    pub fn codeword_at(&self, a: usize, i: usize) -> Vec<u64> {
        self.field.add_vec(&self.linear_part(a), &self.h[i])
    }

    pub fn codeword_index(&self, a: usize, i: usize) -> usize {
        vec_to_index(&self.codeword_at(a, i), self.p()) as usize
    }

    /// Word indices of the full `(a, i)` sweep, bin-major.
    pub fn sweep(&self) -> Vec<usize> {
        let linear: Vec<Vec<u64>> = (0..self.num_messages()).map(|a| self.linear_part(a)).collect();
        let mut out = Vec::with_capacity(self.num_messages() * self.num_bins());
        for shift in &self.h {
            for lin in &linear {
                out.push(vec_to_index(&self.field.add_vec(lin, shift), self.p()) as usize);
            }
        }
        out
    }

    /// `γ_w` for every word index `w`.
    pub fn multiplicities(&self) -> Vec<u32> {
        let mut counts = vec![0u32; self.word_space()];
        for w in self.sweep() {
            counts[w] += 1;
        }
        counts
    }

    pub fn multiplicity(&self, w: &[u64]) -> Result<u32> {
        if w.len() != self.n || w.iter().any(|&x| x >= self.p()) {
            return Err(Error::Argument("word outside F_p^n".into()));
        }
        let target = vec_to_index(w, self.p()) as usize;
        Ok(self.sweep().into_iter().filter(|&x| x == target).count() as u32)
    }

    /// Coset `{aG + h(i)}` for every bin `i`, as word vectors.
    pub fn bins(&self) -> Vec<Vec<Vec<u64>>> {
        (0..self.num_bins())
            .map(|i| (0..self.num_messages()).map(|a| self.codeword_at(a, i)).collect())
            .collect()
    }
}

fn random_matrix<R: Rng + ?Sized>(field: PrimeField, rows: usize, cols: usize, rng: &mut R) -> Vec<Vec<u64>> {
    (0..rows)
        .map(|_| (0..cols).map(|_| rng.random_range(0..field.p())).collect())
        .collect()
}

pub fn random_shifts<R: Rng + ?Sized>(field: PrimeField, n: usize, l: usize, rng: &mut R) -> Vec<Vec<u64>> {
    random_matrix(field, field.p().pow(l as u32) as usize, n, rng)
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CodeEnsembleSpec {
    pub p: u64,
    pub n: usize,
    pub k: usize,
    pub l: usize,
    #[serde(rename = "N")]
    pub big_n: usize,
    pub seed: u64,
}

/// Per-purpose RNG stream so unrelated draws under one seed never overlap.
pub fn rng_for(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// `N` codes sharing one uniform `G`, each with an independent uniform `h`.
pub fn sample_ensemble(spec: &CodeEnsembleSpec) -> Result<Vec<UccCode>> {
    if spec.big_n == 0 {
        return Err(Error::Argument("N must be at least 1".into()));
    }
    let field = PrimeField::new(spec.p)?;
    check_sizes(spec.p, spec.n, spec.k, spec.l)?;
    let mut rng = rng_for(spec.seed, 0);
    let g = random_matrix(field, spec.k, spec.n, &mut rng);
    (0..spec.big_n)
        .map(|_| {
            let h = random_shifts(field, spec.n, spec.l, &mut rng);
            UccCode::new(field, spec.n, spec.k, spec.l, g.clone(), h)
        })
        .collect()
}

/// Exhaustive enumeration over every `(G, h)`: each realisation is passed as
/// the bin-major sweep of word indices.
fn for_each_realisation(p: u64, n: usize, k: usize, l: usize, mut f: impl FnMut(&[usize])) -> Result<u64> {
    let field = PrimeField::new(p)?;
    check_sizes(p, n, k, l)?;
    let bins = p.pow(l as u32) as usize;
    let digits = k * n + bins * n;
    let total = pow_checked(p, digits)
        .filter(|&t| t <= ENUMERATION_CAP)
        .ok_or_else(|| Error::Size(format!("{p}^{digits} realisations exceed {ENUMERATION_CAP}")))?;
    for r in 0..total {
        let d = index_to_vec(r, p, digits);
        let g: Vec<Vec<u64>> = d[..k * n].chunks(n).map(<[u64]>::to_vec).collect();
        let h: Vec<Vec<u64>> = d[k * n..].chunks(n).map(<[u64]>::to_vec).collect();
        let code = UccCode { field, n, k, l, g, h };
        f(&code.sweep());
    }
    Ok(total)
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct PairwiseReport {
    pub p: u64,
    pub n: usize,
    pub k: usize,
    pub l: usize,
    pub realisations: u64,
    /// Largest `|P(W(a,i) = w) - p^-n|`.
    pub max_marginal_deviation: f64,
    /// Largest `|P(W(a,i) = w, W(a',i') = w') - p^-2n|` over distinct indices.
    pub max_pair_deviation: f64,
    pub pass: bool,
}

/// Exact check that every codeword is uniform and every pair of distinct
/// codewords is jointly uniform over the uniform `(G, h)` ensemble.
pub fn pairwise_independence_check(p: u64, n: usize, k: usize, l: usize) -> Result<PairwiseReport> {
    let q = p.pow(n as u32) as usize;
    let m = p.pow((k + l) as u32) as usize;
    let mut marginal = vec![0u64; m * q];
    let mut pairs = vec![0u64; m * m * q * q];
    let total = for_each_realisation(p, n, k, l, |sweep| {
        for (x, &wx) in sweep.iter().enumerate() {
            marginal[x * q + wx] += 1;
            for (y, &wy) in sweep.iter().enumerate() {
                pairs[((x * m + y) * q + wx) * q + wy] += 1;
            }
        }
    })?;
    let dev = |count: u64, cells: usize| -> f64 {
        let scaled = count as i128 * cells as i128 - total as i128;
        scaled.unsigned_abs() as f64 / (total as f64 * cells as f64)
    };
    let max_marginal_deviation = marginal.iter().map(|&c| dev(c, q)).fold(0.0, f64::max);
    let mut max_pair_deviation: f64 = 0.0;
    for x in 0..m {
        for y in (0..m).filter(|&y| y != x) {
            let base = (x * m + y) * q * q;
            for &c in &pairs[base..base + q * q] {
                max_pair_deviation = max_pair_deviation.max(dev(c, q * q));
            }
        }
    }
    Ok(PairwiseReport {
        p,
        n,
        k,
        l,
        realisations: total,
        max_marginal_deviation,
        max_pair_deviation,
        pass: max_marginal_deviation == 0.0 && max_pair_deviation == 0.0,
    })
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct DependenceWitness {
    /// `(a, i)` message/bin index pairs of the dependent codewords.
    pub indices: Vec<(usize, usize)>,
    /// Nonzero `c` with `Σ_j c_j W_j = 0` on every realisation.
    pub relation: Vec<u64>,
    /// Distinct joint values observed, versus `p^(r n)` under independence.
    pub joint_support: usize,
    pub independent_support: u64,
}

/// Smallest set (size 3, then 4) of distinct codewords whose joint law is not
/// uniform, together with the linear relation that forces it.
pub fn dependence_witness(p: u64, n: usize, k: usize, l: usize) -> Result<Option<DependenceWitness>> {
    let field = PrimeField::new(p)?;
    let mut sweeps: Vec<Vec<usize>> = Vec::new();
    for_each_realisation(p, n, k, l, |s| sweeps.push(s.to_vec()))?;
    let m = p.pow((k + l) as u32) as usize;
    let messages = p.pow(k as u32) as usize;
    for order in 3..=4usize {
        if order > m {
            break;
        }
        for combo in combinations(m, order) {
            let coeff_count = p.pow(order as u32);
            for ci in 1..coeff_count {
                let coeffs = index_to_vec(ci, p, order);
                let holds = sweeps.iter().all(|s| {
                    let mut acc = vec![0u64; n];
                    for (&x, &cx) in combo.iter().zip(&coeffs) {
                        let w = index_to_vec(s[x] as u64, p, n);
                        for (a, v) in acc.iter_mut().zip(w) {
                            *a = field.add(*a, field.mul(cx, v));
                        }
                    }
                    acc.iter().all(|&v| v == 0)
                });
                if holds {
                    let mut seen = std::collections::BTreeSet::new();
                    for s in &sweeps {
                        seen.insert(combo.iter().map(|&x| s[x]).collect::<Vec<_>>());
                    }
                    return Ok(Some(DependenceWitness {
                        indices: combo.iter().map(|&x| (x % messages, x / messages)).collect(),
                        relation: coeffs,
                        joint_support: seen.len(),
                        independent_support: p.pow((order * n) as u32),
                    }));
                }
            }
        }
    }
    Ok(None)
}

fn combinations(m: usize, r: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut cur = Vec::with_capacity(r);
    fn rec(start: usize, m: usize, r: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == r {
            out.push(cur.clone());
            return;
        }
        for x in start..m {
            cur.push(x);
            rec(x + 1, m, r, cur, out);
            cur.pop();
        }
    }
    rec(0, m, r, &mut cur, &mut out);
    out
}
