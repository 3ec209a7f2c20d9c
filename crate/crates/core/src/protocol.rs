//! Desk-scale construction of the structured approximating measurement and
//! its faithfulness, for one sender (point-to-point) and for two senders
//! whose codes share a generator matrix (distributed).
//!
//! Words in `F_p^n` are handled by their base-`p` index. Operators on `n`
//! copies of a `d`-dimensional system are dense `d^n × d^n` matrices, so the
//! caps below keep everything small.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::codes::{rng_for, random_shifts, sample_ensemble, CodeEnsembleSpec, PrimeField, UccCode};
use crate::cq::{flatten, unflatten, StochasticMap};
use crate::error::{dim_err, Error, Result};
use crate::linalg::{
    eigh, hermitize, identity, kron_all, kron_power, max_eigenvalue, min_eigenvalue,
    permute_registers, psd_pinv_sqrt, psd_sqrt, trace_norm, CMatrix, DensityOperator,
    HermitianOperator, Povm, SUPPORT_CUTOFF,
};

/// Largest number of sequences enumerated for typical sets.
pub const SEQUENCE_CAP: usize = 1 << 20;

/// Largest `dim^n` for which `n`-copy operators are built.
pub const OPERATOR_DIM_CAP: usize = 256;

/// Eigenvalue threshold for the pruning projector.
pub const PRUNE_THRESHOLD: f64 = -1e-10;

#[derive(Clone, Debug)]
pub struct CanonicalEnsemble {
    pub weights: Vec<f64>,
    /// `None` where the weight vanishes.
    pub post_states: Vec<Option<DensityOperator>>,
}

/// `λ_w = Tr{Λ_w ρ}`, `ρ̂_w = √ρ Λ_w √ρ / λ_w`.
pub fn canonical_ensemble(m: &Povm, rho: &DensityOperator) -> Result<CanonicalEnsemble> {
    if m.dim() != rho.dim() {
        return dim_err("POVM and state dimensions differ");
    }
    let root = psd_sqrt(rho.op())?;
    let mut weights = Vec::with_capacity(m.len());
    let mut post_states = Vec::with_capacity(m.len());
    for e in m.elements() {
        let sandwiched = hermitize(&(root.matrix() * e.matrix() * root.matrix()));
        let w = sandwiched.trace().re.max(0.0);
        weights.push(w);
        post_states.push(if w > 1e-14 {
            Some(DensityOperator::single(sandwiched.unscale(w))?)
        } else {
            None
        });
    }
    Ok(CanonicalEnsemble { weights, post_states })
}

impl CanonicalEnsemble {
    /// Adds null outcomes until there are `len`.
    pub fn padded(mut self, len: usize) -> Self {
        while self.weights.len() < len {
            self.weights.push(0.0);
            self.post_states.push(None);
        }
        self
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct TypicalSet {
    pub distribution: Vec<f64>,
    pub n: usize,
    pub delta: f64,
    /// Word indices of the members, increasing.
    pub members: Vec<usize>,
    #[serde(skip)]
    mask: Vec<bool>,
}

impl TypicalSet {
    pub fn contains(&self, word: usize) -> bool {
        self.mask.get(word).copied().unwrap_or(false)
    }

    pub fn alphabet(&self) -> usize {
        self.distribution.len()
    }

    pub fn size(&self) -> usize {
        self.members.len()
    }

    /// `P^n(T)`.
    pub fn probability(&self) -> f64 {
        let q = self.alphabet();
        self.members
            .iter()
            .map(|&w| unflatten(w, &vec![q; self.n]).iter().map(|&a| self.distribution[a]).product::<f64>())
            .sum()
    }

    /// Smallest word index outside the set, if any.
    pub fn first_outsider(&self) -> Option<usize> {
        self.mask.iter().position(|&m| !m)
    }
}

fn check_sequences(alphabet: usize, n: usize) -> Result<usize> {
    match alphabet.checked_pow(n as u32) {
        Some(v) if v <= SEQUENCE_CAP => Ok(v),
        _ => Err(Error::Size(format!("{alphabet}^{n} sequences exceed {SEQUENCE_CAP}"))),
    }
}

/// Strong typicality: `|N(a)/n - λ_a| ≤ δ λ_a` for every letter, and letters
/// of probability zero never occur.
pub fn typical_set(dist: &[f64], n: usize, delta: f64) -> Result<TypicalSet> {
    let q = dist.len();
    let total = check_sequences(q, n)?;
    let radices = vec![q; n];
    let mut mask = vec![false; total];
    let mut members = Vec::new();
    for (w, slot) in mask.iter_mut().enumerate() {
        let mut counts = vec![0usize; q];
        for a in unflatten(w, &radices) {
            counts[a] += 1;
        }
        let ok = counts.iter().zip(dist).all(|(&c, &lam)| {
            if lam <= 0.0 {
                c == 0
            } else {
                (c as f64 / n as f64 - lam).abs() <= delta * lam + 1e-12
            }
        });
        if ok {
            *slot = true;
            members.push(w);
        }
    }
    Ok(TypicalSet { distribution: dist.to_vec(), n, delta, members, mask })
}

struct Spectrum {
    vals: Vec<f64>,
    vecs: CMatrix,
    entropy: f64,
}

fn spectrum(m: &CMatrix) -> Spectrum {
    let (vals, vecs) = eigh(m);
    let top = vals.last().copied().unwrap_or(0.0).max(0.0);
    let vals: Vec<f64> = vals.into_iter().map(|v| if v > SUPPORT_CUTOFF * top { v } else { 0.0 }).collect();
    let entropy = vals.iter().filter(|&&v| v > 0.0).map(|v| -v * v.log2()).sum();
    Spectrum { vals, vecs, entropy }
}

/// Projector onto product eigenvectors whose eigenvalue sequence is
/// entropy-typical within every letter class: for each class `c` with `n_c`
/// positions, `|-(1/n_c) Σ log λ - H_c| ≤ δ`, zero eigenvalues excluded.
fn class_typical_projector(classes: &[usize], spectra: &[&Spectrum], delta: f64) -> Result<CMatrix> {
    let d = spectra.first().map_or(1, |s| s.vals.len());
    let n = classes.len();
    let total = check_sequences(d, n)?;
    if total > OPERATOR_DIM_CAP {
        return Err(Error::Size(format!("{d}^{n} exceeds operator cap {OPERATOR_DIM_CAP}")));
    }
    let basis = kron_all(classes.iter().map(|&c| &spectra[c].vecs));
    let radices = vec![d; n];
    let mut kept = Vec::new();
    for j in 0..total {
        let digits = unflatten(j, &radices);
        let mut sums = vec![(0.0f64, 0usize); spectra.len()];
        let mut ok = true;
        for (&c, &jj) in classes.iter().zip(&digits) {
            let v = spectra[c].vals[jj];
            if v <= 0.0 {
                ok = false;
                break;
            }
            sums[c].0 -= v.log2();
            sums[c].1 += 1;
        }
        ok = ok
            && sums
                .iter()
                .zip(spectra)
                .all(|(&(s, cnt), sp)| cnt == 0 || (s / cnt as f64 - sp.entropy).abs() <= delta + 1e-12);
        if ok {
            kept.push(j);
        }
    }
    let mut cols = CMatrix::zeros(total, kept.len());
    for (dst, &src) in kept.iter().enumerate() {
        cols.set_column(dst, &basis.column(src));
    }
    Ok(&cols * cols.adjoint())
}

/// `δ`-typical projector of `ρ^{⊗n}` (entropic criterion on eigenvalue
/// sequences).
pub fn typical_projector(rho: &DensityOperator, n: usize, delta: f64) -> Result<CMatrix> {
    let sp = spectrum(rho.matrix());
    class_typical_projector(&vec![0; n], &[&sp], delta)
}

/// Conditional typical projector of `ρ̂_{w_1} ⊗ … ⊗ ρ̂_{w_n}`: the entropic
/// criterion applied separately to each letter class of `w`.
pub fn cond_typical_projector(ens: &CanonicalEnsemble, w: &[usize], delta: f64) -> Result<CMatrix> {
    let spectra: Vec<Spectrum> = ens
        .post_states
        .iter()
        .map(|s| match s {
            Some(st) => Ok(spectrum(st.matrix())),
            None => Err(Error::Argument("conditional projector on a null letter".into())),
        })
        .collect::<Result<Vec<_>>>()
        .or_else(|_| {
            // Null letters never appear in `w` when it is typical; substitute
            // identity spectra so indexing stays aligned.
            let d = ens.post_states.iter().flatten().next().map_or(1, |s| s.dim());
            Ok::<_, Error>(
                ens.post_states
                    .iter()
                    .map(|s| match s {
                        Some(st) => spectrum(st.matrix()),
                        None => spectrum(&identity(d).unscale(d as f64)),
                    })
                    .collect(),
            )
        })?;
    if let Some(&bad) = w.iter().find(|&&a| ens.post_states.get(a).is_none_or(Option::is_none)) {
        return Err(Error::Argument(format!("letter {bad} has zero weight")));
    }
    let refs: Vec<&Spectrum> = spectra.iter().collect();
    class_typical_projector(w, &refs, delta)
}

fn product_state(ens: &CanonicalEnsemble, w: &[usize]) -> Result<CMatrix> {
    let mats = w
        .iter()
        .map(|&a| {
            ens.post_states[a]
                .as_ref()
                .map(|s| s.matrix().clone())
                .ok_or_else(|| Error::Argument(format!("letter {a} has zero weight")))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(kron_all(mats.iter()))
}

/// `Π_ρ Π_w ρ̂_w Π_w Π_ρ` for typical `w`, zero otherwise.
pub fn cut_post_state(
    ens: &CanonicalEnsemble,
    pi_rho: &CMatrix,
    typical: &TypicalSet,
    word: usize,
    delta: f64,
) -> Result<CMatrix> {
    let dim = pi_rho.nrows();
    if !typical.contains(word) {
        return Ok(CMatrix::zeros(dim, dim));
    }
    let w = unflatten(word, &vec![ens.len(); typical.n]);
    let pi_w = cond_typical_projector(ens, &w, delta)?;
    let rho_w = product_state(ens, &w)?;
    Ok(hermitize(&(pi_rho * &pi_w * rho_w * &pi_w * pi_rho)))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProtocolParams {
    pub n: usize,
    pub k: usize,
    /// Bin exponent (first sender in the distributed setting).
    pub l: usize,
    /// Bin exponent of the second sender.
    #[serde(default)]
    pub l2: usize,
    pub p: u64,
    #[serde(rename = "N")]
    pub big_n: usize,
    pub eta: f64,
    pub delta: f64,
    pub seed: u64,
}

impl Default for ProtocolParams {
    fn default() -> Self {
        Self { n: 3, k: 0, l: 3, l2: 3, p: 2, big_n: 1, eta: 0.1, delta: 0.2, seed: 0 }
    }
}

impl ProtocolParams {
    fn validate(&self) -> Result<()> {
        if !(self.eta > 0.0 && self.eta < 1.0) {
            return Err(Error::Argument(format!("eta = {} must lie in (0,1)", self.eta)));
        }
        if self.delta <= 0.0 {
            return Err(Error::Argument("delta must be positive".into()));
        }
        if self.big_n == 0 || self.n == 0 {
            return Err(Error::Argument("n and N must be positive".into()));
        }
        PrimeField::new(self.p)?;
        Ok(())
    }

    fn log_p(&self) -> f64 {
        (self.p as f64).log2()
    }

    /// Mean codeword multiplicity `p^{k+l-n}` of the first sender's code.
    pub fn mean_multiplicity(&self) -> f64 {
        (self.p as f64).powi((self.k + self.l) as i32 - self.n as i32)
    }

    /// Sets `η = min(cap, scale / √m)` with `m` the mean multiplicity, so the
    /// pruning margin tracks the relative spread of the multiplicities.
    pub fn with_multiplicity_eta(mut self, scale: f64, cap: f64) -> Self {
        self.eta = (scale / self.mean_multiplicity().sqrt()).min(cap);
        self
    }

    /// `(R, R1, C)` in bits per copy.
    pub fn rates(&self) -> (f64, f64, f64) {
        let n = self.n as f64;
        (self.l as f64 * self.log_p() / n, self.k as f64 * self.log_p() / n, (self.big_n as f64).log2() / n)
    }
}

/// Operators derived from one code realisation.
#[derive(Clone, Debug)]
pub struct CodeOperators {
    pub code: UccCode,
    pub multiplicities: Vec<u32>,
    /// `Σ^{(μ)} = Σ_w γ_w Ā_w`.
    pub sigma: CMatrix,
    /// Pruning projector `Π^μ`.
    pub prune: CMatrix,
    /// `Γ_i` for bins `i = 0 … p^l - 1`.
    pub bins: Vec<CMatrix>,
    /// `I - Σ_i Γ_i`.
    pub completion: CMatrix,
}

/// One sender's construction: ensemble, typical objects, `Ā` table and the
/// per-code operators.
#[derive(Clone, Debug)]
pub struct SideConstruction {
    pub ensemble: CanonicalEnsemble,
    pub typical: TypicalSet,
    pub pi_rho: CMatrix,
    /// `Ā_w` for typical `w`, keyed by word index.
    pub a_bar: BTreeMap<usize, CMatrix>,
    pub codes: Vec<CodeOperators>,
}

/// Projector onto the non-negative eigenspace of `I - X` inside the range of
/// `support` (a projector).
pub fn pruning_projector(x: &CMatrix, support: &CMatrix) -> CMatrix {
    let (vals, vecs) = eigh(support);
    let range: Vec<usize> = (0..vals.len()).filter(|&i| vals[i] > 0.5).collect();
    let mut v = CMatrix::zeros(support.nrows(), range.len());
    for (dst, &src) in range.iter().enumerate() {
        v.set_column(dst, &vecs.column(src));
    }
    let reduced = CMatrix::identity(range.len(), range.len()) - v.adjoint() * x * &v;
    let (rv, rvecs) = eigh(&reduced);
    let keep: Vec<usize> = (0..rv.len()).filter(|&i| rv[i] >= PRUNE_THRESHOLD).collect();
    let mut q = CMatrix::zeros(range.len(), keep.len());
    for (dst, &src) in keep.iter().enumerate() {
        q.set_column(dst, &rvecs.column(src));
    }
    let vq = &v * q;
    hermitize(&(&vq * vq.adjoint()))
}

fn build_side(
    rho: &DensityOperator,
    m: &Povm,
    params: &ProtocolParams,
    l: usize,
    codes: Vec<UccCode>,
) -> Result<SideConstruction> {
    let p = params.p as usize;
    if m.len() > p {
        return Err(Error::Argument(format!("POVM has {} > p = {p} outcomes", m.len())));
    }
    let n = params.n;
    let dim_n = rho
        .dim()
        .checked_pow(n as u32)
        .filter(|&d| d <= OPERATOR_DIM_CAP)
        .ok_or_else(|| Error::Size(format!("{}^{n} exceeds operator cap", rho.dim())))?;
    let ensemble = canonical_ensemble(m, rho)?.padded(p);
    let typical = typical_set(&ensemble.weights, n, params.delta)?;
    let pi_rho = typical_projector(rho, n, params.delta)?;
    let inv_root = kron_power(psd_pinv_sqrt(rho.op())?.matrix(), n);
    let scale = (params.p as f64).powi(n as i32) / ((1.0 + params.eta) * (params.p as f64).powi((params.k + l) as i32));
    let radices = vec![p; n];
    let mut a_bar = BTreeMap::new();
    for &w in &typical.members {
        let lam: f64 = unflatten(w, &radices).iter().map(|&a| ensemble.weights[a]).product();
        let cut = cut_post_state(&ensemble, &pi_rho, &typical, w, params.delta)?;
        a_bar.insert(w, hermitize(&(&inv_root * cut * &inv_root)).scale(scale * lam));
    }
    let codes = codes
        .into_iter()
        .map(|code| {
            let multiplicities = code.multiplicities();
            let mut sigma = CMatrix::zeros(dim_n, dim_n);
            for (&w, a) in &a_bar {
                if multiplicities[w] > 0 {
                    sigma += a.scale(multiplicities[w] as f64);
                }
            }
            let prune = pruning_projector(&sigma, &pi_rho);
            let pruned: BTreeMap<usize, CMatrix> =
                a_bar.iter().map(|(&w, a)| (w, hermitize(&(&prune * a * &prune)))).collect();
            let sweep = code.sweep();
            let messages = code.num_messages();
            let bins: Vec<CMatrix> = sweep
                .chunks(messages)
                .map(|bin| {
                    bin.iter().fold(CMatrix::zeros(dim_n, dim_n), |acc, w| match pruned.get(w) {
                        Some(a) => acc + a,
                        None => acc,
                    })
                })
                .collect();
            let total = bins.iter().fold(CMatrix::zeros(dim_n, dim_n), |acc, g| acc + g);
            let completion = identity(dim_n) - total;
            CodeOperators { code, multiplicities, sigma, prune, bins, completion }
        })
        .collect();
    Ok(SideConstruction { ensemble, typical, pi_rho, a_bar, codes })
}

/// Decoder output for one bin (or bin pair).
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Decoded {
    Word(usize),
    Fallback,
}

/// Designated non-typical word; `Sentinel` when every word is typical.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FallbackWord {
    Word(usize),
    Sentinel,
}

#[derive(Clone, Debug, Default, Serialize, Deserialize)]
pub struct BinStats {
    pub bins: usize,
    /// Bins whose coset holds exactly one typical codeword index.
    pub unique: usize,
    pub empty: usize,
    /// Bins with two or more typical candidates (decoded to the fallback).
    pub collisions: usize,
}

/// Decoder table entry for a coset `{aG + shift}`: the unique `a` landing in
/// `typical` gives its word, anything else falls back.
fn decode_coset(code: &UccCode, shift: &[u64], typical: &TypicalSet) -> (Decoded, usize) {
    let field = code.field();
    let p = code.p();
    let mut hits = Vec::new();
    for a in 0..code.num_messages() {
        let w = field.add_vec(&code.linear_part(a), shift);
        let idx = crate::codes::vec_to_index(&w, p) as usize;
        if typical.contains(idx) {
            hits.push(idx);
        }
    }
    match hits.as_slice() {
        [w] => (Decoded::Word(*w), 1),
        _ => (Decoded::Fallback, hits.len()),
    }
}

fn seq_prob(p_zw: &StochasticMap, w: Decoded, fallback: FallbackWord, z: &[usize], p: usize) -> f64 {
    let word = match (w, fallback) {
        (Decoded::Word(x), _) | (Decoded::Fallback, FallbackWord::Word(x)) => x,
        (Decoded::Fallback, FallbackWord::Sentinel) => {
            return (1.0 / p_zw.outputs() as f64).powi(z.len() as i32);
        }
    };
    p_zw.prob_seq(&unflatten(word, &vec![p; z.len()]), z)
}

/// `P_{Z|W}` extended to all of `F_p` with uniform rows for the extra letters.
pub fn pad_channel(p_zw: &StochasticMap, p: usize) -> Result<StochasticMap> {
    let q = p_zw.inputs().first().copied().unwrap_or(0);
    if p_zw.inputs().len() != 1 || q > p {
        return dim_err("channel must have one input alphabet of size at most p");
    }
    let mut rows = p_zw.rows().to_vec();
    let z = p_zw.outputs();
    rows.resize(p, vec![1.0 / z as f64; z]);
    StochasticMap::new(vec![p], z, rows)
}

#[derive(Clone, Debug)]
pub struct ProtocolInstance {
    pub params: ProtocolParams,
    pub side: SideConstruction,
    pub fallback: FallbackWord,
    /// Decoder table per code: `decoder[μ][i]`.
    pub decoder: Vec<Vec<Decoded>>,
    pub bin_stats: Vec<BinStats>,
    pub channel: StochasticMap,
}

/// Point-to-point construction.
pub fn build_instance(
    params: &ProtocolParams,
    m: &Povm,
    rho: &DensityOperator,
    p_zw: &StochasticMap,
) -> Result<ProtocolInstance> {
    params.validate()?;
    if p_zw.inputs() != [m.len()] {
        return dim_err("channel input alphabet must match the POVM");
    }
    let spec = CodeEnsembleSpec {
        p: params.p,
        n: params.n,
        k: params.k,
        l: params.l,
        big_n: params.big_n,
        seed: params.seed,
    };
    let codes = sample_ensemble(&spec)?;
    let side = build_side(rho, m, params, params.l, codes)?;
    let fallback = side.typical.first_outsider().map_or(FallbackWord::Sentinel, FallbackWord::Word);
    let mut decoder = Vec::new();
    let mut bin_stats = Vec::new();
    for ops in &side.codes {
        let mut stats = BinStats { bins: ops.code.num_bins(), ..Default::default() };
        let table = ops
            .code
            .shifts()
            .iter()
            .map(|shift| {
                let (d, hits) = decode_coset(&ops.code, shift, &side.typical);
                match hits {
                    0 => stats.empty += 1,
                    1 => stats.unique += 1,
                    _ => stats.collisions += 1,
                }
                d
            })
            .collect();
        decoder.push(table);
        bin_stats.push(stats);
    }
    let channel = pad_channel(p_zw, params.p as usize)?;
    Ok(ProtocolInstance { params: params.clone(), side, fallback, decoder, bin_stats, channel })
}

/// `F^{(μ)}(i)`; bin `0` is the completion and always decodes to the
/// fallback. Bins `1 …= p^l` are the cosets.
pub fn decode_p2p(instance: &ProtocolInstance, mu: usize, i: usize) -> Result<Decoded> {
    let table = instance
        .decoder
        .get(mu)
        .ok_or_else(|| Error::Argument(format!("no code {mu}")))?;
    match i {
        0 => Ok(Decoded::Fallback),
        _ => table
            .get(i - 1)
            .copied()
            .ok_or_else(|| Error::Argument(format!("bin {i} out of range"))),
    }
}

/// `Λ̂_{z^n} = (1/N) Σ_μ [Σ_i Γ_i P^n(z|F(i)) + Γ_0 P^n(z|w₀)]`, indexed by
/// the flattened `z^n`.
pub fn assemble_overall(instance: &ProtocolInstance) -> Vec<CMatrix> {
    let n = instance.params.n;
    let p = instance.params.p as usize;
    let z_alpha = instance.channel.outputs();
    let outcomes = z_alpha.pow(n as u32);
    let dim = instance.side.pi_rho.nrows();
    let mut out = vec![CMatrix::zeros(dim, dim); outcomes];
    let norm = 1.0 / instance.side.codes.len() as f64;
    for (ops, table) in instance.side.codes.iter().zip(&instance.decoder) {
        // Bins sharing a decoded word share the output distribution.
        let mut grouped: BTreeMap<Decoded, CMatrix> = BTreeMap::new();
        for (g, &d) in ops.bins.iter().zip(table) {
            *grouped.entry(d).or_insert_with(|| CMatrix::zeros(dim, dim)) += g;
        }
        *grouped.entry(Decoded::Fallback).or_insert_with(|| CMatrix::zeros(dim, dim)) += &ops.completion;
        for (zi, acc) in out.iter_mut().enumerate() {
            let z = unflatten(zi, &vec![z_alpha; n]);
            for (&d, g) in &grouped {
                let pr = seq_prob(&instance.channel, d, instance.fallback, &z, p);
                if pr > 0.0 {
                    *acc += g.scale(pr * norm);
                }
            }
        }
    }
    out
}

/// `Λ_z = Σ_w P(z|w) Λ_w` and its `n`-fold tensor power, by flattened `z^n`.
pub fn target_povm(m: &Povm, p_zw: &StochasticMap, n: usize) -> Result<Vec<CMatrix>> {
    if p_zw.inputs() != [m.len()] {
        return dim_err("channel input alphabet must match the POVM");
    }
    let single: Vec<CMatrix> = (0..p_zw.outputs())
        .map(|z| {
            m.elements()
                .iter()
                .enumerate()
                .fold(CMatrix::zeros(m.dim(), m.dim()), |acc, (w, e)| acc + e.matrix().scale(p_zw.prob(&[w], z)))
        })
        .collect();
    Ok(tensor_outcomes(&single, n))
}

fn tensor_outcomes(single: &[CMatrix], n: usize) -> Vec<CMatrix> {
    let q = single.len();
    (0..q.pow(n as u32))
        .map(|zi| kron_all(unflatten(zi, &vec![q; n]).iter().map(|&z| &single[z])))
        .collect()
}

/// `Σ_x ‖√ρ (Λ_x - Λ̃_x) √ρ‖₁ + Tr{(I - Σ_x Λ̃_x) ρ}`.
pub fn faithfulness(rho: &CMatrix, target: &[CMatrix], candidate: &[CMatrix]) -> Result<f64> {
    if target.len() != candidate.len() {
        return dim_err("target and candidate have different outcome sets");
    }
    let root = psd_sqrt(&HermitianOperator::from_matrix(rho.clone())?)?;
    let root = root.matrix();
    let mut k = 0.0;
    let mut total = CMatrix::zeros(rho.nrows(), rho.ncols());
    for (t, c) in target.iter().zip(candidate) {
        k += trace_norm(&(root * (t - c) * root))?;
        total += c;
    }
    let defect = ((identity(rho.nrows()) - total) * rho).trace().re;
    Ok(k + defect)
}

/// Largest violation of `Λ_x ≥ 0` and `Σ Λ_x ≤ I`.
pub fn subpovm_defect(elements: &[CMatrix]) -> f64 {
    let Some(first) = elements.first() else { return 0.0 };
    let dim = first.nrows();
    let mut worst = 0.0f64;
    let mut total = CMatrix::zeros(dim, dim);
    for e in elements {
        worst = worst.max(-min_eigenvalue(e));
        total += e;
    }
    worst.max(max_eigenvalue(&(total - identity(dim))))
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ProtocolReport {
    pub mode: String,
    pub params: ProtocolParams,
    /// `(R, R1, C)` or, distributed, `(R1, R2, Rtilde, C1 = C2)`.
    pub rates: BTreeMap<String, f64>,
    #[serde(rename = "K")]
    pub k: f64,
    pub subpovm_defect: f64,
    pub typical_probability: f64,
    pub bins_stats: Vec<BinStats>,
    pub decoder_collisions: usize,
}

/// Builds, assembles and scores a point-to-point instance.
pub fn simulate_p2p(
    params: &ProtocolParams,
    m: &Povm,
    rho: &DensityOperator,
    p_zw: &StochasticMap,
) -> Result<ProtocolReport> {
    let inst = build_instance(params, m, rho, p_zw)?;
    let overall = assemble_overall(&inst);
    let target = target_povm(m, p_zw, params.n)?;
    let rho_n = kron_power(rho.matrix(), params.n);
    let (r, r1, c) = params.rates();
    Ok(ProtocolReport {
        mode: "p2p".into(),
        params: params.clone(),
        rates: [("R".to_string(), r), ("R1".to_string(), r1), ("C".to_string(), c)].into(),
        k: faithfulness(&rho_n, &target, &overall)?,
        subpovm_defect: subpovm_defect(&overall),
        typical_probability: inst.side.typical.probability(),
        decoder_collisions: inst.bin_stats.iter().map(|s| s.collisions).sum(),
        bins_stats: inst.bin_stats,
    })
}

/// Two-sender construction sharing one generator matrix.
#[derive(Clone, Debug)]
pub struct DistributedInstance {
    pub params: ProtocolParams,
    pub side_a: SideConstruction,
    pub side_b: SideConstruction,
    /// Typical set of `W = U + V` with parameter `p δ`.
    pub w_typical: TypicalSet,
    pub fallback: FallbackWord,
    /// `decoder[(μ1, μ2)][i * bins_b + j]` over coset pairs.
    pub decoder: BTreeMap<(usize, usize), Vec<Decoded>>,
    pub bin_stats: Vec<BinStats>,
    pub channel: StochasticMap,
}

/// `Λ̄_u = Σ_{s: f(s) = u} Λ_s` over `F_p`.
pub fn relabel_povm(m: &Povm, f: &[u64], p: u64) -> Result<Povm> {
    if f.len() != m.len() || f.iter().any(|&x| x >= p) {
        return dim_err("label map must send every outcome into F_p");
    }
    let d = m.dim();
    let elements = (0..p)
        .map(|u| {
            let acc = m
                .elements()
                .iter()
                .zip(f)
                .filter(|(_, &fu)| fu == u)
                .fold(CMatrix::zeros(d, d), |acc, (e, _)| acc + e.matrix());
            HermitianOperator::from_matrix(acc)
        })
        .collect::<Result<Vec<_>>>()?;
    Povm::from_elements(elements)
}

/// Permutation taking `(A_1 B_1 … A_n B_n)` to `(A_1 … A_n B_1 … B_n)`.
fn interleaved_to_blocked(n: usize) -> Vec<usize> {
    (0..n).map(|i| 2 * i).chain((0..n).map(|i| 2 * i + 1)).collect()
}

#[allow(clippy::too_many_arguments)]
pub fn build_distributed_instance(
    params: &ProtocolParams,
    m_a: &Povm,
    m_b: &Povm,
    rho_ab: &DensityOperator,
    p: u64,
    f_s: &[u64],
    f_t: &[u64],
    p_zw: &StochasticMap,
) -> Result<DistributedInstance> {
    params.validate()?;
    if params.p != p {
        return Err(Error::Argument("field size differs from params.p".into()));
    }
    let (da, db) = match rho_ab.register_dims() {
        &[a, b] => (a, b),
        _ => return dim_err("distributed construction needs a bipartite state"),
    };
    let rho_a = rho_ab.partial_trace(&[1])?;
    let rho_b = rho_ab.partial_trace(&[0])?;
    let u_povm = relabel_povm(m_a, f_s, p)?;
    let v_povm = relabel_povm(m_b, f_t, p)?;
    let spec_a = CodeEnsembleSpec { p, n: params.n, k: params.k, l: params.l, big_n: params.big_n, seed: params.seed };
    let codes_a = sample_ensemble(&spec_a)?;
    let field = PrimeField::new(p)?;
    let mut rng = rng_for(params.seed, 1);
    let codes_b = (0..params.big_n)
        .map(|_| codes_a[0].with_shifts(random_shifts(field, params.n, params.l2, &mut rng), params.l2))
        .collect::<Result<Vec<_>>>()?;
    let side_a = build_side(&rho_a, &u_povm, params, params.l, codes_a)?;
    let side_b = build_side(&rho_b, &v_povm, params, params.l2, codes_b)?;

    let pu = p as usize;
    let mut w_dist = vec![0.0; pu];
    for (u, lu) in u_povm.elements().iter().enumerate() {
        for (v, lv) in v_povm.elements().iter().enumerate() {
            w_dist[(u + v) % pu] += (lu.matrix().kronecker(lv.matrix()) * rho_ab.matrix()).trace().re.max(0.0);
        }
    }
    let w_typical = typical_set(&w_dist, params.n, p as f64 * params.delta)?;
    let fallback = w_typical.first_outsider().map_or(FallbackWord::Sentinel, FallbackWord::Word);

    let mut decoder = BTreeMap::new();
    let mut bin_stats = Vec::new();
    for (m1, ca) in side_a.codes.iter().enumerate() {
        for (m2, cb) in side_b.codes.iter().enumerate() {
            let mut stats = BinStats::default();
            let mut table = Vec::new();
            for ha in ca.code.shifts() {
                for hb in cb.code.shifts() {
                    let shift = field.add_vec(ha, hb);
                    let (d, hits) = decode_coset(&ca.code, &shift, &w_typical);
                    stats.bins += 1;
                    match hits {
                        0 => stats.empty += 1,
                        1 => stats.unique += 1,
                        _ => stats.collisions += 1,
                    }
                    table.push(d);
                }
            }
            decoder.insert((m1, m2), table);
            bin_stats.push(stats);
        }
    }
    let _ = (da, db);
    let channel = pad_channel(p_zw, pu)?;
    Ok(DistributedInstance { params: params.clone(), side_a, side_b, w_typical, fallback, decoder, bin_stats, channel })
}

/// `F(i, j)` with `0` denoting either completion; bins are `1 …= p^l`.
pub fn decode_distributed(inst: &DistributedInstance, mu: (usize, usize), i: usize, j: usize) -> Result<Decoded> {
    let table = inst
        .decoder
        .get(&mu)
        .ok_or_else(|| Error::Argument(format!("no code pair {mu:?}")))?;
    let bins_b = inst.side_b.codes[mu.1].bins.len();
    if i == 0 || j == 0 {
        return Ok(Decoded::Fallback);
    }
    if i > inst.side_a.codes[mu.0].bins.len() || j > bins_b {
        return Err(Error::Argument(format!("bin pair ({i}, {j}) out of range")));
    }
    Ok(table[(i - 1) * bins_b + (j - 1)])
}

/// Overall operators on `A^n B^n` (blocked ordering), by flattened `z^n`.
pub fn assemble_distributed(inst: &DistributedInstance) -> Vec<CMatrix> {
    let n = inst.params.n;
    let p = inst.params.p as usize;
    let z_alpha = inst.channel.outputs();
    let outcomes = z_alpha.pow(n as u32);
    let dim = inst.side_a.pi_rho.nrows() * inst.side_b.pi_rho.nrows();
    let mut out = vec![CMatrix::zeros(dim, dim); outcomes];
    let norm = 1.0 / inst.decoder.len() as f64;
    let zs: Vec<Vec<usize>> = (0..outcomes).map(|zi| unflatten(zi, &vec![z_alpha; n])).collect();
    for (&(m1, m2), table) in &inst.decoder {
        let ca = &inst.side_a.codes[m1];
        let cb = &inst.side_b.codes[m2];
        let with_completion_a: Vec<&CMatrix> = std::iter::once(&ca.completion).chain(&ca.bins).collect();
        let with_completion_b: Vec<&CMatrix> = std::iter::once(&cb.completion).chain(&cb.bins).collect();
        for (i, ga) in with_completion_a.iter().enumerate() {
            for (j, gb) in with_completion_b.iter().enumerate() {
                let d = if i == 0 || j == 0 { Decoded::Fallback } else { table[(i - 1) * cb.bins.len() + (j - 1)] };
                let joint = ga.kronecker(*gb);
                for (acc, z) in out.iter_mut().zip(&zs) {
                    let pr = seq_prob(&inst.channel, d, inst.fallback, z, p);
                    if pr > 0.0 {
                        *acc += joint.scale(pr * norm);
                    }
                }
            }
        }
    }
    out
}

#[allow(clippy::too_many_arguments)]
pub fn simulate_distributed(
    params: &ProtocolParams,
    m_a: &Povm,
    m_b: &Povm,
    rho_ab: &DensityOperator,
    p_zst: &StochasticMap,
    p: u64,
    f_s: &[u64],
    f_t: &[u64],
    p_zw: &StochasticMap,
) -> Result<ProtocolReport> {
    let inst = build_distributed_instance(params, m_a, m_b, rho_ab, p, f_s, f_t, p_zw)?;
    let overall = assemble_distributed(&inst);
    let joint = crate::regions::joint_povm(m_a, m_b, p_zst)?;
    let dims = rho_ab.register_dims().to_vec();
    let n = params.n;
    let all_dims: Vec<usize> = (0..n).flat_map(|_| dims.iter().copied()).collect();
    let perm = interleaved_to_blocked(n);
    let target = tensor_outcomes(&joint.elements().iter().map(|e| e.matrix().clone()).collect::<Vec<_>>(), n)
        .into_iter()
        .map(|t| permute_registers(&t, &all_dims, &perm))
        .collect::<Result<Vec<_>>>()?;
    let rho_n = permute_registers(&kron_power(rho_ab.matrix(), n), &all_dims, &perm)?;
    let log_p = (p as f64).log2();
    let nn = n as f64;
    let c = (params.big_n as f64).log2() / nn;
    Ok(ProtocolReport {
        mode: "distributed".into(),
        params: params.clone(),
        rates: [
            ("R1".to_string(), params.l as f64 * log_p / nn),
            ("R2".to_string(), params.l2 as f64 * log_p / nn),
            ("Rtilde".to_string(), params.k as f64 * log_p / nn),
            ("C1".to_string(), c),
            ("C2".to_string(), c),
        ]
        .into(),
        k: faithfulness(&rho_n, &target, &overall)?,
        subpovm_defect: subpovm_defect(&overall),
        typical_probability: inst.w_typical.probability(),
        decoder_collisions: inst.bin_stats.iter().map(|s| s.collisions).sum(),
        bins_stats: inst.bin_stats,
    })
}

/// `flatten` re-exported for word indexing in tests and tools.
pub fn word_index(w: &[usize], p: usize) -> usize {
    flatten(w, &vec![p; w.len()])
}
