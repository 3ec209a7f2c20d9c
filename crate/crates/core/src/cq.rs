//! Classical-quantum states: a block-diagonal state stored as a map from
//! classical label tuples to PSD blocks on the joint quantum registers.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{dim_err, Error, Result};
use crate::linalg::{
    eigenvalues, entropy_of_spectrum, identity, kron_all, matrix_to_json, min_eigenvalue,
    partial_trace_op, psd_sqrt, CMatrix, DensityOperator, MatrixJson, Povm, PureState,
    DEFAULT_TOL,
};

/// Conditional distribution `P(out | in_1, …, in_r)`. Rows are indexed by
/// the row-major flattening of the input tuple.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "StochasticMapJson", into = "StochasticMapJson")]
pub struct StochasticMap {
    inputs: Vec<usize>,
    outputs: usize,
    rows: Vec<Vec<f64>>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct StochasticMapJson {
    pub inputs: Vec<usize>,
    pub outputs: usize,
    pub rows: Vec<Vec<f64>>,
}

impl TryFrom<StochasticMapJson> for StochasticMap {
    type Error = Error;
    fn try_from(j: StochasticMapJson) -> Result<Self> {
        Self::new(j.inputs, j.outputs, j.rows)
    }
}

impl From<StochasticMap> for StochasticMapJson {
    fn from(m: StochasticMap) -> Self {
        Self { inputs: m.inputs, outputs: m.outputs, rows: m.rows }
    }
}

impl StochasticMap {
    pub fn new(inputs: Vec<usize>, outputs: usize, rows: Vec<Vec<f64>>) -> Result<Self> {
        let n_rows: usize = inputs.iter().product();
        if inputs.contains(&0) || outputs == 0 {
            return dim_err("alphabets must be non-empty");
        }
        if rows.len() != n_rows || rows.iter().any(|r| r.len() != outputs) {
            return dim_err(format!(
                "expected {n_rows} rows of length {outputs} for inputs {inputs:?}"
            ));
        }
        for (i, row) in rows.iter().enumerate() {
            if row.iter().any(|&v| !(0.0..=1.0).contains(&v)) {
                return Err(Error::Validation(format!("row {i} has an entry outside [0,1]")));
            }
            let sum: f64 = row.iter().sum();
            if (sum - 1.0).abs() > 1e-12 {
                return Err(Error::Validation(format!("row {i} sums to {sum}")));
            }
        }
        Ok(Self { inputs, outputs, rows })
    }

    pub fn deterministic(inputs: Vec<usize>, outputs: usize, f: impl Fn(&[usize]) -> usize) -> Result<Self> {
        let n_rows: usize = inputs.iter().product();
        let rows = (0..n_rows)
            .map(|r| {
                let mut row = vec![0.0; outputs];
                let z = f(&unflatten(r, &inputs));
                if z < outputs {
                    row[z] = 1.0;
                }
                row
            })
            .collect();
        Self::new(inputs, outputs, rows)
    }

    pub fn identity(n: usize) -> Self {
        Self::deterministic(vec![n], n, |x| x[0]).expect("valid")
    }

    pub fn inputs(&self) -> &[usize] {
        &self.inputs
    }

    pub fn outputs(&self) -> usize {
        self.outputs
    }

    pub fn rows(&self) -> &[Vec<f64>] {
        &self.rows
    }

    pub fn prob(&self, input: &[usize], out: usize) -> f64 {
        self.rows[flatten(input, &self.inputs)][out]
    }

    /// `Π_i P(z_i | w_i)` for a single-input map.
    pub fn prob_seq(&self, input: &[usize], out: &[usize]) -> f64 {
        input
            .iter()
            .zip(out)
            .map(|(&w, &z)| self.rows[w][z])
            .product()
    }
}

pub(crate) fn flatten(digits: &[usize], radices: &[usize]) -> usize {
    digits.iter().zip(radices).fold(0, |acc, (&d, &r)| acc * r + d)
}

pub(crate) fn unflatten(mut index: usize, radices: &[usize]) -> Vec<usize> {
    let mut out = vec![0; radices.len()];
    for (slot, &r) in out.iter_mut().zip(radices).rev() {
        *slot = index % r;
        index /= r;
    }
    out
}

/// Named register with its alphabet size (classical) or dimension (quantum).
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Register {
    pub name: String,
    pub size: usize,
}

impl Register {
    pub fn new(name: &str, size: usize) -> Self {
        Self { name: name.to_string(), size }
    }
}

#[derive(Clone, Debug)]
pub struct CqState {
    classical: Vec<Register>,
    quantum: Vec<Register>,
    blocks: BTreeMap<Vec<usize>, CMatrix>,
}

impl CqState {
    pub fn new(
        classical: Vec<Register>,
        quantum: Vec<Register>,
        blocks: BTreeMap<Vec<usize>, CMatrix>,
    ) -> Result<Self> {
        let mut names: Vec<&str> = classical.iter().chain(&quantum).map(|r| r.name.as_str()).collect();
        names.sort_unstable();
        if names.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::Argument("register names must be unique".into()));
        }
        let qdim: usize = quantum.iter().map(|r| r.size).product();
        let mut total = 0.0;
        for (label, block) in &blocks {
            if label.len() != classical.len()
                || label.iter().zip(&classical).any(|(&x, r)| x >= r.size)
            {
                return dim_err(format!("label {label:?} does not fit the classical alphabets"));
            }
            if block.nrows() != qdim || block.ncols() != qdim {
                return dim_err(format!("block for {label:?} is not {qdim}x{qdim}"));
            }
            let scale = block.trace().re.abs().max(1e-300);
            if min_eigenvalue(block) < -1e-9 * scale.max(1.0) {
                return Err(Error::Validation(format!("block for {label:?} is not PSD")));
            }
            total += block.trace().re;
        }
        if (total - 1.0).abs() > 1e-8 {
            return Err(Error::Validation(format!("total trace is {total}")));
        }
        Ok(Self { classical, quantum, blocks })
    }

    pub fn classical_registers(&self) -> &[Register] {
        &self.classical
    }

    pub fn quantum_registers(&self) -> &[Register] {
        &self.quantum
    }

    pub fn blocks(&self) -> &BTreeMap<Vec<usize>, CMatrix> {
        &self.blocks
    }

    pub fn total_trace(&self) -> f64 {
        self.blocks.values().map(|b| b.trace().re).sum()
    }

    /// Label weights `Tr(block)`.
    pub fn label_weights(&self) -> BTreeMap<Vec<usize>, f64> {
        self.blocks.iter().map(|(k, b)| (k.clone(), b.trace().re)).collect()
    }

    fn classical_index(&self, name: &str) -> Option<usize> {
        self.classical.iter().position(|r| r.name == name)
    }

    fn quantum_index(&self, name: &str) -> Option<usize> {
        self.quantum.iter().position(|r| r.name == name)
    }

    fn resolve(&self, names: &[&str]) -> Result<(Vec<usize>, Vec<usize>)> {
        let mut cl = Vec::new();
        let mut qu = Vec::new();
        for &name in names {
            if let Some(i) = self.classical_index(name) {
                cl.push(i);
            } else if let Some(i) = self.quantum_index(name) {
                qu.push(i);
            } else {
                return Err(Error::Argument(format!("unknown register {name}")));
            }
        }
        cl.sort_unstable();
        cl.dedup();
        qu.sort_unstable();
        qu.dedup();
        Ok((cl, qu))
    }

    /// Reduced state on the named registers (order follows the original).
    pub fn marginal(&self, names: &[&str]) -> Result<Self> {
        let (cl, qu) = self.resolve(names)?;
        let dims: Vec<usize> = self.quantum.iter().map(|r| r.size).collect();
        let traced: Vec<usize> = (0..self.quantum.len()).filter(|i| !qu.contains(i)).collect();
        let mut blocks: BTreeMap<Vec<usize>, CMatrix> = BTreeMap::new();
        for (label, block) in &self.blocks {
            let key: Vec<usize> = cl.iter().map(|&i| label[i]).collect();
            let reduced = if dims.is_empty() || traced.is_empty() {
                block.clone()
            } else {
                partial_trace_op(block, &dims, &traced)?
            };
            match blocks.get_mut(&key) {
                Some(acc) => *acc += reduced,
                None => {
                    blocks.insert(key, reduced);
                }
            }
        }
        Ok(Self {
            classical: cl.iter().map(|&i| self.classical[i].clone()).collect(),
            quantum: qu.iter().map(|&i| self.quantum[i].clone()).collect(),
            blocks,
        })
    }

    /// Entropy in bits of the reduced state on `names`; the empty set gives 0.
    pub fn entropy_of(&self, names: &[&str]) -> Result<f64> {
        let m = self.marginal(names)?;
        Ok(m.blocks.values().map(|b| entropy_of_spectrum(&eigenvalues(b))).sum())
    }

    /// `S(A) + S(B) - S(AB)` over disjoint register sets.
    pub fn mutual_information(&self, a: &[&str], b: &[&str]) -> Result<f64> {
        if a.iter().any(|x| b.contains(x)) {
            return Err(Error::Argument("mutual information needs disjoint register sets".into()));
        }
        let ab: Vec<&str> = a.iter().chain(b).copied().collect();
        Ok(self.entropy_of(a)? + self.entropy_of(b)? - self.entropy_of(&ab)?)
    }

    /// Applies `f` to one classical register, summing blocks whose labels
    /// collide. The register's alphabet becomes `new_size`.
    pub fn relabel_classical(&self, name: &str, new_size: usize, f: impl Fn(usize) -> usize) -> Result<Self> {
        let idx = self
            .classical_index(name)
            .ok_or_else(|| Error::Argument(format!("unknown classical register {name}")))?;
        let mut classical = self.classical.clone();
        classical[idx].size = new_size;
        let mut blocks: BTreeMap<Vec<usize>, CMatrix> = BTreeMap::new();
        for (label, block) in &self.blocks {
            let mut key = label.clone();
            key[idx] = f(label[idx]);
            if key[idx] >= new_size {
                return Err(Error::Argument(format!("relabel maps into {} >= {new_size}", key[idx])));
            }
            match blocks.get_mut(&key) {
                Some(acc) => *acc += block,
                None => {
                    blocks.insert(key, block.clone());
                }
            }
        }
        Ok(Self { classical, quantum: self.quantum.clone(), blocks })
    }

    /// Appends a classical register holding a deterministic function of
    /// existing classical registers.
    pub fn derive_classical(
        &self,
        name: &str,
        size: usize,
        from: &[&str],
        f: impl Fn(&[usize]) -> usize,
    ) -> Result<Self> {
        if self.classical_index(name).is_some() || self.quantum_index(name).is_some() {
            return Err(Error::Argument(format!("register {name} already exists")));
        }
        let idx = from
            .iter()
            .map(|n| {
                self.classical_index(n)
                    .ok_or_else(|| Error::Argument(format!("unknown classical register {n}")))
            })
            .collect::<Result<Vec<_>>>()?;
        let mut classical = self.classical.clone();
        classical.push(Register::new(name, size));
        let mut blocks = BTreeMap::new();
        for (label, block) in &self.blocks {
            let args: Vec<usize> = idx.iter().map(|&i| label[i]).collect();
            let value = f(&args);
            if value >= size {
                return Err(Error::Argument(format!("derived value {value} >= {size}")));
            }
            let mut key = label.clone();
            key.push(value);
            blocks.insert(key, block.clone());
        }
        Ok(Self { classical, quantum: self.quantum.clone(), blocks })
    }

    /// `Σ_labels block`, the state of all quantum registers.
    pub fn quantum_reduced(&self) -> CMatrix {
        let d: usize = self.quantum.iter().map(|r| r.size).product();
        self.blocks.values().fold(CMatrix::zeros(d, d), |acc, b| acc + b)
    }

    pub fn to_json(&self) -> CqStateJson {
        CqStateJson {
            classical: self.classical.clone(),
            quantum: self.quantum.clone(),
            blocks: self
                .blocks
                .iter()
                .map(|(label, m)| BlockJson { label: label.clone(), matrix: matrix_to_json(m) })
                .collect(),
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct BlockJson {
    pub label: Vec<usize>,
    pub matrix: MatrixJson,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CqStateJson {
    pub classical: Vec<Register>,
    pub quantum: Vec<Register>,
    pub blocks: Vec<BlockJson>,
}

fn insert_nonzero(blocks: &mut BTreeMap<Vec<usize>, CMatrix>, key: Vec<usize>, m: CMatrix) {
    if m.iter().any(|z| z.norm() > 0.0) {
        blocks.insert(key, m);
    }
}

/// Measures register `measured` of `psi` with `povm`; the outcome becomes a
/// classical register named `outcome`, the other registers keep `names`.
pub fn measure_to_cq(
    psi: &PureState,
    povm: &Povm,
    measured: usize,
    names: &[&str],
    outcome: &str,
) -> Result<CqState> {
    let dims = psi.register_dims();
    if names.len() != dims.len() {
        return dim_err("one name per register required");
    }
    if measured >= dims.len() || povm.dim() != dims[measured] {
        return dim_err(format!("POVM of dimension {} cannot act on register {measured}", povm.dim()));
    }
    let rho = psi.density();
    let mut blocks = BTreeMap::new();
    for (x, element) in povm.elements().iter().enumerate() {
        let factors: Vec<CMatrix> = dims
            .iter()
            .enumerate()
            .map(|(r, &d)| if r == measured { element.matrix().clone() } else { identity(d) })
            .collect();
        let op = kron_all(factors.iter()) * rho.matrix();
        insert_nonzero(&mut blocks, vec![x], partial_trace_op(&op, dims, &[measured])?);
    }
    let quantum = dims
        .iter()
        .enumerate()
        .filter(|&(r, _)| r != measured)
        .map(|(r, &d)| Register::new(names[r], d))
        .collect();
    CqState::new(vec![Register::new(outcome, povm.len())], quantum, blocks)
}

fn check_bipartite(rho_ab: &DensityOperator) -> Result<(usize, usize)> {
    match rho_ab.register_dims() {
        &[a, b] => Ok((a, b)),
        other => dim_err(format!("expected two registers, got {other:?}")),
    }
}

/// Purify `ρ_AB` and measure `A`: registers `S` (classical), `R`, `B`.
pub fn build_sigma1(rho_ab: &DensityOperator, m_a: &Povm) -> Result<CqState> {
    check_bipartite(rho_ab)?;
    measure_to_cq(&rho_ab.purify()?, m_a, 1, &["R", "A", "B"], "S")
}

/// Purify `ρ_AB` and measure `B`: registers `T` (classical), `R`, `A`.
pub fn build_sigma2(rho_ab: &DensityOperator, m_b: &Povm) -> Result<CqState> {
    check_bipartite(rho_ab)?;
    measure_to_cq(&rho_ab.purify()?, m_b, 2, &["R", "A", "B"], "T")
}

/// Blocks `P(z|s,t) √ρ (Λ_s ⊗ Λ_t) √ρ` over classical `S, T, Z` and a
/// reference `R` of dimension `dim ρ_AB`.
pub fn build_sigma3(
    rho_ab: &DensityOperator,
    m_a: &Povm,
    m_b: &Povm,
    p_zst: &StochasticMap,
) -> Result<CqState> {
    let (da, db) = check_bipartite(rho_ab)?;
    if m_a.dim() != da || m_b.dim() != db {
        return dim_err("POVM dimensions do not match the bipartition");
    }
    if p_zst.inputs() != [m_a.len(), m_b.len()] {
        return dim_err(format!(
            "stochastic map inputs {:?} do not match POVM sizes ({}, {})",
            p_zst.inputs(),
            m_a.len(),
            m_b.len()
        ));
    }
    let root = psd_sqrt(rho_ab.op())?;
    let root = root.matrix();
    let mut blocks = BTreeMap::new();
    for (s, la) in m_a.elements().iter().enumerate() {
        for (t, lb) in m_b.elements().iter().enumerate() {
            let base = root * la.matrix().kronecker(lb.matrix()) * root;
            for z in 0..p_zst.outputs() {
                let w = p_zst.prob(&[s, t], z);
                if w > 0.0 {
                    insert_nonzero(&mut blocks, vec![s, t, z], base.scale(w));
                }
            }
        }
    }
    CqState::new(
        vec![
            Register::new("S", m_a.len()),
            Register::new("T", m_b.len()),
            Register::new("Z", p_zst.outputs()),
        ],
        vec![Register::new("R", da * db)],
        blocks,
    )
}

/// Blocks `P(z|w) √ρ Λ_w √ρ` over classical `W, Z` and reference `R`.
pub fn build_sigma_p2p(rho: &DensityOperator, m: &Povm, p_zw: &StochasticMap) -> Result<CqState> {
    if m.dim() != rho.dim() {
        return dim_err("POVM dimension does not match the state");
    }
    if p_zw.inputs() != [m.len()] {
        return dim_err("stochastic map input alphabet does not match the POVM");
    }
    let root = psd_sqrt(rho.op())?;
    let root = root.matrix();
    let mut blocks = BTreeMap::new();
    for (w, l) in m.elements().iter().enumerate() {
        let base = root * l.matrix() * root;
        for z in 0..p_zw.outputs() {
            let pr = p_zw.prob(&[w], z);
            if pr > 0.0 {
                insert_nonzero(&mut blocks, vec![w, z], base.scale(pr));
            }
        }
    }
    CqState::new(
        vec![Register::new("W", m.len()), Register::new("Z", p_zw.outputs())],
        vec![Register::new("R", rho.dim())],
        blocks,
    )
}

/// Free-function form of [`CqState::entropy_of`].
pub fn entropy_of(cq: &CqState, names: &[&str]) -> Result<f64> {
    cq.entropy_of(names)
}

/// Free-function form of [`CqState::mutual_information`].
pub fn cq_mutual_information(cq: &CqState, a: &[&str], b: &[&str]) -> Result<f64> {
    cq.mutual_information(a, b)
}

/// Uniform tolerance used when comparing cq quantities in tests.
pub const CQ_TOL: f64 = DEFAULT_TOL;

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{c, random, CVector};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn bell() -> DensityOperator {
        let mut v = CVector::zeros(4);
        v[0] = c(1.0, 0.0);
        v[3] = c(1.0, 0.0);
        DensityOperator::pure(&v, vec![2, 2]).unwrap()
    }

    #[test]
    fn stochastic_map_validation() {
        assert!(StochasticMap::new(vec![2], 2, vec![vec![0.5, 0.5], vec![1.0, 0.0]]).is_ok());
        assert!(StochasticMap::new(vec![2], 2, vec![vec![0.5, 0.6], vec![1.0, 0.0]]).is_err());
        assert!(StochasticMap::new(vec![2], 2, vec![vec![1.0, 0.0]]).is_err());
        let m = StochasticMap::deterministic(vec![2, 3], 6, |x| x[0] * 3 + x[1]).unwrap();
        assert_eq!(m.prob(&[1, 2], 5), 1.0);
    }

    #[test]
    fn trivial_measurement_gives_reduced_state() {
        let psi = bell().purify().unwrap();
        let cq = measure_to_cq(&psi, &Povm::trivial(2), 1, &["R", "A", "B"], "X").unwrap();
        assert_eq!(cq.blocks().len(), 1);
        let reduced = psi.density().partial_trace(&[1]).unwrap();
        assert!((cq.quantum_reduced() - reduced.matrix()).norm() < 1e-12);
    }

    #[test]
    fn measuring_half_a_bell_state() {
        let mut v = CVector::zeros(4);
        v[0] = c(1.0, 0.0);
        v[3] = c(1.0, 0.0);
        let psi = PureState::new(v.unscale(2f64.sqrt()), vec![2, 2]).unwrap();
        let cq = measure_to_cq(&psi, &Povm::computational(2), 0, &["A", "B"], "X").unwrap();
        for w in cq.label_weights().values() {
            assert!((w - 0.5).abs() < 1e-12);
        }
        // conditional blocks pure: S(X,B) = S(X)
        assert!((cq.entropy_of(&["X", "B"]).unwrap() - 1.0).abs() < 1e-9);
        assert!((cq.entropy_of(&["X"]).unwrap() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn sigma1_weights_match_direct_trace() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let rho = random::density_on(&[2, 2], 4, &mut rng);
        let m = random::povm(2, 3, &mut rng);
        let s1 = build_sigma1(&rho, &m).unwrap();
        let rho_a = rho.partial_trace(&[1]).unwrap();
        for (label, w) in s1.label_weights() {
            let direct = (m.element(label[0]).matrix() * rho_a.matrix()).trace().re;
            assert!((w - direct).abs() < 1e-10);
        }
        let trivial = build_sigma1(&rho, &Povm::trivial(2)).unwrap();
        assert!(trivial.mutual_information(&["S"], &["R", "B"]).unwrap().abs() < 1e-9);
    }

    #[test]
    fn sigma1_on_product_state_matches_cq_formula() {
        // Rank-one measurement of a pure RAB leaves pure conditional RB states,
        // so I(S;RB) = S(RB) = S(ρ_A).
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let a = random::density(2, 2, &mut rng);
        let b = random::density(2, 2, &mut rng);
        let rho = a.tensor(&b);
        let m = Povm::computational(2);
        let s1 = build_sigma1(&rho, &m).unwrap();
        let oracle = entropy_of_spectrum(&eigenvalues(a.matrix()));
        let got = s1.mutual_information(&["S"], &["R", "B"]).unwrap();
        assert!((got - oracle).abs() < 1e-8, "{got} vs {oracle}");
    }

    #[test]
    fn sigma3_with_copy_map() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let rho = random::density_on(&[2, 2], 4, &mut rng);
        let ma = random::povm(2, 2, &mut rng);
        let mb = random::povm(2, 2, &mut rng);
        let copy = StochasticMap::deterministic(vec![2, 2], 4, |x| x[0] * 2 + x[1]).unwrap();
        let s3 = build_sigma3(&rho, &ma, &mb, &copy).unwrap();
        let hz = s3.entropy_of(&["Z"]).unwrap();
        let hst = s3.entropy_of(&["S", "T"]).unwrap();
        assert!((hz - hst).abs() < 1e-10);
        assert!((s3.quantum_reduced() - rho.matrix()).norm() < 1e-9);
    }

    #[test]
    fn sigma_p2p_examples() {
        let rho = DensityOperator::maximally_mixed(2);
        let id = StochasticMap::identity(2);
        let s = build_sigma_p2p(&rho, &Povm::computational(2), &id).unwrap();
        assert!((s.entropy_of(&["W"]).unwrap() - 1.0).abs() < 1e-9);
        assert!((s.mutual_information(&["W"], &["R"]).unwrap() - 1.0).abs() < 1e-9);
        let triv = build_sigma_p2p(&rho, &Povm::trivial(2), &StochasticMap::identity(1)).unwrap();
        assert!(triv.mutual_information(&["W"], &["R"]).unwrap().abs() < 1e-9);
    }

    #[test]
    fn sigma_p2p_identity_channel_matches_full_eigendecomposition() {
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        let rho = random::density(2, 2, &mut rng);
        let m = random::povm(2, 3, &mut rng);
        let s = build_sigma_p2p(&rho, &m, &StochasticMap::identity(3)).unwrap();
        // oracle: build the full block-diagonal W ⊗ Z ⊗ R matrix and diagonalise
        let root = psd_sqrt(rho.op()).unwrap();
        let mut full = CMatrix::zeros(18, 18);
        for w in 0..3 {
            let b = root.matrix() * m.element(w).matrix() * root.matrix();
            let off = (w * 3 + w) * 2;
            for i in 0..2 {
                for j in 0..2 {
                    full[(off + i, off + j)] = b[(i, j)];
                }
            }
        }
        let oracle = entropy_of_spectrum(&eigenvalues(&full));
        assert!((s.entropy_of(&["W", "Z", "R"]).unwrap() - oracle).abs() < 1e-9);
        let iwrz = s.mutual_information(&["W"], &["R", "Z"]).unwrap();
        let hw = s.entropy_of(&["W"]).unwrap();
        assert!((iwrz - hw).abs() < 1e-9);
    }

    #[test]
    fn relabel_examples() {
        let rho = DensityOperator::maximally_mixed(2);
        let s = build_sigma_p2p(&rho, &Povm::computational(2), &StochasticMap::identity(2)).unwrap();
        let same = s.relabel_classical("W", 2, |x| x).unwrap();
        assert_eq!(same.blocks().len(), s.blocks().len());
        let merged = s.relabel_classical("W", 1, |_| 0).unwrap();
        assert!(merged.entropy_of(&["W"]).unwrap().abs() < 1e-12);
        assert!((merged.total_trace() - 1.0).abs() < 1e-12);
        let embedded = s.relabel_classical("W", 3, |x| x).unwrap();
        assert_eq!(embedded.classical_registers()[0].size, 3);
    }

    #[test]
    fn overlapping_sets_are_rejected() {
        let rho = DensityOperator::maximally_mixed(2);
        let s = build_sigma_p2p(&rho, &Povm::computational(2), &StochasticMap::identity(2)).unwrap();
        assert!(s.mutual_information(&["W"], &["W", "R"]).is_err());
        assert!(s.entropy_of(&[]).unwrap().abs() < 1e-12);
    }

    #[test]
    fn json_dump_has_expected_shape() {
        let rho = DensityOperator::maximally_mixed(2);
        let s = build_sigma_p2p(&rho, &Povm::computational(2), &StochasticMap::identity(2)).unwrap();
        let v = serde_json::to_value(s.to_json()).unwrap();
        assert_eq!(v["classical"][0]["name"], "W");
        assert_eq!(v["blocks"].as_array().unwrap().len(), 2);
    }
}
