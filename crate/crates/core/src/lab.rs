//! Monte-Carlo and exhaustive checks of the operator lemmas behind the
//! construction: pairwise-independent covering, pruning trace inequalities,
//! and the separate-measurement trace identity.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::codes::{rng_for, PrimeField, UccCode};
use crate::error::{dim_err, Error, Result};
use crate::linalg::{
    hermitize, identity, kron, max_eigenvalue, psd_sqrt, random, trace_norm, CMatrix, DensityOperator,
    HermitianOperator,
};
use crate::protocol::pruning_projector;

/// Slack applied to every operator inequality check.
pub const HYPOTHESIS_SLACK: f64 = 1e-9;

/// Number of standard errors allowed for statistical assertions.
pub const SIGMA_SLACK: f64 = 3.0;

/// `δ(ε) = 4√ε`.
pub fn delta_of_epsilon(eps: f64) -> f64 {
    4.0 * eps.sqrt()
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub bound: f64,
    pub empirical_mean: f64,
    pub stderr: f64,
    pub trials: usize,
    pub seed: u64,
    pub pass: bool,
}

fn mean_stderr(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

/// Ensemble over an extended alphabet: letters with zero weight carry the
/// null operator.
#[derive(Clone, Debug)]
pub struct CoveringInstance {
    pub lambda: Vec<f64>,
    pub mu: Vec<f64>,
    pub states: Vec<CMatrix>,
    pub pi: CMatrix,
    pub pi_x: Vec<CMatrix>,
    pub eps: f64,
    pub d: f64,
    pub big_d: f64,
    pub kappa: f64,
}

impl CoveringInstance {
    /// Derives `d`, `D` and `κ` from the data: `d` is the largest value with
    /// `Π_x σ_x Π_x ≤ Π_x / d`, `D = ‖Π √σ‖₁²`, `κ = max λ_x / μ_x`.
    pub fn new(
        lambda: Vec<f64>,
        mu: Vec<f64>,
        states: Vec<CMatrix>,
        pi: CMatrix,
        pi_x: Vec<CMatrix>,
        eps: f64,
    ) -> Result<Self> {
        let len = lambda.len();
        if mu.len() != len || states.len() != len || pi_x.len() != len {
            return dim_err("ensemble vectors have different lengths");
        }
        let dim = pi.nrows();
        if states.iter().chain(&pi_x).any(|m| m.nrows() != dim || m.ncols() != dim) {
            return dim_err("operators must share one dimension");
        }
        for (x, (&l, &m)) in lambda.iter().zip(&mu).enumerate() {
            if l > 0.0 && m <= 0.0 {
                return Err(Error::Validation(format!("λ not absolutely continuous w.r.t. μ at {x}")));
            }
        }
        let kappa = lambda
            .iter()
            .zip(&mu)
            .filter(|(&l, _)| l > 0.0)
            .map(|(l, m)| l / m)
            .fold(0.0, f64::max);
        let top = lambda
            .iter()
            .zip(states.iter().zip(&pi_x))
            .filter(|(&l, _)| l > 0.0)
            .map(|(_, (s, p))| max_eigenvalue(&(p * s * p)))
            .fold(0.0, f64::max);
        let d = if top > 0.0 { 1.0 / top } else { f64::INFINITY };
        let sigma = average_state(&lambda, &states, dim);
        let root = psd_sqrt(&HermitianOperator::from_matrix(sigma)?)?;
        let big_d = trace_norm(&(&pi * root.matrix()))?.powi(2);
        Ok(Self { lambda, mu, states, pi, pi_x, eps, d, big_d, kappa })
    }

    pub fn with_kappa(mut self, kappa: f64) -> Self {
        self.kappa = kappa;
        self
    }

    pub fn dim(&self) -> usize {
        self.pi.nrows()
    }

    pub fn alphabet(&self) -> usize {
        self.lambda.len()
    }

    /// `σ̃_x = Π Π_x σ_x Π_x Π`.
    pub fn cut_states(&self) -> Vec<CMatrix> {
        self.states
            .iter()
            .zip(&self.pi_x)
            .map(|(s, px)| hermitize(&(&self.pi * px * s * px * &self.pi)))
            .collect()
    }

    /// `√(κD/(Md))`.
    pub fn variance_bound(&self, m: usize) -> f64 {
        (self.kappa * self.big_d / (m as f64 * self.d)).sqrt()
    }
}

fn average_state(lambda: &[f64], states: &[CMatrix], dim: usize) -> CMatrix {
    lambda
        .iter()
        .zip(states)
        .fold(CMatrix::zeros(dim, dim), |acc, (&l, s)| acc + s.scale(l))
}

/// Qubit ensemble on four letters, the last one null, with nearly pure
/// states `(1-ε)|ψ_x⟩⟨ψ_x| + ε|ψ_x^⊥⟩⟨ψ_x^⊥|`, `Π = I`, `Π_x = |ψ_x⟩⟨ψ_x|`
/// and uniform `μ`.
pub fn qubit_covering_instance(eps: f64) -> Result<CoveringInstance> {
    let lambda = vec![0.5, 0.3, 0.2, 0.0];
    let mut states = Vec::new();
    let mut projectors = Vec::new();
    for x in 0..3 {
        let t = x as f64 * std::f64::consts::PI / 3.0;
        let (c, s) = (t.cos(), t.sin());
        let psi = HermitianOperator::from_real_rows(&[&[c * c, c * s], &[c * s, s * s]])?.into_matrix();
        let perp = identity(2) - &psi;
        states.push(psi.scale(1.0 - eps) + perp.scale(eps));
        projectors.push(psi);
    }
    states.push(CMatrix::zeros(2, 2));
    projectors.push(CMatrix::zeros(2, 2));
    CoveringInstance::new(lambda, vec![0.25; 4], states, identity(2), projectors, eps)
}

/// Instance over typical words of an `n`-copy canonical ensemble, with the
/// typical projector as `Π`, conditional typical projectors as `Π_x`, and
/// `ε` read off as the worst captured mass.
pub fn typical_covering_instance(
    rho: &DensityOperator,
    m: &crate::linalg::Povm,
    n: usize,
    delta: f64,
) -> Result<CoveringInstance> {
    use crate::cq::unflatten;
    use crate::linalg::kron_all;
    use crate::protocol::{canonical_ensemble, cond_typical_projector, typical_projector, typical_set};
    let ens = canonical_ensemble(m, rho)?;
    let q = ens.len();
    let typical = typical_set(&ens.weights, n, delta)?;
    let pi = typical_projector(rho, n, delta)?;
    let dim = pi.nrows();
    let total = q.pow(n as u32);
    let mass = typical.probability();
    let mut lambda = vec![0.0; total];
    let mut states = vec![CMatrix::zeros(dim, dim); total];
    let mut pi_x = vec![CMatrix::zeros(dim, dim); total];
    let mut eps = 0.0f64;
    for &w in &typical.members {
        let word = unflatten(w, &vec![q; n]);
        let st = kron_all(
            word.iter()
                .map(|&a| ens.post_states[a].as_ref().map(|s| s.matrix()).ok_or_else(|| Error::Argument("null letter".into())))
                .collect::<Result<Vec<_>>>()?,
        );
        let px = cond_typical_projector(&ens, &word, delta)?;
        eps = eps
            .max(1.0 - (&pi * &st).trace().re)
            .max(1.0 - (&px * &st).trace().re);
        lambda[w] = word.iter().map(|&a| ens.weights[a]).product::<f64>() / mass;
        states[w] = st;
        pi_x[w] = px;
    }
    let mu = vec![1.0 / total as f64; total];
    CoveringInstance::new(lambda, mu, states, pi, pi_x, eps.max(0.0))
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct HypothesisReport {
    /// `min_x Tr{Π σ_x}` over letters of positive weight.
    pub min_trace_pi: f64,
    /// `min_x Tr{Π_x σ_x}`.
    pub min_trace_pi_x: f64,
    /// `‖Π√σ‖₁²`.
    pub norm_pi_sqrt_sigma: f64,
    /// `max_x λ_max(Π_x σ_x Π_x - Π_x/d)`.
    pub d_defect: f64,
    /// `max_x λ_max(Π_x σ_x Π_x - σ_x)`.
    pub cut_defect: f64,
    pub kappa_defect: f64,
    /// One flag per hypothesis, in order.
    pub holds: [bool; 5],
    pub d_below_big_d: bool,
    pub pass: bool,
}

pub fn check_covering_hypotheses(inst: &CoveringInstance) -> Result<HypothesisReport> {
    let live: Vec<usize> = (0..inst.alphabet()).filter(|&x| inst.lambda[x] > 0.0).collect();
    let min_trace_pi = live
        .iter()
        .map(|&x| (&inst.pi * &inst.states[x]).trace().re)
        .fold(f64::INFINITY, f64::min);
    let min_trace_pi_x = live
        .iter()
        .map(|&x| (&inst.pi_x[x] * &inst.states[x]).trace().re)
        .fold(f64::INFINITY, f64::min);
    let sigma = average_state(&inst.lambda, &inst.states, inst.dim());
    let root = psd_sqrt(&HermitianOperator::from_matrix(sigma)?)?;
    let norm_pi_sqrt_sigma = trace_norm(&(&inst.pi * root.matrix()))?.powi(2);
    let mut d_defect = f64::NEG_INFINITY;
    let mut cut_defect = f64::NEG_INFINITY;
    for &x in &live {
        let px = &inst.pi_x[x];
        let cut = px * &inst.states[x] * px;
        d_defect = d_defect.max(max_eigenvalue(&(&cut - px.unscale(inst.d))));
        cut_defect = cut_defect.max(max_eigenvalue(&(cut - &inst.states[x])));
    }
    let kappa_defect = live
        .iter()
        .map(|&x| inst.lambda[x] / inst.mu[x] - inst.kappa)
        .fold(f64::NEG_INFINITY, f64::max);
    let holds = [
        min_trace_pi >= 1.0 - inst.eps - HYPOTHESIS_SLACK,
        min_trace_pi_x >= 1.0 - inst.eps - HYPOTHESIS_SLACK,
        norm_pi_sqrt_sigma <= inst.big_d + HYPOTHESIS_SLACK,
        d_defect <= HYPOTHESIS_SLACK,
        cut_defect <= HYPOTHESIS_SLACK,
    ];
    let d_below_big_d = inst.d < inst.big_d;
    Ok(HypothesisReport {
        min_trace_pi,
        min_trace_pi_x,
        norm_pi_sqrt_sigma,
        d_defect,
        cut_defect,
        kappa_defect,
        holds,
        d_below_big_d,
        pass: holds.iter().all(|&h| h) && kappa_defect <= HYPOTHESIS_SLACK,
    })
}

/// How codewords are drawn.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Sampler {
    /// Codewords of a random coset code over `F_p^n` with `k` generator
    /// rows; requires a uniform `μ` on `p^n` letters and `M = p^{k+l}`.
    Ucc { p: u64, n: usize, k: usize },
    /// Independent draws from `μ`.
    Iid,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CoveringReport {
    pub sampler: Sampler,
    #[serde(rename = "M")]
    pub m: usize,
    pub raw: ExperimentReport,
    pub cut: ExperimentReport,
    /// Mean of `cut - raw`; bounded by `2δ(ε)`.
    pub cut_minus_raw: f64,
}

fn draw_codewords<R: Rng + ?Sized>(inst: &CoveringInstance, sampler: Sampler, m: usize, rng: &mut R) -> Result<Vec<usize>> {
    match sampler {
        Sampler::Iid => {
            let dist = rand::distr::weighted::WeightedIndex::new(&inst.mu)
                .map_err(|e| Error::Argument(format!("sampling distribution: {e}")))?;
            Ok((0..m).map(|_| rng.sample(&dist)).collect())
        }
        Sampler::Ucc { p, n, k } => {
            let field = PrimeField::new(p)?;
            let total = crate::codes::pow_checked(p, n).ok_or_else(|| Error::Size("word space".into()))? as usize;
            if total != inst.alphabet() || inst.mu.iter().any(|&u| (u - 1.0 / total as f64).abs() > 1e-12) {
                return Err(Error::Argument("coset sampler needs a uniform μ on p^n letters".into()));
            }
            let mut exp = 0;
            while crate::codes::pow_checked(p, exp).is_some_and(|v| (v as usize) < m) {
                exp += 1;
            }
            if crate::codes::pow_checked(p, exp) != Some(m as u64) {
                return Err(Error::Argument(format!("M = {m} is not a power of {p}")));
            }
            let k = k.min(exp);
            Ok(UccCode::random(field, n, k, exp - k, rng)?.sweep())
        }
    }
}

fn deviation(inst: &CoveringInstance, states: &[CMatrix], target: &CMatrix, words: &[usize]) -> Result<f64> {
    let mut acc = target.clone();
    let m = words.len() as f64;
    for &w in words {
        if inst.lambda[w] > 0.0 {
            acc -= states[w].scale(inst.lambda[w] / (inst.mu[w] * m));
        }
    }
    trace_norm(&acc)
}

/// Empirical mean of the raw and cut deviations over `trials` codes of size
/// `m`; each mean is compared against its bound plus `3` standard errors.
pub fn covering_experiment(
    inst: &CoveringInstance,
    sampler: Sampler,
    m: usize,
    trials: usize,
    seed: u64,
) -> Result<CoveringReport> {
    if m == 0 {
        return Err(Error::Argument("M must be positive".into()));
    }
    if trials == 0 {
        return Err(Error::Argument("at least one trial is required".into()));
    }
    let cut_states = inst.cut_states();
    let raw_target = average_state(&inst.lambda, &inst.states, inst.dim());
    let cut_target = average_state(&inst.lambda, &cut_states, inst.dim());
    let samples = (0..trials)
        .into_par_iter()
        .map(|t| {
            let mut rng = rng_for(seed, t as u64);
            let words = draw_codewords(inst, sampler, m, &mut rng)?;
            Ok((
                deviation(inst, &inst.states, &raw_target, &words)?,
                deviation(inst, &cut_states, &cut_target, &words)?,
            ))
        })
        .collect::<Result<Vec<(f64, f64)>>>()?;
    let raw: Vec<f64> = samples.iter().map(|s| s.0).collect();
    let cut: Vec<f64> = samples.iter().map(|s| s.1).collect();
    let diff: Vec<f64> = samples.iter().map(|s| s.1 - s.0).collect();
    let base = inst.variance_bound(m);
    let report = |xs: &[f64], bound: f64| {
        let (mean, se) = mean_stderr(xs);
        ExperimentReport { bound, empirical_mean: mean, stderr: se, trials, seed, pass: mean <= bound + SIGMA_SLACK * se }
    };
    Ok(CoveringReport {
        sampler,
        m,
        raw: report(&raw, base + 2.0 * delta_of_epsilon(inst.eps)),
        cut: report(&cut, base),
        cut_minus_raw: mean_stderr(&diff).0,
    })
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ScalingReport {
    pub points: Vec<CoveringReport>,
    /// Least-squares slope of `log mean` against `log M`.
    pub slope_raw: f64,
    pub slope_cut: f64,
    pub pass: bool,
}

/// Ordinary least-squares slope.
pub fn log_log_slope(xs: &[f64], ys: &[f64]) -> f64 {
    let lx: Vec<f64> = xs.iter().map(|x| x.ln()).collect();
    let ly: Vec<f64> = ys.iter().map(|y| y.ln()).collect();
    let n = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxy: f64 = lx.iter().zip(&ly).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = lx.iter().map(|x| (x - mx).powi(2)).sum();
    sxy / sxx
}

/// Runs the experiment at each `M`; passes when every point passes and the
/// cut slope lies in `[-0.6, -0.4]`.
pub fn covering_scaling(
    inst: &CoveringInstance,
    sampler: Sampler,
    ms: &[usize],
    trials: usize,
    seed: u64,
) -> Result<ScalingReport> {
    let points = ms
        .iter()
        .map(|&m| covering_experiment(inst, sampler, m, trials, seed))
        .collect::<Result<Vec<_>>>()?;
    let xs: Vec<f64> = ms.iter().map(|&m| m as f64).collect();
    let raw: Vec<f64> = points.iter().map(|p| p.raw.empirical_mean).collect();
    let cut: Vec<f64> = points.iter().map(|p| p.cut.empirical_mean).collect();
    let slope_raw = log_log_slope(&xs, &raw);
    let slope_cut = log_log_slope(&xs, &cut);
    let pass = points.iter().all(|p| p.raw.pass && p.cut.pass) && (-0.6..=-0.4).contains(&slope_cut);
    Ok(ScalingReport { points, slope_raw, slope_cut, pass })
}

/// Random `X ≥ 0` with a known mean.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PruningSampler {
    /// `X = c G G†` with `G` a `dim × rank` complex Ginibre matrix and
    /// `c = (1-η) / (2 rank)`, so `E[X] = (1-η) I / 2`.
    Wishart { dim: usize, rank: usize },
    Deterministic(#[serde(with = "crate::linalg::matrix_serde")] CMatrix),
}

impl PruningSampler {
    pub fn dim(&self) -> usize {
        match self {
            Self::Wishart { dim, .. } => *dim,
            Self::Deterministic(m) => m.nrows(),
        }
    }

    pub fn mean(&self, eta: f64) -> CMatrix {
        match self {
            Self::Wishart { dim, .. } => identity(*dim).scale((1.0 - eta) / 2.0),
            Self::Deterministic(m) => m.clone(),
        }
    }

    pub fn draw<R: Rng + ?Sized>(&self, eta: f64, rng: &mut R) -> CMatrix {
        match self {
            Self::Wishart { dim, rank } => {
                let g = random::ginibre(*dim, *rank, rng);
                hermitize(&(&g * g.adjoint())).scale((1.0 - eta) / (2.0 * *rank as f64))
            }
            Self::Deterministic(m) => m.clone(),
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct PruningReport {
    pub eta: f64,
    pub trials: usize,
    pub seed: u64,
    /// Trials violating `Tr{I-P} ≤ Tr{X}`.
    pub trace_violations: usize,
    /// Trials violating `1{X ≰ I} ≤ Tr{I-P}`.
    pub indicator_violations: usize,
    pub not_below_identity: usize,
    /// `E[Tr{I-P}]` against `(1/η) E‖X - E[X]‖₁`.
    pub aggregate: ExperimentReport,
    /// Empirical mean of `X` exceeds `(1-η) I` by more than `3` standard
    /// errors.
    pub precondition_warning: bool,
    pub pass: bool,
}

pub fn pruning_inequality_experiment(
    sampler: &PruningSampler,
    trials: usize,
    eta: f64,
    seed: u64,
) -> Result<PruningReport> {
    if !(eta > 0.0 && eta < 1.0) {
        return Err(Error::Argument(format!("eta = {eta} must lie in (0,1)")));
    }
    if trials == 0 {
        return Err(Error::Argument("at least one trial is required".into()));
    }
    let dim = sampler.dim();
    let mean = sampler.mean(eta);
    let id = identity(dim);
    let rows = (0..trials)
        .into_par_iter()
        .map(|t| {
            let mut rng = rng_for(seed, t as u64);
            let x = sampler.draw(eta, &mut rng);
            let p = pruning_projector(&x, &id);
            let loss = dim as f64 - p.trace().re;
            let tr_x = x.trace().re;
            let exceeds = max_eigenvalue(&x) > 1.0 + HYPOTHESIS_SLACK;
            let spread = trace_norm(&(&x - &mean))?;
            Ok((loss, tr_x, exceeds, spread, max_eigenvalue(&x)))
        })
        .collect::<Result<Vec<_>>>()?;
    let trace_violations = rows.iter().filter(|r| r.0 > r.1 + HYPOTHESIS_SLACK).count();
    let indicator_violations = rows.iter().filter(|r| r.2 && r.0 < 1.0 - HYPOTHESIS_SLACK).count();
    let not_below_identity = rows.iter().filter(|r| r.2).count();
    let losses: Vec<f64> = rows.iter().map(|r| r.0).collect();
    let gap: Vec<f64> = rows.iter().map(|r| r.0 - r.3 / eta).collect();
    let (loss_mean, _) = mean_stderr(&losses);
    let (gap_mean, gap_se) = mean_stderr(&gap);
    let bound = rows.iter().map(|r| r.3).sum::<f64>() / (eta * trials as f64);
    let aggregate = ExperimentReport {
        bound,
        empirical_mean: loss_mean,
        stderr: gap_se,
        trials,
        seed,
        pass: gap_mean <= SIGMA_SLACK * gap_se + HYPOTHESIS_SLACK,
    };
    // precondition: the largest eigenvalue of the sample mean stays below 1-η
    let tops: Vec<f64> = rows.iter().map(|r| r.4).collect();
    let (_, top_se) = mean_stderr(&tops);
    let precondition_warning = max_eigenvalue(&mean) > 1.0 - eta + SIGMA_SLACK * top_se + HYPOTHESIS_SLACK;
    Ok(PruningReport {
        eta,
        trials,
        seed,
        trace_violations,
        indicator_violations,
        not_below_identity,
        pass: trace_violations == 0 && indicator_violations == 0 && aggregate.pass,
        aggregate,
        precondition_warning,
    })
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SeparateReport {
    pub lhs: f64,
    pub rhs: f64,
    pub complete: bool,
    /// Equality is asserted only for a complete POVM and `Γ ≥ 0`; for an
    /// indefinite `Γ` and entangled `ρ_AB` the inequality can be strict.
    pub equality_expected: bool,
    pub pass: bool,
}

/// `Σ_y ‖√ρ_AB (Γ ⊗ Λ_y) √ρ_AB‖₁` against `‖√ρ_A Γ √ρ_A‖₁`.
pub fn separate_lemma_check(
    rho_ab: &DensityOperator,
    gamma_a: &HermitianOperator,
    m_y: &[HermitianOperator],
) -> Result<SeparateReport> {
    let (da, db) = match rho_ab.register_dims() {
        &[a, b] => (a, b),
        _ => return dim_err("state must be bipartite"),
    };
    if gamma_a.dim() != da || m_y.iter().any(|e| e.dim() != db) {
        return dim_err("operator dimensions do not match the registers");
    }
    let root_ab = psd_sqrt(rho_ab.op())?;
    let root_ab = root_ab.matrix();
    let mut lhs = 0.0;
    let mut total = CMatrix::zeros(db, db);
    for e in m_y {
        lhs += trace_norm(&(root_ab * kron(gamma_a.matrix(), e.matrix()) * root_ab))?;
        total += e.matrix();
    }
    let rho_a = rho_ab.partial_trace(&[1])?;
    let root_a = psd_sqrt(rho_a.op())?;
    let rhs = trace_norm(&(root_a.matrix() * gamma_a.matrix() * root_a.matrix()))?;
    let complete = (total - identity(db)).norm() <= HYPOTHESIS_SLACK;
    let equality_expected = complete && gamma_a.is_psd();
    let pass = lhs <= rhs + HYPOTHESIS_SLACK && (!equality_expected || (lhs - rhs).abs() <= HYPOTHESIS_SLACK);
    Ok(SeparateReport { lhs, rhs, complete, equality_expected, pass })
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SeparateSweep {
    pub complete_cases: usize,
    /// Largest `|lhs - rhs|` over complete POVMs with `Γ ≥ 0`.
    pub max_equality_gap: f64,
    pub sub_cases: usize,
    /// Largest `lhs - rhs` over shrunk POVMs, and over complete POVMs with an
    /// indefinite `Γ`.
    pub max_excess: f64,
    pub pass: bool,
}

/// Random entangled `ρ_AB` and random complete POVMs on `B`. Equality is
/// checked with a random `Γ^A ≥ 0`; the inequality with a random Hermitian
/// `Γ^A` against both the complete POVM and a randomly shrunk copy.
pub fn separate_lemma_sweep(cases: usize, seed: u64) -> Result<SeparateSweep> {
    let mut rng = rng_for(seed, 0);
    let mut max_equality_gap = 0.0f64;
    let mut max_excess = f64::NEG_INFINITY;
    for _ in 0..cases {
        let rho = random::density_on(&[2, 3], 6, &mut rng);
        let positive = random::psd(2, 2, &mut rng);
        let gamma = random::hermitian(2, &mut rng);
        let outcomes = rng.random_range(1..=4);
        let povm = random::povm(3, outcomes, &mut rng);
        let full = separate_lemma_check(&rho, &positive, povm.elements())?;
        max_equality_gap = max_equality_gap.max((full.lhs - full.rhs).abs());
        let indefinite = separate_lemma_check(&rho, &gamma, povm.elements())?;
        max_excess = max_excess.max(indefinite.lhs - indefinite.rhs);
        let shrunk: Vec<HermitianOperator> =
            povm.elements().iter().map(|e| e.scale(rng.random::<f64>())).collect();
        let sub = separate_lemma_check(&rho, &gamma, &shrunk)?;
        max_excess = max_excess.max(sub.lhs - sub.rhs);
    }
    Ok(SeparateSweep {
        complete_cases: cases,
        max_equality_gap,
        sub_cases: cases,
        max_excess,
        pass: max_equality_gap <= HYPOTHESIS_SLACK && max_excess <= HYPOTHESIS_SLACK,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{c, Povm};

    #[test]
    fn trivial_covering_instances() {
        // one letter, λ = μ = 1: every code reproduces the state exactly
        let sigma = HermitianOperator::from_real_rows(&[&[0.7, 0.1], &[0.1, 0.3]]).unwrap().into_matrix();
        let inst = CoveringInstance::new(vec![1.0], vec![1.0], vec![sigma.clone()], identity(2), vec![identity(2)], 0.0).unwrap();
        for m in [1, 3, 8] {
            let r = covering_experiment(&inst, Sampler::Iid, m, 20, 1).unwrap();
            assert!(r.raw.empirical_mean < 1e-12 && r.cut.empirical_mean < 1e-12);
        }
        // equal states, uniform weights: cut deviation vanishes with Π = Π_x = I
        let inst = CoveringInstance::new(
            vec![0.25; 4],
            vec![0.25; 4],
            vec![sigma; 4],
            identity(2),
            vec![identity(2); 4],
            0.0,
        )
        .unwrap();
        let r = covering_experiment(&inst, Sampler::Ucc { p: 2, n: 2, k: 1 }, 4, 50, 2).unwrap();
        assert!(r.cut.empirical_mean < 1e-12);
        assert!(covering_experiment(&inst, Sampler::Iid, 0, 5, 0).is_err());
    }

    #[test]
    fn hypothesis_checks() {
        let sigma = HermitianOperator::from_real_rows(&[&[0.6, 0.0], &[0.0, 0.4]]).unwrap().into_matrix();
        let inst = CoveringInstance::new(vec![1.0], vec![1.0], vec![sigma.clone()], identity(2), vec![identity(2)], 0.0).unwrap();
        let report = check_covering_hypotheses(&inst).unwrap();
        assert!(report.pass);
        assert!((inst.d - 1.0 / 0.6).abs() < 1e-12);

        // Tr{Π σ_x} = 0.5 with ε = 0.1 is flagged
        let mut half = CMatrix::zeros(2, 2);
        half[(0, 0)] = c(1.0, 0.0);
        let pure = HermitianOperator::from_real_rows(&[&[0.5, 0.5], &[0.5, 0.5]]).unwrap().into_matrix();
        let bad = CoveringInstance::new(vec![1.0], vec![1.0], vec![pure], half, vec![identity(2)], 0.1).unwrap();
        let report = check_covering_hypotheses(&bad).unwrap();
        assert!(!report.holds[0] && !report.pass);
    }

    #[test]
    fn qubit_instance_satisfies_hypotheses() {
        let inst = qubit_covering_instance(0.05).unwrap();
        let report = check_covering_hypotheses(&inst).unwrap();
        assert!(report.pass, "{report:?}");
        assert!(report.d_below_big_d);
        assert!((inst.kappa - 2.0).abs() < 1e-12);
    }

    #[test]
    fn typical_instance_satisfies_hypotheses() {
        let rho = DensityOperator::single(
            HermitianOperator::from_real_rows(&[&[0.75, 0.2], &[0.2, 0.25]]).unwrap().into_matrix(),
        )
        .unwrap();
        let plus = HermitianOperator::from_real_rows(&[&[0.5, 0.5], &[0.5, 0.5]]).unwrap();
        let minus = HermitianOperator::from_real_rows(&[&[0.5, -0.5], &[-0.5, 0.5]]).unwrap();
        let m = Povm::from_elements(vec![plus, minus]).unwrap();
        let inst = typical_covering_instance(&rho, &m, 4, 0.6).unwrap();
        let report = check_covering_hypotheses(&inst).unwrap();
        assert!(report.pass, "{report:?}");
        assert!(inst.eps < 1.0);
    }

    #[test]
    fn covering_is_reproducible_and_cut_tracks_raw() {
        let inst = qubit_covering_instance(0.05).unwrap();
        let a = covering_experiment(&inst, Sampler::Ucc { p: 2, n: 2, k: 1 }, 16, 200, 7).unwrap();
        let b = covering_experiment(&inst, Sampler::Ucc { p: 2, n: 2, k: 1 }, 16, 200, 7).unwrap();
        assert_eq!(a.raw.empirical_mean, b.raw.empirical_mean);
        assert!(a.raw.pass && a.cut.pass);
        assert!(a.cut_minus_raw <= 2.0 * delta_of_epsilon(inst.eps));
        assert!(covering_experiment(&inst, Sampler::Ucc { p: 2, n: 2, k: 1 }, 6, 10, 0).is_err());
    }

    #[test]
    fn pruning_trivial_cases() {
        let zero = PruningSampler::Deterministic(CMatrix::zeros(2, 2));
        let r = pruning_inequality_experiment(&zero, 3, 0.5, 0).unwrap();
        assert_eq!(r.aggregate.empirical_mean, 0.0);
        assert!(r.pass);
        let mut two = CMatrix::zeros(2, 2);
        two[(0, 0)] = c(2.0, 0.0);
        let p = pruning_projector(&two, &identity(2));
        assert!((p.trace().re - 1.0).abs() < 1e-12);
        assert!((p[(1, 1)].re - 1.0).abs() < 1e-12);
        let r = pruning_inequality_experiment(&PruningSampler::Deterministic(two), 1, 0.5, 0).unwrap();
        assert_eq!(r.not_below_identity, 1);
        assert_eq!(r.trace_violations, 0);
        assert_eq!(r.indicator_violations, 0);
        assert!(r.precondition_warning);
    }

    #[test]
    fn wishart_pruning_holds() {
        let r = pruning_inequality_experiment(&PruningSampler::Wishart { dim: 4, rank: 2 }, 500, 0.3, 11).unwrap();
        assert!(r.pass, "{r:?}");
        assert!(r.not_below_identity > 0);
        assert!(!r.precondition_warning);
    }

    #[test]
    fn separate_lemma_examples() {
        let rho = crate::linalg::random::density_on(&[2, 2], 4, &mut rng_for(3, 0));
        let gamma = random::hermitian(2, &mut rng_for(3, 1));
        let positive = random::psd(2, 2, &mut rng_for(3, 2));
        let full = separate_lemma_check(&rho, &positive, &[HermitianOperator::identity(2)]).unwrap();
        assert!(full.equality_expected && full.pass);
        assert!((full.lhs - full.rhs).abs() < 1e-9);
        // product state, {I/2}: LHS is half the RHS
        let prod = DensityOperator::single(
            HermitianOperator::from_real_rows(&[&[0.8, 0.1], &[0.1, 0.2]]).unwrap().into_matrix(),
        )
        .unwrap()
        .tensor(&DensityOperator::maximally_mixed(2));
        let half = separate_lemma_check(&prod, &gamma, &[HermitianOperator::identity(2).scale(0.5)]).unwrap();
        assert!(!half.complete && half.pass);
        assert!((half.lhs - half.rhs / 2.0).abs() < 1e-10);
        // indefinite Γ on a Bell state: the partial trace over B loses
        // cancellations, so the inequality is strict even for {I}
        let bell = DensityOperator::from_matrix(
            HermitianOperator::from_real_rows(&[
                &[0.5, 0.0, 0.0, 0.5],
                &[0.0, 0.0, 0.0, 0.0],
                &[0.0, 0.0, 0.0, 0.0],
                &[0.5, 0.0, 0.0, 0.5],
            ])
            .unwrap()
            .into_matrix(),
            vec![2, 2],
        )
        .unwrap();
        let z = HermitianOperator::diagonal(&[1.0, -1.0]);
        let strict = separate_lemma_check(&bell, &z, &[HermitianOperator::identity(2)]).unwrap();
        assert!(strict.pass && !strict.equality_expected);
        assert!((strict.rhs - 1.0).abs() < 1e-12 && strict.lhs < 1e-12);
        let sweep = separate_lemma_sweep(20, 5).unwrap();
        assert!(sweep.pass, "{sweep:?}");
    }
}
