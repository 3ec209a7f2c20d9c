//! Linear rate regions, the information quantities they are built from,
//! Fourier–Motzkin projection, and the gain-indicator surface scan.
//!
//! Inequalities are stored as `Σ coeff·x ≥ constant`. Variable names used by
//! the builders: `R1`, `R2`, `C1`, `C2`, `Rtilde` (distributed) and `R`,
//! `R1`, `C` (point-to-point).

use std::collections::BTreeMap;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cq::{build_sigma1, build_sigma2, build_sigma3, build_sigma_p2p, CqState, StochasticMap};
use crate::error::{dim_err, Error, Result};
use crate::linalg::{c, trace_norm, CMatrix, DensityOperator, HermitianOperator, Povm};

/// Slack used by [`region_membership`].
pub const MEMBERSHIP_SLACK: f64 = 1e-9;

const COEFF_EPS: f64 = 1e-12;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LinearInequality {
    pub coeffs: BTreeMap<String, f64>,
    #[serde(rename = "const")]
    pub constant: f64,
}

impl LinearInequality {
    /// `Σ coeff·x ≥ constant`; zero coefficients are dropped.
    pub fn new(coeffs: &[(&str, f64)], constant: f64) -> Self {
        let mut map = BTreeMap::new();
        for &(name, v) in coeffs {
            *map.entry(name.to_string()).or_insert(0.0) += v;
        }
        map.retain(|_, v| v.abs() > COEFF_EPS);
        Self { coeffs: map, constant }
    }

    pub fn coeff(&self, var: &str) -> f64 {
        self.coeffs.get(var).copied().unwrap_or(0.0)
    }

    pub fn is_constant(&self) -> bool {
        self.coeffs.is_empty()
    }

    /// `Σ coeff·x - constant`; missing variables are an error.
    pub fn slack(&self, point: &BTreeMap<String, f64>) -> Result<f64> {
        let mut lhs = 0.0;
        for (name, &v) in &self.coeffs {
            let x = point
                .get(name)
                .ok_or_else(|| Error::Argument(format!("point has no value for {name}")))?;
            lhs += v * x;
        }
        Ok(lhs - self.constant)
    }

    fn scaled(&self, s: f64) -> Self {
        Self {
            coeffs: self.coeffs.iter().map(|(k, v)| (k.clone(), v * s)).collect(),
            constant: self.constant * s,
        }
    }

    fn plus(&self, other: &Self) -> Self {
        let mut coeffs = self.coeffs.clone();
        for (k, v) in &other.coeffs {
            *coeffs.entry(k.clone()).or_insert(0.0) += v;
        }
        coeffs.retain(|_, v| v.abs() > COEFF_EPS);
        Self { coeffs, constant: self.constant + other.constant }
    }

    /// Scaled so the largest |coefficient| is 1.
    fn normalized(&self) -> Self {
        let m = self.coeffs.values().fold(0.0f64, |a, v| a.max(v.abs()));
        if m == 0.0 {
            self.clone()
        } else {
            self.scaled(1.0 / m)
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RateRegion {
    pub variables: Vec<String>,
    pub inequalities: Vec<LinearInequality>,
    /// Set when elimination produced a contradictory constant row.
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub empty: bool,
}

impl RateRegion {
    pub fn new(variables: &[&str], inequalities: Vec<LinearInequality>) -> Result<Self> {
        let region = Self {
            variables: variables.iter().map(|s| s.to_string()).collect(),
            inequalities,
            empty: false,
        };
        region.validate()?;
        Ok(region)
    }

    pub fn validate(&self) -> Result<()> {
        for ineq in &self.inequalities {
            if let Some(bad) = ineq.coeffs.keys().find(|k| !self.variables.contains(k)) {
                return Err(Error::Validation(format!("undeclared variable {bad}")));
            }
        }
        Ok(())
    }

    pub fn contains(&self, point: &BTreeMap<String, f64>) -> Result<bool> {
        region_membership(self, point)
    }
}

pub fn point(pairs: &[(&str, f64)]) -> BTreeMap<String, f64> {
    pairs.iter().map(|&(k, v)| (k.to_string(), v)).collect()
}

/// True iff every inequality holds within [`MEMBERSHIP_SLACK`].
pub fn region_membership(region: &RateRegion, point: &BTreeMap<String, f64>) -> Result<bool> {
    if let Some(v) = region.variables.iter().find(|v| !point.contains_key(*v)) {
        return Err(Error::Argument(format!("point has no value for {v}")));
    }
    if region.empty {
        return Ok(false);
    }
    for ineq in &region.inequalities {
        if ineq.slack(point)? < -MEMBERSHIP_SLACK {
            return Ok(false);
        }
    }
    Ok(true)
}

/// Projects out `var`: every lower bound on `var` is paired with every upper
/// bound. Constant rows that hold are dropped; a violated one marks the
/// result empty. Rows with the same normalised direction keep only the
/// tightest constant.
pub fn fourier_motzkin_eliminate(region: &RateRegion, var: &str) -> Result<RateRegion> {
    if !region.variables.iter().any(|v| v == var) {
        return Err(Error::Argument(format!("{var} is not a variable of the region")));
    }
    let mut lower = Vec::new();
    let mut upper = Vec::new();
    let mut rest = Vec::new();
    for ineq in &region.inequalities {
        let a = ineq.coeff(var);
        if a > COEFF_EPS {
            lower.push(ineq);
        } else if a < -COEFF_EPS {
            upper.push(ineq);
        } else {
            let mut clean = ineq.clone();
            clean.coeffs.remove(var);
            rest.push(clean);
        }
    }
    for lo in &lower {
        for up in &upper {
            let (a, b) = (lo.coeff(var), -up.coeff(var));
            let mut combined = lo.scaled(b).plus(&up.scaled(a));
            combined.coeffs.remove(var);
            rest.push(combined);
        }
    }
    let mut empty = region.empty;
    let mut kept: Vec<LinearInequality> = Vec::new();
    for ineq in rest {
        if ineq.is_constant() {
            if ineq.constant > MEMBERSHIP_SLACK {
                empty = true;
            }
            continue;
        }
        let norm = ineq.normalized();
        match kept.iter_mut().find(|k| same_direction(k, &norm)) {
            Some(existing) => {
                if norm.constant > existing.constant {
                    existing.constant = norm.constant;
                }
            }
            None => kept.push(norm),
        }
    }
    Ok(RateRegion {
        variables: region.variables.iter().filter(|v| *v != var).cloned().collect(),
        inequalities: kept,
        empty,
    })
}

fn same_direction(a: &LinearInequality, b: &LinearInequality) -> bool {
    a.coeffs.len() == b.coeffs.len()
        && a
            .coeffs
            .iter()
            .all(|(k, v)| b.coeffs.get(k).is_some_and(|w| (v - w).abs() <= 1e-12))
}

/// Interval of `var` values that extend `point` into `region`, or `None`.
pub fn feasibility_interval(
    region: &RateRegion,
    var: &str,
    point: &BTreeMap<String, f64>,
) -> Result<Option<(f64, f64)>> {
    if region.empty {
        return Ok(None);
    }
    let (mut lo, mut hi) = (f64::NEG_INFINITY, f64::INFINITY);
    for ineq in &region.inequalities {
        let a = ineq.coeff(var);
        let mut other = ineq.clone();
        other.coeffs.remove(var);
        let s = other.slack(point)?;
        if a > COEFF_EPS {
            lo = lo.max(-s / a);
        } else if a < -COEFF_EPS {
            hi = hi.min(-s / a);
        } else if s < -MEMBERSHIP_SLACK {
            return Ok(None);
        }
    }
    Ok((lo <= hi + MEMBERSHIP_SLACK).then_some((lo, hi)))
}

#[derive(Clone, Debug, Default, Serialize, Deserialize)]
pub struct AgreementReport {
    pub samples: usize,
    pub disagreements: usize,
    pub inside_both: usize,
    pub box_half_width: f64,
}

/// Compares two regions over the same variables as membership predicates on
/// `samples` uniform points from `[-B, B]^d` plus `samples / 2` points from
/// `[0, B]^d`, with `B = 2·max|constant|` (at least 1).
pub fn membership_agreement<R: Rng + ?Sized>(
    a: &RateRegion,
    b: &RateRegion,
    samples: usize,
    rng: &mut R,
) -> Result<AgreementReport> {
    let mut vars = a.variables.clone();
    vars.sort();
    let mut vb = b.variables.clone();
    vb.sort();
    if vars != vb {
        return dim_err("regions have different variables");
    }
    let max_const = a
        .inequalities
        .iter()
        .chain(&b.inequalities)
        .fold(0.5f64, |m, i| m.max(i.constant.abs()));
    let half = 2.0 * max_const;
    let mut report = AgreementReport { box_half_width: half, ..Default::default() };
    for s in 0..samples + samples / 2 {
        let low = if s < samples { -half } else { 0.0 };
        let pt: BTreeMap<String, f64> =
            vars.iter().map(|v| (v.clone(), rng.random_range(low..=half))).collect();
        let (ia, ib) = (region_membership(a, &pt)?, region_membership(b, &pt)?);
        report.samples += 1;
        if ia != ib {
            report.disagreements += 1;
        } else if ia {
            report.inside_both += 1;
        }
    }
    Ok(report)
}

/// Every symbol appearing in the implemented rate inequalities, in bits.
/// The distributed and point-to-point builders fill their own fields and
/// leave the others at zero.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct InfoQuantities {
    pub i_u_rb: f64,
    pub i_v_ra: f64,
    pub i_u_rz: f64,
    pub i_v_rz: f64,
    pub i_uv_rz: f64,
    pub i_w_u: f64,
    pub i_w_v: f64,
    pub i_u_v: f64,
    pub s_u: f64,
    pub s_v: f64,
    pub s_uv: f64,
    /// `S(U+V)` in the distributed setting.
    pub s_u_plus_v: f64,
    pub i_u_rzv: f64,
    pub i_v_rzu: f64,
    pub i_w_r: f64,
    pub i_w_rz: f64,
    pub s_w: f64,
    pub log_p: f64,
}

/// Separable-decomposition residuals `‖Λ_z - Σ P(z|s,t) Λ_s ⊗ Λ_t‖₁`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct DecompositionReport {
    pub residuals: Vec<f64>,
    pub max_residual: f64,
    pub pass: bool,
}

pub fn check_separable_decomposition(
    m_ab: &Povm,
    m_a: &Povm,
    m_b: &Povm,
    p_zst: &StochasticMap,
    tol: f64,
) -> Result<DecompositionReport> {
    if p_zst.inputs() != [m_a.len(), m_b.len()] || p_zst.outputs() != m_ab.len() {
        return dim_err("stochastic map alphabets do not match the POVMs");
    }
    if m_ab.dim() != m_a.dim() * m_b.dim() {
        return dim_err("joint POVM dimension is not the product of the local ones");
    }
    let residuals = (0..m_ab.len())
        .map(|z| {
            let mut acc: CMatrix = m_ab.element(z).matrix().clone();
            for (s, la) in m_a.elements().iter().enumerate() {
                for (t, lb) in m_b.elements().iter().enumerate() {
                    acc -= la.matrix().kronecker(lb.matrix()).scale(p_zst.prob(&[s, t], z));
                }
            }
            trace_norm(&acc)
        })
        .collect::<Result<Vec<f64>>>()?;
    let max_residual = residuals.iter().copied().fold(0.0, f64::max);
    Ok(DecompositionReport { residuals, max_residual, pass: max_residual <= tol })
}

/// `Σ_z P(z|s,t) Λ_s ⊗ Λ_t` for every `z`.
pub fn joint_povm(m_a: &Povm, m_b: &Povm, p_zst: &StochasticMap) -> Result<Povm> {
    if p_zst.inputs() != [m_a.len(), m_b.len()] {
        return dim_err("stochastic map inputs do not match the POVMs");
    }
    let d = m_a.dim() * m_b.dim();
    let elements = (0..p_zst.outputs())
        .map(|z| {
            let mut acc = CMatrix::zeros(d, d);
            for (s, la) in m_a.elements().iter().enumerate() {
                for (t, lb) in m_b.elements().iter().enumerate() {
                    acc += la.matrix().kronecker(lb.matrix()).scale(p_zst.prob(&[s, t], z));
                }
            }
            HermitianOperator::from_matrix(acc)
        })
        .collect::<Result<Vec<_>>>()?;
    Povm::from_elements(elements)
}

/// True iff `P(z|s,t) = P(z | f_S(s) + f_T(t))` exactly (up to 1e-12).
pub fn check_sum_structure(
    p_zst: &StochasticMap,
    p: u64,
    f_s: &[u64],
    f_t: &[u64],
    p_zw: &StochasticMap,
) -> bool {
    if p_zst.inputs().len() != 2
        || f_s.len() != p_zst.inputs()[0]
        || f_t.len() != p_zst.inputs()[1]
        || p_zw.inputs() != [p as usize]
        || p_zw.outputs() != p_zst.outputs()
        || f_s.iter().chain(f_t).any(|&x| x >= p)
    {
        return false;
    }
    for (s, &u) in f_s.iter().enumerate() {
        for (t, &v) in f_t.iter().enumerate() {
            let w = ((u + v) % p) as usize;
            for z in 0..p_zst.outputs() {
                if (p_zst.prob(&[s, t], z) - p_zw.prob(&[w], z)).abs() > 1e-12 {
                    return false;
                }
            }
        }
    }
    true
}

/// `σ₃` with `S, T` replaced by `U = f_S(S)`, `V = f_T(T)` over `F_p` and
/// `W = U + V` appended.
pub fn structured_sigma3(
    rho_ab: &DensityOperator,
    m_a: &Povm,
    m_b: &Povm,
    p_zst: &StochasticMap,
    p: u64,
    f_s: &[u64],
    f_t: &[u64],
) -> Result<CqState> {
    check_maps(m_a, m_b, p, f_s, f_t)?;
    let pu = p as usize;
    build_sigma3(rho_ab, m_a, m_b, p_zst)?
        .relabel_classical("S", pu, |s| f_s[s] as usize)?
        .relabel_classical("T", pu, |t| f_t[t] as usize)?
        .derive_classical("W", pu, &["S", "T"], |x| (x[0] + x[1]) % pu)
}

fn check_maps(m_a: &Povm, m_b: &Povm, p: u64, f_s: &[u64], f_t: &[u64]) -> Result<()> {
    if f_s.len() != m_a.len() || f_t.len() != m_b.len() {
        return dim_err("label maps must be total on the POVM outcomes");
    }
    if f_s.iter().chain(f_t).any(|&x| x >= p) {
        return Err(Error::Argument(format!("label maps must land in F_{p}")));
    }
    Ok(())
}

/// All distributed-setting quantities. In the relabelled `σ₃` the classical
/// registers are named `S` (holding `U`), `T` (holding `V`), `W` and `Z`.
pub fn distributed_quantities(
    rho_ab: &DensityOperator,
    m_a: &Povm,
    m_b: &Povm,
    p_zst: &StochasticMap,
    p: u64,
    f_s: &[u64],
    f_t: &[u64],
) -> Result<InfoQuantities> {
    let pu = p as usize;
    let s3 = structured_sigma3(rho_ab, m_a, m_b, p_zst, p, f_s, f_t)?;
    let s1 = build_sigma1(rho_ab, m_a)?.relabel_classical("S", pu, |s| f_s[s] as usize)?;
    let s2 = build_sigma2(rho_ab, m_b)?.relabel_classical("T", pu, |t| f_t[t] as usize)?;
    let mi = |a: &[&str], b: &[&str]| s3.mutual_information(a, b);
    Ok(InfoQuantities {
        i_u_rb: s1.mutual_information(&["S"], &["R", "B"])?,
        i_v_ra: s2.mutual_information(&["T"], &["R", "A"])?,
        i_u_rz: mi(&["S"], &["R", "Z"])?,
        i_v_rz: mi(&["T"], &["R", "Z"])?,
        i_uv_rz: mi(&["S", "T"], &["R", "Z"])?,
        i_w_u: mi(&["W"], &["S"])?,
        i_w_v: mi(&["W"], &["T"])?,
        i_u_v: mi(&["S"], &["T"])?,
        s_u: s3.entropy_of(&["S"])?,
        s_v: s3.entropy_of(&["T"])?,
        s_uv: s3.entropy_of(&["S", "T"])?,
        s_u_plus_v: s3.entropy_of(&["W"])?,
        i_u_rzv: mi(&["S"], &["R", "Z", "T"])?,
        i_v_rzu: mi(&["T"], &["R", "Z", "S"])?,
        log_p: (p as f64).log2(),
        ..Default::default()
    })
}

/// Point-to-point quantities from `σ^{RWZ}`; outcomes of `m` embed into
/// `F_p` by index.
pub fn p2p_quantities(rho: &DensityOperator, m: &Povm, p_zw: &StochasticMap, p: u64) -> Result<InfoQuantities> {
    if m.len() > p as usize {
        return Err(Error::Argument(format!("POVM has {} > p outcomes", m.len())));
    }
    let sigma = build_sigma_p2p(rho, m, p_zw)?;
    Ok(InfoQuantities {
        i_w_r: sigma.mutual_information(&["W"], &["R"])?,
        i_w_rz: sigma.mutual_information(&["W"], &["R", "Z"])?,
        s_w: sigma.entropy_of(&["W"])?,
        log_p: (p as f64).log2(),
        ..Default::default()
    })
}

fn nonneg(vars: &[&str]) -> Vec<LinearInequality> {
    vars.iter().map(|&v| LinearInequality::new(&[(v, 1.0)], 0.0)).collect()
}

/// Structured distributed region over `(R1, R2, C1, C2)`, with the
/// nonnegativity rows included.
pub fn theorem1_region(q: &InfoQuantities) -> RateRegion {
    let extra_u = q.i_w_v - q.i_u_v;
    let extra_v = q.i_w_u - q.i_u_v;
    let mut rows = vec![
        LinearInequality::new(&[("R1", 1.0)], q.i_u_rb + extra_u),
        LinearInequality::new(&[("R2", 1.0)], q.i_v_ra + extra_v),
        LinearInequality::new(&[("R1", 1.0), ("C1", 1.0)], q.i_u_rz + extra_u),
        LinearInequality::new(&[("R2", 1.0), ("C2", 1.0)], q.i_v_rz + extra_v),
        LinearInequality::new(
            &[("R1", 1.0), ("R2", 1.0), ("C1", 1.0), ("C2", 1.0)],
            q.i_uv_rz + q.i_w_u + q.i_w_v - q.i_u_v,
        ),
    ];
    rows.extend(nonneg(&["R1", "R2", "C1", "C2"]));
    RateRegion::new(&["R1", "R2", "C1", "C2"], rows).expect("declared")
}

/// Point-to-point structured region over `(R, R1, C)`.
pub fn theorem2_region(q: &InfoQuantities) -> RateRegion {
    let rows = vec![
        LinearInequality::new(&[("R1", 1.0), ("R", 1.0)], q.i_w_r - q.s_w + q.log_p),
        LinearInequality::new(&[("R1", 1.0), ("R", 1.0), ("C", 1.0)], q.i_w_rz - q.s_w + q.log_p),
        LinearInequality::new(&[("R1", 1.0)], 0.0),
        LinearInequality::new(&[("R1", -1.0)], -(q.log_p - q.s_w)),
        LinearInequality::new(&[("C", 1.0)], 0.0),
    ];
    RateRegion::new(&["R", "R1", "C"], rows).expect("declared")
}

/// Sum-rate bound of the unstructured random-coding baseline.
pub fn unstructured_sum_constraint(q: &InfoQuantities) -> LinearInequality {
    LinearInequality::new(&[("R1", 1.0), ("R2", 1.0), ("C1", 1.0), ("C2", 1.0)], q.i_uv_rz)
}

/// `2 S(U+V) - S(U,V)`; negative means the structured sum-rate bound is the
/// weaker one.
pub fn gain_indicator(q: &InfoQuantities) -> f64 {
    2.0 * q.s_u_plus_v - q.s_uv
}

/// Region over `(Rtilde, R1, R2, C1, C2)` before `Rtilde` is projected out.
pub fn r3_region(q: &InfoQuantities) -> RateRegion {
    let lp = q.log_p;
    let mut rows = vec![
        LinearInequality::new(&[("Rtilde", 1.0), ("R1", 1.0)], q.i_u_rb - q.s_u + lp),
        LinearInequality::new(&[("Rtilde", 1.0), ("R2", 1.0)], q.i_v_ra - q.s_v + lp),
        LinearInequality::new(&[("Rtilde", 1.0), ("R1", 1.0), ("C1", 1.0)], q.i_u_rz - q.s_u + lp),
        LinearInequality::new(&[("Rtilde", 1.0), ("R2", 1.0), ("C2", 1.0)], q.i_v_rz - q.s_v + lp),
        LinearInequality::new(
            &[("Rtilde", 2.0), ("R1", 1.0), ("R2", 1.0), ("C1", 1.0), ("C2", 1.0)],
            q.i_uv_rz - q.s_uv + 2.0 * lp,
        ),
        LinearInequality::new(&[("Rtilde", 1.0)], 0.0),
        LinearInequality::new(&[("Rtilde", -1.0)], -(lp - q.s_u_plus_v)),
    ];
    rows.extend(nonneg(&["R1", "R2", "C1", "C2"]));
    RateRegion::new(&["Rtilde", "R1", "R2", "C1", "C2"], rows).expect("declared")
}

/// `Λ₀ = [[θ₁, θ₂ + iθ₃], [θ₂ - iθ₃, 1 - θ₁]]`, `Λ₁ = I - Λ₀`.
pub fn theta_povm(theta: [f64; 3]) -> Povm {
    let mut l0 = CMatrix::zeros(2, 2);
    l0[(0, 0)] = c(theta[0], 0.0);
    l0[(0, 1)] = c(theta[1], theta[2]);
    l0[(1, 0)] = c(theta[1], -theta[2]);
    l0[(1, 1)] = c(1.0 - theta[0], 0.0);
    let l1 = CMatrix::identity(2, 2) - &l0;
    let e0 = HermitianOperator::from_matrix(l0).expect("hermitian by construction");
    let e1 = HermitianOperator::from_matrix(l1).expect("hermitian by construction");
    Povm::from_elements(vec![e0, e1]).expect("two elements")
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SurfacePoint {
    pub theta1: f64,
    pub theta2: f64,
    pub theta3: f64,
    pub valid: bool,
    pub gain_indicator: Option<f64>,
}

/// Fixed inputs of a surface scan: both parties use the same `θ`-POVM.
#[derive(Clone, Debug)]
pub struct SurfaceSetup {
    pub rho_ab: DensityOperator,
    pub p_zst: StochasticMap,
    pub p: u64,
    pub f_s: Vec<u64>,
    pub f_t: Vec<u64>,
}

/// Gain indicator on the grid `axis³` (θ₁ slowest). Points whose `Λ₀` or
/// `Λ₁` is not PSD within `tol` are flagged invalid.
pub fn surface_scan(setup: &SurfaceSetup, axis: &[f64], tol: f64) -> Result<Vec<SurfacePoint>> {
    let grid: Vec<[f64; 3]> = axis
        .iter()
        .flat_map(|&a| axis.iter().flat_map(move |&b| axis.iter().map(move |&c3| [a, b, c3])))
        .collect();
    grid.par_iter()
        .map(|&theta| {
            let m = theta_povm(theta);
            let valid = m.elements().iter().all(|e| e.min_eigenvalue() >= -tol);
            let gain_indicator = if valid {
                let s3 = structured_sigma3(&setup.rho_ab, &m, &m, &setup.p_zst, setup.p, &setup.f_s, &setup.f_t)?;
                Some(2.0 * s3.entropy_of(&["W"])? - s3.entropy_of(&["S", "T"])?)
            } else {
                None
            };
            Ok(SurfacePoint { theta1: theta[0], theta2: theta[1], theta3: theta[2], valid, gain_indicator })
        })
        .collect()
}

/// `count` evenly spaced values over `[lo, hi]`.
pub fn linspace(lo: f64, hi: f64, count: usize) -> Vec<f64> {
    match count {
        0 => Vec::new(),
        1 => vec![lo],
        _ => (0..count).map(|i| lo + (hi - lo) * i as f64 / (count - 1) as f64).collect(),
    }
}

/// Number of adjacent valid grid pairs (along any axis) with strictly
/// opposite gain signs.
pub fn sign_changes(points: &[SurfacePoint], axis_len: usize) -> usize {
    let at = |i: usize, j: usize, k: usize| &points[(i * axis_len + j) * axis_len + k];
    let mut count = 0;
    for i in 0..axis_len {
        for j in 0..axis_len {
            for k in 0..axis_len {
                let here = at(i, j, k);
                let neighbours = [
                    (i + 1 < axis_len).then(|| at(i + 1, j, k)),
                    (j + 1 < axis_len).then(|| at(i, j + 1, k)),
                    (k + 1 < axis_len).then(|| at(i, j, k + 1)),
                ];
                for other in neighbours.into_iter().flatten() {
                    if let (Some(a), Some(b)) = (here.gain_indicator, other.gain_indicator) {
                        if a * b < 0.0 {
                            count += 1;
                        }
                    }
                }
            }
        }
    }
    count
}

/// Largest `|g(θ₁,θ₂,θ₃) - g(θ₁,θ₂,-θ₃)|` over mirrored valid pairs of a
/// grid whose axis is symmetric about zero, and the number of pairs whose
/// validity differs.
pub fn theta3_symmetry_defect(points: &[SurfacePoint], axis_len: usize) -> (f64, usize) {
    let at = |i: usize, j: usize, k: usize| &points[(i * axis_len + j) * axis_len + k];
    let mut worst = 0.0f64;
    let mut mismatched = 0;
    for i in 0..axis_len {
        for j in 0..axis_len {
            for k in 0..axis_len {
                match (at(i, j, k).gain_indicator, at(i, j, axis_len - 1 - k).gain_indicator) {
                    (Some(a), Some(b)) => worst = worst.max((a - b).abs()),
                    (None, None) => {}
                    _ => mismatched += 1,
                }
            }
        }
    }
    (worst, mismatched)
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SurfaceSummary {
    pub points: usize,
    pub valid: usize,
    pub min_gain: Option<f64>,
    pub max_gain: Option<f64>,
    pub sign_changes: usize,
    pub theta3_symmetry_defect: f64,
    pub validity_mismatches: usize,
}

pub fn summarize_surface(points: &[SurfacePoint], axis_len: usize) -> SurfaceSummary {
    let gains: Vec<f64> = points.iter().filter_map(|p| p.gain_indicator).collect();
    let (defect, mismatched) = theta3_symmetry_defect(points, axis_len);
    SurfaceSummary {
        points: points.len(),
        valid: gains.len(),
        min_gain: gains.iter().copied().reduce(f64::min),
        max_gain: gains.iter().copied().reduce(f64::max),
        sign_changes: sign_changes(points, axis_len),
        theta3_symmetry_defect: defect,
        validity_mismatches: mismatched,
    }
}

pub fn surface_csv(points: &[SurfacePoint]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for p in points {
        w.serialize(p).map_err(|e| Error::Argument(e.to_string()))?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Argument(e.to_string()))?;
    String::from_utf8(bytes).map_err(|e| Error::Argument(e.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::{any, prop_assert_eq, proptest, ProptestConfig};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn zero_quantities() -> InfoQuantities {
        InfoQuantities::default()
    }

    #[test]
    fn hand_projection() {
        let region = RateRegion::new(
            &["Rtilde", "R1"],
            vec![
                LinearInequality::new(&[("Rtilde", 1.0), ("R1", 1.0)], 3.0),
                LinearInequality::new(&[("Rtilde", -1.0)], -1.0),
                LinearInequality::new(&[("Rtilde", 1.0)], 0.0),
            ],
        )
        .unwrap();
        let out = fourier_motzkin_eliminate(&region, "Rtilde").unwrap();
        assert_eq!(out.variables, vec!["R1"]);
        assert!(!out.empty);
        assert_eq!(out.inequalities, vec![LinearInequality::new(&[("R1", 1.0)], 2.0)]);
    }

    #[test]
    fn unbounded_variable_is_dropped() {
        let region = RateRegion::new(&["x", "y"], vec![LinearInequality::new(&[("y", 1.0)], 1.0)]).unwrap();
        let out = fourier_motzkin_eliminate(&region, "x").unwrap();
        assert_eq!(out.variables, vec!["y"]);
        assert_eq!(out.inequalities.len(), 1);
        assert!(fourier_motzkin_eliminate(&region, "z").is_err());
    }

    #[test]
    fn contradictory_bounds_give_empty_region() {
        let region = RateRegion::new(
            &["x", "y"],
            vec![
                LinearInequality::new(&[("x", 1.0)], 2.0),
                LinearInequality::new(&[("x", -1.0)], -1.0),
                LinearInequality::new(&[("y", 1.0)], 0.0),
            ],
        )
        .unwrap();
        let out = fourier_motzkin_eliminate(&region, "x").unwrap();
        assert!(out.empty);
        assert!(!region_membership(&out, &point(&[("y", 5.0)])).unwrap());
    }

    #[test]
    fn membership_examples() {
        let origin = point(&[("R1", 0.0), ("R2", 0.0), ("C1", 0.0), ("C2", 0.0)]);
        assert!(region_membership(&theorem1_region(&zero_quantities()), &origin).unwrap());
        let unit_box = RateRegion::new(
            &["x", "y"],
            vec![
                LinearInequality::new(&[("x", 1.0)], 0.0),
                LinearInequality::new(&[("x", -1.0)], -1.0),
                LinearInequality::new(&[("y", 1.0)], 0.0),
                LinearInequality::new(&[("y", -1.0)], -1.0),
            ],
        )
        .unwrap();
        assert!(region_membership(&unit_box, &point(&[("x", 0.5), ("y", 0.5)])).unwrap());
        assert!(!region_membership(&unit_box, &point(&[("x", 1.5), ("y", 0.5)])).unwrap());
        assert!(region_membership(&unit_box, &point(&[("x", 0.5)])).is_err());
    }

    #[test]
    fn trivial_p2p_region() {
        // M = {I}: I(W;R) = S(W) = 0, so R1 + R ≥ log p and R1 ≤ log p.
        let q = p2p_quantities(&DensityOperator::maximally_mixed(2), &Povm::trivial(2), &StochasticMap::identity(1), 2).unwrap();
        assert!(q.i_w_r.abs() < 1e-9 && q.s_w.abs() < 1e-9);
        let region = theorem2_region(&q);
        assert!(region_membership(&region, &point(&[("R", 0.5), ("R1", 0.5), ("C", 0.0)])).unwrap());
        assert!(!region_membership(&region, &point(&[("R", 0.4), ("R1", 0.5), ("C", 0.0)])).unwrap());
        assert!(!region_membership(&region, &point(&[("R", 0.0), ("R1", 1.1), ("C", 0.0)])).unwrap());
    }

    #[test]
    fn maximal_r1_recovers_unstructured_p2p_constraints() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let rho = crate::linalg::random::density(2, 2, &mut rng);
        let m = crate::linalg::random::povm(2, 2, &mut rng);
        let pzw = StochasticMap::new(vec![2], 2, vec![vec![0.8, 0.2], vec![0.3, 0.7]]).unwrap();
        let q = p2p_quantities(&rho, &m, &pzw, 2).unwrap();
        let r1 = q.log_p - q.s_w;
        let region = theorem2_region(&q);
        for (r, cc) in [(q.i_w_r, q.i_w_rz - q.i_w_r), (q.i_w_r + 0.1, q.i_w_rz - q.i_w_r)] {
            assert!(region_membership(&region, &point(&[("R", r), ("R1", r1), ("C", cc)])).unwrap());
        }
        assert!(!region_membership(&region, &point(&[("R", q.i_w_r - 0.01), ("R1", r1), ("C", 5.0)])).unwrap());
        assert!(!region_membership(&region, &point(&[("R", q.i_w_r), ("R1", r1), ("C", q.i_w_rz - q.i_w_r - 0.01)])).unwrap());
    }

    #[test]
    fn substitution_oracle_for_p2p_region() {
        let q = InfoQuantities { i_w_r: 0.3, i_w_rz: 0.7, s_w: 0.6, log_p: 1.0, ..Default::default() };
        let region = theorem2_region(&q);
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..1000 {
            let (r, r1, cc): (f64, f64, f64) = (rng.random_range(-1.0..2.0), rng.random_range(-1.0..2.0), rng.random_range(-1.0..2.0));
            let oracle = r1 + r >= 0.7 - 1e-9 && r1 + r + cc >= 1.1 - 1e-9 && r1 >= -1e-9 && r1 <= 0.4 + 1e-9 && cc >= -1e-9;
            assert_eq!(region_membership(&region, &point(&[("R", r), ("R1", r1), ("C", cc)])).unwrap(), oracle);
        }
    }

    #[test]
    fn independent_uniform_pair_has_zero_gain() {
        let q = InfoQuantities { s_u_plus_v: 1.0, s_uv: 2.0, ..Default::default() };
        assert_eq!(gain_indicator(&q), 0.0);
        let zero = unstructured_sum_constraint(&zero_quantities());
        assert_eq!(zero.constant, 0.0);
    }

    #[test]
    fn sum_structure_rejects_generic_maps() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut rejected = 0;
        for _ in 0..50 {
            let rows: Vec<Vec<f64>> = (0..4)
                .map(|_| {
                    let a: f64 = rng.random();
                    vec![a, 1.0 - a]
                })
                .collect();
            let pst = StochasticMap::new(vec![2, 2], 2, rows).unwrap();
            let pzw = StochasticMap::new(vec![2], 2, vec![pst.rows()[0].clone(), pst.rows()[1].clone()]).unwrap();
            if !check_sum_structure(&pst, 2, &[0, 1], &[0, 1], &pzw) {
                rejected += 1;
            }
        }
        assert_eq!(rejected, 50);
    }

    #[test]
    fn invalid_theta_is_flagged() {
        let setup = SurfaceSetup {
            rho_ab: DensityOperator::from_matrix(crate::linalg::identity(4).scale(0.25), vec![2, 2]).unwrap(),
            p_zst: StochasticMap::deterministic(vec![2, 2], 2, |x| x[0] | x[1]).unwrap(),
            p: 2,
            f_s: vec![0, 1],
            f_t: vec![0, 1],
        };
        let pts = surface_scan(&setup, &[2.0], 1e-9).unwrap();
        assert!(!pts[0].valid && pts[0].gain_indicator.is_none());
        let csv = surface_csv(&pts).unwrap();
        assert!(csv.starts_with("theta1,theta2,theta3,valid,gain_indicator"));
    }

    fn synthetic(rng: &mut ChaCha8Rng) -> InfoQuantities {
        let lp = [1.0, 3f64.log2()][rng.random_range(0..2)];
        InfoQuantities {
            i_u_rb: rng.random_range(0.0..1.5),
            i_v_ra: rng.random_range(0.0..1.5),
            i_u_rz: rng.random_range(0.0..1.5),
            i_v_rz: rng.random_range(0.0..1.5),
            i_uv_rz: rng.random_range(0.0..2.5),
            i_w_u: rng.random_range(0.0..1.0),
            i_w_v: rng.random_range(0.0..1.0),
            i_u_v: rng.random_range(0.0..1.0),
            s_u: rng.random_range(0.0..lp),
            s_v: rng.random_range(0.0..lp),
            s_uv: rng.random_range(0.0..2.0 * lp),
            s_u_plus_v: rng.random_range(0.0..lp),
            log_p: lp,
            ..Default::default()
        }
    }

    /// Structured distributed rows written with the identity I(W;V) - I(U;V) = S(W) - S(U).
    fn consistent(mut q: InfoQuantities) -> InfoQuantities {
        q.i_u_v = q.s_u + q.s_v - q.s_uv;
        q.i_w_v = q.s_u_plus_v + q.s_v - q.s_uv;
        q.i_w_u = q.s_u_plus_v + q.s_u - q.s_uv;
        q
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]
        #[test]
        fn projection_matches_one_dimensional_feasibility(seed in any::<u64>()) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let q = consistent(synthetic(&mut rng));
            let r3 = r3_region(&q);
            let projected = fourier_motzkin_eliminate(&r3, "Rtilde").unwrap();
            for _ in 0..300 {
                let pt: BTreeMap<String, f64> = ["R1", "R2", "C1", "C2"]
                    .iter()
                    .map(|v| (v.to_string(), rng.random_range(-1.0..4.0)))
                    .collect();
                let extends = feasibility_interval(&r3, "Rtilde", &pt).unwrap().is_some();
                prop_assert_eq!(region_membership(&projected, &pt).unwrap(), extends);
            }
        }

        #[test]
        fn projection_equals_structured_region(seed in any::<u64>()) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let q = consistent(synthetic(&mut rng));
            let projected = fourier_motzkin_eliminate(&r3_region(&q), "Rtilde").unwrap();
            let report = membership_agreement(&projected, &theorem1_region(&q), 2000, &mut rng).unwrap();
            prop_assert_eq!(report.disagreements, 0);
        }
    }
}
