//! Problem files: a bipartite state, two local POVMs, the classical
//! post-processing, and the field embedding used by the structured region.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::cq::StochasticMap;
use crate::error::{Error, Result};
use crate::linalg::{matrix_from_json, DensityOperator, MatrixJson, Povm, PovmJson};
use crate::regions::{
    check_separable_decomposition, check_sum_structure, distributed_quantities, gain_indicator,
    joint_povm, linspace, theorem1_region, unstructured_sum_constraint, DecompositionReport,
    InfoQuantities, LinearInequality, RateRegion, SurfaceSetup,
};

const EXAMPLES: [&str; 3] = [
    include_str!("../data/example1.json"),
    include_str!("../data/example2.json"),
    include_str!("../data/example3.json"),
];

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SurfaceGrid {
    pub lo: f64,
    pub hi: f64,
    pub points: usize,
}

impl SurfaceGrid {
    pub fn axis(&self) -> Vec<f64> {
        linspace(self.lo, self.hi, self.points)
    }
}

impl Default for SurfaceGrid {
    fn default() -> Self {
        Self { lo: -1.0, hi: 1.0, points: 41 }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ProblemSpec {
    #[serde(default)]
    pub name: String,
    pub rho_ab: MatrixJson,
    #[serde(default = "two_qubits")]
    pub register_dims: Vec<usize>,
    pub m_a: PovmJson,
    pub m_b: PovmJson,
    pub p_zst: StochasticMap,
    pub p: u64,
    pub f_s: Vec<u64>,
    pub f_t: Vec<u64>,
    pub p_zw: StochasticMap,
    /// Joint POVM to check against; built from the decomposition when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub m_ab: Option<PovmJson>,
    /// Reference values compared against in reports, keyed by quantity name.
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub expected: BTreeMap<String, f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub surface: Option<SurfaceGrid>,
}

fn two_qubits() -> Vec<usize> {
    vec![2, 2]
}

/// Parsed and validated problem.
#[derive(Clone, Debug)]
pub struct Problem {
    pub spec: ProblemSpec,
    pub rho_ab: DensityOperator,
    pub m_a: Povm,
    pub m_b: Povm,
    pub m_ab: Povm,
}

impl ProblemSpec {
    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    /// Bundled example `1`, `2` or `3`.
    pub fn bundled(id: usize) -> Result<Self> {
        let text = id
            .checked_sub(1)
            .and_then(|i| EXAMPLES.get(i))
            .ok_or_else(|| Error::Argument(format!("no bundled example {id}")))?;
        Self::from_json(text)
    }

    pub fn materialize(&self) -> Result<Problem> {
        let rho_ab = DensityOperator::from_matrix(matrix_from_json(&self.rho_ab)?, self.register_dims.clone())?;
        let m_a = self.m_a.to_povm()?;
        let m_b = self.m_b.to_povm()?;
        let m_ab = match &self.m_ab {
            Some(j) => j.to_povm()?,
            None => joint_povm(&m_a, &m_b, &self.p_zst)?,
        };
        Ok(Problem { spec: self.clone(), rho_ab, m_a, m_b, m_ab })
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Comparison {
    pub expected: f64,
    pub computed: f64,
    pub abs_diff: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RatesReport {
    pub name: String,
    pub decomposition: DecompositionReport,
    pub sum_structure: bool,
    pub quantities: InfoQuantities,
    pub theorem1_region: RateRegion,
    pub unstructured_sum: LinearInequality,
    pub structured_sum_rhs: f64,
    pub unstructured_sum_rhs: f64,
    pub gain_indicator: f64,
    #[serde(skip_serializing_if = "BTreeMap::is_empty")]
    pub comparison: BTreeMap<String, Comparison>,
}

impl Problem {
    /// Fails with the residuals when the joint POVM does not decompose or the
    /// post-processing does not factor through `U + V`.
    pub fn check(&self, tol: f64) -> Result<DecompositionReport> {
        let report = check_separable_decomposition(&self.m_ab, &self.m_a, &self.m_b, &self.spec.p_zst, tol)?;
        if !report.pass {
            return Err(Error::Validation(format!(
                "separable decomposition fails: residuals {:?}",
                report.residuals
            )));
        }
        let s = &self.spec;
        if !check_sum_structure(&s.p_zst, s.p, &s.f_s, &s.f_t, &s.p_zw) {
            return Err(Error::Validation("post-processing does not factor through U + V".into()));
        }
        Ok(report)
    }

    pub fn quantities(&self) -> Result<InfoQuantities> {
        let s = &self.spec;
        distributed_quantities(&self.rho_ab, &self.m_a, &self.m_b, &s.p_zst, s.p, &s.f_s, &s.f_t)
    }

    pub fn rates_report(&self, tol: f64) -> Result<RatesReport> {
        let decomposition = self.check(tol)?;
        let q = self.quantities()?;
        let region = theorem1_region(&q);
        let structured_sum_rhs = region
            .inequalities
            .iter()
            .find(|i| i.coeffs.len() == 4)
            .map(|i| i.constant)
            .unwrap_or(0.0);
        let unstructured = unstructured_sum_constraint(&q);
        let gain = gain_indicator(&q);
        let computed = |key: &str| -> Option<f64> {
            let value = serde_json::to_value(&q).ok()?;
            match key {
                "gain_indicator" => Some(gain),
                _ => value.get(key)?.as_f64(),
            }
        };
        let comparison = self
            .spec
            .expected
            .iter()
            .filter_map(|(k, &expected)| {
                computed(k).map(|c| (k.clone(), Comparison { expected, computed: c, abs_diff: (c - expected).abs() }))
            })
            .collect();
        Ok(RatesReport {
            name: self.spec.name.clone(),
            decomposition,
            sum_structure: true,
            unstructured_sum_rhs: unstructured.constant,
            unstructured_sum: unstructured,
            structured_sum_rhs,
            gain_indicator: gain,
            theorem1_region: region,
            quantities: q,
            comparison,
        })
    }

    pub fn surface_setup(&self) -> SurfaceSetup {
        SurfaceSetup {
            rho_ab: self.rho_ab.clone(),
            p_zst: self.spec.p_zst.clone(),
            p: self.spec.p,
            f_s: self.spec.f_s.clone(),
            f_t: self.spec.f_t.clone(),
        }
    }
}

/// Point-to-point problem: one state, one POVM with at most `p` outcomes,
/// and the classical post-processing.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct P2pSpec {
    #[serde(default)]
    pub name: String,
    pub rho: MatrixJson,
    pub m: PovmJson,
    pub p_zw: StochasticMap,
    pub p: u64,
}

/// Materialized point-to-point problem.
#[derive(Clone, Debug)]
pub struct P2pProblem {
    pub rho: DensityOperator,
    pub m: Povm,
    pub p_zw: StochasticMap,
    pub p: u64,
}

impl P2pSpec {
    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    /// Skewed qubit measured in the `±` basis, followed by a binary
    /// symmetric channel with crossover `0.1`.
    pub fn bundled() -> Result<Self> {
        Self::from_json(include_str!("../data/p2p_default.json"))
    }

    pub fn materialize(&self) -> Result<P2pProblem> {
        let m = self.m.to_povm()?;
        let rho = DensityOperator::from_matrix(matrix_from_json(&self.rho)?, vec![m.dim()])?;
        if m.len() > self.p as usize {
            return Err(Error::Argument(format!("POVM has {} > p = {} outcomes", m.len(), self.p)));
        }
        Ok(P2pProblem { rho, m, p_zw: self.p_zw.clone(), p: self.p })
    }
}

impl P2pProblem {
    pub fn quantities(&self) -> Result<InfoQuantities> {
        crate::regions::p2p_quantities(&self.rho, &self.m, &self.p_zw, self.p)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bundled_examples_parse_and_check() {
        for id in 1..=3 {
            let problem = ProblemSpec::bundled(id).unwrap().materialize().unwrap();
            problem.check(1e-9).unwrap();
        }
        assert!(ProblemSpec::bundled(4).is_err());
        let p2p = P2pSpec::bundled().unwrap().materialize().unwrap();
        let q = p2p.quantities().unwrap();
        // rank-one measurement: I(W;R) = S(ρ)
        assert!((q.i_w_r - p2p.rho.entropy()).abs() < 1e-9);
    }

    #[test]
    fn example_one_quantities() {
        let q = ProblemSpec::bundled(1).unwrap().materialize().unwrap().quantities().unwrap();
        assert!((q.s_u_plus_v - 0.5155).abs() < 5e-4);
        assert!((q.s_u - 0.9999).abs() < 5e-4);
        assert!((q.s_uv - 1.5154).abs() < 5e-4);
        assert!((q.i_u_v - 0.4844).abs() < 5e-4);
    }

    #[test]
    fn perturbed_joint_povm_fails_decomposition() {
        let mut problem = ProblemSpec::bundled(1).unwrap().materialize().unwrap();
        let els: Vec<_> = problem
            .m_ab
            .elements()
            .iter()
            .enumerate()
            .map(|(i, e)| if i == 0 { e.add(&crate::linalg::HermitianOperator::identity(4).scale(0.01)).unwrap() } else { e.clone() })
            .collect();
        problem.m_ab = Povm::from_elements(els).unwrap();
        let err = problem.check(1e-9).unwrap_err();
        assert!(matches!(err, Error::Validation(_)));
        let report = check_separable_decomposition(&problem.m_ab, &problem.m_a, &problem.m_b, &problem.spec.p_zst, 1e-9).unwrap();
        assert!((report.residuals[0] - 0.04).abs() < 1e-12);
    }
}
