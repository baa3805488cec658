//! Instance files: JSON objects with a `kind` discriminator, an optional
//! `settings` map of dotted overrides, and the kind's payload fields.
//!
//! Network design variables are laid out as the candidate-arc designs
//! followed by one flow block per destination (ascending), each block
//! covering existing arcs then candidate arcs.

use std::collections::BTreeMap;
use std::path::Path;

use anyhow::{bail, Context, Result};
use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use fwbnb::polytopes::Demand;
use fwbnb::problems::gip::Adjacency;
use fwbnb::problems::network_design::{DEFAULT_MU, DEFAULT_P};
use fwbnb::problems::{ArcCost, Criterion, GraphIsomorphism, NetworkDesign, NetworkDesignInstance, Oedp};

pub type Overrides = BTreeMap<String, serde_json::Value>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum InstanceFile {
    CubeQuadratic(CubeQuadraticFile),
    NetworkDesign(NetworkDesignFile),
    GraphIsomorphism(GraphIsomorphismFile),
    Oedp(OedpFile),
}

/// `0.5 (x - c)^T Q (x - c)` over the integer points of `[lower, upper]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CubeQuadraticFile {
    pub q: Vec<Vec<f64>>,
    pub c: Vec<f64>,
    pub lower: Vec<i64>,
    pub upper: Vec<i64>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub settings: Overrides,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ArcSpec {
    pub tail: usize,
    pub head: usize,
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
    pub rho: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CandidateArcSpec {
    pub tail: usize,
    pub head: usize,
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
    pub rho: f64,
    pub design_cost: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DemandSpec {
    pub source: usize,
    pub dest: usize,
    pub amount: f64,
}

fn default_mu() -> f64 {
    DEFAULT_MU
}

fn default_p() -> f64 {
    DEFAULT_P
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NetworkDesignFile {
    pub num_nodes: usize,
    pub existing_arcs: Vec<ArcSpec>,
    pub candidate_arcs: Vec<CandidateArcSpec>,
    pub demands: Vec<DemandSpec>,
    #[serde(default = "default_mu")]
    pub mu: f64,
    #[serde(default = "default_p")]
    pub p: f64,
    /// Per destination in ascending order; defaults to the demand into each.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub big_m: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub settings: Overrides,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GraphIsomorphismFile {
    pub a: Adjacency,
    pub b: Adjacency,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub settings: Overrides,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum CriterionSpec {
    A,
    D,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OedpFile {
    /// Experiment rows.
    pub a: Vec<Vec<f64>>,
    pub budget: usize,
    pub upper: Vec<usize>,
    pub criterion: CriterionSpec,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub settings: Overrides,
}

impl InstanceFile {
    pub fn kind(&self) -> &'static str {
        match self {
            InstanceFile::CubeQuadratic(_) => "cube_quadratic",
            InstanceFile::NetworkDesign(_) => "network_design",
            InstanceFile::GraphIsomorphism(_) => "graph_isomorphism",
            InstanceFile::Oedp(_) => "oedp",
        }
    }

    pub fn settings(&self) -> &Overrides {
        match self {
            InstanceFile::CubeQuadratic(f) => &f.settings,
            InstanceFile::NetworkDesign(f) => &f.settings,
            InstanceFile::GraphIsomorphism(f) => &f.settings,
            InstanceFile::Oedp(f) => &f.settings,
        }
    }

    /// Parses with field paths in errors, then checks the problem itself.
    ///
    /// The kind is read first so the payload is deserialized directly into
    /// its struct; a buffered tagged enum would lose the error paths.
    pub fn from_json(text: &str) -> Result<Self> {
        let value: serde_json::Value = serde_json::from_str(text).context("instance is not valid JSON")?;
        let Some(obj) = value.as_object() else {
            bail!("instance must be a JSON object");
        };
        let Some(kind) = obj.get("kind").and_then(|k| k.as_str()) else {
            bail!("schema error at `kind`: missing or not a string");
        };
        let mut payload = obj.clone();
        payload.remove("kind");
        let payload = serde_json::Value::Object(payload);
        let inst = match kind {
            "cube_quadratic" => InstanceFile::CubeQuadratic(typed(payload)?),
            "network_design" => InstanceFile::NetworkDesign(typed(payload)?),
            "graph_isomorphism" => InstanceFile::GraphIsomorphism(typed(payload)?),
            "oedp" => InstanceFile::Oedp(typed(payload)?),
            other => bail!(
                "schema error at `kind`: unknown kind `{other}`, expected cube_quadratic, network_design, graph_isomorphism or oedp"
            ),
        };
        inst.validate()?;
        Ok(inst)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        InstanceFile::from_json(&text).with_context(|| format!("loading {}", path.display()))
    }

    /// Pretty JSON with a trailing newline; stable for equal instances.
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("instances always serialize");
        s.push('\n');
        s
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            InstanceFile::CubeQuadratic(f) => f.objective().map(|_| ()),
            InstanceFile::NetworkDesign(f) => f.problem().map(|_| ()),
            InstanceFile::GraphIsomorphism(f) => f.problem().map(|_| ()),
            InstanceFile::Oedp(f) => f.problem().map(|_| ()),
        }
    }
}

fn typed<T: serde::de::DeserializeOwned>(payload: serde_json::Value) -> Result<T> {
    serde_path_to_error::deserialize(payload).map_err(|e| {
        let path = e.path().to_string();
        anyhow::anyhow!("schema error at `{path}`: {}", e.into_inner())
    })
}

/// Validated cube quadratic.
pub struct CubeQuadratic {
    pub q: DMatrix<f64>,
    pub c: Vec<f64>,
}

impl fwbnb::fw::Objective for CubeQuadratic {
    fn value(&self, x: &[f64]) -> f64 {
        let d = nalgebra::DVector::from_iterator(x.len(), x.iter().zip(&self.c).map(|(a, b)| a - b));
        0.5 * d.dot(&(&self.q * &d))
    }

    fn gradient(&self, x: &[f64], storage: &mut [f64]) {
        let d = nalgebra::DVector::from_iterator(x.len(), x.iter().zip(&self.c).map(|(a, b)| a - b));
        storage.copy_from_slice((&self.q * d).as_slice());
    }
}

impl CubeQuadraticFile {
    pub fn objective(&self) -> Result<CubeQuadratic> {
        let n = self.c.len();
        if n == 0 {
            bail!("cube_quadratic: empty center");
        }
        if self.q.len() != n || self.q.iter().any(|r| r.len() != n) {
            bail!("cube_quadratic: q must be {n} x {n}");
        }
        if self.lower.len() != n || self.upper.len() != n {
            bail!("cube_quadratic: lower and upper need {n} entries");
        }
        if let Some(i) = (0..n).find(|&i| self.lower[i] > self.upper[i]) {
            bail!("cube_quadratic: lower[{i}] exceeds upper[{i}]");
        }
        let q = DMatrix::from_fn(n, n, |i, j| self.q[i][j]);
        if (&q - q.transpose()).amax() > 1e-12 * q.amax().max(1.0) {
            bail!("cube_quadratic: q is not symmetric");
        }
        if q.iter().any(|v| !v.is_finite()) || self.c.iter().any(|v| !v.is_finite()) {
            bail!("cube_quadratic: non-finite coefficients");
        }
        let min_eig = q.clone().symmetric_eigenvalues().min();
        if min_eig < -1e-9 * q.amax().max(1.0) {
            bail!("cube_quadratic: q is not positive semidefinite (eigenvalue {min_eig})");
        }
        Ok(CubeQuadratic { q, c: self.c.clone() })
    }
}

impl NetworkDesignFile {
    pub fn instance(&self) -> NetworkDesignInstance {
        let cost = |a: f64, b: f64, g: f64, r: f64| ArcCost {
            alpha: a,
            beta: b,
            gamma: g,
            rho: r,
        };
        NetworkDesignInstance {
            num_nodes: self.num_nodes,
            existing_arcs: self.existing_arcs.iter().map(|a| (a.tail, a.head)).collect(),
            existing_costs: self.existing_arcs.iter().map(|a| cost(a.alpha, a.beta, a.gamma, a.rho)).collect(),
            candidate_arcs: self.candidate_arcs.iter().map(|a| (a.tail, a.head)).collect(),
            candidate_costs: self.candidate_arcs.iter().map(|a| cost(a.alpha, a.beta, a.gamma, a.rho)).collect(),
            design_costs: self.candidate_arcs.iter().map(|a| a.design_cost).collect(),
            demands: self
                .demands
                .iter()
                .map(|d| Demand {
                    source: d.source,
                    dest: d.dest,
                    amount: d.amount,
                })
                .collect(),
            mu: self.mu,
            p: self.p,
            big_m: self.big_m.clone(),
        }
    }

    pub fn from_instance(inst: &NetworkDesignInstance) -> Self {
        NetworkDesignFile {
            num_nodes: inst.num_nodes,
            existing_arcs: inst
                .existing_arcs
                .iter()
                .zip(&inst.existing_costs)
                .map(|(&(tail, head), c)| ArcSpec {
                    tail,
                    head,
                    alpha: c.alpha,
                    beta: c.beta,
                    gamma: c.gamma,
                    rho: c.rho,
                })
                .collect(),
            candidate_arcs: inst
                .candidate_arcs
                .iter()
                .zip(&inst.candidate_costs)
                .zip(&inst.design_costs)
                .map(|((&(tail, head), c), &design_cost)| CandidateArcSpec {
                    tail,
                    head,
                    alpha: c.alpha,
                    beta: c.beta,
                    gamma: c.gamma,
                    rho: c.rho,
                    design_cost,
                })
                .collect(),
            demands: inst
                .demands
                .iter()
                .map(|d| DemandSpec {
                    source: d.source,
                    dest: d.dest,
                    amount: d.amount,
                })
                .collect(),
            mu: inst.mu,
            p: inst.p,
            big_m: inst.big_m.clone(),
            settings: Overrides::new(),
        }
    }

    pub fn problem(&self) -> Result<NetworkDesign> {
        NetworkDesign::new(&self.instance()).context("network_design")
    }
}

impl GraphIsomorphismFile {
    pub fn problem(&self) -> Result<GraphIsomorphism> {
        GraphIsomorphism::new(&self.a, &self.b).context("graph_isomorphism")
    }
}

impl OedpFile {
    pub fn problem(&self) -> Result<Oedp> {
        let criterion = match self.criterion {
            CriterionSpec::A => Criterion::A,
            CriterionSpec::D => Criterion::D,
        };
        Oedp::from_rows(&self.a, self.budget, self.upper.clone(), criterion).context("oedp")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unknown_field_reported_with_path() {
        let text = r#"{"kind": "graph_isomorphism", "a": [[0]], "b": [[0]], "extra": 1}"#;
        let err = InstanceFile::from_json(text).unwrap_err().to_string();
        assert!(err.contains("extra"), "{err}");
    }

    #[test]
    fn nested_type_error_has_path() {
        let text = r#"{"kind": "oedp", "a": [[1.0, "x"]], "budget": 1, "upper": [1], "criterion": "A"}"#;
        let err = InstanceFile::from_json(text).unwrap_err().to_string();
        assert!(err.contains("a[0][1]"), "{err}");
    }

    #[test]
    fn unknown_kind_rejected() {
        assert!(InstanceFile::from_json(r#"{"kind": "tsp"}"#).is_err());
    }

    #[test]
    fn cube_quadratic_validation() {
        let mut f = CubeQuadraticFile {
            q: vec![vec![1.0, 0.0], vec![0.0, 1.0]],
            c: vec![0.4, 1.6],
            lower: vec![0, 0],
            upper: vec![2, 2],
            settings: Overrides::new(),
        };
        assert!(f.objective().is_ok());
        f.q[0][1] = 3.0;
        assert!(f.objective().is_err());
        f.q = vec![vec![-1.0, 0.0], vec![0.0, 1.0]];
        assert!(f.objective().is_err());
    }

    #[test]
    fn rank_deficient_experiment_matrix_rejected_on_load() {
        let text = r#"{"kind": "oedp", "a": [[1.0, 2.0], [2.0, 4.0]], "budget": 2, "upper": [2, 2], "criterion": "D"}"#;
        let err = format!("{:#}", InstanceFile::from_json(text).unwrap_err());
        assert!(err.contains("rank"), "{err}");
    }
}
