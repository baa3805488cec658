//! Network design with congestion costs, linking constraints moved into the
//! objective as a smooth penalty.
//!
//! Variable layout: one 0/1 design variable per candidate arc, then one flow
//! block per destination (ascending destination order). Each flow block
//! covers the existing arcs followed by the candidate arcs.
//!
//! ```text
//! f(y, x) = sum_r r_r y_r + sum_e c_e(x_e)
//!         + mu * sum_z sum_{r} max(x_r^z - M^z y_r, 0)^p
//! c_e(s)  = alpha_e + beta_e s + gamma_e s^rho_e,    x_e = sum_z x_e^z
//! ```

use crate::error::{LmoError, ProblemError};
use crate::fw::Objective;
use crate::lmo::{BoundedLmo, ManagedLmo};
use crate::polytopes::{Demand, FlowLmo};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ArcCost {
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
    /// Strictly greater than 1.
    pub rho: f64,
}

impl ArcCost {
    pub fn eval(&self, s: f64) -> f64 {
        self.alpha + self.beta * s + self.gamma * s.max(0.0).powf(self.rho)
    }

    pub fn derivative(&self, s: f64) -> f64 {
        self.beta + self.rho * self.gamma * s.max(0.0).powf(self.rho - 1.0)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NetworkDesignInstance {
    pub num_nodes: usize,
    pub existing_arcs: Vec<(usize, usize)>,
    pub existing_costs: Vec<ArcCost>,
    pub candidate_arcs: Vec<(usize, usize)>,
    pub candidate_costs: Vec<ArcCost>,
    /// Cost of building each candidate arc.
    pub design_costs: Vec<f64>,
    pub demands: Vec<Demand>,
    pub mu: f64,
    pub p: f64,
    /// Big-M per destination in ascending destination order; defaults to the
    /// total demand into each destination.
    pub big_m: Option<Vec<f64>>,
}

pub const DEFAULT_MU: f64 = 1e3;
pub const DEFAULT_P: f64 = 1.5;

#[derive(Debug, Clone, PartialEq)]
pub struct NetworkDesign {
    num_designs: usize,
    num_existing: usize,
    costs: Vec<ArcCost>,
    design_costs: Vec<f64>,
    mu: f64,
    p: f64,
    big_m: Vec<f64>,
    flow: FlowLmo,
}

impl NetworkDesign {
    pub fn new(inst: &NetworkDesignInstance) -> Result<Self, ProblemError> {
        let invalid = |m: String| Err(ProblemError::Invalid(m));
        if inst.existing_costs.len() != inst.existing_arcs.len() {
            return invalid("one cost per existing arc required".into());
        }
        if inst.candidate_costs.len() != inst.candidate_arcs.len() || inst.design_costs.len() != inst.candidate_arcs.len() {
            return invalid("one arc cost and one design cost per candidate arc required".into());
        }
        let mut costs = inst.existing_costs.clone();
        costs.extend_from_slice(&inst.candidate_costs);
        for (e, c) in costs.iter().enumerate() {
            if !(c.rho > 1.0) || ![c.alpha, c.beta, c.gamma].iter().all(|v| v.is_finite()) {
                return invalid(format!("arc {e}: cost must be finite with rho > 1"));
            }
        }
        if !(inst.mu > 0.0) || !(inst.p > 1.0) {
            return invalid(format!("penalty needs mu > 0 and p > 1, got mu {} and p {}", inst.mu, inst.p));
        }
        let mut arcs = inst.existing_arcs.clone();
        arcs.extend_from_slice(&inst.candidate_arcs);
        if let Some(&(t, h)) = arcs.iter().find(|&&(t, h)| t >= inst.num_nodes || h >= inst.num_nodes) {
            return invalid(format!("arc ({t}, {h}) leaves the node range"));
        }
        if let Some(d) = inst.demands.iter().find(|d| d.source >= inst.num_nodes || d.dest >= inst.num_nodes) {
            return invalid(format!("demand {} -> {} leaves the node range", d.source, d.dest));
        }
        let flow = FlowLmo::new(inst.num_nodes, arcs, inst.demands.clone())
            .map_err(|e| ProblemError::Invalid(e.to_string()))?;
        let inflow: Vec<f64> = flow
            .destinations()
            .iter()
            .map(|&z| inst.demands.iter().filter(|d| d.dest == z).map(|d| d.amount).sum())
            .collect();
        let big_m = match &inst.big_m {
            None => inflow,
            Some(m) => {
                if m.len() != inflow.len() {
                    return invalid(format!("{} big-M values for {} destinations", m.len(), inflow.len()));
                }
                if let Some(k) = (0..m.len()).find(|&k| m[k] < inflow[k]) {
                    return invalid(format!("big-M {} below the demand {} into its destination", m[k], inflow[k]));
                }
                m.clone()
            }
        };
        Ok(NetworkDesign {
            num_designs: inst.candidate_arcs.len(),
            num_existing: inst.existing_arcs.len(),
            costs,
            design_costs: inst.design_costs.clone(),
            mu: inst.mu,
            p: inst.p,
            big_m,
            flow,
        })
    }

    pub fn num_designs(&self) -> usize {
        self.num_designs
    }

    pub fn dim(&self) -> usize {
        self.num_designs + self.flow.num_vars()
    }

    pub fn flow_oracle(&self) -> &FlowLmo {
        &self.flow
    }

    fn num_arcs(&self) -> usize {
        self.costs.len()
    }

    /// Total flow per arc.
    pub fn arc_loads(&self, x: &[f64]) -> Vec<f64> {
        let na = self.num_arcs();
        let flows = &x[self.num_designs..];
        let mut load = vec![0.0; na];
        for block in flows.chunks(na) {
            for (l, f) in load.iter_mut().zip(block) {
                *l += f;
            }
        }
        load
    }

    pub fn design_cost(&self, x: &[f64]) -> f64 {
        self.design_costs.iter().zip(x).map(|(r, y)| r * y).sum()
    }

    pub fn operating_cost(&self, x: &[f64]) -> f64 {
        self.arc_loads(x).iter().zip(&self.costs).map(|(&s, c)| c.eval(s)).sum()
    }

    /// Positive parts of `x_r^z - M^z y_r`, indexed `[destination][candidate]`.
    fn violations(&self, x: &[f64]) -> Vec<Vec<f64>> {
        let na = self.num_arcs();
        let (y, flows) = x.split_at(self.num_designs);
        flows
            .chunks(na)
            .zip(&self.big_m)
            .map(|(block, &m)| {
                (0..self.num_designs)
                    .map(|r| (block[self.num_existing + r] - m * y[r]).max(0.0))
                    .collect()
            })
            .collect()
    }

    pub fn penalty(&self, x: &[f64]) -> f64 {
        self.mu * self.violations(x).iter().flatten().map(|v| v.powf(self.p)).sum::<f64>()
    }

    /// Designs in `{0, 1}` and flows from shortest paths; designs are free
    /// integer variables with global bounds `[0, 1]`.
    pub fn lmo(&self) -> ManagedLmo<NetworkDesignLmo> {
        let r = self.num_designs;
        ManagedLmo::new(
            NetworkDesignLmo {
                num_designs: r,
                flow: self.flow.clone(),
            },
            &vec![0.0; r],
            &vec![1.0; r],
            (0..r).collect(),
        )
    }
}

impl Objective for NetworkDesign {
    fn value(&self, x: &[f64]) -> f64 {
        self.design_cost(x) + self.operating_cost(x) + self.penalty(x)
    }

    fn gradient(&self, x: &[f64], storage: &mut [f64]) {
        let na = self.num_arcs();
        let r = self.num_designs;
        let loads = self.arc_loads(x);
        let viol = self.violations(x);
        let pm = self.p * self.mu;
        storage[..r].copy_from_slice(&self.design_costs);
        for (k, block) in storage[r..].chunks_mut(na).enumerate() {
            for (e, s) in block.iter_mut().enumerate() {
                *s = self.costs[e].derivative(loads[e]);
            }
            for d in 0..r {
                block[self.num_existing + d] += pm * viol[k][d].powf(self.p - 1.0);
            }
        }
        for (k, row) in viol.iter().enumerate() {
            for d in 0..r {
                storage[d] -= pm * self.big_m[k] * row[d].powf(self.p - 1.0);
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NetworkDesignLmo {
    num_designs: usize,
    flow: FlowLmo,
}

impl BoundedLmo for NetworkDesignLmo {
    fn dim(&self) -> usize {
        self.num_designs + self.flow.num_vars()
    }

    fn bounded_compute_extreme_point(
        &mut self,
        direction: &[f64],
        lower: &[f64],
        upper: &[f64],
        int_vars: &[usize],
    ) -> Result<Vec<f64>, LmoError> {
        let r = self.num_designs;
        let mut v = vec![0.0; r];
        for (k, &i) in int_vars.iter().enumerate() {
            let lo = lower[k].max(0.0).ceil();
            let up = upper[k].min(1.0).floor();
            if lo > up {
                return Err(LmoError::NodeInfeasible { var: i });
            }
            v[i] = if direction[i] < 0.0 { up } else { lo };
        }
        v.extend(self.flow.flow_extreme_point(&direction[r..])?);
        Ok(v)
    }

    fn is_simple_linear_feasible(&self, v: &[f64]) -> bool {
        let r = self.num_designs;
        if v.len() != self.dim() {
            return false;
        }
        let scale = self.flow.demands().iter().map(|d| d.amount).sum::<f64>().max(1.0);
        v[..r].iter().all(|&y| (-1e-9..=1.0 + 1e-9).contains(&y)) && self.flow.balance_residual(&v[r..]) <= 1e-7 * scale
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lmo::{LinearMinimizationOracle, SelfManagedLmo};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn cost(alpha: f64, beta: f64, gamma: f64, rho: f64) -> ArcCost {
        ArcCost { alpha, beta, gamma, rho }
    }

    /// Two routes 0 -> 1 -> 3 and 0 -> 2 -> 3, plus a candidate shortcut
    /// 0 -> 3; demand from 0 and 1 into 3.
    fn small() -> NetworkDesignInstance {
        NetworkDesignInstance {
            num_nodes: 4,
            existing_arcs: vec![(0, 1), (1, 3), (0, 2), (2, 3)],
            existing_costs: vec![
                cost(1.0, 1.0, 0.5, 2.0),
                cost(0.5, 2.0, 0.2, 1.5),
                cost(0.2, 1.5, 0.3, 3.0),
                cost(0.1, 1.0, 0.1, 2.5),
            ],
            candidate_arcs: vec![(0, 3), (1, 2)],
            candidate_costs: vec![cost(0.0, 0.5, 0.1, 2.0), cost(0.3, 0.2, 0.4, 1.2)],
            design_costs: vec![4.0, 1.5],
            demands: vec![
                Demand { source: 0, dest: 3, amount: 2.0 },
                Demand { source: 1, dest: 3, amount: 1.0 },
                Demand { source: 0, dest: 2, amount: 0.5 },
            ],
            mu: DEFAULT_MU,
            p: DEFAULT_P,
            big_m: None,
        }
    }

    fn random_point(nd: &NetworkDesign, rng: &mut ChaCha8Rng) -> Vec<f64> {
        let r = nd.num_designs();
        (0..nd.dim())
            .map(|i| if i < r { rng.gen_range(0.0..1.0) } else { rng.gen_range(0.0..3.0) })
            .collect()
    }

    #[test]
    fn zero_point_value_is_fixed_costs() {
        let inst = small();
        let nd = NetworkDesign::new(&inst).unwrap();
        let alphas: f64 = inst.existing_costs.iter().chain(&inst.candidate_costs).map(|c| c.alpha).sum();
        assert!((nd.value(&vec![0.0; nd.dim()]) - alphas).abs() < 1e-12);
    }

    #[test]
    fn linking_satisfied_means_no_penalty() {
        let nd = NetworkDesign::new(&small()).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..20 {
            let mut lmo = nd.lmo();
            let d: Vec<f64> = (0..nd.dim()).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let mut v = lmo.compute_extreme_point(&d).unwrap();
            // open every candidate arc so any flow is allowed
            v[..nd.num_designs()].fill(1.0);
            assert_eq!(nd.penalty(&v), 0.0);
            assert_eq!(nd.value(&v), nd.design_cost(&v) + nd.operating_cost(&v));
        }
    }

    #[test]
    fn gradient_matches_central_differences() {
        let nd = NetworkDesign::new(&small()).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..20 {
            let x = random_point(&nd, &mut rng);
            let mut g = vec![0.0; nd.dim()];
            nd.gradient(&x, &mut g);
            let h = 1e-6;
            for k in 0..nd.dim() {
                let mut xp = x.clone();
                let mut xm = x.clone();
                xp[k] += h;
                xm[k] -= h;
                let fd = (nd.value(&xp) - nd.value(&xm)) / (2.0 * h);
                assert!((fd - g[k]).abs() <= 1e-5 * g[k].abs().max(1.0), "var {k}: {fd} vs {}", g[k]);
            }
        }
    }

    #[test]
    fn convex_along_random_segments() {
        let nd = NetworkDesign::new(&small()).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        for _ in 0..100 {
            let x = random_point(&nd, &mut rng);
            let y = random_point(&nd, &mut rng);
            for t in [0.25, 0.5, 0.75] {
                let z: Vec<f64> = x.iter().zip(&y).map(|(a, b)| t * a + (1.0 - t) * b).collect();
                assert!(nd.value(&z) <= t * nd.value(&x) + (1.0 - t) * nd.value(&y) + 1e-8);
            }
        }
    }

    #[test]
    fn lmo_respects_node_bounds() {
        let nd = NetworkDesign::new(&small()).unwrap();
        let mut lmo = nd.lmo();
        let mut d = vec![1.0; nd.dim()];
        d[0] = -5.0;
        d[1] = -5.0;
        assert_eq!(&lmo.compute_extreme_point(&d).unwrap()[..2], &[1.0, 1.0]);
        lmo.set_bound(0, 0.0, crate::numerics::Sense::LessThan).unwrap();
        let v = lmo.compute_extreme_point(&d).unwrap();
        assert_eq!(&v[..2], &[0.0, 1.0]);
        assert!(lmo.is_linear_feasible(&v));
    }

    #[test]
    fn invalid_instances_rejected() {
        let mut bad = small();
        bad.existing_costs[0].rho = 1.0;
        assert!(NetworkDesign::new(&bad).is_err());
        let mut bad = small();
        bad.big_m = Some(vec![0.1, 10.0]);
        assert!(NetworkDesign::new(&bad).is_err());
        let mut bad = small();
        bad.demands.push(Demand { source: 3, dest: 0, amount: 1.0 });
        assert!(NetworkDesign::new(&bad).is_err());
    }
}
