//! Primal heuristics run on node iterates.
//!
//! Each heuristic has an activation probability and is tried at a node iff
//! one uniform draw from the solve's RNG falls below it. A draw is consumed
//! per heuristic per node whether or not the heuristic runs, so the random
//! stream does not depend on which heuristics are enabled downstream.

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::error::LmoError;
use crate::fw::Objective;
use crate::lmo::SelfManagedLmo;
use crate::numerics::{fractionality, Sense, INTEGRALITY_TOL};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HeuristicKind {
    SimpleRounding,
    ProbabilityRounding,
    FollowGradient,
    HyperplaneAwareRounding,
}

impl HeuristicKind {
    pub fn name(self) -> &'static str {
        match self {
            HeuristicKind::SimpleRounding => "simple_rounding",
            HeuristicKind::ProbabilityRounding => "probability_rounding",
            HeuristicKind::FollowGradient => "follow_gradient",
            HeuristicKind::HyperplaneAwareRounding => "hyperplane_aware_rounding",
        }
    }
}

/// What a heuristic gets to look at.
pub struct HeuristicContext<'a> {
    pub x: &'a [f64],
    pub int_vars: &'a [usize],
    pub objective: &'a dyn Objective,
    /// The oracle with the current node's bounds applied.
    pub lmo: &'a mut dyn SelfManagedLmo,
    pub rng: &'a mut ChaCha8Rng,
}

pub type HeuristicFn = Box<dyn FnMut(&mut HeuristicContext) -> Option<Vec<f64>>>;

/// A user heuristic registered under a name.
pub struct CustomHeuristic {
    pub name: String,
    pub probability: f64,
    pub run: HeuristicFn,
}

pub struct HeuristicSettings {
    pub seed: u64,
    pub simple_rounding_prob: f64,
    pub probability_rounding_prob: f64,
    pub follow_gradient_prob: f64,
    pub follow_gradient_steps: usize,
    pub hyperplane_aware_rounding_prob: f64,
    /// Budget `N` of a `sum(x) = N` region, needed by hyperplane-aware
    /// rounding.
    pub hyperplane_budget: Option<f64>,
    pub custom: Vec<CustomHeuristic>,
}

impl Default for HeuristicSettings {
    fn default() -> Self {
        HeuristicSettings {
            seed: 0,
            simple_rounding_prob: 1.0,
            probability_rounding_prob: 0.0,
            follow_gradient_prob: 0.0,
            follow_gradient_steps: 3,
            hyperplane_aware_rounding_prob: 0.0,
            hyperplane_budget: None,
            custom: Vec::new(),
        }
    }
}

impl std::fmt::Debug for HeuristicSettings {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("HeuristicSettings")
            .field("seed", &self.seed)
            .field("simple_rounding_prob", &self.simple_rounding_prob)
            .field("probability_rounding_prob", &self.probability_rounding_prob)
            .field("follow_gradient_prob", &self.follow_gradient_prob)
            .field("follow_gradient_steps", &self.follow_gradient_steps)
            .field("hyperplane_aware_rounding_prob", &self.hyperplane_aware_rounding_prob)
            .field("hyperplane_budget", &self.hyperplane_budget)
            .field("custom", &self.custom.iter().map(|c| c.name.as_str()).collect::<Vec<_>>())
            .finish()
    }
}

impl HeuristicSettings {
    pub fn validate(&self) -> Result<(), String> {
        let probs = [
            ("simple_rounding_prob", self.simple_rounding_prob),
            ("probability_rounding_prob", self.probability_rounding_prob),
            ("follow_gradient_prob", self.follow_gradient_prob),
            ("hyperplane_aware_rounding_prob", self.hyperplane_aware_rounding_prob),
        ];
        for (name, p) in probs.iter().copied().chain(self.custom.iter().map(|c| (c.name.as_str(), c.probability))) {
            if !(0.0..=1.0).contains(&p) {
                return Err(format!("{name} must lie in [0, 1], got {p}"));
            }
        }
        if self.follow_gradient_steps == 0 {
            return Err("follow_gradient_steps must be at least 1".into());
        }
        if self.hyperplane_aware_rounding_prob > 0.0 && self.hyperplane_budget.is_none() {
            return Err("hyperplane-aware rounding needs hyperplane_budget".into());
        }
        Ok(())
    }
}

/// One uniform draw; true iff it falls below `probability`.
pub fn activate(probability: f64, rng: &mut ChaCha8Rng) -> bool {
    let u: f64 = rng.gen();
    u < probability
}

fn node_interval(lmo: &dyn SelfManagedLmo, var: usize) -> (f64, f64) {
    (
        lmo.get_bound(var, Sense::GreaterThan).unwrap_or(f64::NEG_INFINITY),
        lmo.get_bound(var, Sense::LessThan).unwrap_or(f64::INFINITY),
    )
}

fn accept(candidate: Vec<f64>, lmo: &dyn SelfManagedLmo) -> Option<Vec<f64>> {
    lmo.is_linear_feasible(&candidate).then_some(candidate)
}

/// Rounds every integer coordinate to the nearest integer, half away from
/// zero, then clamps into the node bounds.
pub fn simple_rounding(x: &[f64], int_vars: &[usize], lmo: &dyn SelfManagedLmo) -> Option<Vec<f64>> {
    let mut y = x.to_vec();
    for &i in int_vars {
        let (lo, up) = node_interval(lmo, i);
        y[i] = y[i].round().clamp(lo, up);
    }
    accept(y, lmo)
}

/// Sets each integer coordinate to `floor(x_i) + 1` with probability equal
/// to its fractional part, `floor(x_i)` otherwise.
pub fn probability_rounding(
    x: &[f64],
    int_vars: &[usize],
    lmo: &dyn SelfManagedLmo,
    rng: &mut ChaCha8Rng,
) -> Option<Vec<f64>> {
    let mut y = x.to_vec();
    for &i in int_vars {
        let (lo, up) = node_interval(lmo, i);
        let fl = x[i].floor();
        let frac = x[i] - fl;
        let v = if frac <= INTEGRALITY_TOL {
            fl
        } else if frac >= 1.0 - INTEGRALITY_TOL || rng.gen::<f64>() < frac {
            fl + 1.0
        } else {
            fl
        };
        y[i] = v.clamp(lo, up);
    }
    accept(y, lmo)
}

/// Repeatedly jumps to the LMO vertex for the gradient at the current point
/// and returns the best vertex visited.
pub fn follow_gradient(
    x: &[f64],
    objective: &dyn Objective,
    lmo: &mut dyn SelfManagedLmo,
    steps: usize,
) -> Result<Option<Vec<f64>>, LmoError> {
    let mut g = vec![0.0; x.len()];
    let mut y = x.to_vec();
    let mut best: Option<(Vec<f64>, f64)> = None;
    for _ in 0..steps {
        objective.gradient(&y, &mut g);
        if g.iter().any(|v| !v.is_finite()) {
            break;
        }
        let v = lmo.compute_extreme_point(&g)?;
        let fv = if objective.in_domain(&v) { objective.value(&v) } else { f64::INFINITY };
        if fv.is_finite() && best.as_ref().is_none_or(|(_, bv)| fv < *bv) {
            best = Some((v.clone(), fv));
        }
        if v == y {
            break;
        }
        y = v;
    }
    Ok(best.map(|(v, _)| v))
}

/// Rounding for regions `{sum(x) = budget}`: floors the integer coordinates,
/// then hands the lost budget back one unit at a time to the coordinates
/// with the largest fractional parts that are still below their upper bound
/// (ties by index).
pub fn hyperplane_aware_rounding(
    x: &[f64],
    int_vars: &[usize],
    budget: f64,
    lmo: &dyn SelfManagedLmo,
) -> Option<Vec<f64>> {
    let mut y = x.to_vec();
    for &i in int_vars {
        y[i] = y[i].floor();
    }
    let deficit = budget - y.iter().sum::<f64>();
    if deficit < -INTEGRALITY_TOL || fractionality(deficit) > INTEGRALITY_TOL {
        return None;
    }
    let mut remaining = deficit.round() as i64;
    let mut order: Vec<usize> = int_vars.to_vec();
    order.sort_by(|&a, &b| (x[b] - x[b].floor()).total_cmp(&(x[a] - x[a].floor())).then(a.cmp(&b)));
    while remaining > 0 {
        let mut progressed = false;
        for &i in &order {
            if remaining == 0 {
                break;
            }
            let (_, up) = node_interval(lmo, i);
            if y[i] + 1.0 <= up + INTEGRALITY_TOL {
                y[i] += 1.0;
                remaining -= 1;
                progressed = true;
            }
        }
        if !progressed {
            return None;
        }
    }
    accept(y, lmo)
}

/// Runs every activated heuristic and collects its candidates, tagged with
/// the heuristic's name. Candidates are not yet checked for integrality,
/// domain membership, or improvement.
pub fn run_heuristics(settings: &mut HeuristicSettings, ctx: &mut HeuristicContext) -> Result<Vec<(String, Vec<f64>)>, LmoError> {
    let mut out = Vec::new();
    if activate(settings.simple_rounding_prob, ctx.rng) {
        if let Some(c) = simple_rounding(ctx.x, ctx.int_vars, ctx.lmo) {
            out.push((HeuristicKind::SimpleRounding.name().to_string(), c));
        }
    }
    if activate(settings.probability_rounding_prob, ctx.rng) {
        if let Some(c) = probability_rounding(ctx.x, ctx.int_vars, ctx.lmo, ctx.rng) {
            out.push((HeuristicKind::ProbabilityRounding.name().to_string(), c));
        }
    }
    if activate(settings.follow_gradient_prob, ctx.rng) {
        match follow_gradient(ctx.x, ctx.objective, ctx.lmo, settings.follow_gradient_steps) {
            Ok(Some(c)) => out.push((HeuristicKind::FollowGradient.name().to_string(), c)),
            Ok(None) => {}
            Err(e) if e.is_infeasibility() => {}
            Err(e) => return Err(e),
        }
    }
    if activate(settings.hyperplane_aware_rounding_prob, ctx.rng) {
        if let Some(budget) = settings.hyperplane_budget {
            if let Some(c) = hyperplane_aware_rounding(ctx.x, ctx.int_vars, budget, ctx.lmo) {
                out.push((HeuristicKind::HyperplaneAwareRounding.name().to_string(), c));
            }
        }
    }
    for custom in settings.custom.iter_mut() {
        if activate(custom.probability, ctx.rng) {
            if let Some(c) = (custom.run)(ctx) {
                out.push((custom.name.clone(), c));
            }
        }
    }
    Ok(out)
}
