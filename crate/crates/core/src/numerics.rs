//! Dense vector helpers, active sets, integer bound maps and solver tolerances.

use std::collections::BTreeMap;

use crate::error::SplitError;

/// Weights below this value are removed from an active set.
pub const WEIGHT_DROP_THRESHOLD: f64 = 1e-12;
/// Coordinate-wise tolerance for treating two vertices as the same point.
pub const VERTEX_EQ_TOL: f64 = 1e-9;
/// Distance to the nearest integer under which a value counts as integral.
pub const INTEGRALITY_TOL: f64 = 1e-6;

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm_sq(a: &[f64]) -> f64 {
    dot(a, a)
}

/// `y += alpha * x`
pub fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

pub fn sub(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}

pub fn all_finite(a: &[f64]) -> bool {
    a.iter().all(|v| v.is_finite())
}

pub fn approx_eq_vec(a: &[f64], b: &[f64], tol: f64) -> bool {
    a.len() == b.len() && a.iter().zip(b).all(|(x, y)| (x - y).abs() <= tol)
}

/// Distance from `v` to the closest integer.
pub fn fractionality(v: f64) -> f64 {
    (v - v.round()).abs()
}

pub fn is_integral(v: f64) -> bool {
    fractionality(v) <= INTEGRALITY_TOL
}

/// True when every coordinate listed in `int_vars` is integral.
pub fn is_integer_feasible(x: &[f64], int_vars: &[usize]) -> bool {
    int_vars.iter().all(|&i| is_integral(x[i]))
}

/// Neumaier-compensated sum.
pub fn compensated_sum<I: IntoIterator<Item = f64>>(values: I) -> f64 {
    let mut sum = 0.0;
    let mut comp = 0.0;
    for v in values {
        let t = sum + v;
        if sum.abs() >= v.abs() {
            comp += (sum - t) + v;
        } else {
            comp += (v - t) + sum;
        }
        sum = t;
    }
    sum + comp
}

/// A convex combination of vertices representing a Frank-Wolfe iterate.
///
/// Weights are kept nonnegative and summing to one. Vertices that are equal
/// within [`VERTEX_EQ_TOL`] are merged on insertion.
#[derive(Debug, Clone, PartialEq)]
pub struct ActiveSet {
    vertices: Vec<Vec<f64>>,
    weights: Vec<f64>,
}

impl ActiveSet {
    /// Active set holding a single vertex with weight one.
    pub fn singleton(vertex: Vec<f64>) -> Self {
        ActiveSet {
            vertices: vec![vertex],
            weights: vec![1.0],
        }
    }

    /// Builds an active set from explicit parts. Weights are normalized and
    /// tiny entries dropped; duplicate vertices are merged.
    ///
    /// Returns `None` when the input is empty, lengths disagree, or the
    /// weights are negative or do not carry positive mass.
    pub fn from_parts(vertices: Vec<Vec<f64>>, weights: Vec<f64>) -> Option<Self> {
        if vertices.is_empty() || vertices.len() != weights.len() {
            return None;
        }
        let dim = vertices[0].len();
        if vertices.iter().any(|v| v.len() != dim) || weights.iter().any(|w| *w < 0.0 || !w.is_finite()) {
            return None;
        }
        let mut set = ActiveSet {
            vertices: Vec::with_capacity(vertices.len()),
            weights: Vec::with_capacity(weights.len()),
        };
        for (v, w) in vertices.into_iter().zip(weights) {
            set.push_merged(v, w);
        }
        let total: f64 = set.weights.iter().sum();
        if total <= 0.0 {
            return None;
        }
        for w in &mut set.weights {
            *w /= total;
        }
        set.cleanup();
        if set.is_empty() {
            return None;
        }
        Some(set)
    }

    pub fn len(&self) -> usize {
        self.vertices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vertices.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.vertices[0].len()
    }

    pub fn vertices(&self) -> &[Vec<f64>] {
        &self.vertices
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn vertex(&self, idx: usize) -> &[f64] {
        &self.vertices[idx]
    }

    pub fn weight(&self, idx: usize) -> f64 {
        self.weights[idx]
    }

    /// The weighted sum of the vertices.
    pub fn iterate(&self) -> Vec<f64> {
        let mut x = vec![0.0; self.dim()];
        for (v, &w) in self.vertices.iter().zip(&self.weights) {
            axpy(w, v, &mut x);
        }
        x
    }

    /// Index of the vertex minimizing and of the vertex maximizing
    /// `<direction, v>`. Ties go to the lowest index.
    pub fn argmin_argmax(&self, direction: &[f64]) -> (usize, usize) {
        let mut imin = 0;
        let mut imax = 0;
        let mut vmin = f64::INFINITY;
        let mut vmax = f64::NEG_INFINITY;
        for (i, v) in self.vertices.iter().enumerate() {
            let s = dot(direction, v);
            if s < vmin {
                vmin = s;
                imin = i;
            }
            if s > vmax {
                vmax = s;
                imax = i;
            }
        }
        (imin, imax)
    }

    /// Position of a vertex equal to `v` within [`VERTEX_EQ_TOL`].
    pub fn find(&self, v: &[f64]) -> Option<usize> {
        self.vertices
            .iter()
            .position(|u| approx_eq_vec(u, v, VERTEX_EQ_TOL))
    }

    fn push_merged(&mut self, v: Vec<f64>, w: f64) -> usize {
        match self.find(&v) {
            Some(i) => {
                self.weights[i] += w;
                i
            }
            None => {
                self.vertices.push(v);
                self.weights.push(w);
                self.vertices.len() - 1
            }
        }
    }

    /// Frank-Wolfe update `x <- (1 - gamma) x + gamma v`.
    pub fn fw_update(&mut self, gamma: f64, v: Vec<f64>) {
        if gamma >= 1.0 {
            self.vertices = vec![v];
            self.weights = vec![1.0];
            return;
        }
        for w in &mut self.weights {
            *w *= 1.0 - gamma;
        }
        self.push_merged(v, gamma);
    }

    /// Away update `x <- (1 + gamma) x - gamma a` for the vertex at `away`.
    pub fn away_update(&mut self, gamma: f64, away: usize) {
        for w in &mut self.weights {
            *w *= 1.0 + gamma;
        }
        self.weights[away] -= gamma;
        if self.weights[away] < 0.0 {
            self.weights[away] = 0.0;
        }
    }

    /// Moves `amount` weight from vertex `from` to vertex `to`.
    pub fn shift_weight(&mut self, from: usize, to: usize, amount: f64) {
        let amount = amount.min(self.weights[from]);
        self.weights[from] -= amount;
        self.weights[to] += amount;
    }

    /// Moves `amount` weight from vertex `from` onto `v`, inserting it if new.
    pub fn shift_weight_to_new(&mut self, from: usize, v: Vec<f64>, amount: f64) {
        let amount = amount.min(self.weights[from]);
        self.weights[from] -= amount;
        self.push_merged(v, amount);
    }

    /// Removes vertices whose weight fell below [`WEIGHT_DROP_THRESHOLD`] and
    /// renormalizes. Returns the removed vertices.
    pub fn cleanup(&mut self) -> Vec<Vec<f64>> {
        let mut dropped = Vec::new();
        let mut i = 0;
        while i < self.weights.len() {
            if self.weights[i] < WEIGHT_DROP_THRESHOLD && self.weights.len() > 1 {
                self.weights.swap_remove(i);
                dropped.push(self.vertices.swap_remove(i));
            } else {
                i += 1;
            }
        }
        let total: f64 = self.weights.iter().sum();
        if total > 0.0 {
            for w in &mut self.weights {
                *w /= total;
            }
        }
        dropped
    }

    /// Splits the set on integer variable `var` into the vertices with
    /// `v[var] <= floor_val` and those with `v[var] >= ceil_val`, each
    /// renormalized.
    ///
    /// Either side is `None` when it receives no vertex.
    pub fn split(
        &self,
        var: usize,
        floor_val: f64,
        ceil_val: f64,
    ) -> Result<(Option<ActiveSet>, Option<ActiveSet>), SplitError> {
        let mut left = (Vec::new(), Vec::new());
        let mut right = (Vec::new(), Vec::new());
        for (v, &w) in self.vertices.iter().zip(&self.weights) {
            let val = v[var];
            if val <= floor_val + INTEGRALITY_TOL {
                left.0.push(v.clone());
                left.1.push(w);
            } else if val >= ceil_val - INTEGRALITY_TOL {
                right.0.push(v.clone());
                right.1.push(w);
            } else {
                return Err(SplitError { var, value: val });
            }
        }
        Ok((
            ActiveSet::from_parts(left.0, left.1),
            ActiveSet::from_parts(right.0, right.1),
        ))
    }
}

/// Which side of a variable a bound constrains.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Sense {
    /// `x[i] >= value`
    GreaterThan,
    /// `x[i] <= value`
    LessThan,
}

/// Lower and upper bounds on (a subset of) the integer variables.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct IntegerBounds {
    pub lower: BTreeMap<usize, f64>,
    pub upper: BTreeMap<usize, f64>,
    pub integer_vars: Vec<usize>,
}

impl IntegerBounds {
    pub fn new(integer_vars: Vec<usize>) -> Self {
        let mut integer_vars = integer_vars;
        integer_vars.sort_unstable();
        integer_vars.dedup();
        IntegerBounds {
            lower: BTreeMap::new(),
            upper: BTreeMap::new(),
            integer_vars,
        }
    }

    /// Bounds with explicit lower/upper values for every listed variable.
    pub fn from_box(integer_vars: Vec<usize>, lower: &[f64], upper: &[f64]) -> Self {
        let mut b = IntegerBounds::new(integer_vars);
        for (k, &i) in b.integer_vars.clone().iter().enumerate() {
            b.lower.insert(i, lower[k]);
            b.upper.insert(i, upper[k]);
        }
        b
    }

    pub fn push(&mut self, var: usize, value: f64, sense: Sense) {
        match sense {
            Sense::GreaterThan => self.lower.insert(var, value),
            Sense::LessThan => self.upper.insert(var, value),
        };
    }

    pub fn get(&self, var: usize, sense: Sense) -> Option<f64> {
        match sense {
            Sense::GreaterThan => self.lower.get(&var).copied(),
            Sense::LessThan => self.upper.get(&var).copied(),
        }
    }

    /// Returns a copy with one bound tightened. The new interval is the
    /// intersection of the old one and the requested half-line.
    pub fn tightened(&self, var: usize, value: f64, sense: Sense) -> Self {
        let mut b = self.clone();
        match sense {
            Sense::GreaterThan => {
                let v = b.lower.get(&var).map_or(value, |&old| old.max(value));
                b.lower.insert(var, v);
            }
            Sense::LessThan => {
                let v = b.upper.get(&var).map_or(value, |&old| old.min(value));
                b.upper.insert(var, v);
            }
        }
        b
    }

    /// `self` bounds taking precedence, `fallback` used where absent.
    pub fn merged_over(&self, fallback: &IntegerBounds) -> IntegerBounds {
        let mut merged = fallback.clone();
        for (&i, &v) in &self.lower {
            merged.lower.insert(i, v);
        }
        for (&i, &v) in &self.upper {
            merged.upper.insert(i, v);
        }
        merged
    }

    /// First variable whose lower bound exceeds its upper bound.
    pub fn crossed(&self) -> Option<usize> {
        self.lower
            .iter()
            .find(|(i, &lo)| self.upper.get(i).is_some_and(|&up| lo > up + VERTEX_EQ_TOL))
            .map(|(&i, _)| i)
    }

    /// All bounds as `(var, sense, value)` triples in a fixed order.
    pub fn entries(&self) -> Vec<(usize, Sense, f64)> {
        let mut out: Vec<_> = self
            .lower
            .iter()
            .map(|(&i, &v)| (i, Sense::GreaterThan, v))
            .chain(self.upper.iter().map(|(&i, &v)| (i, Sense::LessThan, v)))
            .collect();
        out.sort_by_key(|a| (a.0, a.1));
        out
    }
}

/// Rounds to `digits` significant decimal digits, so that products like
/// `1e-2 * 0.8^2` land on the decimal they denote.
pub fn round_significant(v: f64, digits: usize) -> f64 {
    if v == 0.0 || !v.is_finite() {
        return v;
    }
    format!("{:.*e}", digits.saturating_sub(1), v).parse().unwrap_or(v)
}

/// Termination and accuracy settings shared by the tree and node solvers.
#[derive(Debug, Clone, PartialEq)]
pub struct Tolerances {
    pub abs_gap: f64,
    pub rel_gap: f64,
    pub fw_gap_decay: f64,
    pub fw_epsilon_start: f64,
    pub fw_epsilon_min: f64,
    pub min_lower_bound: Option<f64>,
    pub max_fw_iter: usize,
    pub node_limit: Option<usize>,
    pub time_limit_s: Option<f64>,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            abs_gap: 1e-6,
            rel_gap: 0.01,
            fw_gap_decay: 0.8,
            fw_epsilon_start: 1e-2,
            fw_epsilon_min: 1e-6,
            min_lower_bound: None,
            max_fw_iter: 10_000,
            node_limit: None,
            time_limit_s: None,
        }
    }
}

impl Tolerances {
    pub fn validate(&self) -> Result<(), String> {
        if !(self.fw_gap_decay > 0.0 && self.fw_gap_decay < 1.0) {
            return Err(format!("fw_gap_decay must lie in (0, 1), got {}", self.fw_gap_decay));
        }
        if self.fw_epsilon_min > self.fw_epsilon_start {
            return Err("fw_epsilon_min exceeds fw_epsilon_start".into());
        }
        if !(self.abs_gap > 0.0) {
            return Err("abs_gap must be positive".into());
        }
        if self.rel_gap < 0.0 {
            return Err("rel_gap must be nonnegative".into());
        }
        Ok(())
    }

    /// Frank-Wolfe tolerance for a node at `depth`.
    pub fn node_epsilon(&self, depth: usize) -> f64 {
        let decayed = self.fw_epsilon_start * self.fw_gap_decay.powi(depth as i32);
        round_significant(decayed, 12).max(self.fw_epsilon_min)
    }

    /// The largest `ub - lb` accepted as optimal.
    pub fn gap_tolerance(&self, incumbent: f64) -> f64 {
        self.abs_gap.max(self.rel_gap * incumbent.abs().max(1e-10))
    }
}
