//! Linear minimization oracle contracts.
//!
//! Two ways of handing a feasible region to the tree exist:
//!
//! * [`BoundedLmo`]: the oracle only knows how to minimize a linear function
//!   under explicit integer bounds passed on every call. Wrap it in a
//!   [`ManagedLmo`] and the framework keeps track of node bounds.
//! * [`SelfManagedLmo`]: the oracle stores the bounds itself and exposes
//!   read/set/delete operations, which lets it keep derived structure (for
//!   instance a reduced assignment problem) between calls.
//!
//! The branch-and-bound driver only talks to [`SelfManagedLmo`];
//! [`ManagedLmo`] implements it on top of any [`BoundedLmo`].

use std::time::Instant;

use crate::error::LmoError;
use crate::numerics::{IntegerBounds, Sense, VERTEX_EQ_TOL};

/// Minimizes linear functions over a fixed feasible region.
pub trait LinearMinimizationOracle {
    fn dim(&self) -> usize;

    /// A vertex `v` of the current region minimizing `<direction, v>`.
    fn compute_extreme_point(&mut self, direction: &[f64]) -> Result<Vec<f64>, LmoError>;

    /// Whether the in-face and maximum-step oracles are available.
    fn supports_inface(&self) -> bool {
        false
    }

    /// Like [`compute_extreme_point`](Self::compute_extreme_point) but
    /// restricted to the minimal face of the region containing `x`.
    fn compute_inface_extreme_point(&mut self, _direction: &[f64], _x: &[f64]) -> Result<Vec<f64>, LmoError> {
        Err(LmoError::Unsupported("in-face extreme point"))
    }

    /// Largest `gamma` in `[0, 1]` with `x - gamma * direction` feasible.
    fn dicg_maximum_step(&self, _direction: &[f64], _x: &[f64]) -> Result<f64, LmoError> {
        Err(LmoError::Unsupported("maximum step"))
    }
}

/// Oracle whose integer bounds are supplied on every call.
pub trait BoundedLmo {
    fn dim(&self) -> usize;

    /// `lower[k]` and `upper[k]` bound variable `int_vars[k]`. The result
    /// must be integral on `int_vars` and respect the bounds.
    fn bounded_compute_extreme_point(
        &mut self,
        direction: &[f64],
        lower: &[f64],
        upper: &[f64],
        int_vars: &[usize],
    ) -> Result<Vec<f64>, LmoError>;

    /// Feasibility with respect to the constraints other than the integer
    /// bounds, within the oracle's tolerance.
    fn is_simple_linear_feasible(&self, v: &[f64]) -> bool;
}

/// Oracle that stores and manages its own integer bounds.
pub trait SelfManagedLmo: LinearMinimizationOracle {
    fn integer_variables(&self) -> Vec<usize>;

    /// Bounds of the full problem. Called once per solve, before the tree is
    /// built.
    fn build_global_bounds(&self, int_vars: &[usize]) -> IntegerBounds;

    fn get_bound(&self, var: usize, sense: Sense) -> Option<f64>;

    fn lower_bound_list(&self) -> Vec<(usize, f64)>;

    fn upper_bound_list(&self) -> Vec<(usize, f64)>;

    fn set_bound(&mut self, var: usize, value: f64, sense: Sense) -> Result<(), LmoError>;

    /// Restores the listed bounds to their global values.
    fn delete_bounds(&mut self, cons_delete: &[(usize, Sense)]);

    /// Feasibility of `x` for the current region, bounds included.
    fn is_linear_feasible(&self, x: &[f64]) -> bool;

    /// Checks that the stored bounds agree with `bounds` and do not leave the
    /// global box.
    fn build_lmo_correct(&self, bounds: &IntegerBounds) -> bool {
        bounds.entries().iter().all(|&(var, sense, value)| {
            self.get_bound(var, sense)
                .is_some_and(|b| (b - value).abs() <= VERTEX_EQ_TOL)
        })
    }
}

fn check_direction(direction: &[f64]) -> Result<(), LmoError> {
    match direction.iter().position(|v| !v.is_finite()) {
        Some(index) => Err(LmoError::InvalidDirection { index }),
        None => Ok(()),
    }
}

/// Merges node bounds over global bounds and delegates to `lmo`.
///
/// A node bound wins over the global bound of the same variable; variables
/// without a node bound fall back to the global one.
pub fn managed_compute_extreme_point<B: BoundedLmo + ?Sized>(
    lmo: &mut B,
    node_bounds: &IntegerBounds,
    global_bounds: &IntegerBounds,
    direction: &[f64],
) -> Result<Vec<f64>, LmoError> {
    check_direction(direction)?;
    let merged = node_bounds.merged_over(global_bounds);
    if let Some(var) = merged.crossed() {
        return Err(LmoError::NodeInfeasible { var });
    }
    let int_vars = &global_bounds.integer_vars;
    let lower: Vec<f64> = int_vars
        .iter()
        .map(|i| merged.lower.get(i).copied().unwrap_or(f64::NEG_INFINITY))
        .collect();
    let upper: Vec<f64> = int_vars
        .iter()
        .map(|i| merged.upper.get(i).copied().unwrap_or(f64::INFINITY))
        .collect();
    lmo.bounded_compute_extreme_point(direction, &lower, &upper, int_vars)
}

/// Framework-side bound management around a [`BoundedLmo`].
#[derive(Debug, Clone)]
pub struct ManagedLmo<B> {
    pub inner: B,
    global: IntegerBounds,
    node: IntegerBounds,
}

impl<B: BoundedLmo> ManagedLmo<B> {
    /// `lower[k]`/`upper[k]` are the global bounds of `int_vars[k]`.
    pub fn new(inner: B, lower: &[f64], upper: &[f64], int_vars: Vec<usize>) -> Self {
        let global = IntegerBounds::from_box(int_vars.clone(), lower, upper);
        ManagedLmo {
            inner,
            node: IntegerBounds::new(global.integer_vars.clone()),
            global,
        }
    }

    pub fn global_bounds(&self) -> &IntegerBounds {
        &self.global
    }

    pub fn node_bounds(&self) -> &IntegerBounds {
        &self.node
    }

    fn merged(&self) -> IntegerBounds {
        self.node.merged_over(&self.global)
    }
}

impl<B: BoundedLmo> LinearMinimizationOracle for ManagedLmo<B> {
    fn dim(&self) -> usize {
        self.inner.dim()
    }

    fn compute_extreme_point(&mut self, direction: &[f64]) -> Result<Vec<f64>, LmoError> {
        managed_compute_extreme_point(&mut self.inner, &self.node, &self.global, direction)
    }
}

impl<B: BoundedLmo> SelfManagedLmo for ManagedLmo<B> {
    fn integer_variables(&self) -> Vec<usize> {
        self.global.integer_vars.clone()
    }

    fn build_global_bounds(&self, _int_vars: &[usize]) -> IntegerBounds {
        self.global.clone()
    }

    fn get_bound(&self, var: usize, sense: Sense) -> Option<f64> {
        self.node.get(var, sense).or_else(|| self.global.get(var, sense))
    }

    fn lower_bound_list(&self) -> Vec<(usize, f64)> {
        self.merged().lower.into_iter().collect()
    }

    fn upper_bound_list(&self) -> Vec<(usize, f64)> {
        self.merged().upper.into_iter().collect()
    }

    fn set_bound(&mut self, var: usize, value: f64, sense: Sense) -> Result<(), LmoError> {
        self.node.push(var, value, sense);
        Ok(())
    }

    fn delete_bounds(&mut self, cons_delete: &[(usize, Sense)]) {
        for &(var, sense) in cons_delete {
            match sense {
                Sense::GreaterThan => self.node.lower.remove(&var),
                Sense::LessThan => self.node.upper.remove(&var),
            };
        }
    }

    fn is_linear_feasible(&self, x: &[f64]) -> bool {
        if x.len() != self.dim() || !self.inner.is_simple_linear_feasible(x) {
            return false;
        }
        let merged = self.merged();
        merged.integer_vars.iter().all(|&i| {
            let lo = merged.lower.get(&i).copied().unwrap_or(f64::NEG_INFINITY);
            let up = merged.upper.get(&i).copied().unwrap_or(f64::INFINITY);
            x[i] >= lo - 1e-9 && x[i] <= up + 1e-9
        })
    }
}

/// Counts and times the extreme-point computations of a wrapped oracle.
#[derive(Debug, Clone)]
pub struct TimeTrackingLmo<L> {
    pub inner: L,
    pub call_count: usize,
    pub total_time_s: f64,
}

impl<L> TimeTrackingLmo<L> {
    pub fn new(inner: L) -> Self {
        TimeTrackingLmo {
            inner,
            call_count: 0,
            total_time_s: 0.0,
        }
    }

    pub fn into_inner(self) -> L {
        self.inner
    }
}

impl<L: LinearMinimizationOracle> LinearMinimizationOracle for TimeTrackingLmo<L> {
    fn dim(&self) -> usize {
        self.inner.dim()
    }

    fn compute_extreme_point(&mut self, direction: &[f64]) -> Result<Vec<f64>, LmoError> {
        let start = Instant::now();
        let out = self.inner.compute_extreme_point(direction);
        self.total_time_s += start.elapsed().as_secs_f64();
        self.call_count += 1;
        out
    }

    fn supports_inface(&self) -> bool {
        self.inner.supports_inface()
    }

    fn compute_inface_extreme_point(&mut self, direction: &[f64], x: &[f64]) -> Result<Vec<f64>, LmoError> {
        let start = Instant::now();
        let out = self.inner.compute_inface_extreme_point(direction, x);
        self.total_time_s += start.elapsed().as_secs_f64();
        self.call_count += 1;
        out
    }

    fn dicg_maximum_step(&self, direction: &[f64], x: &[f64]) -> Result<f64, LmoError> {
        self.inner.dicg_maximum_step(direction, x)
    }
}

impl<L: SelfManagedLmo> SelfManagedLmo for TimeTrackingLmo<L> {
    fn integer_variables(&self) -> Vec<usize> {
        self.inner.integer_variables()
    }
    fn build_global_bounds(&self, int_vars: &[usize]) -> IntegerBounds {
        self.inner.build_global_bounds(int_vars)
    }
    fn get_bound(&self, var: usize, sense: Sense) -> Option<f64> {
        self.inner.get_bound(var, sense)
    }
    fn lower_bound_list(&self) -> Vec<(usize, f64)> {
        self.inner.lower_bound_list()
    }
    fn upper_bound_list(&self) -> Vec<(usize, f64)> {
        self.inner.upper_bound_list()
    }
    fn set_bound(&mut self, var: usize, value: f64, sense: Sense) -> Result<(), LmoError> {
        self.inner.set_bound(var, value, sense)
    }
    fn delete_bounds(&mut self, cons_delete: &[(usize, Sense)]) {
        self.inner.delete_bounds(cons_delete)
    }
    fn is_linear_feasible(&self, x: &[f64]) -> bool {
        self.inner.is_linear_feasible(x)
    }
    fn build_lmo_correct(&self, bounds: &IntegerBounds) -> bool {
        self.inner.build_lmo_correct(bounds)
    }
}

/// Moves the oracle from the bounds in `applied` to those in `target`.
///
/// Bounds that disappear or change are deleted first, then every target
/// bound is set. `applied` is updated to `target`.
pub fn apply_node_bounds<L: SelfManagedLmo + ?Sized>(
    lmo: &mut L,
    applied: &mut IntegerBounds,
    target: &IntegerBounds,
) -> Result<(), LmoError> {
    let stale: Vec<(usize, Sense)> = applied
        .entries()
        .into_iter()
        .filter(|&(var, sense, value)| target.get(var, sense) != Some(value))
        .map(|(var, sense, _)| (var, sense))
        .collect();
    if !stale.is_empty() {
        lmo.delete_bounds(&stale);
    }
    for (var, sense, value) in target.entries() {
        lmo.set_bound(var, value, sense)?;
    }
    *applied = target.clone();
    Ok(())
}
