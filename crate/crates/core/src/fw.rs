//! Frank-Wolfe node solvers.
//!
//! The active-set variants share one loop. Each iteration compares the
//! local gap `<g, a - s>` between the away vertex `a` and the local FW vertex
//! `s` of the active set against the FW gap `<g, x - v>` of the global
//! vertex `v`; the larger one decides between a corrective step and a plain
//! FW step toward `v`:
//!
//! | variant   | corrective step                      | max step        |
//! |-----------|--------------------------------------|-----------------|
//! | Standard  | none                                 |                 |
//! | AwayFw    | along `x - a`                        | `w_a/(1 - w_a)` |
//! | Pairwise  | weight from `a` to `v`               | `w_a`           |
//! | Bpcg      | weight from `a` to `s`               | `w_a`           |
//!
//! The decomposition-invariant variant keeps no active set and uses the
//! in-face and max-step oracles of the feasible region instead.
//!
//! With lazification a cached vertex (active set first, then the shadow
//! pool) replaces the LMO call whenever it achieves at least half of the
//! running gap estimate. The estimate starts at the first true gap and is
//! at least halved whenever the LMO has to be called and its vertex falls
//! short.

use std::collections::VecDeque;
use std::time::Instant;

use crate::error::FwError;
use crate::lmo::LinearMinimizationOracle;
use crate::numerics::{approx_eq_vec, axpy, dot, norm_sq, sub, ActiveSet, VERTEX_EQ_TOL};

/// Objective and gradient oracles, plus an optional domain.
pub trait Objective {
    fn value(&self, x: &[f64]) -> f64;

    /// Writes the gradient at `x` into `storage`.
    fn gradient(&self, x: &[f64], storage: &mut [f64]);

    /// Whether the objective is restricted to a proper domain.
    fn has_domain(&self) -> bool {
        false
    }

    fn in_domain(&self, _x: &[f64]) -> bool {
        true
    }
}

impl<T: Objective + ?Sized> Objective for &T {
    fn value(&self, x: &[f64]) -> f64 {
        (**self).value(x)
    }
    fn gradient(&self, x: &[f64], storage: &mut [f64]) {
        (**self).gradient(x, storage)
    }
    fn has_domain(&self) -> bool {
        (**self).has_domain()
    }
    fn in_domain(&self, x: &[f64]) -> bool {
        (**self).in_domain(x)
    }
}

type DomainFn<'a> = Box<dyn Fn(&[f64]) -> bool + 'a>;

/// Objective assembled from closures.
pub struct FnObjective<'a, F, G> {
    f: F,
    grad: G,
    domain: Option<DomainFn<'a>>,
}

impl<'a, F, G> FnObjective<'a, F, G>
where
    F: Fn(&[f64]) -> f64,
    G: Fn(&[f64], &mut [f64]),
{
    pub fn new(f: F, grad: G) -> Self {
        FnObjective { f, grad, domain: None }
    }

    pub fn with_domain(mut self, oracle: impl Fn(&[f64]) -> bool + 'a) -> Self {
        self.domain = Some(Box::new(oracle));
        self
    }
}

impl<F, G> Objective for FnObjective<'_, F, G>
where
    F: Fn(&[f64]) -> f64,
    G: Fn(&[f64], &mut [f64]),
{
    fn value(&self, x: &[f64]) -> f64 {
        (self.f)(x)
    }
    fn gradient(&self, x: &[f64], storage: &mut [f64]) {
        (self.grad)(x, storage)
    }
    fn has_domain(&self) -> bool {
        self.domain.is_some()
    }
    fn in_domain(&self, x: &[f64]) -> bool {
        self.domain.as_ref().is_none_or(|d| d(x))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum FwVariant {
    Standard,
    AwayFw,
    Pairwise,
    #[default]
    Bpcg,
    Dicg,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum LineSearch {
    /// `gamma_t = 2 / (t + 2)`, clipped to the max step.
    Agnostic,
    /// Secant iteration on the directional derivative.
    Secant { max_iter: usize, tol: f64 },
    /// Adaptive backtracking on a local smoothness estimate.
    Backtracking { tau: f64, initial_l: f64 },
}

impl Default for LineSearch {
    fn default() -> Self {
        LineSearch::Secant {
            max_iter: 40,
            tol: 1e-8,
        }
    }
}

/// Factor applied to the step when the trial point leaves the domain.
pub const DOMAIN_SHRINK: f64 = 0.8;
const MAX_DOMAIN_SHRINKS: usize = 200;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FwStatus {
    GapReached,
    IterLimit,
    TimeLimit,
    CallbackStop,
    /// No step direction with positive progress was left.
    Stalled,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FwResult {
    pub x: Vec<f64>,
    pub active_set: Option<ActiveSet>,
    pub primal: f64,
    /// FW gap of the returned iterate from a true LMO call.
    pub fw_gap: f64,
    pub iterations: usize,
    pub lmo_calls: usize,
    pub status: FwStatus,
}

impl FwResult {
    /// `primal - fw_gap`, a lower bound on the minimum over the region.
    pub fn lower_bound(&self) -> f64 {
        self.primal - self.fw_gap
    }
}

/// What the per-iteration callback sees.
#[derive(Debug)]
pub struct IterationState<'a> {
    pub t: usize,
    pub primal: f64,
    /// Most recent FW gap from a true LMO call (`inf` before the first).
    pub fw_gap: f64,
    /// Best `primal - gap` seen at an iterate with a true LMO call.
    pub dual_bound: f64,
    pub lmo_calls: usize,
    pub x: &'a [f64],
}

/// Returning `false` stops the solve with [`FwStatus::CallbackStop`].
pub type FwCallback<'a> = &'a mut dyn FnMut(&IterationState) -> bool;

#[derive(Debug, Clone, PartialEq)]
pub struct FwParams {
    pub variant: FwVariant,
    pub lazy: bool,
    pub line_search: LineSearch,
    pub epsilon: f64,
    pub max_iter: usize,
    pub deadline: Option<Instant>,
}

impl Default for FwParams {
    fn default() -> Self {
        FwParams {
            variant: FwVariant::Bpcg,
            lazy: false,
            line_search: LineSearch::default(),
            epsilon: 1e-7,
            max_iter: 10_000,
            deadline: None,
        }
    }
}

/// `<gradient, iterate - fw_vertex>`.
pub fn fw_gap(gradient: &[f64], iterate: &[f64], fw_vertex: &[f64]) -> f64 {
    dot(gradient, iterate) - dot(gradient, fw_vertex)
}

/// Bounded FIFO of vertices dropped from active sets.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ShadowPool {
    vertices: VecDeque<Vec<f64>>,
    capacity: usize,
}

impl ShadowPool {
    pub fn new(capacity: usize) -> Self {
        ShadowPool {
            vertices: VecDeque::new(),
            capacity,
        }
    }

    pub fn push(&mut self, v: Vec<f64>) {
        if self.capacity == 0 || self.vertices.iter().any(|u| approx_eq_vec(u, &v, VERTEX_EQ_TOL)) {
            return;
        }
        if self.vertices.len() == self.capacity {
            self.vertices.pop_front();
        }
        self.vertices.push_back(v);
    }

    pub fn retain(&mut self, keep: impl FnMut(&Vec<f64>) -> bool) {
        self.vertices.retain(keep);
    }

    pub fn iter(&self) -> impl Iterator<Item = &Vec<f64>> {
        self.vertices.iter()
    }

    pub fn len(&self) -> usize {
        self.vertices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vertices.is_empty()
    }
}

fn point_on_ray(x: &[f64], d: &[f64], gamma: f64) -> Vec<f64> {
    let mut y = x.to_vec();
    axpy(gamma, d, &mut y);
    y
}

fn slope_at<O: Objective + ?Sized>(obj: &O, x: &[f64], d: &[f64], gamma: f64, buf: &mut [f64]) -> f64 {
    let y = point_on_ray(x, d, gamma);
    obj.gradient(&y, buf);
    dot(buf, d)
}

/// Shrinks `gamma_max` until `x + gamma_max d` lies in the domain.
fn shrink_into_domain<O: Objective + ?Sized>(obj: &O, x: &[f64], d: &[f64], gamma_max: f64) -> f64 {
    if !obj.has_domain() {
        return gamma_max;
    }
    let mut g = gamma_max;
    for _ in 0..MAX_DOMAIN_SHRINKS {
        if obj.in_domain(&point_on_ray(x, d, g)) {
            return g;
        }
        g *= DOMAIN_SHRINK;
    }
    0.0
}

/// Secant line search for the step `x + gamma d`, `gamma` in `[0, gamma_max]`.
///
/// With a domain, `gamma_max` is first shrunk geometrically until the far
/// end of the segment is in the domain. The result always satisfies
/// `f(x + gamma d) <= f(x)` up to rounding: unless the derivative vanishes
/// within `tol`, the returned step is the last bracket point where the
/// derivative was still negative.
pub fn secant_line_search<O: Objective + ?Sized>(
    obj: &O,
    x: &[f64],
    d: &[f64],
    gamma_max: f64,
    max_iter: usize,
    tol: f64,
) -> Result<f64, FwError> {
    if gamma_max <= 0.0 {
        return Ok(0.0);
    }
    let mut buf = vec![0.0; x.len()];
    let slope0 = slope_at(obj, x, d, 0.0, &mut buf);
    if slope0 >= 0.0 {
        return Err(FwError::NonDescentDirection(slope0));
    }
    let gmax = shrink_into_domain(obj, x, d, gamma_max);
    if gmax <= 0.0 {
        return Ok(0.0);
    }
    let s_max = slope_at(obj, x, d, gmax, &mut buf);
    if s_max <= tol {
        return Ok(gmax);
    }
    let (mut lo, mut s_lo) = (0.0, slope0);
    let (mut hi, mut s_hi) = (gmax, s_max);
    let mut side = 0i8;
    for _ in 0..max_iter {
        let mut g = hi - s_hi * (hi - lo) / (s_hi - s_lo);
        if !(g > lo && g < hi) {
            g = 0.5 * (lo + hi);
        }
        let s = slope_at(obj, x, d, g, &mut buf);
        if s.abs() <= tol {
            return Ok(g);
        }
        if s < 0.0 {
            lo = g;
            s_lo = s;
            if side == -1 {
                s_hi *= 0.5;
            }
            side = -1;
        } else {
            hi = g;
            s_hi = s;
            if side == 1 {
                s_lo *= 0.5;
            }
            side = 1;
        }
        if hi - lo <= 1e-15 * gmax {
            break;
        }
    }
    Ok(lo)
}

/// Adaptive backtracking: accepts the step minimizing the quadratic upper
/// model built from the running smoothness estimate `l_est`.
fn backtracking_line_search<O: Objective + ?Sized>(
    obj: &O,
    x: &[f64],
    d: &[f64],
    gamma_max: f64,
    tau: f64,
    l_est: &mut f64,
) -> Result<f64, FwError> {
    if gamma_max <= 0.0 {
        return Ok(0.0);
    }
    let mut buf = vec![0.0; x.len()];
    obj.gradient(x, &mut buf);
    let slope = dot(&buf, d);
    if slope >= 0.0 {
        return Err(FwError::NonDescentDirection(slope));
    }
    let dn2 = norm_sq(d);
    let f0 = obj.value(x);
    *l_est = (*l_est * 0.9).max(1e-12);
    for _ in 0..100 {
        let gamma = (-slope / (*l_est * dn2)).min(gamma_max);
        let y = point_on_ray(x, d, gamma);
        if obj.in_domain(&y) {
            let fy = obj.value(&y);
            if fy.is_finite() && fy <= f0 + gamma * slope + 0.5 * *l_est * gamma * gamma * dn2 {
                return Ok(gamma);
            }
        }
        *l_est *= tau;
    }
    Ok(0.0)
}

struct StepSizer {
    rule: LineSearch,
    l_est: f64,
}

impl StepSizer {
    fn new(rule: LineSearch) -> Self {
        let l_est = match rule {
            LineSearch::Backtracking { initial_l, .. } => initial_l,
            _ => 1.0,
        };
        StepSizer { rule, l_est }
    }

    fn step<O: Objective + ?Sized>(
        &mut self,
        obj: &O,
        x: &[f64],
        d: &[f64],
        gamma_max: f64,
        t: usize,
        fw_step: bool,
    ) -> Result<f64, FwError> {
        match self.rule {
            LineSearch::Agnostic if fw_step => {
                let g = (2.0 / (t as f64 + 2.0)).min(gamma_max);
                Ok(shrink_into_domain(obj, x, d, g))
            }
            LineSearch::Secant { max_iter, tol } => secant_line_search(obj, x, d, gamma_max, max_iter, tol),
            LineSearch::Agnostic => secant_line_search(obj, x, d, gamma_max, 40, 1e-8),
            LineSearch::Backtracking { tau, .. } => backtracking_line_search(obj, x, d, gamma_max, tau, &mut self.l_est),
        }
    }
}

/// Solves `min f` over the region of `lmo`, warm-started from `start`.
///
/// `shadow_pool` must only hold vertices feasible for the current region;
/// vertices dropped during the solve are appended to it.
pub fn solve_node_fw<O, L>(
    obj: &O,
    lmo: &mut L,
    start: ActiveSet,
    shadow_pool: &mut ShadowPool,
    params: &FwParams,
    mut callback: Option<FwCallback<'_>>,
) -> Result<FwResult, FwError>
where
    O: Objective + ?Sized,
    L: LinearMinimizationOracle + ?Sized,
{
    if params.variant == FwVariant::Dicg {
        return solve_node_dicg(obj, lmo, start.iterate(), params, callback);
    }
    let mut active = start;
    let mut x = active.iterate();
    if obj.has_domain() && !obj.in_domain(&x) {
        return Err(FwError::DomainFailure);
    }
    let n = x.len();
    let mut g = vec![0.0; n];
    let mut sizer = StepSizer::new(params.line_search);
    let mut phi: Option<f64> = None;
    let mut lmo_calls = 0;
    let mut last_gap = f64::INFINITY;
    let mut dual_bound = f64::NEG_INFINITY;
    // true gap valid for the current x, if any
    let mut gap_here: Option<f64> = None;
    let mut primal;
    let mut t = 0;
    let status = loop {
        obj.gradient(&x, &mut g);
        primal = obj.value(&x);
        if !primal.is_finite() {
            return Err(FwError::DomainFailure);
        }
        if t >= params.max_iter {
            break FwStatus::IterLimit;
        }
        if params.deadline.is_some_and(|d| Instant::now() >= d) {
            break FwStatus::TimeLimit;
        }
        if let Some(cb) = callback.as_mut() {
            let state = IterationState {
                t,
                primal,
                fw_gap: last_gap,
                dual_bound,
                lmo_calls,
                x: &x,
            };
            if !cb(&state) {
                break FwStatus::CallbackStop;
            }
        }

        let (s_idx, a_idx) = active.argmin_argmax(&g);
        let gx = dot(&g, &x);
        let local_gap = dot(&g, active.vertex(a_idx)) - dot(&g, active.vertex(s_idx));

        // BPCG under lazification: local progress first, no vertex needed
        if params.lazy && params.variant == FwVariant::Bpcg {
            if let Some(p) = phi {
                if local_gap >= p / 2.0 && local_gap > 0.0 {
                    let progressed =
                        corrective_step(obj, &mut active, &mut x, &mut sizer, params.variant, a_idx, s_idx, None, t, shadow_pool)?;
                    gap_here = None;
                    t += 1;
                    if !progressed {
                        break FwStatus::Stalled;
                    }
                    continue;
                }
            }
        }

        let (v, v_gap) = match phi {
            Some(p) if params.lazy => {
                let cached = active
                    .vertices()
                    .iter()
                    .chain(shadow_pool.iter())
                    .map(|w| (w, gx - dot(&g, w)))
                    .fold(None::<(&Vec<f64>, f64)>, |best, (w, s)| match best {
                        Some((_, bs)) if bs >= s => best,
                        _ => Some((w, s)),
                    });
                match cached {
                    Some((w, s)) if s >= p / 2.0 && s > 0.0 => (w.clone(), s),
                    _ => {
                        let v = lmo.compute_extreme_point(&g)?;
                        lmo_calls += 1;
                        let vg = gx - dot(&g, &v);
                        if vg < p / 2.0 {
                            phi = Some(vg.min(p / 2.0));
                        }
                        last_gap = vg;
                        gap_here = Some(vg);
                        dual_bound = dual_bound.max(primal - vg);
                        if vg <= params.epsilon {
                            break FwStatus::GapReached;
                        }
                        (v, vg)
                    }
                }
            }
            _ => {
                let v = lmo.compute_extreme_point(&g)?;
                lmo_calls += 1;
                let vg = gx - dot(&g, &v);
                if params.lazy {
                    phi = Some(vg);
                }
                last_gap = vg;
                gap_here = Some(vg);
                dual_bound = dual_bound.max(primal - vg);
                if vg <= params.epsilon {
                    break FwStatus::GapReached;
                }
                (v, vg)
            }
        };

        let use_corrective = params.variant != FwVariant::Standard && local_gap >= v_gap && local_gap > 0.0;
        let progressed = if use_corrective {
            corrective_step(obj, &mut active, &mut x, &mut sizer, params.variant, a_idx, s_idx, Some(v.clone()), t, shadow_pool)?
        } else {
            false
        };
        let progressed = if progressed {
            true
        } else if v_gap > 0.0 {
            let d = sub(&v, &x);
            let gamma = sizer.step(obj, &x, &d, 1.0, t, true).or_else(stall_as_zero)?;
            if gamma > 0.0 {
                active.fw_update(gamma, v);
                for dropped in active.cleanup() {
                    shadow_pool.push(dropped);
                }
                axpy(gamma, &d, &mut x);
                true
            } else {
                false
            }
        } else {
            false
        };
        gap_here = None;
        t += 1;
        if t % 50 == 0 {
            x = active.iterate();
        }
        if !progressed {
            x = active.iterate();
            obj.gradient(&x, &mut g);
            primal = obj.value(&x);
            break FwStatus::Stalled;
        }
    };

    let fw_gap = match gap_here {
        Some(gap) => gap,
        None => {
            let v = lmo.compute_extreme_point(&g)?;
            lmo_calls += 1;
            fw_gap(&g, &x, &v)
        }
    };
    Ok(FwResult {
        x,
        active_set: Some(active),
        primal,
        fw_gap,
        iterations: t,
        lmo_calls,
        status,
    })
}

fn stall_as_zero(e: FwError) -> Result<f64, FwError> {
    match e {
        FwError::NonDescentDirection(_) => Ok(0.0),
        other => Err(other),
    }
}

/// One corrective step. Returns whether the iterate moved.
#[allow(clippy::too_many_arguments)]
fn corrective_step<O: Objective + ?Sized>(
    obj: &O,
    active: &mut ActiveSet,
    x: &mut Vec<f64>,
    sizer: &mut StepSizer,
    variant: FwVariant,
    a_idx: usize,
    s_idx: usize,
    global_vertex: Option<Vec<f64>>,
    t: usize,
    pool: &mut ShadowPool,
) -> Result<bool, FwError> {
    let w_a = active.weight(a_idx);
    let moved = match variant {
        FwVariant::Bpcg => {
            let d = sub(active.vertex(s_idx), active.vertex(a_idx));
            let gamma = sizer.step(obj, x, &d, w_a, t, false).or_else(stall_as_zero)?;
            if gamma > 0.0 {
                active.shift_weight(a_idx, s_idx, gamma);
                axpy(gamma, &d, x);
            }
            gamma > 0.0
        }
        FwVariant::AwayFw => {
            if w_a >= 1.0 - 1e-12 {
                return Ok(false);
            }
            let gamma_max = w_a / (1.0 - w_a);
            let d = sub(x, active.vertex(a_idx));
            let gamma = sizer.step(obj, x, &d, gamma_max, t, false).or_else(stall_as_zero)?;
            if gamma > 0.0 {
                active.away_update(gamma, a_idx);
                axpy(gamma, &d, x);
            }
            gamma > 0.0
        }
        FwVariant::Pairwise => {
            let v = global_vertex.expect("pairwise step needs the global vertex");
            let d = sub(&v, active.vertex(a_idx));
            let gamma = sizer.step(obj, x, &d, w_a, t, false).or_else(stall_as_zero)?;
            if gamma > 0.0 {
                active.shift_weight_to_new(a_idx, v, gamma);
                axpy(gamma, &d, x);
            }
            gamma > 0.0
        }
        FwVariant::Standard | FwVariant::Dicg => false,
    };
    let dropped = active.cleanup();
    if !dropped.is_empty() {
        *x = active.iterate();
        for v in dropped {
            pool.push(v);
        }
    }
    Ok(moved)
}

/// Decomposition-invariant conditional gradient from the feasible point
/// `start`. No active set is kept.
pub fn solve_node_dicg<O, L>(
    obj: &O,
    lmo: &mut L,
    start: Vec<f64>,
    params: &FwParams,
    mut callback: Option<FwCallback<'_>>,
) -> Result<FwResult, FwError>
where
    O: Objective + ?Sized,
    L: LinearMinimizationOracle + ?Sized,
{
    if !lmo.supports_inface() {
        return Err(FwError::MissingInFaceOracle);
    }
    let mut x = start;
    if obj.has_domain() && !obj.in_domain(&x) {
        return Err(FwError::DomainFailure);
    }
    let mut g = vec![0.0; x.len()];
    let mut sizer = StepSizer::new(params.line_search);
    let mut lmo_calls = 0;
    let mut last_gap = f64::INFINITY;
    let mut dual_bound = f64::NEG_INFINITY;
    let mut gap_here: Option<f64> = None;
    let mut primal;
    let mut t = 0;
    let status = loop {
        obj.gradient(&x, &mut g);
        primal = obj.value(&x);
        if !primal.is_finite() {
            return Err(FwError::DomainFailure);
        }
        if t >= params.max_iter {
            break FwStatus::IterLimit;
        }
        if params.deadline.is_some_and(|d| Instant::now() >= d) {
            break FwStatus::TimeLimit;
        }
        if let Some(cb) = callback.as_mut() {
            let state = IterationState {
                t,
                primal,
                fw_gap: last_gap,
                dual_bound,
                lmo_calls,
                x: &x,
            };
            if !cb(&state) {
                break FwStatus::CallbackStop;
            }
        }
        let v = lmo.compute_extreme_point(&g)?;
        lmo_calls += 1;
        let gap = fw_gap(&g, &x, &v);
        last_gap = gap;
        gap_here = Some(gap);
        dual_bound = dual_bound.max(primal - gap);
        if gap <= params.epsilon {
            break FwStatus::GapReached;
        }
        let neg_g: Vec<f64> = g.iter().map(|c| -c).collect();
        let a = lmo.compute_inface_extreme_point(&neg_g, &x)?;
        lmo_calls += 1;
        let away_dir = sub(&a, &v);
        let gamma_max = lmo.dicg_maximum_step(&away_dir, &x)?;
        let mut moved = false;
        if gamma_max > 1e-12 {
            let d: Vec<f64> = away_dir.iter().map(|c| -c).collect();
            let gamma = sizer.step(obj, &x, &d, gamma_max, t, false).or_else(stall_as_zero)?;
            if gamma > 0.0 {
                axpy(gamma, &d, &mut x);
                moved = true;
            }
        }
        if !moved {
            let d = sub(&v, &x);
            let gamma = sizer.step(obj, &x, &d, 1.0, t, true).or_else(stall_as_zero)?;
            if gamma > 0.0 {
                axpy(gamma, &d, &mut x);
                moved = true;
            }
        }
        for xi in x.iter_mut() {
            if xi.abs() < 1e-15 {
                *xi = 0.0;
            }
        }
        gap_here = None;
        t += 1;
        if !moved {
            obj.gradient(&x, &mut g);
            primal = obj.value(&x);
            break FwStatus::Stalled;
        }
    };
    let fw_gap_final = match gap_here {
        Some(gap) => gap,
        None => {
            let v = lmo.compute_extreme_point(&g)?;
            lmo_calls += 1;
            fw_gap(&g, &x, &v)
        }
    };
    Ok(FwResult {
        x,
        active_set: None,
        primal,
        fw_gap: fw_gap_final,
        iterations: t,
        lmo_calls,
        status,
    })
}

/// Counts iterations spent inside the domain; asks to stop once more than
/// `threshold` such iterations have passed.
#[derive(Debug, Clone, Default)]
pub struct DomainCounter {
    count: usize,
    threshold: usize,
}

impl DomainCounter {
    pub fn new(threshold: usize) -> Self {
        DomainCounter { count: 0, threshold }
    }

    /// Returns `false` when the caller should stop.
    pub fn observe(&mut self, in_domain: bool) -> bool {
        if in_domain {
            if self.count > self.threshold {
                return false;
            }
            self.count += 1;
        }
        true
    }
}

/// Builds an active set whose iterate lies inside the domain of `obj` by
/// running lazy BPCG on `0.5 * ||x - target||^2` from the vertex for the
/// direction `(1, 2, ..., n)`.
///
/// The projection is stopped a few iterations after it first enters the
/// domain, so the start point is not on the domain boundary.
pub fn domain_warm_start<O, L>(obj: &O, lmo: &mut L, target: &[f64], max_iter: usize) -> Result<ActiveSet, FwError>
where
    O: Objective + ?Sized,
    L: LinearMinimizationOracle + ?Sized,
{
    let m = target.len();
    let help = FnObjective::new(
        |x: &[f64]| 0.5 * x.iter().zip(target).map(|(a, b)| (a - b) * (a - b)).sum::<f64>(),
        |x: &[f64], s: &mut [f64]| {
            for ((si, xi), ti) in s.iter_mut().zip(x).zip(target) {
                *si = xi - ti;
            }
        },
    );
    let direction: Vec<f64> = (1..=m).map(|i| i as f64).collect();
    let v0 = lmo.compute_extreme_point(&direction)?;
    let mut counter = DomainCounter::new(5);
    let mut cb = |st: &IterationState| counter.observe(obj.in_domain(st.x));
    let params = FwParams {
        variant: FwVariant::Bpcg,
        lazy: true,
        line_search: LineSearch::default(),
        epsilon: 1e-10,
        max_iter,
        deadline: None,
    };
    let mut pool = ShadowPool::new(0);
    let res = solve_node_fw(&help, lmo, ActiveSet::singleton(v0), &mut pool, &params, Some(&mut cb))?;
    let active = res.active_set.expect("active-set variant");
    if obj.in_domain(&active.iterate()) {
        Ok(active)
    } else {
        Err(FwError::WarmStartFailure)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::polytopes::{BirkhoffLmo, HypercubeLmo, SimplexKnapsackLmo};

    fn quad_to(center: Vec<f64>) -> FnObjective<'static, impl Fn(&[f64]) -> f64, impl Fn(&[f64], &mut [f64])> {
        let c2 = center.clone();
        FnObjective::new(
            move |x: &[f64]| 0.5 * x.iter().zip(&center).map(|(a, b)| (a - b) * (a - b)).sum::<f64>(),
            move |x: &[f64], s: &mut [f64]| {
                for i in 0..x.len() {
                    s[i] = x[i] - c2[i];
                }
            },
        )
    }

    #[test]
    fn gap_examples() {
        assert_eq!(fw_gap(&[1.0, 2.0], &[0.3, 0.4], &[0.3, 0.4]), 0.0);
        // f = 0.5||x||^2 at (1,1): gradient (1,1), vertex (0,0)
        assert_eq!(fw_gap(&[1.0, 1.0], &[1.0, 1.0], &[0.0, 0.0]), 2.0);
    }

    #[test]
    fn interior_optimum_unit_square() {
        let obj = quad_to(vec![0.5, 0.5]);
        let mut lmo = HypercubeLmo::unit(2);
        let params = FwParams {
            epsilon: 1e-7,
            ..FwParams::default()
        };
        let start = ActiveSet::singleton(vec![1.0, 0.0]);
        let res = solve_node_fw(&obj, &mut lmo, start, &mut ShadowPool::new(20), &params, None).unwrap();
        assert_eq!(res.status, FwStatus::GapReached);
        assert!(res.fw_gap <= 1e-7);
        assert!((res.x[0] - 0.5).abs() < 1e-6 && (res.x[1] - 0.5).abs() < 1e-6);
    }

    #[test]
    fn linear_objective_one_call() {
        let obj = FnObjective::new(
            |x: &[f64]| x[0] - 2.0 * x[1],
            |_: &[f64], s: &mut [f64]| {
                s[0] = 1.0;
                s[1] = -2.0;
            },
        );
        let mut lmo = HypercubeLmo::unit(2);
        let start = ActiveSet::singleton(vec![0.0, 1.0]);
        let res = solve_node_fw(&obj, &mut lmo, start, &mut ShadowPool::new(4), &FwParams::default(), None).unwrap();
        assert_eq!(res.lmo_calls, 1);
        assert_eq!(res.fw_gap, 0.0);
        assert_eq!(res.x, vec![0.0, 1.0]);
    }

    #[test]
    fn secant_exact_on_quadratic() {
        let obj = FnObjective::new(|x: &[f64]| (x[0] - 0.3).powi(2), |x: &[f64], s: &mut [f64]| s[0] = 2.0 * (x[0] - 0.3));
        let g = secant_line_search(&obj, &[0.0], &[1.0], 1.0, 40, 1e-8).unwrap();
        assert!((g - 0.3).abs() < 1e-8);
        assert_eq!(secant_line_search(&obj, &[0.0], &[1.0], 0.0, 40, 1e-8).unwrap(), 0.0);
        assert!(matches!(
            secant_line_search(&obj, &[0.0], &[-1.0], 1.0, 40, 1e-8),
            Err(FwError::NonDescentDirection(_))
        ));
    }

    #[test]
    fn secant_respects_domain() {
        // -log(1 - x) restricted to x < 1, stepping toward x = 2
        let obj = FnObjective::new(
            |x: &[f64]| -(1.0 - x[0]).ln() - 3.0 * x[0],
            |x: &[f64], s: &mut [f64]| s[0] = 1.0 / (1.0 - x[0]) - 3.0,
        )
        .with_domain(|x: &[f64]| x[0] < 1.0);
        let g = secant_line_search(&obj, &[0.0], &[2.0], 1.0, 40, 1e-8).unwrap();
        assert!(2.0 * g < 1.0);
        assert!((2.0 * g - 2.0 / 3.0).abs() < 1e-6);
    }

    /// `0.5 * dist(c, simplex)^2` via the sort-and-threshold projection.
    fn simplex_projection_value(c: &[f64]) -> f64 {
        let mut sorted = c.to_vec();
        sorted.sort_by(|a, b| b.total_cmp(a));
        let mut cum = 0.0;
        let mut tau = 0.0;
        for (k, &u) in sorted.iter().enumerate() {
            cum += u;
            let t = (cum - 1.0) / (k as f64 + 1.0);
            if u - t > 0.0 {
                tau = t;
            }
        }
        0.5 * c.iter().map(|&ci| (ci - (ci - tau).max(0.0)).powi(2)).sum::<f64>()
    }

    #[test]
    fn all_variants_agree_on_simplex() {
        let center = vec![0.7, 0.1, 0.9, 0.3];
        let obj = quad_to(center);
        let mut values = Vec::new();
        for variant in [FwVariant::Standard, FwVariant::AwayFw, FwVariant::Pairwise, FwVariant::Bpcg] {
            for lazy in [false, true] {
                let mut lmo = SimplexKnapsackLmo::new(1.0, vec![1.0; 4]).unwrap();
                let params = FwParams {
                    variant,
                    lazy,
                    epsilon: 1e-8,
                    max_iter: 20_000,
                    ..FwParams::default()
                };
                let start = ActiveSet::singleton(vec![1.0, 0.0, 0.0, 0.0]);
                let res = solve_node_fw(&obj, &mut lmo, start, &mut ShadowPool::new(40), &params, None).unwrap();
                values.push(res.primal);
            }
        }
        let expected = simplex_projection_value(&[0.7, 0.1, 0.9, 0.3]);
        for v in values {
            assert!((v - expected).abs() < 1e-6, "{v} vs {expected}");
        }
    }

    #[test]
    fn dicg_on_birkhoff_stays_feasible() {
        let n = 3;
        let target = vec![0.2, 0.5, 0.3, 0.5, 0.2, 0.3, 0.3, 0.3, 0.4];
        let obj = quad_to(target.clone());
        let mut lmo = BirkhoffLmo::new(n);
        let start = lmo.compute_extreme_point(&[1.0; 9]).unwrap();
        let mut check = |st: &IterationState| {
            for i in 0..n {
                let r: f64 = (0..n).map(|j| st.x[j * n + i]).sum();
                let c: f64 = (0..n).map(|j| st.x[i * n + j]).sum();
                assert!((r - 1.0).abs() < 1e-8 && (c - 1.0).abs() < 1e-8);
            }
            assert!(st.x.iter().all(|&v| (-1e-12..=1.0 + 1e-12).contains(&v)));
            true
        };
        let params = FwParams {
            variant: FwVariant::Dicg,
            epsilon: 1e-8,
            ..FwParams::default()
        };
        let res = solve_node_dicg(&obj, &mut lmo, start, &params, Some(&mut check)).unwrap();
        assert!(res.primal < 1e-8, "{}", res.primal);
        assert!(res.active_set.is_none());
    }

    #[test]
    fn domain_counter_stops_after_threshold() {
        let mut c = DomainCounter::new(5);
        let mut stopped_at = None;
        for t in 0..30 {
            let inside = (10..=16).contains(&t);
            if !c.observe(inside) {
                stopped_at = Some(t);
                break;
            }
        }
        assert_eq!(stopped_at, Some(16));
    }

    #[test]
    fn shadow_pool_dedup_and_fifo() {
        let mut p = ShadowPool::new(2);
        p.push(vec![1.0]);
        p.push(vec![1.0]);
        assert_eq!(p.len(), 1);
        p.push(vec![2.0]);
        p.push(vec![3.0]);
        assert_eq!(p.iter().cloned().collect::<Vec<_>>(), vec![vec![2.0], vec![3.0]]);
    }
}
