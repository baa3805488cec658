//! Best-bound branch-and-bound over Frank-Wolfe node relaxations.
//!
//! Every node owns its integer bounds, a warm start and a shadow pool, so
//! nodes are self-contained. The oracle is a [`SelfManagedLmo`]; before a
//! node is solved its bounds are applied to the oracle via
//! [`apply_node_bounds`].
//!
//! Node lower bounds come from the FW gap (`primal - gap`) and never drop
//! below the parent's bound. Children are created on the split of the
//! parent's active set, so their first iterate is feasible for their region.

use std::cell::Cell;
use std::cmp::Ordering;
use std::collections::BTreeMap;
use std::time::{Duration, Instant};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{FwError, LmoError, SolveError};
use crate::fw::{
    domain_warm_start, solve_node_dicg, solve_node_fw, FwParams, FwResult, FwStatus, FwVariant, IterationState,
    LineSearch, Objective, ShadowPool,
};
use crate::heuristics::{run_heuristics, HeuristicContext, HeuristicSettings};
use crate::lmo::{apply_node_bounds, LinearMinimizationOracle, SelfManagedLmo, TimeTrackingLmo};
use crate::numerics::{
    fractionality, is_integer_feasible, ActiveSet, IntegerBounds, Sense, Tolerances, INTEGRALITY_TOL,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Branching {
    #[default]
    MostInfeasible,
    GradientBased,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolvingStage {
    Solving,
    OptimalReached,
    UserStop,
    TimeLimit,
    NodeLimit,
    Infeasible,
}

impl SolvingStage {
    pub fn as_str(self) -> &'static str {
        match self {
            SolvingStage::Solving => "solving",
            SolvingStage::OptimalReached => "optimal",
            SolvingStage::UserStop => "user_stop",
            SolvingStage::TimeLimit => "time_limit",
            SolvingStage::NodeLimit => "node_limit",
            SolvingStage::Infeasible => "infeasible",
        }
    }
}

/// Flags passed to the tree callback about the node just evaluated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct NodeEvent {
    pub worse_than_incumbent: bool,
    pub node_infeasible: bool,
    pub lb_update: bool,
}

/// Tree state visible to (and partly writable by) the tree callback.
#[derive(Debug)]
pub struct TreeContext<'a> {
    pub incumbent: Option<f64>,
    pub incumbent_x: Option<&'a [f64]>,
    pub lower_bound: f64,
    pub nodes_processed: usize,
    pub open_nodes: usize,
    /// Setting this to [`SolvingStage::UserStop`] ends the solve after the
    /// current node.
    pub stage: SolvingStage,
}

/// The node just evaluated. `x`, `primal` and `fw_gap` are absent for nodes
/// found infeasible.
#[derive(Debug)]
pub struct NodeInfo<'a> {
    pub id: usize,
    pub depth: usize,
    pub lower_bound: f64,
    pub primal: Option<f64>,
    pub fw_gap: Option<f64>,
    pub x: Option<&'a [f64]>,
}

/// What the branch callback sees before children are created.
#[derive(Debug)]
pub struct BranchContext<'a> {
    pub node_id: usize,
    pub depth: usize,
    pub x: &'a [f64],
    pub primal: f64,
    pub fw_gap: f64,
    pub var: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolutionSource {
    Iterate,
    ActiveSetVertex,
    Heuristic,
    PostProcessing,
}

pub type TreeCallback = Box<dyn FnMut(&mut TreeContext, &NodeInfo, NodeEvent) -> Result<(), String>>;
/// Returns whether children may be created.
pub type BranchCallback = Box<dyn FnMut(&BranchContext) -> Result<bool, String>>;
pub type SolutionCallback = Box<dyn FnMut(&[f64], f64, SolutionSource) -> Result<(), String>>;
/// Maps merged node bounds to a domain-feasible point, or `None`.
pub type DomainPointFn = Box<dyn Fn(&IntegerBounds) -> Option<Vec<f64>>>;

pub struct BranchAndBoundSettings {
    pub verbose: bool,
    pub branching: Branching,
    /// Stop a node's FW run once this many open nodes have a smaller bound
    /// than the node's running bound. Zero disables the rule.
    pub premature_stop_k: usize,
    pub bnb_callback: Option<TreeCallback>,
    pub branch_callback: Option<BranchCallback>,
    pub solution_callback: Option<SolutionCallback>,
}

impl Default for BranchAndBoundSettings {
    fn default() -> Self {
        BranchAndBoundSettings {
            verbose: false,
            branching: Branching::MostInfeasible,
            premature_stop_k: 2,
            bnb_callback: None,
            branch_callback: None,
            solution_callback: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FrankWolfeSettings {
    pub variant: FwVariant,
    pub lazy: bool,
    pub line_search: LineSearch,
}

impl Default for FrankWolfeSettings {
    fn default() -> Self {
        FrankWolfeSettings {
            variant: FwVariant::Bpcg,
            lazy: false,
            line_search: LineSearch::default(),
        }
    }
}

#[derive(Default)]
pub struct DomainSettings {
    /// Root warm start; must be feasible and inside the domain.
    pub active_set: Option<ActiveSet>,
    /// Used whenever a node's warm start is outside the objective domain.
    pub domain_point: Option<DomainPointFn>,
}

#[derive(Default)]
pub struct Settings {
    pub tolerances: Tolerances,
    pub branch_and_bound: BranchAndBoundSettings,
    pub frank_wolfe: FrankWolfeSettings,
    pub domain: DomainSettings,
    pub heuristics: HeuristicSettings,
}

impl Settings {
    pub fn validate(&self) -> Result<(), SolveError> {
        self.tolerances.validate().map_err(SolveError::InvalidSettings)?;
        self.heuristics.validate().map_err(SolveError::InvalidSettings)?;
        if self.frank_wolfe.line_search == LineSearch::Agnostic && self.frank_wolfe.variant != FwVariant::Standard {
            return Err(SolveError::InvalidSettings(
                "the agnostic step size is only available for the standard variant".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceRow {
    pub time_s: f64,
    pub nodes: usize,
    pub lb: f64,
    /// `None` while no incumbent exists.
    pub ub: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct RunTrace {
    pub rows: Vec<TraceRow>,
}

impl RunTrace {
    /// Lower bounds never decrease and upper bounds never increase.
    pub fn is_monotone(&self) -> bool {
        self.rows.windows(2).all(|w| {
            let lb_ok = w[1].lb >= w[0].lb;
            let ub_ok = match (w[0].ub, w[1].ub) {
                (Some(a), Some(b)) => b <= a,
                (Some(_), None) => false,
                _ => true,
            };
            lb_ok && ub_ok
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolveResult {
    pub status: SolvingStage,
    /// Incumbent value, if any.
    pub primal: Option<f64>,
    pub dual_bound: f64,
    pub nodes: usize,
    pub lmo_calls: usize,
    pub fw_iterations: usize,
    pub time_s: f64,
    pub trace: RunTrace,
    /// Nodes processed when the final incumbent was first found.
    pub incumbent_found_at_node: Option<usize>,
    pub postprocessing_improved: bool,
}

impl SolveResult {
    pub fn gap(&self) -> Option<f64> {
        self.primal.map(|p| p - self.dual_bound)
    }
}

pub struct SolveOutput<L> {
    /// Best integer-feasible solution found.
    pub x: Option<Vec<f64>>,
    pub lmo: TimeTrackingLmo<L>,
    pub result: SolveResult,
}

#[derive(Debug, Clone)]
enum WarmStart {
    Active(ActiveSet),
    Point(Vec<f64>),
    /// Start from the region's vertex minimizing this direction.
    Direction(Vec<f64>),
}

#[derive(Debug, Clone)]
struct Node {
    id: usize,
    depth: usize,
    bounds: IntegerBounds,
    warm: WarmStart,
    pool: ShadowPool,
    lower_bound: f64,
    /// Set once the node was put back after an early stop, which disables
    /// the premature-stop rule for it.
    resumed: bool,
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct Key(f64, usize);

impl Eq for Key {}

impl Ord for Key {
    fn cmp(&self, other: &Self) -> Ordering {
        self.0.total_cmp(&other.0).then(self.1.cmp(&other.1))
    }
}

impl PartialOrd for Key {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Open nodes ordered by lower bound, then id.
#[derive(Debug, Clone)]
pub struct OpenNodes<T> {
    nodes: BTreeMap<Key, T>,
}

impl<T> Default for OpenNodes<T> {
    fn default() -> Self {
        OpenNodes { nodes: BTreeMap::new() }
    }
}

impl<T> OpenNodes<T> {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, id: usize, lower_bound: f64, node: T) {
        self.nodes.insert(Key(lower_bound, id), node);
    }

    /// Removes the node with the smallest bound (lowest id on ties).
    pub fn select_node(&mut self) -> Option<(usize, f64, T)> {
        self.nodes.pop_first().map(|(Key(lb, id), n)| (id, lb, n))
    }

    pub fn min_lower_bound(&self) -> Option<f64> {
        self.nodes.keys().next().map(|k| k.0)
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Number of nodes with bound strictly below `value`, capped at `cap`.
    pub fn count_below(&self, value: f64, cap: usize) -> usize {
        self.nodes.keys().take_while(|k| k.0 < value).take(cap).count()
    }
}

/// Whether a node whose running bound is `node_bound` should stop its FW
/// run early: its bound already reaches the incumbent, or `k > 0` open
/// nodes have a strictly smaller bound.
pub fn premature_stop_check<T>(
    open: &OpenNodes<T>,
    incumbent: Option<f64>,
    node_bound: f64,
    k: usize,
    abs_gap: f64,
) -> bool {
    if incumbent.is_some_and(|inc| node_bound >= inc - abs_gap) {
        return true;
    }
    k > 0 && open.count_below(node_bound, k) >= k
}

/// Picks the branching variable among the fractional integer variables.
///
/// Returns `None` when all integer variables are integral within
/// [`INTEGRALITY_TOL`].
pub fn select_branching_variable(x: &[f64], gradient: &[f64], int_vars: &[usize], rule: Branching) -> Option<usize> {
    let mut best: Option<(usize, f64)> = None;
    for &i in int_vars {
        let frac = fractionality(x[i]);
        if frac <= INTEGRALITY_TOL {
            continue;
        }
        let score = match rule {
            Branching::MostInfeasible => frac,
            Branching::GradientBased => gradient[i].abs(),
        };
        if best.is_none_or(|(_, s)| score > s + 1e-12) {
            best = Some((i, score));
        }
    }
    best.map(|(i, _)| i)
}

struct Incumbent {
    x: Vec<f64>,
    value: f64,
    found_at: usize,
}

struct Tree<'s> {
    start: Instant,
    deadline: Option<Instant>,
    tol: Tolerances,
    int_vars: Vec<usize>,
    global: IntegerBounds,
    applied: IntegerBounds,
    open: OpenNodes<Node>,
    incumbent: Option<Incumbent>,
    /// Smallest bound among nodes dropped by the branch callback.
    vetoed_lb: f64,
    reported_lb: f64,
    next_id: usize,
    nodes_processed: usize,
    fw_iterations: usize,
    stage: SolvingStage,
    trace: RunTrace,
    rng: ChaCha8Rng,
    pool_capacity: usize,
    settings: &'s mut Settings,
}

enum Outcome {
    Infeasible,
    Evaluated { res: FwResult, premature: bool },
}

impl Tree<'_> {
    fn incumbent_value(&self) -> Option<f64> {
        self.incumbent.as_ref().map(|i| i.value)
    }

    /// Minimum over open nodes, vetoed nodes and the incumbent.
    fn raw_lower_bound(&self, pending: Option<f64>) -> f64 {
        let mut lb = self.open.min_lower_bound().unwrap_or(f64::INFINITY).min(self.vetoed_lb);
        if let Some(p) = pending {
            lb = lb.min(p);
        }
        match self.incumbent_value() {
            Some(v) => lb.min(v),
            None => lb,
        }
    }

    fn elapsed(&self) -> f64 {
        self.start.elapsed().as_secs_f64()
    }

    /// Offers a candidate solution; returns whether it became the incumbent.
    fn offer<O: Objective + ?Sized, L: SelfManagedLmo>(
        &mut self,
        obj: &O,
        lmo: &TimeTrackingLmo<L>,
        mut x: Vec<f64>,
        source: SolutionSource,
    ) -> Result<bool, SolveError> {
        if !is_integer_feasible(&x, &self.int_vars) {
            return Ok(false);
        }
        for &i in &self.int_vars {
            x[i] = x[i].round();
        }
        if !obj.in_domain(&x) || !lmo.is_linear_feasible(&x) {
            return Ok(false);
        }
        let value = obj.value(&x);
        if !value.is_finite() || self.incumbent_value().is_some_and(|v| value >= v) {
            return Ok(false);
        }
        if let Some(cb) = self.settings.branch_and_bound.solution_callback.as_mut() {
            cb(&x, value, source).map_err(SolveError::Callback)?;
        }
        self.incumbent = Some(Incumbent {
            x,
            value,
            found_at: self.nodes_processed + 1,
        });
        Ok(true)
    }
}

fn is_infeasibility(e: &FwError) -> bool {
    match e {
        FwError::Lmo(l) => l.is_infeasibility(),
        FwError::DomainFailure | FwError::WarmStartFailure => true,
        _ => false,
    }
}

/// Solves `min f(x)` over the integer points of the oracle's region.
///
/// Returns [`SolveError::Infeasible`] when the root region is empty.
pub fn solve<O, L>(obj: &O, lmo: L, mut settings: Settings) -> Result<SolveOutput<L>, SolveError>
where
    O: Objective + ?Sized,
    L: SelfManagedLmo,
{
    settings.validate()?;
    let mut lmo = TimeTrackingLmo::new(lmo);
    let n = lmo.dim();
    let int_vars = {
        let mut v = lmo.integer_variables();
        v.sort_unstable();
        v.dedup();
        v
    };
    let global = lmo.build_global_bounds(&int_vars);
    let start = Instant::now();
    let deadline = settings
        .tolerances
        .time_limit_s
        .map(|s| start + Duration::from_secs_f64(s.max(0.0)));
    let root_warm = match settings.domain.active_set.take() {
        Some(a) => WarmStart::Active(a),
        None => WarmStart::Direction(vec![1.0; n]),
    };
    let seed = settings.heuristics.seed;
    let mut tree = Tree {
        start,
        deadline,
        tol: settings.tolerances.clone(),
        int_vars,
        applied: IntegerBounds::new(global.integer_vars.clone()),
        global,
        open: OpenNodes::new(),
        incumbent: None,
        vetoed_lb: f64::INFINITY,
        reported_lb: f64::NEG_INFINITY,
        next_id: 1,
        nodes_processed: 0,
        fw_iterations: 0,
        stage: SolvingStage::Solving,
        trace: RunTrace::default(),
        rng: ChaCha8Rng::seed_from_u64(seed),
        pool_capacity: 10 * n,
        settings: &mut settings,
    };
    let root = Node {
        id: 1,
        depth: 0,
        bounds: IntegerBounds::new(tree.global.integer_vars.clone()),
        warm: root_warm,
        pool: ShadowPool::new(tree.pool_capacity),
        lower_bound: f64::NEG_INFINITY,
        resumed: false,
    };
    tree.open.push(root.id, root.lower_bound, root);

    while let Some((_, _, node)) = tree.open.select_node() {
        if let Some(inc) = tree.incumbent_value() {
            if node.lower_bound >= inc - tree.tol.abs_gap {
                continue;
            }
        }
        if tree.tol.min_lower_bound.is_some_and(|m| node.lower_bound > m) {
            continue;
        }
        let node_id = node.id;
        let node_depth = node.depth;
        let inherited = node.lower_bound;
        let mut event = NodeEvent::default();
        let lb_before = tree.reported_lb;
        let outcome = process_node(&mut tree, obj, &mut lmo, node.clone())?;
        tree.nodes_processed += 1;
        let mut info_lb = inherited;
        let mut info_x: Option<Vec<f64>> = None;
        let mut info_primal = None;
        let mut info_gap = None;
        match outcome {
            Outcome::Infeasible => {
                event.node_infeasible = true;
                if node_id == 1 {
                    return Err(SolveError::Infeasible);
                }
            }
            Outcome::Evaluated { res, premature } => {
                let lb = inherited.max(res.lower_bound());
                info_lb = lb;
                info_primal = Some(res.primal);
                info_gap = Some(res.fw_gap);
                event.worse_than_incumbent = tree.incumbent_value().is_some_and(|inc| lb >= inc - tree.tol.abs_gap);
                let pruned_by_min = tree.tol.min_lower_bound.is_some_and(|m| lb > m);
                if !event.worse_than_incumbent && !pruned_by_min {
                    expand(&mut tree, obj, &mut lmo, node, res.clone(), lb, premature)?;
                }
                info_x = Some(res.x);
            }
        }

        let raw_lb = tree.raw_lower_bound(None);
        let lb = tree.reported_lb.max(raw_lb);
        tree.reported_lb = lb;
        event.lb_update = lb > lb_before;
        let ub = tree.incumbent_value();
        let elapsed = tree.elapsed();
        tree.trace.rows.push(TraceRow {
            time_s: elapsed,
            nodes: tree.nodes_processed,
            lb,
            ub,
        });
        if tree.settings.branch_and_bound.verbose {
            let gap = ub.map_or(f64::INFINITY, |u| u - lb);
            eprintln!(
                "node {node_id:>6} depth {node_depth:>3} lb {lb:>13.6e} ub {:>13} gap {gap:>10.3e} lmo {:>8} open {:>6} time {elapsed:>8.2}s",
                ub.map_or("-".to_string(), |u| format!("{u:.6e}")),
                lmo.call_count,
                tree.open.len(),
            );
        }

        if let Some(cb) = tree.settings.branch_and_bound.bnb_callback.as_mut() {
            let mut ctx = TreeContext {
                incumbent: ub,
                incumbent_x: tree.incumbent.as_ref().map(|i| i.x.as_slice()),
                lower_bound: lb,
                nodes_processed: tree.nodes_processed,
                open_nodes: tree.open.len(),
                stage: tree.stage,
            };
            let info = NodeInfo {
                id: node_id,
                depth: node_depth,
                lower_bound: info_lb,
                primal: info_primal,
                fw_gap: info_gap,
                x: info_x.as_deref(),
            };
            cb(&mut ctx, &info, event).map_err(SolveError::Callback)?;
            if ctx.stage == SolvingStage::UserStop {
                tree.stage = SolvingStage::UserStop;
                break;
            }
        }

        if let Some(u) = ub {
            if u - lb <= tree.tol.gap_tolerance(u) {
                tree.stage = SolvingStage::OptimalReached;
                break;
            }
        }
        if tree.deadline.is_some_and(|d| Instant::now() >= d) {
            tree.stage = SolvingStage::TimeLimit;
            break;
        }
        if tree.tol.node_limit.is_some_and(|l| tree.nodes_processed >= l) {
            tree.stage = SolvingStage::NodeLimit;
            break;
        }
    }
    if tree.stage == SolvingStage::Solving {
        tree.stage = if tree.incumbent.is_some() {
            let u = tree.incumbent_value().unwrap_or(f64::INFINITY);
            if u - tree.raw_lower_bound(None) <= tree.tol.gap_tolerance(u) {
                SolvingStage::OptimalReached
            } else {
                SolvingStage::UserStop
            }
        } else if tree.vetoed_lb.is_finite() {
            SolvingStage::UserStop
        } else {
            SolvingStage::Infeasible
        };
    }

    let postprocessing_improved = postprocess(&mut tree, obj, &mut lmo)?;
    let dual_bound = match tree.incumbent_value() {
        Some(v) => tree.reported_lb.min(v),
        None => tree.reported_lb,
    };
    let result = SolveResult {
        status: tree.stage,
        primal: tree.incumbent_value(),
        dual_bound,
        nodes: tree.nodes_processed,
        lmo_calls: lmo.call_count,
        fw_iterations: tree.fw_iterations,
        time_s: tree.elapsed(),
        trace: tree.trace.clone(),
        incumbent_found_at_node: tree.incumbent.as_ref().map(|i| i.found_at),
        postprocessing_improved,
    };
    let x = tree.incumbent.take().map(|i| i.x);
    drop(tree);
    Ok(SolveOutput { x, lmo, result })
}

fn fw_params(tree: &Tree, epsilon: f64) -> FwParams {
    FwParams {
        variant: tree.settings.frank_wolfe.variant,
        lazy: tree.settings.frank_wolfe.lazy,
        line_search: tree.settings.frank_wolfe.line_search,
        epsilon,
        max_iter: tree.tol.max_fw_iter,
        deadline: tree.deadline,
    }
}

/// Builds a start for the node's region that lies in the objective domain.
fn node_start<O: Objective + ?Sized, L: SelfManagedLmo>(
    tree: &Tree,
    obj: &O,
    lmo: &mut TimeTrackingLmo<L>,
    warm: WarmStart,
) -> Result<ActiveSet, FwError> {
    let candidate = match warm {
        WarmStart::Active(a) => a,
        WarmStart::Point(p) => ActiveSet::singleton(p),
        WarmStart::Direction(d) => ActiveSet::singleton(lmo.compute_extreme_point(&d)?),
    };
    if !obj.has_domain() || obj.in_domain(&candidate.iterate()) {
        return Ok(candidate);
    }
    let Some(domain_point) = tree.settings.domain.domain_point.as_ref() else {
        return Err(FwError::DomainFailure);
    };
    let merged = tree.applied.merged_over(&tree.global);
    let Some(target) = domain_point(&merged) else {
        return Err(FwError::DomainFailure);
    };
    domain_warm_start(obj, lmo, &target, tree.tol.max_fw_iter)
}

/// Runs the node's FW solve, re-solving at the minimal tolerance when the
/// iterate is integral but the node gap is still open.
fn process_node<O: Objective + ?Sized, L: SelfManagedLmo>(
    tree: &mut Tree,
    obj: &O,
    lmo: &mut TimeTrackingLmo<L>,
    node: Node,
) -> Result<Outcome, SolveError> {
    match apply_node_bounds(lmo, &mut tree.applied, &node.bounds) {
        Ok(()) => {}
        Err(e) if e.is_infeasibility() || matches!(e, LmoError::InvalidBound { .. }) => return Ok(Outcome::Infeasible),
        Err(e) => return Err(e.into()),
    }
    if node.bounds.merged_over(&tree.global).crossed().is_some() {
        return Ok(Outcome::Infeasible);
    }
    let start = match node_start(tree, obj, lmo, node.warm.clone()) {
        Ok(s) => s,
        Err(e) if is_infeasibility(&e) => return Ok(Outcome::Infeasible),
        Err(e) => return Err(e.into()),
    };
    let mut pool = node.pool.clone();
    pool.retain(|v| lmo.is_linear_feasible(v));

    let k = if node.resumed { 0 } else { tree.settings.branch_and_bound.premature_stop_k };
    let abs_gap = tree.tol.abs_gap;
    let mut epsilon = tree.tol.node_epsilon(node.depth);
    let mut warm = start;
    loop {
        let params = fw_params(tree, epsilon);
        let stopped_early = Cell::new(false);
        let incumbent = tree.incumbent_value();
        let open = &tree.open;
        let int_vars = &tree.int_vars;
        let mut cb = |st: &IterationState| {
            // only after a true LMO call is the bound meaningful
            if st.dual_bound == f64::NEG_INFINITY {
                return true;
            }
            let dominated = incumbent.is_some_and(|inc| st.dual_bound >= inc - abs_gap);
            let crowded = k > 0 && open.count_below(st.dual_bound, k) >= k && !is_integer_feasible(st.x, int_vars);
            if dominated || crowded {
                stopped_early.set(true);
                return false;
            }
            true
        };
        let res = if tree.settings.frank_wolfe.variant == FwVariant::Dicg {
            solve_node_dicg(obj, lmo, warm.iterate(), &params, Some(&mut cb))
        } else {
            solve_node_fw(obj, lmo, warm.clone(), &mut pool, &params, Some(&mut cb))
        };
        let res = match res {
            Ok(r) => r,
            Err(e) if is_infeasibility(&e) => return Ok(Outcome::Infeasible),
            Err(e) => return Err(e.into()),
        };
        tree.fw_iterations += res.iterations;
        let premature = stopped_early.get() && res.status == FwStatus::CallbackStop;

        // integer-feasible points seen at this node
        let mut candidates = vec![(res.x.clone(), SolutionSource::Iterate)];
        if let Some(a) = &res.active_set {
            for v in a.vertices() {
                candidates.push((v.clone(), SolutionSource::ActiveSetVertex));
            }
        }
        for (c, src) in candidates {
            tree.offer(obj, lmo, c, src)?;
        }
        let found = {
            let obj_dyn: &dyn Objective = &obj;
            let mut ctx = HeuristicContext {
                x: &res.x,
                int_vars: &tree.int_vars,
                objective: obj_dyn,
                lmo,
                rng: &mut tree.rng,
            };
            run_heuristics(&mut tree.settings.heuristics, &mut ctx)?
        };
        for (_, c) in found {
            tree.offer(obj, lmo, c, SolutionSource::Heuristic)?;
        }

        let integral = is_integer_feasible(&res.x, &tree.int_vars);
        let gap_open = res.fw_gap > abs_gap;
        let limited = matches!(res.status, FwStatus::IterLimit | FwStatus::TimeLimit | FwStatus::Stalled);
        if integral && gap_open && !premature && !limited && epsilon > tree.tol.fw_epsilon_min {
            epsilon = tree.tol.fw_epsilon_min;
            warm = res.active_set.clone().unwrap_or_else(|| ActiveSet::singleton(res.x.clone()));
            continue;
        }
        return Ok(Outcome::Evaluated { res, premature });
    }
}

/// Creates children (or re-queues the node) after evaluation.
fn expand<O: Objective + ?Sized, L: SelfManagedLmo>(
    tree: &mut Tree,
    obj: &O,
    lmo: &mut TimeTrackingLmo<L>,
    node: Node,
    res: FwResult,
    lb: f64,
    premature: bool,
) -> Result<(), SolveError> {
    let mut g = vec![0.0; res.x.len()];
    obj.gradient(&res.x, &mut g);
    let var = match select_branching_variable(&res.x, &g, &tree.int_vars, tree.settings.branch_and_bound.branching) {
        Some(v) => v,
        None => {
            let node_closed = res.fw_gap <= tree.tol.abs_gap
                || tree.incumbent_value().is_some_and(|inc| lb >= inc - tree.tol.abs_gap);
            if node_closed {
                return Ok(());
            }
            if premature && !node.resumed {
                let warm = match &res.active_set {
                    Some(a) => WarmStart::Active(a.clone()),
                    None => WarmStart::Point(res.x.clone()),
                };
                let requeued = Node {
                    warm,
                    lower_bound: lb,
                    resumed: true,
                    ..node
                };
                tree.open.push(requeued.id, lb, requeued);
                return Ok(());
            }
            // integral iterate with an open gap: split on an unfixed variable
            match unfixed_variable(tree, &node, &res.x) {
                Some(v) => v,
                None => return Ok(()),
            }
        }
    };

    if let Some(cb) = tree.settings.branch_and_bound.branch_callback.as_mut() {
        let ctx = BranchContext {
            node_id: node.id,
            depth: node.depth,
            x: &res.x,
            primal: res.primal,
            fw_gap: res.fw_gap,
            var,
        };
        if !cb(&ctx).map_err(SolveError::Callback)? {
            tree.vetoed_lb = tree.vetoed_lb.min(lb);
            return Ok(());
        }
    }

    let value = res.x[var];
    let (floor_v, ceil_v) = if fractionality(value) > INTEGRALITY_TOL {
        (value.floor(), value.ceil())
    } else {
        let r = value.round();
        let up = node
            .bounds
            .merged_over(&tree.global)
            .get(var, Sense::LessThan)
            .unwrap_or(f64::INFINITY);
        if r + 1.0 <= up {
            (r, r + 1.0)
        } else {
            (r - 1.0, r)
        }
    };
    let left_bounds = node.bounds.tightened(var, floor_v, Sense::LessThan);
    let right_bounds = node.bounds.tightened(var, ceil_v, Sense::GreaterThan);

    let (left_as, right_as) = match &res.active_set {
        Some(a) => a.split(var, floor_v, ceil_v).unwrap_or((None, None)),
        None => (None, None),
    };
    let mut left_pool = node.pool.clone();
    let mut right_pool = node.pool.clone();
    if let Some(a) = &res.active_set {
        for v in a.vertices() {
            left_pool.push(v.clone());
            right_pool.push(v.clone());
        }
    }
    left_pool.retain(|v| v[var] <= floor_v + INTEGRALITY_TOL);
    right_pool.retain(|v| v[var] >= ceil_v - INTEGRALITY_TOL);
    let _ = lmo;

    for (bounds, warm_as, pool) in [(left_bounds, left_as, left_pool), (right_bounds, right_as, right_pool)] {
        if bounds.merged_over(&tree.global).crossed().is_some() {
            continue;
        }
        tree.next_id += 1;
        let warm = match warm_as {
            Some(a) => WarmStart::Active(a),
            None => WarmStart::Direction(g.clone()),
        };
        let child = Node {
            id: tree.next_id,
            depth: node.depth + 1,
            bounds,
            warm,
            pool,
            lower_bound: lb,
            resumed: false,
        };
        tree.open.push(child.id, lb, child);
    }
    Ok(())
}

/// First integer variable whose node interval is not a single point.
fn unfixed_variable(tree: &Tree, node: &Node, _x: &[f64]) -> Option<usize> {
    let merged = node.bounds.merged_over(&tree.global);
    tree.int_vars.iter().copied().find(|&i| {
        let lo = merged.get(i, Sense::GreaterThan).unwrap_or(f64::NEG_INFINITY);
        let up = merged.get(i, Sense::LessThan).unwrap_or(f64::INFINITY);
        up - lo >= 1.0 - INTEGRALITY_TOL
    })
}

/// Re-optimizes the continuous variables with the integer ones fixed to
/// the incumbent. Returns whether the incumbent improved.
fn postprocess<O: Objective + ?Sized, L: SelfManagedLmo>(
    tree: &mut Tree,
    obj: &O,
    lmo: &mut TimeTrackingLmo<L>,
) -> Result<bool, SolveError> {
    let Some(inc) = tree.incumbent.as_ref() else {
        return Ok(false);
    };
    if tree.int_vars.len() == lmo.dim() {
        return Ok(false);
    }
    let mut fixed = IntegerBounds::new(tree.global.integer_vars.clone());
    for &i in &tree.int_vars {
        fixed.push(i, inc.x[i], Sense::GreaterThan);
        fixed.push(i, inc.x[i], Sense::LessThan);
    }
    let start = ActiveSet::singleton(inc.x.clone());
    let inc_value = inc.value;
    apply_node_bounds(lmo, &mut tree.applied, &fixed)?;
    let mut params = fw_params(tree, tree.tol.fw_epsilon_min);
    params.deadline = None;
    let res = if params.variant == FwVariant::Dicg {
        solve_node_dicg(obj, lmo, start.iterate(), &params, None)
    } else {
        let mut pool = ShadowPool::new(0);
        solve_node_fw(obj, lmo, start, &mut pool, &params, None)
    };
    let improved = match res {
        Ok(r) if r.primal < inc_value => {
            tree.fw_iterations += r.iterations;
            let before = tree.incumbent_value();
            tree.offer(obj, lmo, r.x, SolutionSource::PostProcessing)?;
            tree.incumbent_value() != before
        }
        Ok(r) => {
            tree.fw_iterations += r.iterations;
            false
        }
        Err(e) if is_infeasibility(&e) => false,
        Err(e) => return Err(e.into()),
    };
    let root_bounds = IntegerBounds::new(tree.global.integer_vars.clone());
    apply_node_bounds(lmo, &mut tree.applied, &root_bounds)?;
    if improved {
        if let Some(i) = tree.incumbent.as_mut() {
            i.found_at = tree.nodes_processed;
        }
    }
    Ok(improved)
}
