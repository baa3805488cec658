//! Graph isomorphism as `min ||XA - BX||_F^2` over permutation matrices.
//!
//! `X` is stored column-major: entry `(row, col)` lives at `col * n + row`,
//! matching [`BirkhoffLmo`]. The minimum is zero iff the graphs are
//! isomorphic, so a zero incumbent certifies isomorphism and a positive
//! tree bound certifies the opposite.

use nalgebra::DMatrix;

use crate::bnb::{BranchCallback, SolveResult, Settings, SolvingStage, TreeCallback};
use crate::error::ProblemError;
use crate::fw::{FwVariant, LineSearch, Objective};
use crate::polytopes::BirkhoffLmo;

/// Objective values at or below this count as zero.
pub const ISOMORPHISM_TOL: f64 = 1e-8;

/// The Petersen graph: outer 5-cycle, inner pentagram, five spokes.
pub const PETERSEN_EDGES: [(usize, usize); 15] = [
    (0, 1),
    (1, 2),
    (2, 3),
    (3, 4),
    (4, 0),
    (5, 7),
    (7, 9),
    (9, 6),
    (6, 8),
    (8, 5),
    (0, 5),
    (1, 6),
    (2, 7),
    (3, 8),
    (4, 9),
];

/// Relabeling taking the Petersen graph to a second drawing of it.
pub const PETERSEN_RELABELING: [usize; 10] = [2, 7, 0, 9, 5, 1, 8, 4, 6, 3];

pub type Adjacency = Vec<Vec<u8>>;

pub fn adjacency_from_edges(n: usize, edges: &[(usize, usize)]) -> Adjacency {
    let mut a = vec![vec![0u8; n]; n];
    for &(u, v) in edges {
        a[u][v] = 1;
        a[v][u] = 1;
    }
    a
}

pub fn petersen() -> Adjacency {
    adjacency_from_edges(10, &PETERSEN_EDGES)
}

/// `B` with `B[perm[i]][perm[j]] = A[i][j]`.
pub fn relabel(a: &Adjacency, perm: &[usize]) -> Adjacency {
    let n = a.len();
    let mut b = vec![vec![0u8; n]; n];
    for i in 0..n {
        for j in 0..n {
            b[perm[i]][perm[j]] = a[i][j];
        }
    }
    b
}

/// Column-major permutation matrix with `X[perm[i], i] = 1`; it satisfies
/// `XA = BX` for `B = relabel(A, perm)`.
pub fn permutation_matrix(perm: &[usize]) -> Vec<f64> {
    let n = perm.len();
    let mut x = vec![0.0; n * n];
    for (i, &p) in perm.iter().enumerate() {
        x[i * n + p] = 1.0;
    }
    x
}

fn check_adjacency(a: &Adjacency, name: &str) -> Result<(), ProblemError> {
    let n = a.len();
    for (i, row) in a.iter().enumerate() {
        if row.len() != n {
            return Err(ProblemError::Invalid(format!("{name} is not square")));
        }
        if row[i] != 0 {
            return Err(ProblemError::Invalid(format!("{name} has a self-loop at {i}")));
        }
        for (j, &v) in row.iter().enumerate() {
            if v > 1 || a[j][i] != v {
                return Err(ProblemError::Invalid(format!("{name} is not a symmetric 0/1 matrix at ({i}, {j})")));
            }
        }
    }
    Ok(())
}

fn to_matrix(a: &Adjacency) -> DMatrix<f64> {
    let n = a.len();
    DMatrix::from_fn(n, n, |i, j| f64::from(a[i][j]))
}

#[derive(Debug, Clone, PartialEq)]
pub struct GraphIsomorphism {
    n: usize,
    a: DMatrix<f64>,
    b: DMatrix<f64>,
}

impl GraphIsomorphism {
    pub fn new(a: &Adjacency, b: &Adjacency) -> Result<Self, ProblemError> {
        check_adjacency(a, "A")?;
        check_adjacency(b, "B")?;
        if a.len() != b.len() {
            return Err(ProblemError::Invalid(format!("graph sizes differ: {} vs {}", a.len(), b.len())));
        }
        Ok(GraphIsomorphism {
            n: a.len(),
            a: to_matrix(a),
            b: to_matrix(b),
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn lmo(&self) -> BirkhoffLmo {
        BirkhoffLmo::new(self.n)
    }

    fn residual(&self, x: &[f64]) -> DMatrix<f64> {
        let xm = DMatrix::from_column_slice(self.n, self.n, x);
        &xm * &self.a - &self.b * &xm
    }

    /// DICG with secant steps, lazy, at most 1000 FW iterations per node,
    /// plus the certification callbacks.
    pub fn settings(&self) -> Settings {
        let mut s = Settings::default();
        s.frank_wolfe.variant = FwVariant::Dicg;
        s.frank_wolfe.line_search = LineSearch::default();
        s.frank_wolfe.lazy = true;
        s.tolerances.max_fw_iter = 1000;
        let (tree_cb, branch_cb) = gip_callbacks();
        s.branch_and_bound.bnb_callback = Some(tree_cb);
        s.branch_and_bound.branch_callback = Some(branch_cb);
        s
    }
}

impl Objective for GraphIsomorphism {
    fn value(&self, x: &[f64]) -> f64 {
        self.residual(x).norm_squared()
    }

    fn gradient(&self, x: &[f64], storage: &mut [f64]) {
        let r = self.residual(x);
        let g = (&r * self.a.transpose() - self.b.transpose() * &r) * 2.0;
        storage.copy_from_slice(g.as_slice());
    }
}

/// Tree callback: stop once the incumbent is zero (isomorphic) or the tree
/// bound is positive (not isomorphic). Branch callback: refuse to branch on
/// nodes whose bound is already positive.
pub fn gip_callbacks() -> (TreeCallback, BranchCallback) {
    let tree: TreeCallback = Box::new(|ctx, _node, _event| {
        if ctx.incumbent.is_some_and(|v| v <= ISOMORPHISM_TOL) {
            ctx.stage = SolvingStage::UserStop;
            log::info!("zero-objective permutation found, graphs are isomorphic");
        }
        if ctx.lower_bound > ISOMORPHISM_TOL {
            ctx.stage = SolvingStage::UserStop;
            log::info!("tree bound {} is positive, graphs are not isomorphic", ctx.lower_bound);
        }
        Ok(())
    });
    let branch: BranchCallback = Box::new(|ctx| {
        let bound = ctx.primal - ctx.fw_gap;
        if bound > ISOMORPHISM_TOL {
            log::debug!("node {} not branched, bound {bound} is positive", ctx.node_id);
        }
        Ok(bound <= ISOMORPHISM_TOL)
    });
    (tree, branch)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Verdict {
    Isomorphic,
    NonIsomorphic,
    Inconclusive,
}

impl Verdict {
    pub fn as_str(self) -> &'static str {
        match self {
            Verdict::Isomorphic => "isomorphic",
            Verdict::NonIsomorphic => "non-isomorphic",
            Verdict::Inconclusive => "inconclusive",
        }
    }
}

pub fn verdict(result: &SolveResult) -> Verdict {
    if result.primal.is_some_and(|v| v <= ISOMORPHISM_TOL) {
        Verdict::Isomorphic
    } else if result.dual_bound > ISOMORPHISM_TOL {
        Verdict::NonIsomorphic
    } else {
        Verdict::Inconclusive
    }
}

/// Backtracking isomorphism test: maps vertices of `a` in order, keeping
/// degrees and adjacency to already-mapped vertices consistent.
pub fn are_isomorphic(a: &Adjacency, b: &Adjacency) -> Option<Vec<usize>> {
    let n = a.len();
    if b.len() != n {
        return None;
    }
    let deg = |g: &Adjacency| -> Vec<usize> { g.iter().map(|r| r.iter().filter(|&&v| v == 1).count()).collect() };
    let (da, db) = (deg(a), deg(b));
    let mut sa = da.clone();
    let mut sb = db.clone();
    sa.sort_unstable();
    sb.sort_unstable();
    if sa != sb {
        return None;
    }
    fn rec(
        i: usize,
        a: &Adjacency,
        b: &Adjacency,
        da: &[usize],
        db: &[usize],
        map: &mut Vec<usize>,
        used: &mut Vec<bool>,
    ) -> bool {
        let n = a.len();
        if i == n {
            return true;
        }
        for t in 0..n {
            if used[t] || da[i] != db[t] {
                continue;
            }
            if (0..i).all(|j| a[i][j] == b[t][map[j]]) {
                map.push(t);
                used[t] = true;
                if rec(i + 1, a, b, da, db, map, used) {
                    return true;
                }
                used[t] = false;
                map.pop();
            }
        }
        false
    }
    let mut map = Vec::with_capacity(n);
    let mut used = vec![false; n];
    rec(0, a, b, &da, &db, &mut map, &mut used).then_some(map)
}
