//! Minimum-cost perfect assignment with forbidden entries.
//!
//! Shortest augmenting paths with row/column potentials, `O(n^3)`.
//! Forbidden entries are carried as a flag next to the cost so they never
//! take part in a reduced-cost comparison.

use crate::error::LmoError;

pub const MAX_ASSIGNMENT_DIM: usize = 512;

/// Square cost matrix, row-major, with a forbidden flag per entry.
#[derive(Debug, Clone, PartialEq)]
pub struct CostMatrix {
    n: usize,
    cost: Vec<f64>,
    forbidden: Vec<bool>,
}

impl CostMatrix {
    pub fn new(n: usize) -> Self {
        CostMatrix {
            n,
            cost: vec![0.0; n * n],
            forbidden: vec![false; n * n],
        }
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Self {
        let n = rows.len();
        let mut m = CostMatrix::new(n);
        for (i, row) in rows.iter().enumerate() {
            assert_eq!(row.len(), n, "cost matrix must be square");
            for (j, &c) in row.iter().enumerate() {
                m.set(i, j, c);
            }
        }
        m
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn set(&mut self, row: usize, col: usize, cost: f64) {
        self.cost[row * self.n + col] = cost;
        self.forbidden[row * self.n + col] = false;
    }

    pub fn forbid(&mut self, row: usize, col: usize) {
        self.forbidden[row * self.n + col] = true;
    }

    pub fn cost(&self, row: usize, col: usize) -> f64 {
        self.cost[row * self.n + col]
    }

    pub fn is_forbidden(&self, row: usize, col: usize) -> bool {
        self.forbidden[row * self.n + col]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Assignment {
    /// Column assigned to each row.
    pub row_to_col: Vec<usize>,
    /// Sum of the selected costs, accumulated in row order.
    pub value: f64,
}

/// Solves the assignment problem on `cost`, never selecting forbidden
/// entries.
pub fn hungarian(cost: &CostMatrix) -> Result<Assignment, LmoError> {
    let n = cost.dim();
    if n > MAX_ASSIGNMENT_DIM {
        return Err(LmoError::DimensionTooLarge(n));
    }
    if n == 0 {
        return Ok(Assignment {
            row_to_col: Vec::new(),
            value: 0.0,
        });
    }
    // 1-based internally; column 0 is the virtual root of each search.
    let mut u = vec![0.0; n + 1];
    let mut v = vec![0.0; n + 1];
    let mut col_owner = vec![0usize; n + 1];
    let mut way = vec![0usize; n + 1];
    for row in 1..=n {
        col_owner[0] = row;
        let mut j0 = 0;
        let mut minv = vec![f64::INFINITY; n + 1];
        let mut used = vec![false; n + 1];
        loop {
            used[j0] = true;
            let i0 = col_owner[j0];
            let mut delta = f64::INFINITY;
            let mut j1 = 0;
            for j in 1..=n {
                if used[j] {
                    continue;
                }
                if !cost.is_forbidden(i0 - 1, j - 1) {
                    let cur = cost.cost(i0 - 1, j - 1) - u[i0] - v[j];
                    if cur < minv[j] {
                        minv[j] = cur;
                        way[j] = j0;
                    }
                }
                if minv[j] < delta {
                    delta = minv[j];
                    j1 = j;
                }
            }
            if !delta.is_finite() {
                return Err(LmoError::AssignmentInfeasible);
            }
            for j in 0..=n {
                if used[j] {
                    u[col_owner[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if col_owner[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            col_owner[j0] = col_owner[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    let mut row_to_col = vec![0; n];
    for j in 1..=n {
        row_to_col[col_owner[j] - 1] = j - 1;
    }
    let value = row_to_col.iter().enumerate().map(|(i, &j)| cost.cost(i, j)).sum();
    Ok(Assignment { row_to_col, value })
}
