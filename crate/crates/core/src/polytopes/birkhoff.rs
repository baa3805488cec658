//! The Birkhoff polytope (doubly stochastic matrices) with self-managed
//! bounds.
//!
//! Matrices are stored as flat vectors in column-major order, so entry
//! `(row, col)` of an `n x n` matrix lives at `col * n + row`. Fixing an entry
//! to one removes its row and column from the assignment problem; the
//! remaining rows and columns are tracked in `index_map_rows` and
//! `index_map_cols`.

use crate::error::LmoError;
use crate::lmo::{LinearMinimizationOracle, SelfManagedLmo};
use crate::numerics::{IntegerBounds, Sense};

use super::hungarian::{hungarian, CostMatrix};

/// Column-major linear index of `(row, col)`.
pub fn col_major_index(n: usize, row: usize, col: usize) -> usize {
    col * n + row
}

#[derive(Debug, Clone, PartialEq)]
pub struct BirkhoffLmo {
    dim: usize,
    lower_bounds: Vec<f64>,
    upper_bounds: Vec<f64>,
    int_vars: Vec<usize>,
    fixed_to_one_rows: Vec<usize>,
    fixed_to_one_cols: Vec<usize>,
    index_map_rows: Vec<usize>,
    index_map_cols: Vec<usize>,
    updated_lmo: bool,
    pub atol: f64,
    pub rtol: f64,
}

impl BirkhoffLmo {
    /// Root state: all `n^2` entries integer with bounds `[0, 1]`.
    pub fn new(n: usize) -> Self {
        BirkhoffLmo {
            dim: n,
            lower_bounds: vec![0.0; n * n],
            upper_bounds: vec![1.0; n * n],
            int_vars: (0..n * n).collect(),
            fixed_to_one_rows: Vec::new(),
            fixed_to_one_cols: Vec::new(),
            index_map_rows: (0..n).collect(),
            index_map_cols: (0..n).collect(),
            updated_lmo: false,
            atol: 1e-9,
            rtol: 1e-7,
        }
    }

    pub fn n(&self) -> usize {
        self.dim
    }

    pub fn lower_bounds(&self) -> &[f64] {
        &self.lower_bounds
    }

    pub fn upper_bounds(&self) -> &[f64] {
        &self.upper_bounds
    }

    pub fn fixed_to_one(&self) -> Vec<(usize, usize)> {
        self.fixed_to_one_rows
            .iter()
            .copied()
            .zip(self.fixed_to_one_cols.iter().copied())
            .collect()
    }

    pub fn index_map_rows(&self) -> &[usize] {
        &self.index_map_rows
    }

    pub fn index_map_cols(&self) -> &[usize] {
        &self.index_map_cols
    }

    pub fn updated_lmo(&self) -> bool {
        self.updated_lmo
    }

    fn decode(&self, idx: usize) -> (usize, usize) {
        (idx % self.dim, idx / self.dim)
    }

    fn map_to_original_linear_index(&self, i: usize, j: usize) -> usize {
        col_major_index(self.dim, self.index_map_rows[i], self.index_map_cols[j])
    }

    /// Recomputes the fixed lists and index maps from the bound vectors.
    fn rebuild_structure(&mut self) {
        self.fixed_to_one_rows.clear();
        self.fixed_to_one_cols.clear();
        for (k, &var) in self.int_vars.iter().enumerate() {
            if self.lower_bounds[k] >= 1.0 {
                let (i, j) = (var % self.dim, var / self.dim);
                self.fixed_to_one_rows.push(i);
                self.fixed_to_one_cols.push(j);
            }
        }
        self.index_map_rows = (0..self.dim).filter(|r| !self.fixed_to_one_rows.contains(r)).collect();
        self.index_map_cols = (0..self.dim).filter(|c| !self.fixed_to_one_cols.contains(c)).collect();
    }

    /// Two fixings share a row or column, or a fixed entry has upper bound 0.
    fn over_fixed(&self) -> bool {
        // distinct fixed rows and columns are exactly what the maps leave out
        let nfixed = self.fixed_to_one_rows.len();
        nfixed + self.index_map_rows.len() != self.dim
            || nfixed + self.index_map_cols.len() != self.dim
            || self
                .fixed_to_one()
                .iter()
                .any(|&(i, j)| self.upper_bounds[col_major_index(self.dim, i, j)] < 1.0)
    }

    /// Solves the assignment on the rows/cols not in `fixed`, forbidding the
    /// entries flagged by `forbidden`, and lifts the result to `n x n`.
    fn assign(
        &self,
        direction: &[f64],
        fixed: &[(usize, usize)],
        rows: &[usize],
        cols: &[usize],
        forbidden: impl Fn(usize) -> bool,
    ) -> Result<Vec<f64>, LmoError> {
        let n = self.dim;
        let nr = rows.len();
        let mut reduced = CostMatrix::new(nr);
        for (i, &io) in rows.iter().enumerate() {
            for (j, &jo) in cols.iter().enumerate() {
                let lin = col_major_index(n, io, jo);
                if forbidden(lin) {
                    reduced.forbid(i, j);
                } else {
                    reduced.set(i, j, direction[lin]);
                }
            }
        }
        let assignment = hungarian(&reduced)?;
        let mut m = vec![0.0; n * n];
        for &(i, j) in fixed {
            m[col_major_index(n, i, j)] = 1.0;
        }
        for (i, &j) in assignment.row_to_col.iter().enumerate() {
            m[col_major_index(n, rows[i], cols[j])] = 1.0;
        }
        Ok(m)
    }

    fn check_direction(&self, direction: &[f64]) -> Result<(), LmoError> {
        match direction.iter().position(|v| !v.is_finite()) {
            Some(index) => Err(LmoError::InvalidDirection { index }),
            None => Ok(()),
        }
    }
}

impl LinearMinimizationOracle for BirkhoffLmo {
    fn dim(&self) -> usize {
        self.dim * self.dim
    }

    fn compute_extreme_point(&mut self, direction: &[f64]) -> Result<Vec<f64>, LmoError> {
        self.check_direction(direction)?;
        if self.over_fixed() {
            return Err(LmoError::AssignmentInfeasible);
        }
        let nr = self.index_map_rows.len();
        let mut reduced = CostMatrix::new(nr);
        for i in 0..nr {
            for j in 0..nr {
                let linear_index = self.map_to_original_linear_index(i, j);
                if self.upper_bounds[linear_index] == 0.0 {
                    reduced.forbid(i, j);
                } else {
                    reduced.set(i, j, direction[linear_index]);
                }
            }
        }
        let assignment = hungarian(&reduced)?;
        let n = self.dim;
        let mut m = vec![0.0; n * n];
        for (&i, &j) in self.fixed_to_one_rows.iter().zip(&self.fixed_to_one_cols) {
            m[col_major_index(n, i, j)] = 1.0;
        }
        for (i, &j) in assignment.row_to_col.iter().enumerate() {
            m[self.map_to_original_linear_index(i, j)] = 1.0;
        }
        Ok(m)
    }

    fn supports_inface(&self) -> bool {
        true
    }

    /// Entries of `x` at zero stay zero and entries at one stay one.
    fn compute_inface_extreme_point(&mut self, direction: &[f64], x: &[f64]) -> Result<Vec<f64>, LmoError> {
        self.check_direction(direction)?;
        let n = self.dim;
        let mut fixed = Vec::new();
        for idx in 0..n * n {
            if x[idx] >= 1.0 - self.atol || self.lower_bounds[idx] >= 1.0 {
                fixed.push(self.decode(idx));
            }
        }
        let rows: Vec<usize> = (0..n).filter(|r| !fixed.iter().any(|f| f.0 == *r)).collect();
        let cols: Vec<usize> = (0..n).filter(|c| !fixed.iter().any(|f| f.1 == *c)).collect();
        if rows.len() != cols.len() || rows.len() + fixed.len() != n {
            return Err(LmoError::AssignmentInfeasible);
        }
        if fixed
            .iter()
            .any(|&(i, j)| self.upper_bounds[col_major_index(n, i, j)] < 1.0)
        {
            return Err(LmoError::AssignmentInfeasible);
        }
        let atol = self.atol;
        self.assign(direction, &fixed, &rows, &cols, |lin| {
            self.upper_bounds[lin] == 0.0 || x[lin] <= atol
        })
    }

    fn dicg_maximum_step(&self, direction: &[f64], x: &[f64]) -> Result<f64, LmoError> {
        let mut gamma_max: f64 = 1.0;
        for idx in 0..x.len() {
            let d = direction[idx];
            if d != 0.0 {
                // iterate already on the boundary
                if (d < 0.0 && (x[idx] - 1.0).abs() <= self.atol) || (d > 0.0 && x[idx].abs() <= self.atol) {
                    return Ok(0.0);
                }
                if d > 0.0 {
                    gamma_max = gamma_max.min(x[idx] / d);
                } else {
                    gamma_max = gamma_max.min(-(1.0 - x[idx]) / d);
                }
            }
        }
        Ok(gamma_max.max(0.0))
    }
}

impl SelfManagedLmo for BirkhoffLmo {
    fn integer_variables(&self) -> Vec<usize> {
        self.int_vars.clone()
    }

    fn build_global_bounds(&self, _int_vars: &[usize]) -> IntegerBounds {
        let mut global = IntegerBounds::new(self.int_vars.clone());
        for (idx, &var) in self.int_vars.iter().enumerate() {
            global.push(var, self.lower_bounds[idx], Sense::GreaterThan);
            global.push(var, self.upper_bounds[idx], Sense::LessThan);
        }
        global
    }

    fn get_bound(&self, var: usize, sense: Sense) -> Option<f64> {
        let k = self.int_vars.iter().position(|&v| v == var)?;
        Some(match sense {
            Sense::GreaterThan => self.lower_bounds[k],
            Sense::LessThan => self.upper_bounds[k],
        })
    }

    fn lower_bound_list(&self) -> Vec<(usize, f64)> {
        self.int_vars.iter().copied().zip(self.lower_bounds.iter().copied()).collect()
    }

    fn upper_bound_list(&self) -> Vec<(usize, f64)> {
        self.int_vars.iter().copied().zip(self.upper_bounds.iter().copied()).collect()
    }

    fn set_bound(&mut self, var: usize, value: f64, sense: Sense) -> Result<(), LmoError> {
        if value != 0.0 && value != 1.0 {
            return Err(LmoError::InvalidBound { var, value });
        }
        let k = self
            .int_vars
            .iter()
            .position(|&v| v == var)
            .ok_or(LmoError::InvalidBound { var, value })?;
        if self.updated_lmo {
            self.fixed_to_one_rows.clear();
            self.fixed_to_one_cols.clear();
            self.updated_lmo = false;
        }
        match sense {
            Sense::GreaterThan => self.lower_bounds[k] = value,
            Sense::LessThan => self.upper_bounds[k] = value,
        }
        self.rebuild_structure();
        Ok(())
    }

    fn delete_bounds(&mut self, cons_delete: &[(usize, Sense)]) {
        for &(var, sense) in cons_delete {
            if let Some(k) = self.int_vars.iter().position(|&v| v == var) {
                match sense {
                    Sense::GreaterThan => self.lower_bounds[k] = 0.0,
                    Sense::LessThan => self.upper_bounds[k] = 1.0,
                }
            }
        }
        self.rebuild_structure();
        self.updated_lmo = true;
    }

    fn is_linear_feasible(&self, x: &[f64]) -> bool {
        let n = self.dim;
        if x.len() != n * n {
            return false;
        }
        let within = x.iter().enumerate().all(|(k, &v)| {
            v >= self.lower_bounds[k] - self.atol && v <= self.upper_bounds[k] + self.atol
        });
        if !within {
            return false;
        }
        (0..n).all(|i| {
            let row: f64 = (0..n).map(|j| x[col_major_index(n, i, j)]).sum();
            let col: f64 = (0..n).map(|j| x[col_major_index(n, j, i)]).sum();
            (row - 1.0).abs() <= self.atol.max(self.rtol) && (col - 1.0).abs() <= self.atol.max(self.rtol)
        })
    }

    fn build_lmo_correct(&self, bounds: &IntegerBounds) -> bool {
        let consistent = bounds.entries().iter().all(|&(var, sense, value)| {
            self.get_bound(var, sense).is_some_and(|b| b == value) && (0.0..=1.0).contains(&value)
        });
        consistent && self.lower_bounds.iter().zip(&self.upper_bounds).all(|(l, u)| l <= u)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::dot;
    use rand::seq::SliceRandom;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn permutations(n: usize) -> Vec<Vec<usize>> {
        fn rec(cur: &mut Vec<usize>, used: &mut Vec<bool>, out: &mut Vec<Vec<usize>>) {
            let n = used.len();
            if cur.len() == n {
                out.push(cur.clone());
                return;
            }
            for j in 0..n {
                if !used[j] {
                    used[j] = true;
                    cur.push(j);
                    rec(cur, used, out);
                    cur.pop();
                    used[j] = false;
                }
            }
        }
        let mut out = Vec::new();
        rec(&mut Vec::new(), &mut vec![false; n], &mut out);
        out
    }

    fn perm_matrix(p: &[usize]) -> Vec<f64> {
        let n = p.len();
        let mut m = vec![0.0; n * n];
        for (i, &j) in p.iter().enumerate() {
            m[col_major_index(n, i, j)] = 1.0;
        }
        m
    }

    #[test]
    fn row_fixed_twice_is_infeasible() {
        // three ones in a 2x2 matrix: row 1 is fixed at two columns
        let mut lmo = BirkhoffLmo::new(2);
        for var in [0, 1, 3] {
            lmo.set_bound(var, 1.0, Sense::GreaterThan).unwrap();
        }
        assert_eq!(lmo.compute_extreme_point(&[0.0; 4]), Err(LmoError::AssignmentInfeasible));
    }

    #[test]
    fn identity_for_antidiagonal_cost() {
        let mut lmo = BirkhoffLmo::new(2);
        // D = [[0,1],[1,0]] in column-major order
        let v = lmo.compute_extreme_point(&[0.0, 1.0, 1.0, 0.0]).unwrap();
        assert_eq!(v, vec![1.0, 0.0, 0.0, 1.0]);
    }

    #[test]
    fn fixing_is_honoured() {
        let mut lmo = BirkhoffLmo::new(3);
        lmo.set_bound(col_major_index(3, 1, 1), 1.0, Sense::GreaterThan).unwrap();
        let mut d = vec![1.0; 9];
        d[col_major_index(3, 1, 2)] = -10.0;
        let v = lmo.compute_extreme_point(&d).unwrap();
        assert_eq!(v[col_major_index(3, 1, 1)], 1.0);
        assert_eq!(lmo.index_map_rows(), &[0, 2]);
        assert_eq!(lmo.index_map_cols(), &[0, 2]);
        assert!(lmo.is_linear_feasible(&v));
    }

    #[test]
    fn set_bound_decodes_column_major() {
        let mut lmo = BirkhoffLmo::new(3);
        // one-based index 5 of the reference layout is zero-based 4: row 1, col 1
        lmo.set_bound(4, 1.0, Sense::GreaterThan).unwrap();
        assert_eq!(lmo.fixed_to_one(), vec![(1, 1)]);
        lmo.set_bound(1, 0.0, Sense::LessThan).unwrap();
        assert_eq!(lmo.upper_bounds()[1], 0.0);
        assert_eq!(lmo.fixed_to_one(), vec![(1, 1)]);
        assert_eq!(lmo.set_bound(2, 0.5, Sense::LessThan), Err(LmoError::InvalidBound { var: 2, value: 0.5 }));
    }

    #[test]
    fn delete_restores_maps() {
        let mut lmo = BirkhoffLmo::new(3);
        lmo.set_bound(4, 1.0, Sense::GreaterThan).unwrap();
        lmo.delete_bounds(&[]);
        assert_eq!(lmo.index_map_rows(), &[0, 2]);
        lmo.delete_bounds(&[(4, Sense::GreaterThan)]);
        assert_eq!(lmo.index_map_rows(), &[0, 1, 2]);
        assert_eq!(lmo.index_map_cols(), &[0, 1, 2]);
        assert!(lmo.updated_lmo());
    }

    #[test]
    fn global_bounds_are_unit() {
        let lmo = BirkhoffLmo::new(3);
        let g = lmo.build_global_bounds(&lmo.integer_variables());
        assert_eq!(g.lower.len(), 9);
        assert!(g.lower.values().all(|&v| v == 0.0));
        assert!(g.upper.values().all(|&v| v == 1.0));
        for (var, v) in lmo.lower_bound_list() {
            assert_eq!(lmo.get_bound(var, Sense::GreaterThan), Some(v));
            assert_eq!(g.lower[&var], v);
        }
    }

    #[test]
    fn feasibility_checks() {
        let lmo = BirkhoffLmo::new(3);
        assert!(lmo.is_linear_feasible(&perm_matrix(&[0, 1, 2])));
        let mut bad = perm_matrix(&[0, 1, 2]);
        bad[0] = 0.9;
        assert!(!lmo.is_linear_feasible(&bad));
    }

    #[test]
    fn random_bounds_match_filtered_enumeration() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let perms = permutations(5);
        for _ in 0..40 {
            let mut lmo = BirkhoffLmo::new(5);
            let p = perms.choose(&mut rng).unwrap().clone();
            // fixings consistent with p, plus some zeros off p
            for i in 0..5 {
                if rng.gen_bool(0.2) {
                    lmo.set_bound(col_major_index(5, i, p[i]), 1.0, Sense::GreaterThan).unwrap();
                }
                for j in 0..5 {
                    if j != p[i] && rng.gen_bool(0.15) {
                        lmo.set_bound(col_major_index(5, i, j), 0.0, Sense::LessThan).unwrap();
                    }
                }
            }
            let d: Vec<f64> = (0..25).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let v = lmo.compute_extreme_point(&d).unwrap();
            assert!(lmo.is_linear_feasible(&v));
            let best = perms
                .iter()
                .map(|q| perm_matrix(q))
                .filter(|m| lmo.is_linear_feasible(m))
                .map(|m| dot(&d, &m))
                .fold(f64::INFINITY, f64::min);
            assert!((dot(&d, &v) - best).abs() < 1e-12);
        }
    }

    #[test]
    fn inface_of_vertex_is_vertex() {
        let mut lmo = BirkhoffLmo::new(4);
        let x = perm_matrix(&[2, 0, 3, 1]);
        let d: Vec<f64> = (0..16).map(|k| (k as f64 * 0.37).sin()).collect();
        assert_eq!(lmo.compute_inface_extreme_point(&d, &x).unwrap(), x);
    }

    #[test]
    fn inface_of_barycenter_is_unrestricted() {
        let mut lmo = BirkhoffLmo::new(4);
        let x = vec![0.25; 16];
        let d: Vec<f64> = (0..16).map(|k| (k as f64 * 1.3).cos()).collect();
        let a = lmo.compute_inface_extreme_point(&d, &x).unwrap();
        let b = lmo.compute_extreme_point(&d).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn inface_support_inclusion() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let perms = permutations(5);
        for _ in 0..30 {
            let mut x = vec![0.0; 25];
            let ws = [0.5, 0.3, 0.2];
            for w in ws {
                let p = perms.choose(&mut rng).unwrap();
                crate::numerics::axpy(w, &perm_matrix(p), &mut x);
            }
            let d: Vec<f64> = (0..25).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let mut lmo = BirkhoffLmo::new(5);
            let a = lmo.compute_inface_extreme_point(&d, &x).unwrap();
            for k in 0..25 {
                if a[k] > 0.5 {
                    assert!(x[k] > 0.0);
                }
            }
        }
    }

    #[test]
    fn max_step_cases() {
        let lmo = BirkhoffLmo::new(2);
        assert_eq!(lmo.dicg_maximum_step(&[0.0; 4], &[0.5; 4]).unwrap(), 1.0);
        assert_eq!(
            lmo.dicg_maximum_step(&[1.0, 0.0, 0.0, 0.0], &[0.0, 1.0, 1.0, 0.0]).unwrap(),
            0.0
        );
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..100 {
            let x: Vec<f64> = (0..4).map(|_| rng.gen_range(0.05..0.95)).collect();
            let d: Vec<f64> = (0..4).map(|_| rng.gen_range(-3.0..3.0)).collect();
            let g = lmo.dicg_maximum_step(&d, &x).unwrap();
            let y: Vec<f64> = x.iter().zip(&d).map(|(a, b)| a - g * b).collect();
            assert!(y.iter().all(|&v| (-1e-12..=1.0 + 1e-12).contains(&v)));
            if g < 1.0 {
                assert!(y.iter().any(|&v| v.abs() < 1e-12 || (v - 1.0).abs() < 1e-12));
            }
        }
    }
}
