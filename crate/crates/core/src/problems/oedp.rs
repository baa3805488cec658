//! Optimal experiment design: choose `N` runs among `m` experiments, at most
//! `u_i` of experiment `i`, to minimize a criterion of the information matrix
//! `X(x) = A^T diag(x) A`.
//!
//! The objective is only defined where `X(x)` is positive definite, so this
//! pack also supplies a domain oracle, a node-level domain point and a
//! projection warm start.

use std::sync::Arc;

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};

use crate::bnb::{DomainPointFn, Settings};
use crate::error::ProblemError;
use crate::fw::{domain_warm_start, FwVariant, LineSearch, Objective};
use crate::lmo::ManagedLmo;
use crate::numerics::{ActiveSet, IntegerBounds};
use crate::polytopes::SimplexKnapsackLmo;

/// Pivots below this fraction of the largest diagonal entry count as zero.
const PIVOT_REL_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Criterion {
    /// `trace(X^-1)`
    A,
    /// `-log det X`
    D,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Oedp {
    /// `m x n`, full column rank.
    a: DMatrix<f64>,
    budget: usize,
    upper: Vec<usize>,
    criterion: Criterion,
}

pub fn numerical_rank(a: &DMatrix<f64>) -> usize {
    let sv = a.clone().svd(false, false).singular_values;
    let max = sv.iter().copied().fold(0.0, f64::max);
    let tol = max * 1e-10 * a.nrows().max(a.ncols()) as f64;
    sv.iter().filter(|&&s| s > tol).count()
}

impl Oedp {
    pub fn new(a: DMatrix<f64>, budget: usize, upper: Vec<usize>, criterion: Criterion) -> Result<Self, ProblemError> {
        let (m, n) = a.shape();
        if upper.len() != m {
            return Err(ProblemError::Invalid(format!("{} upper bounds for {m} experiments", upper.len())));
        }
        if a.iter().any(|v| !v.is_finite()) {
            return Err(ProblemError::Invalid("experiment matrix has non-finite entries".into()));
        }
        if budget < n {
            return Err(ProblemError::Invalid(format!("budget {budget} is below the parameter count {n}")));
        }
        if upper.iter().sum::<usize>() < budget {
            return Err(ProblemError::Invalid(format!("upper bounds cannot reach budget {budget}")));
        }
        let rank = numerical_rank(&a);
        if rank != n {
            return Err(ProblemError::RankDeficient { rank, expected: n });
        }
        Ok(Oedp {
            a,
            budget,
            upper,
            criterion,
        })
    }

    /// Builds from row vectors `a_i`.
    pub fn from_rows(rows: &[Vec<f64>], budget: usize, upper: Vec<usize>, criterion: Criterion) -> Result<Self, ProblemError> {
        let n = rows.first().map_or(0, Vec::len);
        if n == 0 || rows.iter().any(|r| r.len() != n) {
            return Err(ProblemError::Invalid("experiment rows must be nonempty and of equal length".into()));
        }
        let a = DMatrix::from_fn(rows.len(), n, |i, j| rows[i][j]);
        Oedp::new(a, budget, upper, criterion)
    }

    pub fn num_experiments(&self) -> usize {
        self.a.nrows()
    }

    pub fn num_parameters(&self) -> usize {
        self.a.ncols()
    }

    pub fn budget(&self) -> usize {
        self.budget
    }

    pub fn upper(&self) -> &[usize] {
        &self.upper
    }

    pub fn criterion(&self) -> Criterion {
        self.criterion
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.a
    }

    pub fn information_matrix(&self, x: &[f64]) -> DMatrix<f64> {
        let scaled = DMatrix::from_fn(self.a.nrows(), self.a.ncols(), |i, j| x[i] * self.a[(i, j)]);
        let m = self.a.transpose() * scaled;
        // exact symmetry for the factorization
        (&m + m.transpose()) * 0.5
    }

    fn factor(&self, x: &[f64]) -> Option<Cholesky<f64, Dyn>> {
        if x.len() != self.a.nrows() || x.iter().any(|v| !v.is_finite()) {
            return None;
        }
        let m = self.information_matrix(x);
        let scale = m.diagonal().iter().copied().fold(0.0, f64::max);
        if scale <= 0.0 {
            return None;
        }
        let chol = Cholesky::new(m)?;
        let l = chol.l_dirty();
        (0..l.nrows())
            .all(|i| l[(i, i)] * l[(i, i)] >= PIVOT_REL_TOL * scale)
            .then_some(chol)
    }

    pub fn try_value(&self, x: &[f64]) -> Result<f64, ProblemError> {
        let chol = self.factor(x).ok_or(ProblemError::DomainViolation)?;
        Ok(match self.criterion {
            Criterion::A => {
                let n = self.a.ncols();
                let linv = chol
                    .l_dirty()
                    .lower_triangle()
                    .solve_lower_triangular(&DMatrix::identity(n, n))
                    .expect("pivots checked nonzero");
                linv.norm_squared()
            }
            Criterion::D => -2.0 * chol.l_dirty().diagonal().iter().map(|d| d.ln()).sum::<f64>(),
        })
    }

    pub fn try_gradient(&self, x: &[f64], storage: &mut [f64]) -> Result<(), ProblemError> {
        let chol = self.factor(x).ok_or(ProblemError::DomainViolation)?;
        let at = self.a.transpose();
        match self.criterion {
            Criterion::A => {
                // column i is X^-1 a_i
                let z = chol.solve(&at);
                for (i, s) in storage.iter_mut().enumerate() {
                    *s = -z.column(i).norm_squared();
                }
            }
            Criterion::D => {
                // column i is L^-1 a_i, so its squared norm is a_i^T X^-1 a_i
                let w = chol
                    .l_dirty()
                    .lower_triangle()
                    .solve_lower_triangular(&at)
                    .expect("pivots checked nonzero");
                for (i, s) in storage.iter_mut().enumerate() {
                    *s = -w.column(i).norm_squared();
                }
            }
        }
        Ok(())
    }

    /// Integer points of the truncated simplex, every coordinate integer.
    pub fn lmo(&self) -> ManagedLmo<SimplexKnapsackLmo> {
        SimplexKnapsackLmo::new(self.budget as f64, self.upper.iter().map(|&u| u as f64).collect())
            .expect("validated at construction")
            .managed()
    }

    /// `n` linearly independent rows among those with `ub > 0`, scanning in
    /// ascending order with Gram-Schmidt.
    fn independent_rows(&self, ub: &[f64]) -> Vec<usize> {
        let n = self.a.ncols();
        let mut basis: Vec<DVector<f64>> = Vec::with_capacity(n);
        let mut rows = Vec::with_capacity(n);
        for i in 0..self.a.nrows() {
            if basis.len() == n {
                break;
            }
            if ub[i] <= 0.0 {
                continue;
            }
            let row: DVector<f64> = self.a.row(i).transpose();
            let mut r = row.clone();
            for q in &basis {
                let c = q.dot(&r);
                r.axpy(-c, q, 1.0);
            }
            let norm = r.norm();
            if norm > 1e-9 * row.norm().max(f64::MIN_POSITIVE) {
                basis.push(r / norm);
                rows.push(i);
            }
        }
        rows
    }

    /// Domain point for the box `[lb, ub]` intersected with `[0, u]`.
    ///
    /// Starts at `lb`, first raises a set of independent experiments towards
    /// their bounds, then the smallest remaining entries, one unit at a time
    /// and always the smallest entry first (lowest index on ties).
    pub fn domain_point(&self, lb: &[f64], ub: &[f64]) -> Option<Vec<f64>> {
        let m = self.a.nrows();
        let lb: Vec<f64> = (0..m).map(|i| lb[i].max(0.0).ceil()).collect();
        let ub: Vec<f64> = (0..m).map(|i| ub[i].min(self.upper[i] as f64).floor()).collect();
        let n_budget = self.budget as f64;
        if lb.iter().zip(&ub).any(|(l, u)| l > u) || lb.iter().sum::<f64>() > n_budget {
            return None;
        }
        if !self.in_domain(&ub) {
            return None;
        }
        let s = self.independent_rows(&ub);
        let mut x = lb;
        let mut total: f64 = x.iter().sum();
        loop {
            if total >= n_budget {
                return self.in_domain(&x).then_some(x);
            }
            let min_below = |idx: &mut dyn Iterator<Item = usize>, x: &[f64]| {
                idx.filter(|&i| x[i] < ub[i])
                    .min_by(|&i, &j| x[i].total_cmp(&x[j]).then(i.cmp(&j)))
            };
            let pick = min_below(&mut s.iter().copied(), &x).or_else(|| min_below(&mut (0..m), &x));
            let i = pick?;
            x[i] += 1.0;
            total += 1.0;
        }
    }

    /// [`Oedp::domain_point`] for merged node bounds.
    pub fn domain_point_for(&self, bounds: &IntegerBounds) -> Option<Vec<f64>> {
        let m = self.a.nrows();
        let lb: Vec<f64> = (0..m).map(|i| bounds.lower.get(&i).copied().unwrap_or(0.0)).collect();
        let ub: Vec<f64> = (0..m)
            .map(|i| bounds.upper.get(&i).copied().unwrap_or(self.upper[i] as f64))
            .collect();
        self.domain_point(&lb, &ub)
    }

    /// Domain-feasible active set near the root domain point.
    pub fn warm_start(&self, max_iter: usize) -> Result<ActiveSet, ProblemError> {
        let m = self.a.nrows();
        let target = self
            .domain_point(&vec![0.0; m], &self.upper.iter().map(|&u| u as f64).collect::<Vec<_>>())
            .ok_or(ProblemError::DomainViolation)?;
        let mut lmo = self.lmo();
        Ok(domain_warm_start(self, &mut lmo, &target, max_iter)?)
    }

    /// Lazy BPCG with secant steps, hyperplane-aware rounding at probability
    /// 0.7, the domain-point recovery and the root warm start.
    pub fn settings(self: &Arc<Self>) -> Result<Settings, ProblemError> {
        let mut s = Settings::default();
        s.frank_wolfe.variant = FwVariant::Bpcg;
        s.frank_wolfe.lazy = true;
        s.frank_wolfe.line_search = LineSearch::default();
        s.heuristics.hyperplane_aware_rounding_prob = 0.7;
        s.heuristics.hyperplane_budget = Some(self.budget as f64);
        s.domain.active_set = Some(self.warm_start(s.tolerances.max_fw_iter)?);
        let me = Arc::clone(self);
        let dp: DomainPointFn = Box::new(move |b| me.domain_point_for(b));
        s.domain.domain_point = Some(dp);
        Ok(s)
    }
}

impl Objective for Oedp {
    /// `+inf` outside the domain.
    fn value(&self, x: &[f64]) -> f64 {
        self.try_value(x).unwrap_or(f64::INFINITY)
    }

    /// NaN-filled outside the domain.
    fn gradient(&self, x: &[f64], storage: &mut [f64]) {
        if self.try_gradient(x, storage).is_err() {
            storage.fill(f64::NAN);
        }
    }

    fn has_domain(&self) -> bool {
        true
    }

    fn in_domain(&self, x: &[f64]) -> bool {
        self.factor(x).is_some()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lmo::SelfManagedLmo;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn identity_problem(n: usize, c: Criterion) -> Oedp {
        Oedp::new(DMatrix::identity(n, n), n, vec![2; n], c).unwrap()
    }

    fn random_problem(rng: &mut ChaCha8Rng, m: usize, n: usize, c: Criterion) -> Oedp {
        let a = DMatrix::from_fn(m, n, |_, _| rng.gen_range(-1.0..1.0));
        Oedp::new(a, 2 * n, vec![3; m], c).unwrap()
    }

    #[test]
    fn identity_values() {
        let x = vec![1.0; 4];
        let mut g = vec![0.0; 4];
        let a = identity_problem(4, Criterion::A);
        assert!((a.value(&x) - 4.0).abs() < 1e-12);
        a.gradient(&x, &mut g);
        assert!(g.iter().all(|v| (v + 1.0).abs() < 1e-12));
        let d = identity_problem(4, Criterion::D);
        assert!(d.value(&x).abs() < 1e-12);
        d.gradient(&x, &mut g);
        assert!(g.iter().all(|v| (v + 1.0).abs() < 1e-12));
    }

    #[test]
    fn domain_oracle_cases() {
        let p = identity_problem(3, Criterion::D);
        assert!(!p.in_domain(&[0.0, 0.0, 0.0]));
        assert!(p.in_domain(&[1.0, 1.0, 1.0]));
        // only n - 1 experiments active
        assert!(!p.in_domain(&[2.0, 1.0, 0.0]));
        assert_eq!(p.try_value(&[2.0, 1.0, 0.0]), Err(ProblemError::DomainViolation));
        assert_eq!(p.value(&[0.0; 3]), f64::INFINITY);
    }

    #[test]
    fn rank_deficient_rejected() {
        let rows = vec![vec![1.0, 2.0], vec![2.0, 4.0], vec![-1.0, -2.0]];
        assert_eq!(
            Oedp::from_rows(&rows, 2, vec![1; 3], Criterion::A).unwrap_err(),
            ProblemError::RankDeficient { rank: 1, expected: 2 }
        );
        assert!(Oedp::from_rows(&[vec![1.0, 0.0], vec![0.0, 1.0]], 1, vec![1; 2], Criterion::A).is_err());
        assert!(Oedp::from_rows(&[vec![1.0, 0.0], vec![0.0, 1.0]], 3, vec![1; 2], Criterion::A).is_err());
    }

    #[test]
    fn gradients_match_central_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for c in [Criterion::A, Criterion::D] {
            for _ in 0..10 {
                let p = random_problem(&mut rng, 10, 3, c);
                let x: Vec<f64> = (0..10).map(|_| rng.gen_range(0.2..2.0)).collect();
                let mut g = vec![0.0; 10];
                p.gradient(&x, &mut g);
                let h = 1e-6;
                for k in 0..10 {
                    let mut xp = x.clone();
                    let mut xm = x.clone();
                    xp[k] += h;
                    xm[k] -= h;
                    let fd = (p.value(&xp) - p.value(&xm)) / (2.0 * h);
                    assert!((fd - g[k]).abs() <= 1e-5 * g[k].abs().max(1.0), "{c:?}: {fd} vs {}", g[k]);
                }
            }
        }
    }

    #[test]
    fn domain_point_square_invertible() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let a = DMatrix::from_fn(4, 4, |_, _| rng.gen_range(-1.0..1.0));
        let p = Oedp::new(a, 4, vec![3; 4], Criterion::A).unwrap();
        assert_eq!(p.domain_point(&[0.0; 4], &[3.0; 4]), Some(vec![1.0; 4]));
    }

    #[test]
    fn domain_point_guards() {
        let p = identity_problem(3, Criterion::A);
        // lower bounds exceed the budget
        assert_eq!(p.domain_point(&[2.0, 2.0, 0.0], &[2.0; 3]), None);
        // upper bounds leave the matrix singular
        assert_eq!(p.domain_point(&[0.0; 3], &[2.0, 2.0, 0.0]), None);
    }

    #[test]
    fn random_domain_points_are_valid() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        for _ in 0..50 {
            let p = random_problem(&mut rng, 12, 3, Criterion::D);
            let lb: Vec<f64> = (0..12).map(|_| if rng.gen_bool(0.1) { 1.0 } else { 0.0 }).collect();
            let ub: Vec<f64> = (0..12).map(|i| if rng.gen_bool(0.2) { lb[i] } else { 3.0 }).collect();
            if let Some(x) = p.domain_point(&lb, &ub) {
                assert_eq!(x.iter().sum::<f64>(), p.budget() as f64);
                assert!(x.iter().zip(&lb).zip(&ub).all(|((v, l), u)| v >= l && v <= u && v.fract() == 0.0));
                assert!(p.in_domain(&x));
            }
        }
    }

    #[test]
    fn warm_start_enters_domain() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let a = DMatrix::from_fn(20, 4, |_, _| rng.gen_range(-1.0..1.0));
        let p = Oedp::new(a, 8, vec![2; 20], Criterion::A).unwrap();
        let active = p.warm_start(10_000).unwrap();
        let x = active.iterate();
        assert!(p.in_domain(&x));
        assert!(p.lmo().is_linear_feasible(&x));
    }

    proptest! {
        #[test]
        fn convex_on_domain(seed in 0u64..1000, t in prop::sample::select(vec![0.25, 0.5, 0.75])) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            for c in [Criterion::A, Criterion::D] {
                let p = random_problem(&mut rng, 8, 3, c);
                let x: Vec<f64> = (0..8).map(|_| rng.gen_range(0.1..2.0)).collect();
                let y: Vec<f64> = (0..8).map(|_| rng.gen_range(0.1..2.0)).collect();
                let z: Vec<f64> = x.iter().zip(&y).map(|(a, b)| t * a + (1.0 - t) * b).collect();
                prop_assert!(p.value(&z) <= t * p.value(&x) + (1.0 - t) * p.value(&y) + 1e-8);
            }
        }
    }
}
