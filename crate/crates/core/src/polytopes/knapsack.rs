use crate::error::LmoError;
use crate::lmo::{BoundedLmo, LinearMinimizationOracle, ManagedLmo};
use crate::numerics::compensated_sum;

/// The scaled, truncated simplex `{x : 0 <= x <= u, sum(x) = budget}`.
#[derive(Debug, Clone, PartialEq)]
pub struct SimplexKnapsackLmo {
    budget: f64,
    upper: Vec<f64>,
}

impl SimplexKnapsackLmo {
    pub fn new(budget: f64, upper: Vec<f64>) -> Result<Self, LmoError> {
        let upper_sum = compensated_sum(upper.iter().copied());
        if upper.iter().any(|&u| u < 0.0) || upper_sum < budget || budget < 0.0 {
            return Err(LmoError::BudgetInfeasible {
                budget,
                lower_sum: 0.0,
                upper_sum,
            });
        }
        Ok(SimplexKnapsackLmo { budget, upper })
    }

    pub fn budget(&self) -> f64 {
        self.budget
    }

    pub fn upper(&self) -> &[f64] {
        &self.upper
    }

    /// Every coordinate integer, global bounds `[0, u]`.
    pub fn managed(self) -> ManagedLmo<Self> {
        let m = self.upper.len();
        let upper = self.upper.clone();
        ManagedLmo::new(self, &vec![0.0; m], &upper, (0..m).collect())
    }
}

/// Greedy continuous-knapsack vertex.
///
/// Starts from `lower` and spends the remaining budget on coordinates in
/// ascending `direction` order (ties by index), filling each to its upper
/// bound before moving on.
pub fn knapsack_extreme_point(
    budget: f64,
    direction: &[f64],
    lower: &[f64],
    upper: &[f64],
) -> Result<Vec<f64>, LmoError> {
    let lower_sum = compensated_sum(lower.iter().copied());
    let upper_sum = compensated_sum(upper.iter().copied());
    let tol = 1e-9 * budget.abs().max(1.0);
    if lower_sum > budget + tol || upper_sum < budget - tol || lower.iter().zip(upper).any(|(l, u)| l > u) {
        return Err(LmoError::BudgetInfeasible {
            budget,
            lower_sum,
            upper_sum,
        });
    }
    let mut x = lower.to_vec();
    let mut order: Vec<usize> = (0..direction.len()).collect();
    order.sort_by(|&a, &b| direction[a].total_cmp(&direction[b]).then(a.cmp(&b)));
    let mut remaining = budget - lower_sum;
    for i in order {
        if remaining <= 0.0 {
            break;
        }
        let add = (upper[i] - lower[i]).min(remaining);
        x[i] += add;
        remaining -= add;
    }
    Ok(x)
}

impl LinearMinimizationOracle for SimplexKnapsackLmo {
    fn dim(&self) -> usize {
        self.upper.len()
    }

    fn compute_extreme_point(&mut self, direction: &[f64]) -> Result<Vec<f64>, LmoError> {
        knapsack_extreme_point(self.budget, direction, &vec![0.0; self.upper.len()], &self.upper)
    }
}

impl BoundedLmo for SimplexKnapsackLmo {
    fn dim(&self) -> usize {
        self.upper.len()
    }

    fn bounded_compute_extreme_point(
        &mut self,
        direction: &[f64],
        lower: &[f64],
        upper: &[f64],
        int_vars: &[usize],
    ) -> Result<Vec<f64>, LmoError> {
        let mut lo = vec![0.0_f64; self.upper.len()];
        let mut up = self.upper.clone();
        for (k, &i) in int_vars.iter().enumerate() {
            lo[i] = lo[i].max(lower[k]);
            up[i] = up[i].min(upper[k]);
        }
        knapsack_extreme_point(self.budget, direction, &lo, &up)
    }

    fn is_simple_linear_feasible(&self, v: &[f64]) -> bool {
        let tol = 1e-9 * self.budget.abs().max(1.0);
        v.len() == self.upper.len()
            && (compensated_sum(v.iter().copied()) - self.budget).abs() <= tol
            && v.iter().zip(&self.upper).all(|(&x, &u)| x >= -1e-9 && x <= u + 1e-9)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::dot;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn two_cheapest_coordinates() {
        let x = knapsack_extreme_point(2.0, &[3.0, 1.0, 2.0], &[0.0; 3], &[1.0; 3]).unwrap();
        assert_eq!(x, vec![0.0, 1.0, 1.0]);
    }

    #[test]
    fn lower_bound_forces_entry() {
        let x = knapsack_extreme_point(2.0, &[3.0, 1.0, 2.0], &[1.0, 0.0, 0.0], &[1.0; 3]).unwrap();
        assert_eq!(x, vec![1.0, 1.0, 0.0]);
    }

    #[test]
    fn full_budget_returns_upper() {
        let u = [2.0, 1.0, 3.0];
        let x = knapsack_extreme_point(6.0, &[0.5, -1.0, 2.0], &[0.0; 3], &u).unwrap();
        assert_eq!(x, u.to_vec());
    }

    #[test]
    fn infeasible_budget() {
        assert!(matches!(
            knapsack_extreme_point(5.0, &[0.0; 2], &[0.0; 2], &[1.0, 1.0]),
            Err(LmoError::BudgetInfeasible { .. })
        ));
        assert!(matches!(
            knapsack_extreme_point(1.0, &[0.0; 2], &[1.0, 1.0], &[1.0, 1.0]),
            Err(LmoError::BudgetInfeasible { .. })
        ));
    }

    fn integer_points(lo: &[f64], up: &[f64], budget: i64) -> Vec<Vec<f64>> {
        fn rec(i: usize, lo: &[f64], up: &[f64], left: i64, cur: &mut Vec<f64>, out: &mut Vec<Vec<f64>>) {
            if i == lo.len() {
                if left == 0 {
                    out.push(cur.clone());
                }
                return;
            }
            for v in lo[i] as i64..=up[i] as i64 {
                if v > left {
                    break;
                }
                cur.push(v as f64);
                rec(i + 1, lo, up, left - v, cur, out);
                cur.pop();
            }
        }
        let mut out = Vec::new();
        rec(0, lo, up, budget, &mut Vec::new(), &mut out);
        out
    }

    #[test]
    fn matches_enumeration_with_random_fixings() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..50 {
            let m = rng.gen_range(2..=6);
            let up: Vec<f64> = (0..m).map(|_| rng.gen_range(1..=3) as f64).collect();
            let total: i64 = up.iter().map(|&u| u as i64).sum();
            let budget = rng.gen_range(1..=total);
            let mut lmo = SimplexKnapsackLmo::new(budget as f64, up.clone()).unwrap();
            let mut lo = vec![0.0; m];
            let mut up_node = up.clone();
            let k = rng.gen_range(0..m);
            if rng.gen_bool(0.5) {
                lo[k] = 1.0_f64.min(up[k]);
            } else {
                up_node[k] = 0.0;
            }
            let d: Vec<f64> = (0..m).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let points = integer_points(&lo, &up_node, budget);
            let res = lmo.bounded_compute_extreme_point(&d, &lo, &up_node, &(0..m).collect::<Vec<_>>());
            if points.is_empty() {
                assert!(res.is_err());
                continue;
            }
            let v = res.unwrap();
            assert!(lmo.is_simple_linear_feasible(&v));
            let best = points.iter().map(|p| dot(&d, p)).fold(f64::INFINITY, f64::min);
            assert!((dot(&d, &v) - best).abs() < 1e-12);
        }
    }
}
