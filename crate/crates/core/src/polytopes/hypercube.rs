use crate::error::LmoError;
use crate::lmo::{BoundedLmo, LinearMinimizationOracle, ManagedLmo};

/// Axis-aligned box `lower <= x <= upper`.
#[derive(Debug, Clone, PartialEq)]
pub struct HypercubeLmo {
    lower: Vec<f64>,
    upper: Vec<f64>,
}

impl HypercubeLmo {
    pub fn new(lower: Vec<f64>, upper: Vec<f64>) -> Self {
        assert_eq!(lower.len(), upper.len(), "bound vectors differ in length");
        assert!(
            lower.iter().zip(&upper).all(|(l, u)| l <= u),
            "lower bound exceeds upper bound"
        );
        HypercubeLmo { lower, upper }
    }

    /// The unit cube `[0, 1]^dim`.
    pub fn unit(dim: usize) -> Self {
        HypercubeLmo::new(vec![0.0; dim], vec![1.0; dim])
    }

    pub fn lower(&self) -> &[f64] {
        &self.lower
    }

    pub fn upper(&self) -> &[f64] {
        &self.upper
    }

    /// Wraps the cube with every coordinate integer and the box as the
    /// global bounds.
    pub fn managed(self) -> ManagedLmo<Self> {
        let vars = (0..self.lower.len()).collect();
        self.managed_with(vars)
    }

    /// Wraps the cube with the given integer variables.
    pub fn managed_with(self, int_vars: Vec<usize>) -> ManagedLmo<Self> {
        let lo: Vec<f64> = int_vars.iter().map(|&i| self.lower[i]).collect();
        let up: Vec<f64> = int_vars.iter().map(|&i| self.upper[i]).collect();
        ManagedLmo::new(self, &lo, &up, int_vars)
    }

    fn pick(d: f64, lo: f64, up: f64) -> f64 {
        if d < 0.0 {
            up
        } else {
            lo
        }
    }
}

impl LinearMinimizationOracle for HypercubeLmo {
    fn dim(&self) -> usize {
        self.lower.len()
    }

    fn compute_extreme_point(&mut self, direction: &[f64]) -> Result<Vec<f64>, LmoError> {
        Ok(direction
            .iter()
            .enumerate()
            .map(|(i, &d)| Self::pick(d, self.lower[i], self.upper[i]))
            .collect())
    }

    fn supports_inface(&self) -> bool {
        true
    }

    fn compute_inface_extreme_point(&mut self, direction: &[f64], x: &[f64]) -> Result<Vec<f64>, LmoError> {
        Ok(direction
            .iter()
            .enumerate()
            .map(|(i, &d)| {
                if (x[i] - self.lower[i]).abs() <= 1e-9 {
                    self.lower[i]
                } else if (x[i] - self.upper[i]).abs() <= 1e-9 {
                    self.upper[i]
                } else {
                    Self::pick(d, self.lower[i], self.upper[i])
                }
            })
            .collect())
    }

    fn dicg_maximum_step(&self, direction: &[f64], x: &[f64]) -> Result<f64, LmoError> {
        let mut gamma_max: f64 = 1.0;
        for i in 0..x.len() {
            let d = direction[i];
            if d > 0.0 {
                let room = x[i] - self.lower[i];
                if room <= 1e-9 {
                    return Ok(0.0);
                }
                gamma_max = gamma_max.min(room / d);
            } else if d < 0.0 {
                let room = self.upper[i] - x[i];
                if room <= 1e-9 {
                    return Ok(0.0);
                }
                gamma_max = gamma_max.min(-room / d);
            }
        }
        Ok(gamma_max)
    }
}

impl BoundedLmo for HypercubeLmo {
    fn dim(&self) -> usize {
        self.lower.len()
    }

    fn bounded_compute_extreme_point(
        &mut self,
        direction: &[f64],
        lower: &[f64],
        upper: &[f64],
        int_vars: &[usize],
    ) -> Result<Vec<f64>, LmoError> {
        let mut lo = self.lower.clone();
        let mut up = self.upper.clone();
        for (k, &i) in int_vars.iter().enumerate() {
            lo[i] = lo[i].max(lower[k]);
            up[i] = up[i].min(upper[k]);
            if lo[i] > up[i] {
                return Err(LmoError::NodeInfeasible { var: i });
            }
        }
        Ok(direction
            .iter()
            .enumerate()
            .map(|(i, &d)| Self::pick(d, lo[i], up[i]))
            .collect())
    }

    fn is_simple_linear_feasible(&self, v: &[f64]) -> bool {
        v.len() == self.lower.len()
            && v.iter()
                .zip(self.lower.iter().zip(&self.upper))
                .all(|(&x, (&l, &u))| x >= l - 1e-9 && x <= u + 1e-9)
    }
}
