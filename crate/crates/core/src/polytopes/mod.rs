//! Concrete feasible regions and their oracles.

mod birkhoff;
mod flow;
mod hungarian;
mod hypercube;
mod knapsack;

pub use birkhoff::{col_major_index, BirkhoffLmo};
pub use flow::{Demand, FlowLmo};
pub use hungarian::{hungarian, Assignment, CostMatrix, MAX_ASSIGNMENT_DIM};
pub use hypercube::HypercubeLmo;
pub use knapsack::{knapsack_extreme_point, SimplexKnapsackLmo};
