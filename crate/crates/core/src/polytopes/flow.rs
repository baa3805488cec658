//! Uncapacitated multi-commodity flow, one commodity per destination.
//!
//! Without capacities the linear problem decouples: every demand is routed
//! entirely along a shortest path under the arc costs of its destination's
//! block.

use std::cmp::Ordering;
use std::collections::{BinaryHeap, VecDeque};

use crate::error::LmoError;
use crate::lmo::LinearMinimizationOracle;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Demand {
    pub source: usize,
    pub dest: usize,
    pub amount: f64,
}

/// Flow oracle over a digraph. Variables are laid out as one block of
/// `arcs.len()` entries per destination, in ascending destination order.
#[derive(Debug, Clone, PartialEq)]
pub struct FlowLmo {
    num_nodes: usize,
    arcs: Vec<(usize, usize)>,
    demands: Vec<Demand>,
    destinations: Vec<usize>,
    incoming: Vec<Vec<usize>>,
}

#[derive(Copy, Clone, PartialEq)]
struct Label {
    dist: f64,
    node: usize,
}

impl Eq for Label {}

impl Ord for Label {
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .dist
            .total_cmp(&self.dist)
            .then_with(|| other.node.cmp(&self.node))
    }
}

impl PartialOrd for Label {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl FlowLmo {
    /// Checks demands are nonnegative and every positive demand is routable.
    pub fn new(num_nodes: usize, arcs: Vec<(usize, usize)>, demands: Vec<Demand>) -> Result<Self, LmoError> {
        let mut destinations: Vec<usize> = demands.iter().map(|d| d.dest).collect();
        destinations.sort_unstable();
        destinations.dedup();
        let mut incoming = vec![Vec::new(); num_nodes];
        let mut outgoing = vec![Vec::new(); num_nodes];
        for (e, &(t, h)) in arcs.iter().enumerate() {
            assert!(t < num_nodes && h < num_nodes, "arc endpoint out of range");
            incoming[h].push(e);
            outgoing[t].push(h);
        }
        for d in &demands {
            if d.amount < 0.0 || !d.amount.is_finite() {
                return Err(LmoError::Infeasible(format!("negative demand {} -> {}", d.source, d.dest)));
            }
            if d.amount > 0.0 && !reachable(&outgoing, d.source, d.dest) {
                return Err(LmoError::UnreachableDemand {
                    source_node: d.source,
                    dest: d.dest,
                });
            }
        }
        Ok(FlowLmo {
            num_nodes,
            arcs,
            demands,
            destinations,
            incoming,
        })
    }

    pub fn num_nodes(&self) -> usize {
        self.num_nodes
    }

    pub fn arcs(&self) -> &[(usize, usize)] {
        &self.arcs
    }

    pub fn demands(&self) -> &[Demand] {
        &self.demands
    }

    pub fn destinations(&self) -> &[usize] {
        &self.destinations
    }

    pub fn num_vars(&self) -> usize {
        self.arcs.len() * self.destinations.len()
    }

    /// Offset of the block of destination `dest`.
    pub fn block_offset(&self, dest: usize) -> Option<usize> {
        self.destinations
            .binary_search(&dest)
            .ok()
            .map(|k| k * self.arcs.len())
    }

    /// Shortest paths into `dest` from every node, as the next arc to take.
    fn shortest_tree_to(&self, dest: usize, costs: &[f64]) -> Vec<Option<usize>> {
        let mut dist = vec![f64::INFINITY; self.num_nodes];
        let mut next_arc = vec![None; self.num_nodes];
        let mut heap = BinaryHeap::new();
        dist[dest] = 0.0;
        heap.push(Label { dist: 0.0, node: dest });
        while let Some(Label { dist: d, node }) = heap.pop() {
            if d > dist[node] {
                continue;
            }
            for &e in &self.incoming[node] {
                let tail = self.arcs[e].0;
                let cand = d + costs[e];
                if cand < dist[tail] {
                    dist[tail] = cand;
                    next_arc[tail] = Some(e);
                    heap.push(Label { dist: cand, node: tail });
                }
            }
        }
        next_arc
    }

    /// Routes every demand along a shortest path.
    pub fn flow_extreme_point(&self, direction: &[f64]) -> Result<Vec<f64>, LmoError> {
        if let Some(index) = direction.iter().position(|v| !v.is_finite()) {
            return Err(LmoError::InvalidDirection { index });
        }
        let na = self.arcs.len();
        let mut flow = vec![0.0; self.num_vars()];
        for (k, &z) in self.destinations.iter().enumerate() {
            let block = &direction[k * na..(k + 1) * na];
            let costs: Vec<f64> = if block.iter().any(|&c| c < 0.0) {
                log::warn!("negative arc costs in flow block {k} clamped to zero");
                block.iter().map(|&c| c.max(0.0)).collect()
            } else {
                block.to_vec()
            };
            let next_arc = self.shortest_tree_to(z, &costs);
            for d in self.demands.iter().filter(|d| d.dest == z && d.amount > 0.0) {
                let mut node = d.source;
                let mut steps = 0;
                while node != z {
                    let e = next_arc[node].ok_or(LmoError::UnreachableDemand {
                        source_node: d.source,
                        dest: z,
                    })?;
                    flow[k * na + e] += d.amount;
                    node = self.arcs[e].1;
                    steps += 1;
                    debug_assert!(steps <= self.num_nodes);
                }
            }
        }
        Ok(flow)
    }

    /// Largest violation of nonnegativity or node balance in any block.
    pub fn balance_residual(&self, flow: &[f64]) -> f64 {
        let na = self.arcs.len();
        let mut worst: f64 = 0.0;
        for (k, &z) in self.destinations.iter().enumerate() {
            let block = &flow[k * na..(k + 1) * na];
            let mut net = vec![0.0; self.num_nodes];
            for (e, &(t, h)) in self.arcs.iter().enumerate() {
                worst = worst.max(-block[e]);
                net[t] += block[e];
                net[h] -= block[e];
            }
            for d in self.demands.iter().filter(|d| d.dest == z) {
                net[d.source] -= d.amount;
                net[z] += d.amount;
            }
            for v in net {
                worst = worst.max(v.abs());
            }
        }
        worst
    }
}

fn reachable(outgoing: &[Vec<usize>], from: usize, to: usize) -> bool {
    let mut seen = vec![false; outgoing.len()];
    let mut queue = VecDeque::from([from]);
    seen[from] = true;
    while let Some(u) = queue.pop_front() {
        if u == to {
            return true;
        }
        for &v in &outgoing[u] {
            if !seen[v] {
                seen[v] = true;
                queue.push_back(v);
            }
        }
    }
    false
}

impl LinearMinimizationOracle for FlowLmo {
    fn dim(&self) -> usize {
        self.num_vars()
    }

    fn compute_extreme_point(&mut self, direction: &[f64]) -> Result<Vec<f64>, LmoError> {
        self.flow_extreme_point(direction)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::dot;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn parallel_arcs_take_cheaper() {
        let lmo = FlowLmo::new(
            2,
            vec![(0, 1), (0, 1)],
            vec![Demand { source: 0, dest: 1, amount: 3.0 }],
        )
        .unwrap();
        assert_eq!(lmo.flow_extreme_point(&[1.0, 2.0]).unwrap(), vec![3.0, 0.0]);
    }

    #[test]
    fn unreachable_rejected() {
        let err = FlowLmo::new(3, vec![(0, 1)], vec![Demand { source: 0, dest: 2, amount: 1.0 }]);
        assert_eq!(err.unwrap_err(), LmoError::UnreachableDemand { source_node: 0, dest: 2 });
    }

    /// The two-source network of the traffic example: S1=0, nodes 1..5 as
    /// 1..5, D=6, S2=7; arc 1->2 is the optional one.
    fn example_network() -> FlowLmo {
        let arcs = vec![(0, 1), (1, 2), (1, 3), (3, 4), (4, 5), (5, 6), (2, 6), (7, 3)];
        FlowLmo::new(
            8,
            arcs,
            vec![
                Demand { source: 0, dest: 6, amount: 1.0 },
                Demand { source: 7, dest: 6, amount: 1.0 },
            ],
        )
        .unwrap()
    }

    #[test]
    fn example_network_uniform_costs() {
        let lmo = example_network();
        let flow = lmo.flow_extreme_point(&[1.0; 8]).unwrap();
        assert!(lmo.balance_residual(&flow) < 1e-12);
        // S1 takes the short route through the optional arc
        assert_eq!(flow, vec![1.0, 1.0, 0.0, 1.0, 1.0, 1.0, 1.0, 1.0]);
    }

    #[test]
    fn random_dag_balance_and_optimality() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        for _ in 0..30 {
            let n = rng.gen_range(4..9);
            let mut arcs = Vec::new();
            for i in 0..n - 1 {
                arcs.push((i, i + 1));
                for j in i + 2..n {
                    if rng.gen_bool(0.3) {
                        arcs.push((i, j));
                    }
                }
            }
            let demands = vec![
                Demand { source: 0, dest: n - 1, amount: rng.gen_range(0.5..3.0) },
                Demand { source: 1, dest: n - 1, amount: rng.gen_range(0.5..3.0) },
                Demand { source: 0, dest: n - 2, amount: rng.gen_range(0.5..3.0) },
            ];
            let lmo = FlowLmo::new(n, arcs.clone(), demands.clone()).unwrap();
            let d: Vec<f64> = (0..lmo.num_vars()).map(|_| rng.gen_range(0.0..2.0)).collect();
            let flow = lmo.flow_extreme_point(&d).unwrap();
            assert!(lmo.balance_residual(&flow) < 1e-9);
            // per-commodity path costs are minimal: compare to Bellman-Ford
            let na = arcs.len();
            let mut expected = 0.0;
            for (k, &z) in lmo.destinations().iter().enumerate() {
                let mut dist = vec![f64::INFINITY; n];
                dist[z] = 0.0;
                for _ in 0..n {
                    for (e, &(t, h)) in arcs.iter().enumerate() {
                        dist[t] = dist[t].min(dist[h] + d[k * na + e]);
                    }
                }
                for dm in demands.iter().filter(|dm| dm.dest == z) {
                    expected += dm.amount * dist[dm.source];
                }
            }
            assert!((dot(&d, &flow) - expected).abs() < 1e-9);
        }
    }
}
