//! Seeded instance generators. Equal seeds give identical instances.

use nalgebra::DMatrix;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use super::gip::{are_isomorphic, relabel, Adjacency};
use super::network_design::{ArcCost, NetworkDesignInstance, DEFAULT_MU, DEFAULT_P};
use crate::polytopes::Demand;

pub fn rng_from_seed(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Uniform `d`-regular simple graph on `n` vertices by the pairing model,
/// restarting whenever a loop or a repeated edge appears.
pub fn random_regular_graph(n: usize, d: usize, rng: &mut impl Rng) -> Adjacency {
    assert!(d < n && (n * d).is_multiple_of(2), "no {d}-regular graph on {n} vertices");
    'attempt: loop {
        let mut stubs: Vec<usize> = (0..n).flat_map(|v| std::iter::repeat_n(v, d)).collect();
        stubs.shuffle(rng);
        let mut a = vec![vec![0u8; n]; n];
        for pair in stubs.chunks(2) {
            let (u, v) = (pair[0], pair[1]);
            if u == v || a[u][v] == 1 {
                continue 'attempt;
            }
            a[u][v] = 1;
            a[v][u] = 1;
        }
        return a;
    }
}

pub fn random_permutation(n: usize, rng: &mut impl Rng) -> Vec<usize> {
    let mut p: Vec<usize> = (0..n).collect();
    p.shuffle(rng);
    p
}

/// A relabeled copy of `a` and the relabeling used.
pub fn random_relabeling(a: &Adjacency, rng: &mut impl Rng) -> (Adjacency, Vec<usize>) {
    let p = random_permutation(a.len(), rng);
    (relabel(a, &p), p)
}

/// `count` random `d`-regular graphs, pairwise non-isomorphic and none
/// isomorphic to `reference`. Returns fewer if `max_attempts` samples do not
/// suffice.
pub fn non_isomorphic_regular_graphs(
    reference: &Adjacency,
    d: usize,
    count: usize,
    max_attempts: usize,
    rng: &mut impl Rng,
) -> Vec<Adjacency> {
    let n = reference.len();
    let mut found: Vec<Adjacency> = Vec::with_capacity(count);
    for _ in 0..max_attempts {
        if found.len() == count {
            break;
        }
        let g = random_regular_graph(n, d, rng);
        if are_isomorphic(reference, &g).is_none() && found.iter().all(|h| are_isomorphic(h, &g).is_none()) {
            found.push(g);
        }
    }
    found
}

/// `m x n` matrix of independent standard normal entries.
pub fn gaussian_matrix(m: usize, n: usize, rng: &mut impl Rng) -> DMatrix<f64> {
    DMatrix::from_fn(m, n, |_, _| rng.sample(StandardNormal))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GeometricNetworkParams {
    pub num_nodes: usize,
    /// Pairs closer than this get existing arcs in both directions.
    pub radius: f64,
    pub num_candidates: usize,
    pub num_demands: usize,
    /// Demands are drawn into at most this many destinations.
    pub num_destinations: usize,
}

impl Default for GeometricNetworkParams {
    fn default() -> Self {
        GeometricNetworkParams {
            num_nodes: 8,
            radius: 0.45,
            num_candidates: 4,
            num_demands: 4,
            num_destinations: 2,
        }
    }
}

/// Random geometric network in the unit square.
///
/// Every node is linked both ways to its nearest earlier node, so the
/// existing arcs alone already route every demand. Candidate arcs join
/// unlinked pairs; costs grow with arc length.
pub fn random_geometric_network(params: &GeometricNetworkParams, rng: &mut impl Rng) -> NetworkDesignInstance {
    let n = params.num_nodes;
    assert!(n >= 2, "need at least two nodes");
    let pts: Vec<(f64, f64)> = (0..n).map(|_| (rng.gen::<f64>(), rng.gen::<f64>())).collect();
    let dist = |i: usize, j: usize| ((pts[i].0 - pts[j].0).powi(2) + (pts[i].1 - pts[j].1).powi(2)).sqrt();
    let mut linked = vec![vec![false; n]; n];
    let mut existing = Vec::new();
    let mut link = |i: usize, j: usize, existing: &mut Vec<(usize, usize)>| {
        if !linked[i][j] {
            linked[i][j] = true;
            linked[j][i] = true;
            existing.push((i, j));
            existing.push((j, i));
        }
    };
    for j in 1..n {
        let nearest = (0..j).min_by(|&a, &b| dist(a, j).total_cmp(&dist(b, j))).expect("j >= 1");
        link(nearest, j, &mut existing);
    }
    for i in 0..n {
        for j in i + 1..n {
            if dist(i, j) <= params.radius {
                link(i, j, &mut existing);
            }
        }
    }
    let mut free: Vec<(usize, usize)> = (0..n)
        .flat_map(|i| (0..n).map(move |j| (i, j)))
        .filter(|&(i, j)| i != j && !existing.contains(&(i, j)))
        .collect();
    free.shuffle(rng);
    free.truncate(params.num_candidates);
    let arc_cost = |len: f64, rng: &mut dyn rand::RngCore| ArcCost {
        alpha: len,
        beta: len * rng.gen_range(1.0..2.0),
        gamma: rng.gen_range(0.1..0.5),
        rho: rng.gen_range(1.5..3.0),
    };
    let existing_costs: Vec<ArcCost> = existing.iter().map(|&(i, j)| arc_cost(dist(i, j), rng)).collect();
    let candidate_costs: Vec<ArcCost> = free.iter().map(|&(i, j)| arc_cost(dist(i, j), rng)).collect();
    let design_costs: Vec<f64> = free.iter().map(|&(i, j)| dist(i, j) * rng.gen_range(1.0..3.0)).collect();
    let dests = random_permutation(n, rng)[..params.num_destinations.clamp(1, n)].to_vec();
    let demands = (0..params.num_demands)
        .map(|_| {
            let dest = *dests.choose(rng).expect("nonempty");
            let mut source = rng.gen_range(0..n - 1);
            if source >= dest {
                source += 1;
            }
            Demand {
                source,
                dest,
                amount: rng.gen_range(0.5..2.0),
            }
        })
        .collect();
    NetworkDesignInstance {
        num_nodes: n,
        existing_arcs: existing,
        existing_costs,
        candidate_arcs: free,
        candidate_costs,
        design_costs,
        demands,
        mu: DEFAULT_MU,
        p: DEFAULT_P,
        big_m: None,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problems::gip::petersen;
    use crate::problems::network_design::NetworkDesign;

    #[test]
    fn regular_graphs_are_regular_and_simple() {
        let mut rng = rng_from_seed(1);
        for _ in 0..20 {
            let g = random_regular_graph(10, 3, &mut rng);
            for (i, row) in g.iter().enumerate() {
                assert_eq!(row.iter().filter(|&&v| v == 1).count(), 3);
                assert_eq!(row[i], 0);
            }
        }
    }

    #[test]
    fn relabeling_is_isomorphic() {
        let mut rng = rng_from_seed(2);
        let a = petersen();
        for _ in 0..5 {
            let (b, p) = random_relabeling(&a, &mut rng);
            assert_eq!(relabel(&a, &p), b);
            assert!(are_isomorphic(&a, &b).is_some());
        }
    }

    #[test]
    fn same_seed_same_instances() {
        let p = GeometricNetworkParams::default();
        let a = random_geometric_network(&p, &mut rng_from_seed(7));
        let b = random_geometric_network(&p, &mut rng_from_seed(7));
        assert_eq!(a, b);
        assert_eq!(gaussian_matrix(5, 3, &mut rng_from_seed(3)), gaussian_matrix(5, 3, &mut rng_from_seed(3)));
    }

    #[test]
    fn geometric_networks_are_valid() {
        for seed in 0..20 {
            let inst = random_geometric_network(&GeometricNetworkParams::default(), &mut rng_from_seed(seed));
            assert!(NetworkDesign::new(&inst).is_ok(), "seed {seed}");
        }
    }
}
