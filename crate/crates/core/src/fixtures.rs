//! Test networks with seeded synthetic demand.
//!
//! The topologies and free-flow data are the usual Nguyen-Dupuis and
//! Sioux Falls networks. Demand totals are drawn uniformly from a range with
//! a ChaCha generator, so a seed fully determines the instance.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::costs::ClassParams;
use crate::network::{build_network, LinkRecord, NetFile, Network, NetworkError, NodeId, TripRecord};

/// Uniform range of total (RV + AV) demand per OD pair.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DemandRange {
    pub min: f64,
    pub max: f64,
}

impl DemandRange {
    fn draw(&self, rng: &mut ChaCha8Rng) -> f64 {
        if self.max > self.min {
            rng.gen_range(self.min..self.max)
        } else {
            self.min
        }
    }
}

pub const NGUYEN_DEMAND: DemandRange = DemandRange { min: 100.0, max: 300.0 };
pub const SIOUX_FALLS_DEMAND: DemandRange = DemandRange { min: 100.0, max: 600.0 };

/// (from, to, free-flow time) of the Nguyen-Dupuis links.
const NGUYEN_LINKS: [(NodeId, NodeId, f64); 19] = [
    (1, 5, 7.0),
    (1, 12, 9.0),
    (4, 5, 9.0),
    (4, 9, 12.0),
    (5, 6, 3.0),
    (5, 9, 9.0),
    (6, 7, 5.0),
    (6, 10, 13.0),
    (7, 8, 5.0),
    (7, 11, 9.0),
    (8, 2, 9.0),
    (9, 10, 10.0),
    (9, 13, 9.0),
    (10, 11, 6.0),
    (11, 2, 9.0),
    (11, 3, 8.0),
    (12, 6, 7.0),
    (12, 8, 14.0),
    (13, 3, 11.0),
];

const NGUYEN_CAPACITY: f64 = 400.0;

/// (from, to, capacity, free-flow time) of the Sioux Falls links. Lengths
/// equal free-flow times.
const SIOUX_FALLS_LINKS: [(NodeId, NodeId, f64, f64); 76] = [
    (1, 2, 25900.20064, 6.0),
    (1, 3, 23403.47319, 4.0),
    (2, 1, 25900.20064, 6.0),
    (2, 6, 4958.180928, 5.0),
    (3, 1, 23403.47319, 4.0),
    (3, 4, 17110.52372, 4.0),
    (3, 12, 23403.47319, 4.0),
    (4, 3, 17110.52372, 4.0),
    (4, 5, 17782.7941, 2.0),
    (4, 11, 4908.82673, 6.0),
    (5, 4, 17782.7941, 2.0),
    (5, 6, 4947.995469, 4.0),
    (5, 9, 10000.0, 5.0),
    (6, 2, 4958.180928, 5.0),
    (6, 5, 4947.995469, 4.0),
    (6, 8, 4898.587646, 2.0),
    (7, 8, 7841.81131, 3.0),
    (7, 18, 23403.47319, 2.0),
    (8, 6, 4898.587646, 2.0),
    (8, 7, 7841.81131, 3.0),
    (8, 9, 5050.193156, 10.0),
    (8, 16, 5045.822583, 5.0),
    (9, 5, 10000.0, 5.0),
    (9, 8, 5050.193156, 10.0),
    (9, 10, 13915.78842, 3.0),
    (10, 9, 13915.78842, 3.0),
    (10, 11, 10000.0, 5.0),
    (10, 15, 13512.00155, 6.0),
    (10, 16, 4854.917717, 4.0),
    (10, 17, 4993.510694, 8.0),
    (11, 4, 4908.82673, 6.0),
    (11, 10, 10000.0, 5.0),
    (11, 12, 4908.82673, 6.0),
    (11, 14, 4876.508287, 4.0),
    (12, 3, 23403.47319, 4.0),
    (12, 11, 4908.82673, 6.0),
    (12, 13, 25900.20064, 3.0),
    (13, 12, 25900.20064, 3.0),
    (13, 24, 5091.256152, 4.0),
    (14, 11, 4876.508287, 4.0),
    (14, 15, 5127.526119, 5.0),
    (14, 23, 4924.790605, 4.0),
    (15, 10, 13512.00155, 6.0),
    (15, 14, 5127.526119, 5.0),
    (15, 19, 14564.75315, 3.0),
    (15, 22, 9599.180565, 3.0),
    (16, 8, 5045.822583, 5.0),
    (16, 10, 4854.917717, 4.0),
    (16, 17, 5229.910063, 2.0),
    (16, 18, 19679.89671, 3.0),
    (17, 10, 4993.510694, 8.0),
    (17, 16, 5229.910063, 2.0),
    (17, 19, 4823.950831, 2.0),
    (18, 7, 23403.47319, 2.0),
    (18, 16, 19679.89671, 3.0),
    (18, 20, 23403.47319, 4.0),
    (19, 15, 14564.75315, 3.0),
    (19, 17, 4823.950831, 2.0),
    (19, 20, 5002.607563, 4.0),
    (20, 18, 23403.47319, 4.0),
    (20, 19, 5002.607563, 4.0),
    (20, 21, 5059.91234, 6.0),
    (20, 22, 5075.697193, 5.0),
    (21, 20, 5059.91234, 6.0),
    (21, 22, 5229.910063, 2.0),
    (21, 24, 4885.357564, 3.0),
    (22, 15, 9599.180565, 3.0),
    (22, 20, 5075.697193, 5.0),
    (22, 21, 5229.910063, 2.0),
    (22, 23, 5000.0, 4.0),
    (23, 14, 4924.790605, 4.0),
    (23, 22, 5000.0, 4.0),
    (23, 24, 5078.508436, 2.0),
    (24, 13, 5091.256152, 4.0),
    (24, 21, 4885.357564, 3.0),
    (24, 23, 5078.508436, 2.0),
];

fn record(from: NodeId, to: NodeId, capacity: f64, free_time: f64) -> LinkRecord {
    LinkRecord {
        from,
        to,
        capacity,
        length: free_time,
        free_time,
        capacity_av: None,
    }
}

/// Nguyen-Dupuis link table: 13 nodes, 19 links, every link with the same
/// capacity and a length equal to its free-flow time.
pub fn nguyen_dupuis_net() -> NetFile {
    NetFile {
        num_nodes: 13,
        links: NGUYEN_LINKS
            .iter()
            .map(|&(from, to, t)| record(from, to, NGUYEN_CAPACITY, t))
            .collect(),
    }
}

/// Nguyen-Dupuis with demand on 1->2, 1->3, 4->2 and 4->3.
pub fn nguyen_dupuis(seed: u64, demand: DemandRange, params: &ClassParams) -> Result<Network, NetworkError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let trips: Vec<TripRecord> = [(1, 2), (1, 3), (4, 2), (4, 3)]
        .into_iter()
        .map(|(origin, destination)| TripRecord {
            origin,
            destination,
            total: demand.draw(&mut rng),
        })
        .collect();
    build_network(&nguyen_dupuis_net(), &trips, params)
}

pub fn sioux_falls_net() -> NetFile {
    NetFile {
        num_nodes: 24,
        links: SIOUX_FALLS_LINKS
            .iter()
            .map(|&(from, to, cap, t)| record(from, to, cap, t))
            .collect(),
    }
}

pub const SIOUX_FALLS_OD_PAIRS: usize = 528;

/// Sioux Falls with demand on 528 of the 552 ordered pairs of its 24 zones.
/// The 24 pairs left without demand are picked by the seed.
pub fn sioux_falls(seed: u64, demand: DemandRange, params: &ClassParams) -> Result<Network, NetworkError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut pairs = Vec::with_capacity(24 * 23);
    for origin in 1..=24 {
        for destination in 1..=24 {
            if origin != destination {
                pairs.push((origin, destination));
            }
        }
    }
    let mut keep = rand::seq::index::sample(&mut rng, pairs.len(), SIOUX_FALLS_OD_PAIRS).into_vec();
    keep.sort_unstable();
    let trips: Vec<TripRecord> = keep
        .into_iter()
        .map(|i| TripRecord {
            origin: pairs[i].0,
            destination: pairs[i].1,
            total: demand.draw(&mut rng),
        })
        .collect();
    build_network(&sioux_falls_net(), &trips, params)
}

/// Directed grid with `rows x cols` nodes, links pointing right and down,
/// and one OD pair from the top-left to the bottom-right corner. Free-flow
/// times are drawn from `[1, 3)`.
pub fn grid(rows: u32, cols: u32, seed: u64, total_demand: f64, params: &ClassParams) -> Result<Network, NetworkError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let node = |r: u32, c: u32| r * cols + c + 1;
    let mut links = Vec::new();
    for r in 0..rows {
        for c in 0..cols {
            if c + 1 < cols {
                let t = rng.gen_range(1.0..3.0);
                links.push(record(node(r, c), node(r, c + 1), 500.0, t));
            }
            if r + 1 < rows {
                let t = rng.gen_range(1.0..3.0);
                links.push(record(node(r, c), node(r + 1, c), 500.0, t));
            }
        }
    }
    let net = NetFile {
        num_nodes: (rows * cols) as usize,
        links,
    };
    let trips = [TripRecord {
        origin: 1,
        destination: node(rows - 1, cols - 1),
        total: total_demand,
    }];
    build_network(&net, &trips, params)
}
