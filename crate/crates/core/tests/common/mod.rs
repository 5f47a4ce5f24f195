#![allow(dead_code)]

use mixflow::network::{Link, Network, NodeId, OdPair, VehicleClass};
use mixflow::paths::Path;
use mixflow::PathSet;
use rand::Rng;

/// Origin 1 and destination 2 joined by one two-link route per entry of
/// `times`, each through its own intermediate node. Length equals free time.
pub fn parallel_routes(times: &[f64], cap_rv: f64, demand_rv: f64, demand_av: f64) -> (Network, PathSet) {
    let mut links = Vec::new();
    for (i, &t) in times.iter().enumerate() {
        let mid = 3 + i as NodeId;
        for (j, (from, to)) in [(1, mid), (mid, 2)].into_iter().enumerate() {
            links.push(Link {
                id: (2 * i + j + 1) as u32,
                from,
                to,
                length: t / 2.0,
                free_time: t / 2.0,
                cap_rv,
                cap_av: 2.0 * cap_rv,
            });
        }
    }
    let od = OdPair {
        origin: 1,
        destination: 2,
        demand_rv,
        demand_av,
    };
    let network = Network::new(1..=2 + times.len() as NodeId, links, vec![od]).unwrap();
    let mut paths = PathSet::new(1);
    for i in 0..times.len() {
        for class in VehicleClass::ALL {
            paths.insert(0, class, Path::new(&network, vec![2 * i, 2 * i + 1]).unwrap());
        }
    }
    (network, paths)
}

/// Three RV routes from 1 to 2 of equal length 10 and free time 10: two
/// share their first half (link 1 -> 3), the third is disjoint. Capacities
/// are large enough that costs stay equal.
pub fn overlap_triangle(demand_rv: f64) -> (Network, PathSet) {
    let mk = |id, from, to, l: f64| Link {
        id,
        from,
        to,
        length: l,
        free_time: l,
        cap_rv: 1e7,
        cap_av: 2e7,
    };
    let links = vec![
        mk(1, 1, 3, 5.0),
        mk(2, 3, 4, 2.5),
        mk(3, 4, 2, 2.5),
        mk(4, 3, 5, 2.5),
        mk(5, 5, 2, 2.5),
        mk(6, 1, 6, 5.0),
        mk(7, 6, 2, 5.0),
    ];
    let od = OdPair {
        origin: 1,
        destination: 2,
        demand_rv,
        demand_av: 0.0,
    };
    let network = Network::new(1..=6, links, vec![od]).unwrap();
    let mut paths = PathSet::new(1);
    for l in [vec![0, 1, 2], vec![0, 3, 4], vec![5, 6]] {
        paths.insert(0, VehicleClass::Regular, Path::new(&network, l).unwrap());
    }
    (network, paths)
}

/// Every simple path from `origin` to `destination` as (cost, node indices,
/// link indices), sorted by cost then node sequence.
pub fn enumerate_paths(
    network: &Network,
    costs: &[f64],
    origin: NodeId,
    destination: NodeId,
) -> Vec<(f64, Vec<usize>, Vec<usize>)> {
    let s = network.node_index(origin).unwrap();
    let t = network.node_index(destination).unwrap();
    let mut out = Vec::new();
    let mut nodes = vec![s];
    let mut links = Vec::new();
    let mut on_path = vec![false; network.num_nodes()];
    on_path[s] = true;
    fn walk(
        network: &Network,
        costs: &[f64],
        t: usize,
        nodes: &mut Vec<usize>,
        links: &mut Vec<usize>,
        on_path: &mut [bool],
        out: &mut Vec<(f64, Vec<usize>, Vec<usize>)>,
    ) {
        let u = *nodes.last().unwrap();
        if u == t {
            let cost = links.iter().map(|&a| costs[a]).sum();
            out.push((cost, nodes.clone(), links.clone()));
            return;
        }
        for &a in network.out_links(u) {
            let (_, v) = network.endpoints(a);
            if !on_path[v] {
                on_path[v] = true;
                nodes.push(v);
                links.push(a);
                walk(network, costs, t, nodes, links, on_path, out);
                links.pop();
                nodes.pop();
                on_path[v] = false;
            }
        }
    }
    walk(network, costs, t, &mut nodes, &mut links, &mut on_path, &mut out);
    out.sort_by(|a, b| a.0.total_cmp(&b.0).then_with(|| a.1.cmp(&b.1)));
    out
}

/// Path set holding every simple path of every OD pair for both classes.
pub fn full_path_set(network: &Network) -> PathSet {
    let costs = vec![1.0; network.num_links()];
    let mut set = PathSet::new(network.od_pairs().len());
    for (w, od) in network.od_pairs().iter().enumerate() {
        for (_, _, links) in enumerate_paths(network, &costs, od.origin, od.destination) {
            for class in VehicleClass::ALL {
                if od.demand(class) > 0.0 {
                    set.insert(w, class, Path::new(network, links.clone()).unwrap());
                }
            }
        }
    }
    set
}

/// Random digraph on `n` nodes with unit-length links and one OD pair from
/// node 1 to node `n`. Links only point from lower to higher ids when `dag`.
/// Returns `None` when the destination is unreachable.
pub fn random_digraph<R: Rng>(rng: &mut R, n: u32, density: f64, dag: bool, demand: (f64, f64)) -> Option<Network> {
    let mut links = Vec::new();
    for from in 1..=n {
        for to in 1..=n {
            if from == to || (dag && to < from) {
                continue;
            }
            if rng.gen_bool(density) {
                let t = rng.gen_range(5.0..25.0);
                links.push(Link {
                    id: links.len() as u32 + 1,
                    from,
                    to,
                    length: t,
                    free_time: t,
                    cap_rv: rng.gen_range(50.0..200.0),
                    cap_av: rng.gen_range(200.0..400.0),
                });
            }
        }
    }
    let od = OdPair {
        origin: 1,
        destination: n,
        demand_rv: demand.0,
        demand_av: demand.1,
    };
    Network::new(1..=n, links, vec![od]).ok()
}
