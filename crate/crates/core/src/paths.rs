//! Loop-free paths, per-(OD, class) path sets, and Yen's k shortest paths.

use std::cmp::Ordering;
use std::collections::{BTreeSet, BinaryHeap, HashMap, HashSet};
use std::fmt::Write as _;
use std::hash::{Hash, Hasher};

use thiserror::Error;

use crate::costs::path_cost;
use crate::network::{Network, NodeId, VehicleClass};

#[derive(Debug, Error, PartialEq)]
pub enum PathError {
    #[error("node {0} is not in the network")]
    UnknownNode(NodeId),
    #[error("no path from {origin} to {destination}")]
    NoPath { origin: NodeId, destination: NodeId },
    #[error("k must be at least 1")]
    ZeroK,
    #[error("link cost {cost} of link {link} is not a positive finite number")]
    BadCost { link: u32, cost: f64 },
    #[error("invalid path: {0}")]
    Invalid(String),
    #[error("no path with key {key} for OD {od} class {class}")]
    UnknownPath {
        od: usize,
        class: VehicleClass,
        key: String,
    },
}

/// A loop-free path, identified by its link sequence.
#[derive(Debug, Clone)]
pub struct Path {
    links: Vec<usize>,
    length: f64,
}

impl PartialEq for Path {
    fn eq(&self, other: &Self) -> bool {
        self.links == other.links
    }
}

impl Eq for Path {}

impl Hash for Path {
    fn hash<H: Hasher>(&self, state: &mut H) {
        self.links.hash(state);
    }
}

impl Path {
    /// Builds a path from dense link indices, checking adjacency and that no
    /// node repeats.
    pub fn new(network: &Network, links: Vec<usize>) -> Result<Path, PathError> {
        if links.is_empty() {
            return Err(PathError::Invalid("path has no links".into()));
        }
        if let Some(&bad) = links.iter().find(|&&a| a >= network.num_links()) {
            return Err(PathError::Invalid(format!("link index {bad} out of range")));
        }
        let mut seen = HashSet::new();
        let (first, _) = network.endpoints(links[0]);
        seen.insert(first);
        let mut at = first;
        for &a in &links {
            let (u, v) = network.endpoints(a);
            if u != at {
                return Err(PathError::Invalid(format!(
                    "link {} does not start where the previous link ends",
                    network.link(a).id
                )));
            }
            if !seen.insert(v) {
                return Err(PathError::Invalid(format!(
                    "node {} is visited twice",
                    network.node_id(v)
                )));
            }
            at = v;
        }
        Ok(Path::new_unchecked(network, links))
    }

    pub(crate) fn new_unchecked(network: &Network, links: Vec<usize>) -> Path {
        let length = links.iter().map(|&a| network.link(a).length).sum();
        Path { links, length }
    }

    /// Builds a path from external link ids.
    pub fn from_link_ids(network: &Network, ids: &[u32]) -> Result<Path, PathError> {
        let links = ids
            .iter()
            .map(|&id| {
                network
                    .link_index_by_id(id)
                    .ok_or_else(|| PathError::Invalid(format!("unknown link id {id}")))
            })
            .collect::<Result<Vec<_>, _>>()?;
        Path::new(network, links)
    }

    /// Dense link indices in travel order.
    pub fn links(&self) -> &[usize] {
        &self.links
    }

    /// Path length in miles.
    pub fn length(&self) -> f64 {
        self.length
    }

    pub fn contains_link(&self, link: usize) -> bool {
        self.links.contains(&link)
    }

    /// Dense node indices visited, origin first.
    pub fn node_indices(&self, network: &Network) -> Vec<usize> {
        let mut nodes = Vec::with_capacity(self.links.len() + 1);
        nodes.push(network.endpoints(self.links[0]).0);
        nodes.extend(self.links.iter().map(|&a| network.endpoints(a).1));
        nodes
    }

    /// External node ids visited, origin first.
    pub fn nodes(&self, network: &Network) -> Vec<NodeId> {
        self.node_indices(network)
            .into_iter()
            .map(|i| network.node_id(i))
            .collect()
    }

    pub fn origin(&self, network: &Network) -> NodeId {
        network.link(self.links[0]).from
    }

    pub fn destination(&self, network: &Network) -> NodeId {
        network.link(*self.links.last().expect("nonempty path")).to
    }

    /// Canonical key: external link ids joined by `-`.
    pub fn key(&self, network: &Network) -> String {
        let mut key = String::new();
        for (i, &a) in self.links.iter().enumerate() {
            if i > 0 {
                key.push('-');
            }
            let _ = write!(key, "{}", network.link(a).id);
        }
        key
    }

    /// Parses a key produced by [`Path::key`].
    pub fn parse_key(network: &Network, key: &str) -> Result<Path, PathError> {
        let ids = key
            .split('-')
            .map(|t| {
                t.trim()
                    .parse::<u32>()
                    .map_err(|_| PathError::Invalid(format!("bad path key '{key}'")))
            })
            .collect::<Result<Vec<_>, _>>()?;
        Path::from_link_ids(network, &ids)
    }
}

/// Per-(OD, class) ordered path collections. Group `g` holds OD `g / 2` and
/// class `g % 2`.
#[derive(Debug, Clone, Default)]
pub struct PathSet {
    groups: Vec<Vec<Path>>,
    keys: Vec<HashMap<Vec<usize>, usize>>,
}

/// Group index of an (OD, class) pair.
pub fn group_index(od: usize, class: VehicleClass) -> usize {
    od * 2 + class.index()
}

impl PathSet {
    pub fn new(num_od: usize) -> PathSet {
        PathSet {
            groups: vec![Vec::new(); num_od * 2],
            keys: vec![HashMap::new(); num_od * 2],
        }
    }

    pub fn num_od(&self) -> usize {
        self.groups.len() / 2
    }

    pub fn num_groups(&self) -> usize {
        self.groups.len()
    }

    pub fn get(&self, od: usize, class: VehicleClass) -> &[Path] {
        &self.groups[group_index(od, class)]
    }

    pub fn group(&self, g: usize) -> &[Path] {
        &self.groups[g]
    }

    pub fn groups(&self) -> &[Vec<Path>] {
        &self.groups
    }

    pub fn total_paths(&self) -> usize {
        self.groups.iter().map(Vec::len).sum()
    }

    /// Appends a path unless its key is already present. Returns whether it
    /// was added.
    pub fn insert(&mut self, od: usize, class: VehicleClass, path: Path) -> bool {
        let g = group_index(od, class);
        if self.keys[g].contains_key(&path.links) {
            return false;
        }
        self.keys[g].insert(path.links.clone(), self.groups[g].len());
        self.groups[g].push(path);
        true
    }

    /// Position of a path within its group.
    pub fn position(&self, od: usize, class: VehicleClass, links: &[usize]) -> Option<usize> {
        self.keys[group_index(od, class)].get(links).copied()
    }

    /// Adds every path of `other` not already present, keeping existing
    /// order. Returns the number of paths added.
    pub fn merge(&mut self, other: &PathSet) -> usize {
        assert_eq!(self.num_od(), other.num_od(), "path sets for different OD tables");
        let mut added = 0;
        for g in 0..other.groups.len() {
            let (od, class) = (g / 2, VehicleClass::from_index(g % 2));
            for path in &other.groups[g] {
                if self.insert(od, class, path.clone()) {
                    added += 1;
                }
            }
        }
        added
    }

    /// Checks that every path of each group joins the OD's endpoints.
    pub fn check_against(&self, network: &Network) -> Result<(), PathError> {
        if self.num_od() != network.od_pairs().len() {
            return Err(PathError::Invalid(format!(
                "path set has {} OD pairs, network has {}",
                self.num_od(),
                network.od_pairs().len()
            )));
        }
        for (g, paths) in self.groups.iter().enumerate() {
            let od = &network.od_pairs()[g / 2];
            for p in paths {
                if p.origin(network) != od.origin || p.destination(network) != od.destination {
                    return Err(PathError::Invalid(format!(
                        "path {} does not join {} -> {}",
                        p.key(network),
                        od.origin,
                        od.destination
                    )));
                }
            }
        }
        Ok(())
    }

    /// One line per path: `od_index class cost node_sequence`, with costs
    /// taken from `link_costs[class]`.
    pub fn dump(&self, network: &Network, link_costs: &[Vec<f64>; 2]) -> String {
        let mut out = String::new();
        for (g, paths) in self.groups.iter().enumerate() {
            let class = VehicleClass::from_index(g % 2);
            for p in paths {
                let nodes: Vec<String> = p.nodes(network).iter().map(|n| n.to_string()).collect();
                let _ = writeln!(
                    out,
                    "{} {} {} {}",
                    g / 2,
                    class,
                    path_cost(p, &link_costs[class.index()]),
                    nodes.join("-")
                );
            }
        }
        out
    }
}

/// Union of two path sets by canonical key, plus the number of keys in
/// `generated` that were absent from `current`.
pub fn merge_path_sets(mut current: PathSet, generated: &PathSet) -> (PathSet, usize) {
    let added = current.merge(generated);
    (current, added)
}

/// Whether `link` lies on the path with link sequence `key` of group (od, class).
pub fn incidence(
    path_set: &PathSet,
    network: &Network,
    od: usize,
    class: VehicleClass,
    key: &[usize],
    link: usize,
) -> Result<bool, PathError> {
    match path_set.position(od, class, key) {
        Some(k) => Ok(path_set.get(od, class)[k].contains_link(link)),
        None => Err(PathError::UnknownPath {
            od,
            class,
            key: Path::new_unchecked(network, key.to_vec()).key(network),
        }),
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct HeapEntry {
    dist: f64,
    node: usize,
}

impl Eq for HeapEntry {}

impl Ord for HeapEntry {
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .dist
            .total_cmp(&self.dist)
            .then_with(|| other.node.cmp(&self.node))
    }
}

impl PartialOrd for HeapEntry {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Shortest path from `source` to `target` avoiding blocked nodes and links.
/// Among equal-cost paths the lexicographically smallest node sequence is
/// returned: distances to `target` are computed backwards, then the path is
/// rebuilt forwards taking the smallest tight successor at every node.
fn spur_path(
    network: &Network,
    costs: &[f64],
    source: usize,
    target: usize,
    blocked_nodes: &[bool],
    blocked_links: &[bool],
) -> Option<Vec<usize>> {
    let n = network.num_nodes();
    let mut dist = vec![f64::INFINITY; n];
    let mut done = vec![false; n];
    let mut heap = BinaryHeap::new();
    dist[target] = 0.0;
    heap.push(HeapEntry {
        dist: 0.0,
        node: target,
    });
    while let Some(HeapEntry { dist: d, node: v }) = heap.pop() {
        if done[v] {
            continue;
        }
        done[v] = true;
        if v == source {
            break;
        }
        for &a in network.in_links(v) {
            if blocked_links[a] {
                continue;
            }
            let (u, _) = network.endpoints(a);
            if blocked_nodes[u] || done[u] {
                continue;
            }
            let nd = d + costs[a];
            if nd < dist[u] {
                dist[u] = nd;
                heap.push(HeapEntry { dist: nd, node: u });
            }
        }
    }
    if !done[source] {
        return None;
    }
    let mut links = Vec::new();
    let mut at = source;
    while at != target {
        let next = network
            .out_links(at)
            .iter()
            .filter(|&&a| !blocked_links[a])
            .filter_map(|&a| {
                let (_, v) = network.endpoints(a);
                (!blocked_nodes[v] && done[v] && costs[a] + dist[v] == dist[at]).then_some((v, a))
            })
            .min_by_key(|&(v, _)| v)?;
        links.push(next.1);
        at = next.0;
    }
    Some(links)
}

#[derive(Debug, Clone, PartialEq)]
struct Candidate {
    cost: f64,
    nodes: Vec<usize>,
    links: Vec<usize>,
}

impl Eq for Candidate {}

impl Ord for Candidate {
    fn cmp(&self, other: &Self) -> Ordering {
        self.cost
            .total_cmp(&other.cost)
            .then_with(|| self.nodes.cmp(&other.nodes))
    }
}

impl PartialOrd for Candidate {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Up to `k` loop-free paths from `origin` to `destination` in nondecreasing
/// cost order (Yen's algorithm). Equal costs are ordered by node sequence.
pub fn yen_k_shortest(
    network: &Network,
    link_costs: &[f64],
    origin: NodeId,
    destination: NodeId,
    k: usize,
) -> Result<Vec<Path>, PathError> {
    if k == 0 {
        return Err(PathError::ZeroK);
    }
    let source = network.node_index(origin).ok_or(PathError::UnknownNode(origin))?;
    let target = network
        .node_index(destination)
        .ok_or(PathError::UnknownNode(destination))?;
    for (a, &c) in link_costs.iter().enumerate().take(network.num_links()) {
        if !(c > 0.0 && c.is_finite()) {
            return Err(PathError::BadCost {
                link: network.link(a).id,
                cost: c,
            });
        }
    }
    if source == target {
        return Err(PathError::NoPath { origin, destination });
    }

    let candidate = |links: Vec<usize>| {
        let cost = links.iter().map(|&a| link_costs[a]).sum();
        let nodes = Path::new_unchecked(network, links.clone()).node_indices(network);
        Candidate { cost, nodes, links }
    };

    let mut blocked_nodes = vec![false; network.num_nodes()];
    let mut blocked_links = vec![false; network.num_links()];
    let first = spur_path(network, link_costs, source, target, &blocked_nodes, &blocked_links)
        .ok_or(PathError::NoPath { origin, destination })?;

    let mut accepted: Vec<Candidate> = vec![candidate(first)];
    let mut seen: HashSet<Vec<usize>> = HashSet::from([accepted[0].links.clone()]);
    let mut pending: BTreeSet<Candidate> = BTreeSet::new();

    while accepted.len() < k {
        let last = accepted.last().expect("at least one path").clone();
        for i in 0..last.links.len() {
            let spur_node = last.nodes[i];
            let root_nodes = &last.nodes[..=i];
            for p in &accepted {
                if p.nodes.len() > i + 1 && p.nodes[..=i] == *root_nodes {
                    blocked_links[p.links[i]] = true;
                }
            }
            for &u in &root_nodes[..i] {
                blocked_nodes[u] = true;
            }
            if let Some(spur) = spur_path(network, link_costs, spur_node, target, &blocked_nodes, &blocked_links) {
                let mut links = last.links[..i].to_vec();
                links.extend(spur);
                if seen.insert(links.clone()) {
                    pending.insert(candidate(links));
                }
            }
            blocked_links.iter_mut().for_each(|b| *b = false);
            blocked_nodes.iter_mut().for_each(|b| *b = false);
        }
        match pending.pop_first() {
            Some(next) => accepted.push(next),
            None => break,
        }
    }

    Ok(accepted
        .into_iter()
        .map(|c| Path::new_unchecked(network, c.links))
        .collect())
}
