//! Road network, per-class OD demand, and the TNTP-style text formats.

use std::collections::{HashMap, HashSet, VecDeque};
use std::fmt;
use std::fs;
use std::io;
use std::path::Path as FsPath;
use std::str::FromStr;

use thiserror::Error;

use crate::costs::ClassParams;

/// External node identifier. Internally nodes are addressed by dense 0-based
/// indices in ascending id order.
pub type NodeId = u32;

/// The two user classes sharing the network.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum VehicleClass {
    /// Regular, human-driven vehicles (stochastic cross-nested logit choice).
    Regular,
    /// Autonomous vehicles (deterministic user equilibrium).
    Autonomous,
}

impl VehicleClass {
    pub const ALL: [VehicleClass; 2] = [VehicleClass::Regular, VehicleClass::Autonomous];

    pub fn index(self) -> usize {
        match self {
            VehicleClass::Regular => 0,
            VehicleClass::Autonomous => 1,
        }
    }

    pub fn from_index(index: usize) -> VehicleClass {
        Self::ALL[index]
    }

    pub fn as_str(self) -> &'static str {
        match self {
            VehicleClass::Regular => "rv",
            VehicleClass::Autonomous => "av",
        }
    }
}

impl fmt::Display for VehicleClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for VehicleClass {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "rv" | "regular" => Ok(VehicleClass::Regular),
            "av" | "autonomous" => Ok(VehicleClass::Autonomous),
            other => Err(format!("unknown vehicle class '{other}' (expected rv or av)")),
        }
    }
}

/// A directed road link.
#[derive(Debug, Clone, PartialEq)]
pub struct Link {
    pub id: u32,
    pub from: NodeId,
    pub to: NodeId,
    /// Length in miles.
    pub length: f64,
    /// Free-flow travel time in minutes.
    pub free_time: f64,
    /// Capacity (veh/h) when all traffic is regular vehicles.
    pub cap_rv: f64,
    /// Capacity (veh/h) when all traffic is autonomous vehicles.
    pub cap_av: f64,
}

impl Link {
    pub fn capacity(&self, class: VehicleClass) -> f64 {
        match class {
            VehicleClass::Regular => self.cap_rv,
            VehicleClass::Autonomous => self.cap_av,
        }
    }
}

/// Origin-destination pair with demand (veh/h) per class.
#[derive(Debug, Clone, PartialEq)]
pub struct OdPair {
    pub origin: NodeId,
    pub destination: NodeId,
    pub demand_rv: f64,
    pub demand_av: f64,
}

impl OdPair {
    pub fn demand(&self, class: VehicleClass) -> f64 {
        match class {
            VehicleClass::Regular => self.demand_rv,
            VehicleClass::Autonomous => self.demand_av,
        }
    }

    pub fn total_demand(&self) -> f64 {
        self.demand_rv + self.demand_av
    }
}

#[derive(Debug, Error)]
pub enum NetworkError {
    #[error("{file}:{line}: {message}")]
    Parse { file: String, line: usize, message: String },
    #[error("invalid network: {0}")]
    Invalid(ValidationReport),
    #[error("penetration rate {0} is outside [0, 1]")]
    Penetration(f64),
    #[error("negative total demand {0}")]
    NegativeDemand(f64),
    #[error("unknown node {0}")]
    UnknownNode(NodeId),
    #[error("cannot read {path}")]
    Io {
        path: String,
        #[source]
        source: io::Error,
    },
}

/// One violated network invariant.
#[derive(Debug, Clone, PartialEq)]
pub enum Violation {
    UnknownEndpoint {
        link: u32,
        node: NodeId,
    },
    SelfLoop {
        link: u32,
    },
    NonPositive {
        link: u32,
        field: &'static str,
        value: f64,
    },
    DuplicateLinkId {
        link: u32,
    },
    ParallelLink {
        link: u32,
        from: NodeId,
        to: NodeId,
    },
    OdUnknownNode {
        od: usize,
        node: NodeId,
    },
    OdSameEndpoints {
        od: usize,
        node: NodeId,
    },
    OdBadDemand {
        od: usize,
        origin: NodeId,
        destination: NodeId,
    },
    Unreachable {
        od: usize,
        origin: NodeId,
        destination: NodeId,
    },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::UnknownEndpoint { link, node } => {
                write!(f, "link {link} references unknown node {node}")
            }
            Violation::SelfLoop { link } => write!(f, "link {link} starts and ends at the same node"),
            Violation::NonPositive { link, field, value } => {
                write!(f, "link {link} has nonpositive {field} ({value})")
            }
            Violation::DuplicateLinkId { link } => write!(f, "duplicate link id {link}"),
            Violation::ParallelLink { link, from, to } => {
                write!(f, "link {link} duplicates the ordered pair ({from}, {to})")
            }
            Violation::OdUnknownNode { od, node } => {
                write!(f, "OD {od} references unknown node {node}")
            }
            Violation::OdSameEndpoints { od, node } => {
                write!(f, "OD {od} has origin equal to destination ({node})")
            }
            Violation::OdBadDemand {
                od,
                origin,
                destination,
            } => write!(
                f,
                "OD {od} ({origin} -> {destination}) has negative, non-finite or zero total demand"
            ),
            Violation::Unreachable {
                od,
                origin,
                destination,
            } => write!(
                f,
                "OD {od}: destination {destination} is unreachable from origin {origin}"
            ),
        }
    }
}

/// Every invariant violation found in a network. Empty means valid.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_empty(&self) -> bool {
        self.violations.is_empty()
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.violations.iter().map(|v| v.to_string()).collect();
        f.write_str(&parts.join("; "))
    }
}

/// Immutable road network with OD demand.
#[derive(Debug, Clone)]
pub struct Network {
    nodes: Vec<NodeId>,
    node_index: HashMap<NodeId, usize>,
    links: Vec<Link>,
    od_pairs: Vec<OdPair>,
    out_links: Vec<Vec<usize>>,
    in_links: Vec<Vec<usize>>,
}

impl Network {
    /// Builds and validates a network.
    pub fn new(
        nodes: impl IntoIterator<Item = NodeId>,
        links: Vec<Link>,
        od_pairs: Vec<OdPair>,
    ) -> Result<Network, NetworkError> {
        let network = Network::new_unchecked(nodes, links, od_pairs);
        let report = validate(&network);
        if report.is_empty() {
            Ok(network)
        } else {
            Err(NetworkError::Invalid(report))
        }
    }

    /// Builds a network without checking invariants. Links whose endpoints
    /// are not in `nodes` are kept but left out of the adjacency lists.
    pub fn new_unchecked(nodes: impl IntoIterator<Item = NodeId>, links: Vec<Link>, od_pairs: Vec<OdPair>) -> Network {
        let mut nodes: Vec<NodeId> = nodes.into_iter().collect();
        nodes.sort_unstable();
        nodes.dedup();
        let node_index: HashMap<NodeId, usize> = nodes.iter().enumerate().map(|(i, &n)| (n, i)).collect();
        let mut out_links = vec![Vec::new(); nodes.len()];
        let mut in_links = vec![Vec::new(); nodes.len()];
        for (a, link) in links.iter().enumerate() {
            if let (Some(&u), Some(&v)) = (node_index.get(&link.from), node_index.get(&link.to)) {
                out_links[u].push(a);
                in_links[v].push(a);
            }
        }
        Network {
            nodes,
            node_index,
            links,
            od_pairs,
            out_links,
            in_links,
        }
    }

    pub fn nodes(&self) -> &[NodeId] {
        &self.nodes
    }

    pub fn links(&self) -> &[Link] {
        &self.links
    }

    pub fn link(&self, index: usize) -> &Link {
        &self.links[index]
    }

    pub fn od_pairs(&self) -> &[OdPair] {
        &self.od_pairs
    }

    pub fn num_nodes(&self) -> usize {
        self.nodes.len()
    }

    pub fn num_links(&self) -> usize {
        self.links.len()
    }

    /// Dense index of a node id.
    pub fn node_index(&self, node: NodeId) -> Option<usize> {
        self.node_index.get(&node).copied()
    }

    pub fn node_id(&self, index: usize) -> NodeId {
        self.nodes[index]
    }

    /// Dense indices of the links leaving node index `u`.
    pub fn out_links(&self, u: usize) -> &[usize] {
        &self.out_links[u]
    }

    /// Dense indices of the links entering node index `v`.
    pub fn in_links(&self, v: usize) -> &[usize] {
        &self.in_links[v]
    }

    /// Dense index of the link with the given external id.
    pub fn link_index_by_id(&self, id: u32) -> Option<usize> {
        self.links.iter().position(|l| l.id == id)
    }

    /// Dense node indices (tail, head) of link `a`.
    pub fn endpoints(&self, a: usize) -> (usize, usize) {
        let link = &self.links[a];
        (self.node_index[&link.from], self.node_index[&link.to])
    }

    /// Returns a copy with per-class demand replaced, keeping topology.
    pub fn with_od_pairs(&self, od_pairs: Vec<OdPair>) -> Result<Network, NetworkError> {
        Network::new(self.nodes.iter().copied(), self.links.clone(), od_pairs)
    }

    fn reachable_from(&self, origin: usize) -> Vec<bool> {
        let mut seen = vec![false; self.nodes.len()];
        let mut queue = VecDeque::from([origin]);
        seen[origin] = true;
        while let Some(u) = queue.pop_front() {
            for &a in &self.out_links[u] {
                let v = self.node_index[&self.links[a].to];
                if !seen[v] {
                    seen[v] = true;
                    queue.push_back(v);
                }
            }
        }
        seen
    }
}

/// Lists every violated network invariant.
pub fn validate(network: &Network) -> ValidationReport {
    let mut violations = Vec::new();
    let mut ids = HashSet::new();
    let mut pairs = HashSet::new();
    for link in &network.links {
        for node in [link.from, link.to] {
            if network.node_index(node).is_none() {
                violations.push(Violation::UnknownEndpoint { link: link.id, node });
            }
        }
        if link.from == link.to {
            violations.push(Violation::SelfLoop { link: link.id });
        }
        for (field, value) in [
            ("length", link.length),
            ("free_flow_time", link.free_time),
            ("capacity", link.cap_rv),
            ("capacity_av", link.cap_av),
        ] {
            if !(value > 0.0 && value.is_finite()) {
                violations.push(Violation::NonPositive {
                    link: link.id,
                    field,
                    value,
                });
            }
        }
        if !ids.insert(link.id) {
            violations.push(Violation::DuplicateLinkId { link: link.id });
        }
        if !pairs.insert((link.from, link.to)) {
            violations.push(Violation::ParallelLink {
                link: link.id,
                from: link.from,
                to: link.to,
            });
        }
    }

    let mut reach_cache: HashMap<usize, Vec<bool>> = HashMap::new();
    for (od, pair) in network.od_pairs.iter().enumerate() {
        let o = network.node_index(pair.origin);
        let d = network.node_index(pair.destination);
        for (node, idx) in [(pair.origin, o), (pair.destination, d)] {
            if idx.is_none() {
                violations.push(Violation::OdUnknownNode { od, node });
            }
        }
        if pair.origin == pair.destination {
            violations.push(Violation::OdSameEndpoints { od, node: pair.origin });
        }
        let demands_ok = pair.demand_rv >= 0.0
            && pair.demand_av >= 0.0
            && pair.demand_rv.is_finite()
            && pair.demand_av.is_finite()
            && pair.total_demand() > 0.0;
        if !demands_ok {
            violations.push(Violation::OdBadDemand {
                od,
                origin: pair.origin,
                destination: pair.destination,
            });
        }
        if let (Some(o), Some(d)) = (o, d) {
            if o != d {
                let reach = reach_cache.entry(o).or_insert_with(|| network.reachable_from(o));
                if !reach[d] {
                    violations.push(Violation::Unreachable {
                        od,
                        origin: pair.origin,
                        destination: pair.destination,
                    });
                }
            }
        }
    }
    ValidationReport { violations }
}

/// Splits total OD demand into `(regular, autonomous)` by AV penetration rate.
pub fn split_demand(total: f64, penetration: f64) -> Result<(f64, f64), NetworkError> {
    if !(0.0..=1.0).contains(&penetration) {
        return Err(NetworkError::Penetration(penetration));
    }
    if !(total >= 0.0) {
        return Err(NetworkError::NegativeDemand(total));
    }
    let av = penetration * total;
    let rv = total - av;
    Ok((rv, av))
}

/// One link record as read from a net file, before node validation.
#[derive(Debug, Clone, PartialEq)]
pub struct LinkRecord {
    pub from: NodeId,
    pub to: NodeId,
    pub capacity: f64,
    pub length: f64,
    pub free_time: f64,
    pub capacity_av: Option<f64>,
}

/// Parsed net file.
#[derive(Debug, Clone, PartialEq)]
pub struct NetFile {
    pub num_nodes: usize,
    pub links: Vec<LinkRecord>,
}

fn parse_err(file: &str, line: usize, message: impl Into<String>) -> NetworkError {
    NetworkError::Parse {
        file: file.to_string(),
        line,
        message: message.into(),
    }
}

/// Splits a `<KEY> value` metadata line.
fn metadata(line: &str) -> Option<(&str, &str)> {
    let rest = line.strip_prefix('<')?;
    let end = rest.find('>')?;
    Some((rest[..end].trim(), rest[end + 1..].trim()))
}

fn parse_number<T: FromStr>(file: &str, line: usize, what: &str, token: &str) -> Result<T, NetworkError> {
    token
        .parse()
        .map_err(|_| parse_err(file, line, format!("cannot parse {what} '{token}'")))
}

/// Parses a TNTP net file. A `~` header line naming a `capacity_av` column
/// selects that column as the autonomous-vehicle capacity.
pub fn parse_net(text: &str, file: &str) -> Result<NetFile, NetworkError> {
    let mut num_nodes = None;
    let mut num_links = None;
    let mut in_metadata = true;
    let mut av_column = None;
    let mut links = Vec::new();

    for (i, raw) in text.lines().enumerate() {
        let lineno = i + 1;
        let line = raw.trim();
        if line.is_empty() {
            continue;
        }
        if let Some(header) = line.strip_prefix('~') {
            let names: Vec<&str> = header.split_whitespace().filter(|t| *t != ";").collect();
            if let Some(pos) = names.iter().position(|n| n.eq_ignore_ascii_case("capacity_av")) {
                av_column = Some(pos);
            }
            continue;
        }
        if in_metadata {
            let Some((key, value)) = metadata(line) else {
                return Err(parse_err(file, lineno, "expected <METADATA> line"));
            };
            match key.to_ascii_uppercase().as_str() {
                "NUMBER OF NODES" => num_nodes = Some(parse_number::<usize>(file, lineno, "node count", value)?),
                "NUMBER OF LINKS" => num_links = Some(parse_number::<usize>(file, lineno, "link count", value)?),
                "END OF METADATA" => in_metadata = false,
                _ => {}
            }
            continue;
        }
        let data = line.split('~').next().unwrap_or("");
        let fields: Vec<&str> = data
            .split_whitespace()
            .filter(|t| *t != ";")
            .map(|t| t.trim_end_matches(';'))
            .collect();
        if fields.len() < 5 {
            return Err(parse_err(
                file,
                lineno,
                format!("link record needs at least 5 fields, found {}", fields.len()),
            ));
        }
        let capacity_av = match av_column {
            Some(col) => {
                let token = fields
                    .get(col)
                    .ok_or_else(|| parse_err(file, lineno, format!("missing capacity_av column {}", col + 1)))?;
                Some(parse_number::<f64>(file, lineno, "capacity_av", token)?)
            }
            None => None,
        };
        links.push(LinkRecord {
            from: parse_number(file, lineno, "init_node", fields[0])?,
            to: parse_number(file, lineno, "term_node", fields[1])?,
            capacity: parse_number(file, lineno, "capacity", fields[2])?,
            length: parse_number(file, lineno, "length", fields[3])?,
            free_time: parse_number(file, lineno, "free_flow_time", fields[4])?,
            capacity_av,
        });
    }

    let num_nodes = num_nodes.ok_or_else(|| parse_err(file, 0, "missing <NUMBER OF NODES>"))?;
    if in_metadata {
        return Err(parse_err(file, 0, "missing <END OF METADATA>"));
    }
    if let Some(expected) = num_links {
        if expected != links.len() {
            return Err(parse_err(
                file,
                0,
                format!("<NUMBER OF LINKS> says {expected}, found {} records", links.len()),
            ));
        }
    }
    Ok(NetFile { num_nodes, links })
}

/// One OD entry of a trips file.
#[derive(Debug, Clone, PartialEq)]
pub struct TripRecord {
    pub origin: NodeId,
    pub destination: NodeId,
    pub total: f64,
}

/// Parses a TNTP trips file. Zero flows and intrazonal entries are dropped.
pub fn parse_trips(text: &str, file: &str) -> Result<Vec<TripRecord>, NetworkError> {
    let mut in_metadata = true;
    let mut origin: Option<NodeId> = None;
    let mut trips = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let lineno = i + 1;
        let line = raw.split('~').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        if in_metadata {
            match metadata(line) {
                Some((key, _)) if key.eq_ignore_ascii_case("END OF METADATA") => in_metadata = false,
                Some(_) => {}
                None => return Err(parse_err(file, lineno, "expected <METADATA> line")),
            }
            continue;
        }
        if let Some(rest) = line.strip_prefix("Origin") {
            origin = Some(parse_number(file, lineno, "origin", rest.trim())?);
            continue;
        }
        let Some(o) = origin else {
            return Err(parse_err(file, lineno, "destination entry before any 'Origin' line"));
        };
        for entry in line.split(';') {
            let entry = entry.trim();
            if entry.is_empty() {
                continue;
            }
            let (dest, flow) = entry
                .split_once(':')
                .ok_or_else(|| parse_err(file, lineno, format!("expected 'dest : flow', got '{entry}'")))?;
            let destination: NodeId = parse_number(file, lineno, "destination", dest.trim())?;
            let total: f64 = parse_number(file, lineno, "flow", flow.trim())?;
            if !(total >= 0.0 && total.is_finite()) {
                return Err(parse_err(file, lineno, format!("invalid flow {total}")));
            }
            if total > 0.0 && destination != o {
                trips.push(TripRecord {
                    origin: o,
                    destination,
                    total,
                });
            }
        }
    }
    if in_metadata {
        return Err(parse_err(file, 0, "missing <END OF METADATA>"));
    }
    Ok(trips)
}

/// Assembles a validated network from parsed records. When a link carries no
/// AV capacity, `cap_av = av_capacity_ratio * cap_rv`.
pub fn build_network(net: &NetFile, trips: &[TripRecord], params: &ClassParams) -> Result<Network, NetworkError> {
    let links = net
        .links
        .iter()
        .enumerate()
        .map(|(i, r)| Link {
            id: i as u32 + 1,
            from: r.from,
            to: r.to,
            length: r.length,
            free_time: r.free_time,
            cap_rv: r.capacity,
            cap_av: r.capacity_av.unwrap_or(params.av_capacity_ratio * r.capacity),
        })
        .collect();
    let od_pairs = trips
        .iter()
        .map(|t| {
            let (demand_rv, demand_av) = split_demand(t.total, params.penetration)?;
            Ok(OdPair {
                origin: t.origin,
                destination: t.destination,
                demand_rv,
                demand_av,
            })
        })
        .collect::<Result<Vec<_>, NetworkError>>()?;
    Network::new(1..=net.num_nodes as NodeId, links, od_pairs)
}

fn read(path: &FsPath) -> Result<String, NetworkError> {
    fs::read_to_string(path).map_err(|source| NetworkError::Io {
        path: path.display().to_string(),
        source,
    })
}

/// Reads a net file and a trips file into a validated network.
pub fn load_network(
    net_file: impl AsRef<FsPath>,
    trips_file: impl AsRef<FsPath>,
    params: &ClassParams,
) -> Result<Network, NetworkError> {
    let net_path = net_file.as_ref();
    let trips_path = trips_file.as_ref();
    let net = parse_net(&read(net_path)?, &net_path.display().to_string())?;
    let trips = parse_trips(&read(trips_path)?, &trips_path.display().to_string())?;
    build_network(&net, &trips, params)
}

/// Canonical net file text (always carries the `capacity_av` column).
pub fn format_net(network: &Network) -> String {
    let mut out = String::new();
    let max_node = network.nodes().last().copied().unwrap_or(0);
    out.push_str(&format!("<NUMBER OF NODES> {max_node}\n"));
    out.push_str(&format!("<NUMBER OF LINKS> {}\n", network.num_links()));
    out.push_str("<END OF METADATA>\n\n");
    out.push_str("~\tinit_node\tterm_node\tcapacity\tlength\tfree_flow_time\tcapacity_av\t;\n");
    for link in network.links() {
        out.push_str(&format!(
            "\t{}\t{}\t{}\t{}\t{}\t{}\t;\n",
            link.from, link.to, link.cap_rv, link.length, link.free_time, link.cap_av
        ));
    }
    out
}

/// Canonical trips file text with total (RV + AV) demand per OD.
pub fn format_trips(network: &Network) -> String {
    let zones = network
        .od_pairs()
        .iter()
        .flat_map(|od| [od.origin, od.destination])
        .max()
        .unwrap_or(0);
    let total: f64 = network.od_pairs().iter().map(OdPair::total_demand).sum();
    let mut out = String::new();
    out.push_str(&format!("<NUMBER OF ZONES> {zones}\n"));
    out.push_str(&format!("<TOTAL OD FLOW> {total}\n"));
    out.push_str("<END OF METADATA>\n");
    let mut current: Option<NodeId> = None;
    let mut on_line = 0;
    for od in network.od_pairs() {
        if current != Some(od.origin) {
            if current.is_some() && on_line > 0 {
                out.push('\n');
            }
            out.push_str(&format!("\nOrigin\t{}\n", od.origin));
            current = Some(od.origin);
            on_line = 0;
        }
        out.push_str(&format!("{:>5} : {};", od.destination, od.total_demand()));
        on_line += 1;
        if on_line == 5 {
            out.push('\n');
            on_line = 0;
        }
    }
    if on_line > 0 {
        out.push('\n');
    }
    out
}

/// Writes the canonical net and trips files.
pub fn write_network(
    network: &Network,
    net_file: impl AsRef<FsPath>,
    trips_file: impl AsRef<FsPath>,
) -> io::Result<()> {
    fs::write(net_file, format_net(network))?;
    fs::write(trips_file, format_trips(network))
}
