//! CSV and JSON writers for solver results.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use anyhow::{anyhow, bail, Context, Result};
use mixflow::diagnostics::format_sig;
use mixflow::paths::group_index;
use mixflow::pga::OuterRow;
use mixflow::solver::ConvergenceTrace;
use mixflow::{Network, PathSet, VehicleClass};
use serde::Serialize;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Serialize)]
pub struct Summary {
    pub schema_version: u32,
    pub command: &'static str,
    pub mode: String,
    pub gap: f64,
    pub iterations: usize,
    pub total_cost: f64,
    pub wall_seconds: f64,
    pub converged: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub outer_iterations: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub total_paths: Option<usize>,
}

pub fn link_flows_csv(network: &Network, link_flows: &[[f64; 2]]) -> String {
    let mut out = String::from("link_id,x_rv,x_av\n");
    for (link, x) in network.links().iter().zip(link_flows) {
        let _ = writeln!(out, "{},{},{}", link.id, format_sig(x[0]), format_sig(x[1]));
    }
    out
}

pub fn path_flows_csv(network: &Network, path_set: &PathSet, path_flows: &[Vec<f64>]) -> String {
    let mut out = String::from("od,class,path_key,flow\n");
    for (g, (paths, flows)) in path_set.groups().iter().zip(path_flows).enumerate() {
        let class = VehicleClass::from_index(g % 2);
        for (path, &f) in paths.iter().zip(flows) {
            let _ = writeln!(out, "{},{},{},{}", g / 2, class, path.key(network), format_sig(f));
        }
    }
    out
}

/// Convergence trace; `millis` is written as 0 when `timing` is off.
pub fn trace_csv(trace: &ConvergenceTrace, timing: bool) -> String {
    let mut out = String::from("n,G,O,TC,beta,gamma,millis\n");
    for r in &trace.rows {
        let millis = if timing { r.millis } else { 0 };
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{}",
            r.n,
            format_sig(r.gap),
            format_sig(r.o),
            format_sig(r.total_cost),
            format_sig(r.beta),
            format_sig(r.gamma),
            millis
        );
    }
    out
}

pub fn outer_trace_csv(rows: &[OuterRow], timing: bool) -> String {
    let mut out = String::from("m,new_paths,TC,E,inner_iters,seconds\n");
    for r in rows {
        let e = r.e.map(format_sig).unwrap_or_default();
        let seconds = if timing { format_sig(r.seconds) } else { "0".to_string() };
        let _ = writeln!(
            out,
            "{},{},{},{},{},{}",
            r.m,
            r.new_paths,
            format_sig(r.total_cost),
            e,
            r.inner_iters,
            seconds
        );
    }
    out
}

/// Writes `files` into `dir`, creating it if needed.
pub fn write_all(dir: &Path, files: &[(&str, String)]) -> Result<()> {
    fs::create_dir_all(dir).with_context(|| format!("cannot create output directory {}", dir.display()))?;
    for (name, content) in files {
        let path = dir.join(name);
        fs::write(&path, content).with_context(|| format!("cannot write {}", path.display()))?;
    }
    Ok(())
}

/// Path set and path flows read back from a path-flow CSV.
pub fn read_path_flows(network: &Network, text: &str, source: &str) -> Result<(PathSet, Vec<Vec<f64>>)> {
    let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
    match lines.next() {
        Some((_, header)) if header.trim() == "od,class,path_key,flow" => {}
        Some((_, header)) => bail!("{source}: unexpected header '{header}'"),
        None => bail!("{source}: empty flows file"),
    }
    let num_od = network.od_pairs().len();
    let mut set = PathSet::new(num_od);
    let mut flows: Vec<Vec<f64>> = vec![Vec::new(); 2 * num_od];
    let mut rows = 0;
    for (i, line) in lines {
        let at = || format!("{source}:{}", i + 1);
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        let [od, class, key, flow] = fields[..] else {
            bail!("{}: expected 4 fields, found {}", at(), fields.len());
        };
        let od: usize = od.parse().map_err(|_| anyhow!("{}: bad OD index '{od}'", at()))?;
        if od >= num_od {
            bail!("{}: OD index {od} out of range (network has {num_od})", at());
        }
        let class: VehicleClass = class.parse().map_err(|e| anyhow!("{}: {e}", at()))?;
        let path = mixflow::Path::parse_key(network, key).with_context(at)?;
        let od_pair = &network.od_pairs()[od];
        if path.origin(network) != od_pair.origin || path.destination(network) != od_pair.destination {
            bail!("{}: path {key} does not join OD {od}", at());
        }
        let flow: f64 = flow.parse().map_err(|_| anyhow!("{}: bad flow '{flow}'", at()))?;
        if !set.insert(od, class, path) {
            bail!("{}: duplicate path {key}", at());
        }
        flows[group_index(od, class)].push(flow);
        rows += 1;
    }
    if rows == 0 {
        bail!("{source}: no path flow rows");
    }
    Ok((set, flows))
}
