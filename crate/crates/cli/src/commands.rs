//! Subcommand implementations.

use std::fs;
use std::path::Path;
use std::time::Instant;

use anyhow::{anyhow, bail, Context, Result};
use mixflow::costs::free_flow_costs;
use mixflow::diagnostics::{certify, perceived_costs};
use mixflow::fixtures::{nguyen_dupuis, sioux_falls, NGUYEN_DEMAND, SIOUX_FALLS_DEMAND};
use mixflow::network::{build_network, load_network, parse_net};
use mixflow::paths::yen_k_shortest;
use mixflow::pga::generate_paths;
use mixflow::solver::total_cost;
use mixflow::{pga_solve, Network, VehicleClass};

use crate::config::{Fixture, RunConfig, CONFIG_ENV};
use crate::output::{self, Summary, SCHEMA_VERSION};

/// Process exit status.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Status {
    Converged = 0,
    InputError = 1,
    MaxIterations = 2,
    CheckFailed = 3,
}

/// Builds the run configuration: defaults, then the config file (explicit or
/// from the environment), then overrides.
pub fn load(config: Option<&Path>, overrides: &[String]) -> Result<RunConfig> {
    let mut cfg = RunConfig::default();
    let env_path = std::env::var_os(CONFIG_ENV).filter(|v| !v.is_empty());
    match (config, env_path) {
        (Some(path), _) => cfg.apply_file(path)?,
        (None, Some(path)) => cfg.apply_file(Path::new(&path))?,
        (None, None) => {}
    }
    cfg.apply_overrides(overrides.iter().map(String::as_str))?;
    cfg.validate()?;
    if cfg.threads > 0 {
        rayon::ThreadPoolBuilder::new()
            .num_threads(cfg.threads)
            .build_global()
            .context("cannot size the thread pool")?;
    }
    Ok(cfg)
}

/// The network named by the config. With `require_trips` off, a net file
/// alone gives a network without demand.
fn network(cfg: &RunConfig, require_trips: bool) -> Result<Network> {
    if let Some(fixture) = cfg.fixture {
        let net = match fixture {
            Fixture::Nguyen => nguyen_dupuis(cfg.seed, NGUYEN_DEMAND, &cfg.params)?,
            Fixture::SiouxFalls => sioux_falls(cfg.seed, SIOUX_FALLS_DEMAND, &cfg.params)?,
        };
        return Ok(net);
    }
    let net = cfg
        .net
        .as_ref()
        .ok_or_else(|| anyhow!("no network given: set 'fixture' or 'net' and 'trips'"))?;
    match (&cfg.trips, require_trips) {
        (Some(trips), _) => Ok(load_network(net, trips, &cfg.params)?),
        (None, true) => bail!("no trips file given"),
        (None, false) => {
            let text = fs::read_to_string(net).with_context(|| format!("cannot read {}", net.display()))?;
            let parsed = parse_net(&text, &net.display().to_string())?;
            Ok(build_network(&parsed, &[], &cfg.params)?)
        }
    }
}

fn summary_json(summary: &Summary) -> Result<String> {
    Ok(serde_json::to_string_pretty(summary)? + "\n")
}

fn status(converged: bool) -> Status {
    if converged {
        Status::Converged
    } else {
        Status::MaxIterations
    }
}

pub fn solve(cfg: &RunConfig) -> Result<Status> {
    let start = Instant::now();
    let network = network(cfg, true)?;
    let paths = generate_paths(&network, &free_flow_costs(&network, &cfg.params), cfg.pga.k)?;
    let out = mixflow::solve(&network, &paths, &cfg.params, &cfg.solver)?;
    let wall = if cfg.timing { start.elapsed().as_secs_f64() } else { 0.0 };
    let summary = Summary {
        schema_version: SCHEMA_VERSION,
        command: "solve",
        mode: cfg.solver.mode.to_string(),
        gap: out.gap,
        iterations: out.iterations(),
        total_cost: out.total_cost,
        wall_seconds: wall,
        converged: out.converged,
        outer_iterations: None,
        total_paths: Some(paths.total_paths()),
    };
    output::write_all(
        &cfg.out,
        &[
            (
                "link_flows.csv",
                output::link_flows_csv(&network, &out.flows.link_flows),
            ),
            (
                "path_flows.csv",
                output::path_flows_csv(&network, &paths, &out.flows.path_flows),
            ),
            ("trace.csv", output::trace_csv(&out.trace, cfg.timing)),
            ("summary.json", summary_json(&summary)?),
        ],
    )?;
    eprintln!(
        "solve: gap {:e} after {} iterations, converged: {}",
        out.gap,
        out.iterations(),
        out.converged
    );
    Ok(status(out.converged))
}

pub fn pga(cfg: &RunConfig) -> Result<Status> {
    let start = Instant::now();
    let network = network(cfg, true)?;
    let out = pga_solve(&network, &cfg.params, &cfg.pga, &cfg.solver)?;
    let wall = if cfg.timing { start.elapsed().as_secs_f64() } else { 0.0 };
    let solved = &out.solve;
    let summary = Summary {
        schema_version: SCHEMA_VERSION,
        command: "pga",
        mode: cfg.solver.mode.to_string(),
        gap: solved.gap,
        iterations: solved.iterations(),
        total_cost: solved.total_cost,
        wall_seconds: wall,
        converged: solved.converged,
        outer_iterations: Some(out.outer.len()),
        total_paths: Some(out.path_set.total_paths()),
    };
    let link_costs = [
        solved.costs.links.iter().map(|s| s.cost_rv).collect(),
        solved.costs.links.iter().map(|s| s.cost_av).collect(),
    ];
    output::write_all(
        &cfg.out,
        &[
            (
                "link_flows.csv",
                output::link_flows_csv(&network, &solved.flows.link_flows),
            ),
            (
                "path_flows.csv",
                output::path_flows_csv(&network, &out.path_set, &solved.flows.path_flows),
            ),
            ("trace.csv", output::trace_csv(&solved.trace, cfg.timing)),
            ("outer_trace.csv", output::outer_trace_csv(&out.outer, cfg.timing)),
            ("paths.txt", out.path_set.dump(&network, &link_costs)),
            ("summary.json", summary_json(&summary)?),
        ],
    )?;
    eprintln!(
        "pga: {} outer iterations, {} paths, gap {:e} after {} final iterations, converged: {}",
        out.outer.len(),
        out.path_set.total_paths(),
        solved.gap,
        solved.iterations(),
        solved.converged
    );
    Ok(status(solved.converged))
}

pub fn ksp(cfg: &RunConfig, origin: u32, dest: u32, class: &str) -> Result<Status> {
    let class: VehicleClass = class.parse().map_err(|e: String| anyhow!(e))?;
    let network = network(cfg, false)?;
    let costs = free_flow_costs(&network, &cfg.params);
    let costs = &costs[class.index()];
    let paths = yen_k_shortest(&network, costs, origin, dest, cfg.pga.k)?;
    if paths.is_empty() {
        bail!("no path from {origin} to {dest}");
    }
    println!("rank,cost,nodes");
    for (i, p) in paths.iter().enumerate() {
        let cost: f64 = p.links().iter().map(|&a| costs[a]).sum();
        let nodes: Vec<String> = p.nodes(&network).iter().map(u32::to_string).collect();
        println!("{},{},{}", i + 1, cost, nodes.join("-"));
    }
    Ok(Status::Converged)
}

pub fn check(cfg: &RunConfig, flows_file: &Path) -> Result<Status> {
    let network = network(cfg, true)?;
    let text = fs::read_to_string(flows_file).with_context(|| format!("cannot read {}", flows_file.display()))?;
    let (paths, flows) = output::read_path_flows(&network, &text, &flows_file.display().to_string())?;
    let report = certify(&network, &paths, &cfg.params, &flows)?;
    let tc = total_cost(&flows, &perceived_costs(&network, &paths, &cfg.params, &flows));
    let demand: f64 = network.od_pairs().iter().map(|od| od.total_demand()).sum();
    let relative = report.ncp_residual / tc.abs().max(f64::MIN_POSITIVE);
    let pass = relative <= cfg.check_tol && report.feasibility_violation <= cfg.check_tol * demand;
    print!("{report}");
    println!("total_cost = {tc}");
    println!("relative_residual = {relative}");
    println!("check_tol = {}", cfg.check_tol);
    println!("result = {}", if pass { "pass" } else { "fail" });
    Ok(if pass { Status::Converged } else { Status::CheckFailed })
}
