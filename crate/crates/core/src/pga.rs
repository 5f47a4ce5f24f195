//! Path generation and assignment.
//!
//! Each outer iteration generates the k cheapest paths of every demanded
//! (OD, class) pair from the current link costs, merges them into the
//! working path set and re-solves loosely. Generation stops once total cost
//! changes by a relative amount of at most `outer_tol`, after which a final
//! solve runs to the tight gap.

use std::time::Instant;

use rayon::prelude::*;
use thiserror::Error;

use crate::costs::{free_flow_costs, ClassParams};
use crate::network::{Network, VehicleClass};
use crate::paths::{yen_k_shortest, Path, PathError, PathSet};
use crate::solver::{init_uniform, solve_from, FlowState, SolveError, SolveOutcome, SolverConfig};

#[derive(Debug, Error)]
pub enum PgaError {
    #[error("invalid PGA setting {name} = {value}")]
    Config { name: &'static str, value: f64 },
    #[error("path generation for OD {od} ({class}): {source}")]
    Generation {
        od: usize,
        class: VehicleClass,
        #[source]
        source: PathError,
    },
    #[error(transparent)]
    Solve(#[from] SolveError),
}

#[derive(Debug, Clone, PartialEq)]
pub struct PgaConfig {
    /// Paths generated per (OD, class) and outer iteration.
    pub k: usize,
    /// Stop generating once `|E(m)|` is at or below this value.
    pub outer_tol: f64,
    /// Gap of the inner solve at each outer iteration.
    pub inner_gap: f64,
    /// Gap of the final solve.
    pub final_gap: f64,
    pub max_outer: usize,
}

impl Default for PgaConfig {
    fn default() -> Self {
        PgaConfig {
            k: 5,
            outer_tol: 1e-4,
            inner_gap: 0.1,
            final_gap: 1e-4,
            max_outer: 50,
        }
    }
}

impl PgaConfig {
    pub fn validate(&self) -> Result<(), PgaError> {
        let bad = |name, value| Err(PgaError::Config { name, value });
        if self.k == 0 {
            return bad("k", 0.0);
        }
        if !(self.outer_tol > 0.0) {
            return bad("outer_tol", self.outer_tol);
        }
        if !(self.final_gap > 0.0) {
            return bad("final_gap", self.final_gap);
        }
        if !(self.inner_gap >= self.final_gap) {
            return bad("inner_gap", self.inner_gap);
        }
        if self.max_outer == 0 {
            return bad("max_outer", 0.0);
        }
        Ok(())
    }
}

/// One row of the outer trace.
#[derive(Debug, Clone, PartialEq)]
pub struct OuterRow {
    pub m: usize,
    pub new_paths: usize,
    pub total_cost: f64,
    /// Relative total-cost change; `None` at the first outer iteration.
    pub e: Option<f64>,
    pub inner_iters: usize,
    pub seconds: f64,
}

#[derive(Debug, Clone)]
pub struct PgaOutcome {
    /// The final tight solve.
    pub solve: SolveOutcome,
    pub path_set: PathSet,
    pub outer: Vec<OuterRow>,
    /// Whether the total-cost criterion was met before `max_outer`.
    pub stable: bool,
}

/// The `k` cheapest paths of every (OD, class) pair with positive demand.
pub fn generate_paths(network: &Network, link_costs: &[Vec<f64>; 2], k: usize) -> Result<PathSet, PgaError> {
    let jobs: Vec<(usize, VehicleClass)> = network
        .od_pairs()
        .iter()
        .enumerate()
        .flat_map(|(w, od)| {
            VehicleClass::ALL
                .into_iter()
                .filter(move |&c| od.demand(c) > 0.0)
                .map(move |c| (w, c))
        })
        .collect();
    let generated: Vec<Result<Vec<Path>, PgaError>> = jobs
        .par_iter()
        .map(|&(w, class)| {
            let od = &network.od_pairs()[w];
            yen_k_shortest(network, &link_costs[class.index()], od.origin, od.destination, k)
                .map_err(|source| PgaError::Generation { od: w, class, source })
        })
        .collect();
    let mut set = PathSet::new(network.od_pairs().len());
    for (&(w, class), paths) in jobs.iter().zip(generated) {
        for p in paths? {
            set.insert(w, class, p);
        }
    }
    Ok(set)
}

/// Pads `flows` with zero flow for paths appended to `path_set`.
fn extend_flows(mut flows: FlowState, path_set: &PathSet) -> FlowState {
    for (f, paths) in flows.path_flows.iter_mut().zip(path_set.groups()) {
        f.resize(paths.len(), 0.0);
    }
    flows
}

pub fn pga_solve(
    network: &Network,
    params: &ClassParams,
    pga: &PgaConfig,
    solver: &SolverConfig,
) -> Result<PgaOutcome, PgaError> {
    pga.validate()?;
    params.validate().map_err(SolveError::from)?;
    let inner = SolverConfig {
        gap_tol: pga.inner_gap,
        ..solver.clone()
    };
    let mut path_set = PathSet::new(network.od_pairs().len());
    let mut flows: Option<FlowState> = None;
    let mut link_costs = free_flow_costs(network, params);
    let mut previous_tc: Option<f64> = None;
    let mut outer = Vec::new();
    let mut stable = false;

    for m in 1..=pga.max_outer {
        let start = Instant::now();
        let generated = generate_paths(network, &link_costs, pga.k)?;
        let new_paths = path_set.merge(&generated);
        let initial = match flows.take() {
            None => init_uniform(network, &path_set)?,
            Some(f) => extend_flows(f, &path_set),
        };
        let out = solve_from(network, &path_set, params, &inner, initial)?;
        let tc = out.total_cost;
        let e = previous_tc.map(|prev| (tc - prev) / tc);
        log::info!(
            "outer {m}: {new_paths} new paths, TC {tc:.6}, E {e:?}, {} inner iterations",
            out.iterations()
        );
        outer.push(OuterRow {
            m,
            new_paths,
            total_cost: tc,
            e,
            inner_iters: out.iterations(),
            seconds: start.elapsed().as_secs_f64(),
        });
        link_costs = [
            out.costs.links.iter().map(|s| s.cost_rv).collect(),
            out.costs.links.iter().map(|s| s.cost_av).collect(),
        ];
        flows = Some(out.flows);
        previous_tc = Some(tc);
        if e.is_some_and(|e| e.abs() <= pga.outer_tol) {
            stable = true;
            break;
        }
    }
    if !stable {
        log::warn!(
            "path generation did not stabilise within {} outer iterations",
            pga.max_outer
        );
    }

    let tight = SolverConfig {
        gap_tol: pga.final_gap,
        ..solver.clone()
    };
    let initial = flows.expect("at least one outer iteration");
    let solve = solve_from(network, &path_set, params, &tight, initial)?;
    Ok(PgaOutcome {
        solve,
        path_set,
        outer,
        stable,
    })
}
