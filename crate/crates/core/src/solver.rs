//! Flow-swapping equilibrium iteration over a fixed path set.
//!
//! Every iteration refreshes link flows, link costs, path costs and perceived
//! path costs, then moves flow between the paths of each (OD, class) group
//! along the swapping direction
//!
//! `phi_k = sum_g [ f_g (C_g - C_k)_+^mu - f_k (C_k - C_g)_+^mu ]`
//!
//! with a step `beta` bounded by `1 / h`, where `h` is the largest outflow
//! ratio `-phi_k / f_k`. This bound keeps every path flow nonnegative, and
//! since `phi` sums to zero within a group, OD demand is conserved.
//!
//! Two step rules are available. [`SolverMode::Baseline`] always uses
//! `1 / (h gamma)` with `mu = 1` for both classes. [`SolverMode::Modified`]
//! uses the class swapping degrees and switches to `(1/h) O(n)/O(n-1)` while
//! the total swap volume `O` is shrinking. Both rules are scaled by a damping
//! multiplier that halves whenever `O` grows and recovers slowly otherwise.
//! Without it the iteration can oscillate forever once every path of a group
//! carries flow. Setting `step_damping = 1` disables it.

use std::fmt;
use std::time::Instant;

use rayon::prelude::*;
use thiserror::Error;

use crate::costs::{perceived_cost_av, perceived_cost_rv, ClassParams, LinkState, OverlapStructure, ParamError};
use crate::network::{Network, VehicleClass};
use crate::paths::{PathError, PathSet};

/// Groups are processed in parallel only past this count.
const PARALLEL_GROUPS: usize = 256;

#[derive(Debug, Error)]
pub enum SolveError {
    #[error("OD {od} has positive {class} demand but an empty path set")]
    EmptyPathSet { od: usize, class: VehicleClass },
    #[error("iteration {iteration}: non-finite perceived cost on OD {od} class {class} path {path}")]
    NonFiniteCost {
        iteration: usize,
        od: usize,
        class: VehicleClass,
        path: usize,
    },
    #[error("total weighted cost is {0}; the relative gap is undefined")]
    NonPositiveTotalCost(f64),
    #[error("flow update produced {flow} on OD {od} class {class} path {path}")]
    NegativeFlow {
        od: usize,
        class: VehicleClass,
        path: usize,
        flow: f64,
    },
    #[error("flow state does not match the path set")]
    ShapeMismatch,
    #[error("invalid solver setting {name} = {value}")]
    Config { name: &'static str, value: f64 },
    #[error(transparent)]
    Params(#[from] ParamError),
    #[error(transparent)]
    Paths(#[from] PathError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolverMode {
    Modified,
    Baseline,
}

impl fmt::Display for SolverMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SolverMode::Modified => "modified",
            SolverMode::Baseline => "baseline",
        })
    }
}

impl std::str::FromStr for SolverMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "modified" => Ok(SolverMode::Modified),
            "baseline" => Ok(SolverMode::Baseline),
            other => Err(format!("unknown solver mode '{other}' (expected modified or baseline)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolverConfig {
    /// Stop once the relative gap is at or below this value.
    pub gap_tol: f64,
    /// gamma at the first iteration.
    pub gamma_init: f64,
    /// Added to gamma every iteration after the first.
    pub gamma_growth: f64,
    /// Accepted for configuration compatibility; not used by either step rule.
    pub lambda2: f64,
    pub max_iters: usize,
    pub mode: SolverMode,
    /// Floor on h when no path has outflow.
    pub h_floor: f64,
    /// Factor applied to the damping multiplier whenever O grows.
    pub step_damping: f64,
    /// Factor applied to the damping multiplier (capped at 1) when O does not grow.
    pub damping_recovery: f64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            gap_tol: 1e-4,
            gamma_init: 9.5,
            gamma_growth: 1e-4,
            lambda2: 1e-4,
            max_iters: 10_000,
            mode: SolverMode::Modified,
            h_floor: 1e-10,
            step_damping: 0.5,
            damping_recovery: 1.05,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<(), SolveError> {
        let bad = |name, value| Err(SolveError::Config { name, value });
        if !(self.gap_tol > 0.0) {
            return bad("gap_tol", self.gap_tol);
        }
        if !(self.gamma_init >= 1.0) {
            return bad("gamma_init", self.gamma_init);
        }
        if !(self.gamma_growth >= 0.0) {
            return bad("gamma_growth", self.gamma_growth);
        }
        if self.max_iters == 0 {
            return bad("max_iters", 0.0);
        }
        if !(self.h_floor > 0.0) {
            return bad("h_floor", self.h_floor);
        }
        if !(self.step_damping > 0.0 && self.step_damping <= 1.0) {
            return bad("step_damping", self.step_damping);
        }
        if !(self.damping_recovery >= 1.0) {
            return bad("damping_recovery", self.damping_recovery);
        }
        Ok(())
    }

    fn mu(&self, params: &ClassParams, class: VehicleClass) -> f64 {
        match self.mode {
            SolverMode::Modified => params.mu(class),
            SolverMode::Baseline => 1.0,
        }
    }
}

/// Path flows per group (see [`PathSet`]) and the link flows they induce.
#[derive(Debug, Clone, PartialEq)]
pub struct FlowState {
    pub path_flows: Vec<Vec<f64>>,
    /// `[x_rv, x_av]` per link.
    pub link_flows: Vec<[f64; 2]>,
    pub iteration: usize,
}

impl FlowState {
    /// All-zero flows shaped like `path_set`.
    pub fn zeros(path_set: &PathSet, num_links: usize) -> FlowState {
        FlowState {
            path_flows: path_set.groups().iter().map(|g| vec![0.0; g.len()]).collect(),
            link_flows: vec![[0.0; 2]; num_links],
            iteration: 0,
        }
    }

    /// Recomputes link flows from path flows.
    pub fn refresh_link_flows(&mut self, path_set: &PathSet) {
        self.link_flows.iter_mut().for_each(|x| *x = [0.0; 2]);
        for (g, paths) in path_set.groups().iter().enumerate() {
            let class = g % 2;
            for (path, &f) in paths.iter().zip(&self.path_flows[g]) {
                if f != 0.0 {
                    for &a in path.links() {
                        self.link_flows[a][class] += f;
                    }
                }
            }
        }
    }

    pub fn matches(&self, path_set: &PathSet) -> bool {
        self.path_flows.len() == path_set.num_groups()
            && self
                .path_flows
                .iter()
                .zip(path_set.groups())
                .all(|(f, p)| f.len() == p.len())
    }
}

/// Demand per group, `[od][class]` flattened like [`PathSet`].
pub fn group_demand(network: &Network) -> Vec<f64> {
    network
        .od_pairs()
        .iter()
        .flat_map(|od| VehicleClass::ALL.map(|c| od.demand(c)))
        .collect()
}

/// Spreads each group's demand evenly over its paths.
pub fn init_uniform(network: &Network, path_set: &PathSet) -> Result<FlowState, SolveError> {
    let demand = group_demand(network);
    let mut state = FlowState::zeros(path_set, network.num_links());
    for (g, paths) in path_set.groups().iter().enumerate() {
        let q = demand[g];
        if q > 0.0 {
            if paths.is_empty() {
                return Err(SolveError::EmptyPathSet {
                    od: g / 2,
                    class: VehicleClass::from_index(g % 2),
                });
            }
            let share = q / paths.len() as f64;
            state.path_flows[g].iter_mut().for_each(|f| *f = share);
        }
    }
    state.refresh_link_flows(path_set);
    Ok(state)
}

/// Link states, path costs and perceived path costs at one flow state.
#[derive(Debug, Clone)]
pub struct CostSnapshot {
    pub links: Vec<LinkState>,
    /// Observed path cost per group.
    pub path_costs: Vec<Vec<f64>>,
    /// Perceived path cost per group.
    pub perceived: Vec<Vec<f64>>,
}

/// A network, a path set and class parameters, with the per-group data the
/// cost refresh needs precomputed.
pub struct AssignmentProblem<'a> {
    network: &'a Network,
    path_set: &'a PathSet,
    params: &'a ClassParams,
    demand: Vec<f64>,
    overlaps: Vec<Option<OverlapStructure>>,
}

impl<'a> AssignmentProblem<'a> {
    pub fn new(
        network: &'a Network,
        path_set: &'a PathSet,
        params: &'a ClassParams,
    ) -> Result<AssignmentProblem<'a>, SolveError> {
        params.validate()?;
        path_set.check_against(network)?;
        let demand = group_demand(network);
        for (g, paths) in path_set.groups().iter().enumerate() {
            if demand[g] > 0.0 && paths.is_empty() {
                return Err(SolveError::EmptyPathSet {
                    od: g / 2,
                    class: VehicleClass::from_index(g % 2),
                });
            }
        }
        let overlaps = path_set
            .groups()
            .iter()
            .enumerate()
            .map(|(g, paths)| {
                (g % 2 == VehicleClass::Regular.index() && demand[g] > 0.0)
                    .then(|| OverlapStructure::new(network, paths))
            })
            .collect();
        Ok(AssignmentProblem {
            network,
            path_set,
            params,
            demand,
            overlaps,
        })
    }

    pub fn demand(&self) -> &[f64] {
        &self.demand
    }

    pub fn path_set(&self) -> &PathSet {
        self.path_set
    }

    /// Link costs from the current link flows, then path costs, then
    /// perceived costs, in that order.
    pub fn evaluate(&self, flows: &FlowState) -> CostSnapshot {
        let links: Vec<LinkState> = self
            .network
            .links()
            .iter()
            .zip(&flows.link_flows)
            .map(|(link, x)| LinkState::evaluate(link, x[0], x[1], self.params))
            .collect();
        let link_costs: [Vec<f64>; 2] = [
            links.iter().map(|s| s.cost_rv).collect(),
            links.iter().map(|s| s.cost_av).collect(),
        ];
        let per_group = |g: usize| -> (Vec<f64>, Vec<f64>) {
            let class = VehicleClass::from_index(g % 2);
            let costs = &link_costs[class.index()];
            let path_costs: Vec<f64> = self
                .path_set
                .group(g)
                .iter()
                .map(|p| crate::costs::path_cost(p, costs))
                .collect();
            let perceived = match (&self.overlaps[g], class) {
                (Some(overlap), VehicleClass::Regular) => {
                    let h = overlap.commonality(&path_costs, self.params.theta, self.params.nesting);
                    path_costs
                        .iter()
                        .zip(&h)
                        .zip(&flows.path_flows[g])
                        .map(|((&c, &h), &f)| perceived_cost_rv(f, self.demand[g], c, h, self.params))
                        .collect()
                }
                _ => path_costs.iter().map(|&c| perceived_cost_av(c)).collect(),
            };
            (path_costs, perceived)
        };
        let groups: Vec<(Vec<f64>, Vec<f64>)> = if self.path_set.num_groups() >= PARALLEL_GROUPS {
            (0..self.path_set.num_groups()).into_par_iter().map(per_group).collect()
        } else {
            (0..self.path_set.num_groups()).map(per_group).collect()
        };
        let (path_costs, perceived) = groups.into_iter().unzip();
        CostSnapshot {
            links,
            path_costs,
            perceived,
        }
    }

    fn check_finite(&self, costs: &CostSnapshot, iteration: usize) -> Result<(), SolveError> {
        for (g, group) in costs.perceived.iter().enumerate() {
            if let Some(path) = group.iter().position(|c| !c.is_finite()) {
                return Err(SolveError::NonFiniteCost {
                    iteration,
                    od: g / 2,
                    class: VehicleClass::from_index(g % 2),
                    path,
                });
            }
        }
        Ok(())
    }

    /// Swapping direction for every group.
    pub fn direction(&self, flows: &FlowState, costs: &CostSnapshot, config: &SolverConfig) -> Vec<Vec<f64>> {
        let per_group = |g: usize| {
            let mu = config.mu(self.params, VehicleClass::from_index(g % 2));
            compute_phi(&flows.path_flows[g], &costs.perceived[g], mu)
        };
        if self.path_set.num_groups() >= PARALLEL_GROUPS {
            (0..self.path_set.num_groups()).into_par_iter().map(per_group).collect()
        } else {
            (0..self.path_set.num_groups()).map(per_group).collect()
        }
    }
}

/// Swapping direction of one group: net flow each path receives from
/// costlier paths minus what it sends to cheaper ones.
pub fn compute_phi(flows: &[f64], perceived: &[f64], mu: f64) -> Vec<f64> {
    let n = flows.len();
    let mut phi = vec![0.0; n];
    let pow = |d: f64| if mu == 1.0 { d } else { d.powf(mu) };
    for k in 0..n {
        for g in (k + 1)..n {
            let d = perceived[g] - perceived[k];
            if d > 0.0 {
                // g is costlier: flow moves g -> k
                let m = flows[g] * pow(d);
                phi[k] += m;
                phi[g] -= m;
            } else if d < 0.0 {
                let m = flows[k] * pow(-d);
                phi[g] += m;
                phi[k] -= m;
            }
        }
    }
    phi
}

/// Largest outflow ratio `-phi / f` over paths with flow and nonpositive
/// phi, floored at `h_floor`.
pub fn compute_h(flows: &[Vec<f64>], phi: &[Vec<f64>], h_floor: f64) -> f64 {
    let h = flows
        .iter()
        .zip(phi)
        .flat_map(|(f, p)| f.iter().zip(p))
        .filter(|(&f, &p)| f > 0.0 && p <= 0.0)
        .map(|(&f, &p)| -p / f)
        .fold(f64::NEG_INFINITY, f64::max);
    if h > h_floor {
        h
    } else {
        h_floor
    }
}

/// Total swap volume `sum |phi|`.
pub fn compute_o(phi: &[Vec<f64>]) -> f64 {
    phi.iter().flatten().map(|p| p.abs()).sum()
}

/// State carried between step-size evaluations.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepMemory {
    pub gamma: f64,
    pub o: f64,
    pub damping: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Step {
    pub beta: f64,
    pub gamma: f64,
    pub damping: f64,
}

/// Step size for iteration `n`. `previous` is `None` at the first iteration.
pub fn step_size(h: f64, o: f64, previous: Option<StepMemory>, config: &SolverConfig) -> Step {
    let Some(prev) = previous else {
        let gamma = config.gamma_init;
        return Step {
            beta: 1.0 / (h * gamma),
            gamma,
            damping: 1.0,
        };
    };
    let gamma = prev.gamma + config.gamma_growth;
    let grew = o > prev.o;
    let damping = if grew {
        prev.damping * config.step_damping
    } else {
        (prev.damping * config.damping_recovery).min(1.0)
    };
    let raw = match config.mode {
        SolverMode::Modified if !grew && prev.o > 0.0 => (1.0 / h) * (o / prev.o),
        _ => 1.0 / (h * gamma),
    };
    Step {
        beta: raw * damping,
        gamma,
        damping,
    }
}

/// `f += beta * phi`, clamping rounding-level negatives to zero.
pub fn update_flows(flows: &mut [Vec<f64>], phi: &[Vec<f64>], beta: f64, demand: &[f64]) -> Result<(), SolveError> {
    for (g, (f, p)) in flows.iter_mut().zip(phi).enumerate() {
        let tolerance = 1e-9 * demand[g];
        for (k, (f, &p)) in f.iter_mut().zip(p).enumerate() {
            let next = *f + beta * p;
            if next < 0.0 {
                if next < -tolerance {
                    return Err(SolveError::NegativeFlow {
                        od: g / 2,
                        class: VehicleClass::from_index(g % 2),
                        path: k,
                        flow: next,
                    });
                }
                *f = 0.0;
            } else {
                *f = next;
            }
        }
    }
    Ok(())
}

/// Flow-weighted excess of perceived cost over each group's minimum,
/// relative to the flow-weighted perceived cost.
pub fn relative_gap(flows: &[Vec<f64>], perceived: &[Vec<f64>]) -> Result<f64, SolveError> {
    let mut excess = 0.0;
    let mut total = 0.0;
    for (f, c) in flows.iter().zip(perceived) {
        let Some(min) = c.iter().copied().reduce(f64::min) else {
            continue;
        };
        for (&f, &c) in f.iter().zip(c) {
            excess += f * (c - min);
            total += f * c;
        }
    }
    if total > 0.0 {
        Ok(excess / total)
    } else {
        Err(SolveError::NonPositiveTotalCost(total))
    }
}

/// `sum f * C` over every path.
pub fn total_cost(flows: &[Vec<f64>], perceived: &[Vec<f64>]) -> f64 {
    flows
        .iter()
        .zip(perceived)
        .flat_map(|(f, c)| f.iter().zip(c))
        .map(|(f, c)| f * c)
        .sum()
}

/// One row of the convergence trace.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceRow {
    pub n: usize,
    pub gap: f64,
    pub o: f64,
    pub total_cost: f64,
    pub beta: f64,
    pub gamma: f64,
    pub millis: u64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ConvergenceTrace {
    pub rows: Vec<TraceRow>,
}

#[derive(Debug, Clone)]
pub struct SolveOutcome {
    pub flows: FlowState,
    pub costs: CostSnapshot,
    pub trace: ConvergenceTrace,
    pub converged: bool,
    pub gap: f64,
    pub total_cost: f64,
}

impl SolveOutcome {
    pub fn iterations(&self) -> usize {
        self.trace.rows.last().map_or(0, |r| r.n)
    }
}

/// Solves from the uniform initial assignment.
pub fn solve(
    network: &Network,
    path_set: &PathSet,
    params: &ClassParams,
    config: &SolverConfig,
) -> Result<SolveOutcome, SolveError> {
    let initial = init_uniform(network, path_set)?;
    solve_from(network, path_set, params, config, initial)
}

/// Solves starting from the given path flows.
pub fn solve_from(
    network: &Network,
    path_set: &PathSet,
    params: &ClassParams,
    config: &SolverConfig,
    initial: FlowState,
) -> Result<SolveOutcome, SolveError> {
    config.validate()?;
    let problem = AssignmentProblem::new(network, path_set, params)?;
    if !initial.matches(path_set) || initial.link_flows.len() != network.num_links() {
        return Err(SolveError::ShapeMismatch);
    }
    let start = Instant::now();
    let mut flows = initial;
    let mut memory: Option<StepMemory> = None;
    let mut trace = ConvergenceTrace::default();

    for n in 1..=config.max_iters {
        flows.iteration = n;
        flows.refresh_link_flows(path_set);
        let costs = problem.evaluate(&flows);
        problem.check_finite(&costs, n)?;
        let gap = relative_gap(&flows.path_flows, &costs.perceived)?;
        let tc = total_cost(&flows.path_flows, &costs.perceived);
        let phi = problem.direction(&flows, &costs, config);
        debug_assert!(phi.iter().all(|p| {
            let norm: f64 = p.iter().map(|x| x.abs()).sum();
            p.iter().sum::<f64>().abs() <= 1e-9 * norm.max(f64::MIN_POSITIVE)
        }));
        let h = compute_h(&flows.path_flows, &phi, config.h_floor);
        let o = compute_o(&phi);
        let step = step_size(h, o, memory, config);
        trace.rows.push(TraceRow {
            n,
            gap,
            o,
            total_cost: tc,
            beta: step.beta,
            gamma: step.gamma,
            millis: start.elapsed().as_millis() as u64,
        });
        let converged = gap <= config.gap_tol;
        if converged || n == config.max_iters {
            log::debug!("stopped at iteration {n} with gap {gap:e} (converged: {converged})");
            return Ok(SolveOutcome {
                flows,
                costs,
                trace,
                converged,
                gap,
                total_cost: tc,
            });
        }
        update_flows(&mut flows.path_flows, &phi, step.beta, problem.demand())?;
        memory = Some(StepMemory {
            gamma: step.gamma,
            o,
            damping: step.damping,
        });
    }
    unreachable!("max_iters >= 1 always returns inside the loop")
}
