//! Link and path cost model.
//!
//! Link travel time is BPR with a mixed capacity that interpolates between
//! the all-RV and all-AV capacities by flow share. The generalized link cost
//! of a class is `time * VOT + fuel_price * fuel`. Regular vehicles perceive
//! a cross-nested logit cost that corrects the path cost for overlap with the
//! other paths of their OD pair. Autonomous vehicles perceive the plain
//! path cost.

use thiserror::Error;

use crate::network::{Link, Network, VehicleClass};
use crate::paths::Path;

/// BPR coefficient.
pub const BPR_ALPHA: f64 = 0.15;
/// BPR exponent.
pub const BPR_POWER: i32 = 4;

const FUEL_DISTANCE_SCALE: f64 = 36.44;
const FUEL_COEFFICIENT: f64 = 14.58;
const FUEL_SPEED_EXPONENT: f64 = -0.625;

/// Behavioural and economic parameters of the two vehicle classes.
#[derive(Debug, Clone, PartialEq)]
pub struct ClassParams {
    /// Value of time of regular vehicles, $/minute.
    pub vot_rv: f64,
    /// Value of time of autonomous vehicles, $/minute.
    pub vot_av: f64,
    /// Fuel price, $/gallon.
    pub fuel_price: f64,
    /// Logit dispersion, 1/$.
    pub theta: f64,
    /// Cross-nested logit nesting coefficient in (0, 1].
    pub nesting: f64,
    /// Flow swapping degree of regular vehicles.
    pub mu_rv: f64,
    /// Flow swapping degree of autonomous vehicles.
    pub mu_av: f64,
    /// Share of total OD demand that is autonomous.
    pub penetration: f64,
    /// AV capacity as a multiple of RV capacity when a link gives only one.
    pub av_capacity_ratio: f64,
    /// Lower clamp on path flow inside the logit log term, veh/h.
    pub flow_floor: f64,
}

impl Default for ClassParams {
    fn default() -> Self {
        ClassParams {
            vot_rv: 1.0,
            vot_av: 0.5,
            fuel_price: 5.5,
            theta: 0.1,
            nesting: 0.5,
            mu_rv: 0.85,
            mu_av: 1.0,
            penetration: 0.5,
            av_capacity_ratio: 2.0,
            flow_floor: 1e-9,
        }
    }
}

#[derive(Debug, Error, PartialEq)]
#[error("invalid class parameter {name} = {value}: {rule}")]
pub struct ParamError {
    pub name: &'static str,
    pub value: f64,
    pub rule: &'static str,
}

impl ClassParams {
    pub fn vot(&self, class: VehicleClass) -> f64 {
        match class {
            VehicleClass::Regular => self.vot_rv,
            VehicleClass::Autonomous => self.vot_av,
        }
    }

    pub fn mu(&self, class: VehicleClass) -> f64 {
        match class {
            VehicleClass::Regular => self.mu_rv,
            VehicleClass::Autonomous => self.mu_av,
        }
    }

    pub fn validate(&self) -> Result<(), ParamError> {
        let check = |ok: bool, name, value, rule| {
            if ok {
                Ok(())
            } else {
                Err(ParamError { name, value, rule })
            }
        };
        check(
            self.theta > 0.0 && self.theta.is_finite(),
            "theta",
            self.theta,
            "must be > 0",
        )?;
        check(
            self.nesting > 0.0 && self.nesting <= 1.0,
            "nesting",
            self.nesting,
            "must lie in (0, 1]",
        )?;
        check(self.vot_av >= 0.0, "vot_av", self.vot_av, "must be >= 0")?;
        check(self.vot_rv >= self.vot_av, "vot_rv", self.vot_rv, "must be >= vot_av")?;
        check(self.fuel_price >= 0.0, "fuel_price", self.fuel_price, "must be >= 0")?;
        check(self.mu_rv > 0.0, "mu_rv", self.mu_rv, "must be > 0")?;
        check(self.mu_av > 0.0, "mu_av", self.mu_av, "must be > 0")?;
        check(
            (0.0..=1.0).contains(&self.penetration),
            "penetration",
            self.penetration,
            "must lie in [0, 1]",
        )?;
        check(
            self.av_capacity_ratio > 0.0,
            "av_capacity_ratio",
            self.av_capacity_ratio,
            "must be > 0",
        )?;
        check(self.flow_floor > 0.0, "flow_floor", self.flow_floor, "must be > 0")
    }
}

/// Flow-share weighted harmonic mean of the two class capacities. With no
/// flow on the link the all-RV capacity is returned.
pub fn mixed_capacity(x_rv: f64, x_av: f64, cap_rv: f64, cap_av: f64) -> f64 {
    let total = x_rv + x_av;
    if total <= 0.0 {
        return cap_rv;
    }
    let inv = (x_rv / total) / cap_rv + (x_av / total) / cap_av;
    let q = 1.0 / inv;
    // rounding can leave q an ulp outside the bracket
    q.clamp(cap_rv.min(cap_av), cap_rv.max(cap_av))
}

/// BPR travel time in minutes.
pub fn link_travel_time(x_rv: f64, x_av: f64, free_time: f64, capacity: f64) -> f64 {
    let ratio = (x_rv + x_av) / capacity;
    free_time * (1.0 + BPR_ALPHA * ratio.powi(BPR_POWER))
}

/// Fuel consumed on a link in gallons, given its length in miles and the
/// travel time in minutes.
pub fn fuel_cost(length: f64, time_minutes: f64) -> f64 {
    let speed_mph = length / (time_minutes / 60.0);
    length / FUEL_DISTANCE_SCALE * (FUEL_COEFFICIENT * speed_mph.powf(FUEL_SPEED_EXPONENT))
}

/// Generalized link cost in $.
pub fn link_generalized_cost(time: f64, fuel: f64, vot: f64, fuel_price: f64) -> f64 {
    time * vot + fuel_price * fuel
}

/// Evaluated state of one link under given class flows.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinkState {
    pub x_rv: f64,
    pub x_av: f64,
    pub mixed_cap: f64,
    pub time: f64,
    pub fuel: f64,
    pub cost_rv: f64,
    pub cost_av: f64,
}

impl LinkState {
    pub fn evaluate(link: &Link, x_rv: f64, x_av: f64, params: &ClassParams) -> LinkState {
        let mixed_cap = mixed_capacity(x_rv, x_av, link.cap_rv, link.cap_av);
        let time = link_travel_time(x_rv, x_av, link.free_time, mixed_cap);
        let fuel = fuel_cost(link.length, time);
        LinkState {
            x_rv,
            x_av,
            mixed_cap,
            time,
            fuel,
            cost_rv: link_generalized_cost(time, fuel, params.vot_rv, params.fuel_price),
            cost_av: link_generalized_cost(time, fuel, params.vot_av, params.fuel_price),
        }
    }

    pub fn cost(&self, class: VehicleClass) -> f64 {
        match class {
            VehicleClass::Regular => self.cost_rv,
            VehicleClass::Autonomous => self.cost_av,
        }
    }
}

/// Per-class link costs at zero flow, indexed `[class][link]`.
pub fn free_flow_costs(network: &Network, params: &ClassParams) -> [Vec<f64>; 2] {
    let states: Vec<LinkState> = network
        .links()
        .iter()
        .map(|l| LinkState::evaluate(l, 0.0, 0.0, params))
        .collect();
    [
        states.iter().map(|s| s.cost_rv).collect(),
        states.iter().map(|s| s.cost_av).collect(),
    ]
}

/// Sum of member-link costs.
pub fn path_cost(path: &Path, link_costs: &[f64]) -> f64 {
    path.links().iter().map(|&a| link_costs[a]).sum()
}

/// Overlap weight of link `link` in `path`: its share of the path length.
pub fn overlap_alpha(network: &Network, link: usize, path: &Path) -> f64 {
    if path.contains_link(link) {
        network.link(link).length / path.length()
    } else {
        0.0
    }
}

/// Numerically stable `ln(sum(exp(v)))`; `-inf` for an empty input.
pub fn log_sum_exp(values: impl IntoIterator<Item = f64> + Clone) -> f64 {
    let max = values.clone().into_iter().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY || max.is_nan() {
        return max;
    }
    if max == f64::INFINITY {
        return max;
    }
    let sum: f64 = values.into_iter().map(|v| (v - max).exp()).sum();
    max + sum.ln()
}

/// Link-overlap structure of one RV path set: the distinct links used by the
/// set and, per path, its links with their overlap weights.
#[derive(Debug, Clone)]
pub struct OverlapStructure {
    /// Per path: (position in the distinct-link list, ln alpha).
    members: Vec<Vec<(usize, f64)>>,
    /// Per distinct link: (path index, ln alpha).
    users: Vec<Vec<(usize, f64)>>,
}

impl OverlapStructure {
    pub fn new(network: &Network, paths: &[Path]) -> OverlapStructure {
        let mut slot = std::collections::HashMap::new();
        let mut users: Vec<Vec<(usize, f64)>> = Vec::new();
        let members = paths
            .iter()
            .enumerate()
            .map(|(k, path)| {
                path.links()
                    .iter()
                    .map(|&a| {
                        let ln_alpha = (network.link(a).length / path.length()).ln();
                        let b = *slot.entry(a).or_insert_with(|| {
                            users.push(Vec::new());
                            users.len() - 1
                        });
                        users[b].push((k, ln_alpha));
                        (b, ln_alpha)
                    })
                    .collect()
            })
            .collect();
        OverlapStructure { members, users }
    }

    pub fn num_paths(&self) -> usize {
        self.members.len()
    }

    /// Commonality term `H_k` of every path, evaluated in the log domain:
    ///
    /// `H_k = ln sum_b alpha_bk^(1/u) * (sum_l (alpha_bl exp(-theta c_l))^(1/u))^(u-1)`
    ///
    /// where `b` runs over links of the path set and `l` over its paths.
    pub fn commonality(&self, costs: &[f64], theta: f64, nesting: f64) -> Vec<f64> {
        debug_assert_eq!(costs.len(), self.members.len());
        if nesting == 1.0 {
            // alpha weights of a path sum to one, so H vanishes identically
            return vec![0.0; self.members.len()];
        }
        let inv_u = 1.0 / nesting;
        let nest_log: Vec<f64> = self
            .users
            .iter()
            .map(|users| log_sum_exp(users.iter().map(|&(l, ln_alpha)| inv_u * (ln_alpha - theta * costs[l]))))
            .collect();
        self.members
            .iter()
            .map(|links| {
                log_sum_exp(
                    links
                        .iter()
                        .map(|&(b, ln_alpha)| inv_u * ln_alpha + (nesting - 1.0) * nest_log[b]),
                )
            })
            .collect()
    }
}

/// Commonality term of path `k` within `paths` given path costs.
pub fn cnl_commonality(network: &Network, k: usize, paths: &[Path], costs: &[f64], params: &ClassParams) -> f64 {
    OverlapStructure::new(network, paths).commonality(costs, params.theta, params.nesting)[k]
}

/// Perceived cross-nested logit path cost of regular vehicles:
/// `c - (u/theta) H + (u/theta) ln(f / q)`, with `f` clamped to the flow floor.
pub fn perceived_cost_rv(flow: f64, demand: f64, cost: f64, commonality: f64, params: &ClassParams) -> f64 {
    let scale = params.nesting / params.theta;
    let f = flow.max(params.flow_floor);
    cost - scale * commonality + scale * (f / demand).ln()
}

/// Perceived path cost of autonomous vehicles is the path cost itself.
pub fn perceived_cost_av(cost: f64) -> f64 {
    cost
}
