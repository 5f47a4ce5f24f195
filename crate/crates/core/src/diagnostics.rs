//! Equilibrium certificate and link-flow comparison metrics.
//!
//! [`certify`] rebuilds link flows, link costs and perceived path costs from
//! path flows alone, without going through the solver, and measures how far
//! the flows are from satisfying the complementarity conditions.

use std::fmt::{self, Write as _};

use thiserror::Error;

use crate::costs::{path_cost, perceived_cost_av, perceived_cost_rv, ClassParams, LinkState, OverlapStructure};
use crate::network::{Network, VehicleClass};
use crate::paths::PathSet;

#[derive(Debug, Error, PartialEq)]
pub enum DiagnosticsError {
    #[error("reference link flows sum to {0}; deviation is undefined")]
    ZeroReference(f64),
    #[error("reference link flows are constant; R-squared is undefined")]
    ConstantReference,
    #[error("vectors differ in length ({0} vs {1})")]
    LengthMismatch(usize, usize),
    #[error("path flows do not match the path set")]
    ShapeMismatch,
}

/// Per-link `[x_rv, x_av]` summed over every path crossing the link.
pub fn link_flows_from_paths(network: &Network, path_set: &PathSet, path_flows: &[Vec<f64>]) -> Vec<[f64; 2]> {
    let mut x = vec![[0.0; 2]; network.num_links()];
    for (g, (paths, flows)) in path_set.groups().iter().zip(path_flows).enumerate() {
        for (path, &f) in paths.iter().zip(flows) {
            for &a in path.links() {
                x[a][g % 2] += f;
            }
        }
    }
    x
}

/// Complementarity measures of a flow pattern.
#[derive(Debug, Clone, PartialEq)]
pub struct EquilibriumReport {
    /// `sum |f (C - C_min)|` over every path.
    pub ncp_residual: f64,
    /// Largest `min(f, C - C_min)` over every path.
    pub max_complementarity_violation: f64,
    /// Demand mismatch plus total negative flow.
    pub feasibility_violation: f64,
    /// Smallest perceived cost per group; `None` for an empty group.
    pub min_cost: Vec<Option<f64>>,
}

impl EquilibriumReport {
    /// Flat `key = value` block.
    pub fn to_key_value(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "ncp_residual = {}", self.ncp_residual);
        let _ = writeln!(
            out,
            "max_complementarity_violation = {}",
            self.max_complementarity_violation
        );
        let _ = writeln!(out, "feasibility_violation = {}", self.feasibility_violation);
        out
    }

    /// `od,class,min_cost` rows, one per nonempty group.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("od,class,min_cost\n");
        for (g, min) in self.min_cost.iter().enumerate() {
            if let Some(min) = min {
                let _ = writeln!(
                    out,
                    "{},{},{}",
                    g / 2,
                    VehicleClass::from_index(g % 2),
                    format_sig(*min)
                );
            }
        }
        out
    }
}

impl fmt::Display for EquilibriumReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_key_value())
    }
}

/// Complementarity report for path flows and perceived costs grouped like a
/// [`PathSet`], with `demand` per group.
pub fn ncp_residual(flows: &[Vec<f64>], perceived: &[Vec<f64>], demand: &[f64]) -> EquilibriumReport {
    let mut residual = 0.0;
    let mut max_violation: f64 = 0.0;
    let mut feasibility = 0.0;
    let mut min_cost = Vec::with_capacity(flows.len());
    for ((f, c), &q) in flows.iter().zip(perceived).zip(demand) {
        let min = c.iter().copied().reduce(f64::min);
        min_cost.push(min);
        feasibility += (f.iter().sum::<f64>() - q).abs();
        feasibility += f.iter().map(|&f| (-f).max(0.0)).sum::<f64>();
        if let Some(min) = min {
            for (&f, &c) in f.iter().zip(c) {
                let excess = c - min;
                residual += (f * excess).abs();
                max_violation = max_violation.max(f.min(excess));
            }
        }
    }
    EquilibriumReport {
        ncp_residual: residual,
        max_complementarity_violation: max_violation,
        feasibility_violation: feasibility,
        min_cost,
    }
}

/// Perceived path costs implied by path flows, computed from scratch.
pub fn perceived_costs(
    network: &Network,
    path_set: &PathSet,
    params: &ClassParams,
    path_flows: &[Vec<f64>],
) -> Vec<Vec<f64>> {
    let x = link_flows_from_paths(network, path_set, path_flows);
    let states: Vec<LinkState> = network
        .links()
        .iter()
        .zip(&x)
        .map(|(link, x)| LinkState::evaluate(link, x[0], x[1], params))
        .collect();
    path_set
        .groups()
        .iter()
        .enumerate()
        .map(|(g, paths)| {
            let class = VehicleClass::from_index(g % 2);
            let costs: Vec<f64> = states.iter().map(|s| s.cost(class)).collect();
            let c: Vec<f64> = paths.iter().map(|p| path_cost(p, &costs)).collect();
            let q = network.od_pairs()[g / 2].demand(class);
            match class {
                VehicleClass::Regular if q > 0.0 => {
                    let h = OverlapStructure::new(network, paths).commonality(&c, params.theta, params.nesting);
                    c.iter()
                        .zip(&h)
                        .zip(&path_flows[g])
                        .map(|((&c, &h), &f)| perceived_cost_rv(f, q, c, h, params))
                        .collect()
                }
                _ => c.into_iter().map(perceived_cost_av).collect(),
            }
        })
        .collect()
}

/// Rebuilds costs from `path_flows` and reports their complementarity
/// measures against the network's demand.
pub fn certify(
    network: &Network,
    path_set: &PathSet,
    params: &ClassParams,
    path_flows: &[Vec<f64>],
) -> Result<EquilibriumReport, DiagnosticsError> {
    if path_flows.len() != path_set.num_groups()
        || path_flows
            .iter()
            .zip(path_set.groups())
            .any(|(f, p)| f.len() != p.len())
    {
        return Err(DiagnosticsError::ShapeMismatch);
    }
    let perceived = perceived_costs(network, path_set, params, path_flows);
    let demand: Vec<f64> = network
        .od_pairs()
        .iter()
        .flat_map(|od| VehicleClass::ALL.map(|c| od.demand(c)))
        .collect();
    Ok(ncp_residual(path_flows, &perceived, &demand))
}

/// `sum |x - x_ref| / sum x_ref`.
pub fn flow_deviation(x: &[f64], x_ref: &[f64]) -> Result<f64, DiagnosticsError> {
    if x.len() != x_ref.len() {
        return Err(DiagnosticsError::LengthMismatch(x.len(), x_ref.len()));
    }
    let total: f64 = x_ref.iter().sum();
    if !(total > 0.0) {
        return Err(DiagnosticsError::ZeroReference(total));
    }
    let diff: f64 = x.iter().zip(x_ref).map(|(a, b)| (a - b).abs()).sum();
    Ok(diff / total)
}

/// Coefficient of determination of `x` against `x_ref`.
pub fn r_squared(x: &[f64], x_ref: &[f64]) -> Result<f64, DiagnosticsError> {
    if x.len() != x_ref.len() {
        return Err(DiagnosticsError::LengthMismatch(x.len(), x_ref.len()));
    }
    if x_ref.is_empty() {
        return Err(DiagnosticsError::ConstantReference);
    }
    let mean = x_ref.iter().sum::<f64>() / x_ref.len() as f64;
    let ss_tot: f64 = x_ref.iter().map(|v| (v - mean).powi(2)).sum();
    if ss_tot == 0.0 {
        return Err(DiagnosticsError::ConstantReference);
    }
    let ss_res: f64 = x.iter().zip(x_ref).map(|(a, b)| (a - b).powi(2)).sum();
    Ok(1.0 - ss_res / ss_tot)
}

/// Formats `x` with six significant digits, `%g` style.
pub fn format_sig(x: f64) -> String {
    const DIGITS: i32 = 6;
    if x == 0.0 {
        return "0".to_string();
    }
    if !x.is_finite() {
        return x.to_string();
    }
    let sci = format!("{:.*e}", (DIGITS - 1) as usize, x);
    let (mantissa, exp) = sci.split_once('e').expect("exponent");
    let exp: i32 = exp.parse().expect("integer exponent");
    if !(-4..DIGITS).contains(&exp) {
        let mantissa = trim_zeros(mantissa);
        let sign = if exp < 0 { '-' } else { '+' };
        format!("{mantissa}e{sign}{:02}", exp.abs())
    } else {
        let decimals = (DIGITS - 1 - exp).max(0) as usize;
        trim_zeros(&format!("{x:.decimals$}")).to_string()
    }
}

fn trim_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn residual_examples() {
        let r = ncp_residual(&[vec![5.0, 5.0]], &[vec![10.0, 12.0]], &[10.0]);
        assert_eq!(r.ncp_residual, 10.0);
        assert_eq!(r.feasibility_violation, 0.0);
        assert_eq!(r.max_complementarity_violation, 2.0);
        assert_eq!(r.min_cost, vec![Some(10.0)]);

        let r = ncp_residual(&[vec![11.0, 0.0]], &[vec![10.0, 12.0]], &[10.0]);
        assert_eq!(r.feasibility_violation, 1.0);
        assert_eq!(r.ncp_residual, 0.0);

        let r = ncp_residual(&[vec![4.0, 6.0]], &[vec![9.0, 9.0]], &[10.0]);
        assert_eq!(
            (r.ncp_residual, r.max_complementarity_violation, r.feasibility_violation),
            (0.0, 0.0, 0.0)
        );
    }

    #[test]
    fn negative_flow_counts_as_infeasible() {
        let r = ncp_residual(&[vec![11.0, -1.0]], &[vec![10.0, 10.0]], &[10.0]);
        assert_eq!(r.feasibility_violation, 1.0);
    }

    #[test]
    fn deviation_examples() {
        assert_eq!(flow_deviation(&[1.0, 2.0], &[1.0, 2.0]).unwrap(), 0.0);
        assert!((flow_deviation(&[10.0, 20.0], &[20.0, 10.0]).unwrap() - 2.0 / 3.0).abs() < 1e-12);
        assert_eq!(
            flow_deviation(&[1.0], &[0.0]),
            Err(DiagnosticsError::ZeroReference(0.0))
        );
        assert_eq!(
            flow_deviation(&[1.0], &[1.0, 2.0]),
            Err(DiagnosticsError::LengthMismatch(1, 2))
        );
        let a = [10.0, 0.0];
        let b = [5.0, 10.0];
        assert_ne!(flow_deviation(&a, &b).unwrap(), flow_deviation(&b, &a).unwrap());
    }

    #[test]
    fn r_squared_examples() {
        let x = [1.0, 4.0, 9.0];
        assert_eq!(r_squared(&x, &x).unwrap(), 1.0);
        let shifted: Vec<f64> = x.iter().map(|v| v + 0.5).collect();
        let mean = 14.0 / 3.0;
        let ss_tot: f64 = x.iter().map(|v| (v - mean) * (v - mean)).sum();
        let expected = 1.0 - 3.0 * 0.25 / ss_tot;
        assert!((r_squared(&shifted, &x).unwrap() - expected).abs() < 1e-12);
        assert_eq!(
            r_squared(&x, &[2.0, 2.0, 2.0]),
            Err(DiagnosticsError::ConstantReference)
        );
    }

    #[test]
    fn sig_formatting() {
        assert_eq!(format_sig(0.0), "0");
        assert_eq!(format_sig(1.0), "1");
        assert_eq!(format_sig(2666.666666), "2666.67");
        assert_eq!(format_sig(123456789.0), "1.23457e+08");
        assert_eq!(format_sig(0.000012345678), "1.23457e-05");
        assert_eq!(format_sig(-0.5), "-0.5");
        assert_eq!(format_sig(100000.0), "100000");
        assert_eq!(format_sig(999999.7), "1e+06");
    }
}
