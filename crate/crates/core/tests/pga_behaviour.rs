mod common;

use common::full_path_set;
use mixflow::costs::free_flow_costs;
use mixflow::diagnostics::flow_deviation;
use mixflow::fixtures::{grid, nguyen_dupuis, sioux_falls, NGUYEN_DEMAND, SIOUX_FALLS_DEMAND};
use mixflow::pga::{generate_paths, PgaConfig};
use mixflow::{pga_solve, solve, ClassParams, SolverConfig, VehicleClass};

fn tight() -> SolverConfig {
    SolverConfig {
        gap_tol: 1e-8,
        max_iters: 100_000,
        ..SolverConfig::default()
    }
}

#[test]
fn saturated_path_set_stops_after_second_iteration() {
    let params = ClassParams::default();
    let network = grid(3, 3, 1, 300.0, &params).unwrap();
    let pga = PgaConfig {
        k: 10,
        ..PgaConfig::default()
    };
    let out = pga_solve(&network, &params, &pga, &SolverConfig::default()).unwrap();
    assert!(out.stable);
    assert_eq!(out.outer.len(), 2);
    assert_eq!(out.outer[0].new_paths, 12);
    assert_eq!(out.outer[1].new_paths, 0);
    assert!(out.outer[0].e.is_none());
    assert!(out.outer[1].e.unwrap().abs() <= pga.outer_tol);
    assert!(out.solve.converged);
}

#[test]
fn huge_tolerance_means_two_outer_iterations() {
    let params = ClassParams::default();
    let network = grid(4, 4, 2, 600.0, &params).unwrap();
    let pga = PgaConfig {
        k: 2,
        outer_tol: 10.0,
        ..PgaConfig::default()
    };
    let out = pga_solve(&network, &params, &pga, &SolverConfig::default()).unwrap();
    assert_eq!(out.outer.len(), 2);
    assert!(out.stable);
}

#[test]
fn path_set_only_grows() {
    let params = ClassParams::default();
    let network = grid(4, 4, 3, 900.0, &params).unwrap();
    let pga = PgaConfig {
        k: 3,
        outer_tol: 1e-6,
        max_outer: 6,
        ..PgaConfig::default()
    };
    let out = pga_solve(&network, &params, &pga, &SolverConfig::default()).unwrap();
    let first = generate_paths(&network, &free_flow_costs(&network, &params), 3).unwrap();
    for class in VehicleClass::ALL {
        for p in first.get(0, class) {
            assert!(out.path_set.position(0, class, p.links()).is_some());
        }
    }
    let added: usize = out.outer.iter().map(|r| r.new_paths).sum();
    assert_eq!(added, out.path_set.total_paths());
    assert!(out.path_set.total_paths() < 2 * 20);
}

#[test]
fn full_enumeration_matches_direct_solve() {
    let params = ClassParams::default();
    let network = nguyen_dupuis(0, NGUYEN_DEMAND, &params).unwrap();
    let pga = PgaConfig {
        k: 12,
        final_gap: 1e-8,
        ..PgaConfig::default()
    };
    let out = pga_solve(&network, &params, &pga, &tight()).unwrap();
    let direct = solve(&network, &full_path_set(&network), &params, &tight()).unwrap();
    assert!(out.solve.converged && direct.converged);
    for (a, b) in out.solve.flows.link_flows.iter().zip(&direct.flows.link_flows) {
        for m in 0..2 {
            assert!((a[m] - b[m]).abs() <= 1e-4 * b[m].max(1.0), "{a:?} vs {b:?}");
        }
    }
    assert!((out.solve.total_cost - direct.total_cost).abs() <= 1e-4 * direct.total_cost);
}

#[test]
fn sioux_falls_deviation_shrinks_with_k() {
    let params = ClassParams::default();
    let network = sioux_falls(3, SIOUX_FALLS_DEMAND, &params).unwrap();
    let solver = SolverConfig {
        max_iters: 5_000,
        ..SolverConfig::default()
    };
    let runs: Vec<Vec<[f64; 2]>> = [5, 10, 20]
        .into_iter()
        .map(|k| {
            let pga = PgaConfig {
                k,
                outer_tol: 2e-3,
                final_gap: 2e-3,
                max_outer: 10,
                ..PgaConfig::default()
            };
            let out = pga_solve(&network, &params, &pga, &solver).unwrap();
            assert!(out.solve.converged);
            out.solve.flows.link_flows
        })
        .collect();
    let reference = runs.last().unwrap();
    for m in 0..2 {
        let rs: Vec<f64> = reference.iter().map(|v| v[m]).collect();
        let devs: Vec<f64> = runs
            .iter()
            .map(|x| flow_deviation(&x.iter().map(|v| v[m]).collect::<Vec<_>>(), &rs).unwrap())
            .collect();
        assert!(devs.windows(2).all(|w| w[1] <= w[0] + 0.01), "class {m}: {devs:?}");
        assert_eq!(devs[2], 0.0);
    }
}
