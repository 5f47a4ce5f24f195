//! Acceptance suite. Prints one `PASS` or `FAIL` line per criterion and exits
//! nonzero if any criterion fails.

mod common;

use std::time::{Duration, Instant};

use common::{enumerate_paths, full_path_set, overlap_triangle, parallel_routes, random_digraph};
use mixflow::diagnostics::{certify, flow_deviation};
use mixflow::fixtures::{nguyen_dupuis, sioux_falls, NGUYEN_DEMAND, SIOUX_FALLS_DEMAND, SIOUX_FALLS_OD_PAIRS};
use mixflow::paths::yen_k_shortest;
use mixflow::solver::{compute_h, compute_o, init_uniform, step_size, update_flows, AssignmentProblem, StepMemory};
use mixflow::{pga_solve, solve, ClassParams, Network, PathSet, PgaConfig, SolveOutcome, SolverConfig, SolverMode};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Verdict = Result<String, String>;

/// A converged solve kept for the residual criterion.
struct Certified {
    label: String,
    residual: f64,
    bound: f64,
}

#[derive(Default)]
struct Suite {
    certified: Vec<Certified>,
    failures: usize,
}

impl Suite {
    fn record(&mut self, label: &str, network: &Network, paths: &PathSet, params: &ClassParams, out: &SolveOutcome) {
        if !out.converged {
            return;
        }
        let residual = certify(network, paths, params, &out.flows.path_flows)
            .map(|r| r.ncp_residual)
            .unwrap_or(f64::INFINITY);
        self.certified.push(Certified {
            label: label.to_string(),
            residual,
            bound: out.gap * out.total_cost,
        });
    }

    fn report(&mut self, id: &str, title: &str, limit: Option<Duration>, run: impl FnOnce(&mut Self) -> Verdict) {
        let start = Instant::now();
        let mut verdict = run(self);
        let elapsed = start.elapsed();
        if let (Ok(detail), Some(limit)) = (&verdict, limit) {
            if elapsed > limit {
                verdict = Err(format!("{detail}; took {elapsed:.2?}, limit {limit:?}"));
            }
        }
        match verdict {
            Ok(detail) => println!("PASS {id} {title}: {detail} [{elapsed:.2?}]"),
            Err(detail) => {
                self.failures += 1;
                println!("FAIL {id} {title}: {detail} [{elapsed:.2?}]");
            }
        }
    }
}

fn check(ok: bool, detail: String) -> Verdict {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn av_fixed_point(suite: &mut Suite) -> Verdict {
    let (network, paths) = parallel_routes(&[10.0, 11.0, 12.0], 300.0, 0.0, 1500.0);
    let params = ClassParams::default();
    let config = SolverConfig {
        gap_tol: 1e-6,
        ..SolverConfig::default()
    };
    let out = solve(&network, &paths, &params, &config).map_err(|e| e.to_string())?;
    suite.record("C1", &network, &paths, &params, &out);
    let f = &out.flows.path_flows[1];
    let c = &out.costs.path_costs[1];
    let used: Vec<f64> = f
        .iter()
        .zip(c)
        .filter(|(&f, _)| f > 1e-3 * 1500.0)
        .map(|(_, &c)| c)
        .collect();
    let min = used.iter().copied().fold(f64::INFINITY, f64::min);
    let max = used.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let spread = (max - min) / min;
    check(
        out.converged && out.gap <= 1e-6 && used.len() == 3 && spread <= 1e-5,
        format!(
            "G = {:.3e}, {} used paths, cost spread {spread:.3e}",
            out.gap,
            used.len()
        ),
    )
}

fn logit_fixed_point(suite: &mut Suite) -> Verdict {
    let (network, paths) = parallel_routes(&[10.0, 12.0], 5000.0, 600.0, 0.0);
    let params = ClassParams {
        nesting: 1.0,
        ..ClassParams::default()
    };
    let config = SolverConfig {
        gap_tol: 1e-8,
        ..SolverConfig::default()
    };
    let out = solve(&network, &paths, &params, &config).map_err(|e| e.to_string())?;
    suite.record("C2", &network, &paths, &params, &out);
    let c = &out.costs.path_costs[0];
    let weights: Vec<f64> = c.iter().map(|&ck| (-params.theta * (ck - c[0])).exp()).collect();
    let logit = weights[0] / weights.iter().sum::<f64>();
    let share = out.flows.path_flows[0][0] / 600.0;
    check(
        out.converged && (share - logit).abs() <= 0.005,
        format!("share {share:.6}, closed form {logit:.6}"),
    )
}

fn overlap_effect(suite: &mut Suite) -> Verdict {
    let config = SolverConfig {
        gap_tol: 1e-8,
        max_iters: 100_000,
        ..SolverConfig::default()
    };
    let mut shares = Vec::new();
    for nesting in [0.5, 1.0] {
        let (network, paths) = overlap_triangle(300.0);
        let params = ClassParams {
            nesting,
            ..ClassParams::default()
        };
        let out = solve(&network, &paths, &params, &config).map_err(|e| e.to_string())?;
        if !out.converged {
            return Err(format!("u = {nesting} stopped at G = {:.3e}", out.gap));
        }
        suite.record(&format!("C3 u={nesting}"), &network, &paths, &params, &out);
        shares.push(out.flows.path_flows[0][2] / 300.0);
    }
    check(
        shares[0] > 1.0 / 3.0 && (shares[1] - 1.0 / 3.0).abs() <= 0.005,
        format!("disjoint share {:.6} at u = 0.5, {:.6} at u = 1", shares[0], shares[1]),
    )
}

fn conservation(_: &mut Suite) -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let params = ClassParams::default();
    let mut iterations = 0;
    let mut networks = 0;
    let mut worst_demand: f64 = 0.0;
    let mut worst_phi: f64 = 0.0;
    while iterations < 1000 {
        let n = rng.gen_range(3..=10);
        let dag = rng.gen_bool(0.5);
        let demand = (rng.gen_range(0.0..400.0), rng.gen_range(0.0..400.0));
        let Some(network) = random_digraph(&mut rng, n, 0.4, dag, demand) else {
            continue;
        };
        let paths = full_path_set(&network);
        if paths.total_paths() == 0 || paths.total_paths() > 60 {
            continue;
        }
        networks += 1;
        let mode = if networks % 2 == 0 {
            SolverMode::Modified
        } else {
            SolverMode::Baseline
        };
        let config = SolverConfig {
            mode,
            ..SolverConfig::default()
        };
        let problem = AssignmentProblem::new(&network, &paths, &params).map_err(|e| e.to_string())?;
        let mut flows = init_uniform(&network, &paths).map_err(|e| e.to_string())?;
        let mut memory: Option<StepMemory> = None;
        for _ in 0..25 {
            flows.refresh_link_flows(&paths);
            let costs = problem.evaluate(&flows);
            let phi = problem.direction(&flows, &costs, &config);
            for p in &phi {
                let norm: f64 = p.iter().map(|x| x.abs()).sum();
                if norm > 0.0 {
                    worst_phi = worst_phi.max(p.iter().sum::<f64>().abs() / norm);
                }
            }
            let h = compute_h(&flows.path_flows, &phi, config.h_floor);
            let o = compute_o(&phi);
            let step = step_size(h, o, memory, &config);
            update_flows(&mut flows.path_flows, &phi, step.beta, problem.demand()).map_err(|e| e.to_string())?;
            memory = Some(StepMemory {
                gamma: step.gamma,
                o,
                damping: step.damping,
            });
            for (f, &q) in flows.path_flows.iter().zip(problem.demand()) {
                if f.iter().any(|&x| x < 0.0) {
                    return Err(format!("negative flow on network {networks}"));
                }
                if q > 0.0 {
                    worst_demand = worst_demand.max((f.iter().sum::<f64>() - q).abs() / q);
                }
            }
            iterations += 1;
        }
    }
    check(
        worst_demand <= 1e-9 && worst_phi <= 1e-9,
        format!(
            "{iterations} iterations on {networks} networks, demand error {worst_demand:.2e}, phi sum {worst_phi:.2e}"
        ),
    )
}

fn speedup(suite: &mut Suite) -> Verdict {
    let params = ClassParams::default();
    let network = nguyen_dupuis(0, NGUYEN_DEMAND, &params).map_err(|e| e.to_string())?;
    let paths = full_path_set(&network);
    let mut iterations = Vec::new();
    for mode in [SolverMode::Modified, SolverMode::Baseline] {
        let config = SolverConfig {
            mode,
            ..SolverConfig::default()
        };
        let out = solve(&network, &paths, &params, &config).map_err(|e| e.to_string())?;
        if !out.converged {
            return Err(format!("{mode} stopped at G = {:.3e}", out.gap));
        }
        suite.record(&format!("C5 {mode}"), &network, &paths, &params, &out);
        iterations.push(out.iterations());
    }
    check(
        2 * iterations[0] <= iterations[1],
        format!(
            "modified {} vs baseline {} iterations ({:.2}x)",
            iterations[0],
            iterations[1],
            iterations[1] as f64 / iterations[0] as f64
        ),
    )
}

fn yen_correctness(_: &mut Suite) -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let mut graphs = 0;
    let mut compared = 0;
    while graphs < 100 {
        let n = rng.gen_range(2..=8);
        let dag = graphs % 2 == 0;
        let Some(network) = random_digraph(&mut rng, n, 0.45, dag, (1.0, 0.0)) else {
            continue;
        };
        let costs: Vec<f64> = (0..network.num_links()).map(|_| rng.gen_range(1..=9) as f64).collect();
        let k = rng.gen_range(1..=10);
        let expected = enumerate_paths(&network, &costs, 1, n);
        let got = yen_k_shortest(&network, &costs, 1, n, k).map_err(|e| e.to_string())?;
        let matches = got.len() == expected.len().min(k)
            && got
                .iter()
                .zip(&expected)
                .all(|(p, (_, _, links))| p.links() == links.as_slice());
        if !matches {
            return Err(format!("graph {graphs} ({n} nodes, k = {k}) differs from enumeration"));
        }
        compared += got.len();
        graphs += 1;
    }
    Ok(format!("{graphs} graphs, {compared} paths identical to enumeration"))
}

fn pga_consistency(suite: &mut Suite) -> Verdict {
    let params = ClassParams::default();
    let network = nguyen_dupuis(0, NGUYEN_DEMAND, &params).map_err(|e| e.to_string())?;
    let full = full_path_set(&network);
    let most = full.groups().iter().map(Vec::len).max().unwrap_or(0);
    if most > 12 {
        return Err(format!("fixture has {most} paths in one group"));
    }
    let solver = SolverConfig {
        gap_tol: 1e-8,
        max_iters: 100_000,
        ..SolverConfig::default()
    };
    let direct = solve(&network, &full, &params, &solver).map_err(|e| e.to_string())?;
    suite.record("C7 direct", &network, &full, &params, &direct);

    let mut runs = Vec::new();
    for k in [2, 4, 8, 12] {
        let pga = PgaConfig {
            k,
            final_gap: 1e-8,
            ..PgaConfig::default()
        };
        let out = pga_solve(&network, &params, &pga, &solver).map_err(|e| e.to_string())?;
        suite.record(&format!("C7 k={k}"), &network, &out.path_set, &params, &out.solve);
        runs.push(out);
    }
    let last = runs.last().unwrap();
    let mut worst_link: f64 = 0.0;
    for (a, b) in last.solve.flows.link_flows.iter().zip(&direct.flows.link_flows) {
        for m in 0..2 {
            worst_link = worst_link.max((a[m] - b[m]).abs() / b[m].max(1.0));
        }
    }
    let mut devs = Vec::new();
    for run in &runs {
        let mut pair = [0.0; 2];
        for (m, d) in pair.iter_mut().enumerate() {
            let x: Vec<f64> = run.solve.flows.link_flows.iter().map(|v| v[m]).collect();
            let x_ref: Vec<f64> = last.solve.flows.link_flows.iter().map(|v| v[m]).collect();
            *d = flow_deviation(&x, &x_ref).map_err(|e| e.to_string())?;
        }
        devs.push(pair);
    }
    let nonincreasing = devs.windows(2).all(|w| (0..2).all(|m| w[1][m] <= w[0][m] + 0.01));
    let devs_text: Vec<String> = devs.iter().map(|d| format!("{:.4}/{:.4}", d[0], d[1])).collect();
    check(
        direct.converged && last.solve.converged && worst_link <= 1e-4 && nonincreasing,
        format!(
            "link flow error {worst_link:.2e}, dev RV/AV for k = 2, 4, 8, 12: {}",
            devs_text.join(", ")
        ),
    )
}

fn residual_bound(suite: &mut Suite) -> Verdict {
    let mut failing = Vec::new();
    let mut worst: f64 = 0.0;
    for c in &suite.certified {
        let ratio = if c.bound > 0.0 {
            c.residual / c.bound
        } else {
            c.residual
        };
        worst = worst.max(ratio);
        if c.residual > c.bound * (1.0 + 1e-9) {
            failing.push(format!("{} ({:.3e} > {:.3e})", c.label, c.residual, c.bound));
        }
    }
    if suite.certified.is_empty() {
        return Err("no converged solves recorded".to_string());
    }
    check(
        failing.is_empty(),
        format!(
            "{} solves, worst residual / (G TC) = {worst:.9}{}",
            suite.certified.len(),
            if failing.is_empty() {
                String::new()
            } else {
                format!("; failing: {}", failing.join(", "))
            }
        ),
    )
}

fn sioux_falls_smoke(_: &mut Suite) -> Verdict {
    let params = ClassParams::default();
    let network = sioux_falls(0, SIOUX_FALLS_DEMAND, &params).map_err(|e| e.to_string())?;
    if network.num_nodes() != 24 || network.num_links() != 76 || network.od_pairs().len() != SIOUX_FALLS_OD_PAIRS {
        return Err("fixture shape differs from 24 nodes, 76 links, 528 OD pairs".to_string());
    }
    let pga = PgaConfig {
        k: 10,
        final_gap: 0.005,
        ..PgaConfig::default()
    };
    let solver = SolverConfig {
        max_iters: 5_000,
        ..SolverConfig::default()
    };
    let out = pga_solve(&network, &params, &pga, &solver).map_err(|e| e.to_string())?;
    let inner: usize = out.outer.iter().map(|r| r.inner_iters).sum();
    let total = inner + out.solve.iterations();
    check(
        out.solve.converged && out.solve.gap <= 0.005 && total <= 5_000,
        format!(
            "G = {:.3e} after {} final iterations ({total} including {} outer iterations), {} paths",
            out.solve.gap,
            out.solve.iterations(),
            out.outer.len(),
            out.path_set.total_paths()
        ),
    )
}

fn main() {
    let mut suite = Suite::default();
    let secs = Duration::from_secs;
    suite.report(
        "C1",
        "AV equilibrium on three parallel routes",
        Some(secs(1)),
        av_fixed_point,
    );
    suite.report("C2", "RV logit split with u = 1", Some(secs(1)), logit_fixed_point);
    suite.report("C3", "cross-nested overlap effect", None, overlap_effect);
    suite.report("C4", "conservation and nonnegativity", None, conservation);
    suite.report(
        "C5",
        "modified vs baseline speedup on Nguyen-Dupuis",
        Some(secs(30)),
        speedup,
    );
    suite.report(
        "C6",
        "Yen against exhaustive enumeration",
        Some(secs(10)),
        yen_correctness,
    );
    suite.report(
        "C7",
        "PGA consistency on Nguyen-Dupuis",
        Some(secs(60)),
        pga_consistency,
    );
    suite.report("C8", "NCP residual bounded by G TC", None, residual_bound);
    suite.report("C9", "Sioux Falls scale smoke test", Some(secs(300)), sioux_falls_smoke);
    if suite.failures > 0 {
        println!("{} acceptance criteria failed", suite.failures);
        std::process::exit(1);
    }
    println!("all acceptance criteria passed");
}
