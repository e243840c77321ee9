//! The five batch commands behind the `junction-lab` binary.
//!
//! Exit-code contract:
//!
//! * `0` - success (all checks below threshold, solver converged)
//! * `1` - configuration or data error; no output files are written
//! * `2` - a solve did not converge, or a check exceeded its threshold
//! * `3` - a convergence study finished with at least one failed row
//!
//! Every command validates the configuration and the data completely before
//! touching the output directory.

use std::path::{Path, PathBuf};

use crate::analysis::{identity_check, run_convergence, solve_eps_problem, StudyOptions};
use crate::config::{load_config, RunConfig};
use crate::geometry::{build_junction_mesh, build_limit_mesh};
use crate::io;
use crate::limit_problem::{assemble_limit, oracle_1d, solve_limit};
use crate::vi_solver::kkt_residual;

pub const EXIT_OK: i32 = 0;
pub const EXIT_CONFIG: i32 = 1;
pub const EXIT_CHECK_FAILED: i32 = 2;
pub const EXIT_PARTIAL: i32 = 3;

fn fail_config(message: impl std::fmt::Display) -> i32 {
    eprintln!("error: {message}");
    EXIT_CONFIG
}

/// Load the config and run every validation that must precede any output.
fn load_and_validate(config_path: &Path) -> Result<RunConfig, i32> {
    let cfg = load_config(config_path).map_err(|e| fail_config(e))?;
    cfg.geometry.validate().map_err(|e| fail_config(e))?;
    let violations = cfg.data.validate(&cfg.geometry);
    if !violations.is_empty() {
        for v in &violations {
            eprintln!("data violation: {v}");
        }
        return Err(EXIT_CONFIG);
    }
    Ok(cfg)
}

fn resolve_out_dir(cfg: &RunConfig, out_override: Option<&Path>) -> PathBuf {
    out_override
        .map(Path::to_path_buf)
        .or_else(|| cfg.output_dir.clone())
        .unwrap_or_else(|| PathBuf::from("out"))
}

fn ensure_dir(dir: &Path) -> Result<(), i32> {
    std::fs::create_dir_all(dir).map_err(|e| {
        eprintln!("error: cannot create output directory {}: {e}", dir.display());
        EXIT_CHECK_FAILED
    })
}

/// Solve the junction problem for the configured single rod count and dump
/// mesh, solution and KKT report.
pub fn cmd_solve_eps(config_path: &Path, out_override: Option<&Path>) -> i32 {
    let cfg = match load_and_validate(config_path) {
        Ok(c) => c,
        Err(code) => return code,
    };
    let solved = solve_eps_problem(&cfg.geometry, &cfg.data, cfg.method, &cfg.solver);
    let (mesh, vi, result) = match solved {
        Ok(t) => t,
        Err(e) => return fail_config(e),
    };
    let out = resolve_out_dir(&cfg, out_override);
    if let Err(code) = ensure_dir(&out) {
        return code;
    }
    let kkt = kkt_residual(&vi, &result.u);
    let write = io::write_mesh(&out, &mesh)
        .and_then(|_| io::write_solution(&out.join("solution.csv"), &mesh, &vi, &result))
        .and_then(|_| io::write_kkt_report(&out.join("kkt.csv"), &kkt, &result));
    if let Err(e) = write {
        eprintln!("error: writing outputs: {e}");
        return EXIT_CHECK_FAILED;
    }
    let u_full = vi.system.expand(&result.u);
    let energy = crate::analysis::energy_eps(&mesh, &u_full);
    println!(
        "solve-eps: N={} nodes={} iterations={} converged={} E_eps={} kkt_max={}",
        cfg.geometry.n_rods,
        mesh.n_nodes(),
        result.iterations,
        result.converged,
        io::fmt_sig(energy),
        io::fmt_sig(kkt.max()),
    );
    if result.converged {
        EXIT_OK
    } else {
        eprintln!("solver did not converge");
        EXIT_CHECK_FAILED
    }
}

/// Solve the limit problem and dump mesh and solution; prints the limit
/// energy.
pub fn cmd_solve_limit(config_path: &Path, out_override: Option<&Path>) -> i32 {
    let cfg = match load_and_validate(config_path) {
        Ok(c) => c,
        Err(code) => return code,
    };
    let mesh = match build_limit_mesh(&cfg.geometry) {
        Ok(m) => m,
        Err(e) => return fail_config(e),
    };
    let vi = match assemble_limit(&mesh, &cfg.data, cfg.geometry.h) {
        Ok(v) => v,
        Err(e) => return fail_config(e),
    };
    let solution = match solve_limit(&vi, &mesh, cfg.method, &cfg.solver) {
        Ok(s) => s,
        Err(e) => return fail_config(e),
    };
    let out = resolve_out_dir(&cfg, out_override);
    if let Err(code) = ensure_dir(&out) {
        return code;
    }
    let write = io::write_mesh(&out, &mesh).and_then(|_| {
        io::write_limit_solution(&out.join("limit_solution.csv"), &mesh, &vi, &solution)
    });
    if let Err(e) = write {
        eprintln!("error: writing outputs: {e}");
        return EXIT_CHECK_FAILED;
    }
    println!(
        "solve-limit: nodes={} iterations={} converged={} E_0={} equality_residual={}",
        mesh.n_nodes(),
        solution.result.iterations,
        solution.result.converged,
        io::fmt_sig(solution.energy),
        io::fmt_sig(solution.equality_residual),
    );
    if solution.result.converged {
        EXIT_OK
    } else {
        eprintln!("solver did not converge");
        EXIT_CHECK_FAILED
    }
}

/// Run the convergence study over `run.n_list` and write `report.csv`.
pub fn cmd_converge(config_path: &Path, out_override: Option<&Path>) -> i32 {
    let cfg = match load_and_validate(config_path) {
        Ok(c) => c,
        Err(code) => return code,
    };
    if cfg.n_list.len() < 2 {
        return fail_config("converge needs run.n_list with at least two entries");
    }
    let opts = StudyOptions {
        method: cfg.method,
        solver: cfg.solver,
        limit_refine: cfg.limit_refine,
        test_functions: cfg.test_functions.clone(),
    };
    let report = match run_convergence(&cfg.geometry, &cfg.n_list, &cfg.data, &opts) {
        Ok(r) => r,
        Err(e) => return fail_config(e),
    };
    let out = resolve_out_dir(&cfg, out_override);
    if let Err(code) = ensure_dir(&out) {
        return code;
    }
    if let Err(e) = io::write_report(&out.join("report.csv"), &report) {
        eprintln!("error: writing report: {e}");
        return EXIT_CHECK_FAILED;
    }
    let mut failed = 0usize;
    for row in &report.rows {
        match &row.failure {
            None => println!(
                "converge: N={} eps={} E_eps={} energy_gap={}",
                row.n_rods,
                io::fmt_sig(row.eps),
                io::fmt_sig(row.e_eps),
                io::fmt_sig(row.energy_gap)
            ),
            Some(msg) => {
                failed += 1;
                println!("converge: N={} FAILED: {msg}", row.n_rods);
            }
        }
    }
    println!("converge: E_0={}", io::fmt_sig(report.limit_energy));
    if failed > 0 {
        EXIT_PARTIAL
    } else {
        EXIT_OK
    }
}

/// Evaluate the rod-side integral identity for every configured field.
pub fn cmd_identity_check(config_path: &Path, _out_override: Option<&Path>) -> i32 {
    let cfg = match load_and_validate(config_path) {
        Ok(c) => c,
        Err(code) => return code,
    };
    if cfg.v_exprs.is_empty() {
        return fail_config("identity-check needs run.v_exprs with at least one expression");
    }
    let mesh = match build_junction_mesh(&cfg.geometry) {
        Ok(m) => m,
        Err(e) => return fail_config(e),
    };
    let mut all_ok = true;
    for (name, v) in &cfg.v_exprs {
        let rep = match identity_check(&mesh, v) {
            Ok(r) => r,
            Err(e) => return fail_config(e),
        };
        let ok = rep.discrepancy <= cfg.threshold;
        all_ok &= ok;
        println!(
            "identity-check: v={name} lhs={} rhs={} discrepancy={} {}",
            io::fmt_sig(rep.lhs),
            io::fmt_sig(rep.rhs),
            io::fmt_sig(rep.discrepancy),
            if ok { "ok" } else { "FAIL" }
        );
    }
    if all_ok {
        EXIT_OK
    } else {
        EXIT_CHECK_FAILED
    }
}

/// Solve the limit problem in 2D and through the 1D reduction, and compare
/// the profiles level by level.
pub fn cmd_oracle_compare(config_path: &Path, out_override: Option<&Path>) -> i32 {
    let cfg = match load_and_validate(config_path) {
        Ok(c) => c,
        Err(code) => return code,
    };
    if !cfg.data.is_x1_independent() {
        return fail_config("oracle-compare needs x1-independent f, g, d");
    }
    // gamma must be a constant for the 1D reduction
    let g0 = cfg.geometry.gamma_at(0.0);
    for i in 0..=64 {
        let x1 = cfg.geometry.a * i as f64 / 64.0;
        if (cfg.geometry.gamma_at(x1) - g0).abs() > 1e-12 * (1.0 + g0.abs()) {
            return fail_config("oracle-compare needs a constant gamma");
        }
    }
    let mesh = match build_limit_mesh(&cfg.geometry) {
        Ok(m) => m,
        Err(e) => return fail_config(e),
    };
    let vi = match assemble_limit(&mesh, &cfg.data, cfg.geometry.h) {
        Ok(v) => v,
        Err(e) => return fail_config(e),
    };
    let solution = match solve_limit(&vi, &mesh, cfg.method, &cfg.solver) {
        Ok(s) => s,
        Err(e) => return fail_config(e),
    };
    if !solution.result.converged {
        eprintln!("2D solve did not converge");
        return EXIT_CHECK_FAILED;
    }
    let oracle = match oracle_1d(g0, cfg.geometry.l, cfg.geometry.h, &cfg.data, cfg.oracle_m) {
        Ok(o) => o,
        Err(e) => return fail_config(e),
    };
    let eval_oracle = |y: f64| -> f64 {
        let k = oracle
            .x2
            .partition_point(|&t| t < y)
            .clamp(1, oracle.x2.len() - 1);
        let (lo, hi) = (oracle.x2[k - 1], oracle.x2[k]);
        let t = ((y - lo) / (hi - lo)).clamp(0.0, 1.0);
        oracle.u[k - 1] * (1.0 - t) + oracle.u[k] * t
    };
    let mut deviation = 0.0f64;
    for (n, p) in mesh.nodes.iter().enumerate() {
        deviation = deviation.max((solution.u[n] - eval_oracle(p[1])).abs());
    }
    let out = resolve_out_dir(&cfg, out_override);
    if let Err(code) = ensure_dir(&out) {
        return code;
    }
    let write = io::write_oracle(&out.join("oracle.csv"), &oracle).and_then(|_| {
        io::write_limit_solution(&out.join("limit_solution.csv"), &mesh, &vi, &solution)
    });
    if let Err(e) = write {
        eprintln!("error: writing outputs: {e}");
        return EXIT_CHECK_FAILED;
    }
    println!(
        "oracle-compare: E_0_2d={} E_0_1d={} max_profile_deviation={} threshold={}",
        io::fmt_sig(solution.energy),
        io::fmt_sig(oracle.energy),
        io::fmt_sig(deviation),
        io::fmt_sig(cfg.threshold),
    );
    if deviation <= cfg.threshold {
        EXIT_OK
    } else {
        EXIT_CHECK_FAILED
    }
}

