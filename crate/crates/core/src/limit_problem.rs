//! The homogenized limit problem on `Omega_0 union D0`, and an independent
//! one-dimensional transmission oracle for `x1`-independent data.
//!
//! The limit energy couples the full gradient form on the body with the
//! `h`-weighted `x2`-derivative form on `D0`; the load folds the Signorini
//! density into the `D0` volume term as `h f + 2 d`. Continuity across the
//! joint line is enforced by node sharing, the flux condition
//! `d2 u+ = h d2 u-` is natural and never imposed; the flux-jump measurement
//! in the tests is the check that this discretization choice is right.
//!
//! The obstacle acts on every node of the closed rectangle except the
//! Dirichlet bottom: the constraint holds a.e. in `D0`, and continuity of
//! admissible fields extends it to the interface trace, where the datum
//! vanishes. The interface reaction (multiplier on `I0` nodes) is reported,
//! not asserted.

use crate::assembly::{
    apply_dirichlet, assemble_load, assemble_stiffness, AssemblyError, LoadMode, StiffnessMode,
};
use crate::element::ElementGeom;
use crate::geometry::{BoundaryTag, Mesh, MeshKind, Region};
use crate::problem_data::{GMode, ProblemData};
use crate::vi_solver::{
    check_definitions_equivalence, solve_vi, DiscreteVI, Method, SolveError, SolveResult,
    SolverOptions, ViLabel,
};

/// Assemble the limit problem as a discrete VI over the limit mesh.
pub fn assemble_limit(
    mesh: &Mesh,
    data: &ProblemData,
    h: f64,
) -> Result<DiscreteVI, AssemblyError> {
    assert_eq!(mesh.kind, MeshKind::Limit, "limit assembly needs a limit mesh");
    let a = assemble_stiffness(mesh, StiffnessMode::LimitAnisotropic { h })?;
    let b = assemble_load(mesh, data, LoadMode::Limit { h });
    let system = apply_dirichlet(&a, &b, mesh, &[BoundaryTag::Il])?;
    let constraints = match data.g_mode {
        GMode::Unconstrained => Vec::new(),
        GMode::Standard => {
            // every node of the closed rectangle except the Dirichlet bottom
            let mut cs = Vec::new();
            for (n, p) in mesh.nodes.iter().enumerate() {
                if p[1] <= 0.0 {
                    if let Some(red) = system.free_map[n] {
                        cs.push((red, data.g.eval(p[0], p[1])));
                    }
                }
            }
            cs
        }
    };
    Ok(DiscreteVI::new(system, constraints, ViLabel::LimitProblem))
}

/// Solved limit problem with its restrictions split out.
#[derive(Debug, Clone)]
pub struct LimitSolution {
    pub result: SolveResult,
    /// Solution in full node numbering (zeros on the Dirichlet bottom).
    pub u: Vec<f64>,
    /// Nodes with `x2 >= 0` (body side, including the interface).
    pub body_nodes: Vec<usize>,
    /// Nodes with `x2 <= 0` (rectangle side, including the interface).
    pub d0_nodes: Vec<usize>,
    /// Interface nodes on `{x2 = 0}`, ascending in `x1`.
    pub interface_nodes: Vec<usize>,
    /// `u` on the interface nodes. Single-valued by construction (the two
    /// restrictions share these nodes); recorded rather than assumed.
    pub interface_values: Vec<f64>,
    /// Relative residual of the defining integral equality of a weak
    /// solution, checked post-solve.
    pub equality_residual: f64,
    /// `u' A_limit u`.
    pub energy: f64,
}

impl LimitSolution {
    pub fn u_plus(&self) -> Vec<f64> {
        self.body_nodes.iter().map(|&n| self.u[n]).collect()
    }

    pub fn u_minus(&self) -> Vec<f64> {
        self.d0_nodes.iter().map(|&n| self.u[n]).collect()
    }

    /// Worst `u - g` over the constrained nodes (nodal feasibility).
    pub fn max_obstacle_violation(&self, vi: &DiscreteVI) -> f64 {
        vi.constraints
            .iter()
            .map(|&(i, c)| {
                let full = vi.system.free_nodes[i];
                self.u[full] - c
            })
            .fold(0.0f64, f64::max)
    }
}

/// Solve the assembled limit VI and split the restrictions.
pub fn solve_limit(
    vi: &DiscreteVI,
    mesh: &Mesh,
    method: Method,
    opts: &SolverOptions,
) -> Result<LimitSolution, SolveError> {
    let result = solve_vi(vi, method, opts)?;
    let u = vi.system.expand(&result.u);
    let mut body_nodes = Vec::new();
    let mut d0_nodes = Vec::new();
    let mut interface_nodes = Vec::new();
    for (n, p) in mesh.nodes.iter().enumerate() {
        if p[1] >= 0.0 {
            body_nodes.push(n);
        }
        if p[1] <= 0.0 {
            d0_nodes.push(n);
        }
        if p[1] == 0.0 {
            interface_nodes.push(n);
        }
    }
    interface_nodes.sort_by(|&a, &b| mesh.nodes[a][0].total_cmp(&mesh.nodes[b][0]));
    let interface_values = interface_nodes.iter().map(|&n| u[n]).collect();
    let equality = check_definitions_equivalence(vi, &result.u, 0, 0);
    let energy = vi.system.a.bilinear(&result.u, &result.u);
    Ok(LimitSolution {
        result,
        u,
        body_nodes,
        d0_nodes,
        interface_nodes,
        interface_values,
        equality_residual: equality.equality_residual,
        energy,
    })
}

/// Discrete flux jump `|d2 u+ - h d2 u-|` along the interface, recovered
/// from one-sided element gradients at the midpoint of every interface edge.
/// Returns `(x1 midpoint, jump)` pairs.
pub fn interface_flux_jump(mesh: &Mesh, u: &[f64], h: f64) -> Vec<(f64, f64)> {
    assert_eq!(mesh.kind, MeshKind::Limit);
    let s = &mesh.structure;
    let mut jumps = Vec::new();
    for (col, &(body_elem, _)) in mesh.interface_edges.iter().enumerate() {
        // the D0 element directly below shares the interface edge
        let d0_elem = mesh
            .elements
            .iter()
            .position(|e| {
                e.region == Region::D0
                    && e.nodes[3] == mesh.elements[body_elem].nodes[0]
                    && e.nodes[2] == mesh.elements[body_elem].nodes[1]
            })
            .expect("conforming interface");
        let x_mid = 0.5 * (s.xs[col] + s.xs[col + 1]);
        let grad_at = |elem: usize, eta: f64| -> f64 {
            let geom = ElementGeom::new(mesh.element_coords(elem));
            let (grads, _) = geom.physical_grads(0.0, eta);
            mesh.elements[elem]
                .nodes
                .iter()
                .zip(grads.iter())
                .map(|(&n, g)| u[n] * g[1])
                .sum()
        };
        let above = grad_at(body_elem, -1.0);
        let below = grad_at(d0_elem, 1.0);
        jumps.push((x_mid, (above - h * below).abs()));
    }
    jumps
}

#[derive(Debug, Clone, thiserror::Error)]
pub enum OracleError {
    #[error("oracle_1d needs x1-independent f, g, d")]
    DataDependsOnX1,
    #[error("oracle_1d resolution must be >= 4")]
    ResolutionTooCoarse,
    #[error("oracle_1d PSOR did not converge within {0} sweeps")]
    NotConverged(usize),
}

/// Profile and energy of the one-dimensional transmission VI.
#[derive(Debug, Clone)]
pub struct Oracle1d {
    /// Grid ordinates from `-l` to the body height, interface at 0.
    pub x2: Vec<f64>,
    /// Nodal profile (per unit width).
    pub u: Vec<f64>,
    /// `integral_0^b |u'|^2 + h integral_{-l}^0 |u'|^2`, per unit width.
    pub energy: f64,
    /// Nodal activity flags of the obstacle.
    pub active: Vec<bool>,
    pub iterations: usize,
}

/// Solve the 1D reduction of the limit problem on `(-l, b)`:
/// `-u'' = f` above the interface with a free top end, the `h`-weighted rod
/// equation with load `h f + 2 d` and obstacle `u <= g` below, `u(-l) = 0`.
///
/// Deliberately self-contained (its own tridiagonal assembly and projected
/// SOR loop with a near-optimal relaxation factor), so it stays an
/// independent oracle for the 2D path. `m` is the total interval count,
/// split between the two segments in proportion to their lengths.
pub fn oracle_1d(
    body_height: f64,
    l: f64,
    h: f64,
    data: &ProblemData,
    m: usize,
) -> Result<Oracle1d, OracleError> {
    if !data.is_x1_independent() {
        return Err(OracleError::DataDependsOnX1);
    }
    if m < 4 {
        return Err(OracleError::ResolutionTooCoarse);
    }
    let n_rod = (((m as f64) * l / (l + body_height)).round() as usize).clamp(2, m - 2);
    let n_body = m - n_rod;

    // grid with the interface pinned at exactly 0
    let mut x2 = Vec::with_capacity(m + 1);
    let step_rod = l / n_rod as f64;
    x2.push(-l);
    for k in 1..n_rod {
        x2.push(-l + k as f64 * step_rod);
    }
    x2.push(0.0);
    let step_body = body_height / n_body as f64;
    for k in 1..n_body {
        x2.push(k as f64 * step_body);
    }
    x2.push(body_height);

    let f = |y: f64| data.f.eval(0.0, y);
    let d = |y: f64| data.d.eval(0.0, y);
    let g = |y: f64| data.g.eval(0.0, y);

    // tridiagonal stiffness and load over all nodes, node 0 then eliminated
    let n_nodes = m + 1;
    let mut diag = vec![0.0f64; n_nodes];
    let mut off = vec![0.0f64; m]; // off[k] couples nodes k and k+1
    let mut load = vec![0.0f64; n_nodes];
    let gauss = crate::element::gauss1d2();
    for k in 0..m {
        let (lo, hi) = (x2[k], x2[k + 1]);
        let len = hi - lo;
        let kappa = if hi <= 0.0 { h } else { 1.0 };
        diag[k] += kappa / len;
        diag[k + 1] += kappa / len;
        off[k] -= kappa / len;
        for &(xi, w) in &gauss {
            let t = 0.5 * (1.0 + xi);
            let y = lo + t * len;
            let density = if hi <= 0.0 {
                h * f(y) + 2.0 * d(y)
            } else {
                f(y)
            };
            load[k] += w * 0.5 * len * density * (1.0 - t);
            load[k + 1] += w * 0.5 * len * density * t;
        }
    }

    // reduced system: unknowns are nodes 1..=m; bounds on x2 <= 0
    let n = m;
    let b: Vec<f64> = load[1..].to_vec();
    let mut bound = vec![f64::INFINITY; n];
    if data.g_mode == GMode::Standard {
        for k in 1..=n_rod {
            bound[k - 1] = g(x2[k]);
        }
    }
    let a_diag: Vec<f64> = diag[1..].to_vec();
    let a_off: Vec<f64> = off[1..].to_vec(); // a_off[i] couples unknowns i and i+1

    let omega = 2.0 / (1.0 + (std::f64::consts::PI / (n as f64 + 1.0)).sin());
    let tol = 1e-12;
    let b_inf = b.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let diag_inf = a_diag.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let max_iter = 100 * n;

    let mut u = vec![0.0f64; n];
    for i in 0..n {
        u[i] = u[i].min(bound[i]);
    }
    let mut converged = false;
    let mut sweeps = 0;
    let mut small_updates = 0usize;
    while sweeps < max_iter {
        sweeps += 1;
        let mut max_update = 0.0f64;
        let mut max_abs = 0.0f64;
        for i in 0..n {
            let mut sigma = 0.0;
            if i > 0 {
                sigma += a_off[i - 1] * u[i - 1];
            }
            if i + 1 < n {
                sigma += a_off[i] * u[i + 1];
            }
            let gs = (b[i] - sigma) / a_diag[i];
            let next = (u[i] + omega * (gs - u[i])).min(bound[i]);
            max_update = max_update.max((next - u[i]).abs());
            u[i] = next;
            max_abs = max_abs.max(next.abs());
        }
        if max_update < tol * (1.0 + max_abs) {
            small_updates += 1;
        } else {
            small_updates = 0;
        }
        if small_updates >= 3 {
            // residual check: stationarity off the active set, sign on it.
            // The attainable floor scales with |A| eps |u|, so the gate
            // carries that term explicitly.
            let tol_kkt =
                1e-9 * (1.0 + b_inf) + 64.0 * f64::EPSILON * diag_inf * (1.0 + max_abs);
            let mut worst = 0.0f64;
            for i in 0..n {
                let mut au = a_diag[i] * u[i];
                if i > 0 {
                    au += a_off[i - 1] * u[i - 1];
                }
                if i + 1 < n {
                    au += a_off[i] * u[i + 1];
                }
                let r = b[i] - au;
                if bound[i].is_finite() && u[i] >= bound[i] - 1e-12 {
                    worst = worst.max(-r).max(0.0);
                } else {
                    worst = worst.max(r.abs());
                }
            }
            if worst < tol_kkt {
                converged = true;
                break;
            }
        }
    }
    if !converged {
        return Err(OracleError::NotConverged(max_iter));
    }

    let mut u_full = vec![0.0f64; n_nodes];
    u_full[1..].copy_from_slice(&u);
    let mut energy = 0.0;
    for k in 0..m {
        let len = x2[k + 1] - x2[k];
        let kappa = if x2[k + 1] <= 0.0 { h } else { 1.0 };
        let slope = (u_full[k + 1] - u_full[k]) / len;
        energy += kappa * slope * slope * len;
    }
    let active: Vec<bool> = (0..n_nodes)
        .map(|k| {
            k >= 1
                && k <= n_rod
                && data.g_mode == GMode::Standard
                && u_full[k] >= g(x2[k]) - 1e-9
        })
        .collect();
    Ok(Oracle1d {
        x2,
        u: u_full,
        energy,
        active,
        iterations: sweeps,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::parse_expression;
    use crate::geometry::{build_limit_mesh, JunctionConfig};
    use crate::sparse::CsrMatrix;
    use crate::vi_solver::{check_minty, solve_bruteforce, solve_pdas_from, SolverOptions};
    use approx::assert_relative_eq;

    fn config(nx_rod: usize, ny: usize) -> JunctionConfig {
        JunctionConfig {
            a: 1.0,
            l: 1.0,
            h: 0.5,
            n_rods: 2,
            gamma: parse_expression("1").unwrap(),
            nx_rod,
            ny_rod: ny,
            ny_body: ny,
        }
    }

    fn data(f: &str, g: &str, d: &str, mode: GMode) -> ProblemData {
        ProblemData::new(
            parse_expression(f).unwrap(),
            parse_expression(g).unwrap(),
            parse_expression(d).unwrap(),
            mode,
        )
    }

    #[test]
    fn zero_data_gives_zero_solution() {
        let cfg = config(2, 4);
        let mesh = build_limit_mesh(&cfg).unwrap();
        let pd = data("0", "0", "0", GMode::Standard);
        let vi = assemble_limit(&mesh, &pd, cfg.h).unwrap();
        let sol = solve_limit(&vi, &mesh, Method::Pdas, &SolverOptions::default()).unwrap();
        assert!(sol.result.converged);
        assert!(sol.u.iter().all(|&v| v.abs() < 1e-14));
        assert!(sol.energy.abs() < 1e-28);
    }

    #[test]
    fn unconstrained_reference_matches_transmission_closed_form() {
        // f = 1, d = 0, h = 1/2 on the unit geometry: the limit profile has
        // u' = 1 - x2 in the body and u' = 2 - x2 in the rod strip, giving
        // u(0) = 2.5, u(top) = 3.0 and energy 3.5.
        let cfg = config(2, 32);
        let mesh = build_limit_mesh(&cfg).unwrap();
        let pd = data("1", "0", "0", GMode::Unconstrained);
        let vi = assemble_limit(&mesh, &pd, cfg.h).unwrap();
        let sol = solve_limit(&vi, &mesh, Method::Pdas, &SolverOptions::default()).unwrap();
        assert!(sol.result.converged);
        for &v in &sol.interface_values {
            assert_relative_eq!(v, 2.5, max_relative = 2e-3);
        }
        let top = *sol.u.last().unwrap(); // last node is the top corner
        assert_relative_eq!(top, 3.0, max_relative = 2e-3);
        assert_relative_eq!(sol.energy, 3.5, max_relative = 2e-3);
        assert!(sol.equality_residual < 1e-8);
    }

    #[test]
    fn standard_zero_obstacle_pins_the_rectangle() {
        // g = 0 forces u- = 0: the whole rectangle is active and the body
        // solves the mixed problem with u(0) = 0, giving energy 1/3.
        let cfg = config(2, 32);
        let mesh = build_limit_mesh(&cfg).unwrap();
        let pd = data("1", "0", "0", GMode::Standard);
        let vi = assemble_limit(&mesh, &pd, cfg.h).unwrap();
        let sol = solve_limit(&vi, &mesh, Method::Pdas, &SolverOptions::default()).unwrap();
        assert!(sol.result.converged);
        for &v in &sol.u_minus() {
            assert!(v.abs() < 1e-12);
        }
        assert_relative_eq!(sol.energy, 1.0 / 3.0, max_relative = 2e-3);
        assert!(sol.max_obstacle_violation(&vi) <= 1e-10);
    }

    #[test]
    fn oracle_matches_closed_forms() {
        let pd = data("1", "0", "0", GMode::Unconstrained);
        let oracle = oracle_1d(1.0, 1.0, 0.5, &pd, 4096).unwrap();
        let at_zero = oracle.u[oracle.x2.iter().position(|&y| y == 0.0).unwrap()];
        assert_relative_eq!(at_zero, 2.5, max_relative = 1e-6);
        assert_relative_eq!(oracle.energy, 3.5, max_relative = 1e-6);

        let pd = data("1", "0", "0", GMode::Standard);
        let oracle = oracle_1d(1.0, 1.0, 0.5, &pd, 4096).unwrap();
        assert_relative_eq!(oracle.energy, 1.0 / 3.0, max_relative = 1e-6);
        // active set covers all of (-l, 0]
        let interface = oracle.x2.iter().position(|&y| y == 0.0).unwrap();
        for k in 1..=interface {
            assert!(oracle.active[k], "node {k} at {} inactive", oracle.x2[k]);
        }

        let pd = data("0", "0", "0", GMode::Standard);
        let oracle = oracle_1d(1.0, 1.0, 0.5, &pd, 64).unwrap();
        assert!(oracle.u.iter().all(|&v| v.abs() < 1e-13));
    }

    #[test]
    fn oracle_refuses_x1_dependent_data() {
        let pd = data("sin(pi*x1)", "0", "0", GMode::Standard);
        assert!(matches!(
            oracle_1d(1.0, 1.0, 0.5, &pd, 64),
            Err(OracleError::DataDependsOnX1)
        ));
    }

    #[test]
    fn oracle_active_set_confirmed_by_bruteforce_on_coarse_grid() {
        // rebuild the m = 16 tridiagonal as a DiscreteVI and enumerate
        let pd = data("1", "x2*(x2+1)", "0.25*(x2+1)", GMode::Standard);
        let oracle = oracle_1d(1.0, 1.0, 0.5, &pd, 16).unwrap();
        let m = 16usize;
        let n_rod = 8usize;
        let n = m;
        let mut triplets = Vec::new();
        let mut load = vec![0.0f64; n];
        let gauss = crate::element::gauss1d2();
        for k in 0..m {
            let (lo, hi) = (oracle.x2[k], oracle.x2[k + 1]);
            let len = hi - lo;
            let kappa = if hi <= 0.0 { 0.5 } else { 1.0 };
            // unknowns are nodes 1..=m -> indices k-1, k
            if k >= 1 {
                triplets.push((k - 1, k - 1, kappa / len));
                triplets.push((k - 1, k, -kappa / len));
                triplets.push((k, k - 1, -kappa / len));
            }
            triplets.push((k, k, kappa / len));
            for &(xi, w) in &gauss {
                let t = 0.5 * (1.0 + xi);
                let y = lo + t * len;
                let density = if hi <= 0.0 {
                    0.5 * pd.f.eval(0.0, y) + 2.0 * pd.d.eval(0.0, y)
                } else {
                    pd.f.eval(0.0, y)
                };
                if k >= 1 {
                    load[k - 1] += w * 0.5 * len * density * (1.0 - t);
                }
                load[k] += w * 0.5 * len * density * t;
            }
        }
        let a = CsrMatrix::from_triplets(n, &mut triplets);
        let system = crate::assembly::SparseSystem {
            a,
            b: load,
            dirichlet: vec![0],
            free_nodes: (1..=n).collect(),
            free_map: std::iter::once(None).chain((0..n).map(Some)).collect(),
        };
        let constraints: Vec<(usize, f64)> = (1..=n_rod)
            .map(|k| (k - 1, pd.g.eval(0.0, oracle.x2[k])))
            .collect();
        let vi = DiscreteVI::new(system, constraints, ViLabel::Custom);
        let brute = solve_bruteforce(&vi).unwrap();
        for k in 1..=m {
            assert!(
                (oracle.u[k] - brute.u[k - 1]).abs() < 1e-9,
                "node {k}: oracle {} vs brute {}",
                oracle.u[k],
                brute.u[k - 1]
            );
        }
    }

    #[test]
    fn limit_solve_matches_oracle_profile() {
        // x1-independent data: the 2D solve must collapse onto the 1D
        // profile at every shared level
        let cfg = config(2, 8);
        let mesh = build_limit_mesh(&cfg).unwrap();
        let pd = data("1", "x2*(x2+1)", "0.25*(x2+1)", GMode::Standard);
        let vi = assemble_limit(&mesh, &pd, cfg.h).unwrap();
        let sol = solve_limit(&vi, &mesh, Method::Pdas, &SolverOptions::default()).unwrap();
        assert!(sol.result.converged);
        let oracle = oracle_1d(1.0, 1.0, cfg.h, &pd, 4096).unwrap();
        let eval_oracle = |y: f64| -> f64 {
            let pos = oracle.x2.partition_point(|&t| t < y).min(oracle.x2.len() - 1);
            let k = pos.max(1);
            let (lo, hi) = (oracle.x2[k - 1], oracle.x2[k]);
            let t = (y - lo) / (hi - lo);
            oracle.u[k - 1] * (1.0 - t) + oracle.u[k] * t
        };
        let scale = 1.0 + oracle.u.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let mesh_size: f64 = 1.0 / 8.0;
        let tol = 5.0 * mesh_size * mesh_size * scale;
        for (n, p) in mesh.nodes.iter().enumerate() {
            assert!(
                (sol.u[n] - eval_oracle(p[1])).abs() <= tol,
                "node at ({}, {}): 2d {} vs oracle {}",
                p[0],
                p[1],
                sol.u[n],
                eval_oracle(p[1])
            );
        }
    }

    #[test]
    fn minty_and_uniqueness_checks() {
        let cfg = config(2, 8);
        let mesh = build_limit_mesh(&cfg).unwrap();
        let pd = data("1", "x2*(x2+1)", "0.25*(x2+1)", GMode::Standard);
        let vi = assemble_limit(&mesh, &pd, cfg.h).unwrap();
        let sol = solve_limit(&vi, &mesh, Method::Pdas, &SolverOptions::default()).unwrap();
        assert!(sol.equality_residual <= 1e-10);
        let worst = check_minty(&vi, &sol.result.u, 50, 11);
        assert!(worst <= 1e-10, "Minty violation {worst}");

        // restart from a different feasible point: all constraints active
        let all: std::collections::BTreeSet<usize> =
            vi.constraints.iter().map(|&(i, _)| i).collect();
        let restart = solve_pdas_from(&vi, &SolverOptions::default(), &all).unwrap();
        assert!(restart.converged);
        for i in 0..vi.dim() {
            assert!((restart.u[i] - sol.result.u[i]).abs() <= 1e-8);
        }
    }

    #[test]
    fn flux_jump_decays_under_refinement() {
        // unconstrained transmission problem: the natural flux condition
        // emerges at first order or better
        let pd = data("1", "0", "0", GMode::Unconstrained);
        let mut jumps = Vec::new();
        for ny in [8usize, 16, 32] {
            let cfg = config(2, ny);
            let mesh = build_limit_mesh(&cfg).unwrap();
            let vi = assemble_limit(&mesh, &pd, cfg.h).unwrap();
            let sol = solve_limit(&vi, &mesh, Method::Pdas, &SolverOptions::default()).unwrap();
            let worst = interface_flux_jump(&mesh, &sol.u, cfg.h)
                .into_iter()
                .map(|(_, j)| j)
                .fold(0.0f64, f64::max);
            jumps.push(worst);
        }
        assert!(
            jumps[2] <= jumps[0] / 3.0,
            "flux jumps did not decay: {jumps:?}"
        );
    }
}
