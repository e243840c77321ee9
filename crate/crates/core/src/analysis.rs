//! Measurements for the limit passage: energies, the periodic integral
//! identity, weak-convergence gaps against a test-function battery, uniform
//! Friedrich constants, and the driver that sweeps the rod count.
//!
//! Zero-extended rod fields are never materialized on the rectangle; every
//! junction-side functional integrates over the rod elements of the junction
//! mesh directly, which keeps the weak-gap measurements free of
//! interpolation artifacts. Where a limit-mesh field must be read at
//! junction-mesh points (body gap, trace gap), the structured layout allows
//! an exact inverse of the element map, so sampling is the genuine finite
//! element field, not an approximation of it.

use crate::assembly::{
    apply_dirichlet, assemble_mass, assemble_stiffness, AssemblyError, StiffnessMode,
};
use crate::element::{gauss1d2, gauss2, gauss3, shape, ElementGeom};
use crate::expr::{parse_expression, Expr};
use crate::geometry::{BoundaryTag, GeometryError, Mesh, MeshKind, Region};
use crate::limit_problem::{assemble_limit, solve_limit, LimitSolution};
use crate::problem_data::ProblemData;
use crate::sparse::smallest_generalized_eigenvalue;
use crate::vi_solver::{solve_vi, Method, SolveError, SolveResult, SolverOptions};
use crate::JunctionConfig;

#[derive(Debug, thiserror::Error)]
pub enum AnalysisError {
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    Assembly(#[from] AssemblyError),
    #[error(transparent)]
    Solve(#[from] SolveError),
    #[error("meshes come from different configurations: {0}")]
    MismatchedDomains(String),
    #[error("limit reference solve failed: {0}")]
    LimitSolveFailed(String),
    #[error("N list must be strictly increasing and non-empty")]
    BadNList,
    #[error("identity check needs a junction mesh")]
    NotAJunctionMesh,
}

/// Junction energy `integral_Omega_eps |grad u|^2` of a nodal field,
/// evaluated with the assembly quadrature (so it equals `u'Au` for the full
/// stiffness matrix up to roundoff).
pub fn energy_eps(mesh: &Mesh, u: &[f64]) -> f64 {
    let gp = gauss2();
    let mut total = 0.0;
    for e in 0..mesh.n_elements() {
        let el = &mesh.elements[e];
        let geom = ElementGeom::new(mesh.element_coords(e));
        for &(xi, eta, w) in &gp {
            let (grads, det) = geom.physical_grads(xi, eta);
            let mut gx = 0.0;
            let mut gy = 0.0;
            for i in 0..4 {
                gx += grads[i][0] * u[el.nodes[i]];
                gy += grads[i][1] * u[el.nodes[i]];
            }
            total += w * det * (gx * gx + gy * gy);
        }
    }
    total
}

/// Limit energy: full gradient on the body, `h`-weighted `x2`-derivative on
/// the rectangle.
pub fn energy_limit(mesh: &Mesh, u: &[f64], h: f64) -> f64 {
    let gp = gauss2();
    let mut total = 0.0;
    for e in 0..mesh.n_elements() {
        let el = &mesh.elements[e];
        let geom = ElementGeom::new(mesh.element_coords(e));
        for &(xi, eta, w) in &gp {
            let (grads, det) = geom.physical_grads(xi, eta);
            let mut gx = 0.0;
            let mut gy = 0.0;
            for i in 0..4 {
                gx += grads[i][0] * u[el.nodes[i]];
                gy += grads[i][1] * u[el.nodes[i]];
            }
            total += match el.region {
                Region::Body => w * det * (gx * gx + gy * gy),
                _ => w * det * h * gy * gy,
            };
        }
    }
    total
}

/// Outcome of the periodic integral identity evaluated on one junction mesh.
#[derive(Debug, Clone, Copy)]
pub struct IdentityReport {
    /// `(eps h / 2) * integral_S_eps v dx2`.
    pub lhs: f64,
    /// `integral_G_eps v dx - eps * integral_G_eps Y(x1/eps) d1 v dx`.
    pub rhs: f64,
    pub discrepancy: f64,
}

/// The sawtooth `Y(t) = -t + floor(t) + 1/2`, affine inside each period.
fn sawtooth(t: f64) -> f64 {
    -t + t.floor() + 0.5
}

/// Verify the rod-side trace identity for a scalar field `v` on a junction
/// mesh. The left side is edge quadrature over the rod sides, the right side
/// per-rod-element quadrature (3x3 Gauss, so polynomial integrands up to the
/// sawtooth weight stay exact); `d1 v` is a central difference with step
/// `1e-6 * (1 + |x1|)`, which is exact for quadratics.
pub fn identity_check(mesh: &Mesh, v: &Expr) -> Result<IdentityReport, AnalysisError> {
    if mesh.kind != MeshKind::Junction || mesh.rod_intervals.is_empty() {
        return Err(AnalysisError::NotAJunctionMesh);
    }
    let a = *mesh.structure.xs.last().unwrap();
    let n_rods = mesh.rod_intervals.len() as f64;
    let eps = a / n_rods;
    let rod_width = mesh.rod_intervals[0].1 - mesh.rod_intervals[0].0;
    let h = rod_width / eps;

    let mut lhs = 0.0;
    for be in &mesh.boundary_edges {
        if be.tag != BoundaryTag::SEps {
            continue;
        }
        let (p_id, q_id) = mesh.edge_nodes(be.elem, be.local_edge);
        let (p, q) = (mesh.nodes[p_id], mesh.nodes[q_id]);
        let half_len = 0.5 * (q[1] - p[1]).abs();
        for &(xi, w) in &gauss1d2() {
            let t = 0.5 * (1.0 + xi);
            let x = [p[0] + t * (q[0] - p[0]), p[1] + t * (q[1] - p[1])];
            lhs += w * half_len * v.eval(x[0], x[1]);
        }
    }
    lhs *= eps * h / 2.0;

    let mut volume = 0.0;
    let mut shift = 0.0;
    for e in 0..mesh.n_elements() {
        if mesh.elements[e].region != Region::Rod {
            continue;
        }
        let geom = ElementGeom::new(mesh.element_coords(e));
        for &(xi, eta, w) in &gauss3() {
            let det = geom.jacobian_det(xi, eta);
            let p = geom.map(xi, eta);
            volume += w * det * v.eval(p[0], p[1]);
            let step = 1e-6 * (1.0 + p[0].abs());
            let d1 = (v.eval(p[0] + step, p[1]) - v.eval(p[0] - step, p[1])) / (2.0 * step);
            shift += w * det * sawtooth(p[0] / eps) * d1;
        }
    }
    let rhs = volume - eps * shift;
    Ok(IdentityReport {
        lhs,
        rhs,
        discrepancy: (lhs - rhs).abs(),
    })
}

/// Point evaluation of a nodal field on a structured limit mesh through the
/// exact inverse of the element map.
pub struct FieldSampler<'a> {
    mesh: &'a Mesh,
    u: &'a [f64],
}

impl<'a> FieldSampler<'a> {
    pub fn new(mesh: &'a Mesh, u: &'a [f64]) -> FieldSampler<'a> {
        assert_eq!(mesh.kind, MeshKind::Limit, "sampler needs a limit mesh");
        assert_eq!(u.len(), mesh.n_nodes());
        FieldSampler { mesh, u }
    }

    pub fn eval(&self, x1: f64, x2: f64) -> f64 {
        let s = &self.mesh.structure;
        let n_cols = s.xs.len();
        let iv = s
            .xs
            .partition_point(|&x| x <= x1)
            .saturating_sub(1)
            .min(n_cols - 2);
        let (xl, xr) = (s.xs[iv], s.xs[iv + 1]);
        let tx = ((x1 - xl) / (xr - xl)).clamp(0.0, 1.0);
        let (n00, n10, n01, n11, ty);
        if x2 <= 0.0 {
            let levels = &s.d0_levels;
            let m = levels
                .partition_point(|&y| y <= x2)
                .saturating_sub(1)
                .min(levels.len() - 2);
            let (yl, yr) = (levels[m], levels[m + 1]);
            ty = ((x2 - yl) / (yr - yl)).clamp(0.0, 1.0);
            n00 = s.sub_node(iv, m);
            n10 = s.sub_node(iv + 1, m);
            n01 = s.sub_node(iv, m + 1);
            n11 = s.sub_node(iv + 1, m + 1);
        } else {
            let ny = s.ny_body;
            let gm = s.gamma_at[iv] * (1.0 - tx) + s.gamma_at[iv + 1] * tx;
            let frac = (x2 / gm).clamp(0.0, 1.0);
            let k = ((frac * ny as f64).floor() as usize).min(ny - 1);
            let (yb, yt) = (s.body_fracs[k] * gm, s.body_fracs[k + 1] * gm);
            ty = ((x2 - yb) / (yt - yb)).clamp(0.0, 1.0);
            n00 = s.body_node(iv, k);
            n10 = s.body_node(iv + 1, k);
            n01 = s.body_node(iv, k + 1);
            n11 = s.body_node(iv + 1, k + 1);
        }
        let u = self.u;
        (1.0 - tx) * (1.0 - ty) * u[n00]
            + tx * (1.0 - ty) * u[n10]
            + (1.0 - tx) * ty * u[n01]
            + tx * ty * u[n11]
    }
}

/// Weak-convergence gaps of one junction solve against the limit solution.
#[derive(Debug, Clone)]
pub struct GapReport {
    /// Per test function: `|integral_G_eps u_eps psi - h integral_D0 u0 psi|`.
    pub weak: Vec<f64>,
    /// Per test function: `|integral_G_eps d1 u_eps psi|`.
    pub deriv: Vec<f64>,
    /// `L2(Omega_0)` distance between the junction solution and the nodal
    /// interpolant of the limit body field.
    pub body_l2: f64,
    /// `L2(0, a)` distance of the traces along the joint line.
    pub trace: f64,
}

/// Measure every gap of the convergence statement for one pair of solves.
/// `u_eps` and `u0` are in full node numbering of their meshes.
pub fn weak_gaps(
    eps_mesh: &Mesh,
    u_eps: &[f64],
    limit_mesh: &Mesh,
    u0: &[f64],
    h: f64,
    test_fns: &[Expr],
) -> Result<GapReport, AnalysisError> {
    if eps_mesh.kind != MeshKind::Junction {
        return Err(AnalysisError::NotAJunctionMesh);
    }
    let a_eps = *eps_mesh.structure.xs.last().unwrap();
    let a_lim = *limit_mesh.structure.xs.last().unwrap();
    let l_eps = -eps_mesh.structure.d0_levels[0];
    let l_lim = -limit_mesh.structure.d0_levels[0];
    if (a_eps - a_lim).abs() > 1e-12 * (1.0 + a_eps.abs())
        || (l_eps - l_lim).abs() > 1e-12 * (1.0 + l_eps.abs())
    {
        return Err(AnalysisError::MismatchedDomains(format!(
            "a: {a_eps} vs {a_lim}, l: {l_eps} vs {l_lim}"
        )));
    }

    let gp = gauss2();
    let sampler = FieldSampler::new(limit_mesh, u0);

    // rod-side integrals on the junction mesh
    let mut rod_int = vec![0.0f64; test_fns.len()];
    let mut rod_deriv = vec![0.0f64; test_fns.len()];
    for e in 0..eps_mesh.n_elements() {
        if eps_mesh.elements[e].region != Region::Rod {
            continue;
        }
        let el = &eps_mesh.elements[e];
        let geom = ElementGeom::new(eps_mesh.element_coords(e));
        for &(xi, eta, w) in &gp {
            let n = shape(xi, eta);
            let (grads, det) = geom.physical_grads(xi, eta);
            let p = geom.map(xi, eta);
            let mut val = 0.0;
            let mut d1 = 0.0;
            for i in 0..4 {
                val += n[i] * u_eps[el.nodes[i]];
                d1 += grads[i][0] * u_eps[el.nodes[i]];
            }
            for (k, psi) in test_fns.iter().enumerate() {
                let psi_val = psi.eval(p[0], p[1]);
                rod_int[k] += w * det * val * psi_val;
                rod_deriv[k] += w * det * d1 * psi_val;
            }
        }
    }

    // rectangle integrals on the limit mesh
    let mut d0_int = vec![0.0f64; test_fns.len()];
    for e in 0..limit_mesh.n_elements() {
        if limit_mesh.elements[e].region != Region::D0 {
            continue;
        }
        let el = &limit_mesh.elements[e];
        let geom = ElementGeom::new(limit_mesh.element_coords(e));
        for &(xi, eta, w) in &gp {
            let n = shape(xi, eta);
            let det = geom.jacobian_det(xi, eta);
            let p = geom.map(xi, eta);
            let mut val = 0.0;
            for i in 0..4 {
                val += n[i] * u0[el.nodes[i]];
            }
            for (k, psi) in test_fns.iter().enumerate() {
                d0_int[k] += w * det * val * psi.eval(p[0], p[1]);
            }
        }
    }

    let weak: Vec<f64> = rod_int
        .iter()
        .zip(&d0_int)
        .map(|(r, d)| (r - h * d).abs())
        .collect();
    let deriv: Vec<f64> = rod_deriv.iter().map(|d| d.abs()).collect();

    // body L2 gap through nodal interpolation of the limit field
    let diff: Vec<f64> = eps_mesh
        .nodes
        .iter()
        .enumerate()
        .map(|(n, p)| {
            if p[1] >= 0.0 {
                u_eps[n] - sampler.eval(p[0], p[1])
            } else {
                0.0
            }
        })
        .collect();
    let mut body_l2_sq = 0.0;
    for e in 0..eps_mesh.n_elements() {
        if eps_mesh.elements[e].region != Region::Body {
            continue;
        }
        let el = &eps_mesh.elements[e];
        let geom = ElementGeom::new(eps_mesh.element_coords(e));
        for &(xi, eta, w) in &gp {
            let n = shape(xi, eta);
            let det = geom.jacobian_det(xi, eta);
            let mut val = 0.0;
            for i in 0..4 {
                val += n[i] * diff[el.nodes[i]];
            }
            body_l2_sq += w * det * val * val;
        }
    }

    // trace gap along the joint line
    let mut trace_sq = 0.0;
    for &(elem, local) in &eps_mesh.interface_edges {
        let (p_id, q_id) = eps_mesh.edge_nodes(elem, local);
        let (p, q) = (eps_mesh.nodes[p_id], eps_mesh.nodes[q_id]);
        let half_len = 0.5 * (q[0] - p[0]).abs();
        for &(xi, w) in &gauss1d2() {
            let t = 0.5 * (1.0 + xi);
            let x1 = p[0] + t * (q[0] - p[0]);
            let u_trace = (1.0 - t) * u_eps[p_id] + t * u_eps[q_id];
            let gap = u_trace - sampler.eval(x1, 0.0);
            trace_sq += w * half_len * gap * gap;
        }
    }

    Ok(GapReport {
        weak,
        deriv,
        body_l2: body_l2_sq.sqrt(),
        trace: trace_sq.sqrt(),
    })
}

/// Friedrich-constant estimate through the smallest generalized eigenvalue
/// of stiffness against mass on the reduced space.
#[derive(Debug, Clone, Copy)]
pub struct FriedrichEstimate {
    pub c2: f64,
    pub lambda_min: f64,
    pub iterations: usize,
    /// False when the inverse iteration stagnated before the eigenvalue
    /// tolerance; the estimate is then a flagged lower-confidence value.
    pub converged: bool,
}

/// Estimate the best constant in `|u|_L2 <= C2 |grad u|_L2` over the fields
/// vanishing on `dirichlet_tags`, via shifted inverse iteration at
/// eigenvalue tolerance 1e-8.
pub fn friedrich_constant(
    mesh: &Mesh,
    dirichlet_tags: &[BoundaryTag],
) -> Result<FriedrichEstimate, AnalysisError> {
    let a = assemble_stiffness(mesh, StiffnessMode::Full)?;
    let m = assemble_mass(mesh);
    let zeros = vec![0.0; mesh.n_nodes()];
    let sys_a = apply_dirichlet(&a, &zeros, mesh, dirichlet_tags)?;
    let sys_m = apply_dirichlet(&m, &zeros, mesh, dirichlet_tags)?;
    let eig = smallest_generalized_eigenvalue(&sys_a.a, &sys_m.a, 1e-8, 1000)
        .map_err(SolveError::Factor)?;
    Ok(FriedrichEstimate {
        c2: 1.0 / eig.lambda.sqrt(),
        lambda_min: eig.lambda,
        iterations: eig.iterations,
        converged: eig.converged,
    })
}

/// The default test-function battery: low modes over the rectangle,
/// instantiated for the configured `a` and `l`.
pub fn default_test_battery(a: f64, l: f64) -> Vec<(String, Expr)> {
    let sources = vec![
        "1".to_string(),
        "x1".to_string(),
        "x2".to_string(),
        "x1*x2".to_string(),
        format!("sin(pi*x1/{a})"),
        format!("cos(pi*x2/(2*{l}))"),
    ];
    sources
        .into_iter()
        .map(|s| {
            let e = parse_expression(&s).expect("battery expressions parse");
            (s, e)
        })
        .collect()
}

/// One row of the convergence table.
#[derive(Debug, Clone)]
pub struct ConvergenceRow {
    pub n_rods: usize,
    pub eps: f64,
    pub e_eps: f64,
    pub e_0: f64,
    pub energy_gap: f64,
    pub body_l2_gap: f64,
    pub trace_gap: f64,
    pub weak_gaps: Vec<f64>,
    pub deriv_gaps: Vec<f64>,
    /// Set when the solve for this row failed; the numeric fields are NaN.
    pub failure: Option<String>,
}

impl ConvergenceRow {
    fn failed(n_rods: usize, eps: f64, n_psi: usize, message: String) -> ConvergenceRow {
        ConvergenceRow {
            n_rods,
            eps,
            e_eps: f64::NAN,
            e_0: f64::NAN,
            energy_gap: f64::NAN,
            body_l2_gap: f64::NAN,
            trace_gap: f64::NAN,
            weak_gaps: vec![f64::NAN; n_psi],
            deriv_gaps: vec![f64::NAN; n_psi],
            failure: Some(message),
        }
    }
}

/// The per-N table of the convergence study, rows sorted by decreasing eps.
#[derive(Debug, Clone)]
pub struct ConvergenceReport {
    pub rows: Vec<ConvergenceRow>,
    /// Source text of the test battery, column order of the gap columns.
    pub test_functions: Vec<String>,
    /// Geometry/data snapshot for the report header.
    pub config_summary: String,
    pub limit_energy: f64,
}

/// Options of the convergence study.
#[derive(Debug, Clone)]
pub struct StudyOptions {
    pub method: Method,
    pub solver: SolverOptions,
    /// The limit reference runs at this multiple of the per-rod resolution
    /// of the junction meshes (and the largest N in the list).
    pub limit_refine: usize,
    /// Test battery; `None` picks the default.
    pub test_functions: Option<Vec<(String, Expr)>>,
}

impl Default for StudyOptions {
    fn default() -> Self {
        StudyOptions {
            method: Method::Pdas,
            solver: SolverOptions::default(),
            limit_refine: 4,
            test_functions: None,
        }
    }
}

/// Everything produced by the limit reference solve of a study.
pub struct LimitReference {
    pub config: JunctionConfig,
    pub mesh: Mesh,
    pub solution: LimitSolution,
}

/// Solve the limit problem once on the refined reference mesh.
pub fn solve_limit_reference(
    base: &JunctionConfig,
    n_max: usize,
    data: &ProblemData,
    opts: &StudyOptions,
) -> Result<LimitReference, AnalysisError> {
    let config = base.with_n_rods(n_max).refined(opts.limit_refine);
    let mesh = crate::geometry::build_limit_mesh(&config)?;
    let vi = assemble_limit(&mesh, data, config.h)?;
    let solution = solve_limit(&vi, &mesh, opts.method, &opts.solver)?;
    if !solution.result.converged {
        return Err(AnalysisError::LimitSolveFailed(format!(
            "limit solve stopped after {} iterations",
            solution.result.iterations
        )));
    }
    Ok(LimitReference {
        config,
        mesh,
        solution,
    })
}

/// Solve one junction problem and return the solve alongside its mesh.
pub fn solve_eps_problem(
    config: &JunctionConfig,
    data: &ProblemData,
    method: Method,
    solver: &SolverOptions,
) -> Result<(Mesh, crate::vi_solver::DiscreteVI, SolveResult), AnalysisError> {
    let mesh = crate::geometry::build_junction_mesh(config)?;
    let vi = crate::assembly::assemble_eps_vi(&mesh, data, config)?;
    let result = solve_vi(&vi, method, solver)?;
    Ok((mesh, vi, result))
}

/// Run the full convergence study: one refined limit solve, then one
/// junction solve per entry of `n_list`, each measured against the limit.
pub fn run_convergence(
    base: &JunctionConfig,
    n_list: &[usize],
    data: &ProblemData,
    opts: &StudyOptions,
) -> Result<ConvergenceReport, AnalysisError> {
    if n_list.is_empty() || n_list.windows(2).any(|w| w[0] >= w[1]) {
        return Err(AnalysisError::BadNList);
    }
    let battery = opts
        .test_functions
        .clone()
        .unwrap_or_else(|| default_test_battery(base.a, base.l));
    let battery_exprs: Vec<Expr> = battery.iter().map(|(_, e)| e.clone()).collect();
    let battery_names: Vec<String> = battery.iter().map(|(s, _)| s.clone()).collect();

    let reference = solve_limit_reference(base, *n_list.last().unwrap(), data, opts)?;
    let e_0 = reference.solution.energy;

    let mut rows = Vec::with_capacity(n_list.len());
    for &n in n_list {
        let config = base.with_n_rods(n);
        let eps = config.eps();
        match solve_eps_problem(&config, data, opts.method, &opts.solver) {
            Ok((mesh, vi, result)) if result.converged => {
                let u_full = vi.system.expand(&result.u);
                let e_eps = energy_eps(&mesh, &u_full);
                let gaps = weak_gaps(
                    &mesh,
                    &u_full,
                    &reference.mesh,
                    &reference.solution.u,
                    base.h,
                    &battery_exprs,
                )?;
                rows.push(ConvergenceRow {
                    n_rods: n,
                    eps,
                    e_eps,
                    e_0,
                    energy_gap: (e_eps - e_0).abs(),
                    body_l2_gap: gaps.body_l2,
                    trace_gap: gaps.trace,
                    weak_gaps: gaps.weak,
                    deriv_gaps: gaps.deriv,
                    failure: None,
                });
            }
            Ok((_, _, result)) => {
                rows.push(ConvergenceRow::failed(
                    n,
                    eps,
                    battery.len(),
                    format!("solver stopped unconverged after {} iterations", result.iterations),
                ));
            }
            Err(err) => {
                rows.push(ConvergenceRow::failed(n, eps, battery.len(), err.to_string()));
            }
        }
    }
    let config_summary = format!(
        "a={} l={} h={} gamma={} nx_rod={} ny_rod={} ny_body={} limit_refine={}",
        base.a,
        base.l,
        base.h,
        base.gamma,
        base.nx_rod,
        base.ny_rod,
        base.ny_body,
        opts.limit_refine
    );
    Ok(ConvergenceReport {
        rows,
        test_functions: battery_names,
        config_summary,
        limit_energy: e_0,
    })
}
