//! Assembly of the bilinear forms and load functionals on a tagged mesh,
//! and reduction of Dirichlet degrees of freedom.
//!
//! Two stiffness modes exist. `Full` is the plain gradient-gradient form on
//! every element. `LimitAnisotropic(h)` is the energy of the limit problem:
//! the full form on body elements and the `h`-weighted `x2`-derivative form
//! on `D0` elements. Loads mirror this split: the junction load couples the
//! volume term with the scaled Signorini line term on the rod sides, the
//! limit load folds the rod density into the `D0` volume term.
//!
//! All integrals use the same 2x2 Gauss rule (2-point on edges), so discrete
//! identities that mix stiffness and load terms hold to solver tolerance
//! rather than quadrature mismatch. Dirichlet rows are eliminated, not
//! penalized: the constrained solvers then work on a clean SPD system whose
//! only inequalities come from the obstacle.

use crate::element::{gauss1d2, gauss2, shape, ElementGeom};
use crate::geometry::{BoundaryTag, Mesh, MeshKind, Region};
use crate::problem_data::ProblemData;
use crate::sparse::{smallest_ritz_value, CsrMatrix};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum StiffnessMode {
    /// `integral grad u . grad v` over every element.
    Full,
    /// Full form on `Body` elements, `h * (d2 u)(d2 v)` on `D0` elements.
    LimitAnisotropic { h: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum LoadMode {
    /// `integral f v` over the junction plus `eps * integral_S_eps d v ds`.
    Eps { eps: f64 },
    /// `integral_body f v` plus `integral_D0 (h f + 2 d) v`.
    Limit { h: f64 },
}

#[derive(Debug, Clone, thiserror::Error)]
pub enum AssemblyError {
    #[error("LimitAnisotropic stiffness needs a mesh with Body/D0 region flags")]
    MissingRegionFlags,
    #[error("Dirichlet tag {0} matches no nodes in this mesh")]
    EmptyDirichletTag(&'static str),
}

/// Assemble the stiffness matrix over all mesh nodes.
pub fn assemble_stiffness(mesh: &Mesh, mode: StiffnessMode) -> Result<CsrMatrix, AssemblyError> {
    if let StiffnessMode::LimitAnisotropic { .. } = mode {
        if mesh.kind != MeshKind::Limit {
            return Err(AssemblyError::MissingRegionFlags);
        }
    }
    let gp = gauss2();
    let mut triplets: Vec<(usize, usize, f64)> = Vec::with_capacity(16 * mesh.n_elements());
    for e in 0..mesh.n_elements() {
        let el = &mesh.elements[e];
        let geom = ElementGeom::new(mesh.element_coords(e));
        let mut k = [[0.0f64; 4]; 4];
        for &(xi, eta, w) in &gp {
            let (grads, det) = geom.physical_grads(xi, eta);
            let scale = w * det;
            match mode {
                StiffnessMode::Full => {
                    for i in 0..4 {
                        for j in 0..4 {
                            k[i][j] +=
                                scale * (grads[i][0] * grads[j][0] + grads[i][1] * grads[j][1]);
                        }
                    }
                }
                StiffnessMode::LimitAnisotropic { h } => match el.region {
                    Region::Body => {
                        for i in 0..4 {
                            for j in 0..4 {
                                k[i][j] += scale
                                    * (grads[i][0] * grads[j][0] + grads[i][1] * grads[j][1]);
                            }
                        }
                    }
                    Region::D0 => {
                        for i in 0..4 {
                            for j in 0..4 {
                                k[i][j] += scale * h * grads[i][1] * grads[j][1];
                            }
                        }
                    }
                    Region::Rod => return Err(AssemblyError::MissingRegionFlags),
                },
            }
        }
        for i in 0..4 {
            for j in 0..4 {
                triplets.push((el.nodes[i], el.nodes[j], k[i][j]));
            }
        }
    }
    Ok(CsrMatrix::from_triplets(mesh.n_nodes(), &mut triplets))
}

/// Assemble the mass matrix (same quadrature as the stiffness).
pub fn assemble_mass(mesh: &Mesh) -> CsrMatrix {
    let gp = gauss2();
    let mut triplets: Vec<(usize, usize, f64)> = Vec::with_capacity(16 * mesh.n_elements());
    for e in 0..mesh.n_elements() {
        let el = &mesh.elements[e];
        let geom = ElementGeom::new(mesh.element_coords(e));
        let mut m = [[0.0f64; 4]; 4];
        for &(xi, eta, w) in &gp {
            let n = shape(xi, eta);
            let det = geom.jacobian_det(xi, eta);
            for i in 0..4 {
                for j in 0..4 {
                    m[i][j] += w * det * n[i] * n[j];
                }
            }
        }
        for i in 0..4 {
            for j in 0..4 {
                triplets.push((el.nodes[i], el.nodes[j], m[i][j]));
            }
        }
    }
    CsrMatrix::from_triplets(mesh.n_nodes(), &mut triplets)
}

/// Assemble the load vector over all mesh nodes.
pub fn assemble_load(mesh: &Mesh, data: &ProblemData, mode: LoadMode) -> Vec<f64> {
    let gp = gauss2();
    let mut b = vec![0.0f64; mesh.n_nodes()];
    for e in 0..mesh.n_elements() {
        let el = &mesh.elements[e];
        let geom = ElementGeom::new(mesh.element_coords(e));
        for &(xi, eta, w) in &gp {
            let n = shape(xi, eta);
            let det = geom.jacobian_det(xi, eta);
            let p = geom.map(xi, eta);
            let density = match mode {
                LoadMode::Eps { .. } => data.f.eval(p[0], p[1]),
                LoadMode::Limit { h } => match el.region {
                    Region::Body => data.f.eval(p[0], p[1]),
                    _ => h * data.f.eval(p[0], p[1]) + 2.0 * data.d.eval(p[0], p[1]),
                },
            };
            for i in 0..4 {
                b[el.nodes[i]] += w * det * density * n[i];
            }
        }
    }
    if let LoadMode::Eps { eps } = mode {
        // eps * integral over the rod sides of d(x) v ds
        for be in &mesh.boundary_edges {
            if be.tag != BoundaryTag::SEps {
                continue;
            }
            let (p_id, q_id) = mesh.edge_nodes(be.elem, be.local_edge);
            let (p, q) = (mesh.nodes[p_id], mesh.nodes[q_id]);
            let half_len = 0.5 * ((q[0] - p[0]).powi(2) + (q[1] - p[1]).powi(2)).sqrt();
            for &(xi, w) in &gauss1d2() {
                let t = 0.5 * (1.0 + xi);
                let x = [p[0] + t * (q[0] - p[0]), p[1] + t * (q[1] - p[1])];
                let d_val = data.d.eval(x[0], x[1]);
                b[p_id] += eps * w * half_len * d_val * (1.0 - t);
                b[q_id] += eps * w * half_len * d_val * t;
            }
        }
    }
    b
}

/// A reduced SPD system with the Dirichlet bookkeeping that produced it.
#[derive(Debug, Clone)]
pub struct SparseSystem {
    /// Reduced stiffness (free nodes only).
    pub a: CsrMatrix,
    /// Reduced load.
    pub b: Vec<f64>,
    /// Eliminated node ids (full numbering, sorted). Prescribed value is 0.
    pub dirichlet: Vec<usize>,
    /// Reduced index -> full node id.
    pub free_nodes: Vec<usize>,
    /// Full node id -> reduced index.
    pub free_map: Vec<Option<usize>>,
}

impl SparseSystem {
    pub fn n_reduced(&self) -> usize {
        self.a.n
    }

    /// Scatter a reduced vector back to full node numbering (zeros on the
    /// Dirichlet set).
    pub fn expand(&self, u: &[f64]) -> Vec<f64> {
        let mut full = vec![0.0; self.free_map.len()];
        for (red, &node) in self.free_nodes.iter().enumerate() {
            full[node] = u[red];
        }
        full
    }

    /// Smallest Ritz value of the reduced matrix (positive-definiteness
    /// probe; 50 Lanczos steps by default).
    pub fn smallest_ritz(&self, steps: usize, seed: u64) -> f64 {
        smallest_ritz_value(&self.a, steps, seed)
    }
}

/// Eliminate the nodes carrying any of `tags` (prescribed value 0) and
/// renumber the remaining nodes.
pub fn apply_dirichlet(
    a: &CsrMatrix,
    b: &[f64],
    mesh: &Mesh,
    tags: &[BoundaryTag],
) -> Result<SparseSystem, AssemblyError> {
    let mut is_dirichlet = vec![false; mesh.n_nodes()];
    for &tag in tags {
        let set = mesh.node_set(tag);
        if set.is_empty() {
            return Err(AssemblyError::EmptyDirichletTag(tag.as_str()));
        }
        for &n in set {
            is_dirichlet[n] = true;
        }
    }
    let mut free_nodes = Vec::with_capacity(mesh.n_nodes());
    let mut dirichlet = Vec::new();
    let mut free_map = vec![None; mesh.n_nodes()];
    for n in 0..mesh.n_nodes() {
        if is_dirichlet[n] {
            dirichlet.push(n);
        } else {
            free_map[n] = Some(free_nodes.len());
            free_nodes.push(n);
        }
    }
    let reduced_a = a.submatrix(&free_nodes);
    let reduced_b: Vec<f64> = free_nodes.iter().map(|&n| b[n]).collect();
    Ok(SparseSystem {
        a: reduced_a,
        b: reduced_b,
        dirichlet,
        free_nodes,
        free_map,
    })
}

/// Assemble the full junction problem as a discrete VI: full stiffness,
/// junction load, Dirichlet on the rod bases, and (in `Standard` mode) the
/// obstacle bounds `u <= g` on the rod-side nodes.
///
/// The constraint set is the `S_eps` node set: it includes the rod-top
/// corner nodes at `x2 = 0` (where the obstacle datum has zero trace) and
/// excludes the rod-base nodes, where the Dirichlet condition wins.
pub fn assemble_eps_vi(
    mesh: &Mesh,
    data: &ProblemData,
    config: &crate::geometry::JunctionConfig,
) -> Result<crate::vi_solver::DiscreteVI, AssemblyError> {
    let eps = config.eps();
    let a = assemble_stiffness(mesh, StiffnessMode::Full)?;
    let b = assemble_load(mesh, data, LoadMode::Eps { eps });
    let system = apply_dirichlet(&a, &b, mesh, &[BoundaryTag::GammaEps])?;
    let constraints = match data.g_mode {
        crate::problem_data::GMode::Unconstrained => Vec::new(),
        crate::problem_data::GMode::Standard => mesh
            .node_set(BoundaryTag::SEps)
            .iter()
            .filter_map(|&n| {
                system.free_map[n].map(|red| {
                    let p = mesh.nodes[n];
                    (red, data.g.eval(p[0], p[1]))
                })
            })
            .collect(),
    };
    Ok(crate::vi_solver::DiscreteVI::new(
        system,
        constraints,
        crate::vi_solver::ViLabel::EpsProblem,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::parse_expression;
    use crate::geometry::{build_junction_mesh, build_rect_mesh, JunctionConfig};
    use crate::problem_data::{GMode, ProblemData};
    use crate::sparse::SkylineCholesky;
    use approx::assert_relative_eq;

    fn junction_config() -> JunctionConfig {
        JunctionConfig {
            a: 1.0,
            l: 1.0,
            h: 0.5,
            n_rods: 2,
            gamma: parse_expression("1").unwrap(),
            nx_rod: 2,
            ny_rod: 4,
            ny_body: 4,
        }
    }

    fn data(f: &str, g: &str, d: &str) -> ProblemData {
        ProblemData::new(
            parse_expression(f).unwrap(),
            parse_expression(g).unwrap(),
            parse_expression(d).unwrap(),
            GMode::Standard,
        )
    }

    #[test]
    fn unit_square_element_matrix() {
        let mesh = build_rect_mesh(0.0, 1.0, 0.0, 1.0, 1, 1, Region::Body);
        let a = assemble_stiffness(&mesh, StiffnessMode::Full).unwrap();
        // nodes: (0,0)=0, (0,1)=1, (1,0)=2, (1,1)=3 in lexicographic order;
        // diagonal 2/3, opposite corners -1/3, adjacent -1/6
        for i in 0..4 {
            assert_relative_eq!(a.get(i, i), 2.0 / 3.0, epsilon = 1e-14);
        }
        assert_relative_eq!(a.get(0, 3), -1.0 / 3.0, epsilon = 1e-14);
        assert_relative_eq!(a.get(1, 2), -1.0 / 3.0, epsilon = 1e-14);
        assert_relative_eq!(a.get(0, 1), -1.0 / 6.0, epsilon = 1e-14);
        assert_relative_eq!(a.get(0, 2), -1.0 / 6.0, epsilon = 1e-14);
    }

    #[test]
    fn energy_of_linear_field_is_area() {
        let mesh = build_junction_mesh(&junction_config()).unwrap();
        let a = assemble_stiffness(&mesh, StiffnessMode::Full).unwrap();
        let u: Vec<f64> = mesh.nodes.iter().map(|p| p[0]).collect();
        // |grad u|^2 = 1, so u'Au = |Omega_eps| = a*gamma + a*h*l
        assert_relative_eq!(a.bilinear(&u, &u), 1.5, epsilon = 1e-10);
    }

    #[test]
    fn anisotropic_energy_scales_with_h() {
        let mesh = build_rect_mesh(0.0, 1.0, -1.0, 0.0, 4, 4, Region::D0);
        let a = assemble_stiffness(&mesh, StiffnessMode::LimitAnisotropic { h: 0.5 }).unwrap();
        let u: Vec<f64> = mesh.nodes.iter().map(|p| p[1]).collect();
        assert_relative_eq!(a.bilinear(&u, &u), 0.5, epsilon = 1e-12);
        // same interpolant under Full mode, scaled by h on D0 elements
        let full = assemble_stiffness(&mesh, StiffnessMode::Full).unwrap();
        assert_relative_eq!(a.bilinear(&u, &u), 0.5 * full.bilinear(&u, &u), epsilon = 1e-12);
    }

    #[test]
    fn anisotropic_mode_rejects_junction_mesh() {
        let mesh = build_junction_mesh(&junction_config()).unwrap();
        assert!(matches!(
            assemble_stiffness(&mesh, StiffnessMode::LimitAnisotropic { h: 0.5 }),
            Err(AssemblyError::MissingRegionFlags)
        ));
    }

    #[test]
    fn load_partition_of_unity() {
        let cfg = junction_config();
        let mesh = build_junction_mesh(&cfg).unwrap();
        let eps = cfg.eps();

        let zero = assemble_load(&mesh, &data("0", "0", "0"), LoadMode::Eps { eps });
        assert!(zero.iter().all(|&v| v == 0.0));

        let f_only = assemble_load(&mesh, &data("1", "0", "0"), LoadMode::Eps { eps });
        assert_relative_eq!(f_only.iter().sum::<f64>(), 1.5, max_relative = 1e-10);

        let d_only = assemble_load(&mesh, &data("0", "0", "1"), LoadMode::Eps { eps });
        // eps * |S_eps| = eps * 2Nl = 2al
        assert_relative_eq!(d_only.iter().sum::<f64>(), 2.0, max_relative = 1e-10);
    }

    #[test]
    fn limit_load_partition_of_unity() {
        let cfg = junction_config();
        let mesh = crate::geometry::build_limit_mesh(&cfg).unwrap();
        let b = assemble_load(&mesh, &data("1", "0", "1"), LoadMode::Limit { h: 0.5 });
        // body: area 1; D0: (h*1 + 2*1) * area 1 = 2.5
        assert_relative_eq!(b.iter().sum::<f64>(), 1.0 + 2.5, max_relative = 1e-10);
    }

    #[test]
    fn patch_test_interior_rows_annihilate_linears() {
        let cfg = JunctionConfig {
            gamma: parse_expression("1+0.2*x1").unwrap(),
            ..junction_config()
        };
        let mesh = build_junction_mesh(&cfg).unwrap();
        let a = assemble_stiffness(&mesh, StiffnessMode::Full).unwrap();
        let u: Vec<f64> = mesh.nodes.iter().map(|p| 1.0 + 2.0 * p[0] - 3.0 * p[1]).collect();
        let au = a.matvec_alloc(&u);
        let mut boundary = vec![false; mesh.n_nodes()];
        for be in &mesh.boundary_edges {
            let (p, q) = mesh.edge_nodes(be.elem, be.local_edge);
            boundary[p] = true;
            boundary[q] = true;
        }
        for n in 0..mesh.n_nodes() {
            if !boundary[n] {
                assert!(
                    au[n].abs() < 1e-10,
                    "interior residual {} at node {}",
                    au[n],
                    n
                );
            }
        }
    }

    #[test]
    fn assembled_matrix_is_symmetric_and_reduced_spd() {
        let mesh = build_junction_mesh(&junction_config()).unwrap();
        let a = assemble_stiffness(&mesh, StiffnessMode::Full).unwrap();
        assert!(a.asymmetry() <= 1e-14);
        let b = assemble_load(&mesh, &data("1", "0", "0"), LoadMode::Eps { eps: 0.5 });
        let system = apply_dirichlet(&a, &b, &mesh, &[BoundaryTag::GammaEps]).unwrap();
        assert!(system.smallest_ritz(50, 3) > 0.0);
    }

    #[test]
    fn dirichlet_reduction_counts() {
        let cfg = junction_config();
        let mesh = build_junction_mesh(&cfg).unwrap();
        let a = assemble_stiffness(&mesh, StiffnessMode::Full).unwrap();
        let b = vec![0.0; mesh.n_nodes()];
        let system = apply_dirichlet(&a, &b, &mesh, &[BoundaryTag::GammaEps]).unwrap();
        // one eliminated node per rod-base grid point
        let expected = mesh.n_nodes() - (cfg.nx_rod + 1) * cfg.n_rods;
        assert_eq!(system.n_reduced(), expected);

        // empty tag list: identity reduction
        let id = apply_dirichlet(&a, &b, &mesh, &[]).unwrap();
        assert_eq!(id.n_reduced(), mesh.n_nodes());
        assert!(id.free_nodes.iter().enumerate().all(|(i, &n)| i == n));

        // tag with no nodes in this mesh: hard error
        assert!(matches!(
            apply_dirichlet(&a, &b, &mesh, &[BoundaryTag::Il]),
            Err(AssemblyError::EmptyDirichletTag(_))
        ));
    }

    #[test]
    fn unit_square_poisson_center_value_matches_series() {
        let n = 32;
        let mesh = build_rect_mesh(0.0, 1.0, 0.0, 1.0, n, n, Region::Body);
        let a = assemble_stiffness(&mesh, StiffnessMode::Full).unwrap();
        let b = assemble_load(&mesh, &data("1", "0", "0"), LoadMode::Eps { eps: 0.0 });
        let system =
            apply_dirichlet(&a, &b, &mesh, &[BoundaryTag::Il, BoundaryTag::NeumannBody]).unwrap();
        let chol = SkylineCholesky::factor(&system.a).unwrap();
        let u = system.expand(&chol.solve(&system.b));
        let center = mesh
            .nodes
            .iter()
            .position(|p| p[0] == 0.5 && p[1] == 0.5)
            .unwrap();

        // series oracle: u(1/2,1/2) = sum 16 sin(m pi/2) sin(n pi/2) / (pi^4 m n (m^2+n^2))
        let mut series = 0.0;
        let pi = std::f64::consts::PI;
        for m in (1..200).step_by(2) {
            for k in (1..200).step_by(2) {
                let (mf, kf) = (m as f64, k as f64);
                series += 16.0 * (mf * pi / 2.0).sin() * (kf * pi / 2.0).sin()
                    / (pi.powi(4) * mf * kf * (mf * mf + kf * kf));
            }
        }
        assert_relative_eq!(series, 0.0737, epsilon = 5e-5);
        assert!((u[center] - series).abs() < 5e-4);
    }

    #[test]
    fn mass_matrix_integrates_area() {
        let mesh = build_junction_mesh(&junction_config()).unwrap();
        let m = assemble_mass(&mesh);
        let ones = vec![1.0; mesh.n_nodes()];
        assert_relative_eq!(m.bilinear(&ones, &ones), 1.5, epsilon = 1e-12);
    }
}
