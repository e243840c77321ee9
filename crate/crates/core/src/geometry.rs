//! Meshes for the thick junction and for its limit domain.
//!
//! The junction domain is the union of a body
//! `{0 < x1 < a, 0 < x2 < gamma(x1)}` and `N` thin vertical rods of width
//! `eps*h` and length `l` attached along `x2 = 0`, where `eps = a/N`. The
//! limit domain replaces the rods by the full rectangle
//! `D0 = (0,a) x (-l,0)`.
//!
//! Both meshes are structured grids of bilinear quadrilaterals. The body
//! `x1`-grid contains every rod-edge abscissa, so the rod sides, the rod
//! bases and the joint line `I0 = {x2 = 0}` are unions of element edges and
//! all boundary sets are represented exactly. The curved top `gamma` is
//! handled by the vertical mapping `x2 = s * gamma(x1)`; elements are
//! isoparametric, so `gamma` is approximated piecewise linearly.
//!
//! Node numbering is lexicographic in `(x1, x2)` (column by column, bottom
//! to top), which keeps construction deterministic and gives the assembled
//! matrices a small profile.
//!
//! Local edge convention for an element `[n0, n1, n2, n3]` (counterclockwise
//! from the bottom-left corner): edge 0 = bottom `n0-n1`, edge 1 = right
//! `n1-n2`, edge 2 = top `n2-n3`, edge 3 = left `n3-n0`.

use std::collections::BTreeMap;

use crate::element::{gauss2, ElementGeom};
use crate::expr::Expr;

/// Tags carried by boundary edges and derived node sets.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum BoundaryTag {
    /// Vertical sides of the thin rods (the Signorini part).
    SEps,
    /// Bases of the thin rods at `x2 = -l` (homogeneous Dirichlet).
    GammaEps,
    /// The joint line `{x2 = 0, 0 < x1 < a}`. Interior interface; exposed
    /// only as a node set and as the interface edge chain, never as a
    /// boundary edge.
    I0,
    /// Bottom of the limit rectangle, `{x2 = -l}` (homogeneous Dirichlet).
    Il,
    /// Outer boundary of the body (left, right and top sides).
    NeumannBody,
    /// Exposed segments of `{x2 = 0}` between the rods.
    NeumannRodTopGap,
    /// Lateral sides of `D0` in the limit mesh. The anisotropic limit form
    /// carries no `x1`-flux there, so no condition is imposed; the tag is
    /// retained for audit.
    NoFlux,
}

impl BoundaryTag {
    pub const ALL: [BoundaryTag; 7] = [
        BoundaryTag::SEps,
        BoundaryTag::GammaEps,
        BoundaryTag::I0,
        BoundaryTag::Il,
        BoundaryTag::NeumannBody,
        BoundaryTag::NeumannRodTopGap,
        BoundaryTag::NoFlux,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            BoundaryTag::SEps => "S_eps",
            BoundaryTag::GammaEps => "Gamma_eps",
            BoundaryTag::I0 => "I_0",
            BoundaryTag::Il => "I_l",
            BoundaryTag::NeumannBody => "NeumannBody",
            BoundaryTag::NeumannRodTopGap => "NeumannRodTopGap",
            BoundaryTag::NoFlux => "NoFlux",
        }
    }
}

/// Region flag carried by every element.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Region {
    /// Junction body (both mesh kinds).
    Body,
    /// A thin rod of the junction mesh.
    Rod,
    /// The limit rectangle `D0`.
    D0,
}

impl Region {
    pub fn as_str(&self) -> &'static str {
        match self {
            Region::Body => "body",
            Region::Rod => "rod",
            Region::D0 => "d0",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MeshKind {
    Junction,
    Limit,
}

/// Geometric and resolution parameters of the junction and limit domains.
#[derive(Debug, Clone)]
pub struct JunctionConfig {
    /// Width of the body (and of the rod strip).
    pub a: f64,
    /// Length of the rods.
    pub l: f64,
    /// Relative rod thickness, in `(0, 1)`.
    pub h: f64,
    /// Number of rods.
    pub n_rods: usize,
    /// Upper boundary of the body as an expression in `x1`.
    pub gamma: Expr,
    /// Element columns across one rod width (>= 2).
    pub nx_rod: usize,
    /// Element rows along the rod length (>= 4).
    pub ny_rod: usize,
    /// Element rows through the body (>= 4).
    pub ny_body: usize,
}

impl JunctionConfig {
    /// The period of the rod arrangement, `eps = a / N`.
    pub fn eps(&self) -> f64 {
        self.a / self.n_rods as f64
    }

    /// Same configuration with a different rod count.
    pub fn with_n_rods(&self, n_rods: usize) -> Self {
        JunctionConfig {
            n_rods,
            gamma: self.gamma.clone(),
            ..*self
        }
    }

    /// Same configuration with every resolution count multiplied by `k`.
    pub fn refined(&self, k: usize) -> Self {
        JunctionConfig {
            nx_rod: self.nx_rod * k,
            ny_rod: self.ny_rod * k,
            ny_body: self.ny_body * k,
            gamma: self.gamma.clone(),
            ..*self
        }
    }

    pub fn gamma_at(&self, x1: f64) -> f64 {
        self.gamma.eval(x1, 0.0)
    }

    /// Closed rod intervals `[left_j, right_j]` on the `x1` axis.
    pub fn rod_intervals(&self) -> Vec<(f64, f64)> {
        let eps = self.eps();
        (0..self.n_rods)
            .map(|j| {
                let j = j as f64;
                (
                    eps * (j + (1.0 - self.h) / 2.0),
                    eps * (j + (1.0 + self.h) / 2.0),
                )
            })
            .collect()
    }

    /// Check every config invariant; returns the list of violations.
    pub fn validate(&self) -> Result<(), GeometryError> {
        if !(self.a > 0.0) || !self.a.is_finite() {
            return Err(GeometryError::InvalidConfig("a must be positive".into()));
        }
        if !(self.l > 0.0) || !self.l.is_finite() {
            return Err(GeometryError::InvalidConfig("l must be positive".into()));
        }
        if !(self.h > 0.0 && self.h < 1.0) {
            return Err(GeometryError::InvalidConfig(
                "h must lie strictly between 0 and 1".into(),
            ));
        }
        if self.n_rods == 0 {
            return Err(GeometryError::InvalidConfig("n must be >= 1".into()));
        }
        let eps = self.eps();
        if !(eps > 0.0 && eps * self.h < self.a) {
            return Err(GeometryError::InvalidConfig(
                "derived eps = a/n must be positive with eps*h < a".into(),
            ));
        }
        if self.nx_rod < 2 {
            return Err(GeometryError::InvalidConfig("nx_rod must be >= 2".into()));
        }
        if self.ny_rod < 4 {
            return Err(GeometryError::InvalidConfig("ny_rod must be >= 4".into()));
        }
        if self.ny_body < 4 {
            return Err(GeometryError::InvalidConfig("ny_body must be >= 4".into()));
        }
        // gamma must be a function of x1 alone
        for i in 0..=16 {
            let x1 = self.a * i as f64 / 16.0;
            if self.gamma.eval(x1, 0.0) != self.gamma.eval(x1, 0.5) {
                return Err(GeometryError::InvalidConfig(
                    "gamma must not depend on x2".into(),
                ));
            }
        }
        // strict positivity on a sampled grid
        for i in 0..=1000 {
            let x1 = self.a * i as f64 / 1000.0;
            let g = self.gamma_at(x1);
            if !(g > 0.0) || !g.is_finite() {
                return Err(GeometryError::NonpositiveGamma { x1, value: g });
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, thiserror::Error)]
pub enum GeometryError {
    #[error("invalid junction config: {0}")]
    InvalidConfig(String),
    #[error("gamma({x1}) = {value} is not strictly positive")]
    NonpositiveGamma { x1: f64, value: f64 },
    #[error("body x1-grid does not conform to rod edge at x1 = {0}")]
    NonConformingGrid(f64),
    #[error("tag {0} has no boundary edges in this mesh")]
    UnknownTag(&'static str),
    #[error("element {elem} has non-positive Jacobian {det} at a quadrature point")]
    DegenerateElement { elem: usize, det: f64 },
}

/// A bilinear quadrilateral with counterclockwise node ids and a region flag.
#[derive(Debug, Clone, Copy)]
pub struct Element {
    pub nodes: [usize; 4],
    pub region: Region,
}

/// A tagged boundary edge, addressed as (element, local edge).
#[derive(Debug, Clone, Copy)]
pub struct BoundaryEdge {
    pub elem: usize,
    pub local_edge: u8,
    pub tag: BoundaryTag,
}

/// Column-structured layout of the grid, kept to allow exact point location
/// when transferring fields between meshes.
#[derive(Debug, Clone)]
pub struct MeshStructure {
    /// Column abscissas, ascending.
    pub xs: Vec<f64>,
    /// `gamma` evaluated at each column.
    pub gamma_at: Vec<f64>,
    /// Vertical fractions `s_k = k/ny_body` of the mapped body grid.
    pub body_fracs: Vec<f64>,
    /// Grid levels of the sub-zero part, `-l = y_0 < ... < y_m = 0`
    /// (rod levels for the junction mesh, `D0` levels for the limit mesh).
    pub d0_levels: Vec<f64>,
    /// First node id of each column.
    pub col_start: Vec<usize>,
    /// Whether the column carries sub-zero nodes.
    pub col_has_rod: Vec<bool>,
    pub ny_rod: usize,
    pub ny_body: usize,
}

impl MeshStructure {
    pub fn n_cols(&self) -> usize {
        self.xs.len()
    }

    /// Node id at body level `k` (0 = the `x2 = 0` line) of column `i`.
    pub fn body_node(&self, i: usize, k: usize) -> usize {
        if self.col_has_rod[i] {
            self.col_start[i] + self.ny_rod + k
        } else {
            self.col_start[i] + k
        }
    }

    /// Node id at sub-zero level `m` (0 = bottom) of column `i`.
    /// Only valid when `col_has_rod[i]`.
    pub fn sub_node(&self, i: usize, m: usize) -> usize {
        debug_assert!(self.col_has_rod[i]);
        self.col_start[i] + m
    }
}

/// Conforming structured quadrilateral mesh with tagged boundary.
#[derive(Debug, Clone)]
pub struct Mesh {
    pub kind: MeshKind,
    pub nodes: Vec<[f64; 2]>,
    pub elements: Vec<Element>,
    pub boundary_edges: Vec<BoundaryEdge>,
    /// The `I0` chain: bottom edges of the body elements sitting on
    /// `{x2 = 0}`, left to right. These are interior edges over the rods
    /// (junction mesh) and over all of `D0` (limit mesh).
    pub interface_edges: Vec<(usize, u8)>,
    /// Tag -> sorted node ids. Derived from the tagged edges, with two
    /// adjustments: `S_eps` drops nodes shared with `Gamma_eps` (Dirichlet
    /// wins at the rod bases) and `I_0` is derived from the interface chain.
    pub node_sets: BTreeMap<BoundaryTag, Vec<usize>>,
    pub structure: MeshStructure,
    /// Closed rod intervals (junction mesh only).
    pub rod_intervals: Vec<(f64, f64)>,
}

impl Mesh {
    pub fn n_nodes(&self) -> usize {
        self.nodes.len()
    }

    pub fn n_elements(&self) -> usize {
        self.elements.len()
    }

    pub fn element_coords(&self, e: usize) -> [[f64; 2]; 4] {
        let n = &self.elements[e].nodes;
        [
            self.nodes[n[0]],
            self.nodes[n[1]],
            self.nodes[n[2]],
            self.nodes[n[3]],
        ]
    }

    /// Global node ids of a local edge, in counterclockwise order.
    pub fn edge_nodes(&self, elem: usize, local_edge: u8) -> (usize, usize) {
        let n = &self.elements[elem].nodes;
        let i = local_edge as usize;
        (n[i], n[(i + 1) % 4])
    }

    pub fn edge_length(&self, elem: usize, local_edge: u8) -> f64 {
        let (p, q) = self.edge_nodes(elem, local_edge);
        let (p, q) = (self.nodes[p], self.nodes[q]);
        ((p[0] - q[0]).powi(2) + (p[1] - q[1]).powi(2)).sqrt()
    }

    /// Sum of Euclidean lengths of the boundary edges carrying `tag`.
    pub fn boundary_measure(&self, tag: BoundaryTag) -> Result<f64, GeometryError> {
        let mut total = 0.0;
        let mut seen = false;
        for be in &self.boundary_edges {
            if be.tag == tag {
                seen = true;
                total += self.edge_length(be.elem, be.local_edge);
            }
        }
        if !seen {
            return Err(GeometryError::UnknownTag(tag.as_str()));
        }
        Ok(total)
    }

    /// Node ids carrying `tag` (empty slice if the tag is absent).
    pub fn node_set(&self, tag: BoundaryTag) -> &[usize] {
        self.node_sets.get(&tag).map(|v| v.as_slice()).unwrap_or(&[])
    }

    /// Verify that every element has a strictly positive Jacobian at all
    /// 2x2 Gauss points.
    pub fn check_jacobians(&self) -> Result<(), GeometryError> {
        let gp = gauss2();
        for e in 0..self.elements.len() {
            let geom = ElementGeom::new(self.element_coords(e));
            for &(xi, eta, _) in &gp {
                let det = geom.jacobian_det(xi, eta);
                if det <= 0.0 {
                    return Err(GeometryError::DegenerateElement { elem: e, det });
                }
            }
        }
        Ok(())
    }

    /// Total area by 2x2 Gauss quadrature.
    pub fn area(&self) -> f64 {
        let gp = gauss2();
        let mut total = 0.0;
        for e in 0..self.elements.len() {
            let geom = ElementGeom::new(self.element_coords(e));
            for &(xi, eta, w) in &gp {
                total += w * geom.jacobian_det(xi, eta);
            }
        }
        total
    }
}

/// Uniform subdivision of `[lo, hi]` into `n` intervals with exact endpoints.
///
/// Interior points are `lo + k*(width/n)`, which reproduces the coarse points
/// bitwise when `n` is doubled.
fn subdivide(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    let step = (hi - lo) / n as f64;
    let mut pts = Vec::with_capacity(n + 1);
    pts.push(lo);
    for k in 1..n {
        pts.push(lo + k as f64 * step);
    }
    pts.push(hi);
    pts
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum IntervalKind {
    Gap,
    /// (first interval of its rod, last interval of its rod)
    Rod(bool, bool),
}

/// The body `x1`-grid: union of rod-edge abscissas with uniform subdivision
/// of every rod and gap interval. Interval counts are proportional to the
/// interval width measured in rod widths, so the element width stays
/// balanced across the strip and the count per period is independent of `N`.
fn junction_x_grid(config: &JunctionConfig) -> (Vec<f64>, Vec<IntervalKind>) {
    let rods = config.rod_intervals();
    let rod_width = config.eps() * config.h;
    let mut xs: Vec<f64> = Vec::new();
    let mut kinds: Vec<IntervalKind> = Vec::new();

    let mut push_span = |xs: &mut Vec<f64>, lo: f64, hi: f64, kind: IntervalKind| {
        let n = match kind {
            IntervalKind::Rod(_, _) => config.nx_rod,
            IntervalKind::Gap => {
                let ideal = config.nx_rod as f64 * (hi - lo) / rod_width;
                (ideal.round() as usize).max(1)
            }
        };
        let pts = subdivide(lo, hi, n);
        for (k, &p) in pts.iter().enumerate() {
            if k == 0 {
                if xs.is_empty() {
                    xs.push(p);
                }
                continue;
            }
            xs.push(p);
            kinds.push(match kind {
                IntervalKind::Gap => IntervalKind::Gap,
                IntervalKind::Rod(_, _) => {
                    IntervalKind::Rod(k == 1, k == pts.len() - 1)
                }
            });
        }
    };

    let mut cursor = 0.0;
    for &(left, right) in &rods {
        if left > cursor {
            push_span(&mut xs, cursor, left, IntervalKind::Gap);
        }
        push_span(&mut xs, left, right, IntervalKind::Rod(false, false));
        cursor = right;
    }
    if cursor < config.a {
        push_span(&mut xs, cursor, config.a, IntervalKind::Gap);
    }
    (xs, kinds)
}

/// Build the conforming mesh of the thick junction `Omega_eps`.
pub fn build_junction_mesh(config: &JunctionConfig) -> Result<Mesh, GeometryError> {
    config.validate()?;
    let (xs, kinds) = junction_x_grid(config);
    let rods = config.rod_intervals();

    // defensive: every rod edge must be a grid point
    for &(left, right) in &rods {
        if !xs.contains(&left) {
            return Err(GeometryError::NonConformingGrid(left));
        }
        if !xs.contains(&right) {
            return Err(GeometryError::NonConformingGrid(right));
        }
    }

    let n_cols = xs.len();
    let col_has_rod: Vec<bool> = (0..n_cols)
        .map(|i| {
            let left_rod = i > 0 && matches!(kinds[i - 1], IntervalKind::Rod(_, _));
            let right_rod = i + 1 < n_cols && matches!(kinds[i], IntervalKind::Rod(_, _));
            left_rod || right_rod
        })
        .collect();

    let d0_levels = subdivide(-config.l, 0.0, config.ny_rod);
    let body_fracs = subdivide(0.0, 1.0, config.ny_body);
    let gamma_at: Vec<f64> = xs.iter().map(|&x| config.gamma_at(x)).collect();

    let mut nodes: Vec<[f64; 2]> = Vec::new();
    let mut col_start = Vec::with_capacity(n_cols);
    for i in 0..n_cols {
        col_start.push(nodes.len());
        if col_has_rod[i] {
            for &y in &d0_levels {
                nodes.push([xs[i], y]);
            }
        } else {
            nodes.push([xs[i], 0.0]);
        }
        for &s in &body_fracs[1..] {
            nodes.push([xs[i], s * gamma_at[i]]);
        }
    }

    let structure = MeshStructure {
        xs,
        gamma_at,
        body_fracs,
        d0_levels,
        col_start,
        col_has_rod,
        ny_rod: config.ny_rod,
        ny_body: config.ny_body,
    };

    let mut elements: Vec<Element> = Vec::new();
    let mut boundary_edges: Vec<BoundaryEdge> = Vec::new();
    let mut interface_edges: Vec<(usize, u8)> = Vec::new();
    let n_intervals = kinds.len();

    for i in 0..n_intervals {
        if let IntervalKind::Rod(first, last) = kinds[i] {
            for m in 0..config.ny_rod {
                let id = elements.len();
                elements.push(Element {
                    nodes: [
                        structure.sub_node(i, m),
                        structure.sub_node(i + 1, m),
                        structure.sub_node(i + 1, m + 1),
                        structure.sub_node(i, m + 1),
                    ],
                    region: Region::Rod,
                });
                if m == 0 {
                    boundary_edges.push(BoundaryEdge {
                        elem: id,
                        local_edge: 0,
                        tag: BoundaryTag::GammaEps,
                    });
                }
                if first {
                    boundary_edges.push(BoundaryEdge {
                        elem: id,
                        local_edge: 3,
                        tag: BoundaryTag::SEps,
                    });
                }
                if last {
                    boundary_edges.push(BoundaryEdge {
                        elem: id,
                        local_edge: 1,
                        tag: BoundaryTag::SEps,
                    });
                }
            }
        }
        for k in 0..config.ny_body {
            let id = elements.len();
            elements.push(Element {
                nodes: [
                    structure.body_node(i, k),
                    structure.body_node(i + 1, k),
                    structure.body_node(i + 1, k + 1),
                    structure.body_node(i, k + 1),
                ],
                region: Region::Body,
            });
            if k == 0 {
                interface_edges.push((id, 0));
                if kinds[i] == IntervalKind::Gap {
                    boundary_edges.push(BoundaryEdge {
                        elem: id,
                        local_edge: 0,
                        tag: BoundaryTag::NeumannRodTopGap,
                    });
                }
            }
            if k == config.ny_body - 1 {
                boundary_edges.push(BoundaryEdge {
                    elem: id,
                    local_edge: 2,
                    tag: BoundaryTag::NeumannBody,
                });
            }
            if i == 0 {
                boundary_edges.push(BoundaryEdge {
                    elem: id,
                    local_edge: 3,
                    tag: BoundaryTag::NeumannBody,
                });
            }
            if i == n_intervals - 1 {
                boundary_edges.push(BoundaryEdge {
                    elem: id,
                    local_edge: 1,
                    tag: BoundaryTag::NeumannBody,
                });
            }
        }
    }

    let mut mesh = Mesh {
        kind: MeshKind::Junction,
        nodes,
        elements,
        boundary_edges,
        interface_edges,
        node_sets: BTreeMap::new(),
        structure,
        rod_intervals: rods,
    };
    derive_node_sets(&mut mesh);
    mesh.check_jacobians()?;
    Ok(mesh)
}

/// Build the conforming mesh of the limit domain `Omega_0 union D0`.
///
/// The `x1`-grid is uniform with `N * nx_rod` columns; `D0` carries `ny_rod`
/// uniform rows, the body the mapped `ny_body` rows, sharing nodes on `I0`.
pub fn build_limit_mesh(config: &JunctionConfig) -> Result<Mesh, GeometryError> {
    config.validate()?;
    let n_x = config.n_rods * config.nx_rod;
    let xs = subdivide(0.0, config.a, n_x);
    let d0_levels = subdivide(-config.l, 0.0, config.ny_rod);
    let body_fracs = subdivide(0.0, 1.0, config.ny_body);
    let gamma_at: Vec<f64> = xs.iter().map(|&x| config.gamma_at(x)).collect();
    let n_cols = xs.len();

    let mut nodes: Vec<[f64; 2]> = Vec::new();
    let mut col_start = Vec::with_capacity(n_cols);
    for i in 0..n_cols {
        col_start.push(nodes.len());
        for &y in &d0_levels {
            nodes.push([xs[i], y]);
        }
        for &s in &body_fracs[1..] {
            nodes.push([xs[i], s * gamma_at[i]]);
        }
    }

    let structure = MeshStructure {
        xs,
        gamma_at,
        body_fracs,
        d0_levels,
        col_start,
        col_has_rod: vec![true; n_cols],
        ny_rod: config.ny_rod,
        ny_body: config.ny_body,
    };

    let mut elements: Vec<Element> = Vec::new();
    let mut boundary_edges: Vec<BoundaryEdge> = Vec::new();
    let mut interface_edges: Vec<(usize, u8)> = Vec::new();

    for i in 0..n_x {
        for m in 0..config.ny_rod {
            let id = elements.len();
            elements.push(Element {
                nodes: [
                    structure.sub_node(i, m),
                    structure.sub_node(i + 1, m),
                    structure.sub_node(i + 1, m + 1),
                    structure.sub_node(i, m + 1),
                ],
                region: Region::D0,
            });
            if m == 0 {
                boundary_edges.push(BoundaryEdge {
                    elem: id,
                    local_edge: 0,
                    tag: BoundaryTag::Il,
                });
            }
            if i == 0 {
                boundary_edges.push(BoundaryEdge {
                    elem: id,
                    local_edge: 3,
                    tag: BoundaryTag::NoFlux,
                });
            }
            if i == n_x - 1 {
                boundary_edges.push(BoundaryEdge {
                    elem: id,
                    local_edge: 1,
                    tag: BoundaryTag::NoFlux,
                });
            }
        }
        for k in 0..config.ny_body {
            let id = elements.len();
            elements.push(Element {
                nodes: [
                    structure.body_node(i, k),
                    structure.body_node(i + 1, k),
                    structure.body_node(i + 1, k + 1),
                    structure.body_node(i, k + 1),
                ],
                region: Region::Body,
            });
            if k == 0 {
                interface_edges.push((id, 0));
            }
            if k == config.ny_body - 1 {
                boundary_edges.push(BoundaryEdge {
                    elem: id,
                    local_edge: 2,
                    tag: BoundaryTag::NeumannBody,
                });
            }
            if i == 0 {
                boundary_edges.push(BoundaryEdge {
                    elem: id,
                    local_edge: 3,
                    tag: BoundaryTag::NeumannBody,
                });
            }
            if i == n_x - 1 {
                boundary_edges.push(BoundaryEdge {
                    elem: id,
                    local_edge: 1,
                    tag: BoundaryTag::NeumannBody,
                });
            }
        }
    }

    let mut mesh = Mesh {
        kind: MeshKind::Limit,
        nodes,
        elements,
        boundary_edges,
        interface_edges,
        node_sets: BTreeMap::new(),
        structure,
        rod_intervals: Vec::new(),
    };
    derive_node_sets(&mut mesh);
    mesh.check_jacobians()?;
    Ok(mesh)
}

/// Uniform rectangle mesh on `[x0, x1] x [y0, y1]` with `nx * ny` elements.
///
/// The bottom side is tagged `Il`, the remaining sides `NeumannBody`, so the
/// usual tag-driven Dirichlet reduction can pin the bottom alone or the whole
/// boundary. Used by eigenvalue sanity checks and oracle tests.
pub fn build_rect_mesh(
    x0: f64,
    x1: f64,
    y0: f64,
    y1: f64,
    nx: usize,
    ny: usize,
    region: Region,
) -> Mesh {
    assert!(nx >= 1 && ny >= 1 && x1 > x0 && y1 > y0);
    let xs = subdivide(x0, x1, nx);
    let ys = subdivide(y0, y1, ny);
    let mut nodes = Vec::with_capacity((nx + 1) * (ny + 1));
    let mut col_start = Vec::with_capacity(nx + 1);
    for &x in &xs {
        col_start.push(nodes.len());
        for &y in &ys {
            nodes.push([x, y]);
        }
    }
    let node = |i: usize, j: usize| i * (ny + 1) + j;
    let mut elements = Vec::with_capacity(nx * ny);
    let mut boundary_edges = Vec::new();
    for i in 0..nx {
        for j in 0..ny {
            let id = elements.len();
            elements.push(Element {
                nodes: [node(i, j), node(i + 1, j), node(i + 1, j + 1), node(i, j + 1)],
                region,
            });
            if j == 0 {
                boundary_edges.push(BoundaryEdge {
                    elem: id,
                    local_edge: 0,
                    tag: BoundaryTag::Il,
                });
            }
            if j == ny - 1 {
                boundary_edges.push(BoundaryEdge {
                    elem: id,
                    local_edge: 2,
                    tag: BoundaryTag::NeumannBody,
                });
            }
            if i == 0 {
                boundary_edges.push(BoundaryEdge {
                    elem: id,
                    local_edge: 3,
                    tag: BoundaryTag::NeumannBody,
                });
            }
            if i == nx - 1 {
                boundary_edges.push(BoundaryEdge {
                    elem: id,
                    local_edge: 1,
                    tag: BoundaryTag::NeumannBody,
                });
            }
        }
    }
    let structure = MeshStructure {
        xs,
        gamma_at: vec![y1; nx + 1],
        body_fracs: Vec::new(),
        d0_levels: ys,
        col_start,
        col_has_rod: vec![false; nx + 1],
        ny_rod: 0,
        ny_body: ny,
    };
    let mut mesh = Mesh {
        kind: MeshKind::Limit,
        nodes,
        elements,
        boundary_edges,
        interface_edges: Vec::new(),
        node_sets: BTreeMap::new(),
        structure,
        rod_intervals: Vec::new(),
    };
    derive_node_sets(&mut mesh);
    mesh
}

fn derive_node_sets(mesh: &mut Mesh) {
    let mut sets: BTreeMap<BoundaryTag, Vec<usize>> = BTreeMap::new();
    for be in &mesh.boundary_edges {
        let (p, q) = mesh.edge_nodes(be.elem, be.local_edge);
        let set = sets.entry(be.tag).or_default();
        set.push(p);
        set.push(q);
    }
    // Dirichlet wins over Signorini at the rod bases.
    if let Some(gamma) = sets.get(&BoundaryTag::GammaEps).cloned() {
        if let Some(s_eps) = sets.get_mut(&BoundaryTag::SEps) {
            s_eps.retain(|n| !gamma.contains(n));
        }
    }
    let mut i0: Vec<usize> = Vec::new();
    for &(elem, local) in &mesh.interface_edges {
        let (p, q) = mesh.edge_nodes(elem, local);
        i0.push(p);
        i0.push(q);
    }
    sets.insert(BoundaryTag::I0, i0);
    for set in sets.values_mut() {
        set.sort_unstable();
        set.dedup();
    }
    mesh.node_sets = sets;
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::parse_expression;
    use approx::assert_relative_eq;
    use std::collections::HashMap;

    fn config(a: f64, l: f64, h: f64, n: usize, gamma: &str) -> JunctionConfig {
        JunctionConfig {
            a,
            l,
            h,
            n_rods: n,
            gamma: parse_expression(gamma).unwrap(),
            nx_rod: 2,
            ny_rod: 4,
            ny_body: 4,
        }
    }

    #[test]
    fn rod_intervals_match_direct_evaluation() {
        let c = config(1.0, 1.0, 0.5, 2, "1");
        let rods = c.rod_intervals();
        assert_eq!(rods.len(), 2);
        assert_relative_eq!(rods[0].0, 0.125);
        assert_relative_eq!(rods[0].1, 0.375);
        assert_relative_eq!(rods[1].0, 0.625);
        assert_relative_eq!(rods[1].1, 0.875);
    }

    #[test]
    fn boundary_measures_equal_exact_values() {
        let c = config(1.0, 1.0, 0.5, 2, "1");
        let mesh = build_junction_mesh(&c).unwrap();
        // 2*N*l and a*h
        assert_relative_eq!(
            mesh.boundary_measure(BoundaryTag::SEps).unwrap(),
            4.0,
            max_relative = 1e-10
        );
        assert_relative_eq!(
            mesh.boundary_measure(BoundaryTag::GammaEps).unwrap(),
            0.5,
            max_relative = 1e-10
        );
        assert!(mesh.boundary_measure(BoundaryTag::Il).is_err());
    }

    #[test]
    fn boundary_measures_hold_across_configs() {
        for (a, l, h, n) in [
            (1.0, 1.0, 0.5, 2usize),
            (2.0, 0.5, 0.3, 5),
            (1.0, 2.0, 0.7, 3),
            (0.8, 1.3, 0.25, 7),
        ] {
            let c = config(a, l, h, n, "1+0.2*x1");
            let mesh = build_junction_mesh(&c).unwrap();
            let s = mesh.boundary_measure(BoundaryTag::SEps).unwrap();
            let g = mesh.boundary_measure(BoundaryTag::GammaEps).unwrap();
            assert_relative_eq!(s, 2.0 * n as f64 * l, max_relative = 1e-10);
            assert_relative_eq!(g, a * h, max_relative = 1e-10);
        }
    }

    #[test]
    fn curved_top_chain_matches_arc_length() {
        let mut c = config(1.0, 1.0, 0.5, 4, "1+0.2*x1");
        c.ny_body = 16;
        let mesh = build_junction_mesh(&c).unwrap();
        // top boundary edges: NeumannBody edges with both endpoints on the top row
        let mut top_len = 0.0;
        for be in &mesh.boundary_edges {
            if be.tag == BoundaryTag::NeumannBody && be.local_edge == 2 {
                top_len += mesh.edge_length(be.elem, be.local_edge);
            }
        }
        let exact = 1.04_f64.sqrt(); // integral of sqrt(1 + 0.04) over [0,1]
        assert_relative_eq!(top_len, exact, max_relative = 1e-3);
    }

    #[test]
    fn boundary_partition_matches_exact_perimeter() {
        let c = config(1.0, 1.0, 0.5, 2, "1+0.2*x1");
        let mesh = build_junction_mesh(&c).unwrap();
        let total: f64 = BoundaryTag::ALL
            .iter()
            .filter_map(|&t| mesh.boundary_measure(t).ok())
            .sum();
        // gamma linear: the top chain is exact
        let a = 1.0;
        let (l, h, n) = (1.0, 0.5, 2.0);
        let exact = c.gamma_at(0.0)
            + c.gamma_at(a)
            + 1.04_f64.sqrt()
            + (a - n * 0.5 * h)
            + 2.0 * n * l
            + a * h;
        assert_relative_eq!(total, exact, max_relative = 1e-10);
    }

    #[test]
    fn every_boundary_edge_is_tagged_once() {
        let c = config(1.0, 1.0, 0.5, 3, "1");
        for mesh in [build_junction_mesh(&c).unwrap(), build_limit_mesh(&c).unwrap()] {
            // count element-edge incidences per undirected node pair
            let mut incid: HashMap<(usize, usize), usize> = HashMap::new();
            for e in 0..mesh.n_elements() {
                for le in 0..4u8 {
                    let (p, q) = mesh.edge_nodes(e, le);
                    let key = (p.min(q), p.max(q));
                    *incid.entry(key).or_insert(0) += 1;
                }
            }
            let boundary_count = incid.values().filter(|&&c| c == 1).count();
            assert_eq!(boundary_count, mesh.boundary_edges.len());
            // conformity: no edge shared by more than two elements,
            // and tagged edges are exactly the single-incidence ones
            assert!(incid.values().all(|&c| c <= 2));
            let mut tagged: Vec<(usize, usize)> = mesh
                .boundary_edges
                .iter()
                .map(|be| {
                    let (p, q) = mesh.edge_nodes(be.elem, be.local_edge);
                    (p.min(q), p.max(q))
                })
                .collect();
            tagged.sort_unstable();
            let before = tagged.len();
            tagged.dedup();
            assert_eq!(before, tagged.len(), "an edge was tagged twice");
            for key in &tagged {
                assert_eq!(incid[key], 1);
            }
        }
    }

    #[test]
    fn limit_mesh_structured_counts() {
        let mut c = config(1.0, 1.0, 0.5, 2, "1");
        c.nx_rod = 4;
        c.ny_rod = 4;
        c.ny_body = 4;
        let mesh = build_limit_mesh(&c).unwrap();
        assert_eq!(mesh.n_elements(), 64);
        assert_eq!(mesh.n_nodes(), 9 * 9);
        for e in &mesh.elements {
            let mid_x2: f64 = e.nodes.iter().map(|&n| mesh.nodes[n][1]).sum::<f64>() / 4.0;
            if mid_x2 < 0.0 {
                assert_eq!(e.region, Region::D0);
            } else {
                assert_eq!(e.region, Region::Body);
            }
        }
        assert_relative_eq!(
            mesh.boundary_measure(BoundaryTag::Il).unwrap(),
            1.0,
            max_relative = 1e-10
        );
    }

    #[test]
    fn limit_mesh_area_matches_quadrature_oracle() {
        let mut c = config(1.0, 1.0, 0.5, 2, "1+0.2*x1");
        c.nx_rod = 8;
        c.ny_body = 8;
        let mesh = build_limit_mesh(&c).unwrap();
        // mean of gamma = 1.1 over [0,1], plus the D0 rectangle
        assert_relative_eq!(mesh.area(), 1.1 + 1.0, max_relative = 1e-3);
    }

    #[test]
    fn junction_area_matches_quadrature_oracle() {
        let c = config(1.0, 1.0, 0.5, 4, "1+0.2*x1");
        let mesh = build_junction_mesh(&c).unwrap();
        // body area + rods area = a*mean(gamma) + a*h*l
        assert_relative_eq!(mesh.area(), 1.1 + 0.5, max_relative = 1e-3);
    }

    #[test]
    fn refinement_keeps_tagged_coarse_nodes() {
        let c = config(1.0, 1.0, 0.5, 2, "1+0.2*x1");
        let coarse = build_junction_mesh(&c).unwrap();
        let fine = build_junction_mesh(&c.refined(2)).unwrap();
        let fine_coords: std::collections::HashSet<(u64, u64)> = fine
            .nodes
            .iter()
            .map(|p| (p[0].to_bits(), p[1].to_bits()))
            .collect();
        for (&tag, set) in &coarse.node_sets {
            for &n in set {
                let p = coarse.nodes[n];
                assert!(
                    fine_coords.contains(&(p[0].to_bits(), p[1].to_bits())),
                    "coarse {:?} node at ({}, {}) missing from fine mesh",
                    tag,
                    p[0],
                    p[1]
                );
            }
        }
    }

    #[test]
    fn jacobians_positive_on_curved_configs() {
        let c = config(2.0, 0.7, 0.4, 5, "1+0.3*sin(pi*x1/2)");
        let mesh = build_junction_mesh(&c).unwrap();
        mesh.check_jacobians().unwrap();
        let mesh = build_limit_mesh(&c).unwrap();
        mesh.check_jacobians().unwrap();
    }

    #[test]
    fn s_eps_node_set_excludes_rod_bases_includes_tops() {
        let c = config(1.0, 1.0, 0.5, 2, "1");
        let mesh = build_junction_mesh(&c).unwrap();
        let s_eps = mesh.node_set(BoundaryTag::SEps);
        assert!(!s_eps.is_empty());
        for &n in s_eps {
            assert!(mesh.nodes[n][1] > -1.0, "rod-base node in S_eps set");
        }
        // the rod-top corners (x2 = 0 on a rod side) must be present
        let corners = s_eps
            .iter()
            .filter(|&&n| mesh.nodes[n][1] == 0.0)
            .count();
        assert_eq!(corners, 4, "two corner nodes per rod side pair");
    }

    #[test]
    fn invalid_configs_are_rejected() {
        let mut c = config(1.0, 1.0, 0.5, 2, "1");
        c.h = 1.0;
        assert!(c.validate().is_err());
        let mut c = config(1.0, 1.0, 0.5, 2, "1");
        c.nx_rod = 1;
        assert!(c.validate().is_err());
        let c = config(1.0, 1.0, 0.5, 2, "x1-0.5");
        assert!(matches!(
            c.validate(),
            Err(GeometryError::NonpositiveGamma { .. })
        ));
        let c = config(1.0, 1.0, 0.5, 2, "1+x2");
        assert!(c.validate().is_err());
    }
}
