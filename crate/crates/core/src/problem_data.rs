//! The given functions of the problem: volume load `f` on the whole limit
//! domain, obstacle profile `g` and boundary density `d` on the rectangle
//! `D0`, together with the admissibility checks the variational setting
//! requires.
//!
//! `g` must vanish on both horizontal sides of `D0` (`x2 = 0` and
//! `x2 = -l`). Expressions are opaque, so the zero-trace requirement is
//! checked by sampling on a 1000-point grid at quadrature-noise tolerance.
//! An `Unconstrained` mode disables the obstacle entirely; it exists for
//! validation runs against closed-form transmission solutions, which need
//! data outside the admissible class.

use crate::expr::Expr;
use crate::geometry::{build_junction_mesh, build_limit_mesh, JunctionConfig};
use crate::element::{gauss2, ElementGeom};

/// Whether the obstacle constraint is imposed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GMode {
    /// The obstacle `u <= g` is active; `g` must have zero traces.
    Standard,
    /// No obstacle; the solve degenerates to the linear transmission
    /// problem. Outside the admissible data class, for oracle runs only.
    Unconstrained,
}

/// Parsed and validated problem data.
#[derive(Debug, Clone)]
pub struct ProblemData {
    /// Right-hand side on the whole limit domain.
    pub f: Expr,
    /// Obstacle profile on `D0`.
    pub g: Expr,
    /// Signorini boundary density on `D0` (evaluated on the rod sides,
    /// which lie in the closure of `D0`).
    pub d: Expr,
    pub g_mode: GMode,
}

/// A failed admissibility condition with a witness point.
#[derive(Debug, Clone, PartialEq)]
pub struct Violation {
    pub condition: String,
    pub witness: (f64, f64),
    pub value: f64,
}

impl std::fmt::Display for Violation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "{} at ({}, {}): value {}",
            self.condition, self.witness.0, self.witness.1, self.value
        )
    }
}

const TRACE_TOL: f64 = 1e-12;

impl ProblemData {
    pub fn new(f: Expr, g: Expr, d: Expr, g_mode: GMode) -> Self {
        ProblemData { f, g, d, g_mode }
    }

    /// Check every data invariant against a concrete configuration.
    /// Returns the (possibly empty) list of violations; violations are
    /// data, not errors.
    pub fn validate(&self, config: &JunctionConfig) -> Vec<Violation> {
        let mut violations = Vec::new();

        if self.g_mode == GMode::Standard {
            // zero traces of g on I0 and Il, sampled
            for i in 0..=1000 {
                let x1 = config.a * i as f64 / 1000.0;
                let top = self.g.eval(x1, 0.0);
                if !(top.abs() <= TRACE_TOL) {
                    violations.push(Violation {
                        condition: "g must vanish on {x2 = 0}".into(),
                        witness: (x1, 0.0),
                        value: top,
                    });
                    break;
                }
            }
            for i in 0..=1000 {
                let x1 = config.a * i as f64 / 1000.0;
                let bottom = self.g.eval(x1, -config.l);
                if !(bottom.abs() <= TRACE_TOL) {
                    violations.push(Violation {
                        condition: "g must vanish on {x2 = -l}".into(),
                        witness: (x1, -config.l),
                        value: bottom,
                    });
                    break;
                }
            }
        }

        // finiteness at every quadrature point of both meshes
        let meshes = [build_junction_mesh(config), build_limit_mesh(config)];
        'outer: for mesh in meshes.iter().flatten() {
            let gp = gauss2();
            for e in 0..mesh.n_elements() {
                let geom = ElementGeom::new(mesh.element_coords(e));
                for &(xi, eta, _) in &gp {
                    let p = geom.map(xi, eta);
                    for (name, expr) in [("f", &self.f), ("g", &self.g), ("d", &self.d)] {
                        let v = expr.eval(p[0], p[1]);
                        if !v.is_finite() {
                            violations.push(Violation {
                                condition: format!("{name} must be finite at quadrature points"),
                                witness: (p[0], p[1]),
                                value: v,
                            });
                            break 'outer;
                        }
                    }
                }
            }
        }
        violations
    }

    /// True when all of `f`, `g`, `d` depend on `x2` only.
    pub fn is_x1_independent(&self) -> bool {
        self.f.is_x1_independent() && self.g.is_x1_independent() && self.d.is_x1_independent()
    }
}
