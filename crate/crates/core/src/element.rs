//! Isoparametric bilinear quadrilateral: shape functions, Gauss rules and
//! Jacobian bookkeeping on the reference square `[-1,1]^2`.

/// 1D 2-point Gauss abscissa, `1/sqrt(3)`.
pub const GAUSS_1D_2: f64 = 0.577_350_269_189_625_8;

/// 2x2 Gauss rule on the reference square: `(xi, eta, weight)`.
pub fn gauss2() -> [(f64, f64, f64); 4] {
    let g = GAUSS_1D_2;
    [
        (-g, -g, 1.0),
        (g, -g, 1.0),
        (g, g, 1.0),
        (-g, g, 1.0),
    ]
}

/// 3x3 Gauss rule, used where a degree-elevated quadrature keeps polynomial
/// integrands exact.
pub fn gauss3() -> [(f64, f64, f64); 9] {
    let g = 0.774_596_669_241_483_4; // sqrt(3/5)
    let (w1, w0) = (5.0 / 9.0, 8.0 / 9.0);
    [
        (-g, -g, w1 * w1),
        (0.0, -g, w0 * w1),
        (g, -g, w1 * w1),
        (-g, 0.0, w1 * w0),
        (0.0, 0.0, w0 * w0),
        (g, 0.0, w1 * w0),
        (-g, g, w1 * w1),
        (0.0, g, w0 * w1),
        (g, g, w1 * w1),
    ]
}

/// 1D 2-point Gauss rule on `[-1, 1]`: `(xi, weight)`.
pub fn gauss1d2() -> [(f64, f64); 2] {
    [(-GAUSS_1D_2, 1.0), (GAUSS_1D_2, 1.0)]
}

/// Shape functions at `(xi, eta)`, counterclockwise from bottom-left.
pub fn shape(xi: f64, eta: f64) -> [f64; 4] {
    [
        0.25 * (1.0 - xi) * (1.0 - eta),
        0.25 * (1.0 + xi) * (1.0 - eta),
        0.25 * (1.0 + xi) * (1.0 + eta),
        0.25 * (1.0 - xi) * (1.0 + eta),
    ]
}

/// Reference-coordinate gradients: `[dN/dxi; dN/deta]` per node.
pub fn shape_grad(xi: f64, eta: f64) -> [[f64; 2]; 4] {
    [
        [-0.25 * (1.0 - eta), -0.25 * (1.0 - xi)],
        [0.25 * (1.0 - eta), -0.25 * (1.0 + xi)],
        [0.25 * (1.0 + eta), 0.25 * (1.0 + xi)],
        [-0.25 * (1.0 + eta), 0.25 * (1.0 - xi)],
    ]
}

/// Geometry of one mapped element.
#[derive(Debug, Clone, Copy)]
pub struct ElementGeom {
    pub coords: [[f64; 2]; 4],
}

impl ElementGeom {
    pub fn new(coords: [[f64; 2]; 4]) -> Self {
        ElementGeom { coords }
    }

    /// Physical point of `(xi, eta)`.
    pub fn map(&self, xi: f64, eta: f64) -> [f64; 2] {
        let n = shape(xi, eta);
        let mut p = [0.0, 0.0];
        for i in 0..4 {
            p[0] += n[i] * self.coords[i][0];
            p[1] += n[i] * self.coords[i][1];
        }
        p
    }

    /// Jacobian matrix `[dx/dxi, dx/deta; dy/dxi, dy/deta]`.
    pub fn jacobian(&self, xi: f64, eta: f64) -> [[f64; 2]; 2] {
        let dn = shape_grad(xi, eta);
        let mut j = [[0.0; 2]; 2];
        for i in 0..4 {
            j[0][0] += dn[i][0] * self.coords[i][0];
            j[0][1] += dn[i][1] * self.coords[i][0];
            j[1][0] += dn[i][0] * self.coords[i][1];
            j[1][1] += dn[i][1] * self.coords[i][1];
        }
        j
    }

    pub fn jacobian_det(&self, xi: f64, eta: f64) -> f64 {
        let j = self.jacobian(xi, eta);
        j[0][0] * j[1][1] - j[0][1] * j[1][0]
    }

    /// Physical gradients of the four shape functions and the Jacobian
    /// determinant at `(xi, eta)`.
    pub fn physical_grads(&self, xi: f64, eta: f64) -> ([[f64; 2]; 4], f64) {
        let j = self.jacobian(xi, eta);
        let det = j[0][0] * j[1][1] - j[0][1] * j[1][0];
        let inv = [
            [j[1][1] / det, -j[0][1] / det],
            [-j[1][0] / det, j[0][0] / det],
        ];
        let dn = shape_grad(xi, eta);
        let mut grads = [[0.0; 2]; 4];
        for i in 0..4 {
            // d/dx = dxi/dx * d/dxi + deta/dx * d/deta
            grads[i][0] = inv[0][0] * dn[i][0] + inv[1][0] * dn[i][1];
            grads[i][1] = inv[0][1] * dn[i][0] + inv[1][1] * dn[i][1];
        }
        (grads, det)
    }
}
