//! Reference-element quadrature and Lagrange shape functions.
//!
//! Reference triangle: (0,0), (1,0), (0,1). P2 local nodes are the three
//! vertices followed by the midpoints of edges 0-1, 1-2 and 2-0.

/// Quadrature rule on the reference triangle; weights sum to its area 1/2.
#[derive(Clone, Debug, PartialEq)]
pub struct QuadRule {
    pub points: Vec<[f64; 2]>,
    pub weights: Vec<f64>,
    pub degree: usize,
}

impl QuadRule {
    /// Symmetric 7-point rule, exact for polynomials of degree 5.
    pub fn degree5() -> Self {
        let s15 = 15f64.sqrt();
        let a = (6.0 - s15) / 21.0;
        let b = (6.0 + s15) / 21.0;
        let wa = (155.0 - s15) / 1200.0;
        let wb = (155.0 + s15) / 1200.0;
        let third = 1.0 / 3.0;
        let points = vec![
            [third, third],
            [a, a],
            [1.0 - 2.0 * a, a],
            [a, 1.0 - 2.0 * a],
            [b, b],
            [1.0 - 2.0 * b, b],
            [b, 1.0 - 2.0 * b],
        ];
        let weights = [9.0 / 40.0, wa, wa, wa, wb, wb, wb].iter().map(|w| 0.5 * w).collect();
        Self { points, weights, degree: 5 }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

pub fn p1_values(x: [f64; 2]) -> [f64; 3] {
    [1.0 - x[0] - x[1], x[0], x[1]]
}

pub const P1_REF_GRADS: [[f64; 2]; 3] = [[-1.0, -1.0], [1.0, 0.0], [0.0, 1.0]];

pub fn p2_values(x: [f64; 2]) -> [f64; 6] {
    let [l0, l1, l2] = p1_values(x);
    [
        l0 * (2.0 * l0 - 1.0),
        l1 * (2.0 * l1 - 1.0),
        l2 * (2.0 * l2 - 1.0),
        4.0 * l0 * l1,
        4.0 * l1 * l2,
        4.0 * l2 * l0,
    ]
}

pub fn p2_ref_grads(x: [f64; 2]) -> [[f64; 2]; 6] {
    let l = p1_values(x);
    let g = P1_REF_GRADS;
    let vert = |i: usize| [(4.0 * l[i] - 1.0) * g[i][0], (4.0 * l[i] - 1.0) * g[i][1]];
    let edge = |i: usize, j: usize| {
        [4.0 * (g[i][0] * l[j] + l[i] * g[j][0]), 4.0 * (g[i][1] * l[j] + l[i] * g[j][1])]
    };
    [vert(0), vert(1), vert(2), edge(0, 1), edge(1, 2), edge(2, 0)]
}

/// Affine map from the reference triangle to a physical one.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AffineMap {
    pub origin: [f64; 2],
    pub jac: [[f64; 2]; 2],
    /// Determinant of the Jacobian, twice the triangle area.
    pub det: f64,
    /// Inverse Jacobian, maps physical offsets to reference coordinates.
    pub inv: [[f64; 2]; 2],
}

impl AffineMap {
    pub fn new(p: [[f64; 2]; 3]) -> Self {
        let jac = [[p[1][0] - p[0][0], p[2][0] - p[0][0]], [p[1][1] - p[0][1], p[2][1] - p[0][1]]];
        let det = jac[0][0] * jac[1][1] - jac[0][1] * jac[1][0];
        let inv = [[jac[1][1] / det, -jac[0][1] / det], [-jac[1][0] / det, jac[0][0] / det]];
        Self { origin: p[0], jac, det, inv }
    }

    pub fn to_physical(&self, x: [f64; 2]) -> [f64; 2] {
        [
            self.origin[0] + self.jac[0][0] * x[0] + self.jac[0][1] * x[1],
            self.origin[1] + self.jac[1][0] * x[0] + self.jac[1][1] * x[1],
        ]
    }

    pub fn to_reference(&self, p: [f64; 2]) -> [f64; 2] {
        let d = [p[0] - self.origin[0], p[1] - self.origin[1]];
        [self.inv[0][0] * d[0] + self.inv[0][1] * d[1], self.inv[1][0] * d[0] + self.inv[1][1] * d[1]]
    }

    /// Physical gradient from a reference gradient.
    pub fn grad(&self, g: [f64; 2]) -> [f64; 2] {
        [g[0] * self.inv[0][0] + g[1] * self.inv[1][0], g[0] * self.inv[0][1] + g[1] * self.inv[1][1]]
    }
}
