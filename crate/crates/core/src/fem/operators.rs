use super::quadrature::{p1_values, p2_ref_grads, p2_values, QuadRule};
use super::space::TaylorHoodSpace;
use crate::sparse::CsrMatrix;

/// Assembled linear operators of the Taylor-Hood discretization.
///
/// `m` and `k` act on full velocity vectors (block-diagonal over the two
/// components); `ms` and `ks` are the scalar P2 blocks. `b` has one row per
/// pressure DOF with `b[q][j] = ∫ ψ_q ∇·φ_j`. `mp` is the P1 pressure mass.
#[derive(Clone, Debug)]
pub struct FlowOperators {
    pub m: CsrMatrix,
    pub k: CsrMatrix,
    pub b: CsrMatrix,
    pub ms: CsrMatrix,
    pub ks: CsrMatrix,
    pub mp: CsrMatrix,
    pub quad: QuadRule,
}

/// Duplicates a scalar P2 operator onto both velocity components.
pub fn block_diag2(s: &CsrMatrix) -> CsrMatrix {
    let n = s.nrows();
    CsrMatrix::from_blocks(2 * n, 2 * n, &[(0, 0, s), (n, n, s)])
}

pub fn assemble_operators(s: &TaylorHoodSpace) -> FlowOperators {
    let quad = QuadRule::degree5();
    let n = s.n_p2();
    let phi: Vec<[f64; 6]> = quad.points.iter().map(|&x| p2_values(x)).collect();
    let dphi: Vec<[[f64; 2]; 6]> = quad.points.iter().map(|&x| p2_ref_grads(x)).collect();
    let psi: Vec<[f64; 3]> = quad.points.iter().map(|&x| p1_values(x)).collect();

    let mut tm = Vec::with_capacity(36 * s.n_elements());
    let mut tk = Vec::with_capacity(36 * s.n_elements());
    let mut tb = Vec::with_capacity(36 * s.n_elements());
    let mut tp = Vec::with_capacity(9 * s.n_elements());
    for e in 0..s.n_elements() {
        let map = s.element_map(e);
        let nodes = s.element_nodes(e);
        let verts = s.element_vertices(e);
        let jw = map.det.abs();
        let mut me = [[0.0; 6]; 6];
        let mut ke = [[0.0; 6]; 6];
        let mut be = [[[0.0; 6]; 3]; 2];
        let mut pe = [[0.0; 3]; 3];
        for q in 0..quad.len() {
            let w = quad.weights[q] * jw;
            let g: Vec<[f64; 2]> = dphi[q].iter().map(|&r| map.grad(r)).collect();
            for a in 0..6 {
                for b in 0..6 {
                    me[a][b] += w * (phi[q][a] * phi[q][b]);
                    ke[a][b] += w * (g[a][0] * g[b][0] + g[a][1] * g[b][1]);
                }
                for p in 0..3 {
                    for c in 0..2 {
                        be[c][p][a] += w * psi[q][p] * g[a][c];
                    }
                }
            }
            for p in 0..3 {
                for r in 0..3 {
                    pe[p][r] += w * (psi[q][p] * psi[q][r]);
                }
            }
        }
        for a in 0..6 {
            for b in 0..6 {
                tm.push((nodes[a], nodes[b], me[a][b]));
                tk.push((nodes[a], nodes[b], ke[a][b]));
            }
        }
        for c in 0..2 {
            for p in 0..3 {
                for a in 0..6 {
                    tb.push((verts[p], c * n + nodes[a], be[c][p][a]));
                }
            }
        }
        for p in 0..3 {
            for r in 0..3 {
                tp.push((verts[p], verts[r], pe[p][r]));
            }
        }
    }
    let ms = CsrMatrix::from_triplets(n, n, &tm);
    let ks = CsrMatrix::from_triplets(n, n, &tk);
    let b = CsrMatrix::from_triplets(s.n_pre_dofs(), 2 * n, &tb);
    let mp = CsrMatrix::from_triplets(s.n_pre_dofs(), s.n_pre_dofs(), &tp);
    FlowOperators { m: block_diag2(&ms), k: block_diag2(&ks), b, ms, ks, mp, quad }
}

impl FlowOperators {
    /// `xᵀ M x` for a velocity vector.
    pub fn mass_norm_sq(&self, x: &[f64]) -> f64 {
        self.m.bilinear(x, x)
    }

    /// `pᵀ M_p p` for a pressure vector.
    pub fn pressure_norm_sq(&self, p: &[f64]) -> f64 {
        self.mp.bilinear(p, p)
    }

    /// `∫ ψ_q` for every pressure DOF.
    pub fn pressure_integrals(&self) -> Vec<f64> {
        self.mp.matvec(&vec![1.0; self.mp.nrows()])
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fem::space::build_taylor_hood;
    use crate::mesh::{generate_channel_cylinder, generate_unit_square};
    use crate::sparse::dot;

    #[test]
    fn mass_integrates_constants_to_area() {
        let s = build_taylor_hood(&generate_unit_square(3).unwrap());
        let ops = assemble_operators(&s);
        let one = vec![1.0; s.n_p2()];
        assert!((ops.ms.bilinear(&one, &one) - 1.0).abs() < 1e-14);
        let p1 = vec![1.0; s.n_pre_dofs()];
        assert!((ops.mp.bilinear(&p1, &p1) - 1.0).abs() < 1e-14);
    }

    #[test]
    fn stiffness_annihilates_constants_and_is_symmetric() {
        let s = build_taylor_hood(&generate_channel_cylinder(30, 6, 12).unwrap());
        let ops = assemble_operators(&s);
        let c = s.interpolate_velocity(|_, _| [1.3, -0.7]);
        assert!(ops.k.matvec(&c).iter().all(|v| v.abs() < 1e-12));
        assert!(ops.k.asymmetry() <= 1e-13 * ops.k.max_abs());
        assert!(ops.m.asymmetry() <= 1e-13 * ops.m.max_abs());
    }

    #[test]
    fn stiffness_of_quadratic_matches_dirichlet_energy() {
        // u = (x², xy) on the unit square: ∫|∇u|² = ∫ 4x² + y² + x² = 5/3 + 1/3 = 2
        let s = build_taylor_hood(&generate_unit_square(4).unwrap());
        let ops = assemble_operators(&s);
        let u = s.interpolate_velocity(|x, y| [x * x, x * y]);
        assert!((ops.k.bilinear(&u, &u) - 2.0).abs() < 1e-13);
    }

    #[test]
    fn divergence_of_linear_field() {
        // u = (x, 0): ∫ q ∇·u with q = 1 equals the area
        let s = build_taylor_hood(&generate_unit_square(3).unwrap());
        let ops = assemble_operators(&s);
        let u = s.interpolate_velocity(|x, _| [x, 0.0]);
        let q = vec![1.0; s.n_pre_dofs()];
        assert!((dot(&q, &ops.b.matvec(&u)) - 1.0).abs() < 1e-14);
        let rot = s.interpolate_velocity(|x, y| [-y, x]);
        assert!(ops.b.matvec(&rot).iter().all(|v| v.abs() < 1e-14));
    }
}
