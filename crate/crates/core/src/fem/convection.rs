//! Trilinear convection forms.
//!
//! `c(w; u, v) = ∫ (w·∇)u · v` and its skew-symmetric variant
//! `c̃(w; u, v) = ½ [c(w; u, v) − c(w; v, u)]`, which vanishes for `u = v`.
//! Matrices follow the convention `A[i][j] = form(…; φ_j, φ_i)`: the column
//! index is the trial function, the row index the test function.

use super::quadrature::{p2_ref_grads, p2_values, QuadRule};
use super::space::TaylorHoodSpace;
use super::operators::block_diag2;
use crate::sparse::{dot, CsrMatrix};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum ConvectionForm {
    Standard,
    #[default]
    Skew,
}

impl ConvectionForm {
    pub fn label(self) -> &'static str {
        match self {
            Self::Standard => "standard",
            Self::Skew => "skew",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s.to_ascii_lowercase().as_str() {
            "standard" => Some(Self::Standard),
            "skew" => Some(Self::Skew),
            _ => None,
        }
    }
}

struct Tabulated {
    phi: Vec<[f64; 6]>,
    dphi: Vec<[[f64; 2]; 6]>,
    weights: Vec<f64>,
}

fn tabulate() -> Tabulated {
    let q = QuadRule::degree5();
    Tabulated {
        phi: q.points.iter().map(|&x| p2_values(x)).collect(),
        dphi: q.points.iter().map(|&x| p2_ref_grads(x)).collect(),
        weights: q.weights,
    }
}

/// Scalar block `∫ (w·∇N_b) N_a` of the convection matrix.
fn scalar_convection(s: &TaylorHoodSpace, w: &[f64]) -> CsrMatrix {
    let tab = tabulate();
    let n = s.n_p2();
    let mut t = Vec::with_capacity(36 * s.n_elements());
    for e in 0..s.n_elements() {
        let map = s.element_map(e);
        let nodes = s.element_nodes(e);
        let jw = map.det.abs();
        let mut ce = [[0.0; 6]; 6];
        for q in 0..tab.weights.len() {
            let wq = tab.weights[q] * jw;
            let mut wv = [0.0; 2];
            for a in 0..6 {
                wv[0] += w[nodes[a]] * tab.phi[q][a];
                wv[1] += w[n + nodes[a]] * tab.phi[q][a];
            }
            for b in 0..6 {
                let g = map.grad(tab.dphi[q][b]);
                let adv = wv[0] * g[0] + wv[1] * g[1];
                for a in 0..6 {
                    ce[a][b] += wq * tab.phi[q][a] * adv;
                }
            }
        }
        for a in 0..6 {
            for b in 0..6 {
                t.push((nodes[a], nodes[b], ce[a][b]));
            }
        }
    }
    CsrMatrix::from_triplets(n, n, &t)
}

/// `R[i][j] = c(φ_j; g, φ_i)` and `Q[i][j] = c(φ_j; φ_i, g)` for a fixed field `g`.
fn transport_parts(s: &TaylorHoodSpace, g: &[f64]) -> (CsrMatrix, CsrMatrix) {
    let tab = tabulate();
    let n = s.n_p2();
    let mut tr = Vec::with_capacity(144 * s.n_elements());
    let mut tq = Vec::with_capacity(144 * s.n_elements());
    for e in 0..s.n_elements() {
        let map = s.element_map(e);
        let nodes = s.element_nodes(e);
        let jw = map.det.abs();
        // re[c][d][a][b] = ∫ N_a N_b ∂_d g_c ; qe[c][d][a][b] = ∫ N_b ∂_d N_a g_c
        let mut re = [[[[0.0; 6]; 6]; 2]; 2];
        let mut qe = [[[[0.0; 6]; 6]; 2]; 2];
        for q in 0..tab.weights.len() {
            let wq = tab.weights[q] * jw;
            let grads: Vec<[f64; 2]> = tab.dphi[q].iter().map(|&r| map.grad(r)).collect();
            let mut gv = [0.0; 2];
            let mut gg = [[0.0; 2]; 2];
            for a in 0..6 {
                for c in 0..2 {
                    let coef = g[c * n + nodes[a]];
                    gv[c] += coef * tab.phi[q][a];
                    gg[c][0] += coef * grads[a][0];
                    gg[c][1] += coef * grads[a][1];
                }
            }
            for c in 0..2 {
                for d in 0..2 {
                    for a in 0..6 {
                        for b in 0..6 {
                            re[c][d][a][b] += wq * tab.phi[q][a] * tab.phi[q][b] * gg[c][d];
                            qe[c][d][a][b] += wq * tab.phi[q][b] * grads[a][d] * gv[c];
                        }
                    }
                }
            }
        }
        for c in 0..2 {
            for d in 0..2 {
                for a in 0..6 {
                    for b in 0..6 {
                        let (i, j) = (c * n + nodes[a], d * n + nodes[b]);
                        tr.push((i, j, re[c][d][a][b]));
                        tq.push((i, j, qe[c][d][a][b]));
                    }
                }
            }
        }
    }
    (CsrMatrix::from_triplets(2 * n, 2 * n, &tr), CsrMatrix::from_triplets(2 * n, 2 * n, &tq))
}

/// Convection matrix for a fixed transport field: `A[i][j] = c(w; φ_j, φ_i)`
/// (Standard) or `c̃(w; φ_j, φ_i)` (Skew).
pub fn assemble_convection(s: &TaylorHoodSpace, w: &[f64], form: ConvectionForm) -> CsrMatrix {
    let c = block_diag2(&scalar_convection(s, w));
    match form {
        ConvectionForm::Standard => c,
        ConvectionForm::Skew => CsrMatrix::lincomb(&[(0.5, &c), (-0.5, &c.transpose())]),
    }
}

/// Matrix acting on the transport slot: `T[i][j] = c(φ_j; g, φ_i)` (Standard)
/// or `c̃(φ_j; g, φ_i)` (Skew).
pub fn assemble_transport(s: &TaylorHoodSpace, g: &[f64], form: ConvectionForm) -> CsrMatrix {
    let (r, q) = transport_parts(s, g);
    match form {
        ConvectionForm::Standard => r,
        ConvectionForm::Skew => CsrMatrix::lincomb(&[(0.5, &r), (-0.5, &q)]),
    }
}

/// The nonlinear term `N(u)_i = c(u; u, φ_i)` in the selected form.
pub fn nonlinear_term(s: &TaylorHoodSpace, u: &[f64], form: ConvectionForm) -> Vec<f64> {
    assemble_convection(s, u, form).matvec(u)
}

/// Jacobian of [`nonlinear_term`]: `form(φ_j; u, φ_i) + form(u; φ_j, φ_i)`.
pub fn nonlinear_jacobian(s: &TaylorHoodSpace, u: &[f64], form: ConvectionForm) -> CsrMatrix {
    let a = assemble_convection(s, u, form);
    let t = assemble_transport(s, u, form);
    CsrMatrix::lincomb(&[(1.0, &a), (1.0, &t)])
}

/// Value of the trilinear form `form(w; u, v)`.
pub fn trilinear(s: &TaylorHoodSpace, w: &[f64], u: &[f64], v: &[f64], form: ConvectionForm) -> f64 {
    dot(v, &assemble_convection(s, w, form).matvec(u))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fem::space::build_taylor_hood;
    use crate::mesh::generate_channel_cylinder;

    fn field(s: &TaylorHoodSpace, seed: f64) -> Vec<f64> {
        s.interpolate_velocity(|x, y| [(seed * x + y).sin(), (x - seed * y * y).cos()])
    }

    #[test]
    fn zero_transport_gives_zero_matrix() {
        let s = build_taylor_hood(&generate_channel_cylinder(30, 6, 12).unwrap());
        let w = vec![0.0; s.n_vel_dofs()];
        assert_eq!(assemble_convection(&s, &w, ConvectionForm::Standard).max_abs(), 0.0);
        assert_eq!(assemble_convection(&s, &w, ConvectionForm::Skew).max_abs(), 0.0);
    }

    #[test]
    fn transport_matrix_matches_convection_slots() {
        let s = build_taylor_hood(&generate_channel_cylinder(30, 6, 12).unwrap());
        let (w, u, v) = (field(&s, 1.0), field(&s, 2.0), field(&s, 3.0));
        for form in [ConvectionForm::Standard, ConvectionForm::Skew] {
            let direct = trilinear(&s, &w, &u, &v, form);
            let via_t = dot(&v, &assemble_transport(&s, &u, form).matvec(&w));
            assert!((direct - via_t).abs() < 1e-12 * direct.abs().max(1.0), "{form:?}");
        }
    }

    #[test]
    fn jacobian_matches_finite_differences() {
        let s = build_taylor_hood(&generate_channel_cylinder(30, 6, 12).unwrap());
        let (u, du) = (field(&s, 0.7), field(&s, 1.9));
        for form in [ConvectionForm::Standard, ConvectionForm::Skew] {
            let j = nonlinear_jacobian(&s, &u, form).matvec(&du);
            let h = 1e-6;
            let up: Vec<f64> = u.iter().zip(&du).map(|(a, b)| a + h * b).collect();
            let um: Vec<f64> = u.iter().zip(&du).map(|(a, b)| a - h * b).collect();
            let np = nonlinear_term(&s, &up, form);
            let nm = nonlinear_term(&s, &um, form);
            let scale = j.iter().fold(0.0f64, |m, v| m.max(v.abs()));
            for i in 0..j.len() {
                let fd = (np[i] - nm[i]) / (2.0 * h);
                assert!((fd - j[i]).abs() < 1e-6 * scale, "{form:?} row {i}");
            }
        }
    }

    #[test]
    fn skew_form_vanishes_on_diagonal() {
        let s = build_taylor_hood(&generate_channel_cylinder(30, 6, 12).unwrap());
        let (w, v) = (field(&s, 1.3), field(&s, -0.4));
        let val = trilinear(&s, &w, &v, &v, ConvectionForm::Skew);
        assert!(val.abs() < 1e-14);
    }
}
