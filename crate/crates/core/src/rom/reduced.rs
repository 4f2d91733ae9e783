use super::{Lifting, PODBasis};
use crate::control::{DesiredKind, DesiredState};
use crate::fem::{assemble_convection, assemble_transport, nonlinear_jacobian, nonlinear_term, ConvectionForm};
use crate::flow::Discretization;
use crate::sparse::{dot, CsrMatrix, DenseMatrix};

/// Projected control pieces for a desired state `s(t) U`. The transport
/// matrix `T[i][j] = c̃(φ_j; U, φ_i)` is always skew-symmetrized.
#[derive(Clone, Debug, PartialEq)]
pub struct ReducedControl {
    pub kind: DesiredKind,
    /// `Φᵀ M U`
    pub m_u: Vec<f64>,
    /// `Φᵀ K U`
    pub k_u: Vec<f64>,
    /// `Φᵀ N(U)` in the model's convection form.
    pub n_u: Vec<f64>,
    /// `Φᵀ T Φ`
    pub t_phi: DenseMatrix,
    /// `Φᵀ T L`
    pub t_l: Vec<f64>,
    /// `Φᵀ T U`
    pub t_u: Vec<f64>,
    pub lml: f64,
    pub lmu: f64,
    pub umu: f64,
}

/// Everything the online solvers need, assembled once.
#[derive(Clone, Debug, PartialEq)]
pub struct ReducedOperators {
    pub form: ConvectionForm,
    pub lifting: Lifting,
    pub r_us: usize,
    pub r_p: usize,
    pub mr: DenseMatrix,
    pub kr: DenseMatrix,
    /// `Ψᵀ B Φ`, `r_p × r_us`.
    pub br: DenseMatrix,
    /// `C[(i r + j) r + k] = c(φ_j; φ_k, φ_i)`.
    pub conv: Vec<f64>,
    /// `c(L; φ_j, φ_i) + c(φ_j; L, φ_i)`.
    pub a_l: DenseMatrix,
    /// `c(L; L, φ_i)`.
    pub c_ll: Vec<f64>,
    pub m_l: Vec<f64>,
    pub k_l: Vec<f64>,
    pub b_l: Vec<f64>,
    pub control: Option<ReducedControl>,
}

impl ReducedOperators {
    pub fn conv_at(&self, i: usize, j: usize, k: usize) -> f64 {
        self.conv[(i * self.r_us + j) * self.r_us + k]
    }

    /// `δ² K_r + M_r`.
    pub fn filter_matrix(&self, delta: f64) -> DenseMatrix {
        let d2 = delta * delta;
        DenseMatrix::from_fn(self.r_us, self.r_us, |i, j| d2 * self.kr[(i, j)] + self.mr[(i, j)])
    }

    /// `N(θ L + Φ a)` tested with the modes.
    pub fn nonlinear(&self, a: &[f64], theta: f64) -> Vec<f64> {
        let r = self.r_us;
        let al = self.a_l.matvec(a);
        (0..r)
            .map(|i| {
                let mut v = theta * al[i] + theta * theta * self.c_ll[i];
                for j in 0..r {
                    let row = &self.conv[(i * r + j) * r..(i * r + j + 1) * r];
                    v += a[j] * dot(row, a);
                }
                v
            })
            .collect()
    }

    /// Derivative of [`Self::nonlinear`] with respect to `a`.
    pub fn nonlinear_jacobian(&self, a: &[f64], theta: f64) -> DenseMatrix {
        let r = self.r_us;
        DenseMatrix::from_fn(r, r, |i, m| {
            let mut v = theta * self.a_l[(i, m)];
            for k in 0..r {
                v += (self.conv_at(i, m, k) + self.conv_at(i, k, m)) * a[k];
            }
            v
        })
    }
}

fn project_matrix(phi: &[Vec<f64>], a: &CsrMatrix, psi: &[Vec<f64>]) -> DenseMatrix {
    let aphi: Vec<Vec<f64>> = phi.iter().map(|v| a.matvec(v)).collect();
    DenseMatrix::from_fn(psi.len(), phi.len(), |i, j| dot(&psi[i], &aphi[j]))
}

fn project_vector(phi: &[Vec<f64>], v: &[f64]) -> Vec<f64> {
    phi.iter().map(|p| dot(p, v)).collect()
}

/// Galerkin projection of the full-order operators, lifting cross terms and,
/// if a desired state is given, the control pieces.
pub fn project_operators(
    d: &Discretization,
    basis: &PODBasis,
    lifting: &Lifting,
    desired: Option<&DesiredState>,
    form: ConvectionForm,
) -> ReducedOperators {
    let phi = &basis.velocity;
    let psi = &basis.pressure;
    let r = phi.len();
    let s = &d.space;
    let ops = &d.ops;
    let l = &lifting.field;

    let mut conv = vec![0.0; r * r * r];
    for j in 0..r {
        let cj = assemble_convection(s, &phi[j], form);
        for k in 0..r {
            let v = cj.matvec(&phi[k]);
            for i in 0..r {
                conv[(i * r + j) * r + k] = dot(&phi[i], &v);
            }
        }
    }

    let control = desired.map(|ds| {
        let u = &ds.u;
        let t = assemble_transport(s, u, ConvectionForm::Skew);
        let mu = ops.m.matvec(u);
        ReducedControl {
            kind: ds.kind,
            m_u: project_vector(phi, &mu),
            k_u: project_vector(phi, &ops.k.matvec(u)),
            n_u: project_vector(phi, &nonlinear_term(s, u, form)),
            t_phi: project_matrix(phi, &t, phi),
            t_l: project_vector(phi, &t.matvec(l)),
            t_u: project_vector(phi, &t.matvec(u)),
            lml: ops.m.bilinear(l, l),
            lmu: dot(l, &mu),
            umu: dot(u, &mu),
        }
    });

    ReducedOperators {
        form,
        lifting: lifting.clone(),
        r_us: r,
        r_p: psi.len(),
        mr: project_matrix(phi, &ops.m, phi),
        kr: project_matrix(phi, &ops.k, phi),
        br: project_matrix(phi, &ops.b, psi),
        conv,
        a_l: project_matrix(phi, &nonlinear_jacobian(s, l, form), phi),
        c_ll: project_vector(phi, &nonlinear_term(s, l, form)),
        m_l: project_vector(phi, &ops.m.matvec(l)),
        k_l: project_vector(phi, &ops.k.matvec(l)),
        b_l: project_vector(psi, &ops.b.matvec(l)),
        control,
    }
}
