use super::operators::FlowOperators;
use super::space::TaylorHoodSpace;
use crate::error::{Error, Result};
use crate::sparse::{CsrMatrix, DenseMatrix, SparseLu};

const BLOCK: usize = 8;
const MAX_ITERS: usize = 2000;
const REL_TOL: f64 = 1e-13;

/// Sharp discrete Poincaré constant: the smallest eigenvalue of `K x = λ M x`
/// over velocity fields vanishing on the Dirichlet boundary.
///
/// Both velocity components share the scalar P2 blocks and the same
/// constrained nodes, so the scalar problem has the same spectrum.
pub fn estimate_poincare(s: &TaylorHoodSpace, ops: &FlowOperators) -> Result<f64> {
    let free = s.free_nodes();
    if free.is_empty() {
        return Err(Error::InvalidInput("no velocity DOFs off the Dirichlet boundary".into()));
    }
    let k = ops.ks.select(&free, &free);
    let m = ops.ms.select(&free, &free);
    smallest_generalized_eigenvalue(&k, &m)
}

/// Block inverse iteration with Rayleigh-Ritz for the smallest eigenvalue of
/// the symmetric definite pencil `(K, M)`.
pub fn smallest_generalized_eigenvalue(k: &CsrMatrix, m: &CsrMatrix) -> Result<f64> {
    let n = k.nrows();
    let p = BLOCK.min(n);
    let lu = SparseLu::new(k)?;
    // deterministic, well-spread start vectors
    let mut x: Vec<Vec<f64>> = (0..p)
        .map(|j| (0..n).map(|i| (((i + 1) * (2 * j + 3)) as f64 * 0.618_033_988_75).fract() - 0.5 + if j == 0 { 1.0 } else { 0.0 }).collect())
        .collect();
    let mut prev = f64::INFINITY;
    for _ in 0..MAX_ITERS {
        let y: Vec<Vec<f64>> = x.iter().map(|xi| lu.solve(&m.matvec(xi))).collect::<Result<_>>()?;
        let ky: Vec<Vec<f64>> = y.iter().map(|yi| k.matvec(yi)).collect();
        let my: Vec<Vec<f64>> = y.iter().map(|yi| m.matvec(yi)).collect();
        let kr = DenseMatrix::from_fn(p, p, |a, b| crate::sparse::dot(&y[a], &ky[b]));
        let mr = DenseMatrix::from_fn(p, p, |a, b| crate::sparse::dot(&y[a], &my[b]));
        let kr = DenseMatrix::from_fn(p, p, |a, b| 0.5 * (kr[(a, b)] + kr[(b, a)]));
        let mr = DenseMatrix::from_fn(p, p, |a, b| 0.5 * (mr[(a, b)] + mr[(b, a)]));
        let (theta, coef) = generalized_symmetric_eigen(&kr, &mr)?;
        x = (0..p)
            .map(|c| {
                let mut v = vec![0.0; n];
                for (a, ya) in y.iter().enumerate() {
                    crate::sparse::axpy(coef[(a, c)], ya, &mut v);
                }
                v
            })
            .collect();
        let lam = theta[0];
        if !lam.is_finite() {
            return Err(Error::EigenFailure("non-finite Ritz value".into()));
        }
        if (lam - prev).abs() <= REL_TOL * lam.abs() {
            return Ok(lam);
        }
        prev = lam;
    }
    Err(Error::EigenFailure(format!("no convergence after {MAX_ITERS} iterations")))
}

/// Solves `A z = λ B z` for symmetric `A` and SPD `B`; eigenvalues ascending,
/// eigenvectors `B`-orthonormal as columns.
pub fn generalized_symmetric_eigen(a: &DenseMatrix, b: &DenseMatrix) -> Result<(Vec<f64>, DenseMatrix)> {
    let n = a.nrows;
    let l = b.cholesky()?;
    // C = L⁻¹ A L⁻ᵀ
    let solve_lower = |rhs: &[f64]| {
        let mut z = vec![0.0; n];
        for i in 0..n {
            let mut s = rhs[i];
            for k in 0..i {
                s -= l[(i, k)] * z[k];
            }
            z[i] = s / l[(i, i)];
        }
        z
    };
    let mut tmp = DenseMatrix::zeros(n, n);
    for j in 0..n {
        let col: Vec<f64> = (0..n).map(|i| a[(i, j)]).collect();
        let z = solve_lower(&col);
        for i in 0..n {
            tmp[(i, j)] = z[i];
        }
    }
    let mut c = DenseMatrix::zeros(n, n);
    for i in 0..n {
        let row: Vec<f64> = (0..n).map(|j| tmp[(i, j)]).collect();
        let z = solve_lower(&row);
        for j in 0..n {
            c[(i, j)] = z[j];
        }
    }
    let c = DenseMatrix::from_fn(n, n, |i, j| 0.5 * (c[(i, j)] + c[(j, i)]));
    let (vals, w) = c.symmetric_eigen()?;
    // z = L⁻ᵀ w
    let mut z = DenseMatrix::zeros(n, n);
    for col in 0..n {
        for i in (0..n).rev() {
            let mut s = w[(i, col)];
            for k in i + 1..n {
                s -= l[(k, i)] * z[(k, col)];
            }
            z[(i, col)] = s / l[(i, i)];
        }
    }
    Ok((vals, z))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fem::operators::assemble_operators;
    use crate::fem::space::build_taylor_hood;
    use crate::mesh::{generate_channel_cylinder, generate_unit_square};

    #[test]
    fn generalized_eigen_small() {
        let a = DenseMatrix::from_fn(2, 2, |i, j| [[2.0, 0.0], [0.0, 3.0]][i][j]);
        let b = DenseMatrix::from_fn(2, 2, |i, j| [[2.0, 0.0], [0.0, 1.0]][i][j]);
        let (vals, _) = generalized_symmetric_eigen(&a, &b).unwrap();
        assert!((vals[0] - 1.0).abs() < 1e-14 && (vals[1] - 3.0).abs() < 1e-14);
    }

    #[test]
    fn unit_square_is_above_two_pi_squared() {
        let s = build_taylor_hood(&generate_unit_square(6).unwrap());
        let ops = assemble_operators(&s);
        let c0 = estimate_poincare(&s, &ops).unwrap();
        let exact = 2.0 * std::f64::consts::PI.powi(2);
        assert!(c0 > exact && c0 < 1.05 * exact, "{c0}");
    }

    #[test]
    fn channel_constant_is_positive() {
        let s = build_taylor_hood(&generate_channel_cylinder(30, 6, 12).unwrap());
        let ops = assemble_operators(&s);
        assert!(estimate_poincare(&s, &ops).unwrap() > 0.0);
    }
}
