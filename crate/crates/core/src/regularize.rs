//! Evolve-filter-relax: the differential filter, relaxation, and the plain and
//! adaptive EFR steps.

use crate::control::Forcing;
use crate::error::{Error, Result};
use crate::fem::{DirichletData, FlowOperators, TaylorHoodSpace};
use crate::flow::{nse_step, FlowState, NewtonReport, StepContext};
use crate::sparse::{eliminate, sub, CsrMatrix, SparseLu};

/// Default radius coefficient, δ = C_δ · h_min.
pub const DEFAULT_C_DELTA: f64 = 3.316_624_790_355_399_8; // √11

/// Radius coefficients of the filter-radius sweep.
pub fn c_delta_sweep() -> [f64; 5] {
    [7.5f64.sqrt(), 8f64.sqrt(), 9f64.sqrt(), 10f64.sqrt(), 11f64.sqrt()]
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EFRParams {
    /// Filter radius.
    pub delta: f64,
    /// Relaxation weight in `[0, 1]`.
    pub chi: f64,
    /// Threshold on the squared tracking error for the adaptive variant.
    pub tau: Option<f64>,
    pub c_delta: f64,
}

impl EFRParams {
    /// `δ = C_δ h_min`.
    pub fn from_mesh(c_delta: f64, h_min: f64, chi: f64, tau: Option<f64>) -> Self {
        Self { delta: c_delta * h_min, chi, tau, c_delta }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.delta >= 0.0) {
            return Err(Error::InvalidInput(format!("filter radius must be nonnegative, got {}", self.delta)));
        }
        if !(0.0..=1.0).contains(&self.chi) {
            return Err(Error::InvalidInput(format!("relaxation parameter must lie in [0, 1], got {}", self.chi)));
        }
        if let Some(tau) = self.tau {
            if !(tau > 0.0) {
                return Err(Error::InvalidInput(format!("adaptive threshold must be positive, got {tau}")));
            }
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct EFRStepReport {
    pub u_tilde: Vec<f64>,
    pub u_bar: Vec<f64>,
    pub u: Vec<f64>,
    /// ‖ū − ũ‖ in L².
    pub filter_deviation: f64,
    pub efr_active: bool,
}

/// Factorized `(δ² K + M)` on the scalar P2 space with Dirichlet rows
/// eliminated; applied to each velocity component.
#[derive(Debug)]
pub struct DifferentialFilter {
    delta: f64,
    system: Option<(CsrMatrix, SparseLu)>,
}

impl DifferentialFilter {
    pub fn new(s: &TaylorHoodSpace, ops: &FlowOperators, delta: f64) -> Result<Self> {
        if !(delta >= 0.0) {
            return Err(Error::InvalidInput(format!("filter radius must be nonnegative, got {delta}")));
        }
        if delta == 0.0 {
            return Ok(Self { delta, system: None });
        }
        let a = CsrMatrix::lincomb(&[(delta * delta, &ops.ks), (1.0, &ops.ms)]);
        let nodes: Vec<usize> = s.dirichlet_nodes().iter().map(|&(n, _)| n).collect();
        let mut dummy = vec![0.0; a.nrows()];
        let constrained = eliminate(&a, &mut dummy, &nodes, &vec![0.0; nodes.len()]);
        let lu = SparseLu::new(&constrained)?;
        Ok(Self { delta, system: Some((a, lu)) })
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    /// Solves `(δ² K + M) ū = M ũ` with `ū = u_D(t)` on the Dirichlet boundary
    /// and the natural condition on the outflow. `δ = 0` returns `ũ` unchanged.
    pub fn apply(
        &self,
        s: &TaylorHoodSpace,
        ops: &FlowOperators,
        u_tilde: &[f64],
        data: &DirichletData,
        t: f64,
    ) -> Result<Vec<f64>> {
        s.check_velocity(u_tilde)?;
        let Some((a, lu)) = &self.system else { return Ok(u_tilde.to_vec()) };
        let n = s.n_p2();
        let nodes: Vec<usize> = s.dirichlet_nodes().iter().map(|&(k, _)| k).collect();
        let mut out = vec![0.0; 2 * n];
        for c in 0..2 {
            let g = data.evaluate_component(s, t, c);
            let mut rhs = ops.ms.matvec(&u_tilde[c * n..(c + 1) * n]);
            // same elimination as in `new`, now with the actual boundary values
            let mut is_dir = vec![false; n];
            nodes.iter().for_each(|&k| is_dir[k] = true);
            for i in 0..n {
                if is_dir[i] {
                    continue;
                }
                for (j, v) in a.row(i) {
                    if is_dir[j] {
                        let k = nodes.binary_search(&j).expect("sorted Dirichlet nodes");
                        rhs[i] -= v * g[k];
                    }
                }
            }
            for (k, &node) in nodes.iter().enumerate() {
                rhs[node] = g[k];
            }
            let x = lu.solve(&rhs)?;
            out[c * n..(c + 1) * n].copy_from_slice(&x);
        }
        Ok(out)
    }
}

/// One-shot differential filter; prefer [`DifferentialFilter`] inside loops.
pub fn differential_filter(
    s: &TaylorHoodSpace,
    ops: &FlowOperators,
    u_tilde: &[f64],
    delta: f64,
    data: &DirichletData,
    t: f64,
) -> Result<Vec<f64>> {
    DifferentialFilter::new(s, ops, delta)?.apply(s, ops, u_tilde, data, t)
}

/// `(1 − χ) ũ + χ ū`, coefficientwise.
pub fn relax(u_tilde: &[f64], u_bar: &[f64], chi: f64) -> Vec<f64> {
    assert_eq!(u_tilde.len(), u_bar.len());
    u_tilde.iter().zip(u_bar).map(|(a, b)| (1.0 - chi) * a + chi * b).collect()
}

/// Evolve with the forcing evaluated at ũ, filter, relax. The returned state
/// carries the relaxed velocity and the evolve-step pressure.
pub fn efr_step(
    ctx: &StepContext<'_>,
    state: &FlowState,
    forcing: Option<&Forcing>,
    filter: &DifferentialFilter,
    params: &EFRParams,
) -> Result<(FlowState, EFRStepReport, NewtonReport)> {
    params.validate()?;
    let (evolved, newton) = nse_step(ctx, state, forcing)?;
    let d = ctx.disc;
    let u_bar = filter.apply(&d.space, &d.ops, &evolved.u, ctx.data, evolved.t)?;
    let u = relax(&evolved.u, &u_bar, params.chi);
    let filter_deviation = d.ops.mass_norm_sq(&sub(&u_bar, &evolved.u)).sqrt();
    let next = FlowState { u: u.clone(), p: evolved.p, t: evolved.t };
    let report = EFRStepReport { u_tilde: evolved.u, u_bar, u, filter_deviation, efr_active: true };
    Ok((next, report, newton))
}

/// EFR while `‖uⁿ − Uⁿ‖² ≥ τ`, otherwise a plain step.
pub fn aefr_step(
    ctx: &StepContext<'_>,
    state: &FlowState,
    forcing: Option<&Forcing>,
    filter: &DifferentialFilter,
    params: &EFRParams,
    target_n: &[f64],
) -> Result<(FlowState, EFRStepReport, NewtonReport)> {
    let tau = params
        .tau
        .ok_or_else(|| Error::InvalidInput("adaptive EFR needs a threshold".into()))?;
    let e_u = ctx.disc.ops.mass_norm_sq(&sub(&state.u, target_n));
    if e_u >= tau {
        efr_step(ctx, state, forcing, filter, params)
    } else {
        let (next, newton) = nse_step(ctx, state, forcing)?;
        let report = EFRStepReport {
            u_tilde: next.u.clone(),
            u_bar: next.u.clone(),
            u: next.u.clone(),
            filter_deviation: 0.0,
            efr_active: false,
        };
        Ok((next, report, newton))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fem::{assemble_operators, build_taylor_hood};
    use crate::mesh::{generate_channel_cylinder, generate_unit_square};

    #[test]
    fn relax_endpoints_are_exact() {
        let a = [1.0, -2.5, 3.25];
        let b = [0.1, 0.7, -9.0];
        assert_eq!(relax(&a, &b, 0.0), a.to_vec());
        assert_eq!(relax(&a, &b, 1.0), b.to_vec());
        let mid = relax(&[1.0], &[2.0], 0.002);
        assert!((mid[0] - (0.998 + 0.004)).abs() < 1e-15);
    }

    #[test]
    fn zero_radius_is_identity() {
        let s = build_taylor_hood(&generate_channel_cylinder(30, 6, 12).unwrap());
        let ops = assemble_operators(&s);
        let u = s.interpolate_velocity(|x, y| [x.sin(), y * y]);
        let f = differential_filter(&s, &ops, &u, 0.0, &DirichletData::homogeneous(), 0.0).unwrap();
        assert_eq!(f, u);
    }

    #[test]
    fn constants_are_fixed_points_with_matching_data() {
        let s = build_taylor_hood(&generate_unit_square(5).unwrap());
        let ops = assemble_operators(&s);
        let data = DirichletData::homogeneous().with(crate::mesh::BoundaryTag::Wall, |_, _, _| [0.3, -1.2]);
        let u = s.interpolate_velocity(|_, _| [0.3, -1.2]);
        let f = differential_filter(&s, &ops, &u, 0.2, &data, 0.0).unwrap();
        for (a, b) in f.iter().zip(&u) {
            assert!((a - b).abs() <= 1e-12);
        }
    }

    #[test]
    fn filtered_field_has_boundary_data() {
        let s = build_taylor_hood(&generate_channel_cylinder(30, 6, 12).unwrap());
        let ops = assemble_operators(&s);
        let data = DirichletData::channel(crate::fem::TimeProfile::Steady);
        let u = s.interpolate_velocity(|x, y| [x.cos(), y.sin()]);
        let f = differential_filter(&s, &ops, &u, 0.05, &data, 0.0).unwrap();
        for (&d, v) in s.dirichlet_vel_dofs().iter().zip(data.evaluate(&s, 0.0)) {
            assert_eq!(f[d], v);
        }
    }

    #[test]
    fn params_are_validated() {
        assert!(EFRParams { delta: 0.1, chi: 1.5, tau: None, c_delta: 1.0 }.validate().is_err());
        assert!(EFRParams { delta: 0.1, chi: 0.5, tau: Some(0.0), c_delta: 1.0 }.validate().is_err());
        let p = EFRParams::from_mesh(DEFAULT_C_DELTA, 0.01, 0.002, None);
        assert!((p.delta - 11f64.sqrt() * 0.01).abs() < 1e-15);
    }
}
