//! Full-order solvers: steady Stokes and implicit-Euler Navier-Stokes with a
//! Newton iteration on the monolithic saddle-point system.
//!
//! Residual convention, with `f(u) = f₀ + L u` the (optional) forcing:
//!
//! ```text
//! R_u = M (u − uⁿ)/Δt + ν K u + N(u) − Bᵀ p − f(u)
//! R_p = −B u
//! ```
//!
//! The pressure enters through `−b(v, p)`, so the natural outflow condition is
//! `ν ∂u/∂n − p n = 0`.

mod simulate;
mod snapshots;

pub use simulate::{simulate, simulate_until_failure, EfrMode, SimulationConfig, StepRecord, Trajectory};
pub use snapshots::{read_snapshots, write_snapshots, SNAPSHOT_MAGIC};

use crate::control::Forcing;
use crate::error::{Error, Result};
use crate::fem::{
    assemble_operators, build_taylor_hood, nonlinear_jacobian, nonlinear_term, ConvectionForm, DirichletData,
    FlowOperators, TaylorHoodSpace,
};
use crate::mesh::Mesh;
use crate::sparse::{axpy, eliminate, norm2, CsrMatrix, SparseLu};

/// A space together with its assembled operators.
#[derive(Clone, Debug)]
pub struct Discretization {
    pub space: TaylorHoodSpace,
    pub ops: FlowOperators,
    neg_b: CsrMatrix,
    neg_bt: CsrMatrix,
    /// `∫ ψ_q`, used for the mean-zero pressure row on fully-Dirichlet domains.
    gauge: Option<Vec<f64>>,
}

impl Discretization {
    pub fn new(mesh: &Mesh) -> Self {
        let space = build_taylor_hood(mesh);
        let ops = assemble_operators(&space);
        let neg_b = ops.b.scale(-1.0);
        let neg_bt = neg_b.transpose();
        let gauge = space.pressure_needs_gauge().then(|| ops.pressure_integrals());
        Self { space, ops, neg_b, neg_bt, gauge }
    }

    pub fn n_u(&self) -> usize {
        self.space.n_vel_dofs()
    }

    pub fn n_p(&self) -> usize {
        self.space.n_pre_dofs()
    }

    fn n_total(&self) -> usize {
        self.n_u() + self.n_p() + usize::from(self.gauge.is_some())
    }

    /// Embeds a velocity block into the saddle-point matrix
    /// `[[A, −Bᵀ, 0], [−B, 0, g], [0, gᵀ, 0]]`.
    fn saddle(&self, a: &CsrMatrix) -> CsrMatrix {
        let (nu, np) = (self.n_u(), self.n_p());
        let mut blocks = vec![(0, 0, a), (0, nu, &self.neg_bt), (nu, 0, &self.neg_b)];
        let g_col;
        let g_row;
        if let Some(g) = &self.gauge {
            let t: Vec<_> = g.iter().enumerate().map(|(q, &v)| (q, 0, v)).collect();
            g_col = CsrMatrix::from_triplets(np, 1, &t);
            g_row = g_col.transpose();
            blocks.push((nu, nu + np, &g_col));
            blocks.push((nu + np, nu, &g_row));
        }
        let n = self.n_total();
        CsrMatrix::from_blocks(n, n, &blocks)
    }

    /// ‖B u‖_∞, the discrete divergence.
    pub fn divergence(&self, u: &[f64]) -> f64 {
        crate::sparse::norm_inf(&self.ops.b.matvec(u))
    }
}

/// A velocity-pressure pair at a time instant.
#[derive(Clone, Debug, PartialEq)]
pub struct FlowState {
    pub u: Vec<f64>,
    pub p: Vec<f64>,
    pub t: f64,
}

impl FlowState {
    pub fn zero(d: &Discretization, t: f64) -> Self {
        Self { u: vec![0.0; d.n_u()], p: vec![0.0; d.n_p()], t }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct NewtonSettings {
    /// Absolute tolerance on the 2-norm of the algebraic residual.
    pub tol: f64,
    pub max_iters: usize,
    /// Divergence is declared once the residual exceeds this multiple of its initial value.
    pub divergence_factor: f64,
}

impl Default for NewtonSettings {
    fn default() -> Self {
        Self { tol: 1e-9, max_iters: 25, divergence_factor: 1e6 }
    }
}

impl NewtonSettings {
    pub fn validate(&self) -> Result<()> {
        if !(self.tol > 0.0) || self.max_iters == 0 || !(self.divergence_factor > 1.0) {
            return Err(Error::InvalidInput(format!("invalid Newton settings {self:?}")));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct NewtonReport {
    pub iterations: usize,
    pub residual: f64,
}

/// Everything a time step needs besides the state.
#[derive(Clone, Debug)]
pub struct StepContext<'a> {
    pub disc: &'a Discretization,
    pub nu: f64,
    pub dt: f64,
    pub data: &'a DirichletData,
    pub newton: NewtonSettings,
    pub form: ConvectionForm,
}

/// Newton iteration for `A u + N(u) − Bᵀ p = rhs`, `−B u = 0`, with the
/// Dirichlet values of `u` already imposed in the initial guess.
fn newton_saddle(
    d: &Discretization,
    a: &CsrMatrix,
    rhs: &[f64],
    convection: Option<ConvectionForm>,
    u: &mut [f64],
    p: &mut [f64],
    settings: &NewtonSettings,
    time: f64,
) -> Result<NewtonReport> {
    settings.validate()?;
    let (nu, np) = (d.n_u(), d.n_p());
    let n = d.n_total();
    let dir = d.space.dirichlet_vel_dofs();
    let mut lambda = 0.0;
    let residual = |u: &[f64], p: &[f64], lambda: f64| -> Vec<f64> {
        let mut r = vec![0.0; n];
        let au = a.matvec(u);
        let btp = d.neg_bt.matvec(p);
        for i in 0..nu {
            r[i] = au[i] + btp[i] - rhs[i];
        }
        if let Some(form) = convection {
            axpy(1.0, &nonlinear_term(&d.space, u, form), &mut r[..nu]);
        }
        let bu = d.neg_b.matvec(u);
        r[nu..nu + np].copy_from_slice(&bu);
        if let Some(g) = &d.gauge {
            axpy(lambda, g, &mut r[nu..nu + np]);
            r[nu + np] = crate::sparse::dot(g, p);
        }
        for &k in dir {
            r[k] = 0.0;
        }
        r
    };
    let mut r = residual(u, p, lambda);
    let r0 = norm2(&r);
    let mut res = r0;
    for it in 0..=settings.max_iters {
        if !res.is_finite() || res > settings.divergence_factor * r0.max(f64::MIN_POSITIVE) {
            return Err(Error::NewtonDiverged { step: 0, time, residual: res });
        }
        if res <= settings.tol {
            return Ok(NewtonReport { iterations: it, residual: res });
        }
        if it == settings.max_iters {
            break;
        }
        let j = match convection {
            Some(form) => CsrMatrix::lincomb(&[(1.0, a), (1.0, &nonlinear_jacobian(&d.space, u, form))]),
            None => a.clone(),
        };
        let mut b: Vec<f64> = r.iter().map(|v| -v).collect();
        let jc = eliminate(&d.saddle(&j), &mut b, dir, &vec![0.0; dir.len()]);
        let delta = SparseLu::new(&jc)?.solve(&b)?;
        axpy(1.0, &delta[..nu], u);
        axpy(1.0, &delta[nu..nu + np], p);
        if d.gauge.is_some() {
            lambda += delta[nu + np];
        }
        r = residual(u, p, lambda);
        res = norm2(&r);
    }
    Err(Error::NewtonDiverged { step: 0, time, residual: res })
}

/// Steady Stokes flow `−ν ΔU + ∇P = 0`, `∇·U = 0`, with the Dirichlet data at
/// time `t` and the natural condition on the outflow.
pub fn solve_stokes_at(d: &Discretization, data: &DirichletData, nu: f64, t: f64) -> Result<FlowState> {
    if !(nu > 0.0) {
        return Err(Error::InvalidInput(format!("viscosity must be positive, got {nu}")));
    }
    let a = d.ops.k.scale(nu);
    let mut u = vec![0.0; d.n_u()];
    data.impose(&d.space, &mut u, t);
    let mut p = vec![0.0; d.n_p()];
    let rhs = vec![0.0; d.n_u()];
    // linear problem: Newton converges in one solve
    let settings = NewtonSettings { tol: 1e-10, max_iters: 3, divergence_factor: 1e12 };
    match newton_saddle(d, &a, &rhs, None, &mut u, &mut p, &settings, t) {
        Ok(_) => Ok(FlowState { u, p, t }),
        Err(Error::NewtonDiverged { residual, .. }) => {
            Err(Error::SingularSystem(format!("Stokes solve left residual {residual:e}")))
        }
        Err(e) => Err(e),
    }
}

/// Steady Stokes flow for time-independent data.
pub fn solve_stokes(d: &Discretization, data: &DirichletData, nu: f64) -> Result<(Vec<f64>, Vec<f64>)> {
    let s = solve_stokes_at(d, data, nu, 0.0)?;
    Ok((s.u, s.p))
}

/// One implicit-Euler step. The forcing is evaluated implicitly at the new
/// velocity through its linear part.
pub fn nse_step(
    ctx: &StepContext<'_>,
    state: &FlowState,
    forcing: Option<&Forcing>,
) -> Result<(FlowState, NewtonReport)> {
    let d = ctx.disc;
    if !(ctx.dt > 0.0) {
        return Err(Error::InvalidInput(format!("time step must be positive, got {}", ctx.dt)));
    }
    if !(ctx.nu > 0.0) {
        return Err(Error::InvalidInput(format!("viscosity must be positive, got {}", ctx.nu)));
    }
    d.space.check_velocity(&state.u)?;
    d.space.check_pressure(&state.p)?;
    let t1 = state.t + ctx.dt;
    let inv_dt = 1.0 / ctx.dt;
    let mut rhs = d.ops.m.matvec(&state.u);
    rhs.iter_mut().for_each(|v| *v *= inv_dt);
    let mut a = CsrMatrix::lincomb(&[(inv_dt, &d.ops.m), (ctx.nu, &d.ops.k)]);
    if let Some(f) = forcing {
        axpy(1.0, &f.constant, &mut rhs);
        if let Some(l) = &f.linear {
            a = CsrMatrix::lincomb(&[(1.0, &a), (-1.0, l)]);
        }
    }
    let mut u = state.u.clone();
    ctx.data.impose(&d.space, &mut u, t1);
    let mut p = state.p.clone();
    let report = newton_saddle(d, &a, &rhs, Some(ctx.form), &mut u, &mut p, &ctx.newton, t1)?;
    Ok((FlowState { u, p, t: t1 }, report))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fem::{inlet_profile, TimeProfile};
    use crate::mesh::{generate_channel, generate_channel_cylinder, generate_unit_square};

    #[test]
    fn poiseuille_is_reproduced() {
        let d = Discretization::new(&generate_channel(10, 4).unwrap());
        let (u, p) = solve_stokes(&d, &DirichletData::channel(TimeProfile::Steady), 1.0).unwrap();
        let exact = d.space.interpolate_velocity(|_, y| [inlet_profile(y), 0.0]);
        for (a, b) in u.iter().zip(&exact) {
            assert!((a - b).abs() < 1e-8);
        }
        assert!(d.divergence(&u) < 1e-8);
        // ν ∂²u/∂y² = ∂p/∂x, with u'' = −12/0.41² and p = 0 at the outflow
        let slope = -12.0 / (0.41 * 0.41);
        for (k, pt) in d.space.mesh().nodes().iter().enumerate() {
            assert!((p[k] - slope * (pt[0] - 2.2)).abs() < 1e-7);
        }
    }

    #[test]
    fn zero_data_gives_zero_velocity_and_mean_zero_pressure() {
        let d = Discretization::new(&generate_unit_square(4).unwrap());
        let (u, p) = solve_stokes(&d, &DirichletData::homogeneous(), 1.0).unwrap();
        assert!(u.iter().all(|v| v.abs() < 1e-14));
        assert!(p.iter().all(|v| v.abs() < 1e-12));
    }

    #[test]
    fn stokes_state_is_nearly_steady_under_viscous_step() {
        let d = Discretization::new(&generate_channel_cylinder(30, 6, 12).unwrap());
        let data = DirichletData::channel(TimeProfile::Steady);
        let s = solve_stokes_at(&d, &data, 1.0, 0.0).unwrap();
        let ctx = StepContext { disc: &d, nu: 1.0, dt: 1e-3, data: &data, newton: NewtonSettings::default(), form: ConvectionForm::Standard };
        let (next, rep) = nse_step(&ctx, &s, None).unwrap();
        assert!(rep.residual <= 1e-9);
        assert!(d.divergence(&next.u) <= 1e-8);
        let diff = crate::sparse::sub(&next.u, &s.u);
        let rel = d.ops.mass_norm_sq(&diff).sqrt() / d.ops.mass_norm_sq(&s.u).sqrt();
        assert!(rel < 5e-3, "relative change {rel}");
    }

    #[test]
    fn non_positive_time_step_is_rejected() {
        let d = Discretization::new(&generate_unit_square(2).unwrap());
        let data = DirichletData::homogeneous();
        let ctx = StepContext { disc: &d, nu: 1.0, dt: 0.0, data: &data, newton: NewtonSettings::default(), form: ConvectionForm::Skew };
        let s = FlowState::zero(&d, 0.0);
        assert!(matches!(nse_step(&ctx, &s, None), Err(Error::InvalidInput(_))));
    }
}
