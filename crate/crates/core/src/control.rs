//! Desired states, the discrete feedback controls f_A and f_B, tracking error
//! and the theoretical contraction envelopes.
//!
//! A control is exposed through its affine decomposition `f(u) = f₀ + L u` in
//! test-function coordinates, so the Newton Jacobian picks up `−L`.

use crate::error::{Error, Result};
use crate::fem::{assemble_convection, assemble_transport, nonlinear_term, ConvectionForm, DirichletData, TimeProfile};
use crate::flow::{solve_stokes, Discretization};
use crate::sparse::{axpy, sub, CsrMatrix};

/// Weak forcing `⟨f(u), φ_i⟩ = f₀_i + (L u)_i`.
#[derive(Clone, Debug, PartialEq)]
pub struct Forcing {
    pub constant: Vec<f64>,
    pub linear: Option<CsrMatrix>,
}

impl Forcing {
    pub fn constant(v: Vec<f64>) -> Self {
        Self { constant: v, linear: None }
    }

    pub fn eval(&self, u: &[f64]) -> Vec<f64> {
        let mut out = self.constant.clone();
        if let Some(l) = &self.linear {
            axpy(1.0, &l.matvec(u), &mut out);
        }
        out
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum ControlLaw {
    #[default]
    None,
    FA,
    FB,
}

impl ControlLaw {
    pub fn label(self) -> &'static str {
        match self {
            Self::None => "none",
            Self::FA => "fa",
            Self::FB => "fb",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s.to_ascii_lowercase().as_str() {
            "none" => Some(Self::None),
            "fa" | "f_a" => Some(Self::FA),
            "fb" | "f_b" => Some(Self::FB),
            _ => None,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum DesiredKind {
    #[default]
    StokesSteady,
    /// `U (1 + e^{−2t})`.
    ExpDecay,
}

impl DesiredKind {
    pub fn scale(self, t: f64) -> f64 {
        match self {
            Self::StokesSteady => 1.0,
            Self::ExpDecay => TimeProfile::ExpDecay.theta(t),
        }
    }

    /// Inlet modulation the flow must use so that `u = U` on the Dirichlet boundary.
    pub fn time_profile(self) -> TimeProfile {
        match self {
            Self::StokesSteady => TimeProfile::Steady,
            Self::ExpDecay => TimeProfile::ExpDecay,
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            Self::StokesSteady => "stokes",
            Self::ExpDecay => "expdecay",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s.to_ascii_lowercase().as_str() {
            "stokes" | "steady" => Some(Self::StokesSteady),
            "expdecay" => Some(Self::ExpDecay),
            _ => None,
        }
    }
}

/// Target velocity `Uⁿ = s(tⁿ) U` built from a steady Stokes solve.
#[derive(Clone, Debug, PartialEq)]
pub struct DesiredState {
    pub kind: DesiredKind,
    pub u: Vec<f64>,
    pub p: Vec<f64>,
}

impl DesiredState {
    /// Stokes flow with unit viscosity and the steady parabolic inlet.
    pub fn stokes(d: &Discretization, kind: DesiredKind) -> Result<Self> {
        let (u, p) = solve_stokes(d, &DirichletData::channel(TimeProfile::Steady), 1.0)?;
        Ok(Self { kind, u, p })
    }

    pub fn scale(&self, t: f64) -> f64 {
        self.kind.scale(t)
    }

    pub fn at(&self, t: f64) -> Vec<f64> {
        let s = self.scale(t);
        self.u.iter().map(|v| s * v).collect()
    }
}

#[derive(Clone, Debug, PartialEq, Default)]
pub struct ControlConfig {
    pub law: ControlLaw,
    pub gamma: f64,
    pub desired: Option<DesiredState>,
}

impl ControlConfig {
    pub fn none() -> Self {
        Self::default()
    }

    pub fn new(law: ControlLaw, gamma: f64, desired: DesiredState) -> Self {
        Self { law, gamma, desired: Some(desired) }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.gamma >= 0.0) {
            return Err(Error::InvalidInput(format!("gamma must be nonnegative, got {}", self.gamma)));
        }
        if self.law != ControlLaw::None && self.desired.is_none() {
            return Err(Error::InvalidInput("a control law needs a desired state".into()));
        }
        Ok(())
    }

    /// Forcing for the step `tⁿ → tⁿ⁺¹`, or `None` without control.
    pub fn forcing(&self, d: &Discretization, t_n: f64, dt: f64, nu: f64, form: ConvectionForm) -> Result<Option<Forcing>> {
        self.validate()?;
        let Some(desired) = &self.desired else { return Ok(None) };
        let u0 = desired.at(t_n);
        let u1 = desired.at(t_n + dt);
        let f = forcing_f(d, &u0, &u1, dt, nu, form);
        Ok(match self.law {
            ControlLaw::None => None,
            ControlLaw::FA => Some(control_fa(d, &u1, self.gamma, f)),
            ControlLaw::FB => Some(control_fb(d, &u1, self.gamma, f)),
        })
    }
}

/// `F = M (U¹ − U⁰)/Δt + ν K U¹ + N(U¹)` in weak form.
pub fn forcing_f(d: &Discretization, u_n: &[f64], u_np1: &[f64], dt: f64, nu: f64, form: ConvectionForm) -> Vec<f64> {
    let diff = sub(u_np1, u_n);
    let mut f = d.ops.m.matvec(&diff);
    f.iter_mut().for_each(|v| *v /= dt);
    axpy(nu, &d.ops.k.matvec(u_np1), &mut f);
    axpy(1.0, &nonlinear_term(&d.space, u_np1, form), &mut f);
    f
}

/// `f_A(u) = F − γ M (u − U)`: constant part `F + γ M U`, linear part `−γ M`.
pub fn control_fa(d: &Discretization, u_target: &[f64], gamma: f64, f: Vec<f64>) -> Forcing {
    let mut constant = f;
    axpy(gamma, &d.ops.m.matvec(u_target), &mut constant);
    Forcing { constant, linear: Some(d.ops.m.scale(-gamma)) }
}

/// `f_B(u) = F + c̃(u − U; U, ·) − γ M (u − U)`.
///
/// With `T[i][j] = c̃(φ_j; U, φ_i)` the constant part is `F − T U + γ M U` and
/// the linear part is `T − γ M`.
pub fn control_fb(d: &Discretization, u_target: &[f64], gamma: f64, f: Vec<f64>) -> Forcing {
    let t = assemble_transport(&d.space, u_target, ConvectionForm::Skew);
    let mut constant = f;
    axpy(-1.0, &t.matvec(u_target), &mut constant);
    axpy(gamma, &d.ops.m.matvec(u_target), &mut constant);
    let linear = CsrMatrix::lincomb(&[(1.0, &t), (-gamma, &d.ops.m)]);
    Forcing { constant, linear: Some(linear) }
}

/// `E_U = (u − U)ᵀ M (u − U)`.
pub fn tracking_error(d: &Discretization, u: &[f64], target: &[f64]) -> f64 {
    d.ops.mass_norm_sq(&sub(u, target))
}

/// Skew convection matrix `c̃(w; φ_j, φ_i)`, re-exported for diagnostics.
pub fn skew_convection(d: &Discretization, w: &[f64]) -> CsrMatrix {
    assemble_convection(&d.space, w, ConvectionForm::Skew)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EnvelopeParams {
    pub gamma: f64,
    pub c0: f64,
    pub nu: f64,
    pub dt: f64,
    pub e0: f64,
}

impl EnvelopeParams {
    /// One-step contraction factor `ρ = 1/(1 + 2Δt(γ + C₀ν))`.
    pub fn rho(&self) -> f64 {
        1.0 / (1.0 + 2.0 * self.dt * (self.gamma + self.c0 * self.nu))
    }
}

/// `ρⁿ⁺¹ E_U(0)`: the bound on the tracking error after `n + 1` steps.
pub fn bound_envelope(params: &EnvelopeParams, n: usize) -> f64 {
    params.rho().powi(n as i32 + 1) * params.e0
}

/// Recursive envelope with measured filter deviations:
/// `e_{k+1} = e_k ρ/(1 − ε) + (χ dev_k)²/ε`, starting from `E_U(0)`.
/// Returns `e_1 … e_N` for `N = deviations.len()`.
pub fn efr_envelope(params: &EnvelopeParams, chi: f64, eps: f64, deviations: &[f64]) -> Vec<f64> {
    let rho = params.rho();
    let mut e = params.e0;
    deviations
        .iter()
        .map(|dev| {
            e = e * rho / (1.0 - eps) + (chi * dev).powi(2) / eps;
            e
        })
        .collect()
}
