use super::{reconstruct, Lifting, PODBasis, ReducedOperators};
use crate::control::{ControlLaw, DesiredState};
use crate::error::{Error, Result};
use crate::fem::FlowOperators;
use crate::flow::{NewtonReport, NewtonSettings};
use crate::regularize::{relax, EFRParams};
use crate::sparse::{dot, norm2, sub, DenseMatrix};

#[derive(Clone, Debug, PartialEq)]
pub struct ReducedState {
    pub a_u: Vec<f64>,
    pub a_p: Vec<f64>,
    pub t: f64,
}

impl ReducedState {
    pub fn zero(ro: &ReducedOperators, t: f64) -> Self {
        Self { a_u: vec![0.0; ro.r_us], a_p: vec![0.0; ro.r_p], t }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RomVariant {
    NoEfr,
    Efr,
    Aefr,
}

impl RomVariant {
    pub fn label(self) -> &'static str {
        match self {
            Self::NoEfr => "noefr",
            Self::Efr => "efr",
            Self::Aefr => "aefr",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RomConfig {
    pub nu: f64,
    pub dt: f64,
    pub law: ControlLaw,
    pub gamma: f64,
    pub newton: NewtonSettings,
    pub efr: Option<EFRParams>,
}

impl RomConfig {
    pub fn new(nu: f64, dt: f64) -> Self {
        Self { nu, dt, law: ControlLaw::None, gamma: 0.0, newton: NewtonSettings::default(), efr: None }
    }

    fn validate(&self, ro: &ReducedOperators) -> Result<()> {
        if !(self.nu > 0.0) || !(self.dt > 0.0) {
            return Err(Error::InvalidInput(format!("need ν > 0 and Δt > 0, got {} and {}", self.nu, self.dt)));
        }
        if self.law != ControlLaw::None && ro.control.is_none() {
            return Err(Error::InvalidInput("control requested but no desired state was projected".into()));
        }
        self.newton.validate()
    }
}

/// Reduced forcing `f(a) = f₀ + L_f a` for the step ending at `t1`.
fn reduced_forcing(ro: &ReducedOperators, cfg: &RomConfig, t0: f64, t1: f64) -> Option<(Vec<f64>, DenseMatrix)> {
    let c = ro.control.as_ref()?;
    if cfg.law == ControlLaw::None {
        return None;
    }
    let (s0, s1) = (c.kind.scale(t0), c.kind.scale(t1));
    let th1 = ro.lifting.theta(t1);
    let g = cfg.gamma;
    let r = ro.r_us;
    let mut f0: Vec<f64> = (0..r)
        .map(|i| (s1 - s0) / cfg.dt * c.m_u[i] + cfg.nu * s1 * c.k_u[i] + s1 * s1 * c.n_u[i] + g * s1 * c.m_u[i] - g * th1 * ro.m_l[i])
        .collect();
    let mut lin = DenseMatrix::from_fn(r, r, |i, j| -g * ro.mr[(i, j)]);
    if cfg.law == ControlLaw::FB {
        for i in 0..r {
            f0[i] += -s1 * s1 * c.t_u[i] + s1 * th1 * c.t_l[i];
            for j in 0..r {
                lin[(i, j)] += s1 * c.t_phi[(i, j)];
            }
        }
    }
    Some((f0, lin))
}

fn newton(ro: &ReducedOperators, cfg: &RomConfig, state: &ReducedState) -> Result<(ReducedState, NewtonReport)> {
    let (r, rp) = (ro.r_us, ro.r_p);
    let t0 = state.t;
    let t1 = t0 + cfg.dt;
    let (th0, th1) = (ro.lifting.theta(t0), ro.lifting.theta(t1));
    let forcing = reduced_forcing(ro, cfg, t0, t1);
    let inv_dt = 1.0 / cfg.dt;
    // affine part independent of a
    let base: Vec<f64> = (0..r)
        .map(|i| {
            let mut v = (th1 - th0) * inv_dt * ro.m_l[i] + cfg.nu * th1 * ro.k_l[i];
            v -= inv_dt * dot(&ro.mr.data[i * r..(i + 1) * r], &state.a_u);
            if let Some((f0, _)) = &forcing {
                v -= f0[i];
            }
            v
        })
        .collect();
    let linear = DenseMatrix::from_fn(r, r, |i, j| {
        let mut v = inv_dt * ro.mr[(i, j)] + cfg.nu * ro.kr[(i, j)];
        if let Some((_, l)) = &forcing {
            v -= l[(i, j)];
        }
        v
    });
    let residual = |a: &[f64], b: &[f64]| -> Vec<f64> {
        let mut res = vec![0.0; r + rp];
        let la = linear.matvec(a);
        let na = ro.nonlinear(a, th1);
        let btb = ro.br.matvec_t(b);
        for i in 0..r {
            res[i] = base[i] + la[i] + na[i] - btb[i];
        }
        let ba = ro.br.matvec(a);
        for q in 0..rp {
            res[r + q] = -(ba[q] + th1 * ro.b_l[q]);
        }
        res
    };
    let mut a = state.a_u.clone();
    let mut b = state.a_p.clone();
    let mut res = residual(&a, &b);
    let r0 = norm2(&res);
    let mut rn = r0;
    let s = &cfg.newton;
    for it in 0..=s.max_iters {
        if !rn.is_finite() || rn > s.divergence_factor * r0.max(f64::MIN_POSITIVE) {
            return Err(Error::NewtonDiverged { step: 0, time: t1, residual: rn });
        }
        if rn <= s.tol {
            return Ok((ReducedState { a_u: a, a_p: b, t: t1 }, NewtonReport { iterations: it, residual: rn }));
        }
        if it == s.max_iters {
            break;
        }
        let jn = ro.nonlinear_jacobian(&a, th1);
        let jac = DenseMatrix::from_fn(r + rp, r + rp, |i, j| match (i < r, j < r) {
            (true, true) => linear[(i, j)] + jn[(i, j)],
            (true, false) => -ro.br[(j - r, i)],
            (false, true) => -ro.br[(i - r, j)],
            (false, false) => 0.0,
        });
        let rhs: Vec<f64> = res.iter().map(|v| -v).collect();
        let delta = jac.solve(&rhs)?;
        a.iter_mut().zip(&delta[..r]).for_each(|(x, d)| *x += d);
        b.iter_mut().zip(&delta[r..]).for_each(|(x, d)| *x += d);
        res = residual(&a, &b);
        rn = norm2(&res);
    }
    Err(Error::NewtonDiverged { step: 0, time: t1, residual: rn })
}

/// One reduced step. The EFR variant filters with
/// `(δ² K_r + M_r) ā = M_r ã − δ² θ Φᵀ K L` and relaxes the coefficients.
/// Returns the new state, whether the filter ran, and the Newton report.
pub fn rom_step(
    ro: &ReducedOperators,
    state: &ReducedState,
    cfg: &RomConfig,
    variant: RomVariant,
) -> Result<(ReducedState, bool, NewtonReport)> {
    cfg.validate(ro)?;
    if state.a_u.len() != ro.r_us || state.a_p.len() != ro.r_p {
        return Err(Error::InvalidInput("reduced state does not match the operators".into()));
    }
    match variant {
        RomVariant::NoEfr => newton(ro, cfg, state).map(|(s, rep)| (s, false, rep)),
        RomVariant::Efr => {
            let params = cfg.efr.ok_or_else(|| Error::InvalidInput("EFR variant needs parameters".into()))?;
            params.validate()?;
            let (evolved, rep) = newton(ro, cfg, state)?;
            let d2 = params.delta * params.delta;
            let th = ro.lifting.theta(evolved.t);
            let mut rhs = ro.mr.matvec(&evolved.a_u);
            rhs.iter_mut().zip(&ro.k_l).for_each(|(v, k)| *v -= d2 * th * k);
            let a_bar = ro.filter_matrix(params.delta).solve(&rhs)?;
            let a_u = relax(&evolved.a_u, &a_bar, params.chi);
            Ok((ReducedState { a_u, a_p: evolved.a_p, t: evolved.t }, true, rep))
        }
        RomVariant::Aefr => {
            let tau = cfg.efr.and_then(|p| p.tau).ok_or_else(|| Error::InvalidInput("adaptive EFR needs a threshold".into()))?;
            rom_aefr_step(ro, state, cfg, tau)
        }
    }
}

/// EFR while the tracking criterion `‖θ L + Φ a − s U‖²_M ≥ τ`, else a plain step.
pub fn rom_aefr_step(
    ro: &ReducedOperators,
    state: &ReducedState,
    cfg: &RomConfig,
    tau: f64,
) -> Result<(ReducedState, bool, NewtonReport)> {
    if !(tau > 0.0) {
        return Err(Error::InvalidInput(format!("adaptive threshold must be positive, got {tau}")));
    }
    let e = ro
        .tracking_error(&state.a_u, state.t)
        .ok_or_else(|| Error::InvalidInput("adaptive EFR needs a desired state".into()))?;
    let variant = if e >= tau { RomVariant::Efr } else { RomVariant::NoEfr };
    rom_step(ro, state, cfg, variant)
}

impl ReducedOperators {
    /// `‖θ L + Φ a − s U‖²_M` from reduced quantities only.
    pub fn tracking_error(&self, a: &[f64], t: f64) -> Option<f64> {
        let c = self.control.as_ref()?;
        let th = self.lifting.theta(t);
        let s = c.kind.scale(t);
        let ma = self.mr.matvec(a);
        let cross: f64 = (0..self.r_us).map(|i| a[i] * (th * self.m_l[i] - s * c.m_u[i])).sum();
        Some(dot(a, &ma) + 2.0 * cross + th * th * c.lml - 2.0 * th * s * c.lmu + s * s * c.umu)
    }
}

/// The same criterion through a full-order reconstruction.
pub fn criterion_by_reconstruction(
    ops: &FlowOperators,
    basis: &PODBasis,
    lifting: &Lifting,
    desired: &DesiredState,
    state: &ReducedState,
) -> Result<f64> {
    let full = reconstruct(state, basis, lifting)?;
    Ok(ops.mass_norm_sq(&sub(&full.u, &desired.at(state.t))))
}

#[derive(Clone, Debug, PartialEq)]
pub struct RomTrajectory {
    pub states: Vec<ReducedState>,
    pub efr_active: Vec<bool>,
    pub newton_iters: Vec<usize>,
}

/// Runs `n_steps` reduced steps; the first entry is `initial`.
pub fn rom_simulate(
    ro: &ReducedOperators,
    cfg: &RomConfig,
    variant: RomVariant,
    initial: ReducedState,
    n_steps: usize,
) -> Result<RomTrajectory> {
    let t0 = initial.t;
    let mut traj = RomTrajectory { states: vec![initial], efr_active: vec![false], newton_iters: vec![0] };
    for n in 0..n_steps {
        let mut cur = traj.states.last().unwrap().clone();
        cur.t = t0 + n as f64 * cfg.dt;
        let (mut next, active, rep) = rom_step(ro, &cur, cfg, variant).map_err(|e| match e {
            Error::NewtonDiverged { time, residual, .. } => Error::NewtonDiverged { step: n + 1, time, residual },
            e => e,
        })?;
        next.t = t0 + (n + 1) as f64 * cfg.dt;
        traj.states.push(next);
        traj.efr_active.push(active);
        traj.newton_iters.push(rep.iterations);
    }
    Ok(traj)
}
