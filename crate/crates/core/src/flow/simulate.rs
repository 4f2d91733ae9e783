use super::{nse_step, Discretization, FlowState, NewtonSettings, StepContext};
use crate::control::{tracking_error, ControlConfig, ControlLaw};
use crate::error::{Error, Result};
use crate::fem::{ConvectionForm, DirichletData};
use crate::regularize::{aefr_step, efr_step, DifferentialFilter, EFRParams};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum EfrMode {
    #[default]
    Off,
    On,
    Adaptive,
}

impl EfrMode {
    pub fn label(self) -> &'static str {
        match self {
            Self::Off => "off",
            Self::On => "on",
            Self::Adaptive => "adaptive",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s.to_ascii_lowercase().as_str() {
            "off" | "none" | "noefr" => Some(Self::Off),
            "on" | "efr" => Some(Self::On),
            "adaptive" | "aefr" => Some(Self::Adaptive),
            _ => None,
        }
    }
}

#[derive(Clone, Debug)]
pub struct SimulationConfig {
    pub nu: f64,
    pub dt: f64,
    pub n_steps: usize,
    pub form: ConvectionForm,
    pub control: ControlConfig,
    pub efr: EfrMode,
    pub efr_params: Option<EFRParams>,
    pub data: DirichletData,
    pub newton: NewtonSettings,
    /// Defaults to zero velocity and pressure at `t = 0`.
    pub initial: Option<FlowState>,
}

impl SimulationConfig {
    pub fn new(nu: f64, dt: f64, n_steps: usize, data: DirichletData) -> Self {
        Self {
            nu,
            dt,
            n_steps,
            form: ConvectionForm::Skew,
            control: ControlConfig::none(),
            efr: EfrMode::Off,
            efr_params: None,
            data,
            newton: NewtonSettings::default(),
            initial: None,
        }
    }

    pub fn validate(&self, d: &Discretization) -> Result<()> {
        if !(self.nu > 0.0) || !(self.dt > 0.0) {
            return Err(Error::InvalidInput(format!("need ν > 0 and Δt > 0, got {} and {}", self.nu, self.dt)));
        }
        self.newton.validate()?;
        self.control.validate()?;
        if self.efr != EfrMode::Off {
            let p = self.efr_params.ok_or_else(|| Error::InvalidInput("EFR enabled without parameters".into()))?;
            p.validate()?;
            if self.efr == EfrMode::Adaptive {
                if p.tau.is_none() {
                    return Err(Error::InvalidInput("adaptive EFR needs a threshold".into()));
                }
                if self.control.desired.is_none() {
                    return Err(Error::InvalidInput("adaptive EFR needs a desired state".into()));
                }
            }
        }
        if let Some(s) = &self.initial {
            d.space.check_velocity(&s.u)?;
            d.space.check_pressure(&s.p)?;
        }
        Ok(())
    }
}

/// Per-state diagnostics; entry `n` describes the step that produced state `n`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StepRecord {
    pub t: f64,
    pub newton_iters: usize,
    pub newton_residual: f64,
    pub efr_active: bool,
    pub filter_deviation: f64,
    /// `‖uⁿ − Uⁿ‖²` when a desired state is configured.
    pub tracking_error: Option<f64>,
}

#[derive(Clone, Debug)]
pub struct Trajectory {
    pub states: Vec<FlowState>,
    pub records: Vec<StepRecord>,
    pub nu: f64,
    pub dt: f64,
    pub law: ControlLaw,
    pub gamma: f64,
    pub efr: EfrMode,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn times(&self) -> Vec<f64> {
        self.states.iter().map(|s| s.t).collect()
    }

    pub fn last(&self) -> &FlowState {
        self.states.last().expect("trajectory holds the initial state")
    }
}

/// Runs the configured simulation and returns `N_T + 1` states.
pub fn simulate(d: &Discretization, cfg: &SimulationConfig) -> Result<Trajectory> {
    match simulate_until_failure(d, cfg) {
        (traj, None) => Ok(traj),
        (_, Some(e)) => Err(e),
    }
}

/// Like [`simulate`] but keeps the states computed before a failure.
pub fn simulate_until_failure(d: &Discretization, cfg: &SimulationConfig) -> (Trajectory, Option<Error>) {
    let mut traj = Trajectory {
        states: Vec::new(),
        records: Vec::new(),
        nu: cfg.nu,
        dt: cfg.dt,
        law: cfg.control.law,
        gamma: cfg.control.gamma,
        efr: cfg.efr,
    };
    if let Err(e) = cfg.validate(d) {
        return (traj, Some(e));
    }
    let filter = match (cfg.efr, cfg.efr_params) {
        (EfrMode::Off, _) | (_, None) => None,
        (_, Some(p)) => match DifferentialFilter::new(&d.space, &d.ops, p.delta) {
            Ok(f) => Some(f),
            Err(e) => return (traj, Some(e)),
        },
    };
    let ctx = StepContext { disc: d, nu: cfg.nu, dt: cfg.dt, data: &cfg.data, newton: cfg.newton, form: cfg.form };
    let target = |t: f64| cfg.control.desired.as_ref().map(|ds| ds.at(t));
    let e_u = |u: &[f64], t: f64| target(t).map(|tgt| tracking_error(d, u, &tgt));

    let state0 = cfg.initial.clone().unwrap_or_else(|| FlowState::zero(d, 0.0));
    traj.records.push(StepRecord {
        t: state0.t,
        newton_iters: 0,
        newton_residual: 0.0,
        efr_active: false,
        filter_deviation: 0.0,
        tracking_error: e_u(&state0.u, state0.t),
    });
    traj.states.push(state0);
    let t0 = traj.states[0].t;
    for n in 0..cfg.n_steps {
        let state = traj.states.last().expect("initial state present");
        // evaluate times from the step index so they stay on the uniform grid
        let t_n = t0 + n as f64 * cfg.dt;
        let state = FlowState { t: t_n, ..state.clone() };
        let forcing = match cfg.control.forcing(d, t_n, cfg.dt, cfg.nu, cfg.form) {
            Ok(f) => f,
            Err(e) => return (traj, Some(e)),
        };
        let step = match (&filter, cfg.efr) {
            (Some(f), EfrMode::On) => efr_step(&ctx, &state, forcing.as_ref(), f, &cfg.efr_params.unwrap())
                .map(|(s, r, nr)| (s, r.efr_active, r.filter_deviation, nr)),
            (Some(f), EfrMode::Adaptive) => {
                let tgt = target(t_n).expect("validated desired state");
                aefr_step(&ctx, &state, forcing.as_ref(), f, &cfg.efr_params.unwrap(), &tgt)
                    .map(|(s, r, nr)| (s, r.efr_active, r.filter_deviation, nr))
            }
            _ => nse_step(&ctx, &state, forcing.as_ref()).map(|(s, nr)| (s, false, 0.0, nr)),
        };
        match step {
            Ok((mut next, efr_active, filter_deviation, newton)) => {
                next.t = t0 + (n + 1) as f64 * cfg.dt;
                traj.records.push(StepRecord {
                    t: next.t,
                    newton_iters: newton.iterations,
                    newton_residual: newton.residual,
                    efr_active,
                    filter_deviation,
                    tracking_error: e_u(&next.u, next.t),
                });
                traj.states.push(next);
            }
            Err(Error::NewtonDiverged { time, residual, .. }) => {
                return (traj, Some(Error::NewtonDiverged { step: n + 1, time, residual }));
            }
            Err(e) => return (traj, Some(e)),
        }
    }
    (traj, None)
}
