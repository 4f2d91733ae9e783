//! Run configuration: a TOML file with sections, every key mirrored by a flag.

use std::path::{Path, PathBuf};

use clap::Args;
use efrlab::control::{ControlConfig, ControlLaw, DesiredKind, DesiredState};
use efrlab::fem::{ConvectionForm, DirichletData, TimeProfile};
use efrlab::flow::{Discretization, EfrMode, NewtonSettings, SimulationConfig};
use efrlab::mesh::{generate_channel_cylinder, load_mesh, Mesh};
use efrlab::regularize::{EFRParams, DEFAULT_C_DELTA};
use efrlab::rom::RomVariant;
use efrlab::{Error, Result};
use serde::{Deserialize, Serialize};

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MeshSection {
    pub file: Option<PathBuf>,
    pub nx: Option<usize>,
    pub ny: Option<usize>,
    pub n_circle: Option<usize>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FlowSection {
    pub nu: Option<f64>,
    pub dt: Option<f64>,
    pub t_end: Option<f64>,
    pub form: Option<String>,
    pub inlet: Option<String>,
    pub newton_tol: Option<f64>,
    pub newton_max_iters: Option<usize>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ControlSection {
    pub law: Option<String>,
    pub gamma: Option<f64>,
    pub desired: Option<String>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EfrSection {
    pub mode: Option<String>,
    pub c_delta: Option<f64>,
    /// Absolute relaxation parameter; wins over `chi_factor`.
    pub chi: Option<f64>,
    /// χ = chi_factor · Δt.
    pub chi_factor: Option<f64>,
    pub tau: Option<f64>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RomSection {
    pub snapshots: Option<usize>,
    pub r_u: Option<usize>,
    pub r_s: Option<usize>,
    pub r_p: Option<usize>,
    pub variant: Option<String>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSection {
    pub dir: Option<PathBuf>,
    pub seed: Option<u64>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub mesh: MeshSection,
    #[serde(default)]
    pub flow: FlowSection,
    #[serde(default)]
    pub control: ControlSection,
    #[serde(default)]
    pub efr: EfrSection,
    #[serde(default)]
    pub rom: RomSection,
    #[serde(default)]
    pub output: OutputSection,
}

/// Command-line mirrors of every configuration key.
#[derive(Args, Clone, Debug, Default)]
pub struct Overrides {
    /// Configuration file (TOML)
    #[arg(long, short = 'c')]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub mesh_file: Option<PathBuf>,
    #[arg(long)]
    pub nx: Option<usize>,
    #[arg(long)]
    pub ny: Option<usize>,
    #[arg(long)]
    pub n_circle: Option<usize>,
    #[arg(long)]
    pub nu: Option<f64>,
    #[arg(long)]
    pub dt: Option<f64>,
    #[arg(long)]
    pub t_end: Option<f64>,
    /// skew | standard
    #[arg(long)]
    pub form: Option<String>,
    /// steady | sine | expdecay
    #[arg(long)]
    pub inlet: Option<String>,
    #[arg(long)]
    pub newton_tol: Option<f64>,
    #[arg(long)]
    pub newton_max_iters: Option<usize>,
    /// none | fa | fb
    #[arg(long)]
    pub law: Option<String>,
    #[arg(long)]
    pub gamma: Option<f64>,
    /// stokes | expdecay
    #[arg(long)]
    pub desired: Option<String>,
    /// off | on | adaptive
    #[arg(long)]
    pub efr: Option<String>,
    #[arg(long)]
    pub c_delta: Option<f64>,
    #[arg(long)]
    pub chi: Option<f64>,
    #[arg(long)]
    pub chi_factor: Option<f64>,
    #[arg(long)]
    pub tau: Option<f64>,
    #[arg(long)]
    pub snapshots: Option<usize>,
    #[arg(long)]
    pub r_u: Option<usize>,
    #[arg(long)]
    pub r_s: Option<usize>,
    #[arg(long)]
    pub r_p: Option<usize>,
    /// noefr | efr | aefr
    #[arg(long)]
    pub variant: Option<String>,
    /// Output directory, relative to the output root
    #[arg(long)]
    pub dir: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
}

fn set<T: Clone>(slot: &mut Option<T>, v: &Option<T>) {
    if v.is_some() {
        slot.clone_from(v);
    }
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::InvalidInput(format!("config: {e}")))
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_toml(&std::fs::read_to_string(path)?)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("configuration serializes")
    }

    /// Loads the file named by `--config` (if any) on top of `self`, then applies the flags.
    pub fn merged(mut self, o: &Overrides) -> Result<Self> {
        if let Some(path) = &o.config {
            let file = Self::load(path)?;
            self.overlay(&file);
        }
        let m = &mut self.mesh;
        set(&mut m.file, &o.mesh_file);
        set(&mut m.nx, &o.nx);
        set(&mut m.ny, &o.ny);
        set(&mut m.n_circle, &o.n_circle);
        let f = &mut self.flow;
        set(&mut f.nu, &o.nu);
        set(&mut f.dt, &o.dt);
        set(&mut f.t_end, &o.t_end);
        set(&mut f.form, &o.form);
        set(&mut f.inlet, &o.inlet);
        set(&mut f.newton_tol, &o.newton_tol);
        set(&mut f.newton_max_iters, &o.newton_max_iters);
        let c = &mut self.control;
        set(&mut c.law, &o.law);
        set(&mut c.gamma, &o.gamma);
        set(&mut c.desired, &o.desired);
        let e = &mut self.efr;
        set(&mut e.mode, &o.efr);
        set(&mut e.c_delta, &o.c_delta);
        set(&mut e.chi, &o.chi);
        set(&mut e.chi_factor, &o.chi_factor);
        set(&mut e.tau, &o.tau);
        let r = &mut self.rom;
        set(&mut r.snapshots, &o.snapshots);
        set(&mut r.r_u, &o.r_u);
        set(&mut r.r_s, &o.r_s);
        set(&mut r.r_p, &o.r_p);
        set(&mut r.variant, &o.variant);
        set(&mut self.output.dir, &o.dir);
        set(&mut self.output.seed, &o.seed);
        Ok(self)
    }

    /// Every key set in `other` replaces the value in `self`.
    pub fn overlay(&mut self, other: &RunConfig) {
        let o = other;
        set(&mut self.mesh.file, &o.mesh.file);
        set(&mut self.mesh.nx, &o.mesh.nx);
        set(&mut self.mesh.ny, &o.mesh.ny);
        set(&mut self.mesh.n_circle, &o.mesh.n_circle);
        set(&mut self.flow.nu, &o.flow.nu);
        set(&mut self.flow.dt, &o.flow.dt);
        set(&mut self.flow.t_end, &o.flow.t_end);
        set(&mut self.flow.form, &o.flow.form);
        set(&mut self.flow.inlet, &o.flow.inlet);
        set(&mut self.flow.newton_tol, &o.flow.newton_tol);
        set(&mut self.flow.newton_max_iters, &o.flow.newton_max_iters);
        set(&mut self.control.law, &o.control.law);
        set(&mut self.control.gamma, &o.control.gamma);
        set(&mut self.control.desired, &o.control.desired);
        set(&mut self.efr.mode, &o.efr.mode);
        set(&mut self.efr.c_delta, &o.efr.c_delta);
        set(&mut self.efr.chi, &o.efr.chi);
        set(&mut self.efr.chi_factor, &o.efr.chi_factor);
        set(&mut self.efr.tau, &o.efr.tau);
        set(&mut self.rom.snapshots, &o.rom.snapshots);
        set(&mut self.rom.r_u, &o.rom.r_u);
        set(&mut self.rom.r_s, &o.rom.r_s);
        set(&mut self.rom.r_p, &o.rom.r_p);
        set(&mut self.rom.variant, &o.rom.variant);
        set(&mut self.output.dir, &o.output.dir);
        set(&mut self.output.seed, &o.output.seed);
    }
}

/// A validated configuration with defaults filled in.
#[derive(Clone, Debug, PartialEq)]
pub struct Resolved {
    pub mesh_file: Option<PathBuf>,
    pub mesh_params: (usize, usize, usize),
    pub nu: f64,
    pub dt: f64,
    pub t_end: f64,
    pub n_steps: usize,
    pub form: ConvectionForm,
    pub inlet: TimeProfile,
    pub newton: NewtonSettings,
    pub law: ControlLaw,
    pub gamma: f64,
    pub desired: DesiredKind,
    pub efr: EfrMode,
    pub c_delta: f64,
    pub chi: f64,
    pub tau: Option<f64>,
    pub snapshots: Option<usize>,
    pub r_u: usize,
    pub r_s: usize,
    pub r_p: usize,
    pub variant: RomVariant,
    pub seed: u64,
}

fn bad(msg: impl Into<String>) -> Error {
    Error::InvalidInput(msg.into())
}

fn positive(name: &str, v: f64) -> Result<f64> {
    if v > 0.0 && v.is_finite() {
        Ok(v)
    } else {
        Err(bad(format!("{name} must be positive, got {v}")))
    }
}

pub fn parse_variant(s: &str) -> Option<RomVariant> {
    match s.to_ascii_lowercase().as_str() {
        "noefr" | "off" => Some(RomVariant::NoEfr),
        "efr" | "on" => Some(RomVariant::Efr),
        "aefr" | "adaptive" => Some(RomVariant::Aefr),
        _ => None,
    }
}

impl RunConfig {
    pub fn resolve(&self) -> Result<Resolved> {
        let f = &self.flow;
        let nu = positive("nu", f.nu.unwrap_or(1e-3))?;
        let dt = positive("dt", f.dt.unwrap_or(1e-2))?;
        let t_end = positive("t_end", f.t_end.unwrap_or(1.0))?;
        let steps = t_end / dt;
        let n_steps = steps.round() as usize;
        if n_steps == 0 || (steps - n_steps as f64).abs() > 1e-9 * steps.max(1.0) {
            return Err(bad(format!("t_end = {t_end} is not an integer multiple of dt = {dt}")));
        }
        let law_s = self.control.law.as_deref().unwrap_or("none");
        let law = ControlLaw::parse(law_s).ok_or_else(|| bad(format!("unknown control law {law_s}")))?;
        let form_s = f.form.as_deref().unwrap_or(if law == ControlLaw::None { "standard" } else { "skew" });
        let form = ConvectionForm::parse(form_s).ok_or_else(|| bad(format!("unknown convection form {form_s}")))?;
        let desired_s = self.control.desired.as_deref().unwrap_or("stokes");
        let desired = DesiredKind::parse(desired_s).ok_or_else(|| bad(format!("unknown desired state {desired_s}")))?;
        let inlet = match f.inlet.as_deref() {
            Some(s) => TimeProfile::parse(s).ok_or_else(|| bad(format!("unknown inlet profile {s}")))?,
            None => desired.time_profile(),
        };
        if law != ControlLaw::None && inlet != desired.time_profile() {
            return Err(bad(format!(
                "the inlet profile {} does not match the desired state {}",
                inlet.label(),
                desired.label()
            )));
        }
        let gamma = self.control.gamma.unwrap_or(if law == ControlLaw::None { 0.0 } else { 1.0 });
        if !(gamma >= 0.0) {
            return Err(bad(format!("gamma must be nonnegative, got {gamma}")));
        }
        let newton = NewtonSettings {
            tol: positive("newton_tol", f.newton_tol.unwrap_or(1e-9))?,
            max_iters: f.newton_max_iters.unwrap_or(25),
            ..NewtonSettings::default()
        };
        newton.validate()?;
        let e = &self.efr;
        let mode_s = e.mode.as_deref().unwrap_or("off");
        let efr = EfrMode::parse(mode_s).ok_or_else(|| bad(format!("unknown EFR mode {mode_s}")))?;
        let c_delta = e.c_delta.unwrap_or(DEFAULT_C_DELTA);
        if !(c_delta >= 0.0) {
            return Err(bad(format!("c_delta must be nonnegative, got {c_delta}")));
        }
        let chi = e.chi.unwrap_or(e.chi_factor.unwrap_or(5.0) * dt);
        if !(0.0..=1.0).contains(&chi) {
            return Err(bad(format!("chi must lie in [0, 1], got {chi}")));
        }
        let tau = e.tau;
        let r = &self.rom;
        let variant = match r.variant.as_deref() {
            Some(s) => parse_variant(s).ok_or_else(|| bad(format!("unknown ROM variant {s}")))?,
            None => RomVariant::NoEfr,
        };
        let adaptive = efr == EfrMode::Adaptive || variant == RomVariant::Aefr;
        match (adaptive, tau) {
            (true, None) => return Err(bad("tau is required for adaptive EFR")),
            (false, Some(_)) => return Err(bad("tau is only meaningful for adaptive EFR")),
            (true, Some(t)) => {
                positive("tau", t)?;
                if law == ControlLaw::None {
                    return Err(bad("adaptive EFR needs a control law and its desired state"));
                }
            }
            _ => {}
        }
        Ok(Resolved {
            mesh_file: self.mesh.file.clone(),
            mesh_params: (self.mesh.nx.unwrap_or(36), self.mesh.ny.unwrap_or(7), self.mesh.n_circle.unwrap_or(16)),
            nu,
            dt,
            t_end,
            n_steps,
            form,
            inlet,
            newton,
            law,
            gamma,
            desired,
            efr,
            c_delta,
            chi,
            tau,
            snapshots: r.snapshots,
            r_u: r.r_u.unwrap_or(20),
            r_s: r.r_s.unwrap_or(1),
            r_p: r.r_p.unwrap_or(1),
            variant,
            seed: self.output.seed.unwrap_or(0),
        })
    }
}

impl Resolved {
    pub fn mesh(&self) -> Result<Mesh> {
        match &self.mesh_file {
            Some(p) => load_mesh(p),
            None => {
                let (nx, ny, nc) = self.mesh_params;
                generate_channel_cylinder(nx, ny, nc)
            }
        }
    }

    pub fn efr_params(&self, mesh: &Mesh) -> EFRParams {
        EFRParams::from_mesh(self.c_delta, mesh.h_min(), self.chi, self.tau)
    }

    pub fn desired_state(&self, d: &Discretization) -> Result<Option<DesiredState>> {
        if self.law == ControlLaw::None && self.efr != EfrMode::Adaptive {
            return Ok(None);
        }
        DesiredState::stokes(d, self.desired).map(Some)
    }

    pub fn simulation(&self, d: &Discretization, mesh: &Mesh) -> Result<SimulationConfig> {
        let mut cfg = SimulationConfig::new(self.nu, self.dt, self.n_steps, DirichletData::channel(self.inlet));
        cfg.form = self.form;
        cfg.newton = self.newton;
        if let Some(des) = self.desired_state(d)? {
            cfg.control = ControlConfig { law: self.law, gamma: self.gamma, desired: Some(des) };
        }
        cfg.efr = self.efr;
        if self.efr != EfrMode::Off {
            cfg.efr_params = Some(self.efr_params(mesh));
        }
        Ok(cfg)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flags_override_file_values() {
        let file = RunConfig::from_toml("[flow]\nnu = 0.5\ndt = 0.1\nt_end = 1.0\n[control]\nlaw = \"fb\"\n").unwrap();
        let o = Overrides { nu: Some(0.25), ..Default::default() };
        let merged = file.merged(&o).unwrap();
        assert_eq!(merged.flow.nu, Some(0.25));
        assert_eq!(merged.flow.dt, Some(0.1));
        let r = merged.resolve().unwrap();
        assert_eq!(r.n_steps, 10);
        assert_eq!(r.form, ConvectionForm::Skew);
        assert_eq!(r.chi, 5.0 * 0.1);
    }

    #[test]
    fn invalid_configs_are_rejected() {
        let bad = |s: &str| RunConfig::from_toml(s).and_then(|c| c.resolve()).is_err();
        assert!(bad("[flow]\nnu = -1.0\n"));
        assert!(bad("[flow]\ndt = 0.3\nt_end = 1.0\n"));
        assert!(bad("[efr]\nmode = \"adaptive\"\n"));
        assert!(bad("[efr]\ntau = 0.1\n"));
        assert!(bad("[flow]\nunknown = 1\n"));
        assert!(bad("[control]\nlaw = \"fz\"\n"));
        assert!(bad("[control]\nlaw = \"fb\"\n[flow]\ninlet = \"sine\"\n"));
    }

    #[test]
    fn toml_echo_round_trips() {
        let mut c = RunConfig::default();
        c.flow.nu = Some(1e-4);
        c.efr.chi_factor = Some(5.0);
        c.rom.r_u = Some(20);
        assert_eq!(RunConfig::from_toml(&c.to_toml()).unwrap(), c);
    }
}
