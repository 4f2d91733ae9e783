use std::sync::Arc;

use super::space::TaylorHoodSpace;
use crate::mesh::{BoundaryTag, CHANNEL_HEIGHT};
use crate::sparse::{eliminate, CsrMatrix};

pub type BoundaryFn = Arc<dyn Fn(f64, f64, f64) -> [f64; 2] + Send + Sync>;

/// Time modulation of the inlet profile.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum TimeProfile {
    #[default]
    Steady,
    /// `sin(πt/8)` ramp.
    Sine,
    /// `1 + e^{−2t}`.
    ExpDecay,
}

impl TimeProfile {
    pub fn theta(self, t: f64) -> f64 {
        match self {
            Self::Steady => 1.0,
            Self::Sine => (std::f64::consts::PI * t / 8.0).sin(),
            Self::ExpDecay => 1.0 + (-2.0 * t).exp(),
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            Self::Steady => "steady",
            Self::Sine => "sine",
            Self::ExpDecay => "expdecay",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s.to_ascii_lowercase().as_str() {
            "steady" => Some(Self::Steady),
            "sine" => Some(Self::Sine),
            "expdecay" => Some(Self::ExpDecay),
            _ => None,
        }
    }
}

/// Parabolic inlet with peak 1.5 at mid-height.
pub fn inlet_profile(y: f64) -> f64 {
    6.0 / (CHANNEL_HEIGHT * CHANNEL_HEIGHT) * y * (CHANNEL_HEIGHT - y)
}

/// Velocity prescribed on the Dirichlet part of the boundary, per tag.
/// Tags without a function are no-slip.
#[derive(Clone, Default)]
pub struct DirichletData {
    inlet: Option<BoundaryFn>,
    wall: Option<BoundaryFn>,
    cylinder: Option<BoundaryFn>,
}

impl std::fmt::Debug for DirichletData {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("DirichletData")
            .field("inlet", &self.inlet.is_some())
            .field("wall", &self.wall.is_some())
            .field("cylinder", &self.cylinder.is_some())
            .finish()
    }
}

impl DirichletData {
    /// Zero velocity on every Dirichlet edge.
    pub fn homogeneous() -> Self {
        Self::default()
    }

    /// Parabolic inlet modulated by `profile`, no-slip elsewhere.
    pub fn channel(profile: TimeProfile) -> Self {
        Self::homogeneous().with(BoundaryTag::Inlet, move |_, y, t| [inlet_profile(y) * profile.theta(t), 0.0])
    }

    pub fn with(mut self, tag: BoundaryTag, f: impl Fn(f64, f64, f64) -> [f64; 2] + Send + Sync + 'static) -> Self {
        let f: BoundaryFn = Arc::new(f);
        match tag {
            BoundaryTag::Inlet => self.inlet = Some(f),
            BoundaryTag::Wall => self.wall = Some(f),
            BoundaryTag::Cylinder => self.cylinder = Some(f),
            BoundaryTag::Outflow => {}
        }
        self
    }

    pub fn value(&self, tag: BoundaryTag, x: f64, y: f64, t: f64) -> [f64; 2] {
        let f = match tag {
            BoundaryTag::Inlet => &self.inlet,
            BoundaryTag::Wall => &self.wall,
            BoundaryTag::Cylinder => &self.cylinder,
            BoundaryTag::Outflow => &None,
        };
        f.as_ref().map_or([0.0, 0.0], |f| f(x, y, t))
    }

    /// Values at `s.dirichlet_vel_dofs()`, in the same order.
    pub fn evaluate(&self, s: &TaylorHoodSpace, t: f64) -> Vec<f64> {
        let nodes = s.dirichlet_nodes();
        let mut out = vec![0.0; 2 * nodes.len()];
        for (k, &(n, tag)) in nodes.iter().enumerate() {
            let p = s.p2_coords()[n];
            let v = self.value(tag, p[0], p[1], t);
            out[k] = v[0];
            out[nodes.len() + k] = v[1];
        }
        out
    }

    /// Values at the Dirichlet nodes for one velocity component.
    pub fn evaluate_component(&self, s: &TaylorHoodSpace, t: f64, c: usize) -> Vec<f64> {
        let all = self.evaluate(s, t);
        let n = s.dirichlet_nodes().len();
        all[c * n..(c + 1) * n].to_vec()
    }

    /// Overwrites the Dirichlet DOFs of `u` with the data at time `t`.
    pub fn impose(&self, s: &TaylorHoodSpace, u: &mut [f64], t: f64) {
        for (&d, v) in s.dirichlet_vel_dofs().iter().zip(self.evaluate(s, t)) {
            u[d] = v;
        }
    }
}

/// Strong imposition of Dirichlet data on a system whose leading unknowns are
/// the velocity DOFs of `s`, by symmetric elimination.
///
/// The known values are moved to the right-hand side, the constrained rows and
/// columns become identity rows, and the constrained right-hand side entries
/// carry the prescribed values. Returns the constrained matrix; `rhs` is
/// updated in place.
pub fn apply_dirichlet(
    s: &TaylorHoodSpace,
    a: &CsrMatrix,
    rhs: &mut [f64],
    data: &DirichletData,
    t: f64,
) -> CsrMatrix {
    eliminate(a, rhs, s.dirichlet_vel_dofs(), &data.evaluate(s, t))
}
