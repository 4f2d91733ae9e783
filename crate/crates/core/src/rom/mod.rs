//! POD-Galerkin reduced models: snapshot handling, POD with supremizer
//! enrichment, offline projection and the online reduced solvers.
//!
//! Velocities are written as `u = θ(t) L + Φ a`, where the lifting `L` is the
//! steady Stokes field and `θ` the inlet time profile, so every mode vanishes
//! on the Dirichlet boundary.

mod online;
mod pod;
mod reduced;

pub use online::{
    criterion_by_reconstruction, rom_aefr_step, rom_simulate, rom_step, RomConfig, RomTrajectory, RomVariant,
    ReducedState,
};
pub use pod::{
    build_enriched_basis, numerical_rank, orthonormalize, pod, retained_info, supremizer, PODBasis, PodModes, SupremizerSolver,
    BASIS_MAGIC, RANK_TOL,
};
pub use reduced::{project_operators, ReducedControl, ReducedOperators};

use crate::error::{Error, Result};
use crate::fem::{FlowOperators, TimeProfile};
use crate::flow::{solve_stokes, Discretization, FlowState, Trajectory};
use crate::sparse::{axpy, dot, sub};

/// `θ(t) L`, carrying the Dirichlet trace of the flow.
#[derive(Clone, Debug, PartialEq)]
pub struct Lifting {
    pub field: Vec<f64>,
    pub profile: TimeProfile,
}

impl Lifting {
    /// Unit-viscosity Stokes flow with the steady channel inlet.
    pub fn stokes(d: &Discretization, profile: TimeProfile) -> Result<Self> {
        let (field, _) = solve_stokes(d, &crate::fem::DirichletData::channel(TimeProfile::Steady), 1.0)?;
        Ok(Self { field, profile })
    }

    pub fn theta(&self, t: f64) -> f64 {
        self.profile.theta(t)
    }

    pub fn at(&self, t: f64) -> Vec<f64> {
        let th = self.theta(t);
        self.field.iter().map(|v| th * v).collect()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SnapshotSet {
    pub times: Vec<f64>,
    /// `uⁿ − θ(tⁿ) L`, exactly zero on Dirichlet DOFs.
    pub velocity: Vec<Vec<f64>>,
    pub pressure: Vec<Vec<f64>>,
    pub lifting: Lifting,
}

impl SnapshotSet {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    /// Lifting coefficients `θ(tⁿ)`.
    pub fn thetas(&self) -> Vec<f64> {
        self.times.iter().map(|&t| self.lifting.theta(t)).collect()
    }
}

/// Indices of `count` equispaced states, aligned with the last state.
/// `count` equal to the trajectory length selects everything.
pub fn snapshot_indices(len: usize, count: usize) -> Result<Vec<usize>> {
    if count == 0 || count > len {
        return Err(Error::InsufficientSnapshots { requested: count, available: len });
    }
    let stride = len / count;
    Ok((0..count).map(|i| len - 1 - (count - 1 - i) * stride).collect())
}

pub fn collect_snapshots(d: &Discretization, traj: &Trajectory, count: usize, lifting: &Lifting) -> Result<SnapshotSet> {
    let idx = snapshot_indices(traj.len(), count)?;
    let dir = d.space.dirichlet_vel_dofs();
    let mut set = SnapshotSet { times: Vec::new(), velocity: Vec::new(), pressure: Vec::new(), lifting: lifting.clone() };
    for k in idx {
        let s = &traj.states[k];
        d.space.check_velocity(&s.u)?;
        let mut v = sub(&s.u, &lifting.at(s.t));
        // the traces agree up to rounding of θ(t)·g; make them exactly homogeneous
        for &j in dir {
            v[j] = 0.0;
        }
        set.times.push(s.t);
        set.velocity.push(v);
        set.pressure.push(s.p.clone());
    }
    Ok(set)
}

/// POD on lifted velocities, supremizers of the pressure snapshots and
/// pressures, assembled into an enriched basis.
pub fn build_basis(d: &Discretization, snaps: &SnapshotSet, r_u: usize, r_s: usize, r_p: usize) -> Result<PODBasis> {
    let u_modes = pod(&snaps.velocity, r_u, &d.ops.m)?;
    let p_modes = pod(&snaps.pressure, r_p, &d.ops.mp)?;
    let s_modes = if r_s > 0 {
        let solver = SupremizerSolver::new(&d.space, &d.ops)?;
        let sups = snaps.pressure.iter().map(|p| solver.apply(p)).collect::<Result<Vec<_>>>()?;
        Some(pod(&sups, r_s, &d.ops.m)?)
    } else {
        None
    };
    build_enriched_basis(u_modes, s_modes, p_modes, &d.ops.m)
}

/// Numerical ranks `(velocity, supremizer, pressure)` of a snapshot set.
pub fn snapshot_ranks(d: &Discretization, snaps: &SnapshotSet, rel_tol: f64) -> Result<(usize, usize, usize)> {
    let ru = numerical_rank(&pod(&snaps.velocity, 1, &d.ops.m)?.eigenvalues, rel_tol);
    let rp = numerical_rank(&pod(&snaps.pressure, 1, &d.ops.mp)?.eigenvalues, rel_tol);
    let solver = SupremizerSolver::new(&d.space, &d.ops)?;
    let sups = snaps.pressure.iter().map(|p| solver.apply(p)).collect::<Result<Vec<_>>>()?;
    let rs = numerical_rank(&pod(&sups, 1, &d.ops.m)?.eigenvalues, rel_tol);
    Ok((ru, rs, rp))
}

/// Coefficients minimizing the M (resp. M_p) distance to a full-order state.
pub fn project_state(ops: &FlowOperators, basis: &PODBasis, lifting: &Lifting, state: &FlowState) -> Result<ReducedState> {
    let v = sub(&state.u, &lifting.at(state.t));
    let mv = ops.m.matvec(&v);
    let rhs: Vec<f64> = basis.velocity.iter().map(|phi| dot(phi, &mv)).collect();
    let a_u = basis.velocity_gram(&ops.m).solve(&rhs)?;
    let mp = ops.mp.matvec(&state.p);
    let rhs: Vec<f64> = basis.pressure.iter().map(|psi| dot(psi, &mp)).collect();
    let a_p = if rhs.is_empty() { Vec::new() } else { basis.pressure_gram(&ops.mp).solve(&rhs)? };
    Ok(ReducedState { a_u, a_p, t: state.t })
}

/// `u = θ(t) L + Σ a_j φ_j`, `p = Σ b_q ψ_q`.
pub fn reconstruct(rs: &ReducedState, basis: &PODBasis, lifting: &Lifting) -> Result<FlowState> {
    if rs.a_u.len() != basis.r_us() || rs.a_p.len() != basis.r_p() {
        return Err(Error::InvalidInput(format!(
            "state has ({}, {}) coefficients, basis has ({}, {}) modes",
            rs.a_u.len(),
            rs.a_p.len(),
            basis.r_us(),
            basis.r_p()
        )));
    }
    let mut u = lifting.at(rs.t);
    for (a, phi) in rs.a_u.iter().zip(&basis.velocity) {
        axpy(*a, phi, &mut u);
    }
    let mut p = vec![0.0; basis.n_p()];
    for (b, psi) in rs.a_p.iter().zip(&basis.pressure) {
        axpy(*b, psi, &mut p);
    }
    Ok(FlowState { u, p, t: rs.t })
}

/// Squared relative L² errors `‖uⁿ − u_rⁿ‖² / ‖uⁿ‖²` and the pressure analogue.
/// A zero reference gives 0 when the difference vanishes and +∞ otherwise.
pub fn relative_errors(ops: &FlowOperators, fom: &[FlowState], rom: &[FlowState]) -> Result<(Vec<f64>, Vec<f64>)> {
    if fom.len() != rom.len() {
        return Err(Error::GridMismatch(format!("{} full-order states vs {} reduced", fom.len(), rom.len())));
    }
    let ratio = |num: f64, den: f64| {
        if den > 0.0 {
            num / den
        } else if num == 0.0 {
            0.0
        } else {
            f64::INFINITY
        }
    };
    let mut eu = Vec::with_capacity(fom.len());
    let mut ep = Vec::with_capacity(fom.len());
    for (n, (f, r)) in fom.iter().zip(rom).enumerate() {
        if (f.t - r.t).abs() > 1e-9 * f.t.abs().max(1.0) {
            return Err(Error::GridMismatch(format!("step {n}: t = {} vs {}", f.t, r.t)));
        }
        if f.u.len() != r.u.len() || f.p.len() != r.p.len() {
            return Err(Error::GridMismatch(format!("step {n}: field sizes differ")));
        }
        eu.push(ratio(ops.mass_norm_sq(&sub(&f.u, &r.u)), ops.mass_norm_sq(&f.u)));
        ep.push(ratio(ops.pressure_norm_sq(&sub(&f.p, &r.p)), ops.pressure_norm_sq(&f.p)));
    }
    Ok((eu, ep))
}
