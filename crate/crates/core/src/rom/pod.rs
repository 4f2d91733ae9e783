use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::fem::{FlowOperators, TaylorHoodSpace};
use crate::sparse::{axpy, dot, eliminate, CsrMatrix, DenseMatrix, SparseLu};

pub const BASIS_MAGIC: &[u8; 9] = b"PODBASIS1";

/// Modes are rejected once `λ_r < RANK_TOL · λ_1`.
pub const RANK_TOL: f64 = 1e-14;

/// POD modes with the full (clamped, descending) eigenvalue spectrum.
#[derive(Clone, Debug, PartialEq)]
pub struct PodModes {
    pub modes: Vec<Vec<f64>>,
    pub eigenvalues: Vec<f64>,
}

/// Method of snapshots: eigenpairs of `G_ij = x_iᵀ W x_j`, modes
/// `X v_i / √λ_i`, followed by a W-Gram-Schmidt clean-up.
pub fn pod(snapshots: &[Vec<f64>], r: usize, w: &CsrMatrix) -> Result<PodModes> {
    let n = snapshots.len();
    if r == 0 || r > n {
        return Err(Error::InvalidInput(format!("need 1 ≤ r ≤ {n}, got r = {r}")));
    }
    let wx: Vec<Vec<f64>> = snapshots.iter().map(|x| w.matvec(x)).collect();
    let mut g = DenseMatrix::zeros(n, n);
    for i in 0..n {
        for j in 0..=i {
            let v = dot(&snapshots[i], &wx[j]);
            g[(i, j)] = v;
            g[(j, i)] = v;
        }
    }
    let (vals, vecs) = g.symmetric_eigen()?;
    let order: Vec<usize> = (0..n).rev().collect();
    let eigenvalues: Vec<f64> = order.iter().map(|&k| vals[k].max(0.0)).collect();
    let lambda1 = eigenvalues[0];
    if !(lambda1 > 0.0) || eigenvalues[r - 1] < RANK_TOL * lambda1 {
        return Err(Error::RankDeficient(format!(
            "requested {r} modes but λ_{r} = {:e} with λ_1 = {lambda1:e}",
            eigenvalues[r - 1]
        )));
    }
    let dim = snapshots[0].len();
    let mut modes = Vec::with_capacity(r);
    for &k in order.iter().take(r) {
        let scale = 1.0 / vals[k].sqrt();
        let mut phi = vec![0.0; dim];
        for (j, x) in snapshots.iter().enumerate() {
            axpy(vecs[(j, k)] * scale, x, &mut phi);
        }
        modes.push(phi);
    }
    orthonormalize(&mut modes, w, 1e-8)?;
    Ok(PodModes { modes, eigenvalues })
}

/// Modified Gram-Schmidt in the W inner product, applied twice.
pub fn orthonormalize(vectors: &mut [Vec<f64>], w: &CsrMatrix, drop_tol: f64) -> Result<()> {
    for pass in 0..2 {
        for i in 0..vectors.len() {
            let norm0 = w.bilinear(&vectors[i], &vectors[i]).sqrt();
            for j in 0..i {
                let (head, tail) = vectors.split_at_mut(i);
                let c = w.bilinear(&head[j], &tail[0]);
                axpy(-c, &head[j], &mut tail[0]);
            }
            let norm = w.bilinear(&vectors[i], &vectors[i]).sqrt();
            if pass == 0 && !(norm > drop_tol * norm0) {
                return Err(Error::RankDeficient(format!("vector {i} is numerically dependent on its predecessors")));
            }
            vectors[i].iter_mut().for_each(|v| *v /= norm);
        }
    }
    Ok(())
}

/// Riesz solver for `(S(p), τ)_U = (p, ∇·τ)` with the H¹ inner product
/// `K + M` on velocities vanishing on the Dirichlet boundary.
#[derive(Debug)]
pub struct SupremizerSolver {
    bt: CsrMatrix,
    dirichlet: Vec<usize>,
    lu: SparseLu,
}

impl SupremizerSolver {
    pub fn new(s: &TaylorHoodSpace, ops: &FlowOperators) -> Result<Self> {
        let h1 = CsrMatrix::lincomb(&[(1.0, &ops.k), (1.0, &ops.m)]);
        let dirichlet = s.dirichlet_vel_dofs().to_vec();
        let mut dummy = vec![0.0; h1.nrows()];
        let a = eliminate(&h1, &mut dummy, &dirichlet, &vec![0.0; dirichlet.len()]);
        Ok(Self { bt: ops.b.transpose(), dirichlet, lu: SparseLu::new(&a)? })
    }

    pub fn apply(&self, p: &[f64]) -> Result<Vec<f64>> {
        if p.len() != self.bt.ncols() {
            return Err(Error::InvalidInput(format!("pressure has {} entries, expected {}", p.len(), self.bt.ncols())));
        }
        let mut rhs = self.bt.matvec(p);
        for &k in &self.dirichlet {
            rhs[k] = 0.0;
        }
        self.lu.solve(&rhs)
    }
}

/// One-off supremizer; build a [`SupremizerSolver`] for repeated use.
pub fn supremizer(s: &TaylorHoodSpace, ops: &FlowOperators, p: &[f64]) -> Result<Vec<f64>> {
    SupremizerSolver::new(s, ops)?.apply(p)
}

/// Enriched velocity basis (POD velocity modes followed by supremizer modes,
/// M-orthonormal) and L²-orthonormal pressure modes.
#[derive(Clone, Debug, PartialEq)]
pub struct PODBasis {
    pub r_u: usize,
    pub r_s: usize,
    pub velocity: Vec<Vec<f64>>,
    pub pressure: Vec<Vec<f64>>,
    pub eig_u: Vec<f64>,
    pub eig_s: Vec<f64>,
    pub eig_p: Vec<f64>,
}

impl PODBasis {
    pub fn r_us(&self) -> usize {
        self.velocity.len()
    }

    pub fn r_p(&self) -> usize {
        self.pressure.len()
    }

    pub fn n_u(&self) -> usize {
        self.velocity.first().map_or(0, Vec::len)
    }

    pub fn n_p(&self) -> usize {
        self.pressure.first().map_or(0, Vec::len)
    }

    /// `ΦᵀMΦ`.
    pub fn velocity_gram(&self, m: &CsrMatrix) -> DenseMatrix {
        gram(&self.velocity, m)
    }

    pub fn pressure_gram(&self, mp: &CsrMatrix) -> DenseMatrix {
        gram(&self.pressure, mp)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut w = BufWriter::new(File::create(path)?);
        w.write_all(BASIS_MAGIC)?;
        for v in [self.r_u, self.r_s, self.r_p(), self.n_u(), self.n_p()] {
            w.write_all(&(v as u64).to_le_bytes())?;
        }
        for mode in self.velocity.iter().chain(&self.pressure) {
            for v in mode {
                w.write_all(&v.to_le_bytes())?;
            }
        }
        for eig in [&self.eig_u, &self.eig_s, &self.eig_p] {
            w.write_all(&(eig.len() as u64).to_le_bytes())?;
            for v in eig.iter() {
                w.write_all(&v.to_le_bytes())?;
            }
        }
        w.flush()?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let mut r = BufReader::new(File::open(path)?);
        let mut magic = [0u8; 9];
        r.read_exact(&mut magic)?;
        if &magic != BASIS_MAGIC {
            return Err(Error::InvalidInput("not a basis file (bad magic)".into()));
        }
        let read_u64 = |r: &mut BufReader<File>| -> Result<u64> {
            let mut b = [0u8; 8];
            r.read_exact(&mut b)?;
            Ok(u64::from_le_bytes(b))
        };
        let read_vec = |r: &mut BufReader<File>, n: usize| -> Result<Vec<f64>> {
            let mut buf = vec![0u8; 8 * n];
            r.read_exact(&mut buf)?;
            Ok(buf.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap())).collect())
        };
        let r_u = read_u64(&mut r)? as usize;
        let r_s = read_u64(&mut r)? as usize;
        let r_p = read_u64(&mut r)? as usize;
        let n_u = read_u64(&mut r)? as usize;
        let n_p = read_u64(&mut r)? as usize;
        let velocity = (0..r_u + r_s).map(|_| read_vec(&mut r, n_u)).collect::<Result<Vec<_>>>()?;
        let pressure = (0..r_p).map(|_| read_vec(&mut r, n_p)).collect::<Result<Vec<_>>>()?;
        let mut eigs = Vec::new();
        for _ in 0..3 {
            let n = read_u64(&mut r)? as usize;
            eigs.push(read_vec(&mut r, n)?);
        }
        let eig_p = eigs.pop().unwrap();
        let eig_s = eigs.pop().unwrap();
        let eig_u = eigs.pop().unwrap();
        Ok(Self { r_u, r_s, velocity, pressure, eig_u, eig_s, eig_p })
    }
}

pub(crate) fn gram(vectors: &[Vec<f64>], w: &CsrMatrix) -> DenseMatrix {
    let wv: Vec<Vec<f64>> = vectors.iter().map(|v| w.matvec(v)).collect();
    DenseMatrix::from_fn(vectors.len(), vectors.len(), |i, j| dot(&vectors[i], &wv[j]))
}

/// Concatenates velocity and supremizer modes and re-orthonormalizes them in M.
pub fn build_enriched_basis(u_modes: PodModes, s_modes: Option<PodModes>, p_modes: PodModes, m: &CsrMatrix) -> Result<PODBasis> {
    let r_u = u_modes.modes.len();
    let (r_s, s_vecs, eig_s) = match s_modes {
        Some(s) => (s.modes.len(), s.modes, s.eigenvalues),
        None => (0, Vec::new(), Vec::new()),
    };
    let mut velocity = u_modes.modes;
    if r_s > 0 {
        if s_vecs[0].len() != velocity.first().map_or(0, Vec::len) {
            return Err(Error::InvalidInput("velocity and supremizer modes live on different spaces".into()));
        }
        velocity.extend(s_vecs);
        orthonormalize(&mut velocity, m, 1e-8)?;
    }
    Ok(PODBasis {
        r_u,
        r_s,
        velocity,
        pressure: p_modes.modes,
        eig_u: u_modes.eigenvalues,
        eig_s,
        eig_p: p_modes.eigenvalues,
    })
}

/// Number of eigenvalues with `λ_i ≥ rel_tol · λ_1`.
pub fn numerical_rank(eigenvalues: &[f64], rel_tol: f64) -> usize {
    let Some(&l1) = eigenvalues.first() else { return 0 };
    if !(l1 > 0.0) {
        return 0;
    }
    eigenvalues.iter().take_while(|&&l| l >= rel_tol * l1).count()
}

/// `100 Σ_{i ≤ r} λ_i / Σ_i λ_i`.
pub fn retained_info(eigenvalues: &[f64], r: usize) -> f64 {
    let total: f64 = eigenvalues.iter().sum();
    if !(total > 0.0) {
        return 100.0;
    }
    let kept: f64 = eigenvalues.iter().take(r).sum();
    (100.0 * kept / total).clamp(0.0, 100.0)
}
