//! Binary trajectory store: the magic, `N_u`, `N_p`, `N_T` as little-endian
//! `u64`, `Δt` and `ν` as little-endian `f64`, then `N_T + 1` records of raw
//! `f64` coefficients, velocity first. Record `n` sits at `t = n Δt`.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use super::{FlowState, Trajectory};
use crate::error::{Error, Result};

pub const SNAPSHOT_MAGIC: &[u8; 9] = b"FLOWSNAP1";

pub fn write_snapshots(path: impl AsRef<Path>, traj: &Trajectory) -> Result<()> {
    let first = traj.states.first().ok_or_else(|| Error::InvalidInput("empty trajectory".into()))?;
    let (nu_dofs, np_dofs) = (first.u.len(), first.p.len());
    if traj.states.iter().any(|s| s.u.len() != nu_dofs || s.p.len() != np_dofs) {
        return Err(Error::InvalidInput("trajectory states have inconsistent sizes".into()));
    }
    let mut w = BufWriter::new(File::create(path)?);
    w.write_all(SNAPSHOT_MAGIC)?;
    for v in [nu_dofs, np_dofs, traj.states.len() - 1] {
        w.write_all(&(v as u64).to_le_bytes())?;
    }
    w.write_all(&traj.dt.to_le_bytes())?;
    w.write_all(&traj.nu.to_le_bytes())?;
    for s in &traj.states {
        for v in s.u.iter().chain(&s.p) {
            w.write_all(&v.to_le_bytes())?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Reads a store written by [`write_snapshots`]. Control and EFR metadata are
/// not persisted, so the returned trajectory reports no control and no records.
pub fn read_snapshots(path: impl AsRef<Path>) -> Result<Trajectory> {
    let mut r = BufReader::new(File::open(path)?);
    let mut magic = [0u8; 9];
    r.read_exact(&mut magic)?;
    if &magic != SNAPSHOT_MAGIC {
        return Err(Error::InvalidInput("not a snapshot file (bad magic)".into()));
    }
    let mut b8 = [0u8; 8];
    let mut next_u64 = |r: &mut BufReader<File>| -> Result<u64> {
        r.read_exact(&mut b8)?;
        Ok(u64::from_le_bytes(b8))
    };
    let nu_dofs = next_u64(&mut r)? as usize;
    let np_dofs = next_u64(&mut r)? as usize;
    let n_t = next_u64(&mut r)? as usize;
    let dt = f64::from_bits(next_u64(&mut r)?);
    let nu = f64::from_bits(next_u64(&mut r)?);
    let mut buf = vec![0u8; 8 * (nu_dofs + np_dofs)];
    let mut states = Vec::with_capacity(n_t + 1);
    for n in 0..=n_t {
        r.read_exact(&mut buf)?;
        let vals: Vec<f64> = buf.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap())).collect();
        let (u, p) = vals.split_at(nu_dofs);
        states.push(FlowState { u: u.to_vec(), p: p.to_vec(), t: n as f64 * dt });
    }
    let mut rest = [0u8; 1];
    if r.read(&mut rest)? != 0 {
        return Err(Error::InvalidInput("trailing bytes after snapshot records".into()));
    }
    Ok(Trajectory {
        states,
        records: Vec::new(),
        nu,
        dt,
        law: crate::control::ControlLaw::None,
        gamma: 0.0,
        efr: super::EfrMode::Off,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_is_bitwise() {
        let states = (0..4)
            .map(|n| FlowState {
                u: (0..6).map(|i| (i as f64 + 0.1) * (n as f64).exp()).collect(),
                p: vec![n as f64 / 3.0, -1e-300],
                t: n as f64 * 0.25,
            })
            .collect();
        let traj = Trajectory {
            states,
            records: Vec::new(),
            nu: 1e-4,
            dt: 0.25,
            law: crate::control::ControlLaw::None,
            gamma: 0.0,
            efr: super::super::EfrMode::Off,
        };
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("traj.bin");
        write_snapshots(&path, &traj).unwrap();
        let back = read_snapshots(&path).unwrap();
        assert_eq!(back.states, traj.states);
        assert_eq!(back.nu.to_bits(), traj.nu.to_bits());
        assert_eq!(std::fs::metadata(&path).unwrap().len(), 9 + 5 * 8 + 4 * 8 * 8);
    }

    #[test]
    fn truncated_file_is_an_error() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.bin");
        std::fs::write(&path, b"FLOWSNAP1\x01").unwrap();
        assert!(read_snapshots(&path).is_err());
        std::fs::write(&path, b"NOTASNAP1").unwrap();
        assert!(matches!(read_snapshots(&path), Err(Error::InvalidInput(_))));
    }
}
