//! Time series, line profiles and CSV output.

use std::path::Path;

use crate::control::{bound_envelope, EnvelopeParams};
use crate::error::{Error, Result};
use crate::fem::TaylorHoodSpace;
use crate::flow::{Discretization, Trajectory};

/// Named columns of equal length.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct SeriesTable {
    columns: Vec<(String, Vec<f64>)>,
}

impl SeriesTable {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push_column(&mut self, name: impl Into<String>, values: Vec<f64>) -> Result<()> {
        let name = name.into();
        if let Some((_, first)) = self.columns.first() {
            if first.len() != values.len() {
                return Err(Error::InvalidInput(format!(
                    "column {name} has {} rows, table has {}",
                    values.len(),
                    first.len()
                )));
            }
        }
        if self.column(&name).is_some() {
            return Err(Error::InvalidInput(format!("duplicate column {name}")));
        }
        if name == "t" && values.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::InvalidInput("time column must be strictly increasing".into()));
        }
        self.columns.push((name, values));
        Ok(())
    }

    pub fn column(&self, name: &str) -> Option<&[f64]> {
        self.columns.iter().find(|(n, _)| n == name).map(|(_, v)| v.as_slice())
    }

    pub fn names(&self) -> Vec<&str> {
        self.columns.iter().map(|(n, _)| n.as_str()).collect()
    }

    pub fn n_rows(&self) -> usize {
        self.columns.first().map_or(0, |(_, v)| v.len())
    }

    pub fn write_csv<W: std::io::Write>(&self, w: W) -> Result<()> {
        let mut wr = csv::Writer::from_writer(w);
        wr.write_record(self.names())?;
        for i in 0..self.n_rows() {
            wr.write_record(self.columns.iter().map(|(_, v)| format!("{:.16e}", v[i])))?;
        }
        wr.flush()?;
        Ok(())
    }

    pub fn emit_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        self.write_csv(std::fs::File::create(path)?)
    }

    pub fn from_reader<R: std::io::Read>(r: R) -> Result<Self> {
        let mut rd = csv::Reader::from_reader(r);
        let names: Vec<String> = rd.headers()?.iter().map(str::to_owned).collect();
        let mut cols = vec![Vec::new(); names.len()];
        for (line, rec) in rd.records().enumerate() {
            let rec = rec?;
            for (c, field) in rec.iter().enumerate() {
                let v = field
                    .trim()
                    .parse::<f64>()
                    .map_err(|e| Error::Parse { line: line + 2, msg: format!("column {}: {e}", names[c]) })?;
                cols[c].push(v);
            }
        }
        let mut t = Self::new();
        for (n, v) in names.into_iter().zip(cols) {
            t.push_column(n, v)?;
        }
        Ok(t)
    }

    pub fn read_csv(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_reader(std::fs::File::open(path)?)
    }
}

/// `t`, `u_l2`, `p_l2`, and when recorded `E_U`, `efr_active`, `newton_iters`.
pub fn norm_series(d: &Discretization, traj: &Trajectory) -> Result<SeriesTable> {
    let mut t = SeriesTable::new();
    t.push_column("t", traj.times())?;
    t.push_column("u_l2", traj.states.iter().map(|s| d.ops.mass_norm_sq(&s.u).sqrt()).collect())?;
    t.push_column("p_l2", traj.states.iter().map(|s| d.ops.pressure_norm_sq(&s.p).sqrt()).collect())?;
    if traj.records.len() == traj.states.len() {
        if traj.records.iter().all(|r| r.tracking_error.is_some()) {
            t.push_column("E_U", traj.records.iter().map(|r| r.tracking_error.unwrap()).collect())?;
        }
        t.push_column("efr_active", traj.records.iter().map(|r| f64::from(u8::from(r.efr_active))).collect())?;
        t.push_column("newton_iters", traj.records.iter().map(|r| r.newton_iters as f64).collect())?;
    }
    Ok(t)
}

/// `bound_envelope` aligned with states: entry `n ≥ 1` bounds `E_U(tⁿ)`, entry 0 is `E_U(0)`.
pub fn envelope_column(params: &EnvelopeParams, n_states: usize) -> Vec<f64> {
    (0..n_states).map(|n| if n == 0 { params.e0 } else { bound_envelope(params, n - 1) }).collect()
}

/// Largest ratio `v_n / min_{m ≤ n} v_m` over positive entries.
pub fn growth_factor(values: &[f64]) -> f64 {
    let mut lo = f64::INFINITY;
    let mut best: f64 = 1.0;
    for &v in values {
        if v > 0.0 {
            lo = lo.min(v);
            best = best.max(v / lo);
        }
    }
    best
}

/// Walk-through-triangulation point location with a brute-force fallback.
#[derive(Clone, Debug)]
pub struct PointLocator<'a> {
    space: &'a TaylorHoodSpace,
    /// Neighbor across the edge opposite local vertex `i`.
    neighbors: Vec<[Option<usize>; 3]>,
    /// Triangles incident to each vertex.
    star: Vec<Vec<usize>>,
}

const BARY_TOL: f64 = 1e-12;

impl<'a> PointLocator<'a> {
    pub fn new(space: &'a TaylorHoodSpace) -> Self {
        let tris = space.mesh().triangles();
        let mut edge_owner = std::collections::HashMap::new();
        let mut neighbors = vec![[None; 3]; tris.len()];
        let mut star = vec![Vec::new(); space.mesh().n_nodes()];
        for (k, t) in tris.iter().enumerate() {
            for i in 0..3 {
                star[t[i]].push(k);
                let (a, b) = (t[(i + 1) % 3], t[(i + 2) % 3]);
                let key = (a.min(b), a.max(b));
                if let Some(&(other, oi)) = edge_owner.get(&key) {
                    neighbors[k][i] = Some(other);
                    let n: &mut [Option<usize>; 3] = &mut neighbors[other];
                    n[oi] = Some(k);
                } else {
                    edge_owner.insert(key, (k, i));
                }
            }
        }
        Self { space, neighbors, star }
    }

    fn barycentric(&self, k: usize, x: [f64; 2]) -> [f64; 3] {
        let r = self.space.element_map(k).to_reference(x);
        [1.0 - r[0] - r[1], r[0], r[1]]
    }

    /// Containing triangle (lowest index among ties) and reference coordinates.
    pub fn locate(&self, x: [f64; 2], hint: usize) -> Option<(usize, [f64; 2])> {
        let n = self.neighbors.len();
        let mut k = hint.min(n.saturating_sub(1));
        let mut found = None;
        for _ in 0..n {
            let l = self.barycentric(k, x);
            let (i, &m) = l.iter().enumerate().min_by(|a, b| a.1.total_cmp(b.1)).unwrap();
            if m >= -BARY_TOL {
                found = Some(k);
                break;
            }
            match self.neighbors[k][i] {
                Some(next) => k = next,
                None => break,
            }
        }
        let k = match found {
            Some(k) => k,
            None => (0..n).find(|&k| self.barycentric(k, x).iter().all(|&v| v >= -BARY_TOL))?,
        };
        let tri = self.space.mesh().triangles()[k];
        let best = tri
            .iter()
            .flat_map(|&v| self.star[v].iter().copied())
            .filter(|&c| self.barycentric(c, x).iter().all(|&v| v >= -BARY_TOL))
            .min()
            .unwrap_or(k);
        Some((best, self.space.element_map(best).to_reference(x)))
    }
}

/// Velocity magnitude sampled along a segment. `None` marks samples outside
/// the mesh (the cylinder hole).
#[derive(Clone, Debug, PartialEq)]
pub struct LineProfile {
    pub p0: [f64; 2],
    pub p1: [f64; 2],
    pub params: Vec<f64>,
    pub samples: Vec<Option<f64>>,
}

impl LineProfile {
    pub fn to_table(&self) -> Result<SeriesTable> {
        let mut t = SeriesTable::new();
        t.push_column("s", self.params.clone())?;
        t.push_column("x", self.params.iter().map(|s| self.p0[0] + s * (self.p1[0] - self.p0[0])).collect())?;
        t.push_column("y", self.params.iter().map(|s| self.p0[1] + s * (self.p1[1] - self.p0[1])).collect())?;
        t.push_column("speed", self.samples.iter().map(|v| v.unwrap_or(f64::NAN)).collect())?;
        Ok(t)
    }
}

pub fn line_profile(s: &TaylorHoodSpace, u: &[f64], p0: [f64; 2], p1: [f64; 2], n_samples: usize) -> Result<LineProfile> {
    s.check_velocity(u)?;
    if n_samples < 2 {
        return Err(Error::InvalidInput("a line profile needs at least two samples".into()));
    }
    let loc = PointLocator::new(s);
    for p in [p0, p1] {
        if loc.locate(p, 0).is_none() {
            return Err(Error::OutOfDomain { x: p[0], y: p[1] });
        }
    }
    let mut hint = 0;
    let mut params = Vec::with_capacity(n_samples);
    let mut samples = Vec::with_capacity(n_samples);
    for i in 0..n_samples {
        let t = i as f64 / (n_samples - 1) as f64;
        let x = [p0[0] + t * (p1[0] - p0[0]), p0[1] + t * (p1[1] - p0[1])];
        params.push(t);
        samples.push(loc.locate(x, hint).map(|(k, r)| {
            hint = k;
            let v = s.eval_velocity_ref(u, k, r);
            v[0].hypot(v[1])
        }));
    }
    Ok(LineProfile { p0, p1, params, samples })
}

/// The four sampling segments σ₁…σ₄ of the channel.
pub fn sigma(i: usize) -> Option<([f64; 2], [f64; 2])> {
    match i {
        1 => Some(([2.0, 0.0], [2.0, 0.41])),
        2 => Some(([0.5, 0.0], [0.5, 0.41])),
        3 => Some(([0.25, 0.15], [0.25, 0.25])),
        4 => Some(([0.4, 0.205], [2.2, 0.205])),
        _ => None,
    }
}

/// Gnuplot script plotting `y_cols` against `x_col` of a CSV file.
pub fn gnuplot_script(csv_file: &str, x_col: &str, y_cols: &[&str], log_y: bool, output_png: &str) -> String {
    let mut s = String::new();
    s.push_str("set datafile separator ','\nset key autotitle columnhead\n");
    s.push_str(&format!("set terminal pngcairo size 900,600\nset output '{output_png}'\n"));
    s.push_str(&format!("set xlabel '{x_col}'\n"));
    if log_y {
        s.push_str("set logscale y\nset format y '%.0e'\n");
    }
    let plots: Vec<String> = y_cols
        .iter()
        .map(|c| format!("'{csv_file}' using (column('{x_col}')):(column('{c}')) with lines title '{c}'"))
        .collect();
    s.push_str(&format!("plot {}\n", plots.join(", \\\n     ")));
    s
}
