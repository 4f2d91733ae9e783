use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use efrlab::control::{ControlLaw, DesiredState, EnvelopeParams};
use efrlab::diagnostics::{envelope_column, gnuplot_script, growth_factor, line_profile, norm_series, sigma, SeriesTable};
use efrlab::fem::{estimate_poincare, DirichletData, TimeProfile};
use efrlab::flow::{read_snapshots, simulate_until_failure, solve_stokes, write_snapshots, Discretization, EfrMode, FlowState, Trajectory};
use efrlab::mesh::{BoundaryTag, Mesh};
use efrlab::rom::{
    build_basis, collect_snapshots, project_operators, project_state, reconstruct, relative_errors, retained_info, rom_simulate,
    snapshot_ranks, Lifting, PODBasis, RomConfig, RomTrajectory, RomVariant,
};
use efrlab::{Error, Result};

use crate::config::{Resolved, RunConfig};
use crate::presets::{plan, Plan, Preset, Scale};

/// Relative eigenvalue cutoff used to clip requested ranks to the snapshot rank.
const RANK_CUTOFF: f64 = 1e-12;

/// FOM/ROM wall-clock ratio per step.
pub fn speedup_report(fom_per_step: f64, rom_per_step: f64) -> Result<f64> {
    if !(rom_per_step > 0.0) || !(fom_per_step >= 0.0) {
        return Err(Error::InvalidInput(format!("cannot form a speedup from {fom_per_step} s and {rom_per_step} s")));
    }
    Ok(fom_per_step / rom_per_step)
}

fn write(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(Error::from)
}

fn create_dir(p: &Path) -> Result<()> {
    fs::create_dir_all(p).map_err(Error::from)
}

pub fn mesh_gen(r: &Resolved, output: &Path) -> Result<()> {
    let m = r.mesh()?;
    if let Some(dir) = output.parent().filter(|d| !d.as_os_str().is_empty()) {
        create_dir(dir)?;
    }
    m.save(output)?;
    println!("wrote {} ({} nodes, {} triangles)", output.display(), m.n_nodes(), m.n_triangles());
    Ok(())
}

pub fn mesh_summary(m: &Mesh) -> String {
    let d = Discretization::new(m);
    let mut s = String::new();
    let _ = writeln!(s, "nodes       {}", m.n_nodes());
    let _ = writeln!(s, "triangles   {}", m.n_triangles());
    let _ = writeln!(s, "h_min       {:.4e}", m.h_min());
    let _ = writeln!(s, "h_max       {:.4e}", m.h_max());
    let _ = writeln!(s, "N_u         {}", d.n_u());
    let _ = writeln!(s, "N_p         {}", d.n_p());
    let _ = writeln!(s, "N_h         {}", d.n_u() + d.n_p());
    for tag in BoundaryTag::ALL {
        let _ = writeln!(s, "edges[{}] {}", tag.label(), m.count_tag(tag));
    }
    s
}

pub fn stokes(r: &Resolved, dir: &Path) -> Result<()> {
    create_dir(dir)?;
    let mesh = r.mesh()?;
    let d = Discretization::new(&mesh);
    let (u, p) = solve_stokes(&d, &DirichletData::channel(TimeProfile::Steady), r.nu)?;
    let mut s = String::new();
    let _ = writeln!(s, "nu        {:e}", r.nu);
    let _ = writeln!(s, "u_l2      {:.10e}", d.ops.mass_norm_sq(&u).sqrt());
    let _ = writeln!(s, "p_l2      {:.10e}", d.ops.pressure_norm_sq(&p).sqrt());
    let _ = writeln!(s, "div_l2    {:.3e}", d.divergence(&u));
    for i in 1..=4 {
        let (a, b) = sigma(i).expect("four segments");
        let prof = line_profile(&d.space, &u, a, b, 101)?;
        prof.to_table()?.emit_csv(dir.join(format!("sigma{i}.csv")))?;
    }
    write(&dir.join("summary.txt"), &s)?;
    print!("{s}");
    Ok(())
}

/// A finished (or failed) full-order run together with what it was run with.
pub struct FomRun {
    pub traj: Trajectory,
    pub error: Option<Error>,
    pub seconds: f64,
    pub desired: Option<DesiredState>,
    pub c0: Option<f64>,
    pub tau: Option<f64>,
}

impl FomRun {
    pub fn completed(&self) -> bool {
        self.error.is_none()
    }

    pub fn seconds_per_step(&self) -> f64 {
        self.seconds / (self.traj.len().saturating_sub(1)).max(1) as f64
    }

    fn tracking(&self) -> Option<Vec<f64>> {
        self.traj.records.iter().map(|r| r.tracking_error).collect()
    }

    fn envelope(&self) -> Option<EnvelopeParams> {
        let e = self.tracking()?;
        Some(EnvelopeParams { gamma: self.traj.gamma, c0: self.c0?, nu: self.traj.nu, dt: self.traj.dt, e0: *e.first()? })
    }
}

/// Runs one configuration and writes config echo, snapshots, series CSV,
/// gnuplot script and summary into `dir`. Divergence is recorded, not raised.
pub fn run_fom(cfg: &RunConfig, r: &Resolved, mesh: &Mesh, d: &Discretization, dir: &Path) -> Result<FomRun> {
    create_dir(dir)?;
    write(&dir.join("config.toml"), &cfg.to_toml())?;
    let sim = r.simulation(d, mesh)?;
    let c0 = if r.law == ControlLaw::None { None } else { Some(estimate_poincare(&d.space, &d.ops)?) };
    let start = Instant::now();
    let (traj, error) = simulate_until_failure(d, &sim);
    let seconds = start.elapsed().as_secs_f64();
    let error = match error {
        e @ (None | Some(Error::NewtonDiverged { .. })) => e,
        Some(e) => return Err(e),
    };
    let run = FomRun { traj, error, seconds, desired: sim.control.desired.clone(), c0, tau: r.tau };
    write_snapshots(dir.join("snapshots.bin"), &run.traj)?;
    let mut table = norm_series(d, &run.traj)?;
    if let Some(p) = run.envelope() {
        table.push_column("envelope", envelope_column(&p, run.traj.len()))?;
    }
    table.emit_csv(dir.join("series.csv"))?;
    let (cols, log): (Vec<&str>, bool) =
        if table.column("E_U").is_some() { (vec!["E_U"], true) } else { (vec!["u_l2", "p_l2"], false) };
    write(&dir.join("series.gp"), &gnuplot_script("series.csv", "t", &cols, log, "series.png"))?;
    write(&dir.join("summary.txt"), &fom_summary(r, &run, &table))?;
    Ok(run)
}

fn fom_summary(r: &Resolved, run: &FomRun, table: &SeriesTable) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "law          {}", r.law.label());
    let _ = writeln!(s, "gamma        {:e}", r.gamma);
    let _ = writeln!(s, "nu           {:e}", r.nu);
    let _ = writeln!(s, "dt           {:e}", r.dt);
    let _ = writeln!(s, "steps        {} of {}", run.traj.len().saturating_sub(1), r.n_steps);
    let _ = writeln!(s, "efr          {}", r.efr.label());
    match &run.error {
        None => {
            let _ = writeln!(s, "status       completed");
        }
        Some(e) => {
            let _ = writeln!(s, "status       failed: {e}");
        }
    }
    if let Some(c0) = run.c0 {
        let _ = writeln!(s, "C0           {c0:.6e}");
    }
    if let Some(e) = table.column("E_U") {
        let _ = writeln!(s, "E_U(0)       {:.6e}", e[0]);
        let _ = writeln!(s, "E_U(final)   {:.6e}", e[e.len() - 1]);
    }
    if let Some(p) = table.column("p_l2") {
        let _ = writeln!(s, "p growth     {:.4e}", growth_factor(p));
    }
    let active = run.traj.records.iter().filter(|x| x.efr_active).count();
    let _ = writeln!(s, "efr steps    {active}");
    let _ = writeln!(s, "wall [s]     {:.3}", run.seconds);
    s
}

pub fn simulate_cmd(cfg: &RunConfig, r: &Resolved, dir: &Path) -> Result<()> {
    let mesh = r.mesh()?;
    let d = Discretization::new(&mesh);
    let run = run_fom(cfg, r, &mesh, &d, dir)?;
    print!("{}", fs::read_to_string(dir.join("summary.txt"))?);
    match run.error {
        Some(e) => Err(e),
        None => Ok(()),
    }
}

fn lifting_for(d: &Discretization, r: &Resolved) -> Result<Lifting> {
    Lifting::stokes(d, r.inlet)
}

fn eigen_table(b: &PODBasis) -> Result<SeriesTable> {
    let n = b.eig_u.len().max(b.eig_s.len()).max(b.eig_p.len());
    let pad = |v: &[f64]| (0..n).map(|k| v.get(k).copied().unwrap_or(f64::NAN)).collect::<Vec<_>>();
    let info = |v: &[f64]| (0..n).map(|k| if k < v.len() { retained_info(v, k + 1) } else { f64::NAN }).collect::<Vec<_>>();
    let mut t = SeriesTable::new();
    t.push_column("k", (1..=n).map(|k| k as f64).collect())?;
    t.push_column("lambda_u", pad(&b.eig_u))?;
    t.push_column("lambda_s", pad(&b.eig_s))?;
    t.push_column("lambda_p", pad(&b.eig_p))?;
    t.push_column("info_u", info(&b.eig_u))?;
    t.push_column("info_p", info(&b.eig_p))?;
    Ok(t)
}

/// Offline stage from a trajectory: snapshots, ranks clipped to the data, basis.
pub fn offline(
    d: &Discretization,
    traj: &Trajectory,
    lifting: &Lifting,
    count: usize,
    ranks: (usize, usize, usize),
) -> Result<(PODBasis, (usize, usize, usize))> {
    let snaps = collect_snapshots(d, traj, count, lifting)?;
    let (nu_, ns, np) = snapshot_ranks(d, &snaps, RANK_CUTOFF)?;
    let r_u = ranks.0.min(nu_).max(1);
    let r_p = ranks.2.min(np).max(1);
    let r_s = ranks.1.min(ns).min(r_p);
    let basis = build_basis(d, &snaps, r_u, r_s, r_p)?;
    Ok((basis, (r_u, r_s, r_p)))
}

pub fn pod_cmd(r: &Resolved, snapshots: &Path, dir: &Path) -> Result<()> {
    create_dir(dir)?;
    let mesh = r.mesh()?;
    let d = Discretization::new(&mesh);
    let traj = read_snapshots(snapshots)?;
    let lifting = lifting_for(&d, r)?;
    let count = r.snapshots.unwrap_or(traj.len().saturating_sub(1));
    let (basis, used) = offline(&d, &traj, &lifting, count, (r.r_u, r.r_s, r.r_p))?;
    basis.save(dir.join("basis.bin"))?;
    eigen_table(&basis)?.emit_csv(dir.join("eigenvalues.csv"))?;
    println!(
        "basis: r_u = {}, r_s = {}, r_p = {} from {count} snapshots (requested {}, {}, {})",
        used.0, used.1, used.2, r.r_u, r.r_s, r.r_p
    );
    Ok(())
}

fn rom_config(r: &Resolved, mesh: &Mesh, variant: RomVariant) -> RomConfig {
    let mut c = RomConfig::new(r.nu, r.dt);
    c.law = r.law;
    c.gamma = r.gamma;
    c.newton = r.newton;
    if variant != RomVariant::NoEfr {
        c.efr = Some(r.efr_params(mesh));
    }
    c
}

pub struct RomRun {
    pub traj: RomTrajectory,
    pub states: Vec<FlowState>,
    pub seconds: f64,
}

/// Online stage: projects `initial`, integrates `n_steps`, reconstructs.
#[allow(clippy::too_many_arguments)]
pub fn run_rom(
    d: &Discretization,
    mesh: &Mesh,
    r: &Resolved,
    basis: &PODBasis,
    lifting: &Lifting,
    desired: Option<&DesiredState>,
    variant: RomVariant,
    initial: &FlowState,
) -> Result<RomRun> {
    let ro = project_operators(d, basis, lifting, desired, r.form);
    let cfg = rom_config(r, mesh, variant);
    let a0 = project_state(&d.ops, basis, lifting, initial)?;
    let start = Instant::now();
    let traj = rom_simulate(&ro, &cfg, variant, a0, r.n_steps)?;
    let seconds = start.elapsed().as_secs_f64();
    let states = traj.states.iter().map(|s| reconstruct(s, basis, lifting)).collect::<Result<Vec<_>>>()?;
    Ok(RomRun { traj, states, seconds })
}

fn rom_tables(d: &Discretization, run: &RomRun, desired: Option<&DesiredState>, fom: Option<&[FlowState]>) -> Result<(SeriesTable, SeriesTable)> {
    let times: Vec<f64> = run.traj.states.iter().map(|s| s.t).collect();
    let mut coeffs = SeriesTable::new();
    coeffs.push_column("t", times.clone())?;
    for j in 0..run.traj.states[0].a_u.len() {
        coeffs.push_column(format!("a{j}"), run.traj.states.iter().map(|s| s.a_u[j]).collect())?;
    }
    for q in 0..run.traj.states[0].a_p.len() {
        coeffs.push_column(format!("b{q}"), run.traj.states.iter().map(|s| s.a_p[q]).collect())?;
    }
    let mut series = SeriesTable::new();
    series.push_column("t", times)?;
    series.push_column("u_l2", run.states.iter().map(|s| d.ops.mass_norm_sq(&s.u).sqrt()).collect())?;
    series.push_column("p_l2", run.states.iter().map(|s| d.ops.pressure_norm_sq(&s.p).sqrt()).collect())?;
    if let Some(ds) = desired {
        series.push_column("E_U", run.states.iter().map(|s| d.ops.mass_norm_sq(&efrlab::sparse::sub(&s.u, &ds.at(s.t)))).collect())?;
    }
    series.push_column("efr_active", run.traj.efr_active.iter().map(|&b| f64::from(u8::from(b))).collect())?;
    if let Some(f) = fom {
        let (eu, ep) = relative_errors(&d.ops, f, &run.states)?;
        series.push_column("err_u", eu)?;
        series.push_column("err_p", ep)?;
    }
    Ok((coeffs, series))
}

pub fn rom_cmd(r: &Resolved, basis_path: &Path, fom_path: Option<&Path>, dir: &Path) -> Result<()> {
    create_dir(dir)?;
    let mesh = r.mesh()?;
    let d = Discretization::new(&mesh);
    let basis = PODBasis::load(basis_path)?;
    if basis.n_u() != d.n_u() || basis.n_p() != d.n_p() {
        return Err(Error::InvalidInput("basis does not match the configured mesh".into()));
    }
    let lifting = lifting_for(&d, r)?;
    let desired = if r.law == ControlLaw::None { None } else { Some(DesiredState::stokes(&d, r.desired)?) };
    let fom = fom_path.map(read_snapshots).transpose()?;
    let initial = fom.as_ref().map_or_else(|| FlowState::zero(&d, 0.0), |f| f.states[0].clone());
    let run = run_rom(&d, &mesh, r, &basis, &lifting, desired.as_ref(), r.variant, &initial)?;
    let fom_states = fom.as_ref().map(|f| f.states.as_slice());
    let (coeffs, series) = rom_tables(&d, &run, desired.as_ref(), fom_states)?;
    coeffs.emit_csv(dir.join("coefficients.csv"))?;
    series.emit_csv(dir.join("series.csv"))?;
    let cols: Vec<&str> = if series.column("err_u").is_some() { vec!["err_u", "err_p"] } else { vec!["u_l2", "p_l2"] };
    write(&dir.join("series.gp"), &gnuplot_script("series.csv", "t", &cols, true, "series.png"))?;
    let mut s = String::new();
    let _ = writeln!(s, "variant      {}", r.variant.label());
    let _ = writeln!(s, "modes        r_us = {}, r_p = {}", basis.r_us(), basis.r_p());
    let _ = writeln!(s, "steps        {}", r.n_steps);
    let _ = writeln!(s, "wall [s]     {:.4}", run.seconds);
    // the initial full-order state need not lie in the reduced space
    if let (Some(eu), Some(ep)) = (series.column("err_u"), series.column("err_p")) {
        let _ = writeln!(s, "max err_u    {:.4e}", eu[1..].iter().cloned().fold(0.0, f64::max));
        let _ = writeln!(s, "max err_p    {:.4e}", ep[1..].iter().cloned().fold(0.0, f64::max));
    }
    write(&dir.join("summary.txt"), &s)?;
    print!("{s}");
    Ok(())
}

pub fn report_cmd(csv: &Path, x: &str, y: &[String], log: bool, output: Option<&Path>) -> Result<()> {
    let table = SeriesTable::read_csv(csv)?;
    let names = table.names();
    if !names.contains(&x) {
        return Err(Error::InvalidInput(format!("column {x} not in {}", csv.display())));
    }
    let ys: Vec<&str> = if y.is_empty() { names.iter().copied().filter(|n| *n != x).collect() } else { y.iter().map(String::as_str).collect() };
    if let Some(bad) = ys.iter().find(|c| !names.contains(c)) {
        return Err(Error::InvalidInput(format!("column {bad} not in {}", csv.display())));
    }
    let file = csv.file_name().and_then(|f| f.to_str()).unwrap_or("series.csv");
    let stem = csv.file_stem().and_then(|f| f.to_str()).unwrap_or("series");
    let script = gnuplot_script(file, x, &ys, log, &format!("{stem}.png"));
    let out = output.map_or_else(|| csv.with_extension("gp"), Path::to_path_buf);
    write(&out, &script)?;
    println!("wrote {}", out.display());
    Ok(())
}

/// One PASS/FAIL line of an experiment summary.
#[derive(Clone, Debug, PartialEq)]
pub struct Check {
    pub name: String,
    pub pass: bool,
    pub detail: String,
}

fn check(name: impl Into<String>, pass: bool, detail: impl Into<String>) -> Check {
    Check { name: name.into(), pass, detail: detail.into() }
}

fn nonincreasing(e: &[f64]) -> bool {
    e.windows(2).all(|w| w[1] <= w[0] * (1.0 + 1e-12))
}

fn contraction_holds(run: &FomRun) -> Option<bool> {
    let p = run.envelope()?;
    let e = run.tracking()?;
    let rho = p.rho();
    Some(e.windows(2).all(|w| w[1] <= w[0] * rho + 1e-10 * w[0]))
}

/// EFR ran exactly while the tracking error at the start of the step was ≥ τ.
fn adaptive_consistent(run: &FomRun) -> Option<bool> {
    let tau = run.tau?;
    let recs = &run.traj.records;
    Some(recs.windows(2).all(|w| w[1].efr_active == (w[0].tracking_error.unwrap_or(0.0) >= tau)))
}

fn transitions(active: &[bool]) -> usize {
    active.windows(2).filter(|w| w[0] != w[1]).count()
}

pub fn print_plan(p: &Plan) {
    println!("# {} at {} scale", p.preset.label(), p.scale.label());
    for run in &p.runs {
        println!("\n# run: {}\n{}", run.name, run.config.to_toml().trim_end());
    }
    if let Some(rom) = &p.rom {
        println!("\n# reduction\nsource = \"{}\"\nsnapshots = {}", rom.source, rom.snapshots);
        let ranks: Vec<String> = rom.ranks.iter().map(|(u, s, p)| format!("[{u}, {s}, {p}]")).collect();
        println!("ranks = [{}]", ranks.join(", "));
        let variants: Vec<String> = rom.variants.iter().map(|v| format!("\"{}\"", v.label())).collect();
        println!("variants = [{}]", variants.join(", "));
    }
}

pub fn experiment(preset: Preset, scale: Scale, root: &Path, dry_run: bool) -> Result<Vec<Check>> {
    let p = plan(preset, scale);
    if dry_run {
        print_plan(&p);
        return Ok(Vec::new());
    }
    let dir = root.join(format!("{}_{}", preset.label(), scale.label()));
    create_dir(&dir)?;
    let resolved: Vec<Resolved> = p.runs.iter().map(|r| r.config.resolve()).collect::<Result<_>>()?;
    let mesh = resolved[0].mesh()?;
    let d = Discretization::new(&mesh);
    let mut runs = Vec::new();
    for (run, r) in p.runs.iter().zip(&resolved) {
        eprintln!("running {}", run.name);
        runs.push((run.name.clone(), run_fom(&run.config, r, &mesh, &d, &dir.join(&run.name))?));
    }
    let mut checks = Vec::new();
    let mut notes = String::new();
    for (name, run) in &runs {
        let status = match &run.error {
            None => "completed".to_string(),
            Some(e) => format!("{e}"),
        };
        let _ = writeln!(notes, "{name}: {status}");
    }
    match preset {
        Preset::Exp1 => exp1_checks(&runs, &mut checks),
        Preset::Exp2 | Preset::Exp3 => {
            for (name, run) in &runs {
                checks.push(check(format!("{name} completes the horizon"), run.completed(), ""));
                if run.traj.efr == EfrMode::Adaptive {
                    let active: Vec<bool> = run.traj.records.iter().map(|r| r.efr_active).collect();
                    checks.push(check(
                        format!("{name} filters exactly while E_U >= tau"),
                        adaptive_consistent(run).unwrap_or(false),
                        "",
                    ));
                    checks.push(check(format!("{name} switches off at most once"), transitions(&active[1..]) <= 1, ""));
                }
                if let Some(e) = run.tracking() {
                    let _ = writeln!(notes, "{name}: final E_U {:.4e}", e[e.len() - 1]);
                }
            }
        }
        Preset::A1 => {
            for (name, run) in &runs {
                let p_l2: Vec<f64> = run.traj.states.iter().map(|s| d.ops.pressure_norm_sq(&s.p).sqrt()).collect();
                let _ = writeln!(notes, "{name}: pressure growth factor {:.4e}", growth_factor(&p_l2));
                if run.traj.efr == EfrMode::Off {
                    let g = growth_factor(&p_l2);
                    checks.push(check(
                        format!("{name} breaks down (divergence or pressure growth > 10)"),
                        !run.completed() || g > 10.0,
                        format!("growth {g:.3e}"),
                    ));
                } else {
                    checks.push(check(format!("{name} completes the horizon"), run.completed(), ""));
                }
            }
        }
        Preset::A2 => {
            for (name, run) in &runs {
                checks.push(check(format!("{name} completes the horizon"), run.completed(), ""));
            }
        }
    }
    if let Some(stage) = &p.rom {
        let (_, src) = runs.iter().find(|(n, _)| *n == stage.source).expect("reduction source is a planned run");
        if let Some(e) = &src.error {
            return Err(clone_error(e));
        }
        let r = &resolved[p.runs.iter().position(|x| x.name == stage.source).unwrap()];
        let lifting = lifting_for(&d, r)?;
        let count = stage.snapshots.min(src.traj.len() - 1);
        for &ranks in &stage.ranks {
            let (basis, used) = offline(&d, &src.traj, &lifting, count, ranks)?;
            let tag = format!("r{}_{}_{}", used.0, used.1, used.2);
            let rdir = dir.join(format!("rom_{tag}"));
            create_dir(&rdir)?;
            basis.save(rdir.join("basis.bin"))?;
            eigen_table(&basis)?.emit_csv(rdir.join("eigenvalues.csv"))?;
            let _ = writeln!(
                notes,
                "basis {tag} (requested {}, {}, {}): velocity info {:.2}%, pressure info {:.2}%",
                ranks.0,
                ranks.1,
                ranks.2,
                retained_info(&basis.eig_u, used.0),
                retained_info(&basis.eig_p, used.2)
            );
            for &variant in &stage.variants {
                let label = format!("{}-{}", fom_label(src.traj.efr), variant.label());
                let run = run_rom(&d, &mesh, r, &basis, &lifting, src.desired.as_ref(), variant, &src.traj.states[0]);
                let run = match run {
                    Ok(x) => x,
                    Err(e @ Error::NewtonDiverged { .. }) => {
                        checks.push(check(format!("{label} {tag} completes the horizon"), false, e.to_string()));
                        continue;
                    }
                    Err(e) => return Err(e),
                };
                let (coeffs, series) = rom_tables(&d, &run, src.desired.as_ref(), Some(&src.traj.states))?;
                coeffs.emit_csv(rdir.join(format!("{}_coefficients.csv", variant.label())))?;
                series.emit_csv(rdir.join(format!("{}_series.csv", variant.label())))?;
                let name = format!("{}_series.csv", variant.label());
                write(
                    &rdir.join(format!("{}_errors.gp", variant.label())),
                    &gnuplot_script(&name, "t", &["err_u", "err_p"], true, &format!("{}_errors.png", variant.label())),
                )?;
                let eu = &series.column("err_u").unwrap()[1..];
                let mean = eu.iter().sum::<f64>() / eu.len() as f64;
                checks.push(check(format!("{label} {tag} errors are finite"), eu.iter().all(|v| v.is_finite()), ""));
                if variant == RomVariant::Aefr {
                    checks.push(check(format!("{label} {tag} switches off at most once"), transitions(&run.traj.efr_active[1..]) <= 1, ""));
                }
                let speed = speedup_report(src.seconds_per_step(), run.seconds / r.n_steps as f64)?;
                let _ = writeln!(notes, "{label} {tag}: mean err_u {mean:.4e}, speedup {speed:.1}");
            }
        }
    }
    let mut s = format!("# {} at {} scale\n\n", preset.label(), scale.label());
    for c in &checks {
        let _ = writeln!(s, "{} {}{}", if c.pass { "PASS" } else { "FAIL" }, c.name, if c.detail.is_empty() { String::new() } else { format!(" ({})", c.detail) });
    }
    let _ = write!(s, "\n{notes}");
    write(&dir.join("summary.txt"), &s)?;
    print!("{s}");
    Ok(checks)
}

fn exp1_checks(runs: &[(String, FomRun)], checks: &mut Vec<Check>) {
    for (name, run) in runs {
        checks.push(check(format!("{name} completes the horizon"), run.completed(), ""));
        if run.traj.law == ControlLaw::FB {
            if let Some(e) = run.tracking() {
                checks.push(check(format!("{name} E_U nonincreasing"), nonincreasing(&e), ""));
            }
            checks.push(check(format!("{name} one-step contraction"), contraction_holds(run).unwrap_or(false), ""));
        }
    }
    for (name, fb) in runs.iter().filter(|(_, r)| r.traj.law == ControlLaw::FB) {
        let Some((_, fa)) = runs.iter().find(|(_, r)| r.traj.law == ControlLaw::FA && r.traj.gamma == fb.traj.gamma) else {
            continue;
        };
        if let (Some(eb), Some(ea)) = (fb.tracking(), fa.tracking()) {
            let (b, a) = (eb[eb.len() - 1], ea[ea.len() - 1]);
            checks.push(check(format!("{name} final E_U <= 1e-2 x f_A"), b <= 1e-2 * a, format!("{b:.3e} vs {a:.3e}")));
        }
    }
}

fn fom_label(m: EfrMode) -> &'static str {
    match m {
        EfrMode::Off => "noefr",
        EfrMode::On => "efr",
        EfrMode::Adaptive => "aefr",
    }
}

fn clone_error(e: &Error) -> Error {
    match e {
        Error::NewtonDiverged { step, time, residual } => Error::NewtonDiverged { step: *step, time: *time, residual: *residual },
        other => Error::InvalidInput(other.to_string()),
    }
}

/// Output directory: explicit flag or environment (handled by clap), else `efrlab-out`.
pub fn output_root(flag: Option<PathBuf>) -> PathBuf {
    flag.unwrap_or_else(|| PathBuf::from("efrlab-out"))
}
