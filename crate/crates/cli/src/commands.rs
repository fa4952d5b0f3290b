//! Subcommand implementations.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{bail, Context, Result};
use clap::Args;
use serde::Serialize;

use gkdv_core::constructor::{stage_difference_ratio, FamilyCache, ShootingResult};
use gkdv_core::diagnostics::{self, mass_monotonicity, projection_series};
use gkdv_core::io::{self, Manifest};
use gkdv_core::linearized::evans::evans_eigenvalue;
use gkdv_core::linearized::BasisChecks;
use gkdv_core::{evolve as run_evolve, make_grid, prepare, solve_spectrum, Prepared, RunConfig, Trajectory};

use crate::settings::{self, ConfigArgs};

#[derive(Args, Debug)]
pub struct SpectrumArgs {
    #[arg(long, default_value_t = 6)]
    pub p: u32,
    #[arg(long, default_value_t = 1.0)]
    pub c: f64,
    #[arg(long, default_value_t = 2048)]
    pub n: usize,
    /// Box length, centered at zero.
    #[arg(long = "box", default_value_t = 100.0)]
    pub box_length: f64,
    /// Also run the independent shooting oracle for e_0.
    #[arg(long)]
    pub oracle: bool,
    /// Directory for the JSON and the basis snapshots.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Serialize)]
struct SpectrumReport {
    p: u32,
    c: f64,
    e_c: f64,
    e0: f64,
    eta0: f64,
    eigen_residual: f64,
    checks: BTreeMap<String, bool>,
    values: BasisChecks,
    oracle_e0: Option<f64>,
}

pub fn spectrum(a: SpectrumArgs) -> Result<()> {
    let start = Instant::now();
    let grid = make_grid(a.n, a.box_length, -0.5 * a.box_length)?;
    let b = solve_spectrum(a.p, a.c, &grid)?;
    let checks = b.checks();
    let oracle_e0 = if a.oracle {
        Some(evans_eigenvalue(a.p, 1.0)?)
    } else {
        None
    };
    let report = SpectrumReport {
        p: a.p,
        c: a.c,
        e_c: b.e_c,
        e0: b.e0(),
        eta0: b.eta0,
        eigen_residual: b.eigen_residual,
        checks: checks.flags().into_iter().map(|(k, v)| (k.to_string(), v)).collect(),
        values: checks,
        oracle_e0,
    };
    print!("{}", io::to_sorted_json(&report)?);
    if let Some(out) = a.out {
        let dir = settings::output_dir(&out)?;
        let mut manifest = Manifest::new("spectrum", String::new(), 0);
        io::write_json(&dir.join("spectrum.json"), &report)?;
        manifest.outputs.push("spectrum.json".into());
        for (name, f) in [
            ("y_plus", &b.y_plus),
            ("y_minus", &b.y_minus),
            ("z_plus", &b.z_plus),
            ("z_minus", &b.z_minus),
        ] {
            let file = format!("{name}.bin");
            io::write_snapshot(&dir.join(&file), f)?;
            manifest.outputs.push(file);
        }
        manifest.write(&dir, start.elapsed().as_secs_f64())?;
    }
    Ok(())
}

fn start_run(cfg: &RunConfig, command: &str) -> Result<(PathBuf, Manifest)> {
    let dir = settings::output_dir(&cfg.output_dir)?;
    std::fs::write(dir.join("config.toml"), cfg.to_toml()).map_err(gkdv_core::Error::Io)?;
    let mut m = Manifest::new(command, cfg.hash(), cfg.seed);
    m.outputs.push("config.toml".into());
    Ok((dir, m))
}

/// `t, mass, energy, h1_residual` and then `alpha_plus_k, alpha_minus_k` for
/// each member, all measured on `u - R(t)`.
fn series_table(prep: &Prepared, traj: &Trajectory) -> Result<(Vec<String>, Vec<Vec<f64>>)> {
    let frame = &prep.frame;
    let proj = projection_series(frame, traj, |_, t, u| Ok(u - &frame.multisoliton(t)?))?;
    let mut header: Vec<String> = ["t", "mass", "energy", "h1_residual"].iter().map(|s| s.to_string()).collect();
    for k in 1..=frame.len() {
        header.push(format!("alpha_plus_{k}"));
        header.push(format!("alpha_minus_{k}"));
    }
    let rows = (0..traj.len())
        .map(|i| {
            let mut r = vec![traj.times[i], traj.mass_series[i], traj.energy_series[i], proj.z_norms[i]];
            for k in 0..frame.len() {
                r.push(proj.alpha_plus[k][i]);
                r.push(proj.alpha_minus[k][i]);
            }
            r
        })
        .collect();
    Ok((header, rows))
}

fn write_series(dir: &Path, prep: &Prepared, traj: &Trajectory, m: &mut Manifest) -> Result<()> {
    let (header, rows) = series_table(prep, traj)?;
    let h: Vec<&str> = header.iter().map(String::as_str).collect();
    io::write_table_csv(&dir.join("series.csv"), &h, &rows)?;
    m.outputs.push("series.csv".into());
    io::write_plot_script(dir)?;
    m.outputs.push(io::PLOT_SCRIPT_NAME.into());
    Ok(())
}

#[derive(Args, Debug)]
pub struct EvolveArgs {
    #[command(flatten)]
    pub config: ConfigArgs,
}

pub fn evolve(a: EvolveArgs) -> Result<()> {
    let start = Instant::now();
    let cfg = settings::load(&a.config, &[])?;
    let prep = prepare(&cfg)?;
    let (dir, mut manifest) = start_run(&cfg, "evolve")?;
    let ecfg = cfg.evolve_config();
    let u0 = prep.frame.multisoliton(ecfg.t_start)?;
    let traj = run_evolve(&u0, prep.family.p(), &ecfg)?;
    io::write_trajectory(&dir.join("trajectory"), &traj)?;
    manifest.outputs.push("trajectory".into());
    let (h, rows) = series_table(&prep, &traj)?;
    // The evolve schema names the residual column after what it measures.
    let mut header: Vec<String> = h;
    header[3] = "h1_dist_to_R".into();
    let head: Vec<&str> = header.iter().map(String::as_str).collect();
    io::write_table_csv(&dir.join("series.csv"), &head, &rows)?;
    manifest.outputs.push("series.csv".into());
    io::write_plot_script(&dir)?;
    manifest.outputs.push(io::PLOT_SCRIPT_NAME.into());
    let (dm, de) = traj.conservation_drift();
    io::write_json(
        &dir.join("evolve.json"),
        &serde_json::json!({
            "kappa": traj.kappa,
            "mass_drift": dm,
            "energy_drift": de,
            "records": traj.len(),
        }),
    )?;
    manifest.outputs.push("evolve.json".into());
    manifest.write(&dir, start.elapsed().as_secs_f64())?;
    Ok(())
}

#[derive(Args, Debug)]
pub struct ConstructArgs {
    #[command(flatten)]
    pub config: ConfigArgs,
    /// Comma-separated parameters, one per soliton; repeat for a sweep.
    #[arg(long = "A", value_name = "A1,A2,...", required = true)]
    pub a: Vec<String>,
    #[arg(long = "S")]
    pub s: Option<f64>,
    #[arg(long)]
    pub t0: Option<f64>,
}

fn parse_vector(s: &str) -> Result<Vec<f64>> {
    s.split(',')
        .map(|x| x.trim().parse::<f64>().with_context(|| format!("bad number `{x}` in `{s}`")))
        .collect()
}

#[derive(Serialize)]
struct StageSummary {
    j: usize,
    prefix: Vec<f64>,
    a_j: f64,
    iterations: usize,
    exit: gkdv_core::ShootExit,
    b_star: Vec<f64>,
    a_star: Vec<f64>,
    alpha_t0: Vec<f64>,
    tube_ok: bool,
    tube_k: f64,
    tube_rate: f64,
    stage_difference_ratio: Option<f64>,
    budget_ratio_paper: f64,
    budget_ratio_eff: f64,
}

fn summary(prep: &Prepared, stages: &[ShootingResult], a: &[f64], j: usize) -> Result<StageSummary> {
    let r = &stages[j];
    let ratio = if j > 0 {
        Some(stage_difference_ratio(&prep.frame, &stages[j - 1].trajectory, r)?)
    } else {
        None
    };
    Ok(StageSummary {
        j,
        prefix: a[..j].to_vec(),
        a_j: r.a_j,
        iterations: r.iterations,
        exit: r.exit,
        b_star: r.b_star.clone(),
        a_star: r.a_star.clone(),
        alpha_t0: r.alpha_t0.clone(),
        tube_ok: r.tube_ok,
        tube_k: r.tube.k,
        tube_rate: r.tube.rate,
        stage_difference_ratio: ratio,
        budget_ratio_paper: r.budget_ratio_paper,
        budget_ratio_eff: r.budget_ratio_eff,
    })
}

fn construct_one(cfg: &RunConfig, prep: &Prepared, a: &[f64], dir: &Path, m: &mut Manifest) -> Result<()> {
    let stages = gkdv_core::build_family(&prep.frame, a, &prep.shoot)?;
    let mut summaries = Vec::new();
    for j in 0..stages.len() {
        let name = format!("stage_{j}");
        let sdir = dir.join(&name);
        io::write_trajectory(&sdir, &stages[j].trajectory)?;
        let s = summary(prep, &stages, a, j)?;
        io::write_json(&sdir.join("stage.json"), &s)?;
        m.outputs.push(name);
        summaries.push(s);
    }
    let cap = prep.shoot.horizon_cap(prep.e_max());
    io::write_json(
        &dir.join("shooting.json"),
        &serde_json::json!({
            "A": a,
            "stages": summaries,
            "horizon_cap": cap,
            "horizon": prep.shoot.s - prep.shoot.t0,
            "constants": prep.constants,
            "propagated_tolerance": prep.propagated_tolerance(),
            "seed": cfg.seed,
        }),
    )?;
    m.outputs.push("shooting.json".into());

    let mut header = vec!["t".to_string()];
    for j in 0..stages.len() {
        header.push(format!("residual_{j}"));
        header.push(format!("tube_{j}"));
    }
    let rows: Vec<Vec<f64>> = (0..stages[0].residual_series.len())
        .map(|i| {
            let mut r = vec![stages[0].residual_series[i].0];
            for s in &stages {
                let (t, v) = s.residual_series[i];
                r.push(v);
                r.push(s.tube.at(t));
            }
            r
        })
        .collect();
    let h: Vec<&str> = header.iter().map(String::as_str).collect();
    io::write_table_csv(&dir.join("residuals.csv"), &h, &rows)?;
    m.outputs.push("residuals.csv".into());
    write_series(dir, prep, &stages.last().unwrap().trajectory, m)
}

pub fn construct(a: ConstructArgs, jobs: usize) -> Result<()> {
    let start = Instant::now();
    let mut extra = Vec::new();
    if let Some(s) = a.s {
        extra.push(("horizons.S", toml::Value::Float(s)));
    }
    if let Some(t) = a.t0 {
        extra.push(("horizons.t0", toml::Value::Float(t)));
    }
    let cfg = settings::load(&a.config, &extra)?;
    let params: Vec<Vec<f64>> = a.a.iter().map(|s| parse_vector(s)).collect::<Result<_>>()?;
    let n = cfg.family.speeds.len();
    if let Some(bad) = params.iter().find(|p| p.len() != n) {
        bail!(gkdv_core::Error::config("A", format!("{} values for {n} solitons: {bad:?}", bad.len())));
    }
    let prep = prepare(&cfg)?;
    let (dir, mut manifest) = start_run(&cfg, "construct")?;
    let run_dir = |i: usize| -> PathBuf {
        if params.len() == 1 {
            dir.clone()
        } else {
            dir.join(format!("run_{i:03}"))
        }
    };

    let workers = jobs.min(params.len()).max(1);
    let mut outputs: Vec<Result<Vec<String>>> = Vec::new();
    std::thread::scope(|scope| {
        let mut handles = Vec::new();
        for w in 0..workers {
            let (cfg, prep, params, run_dir) = (&cfg, &prep, &params, &run_dir);
            handles.push(scope.spawn(move || {
                let mut results = Vec::new();
                for i in (w..params.len()).step_by(workers) {
                    let d = run_dir(i);
                    let mut m = Manifest::new("construct", String::new(), 0);
                    let r = settings::output_dir(&d)
                        .and_then(|_| construct_one(cfg, prep, &params[i], &d, &mut m))
                        .map(|_| m.outputs);
                    results.push((i, r));
                }
                results
            }));
        }
        let mut all: Vec<(usize, Result<Vec<String>>)> =
            handles.into_iter().flat_map(|h| h.join().expect("worker panicked")).collect();
        all.sort_by_key(|x| x.0);
        outputs = all.into_iter().map(|x| x.1).collect();
    });
    for (i, r) in outputs.into_iter().enumerate() {
        let files = r?;
        let prefix = if params.len() == 1 { String::new() } else { format!("run_{i:03}/") };
        manifest.outputs.extend(files.into_iter().map(|f| format!("{prefix}{f}")));
    }
    manifest.write(&dir, start.elapsed().as_secs_f64())?;
    Ok(())
}

/// A family cache seeded with every `stage_*` directory found under `roots`;
/// missing members are built by shooting.
fn stored_family<'a>(prep: &'a Prepared, roots: &[PathBuf]) -> Result<FamilyCache<'a>> {
    let mut cache = FamilyCache::new(&prep.frame, prep.shoot.clone());
    for root in roots {
        let Ok(entries) = std::fs::read_dir(root) else { continue };
        let mut paths: Vec<PathBuf> = entries.filter_map(|e| e.ok().map(|e| e.path())).collect();
        paths.sort();
        for p in paths {
            let Ok(text) = std::fs::read_to_string(p.join("stage.json")) else { continue };
            let v: serde_json::Value =
                serde_json::from_str(&text).with_context(|| format!("parsing {}", p.display()))?;
            if let Some(prefix) = v["prefix"].as_array() {
                let prefix: Vec<f64> = prefix.iter().filter_map(|x| x.as_f64()).collect();
                cache.seed(&prefix, io::read_trajectory(&p)?);
            }
        }
    }
    Ok(cache)
}

#[derive(Args, Debug)]
pub struct ClassifyArgs {
    #[command(flatten)]
    pub config: ConfigArgs,
    /// Trajectory directory (containing `trajectory.json`).
    #[arg(long)]
    pub traj: PathBuf,
    /// Directories searched for stored family members; defaults to the
    /// parent of `--traj`.
    #[arg(long)]
    pub stages: Vec<PathBuf>,
}

pub fn classify(a: ClassifyArgs) -> Result<()> {
    let start = Instant::now();
    let cfg = settings::load(&a.config, &[])?;
    let prep = prepare(&cfg)?;
    let traj = io::read_trajectory(&a.traj)?;
    let roots = if a.stages.is_empty() {
        vec![a.traj.parent().map_or_else(|| PathBuf::from("."), Path::to_path_buf)]
    } else {
        a.stages.clone()
    };
    let mut builder = stored_family(&prep, &roots)?;
    let (dir, mut manifest) = start_run(&cfg, "classify")?;
    let c = diagnostics::classify(&traj, &prep.frame, &mut builder, &prep.classify)?;
    let theta = diagnostics::uniqueness_residual(&traj, &c.a, &mut builder, &prep.frame)?;
    let rows: Vec<Vec<f64>> = theta.iter().map(|&(t, v)| vec![t, v]).collect();
    io::write_table_csv(&dir.join("theta.csv"), &["t", "theta"], &rows)?;
    manifest.outputs.push("theta.csv".into());
    let slopes: Vec<f64> = c.plateaus.iter().map(|p| p.slope).collect();
    let windows: Vec<(f64, f64)> = c.plateaus.iter().map(|p| p.window).collect();
    io::write_json(
        &dir.join("classification.json"),
        &serde_json::json!({
            "A": c.a,
            "plateaus": { "slopes": slopes, "windows": windows, "details": c.plateaus },
            "convergence": c.convergence,
            "ladders": c.ladders,
            "tol_class": prep.classify.tol_class,
            "theta_series": "theta.csv",
            "theta_max": theta.first().map(|x| x.1),
            "propagated_tolerance": prep.propagated_tolerance(),
        }),
    )?;
    manifest.outputs.push("classification.json".into());
    manifest.write(&dir, start.elapsed().as_secs_f64())?;
    Ok(())
}

#[derive(Args, Debug)]
pub struct MonotonicityArgs {
    #[command(flatten)]
    pub config: ConfigArgs,
    #[arg(long)]
    pub traj: PathBuf,
}

pub fn monotonicity(a: MonotonicityArgs) -> Result<()> {
    let start = Instant::now();
    let cfg = settings::load(&a.config, &[])?;
    let prep = prepare(&cfg)?;
    let traj = io::read_trajectory(&a.traj)?;
    let (dir, mut manifest) = start_run(&cfg, "monotonicity")?;
    let sigma0 = prep.constants.sigma0;
    let reports = mass_monotonicity(&prep.frame, &traj, sigma0)?;
    let mut weight_ok = true;
    for &t in traj.times.iter().step_by((traj.len() / 8).max(1)) {
        let w = diagnostics::weights(&prep.family, sigma0, t, &cfg.grid);
        for i in 0..cfg.grid.num_points {
            let sum: f64 = w.phi.iter().map(|f| f.values()[i]).sum();
            let hx = w.h_x.values()[i];
            weight_ok &= (sum - 1.0).abs() < 1e-14 && hx <= 0.0 && w.h_t.values()[i] >= sigma0 * hx.abs();
        }
    }
    io::write_json(
        &dir.join("monotonicity.json"),
        &serde_json::json!({ "mass": reports, "weights_ok": weight_ok, "sigma0": sigma0 }),
    )?;
    manifest.outputs.push("monotonicity.json".into());
    manifest.write(&dir, start.elapsed().as_secs_f64())?;
    Ok(())
}

#[derive(Args, Debug)]
pub struct ReportArgs {
    /// Root directory to scan for run manifests.
    #[arg(long)]
    pub dir: PathBuf,
}

fn collect_manifests(dir: &Path, out: &mut Vec<(PathBuf, serde_json::Value)>) -> Result<()> {
    let manifest = dir.join("manifest.json");
    if manifest.exists() {
        let text = std::fs::read_to_string(&manifest).map_err(gkdv_core::Error::Io)?;
        let v: serde_json::Value =
            serde_json::from_str(&text).with_context(|| format!("parsing {}", manifest.display()))?;
        out.push((dir.to_path_buf(), v));
    }
    let mut subdirs: Vec<PathBuf> = std::fs::read_dir(dir)
        .map_err(gkdv_core::Error::Io)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.is_dir())
        .collect();
    subdirs.sort();
    for d in subdirs {
        collect_manifests(&d, out)?;
    }
    Ok(())
}

pub fn report(a: ReportArgs) -> Result<()> {
    let mut found = Vec::new();
    collect_manifests(&a.dir, &mut found)?;
    let runs: Vec<serde_json::Value> = found
        .into_iter()
        .map(|(d, m)| {
            let rel = d.strip_prefix(&a.dir).unwrap_or(&d).display().to_string();
            serde_json::json!({ "dir": rel, "command": m["command"], "config_hash": m["config_hash"], "outputs": m["outputs"] })
        })
        .collect();
    let report = serde_json::json!({ "runs": runs });
    io::write_json(&a.dir.join("report.json"), &report)?;
    print!("{}", io::to_sorted_json(&report)?);
    Ok(())
}
