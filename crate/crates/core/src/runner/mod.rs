//! Experiment orchestration: config resolution, λ̃ sweeps, crossing fits and output files.
//!
//! [`run`] turns a task and an [`ExperimentConfig`] into CSV files plus a JSON
//! [`Manifest`]. Every file is a pure function of the config: sweep points run
//! concurrently but are collected in grid order, seeds are derived from the config seed
//! and the point index, and the manifest carries no timestamps.

pub mod config;
pub mod output;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

pub use config::{ExperimentConfig, FitConfig, MitigationKind, Mode, ModeSet, NoiseConfig, OneOrMany, SqueezedModes};
pub use output::{CvRow, DualityRow, DvRow, GepRow, ZneRow};

use crate::cv::ansatz::{default_squeezed_modes, AnsatzConfig, Backend};
use crate::cv::gradient::{GradientMethod, PhiRule, SqueezeRule};
use crate::cv::moments::derive_seed;
use crate::cv::optimize::{cv_point, Optimizer};
use crate::dv::{dv_energy, dv_minimize, DvConfig, DvOptimizer};
use crate::error::{Error, Result};
use crate::fit::{bootstrap_ci, fit_crossing, parametric_replicates, CrossingFit};
use crate::gep::{critical_point, duality_solutions, duality_threshold, LatticeSpec};
use crate::par::Execution;

/// Confidence level of the reported bootstrap intervals.
pub const CI_LEVEL: f64 = 0.68;

/// Final-evaluation shots for sampled runs that do not set `final_shots`.
pub const DEFAULT_FINAL_SHOTS: u64 = 100_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Task {
    GepScan,
    GepCritical,
    Duality,
    CvSweep,
    CvVqe,
    DvSweep,
    DvVqe,
    ZneRun,
    FitCrossing,
}

impl Task {
    pub const ALL: [Task; 9] = [
        Task::GepScan,
        Task::GepCritical,
        Task::Duality,
        Task::CvSweep,
        Task::CvVqe,
        Task::DvSweep,
        Task::DvVqe,
        Task::ZneRun,
        Task::FitCrossing,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Task::GepScan => "gep_scan",
            Task::GepCritical => "gep_critical",
            Task::Duality => "duality",
            Task::CvSweep => "cv_sweep",
            Task::CvVqe => "cv_vqe",
            Task::DvSweep => "dv_sweep",
            Task::DvVqe => "dv_vqe",
            Task::ZneRun => "zne_run",
            Task::FitCrossing => "fit_crossing",
        }
    }

    /// The mode a config must declare for this task; `None` accepts any.
    pub fn mode(self) -> Option<Mode> {
        match self {
            Task::GepScan | Task::GepCritical | Task::Duality => Some(Mode::Gep),
            Task::CvSweep | Task::CvVqe => Some(Mode::Cv),
            Task::DvSweep | Task::DvVqe | Task::ZneRun => Some(Mode::Dv),
            Task::FitCrossing => None,
        }
    }
}

impl fmt::Display for Task {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Provenance of one emitted row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PointRecord {
    pub sites: usize,
    pub m: f64,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub lambda_tilde: Option<f64>,
    pub seed: Option<u64>,
    pub shots: u64,
    pub backend: String,
    pub mitigation: String,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub leakage_flag: Option<bool>,
}

/// Everything needed to reproduce and interpret a run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub tool: String,
    pub version: String,
    pub task: Task,
    /// The config with every default filled in; rerunning it reproduces the outputs.
    pub config: ExperimentConfig,
    pub files: Vec<String>,
    pub points: Vec<PointRecord>,
    pub leakage_flagged: bool,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub crossing: Option<CrossingFit>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub crossing_error: Option<String>,
    /// Task-specific results and settings.
    pub details: BTreeMap<String, Value>,
}

impl Manifest {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("manifest serializes") + "\n"
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OutputFile {
    pub name: String,
    pub contents: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunOutput {
    pub files: Vec<OutputFile>,
    pub manifest: Manifest,
}

impl RunOutput {
    /// Writes every file and `manifest.json` into `dir`, creating it if needed.
    pub fn write(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir)?;
        for f in &self.files {
            std::fs::write(dir.join(&f.name), &f.contents)?;
        }
        std::fs::write(dir.join("manifest.json"), self.manifest.to_json())?;
        Ok(())
    }

    pub fn file(&self, name: &str) -> Option<&str> {
        self.files.iter().find(|f| f.name == name).map(|f| f.contents.as_str())
    }
}

/// Reads a config file, or the config embedded in a manifest. Returns the manifest's
/// task when there is one.
pub fn load_config(text: &str) -> Result<(Option<Task>, ExperimentConfig)> {
    #[derive(Deserialize)]
    struct Embedded {
        task: Task,
        config: Value,
    }
    if let Ok(m) = serde_json::from_str::<Embedded>(text) {
        let inner = serde_json::to_string_pretty(&m.config)?;
        return Ok((Some(m.task), ExperimentConfig::from_json(&inner)?));
    }
    Ok((None, ExperimentConfig::from_json(text)?))
}

pub fn run(task: Task, config: &ExperimentConfig) -> Result<RunOutput> {
    run_with(task, config, Execution::default())
}

pub fn run_with(task: Task, config: &ExperimentConfig, exec: Execution) -> Result<RunOutput> {
    config.validate()?;
    if let Some(mode) = task.mode() {
        if config.mode != mode {
            return Err(Error::Config(format!("mode: {task} needs mode {mode}, config has {}", config.mode)));
        }
    }
    match task {
        Task::GepScan => gep_scan(config, exec),
        Task::GepCritical => gep_critical(config, exec),
        Task::Duality => duality(config, exec),
        Task::CvSweep => cv_run(task, config, exec, false),
        Task::CvVqe => cv_run(task, config, exec, true),
        Task::DvSweep => dv_run(task, config, exec, false),
        Task::DvVqe => dv_run(task, config, exec, true),
        Task::ZneRun => zne_run(config),
        Task::FitCrossing => fit_run(config),
    }
}

fn manifest(task: Task, config: ExperimentConfig) -> Manifest {
    Manifest {
        tool: env!("CARGO_PKG_NAME").into(),
        version: env!("CARGO_PKG_VERSION").into(),
        task,
        config,
        files: Vec::new(),
        points: Vec::new(),
        leakage_flagged: false,
        crossing: None,
        crossing_error: None,
        details: BTreeMap::new(),
    }
}

fn finish(mut manifest: Manifest, files: Vec<OutputFile>) -> RunOutput {
    manifest.files = files.iter().map(|f| f.name.clone()).collect();
    manifest.leakage_flagged = manifest.points.iter().any(|p| p.leakage_flag == Some(true));
    RunOutput { files, manifest }
}

fn single_mass(config: &ExperimentConfig) -> Result<f64> {
    match config.m.as_ref().map(|m| m.to_vec()) {
        None => Ok(0.1),
        Some(v) if v.len() == 1 => Ok(v[0]),
        Some(_) => Err(Error::Config("m: this task takes a single mass".into())),
    }
}

fn single_size(config: &ExperimentConfig, default: usize) -> Result<usize> {
    match config.sites.as_ref().map(|s| s.to_vec()) {
        None => Ok(default),
        Some(v) if v.len() == 1 => Ok(v[0]),
        Some(_) => Err(Error::Config("L: this task takes a single lattice size".into())),
    }
}

/// Smallest even L with L·m ≥ 40.
pub fn continuum_size(mass: f64) -> usize {
    let l = (40.0 / mass).ceil() as usize;
    l + l % 2
}

fn gep_scan(config: &ExperimentConfig, exec: Execution) -> Result<RunOutput> {
    let m = single_mass(config)?;
    let sizes = config.sites.as_ref().map_or(vec![512], |s| s.to_vec());
    let points = exec.map(&sizes, |&l| critical_point(m, l)).into_iter().collect::<Result<Vec<_>>>()?;
    let rows: Vec<GepRow> = points.iter().map(GepRow::from).collect();
    let resolved = ExperimentConfig { sites: Some(OneOrMany::Many(sizes.clone())), m: Some(OneOrMany::One(m)), ..config.clone() };
    let mut man = manifest(Task::GepScan, resolved);
    man.points = sizes.iter().map(|&l| classical_point(l, m, None)).collect();
    let csv = output::to_csv(&rows)?;
    Ok(finish(man, vec![OutputFile { name: "gep_scan.csv".into(), contents: csv }]))
}

fn classical_point(sites: usize, m: f64, lambda_tilde: Option<f64>) -> PointRecord {
    PointRecord {
        sites,
        m,
        lambda_tilde,
        seed: None,
        shots: 0,
        backend: "classical".into(),
        mitigation: "none".into(),
        leakage_flag: None,
    }
}

fn gep_critical(config: &ExperimentConfig, exec: Execution) -> Result<RunOutput> {
    let masses = config.m.as_ref().map_or(vec![0.2, 0.1, 0.05], |m| m.to_vec());
    let sizes: Vec<usize> = match config.sites.as_ref().map(|s| s.to_vec()) {
        None => masses.iter().map(|&m| continuum_size(m)).collect(),
        Some(v) if v.len() == 1 => vec![v[0]; masses.len()],
        Some(v) if v.len() == masses.len() => v,
        Some(_) => return Err(Error::Config("L: give one size or one per mass".into())),
    };
    let pairs: Vec<(f64, usize)> = masses.iter().copied().zip(sizes.iter().copied()).collect();
    let points = exec.map(&pairs, |&(m, l)| critical_point(m, l)).into_iter().collect::<Result<Vec<_>>>()?;
    let rows: Vec<GepRow> = points.iter().map(GepRow::from).collect();
    let resolved = ExperimentConfig {
        sites: Some(OneOrMany::Many(sizes.clone())),
        m: Some(OneOrMany::Many(masses.clone())),
        ..config.clone()
    };
    let mut man = manifest(Task::GepCritical, resolved);
    man.points = pairs.iter().map(|&(m, l)| classical_point(l, m, None)).collect();
    man.details.insert("masses".into(), json!(masses));
    let csv = output::to_csv(&rows)?;
    Ok(finish(man, vec![OutputFile { name: "gep_critical.csv".into(), contents: csv }]))
}

fn duality(config: &ExperimentConfig, exec: Execution) -> Result<RunOutput> {
    let grid = config.lambda_tilde.clone().unwrap_or_else(|| (1..=10).map(|i| 10.0 * i as f64).collect());
    let roots = exec.map(&grid, |&l| duality_solutions(l));
    let rows: Vec<DualityRow> = grid
        .iter()
        .zip(&roots)
        .map(|(&l, r)| DualityRow { lambda_tilde: l, root1: r.first().copied(), root2: r.get(1).copied() })
        .collect();
    let mut man = manifest(Task::Duality, ExperimentConfig { lambda_tilde: Some(grid.clone()), ..config.clone() });
    let (lo, hi) = (grid[0], grid[grid.len() - 1]);
    match duality_threshold(lo, hi) {
        Ok(t) => man.details.insert("threshold".into(), json!(t)),
        Err(e) => man.details.insert("threshold_error".into(), json!(e.to_string())),
    };
    let csv = output::to_csv(&rows)?;
    Ok(finish(man, vec![OutputFile { name: "duality.csv".into(), contents: csv }]))
}

/// Default coupling grid for a lattice size: tabulated for the sizes studied in detail,
/// otherwise five integers centred on the classical critical coupling.
pub fn default_grid(mode: Mode, sites: usize, mass: f64) -> Result<Vec<f64>> {
    let start = match (mode, sites) {
        (_, 10) => 26.0,
        (Mode::Dv, 30) => 54.0,
        (_, 30) => 55.0,
        (_, 76) => 56.0,
        _ => critical_point(mass, sites)?.lambda_c_over_m2().round() - 2.0,
    };
    Ok((0..5).map(|i| start + i as f64).collect())
}

fn vqe_grid(config: &ExperimentConfig, single: bool, sites: usize, m: f64) -> Result<Vec<f64>> {
    let grid = match &config.lambda_tilde {
        Some(g) => g.clone(),
        None if single => vec![default_grid(config.mode, sites, m)?[2]],
        None => default_grid(config.mode, sites, m)?,
    };
    if single && grid.len() != 1 {
        return Err(Error::Config("lambda_tilde: a single VQE takes exactly one coupling".into()));
    }
    Ok(grid)
}

fn resolve_modes(config: &ExperimentConfig, sites: usize, fallback: BTreeSet<usize>) -> BTreeSet<usize> {
    match &config.squeezed_modes {
        Some(SqueezedModes::List(s)) => s.clone(),
        Some(SqueezedModes::Named(ModeSet::All)) => (0..=sites / 2).collect(),
        Some(SqueezedModes::Named(ModeSet::Default)) | None => fallback,
    }
}

/// Optimizer for the CV VQE: gradient descent on exact values, averaged stochastic
/// descent with the hybrid squeezing gradient on sampled ones.
pub fn cv_optimizer(sampled: bool) -> Optimizer {
    if sampled {
        Optimizer::Stochastic {
            lr: 0.5,
            iters: 60,
            average: 30,
            method: GradientMethod { squeeze: SqueezeRule::Hybrid { t: 0.88 }, phi: PhiRule::Polynomial },
        }
    } else {
        Optimizer::gradient_descent()
    }
}

/// Optimizer for the qubit VQE: simplex on exact noiseless values, value-checked gradient
/// descent on exact noisy ones, fixed-rate averaged descent on sampled ones.
pub fn dv_optimizer(config: &DvConfig) -> DvOptimizer {
    match (config.shots, config.noise.is_ideal()) {
        (None, true) => DvOptimizer::simplex(),
        (None, false) => DvOptimizer::gradient_descent(),
        (Some(_), _) => DvOptimizer::Stochastic { lr: 0.5, iters: 60, average: 30 },
    }
}

fn crossing_with_ci(points: &[(f64, f64, f64)], fit: FitConfig, replicates: impl FnOnce() -> Result<Vec<Vec<f64>>>) -> Result<CrossingFit> {
    let f = fit_crossing(points, fit.order)?;
    if fit.bootstrap_b == 0 {
        return Ok(f);
    }
    bootstrap_ci(&f, &replicates()?, CI_LEVEL)
}

fn record_crossing(man: &mut Manifest, result: Result<CrossingFit>) -> Option<OutputFile> {
    match result {
        Ok(c) => {
            let contents = serde_json::to_string_pretty(&c).expect("fit serializes") + "\n";
            man.crossing = Some(c);
            Some(OutputFile { name: "crossing.json".into(), contents })
        }
        Err(e) => {
            man.crossing_error = Some(e.to_string());
            None
        }
    }
}

fn cv_run(task: Task, config: &ExperimentConfig, exec: Execution, single: bool) -> Result<RunOutput> {
    let m = single_mass(config)?;
    let sites = single_size(config, 10)?;
    let grid = vqe_grid(config, single, sites, m)?;
    let sampled = config.shots.is_some();
    let cutoff = config.cutoff.unwrap_or(if sampled { 32 } else { 16 });
    let shift_s = config.shift_s.unwrap_or(if sampled { 1.0 } else { 0.1 });
    let modes = resolve_modes(config, sites, default_squeezed_modes(sites));
    let final_shots = config.shots.map(|_| config.final_shots.unwrap_or(DEFAULT_FINAL_SHOTS));
    let seed = config.seed.unwrap_or(0);
    let fit = config.fit.unwrap_or_default();
    let optimizer = cv_optimizer(sampled);
    let results = exec
        .map_range(grid.len(), |i| {
            let spec = LatticeSpec::with_lambda_tilde(sites, m, grid[i])?;
            let backend = match config.shots {
                Some(shots) => Backend::Sampled { shots, seed: derive_seed(seed, &[i as u64]) },
                None => Backend::Exact,
            };
            let template = AnsatzConfig {
                squeezed_modes: modes.clone(),
                shift_s,
                cutoff,
                backend,
                ..AnsatzConfig::new(m, 0.0, &spec)
            };
            let (mut rec, eval) = cv_point(&template, &spec, optimizer, final_shots.unwrap_or(0))?;
            rec.lambda_tilde = grid[i];
            let reps = eval.bootstrap(fit.bootstrap_b, derive_seed(seed, &[i as u64, u64::MAX - 2]));
            Ok((rec, reps))
        })
        .into_iter()
        .collect::<Result<Vec<_>>>()?;

    let resolved = ExperimentConfig {
        sites: Some(OneOrMany::One(sites)),
        m: Some(OneOrMany::One(m)),
        lambda_tilde: Some(grid.clone()),
        cutoff: Some(cutoff),
        final_shots,
        seed: config.seed,
        squeezed_modes: Some(SqueezedModes::List(modes)),
        shift_s: Some(shift_s),
        fit: Some(fit),
        ..config.clone()
    };
    let mut man = manifest(task, resolved);
    let backend = if sampled { "cv_sampled" } else { "cv_exact" };
    man.details.insert("optimizer".into(), serde_json::to_value(optimizer)?);
    man.points = results
        .iter()
        .map(|(r, _)| PointRecord {
            sites,
            m,
            lambda_tilde: Some(r.lambda_tilde),
            seed: sampled.then_some(r.seed),
            shots: r.shots,
            backend: backend.into(),
            mitigation: "none".into(),
            leakage_flag: Some(r.leakage_flag),
        })
        .collect();
    let rows: Vec<CvRow> = results.iter().map(|(r, _)| CvRow::from(r)).collect();
    let mut files = vec![OutputFile { name: format!("{task}.csv"), contents: output::to_csv(&rows)? }];
    if !single {
        let points: Vec<(f64, f64, f64)> = rows.iter().map(|r| (r.lambda_tilde, r.delta_h, r.stderr)).collect();
        let reps: Vec<Vec<f64>> = results.into_iter().map(|(_, r)| r).collect();
        files.extend(record_crossing(&mut man, crossing_with_ci(&points, fit, || Ok(reps))));
    }
    Ok(finish(man, files))
}

fn dv_template(config: &ExperimentConfig, sites: usize, m: f64, lambda_tilde: f64) -> Result<(LatticeSpec, DvConfig)> {
    let spec = LatticeSpec::with_lambda_tilde(sites, m, lambda_tilde)?;
    let noise = config.noise.unwrap_or_default();
    let mitigation = config
        .mitigation
        .unwrap_or(if noise.is_ideal() { MitigationKind::None } else { MitigationKind::ReadoutZne })
        .to_mitigation();
    let fallback = if sites <= 10 { default_squeezed_modes(sites) } else { (0..=sites / 2).collect() };
    let dv = DvConfig {
        squeezed_modes: resolve_modes(config, sites, fallback),
        noise: noise.model(),
        shots: config.shots,
        seed: config.seed.unwrap_or(0),
        mitigation,
        ..DvConfig::exact(m, 0.0, &spec)
    };
    dv.validate(&spec)?;
    Ok((spec, dv))
}

fn dv_resolved(config: &ExperimentConfig, sites: usize, m: f64, grid: &[f64], template: &DvConfig) -> ExperimentConfig {
    let noise = config.noise.unwrap_or_default();
    ExperimentConfig {
        sites: Some(OneOrMany::One(sites)),
        m: Some(OneOrMany::One(m)),
        lambda_tilde: Some(grid.to_vec()),
        final_shots: config.shots.map(|_| config.final_shots.unwrap_or(DEFAULT_FINAL_SHOTS)),
        squeezed_modes: Some(SqueezedModes::List(template.squeezed_modes.clone())),
        noise: Some(noise),
        mitigation: Some(config.mitigation.unwrap_or(if noise.is_ideal() {
            MitigationKind::None
        } else {
            MitigationKind::ReadoutZne
        })),
        ..config.clone()
    }
}

fn mitigation_name(kind: Option<MitigationKind>) -> String {
    serde_json::to_value(kind.unwrap_or(MitigationKind::None))
        .ok()
        .and_then(|v| v.as_str().map(String::from))
        .unwrap_or_default()
}

fn dv_run(task: Task, config: &ExperimentConfig, exec: Execution, single: bool) -> Result<RunOutput> {
    let m = single_mass(config)?;
    let sites = single_size(config, 10)?;
    let grid = vqe_grid(config, single, sites, m)?;
    let fit = config.fit.unwrap_or_default();
    let seed = config.seed.unwrap_or(0);
    let final_shots = config.shots.map(|_| config.final_shots.unwrap_or(DEFAULT_FINAL_SHOTS));
    let (_, probe) = dv_template(config, sites, m, grid[0])?;
    let optimizer = dv_optimizer(&probe);
    let results = exec
        .map_range(grid.len(), |i| {
            let (spec, mut template) = dv_template(config, sites, m, grid[i])?;
            template.seed = derive_seed(seed, &[i as u64]);
            let (mut rec, ev) = dv_minimize(&spec, &template, optimizer, final_shots)?;
            rec.lambda_tilde = grid[i];
            let reps = ev.bootstrap(fit.bootstrap_b, derive_seed(seed, &[i as u64, u64::MAX - 2]))?;
            // noiseless exact evaluation at the optimized parameters
            let classical = DvConfig {
                omega_prime: rec.omega_prime_opt,
                phi_c: rec.phi_c_opt,
                noise: crate::qubit::NoiseModel::ideal(),
                shots: None,
                mitigation: crate::dv::Mitigation::None,
                ..template
            };
            let hybrid = dv_energy(&classical, &spec)?.difference(0)?.0;
            Ok((rec, reps, hybrid))
        })
        .into_iter()
        .collect::<Result<Vec<_>>>()?;
    let resolved = dv_resolved(config, sites, m, &grid, &probe);
    let mitigation = mitigation_name(resolved.mitigation);
    let mut man = manifest(task, ExperimentConfig { fit: Some(fit), ..resolved });
    man.details.insert("optimizer".into(), serde_json::to_value(optimizer)?);
    let sampled = config.shots.is_some();
    if sampled || !probe.noise.is_ideal() {
        let hybrid: Vec<_> =
            results.iter().map(|(r, _, h)| json!({ "lambda_tilde": r.lambda_tilde, "delta_H": h })).collect();
        man.details.insert("hybrid".into(), json!(hybrid));
    }
    let backend = match (sampled, probe.noise.is_ideal()) {
        (false, true) => "dv_exact",
        (false, false) => "dv_noisy_probabilities",
        (true, true) => "dv_sampled",
        (true, false) => "dv_noisy_sampled",
    };
    man.points = results
        .iter()
        .map(|(r, _, _)| PointRecord {
            sites,
            m,
            lambda_tilde: Some(r.lambda_tilde),
            seed: sampled.then_some(r.seed),
            shots: r.shots,
            backend: backend.into(),
            mitigation: mitigation.clone(),
            leakage_flag: None,
        })
        .collect();
    let rows: Vec<DvRow> = results.iter().map(|(r, _, _)| DvRow::from(r)).collect();
    let mut files = vec![OutputFile { name: format!("{task}.csv"), contents: output::to_csv(&rows)? }];
    if !single {
        let points: Vec<(f64, f64, f64)> = rows.iter().map(|r| (r.lambda_tilde, r.delta_h_le, r.stderr)).collect();
        let reps: Vec<Vec<f64>> = results.into_iter().map(|(_, r, _)| r).collect();
        files.extend(record_crossing(&mut man, crossing_with_ci(&points, fit, || Ok(reps))));
    }
    Ok(finish(man, files))
}

/// Noiseless optimization followed by the noisy ZNE series at the optimal parameters.
fn zne_run(config: &ExperimentConfig) -> Result<RunOutput> {
    let m = single_mass(config)?;
    let sites = single_size(config, 10)?;
    let grid = vqe_grid(config, true, sites, m)?;
    let noisy_cfg = ExperimentConfig {
        noise: Some(config.noise.unwrap_or(NoiseConfig { ro_flip: 0.01, cnot_p: 0.02 })),
        mitigation: Some(config.mitigation.unwrap_or(MitigationKind::ReadoutZne)),
        ..config.clone()
    };
    if !matches!(noisy_cfg.mitigation, Some(MitigationKind::ReadoutZne | MitigationKind::ReadoutZne3)) {
        return Err(Error::Config("mitigation: zne run needs readout_zne or readout_zne3".into()));
    }
    let (spec, noisy) = dv_template(&noisy_cfg, sites, m, grid[0])?;
    let clean = DvConfig { noise: crate::qubit::NoiseModel::ideal(), shots: None, mitigation: crate::dv::Mitigation::None, ..noisy.clone() };
    let (opt, _) = dv_minimize(&spec, &clean, DvOptimizer::simplex(), None)?;
    let at = DvConfig {
        omega_prime: opt.omega_prime_opt,
        phi_c: opt.phi_c_opt,
        seed: derive_seed(noisy.seed, &[u64::MAX]),
        ..noisy
    };
    let est = dv_energy(&at, &spec)?.estimate()?;
    let rows: Vec<ZneRow> = est.zne.iter().map(ZneRow::from).collect();
    let resolved = dv_resolved(&noisy_cfg, sites, m, &grid, &at);
    let mitigation = mitigation_name(resolved.mitigation);
    let mut man = manifest(Task::ZneRun, resolved);
    man.points = vec![PointRecord {
        sites,
        m,
        lambda_tilde: Some(grid[0]),
        seed: config.shots.and(config.seed),
        shots: est.shots_used,
        backend: if config.shots.is_some() { "dv_noisy_sampled" } else { "dv_noisy_probabilities" }.into(),
        mitigation,
        leakage_flag: None,
    }];
    man.details.insert("noiseless".into(), json!(opt.delta_h_ne));
    if config.shots.is_some() {
        let sampled = DvConfig {
            omega_prime: at.omega_prime,
            phi_c: at.phi_c,
            shots: at.shots,
            seed: derive_seed(noisy.seed, &[u64::MAX - 4]),
            ..clean.clone()
        };
        let est = dv_energy(&sampled, &spec)?.estimate()?;
        man.details.insert("noiseless_sampled".into(), json!({ "value": est.ne, "stderr": est.ne_stderr }));
    }
    man.details.insert("omega_prime".into(), json!(opt.omega_prime_opt));
    man.details.insert("phi_c".into(), json!(opt.phi_c_opt));
    man.details.insert("unmitigated".into(), json!({ "value": est.ne, "stderr": est.ne_stderr }));
    man.details.insert("extrapolated".into(), json!({ "value": est.le, "stderr": est.le_stderr }));
    let csv = output::to_csv(&rows)?;
    Ok(finish(man, vec![OutputFile { name: "zne_run.csv".into(), contents: csv }]))
}

/// Crossing fit of a sweep CSV. Only (λ̃, Δ⟨H⟩, σ) survive in the file, so the interval
/// comes from a parametric bootstrap with Gaussian noise of width σ.
fn fit_run(config: &ExperimentConfig) -> Result<RunOutput> {
    let path = config.input.as_ref().ok_or_else(|| Error::Config("input: fit crossing needs a sweep CSV".into()))?;
    let text = std::fs::read_to_string(path).map_err(|e| Error::Config(format!("input: cannot read {path}: {e}")))?;
    let points = output::read_sweep(&text)?;
    let fit = config.fit.unwrap_or_default();
    let seed = config.seed.unwrap_or(0);
    let mut man = manifest(Task::FitCrossing, ExperimentConfig { fit: Some(fit), seed: Some(seed), ..config.clone() });
    man.details.insert("bootstrap".into(), json!("parametric"));
    let c = crossing_with_ci(&points, fit, || Ok(parametric_replicates(&points, fit.bootstrap_b, seed)))?;
    let files = record_crossing(&mut man, Ok(c)).into_iter().collect();
    Ok(finish(man, files))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gep_scan_reports_large_lattice_value() {
        let cfg = ExperimentConfig { sites: Some(OneOrMany::One(512)), ..ExperimentConfig::new(Mode::Gep) };
        let out = run(Task::GepScan, &cfg).unwrap();
        let csv = out.file("gep_scan.csv").unwrap();
        assert!(csv.starts_with("L,omega_c_sq_over_m2,lambda_c_over_m2\n"), "{csv}");
        let row = csv.lines().nth(1).unwrap();
        let lc: f64 = row.split(',').nth(2).unwrap().parse().unwrap();
        assert!((lc - 60.8).abs() < 0.3, "{lc}");
    }

    #[test]
    fn mode_mismatch_is_a_config_error() {
        let e = run(Task::CvSweep, &ExperimentConfig::new(Mode::Gep)).unwrap_err();
        assert!(e.is_config());
    }

    #[test]
    fn manifest_round_trips_and_reruns() {
        let cfg = ExperimentConfig { lambda_tilde: Some(vec![40.0, 60.0, 100.0]), ..ExperimentConfig::new(Mode::Gep) };
        let out = run(Task::Duality, &cfg).unwrap();
        let text = out.manifest.to_json();
        let back: Manifest = serde_json::from_str(&text).unwrap();
        assert_eq!(back, out.manifest);
        let (task, again) = load_config(&text).unwrap();
        assert_eq!(task, Some(Task::Duality));
        assert_eq!(run(Task::Duality, &again).unwrap(), out);
    }

    #[test]
    fn cv_exact_sweep_is_reproducible() {
        let cfg = ExperimentConfig { lambda_tilde: Some(vec![26.0, 28.0, 30.0]), ..ExperimentConfig::new(Mode::Cv) };
        let a = run(Task::CvSweep, &cfg).unwrap();
        let b = run_with(Task::CvSweep, &cfg, Execution::Sequential).unwrap();
        assert_eq!(a, b);
        let c = a.manifest.crossing.unwrap();
        assert!((c.intercept - 27.5).abs() < 0.3, "{}", c.intercept);
    }
}
