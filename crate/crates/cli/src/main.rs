//! `phi4` command-line runner.
//!
//! Exit codes: 0 on success, 2 for configuration errors, 3 for numerical failures.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use phi4_core::runner::{
    self, ExperimentConfig, FitConfig, MitigationKind, Mode, ModeSet, NoiseConfig, OneOrMany, SqueezedModes, Task,
};
use phi4_core::Error;

#[derive(Parser)]
#[command(name = "phi4", version, about = "Critical point of lattice phi^4 theory: GEP, qumode and qubit VQE")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Classical Gaussian effective potential
    Gep {
        #[command(subcommand)]
        action: GepAction,
    },
    /// Roots of the continuum duality relation over a coupling grid
    Duality(Flags),
    /// Qumode VQE
    Cv {
        #[command(subcommand)]
        action: SweepAction,
    },
    /// Qubit VQE
    Dv {
        #[command(subcommand)]
        action: SweepAction,
    },
    /// Zero-noise extrapolation series
    Zne {
        #[command(subcommand)]
        action: ZneAction,
    },
    /// Crossing fits of existing sweep files
    Fit {
        #[command(subcommand)]
        action: FitAction,
    },
}

#[derive(Subcommand)]
enum GepAction {
    /// Critical point at one mass over several lattice sizes
    Scan(Flags),
    /// Critical point over several masses at L ≥ 40/m
    Critical(Flags),
}

#[derive(Subcommand)]
enum SweepAction {
    /// Optimize at every coupling of the grid and fit the crossing
    Sweep(Flags),
    /// Optimize at a single coupling
    Vqe(Flags),
}

#[derive(Subcommand)]
enum ZneAction {
    /// Noisy ZNE series at the noiseless optimum
    Run(Flags),
}

#[derive(Subcommand)]
enum FitAction {
    /// Fit the zero crossing of a sweep CSV
    Crossing(Flags),
}

/// Flags mirroring the config keys. `--config` supersedes all of them.
#[derive(Args, Debug)]
struct Flags {
    /// JSON config file (or a manifest from an earlier run)
    #[arg(long)]
    config: Option<PathBuf>,
    /// Lattice size(s)
    #[arg(long = "L", value_delimiter = ',')]
    sites: Vec<usize>,
    /// Mass(es)
    #[arg(long, value_delimiter = ',')]
    m: Vec<f64>,
    /// Coupling grid λ/m²
    #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
    lambda_tilde: Vec<f64>,
    /// Fock cutoff per mode
    #[arg(long)]
    cutoff: Option<usize>,
    /// Shots per circuit; omit for exact expectation values
    #[arg(long)]
    shots: Option<u64>,
    /// Shots per circuit for the final evaluation
    #[arg(long)]
    final_shots: Option<u64>,
    #[arg(long)]
    seed: Option<u64>,
    /// "all", "default" or a comma-separated list of modes
    #[arg(long)]
    squeezed_modes: Option<String>,
    /// Ancilla shift s of the moment estimators
    #[arg(long)]
    shift_s: Option<f64>,
    /// Readout bit-flip probability
    #[arg(long)]
    ro_flip: Option<f64>,
    /// Depolarizing probability per CNOT
    #[arg(long)]
    cnot_p: Option<f64>,
    /// none, readout, readout_zne or readout_zne3
    #[arg(long)]
    mitigation: Option<String>,
    /// Crossing fit order (1 or 2)
    #[arg(long)]
    fit_order: Option<usize>,
    /// Bootstrap resamples
    #[arg(long = "bootstrap-B")]
    bootstrap_b: Option<usize>,
    /// Sweep CSV for `fit crossing`
    #[arg(long)]
    input: Option<String>,
    /// Output directory
    #[arg(long)]
    output: Option<String>,
}

fn one_or_many<T: Copy>(v: &[T]) -> Option<OneOrMany<T>> {
    match v {
        [] => None,
        [x] => Some(OneOrMany::One(*x)),
        _ => Some(OneOrMany::Many(v.to_vec())),
    }
}

fn config_error(msg: impl Into<String>) -> Error {
    Error::Config(msg.into())
}

impl Flags {
    fn to_config(&self, mode: Mode) -> Result<ExperimentConfig, Error> {
        let list = |v: &Vec<f64>| (!v.is_empty()).then(|| v.clone());
        let squeezed_modes = match self.squeezed_modes.as_deref() {
            None => None,
            Some("all") => Some(SqueezedModes::Named(ModeSet::All)),
            Some("default") => Some(SqueezedModes::Named(ModeSet::Default)),
            Some(s) => Some(SqueezedModes::List(
                s.split(',')
                    .map(|k| k.trim().parse().map_err(|_| config_error(format!("--squeezed-modes: bad mode {k:?}"))))
                    .collect::<Result<_, _>>()?,
            )),
        };
        let mitigation = self
            .mitigation
            .as_deref()
            .map(|s| {
                serde_json::from_value::<MitigationKind>(serde_json::Value::String(s.into()))
                    .map_err(|_| config_error(format!("--mitigation: unknown value {s:?}")))
            })
            .transpose()?;
        let noise = (self.ro_flip.is_some() || self.cnot_p.is_some())
            .then(|| NoiseConfig { ro_flip: self.ro_flip.unwrap_or(0.0), cnot_p: self.cnot_p.unwrap_or(0.0) });
        let fit = (self.fit_order.is_some() || self.bootstrap_b.is_some()).then(|| {
            let d = FitConfig::default();
            FitConfig { order: self.fit_order.unwrap_or(d.order), bootstrap_b: self.bootstrap_b.unwrap_or(d.bootstrap_b) }
        });
        Ok(ExperimentConfig {
            sites: one_or_many(&self.sites),
            m: one_or_many(&self.m),
            lambda_tilde: list(&self.lambda_tilde),
            cutoff: self.cutoff,
            shots: self.shots,
            final_shots: self.final_shots,
            seed: self.seed,
            squeezed_modes,
            shift_s: self.shift_s,
            noise,
            mitigation,
            fit,
            input: self.input.clone(),
            output: self.output.clone(),
            ..ExperimentConfig::new(mode)
        })
    }

    fn resolve(&self, task: Task, default_mode: Mode) -> Result<ExperimentConfig, Error> {
        let Some(path) = &self.config else {
            let cfg = self.to_config(default_mode)?;
            cfg.validate()?;
            return Ok(cfg);
        };
        let text = std::fs::read_to_string(path)
            .map_err(|e| config_error(format!("cannot read {}: {e}", path.display())))?;
        let (from_manifest, cfg) =
            runner::load_config(&text).map_err(|e| match e {
                Error::Config(m) => config_error(format!("{}: {m}", path.display())),
                other => other,
            })?;
        if let Some(t) = from_manifest.filter(|&t| t != task) {
            return Err(config_error(format!("{}: manifest is for {t}, not {task}", path.display())));
        }
        Ok(cfg)
    }
}

fn dispatch(command: Command) -> Result<(), Error> {
    let (task, flags) = match command {
        Command::Gep { action: GepAction::Scan(f) } => (Task::GepScan, f),
        Command::Gep { action: GepAction::Critical(f) } => (Task::GepCritical, f),
        Command::Duality(f) => (Task::Duality, f),
        Command::Cv { action: SweepAction::Sweep(f) } => (Task::CvSweep, f),
        Command::Cv { action: SweepAction::Vqe(f) } => (Task::CvVqe, f),
        Command::Dv { action: SweepAction::Sweep(f) } => (Task::DvSweep, f),
        Command::Dv { action: SweepAction::Vqe(f) } => (Task::DvVqe, f),
        Command::Zne { action: ZneAction::Run(f) } => (Task::ZneRun, f),
        Command::Fit { action: FitAction::Crossing(f) } => (Task::FitCrossing, f),
    };
    let config = flags.resolve(task, task.mode().unwrap_or(Mode::Cv))?;
    let dir = PathBuf::from(config.output.clone().unwrap_or_else(|| format!("out/{task}")));
    let out = runner::run(task, &config)?;
    out.write(&dir)?;
    for f in &out.manifest.files {
        println!("wrote {}", dir.join(f).display());
    }
    println!("wrote {}", dir.join("manifest.json").display());
    if let Some(c) = &out.manifest.crossing {
        match c.ci {
            Some((lo, hi)) => println!(
                "crossing {:.3} ± {:.3} ({:.0}% CI [{lo:.3}, {hi:.3}], B = {})",
                c.intercept,
                c.intercept_stderr,
                100.0 * c.ci_level,
                c.resamples
            ),
            None => println!("crossing {:.3} ± {:.3}", c.intercept, c.intercept_stderr),
        }
    }
    if let Some(e) = &out.manifest.crossing_error {
        println!("no crossing: {e}");
    }
    if out.manifest.leakage_flagged {
        eprintln!("warning: Fock truncation leakage flagged; see manifest points");
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_config() { 2 } else { 3 })
        }
    }
}
