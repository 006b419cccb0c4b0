//! Command-line entry point.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::Parser;
use serde::Deserialize;

use crate::error::{Error, Result};
use crate::orchestrator::{time_march, Mode, RunOutcome, SolverConfig};
use crate::report::{compare_runs, emit_outputs, metrics_csv};
use crate::scenario::{scenario_catalog, QuadSpec, Scenario, ScenarioKind, ScenarioOverrides};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_SOLVER: i32 = 3;
pub const EXIT_IO: i32 = 4;

/// Implicit radiative transfer with SI-DSA and reduced-order acceleration.
#[derive(Debug, Parser)]
#[command(name = "rte-accel", version)]
pub struct Args {
    /// Scenario name: two_material_1d, gaussian_source_2d,
    /// variable_scattering_2d or lattice_2d.
    #[arg(long)]
    pub scenario: Option<String>,
    /// si, si-dsa, dmd-si-dsa, mh or dmd-si-mh.
    #[arg(long)]
    pub mode: Option<String>,
    #[arg(long)]
    pub nx: Option<usize>,
    #[arg(long)]
    pub ny: Option<usize>,
    #[arg(long)]
    pub degree: Option<usize>,
    /// `n` (Gauss-Legendre) or `n_phi,n_z` (Chebyshev-Legendre).
    #[arg(long)]
    pub quad: Option<String>,
    #[arg(long, conflicts_with = "dt")]
    pub cfl: Option<f64>,
    #[arg(long)]
    pub dt: Option<f64>,
    #[arg(long)]
    pub t_final: Option<f64>,
    #[arg(long)]
    pub sigma_s: Option<f64>,
    #[arg(long)]
    pub eps_sisa: Option<f64>,
    #[arg(long)]
    pub eps_ig: Option<f64>,
    #[arg(long)]
    pub eps_pc: Option<f64>,
    #[arg(long)]
    pub eps_up: Option<f64>,
    #[arg(long)]
    pub rank_cap: Option<usize>,
    #[arg(long)]
    pub mh_snapshots: Option<usize>,
    #[arg(long)]
    pub max_iter: Option<usize>,
    /// Output directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Also run SI-DSA and write a comparison report.
    #[arg(long)]
    pub compare_baseline: bool,
    /// Run twice and check that the metrics agree apart from timings.
    #[arg(long)]
    pub seed_check: bool,
    /// Write singular-value histories.
    #[arg(long)]
    pub sv_history: bool,
    /// Flat TOML file with the same keys as the flags.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Worker threads for the angular loops.
    #[arg(long)]
    pub threads: Option<usize>,
}

/// Keys accepted in a config file.
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "kebab-case")]
struct FileConfig {
    scenario: Option<String>,
    mode: Option<String>,
    nx: Option<usize>,
    ny: Option<usize>,
    degree: Option<usize>,
    quad: Option<String>,
    cfl: Option<f64>,
    dt: Option<f64>,
    t_final: Option<f64>,
    sigma_s: Option<f64>,
    eps_sisa: Option<f64>,
    eps_ig: Option<f64>,
    eps_pc: Option<f64>,
    eps_up: Option<f64>,
    rank_cap: Option<usize>,
    mh_snapshots: Option<usize>,
    max_iter: Option<usize>,
    out: Option<PathBuf>,
    compare_baseline: Option<bool>,
    seed_check: Option<bool>,
    sv_history: Option<bool>,
    threads: Option<usize>,
}

/// Fully resolved invocation.
#[derive(Debug, Clone)]
pub struct Invocation {
    pub scenario: Scenario,
    pub config: SolverConfig,
    pub out: PathBuf,
    pub compare_baseline: bool,
    pub seed_check: bool,
    pub threads: Option<usize>,
}

fn quad_arg(s: Option<String>) -> Result<Option<QuadSpec>> {
    s.map(|q| q.parse()).transpose()
}

impl Args {
    /// Combines flags with the config file; flags win.
    pub fn resolve(self) -> Result<Invocation> {
        let file = match &self.config {
            Some(p) => {
                let text = fs::read_to_string(p)?;
                toml::from_str::<FileConfig>(&text).map_err(|e| Error::Usage(format!("{}: {e}", p.display())))?
            }
            None => FileConfig::default(),
        };
        let from_file = ScenarioOverrides {
            nx: file.nx,
            ny: file.ny,
            degree: file.degree,
            quad: quad_arg(file.quad)?,
            dt: file.dt,
            cfl: file.cfl,
            t_final: file.t_final,
            sigma_s: file.sigma_s,
            eps_sisa: file.eps_sisa,
            eps_ig: file.eps_ig,
            eps_pc: file.eps_pc,
            eps_up: file.eps_up,
        };
        let from_flags = ScenarioOverrides {
            nx: self.nx,
            ny: self.ny,
            degree: self.degree,
            quad: quad_arg(self.quad)?,
            dt: self.dt,
            cfl: self.cfl,
            t_final: self.t_final,
            sigma_s: self.sigma_s,
            eps_sisa: self.eps_sisa,
            eps_ig: self.eps_ig,
            eps_pc: self.eps_pc,
            eps_up: self.eps_up,
        };
        let mut overrides = from_file;
        // a step-size flag replaces either step-size key from the file
        if from_flags.dt.is_some() || from_flags.cfl.is_some() {
            overrides.dt = None;
            overrides.cfl = None;
        }
        let overrides = overrides.merged(&from_flags);
        let name = self
            .scenario
            .or(file.scenario)
            .ok_or_else(|| Error::Usage(format!("--scenario is required; one of {}", scenario_names())))?;
        let scenario = scenario_catalog(&name, &overrides)?;
        let mode: Mode = match self.mode.or(file.mode) {
            Some(m) => m.parse()?,
            None => Mode::DmdSiDsa,
        };
        let mut base = SolverConfig {
            mode,
            ..SolverConfig::default()
        };
        if let Some(v) = self.rank_cap.or(file.rank_cap) {
            base.rank_cap = v;
        }
        if let Some(v) = self.mh_snapshots.or(file.mh_snapshots) {
            base.mh_snapshots = v;
        }
        if let Some(v) = self.max_iter.or(file.max_iter) {
            base.max_iter = v;
        }
        base.record_singular_values = self.sv_history || file.sv_history.unwrap_or(false);
        let config = scenario.solver_config(base);
        config.validate().map_err(|e| Error::Usage(e.to_string()))?;
        if self.threads.or(file.threads) == Some(0) {
            return Err(Error::Usage("--threads must be at least 1".into()));
        }
        Ok(Invocation {
            scenario,
            config,
            out: self.out.or(file.out).unwrap_or_else(|| PathBuf::from("out")),
            compare_baseline: self.compare_baseline || file.compare_baseline.unwrap_or(false),
            seed_check: self.seed_check || file.seed_check.unwrap_or(false),
            threads: self.threads.or(file.threads),
        })
    }
}

fn scenario_names() -> String {
    ScenarioKind::ALL.iter().map(|k| k.name()).collect::<Vec<_>>().join(", ")
}

/// Exit code for an error.
pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Usage(_) | Error::Config(_) | Error::InvalidQuadrature(_) => EXIT_USAGE,
        Error::Io(_) => EXIT_IO,
        _ => EXIT_SOLVER,
    }
}

/// Metrics CSV with the wall-clock column blanked.
pub fn metrics_without_timing(csv: &str) -> String {
    csv.lines()
        .map(|l| {
            let mut f: Vec<&str> = l.split(',').collect();
            if f.len() > 5 {
                f[5] = "";
            }
            f.join(",")
        })
        .collect::<Vec<_>>()
        .join("\n")
}

fn run_mode(inv: &Invocation, mode: Mode) -> Result<RunOutcome> {
    let problem = inv.scenario.assemble()?;
    let cfg = SolverConfig { mode, ..inv.config };
    time_march(&problem, &cfg)
}

fn execute(inv: &Invocation, log: &mut dyn Write) -> Result<()> {
    let space = inv.scenario.space()?;
    fs::create_dir_all(&inv.out)?;
    fs::write(inv.out.join("scenario.toml"), inv.scenario.to_toml()?)?;
    let baseline = if inv.compare_baseline && inv.config.mode != Mode::SiDsa {
        let b = run_mode(inv, Mode::SiDsa)?;
        emit_outputs(&inv.out.join(Mode::SiDsa.name()), &b.metrics, &b.rho, &space, None)?;
        Some(b)
    } else {
        None
    };
    let run = run_mode(inv, inv.config.mode)?;
    let dir = inv.out.join(inv.config.mode.name());
    let base_metrics = match (&baseline, inv.compare_baseline) {
        (Some(b), _) => Some(&b.metrics),
        (None, true) => Some(&run.metrics),
        _ => None,
    };
    emit_outputs(&dir, &run.metrics, &run.rho, &space, base_metrics)?;
    writeln!(
        log,
        "{} {}: {} steps, {} sweeps, {:.1} ms",
        inv.scenario.scenario,
        inv.config.mode,
        run.metrics.steps.len(),
        run.metrics.total_sweeps(),
        run.metrics.total_ms
    )?;
    if let Some(b) = base_metrics {
        let cmp = compare_runs(b, &run.metrics)?;
        fs::write(inv.out.join("comparison.csv"), cmp.to_csv())?;
        let whole = cmp.whole_run();
        writeln!(
            log,
            "sweep ratio {:.4}, time ratio {:.4}, speedup {:.3}",
            whole.sweep_ratio(),
            whole.time_ratio(),
            whole.speedup()
        )?;
    }
    if inv.seed_check {
        let again = run_mode(inv, inv.config.mode)?;
        let a = metrics_without_timing(&metrics_csv(&run.metrics));
        let b = metrics_without_timing(&metrics_csv(&again.metrics));
        if a != b {
            return Err(Error::Numerical("repeated run produced different metrics".into()));
        }
        writeln!(log, "seed check passed")?;
    }
    Ok(())
}

/// Runs the CLI on `args` (including the program name) and returns the
/// process exit code.
pub fn run_cli<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let args = match Args::try_parse_from(args) {
        Ok(a) => a,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    let inv = match args.resolve() {
        Ok(inv) => inv,
        Err(e) => {
            eprintln!("error: {e}");
            return exit_code(&e);
        }
    };
    let outcome = match inv.threads {
        Some(n) => match rayon::ThreadPoolBuilder::new().num_threads(n).build() {
            Ok(pool) => pool.install(|| execute(&inv, &mut std::io::stdout())),
            Err(e) => Err(Error::Usage(e.to_string())),
        },
        None => execute(&inv, &mut std::io::stdout()),
    };
    match outcome {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

/// Parses a file written by the `scenario.toml` output.
pub fn load_scenario(path: &Path) -> Result<Scenario> {
    Scenario::from_toml(&fs::read_to_string(path)?)
}
