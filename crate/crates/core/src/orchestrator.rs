//! Backward-Euler time marching with the three-phase reduced-order lifecycle.
//!
//! Phase I builds a ROM mapping `b~^{n-1} -> rho^n` for initial guesses.
//! Phase II uses those guesses with full SI-DSA while collecting pairs
//! `(rho^n - rho^(1/2), rho^(1/2) - rho^(0))` for a first-iteration
//! correction ROM. Phase III applies both and updates them whenever their
//! error indicators exceed `eps_up`.

use std::fmt;
use std::str::FromStr;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::dsa::DiffusionSystem;
use crate::error::{Error, Result};
use crate::linalg::{norm2, sub};
use crate::operators::DiscreteOperators;
use crate::rom::{dmd_reduced_operator, IncrementalSvd, ReducedSystem, RomRole, SnapshotStore};
use crate::si::{si_sa_solve, Accelerator, Dsa, Hybrid, IterationPredictor, NoAcceleration, SolveResult};
use crate::sweep::{compute_btilde, recover_angular_flux, AngularFlux};

/// Singular values below this fraction of the largest are dropped before a
/// reduced operator is built.
const BUILD_CUTOFF: f64 = 1e-14;

/// Iteration strategy.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    Si,
    SiDsa,
    DmdSiDsa,
    Mh,
    DmdSiMh,
}

impl Mode {
    pub const ALL: [Mode; 5] = [Mode::Si, Mode::SiDsa, Mode::DmdSiDsa, Mode::Mh, Mode::DmdSiMh];

    pub fn name(self) -> &'static str {
        match self {
            Mode::Si => "si",
            Mode::SiDsa => "si-dsa",
            Mode::DmdSiDsa => "dmd-si-dsa",
            Mode::Mh => "mh",
            Mode::DmdSiMh => "dmd-si-mh",
        }
    }

    pub fn uses_rom(self) -> bool {
        matches!(self, Mode::DmdSiDsa | Mode::DmdSiMh)
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Mode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let key = s.to_ascii_lowercase().replace('_', "-");
        Mode::ALL
            .into_iter()
            .find(|m| m.name() == key)
            .ok_or_else(|| {
                let names: Vec<&str> = Mode::ALL.iter().map(|m| m.name()).collect();
                Error::Usage(format!("unknown mode '{s}', expected one of {}", names.join(", ")))
            })
    }
}

/// Solver settings for one run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    pub mode: Mode,
    pub eps_sisa: f64,
    pub eps_ig: f64,
    pub eps_pc: f64,
    pub eps_up: f64,
    pub max_iter: usize,
    pub rank_cap: usize,
    pub mh_snapshots: usize,
    /// Keep the singular values of every ROM append in the metrics.
    pub record_singular_values: bool,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            mode: Mode::DmdSiDsa,
            eps_sisa: 1e-11,
            eps_ig: 1e-9,
            eps_pc: 1e-6,
            eps_up: 1e-9,
            max_iter: 1000,
            rank_cap: 128,
            mh_snapshots: 4,
            record_singular_values: false,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("eps_sisa", self.eps_sisa),
            ("eps_ig", self.eps_ig),
            ("eps_pc", self.eps_pc),
            ("eps_up", self.eps_up),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::Config(format!("{name} must be positive, got {v}")));
            }
        }
        if self.max_iter == 0 || self.rank_cap == 0 {
            return Err(Error::Config("max_iter and rank_cap must be at least 1".into()));
        }
        if self.mh_snapshots < 2 {
            return Err(Error::Config("mh_snapshots must be at least 2".into()));
        }
        Ok(())
    }
}

/// Assembled problem: operators, diffusion system, initial state and the
/// time grid.
#[derive(Debug)]
pub struct Problem {
    pub ops: DiscreteOperators,
    pub dsa: DiffusionSystem,
    /// Initial density coefficients (the initial condition is isotropic).
    pub rho0: Vec<f64>,
    pub n_steps: usize,
}

/// Phase label of a time step.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Phase {
    I,
    II,
    III,
}

impl Phase {
    pub fn label(self) -> &'static str {
        match self {
            Phase::I => "I",
            Phase::II => "II",
            Phase::III => "III",
        }
    }

    pub fn from_label(s: &str) -> Option<Self> {
        match s {
            "I" => Some(Phase::I),
            "II" => Some(Phase::II),
            "III" => Some(Phase::III),
            _ => None,
        }
    }
}

/// One row of the per-step metrics.
#[derive(Debug, Clone, PartialEq)]
pub struct StepRecord {
    pub step: usize,
    pub time: f64,
    pub phase: Phase,
    pub iterations: usize,
    pub sweeps: usize,
    pub wallclock_ms: f64,
    pub rank_ig: usize,
    pub rank_pc: usize,
    pub updated_ig: bool,
    pub updated_pc: bool,
    pub err_ig: Option<f64>,
    pub err_pc: Option<f64>,
    /// ROM solves or corrections that fell back to a simpler path.
    pub fallbacks: usize,
}

/// Singular values after one ROM append.
#[derive(Debug, Clone, PartialEq)]
pub struct SvRecord {
    pub step: usize,
    pub role: RomRole,
    pub values: Vec<f64>,
}

/// Everything measured during a run.
#[derive(Debug, Clone, Default)]
pub struct RunMetrics {
    pub steps: Vec<StepRecord>,
    /// Time spent appending snapshots and building reduced operators.
    pub rom_build_ms: f64,
    /// Time spent in initial-guess reduced solves.
    pub ig_predict_ms: f64,
    pub total_ms: f64,
    pub singular_values: Vec<SvRecord>,
    /// Step at which the initial-guess ROM was frozen.
    pub n0: Option<usize>,
    /// Number of Phase II steps before the correction ROM was frozen.
    pub n1: Option<usize>,
}

impl RunMetrics {
    pub fn total_sweeps(&self) -> usize {
        self.steps.iter().map(|s| s.sweeps).sum()
    }

    /// Steps carrying each phase label, in order.
    pub fn steps_in(&self, phase: Phase) -> impl Iterator<Item = &StepRecord> {
        self.steps.iter().filter(move |s| s.phase == phase)
    }
}

/// Final state of a run.
#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub flux: AngularFlux,
    pub rho: Vec<f64>,
    pub metrics: RunMetrics,
}

/// One ROM: factorization, right-hand-side store and reduced system.
#[derive(Debug, Clone)]
pub struct Rom {
    pub svd: IncrementalSvd,
    pub store: SnapshotStore,
    pub system: Option<ReducedSystem>,
    role: RomRole,
}

impl Rom {
    fn new(n: usize, trunc_tol: f64, rank_cap: usize, role: RomRole) -> Self {
        Self {
            svd: IncrementalSvd::new(n, trunc_tol, rank_cap),
            store: SnapshotStore::new(),
            system: None,
            role,
        }
    }

    fn append(&mut self, col: &[f64], rhs: Vec<f64>, truncate: bool) -> Result<()> {
        self.svd.append(col, truncate)?;
        self.store.push(rhs)
    }

    fn rebuild(&mut self) -> Result<()> {
        self.svd.drop_relative(BUILD_CUTOFF);
        self.system = Some(dmd_reduced_operator(&self.svd, &self.store, self.role)?);
        Ok(())
    }

    pub fn rank(&self) -> usize {
        self.svd.rank()
    }
}

/// Lifecycle flags and the two ROMs.
#[derive(Debug, Clone)]
pub struct PhaseState {
    pub flag_ig: bool,
    pub flag_pc: bool,
    pub ig: Rom,
    pub pc: Rom,
    pub eps_ig: f64,
    pub eps_pc: f64,
    pub eps_up: f64,
}

impl PhaseState {
    pub fn new(n: usize, config: &SolverConfig) -> Self {
        Self {
            flag_ig: false,
            flag_pc: false,
            ig: Rom::new(n, config.eps_ig, config.rank_cap, RomRole::InitialGuess),
            pc: Rom::new(n, config.eps_pc, config.rank_cap, RomRole::Preconditioner),
            eps_ig: config.eps_ig,
            eps_pc: config.eps_pc,
            eps_up: config.eps_up,
        }
    }

    pub fn phase(&self) -> Phase {
        match (self.flag_ig, self.flag_pc) {
            (false, _) => Phase::I,
            (true, false) => Phase::II,
            (true, true) => Phase::III,
        }
    }
}

/// Updates the initial-guess ROM when `||rho_guess - rho_n||_2 > eps_up`.
/// Returns the indicator and whether an update happened.
pub fn maybe_update_ig(
    state: &mut PhaseState,
    rho_n: &[f64],
    btilde_prev: &[f64],
    rho_guess: &[f64],
) -> Result<(f64, bool)> {
    let err = norm2(&sub(rho_guess, rho_n));
    if err > state.eps_up {
        state.ig.append(rho_n, btilde_prev.to_vec(), true)?;
        state.ig.rebuild()?;
        Ok((err, true))
    } else {
        Ok((err, false))
    }
}

/// Updates the correction ROM when the initial-guess ROM changed or
/// `||d_pred - d_true||_2 > eps_up`. Returns the indicator and whether an
/// update happened.
pub fn maybe_update_pc(
    state: &mut PhaseState,
    delta_true: &[f64],
    delta_b: &[f64],
    delta_pred: &[f64],
    ig_updated: bool,
) -> Result<(f64, bool)> {
    let err = norm2(&sub(delta_pred, delta_true));
    if ig_updated || err > state.eps_up {
        state.pc.append(delta_true, delta_b.to_vec(), true)?;
        state.pc.rebuild()?;
        Ok((err, true))
    } else {
        Ok((err, false))
    }
}

fn solve_step(
    problem: &Problem,
    config: &SolverConfig,
    btilde: &[f64],
    guess: &[f64],
    pc: Option<&ReducedSystem>,
) -> Result<(SolveResult, usize)> {
    let ops = &problem.ops;
    let (eps, cap) = (config.eps_sisa, config.max_iter);
    let run = |acc: &mut dyn Accelerator| -> Result<(SolveResult, usize)> {
        let r = si_sa_solve(ops, btilde, guess, acc, eps, cap)?;
        Ok((r, acc.fallbacks()))
    };
    match config.mode {
        Mode::Si => run(&mut NoAcceleration),
        Mode::SiDsa => run(&mut Dsa::new(&problem.dsa, ops)),
        Mode::Mh => run(&mut IterationPredictor::new(config.mh_snapshots)),
        Mode::DmdSiDsa => run(&mut Hybrid::new(pc, Dsa::new(&problem.dsa, ops))),
        Mode::DmdSiMh => run(&mut Hybrid::new(pc, IterationPredictor::new(config.mh_snapshots))),
    }
}

/// Marches `problem` to its final time with the strategy in `config`.
pub fn time_march(problem: &Problem, config: &SolverConfig) -> Result<RunOutcome> {
    config.validate()?;
    let ops = &problem.ops;
    let n = ops.n_dofs();
    if problem.rho0.len() != n {
        return Err(Error::Shape {
            expected: n,
            got: problem.rho0.len(),
        });
    }
    let dt = ops.dt();
    let start = Instant::now();
    let mut metrics = RunMetrics::default();
    let mut state = PhaseState::new(n, config);
    let mut flux = AngularFlux::isotropic(ops.n_angles(), &problem.rho0);
    let mut rho = problem.rho0.clone();
    for step in 1..=problem.n_steps {
        let t0 = Instant::now();
        let sweeps0 = ops.sweep_count();
        let phase = if config.mode.uses_rom() {
            state.phase()
        } else {
            Phase::I
        };
        let btilde = compute_btilde(ops, &flux)?;
        let mut fallbacks = 0;
        let guess = match (&state.ig.system, state.flag_ig) {
            (Some(rs), true) => {
                let tp = Instant::now();
                let g = rs.solve(&btilde);
                metrics.ig_predict_ms += tp.elapsed().as_secs_f64() * 1e3;
                g.unwrap_or_else(|_| {
                    fallbacks += 1;
                    rho.clone()
                })
            }
            _ => rho.clone(),
        };
        let pc = if state.flag_pc {
            state.pc.system.as_ref()
        } else {
            None
        };
        let (res, acc_fallbacks) = solve_step(problem, config, &btilde, &guess, pc)?;
        fallbacks += acc_fallbacks + res.nonfinite_corrections;
        if !res.converged {
            return Err(Error::NotConverged {
                step,
                iterations: res.iterations,
                update_norm: res.final_update_norm,
            });
        }
        flux = recover_angular_flux(ops, &res.rho, &flux)?;

        let mut record = StepRecord {
            step,
            time: step as f64 * dt,
            phase,
            iterations: res.iterations,
            sweeps: 0,
            wallclock_ms: 0.0,
            rank_ig: 0,
            rank_pc: 0,
            updated_ig: false,
            updated_pc: false,
            err_ig: None,
            err_pc: None,
            fallbacks,
        };
        if config.mode.uses_rom() {
            let tr = Instant::now();
            lifecycle(&mut state, &mut metrics, &mut record, &res, &btilde, config)?;
            metrics.rom_build_ms += tr.elapsed().as_secs_f64() * 1e3;
            record.rank_ig = state.ig.rank();
            record.rank_pc = state.pc.rank();
        }
        rho = res.rho;
        record.sweeps = ops.sweep_count() - sweeps0;
        record.wallclock_ms = t0.elapsed().as_secs_f64() * 1e3;
        metrics.steps.push(record);
    }
    metrics.total_ms = start.elapsed().as_secs_f64() * 1e3;
    Ok(RunOutcome { flux, rho, metrics })
}

fn lifecycle(
    state: &mut PhaseState,
    metrics: &mut RunMetrics,
    record: &mut StepRecord,
    res: &SolveResult,
    btilde: &[f64],
    config: &SolverConfig,
) -> Result<()> {
    let step = record.step;
    let log_sv = |metrics: &mut RunMetrics, rom: &Rom| {
        if config.record_singular_values {
            metrics.singular_values.push(SvRecord {
                step,
                role: rom.role,
                values: rom.svd.singular_values().to_vec(),
            });
        }
    };
    if !state.flag_ig {
        state.ig.append(&res.rho, btilde.to_vec(), false)?;
        log_sv(metrics, &state.ig);
        if state.ig.svd.sv_ratio_met(state.eps_ig) {
            state.ig.rebuild()?;
            state.flag_ig = true;
            metrics.n0 = Some(step);
        }
        return Ok(());
    }
    let (err_ig, ig_updated) = maybe_update_ig(state, &res.rho, btilde, &res.initial_guess)?;
    if ig_updated {
        log_sv(metrics, &state.ig);
    }
    record.err_ig = Some(err_ig);
    record.updated_ig = ig_updated;
    let delta_true = sub(&res.rho, &res.first_half);
    let delta_b = sub(&res.first_half, &res.initial_guess);
    if !state.flag_pc {
        state.pc.append(&delta_true, delta_b, false)?;
        log_sv(metrics, &state.pc);
        if state.pc.svd.sv_ratio_met(state.eps_pc) {
            state.pc.rebuild()?;
            state.flag_pc = true;
            metrics.n1 = Some(step - metrics.n0.unwrap_or(0));
        }
        return Ok(());
    }
    let (err_pc, pc_updated) =
        maybe_update_pc(state, &delta_true, &delta_b, &res.first_correction, ig_updated)?;
    if pc_updated {
        log_sv(metrics, &state.pc);
    }
    record.err_pc = Some(err_pc);
    record.updated_pc = pc_updated;
    Ok(())
}
