//! Memory-efficient source iteration with synthetic acceleration.
//!
//! Each iteration forms the half iterate `rho^(l-1/2) = T Sigma_s rho^(l-1) + b~`
//! with one transport sweep, stops when the update is below tolerance in the
//! max norm, and otherwise adds the accelerator's correction.

use crate::dsa::{dsa_correct, DiffusionSystem};
use crate::error::{Error, Result};
use crate::linalg::{all_finite, norm_inf};
use crate::operators::DiscreteOperators;
use crate::rom::{mh_fixed_point_predict, ReducedSystem};
use crate::sweep::apply_t;

/// A synthetic-acceleration strategy.
pub trait Accelerator {
    /// Called once before the first iteration of a solve.
    fn begin(&mut self, _rho0: &[f64]) {}

    /// Correction `delta rho^(l)` given the half iterate and the previous
    /// iterate. `Ok(None)` means no correction this iteration.
    fn correction(&mut self, l: usize, half: &[f64], prev: &[f64]) -> Result<Option<Vec<f64>>>;

    /// Number of times this accelerator fell back to a simpler correction.
    fn fallbacks(&self) -> usize {
        0
    }
}

/// Plain source iteration.
#[derive(Debug, Default, Clone, Copy)]
pub struct NoAcceleration;

impl Accelerator for NoAcceleration {
    fn correction(&mut self, _: usize, _: &[f64], _: &[f64]) -> Result<Option<Vec<f64>>> {
        Ok(None)
    }
}

/// Diffusion synthetic acceleration.
pub struct Dsa<'a> {
    pub system: &'a DiffusionSystem,
    pub ops: &'a DiscreteOperators,
    unconverged_cg: usize,
}

impl<'a> Dsa<'a> {
    pub fn new(system: &'a DiffusionSystem, ops: &'a DiscreteOperators) -> Self {
        Self {
            system,
            ops,
            unconverged_cg: 0,
        }
    }

    /// CG solves that hit the iteration cap.
    pub fn unconverged_solves(&self) -> usize {
        self.unconverged_cg
    }
}

impl Accelerator for Dsa<'_> {
    fn correction(&mut self, _: usize, half: &[f64], prev: &[f64]) -> Result<Option<Vec<f64>>> {
        let residual: Vec<f64> = half.iter().zip(prev).map(|(a, b)| a - b).collect();
        let (delta, report) = dsa_correct(self.system, self.ops, &residual)?;
        if !report.converged {
            self.unconverged_cg += 1;
        }
        Ok(Some(delta))
    }
}

/// Across-iteration predictor: collects unaccelerated iterates and, once
/// `snapshots + 1` are available, jumps to the predicted fixed point.
#[derive(Debug, Clone)]
pub struct IterationPredictor {
    snapshots: usize,
    history: Vec<Vec<f64>>,
    failures: usize,
}

impl IterationPredictor {
    pub fn new(snapshots: usize) -> Self {
        Self {
            snapshots: snapshots.max(2),
            history: Vec::new(),
            failures: 0,
        }
    }
}

impl Accelerator for IterationPredictor {
    fn begin(&mut self, _: &[f64]) {
        self.history.clear();
    }

    fn correction(&mut self, _: usize, half: &[f64], prev: &[f64]) -> Result<Option<Vec<f64>>> {
        if self.history.is_empty() {
            self.history.push(prev.to_vec());
        }
        self.history.push(half.to_vec());
        if self.history.len() < self.snapshots + 1 {
            return Ok(None);
        }
        let predicted = mh_fixed_point_predict(&self.history);
        self.history.clear();
        match predicted {
            Ok(p) if all_finite(&p) => {
                self.history.push(p.clone());
                Ok(Some(p.iter().zip(half).map(|(a, b)| a - b).collect()))
            }
            _ => {
                self.failures += 1;
                self.history.push(half.to_vec());
                Ok(None)
            }
        }
    }

    fn fallbacks(&self) -> usize {
        self.failures
    }
}

/// Reduced-order correction at the first iteration, `inner` afterwards.
///
/// At `l = 1` the correction is `U A_r^{-1} U^T (rho^(1/2) - rho^(0))`; if the
/// reduced solve fails, `inner` supplies the correction instead.
pub struct Hybrid<'a, A: Accelerator> {
    pub rom: Option<&'a ReducedSystem>,
    pub inner: A,
    rom_failures: usize,
}

impl<'a, A: Accelerator> Hybrid<'a, A> {
    pub fn new(rom: Option<&'a ReducedSystem>, inner: A) -> Self {
        Self {
            rom,
            inner,
            rom_failures: 0,
        }
    }
}

impl<A: Accelerator> Accelerator for Hybrid<'_, A> {
    fn begin(&mut self, rho0: &[f64]) {
        self.inner.begin(rho0);
    }

    fn correction(&mut self, l: usize, half: &[f64], prev: &[f64]) -> Result<Option<Vec<f64>>> {
        if l == 1 {
            if let Some(rom) = self.rom {
                let rhs: Vec<f64> = half.iter().zip(prev).map(|(a, b)| a - b).collect();
                match rom.solve(&rhs) {
                    Ok(delta) => return Ok(Some(delta)),
                    Err(_) => self.rom_failures += 1,
                }
            }
        }
        self.inner.correction(l, half, prev)
    }

    fn fallbacks(&self) -> usize {
        self.rom_failures + self.inner.fallbacks()
    }
}

/// Outcome of one time step's iteration.
#[derive(Debug, Clone)]
pub struct SolveResult {
    pub rho: Vec<f64>,
    pub iterations: usize,
    /// Sweeps spent inside the iteration (equal to `iterations`).
    pub sweeps: usize,
    /// `rho^(1/2)`.
    pub first_half: Vec<f64>,
    /// `rho^(0)`.
    pub initial_guess: Vec<f64>,
    /// Correction added at `l = 1` (zero if converged there).
    pub first_correction: Vec<f64>,
    pub converged: bool,
    pub final_update_norm: f64,
    /// Iterations whose correction was non-finite and replaced by zero.
    pub nonfinite_corrections: usize,
    /// `||rho^(l-1/2) - rho^(l-1)||_inf` per iteration.
    pub update_history: Vec<f64>,
}

/// Iterates `rho^(l-1/2) = T Sigma_s rho^(l-1) + b~` from `rho0` until the
/// max-norm update drops below `eps`, for at most `max_iter` iterations.
///
/// With no scattering anywhere `T Sigma_s = 0`, so the first half iterate is
/// exact and the solve stops there.
pub fn si_sa_solve(
    ops: &DiscreteOperators,
    btilde: &[f64],
    rho0: &[f64],
    acc: &mut dyn Accelerator,
    eps: f64,
    max_iter: usize,
) -> Result<SolveResult> {
    if !(eps > 0.0) || max_iter == 0 {
        return Err(Error::Config(format!(
            "need eps > 0 and at least one iteration, got eps = {eps}, max_iter = {max_iter}"
        )));
    }
    for v in [btilde, rho0] {
        if v.len() != ops.n_dofs() {
            return Err(Error::Shape {
                expected: ops.n_dofs(),
                got: v.len(),
            });
        }
    }
    let exact_first = ops.is_purely_absorbing();
    acc.begin(rho0);
    let mut prev = rho0.to_vec();
    let mut first_half = Vec::new();
    let mut first_correction = vec![0.0; rho0.len()];
    let mut history = Vec::new();
    let mut nonfinite = 0;
    let mut half = Vec::new();
    for l in 1..=max_iter {
        let scatter = ops.apply_sigma_s(&prev);
        half = apply_t(ops, &scatter)?;
        for (h, b) in half.iter_mut().zip(btilde) {
            *h += b;
        }
        let update = norm_inf(&half.iter().zip(&prev).map(|(a, b)| a - b).collect::<Vec<_>>());
        history.push(update);
        if l == 1 {
            first_half = half.clone();
        }
        if update < eps || (exact_first && l == 1) {
            return Ok(SolveResult {
                rho: half,
                iterations: l,
                sweeps: l,
                first_half,
                initial_guess: rho0.to_vec(),
                first_correction,
                converged: true,
                final_update_norm: update,
                nonfinite_corrections: nonfinite,
                update_history: history,
            });
        }
        let delta = match acc.correction(l, &half, &prev)? {
            Some(d) if all_finite(&d) => Some(d),
            Some(_) => {
                nonfinite += 1;
                None
            }
            None => None,
        };
        prev = half.clone();
        if let Some(d) = delta {
            for (p, v) in prev.iter_mut().zip(&d) {
                *p += v;
            }
            if l == 1 {
                first_correction = d;
            }
        }
    }
    let update = history.last().copied().unwrap_or(f64::INFINITY);
    Ok(SolveResult {
        rho: half,
        iterations: max_iter,
        sweeps: max_iter,
        first_half,
        initial_guess: rho0.to_vec(),
        first_correction,
        converged: false,
        final_update_norm: update,
        nonfinite_corrections: nonfinite,
        update_history: history,
    })
}
