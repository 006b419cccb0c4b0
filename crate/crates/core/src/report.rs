//! CSV outputs and baseline comparisons.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use crate::dg::{cell_averages, DgSpace};
use crate::error::{Error, Result};
use crate::orchestrator::{Phase, RunMetrics};

pub const METRICS_HEADER: &str =
    "step,time,phase,iterations,sweeps,wallclock_ms,rank_ig,rank_pc,updated_ig,updated_pc,err_ig,err_pc";
pub const SOLUTION_HEADER: &str = "x,y,density,log10_density";
pub const SUMMARY_HEADER: &str = "phase,steps,avg_iterations,avg_sweeps,total_ms,relative_time";
pub const COMPARISON_HEADER: &str =
    "scope,steps,baseline_sweeps,accelerated_sweeps,sweep_ratio,baseline_ms,accelerated_ms,time_ratio,speedup";

/// Densities at or below this value are clamped before taking the log.
pub const LOG_FLOOR: f64 = 1e-300;

/// Files written by [`emit_outputs`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OutputPaths {
    pub metrics: PathBuf,
    pub solution: PathBuf,
    pub summary: PathBuf,
    pub singular_values: Option<PathBuf>,
}

fn num(v: f64) -> String {
    format!("{v:.16e}")
}

fn opt(v: Option<f64>) -> String {
    v.map(num).unwrap_or_default()
}

/// `metrics.csv` contents.
pub fn metrics_csv(m: &RunMetrics) -> String {
    let mut s = String::from(METRICS_HEADER);
    s.push('\n');
    for r in &m.steps {
        let _ = writeln!(
            s,
            "{},{},{},{},{},{},{},{},{},{},{},{}",
            r.step,
            num(r.time),
            r.phase.label(),
            r.iterations,
            r.sweeps,
            num(r.wallclock_ms),
            r.rank_ig,
            r.rank_pc,
            u8::from(r.updated_ig),
            u8::from(r.updated_pc),
            opt(r.err_ig),
            opt(r.err_pc),
        );
    }
    s
}

/// `solution.csv` contents: cell centers and cell-average densities.
pub fn solution_csv(space: &DgSpace, rho: &[f64]) -> Result<String> {
    let avg = cell_averages(space, rho)?;
    let mut s = String::from(SOLUTION_HEADER);
    s.push('\n');
    for (cell, v) in avg.iter().enumerate() {
        let [x, y] = space.mesh().cell_center(cell);
        let y = if space.dim() == 1 { 0.0 } else { y };
        let _ = writeln!(s, "{},{},{},{}", num(x), num(y), num(*v), num(v.max(LOG_FLOOR).log10()));
    }
    Ok(s)
}

/// Per-phase aggregate of one run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhaseSummary {
    pub steps: usize,
    pub iterations: usize,
    pub sweeps: usize,
    pub total_ms: f64,
}

impl PhaseSummary {
    fn of<'a>(it: impl Iterator<Item = &'a crate::orchestrator::StepRecord>) -> Self {
        let mut s = PhaseSummary {
            steps: 0,
            iterations: 0,
            sweeps: 0,
            total_ms: 0.0,
        };
        for r in it {
            s.steps += 1;
            s.iterations += r.iterations;
            s.sweeps += r.sweeps;
            s.total_ms += r.wallclock_ms;
        }
        s
    }

    pub fn avg_sweeps(&self) -> f64 {
        ratio(self.sweeps as f64, self.steps as f64)
    }

    pub fn avg_iterations(&self) -> f64 {
        ratio(self.iterations as f64, self.steps as f64)
    }
}

fn ratio(a: f64, b: f64) -> f64 {
    if b == 0.0 {
        if a == 0.0 {
            1.0
        } else {
            f64::INFINITY
        }
    } else {
        a / b
    }
}

/// `summary.csv` contents. With a baseline, `relative_time` is this run's
/// time over the baseline's time on the same steps.
pub fn summary_csv(m: &RunMetrics, baseline: Option<&RunMetrics>) -> Result<String> {
    if let Some(b) = baseline {
        check_matching(b, m)?;
    }
    let mut s = String::from(SUMMARY_HEADER);
    s.push('\n');
    let mut line = |label: &str, steps: &[usize]| {
        let pick = |run: &RunMetrics| PhaseSummary::of(steps.iter().map(|&i| &run.steps[i]));
        let own = pick(m);
        let rel = baseline.map(|b| ratio(own.total_ms, pick(b).total_ms));
        let _ = writeln!(
            s,
            "{label},{},{},{},{},{}",
            own.steps,
            num(own.avg_iterations()),
            num(own.avg_sweeps()),
            num(own.total_ms),
            opt(rel)
        );
    };
    for p in [Phase::I, Phase::II, Phase::III] {
        let idx: Vec<usize> = (0..m.steps.len()).filter(|&i| m.steps[i].phase == p).collect();
        line(p.label(), &idx);
    }
    line("all", &(0..m.steps.len()).collect::<Vec<_>>());
    Ok(s)
}

/// Singular-value history: `step,role,rank,s1,...`.
pub fn singular_values_csv(m: &RunMetrics) -> String {
    let mut s = String::from("step,role,rank,values\n");
    for r in &m.singular_values {
        let _ = write!(s, "{},{},{}", r.step, r.role.label(), r.values.len());
        for v in &r.values {
            let _ = write!(s, ",{}", num(*v));
        }
        s.push('\n');
    }
    s
}

/// Writes metrics, solution and summary CSVs into `dir`.
pub fn emit_outputs(
    dir: &Path,
    metrics: &RunMetrics,
    rho: &[f64],
    space: &DgSpace,
    baseline: Option<&RunMetrics>,
) -> Result<OutputPaths> {
    fs::create_dir_all(dir)?;
    let paths = OutputPaths {
        metrics: dir.join("metrics.csv"),
        solution: dir.join("solution.csv"),
        summary: dir.join("summary.csv"),
        singular_values: (!metrics.singular_values.is_empty()).then(|| dir.join("singular_values.csv")),
    };
    fs::write(&paths.metrics, metrics_csv(metrics))?;
    fs::write(&paths.solution, solution_csv(space, rho)?)?;
    fs::write(&paths.summary, summary_csv(metrics, baseline)?)?;
    if let Some(p) = &paths.singular_values {
        fs::write(p, singular_values_csv(metrics))?;
    }
    Ok(paths)
}

/// Sweeps and time of one scope in both runs.
#[derive(Debug, Clone, PartialEq)]
pub struct ComparisonLine {
    pub scope: String,
    pub steps: usize,
    pub baseline_sweeps: usize,
    pub accelerated_sweeps: usize,
    pub baseline_ms: f64,
    pub accelerated_ms: f64,
}

impl ComparisonLine {
    /// Accelerated over baseline sweeps.
    pub fn sweep_ratio(&self) -> f64 {
        ratio(self.accelerated_sweeps as f64, self.baseline_sweeps as f64)
    }

    /// Accelerated over baseline wall-clock.
    pub fn time_ratio(&self) -> f64 {
        ratio(self.accelerated_ms, self.baseline_ms)
    }

    pub fn speedup(&self) -> f64 {
        ratio(self.baseline_ms, self.accelerated_ms)
    }
}

/// Baseline versus accelerated run, grouped by the accelerated run's phases.
#[derive(Debug, Clone, PartialEq)]
pub struct Comparison {
    pub lines: Vec<ComparisonLine>,
    /// ROM construction time over the baseline's total time.
    pub rom_overhead: f64,
    /// Initial-guess prediction time over the baseline's total time.
    pub ig_overhead: f64,
}

impl Comparison {
    pub fn whole_run(&self) -> &ComparisonLine {
        self.lines.last().expect("comparison always has a whole-run line")
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from(COMPARISON_HEADER);
        s.push('\n');
        for l in &self.lines {
            let _ = writeln!(
                s,
                "{},{},{},{},{},{},{},{},{}",
                l.scope,
                l.steps,
                l.baseline_sweeps,
                l.accelerated_sweeps,
                num(l.sweep_ratio()),
                num(l.baseline_ms),
                num(l.accelerated_ms),
                num(l.time_ratio()),
                num(l.speedup())
            );
        }
        let _ = writeln!(s, "rom_overhead,,,,,,,{},", num(self.rom_overhead));
        let _ = writeln!(s, "ig_overhead,,,,,,,{},", num(self.ig_overhead));
        s
    }
}

fn check_matching(a: &RunMetrics, b: &RunMetrics) -> Result<()> {
    if a.steps.len() != b.steps.len() {
        return Err(Error::Comparison(format!(
            "step counts differ: {} vs {}",
            a.steps.len(),
            b.steps.len()
        )));
    }
    for (x, y) in a.steps.iter().zip(&b.steps) {
        if x.step != y.step || (x.time - y.time).abs() > 1e-12 * x.time.abs().max(1.0) {
            return Err(Error::Comparison(format!("time grids differ at step {}", x.step)));
        }
    }
    Ok(())
}

/// Compares `accel` against `baseline` per phase of the run that carries
/// phase labels, and over the whole run.
pub fn compare_runs(baseline: &RunMetrics, accel: &RunMetrics) -> Result<Comparison> {
    check_matching(baseline, accel)?;
    // phases come from whichever run went through the lifecycle
    let labels = if accel.steps.iter().any(|s| s.phase != Phase::I) {
        accel
    } else {
        baseline
    };
    let line = |scope: &str, idx: &[usize]| {
        let b = PhaseSummary::of(idx.iter().map(|&i| &baseline.steps[i]));
        let a = PhaseSummary::of(idx.iter().map(|&i| &accel.steps[i]));
        ComparisonLine {
            scope: scope.to_string(),
            steps: idx.len(),
            baseline_sweeps: b.sweeps,
            accelerated_sweeps: a.sweeps,
            baseline_ms: b.total_ms,
            accelerated_ms: a.total_ms,
        }
    };
    let mut lines = Vec::new();
    for p in [Phase::I, Phase::II, Phase::III] {
        let idx: Vec<usize> = (0..labels.steps.len()).filter(|&i| labels.steps[i].phase == p).collect();
        if !idx.is_empty() {
            lines.push(line(p.label(), &idx));
        }
    }
    lines.push(line("all", &(0..accel.steps.len()).collect::<Vec<_>>()));
    let base_ms: f64 = baseline.steps.iter().map(|s| s.wallclock_ms).sum();
    Ok(Comparison {
        lines,
        rom_overhead: ratio(accel.rom_build_ms, base_ms),
        ig_overhead: ratio(accel.ig_predict_ms, base_ms),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::RectMesh;
    use crate::orchestrator::StepRecord;

    fn run(phases: &[Phase], sweeps: &[usize]) -> RunMetrics {
        RunMetrics {
            steps: phases
                .iter()
                .zip(sweeps)
                .enumerate()
                .map(|(i, (&phase, &sw))| StepRecord {
                    step: i + 1,
                    time: (i + 1) as f64 * 0.5,
                    phase,
                    iterations: sw - 2,
                    sweeps: sw,
                    wallclock_ms: sw as f64,
                    rank_ig: 0,
                    rank_pc: 0,
                    updated_ig: false,
                    updated_pc: false,
                    err_ig: None,
                    err_pc: Some(0.25),
                    fallbacks: 0,
                })
                .collect(),
            ..RunMetrics::default()
        }
    }

    #[test]
    fn identical_runs_give_unit_ratios() {
        let m = run(&[Phase::I, Phase::II, Phase::III], &[9, 8, 4]);
        let c = compare_runs(&m, &m).unwrap();
        assert_eq!(c.lines.len(), 4);
        for l in &c.lines {
            assert_eq!(l.sweep_ratio(), 1.0);
            assert_eq!(l.time_ratio(), 1.0);
            assert_eq!(l.speedup(), 1.0);
        }
    }

    #[test]
    fn mismatched_runs_are_rejected() {
        let a = run(&[Phase::I; 3], &[5, 5, 5]);
        let b = run(&[Phase::I; 2], &[5, 5]);
        assert!(matches!(compare_runs(&a, &b), Err(Error::Comparison(_))));
    }

    #[test]
    fn metrics_rows_and_formatting() {
        let m = run(&[Phase::I, Phase::III], &[5, 3]);
        let csv = metrics_csv(&m);
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0], METRICS_HEADER);
        assert_eq!(lines.len(), 3);
        assert_eq!(lines[2], "2,1.0000000000000000e0,III,1,3,3.0000000000000000e0,0,0,0,0,,2.5000000000000000e-1");
    }

    #[test]
    fn zero_solution_writes_zero_densities() {
        let space = DgSpace::new(RectMesh::new_2d((0.0, 1.0), (0.0, 1.0), 2, 3).unwrap(), 1);
        let csv = solution_csv(&space, &vec![0.0; space.n_dofs()]).unwrap();
        let rows: Vec<&str> = csv.lines().skip(1).collect();
        assert_eq!(rows.len(), 6);
        for r in rows {
            let v: f64 = r.split(',').nth(2).unwrap().parse().unwrap();
            assert_eq!(v, 0.0);
        }
    }

    #[test]
    fn summary_relative_time_uses_baseline() {
        let base = run(&[Phase::I; 3], &[10, 10, 10]);
        let acc = run(&[Phase::I, Phase::II, Phase::III], &[10, 10, 5]);
        let s = summary_csv(&acc, Some(&base)).unwrap();
        let iii = s.lines().find(|l| l.starts_with("III,")).unwrap();
        let rel: f64 = iii.rsplit(',').next().unwrap().parse().unwrap();
        assert_eq!(rel, 0.5);
    }
}
