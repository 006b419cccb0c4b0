use proptest::prelude::*;
use rte_accel::orchestrator::{Phase, RunMetrics, StepRecord};
use rte_accel::report::{compare_runs, emit_outputs, metrics_csv, summary_csv, METRICS_HEADER, SOLUTION_HEADER};
use rte_accel::scenario::{scenario_catalog, QuadSpec, Scenario, ScenarioKind, ScenarioOverrides};

fn record(step: usize, phase: Phase, iterations: usize, ms: f64) -> StepRecord {
    StepRecord {
        step,
        time: step as f64 * 0.1,
        phase,
        iterations,
        sweeps: iterations + 2,
        wallclock_ms: ms,
        rank_ig: step,
        rank_pc: 0,
        updated_ig: step % 2 == 0,
        updated_pc: false,
        err_ig: Some(1.0 / 3.0),
        err_pc: None,
        fallbacks: 0,
    }
}

fn metrics(its: &[usize], ms: &[f64], phases: &[Phase]) -> RunMetrics {
    RunMetrics {
        steps: (0..its.len()).map(|i| record(i + 1, phases[i], its[i], ms[i])).collect(),
        rom_build_ms: 1.5,
        ig_predict_ms: 0.5,
        ..RunMetrics::default()
    }
}

fn phases_for(n: usize, n0: usize, n1: usize) -> Vec<Phase> {
    (0..n)
        .map(|i| {
            if i < n0 {
                Phase::I
            } else if i < n0 + n1 {
                Phase::II
            } else {
                Phase::III
            }
        })
        .collect()
}

fn arb_scenario() -> impl Strategy<Value = Scenario> {
    (
        0usize..4,
        1usize..200,
        1usize..200,
        1usize..3,
        prop_oneof![Just(None), (1e-4f64..1.0).prop_map(Some)],
        1.0f64..50.0,
        prop_oneof![Just(None), (1e-14f64..1e-3).prop_map(Some)],
        prop_oneof![Just(None), (0.01f64..500.0).prop_map(Some)],
    )
        .prop_map(|(k, nx, ny, degree, dt, mult, eps, sigma)| {
            let kind = ScenarioKind::ALL[k];
            let quad = if kind.is_1d() {
                QuadSpec::GaussLegendre(2 * (1 + nx % 8))
            } else {
                QuadSpec::ChebyshevLegendre(4 * (1 + nx % 5), 2 * (1 + ny % 3))
            };
            let o = ScenarioOverrides {
                nx: Some(nx),
                ny: Some(ny),
                degree: Some(degree),
                quad: Some(quad),
                dt,
                cfl: if dt.is_none() { Some(mult / 50.0) } else { None },
                t_final: Some(20.0 * mult),
                sigma_s: if kind == ScenarioKind::GaussianSource2d { sigma } else { None },
                eps_sisa: eps,
                eps_ig: eps,
                eps_pc: None,
                eps_up: eps,
            };
            scenario_catalog(kind.name(), &o).unwrap()
        })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn scenario_toml_round_trip(s in arb_scenario()) {
        let text = s.to_toml().unwrap();
        let back = Scenario::from_toml(&text).unwrap();
        prop_assert_eq!(back, s);
    }

    #[test]
    fn comparison_is_symmetric_up_to_reciprocals(
        its in prop::collection::vec((1usize..30, 1usize..30, 0.1f64..50.0, 0.1f64..50.0), 3..40),
        split in (0usize..20, 0usize..20),
    ) {
        let n = its.len();
        let phases = phases_for(n, split.0.min(n), split.1);
        let a = metrics(&its.iter().map(|t| t.0).collect::<Vec<_>>(), &its.iter().map(|t| t.2).collect::<Vec<_>>(), &vec![Phase::I; n]);
        let b = metrics(&its.iter().map(|t| t.1).collect::<Vec<_>>(), &its.iter().map(|t| t.3).collect::<Vec<_>>(), &phases);
        let ab = compare_runs(&a, &b).unwrap();
        let ba = compare_runs(&b, &a).unwrap();
        prop_assert_eq!(ab.lines.len(), ba.lines.len());
        for (x, y) in ab.lines.iter().zip(&ba.lines) {
            prop_assert_eq!(&x.scope, &y.scope);
            prop_assert!((x.sweep_ratio() * y.sweep_ratio() - 1.0).abs() <= 1e-12);
            prop_assert!((x.time_ratio() * y.time_ratio() - 1.0).abs() <= 1e-12);
            prop_assert!((x.speedup() - y.time_ratio()).abs() <= 1e-12 * y.time_ratio());
        }
    }

    #[test]
    fn metrics_csv_round_trips_numbers(ms in prop::collection::vec(1e-6f64..1e6, 1..30)) {
        let its: Vec<usize> = (0..ms.len()).map(|i| i % 7 + 1).collect();
        let m = metrics(&its, &ms, &vec![Phase::II; ms.len()]);
        let csv = metrics_csv(&m);
        for (line, r) in csv.lines().skip(1).zip(&m.steps) {
            let f: Vec<&str> = line.split(',').collect();
            prop_assert_eq!(f.len(), 12);
            prop_assert_eq!(f[5].parse::<f64>().unwrap(), r.wallclock_ms);
            prop_assert_eq!(f[1].parse::<f64>().unwrap(), r.time);
            prop_assert_eq!(f[10].parse::<f64>().unwrap(), 1.0 / 3.0);
        }
    }
}

#[test]
fn identical_runs_compare_to_one() {
    let m = metrics(&[5, 4, 3], &[2.0, 1.0, 1.0], &[Phase::I, Phase::II, Phase::III]);
    let c = compare_runs(&m, &m).unwrap();
    for l in &c.lines {
        assert_eq!((l.sweep_ratio(), l.time_ratio(), l.speedup()), (1.0, 1.0, 1.0));
    }
    assert_eq!(c.whole_run().scope, "all");
}

#[test]
fn mismatched_time_grids_are_rejected() {
    let a = metrics(&[5, 4], &[1.0, 1.0], &[Phase::I; 2]);
    let mut b = a.clone();
    b.steps[1].time = 7.0;
    assert!(compare_runs(&a, &b).is_err());
    assert!(summary_csv(&a, Some(&b)).is_err());
}

#[test]
fn emitted_files_follow_the_schema() {
    let dir = tempfile::tempdir().unwrap();
    let s = scenario_catalog(
        "two_material_1d",
        &ScenarioOverrides {
            nx: Some(11),
            ..ScenarioOverrides::default()
        },
    )
    .unwrap();
    let space = s.space().unwrap();
    let m = metrics(&[1; 100], &[1.0; 100], &[Phase::I; 100]);
    let rho = vec![0.0; space.n_dofs()];
    let paths = emit_outputs(dir.path(), &m, &rho, &space, None).unwrap();
    let metrics_text = std::fs::read_to_string(&paths.metrics).unwrap();
    assert_eq!(metrics_text.lines().next().unwrap(), METRICS_HEADER);
    assert_eq!(metrics_text.lines().count(), 101);
    let sol = std::fs::read_to_string(&paths.solution).unwrap();
    assert_eq!(sol.lines().next().unwrap(), SOLUTION_HEADER);
    assert_eq!(sol.lines().count(), 12);
    for line in sol.lines().skip(1) {
        assert_eq!(line.split(',').nth(2).unwrap().parse::<f64>().unwrap(), 0.0);
    }
    let summary = std::fs::read_to_string(&paths.summary).unwrap();
    assert!(summary.lines().any(|l| l.starts_with("all,100,")));
    assert!(paths.singular_values.is_none());
}
