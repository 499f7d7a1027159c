use super::*;
use crate::trace::SolverTrace;

fn tiny_spec(methods: Vec<Method>, objective: ObjectiveKind) -> ExperimentSpec {
    let scenario = ScenarioConfig {
        num_sensors: 3,
        ..ScenarioConfig::default()
    };
    let mut spec = ExperimentSpec::new(scenario, methods, objective);
    spec.l_values = vec![4];
    spec.num_seeds = 1;
    spec.solvers.ga.restarts = 2;
    spec.solvers.so.restarts = 1;
    spec.solvers.so.samples = 10;
    spec.solvers.ao.grid = 8;
    spec
}

#[test]
fn quantile_interpolates() {
    let v = [1.0, 2.0, 3.0, 4.0];
    assert_eq!(quantile(&v, 0.5), 2.5);
    assert_eq!(quantile(&v, 0.25), 1.75);
    assert_eq!(quantile(&v, 0.0), 1.0);
    assert_eq!(quantile(&v, 1.0), 4.0);
    assert_eq!(quantile(&[7.0], 0.3), 7.0);
}

#[test]
fn floats_carry_twelve_significant_digits() {
    assert_eq!(fmt_float(1.0 / 3.0), "3.33333333333e-1");
    assert_eq!(fmt_float(0.0), "0.00000000000e0");
    assert_eq!(
        round_float(round_float(std::f64::consts::PI)),
        round_float(std::f64::consts::PI)
    );
}

#[test]
fn names_round_trip() {
    for m in Method::ALL {
        assert_eq!(m.name().parse::<Method>().unwrap(), m);
    }
    for o in ObjectiveKind::ALL {
        assert_eq!(o.name().parse::<ObjectiveKind>().unwrap(), o);
    }
    assert!("gd".parse::<Method>().is_err());
}

#[test]
fn cells_are_ordered_by_l_beta_seed_method() {
    let mut spec = tiny_spec(vec![Method::So, Method::Ao], ObjectiveKind::WsrEqual);
    spec.l_values = vec![9, 4];
    spec.betas = vec![0.0, 0.1];
    spec.num_seeds = 2;
    spec.base_seed = 5;
    let cells = spec.cells();
    assert_eq!(cells.len(), 16);
    assert_eq!(
        (cells[0].l, cells[0].beta, cells[0].seed, cells[0].method),
        (9, 0.0, 5, Method::So)
    );
    assert_eq!(cells[1].method, Method::Ao);
    assert_eq!(cells[2].seed, 6);
    assert_eq!(cells[4].beta, 0.1);
    assert_eq!(cells[8].l, 4);
}

#[test]
fn spec_validation() {
    let good = tiny_spec(vec![Method::Ao], ObjectiveKind::MinRate);
    assert!(good.validate().is_ok());
    let mut bad = good.clone();
    bad.methods.clear();
    assert!(bad.validate().is_err());
    let mut bad = good.clone();
    bad.methods = vec![Method::Ao, Method::Ao];
    assert!(bad.validate().is_err());
    let mut bad = good.clone();
    bad.l_values = vec![0];
    assert!(bad.validate().is_err());
    let mut bad = good.clone();
    bad.num_seeds = 0;
    assert!(bad.validate().is_err());
    let mut bad = good;
    bad.betas = vec![1.5];
    assert!(bad.validate().is_err());
}

#[test]
fn spec_parses_from_toml() {
    let text = r#"
        methods = ["ega", "shannon-so"]
        objective = "wsr-fair"
        l_values = [16, 36]
        betas = [0.0, 0.1]
        num_seeds = 3

        [scenario]
        num_sensors = 4

        [solvers.so]
        restarts = 2
    "#;
    let spec = ExperimentSpec::from_toml_str(text, Path::new(".")).unwrap();
    assert_eq!(spec.methods, vec![Method::Ega, Method::ShannonSo]);
    assert_eq!(spec.objective, ObjectiveKind::WsrFair);
    assert_eq!(spec.scenario.num_sensors, 4);
    assert_eq!(spec.solvers.so.restarts, 2);
    assert_eq!(spec.cells().len(), 2 * 2 * 3 * 2);
    assert!(ExperimentSpec::from_toml_str("methods = []\nobjective = \"min-rate\"", Path::new(".")).is_err());
    assert!(ExperimentSpec::from_toml_str("methods = [\"so\"]\nobjective = \"x\"", Path::new(".")).is_err());
}

#[test]
fn single_cell_gives_one_row_and_one_summary() {
    let spec = tiny_spec(vec![Method::Ao], ObjectiveKind::WsrEqual);
    let out = run_experiment(&spec).unwrap();
    assert_eq!(out.cells.len(), 1);
    assert_eq!(out.summary.len(), 1);
    assert_eq!(out.failed(), 0);
    let m = out.cells[0].row.metrics.as_ref().unwrap();
    assert_eq!(m.rates.len(), 3);
    assert_eq!(out.summary[0].wsr_equal.unwrap().median, m.wsr_equal);
}

#[test]
fn files_round_trip_and_summary_recomputes() {
    let mut spec = tiny_spec(vec![Method::Ega, Method::So], ObjectiveKind::MinRate);
    spec.num_seeds = 3;
    spec.betas = vec![0.0, 0.2];
    let out = run_experiment(&spec).unwrap();
    let dir = tempfile::tempdir().unwrap();
    write_experiment(dir.path(), &spec, &out).unwrap();
    let rows = read_results(&dir.path().join(RESULTS_FILE)).unwrap();
    assert_eq!(rows, out.rows());
    assert_eq!(summarize(&rows), out.summary);
    let traces = read_traces(&dir.path().join(TRACES_FILE)).unwrap();
    assert_eq!(traces.len(), out.cells.len());
    for (stored, cell) in traces.iter().zip(&out.cells) {
        let original = cell.trace.as_ref().unwrap();
        assert_eq!(stored.trace.method, original.method);
        assert_eq!(stored.trace.rows.len(), original.rows.len());
    }
    let timing = read_timing(&dir.path().join(TIMING_FILE)).unwrap();
    assert_eq!(timing_report(&timing).len(), 2);
    let again = ExperimentSpec::from_path(&dir.path().join(SPEC_FILE)).unwrap();
    assert_eq!(again, spec);
}

#[test]
fn failed_cells_are_recorded() {
    let spec = tiny_spec(vec![Method::Ao], ObjectiveKind::WsrEqual);
    let dir = tempfile::tempdir().unwrap();
    let mut row = run_experiment(&spec).unwrap().rows().remove(0);
    row.metrics = None;
    row.error = "boom".into();
    let path = dir.path().join(RESULTS_FILE);
    write_results(&path, std::slice::from_ref(&row)).unwrap();
    assert_eq!(read_results(&path).unwrap(), vec![row.clone()]);
    let s = summarize(&[row]);
    assert_eq!((s[0].count, s[0].failed), (0, 1));
    assert!(s[0].min_rate.is_none());
}

#[test]
fn convergence_ends_at_zero_and_flags_zero_final() {
    let mut t = SolverTrace::new("so", 0);
    for v in [1.0, 1.5, 1.875, 2.0] {
        t.push(v, 0.0, 0.0);
    }
    let c = convergence(&t);
    assert_eq!(c.tolerances, vec![0.5, 0.25, 0.0625, 0.0]);
    assert!(!c.absolute);
    assert!(c.tolerances.windows(2).all(|w| w[1] <= w[0]));
    assert_eq!(c.iterations_to(0.1), Some(2));

    let mut z = SolverTrace::new("ao", 0);
    z.push(-0.5, 0.0, 0.0);
    z.push(0.0, 0.0, 0.0);
    let c = convergence(&z);
    assert!(c.absolute);
    assert_eq!(c.tolerances, vec![0.5, 0.0]);
}

#[test]
fn timing_of_nothing_is_empty() {
    assert!(timing_report(&[]).is_empty());
    let rows = timing_report(&[
        TimingRecord {
            method: "ega".into(),
            iterations: 10,
            seconds: 1.0,
        },
        TimingRecord {
            method: "ega".into(),
            iterations: 30,
            seconds: 3.0,
        },
    ]);
    assert_eq!(rows.len(), 1);
    assert_eq!(rows[0].mean_seconds, 2.0);
    assert_eq!(rows[0].seconds_per_iteration, 0.1);
}

#[test]
fn csi_estimate_is_seeded() {
    let (truth, _) = Scenario::generate(&ScenarioConfig {
        num_sensors: 2,
        num_elements: 4,
        ..ScenarioConfig::default()
    })
    .unwrap();
    let a = csi_estimate(&truth, 0.1, 3).unwrap();
    let b = csi_estimate(&truth, 0.1, 3).unwrap();
    assert_eq!(a.channels.cascaded, b.channels.cascaded);
    assert_ne!(a.channels.cascaded, truth.channels.cascaded);
    assert_eq!(
        csi_estimate(&truth, 0.0, 3).unwrap().channels.cascaded,
        truth.channels.cascaded
    );
}
