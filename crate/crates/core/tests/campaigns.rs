use coopsim_core::dbpc::SurvivalRun;
use coopsim_core::experiments::{
    dbpc_survival_sweep, invasion_probability_sweep, invasion_time_experiment, validate_graph,
    wavefront_experiment, write_csv, ExperimentConfig, GraphMode, HostSpace,
};

fn csv_of<R: coopsim_core::experiments::CsvRow>(rows: &[R]) -> String {
    let mut buf = Vec::new();
    write_csv(&mut buf, rows).unwrap();
    String::from_utf8(buf).unwrap()
}

fn small(space: HostSpace) -> ExperimentConfig {
    ExperimentConfig {
        a_grid: vec![1.0, 2.5],
        replicates: 24,
        bound_replicates: 1_000,
        base_seed: Some(4),
        ..ExperimentConfig::new(space, 2_000.0, 0.6)
    }
}

#[test]
fn sweeps_do_not_depend_on_thread_count() {
    for space in [
        HostSpace::Cube { dimension: 2 },
        HostSpace::Sphere2,
        HostSpace::Complete,
    ] {
        let one = ExperimentConfig {
            threads: Some(1),
            ..small(space)
        };
        let three = ExperimentConfig {
            threads: Some(3),
            ..small(space)
        };
        let a = csv_of(&invasion_probability_sweep(&one).unwrap());
        let b = csv_of(&invasion_probability_sweep(&three).unwrap());
        assert_eq!(a, b, "{space:?}");
        assert_eq!(a.lines().count(), 3);
    }
}

#[test]
fn quenched_mode_reuses_one_graph() {
    let config = ExperimentConfig {
        graph_mode: GraphMode::SharedAcrossReplicates,
        ..small(HostSpace::Cube { dimension: 1 })
    };
    let rows = invasion_probability_sweep(&config).unwrap();
    for r in &rows {
        assert!((0.0..=1.0).contains(&r.fraction));
        assert!(r.pi_lower <= r.pi_upper + 0.1);
    }
}

#[test]
fn time_and_wavefront_campaigns() {
    let config = ExperimentConfig {
        a_grid: vec![3.0],
        replicates: 40,
        successes: Some(5),
        ..small(HostSpace::Cube { dimension: 2 })
    };
    let study = invasion_time_experiment(&config).unwrap();
    assert_eq!(study.rows.len(), 5);
    assert!(study.attempted >= 5);
    for r in &study.rows {
        assert!(r.t >= r.t_lower);
        assert!(r.t_minus_initial.is_none_or(|m| m <= r.t));
    }
    let traces = wavefront_experiment(&config).unwrap();
    assert_eq!(traces.len(), 5);
    for t in &traces {
        assert_eq!(t.distances[0], 0);
        assert!(t.distances.windows(2).all(|w| w[0] <= w[1]));
    }
}

#[test]
fn dbpc_sweep_rows() {
    let rows = dbpc_survival_sweep(&[0.5, 1.5, 2.5], &SurvivalRun::new(1_000, 2_000), 8).unwrap();
    assert_eq!(rows.len(), 3);
    assert!(rows.windows(2).all(|w| w[0].pi_hat <= w[1].pi_hat + 0.05));
    assert!(dbpc_survival_sweep(&[0.0], &SurvivalRun::new(1_000, 10), 8).is_err());
    let text = csv_of(&rows);
    assert!(text.starts_with("a,z0,threshold,replicates,survived,died,undecided,pi_hat,stderr\n"));
}

#[test]
fn validation_on_a_small_line() {
    let config = ExperimentConfig::new(HostSpace::Cube { dimension: 1 }, 5_000.0, 0.7);
    let report = validate_graph(&config, 10).unwrap();
    assert_eq!(report.rows.len(), 10);
    assert!(report.connectivity_rate > 0.5);
    assert!(validate_graph(&ExperimentConfig::new(HostSpace::Complete, 100.0, 0.5), 3).is_err());
}
