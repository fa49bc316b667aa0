use nsd_core::datagen::{ScenarioConfig, StreamKind};
use nsd_core::harness::{
    benchmark_cases, preset, run_calibration, run_drift_case, run_efficiency, write_drift_csv, write_efficiency_csv,
    DriftCase, DriftSuiteConfig, PRESET_NAMES,
};

fn small(name: &str, reps: usize) -> ScenarioConfig {
    ScenarioConfig { reps, ..preset(name).unwrap() }
}

#[test]
fn every_preset_is_valid() {
    for name in PRESET_NAMES {
        let sc = preset(name).unwrap_or_else(|| panic!("missing preset {name}"));
        sc.validate().unwrap();
        assert_eq!(sc.id, *name);
    }
    assert!(preset("no-such-scenario").is_none());
}

#[test]
fn calibration_trace_shape_and_determinism() {
    let sc = small("exp1_center", 50);
    let a = run_calibration(&sc).unwrap();
    assert_eq!(a.reps(), 50);
    assert_eq!(a.frequencies.len(), sc.thresholds.len());
    assert!(a.frequencies.iter().all(|f| f.len() == 50 && f.iter().all(|x| (0.0..=1.0).contains(x))));
    assert_eq!(a, run_calibration(&sc).unwrap());

    let mut csv = Vec::new();
    a.write_csv(&mut csv).unwrap();
    assert_eq!(String::from_utf8(csv).unwrap().lines().count(), 51);
}

#[test]
fn calibration_does_not_depend_on_thread_count() {
    let sc = small("exp6_c4", 40);
    let one = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap().install(|| run_calibration(&sc));
    let many = rayon::ThreadPoolBuilder::new().num_threads(4).build().unwrap().install(|| run_calibration(&sc));
    assert_eq!(one.unwrap(), many.unwrap());
}

#[test]
fn stepped_preset_reaches_nominal_k1() {
    let trace = run_calibration(&small("exp8_border", 30)).unwrap();
    assert!(trace.records.iter().all(|r| r.k1 == 20));
}

#[test]
fn drift_case_and_csv() {
    let suite = DriftSuiteConfig { length: 6000, seeds: 2, ..Default::default() };
    let case = DriftCase { label: "t".into(), kind: StreamKind::NormalShift, dim: 2, delta: 0.7, k: 1 };
    let r = run_drift_case(&case, &suite).unwrap();
    assert_eq!(r.cards.len(), 2);
    assert!((0.0..=1.0).contains(&r.mean_detection_rate));
    let mut out = Vec::new();
    write_drift_csv(&[r], &mut out).unwrap();
    assert_eq!(String::from_utf8(out).unwrap().lines().count(), 3);
    assert_eq!(benchmark_cases().len(), 18);
}

#[test]
fn efficiency_rows() {
    let rows = run_efficiency(&[2], &[200], &[1, 2], 3).unwrap();
    assert_eq!(rows.len(), 2);
    assert!(rows.iter().all(|r| r.wall_time > 0.0));
    let mut out = Vec::new();
    write_efficiency_csv(&rows, &mut out).unwrap();
    assert_eq!(String::from_utf8(out).unwrap().lines().count(), 3);
}
