use std::collections::BTreeSet;

use grasp_core::harness::{
    fmt_sig, run_experiment_a, run_experiment_b, run_trial, write_csv, Ablation, ControllerKind, ExperimentConfig,
    ScenarioSpec, CSV_HEADER,
};
use grasp_core::plant::{contact_forces, ObjectSpec, Plant, PlantParams, PlantState};
use grasp_core::sensor::{contact_detected, SensorModel, SensorParams};
use grasp_core::GraspError;
use proptest::prelude::*;

proptest! {
    #[test]
    fn contact_force_needs_penetration(
        x in -0.03..0.03f64, q1 in 0.0..0.05f64, q2 in 0.0..0.05f64,
        v in -0.1..0.1f64, q1_dot in -0.05..0.05f64, q2_dot in -0.05..0.05f64,
    ) {
        let obj = ObjectSpec::tape_roll();
        let mut s = PlantState::new(&obj, [q1, q2]);
        s.x_obj = x;
        s.v_obj = v;
        s.q1_dot = q1_dot;
        s.q2_dot = q2_dot;
        let (f1, f2) = contact_forces(&s, &obj);
        let (d1, d2) = s.penetration(&obj);
        prop_assert!(f1 >= 0.0 && f2 >= 0.0);
        if d1 <= 0.0 { prop_assert_eq!(f1, 0.0); }
        if d2 <= 0.0 { prop_assert_eq!(f2, 0.0); }
    }
}

#[test]
fn free_object_at_rest_stays_put() {
    let obj = ObjectSpec::wood();
    let mut plant = Plant::new(obj, PlantParams::default(), Default::default(), [0.04, 0.04]).unwrap();
    for _ in 0..1000 {
        plant.step([0.04, 0.04], 1e-3).unwrap();
    }
    assert_eq!(plant.state.x_obj, 0.0);
    assert_eq!((plant.state.true_f1, plant.state.true_f2), (0.0, 0.0));
}

#[test]
fn centered_grasp_does_not_move_object() {
    let mut spec = ScenarioSpec::new("centered", ObjectSpec::wood(), 0.0, ControllerKind::Force);
    spec.sensor1 = SensorParams { noise_sigma: 0.0, ..SensorParams::default() };
    spec.sensor2 = spec.sensor1;
    let r = run_trial(&spec).unwrap().result;
    assert!(r.displacement_truth < 1e-12, "{r:?}");
    assert!(r.holding_start.is_some());
}

#[test]
fn trials_are_deterministic() {
    let spec = ScenarioSpec::new("det", ObjectSpec::tape_roll(), 0.006, ControllerKind::Force);
    let a = run_trial(&spec).unwrap();
    let b = run_trial(&spec).unwrap();
    assert_eq!(a.result, b.result);
    assert_eq!(a.series, b.series);
    let mut other = spec.clone();
    other.seed = 1;
    assert_ne!(run_trial(&other).unwrap().series, a.series);
}

#[test]
fn scenario_round_trips_through_toml() {
    let mut spec = ScenarioSpec::new("rt", ObjectSpec::styrofoam(), 0.003, ControllerKind::Trajectory);
    spec.controller.f_goal = 2.5;
    spec.sensor2.gain_error = -0.01;
    let back = ScenarioSpec::from_toml_str(&spec.to_toml_string()).unwrap();
    assert_eq!(back, spec);
}

#[test]
fn overrides_reject_unknown_keys_and_wrong_types() {
    let mut spec = ScenarioSpec::default();
    spec.apply_overrides(&["controller.f_goal=3", "object.name=\"block\""]).unwrap();
    assert_eq!(spec.controller.f_goal, 3.0);
    assert_eq!(spec.object.name, "block");
    match spec.apply_overrides(&["controller.nope=1"]) {
        Err(GraspError::UnknownKey(k)) => assert_eq!(k, "controller.nope"),
        other => panic!("{other:?}"),
    }
    assert!(matches!(spec.apply_overrides(&["controller.f_goal=true"]), Err(GraspError::BadValue { .. })));
    assert!(matches!(spec.apply_overrides(&["controller.f_goal"]), Err(GraspError::BadValue { .. })));
}

#[test]
fn object_must_fit_between_fingers() {
    let mut spec = ScenarioSpec::new("wide", ObjectSpec::wood(), 0.03, ControllerKind::Force);
    spec.q_open = 0.045;
    assert!(matches!(run_trial(&spec), Err(GraspError::DoesNotFit(_))));
}

#[test]
fn ablations_change_exactly_one_field() {
    let base = toml::Value::try_from(ScenarioSpec::default().effective_controller()).unwrap();
    let base = base.as_table().unwrap();
    for ab in [Ablation::NoCompliance, Ablation::NoDeadband, Ablation::NoGravityComp] {
        let spec = ScenarioSpec { ablation: ab, ..Default::default() };
        let v = toml::Value::try_from(spec.effective_controller()).unwrap();
        let changed: Vec<_> = v.as_table().unwrap().iter().filter(|(k, v)| base.get(*k) != Some(*v)).collect();
        assert_eq!(changed.len(), 1, "{ab:?}: {changed:?}");
    }
}

#[test]
fn unloaded_sensor_rarely_triggers_detection() {
    let mut s = SensorModel::new(SensorParams::default(), 5).unwrap();
    s.estimate_bias(1000).unwrap();
    let hits = (0..100_000).filter(|_| contact_detected(s.read(0.0, 0.0).calibrated, 0.2)).count();
    assert!(hits < 10, "{hits} false detections in 1e5 samples");
}

#[test]
fn csv_round_trip_preserves_series() {
    let spec = ScenarioSpec::new("csv", ObjectSpec::tape_roll(), 0.004, ControllerKind::Force);
    let out = run_trial(&spec).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("series.csv");
    write_csv(&out.series, &path).unwrap();

    let bytes = std::fs::read(&path).unwrap();
    assert!(!bytes.contains(&b'\r'));
    let mut rd = csv::Reader::from_path(&path).unwrap();
    assert_eq!(rd.headers().unwrap().iter().collect::<Vec<_>>(), CSV_HEADER.to_vec());
    let rows: Vec<csv::StringRecord> = rd.records().map(Result::unwrap).collect();
    assert_eq!(rows.len(), out.series.len());
    for (row, s) in rows.iter().zip(&out.series) {
        let num = |i: usize| row[i].parse::<f64>().unwrap();
        for (i, v) in [s.t, s.q1, s.q2, s.f1, s.f2, s.f_int, s.f_ext, s.x_obj].into_iter().enumerate() {
            assert!((num(i) - v).abs() <= 1e-8 * v.abs().max(1e-9), "column {} {} vs {}", CSV_HEADER[i], num(i), v);
        }
        assert_eq!(&row[8], s.phase.label());
        assert_eq!(row[9], fmt_sig(s.u_int));
    }
}

#[test]
fn sig_format_is_nine_digits() {
    assert_eq!(fmt_sig(0.0), "0");
    assert_eq!(fmt_sig(1.0), "1.00000000");
    assert_eq!(fmt_sig(-0.00123456789), "-0.00123456789");
    assert_eq!(fmt_sig(9.9999999999), "10.0000000");
    assert_eq!(fmt_sig(1e20), "1.00000000e20");
}

#[test]
fn experiment_a_covers_the_grid() {
    let dir = tempfile::tempdir().unwrap();
    let (report, outcomes) = run_experiment_a(&ExperimentConfig::default()).unwrap();
    assert_eq!(report.trials.len(), 90);
    for kind in [ControllerKind::Force, ControllerKind::Trajectory] {
        assert_eq!(report.trials.iter().filter(|t| t.controller == kind).count(), 45);
    }
    let keys: BTreeSet<_> =
        report.trials.iter().map(|t| (t.object.clone(), t.controller, t.offset_mm as i64, t.repetition)).collect();
    assert_eq!(keys.len(), 90);
    assert_eq!(report.summary.len(), 6);
    report.write(dir.path(), &outcomes, false).unwrap();
    let trials = std::fs::read_to_string(dir.path().join("exp_a_trials.csv")).unwrap();
    assert_eq!(trials.lines().count(), 91);
    for name in ["exp_a_summary.csv", "exp_a_per_offset.csv", "exp_a_summary.txt"] {
        assert!(dir.path().join(name).is_file(), "{name}");
    }
}

#[test]
fn experiment_b_writes_each_variant() {
    let dir = tempfile::tempdir().unwrap();
    let (report, outcomes) = run_experiment_b(&ExperimentConfig::default()).unwrap();
    assert_eq!(outcomes.len(), 8);
    report.write(dir.path(), &outcomes).unwrap();
    let series = std::fs::read_dir(dir.path())
        .unwrap()
        .filter_map(|e| e.ok()?.file_name().into_string().ok())
        .filter(|n| n.starts_with("exp_b_") && n.ends_with(".csv") && n != "exp_b_summary.csv")
        .count();
    assert_eq!(series, 8);
}
