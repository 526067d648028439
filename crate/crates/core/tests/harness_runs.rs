use idc_core::harness::{
    read_trajectory_csv, run_closed_loop, trajectory_header, write_log, Scenario, TrajectoryLog,
};

const HOVER: &str = r#"
schema = 1
name = "hover"
duration = 1.0
initial_position = [0.0, 0.0, -5.0]

[reference]
type = "waypoints"
points = [
    { t = 0.0, position = [0.0, 0.0, -5.0] },
    { t = 1.0, position = [0.0, 0.0, -5.5] },
]

[[obstacles]]
shape = { type = "sphere", center = [8.0, 0.0, -5.0], radius = 0.5 }
margin = 0.5
"#;

fn hover() -> Scenario {
    Scenario::from_toml(HOVER).unwrap()
}

fn without_timing(log: &TrajectoryLog) -> Vec<Vec<f64>> {
    log.rows
        .iter()
        .map(|r| {
            let mut v = vec![r.t];
            v.extend(r.state.iter());
            v.extend(r.u.iter());
            v.extend(r.u_bar.iter());
            v.extend(r.h.iter());
            v.extend(r.h_dot.iter());
            v
        })
        .collect()
}

#[test]
fn one_row_per_control_step() {
    let s = hover();
    let log = run_closed_loop(&s).unwrap();
    assert!(log.status.is_completed(), "{}", log.status);
    assert_eq!(s.steps(), 20);
    assert_eq!(log.rows.len(), 20);
    assert_eq!(log.metrics.steps, 20);
    for (k, r) in log.rows.iter().enumerate() {
        assert_eq!(r.t, k as f64 * 0.05);
        assert_eq!(r.h.len(), 1);
    }
}

#[test]
fn runs_are_deterministic_apart_from_timing() {
    let mut s = hover();
    s.noise.sigma_v = 0.01;
    s.noise.sigma_w = 0.01;
    let a = run_closed_loop(&s).unwrap();
    let b = run_closed_loop(&s).unwrap();
    assert_eq!(without_timing(&a), without_timing(&b));
}

#[test]
fn noise_reaches_only_the_controller() {
    let quiet = run_closed_loop(&hover()).unwrap();
    let mut s = hover();
    s.noise.sigma_v = 0.02;
    s.noise.sigma_w = 0.02;
    let noisy = run_closed_loop(&s).unwrap();
    // the plant starts from the same state and first diverges through the input
    assert_eq!(quiet.rows[0].state, noisy.rows[0].state);
    assert_ne!(quiet.rows[0].u, noisy.rows[0].u);
    s.noise.seed += 1;
    let other = run_closed_loop(&s).unwrap();
    assert_ne!(noisy.rows[0].u, other.rows[0].u);
}

#[test]
fn controller_model_mass_keeps_the_plant() {
    let mut s = hover();
    s.controller_model_mass = Some(4.0);
    assert_eq!(s.plant_params().unwrap().payload_mass(), hover().plant_params().unwrap().payload_mass());
    assert_eq!(s.controller_params().unwrap().payload_mass(), 4.0);
}

#[test]
fn trajectory_csv_round_trips() {
    let log = run_closed_loop(&hover()).unwrap();
    let dir = tempfile::tempdir().unwrap();
    write_log(&log, dir.path()).unwrap();
    let (header, rows) = read_trajectory_csv(&dir.path().join("trajectory.csv")).unwrap();
    assert_eq!(header, trajectory_header(&log));
    assert_eq!(rows.len(), log.rows.len());
    let n = log.state_names.len();
    let m = log.input_names.len();
    for (row, rec) in rows.iter().zip(&log.rows) {
        assert_eq!(row[0], rec.t);
        assert_eq!(&row[1..=n], rec.state.as_slice());
        assert_eq!(&row[n + 1..=n + m], rec.u.as_slice());
        assert_eq!(row[n + m + 1], rec.h[0]);
        assert_eq!(row[n + m + 2], rec.solve_ms);
    }
    for name in ["metrics.txt", "tracking.dat", "attitude.dat", "barrier.dat"] {
        assert!(dir.path().join(name).is_file(), "{name} missing");
    }
    let metrics = std::fs::read_to_string(dir.path().join("metrics.txt")).unwrap();
    assert!(metrics.contains("status=completed"));
}

#[test]
fn zero_duration_writes_header_only() {
    let mut s = hover();
    s.duration = 0.0;
    let log = run_closed_loop(&s).unwrap();
    assert!(log.rows.is_empty());
    assert!(log.status.is_completed());
    let dir = tempfile::tempdir().unwrap();
    write_log(&log, dir.path()).unwrap();
    let text = std::fs::read_to_string(dir.path().join("trajectory.csv")).unwrap();
    assert_eq!(text.lines().count(), 1);
    assert!(text.starts_with("t,r0.x,"));
}

#[test]
fn shipped_scenarios_parse() {
    let root = std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("../../scenarios");
    let mut found = 0;
    for entry in std::fs::read_dir(root).unwrap() {
        let path = entry.unwrap().path();
        if path.extension().is_some_and(|e| e == "toml") {
            Scenario::load(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
            found += 1;
        }
    }
    assert!(found >= 3);
}
