use std::path::Path;

use delay_horizon::reference::{oscillator_plant, six_agent_adjacency};
use delay_horizon_cli::formats::{
    load_network, load_system, network_value, read_csv, system_value, write_csv, write_json,
};
use tempfile::TempDir;

#[test]
fn system_file_round_trips_exactly() {
    let dir = TempDir::new().unwrap();
    let p = dir.path().join("sys.json");
    let sys = oscillator_plant();
    write_json(&p, &system_value(&sys, Some("benchmark"))).unwrap();
    let (back, order) = load_system(&p).unwrap();
    assert_eq!(back, sys);
    assert_eq!(order, vec![0, 1]);
}

#[test]
fn shipped_data_matches_the_built_in_models() {
    let root = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../data");
    assert_eq!(load_system(&root.join("oscillator.json")).unwrap().0, oscillator_plant());
    assert_eq!(load_network(&root.join("six_agents.json")).unwrap(), six_agent_adjacency());
}

#[test]
fn network_file_round_trips() {
    let dir = TempDir::new().unwrap();
    let p = dir.path().join("net.json");
    write_json(&p, &network_value(&six_agent_adjacency())).unwrap();
    assert_eq!(load_network(&p).unwrap(), six_agent_adjacency());
}

#[test]
fn csv_round_trips_bit_for_bit() {
    let dir = TempDir::new().unwrap();
    let p = dir.path().join("t.csv");
    let rows = vec![vec![0.1, -1.0 / 3.0], vec![1e-300, std::f64::consts::PI]];
    write_csv(&p, &["a".into(), "b".into()], rows.clone()).unwrap();
    let t = read_csv(&p).unwrap();
    assert_eq!(t.header, ["a", "b"]);
    assert_eq!(t.rows, rows);
}
