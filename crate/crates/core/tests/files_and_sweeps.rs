use netinf::dynsim::ModelKind;
use netinf::harness::{parse_results, results_csv, run_sweep, summarize, EndTime, ExperimentConfig, GroupKey, Method};
use netinf::network::{barabasi_albert, erdos_renyi_with_clique, DirectedNetwork};
use proptest::prelude::*;

proptest! {
    #[test]
    fn network_json_round_trips(n in 1usize..12, seed in any::<u64>()) {
        let g = barabasi_albert(n.max(3), 2, seed).unwrap();
        prop_assert_eq!(DirectedNetwork::from_json(&g.to_json()).unwrap(), g);
    }
}

#[test]
fn network_files_on_disk() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("g.json");
    let g = erdos_renyi_with_clique(12, 0.3, 5, 4).unwrap();
    g.save(&path).unwrap();
    assert_eq!(DirectedNetwork::load(&path).unwrap(), g);
    std::fs::write(&path, r#"{"n":2,"edges":[[0,5]]}"#).unwrap();
    assert!(DirectedNetwork::load(&path).is_err());
}

fn small_sweep() -> ExperimentConfig {
    let mut cfg = ExperimentConfig::new(ModelKind::MassSpring, Method::Gc);
    cfg.trials = 2;
    cfg.master_seed = 17;
    cfg.sweep.n = vec![3, 4];
    cfg.sweep.coupling = vec![1.0, 3.0];
    cfg.sweep.endtime = vec![EndTime::Seconds(10.0)];
    cfg
}

#[test]
fn sweep_file_independent_of_threads() {
    let cfg = small_sweep();
    let mut outputs = Vec::new();
    for threads in [1, 2, 8] {
        let mut buf = Vec::new();
        run_sweep(&cfg, threads, Some(&mut buf)).unwrap();
        outputs.push(buf);
    }
    assert!(outputs.windows(2).all(|w| w[0] == w[1]));
}

#[test]
fn adding_cells_keeps_existing_rows() {
    let cfg = small_sweep();
    let base = run_sweep(&cfg, 1, None).unwrap();
    let mut wider = cfg.clone();
    wider.sweep.coupling.push(5.0);
    let more = run_sweep(&wider, 1, None).unwrap();
    for rec in &base.records {
        assert!(more.records.contains(rec));
    }
}

#[test]
fn results_survive_parse_and_summary() {
    let cfg = small_sweep();
    let report = run_sweep(&cfg, 1, None).unwrap();
    let text = results_csv(&report.records);
    let parsed = parse_results(&text).unwrap();
    assert_eq!(results_csv(&parsed), text);
    let table = summarize(&parsed, &[GroupKey::N, GroupKey::Coupling]).unwrap();
    assert_eq!(table.rows.len(), 4);
    assert!(table.rows.iter().all(|r| r.count + r.failed == 2));
}

#[test]
fn config_toml_round_trips() {
    let cfg = small_sweep();
    let back = ExperimentConfig::from_toml(&cfg.to_toml()).unwrap();
    assert_eq!(back, cfg);
    assert!(ExperimentConfig::from_toml("model = \"kuramoto\"\nmethod = \"pci\"\nbogus = 1\n").is_err());
}
