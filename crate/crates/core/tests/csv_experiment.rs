use std::path::Path;

use nrlrg::harness::{run_expansion_experiment, ExperimentConfig, Method, Truth};

fn write_inputs(dir: &Path) {
    let mut signals = String::from("node_1,node_2,node_3,node_4\n");
    for r in 0..30 {
        let base = (r as f64 * 0.4).sin();
        let row: Vec<String> = (0..4).map(|c| format!("{}", base + 0.1 * c as f64 + 0.05 * ((r * 7 + c * 3) % 5) as f64)).collect();
        signals += &(row.join(",") + "\n");
    }
    std::fs::write(dir.join("signals.csv"), signals).unwrap();
    std::fs::write(
        dir.join("coords.csv"),
        "name,lat,lon\na,59.3,18.1\nb,57.7,11.9\nc,63.8,20.3\nd,55.6,13.0\n",
    )
    .unwrap();
}

const CONFIG: &str = r#"
seed = 3
output = "report.csv"
m0 = 2
n_sweep = [8, 16]
trials = 2
train_pool = 16

[dataset]
kind = "csv"
signals = "signals.csv"
coords = "coords.csv"
pairing = { kind = "lag", lag = 2 }

[cv]
alpha_grid = [0.01, 1.0]
beta_grid = [0.1, 1.0]
"#;

#[test]
fn csv_source_runs_the_full_sweep() {
    let dir = tempfile::tempdir().unwrap();
    write_inputs(dir.path());
    let cfg = ExperimentConfig::from_toml_str(CONFIG, dir.path()).unwrap();
    let report = run_expansion_experiment(&cfg).unwrap();

    assert_eq!(report.truth, Truth::Observed);
    // 2 trials x 2 sizes x M = 2..=4 x 3 methods
    assert_eq!(report.rows.len(), 2 * 2 * 3 * 3);
    for r in report.rows.iter().filter(|r| r.method == Method::NrLrg) {
        let lrg = report
            .rows
            .iter()
            .find(|o| o.method == Method::Lrg && (o.nodes, o.samples, o.trial) == (r.nodes, r.samples, r.trial))
            .unwrap();
        assert!((r.nmse - lrg.nmse).abs() <= 1e-6);
    }
}

#[test]
fn csv_source_needs_a_graph() {
    let dir = tempfile::tempdir().unwrap();
    write_inputs(dir.path());
    let text = CONFIG.replace("coords = \"coords.csv\"\n", "");
    let cfg = ExperimentConfig::from_toml_str(&text, dir.path()).unwrap();
    assert!(run_expansion_experiment(&cfg).is_err());
}

#[test]
fn synthetic_trials_without_resampling_share_pairs() {
    let text = r#"
output = "r.csv"
m0 = 2
n_sweep = [6]
trials = 2
train_pool = 6

[dataset]
kind = "synthetic"
nodes = 3
pairs = 12
resample_per_trial = false

[cv]
fixed = { alpha = 0.5, beta = 1.0 }
"#;
    let mut cfg = ExperimentConfig::from_toml_str(text, Path::new(".")).unwrap();
    cfg.snr_db = 300.0;
    let report = run_expansion_experiment(&cfg).unwrap();
    // Near-noiseless training makes both trials fit the same pairs.
    let per_trial = |t| report.rows.iter().filter(|r| r.trial == t).map(|r| r.nmse).collect::<Vec<_>>();
    let (a, b) = (per_trial(0), per_trial(1));
    assert!(a.iter().zip(&b).all(|(x, y)| (x - y).abs() < 1e-9));
}
