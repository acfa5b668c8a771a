use std::fs;
use std::path::{Path, PathBuf};

use resilient_dml::cli::{main_with_args, EXIT_CONFIG, EXIT_OK, EXIT_RESILIENCE};

const SMALL: &str = "\
seed = 3
n = 5
byzantine = 4
topology = complete
train_sizes = 60, 70, 80, 90
test_sizes = 20, 20, 20, 20
iterations = 40
sigma = 2.0
aggregator = coordinate-wise
attack = sign-flip
eps_geo_target = 36.2
zeta = 0.0142602495543672
privacy_iterations = 8000
estimate_iterations = 3000
inversion_trials = 2
inversion_iterations = 200
inversion_restarts = 2
";

fn write_cfg(dir: &Path, name: &str, text: &str) -> PathBuf {
    let p = dir.join(name);
    fs::write(&p, text).unwrap();
    p
}

fn rdml(args: &[&str]) -> i32 {
    main_with_args(std::iter::once("rdml").chain(args.iter().copied()))
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn line_count(p: &Path) -> usize {
    fs::read_to_string(p).unwrap().lines().count()
}

#[test]
fn run_writes_metrics_summary_and_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_cfg(dir.path(), "a.cfg", SMALL);
    let out = dir.path().join("out");
    assert_eq!(rdml(&["run", "--config", s(&cfg), "--out-dir", s(&out)]), EXIT_OK);
    assert_eq!(line_count(&out.join("metrics.csv")), 41);
    let summary = fs::read_to_string(out.join("summary.txt")).unwrap();
    assert!(summary.contains("final_test_accuracy"));
    assert!(summary.contains("final_consensus_error"));
    assert!(summary.contains("mean_grad_norm_sq_last_10pct"));
    let manifest = fs::read_to_string(out.join("manifest.txt")).unwrap();
    assert!(manifest.contains("config_sha256 = "));
}

#[test]
fn too_many_faults_exit_three() {
    let dir = tempfile::tempdir().unwrap();
    let text = "n = 14\nbyzantine = 13\nf = 7\naggregator = coordinate-wise\niterations = 5\n";
    let cfg = write_cfg(dir.path(), "f7.cfg", text);
    let out = dir.path().join("out");
    assert_eq!(rdml(&["run", "--config", s(&cfg), "--out-dir", s(&out)]), EXIT_RESILIENCE);
}

#[test]
fn missing_topology_file_exits_two() {
    let dir = tempfile::tempdir().unwrap();
    let text = SMALL.replace("topology = complete", "topology = file:does_not_exist.txt");
    let cfg = write_cfg(dir.path(), "t.cfg", &text);
    let out = dir.path().join("out");
    assert_eq!(rdml(&["run", "--config", s(&cfg), "--out-dir", s(&out)]), EXIT_CONFIG);
    assert_eq!(rdml(&["run", "--config", s(&dir.path().join("absent.cfg")), "--out-dir", s(&out)]), EXIT_CONFIG);
}

#[test]
fn topology_file_is_resolved_next_to_config() {
    let dir = tempfile::tempdir().unwrap();
    let mut edges = String::from("n: 5\nbyzantine: 4\n");
    for src in 0..5 {
        for dst in 0..5 {
            if src != dst {
                edges.push_str(&format!("0 40 {src} {dst}\n"));
            }
        }
    }
    fs::write(dir.path().join("g.txt"), edges).unwrap();
    let cfg = write_cfg(dir.path(), "g.cfg", &SMALL.replace("topology = complete", "topology = file:g.txt"));
    let out = dir.path().join("out");
    assert_eq!(rdml(&["run", "--config", s(&cfg), "--out-dir", s(&out)]), EXIT_OK);
}

#[test]
fn privacy_sweep_rows_and_range_errors() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_cfg(dir.path(), "a.cfg", SMALL);
    let out = dir.path().join("out");
    let csv = out.join("privacy_sweep.csv");
    let base = ["privacy-sweep", "--config", s(&cfg), "--out-dir", s(&out)];

    let mut args = base.to_vec();
    args.extend(["--sigma-min", "1", "--sigma-max", "5", "--steps", "9"]);
    assert_eq!(rdml(&args), EXIT_OK);
    assert_eq!(line_count(&csv), 1 + 9);
    let text = fs::read_to_string(&csv).unwrap();
    let row: Vec<f64> = text.lines().find(|l| l.starts_with("2,")).unwrap().split(',').map(|t| t.parse().unwrap()).collect();
    assert!((row[1] - 1.45).abs() < 0.03, "rho {}", row[1]);
    assert!((row[3] - 865.0).abs() < 10.0, "eps_dp {}", row[3]);

    let mut args = base.to_vec();
    args.extend(["--sigma-min", "1.5", "--sigma-max", "5", "--steps", "1"]);
    assert_eq!(rdml(&args), EXIT_OK);
    let text = fs::read_to_string(&csv).unwrap();
    assert_eq!(text.lines().count(), 2);
    assert!(text.lines().nth(1).unwrap().starts_with("1.5,"));

    let mut args = base.to_vec();
    args.extend(["--sigma-min", "3", "--sigma-max", "2"]);
    assert_eq!(rdml(&args), EXIT_CONFIG);
    let mut args = base.to_vec();
    args.extend(["--sigma-min", "0", "--sigma-max", "2"]);
    assert_eq!(rdml(&args), EXIT_CONFIG);
}

#[test]
fn estimate_emits_full_trace() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_cfg(dir.path(), "a.cfg", SMALL);
    let out = dir.path().join("out");
    assert_eq!(rdml(&["estimate", "--config", s(&cfg), "--out-dir", s(&out)]), EXIT_OK);
    assert_eq!(line_count(&out.join("estimate_trace.csv")), 1 + 3000);
}

#[test]
fn attack_emits_paired_traces() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_cfg(dir.path(), "a.cfg", SMALL);
    let out = dir.path().join("out");
    assert_eq!(rdml(&["attack", "--config", s(&cfg), "--out-dir", s(&out)]), EXIT_OK);
    let clean = out.join("attack_trace_sigma_0.csv");
    let noisy = out.join("attack_trace_sigma_2.csv");
    assert!(line_count(&clean) > 1);
    assert!(line_count(&noisy) > 1);
    assert_eq!(line_count(&out.join("attack_summary.csv")), 1 + 2 * 2);
}

#[test]
fn outputs_are_byte_identical_across_runs() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_cfg(dir.path(), "a.cfg", &SMALL.replace("estimate_iterations = 3000", "estimate_iterations = 200"));
    let cmds = ["run", "privacy-sweep", "estimate", "attack"];
    for cmd in cmds {
        let a = dir.path().join(format!("{cmd}-a"));
        let b = dir.path().join(format!("{cmd}-b"));
        assert_eq!(rdml(&[cmd, "--config", s(&cfg), "--out-dir", s(&a)]), EXIT_OK);
        assert_eq!(rdml(&[cmd, "--config", s(&cfg), "--out-dir", s(&b)]), EXIT_OK);
        let mut names: Vec<_> = fs::read_dir(&a).unwrap().map(|e| e.unwrap().file_name()).collect();
        names.sort();
        assert!(!names.is_empty());
        for name in names {
            assert_eq!(fs::read(a.join(&name)).unwrap(), fs::read(b.join(&name)).unwrap(), "{cmd}: {name:?}");
        }
    }
}

#[test]
fn seed_override_changes_run_and_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_cfg(dir.path(), "a.cfg", SMALL);
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    assert_eq!(rdml(&["run", "--config", s(&cfg), "--out-dir", s(&a)]), EXIT_OK);
    assert_eq!(rdml(&["run", "--config", s(&cfg), "--out-dir", s(&b), "--seed", "99"]), EXIT_OK);
    assert_ne!(fs::read(a.join("metrics.csv")).unwrap(), fs::read(b.join("metrics.csv")).unwrap());
    assert_ne!(fs::read(a.join("manifest.txt")).unwrap(), fs::read(b.join("manifest.txt")).unwrap());
}

#[test]
fn rvc_mode_flag_overrides_aggregator() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_cfg(dir.path(), "a.cfg", &SMALL.replace("aggregator = coordinate-wise", "aggregator = mean"));
    let out = dir.path().join("out");
    assert_eq!(rdml(&["run", "--config", s(&cfg), "--out-dir", s(&out), "--rvc-mode", "exact"]), EXIT_RESILIENCE);
    assert_eq!(rdml(&["run", "--config", s(&cfg), "--out-dir", s(&out), "--rvc-mode", "bogus"]), EXIT_CONFIG);
}

#[test]
fn rvc_debug_writes_depth_grid() {
    let dir = tempfile::tempdir().unwrap();
    let pts = dir.path().join("p.txt");
    fs::write(&pts, "0,0\n4,0\n0,4\n4,4\n2,2\n1,3\n3,1\n").unwrap();
    let out = dir.path().join("out");
    assert_eq!(
        rdml(&["rvc-debug", "--points", s(&pts), "--f", "1", "--grid", "11", "--out-dir", s(&out)]),
        EXIT_OK
    );
    assert_eq!(line_count(&out.join("depth_grid.csv")), 1 + 121);
    let sp = fs::read_to_string(out.join("safe_point.txt")).unwrap();
    let depth: usize = sp.lines().find_map(|l| l.strip_prefix("depth = ")).unwrap().parse().unwrap();
    assert!(depth >= 3);
}
