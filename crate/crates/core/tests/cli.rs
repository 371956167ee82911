use std::fs;
use std::path::Path;
use std::process::Command as Process;

use fbaqc::cli::{execute, parse_config_with, Command, ControllerKind, Parsed, RunConfig};
use fbaqc::experiments::{fit_power_law, DeltaPSummary, EnsembleSummary};
use fbaqc::io::{fig2_csv, fig3_csv, fig4_csv, read_fig3, FIG3_FILE, MANIFEST_FILE};
use fbaqc::Error;

fn config(args: &[&str], out: &Path) -> RunConfig {
    let mut argv = vec!["fbaqc"];
    argv.extend_from_slice(args);
    argv.extend_from_slice(&["--out-dir", out.to_str().unwrap()]);
    match parse_config_with(argv, None).unwrap() {
        Parsed::Config(c) => *c,
        Parsed::Info(text) => panic!("unexpected info output: {text}"),
    }
}

fn usage_error(args: &[&str]) -> String {
    let mut argv = vec!["fbaqc"];
    argv.extend_from_slice(args);
    match parse_config_with(argv, None) {
        Err(e @ Error::Usage(_)) => e.to_string(),
        other => panic!("expected usage error for {args:?}, got {other:?}"),
    }
}

fn manifest(dir: &Path) -> serde_json::Value {
    serde_json::from_str(&fs::read_to_string(dir.join(MANIFEST_FILE)).unwrap()).unwrap()
}

#[test]
fn happy_path_run_config() {
    let dir = tempfile::tempdir().unwrap();
    let c = config(
        &[
            "run",
            "--n",
            "2",
            "--seed",
            "7",
            "--controller",
            "feedback",
            "--k",
            "50",
        ],
        dir.path(),
    );
    assert_eq!(c.command, Command::Run);
    assert_eq!((c.n, c.seed, c.k), (2, 7, Some(50.0)));
    assert_eq!(c.controller, ControllerKind::Feedback);
    assert_eq!(c.z, 10.0);
    assert_eq!(c.target_p, 0.9);
}

#[test]
fn invalid_combinations_are_rejected_by_field() {
    assert!(usage_error(&["run", "--controller", "linear", "--k", "5"]).contains("k"));
    usage_error(&["run", "--controller", "linear"]);
    usage_error(&["run", "--k", "1", "--t-total", "2"]);
    usage_error(&["run", "--n", "2", "--epsilon", "1,2"]);
    usage_error(&["run", "--seed", "1", "--epsilon", "1,2,3"]);
    usage_error(&["scaling", "--n-values", "3,2,4"]);
    usage_error(&["scaling", "--seed", "4"]);
    usage_error(&["deltap", "--target-p", "1.5"]);
    usage_error(&["run", "--bogus"]);
    usage_error(&["run", "--n", "two"]);
}

#[test]
fn flags_override_file_override_env_override_defaults() {
    let dir = tempfile::tempdir().unwrap();
    let file = dir.path().join("settings.toml");
    fs::write(&file, "samples = 100\nmaster-seed = 3\nout-dir = \"from-file\"\n").unwrap();
    let argv = ["fbaqc", "deltap", "--config", file.to_str().unwrap(), "--samples", "10"];
    let Parsed::Config(c) = parse_config_with(argv, Some("from-env".into())).unwrap() else {
        panic!("expected a config")
    };
    assert_eq!(c.samples, 10);
    assert_eq!(c.master_seed, 3);
    assert_eq!(c.out_dir, Path::new("from-file"));
    let src = |key: &str| serde_json::to_value(c.provenance[key].source).unwrap();
    assert_eq!(src("samples"), "flag");
    assert_eq!(src("master-seed"), "file");
    assert_eq!(src("target-p"), "default");

    let Parsed::Config(c) = parse_config_with(["fbaqc", "deltap"], Some("from-env".into())).unwrap() else {
        panic!("expected a config")
    };
    assert_eq!(c.out_dir, Path::new("from-env"));
    assert_eq!(
        serde_json::to_value(c.provenance["out-dir"].source).unwrap(),
        "environment"
    );

    fs::write(&file, "sampels = 3\n").unwrap();
    let argv = ["fbaqc", "deltap", "--config", file.to_str().unwrap()];
    assert!(matches!(parse_config_with(argv, None), Err(Error::Usage(_))));
}

#[test]
fn figure_commands_are_byte_reproducible() {
    let runs = [
        vec!["sweep-t", "--seed", "3", "--t-points", "7"],
        vec!["deltap", "--samples", "4", "--k-points", "5", "--master-seed", "9"],
        vec!["scaling", "--n-values", "2,3,4", "--samples", "3", "--master-seed", "2"],
    ];
    for args in runs {
        let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
        let ra = execute(&config(&args, a.path())).unwrap();
        let rb = execute(&config(&args, b.path())).unwrap();
        assert_eq!(ra.outputs.len(), rb.outputs.len());
        for (pa, pb) in ra.outputs.iter().zip(&rb.outputs) {
            if pa.extension().is_some_and(|e| e == "csv") {
                assert_eq!(
                    fs::read(pa).unwrap(),
                    fs::read(pb).unwrap(),
                    "{args:?}: {}",
                    pa.display()
                );
            }
        }
    }
}

#[test]
fn scaling_table_round_trips_through_the_fit() {
    let dir = tempfile::tempdir().unwrap();
    let c = config(
        &["scaling", "--n-values", "2,3,4", "--samples", "3", "--master-seed", "5"],
        dir.path(),
    );
    execute(&c).unwrap();
    let m = manifest(dir.path());
    let rows = read_fig3(&dir.path().join(FIG3_FILE)).unwrap();
    for fit in m["results"]["fits"].as_array().unwrap() {
        let name = fit["controller"].as_str().unwrap();
        let points: Vec<(f64, f64)> = rows
            .iter()
            .filter(|r| r.controller == name)
            .map(|r| (r.n as f64, r.mean_t))
            .collect();
        let refit = fit_power_law(&points).unwrap();
        assert_eq!(refit.exponent, fit["fit"]["exponent"].as_f64().unwrap());
    }
}

#[test]
fn manifest_records_every_setting_with_its_origin() {
    let dir = tempfile::tempdir().unwrap();
    let c = config(
        &["profile", "--n", "2", "--seed", "1", "--resolution", "64", "--plots"],
        dir.path(),
    );
    let report = execute(&c).unwrap();
    let m = manifest(dir.path());
    assert_eq!(m["command"], "profile");
    let cfg = m["config"].as_object().unwrap();
    assert_eq!(cfg["resolution"]["source"], "flag");
    assert_eq!(cfg["samples"]["source"], "default");
    assert!(cfg
        .values()
        .all(|e| e.get("value").is_some() && e.get("source").is_some()));
    assert!(report.outputs.iter().any(|p| p.ends_with("profile.svg")));
    assert!(report.outputs.last().unwrap().ends_with(MANIFEST_FILE));
}

#[test]
fn empty_results_give_header_only_tables() {
    assert_eq!(fig2_csv(&[]), b"controller,T,P\n");
    let empty = EnsembleSummary {
        cells: vec![],
        fits: vec![],
    };
    assert_eq!(fig3_csv(&empty), b"n,controller,meanT,stdT,count\n");
    let empty = DeltaPSummary {
        rows: vec![],
        records: vec![],
    };
    assert_eq!(fig4_csv(&empty), b"k,mean_dP,std_dP,count\n");
}

#[test]
fn replayed_profile_drives_a_run() {
    let dir = tempfile::tempdir().unwrap();
    execute(&config(
        &["profile", "--n", "2", "--seed", "4", "--resolution", "1024"],
        dir.path(),
    ))
    .unwrap();
    let profile = dir.path().join("profile.csv");
    let live = tempfile::tempdir().unwrap();
    let replay = tempfile::tempdir().unwrap();
    execute(&config(&["run", "--n", "2", "--seed", "4", "--k", "0.2"], live.path())).unwrap();
    let args = [
        "run",
        "--n",
        "2",
        "--seed",
        "4",
        "--k",
        "0.2",
        "--curvature-source",
        "replay",
        "--replay-path",
        profile.to_str().unwrap(),
    ];
    execute(&config(&args, replay.path())).unwrap();
    let p = |d: &Path| manifest(d)["results"]["P"].as_f64().unwrap();
    assert!((p(live.path()) - p(replay.path())).abs() <= 1e-4);
}

#[test]
fn binary_exit_codes() {
    let bin = env!("CARGO_BIN_EXE_fbaqc");
    let dir = tempfile::tempdir().unwrap();
    let status = |args: &[&str]| {
        Process::new(bin)
            .args(args)
            .env_remove("FBAQC_OUT_DIR")
            .output()
            .unwrap()
    };

    let ok = status(&[
        "run",
        "--n",
        "1",
        "--epsilon",
        "0.5",
        "--t-total",
        "3",
        "--controller",
        "linear",
        "--out-dir",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(ok.status.code(), Some(0), "{}", String::from_utf8_lossy(&ok.stderr));
    assert!(dir.path().join("trajectory.csv").exists());

    assert_eq!(
        status(&["run", "--controller", "linear", "--k", "5"]).status.code(),
        Some(2)
    );
    assert_eq!(status(&["--help"]).status.code(), Some(0));

    // couplings with a two-fold degenerate problem ground state
    let degenerate = status(&[
        "run",
        "--n",
        "2",
        "--epsilon",
        "1,1,0",
        "--k",
        "1",
        "--out-dir",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(
        degenerate.status.code(),
        Some(3),
        "{}",
        String::from_utf8_lossy(&degenerate.stderr)
    );

    let bad = dir.path().join("bad.csv");
    fs::write(&bad, "0,1\n1,2\n").unwrap();
    let replay = status(&[
        "run",
        "--k",
        "1",
        "--curvature-source",
        "replay",
        "--replay-path",
        bad.to_str().unwrap(),
        "--out-dir",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(replay.status.code(), Some(4));
    assert!(String::from_utf8_lossy(&replay.stderr).contains(":1:"));

    let blocker = dir.path().join("file");
    fs::write(&blocker, "x").unwrap();
    let unwritable = status(&[
        "profile",
        "--resolution",
        "16",
        "--out-dir",
        blocker.join("sub").to_str().unwrap(),
    ]);
    assert_eq!(unwritable.status.code(), Some(4));
}
