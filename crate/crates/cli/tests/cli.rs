use std::path::Path;
use std::process::{Command, Output};

use pairwise_rcd_cli::output::read_csv;

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_pairwise-rcd"))
        .args(args)
        .env_remove("PAIRWISE_RCD_OUT")
        .output()
        .expect("binary runs")
}

fn ok(args: &[&str]) -> String {
    let out = run(args);
    assert!(
        out.status.success(),
        "{args:?}: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn column(path: &Path, name: &str) -> Vec<String> {
    let (header, rows) = read_csv(path).unwrap();
    let k = header.iter().position(|h| h == name).unwrap();
    rows.into_iter().map(|r| r[k].clone()).collect()
}

const SMALL: [&str; 6] = ["--synth-n", "24", "--synth-d", "4", "--reps", "3"];

#[test]
fn zero_iterations_single_rep_gives_one_zero_row_per_eta() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    ok(&[
        "stability",
        "--reps",
        "1",
        "--iterations",
        "0",
        "--out",
        out,
    ]);
    let path = dir.path().join("stability.csv");
    assert_eq!(column(&path, "eta"), ["0.05", "0.25", "1", "4"]);
    assert!(column(&path, "delta_mean").iter().all(|d| d == "0"));
    assert!(column(&path, "t").iter().all(|t| t == "1"));
    for eta in ["0.05", "0.25", "1", "4"] {
        assert!(dir.path().join(format!("stability_eta_{eta}.svg")).exists());
    }
}

#[test]
fn artifacts_carry_provenance() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    ok(&[&["stability", "--seed", "17", "--out", out], &SMALL[..]].concat());
    let text = std::fs::read_to_string(dir.path().join("stability.csv")).unwrap();
    for line in [
        "# command=stability",
        "# seed=17",
        "# synth_n=24",
        "# loss=auc-logistic",
        "# reps=3",
    ] {
        assert!(text.contains(line), "missing {line}");
    }
    let svg = std::fs::read_to_string(dir.path().join("stability_eta_1.svg")).unwrap();
    assert!(svg.starts_with("<!--\ncommand=stability"));
}

#[test]
fn reruns_are_byte_identical() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    for cmd in ["stability", "compare", "convergence", "bounds"] {
        for dir in [&a, &b] {
            ok(&[
                &[
                    cmd,
                    "--iterations",
                    "60",
                    "--out",
                    dir.path().to_str().unwrap(),
                ],
                &SMALL[..],
            ]
            .concat());
        }
    }
    for file in [
        "stability.csv",
        "compare.csv",
        "convergence.csv",
        "bounds.csv",
    ] {
        let x = std::fs::read(a.path().join(file)).unwrap();
        assert_eq!(x, std::fs::read(b.path().join(file)).unwrap(), "{file}");
    }
}

#[test]
fn config_file_and_env_output_dir() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("exp.cfg");
    std::fs::write(&cfg, "synth_n = 20\nsynth_d = 3\nreps = 2\netas = 0.5\n").unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_pairwise-rcd"))
        .args([
            "stability",
            "--config",
            cfg.to_str().unwrap(),
            "--iterations",
            "5",
        ])
        .env("PAIRWISE_RCD_OUT", dir.path().join("env-out"))
        .output()
        .unwrap();
    assert!(out.status.success());
    let path = dir.path().join("env-out/stability.csv");
    assert_eq!(column(&path, "t").len(), 6);
    assert!(column(&path, "reps").iter().all(|r| r == "2"));
}

#[test]
fn identical_replacements_give_zero_curves() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("same.svm");
    std::fs::write(&data, "1 1:0.5 3:-1\n".repeat(12)).unwrap();
    ok(&[
        "compare",
        "--data",
        data.to_str().unwrap(),
        "--loss",
        "rank-logistic",
        "--reps",
        "4",
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    let means = column(&dir.path().join("compare.csv"), "delta_mean");
    assert_eq!(means.len(), 2 * 10);
    assert!(means.iter().all(|m| m == "0"));
}

#[test]
fn zero_step_gives_flat_risk() {
    let dir = tempfile::tempdir().unwrap();
    ok(&[
        &[
            "convergence",
            "--eta",
            "0",
            "--iterations",
            "30",
            "--out",
            dir.path().to_str().unwrap(),
        ],
        &SMALL[..],
    ]
    .concat());
    let risks = column(&dir.path().join("convergence.csv"), "mean_risk");
    assert_eq!(risks.len(), 31);
    assert!(risks.iter().all(|r| *r == risks[0]));
    assert!(
        column(&dir.path().join("convergence.csv"), "optimization_rhs")
            .iter()
            .all(String::is_empty)
    );
}

#[test]
fn measured_bounds_without_empirical_values_are_rhs_only() {
    let dir = tempfile::tempdir().unwrap();
    let measured = dir.path().join("m.txt");
    std::fs::write(
        &measured,
        "n = 50\nd = 5\nL = 2\nbeta = 0.5\nsigma = 0\nsteps = 0.1,0.1,0.1\nrisk_trace = 0.7,0.6,0.5\n",
    )
    .unwrap();
    ok(&[
        "bounds",
        "--measured",
        measured.to_str().unwrap(),
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    let path = dir.path().join("bounds.csv");
    let (_, rows) = read_csv(&path).unwrap();
    let rhs = |id: &str| -> Vec<f64> {
        rows.iter()
            .filter(|r| r[0] == id)
            .map(|r| r[2].parse().unwrap())
            .collect()
    };
    assert_eq!(rhs("stability-convex").len(), 3);
    for (a, b) in rhs("stability-convex")
        .iter()
        .zip(rhs("stability-strongly-convex"))
    {
        assert!((a - b).abs() <= 1e-12 * a.abs());
    }
    assert!(rows.iter().all(|r| r[3].is_empty() && r[4].is_empty()));
    let report = std::fs::read_to_string(dir.path().join("bounds.txt")).unwrap();
    assert!(report.contains("skipped optimization: needs start_distance_sq"));
}

#[test]
fn joint_bounds_run_holds() {
    let dir = tempfile::tempdir().unwrap();
    let stdout = ok(&[
        &[
            "bounds",
            "--schedule",
            "constant",
            "--reg-lambda",
            "0.1",
            "--iterations",
            "40",
            "--out",
            dir.path().to_str().unwrap(),
        ],
        &SMALL[..],
    ]
    .concat());
    assert!(stdout.contains("stability-convex: 40 rows"), "{stdout}");
    assert!(!stdout.contains("VIOLATED"));
    assert!(stdout.contains("strongly convex stability bound <= convex bound at every t: true"));
}

#[test]
fn parse_check_reports_counts() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("tiny.svm");
    std::fs::write(&data, "+1 2:0.25 7:1\n-1 1:1e-3\n-1 3:-2.5 # note\n").unwrap();
    let stdout = ok(&[
        "parse-check",
        "--data",
        data.to_str().unwrap(),
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    for line in [
        "examples = 3",
        "features = 7",
        "nonzeros = 4",
        "label -1 = 2",
        "label 1 = 1",
        "round trip = ok",
    ] {
        assert!(stdout.contains(line), "{line} in {stdout}");
    }
}

#[test]
fn exit_codes() {
    assert_eq!(run(&["stability", "--bogus", "1"]).status.code(), Some(1));
    assert_eq!(run(&["stability", "--reps"]).status.code(), Some(1));
    assert_eq!(
        run(&["stability", "--loss", "squared"]).status.code(),
        Some(1)
    );
    assert_eq!(run(&["nonsense"]).status.code(), Some(1));
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    assert_eq!(
        run(&["convergence", "--loss", "auc-hinge", "--out", out])
            .status
            .code(),
        Some(1)
    );
    assert_eq!(
        run(&["stability", "--data", "/no/such/file.svm", "--out", out])
            .status
            .code(),
        Some(3)
    );
    let bad = dir.path().join("bad.svm");
    std::fs::write(&bad, "1 0:1\n").unwrap();
    assert_eq!(
        run(&["parse-check", "--data", bad.to_str().unwrap(), "--out", out])
            .status
            .code(),
        Some(3)
    );
    let capped = [
        "convergence",
        "--max-iters",
        "1",
        "--iterations",
        "5",
        "--out",
        dir.path().to_str().unwrap(),
    ];
    assert_eq!(
        run(&[&capped[..], &SMALL[..]].concat()).status.code(),
        Some(2)
    );
    assert_eq!(run(&["keys"]).status.code(), Some(0));
}
