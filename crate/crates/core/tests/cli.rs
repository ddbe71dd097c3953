use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use drsl_core::cli::CSV_HEADER;

fn drsl(cache: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_drsl"))
        .args(args)
        .env("DRSL_CACHE_DIR", cache)
        .env("RUST_LOG", "error")
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn write_config(dir: &Path, name: &str, solver: &str) -> std::path::PathBuf {
    let path = dir.join(name);
    fs::write(
        &path,
        format!(
            "# small synthetic problem\n[dataset]\nn = 300\nd = 8\ndata_seed = 1\n\n[params]\ndelta = 0.1\nkappa = 1\n\n[solver]\n{solver}\nmax_passes = 4\n"
        ),
    )
    .unwrap();
    path
}

/// Drops the trailing wall-clock column.
fn without_wall(csv: &str) -> Vec<String> {
    csv.lines()
        .skip(1)
        .map(|l| l.rsplit_once(',').unwrap().0.to_string())
        .collect()
}

#[test]
fn datagen_is_deterministic() {
    let tmp = tempfile::tempdir().unwrap();
    let (a, b) = (tmp.path().join("a.txt"), tmp.path().join("b.txt"));
    for p in [&a, &b] {
        let o = drsl(
            tmp.path(),
            &[
                "datagen",
                "--n",
                "50",
                "--d",
                "7",
                "--seed",
                "3",
                "--out",
                p.to_str().unwrap(),
            ],
        );
        assert!(o.status.success());
        assert!(stdout(&o).starts_with("50 7 "));
    }
    let text = fs::read_to_string(&a).unwrap();
    assert_eq!(text, fs::read_to_string(&b).unwrap());
    assert!(text.starts_with("50 7 "));
}

#[test]
fn run_writes_a_reproducible_trace() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(
        tmp.path(),
        "sevr.cfg",
        "algo = sevr\nseed = 2\neta = 0.5\nk0 = 4\nepochs = 3\nbatch = 16",
    );
    let o1 = drsl(tmp.path(), &["run", cfg.to_str().unwrap()]);
    assert!(o1.status.success(), "{}", String::from_utf8_lossy(&o1.stderr));
    let o2 = drsl(tmp.path(), &["run", cfg.to_str().unwrap()]);
    let (a, b) = (stdout(&o1), stdout(&o2));
    assert_eq!(a.lines().next(), Some(CSV_HEADER));
    assert_eq!(without_wall(&a), without_wall(&b));
    let passes: Vec<f64> = a
        .lines()
        .skip(1)
        .map(|l| l.split(',').nth(3).unwrap().parse().unwrap())
        .collect();
    assert!(passes.len() >= 2);
    assert!(passes.windows(2).all(|w| w[1] > w[0]));

    // overrides change the run, and a trace file gets the same contents
    let trace = tmp.path().join("t.csv");
    let iterate = tmp.path().join("beta.txt");
    let o3 = drsl(
        tmp.path(),
        &[
            "run",
            cfg.to_str().unwrap(),
            "--seed",
            "5",
            "--trace",
            trace.to_str().unwrap(),
            "--output.iterate",
            iterate.to_str().unwrap(),
        ],
    );
    assert!(o3.status.success(), "{}", String::from_utf8_lossy(&o3.stderr));
    let written = fs::read_to_string(&trace).unwrap();
    assert_ne!(without_wall(&written), without_wall(&a));
    assert_eq!(fs::read_to_string(&iterate).unwrap().lines().count(), 8);
}

#[test]
fn reference_is_cached() {
    let tmp = tempfile::tempdir().unwrap();
    let data = tmp.path().join("d.txt");
    assert!(drsl(
        tmp.path(),
        &["datagen", "--n", "80", "--d", "5", "--out", data.to_str().unwrap()]
    )
    .status
    .success());
    let args = ["reference", "--data", data.to_str().unwrap(), "--delta", "0.2"];
    let first = stdout(&drsl(tmp.path(), &args));
    let second = stdout(&drsl(tmp.path(), &args));
    assert!(!first.starts_with("cached"));
    assert!(second.starts_with("cached\n"));
    let tol = |s: &str| s.lines().find(|l| l.starts_with("tolerance ")).unwrap().to_string();
    assert_eq!(tol(&first), tol(&second));
    assert!(first.contains("converged true"));
}

#[test]
fn compare_merges_traces() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path().join("cfgs");
    fs::create_dir(&dir).unwrap();
    write_config(
        &dir,
        "a.cfg",
        "algo = spprr\nseed = 0\neta = 0.01\nepochs = 2\nfixed_point_m = 2",
    );
    write_config(
        &dir,
        "b.cfg",
        "algo = sgda\nseed = 0\neta = 0.2\niters = 100000\nbatch = 8",
    );
    let out = tmp.path().join("merged.csv");
    let summary = tmp.path().join("summary.csv");
    let o = drsl(
        tmp.path(),
        &[
            "compare",
            dir.to_str().unwrap(),
            "--out",
            out.to_str().unwrap(),
            "--summary",
            summary.to_str().unwrap(),
        ],
    );
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let merged = fs::read_to_string(&out).unwrap();
    assert!(merged.lines().skip(1).any(|l| l.starts_with("spprr,")));
    assert!(merged.lines().skip(1).any(|l| l.starts_with("sgda,")));
    let s = fs::read_to_string(&summary).unwrap();
    assert_eq!(s.lines().count(), 3);
    assert_eq!(stdout(&o), s);
}

#[test]
fn eval_robust_reports_each_radius() {
    let tmp = tempfile::tempdir().unwrap();
    let data = tmp.path().join("d.txt");
    assert!(drsl(
        tmp.path(),
        &["datagen", "--n", "40", "--d", "3", "--out", data.to_str().unwrap()]
    )
    .status
    .success());
    let beta = tmp.path().join("beta.txt");
    fs::write(&beta, "0.5\n-0.25\n0.1\n").unwrap();
    let o = drsl(
        tmp.path(),
        &[
            "eval-robust",
            "--data",
            data.to_str().unwrap(),
            "--beta",
            beta.to_str().unwrap(),
        ],
    );
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let text = stdout(&o);
    let rows: Vec<f64> = text
        .lines()
        .skip(1)
        .take(4)
        .map(|l| l.split(',').nth(1).unwrap().parse().unwrap())
        .collect();
    assert_eq!(rows.len(), 4);
    assert!(rows.windows(2).all(|w| w[1] >= w[0]));
    assert!(text.contains("error_rate ") && text.contains("mean_loss "));
}

#[test]
fn exit_codes() {
    let tmp = tempfile::tempdir().unwrap();
    let bad = tmp.path().join("bad.cfg");
    fs::write(&bad, "[solver]\nalgo = sevr\nbogus = 1\n").unwrap();
    assert_eq!(drsl(tmp.path(), &["run", bad.to_str().unwrap()]).status.code(), Some(1));
    assert_eq!(drsl(tmp.path(), &["frobnicate"]).status.code(), Some(1));
    assert_eq!(drsl(tmp.path(), &["--help"]).status.code(), Some(0));

    let missing = tmp.path().join("nope.cfg");
    assert_eq!(
        drsl(tmp.path(), &["run", missing.to_str().unwrap()]).status.code(),
        Some(3)
    );
    let no_data = ["reference", "--data", "/nonexistent/data.txt"];
    assert_eq!(drsl(tmp.path(), &no_data).status.code(), Some(3));

    let cfg = write_config(tmp.path(), "gda.cfg", "algo = gda\nseed = 0\neta = 1e14\niters = 50");
    let o = drsl(tmp.path(), &["run", cfg.to_str().unwrap(), "--gamma_init", "zero"]);
    assert_eq!(o.status.code(), Some(2), "{}", String::from_utf8_lossy(&o.stderr));
}
