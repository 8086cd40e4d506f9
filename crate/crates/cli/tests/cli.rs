//! End-to-end runs of the `gp-autotune` binary.

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_gp-autotune"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn path(p: &Path) -> &str {
    p.to_str().expect("utf-8 temp path")
}

/// 6-parameter dataset on a 2^6 grid where only `p2` drives the response,
/// with `p4` perturbing it slightly.
fn six_param_csv(dir: &Path) -> std::path::PathBuf {
    let mut text = String::from("p1,p2,p3,p4,p5,p6,latency\n");
    for i in 0..64u32 {
        let bits: Vec<u32> = (0..6).map(|b| (i >> b) & 1).collect();
        let y = 10.0 + 5.0 * bits[1] as f64 + 0.5 * bits[3] as f64;
        let row: Vec<String> = bits.iter().map(u32::to_string).collect();
        text.push_str(&format!("{},{y}\n", row.join(",")));
    }
    let p = dir.join("six.csv");
    fs::write(&p, text).unwrap();
    p
}

/// Complete 4x3 dataset with replicates and a categorical column.
fn small_dataset(dir: &Path) -> std::path::PathBuf {
    let mut text = String::from("threads,mode,latency\n");
    for (i, t) in [1, 2, 4, 8].iter().enumerate() {
        for (j, m) in ["a", "b", "c"].iter().enumerate() {
            let y = 20.0 - 3.0 * i as f64 + (j as f64 - 1.0).powi(2);
            text.push_str(&format!("{t},{m},{y}\n{t},{m},{}\n", y + 0.2));
        }
    }
    let p = dir.join("small.csv");
    fs::write(&p, text).unwrap();
    p
}

#[test]
fn same_seed_gives_identical_traces_and_aggregation_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    let common = [
        "tune",
        "--function",
        "branin",
        "--grid",
        "15,15",
        "--budget",
        "25",
        "--algorithms",
        "bo4co,random,hill",
        "--replications",
        "3",
        "--seed",
        "5",
    ];
    let oa = bin()
        .args(common)
        .args(["--out", path(&a)])
        .output()
        .unwrap();
    let ob = bin()
        .args(common)
        .args(["--out", path(&b), "--jobs", "2"])
        .output()
        .unwrap();
    assert!(oa.status.success() && ob.status.success(), "{oa:?}");

    for method in ["bo4co", "random", "hill"] {
        for rep in 0..3 {
            let name = format!("traces/{method}_rep{rep}.csv");
            let ta = fs::read(a.join(&name)).unwrap();
            assert_eq!(ta, fs::read(b.join(&name)).unwrap(), "{name}");
            assert!(String::from_utf8(ta)
                .unwrap()
                .contains(&format!("{method},{}", 5 + rep)));
        }
    }
    assert_eq!(
        fs::read(a.join("aggregate.csv")).unwrap(),
        fs::read(b.join("aggregate.csv")).unwrap()
    );

    let original = fs::read(a.join("aggregate.csv")).unwrap();
    fs::remove_file(a.join("aggregate.csv")).unwrap();
    assert!(run(&["aggregate", "--out", path(&a)]).status.success());
    assert_eq!(fs::read(a.join("aggregate.csv")).unwrap(), original);
}

#[test]
fn full_enumeration_finds_the_dataset_minimum() {
    let dir = tempfile::tempdir().unwrap();
    let data = small_dataset(dir.path());
    let out = dir.path().join("out");
    let o = run(&[
        "tune",
        "--dataset",
        path(&data),
        "--algorithms",
        "random",
        "--budget",
        "12",
        "--out",
        path(&out),
    ]);
    assert!(o.status.success(), "{o:?}");
    let summary: serde_json::Value =
        serde_json::from_slice(&fs::read(out.join("summary.json")).unwrap()).unwrap();
    // best configuration is threads=8, mode=b with mean latency 11.1
    assert!((summary["optimum"].as_f64().unwrap() - 11.1).abs() < 1e-12);
    let run0 = &summary["runs"][0];
    assert_eq!(run0["best_value"].as_f64(), summary["optimum"].as_f64());
    assert_eq!(run0["best_point"]["threads"], "8");
    assert_eq!(run0["best_point"]["mode"], "b");
    assert_eq!(summary["optimum_kind"], "dataset");
}

#[test]
fn configuration_errors_exit_with_2() {
    let dir = tempfile::tempdir().unwrap();
    let empty = dir.path().join("empty.csv");
    fs::write(&empty, "a,b,latency\n").unwrap();
    for args in [
        vec!["tune", "--function", "nope"],
        vec!["tune"],
        vec![
            "tune",
            "--function",
            "branin",
            "--grid",
            "5,5",
            "--budget",
            "26",
        ],
        vec!["tune", "--function", "branin", "--kappa", "adaptive:2,2"],
        vec!["tune", "--function", "branin", "--replications", "0"],
        vec!["screen", "--dataset", path(&empty)],
        vec!["screen", "--dataset", "/does/not/exist.csv"],
    ] {
        let o = run(&args);
        assert_eq!(o.status.code(), Some(2), "{args:?}: {o:?}");
    }
}

#[cfg(unix)]
#[test]
fn measurement_failures_exit_with_3() {
    let dir = tempfile::tempdir().unwrap();
    let space = dir.path().join("space.toml");
    fs::write(
        &space,
        "[[param]]\nname = \"n\"\nkind = \"integer-grid\"\noptions = [1, 2, 3, 4]\n",
    )
    .unwrap();
    let missing = run(&[
        "tune",
        "--space",
        path(&space),
        "--command",
        "/no/such/program",
        "--budget",
        "3",
    ]);
    assert_eq!(missing.status.code(), Some(3), "{missing:?}");

    let failing = run(&[
        "tune",
        "--space",
        path(&space),
        "--command",
        "false",
        "--budget",
        "3",
    ]);
    assert_eq!(failing.status.code(), Some(3), "{failing:?}");
}

#[cfg(unix)]
#[test]
fn command_source_and_config_file() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(
        dir.path().join("space.toml"),
        "[[param]]\nname = \"n\"\nkind = \"integer-grid\"\noptions = [1, 2, 3, 4, 5, 6]\n",
    )
    .unwrap();
    // response (n - 4)^2 from the `n=<value>` argument
    fs::write(
        dir.path().join("measure.sh"),
        "#!/bin/sh\nn=${1#n=}\necho $(( (n - 4) * (n - 4) ))\n",
    )
    .unwrap();
    fs::write(
        dir.path().join("exp.toml"),
        "seed = 3\nalgorithms = [\"bo4co\"]\nout = \"result\"\n\n[source]\nspace = \"space.toml\"\n\
         command = [\"sh\", \"measure.sh\"]\n\n[budget]\nmax_evals = 6\ninitial = 2\n",
    )
    .unwrap();
    let o = bin()
        .current_dir(dir.path())
        .args(["tune", "--config", "exp.toml"])
        .output()
        .unwrap();
    assert!(o.status.success(), "{o:?}");
    let summary: serde_json::Value =
        serde_json::from_slice(&fs::read(dir.path().join("result/summary.json")).unwrap()).unwrap();
    assert_eq!(summary["optimum_kind"], "observed");
    assert_eq!(summary["runs"][0]["best_value"].as_f64(), Some(0.0));
    assert_eq!(summary["runs"][0]["best_point"]["n"], "4");
}

#[test]
fn screen_ranks_all_small_subsets_and_finds_the_driver() {
    let dir = tempfile::tempdir().unwrap();
    let data = six_param_csv(dir.path());
    let out = dir.path().join("screen");
    let o = run(&[
        "screen",
        "--dataset",
        path(&data),
        "--max-subset",
        "3",
        "--out",
        path(&out),
    ]);
    assert!(o.status.success(), "{o:?}");
    let text = stdout(&o);
    assert!(
        text.starts_with("41 subsets of at most 3 parameters"),
        "{text}"
    );
    let merit = fs::read_to_string(out.join("merit.csv")).unwrap();
    assert_eq!(merit.lines().count(), 1 + 41);
    let top: Vec<&str> = merit.lines().nth(1).unwrap().split(',').collect();
    assert_eq!(top[1], "p2");
    // no replicates: header only
    assert_eq!(
        fs::read_to_string(out.join("snr.csv"))
            .unwrap()
            .lines()
            .count(),
        1
    );
}

#[test]
fn screen_reports_snr_for_replicated_configurations() {
    let dir = tempfile::tempdir().unwrap();
    let data = small_dataset(dir.path());
    let out = dir.path().join("screen");
    let o = run(&["screen", "--dataset", path(&data), "--out", path(&out)]);
    assert!(o.status.success(), "{o:?}");
    let snr = fs::read_to_string(out.join("snr.csv")).unwrap();
    assert_eq!(snr.lines().count(), 1 + 12);
}

#[test]
fn design_only_budget_gives_an_empty_overhead_report() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("oh");
    let o = run(&[
        "overhead",
        "--function",
        "branin",
        "--grid",
        "11,11",
        "--budget",
        "9",
        "--init-design",
        "9",
        "--out",
        path(&out),
    ]);
    assert!(o.status.success(), "{o:?}");
    assert!(stdout(&o).contains("no search iterations"));
    let csv = fs::read_to_string(out.join("overhead/bo4co_rep0.csv")).unwrap();
    assert_eq!(csv.lines().count(), 1);
}

#[test]
fn overhead_reports_every_search_iteration() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("oh");
    let o = run(&[
        "overhead",
        "--function",
        "hartmann3",
        "--grid",
        "8,8,8",
        "--budget",
        "30",
        "--out",
        path(&out),
    ]);
    assert!(o.status.success(), "{o:?}");
    let csv = fs::read_to_string(out.join("overhead/bo4co_rep0.csv")).unwrap();
    assert_eq!(csv.lines().count(), 1 + 30 - 9);
    assert!(stdout(&o).contains("max median overhead"));
}
