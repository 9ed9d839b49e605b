use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_partition-power"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8(o.stderr.clone()).unwrap()
}

const PAPER: [&str; 10] = [
    "--alpha", "0.1", "--epsilon", "0.04", "--sigma-sq", "1", "--method", "clt", "--scope", "random",
];

fn with(prefix: &[&str], rest: &[&str]) -> Vec<String> {
    prefix.iter().chain(rest).map(|s| s.to_string()).collect()
}

fn run_owned(args: &[String]) -> Output {
    bin().args(args).output().unwrap()
}

#[test]
fn plan_prints_the_design_cell() {
    let o = run_owned(&with(&["plan", "--arms", "2"], &PAPER));
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).contains("min_cell_size: 2374\n"));
    let o = run_owned(&with(&["plan", "--arms", "2", "--format", "csv"], &PAPER));
    assert_eq!(
        stdout(&o).lines().next(),
        Some("min_cell_size,total_experiment_size,exponent,raw_bound")
    );
    assert!(stdout(&o).lines().nth(1).unwrap().starts_with("2374,9496,"));
}

#[test]
fn plan_validation_exits_two() {
    let o = run(&["plan", "--arms", "2", "--alpha", "0.1", "--epsilon", "0.04", "--method", "clt"]);
    assert_eq!(o.status.code(), Some(2));
    let err = stderr(&o);
    assert_eq!(err.lines().count(), 1, "{err}");
    assert!(err.contains("sigma_sq"));
    let o = run(&["plan", "--arms", "2", "--alpha", "0.1", "--epsilon", "0.04", "--method", "hoeffding"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("bounds"));
    assert_eq!(run(&["plan", "--bogus"]).status.code(), Some(2));
    assert_eq!(run(&["--help"]).status.code(), Some(0));
}

#[test]
fn plan_curve_rows() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("curve.csv");
    let o = run_owned(&with(
        &["plan", "--arms", "2", "--curve", "0.8,0.9,0.95", "--out", out.to_str().unwrap()],
        &PAPER,
    ));
    assert_eq!(o.status.code(), Some(0));
    let text = fs::read_to_string(&out).unwrap();
    let rows: Vec<u64> = text
        .lines()
        .skip(1)
        .map(|l| l.split(',').nth(1).unwrap().parse().unwrap())
        .collect();
    assert_eq!(text.lines().next(), Some("confidence,total_n"));
    assert_eq!(rows.len(), 3);
    assert!(rows.windows(2).all(|w| w[0] <= w[1]));
    assert_eq!(rows[1], 9496);
}

fn field(out: &str, key: &str) -> String {
    out.lines()
        .find_map(|l| l.strip_prefix(&format!("{key}: ")))
        .unwrap_or_else(|| panic!("no {key} in {out}"))
        .to_string()
}

#[test]
fn invert_examples() {
    let o = run_owned(&with(&["invert", "--solve-for", "arms", "--budget", "50000", "--leaves", "5"], &PAPER));
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(field(&stdout(&o), "solved_value"), "3");
    assert_eq!(field(&stdout(&o), "feasible"), "true");

    let args = ["invert", "--solve-for", "epsilon", "--budget", "4748", "--arms", "2", "--leaves", "1"];
    let o = run_owned(&with(&args, &["--alpha", "0.1", "--sigma-sq", "1"]));
    let eps: f64 = field(&stdout(&o), "solved_value").parse().unwrap();
    assert!((eps - 0.04).abs() < 1e-4);

    let o = run_owned(&with(&["invert", "--solve-for", "arms", "--budget", "1", "--leaves", "5"], &PAPER));
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(field(&stdout(&o), "feasible"), "false");
}

#[test]
fn bound_variance_examples() {
    let v = |args: &[&str]| {
        let mut a = vec!["bound-variance"];
        a.extend_from_slice(args);
        let o = run(&a);
        (o.status.code(), stdout(&o))
    };
    assert_eq!(v(&["--lo", "0", "--hi", "1"]), (Some(0), "sigma_sq: 0.250000\nformula: worst_case\n".into()));
    assert_eq!(v(&["--binary", "--rate", "0.1"]).1, "sigma_sq: 0.090000\nformula: binary_rare_outcome\n");
    assert_eq!(
        v(&["--lo", "0", "--hi", "1", "--anchor", "0", "--rate", "0.1"]).1,
        "sigma_sq: 0.115000\nformula: rare_deviation\n"
    );
    assert_eq!(v(&["--binary", "--rate", "0.6"]).0, Some(2));
}

fn write_separable(path: &Path, seed: u64, n: usize) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut text = String::from("x0,w,y\n");
    for _ in 0..n {
        let x: f64 = if rng.gen_bool(0.5) {
            rng.gen_range(0.0..0.45)
        } else {
            rng.gen_range(0.55..1.0)
        };
        let w: u32 = rng.gen_range(1..=2);
        let y = match (x <= 0.5, w) {
            (true, 1) => 0.5 + x,
            (false, 2) => 1.5 - x,
            _ => 0.0,
        };
        text.push_str(&format!("{x},{w},{y}\n"));
    }
    fs::write(path, text).unwrap();
}

#[test]
fn learn_then_estimate() {
    let dir = tempfile::tempdir().unwrap();
    let p = |name: &str| dir.path().join(name).to_str().unwrap().to_string();
    write_separable(Path::new(&p("train.csv")), 1, 400);
    write_separable(Path::new(&p("honest.csv")), 2, 400);
    let o = run(&[
        "learn-tree", "--train", &p("train.csv"), "--honest", &p("honest.csv"), "--max-leaves", "2",
        "--min-cell-size", "10", "--candidates", "1000", "--out", &p("tree.json"),
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let doc = fs::read_to_string(p("tree.json")).unwrap();
    let tree: serde_json::Value = serde_json::from_str(&doc).unwrap();
    let t = tree["tree"]["threshold"].as_f64().unwrap();
    assert!(t > 0.45 && t < 0.55, "{t}");
    assert_eq!(tree["tree"]["feature"], 0);
    assert_eq!(tree["leaf_count"], 2);

    let o = run(&[
        "estimate", "--partition", &p("tree.json"), "--data", &p("honest.csv"), "--at", "0.2", "--at", "0.9",
        "--required-cell-size", "100000",
    ]);
    assert_eq!(o.status.code(), Some(0));
    let out = stdout(&o);
    assert!(out.starts_with("arm,leaf,count,mean\n"));
    assert!(out.contains("check: false"));
    assert!(out.contains("best_arm = 1"));
    assert!(out.contains("best_arm = 2"));
}

#[test]
fn estimate_two_thirds_cell() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("d.csv");
    fs::write(&data, "x0,w,y\n0.1,1,0\n0.2,1,1\n0.3,1,1\n0.7,1,5\n0.8,2,3\n").unwrap();
    let tree = dir.path().join("t.json");
    fs::write(
        &tree,
        r#"{"n_features": 1, "leaf_count": 2, "tree": {"feature": 0, "threshold": 0.5, "left": {"leaf": 0}, "right": {"leaf": 1}}}"#,
    )
    .unwrap();
    let table = dir.path().join("table.csv");
    let args = |at: &str| {
        vec![
            "estimate".to_string(),
            "--partition".into(),
            tree.to_str().unwrap().into(),
            "--data".into(),
            data.to_str().unwrap().into(),
            "--arms".into(),
            "2".into(),
            "--out".into(),
            table.to_str().unwrap().into(),
            "--at".into(),
            at.into(),
        ]
    };
    let o = run_owned(&args("0.7"));
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).contains("mu_hat[1] = 5.000000"));
    assert_eq!(
        fs::read_to_string(&table).unwrap(),
        "arm,leaf,count,mean\n1,0,3,0.6666666666666666\n1,1,1,5\n2,0,0,\n2,1,1,3\n"
    );
    // arm 2 has no rows in leaf 0
    let o = run_owned(&args("0.25"));
    assert_eq!(o.status.code(), Some(3));
    let mut only_arm1 = args("0.25");
    only_arm1[6] = "1".into();
    fs::write(&data, "x0,w,y\n0.1,1,0\n0.2,1,1\n0.3,1,1\n").unwrap();
    let o = run_owned(&only_arm1);
    assert!(stdout(&o).contains("mu_hat[1] = 0.666667"), "{}", stdout(&o));
}

#[test]
fn parse_errors_name_the_line() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("bad.csv");
    fs::write(&data, "x0,w,y\n0.1,1,0\n0.2,x,1\n").unwrap();
    let tree = dir.path().join("t.json");
    fs::write(&tree, r#"{"n_features": 1, "leaf_count": 1, "tree": {"leaf": 0}}"#).unwrap();
    let o = run(&["estimate", "--partition", tree.to_str().unwrap(), "--data", data.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("line 3"), "{}", stderr(&o));
}

#[test]
fn simulate_is_byte_stable() {
    let dir = tempfile::tempdir().unwrap();
    let p = |name: &str| dir.path().join(name).to_str().unwrap().to_string();
    for name in ["a.csv", "b.csv"] {
        let o = run(&[
            "simulate", "--preset", "known-hoeffding", "--seed", "7", "--replicates", "20", "--out", &p(name),
        ]);
        assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    }
    assert_eq!(fs::read(p("a.csv")).unwrap(), fs::read(p("b.csv")).unwrap());

    let o = run(&[
        "simulate", "--preset", "known-hoeffding", "--seed", "7", "--replicates", "1", "--out", &p("one.csv"),
        "--params-out", &p("params.csv"),
    ]);
    assert_eq!(o.status.code(), Some(0));
    let text = fs::read_to_string(p("one.csv")).unwrap();
    assert_eq!(text.lines().count(), 7);
    assert!(text.lines().skip(1).all(|l| l.starts_with("0,")));
    assert_eq!(fs::read_to_string(p("params.csv")).unwrap().lines().count(), 2);
    assert!(stdout(&o).contains("joint_mean: "));
}

#[test]
fn simulate_usage_errors() {
    assert_eq!(run(&["simulate"]).status.code(), Some(2));
    assert_eq!(run(&["simulate", "--preset", "nope"]).status.code(), Some(2));
    let o = bin()
        .args(["simulate", "--preset", "known-hoeffding", "--replicates", "1"])
        .env("PARTITION_POWER_THREADS", "zero")
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(2));
    let o = bin()
        .args(["simulate", "--preset", "known-hoeffding", "--replicates", "2"])
        .env("PARTITION_POWER_THREADS", "2")
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(0));
}

#[test]
fn simulate_from_plan_file() {
    let dir = tempfile::tempdir().unwrap();
    let plan = partition_power::simulate::preset("known-hoeffding", 11).unwrap();
    let path = dir.path().join("plan.json");
    fs::write(&path, serde_json::to_string_pretty(&plan).unwrap()).unwrap();
    let o = run(&["simulate", "--plan-file", path.to_str().unwrap(), "--replicates", "3"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert!(stdout(&o).contains("replicates: 3"));
    fs::write(&path, "{").unwrap();
    assert_eq!(run(&["simulate", "--plan-file", path.to_str().unwrap()]).status.code(), Some(2));
}
