use std::path::Path;
use std::process::{Command, Output};

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_dyn-leiden"))
        .args(args)
        .env("RUST_BACKTRACE", "0")
        .output()
        .expect("binary runs")
}

fn ok(args: &[&str]) -> String {
    let out = run(args);
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

fn generate(dir: &Path) -> String {
    let path = dir.join("graph.txt");
    let p = path.to_str().unwrap().to_owned();
    ok(&["gen", "--blocks", "4", "--size", "30", "--p-in", "0.3", "--p-out", "0.01", "--seed", "3", "--out", &p]);
    p
}

#[test]
fn gen_writes_edge_lines() {
    let dir = tempfile::tempdir().unwrap();
    let p = generate(dir.path());
    let text = std::fs::read_to_string(&p).unwrap();
    assert!(text.lines().count() > 100);
    for line in text.lines() {
        let f: Vec<u32> = line.split_whitespace().map(|x| x.parse().unwrap()).collect();
        assert_eq!(f.len(), 3, "{line}");
        assert!(f[0] < f[1] && f[1] < 120 && f[2] == 1);
    }
    let again = ok(&["gen", "--blocks", "4", "--size", "30", "--p-in", "0.3", "--p-out", "0.01", "--seed", "3"]);
    assert_eq!(again, text);
}

#[test]
fn bench_csv_is_reproducible_without_timings() {
    let dir = tempfile::tempdir().unwrap();
    let p = generate(dir.path());
    for algo in ["hit", "nd", "static"] {
        let args = ["bench", "--input", &p, "--algorithm", algo, "--batch-size", "20", "--batches", "3", "--no-timings"];
        let a = ok(&args);
        assert_eq!(a, ok(&args));
        let mut lines = a.lines();
        assert_eq!(
            lines.next().unwrap(),
            "batch,algorithm,modularity,communities,pct_connected,pct_gamma_dense,ms_movement,ms_refinement,ms_aggregation,ms_total,changed,aff"
        );
        let rows: Vec<Vec<&str>> = lines.map(|l| l.split(',').collect()).collect();
        assert_eq!(rows.len(), 3);
        for (i, r) in rows.iter().enumerate() {
            assert_eq!(r[0], (i + 1).to_string());
            assert_eq!(r[1], algo);
            assert_eq!(r[4], "100");
            assert!(r[6..10].iter().all(|&ms| ms == "0"));
        }
    }
}

#[test]
fn bench_json_state_and_changes() {
    let dir = tempfile::tempdir().unwrap();
    let p = generate(dir.path());
    let state = dir.path().join("state.json");
    let changes = dir.path().join("changes.jsonl");
    let report = ok(&[
        "bench",
        "--input",
        &p,
        "--batch-size",
        "25",
        "--batches",
        "3",
        "--with-deletions",
        "--format",
        "json",
        "--dump-state",
        state.to_str().unwrap(),
        "--changes",
        changes.to_str().unwrap(),
    ]);
    let report: serde_json::Value = serde_json::from_str(&report).unwrap();
    let rows = report.as_array().unwrap();
    assert_eq!(rows.len(), 3);
    assert_eq!(rows[0]["warmup"], true);
    assert_eq!(rows[2]["warmup"], false);
    assert_eq!(rows[0]["algorithm"], "hit");

    let snapshot: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&state).unwrap()).unwrap();
    let level1 = &snapshot["levels"][0];
    assert_eq!(level1["level"], 1);
    assert_eq!(level1["community"].as_array().unwrap().len(), 120);

    for line in std::fs::read_to_string(&changes).unwrap().lines() {
        let rec: serde_json::Value = serde_json::from_str(line).unwrap();
        assert!(rec["level"].as_u64().unwrap() >= 1);
        assert!(rec.get("new_community").is_some() || rec.get("new_sub").is_some());
    }
}

#[test]
fn bad_input_fails_cleanly() {
    let dir = tempfile::tempdir().unwrap();
    let p = generate(dir.path());
    let out = run(&["bench", "--input", &p, "--batch-size", "100000"]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("needs"));
    let out = run(&["bench", "--input", &p, "--algorithm", "louvain"]);
    assert!(!out.status.success());
    let out = run(&["bench", "--input", dir.path().join("missing").to_str().unwrap()]);
    assert!(!out.status.success());
    let out = run(&["gen", "--blocks", "2", "--size", "2", "--p-in", "1.5", "--p-out", "0"]);
    assert!(!out.status.success());
}
