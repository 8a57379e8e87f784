use std::process::{Command, Output};

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_hdcml"))
        .args(args)
        .env_remove("HDCML_DIM")
        .env_remove("HDCML_TRIALS")
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

#[test]
fn help_and_usage_errors() {
    assert_eq!(run(&["--help"]).status.code(), Some(0));
    assert_eq!(run(&["reproduce", "--help"]).status.code(), Some(0));
    assert_eq!(run(&[]).status.code(), Some(2));
    assert_eq!(run(&["reproduce", "--table", "9"]).status.code(), Some(2));
    assert_eq!(run(&["train"]).status.code(), Some(2));
    assert_eq!(run(&["train", "--graph", "random:3"]).status.code(), Some(2));
    assert_eq!(run(&["train", "--graph", "/no/such/file"]).status.code(), Some(2));
    assert_eq!(run(&["train", "--graph", "random:5,2"]).status.code(), Some(2));
}

#[test]
fn train_calculated_hanoi_summary() {
    let o = run(&["train", "--graph", "toh", "--mode", "calculated"]);
    assert_eq!(o.status.code(), Some(0));
    let text = stdout(&o);
    let mut lines = text.lines();
    let header: Vec<&str> = lines.next().unwrap().split(',').collect();
    let row: Vec<&str> = lines.next().unwrap().split(',').collect();
    let field = |k: &str| row[header.iter().position(|h| *h == k).unwrap()];
    assert_eq!(field("nodes"), "27");
    assert_eq!(field("edges"), "78");
    assert_eq!(field("d"), "1000");
}

#[test]
fn saved_model_plans_like_a_fresh_one() {
    let dir = std::env::temp_dir().join(format!("hdcml-cli-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let model = dir.join("ring.json");
    let model = model.to_str().unwrap();
    assert_eq!(run(&["train", "--graph", "random:7,10", "--model", model]).status.code(), Some(0));
    let a = run(&["plan", "--model", model, "--start", "0", "--target", "5"]);
    let b = run(&["plan", "--model", model, "--start", "0", "--target", "5"]);
    assert_eq!(a.status.code(), Some(0));
    assert_eq!(a.stdout, b.stdout);
    assert!(!a.stdout.is_empty());
    std::fs::remove_dir_all(&dir).ok();
}

#[test]
fn unreached_plan_exits_one() {
    // With the default seed this pair oscillates at a corner in raw mode.
    let o = run(&["plan", "--graph", "toh", "--start", "113", "--target", "222"]);
    let s = run(&["plan", "--graph", "toh", "--start", "113", "--target", "222", "--sign"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stdout(&o).contains("reached=false"));
    assert_eq!(s.status.code(), Some(0));
}

#[test]
fn seeds_are_reproducible_and_matter() {
    let a = run(&["toh", "--method", "composite", "--trials", "2", "--seed", "5"]);
    let b = run(&["toh", "--method", "composite", "--trials", "2", "--seed", "5"]);
    let c = run(&["train", "--graph", "random:7,10", "--seed", "5"]);
    let d = run(&["train", "--graph", "random:7,10", "--seed", "6"]);
    assert_eq!(a.stdout, b.stdout);
    assert_ne!(c.stdout, d.stdout);
}

#[test]
fn trace_reports_the_optimal_sequence() {
    for m in ["monolithic", "partial", "mapping", "composite"] {
        let o = run(&["trace", "--method", m]);
        assert_eq!(o.status.code(), Some(0), "{m}");
        assert!(stdout(&o).trim_end().ends_with("111 112 132 133 233 231 221 222 PASS"));
    }
}

#[test]
fn structured_output_and_out_file() {
    let o = run(&["trace", "--method", "partial", "--format", "structured"]);
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(v["steps"].as_array().unwrap().len(), 7);
    let path = std::env::temp_dir().join(format!("hdcml-out-{}.csv", std::process::id()));
    let o = run(&["reproduce", "--table", "2", "--trials", "2", "--pairs", "5", "--out", path.to_str().unwrap()]);
    assert!(o.stdout.is_empty());
    let text = std::fs::read_to_string(&path).unwrap();
    std::fs::remove_file(&path).ok();
    assert!(text.lines().count() > 8);
}

#[test]
fn environment_overrides_dimension() {
    let o = Command::new(env!("CARGO_BIN_EXE_hdcml"))
        .args(["train", "--graph", "toh", "--mode", "calculated"])
        .env("HDCML_DIM", "256")
        .output()
        .unwrap();
    assert!(stdout(&o).lines().nth(1).unwrap().split(',').any(|f| f == "256"));
}
