use hlsp_cli::cli_main;

fn path(dir: &tempfile::TempDir, name: &str) -> String {
    dir.path().join(name).to_str().unwrap().to_string()
}

#[test]
fn generate_then_solve() {
    let dir = tempfile::tempdir().unwrap();
    let prob = path(&dir, "prob.txt");
    assert_eq!(cli_main(["hlsp", "generate", "--p", "3", "--seed", "7", "--out", &prob]), 0);
    for solver in ["baseline", "dhadm", "dhipm"] {
        assert_eq!(cli_main(["hlsp", "solve", "--problem", &prob, "--solver", solver]), 0, "{solver}");
    }
}

#[test]
fn unknown_solver_is_a_usage_error() {
    assert_ne!(cli_main(["hlsp", "solve", "--problem", "x.txt", "--solver", "unknown"]), 0);
}

#[test]
fn missing_problem_file_fails() {
    assert_eq!(cli_main(["hlsp", "solve", "--problem", "/nonexistent/prob.txt"]), 1);
}

#[test]
fn bench_row_count() {
    let dir = tempfile::tempdir().unwrap();
    let out = path(&dir, "r.csv");
    assert_eq!(cli_main(["hlsp", "bench", "--p-max", "4", "--reps", "5", "--out", &out]), 0);
    let recs = hlsp::bench::load_csv(&out).unwrap();
    assert_eq!(recs.len(), 4 * 5 * 3);
    assert!(recs.iter().all(|r| !r.status.starts_with("error")));
}

#[test]
fn gradient_csv_shape() {
    let dir = tempfile::tempdir().unwrap();
    let prob = path(&dir, "prob.txt");
    let out = path(&dir, "jac.csv");
    assert_eq!(cli_main(["hlsp", "generate", "--p", "2", "--seed", "1", "--full-rank", "--out", &prob]), 0);
    assert_eq!(cli_main(["hlsp", "gradient", "--problem", &prob, "--out", &out]), 0);
    let text = std::fs::read_to_string(&out).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "x,b_1_1,b_2_1,b_2_2");
    assert_eq!(lines.len(), 3);
}
