use std::process::Command;

fn sdlab() -> Command {
    Command::new(env!("CARGO_BIN_EXE_sdlab"))
}

#[test]
fn run_writes_outputs_and_exits_zero() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("c.json");
    std::fs::write(
        &cfg,
        r#"{"name":"kernel","suite":"nonuniqueness","alpha":-0.5,"grids":[{"n_r":16,"n_theta":32},{"n_r":32,"n_theta":64}]}"#,
    )
    .unwrap();
    let out = dir.path().join("out");
    let status = sdlab().arg("run").arg(&cfg).arg("--out").arg(&out).arg("--threads").arg("2").status().unwrap();
    assert_eq!(status.code(), Some(0));
    for f in ["table.csv", "plot.svg", "record.json"] {
        assert!(out.join("kernel").join(f).exists(), "{f}");
    }
}

#[test]
fn config_errors_exit_two() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.json");
    std::fs::write(&bad, r#"{"name":"x","suite":"nonuniqueness","alpha":0.5,"grids":[{"n_r":16,"n_theta":32},{"n_r":32,"n_theta":64}]}"#).unwrap();
    assert_eq!(sdlab().arg("run").arg(&bad).status().unwrap().code(), Some(2));
    std::fs::write(&bad, "{ not json").unwrap();
    assert_eq!(sdlab().arg("run").arg(&bad).status().unwrap().code(), Some(2));
    assert_eq!(sdlab().arg("run").arg(dir.path().join("missing.json")).status().unwrap().code(), Some(2));
    let good = dir.path().join("good.json");
    std::fs::write(&good, r#"{"name":"x","suite":"drift_norms","grids":[{"n_r":16,"n_theta":32}]}"#).unwrap();
    let status = sdlab().arg("run").arg(&good).arg("--tol").arg("0.5").status().unwrap();
    assert_eq!(status.code(), Some(2));
}

#[test]
fn solver_non_convergence_exits_three() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("tight.json");
    std::fs::write(
        &cfg,
        r#"{"name":"tight","suite":"convergence","alpha":2,"scheme":"upwind","tol":1e-15,
            "grids":[{"n_r":16,"n_theta":32},{"n_r":32,"n_theta":64},{"n_r":64,"n_theta":128}]}"#,
    )
    .unwrap();
    let status = sdlab().arg("run").arg(&cfg).arg("--out").arg(dir.path()).status().unwrap();
    assert_eq!(status.code(), Some(3));
    assert!(dir.path().join("tight/record.json").exists());
}

#[test]
fn suite_directory_runs_every_config() {
    let dir = tempfile::tempdir().unwrap();
    for (name, suite) in [("a", "nonuniqueness"), ("b", "drift_norms")] {
        let alpha = if suite == "nonuniqueness" { -0.5 } else { 0.0 };
        std::fs::write(
            dir.path().join(format!("{name}.json")),
            format!(r#"{{"name":"{name}","suite":"{suite}","alpha":{alpha},"grids":[{{"n_r":16,"n_theta":32}},{{"n_r":32,"n_theta":64}}]}}"#),
        )
        .unwrap();
    }
    for form in [vec!["suite"], vec!["run", "--suite-dir"]] {
        let out = dir.path().join(format!("out_{}", form.len()));
        let status = sdlab().args(&form).arg(dir.path()).arg("--out").arg(&out).status().unwrap();
        assert_eq!(status.code(), Some(0));
        assert!(out.join("a/table.csv").exists() && out.join("b/table.csv").exists());
    }
    assert_eq!(sdlab().arg("run").status().unwrap().code(), Some(2));
}
