use std::process::{Command, Output};

fn microrheo(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_microrheo"))
        .args(args)
        .env("MICRORHEO_THREADS", "2")
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    String::from_utf8(o.stdout.clone()).unwrap()
}

#[test]
fn exit_codes() {
    assert_eq!(microrheo(&["--help"]).status.code(), Some(0));
    assert_eq!(microrheo(&["no-such-verb"]).status.code(), Some(2));
    assert_eq!(
        microrheo(&["estimate", "--input", "/nonexistent.csv"])
            .status
            .code(),
        Some(2)
    );
    // d outside (0, 1/2) is a parameter error
    let o = microrheo(&["simulate", "--model", "fgle-cme", "--d", "0.7"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).starts_with("error:"));
}

#[test]
fn numerical_failure_exits_with_three() {
    // the default 1e-5 truncation threshold is not reachable with L = 80 at d = 0.45
    let o = microrheo(&[
        "simulate",
        "--model",
        "fgle-wavelet",
        "--d",
        "0.45",
        "--J",
        "4",
        "--T",
        "64",
    ]);
    assert_eq!(
        o.status.code(),
        Some(3),
        "{}",
        String::from_utf8_lossy(&o.stderr)
    );
}

#[test]
fn simulate_then_analyse() {
    let dir = tempfile::tempdir().unwrap();
    let tracks = dir.path().join("t.csv");
    let t = tracks.to_str().unwrap();
    stdout(&microrheo(&[
        "simulate",
        "--model",
        "fgle-wavelet",
        "--J",
        "6",
        "--T",
        "512",
        "--reps",
        "3",
        "--seed",
        "1",
        "-o",
        t,
    ]));
    let body = std::fs::read_to_string(&tracks).unwrap();
    assert!(body.starts_with("# dt=1\ntrack_id,frame,x\n"));
    assert_eq!(body.lines().count(), 2 + 3 * 513);

    let est: serde_json::Value =
        serde_json::from_str(&stdout(&microrheo(&["estimate", "-i", t]))).unwrap();
    let rows = est.as_array().unwrap();
    assert_eq!(rows.len(), 3);
    for r in rows {
        let a = r["report"]["alpha_hat"].as_f64().unwrap();
        assert!(a > 0.0 && a < 1.2, "{a}");
        assert!(r["test"]["p_value"].as_f64().is_some());
    }

    let csv = stdout(&microrheo(&[
        "estimate", "-i", t, "--method", "msd", "--lags", "1:30", "--format", "csv",
    ]));
    assert!(csv.starts_with("track,axis,estimator,d_hat"));
    assert_eq!(csv.lines().count(), 4);
    assert!(csv.lines().nth(1).unwrap().contains("lags=1:30"));

    let msd = stdout(&microrheo(&["msd", "-i", t, "--max-lag", "5"]));
    assert_eq!(msd.lines().count(), 1 + 3 * 5);
    let acf = stdout(&microrheo(&["acf", "-i", t, "--max-lag", "3"]));
    let lag1: f64 = acf
        .lines()
        .nth(2)
        .unwrap()
        .split(',')
        .nth(3)
        .unwrap()
        .parse()
        .unwrap();
    assert!(lag1 < 0.0, "antipersistent increments, got {lag1}");

    let g = stdout(&microrheo(&[
        "gser", "-i", t, "--radius", "1", "--kbt", "1", "--points", "6",
    ]));
    assert_eq!(g.lines().count(), 7);
}

#[test]
fn seed_changes_output() {
    let a = stdout(&microrheo(&[
        "simulate", "--model", "langevin", "--steps", "20", "--seed", "1",
    ]));
    let b = stdout(&microrheo(&[
        "simulate", "--model", "langevin", "--steps", "20", "--seed", "2",
    ]));
    let a2 = stdout(&microrheo(&[
        "simulate", "--model", "langevin", "--steps", "20", "--seed", "1",
    ]));
    assert_ne!(a, b);
    assert_eq!(a, a2);
}

#[test]
fn prony_needs_a_kernel() {
    assert_eq!(
        microrheo(&["simulate", "--model", "prony"]).status.code(),
        Some(2)
    );
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("p.json");
    std::fs::write(
        &p,
        r#"{"mass":1,"gamma":1,"kernel":{"type":"prony","c":[1.0],"lambda":[3.0]},"steps":10}"#,
    )
    .unwrap();
    let out = stdout(&microrheo(&[
        "simulate",
        "--model",
        "prony",
        "--params",
        p.to_str().unwrap(),
    ]));
    assert_eq!(out.lines().count(), 2 + 11);
}

#[test]
fn compare_and_distribution_outputs() {
    let c = stdout(&microrheo(&[
        "compare",
        "--reps",
        "6",
        "--methods",
        "cme,cholesky",
        "--d",
        "0.1",
    ]));
    let mut lines = c.lines();
    assert!(lines.next().unwrap().starts_with("# config: {"));
    assert_eq!(lines.next(), Some("method,d_hat,s,N,t_stat"));
    assert!(lines.next().unwrap().starts_with("cme,"));
    assert!(lines.next().unwrap().ends_with(",6,-"));

    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("d.json");
    let est = dir.path().join("e.csv");
    std::fs::write(
        &cfg,
        r#"{"source":{"model":"brownian","n":300},"reps":20,"kde_points":15}"#,
    )
    .unwrap();
    let d = stdout(&microrheo(&[
        "distribution",
        "--config",
        cfg.to_str().unwrap(),
        "--estimates",
        est.to_str().unwrap(),
    ]));
    assert_eq!(d.lines().count(), 2 + 15);
    assert_eq!(std::fs::read_to_string(&est).unwrap().lines().count(), 21);
}
