use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tempfile::TempDir;

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_hierform"));
    c.env_remove("HIERFORM_SEED");
    c
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn loss_csv() -> String {
    concat!(env!("CARGO_MANIFEST_DIR"), "/../../data/loss.csv").to_string()
}

fn simulate(dir: &Path, seed: &str, extra: &[&str]) -> PathBuf {
    let out = dir.join(format!("mm{seed}.csv"));
    let mut args = vec![
        "simulate-mm",
        "--nstudents",
        "200",
        "--seed",
        seed,
        "--out",
        out.to_str().unwrap(),
    ];
    args.extend_from_slice(extra);
    let o = run(&args);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    out
}

fn fit_mm(data: &Path, out: &Path, extra: &[&str]) -> Output {
    let mut args = vec![
        "fit",
        "--formula",
        "y ~ 1 + (1 | mm(s1, s2))",
        "--data",
        data.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
        "--chains",
        "2",
        "--cores",
        "2",
        "--iter",
        "600",
        "--warmup",
        "300",
    ];
    args.extend_from_slice(extra);
    run(&args)
}

#[test]
fn parse_resolves_nested_grouping() {
    let o = run(&["parse", "--formula", "(1|g1/g2)", "--resolve"]);
    assert!(o.status.success());
    let blocks: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    let groupings: Vec<&serde_json::Value> = blocks
        .as_array()
        .unwrap()
        .iter()
        .map(|b| &b["grouping"]["vars"])
        .collect();
    assert_eq!(
        groupings,
        [&serde_json::json!(["g1"]), &serde_json::json!(["g1", "g2"])]
    );
}

#[test]
fn parse_error_exits_2_with_position() {
    let o = run(&["parse", "--formula", "y ~"]);
    assert_eq!(o.status.code(), Some(2));
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("3..3"), "{err}");
    assert!(err.contains('^'));
}

#[test]
fn parse_nonlinear_lists_three_nlpars() {
    let o = run(&[
        "parse",
        "--formula",
        "cum ~ ult*(1-exp(-(dev/theta)^omega))",
        "--nl",
        "--extra",
        "ult=1+(1|AY)",
        "--extra",
        "omega=1",
        "--extra",
        "theta=1",
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let spec: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    let mut names: Vec<&String> = spec["nlpar_formulas"].as_object().unwrap().keys().collect();
    names.sort();
    assert_eq!(names, ["omega", "theta", "ult"]);
}

#[test]
fn validation_error_exits_3() {
    let o = run(&[
        "codegen",
        "--formula",
        "cum ~ dev + AYY",
        "--data",
        &loss_csv(),
    ]);
    assert_eq!(o.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&o.stderr).contains("AYY"));
}

#[test]
fn model_file_matches_flags() {
    let dir = TempDir::new().unwrap();
    let model = dir.path().join("loss.model");
    std::fs::write(
        &model,
        "cum ~ ult * (1 - exp(-(dev / theta)^omega))\nult: 1 + (1 | AY)\nomega: 1\ntheta: 1\n\
         prior: normal(5000, 1000), nlpar = ult\n",
    )
    .unwrap();
    let from_file = run(&[
        "codegen",
        "--model",
        model.to_str().unwrap(),
        "--nl",
        "--data",
        &loss_csv(),
    ]);
    let from_flags = run(&[
        "codegen",
        "--formula",
        "cum ~ ult * (1 - exp(-(dev / theta)^omega))",
        "--nl",
        "--extra",
        "ult=1 + (1 | AY)",
        "--extra",
        "omega=1",
        "--extra",
        "theta=1",
        "--prior",
        "normal(5000, 1000), nlpar = ult",
        "--data",
        &loss_csv(),
    ]);
    assert!(
        from_file.status.success(),
        "{}",
        String::from_utf8_lossy(&from_file.stderr)
    );
    assert_eq!(stdout(&from_file), stdout(&from_flags));
    assert!(stdout(&from_file).contains("ult * (1 - exp(-(dev / theta)^omega))"));
}

#[test]
fn simulate_writes_changers_and_random_weights() {
    let dir = TempDir::new().unwrap();
    let path = simulate(dir.path(), "4", &["--random-weights"]);
    let d = hierform::tabular::read_csv_path(&path, None).unwrap();
    let s1: Vec<String> = (0..d.n_rows())
        .map(|i| d.column("s1").unwrap().label(i))
        .collect();
    let s2: Vec<String> = (0..d.n_rows())
        .map(|i| d.column("s2").unwrap().label(i))
        .collect();
    assert_eq!(s1.iter().zip(&s2).filter(|(a, b)| a != b).count(), 20);
    let w1 = d.column("w1").unwrap().as_f64().unwrap();
    let w2 = d.column("w2").unwrap().as_f64().unwrap();
    assert!(w1.iter().zip(&w2).all(|(a, b)| (a + b - 1.0).abs() < 1e-12));
    assert!(w1[..20].iter().any(|w| (w - 0.5).abs() > 1e-9));
    assert!(w1[20..].iter().all(|w| *w == 0.5));
}

#[test]
fn fit_bundle_round_trip_and_read_commands() {
    let dir = TempDir::new().unwrap();
    let data = simulate(dir.path(), "2", &[]);
    let bundle = dir.path().join("fit");
    let o = fit_mm(&data, &bundle, &[]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    for f in [
        "spec.json",
        "config.json",
        "draws.csv",
        "summary.txt",
        "loglik.csv",
        "meta.json",
    ] {
        assert!(bundle.join(f).exists(), "{f}");
    }
    let printed = stdout(&o);
    assert!(printed.contains("Samples: 2 chains, each with iter = 600; warmup = 300; thin = 1;"));
    assert_eq!(
        printed,
        std::fs::read_to_string(bundle.join("summary.txt")).unwrap()
    );
    let again = run(&["summary", bundle.to_str().unwrap()]);
    assert_eq!(stdout(&again), printed, "summary from the bundle differs");

    let meta: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(bundle.join("meta.json")).unwrap()).unwrap();
    for key in [
        "seed",
        "version",
        "wall_time_seconds",
        "divergences",
        "treedepth_hits",
    ] {
        assert!(meta.get(key).is_some(), "{key}");
    }

    let b = bundle.to_str().unwrap();
    let cmp = run(&["compare", b, b]);
    assert!(cmp.status.success());
    let table = stdout(&cmp);
    let diff_line = table.lines().find(|l| l.contains(" - ")).unwrap();
    let cells: Vec<f64> = diff_line
        .split_whitespace()
        .rev()
        .take(2)
        .map(|c| c.parse().unwrap())
        .collect();
    assert_eq!(cells, [0.0, 0.0], "{table}");

    let pred = run(&["predict", b]);
    assert!(
        pred.status.success(),
        "{}",
        String::from_utf8_lossy(&pred.stderr)
    );
    let text = stdout(&pred);
    assert!(text.starts_with("row,estimate,est_error,lower95,upper95\n"));
    assert_eq!(text.lines().count(), 201);

    let grid = dir.path().join("grid.csv");
    let eff = run(&[
        "effects",
        b,
        "--focal",
        "w1",
        "--resolution",
        "5",
        "--out",
        grid.to_str().unwrap(),
    ]);
    assert_eq!(
        eff.status.code(),
        Some(3),
        "constant focal variable is rejected"
    );
    let waic = run(&["compare", b, b, "--method", "waic"]);
    assert!(stdout(&waic).contains("WAIC"));
}

#[test]
fn effects_grid_csv_for_loss_model() {
    let dir = TempDir::new().unwrap();
    let bundle = dir.path().join("loss");
    let o = run(&[
        "fit",
        "--formula",
        "cum ~ ult * (1 - exp(-(dev / theta)^omega))",
        "--nl",
        "--extra",
        "ult=1 + (1 | AY)",
        "--extra",
        "omega=1",
        "--extra",
        "theta=1",
        "--prior",
        "normal(5000, 1000), nlpar = ult",
        "--prior",
        "normal(1, 2), nlpar = omega",
        "--prior",
        "normal(45, 10), nlpar = theta",
        "--data",
        &loss_csv(),
        "--out",
        bundle.to_str().unwrap(),
        "--chains",
        "1",
        "--iter",
        "400",
        "--warmup",
        "200",
        "--allow-nonconverged",
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let conditions = dir.path().join("cond.csv");
    std::fs::write(&conditions, "AY\n1988\n1990\n").unwrap();
    let eff = run(&[
        "effects",
        bundle.to_str().unwrap(),
        "--focal",
        "dev",
        "--conditions",
        conditions.to_str().unwrap(),
        "--include-groups",
        "--predictive",
        "--resolution",
        "10",
    ]);
    assert!(
        eff.status.success(),
        "{}",
        String::from_utf8_lossy(&eff.stderr)
    );
    let text = stdout(&eff);
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("dev,estimate,lower95,upper95,condition"));
    let rows: Vec<Vec<&str>> = lines.map(|l| l.split(',').collect()).collect();
    assert_eq!(rows.len(), 20);
    assert!(rows[..10].iter().all(|r| r[4] == "1") && rows[10..].iter().all(|r| r[4] == "2"));
    for r in &rows {
        let (est, lo, hi): (f64, f64, f64) = (
            r[1].parse().unwrap(),
            r[2].parse().unwrap(),
            r[3].parse().unwrap(),
        );
        assert!(lo <= est && est <= hi);
    }
}

#[test]
fn seed_flag_and_environment_agree() {
    let dir = TempDir::new().unwrap();
    let data = simulate(dir.path(), "3", &[]);
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    let c = dir.path().join("c");
    assert!(fit_mm(&data, &a, &["--seed", "11"]).status.success());
    let o = bin()
        .env("HIERFORM_SEED", "11")
        .args([
            "fit",
            "--formula",
            "y ~ 1 + (1 | mm(s1, s2))",
            "--data",
            data.to_str().unwrap(),
            "--out",
            b.to_str().unwrap(),
            "--chains",
            "2",
            "--cores",
            "2",
            "--iter",
            "600",
            "--warmup",
            "300",
        ])
        .output()
        .unwrap();
    assert!(o.status.success());
    assert!(fit_mm(&data, &c, &["--seed", "12"]).status.success());
    let read = |p: &Path| std::fs::read(p.join("draws.csv")).unwrap();
    assert_eq!(read(&a), read(&b));
    assert_ne!(read(&a), read(&c));
}

#[test]
fn nonconverged_fit_exits_5_unless_allowed() {
    let dir = TempDir::new().unwrap();
    let data = dir.path().join("collinear.csv");
    let mut text = String::from("y,x,x2\n");
    for i in 0..30 {
        let x = i as f64 / 10.0;
        text.push_str(&format!(
            "{},{x},{x}\n",
            1.0 + x + ((i * 7) % 5) as f64 * 0.1
        ));
    }
    std::fs::write(&data, text).unwrap();
    let args = |out: &Path, allow: bool| {
        let mut v: Vec<String> = [
            "fit",
            "--formula",
            "y ~ x + x2",
            "--data",
            data.to_str().unwrap(),
            "--out",
            out.to_str().unwrap(),
            "--iter",
            "200",
            "--warmup",
            "100",
            "--chains",
            "2",
        ]
        .iter()
        .map(|s| s.to_string())
        .collect();
        if allow {
            v.push("--allow-nonconverged".into());
        }
        v
    };
    let strict = bin()
        .args(args(&dir.path().join("s"), false))
        .output()
        .unwrap();
    assert_eq!(
        strict.status.code(),
        Some(5),
        "{}",
        String::from_utf8_lossy(&strict.stderr)
    );
    assert!(dir.path().join("s/draws.csv").exists());
    let allowed = bin()
        .args(args(&dir.path().join("a"), true))
        .output()
        .unwrap();
    assert!(allowed.status.success());
}

#[test]
fn design_dump_and_logdensity() {
    let dir = TempDir::new().unwrap();
    let out = dir.path().join("design");
    let o = run(&[
        "design-dump",
        "--formula",
        "cum ~ dev + (1 | AY)",
        "--data",
        &loss_csv(),
        "--out",
        out.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let overview: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(overview["n"], 55);
    assert!(out.join("X_mu.csv").exists() && out.join("Z_1.csv").exists());
    let dim = overview["dim"].as_u64().unwrap() as usize;

    let at = vec!["0.1"; dim].join(",");
    let o = run(&[
        "logdensity",
        "--formula",
        "cum ~ dev + (1 | AY)",
        "--data",
        &loss_csv(),
        "--at",
        &at,
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(v["gradient"].as_array().unwrap().len(), dim);
    assert!(v["log_density"].as_f64().unwrap().is_finite());
    let bad = run(&[
        "logdensity",
        "--formula",
        "cum ~ dev",
        "--data",
        &loss_csv(),
        "--at",
        "1",
    ]);
    assert_eq!(bad.status.code(), Some(3));
}
