use std::process::{Command, Output};

fn sta(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_sta")).args(args).output().expect("spawn sta")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

/// Data rows of every table: lines after each column header, stopping at summaries.
fn tables(text: &str) -> Vec<Vec<Vec<f64>>> {
    let mut out = Vec::new();
    let mut lines = text.lines().peekable();
    while let Some(l) = lines.next() {
        if !l.starts_with("# table:") {
            continue;
        }
        lines.next();
        let mut rows = Vec::new();
        while let Some(r) = lines.peek() {
            if r.is_empty() || r.starts_with('#') || r.contains(" = ") {
                break;
            }
            rows.push(r.split(',').map(|c| c.parse().unwrap_or(f64::NAN)).collect());
            lines.next();
        }
        out.push(rows);
    }
    out
}

#[test]
fn figure1_preset_has_four_round_trips() {
    let o = sta(&["traj", "--figure1", "--samples", "50"]);
    assert!(o.status.success());
    let t = tables(&stdout(&o));
    assert_eq!(t.len(), 4);
    let lambda = 0.866;
    for (i, rows) in t.iter().enumerate() {
        assert_eq!(rows.len(), 51);
        let first = &rows[0];
        let last = rows.last().unwrap();
        assert_eq!(first[1], 0.0);
        assert!((last[0] - 0.7).abs() < 1e-12);
        let m = lambda * (i + 1) as f64 / 8.0;
        // Round trip: peak excursion M at the midpoint, back at rest at t_f.
        let mid = &rows[25];
        assert!((mid[0] - 0.35).abs() < 1e-12);
        assert!((mid[1] - m).abs() < 1e-8 * m, "{} vs {m}", mid[1]);
        assert!(last[1].abs() < 1e-12 && last[2].abs() < 1e-8 && last[3].abs() < 1e-6);
    }
}

#[test]
fn noiseless_fringes_have_full_contrast_and_expected_period() {
    let o = sta(&["fringes", "--c-zN", "10", "--points", "801"]);
    assert!(o.status.success());
    let text = stdout(&o);
    let rows = &tables(&text)[0];
    let p: Vec<f64> = rows.iter().map(|r| r[3]).collect();
    let hi = p.iter().cloned().fold(f64::MIN, f64::max);
    let lo = p.iter().cloned().fold(f64::MAX, f64::min);
    assert!(hi > 0.999 && lo < 1e-3, "{lo} {hi}");
    let period: f64 = text
        .lines()
        .find_map(|l| l.strip_prefix("period_S_star_c10 = "))
        .unwrap()
        .parse()
        .unwrap();
    let expected = std::f64::consts::PI * 0.1054571817 / 10.0;
    assert!((period / expected - 1.0).abs() < 1e-3);
}

#[test]
fn negative_mass_is_a_config_error_naming_the_field() {
    let dir = std::env::temp_dir().join(format!("sta-cli-test-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let cfg = dir.join("bad.toml");
    std::fs::write(&cfg, "mass_kg = -1.4e-25\n").unwrap();
    let o = sta(&["--config", cfg.to_str().unwrap(), "traj", "--amplitude", "0.2"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("mass_kg"));
}

#[test]
fn validate_json_is_machine_readable() {
    let o = sta(&["--json", "validate", "--only", "1,2,3"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(v["provenance"]["seeds"][0], 12345);
    let crit = v["result"]["criteria"].as_array().unwrap();
    assert_eq!(crit.len(), 3);
    assert!(crit.iter().all(|c| c["passed"] == true));
}

#[test]
fn unknown_criterion_is_rejected() {
    let o = sta(&["validate", "--only", "12"]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn repeated_runs_are_byte_identical() {
    let args = ["--seed", "7", "mc", "--loss", "0.05", "--realizations", "400"];
    let a = sta(&args);
    let b = sta(&args);
    assert!(a.status.success());
    assert_eq!(a.stdout, b.stdout);
    let c = sta(&["--seed", "7", "--threads", "1", "mc", "--loss", "0.05", "--realizations", "400"]);
    assert_eq!(a.stdout.len(), c.stdout.len());
    let rows = |o: &Output| tables(&stdout(o));
    assert_eq!(rows(&a), rows(&c));
}

#[test]
fn optimize_reports_a_fitted_constant() {
    let o = sta(&["optimize", "--points", "30", "--grid-n", "1024"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let text = stdout(&o);
    let k: f64 = text.lines().find_map(|l| l.strip_prefix("k = ")).unwrap().parse().unwrap();
    assert!((150.0..200.0).contains(&k), "{k}");
}
