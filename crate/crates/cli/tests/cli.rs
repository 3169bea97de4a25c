use std::path::Path;
use std::process::{Command, Output};

use tempfile::TempDir;

fn qcrb(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_qcrb"))
        .args(args)
        .current_dir(dir)
        .env_remove("QCRB_THREADS")
        .output()
        .expect("binary runs")
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let path = dir.join(name);
    std::fs::write(&path, text).unwrap();
    path.to_string_lossy().into_owned()
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8(o.stderr.clone()).unwrap()
}

/// Parses a CSV body, checking the header and that every row has its width.
fn table(text: &str, header: &[&str]) -> Vec<Vec<String>> {
    let mut lines = text.lines();
    assert_eq!(lines.next().unwrap(), header.join(","));
    lines
        .map(|l| {
            let row: Vec<String> = l.split(',').map(str::to_string).collect();
            assert_eq!(row.len(), header.len(), "{l}");
            row
        })
        .collect()
}

const VERIFY: [&str; 7] = ["case_id", "d", "N", "p", "trace_value", "bound", "pass"];

#[test]
fn verify_mixed_qubit_single_copy() {
    let dir = TempDir::new().unwrap();
    let m = write(
        dir.path(),
        "m.json",
        r#"{"command":"verify","model":"mixed_qubit","dims":[2],"copies":[1],"trials":100,"seed":11}"#,
    );
    let o = qcrb(&["verify", "--manifest", &m], dir.path());
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let rows = table(&stdout(&o), &VERIFY);
    let exhaustive: Vec<_> = rows.iter().filter(|r| r[0].starts_with("exhaustive")).collect();
    assert_eq!(exhaustive.len(), 100);
    for r in exhaustive {
        let t: f64 = r[4].parse().unwrap();
        assert!((t - 1.0).abs() <= 1e-8);
        assert_eq!(r[6], "true");
    }
    assert!(rows.iter().any(|r| r[0].starts_with("helstrom")));
}

#[test]
fn verify_pure_qutrit_two_copies() {
    let dir = TempDir::new().unwrap();
    let m = write(
        dir.path(),
        "m.json",
        r#"{"command":"verify","model":"pure_qudit","dims":[3],"copies":[2],"trials":10,"seed":12}"#,
    );
    let out = dir.path().join("v.csv");
    let o = qcrb(&["verify", "--manifest", &m, "--out", out.to_str().unwrap()], dir.path());
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let rows = table(&std::fs::read_to_string(out).unwrap(), &VERIFY);
    for r in rows.iter().filter(|r| r[0].starts_with("exhaustive")) {
        assert!((r[4].parse::<f64>().unwrap() - 4.0).abs() <= 1e-8);
    }
    let partial: Vec<_> = rows.iter().filter(|r| r[0].starts_with("partial")).collect();
    assert_eq!(partial.len(), 20);
    assert!(partial.iter().all(|r| r[6] == "true" && r[5].parse::<f64>().unwrap() == 2.0));
}

#[test]
fn counterexample_row() {
    let dir = TempDir::new().unwrap();
    let o = qcrb(&["counterexample"], dir.path());
    assert_eq!(o.status.code(), Some(0));
    let rows = table(&stdout(&o), &VERIFY);
    assert_eq!(rows.len(), 1);
    let r = &rows[0];
    assert_eq!(r[0], "counterexample");
    assert!((r[4].parse::<f64>().unwrap() - 3.0).abs() <= 1e-10);
    assert_eq!(r[5].parse::<f64>().unwrap(), 2.0);
    assert_eq!(r[6], "violation-expected");
}

#[test]
fn file_povm_is_checked() {
    let dir = TempDir::new().unwrap();
    let povm = write(dir.path(), "povm.json", &qcrb::design::counterexample_povm().to_json());
    let mixed = write(
        dir.path(),
        "mixed.json",
        &format!(
            r#"{{"command":"verify","model":"mixed_qubit","trials":1,"povm":{{"file":{povm:?}}},"theta":{{"values":[[0,0,0],[0.1,0.2,0.3]]}}}}"#
        ),
    );
    let o = qcrb(&["verify", "--manifest", &mixed], dir.path());
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let rows = table(&stdout(&o), &VERIFY);
    assert_eq!(rows[0][6], "violation-expected");

    // on pure states the same measurement must obey the bound
    let pure = write(
        dir.path(),
        "pure.json",
        &format!(
            r#"{{"command":"verify","model":"pure_qubit","trials":1,"povm":{{"file":{povm:?}}},"theta":{{"values":[[0.3,-0.2]]}}}}"#
        ),
    );
    let o = qcrb(&["verify", "--manifest", &pure], dir.path());
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let rows = table(&stdout(&o), &VERIFY);
    assert_eq!(rows[0][6], "true");
    assert!(rows[0][4].parse::<f64>().unwrap() <= 2.0 + 1e-8);
}

#[test]
fn design_reports_deviation_and_cost() {
    let dir = TempDir::new().unwrap();
    let m = write(
        dir.path(),
        "m.json",
        r#"{"command":"design","model":"mixed_qubit","trials":1,"theta":{"values":[[0,0,0.5]]},
            "target":{"kind":"cost_helstrom","fraction":1.0}}"#,
    );
    let out = dir.path().join("d.json");
    let o = qcrb(&["design", "--manifest", &m, "--out", out.to_str().unwrap()], dir.path());
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let err = stderr(&o);
    let cost = err.lines().find_map(|l| l.strip_prefix("min_cost = ")).unwrap();
    assert!((cost.parse::<f64>().unwrap() - 9.0).abs() < 1e-10);
    let doc: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(out).unwrap()).unwrap();
    assert_eq!(doc["kind"], "mixed");
    assert_eq!(doc["gammas"].as_array().unwrap().len(), 3);

    let axes = write(
        dir.path(),
        "axes.json",
        r#"{"command":"design","model":"mixed_qubit","trials":1,"theta":{"values":[[0,0,0]]},
            "target":{"kind":"constant_g","matrix":[[0.3333333333333333,0,0],[0,0.3333333333333333,0],[0,0,0.3333333333333333]]}}"#,
    );
    let o = qcrb(&["design", "--manifest", &axes], dir.path());
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let dev = stderr(&o).lines().find_map(|l| l.strip_prefix("deviation |I - G| = ").map(str::to_string)).unwrap();
    assert!(dev.parse::<f64>().unwrap() <= 1e-9);

    let pure = write(
        dir.path(),
        "pure.json",
        r#"{"command":"design","model":"pure_qubit","trials":1,"theta":{"values":[[1.0,2.0]]},
            "target":{"kind":"constant_g","matrix":[[0.6,0.1],[0.1,0.3]]}}"#,
    );
    let o = qcrb(&["design", "--manifest", &pure], dir.path());
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert!(stdout(&o).contains("\"kind\": \"pure\""));
}

#[test]
fn config_errors_exit_with_two() {
    let dir = TempDir::new().unwrap();
    let cases = [
        (
            "design",
            r#"{"command":"design","model":"mixed_qubit","trials":1,"theta":{"values":[[0,0,0.5]]},
                "target":{"kind":"constant_g","matrix":[[1,0.2,0],[0,1,0],[0,0,1]]}}"#,
            "target",
        ),
        ("simulate", r#"{"command":"simulate","model":"mixed_qubit","trials":0}"#, "trials"),
        ("simulate", r#"{"command":"simulate","model":"mixed_qubit","trials":"many"}"#, "trials"),
        (
            "design",
            r#"{"command":"design","model":"mixed_qubit","trials":1,"theta":{"values":[[0,0,0.5]]},
                "target":{"kind":"helstrom_fraction","fraction":0.9}}"#,
            "target",
        ),
        ("verify", r#"{"command":"design","model":"mixed_qubit","trials":1}"#, "command"),
    ];
    for (cmd, text, path) in cases {
        let m = write(dir.path(), "m.json", text);
        let o = qcrb(&[cmd, "--manifest", &m], dir.path());
        assert_eq!(o.status.code(), Some(2), "{text}: {}", stderr(&o));
        assert!(stderr(&o).contains(&format!("`{path}`")), "{}", stderr(&o));
    }
    let o = qcrb(&["verify", "--manifest", "missing.json"], dir.path());
    assert_eq!(o.status.code(), Some(2));
}

fn simulate_manifest(dir: &Path) -> String {
    write(
        dir,
        "sim.json",
        r#"{"command":"simulate","model":"mixed_qubit","copies":[1000,4000],
            "theta":{"values":[[0,0,0.5],[0.1,-0.2,0.3]]},
            "target":{"kind":"helstrom_fraction","fraction":0.3333333333333333},
            "trials":300,"seed":21}"#,
    )
}

#[test]
fn simulate_is_reproducible() {
    let dir = TempDir::new().unwrap();
    let m = simulate_manifest(dir.path());
    let a = qcrb(&["simulate", "--manifest", &m], dir.path());
    assert_eq!(a.status.code(), Some(0), "{}", stderr(&a));
    let b = Command::new(env!("CARGO_BIN_EXE_qcrb"))
        .args(["simulate", "--manifest", &m])
        .env("QCRB_THREADS", "2")
        .output()
        .unwrap();
    assert_eq!(a.stdout, b.stdout);

    let header = [
        "N", "trials", "theta_1", "theta_2", "theta_3", "policy", "a", "nv_11", "nv_12", "nv_13", "nv_22", "nv_23",
        "nv_33", "se_11", "se_12", "se_13", "se_22", "se_23", "se_33", "discard_rate", "trace_hinv_nv_inv",
        "rel_dev_w",
    ];
    let rows = table(&stdout(&a), &header);
    assert_eq!(rows.len(), 4);
    for r in &rows {
        assert_eq!(r[1], "300");
        assert_eq!(r[5], "project");
        let stat: f64 = r[20].parse().unwrap();
        assert!(stat > 0.5 && stat < 1.2, "{stat}");
    }

    // flags win over the manifest
    let c = qcrb(&["simulate", "--manifest", &m, "--seed", "22", "--policy", "discard"], dir.path());
    assert_eq!(c.status.code(), Some(0));
    assert_ne!(a.stdout, c.stdout);
    assert!(table(&stdout(&c), &header).iter().all(|r| r[5] == "discard"));
}

#[test]
fn emitted_manifest_round_trips() {
    let dir = TempDir::new().unwrap();
    let m = simulate_manifest(dir.path());
    let emitted = dir.path().join("emitted.json");
    let a = qcrb(
        &["simulate", "--manifest", &m, "--seed", "99", "--allocation", "multinomial", "--emit-manifest", emitted.to_str().unwrap()],
        dir.path(),
    );
    assert_eq!(a.status.code(), Some(0), "{}", stderr(&a));
    let text = std::fs::read_to_string(&emitted).unwrap();
    let value: serde_json::Value = serde_json::from_str(&text).unwrap();
    assert_eq!(value["seed"], 99);
    assert_eq!(value["allocation"], "multinomial");
    let b = qcrb(&["simulate", "--manifest", emitted.to_str().unwrap()], dir.path());
    assert_eq!(a.stdout, b.stdout);
    let again = dir.path().join("again.json");
    qcrb(&["simulate", "--manifest", emitted.to_str().unwrap(), "--emit-manifest", again.to_str().unwrap()], dir.path());
    assert_eq!(std::fs::read_to_string(again).unwrap(), text);
}

#[test]
fn covariant_rows() {
    let dir = TempDir::new().unwrap();
    let m = write(
        dir.path(),
        "cov.json",
        r#"{"command":"covariant","model":"pure_qubit","copies":[100,1000],"trials":200,
            "target":{"kind":"cost_helstrom","fraction":0.25},"estimator":"perfect"}"#,
    );
    let o = qcrb(&["covariant", "--manifest", &m], dir.path());
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let rows = table(&stdout(&o), &["N", "mean_cost", "stderr", "one_minus_inv_n"]);
    assert_eq!(rows.len(), 2);
    assert_eq!(rows[0][1].parse::<f64>().unwrap(), 1.0);
    assert_eq!(rows[1][3].parse::<f64>().unwrap(), 0.999);

    let protocol = write(
        dir.path(),
        "p.json",
        r#"{"command":"covariant","model":"pure_qubit","copies":[1000],"trials":2000,
            "target":{"kind":"cost_helstrom","fraction":0.25}}"#,
    );
    let o = qcrb(&["covariant", "--manifest", &protocol], dir.path());
    let rows = table(&stdout(&o), &["N", "mean_cost", "stderr", "one_minus_inv_n"]);
    let cost: f64 = rows[0][1].parse().unwrap();
    assert!(cost > 0.995 && cost < 1.0, "{cost}");
}

#[test]
fn thread_setting_is_validated() {
    let dir = TempDir::new().unwrap();
    let o = Command::new(env!("CARGO_BIN_EXE_qcrb"))
        .args(["counterexample"])
        .env("QCRB_THREADS", "0")
        .current_dir(dir.path())
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(2));
    let o = qcrb(&["counterexample", "--threads", "2"], dir.path());
    assert_eq!(o.status.code(), Some(0));
}
