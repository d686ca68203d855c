use std::path::{Path, PathBuf};
use std::process::Command;

use hvi_core::runner::convergence_table;
use serde_json::Value;

fn hvi() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_hvi"));
    c.env_remove("HVI_OUT_DIR").env_remove("HVI_SEED");
    c
}

fn scenario(dir: &Path, name: &str, body: &str) -> PathBuf {
    let p = dir.join(name);
    std::fs::write(&p, body).unwrap();
    p
}

fn run(cmd: &mut Command) -> (i32, Vec<Value>) {
    let out = cmd.output().unwrap();
    let stdout = String::from_utf8(out.stdout).unwrap();
    let docs = stdout.lines().map(|l| serde_json::from_str(l).expect("stdout is JSON")).collect();
    (out.status.code().unwrap(), docs)
}

#[test]
fn passing_ledger_exits_zero() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = scenario(
        dir.path(),
        "l.json",
        r#"{"version":1,"kind":"abstract","problem":{"builtin":"ledger","m_a":2,"m_j":1,"m_b":1,"m_g":0}}"#,
    );
    let (code, docs) = run(hvi().args(["check", "--config"]).arg(&cfg));
    assert_eq!(code, 0);
    assert_eq!(docs[0]["pass"], true);
}

#[test]
fn gate_violation_exits_two_before_iterating() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = scenario(
        dir.path(),
        "g.json",
        r#"{"version":1,"kind":"abstract","problem":{"builtin":"coupled","m_a":1,"m_j":1.2}}"#,
    );
    let (code, docs) = run(hvi().args(["solve", "--config"]).arg(&cfg));
    assert_eq!(code, 2);
    assert_eq!(docs[0]["error"]["code"], "gate");
    assert!(docs[0]["error"]["margins"][0].as_f64().unwrap() < 0.0);
    let (code, docs) = run(hvi().args(["check", "--config"]).arg(&cfg));
    assert_eq!(code, 2);
    assert_eq!(docs[0]["pass"], false);
}

#[test]
fn malformed_configs_give_structured_errors() {
    let dir = tempfile::tempdir().unwrap();
    let fixtures = [
        "",
        "{",
        "[]",
        r#"{"kind":"abstract"}"#,
        r#"{"version":7,"kind":"abstract"}"#,
        r#"{"version":1,"kind":"plasma"}"#,
        r#"{"version":1,"kind":"abstract","grid":{"T":-1}}"#,
        r#"{"version":1,"kind":"abstract","grid":{"N":0}}"#,
        r#"{"version":1,"kind":"abstract","problem":{"builtin":"missing"}}"#,
        r#"{"version":1,"kind":"abstract","problem":{"builtin":"coupled","dim_v":0}}"#,
        r#"{"version":1,"kind":"abstract","solver":{"tol":0}}"#,
        r#"{"version":1,"kind":"abstract","solver":{"mode":"sideways"}}"#,
        r#"{"version":1,"kind":"abstract","convergence":{"steps":[64,32]}}"#,
        r#"{"version":1,"kind":"contact","problem":{"mesh":{"nx":0}}}"#,
        r#"{"version":1,"kind":"contact","problem":{"material":{"visc_mu":-1}}}"#,
        r#"{"version":1,"kind":"dvhi","problem":{"builtin":"benchmark","extra":1}}"#,
        r#"{"version":1,"kind":"abstract","outputs":{"formats":["pdf"]}}"#,
    ];
    for (i, body) in fixtures.iter().enumerate() {
        let cfg = scenario(dir.path(), &format!("bad{i}.json"), body);
        let (code, docs) = run(hvi().args(["solve", "--config"]).arg(&cfg));
        assert_eq!(code, 4, "fixture {i}: {body}");
        assert_eq!(docs[0]["error"]["code"], "config", "fixture {i}");
    }
    let (code, docs) = run(hvi().args(["solve", "--config"]).arg(dir.path().join("absent.json")));
    assert_eq!((code, docs[0]["error"]["code"].as_str()), (4, Some("config")));
    let (code, docs) = run(hvi().args(["solve"]));
    assert_eq!((code, docs[0]["error"]["code"].as_str()), (4, Some("argument")));
}

#[test]
fn parse_errors_point_at_the_offending_line() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = scenario(dir.path(), "p.json", "{\n \"version\": 1,\n \"kind\": \"abstract\",\n \"grid\": {\"N\": \"many\"}\n}\n");
    let (_, docs) = run(hvi().args(["solve", "--config"]).arg(&cfg));
    assert_eq!(docs[0]["error"]["line"], 4);
}

#[test]
fn identical_runs_give_identical_files() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = scenario(dir.path(), "c.json", r#"{"version":1,"kind":"abstract","grid":{"N":32},"seed":3}"#);
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    let (_, ra) = run(hvi().args(["solve", "--config"]).arg(&cfg).arg("--out").arg(&a));
    let (_, rb) = run(hvi().args(["solve", "--config"]).arg(&cfg).env("HVI_OUT_DIR", &b));
    assert_eq!(ra[0]["scenario_digest"], rb[0]["scenario_digest"]);
    for f in ["w.csv", "theta.csv"] {
        assert_eq!(std::fs::read(a.join(f)).unwrap(), std::fs::read(b.join(f)).unwrap());
    }
    let listed: Vec<&str> = ra[0]["manifest"].as_array().unwrap().iter().map(|e| e["path"].as_str().unwrap()).collect();
    let mut on_disk: Vec<String> =
        std::fs::read_dir(&a).unwrap().map(|e| e.unwrap().file_name().into_string().unwrap()).collect();
    on_disk.sort();
    let mut listed_sorted: Vec<String> = listed.iter().map(|s| s.to_string()).collect();
    listed_sorted.sort();
    assert_eq!(listed_sorted, on_disk);
    let (_, rc) = run(hvi().args(["solve", "--config"]).arg(&cfg).env("HVI_SEED", "4"));
    assert_ne!(ra[0]["scenario_digest"], rc[0]["scenario_digest"]);
}

#[test]
fn convergence_table_is_recomputable_from_files() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = scenario(
        dir.path(),
        "m.json",
        r#"{"version":1,"kind":"abstract","problem":{"builtin":"manufactured"},"convergence":{"steps":[16,32,64]}}"#,
    );
    let out = dir.path().join("out");
    let (code, docs) = run(hvi().args(["convergence", "--jobs", "3", "--config"]).arg(&cfg).arg("--out").arg(&out));
    assert_eq!(code, 0);
    let runs: Vec<(usize, String, String)> = [16, 32, 64]
        .iter()
        .map(|n| {
            let read = |f: String| std::fs::read_to_string(out.join(f)).unwrap();
            (*n, read(format!("w_N{n}.csv")), read(format!("theta_N{n}.csv")))
        })
        .collect();
    let table = convergence_table(&runs, None).unwrap();
    let reported = docs[0]["details"]["table"].as_array().unwrap();
    assert_eq!(table.len(), reported.len());
    for (row, rep) in table.iter().zip(reported).filter(|(r, _)| r.difference.is_some()) {
        let (a, b) = (row.difference.unwrap(), rep["difference"].as_f64().unwrap());
        assert!((a - b).abs() <= 1e-14 * a.abs());
    }
    let order = table[0].observed_order.unwrap();
    assert!((0.8..=1.2).contains(&order), "{order}");
}

#[test]
fn sweeps_run_in_parallel_into_subdirectories() {
    let dir = tempfile::tempdir().unwrap();
    let a = scenario(dir.path(), "one.json", r#"{"version":1,"kind":"abstract","problem":{"builtin":"linear_decay"}}"#);
    let b = scenario(dir.path(), "two.json", r#"{"version":1,"kind":"dvhi","grid":{"N":16}}"#);
    let out = dir.path().join("sweep");
    let (code, docs) =
        run(hvi().args(["solve", "--jobs", "2", "--config"]).arg(&a).arg("--config").arg(&b).arg("--out").arg(&out));
    assert_eq!(code, 0);
    assert_eq!(docs.len(), 2);
    assert!(out.join("one/w.csv").exists() && out.join("two/w.csv").exists());
    assert!(docs[1]["details"]["inequality"]["min_slack"].as_f64().unwrap() >= -1e-6);
}

#[test]
fn contact_run_writes_vtk() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = scenario(
        dir.path(),
        "k.json",
        r#"{"version":1,"kind":"contact","grid":{"N":8},"outputs":{"formats":["vtk","json"],"vtk_stride":4}}"#,
    );
    let out = dir.path().join("out");
    let (code, docs) = run(hvi().args(["contact", "--config"]).arg(&cfg).arg("--out").arg(&out));
    assert_eq!(code, 0, "{docs:?}");
    let vtk = std::fs::read_to_string(out.join("contact_00008.vtk")).unwrap();
    assert!(vtk.contains("CELL_TYPES 64") && vtk.contains("TENSORS stress double"));
    assert!(out.join("contact_00004.vtk").exists() && !out.join("w.csv").exists());
    let (code, _) = run(hvi().args(["dvhi", "--config"]).arg(&cfg));
    assert_eq!(code, 4);
}
