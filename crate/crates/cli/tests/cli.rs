use std::process::{Command, Output};

use serde_json::Value;

fn mockrad(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_mockrad"))
        .args(args)
        .env_remove("MOCKRAD_PRECISION")
        .output()
        .expect("binary runs")
}

fn json(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).unwrap_or_else(|e| {
        panic!("not JSON ({e}): {}\n{}", String::from_utf8_lossy(&out.stdout), String::from_utf8_lossy(&out.stderr))
    })
}

#[test]
fn expand_lists_exact_coefficients() {
    let out = mockrad(&["expand", "5:f0", "--order", "20"]);
    assert_eq!(out.status.code(), Some(0));
    let v = json(&out);
    assert_eq!(v["schema"], "mockrad/1");
    assert_eq!(v["command"], "expand");
    let rows = v["result"].as_array().unwrap();
    assert_eq!(rows.len(), 20);
    assert_eq!(rows[0]["exponent"], "0");
    assert_eq!(rows[0]["numerator"], "1");
    assert_eq!(rows[0]["denominator"], "1");
    // n = 1 of the sum contributes q/(1+q), so the next coefficient is 1.
    assert_eq!(rows[1]["numerator"], "1");
    assert_eq!(v["config"]["precision-bits"], 128);
}

#[test]
fn expand_bilateral_series() {
    let out = mockrad(&["expand", "B:5:f0", "--order", "20"]);
    assert_eq!(out.status.code(), Some(0));
    let rows = json(&out)["result"].as_array().unwrap().clone();
    assert!(!rows.is_empty());
    assert!(rows.iter().all(|r| r["denominator"].as_str().unwrap().parse::<u64>().unwrap() >= 1));
    let csv = mockrad(&["expand", "B:5:f0", "--order", "20", "--format", "csv"]);
    let text = String::from_utf8(csv.stdout).unwrap();
    assert_eq!(text.lines().next(), Some("exponent,numerator,denominator"));
    assert_eq!(text.lines().count(), rows.len() + 1);
}

#[test]
fn unknown_function_exits_two_and_names_the_catalog() {
    let out = mockrad(&["expand", "nosuch"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("catalog"));
    assert!(out.stdout.is_empty());
}

#[test]
fn verify_watson_passes_and_faults_fail() {
    let out = mockrad(&["verify", "watson"]);
    assert_eq!(out.status.code(), Some(0));
    let v = json(&out);
    assert_eq!(v["result"]["passed"], true);
    let ids: Vec<&str> = v["result"]["checks"].as_array().unwrap().iter().map(|c| c["id"].as_str().unwrap()).collect();
    for id in ["C1", "C2", "C3", "C4"] {
        assert!(ids.contains(&id), "{ids:?}");
    }
    let bad = mockrad(&["verify", "watson", "--inject-fault"]);
    assert_eq!(bad.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&bad.stderr).contains("FAIL"));
}

#[test]
fn verify_rejects_unknown_suites_and_short_truncations() {
    assert_eq!(mockrad(&["verify", "order7"]).status.code(), Some(2));
    assert_eq!(mockrad(&["verify", "watson", "--trunc", "10"]).status.code(), Some(2));
}

#[test]
fn radial_exit_codes() {
    let out = mockrad(&["radial", "5:f0", "--zeta", "1/2"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let v = json(&out);
    assert_eq!(v["result"]["verdict"], "pass");
    assert_eq!(v["result"]["report"]["closed_form"]["re"].as_str().unwrap().parse::<f64>().unwrap(), 2.0);
    assert_eq!(mockrad(&["radial", "5:f0", "--zeta", "1/2", "--inject-fault"]).status.code(), Some(1));
    assert_eq!(mockrad(&["radial", "5:phi0", "--zeta", "1/6"]).status.code(), Some(3));
    assert_eq!(mockrad(&["radial", "5:f0", "--zeta", "2/4"]).status.code(), Some(4));
    assert_eq!(mockrad(&["radial", "5:f0", "--zeta", "half"]).status.code(), Some(4));
    assert_eq!(mockrad(&["radial", "nosuch", "--zeta", "1/2"]).status.code(), Some(2));
}

#[test]
fn radial_csv_has_one_row_per_grid_point() {
    let out = mockrad(&["radial", "5:f0", "--zeta", "1/2", "--grid", "4..10", "--format", "csv"]);
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8(out.stdout).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("r,re_diff,im_diff,residual"));
    assert_eq!(lines.count(), 7);
}

#[test]
fn config_file_and_precedence() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.conf");
    std::fs::write(&bad, "precision-bits = 256\ncolour = blue\n").unwrap();
    let out = mockrad(&["--config", bad.to_str().unwrap(), "expand", "5:f0"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("unknown key"));

    let good = dir.path().join("good.conf");
    std::fs::write(&good, "# reports\nprecision-bits = 256\nformat = json\n").unwrap();
    let v = json(&mockrad(&["--config", good.to_str().unwrap(), "expand", "5:f0"]));
    assert_eq!(v["config"]["precision-bits"], 256);
    let v = json(&mockrad(&["--config", good.to_str().unwrap(), "--precision", "320", "expand", "5:f0"]));
    assert_eq!(v["config"]["precision-bits"], 320);
    let env = Command::new(env!("CARGO_BIN_EXE_mockrad"))
        .args(["--config", good.to_str().unwrap(), "expand", "5:f0"])
        .env("MOCKRAD_PRECISION", "192")
        .output()
        .unwrap();
    assert_eq!(json(&env)["config"]["precision-bits"], 192);
    assert_eq!(mockrad(&["--precision", "32", "expand", "5:f0"]).status.code(), Some(2));
}

#[test]
fn out_directory_receives_the_report() {
    let dir = tempfile::tempdir().unwrap();
    let out = mockrad(&["--out", dir.path().to_str().unwrap(), "expand", "5:f0", "--order", "10"]);
    assert_eq!(out.status.code(), Some(0));
    assert!(out.stdout.is_empty());
    let path = dir.path().join("expand-5_f0.json");
    let v: Value = serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap();
    assert_eq!(v["result"].as_array().unwrap().len(), 10);
}

#[test]
fn catalog_lists_every_function() {
    let v = json(&mockrad(&["catalog"]));
    let names: Vec<&str> =
        v["result"]["functions"].as_array().unwrap().iter().map(|f| f["name"].as_str().unwrap()).collect();
    assert_eq!(names.len(), 28);
    assert_eq!(names.iter().filter(|n| n.starts_with("5:")).count(), 10);
    assert_eq!(names.iter().filter(|n| n.starts_with("6:")).count(), 8);
    assert_eq!(names.iter().filter(|n| n.starts_with("8:")).count(), 6);
}

#[test]
fn reports_are_byte_identical_across_runs() {
    let a = mockrad(&["verify", "watson"]);
    let b = mockrad(&["verify", "watson"]);
    assert_eq!(a.stdout, b.stdout);
    let a = mockrad(&["radial", "5:psi0", "--zeta", "0/1"]);
    let b = mockrad(&["radial", "5:psi0", "--zeta", "0/1"]);
    assert_eq!(a.stdout, b.stdout);
}
