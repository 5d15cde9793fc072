use serde_json::Value;
use std::path::Path;
use std::process::{Command, Output};

fn semimax(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_semimax")).args(args).output().unwrap()
}

fn summary(dir: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(dir.join("summary.json")).unwrap()).unwrap()
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p.display().to_string()
}

#[test]
fn identity_ellipticity_report() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write(
        tmp.path(),
        "id.toml",
        r#"
experiment = "ellipticity"
[field]
generator = "constant"
matrix = [[[1.0, 0.0]]]
"#,
    );
    let out = tmp.path().join("out");
    let o = semimax(&["ellipticity", "--config", &cfg, "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let s = summary(&out);
    assert_eq!(s["values"]["lambda"], 1.0);
    assert_eq!(s["values"]["p_min"], 1.0);
    assert!(s["values"].get("p_max").is_none());
    assert!(s["checks"].as_array().unwrap().iter().all(|c| c["passed"] == true));
    assert!(out.join("ellipticity.csv").exists());
    assert!(out.join("timing.json").exists());
    assert_eq!(s["config_hash"].as_str().unwrap().len(), 64);
}

#[test]
fn malformed_field_names_the_key() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write(
        tmp.path(),
        "bad.toml",
        r#"
[field]
generator = "checkerboard"
a1 = [[[1.0, 0.0]]]
a2 = [[[1.0]]]
"#,
    );
    let o = semimax(&["maximal", "--config", &cfg, "--out", tmp.path().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("field.a2"), "{err}");
}

#[test]
fn command_and_config_must_agree() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write(tmp.path(), "k.toml", "experiment = \"duhamel\"\n");
    let o = semimax(&["transfer", "--config", &cfg, "--out", tmp.path().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn reruns_are_byte_identical() {
    let tmp = tempfile::tempdir().unwrap();
    let run = |name: &str| {
        let out = tmp.path().join(name);
        let o = semimax(&["maximal", "--seed", "5", "--resolution", "33", "--out", out.to_str().unwrap()]);
        assert!(o.status.success());
        std::fs::read(out.join("summary.json")).unwrap()
    };
    assert_eq!(run("a"), run("b"));
}

#[test]
fn failing_check_sets_exit_status() {
    let tmp = tempfile::tempdir().unwrap();
    // an absurd tolerance on the beta-measure mass fails
    let cfg = write(tmp.path(), "f.toml", "[tolerances]\nbeta_mass = 1e-300\n");
    let out = tmp.path().join("out");
    let o = semimax(&["duhamel", "--config", &cfg, "--resolution", "33", "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    let s = summary(&out);
    let failing: Vec<&Value> = s["checks"].as_array().unwrap().iter().filter(|c| c["passed"] == false).collect();
    assert_eq!(failing.len(), 1);
    assert_eq!(failing[0]["name"], "beta_mass");

    let r = semimax(&["report", out.join("summary.json").to_str().unwrap()]);
    assert_eq!(r.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&r.stdout).contains("FAIL"));
}

#[test]
fn report_tables() {
    let r = semimax(&["report"]);
    assert!(r.status.success());
    assert!(r.stdout.is_empty());

    let tmp = tempfile::tempdir().unwrap();
    let mut paths = Vec::new();
    for n in ["33", "65"] {
        let out = tmp.path().join(n);
        let o = semimax(&["square-function", "--resolution", n, "--out", out.to_str().unwrap()]);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stdout));
        paths.push(out.join("summary.json").display().to_string());
    }
    let mut args = vec!["report"];
    args.extend(paths.iter().map(String::as_str));
    let r = semimax(&args);
    assert!(r.status.success());
    let text = String::from_utf8_lossy(&r.stdout);
    let line = text.lines().find(|l| l.contains("bound_constant ")).unwrap();
    // the drift column holds a number for rows present at both resolutions
    assert!(!line.trim_end().ends_with('-'), "{line}");
    assert!(text.lines().next().unwrap().contains("drift"));
}
