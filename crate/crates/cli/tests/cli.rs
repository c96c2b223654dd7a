use std::process::Command;

fn qclat() -> Command {
    Command::new(env!("CARGO_BIN_EXE_qclat"))
}

#[test]
fn lists_presets() {
    let out = qclat().args(["presets", "list"]).output().unwrap();
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    for name in ["square-stretch-iss", "tri-tension-fs-24", "notched-tension-iss"] {
        assert!(text.lines().any(|l| l == name), "{name} missing from {text}");
    }
}

#[test]
fn shows_preset_source() {
    let out = qclat()
        .args(["presets", "show", "tri-tension-fs-24"])
        .output()
        .unwrap();
    assert!(out.status.success());
    assert!(String::from_utf8(out.stdout).unwrap().contains("type = \"triangular\""));
}

#[test]
fn runs_a_preset_into_a_directory() {
    let dir = tempfile::tempdir().unwrap();
    let out = qclat()
        .args(["run", "tri-tension-fs-24", "--scheme", "ess", "--out"])
        .arg(dir.path())
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.contains("scheme ess"));
    assert!(text.contains("e_disp"));
    for file in ["_fields.csv", "_reference_fields.csv", "_summary.csv"] {
        assert!(dir.path().join(format!("tri-tension-fs-24{file}")).is_file(), "{file}");
    }
}

#[test]
fn runs_a_config_file() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("tiny.toml");
    std::fs::write(
        &cfg,
        r#"
name = "tiny"
[lattice]
type = "square"
nx = 4
ny = 4
bracing = "x_braced"
[[boundary]]
set = "bottom"
ux = 0.0
uy = 0.0
[[boundary]]
set = "top"
uy = 0.1
"#,
    )
    .unwrap();
    let out = qclat()
        .arg("run")
        .arg(&cfg)
        .arg("--out")
        .arg(dir.path())
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(dir.path().join("tiny_summary.csv").is_file());
}

#[test]
fn unknown_config_exits_with_config_code() {
    let out = qclat().args(["run", "no-such-case"]).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8(out.stderr).unwrap().starts_with("error[config]"));
}

#[test]
fn unknown_scheme_exits_with_sampling_code() {
    let out = qclat()
        .args(["run", "tri-tension-fs-24", "--scheme", "xyz"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(5));
}
