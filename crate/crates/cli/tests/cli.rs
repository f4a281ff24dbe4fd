use std::fs;
use std::path::PathBuf;
use std::process::Command;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_ssvortex"))
}

fn scratch(name: &str) -> PathBuf {
    let dir = PathBuf::from(env!("CARGO_TARGET_TMPDIR")).join(name);
    let _ = fs::remove_dir_all(&dir);
    fs::create_dir_all(&dir).unwrap();
    dir
}

#[test]
fn help_lists_subcommands() {
    let out = bin().arg("--help").output().unwrap();
    assert!(out.status.success());
    let text = String::from_utf8_lossy(&out.stdout);
    for sub in ["verify", "resolvent", "semigroup", "spectrum", "shoot", "all"] {
        assert!(text.contains(sub), "{sub} missing from help");
    }
}

#[test]
fn empty_suite_list_writes_only_summary() {
    let dir = scratch("empty");
    let cfg = dir.join("run.toml");
    fs::write(&cfg, "suites = []\n").unwrap();
    let out_dir = dir.join("out");
    let out = bin().arg("all").arg("--config").arg(&cfg).arg("--out").arg(&out_dir).output().unwrap();
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let names: Vec<String> =
        fs::read_dir(&out_dir).unwrap().map(|e| e.unwrap().file_name().to_string_lossy().into_owned()).collect();
    assert_eq!(names, vec!["summary.json".to_string()]);
}

#[test]
fn lambda_left_of_a0_is_a_config_error_with_line() {
    let dir = scratch("badlambda");
    let cfg = dir.join("run.toml");
    fs::write(&cfg, "alpha = 0.5\nq = 2.0\nlambdas = [[-1.0, 0.0]]\n").unwrap();
    let out = bin().arg("resolvent").arg("--config").arg(&cfg).arg("--out").arg(dir.join("out")).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("run.toml:3:"), "{err}");
}

#[test]
fn unknown_key_is_rejected() {
    let dir = scratch("unknown");
    let cfg = dir.join("run.toml");
    fs::write(&cfg, "alpha = 0.5\nbogus = 1\n").unwrap();
    let out = bin().arg("verify").arg("--config").arg(&cfg).arg("--out").arg(dir.join("out")).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("run.toml:2:"));
}

#[test]
fn verify_gates_on_selected_identity_form() {
    let dir = scratch("verify");
    let cfg = dir.join("run.toml");
    fs::write(&cfg, "identity_form = \"corrected\"\n").unwrap();
    let out = bin().arg("verify").arg("--config").arg(&cfg).arg("--out").arg(dir.join("a")).output().unwrap();
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(dir.join("a/identities.json").exists());
    assert!(dir.join("a/identities.csv").exists());

    fs::write(&cfg, "identity_form = \"simplified\"\n").unwrap();
    let out = bin().arg("verify").arg("--config").arg(&cfg).arg("--out").arg(dir.join("b")).output().unwrap();
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stdout).contains("identities  FAIL"));
}

#[test]
fn invalid_flag_value_exits_two() {
    let dir = scratch("flag");
    let out = bin().args(["verify", "--alpha", "3.0", "--out"]).arg(dir.join("out")).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
}
