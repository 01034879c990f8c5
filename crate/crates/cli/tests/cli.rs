use std::fs;
use std::process::Command;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_qshiftdp"))
}

#[test]
fn flags_override_the_config_file() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("exp.toml");
    let out = dir.path().join("out");
    fs::write(
        &cfg,
        "[dataset]\nn_train = 200\nn_test = 50\n[train]\nsteps = 2\nbatch = 16\nmode = \"adaptive\"\nshots = 100\n",
    )
    .unwrap();
    let status = bin()
        .args(["--config", cfg.to_str().unwrap(), "--mode", "qshiftdp,non-private", "--eps", "0.5", "--seed", "1,2"])
        .args(["--steps", "3", "--out", out.to_str().unwrap()])
        .output()
        .unwrap();
    assert!(status.status.success(), "{}", String::from_utf8_lossy(&status.stderr));
    let mut names: Vec<String> = fs::read_dir(&out).unwrap().map(|e| e.unwrap().file_name().into_string().unwrap()).collect();
    names.sort();
    assert_eq!(names.len(), 8);
    assert!(names.contains(&"qshiftdp_eps0.5_shots100_alpha0_seed2.json".to_string()), "{names:?}");
    let csv = fs::read_to_string(out.join("non-private_eps0.5_shots100_alpha0_seed1.csv")).unwrap();
    assert_eq!(csv.lines().count(), 4);
    let json = fs::read_to_string(out.join("qshiftdp_eps0.5_shots100_alpha0_seed1.json")).unwrap();
    assert!(json.contains("\"batch\": 16"));
    assert!(json.contains("\"wall_time_s\": null"));
}

#[test]
fn unknown_mode_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let r = bin().args(["--mode", "sgd", "--out", out.to_str().unwrap()]).output().unwrap();
    assert!(!r.status.success());
    assert!(String::from_utf8_lossy(&r.stderr).contains("sgd"));
    assert!(!out.exists());
}

#[test]
fn invalid_values_are_reported() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let r = bin().args(["--batch", "5000", "--out", out.to_str().unwrap()]).output().unwrap();
    assert!(!r.status.success());
    let err = String::from_utf8_lossy(&r.stderr);
    assert!(err.contains("batch"), "{err}");
    assert!(!out.exists());
}
