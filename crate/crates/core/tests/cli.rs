use std::fs;
use std::path::Path;
use std::process::Command;

const BIN: &str = env!("CARGO_BIN_EXE_vlasov-decay");

fn write_config(dir: &Path, body: &str) -> std::path::PathBuf {
    let path = dir.join("run.cfg");
    fs::write(&path, body).unwrap();
    path
}

fn run(config: &Path, out: &Path, extra: &[&str]) -> std::process::Output {
    Command::new(BIN)
        .args(extra)
        .arg("--config")
        .arg(config)
        .arg("--out")
        .arg(out)
        .arg("--quiet")
        .output()
        .unwrap()
}

const FREE: &str = "subcommand = free-transport\nfamily = maxwellian\nd = 3\nsigma = 1\n[time]\ntimes = 5, 10, 20, 40\n";

#[test]
fn free_transport_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), FREE);
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    assert!(run(&config, &a, &[]).status.success());
    assert!(run(&config, &b, &[]).status.success());
    let ca = fs::read(a.join("free_transport.csv")).unwrap();
    let cb = fs::read(b.join("free_transport.csv")).unwrap();
    assert_eq!(ca, cb);
    assert!(a.join("manifest.json").exists());
}

#[test]
fn free_transport_sup_norm_decays_like_t_cubed() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), FREE);
    let out = dir.path().join("o");
    assert!(run(&config, &out, &[]).status.success());
    let text = fs::read_to_string(out.join("free_transport.csv")).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("t,k,L1,Linf"));
    let rows: Vec<(f64, f64)> = lines
        .map(|l| l.split(',').collect::<Vec<_>>())
        .filter(|c| c[1] == "0")
        .map(|c| (c[0].parse().unwrap(), c[3].parse().unwrap()))
        .collect();
    let (t0, a0) = rows[rows.len() - 2];
    let (t1, a1) = rows[rows.len() - 1];
    let slope = (a1 / a0).ln() / (t1 / t0).ln();
    assert!((slope + 3.0).abs() < 0.1, "slope {slope}");
}

#[test]
fn positional_subcommand_overrides_config() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), FREE);
    let out = dir.path().join("o");
    let output = run(&config, &out, &["penrose"]);
    assert!(output.status.success(), "{}", String::from_utf8_lossy(&output.stderr));
    assert!(out.join("penrose.csv").exists());
    assert!(!out.join("free_transport.csv").exists());
}

#[test]
fn invalid_config_exits_nonzero_with_line_numbers() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), "subcommand = penrose\nfamily = maxwellian\nd = 3\nsigma = -1\nbogus = 2\n");
    let out = dir.path().join("o");
    let output = run(&config, &out, &[]);
    assert_eq!(output.status.code(), Some(2));
    let err = String::from_utf8_lossy(&output.stderr);
    assert!(err.contains("sigma") && err.contains("bogus"), "{err}");
    assert!(!out.exists());
}

#[test]
fn failing_run_names_the_module() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(
        dir.path(),
        "subcommand = linres\nfamily = double_bump\nd = 3\nsigma = 1\nu = 1\n[time]\nhorizon = 1\n",
    );
    let out = dir.path().join("o");
    let output = run(&config, &out, &[]);
    assert!(!output.status.success());
    assert!(String::from_utf8_lossy(&output.stderr).contains("[response]"));
    assert!(!out.join("linres.csv").exists());
}
