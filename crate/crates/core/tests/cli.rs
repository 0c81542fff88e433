use std::path::Path;
use std::process::Command;

const SMALL: &str = r#"
[model]
potential = "double-well"
params = [1.0, 1.0]
domain = [-3.0, 3.0]

[diffusion]
hbar_ratio = 1e-2
d0 = 0.05

[initial]
center = [1.0, 0.2]

[numerics]
t_final = 1.0
snapshots = 2
particles = 64
langevin_samples = 2000
seed = 7

[grid]
n = 128
phase_n = 48
"#;

fn qclab(args: &[&str]) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_qclab")).args(args).output().unwrap()
}

fn write_config(dir: &Path, body: &str) -> String {
    let p = dir.join("exp.toml");
    std::fs::write(&p, body).unwrap();
    p.to_string_lossy().into_owned()
}

fn listing(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut out: Vec<_> = std::fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let e = e.unwrap();
            (e.file_name().to_string_lossy().into_owned(), std::fs::read(e.path()).unwrap())
        })
        .collect();
    out.sort();
    out
}

#[test]
fn same_seed_gives_identical_files() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), SMALL);
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    for cmd in ["evolve-mixture", "evolve-langevin"] {
        for out in [&a, &b] {
            let o = qclab(&[cmd, "--config", &cfg, "--out", out.to_str().unwrap()]);
            assert!(o.status.success(), "{cmd}: {}", String::from_utf8_lossy(&o.stderr));
        }
    }
    let (la, lb) = (listing(&a), listing(&b));
    assert!(la.iter().any(|(n, _)| n == "mixture_0000.csv"));
    assert!(la.iter().any(|(n, _)| n == "langevin_0001.bin"));
    // config.toml records the output directory, which differs.
    let strip = |l: Vec<(String, Vec<u8>)>| l.into_iter().filter(|(n, _)| n != "config.toml").collect::<Vec<_>>();
    assert_eq!(strip(la), strip(lb));
}

#[test]
fn seed_override_changes_the_ensemble() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), SMALL);
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    for (out, seed) in [(&a, "1"), (&b, "2")] {
        let o = qclab(&["evolve-langevin", "--config", &cfg, "--seed", seed, "--out", out.to_str().unwrap()]);
        assert!(o.status.success());
    }
    let f = "langevin_0001.bin";
    assert_ne!(std::fs::read(a.join(f)).unwrap(), std::fs::read(b.join(f)).unwrap());
}

#[test]
fn scales_writes_one_row() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), SMALL);
    let out = tmp.path().join("s");
    let o = qclab(&["scales", "--config", &cfg, "--out", out.to_str().unwrap()]);
    assert!(o.status.success());
    let csv = std::fs::read_to_string(out.join("scales.csv")).unwrap();
    let lines: Vec<_> = csv.lines().collect();
    assert_eq!(lines.len(), 2);
    assert_eq!(lines[0], "tau_H,a_H,s_H,x_H,p_H,D0,z,epsilon(t)");
    assert_eq!(lines[1].split(',').count(), 8);
}

#[test]
fn bad_config_exits_with_code_two() {
    let tmp = tempfile::tempdir().unwrap();
    let closed = SMALL.replace("d0 = 0.05", "d0 = 0.0");
    let cfg = write_config(tmp.path(), &closed);
    let o = qclab(&["scales", "--config", &cfg, "--out", tmp.path().join("x").to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("z_cap"));
    let o = qclab(&["scales", "--config", &cfg, "--z-cap", "1.5", "--out", tmp.path().join("y").to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn physical_example_reports_json() {
    let o = qclab(&["physical-example"]);
    assert!(o.status.success());
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert!(v.is_object());
}
