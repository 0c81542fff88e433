use std::path::Path;

use qclab::config::ExperimentConfig;

fn repo_config(name: &str) -> ExperimentConfig {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs").join(name);
    ExperimentConfig::load(&path).unwrap()
}

#[test]
fn shipped_configs_resolve_and_round_trip() {
    for name in ["harmonic.toml", "double_well.toml", "breakdown.toml"] {
        let cfg = repo_config(name);
        cfg.resolve().unwrap_or_else(|e| panic!("{name}: {e}"));
        let again = ExperimentConfig::parse(&cfg.to_toml_string().unwrap()).unwrap();
        assert_eq!(cfg, again, "{name}");
    }
}

const CLOSED: &str = r#"
[model]
potential = "double-well"
params = [1.0, 1.0]
domain = [-2.0, 2.0]

[diffusion]
hbar_ratio = 1e-2
d0 = 0.0

[initial]
center = [0.5, 0.0]
"#;

#[test]
fn zero_diffusion_needs_a_z_cap() {
    let err = ExperimentConfig::parse(CLOSED).unwrap_err().to_string();
    assert!(err.contains("z_cap"), "{err}");
    let mut raw = ExperimentConfig::parse_raw(CLOSED).unwrap();
    raw.numerics.z_cap = Some(2.0);
    raw.check(CLOSED).unwrap();
    let capped = format!("{CLOSED}\n[numerics]\nz_cap = 2.0\n");
    let exp = ExperimentConfig::parse(&capped).unwrap().resolve().unwrap();
    assert_eq!(exp.scales.z_in_force().unwrap(), 2.0);
}

#[test]
fn unknown_keys_are_rejected() {
    let bad = CLOSED.replace("d0 = 0.0", "d0 = 0.0\ndiffusion_typo = 1.0");
    assert!(ExperimentConfig::parse(&bad).is_err());
}

#[test]
fn initial_state_outside_the_domain_is_rejected() {
    let bad = format!("{}\n[numerics]\nz_cap = 2.0\n", CLOSED.replace("center = [0.5, 0.0]", "center = [3.0, 0.0]"));
    let err = ExperimentConfig::parse(&bad).unwrap_err().to_string();
    assert!(err.contains("[initial] center"), "{err}");
}
