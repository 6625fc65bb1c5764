use mcflab::config::{apply_override, from_table, parse_config, to_table, ExperimentConfig};
use mcflab::presets::{self, PRESETS};
use mcflab::LabError;

fn config_error(result: mcflab::Result<ExperimentConfig>) -> (String, String) {
    match result {
        Err(LabError::Config { path, message }) => (path, message),
        other => panic!("expected a config error, got {other:?}"),
    }
}

fn preset(name: &str) -> ExperimentConfig {
    presets::find(name).unwrap().config()
}

type Edit = Box<dyn Fn(&mut ExperimentConfig)>;

fn validated(cfg: ExperimentConfig) -> mcflab::Result<ExperimentConfig> {
    cfg.validate().map(|_| cfg)
}

#[test]
fn catalog_has_the_required_presets() {
    assert!(PRESETS.len() >= 7);
    for name in ["sphere-exact", "rate-2n", "lemma-sweep", "huisken-monitors", "non-c3", "corollary-c3", "optimality"] {
        let cfg = preset(name);
        assert_eq!(cfg.name, name);
        cfg.validate().unwrap_or_else(|e| panic!("{name}: {e}"));
    }
    assert!(matches!(presets::find("nope"), Err(LabError::UnknownPreset(_))));
}

#[test]
fn presets_round_trip_through_toml() {
    for p in PRESETS {
        let cfg = p.config();
        let text = cfg.to_toml().unwrap();
        let back = parse_config(&text, &[]).unwrap();
        assert_eq!(back, cfg, "{}", p.name);
        assert_eq!(back.to_toml().unwrap(), text);
        assert_eq!(back.hash().unwrap(), cfg.hash().unwrap());
    }
}

#[test]
fn minimal_config_gets_defaults() {
    let cfg = parse_config("name = \"m\"\nn = 3\nframe = \"rescaled\"\n", &[]).unwrap();
    cfg.validate().unwrap();
    assert_eq!(cfg.nodes, 32);
    assert_eq!(cfg.initial.degree, 2);
    assert_eq!(cfg.s_max(), 24.0);
    assert_eq!(cfg.base_radius(), 3f64.sqrt());
    assert_eq!(cfg.output_dir(), "m");
}

#[test]
fn overrides_set_nested_keys() {
    let mut table = to_table(&preset("rate-2n")).unwrap();
    apply_override(&mut table, "n=3").unwrap();
    apply_override(&mut table, "integrator.tol = 1e-8").unwrap();
    apply_override(&mut table, "probes.rate_fit.degrees=[2, 4]").unwrap();
    apply_override(&mut table, "output_dir=runs/x").unwrap();
    let cfg = from_table(table).unwrap();
    assert_eq!(cfg.n, 3);
    assert_eq!(cfg.integrator.tol, 1e-8);
    assert_eq!(cfg.probes.rate_fit.unwrap().degrees, vec![2, 4]);
    assert_eq!(cfg.output_dir.as_deref(), Some("runs/x"));

    let mut table = to_table(&preset("rate-2n")).unwrap();
    assert!(matches!(apply_override(&mut table, "n"), Err(LabError::BadOverride(_))));
    assert!(matches!(apply_override(&mut table, "a..b=1"), Err(LabError::BadOverride(_))));
    let (path, _) = config_error(apply_override(&mut table, "n.x=1").map(|_| preset("rate-2n")));
    assert_eq!(path, "n");
}

#[test]
fn parse_errors_carry_field_paths() {
    let base = preset("rate-2n").to_toml().unwrap();
    let (path, msg) = config_error(parse_config(&base, &["probes.rate_fit.tol=\"abc\"".into()]));
    assert_eq!(path, "probes.rate_fit.tol");
    assert!(msg.contains("f64"), "{msg}");
    let (path, _) = config_error(parse_config(&base, &["integrator.bogus=1".into()]));
    assert_eq!(path, "integrator.bogus");
    let (path, _) = config_error(parse_config(&base, &["frame=\"sideways\"".into()]));
    assert_eq!(path, "frame");
    let (path, _) = config_error(parse_config("n = 2\nframe = \"mcf\"", &[]));
    assert_eq!(path, "<root>");
    let (path, _) = config_error(parse_config("name = [", &[]));
    assert_eq!(path, "<toml>");
}

#[test]
fn validation_errors_carry_field_paths() {
    let cases: Vec<(&str, Edit, &str)> = vec![
        ("rate-2n", Box::new(|c| c.initial.amplitude = 0.0500001), "initial.amplitude"),
        ("rate-2n", Box::new(|c| c.initial.amplitude = -0.01), "initial.amplitude"),
        ("rate-2n", Box::new(|c| c.initial.degree = 40), "initial.degree"),
        ("rate-2n", Box::new(|c| c.nodes = 4), "nodes"),
        ("rate-2n", Box::new(|c| c.n = 0), "n"),
        ("rate-2n", Box::new(|c| c.name = "a b".into()), "name"),
        ("rate-2n", Box::new(|c| c.output_dir = Some("../up".into())), "output_dir"),
        ("rate-2n", Box::new(|c| c.integrator.tol = 0.0), "integrator"),
        ("rate-2n", Box::new(|c| c.horizon.s_max = Some(-1.0)), "horizon.s_max"),
        ("rate-2n", Box::new(|c| c.frame = mcflab::config::FrameChoice::Mcf), "probes.rate_fit"),
        ("rate-2n", Box::new(|c| c.initial.tune_degree_two = true), "initial.tune_degree_two"),
        ("huisken-monitors", Box::new(|c| c.frame = mcflab::config::FrameChoice::Mcf), "probes.huisken"),
        ("non-c3", Box::new(|c| c.probes.arrival = None), "probes.c3"),
        ("non-c3", Box::new(|c| c.frame = mcflab::config::FrameChoice::Rescaled), "probes.arrival"),
        (
            "corollary-c3",
            Box::new(|c| c.probes.corollary.as_mut().unwrap().degree = Some(1)),
            "probes.corollary.degree",
        ),
        ("sphere-exact", Box::new(|c| c.initial.kind = mcflab::config::InitialKind::Perturbed), "probes.sphere_law"),
        ("lemma-sweep", Box::new(|c| c.probes.lemma_sweep = None), "frame"),
        ("lemma-sweep", Box::new(|c| c.horizon.pause_at = Some(1.0)), "horizon.pause_at"),
    ];
    for (name, edit, expected) in cases {
        let mut cfg = preset(name);
        edit(&mut cfg);
        let (path, msg) = config_error(validated(cfg));
        assert_eq!(path, expected, "{name}: {msg}");
    }
}

#[test]
fn amplitude_guard_is_inclusive() {
    let mut cfg = preset("rate-2n");
    cfg.initial.amplitude = 0.05;
    cfg.validate().unwrap();
    // a sphere ignores the amplitude
    let mut sphere = preset("sphere-exact");
    sphere.initial.amplitude = 1.0;
    sphere.validate().unwrap();
}
