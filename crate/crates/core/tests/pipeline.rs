use clairaut::pipeline::{run_pipeline, RunConfig};

#[test]
fn partial_config_fills_defaults() {
    let cfg: RunConfig =
        serde_json::from_str(r#"{"q_max": 5, "profile": {"r_min": 0.4}}"#).unwrap();
    assert_eq!(cfg.q_max, 5);
    assert_eq!(cfg.profile.r_min, 0.4);
    assert_eq!(cfg.band, RunConfig::default().band);
    assert!(cfg.validate().is_ok());
}

#[test]
fn bad_tolerance_rejected() {
    let cfg: RunConfig = serde_json::from_str(r#"{"tolerances": {"event": -1.0}}"#).unwrap();
    assert!(cfg.validate().is_err());
}

#[test]
fn small_run_writes_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = RunConfig {
        q_max: 5,
        table_points: 40,
        clairaut_samples: 5,
        count_t_max: 200,
        out_dir: Some(dir.path().to_path_buf()),
        ..RunConfig::default()
    };
    let outcome = run_pipeline(&cfg).unwrap();
    assert!(outcome.passed(), "{:?}", outcome.failures);
    for name in [
        "summary.json",
        "catalog.csv",
        "catalog.json",
        "return_map.csv",
        "homology.json",
        "profile.json",
    ] {
        assert!(dir.path().join(name).exists(), "{name} missing");
    }
    let catalog = outcome.summary.catalog.unwrap();
    assert_eq!(catalog.size, 9);
    assert!(catalog.winding_exact && catalog.all_distinct);
    let homology = outcome.summary.homology.unwrap();
    assert!(homology.all_circle && homology.index_gap_one);
}
