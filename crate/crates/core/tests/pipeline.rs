use std::path::Path;

use unlearnlab::biograph::{Attribute, GenerationConfig, Split};
use unlearnlab::lab::{self, ExperimentConfig, ModelSpec, RunOptions, UnlearnBlock, UnlearnHyper};
use unlearnlab::nanolm::TrainConfig;
use unlearnlab::unlearner::Method;

fn tiny(out: &Path) -> ExperimentConfig {
    let mut cfg = ExperimentConfig::desk(out.to_path_buf());
    cfg.name = "tiny".into();
    cfg.generation = GenerationConfig { n_persons: 24, ..GenerationConfig::default() };
    cfg.pack_length = 64;
    cfg.models = vec![ModelSpec {
        name: "m".into(),
        preset: None,
        n_layers: Some(1),
        n_heads: Some(2),
        hidden: Some(16),
        seed: 3,
        epochs: None,
        learning_rate: None,
    }];
    cfg.train = TrainConfig { epochs: 2, batch_size: 8, eval_every: 1, ..TrainConfig::default() };
    cfg.eval.persons_per_split = 3;
    cfg.eval.pretrain_attributes = vec![Attribute::Employer];
    cfg.unlearn = vec![UnlearnBlock {
        models: vec![],
        methods: vec![Method::GradientAscent, Method::Idk],
        splits: vec![Split::HighCount],
        attributes: vec![Attribute::Employer],
        seeds: vec![0, 1],
        deltas: vec![],
        hyper: UnlearnHyper { epochs: 2, batch_size: 2, ..UnlearnHyper::default() },
    }];
    cfg
}

#[test]
fn end_to_end_cached_and_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = tiny(&dir.path().join("a"));
    let (m1, s1) = lab::run_experiment(&cfg, &RunOptions::default()).unwrap();
    assert!(m1.completed);
    assert_eq!(s1.cells.len(), 4);
    for (_, trace) in &s1.cells {
        assert_eq!(trace.len(), 3);
        assert_eq!(trace[0].metrics.len(), lab::UNLEARN_METRICS.len());
    }
    let ga = s1.unlearn.iter().find(|a| a.group.method == Method::GradientAscent && a.metric == "target_qa").unwrap();
    assert_eq!(ga.points.last().unwrap().1.n, 2);
    assert!(dir.path().join("a/figures/unlearn.csv").exists());
    assert!(dir.path().join("a/figures/pretrain_m.svg").exists());

    // identical config: no-op
    let (m2, s2) = lab::run_experiment(&cfg, &RunOptions::default()).unwrap();
    assert_eq!(m1, m2);
    assert_eq!(s1, s2);

    // a fresh directory reproduces the same numbers
    let (_, s3) = lab::run_experiment(&tiny(&dir.path().join("b")), &RunOptions::default()).unwrap();
    assert_eq!(s1.cells, s3.cells);
    assert_eq!(s1.models[0].pretrain, s3.models[0].pretrain);

    // resuming after removing the manifest reuses every stage
    std::fs::remove_file(dir.path().join("a/manifest.json")).unwrap();
    let (m4, _) = lab::run_experiment(&cfg, &RunOptions::default()).unwrap();
    assert_eq!(m1, m4);

    let rep = lab::report(&[m1]).unwrap();
    assert_eq!(rep.finals.len(), 2);
    assert!(rep.warnings.is_empty());
    assert!(lab::render_report(&rep).contains("target_qa"));
}

#[test]
fn single_cell_matrix_and_config_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = tiny(&dir.path().join("one"));
    cfg.unlearn[0].methods = vec![Method::Simnpo];
    cfg.unlearn[0].seeds = vec![7];
    assert_eq!(cfg.cells().len(), 1);
    let toml_path = dir.path().join("exp.toml");
    std::fs::write(&toml_path, cfg.to_toml().unwrap()).unwrap();
    let back = ExperimentConfig::load(&toml_path).unwrap();
    assert_eq!(back, cfg);
    let (m, s) = lab::run_experiment(&back, &RunOptions::default()).unwrap();
    assert_eq!(s.cells.len(), 1);
    assert_eq!(m.stages.iter().filter(|st| st.stage.starts_with("unlearn:")).count(), 1);

    let mut bad = cfg.clone();
    bad.schema_version = 99;
    assert!(bad.validate().is_err());
    bad = cfg.clone();
    bad.unlearn[0].seeds.clear();
    assert!(bad.validate().is_err());
    bad = cfg;
    bad.unlearn[0].splits = vec![Split::Retain];
    assert!(bad.validate().is_err());
}

#[test]
fn desk_matrix_shape() {
    let cfg = ExperimentConfig::desk("x".into());
    cfg.validate().unwrap();
    let cells = cfg.cells();
    let ga = |d: f64| cells.iter().filter(|c| c.method == Method::GradientAscent && c.delta == d).count();
    assert_eq!(ga(1.0), cfg.models.len() * 2 * 4 * 3);
    assert_eq!(ga(0.0), 1);
    assert_eq!(cells.iter().filter(|c| c.method != Method::GradientAscent).count(), 2 * 2 * 4 * 3);
}

#[test]
fn shipped_desk_config_is_the_builtin_one() {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs/desk.toml");
    let mut shipped = ExperimentConfig::load(&path).unwrap();
    let builtin = ExperimentConfig::desk(shipped.out_dir.clone());
    shipped.out_dir = builtin.out_dir.clone();
    assert_eq!(shipped, builtin, "configs/desk.toml is out of date:\n{}", builtin.to_toml().unwrap());
}
