use std::fs;

use bridgesens::data::{
    generate_synthetic, load_dataset, save_dataset, BenchmarkSpec, ColumnSchema, OutcomeCoefficients,
    SyntheticSpec,
};
use bridgesens::Error;

fn spec(n: usize, p: usize, benchmark: bool) -> SyntheticSpec {
    SyntheticSpec {
        n,
        p,
        treat_prob: 0.5,
        mediator_coefs: (0..p + 2).map(|j| 0.3 * j as f64 - 0.2).collect(),
        mediator_variance: 1.0,
        outcome: OutcomeCoefficients {
            intercept: 1.0,
            treatment: 0.5,
            mediator: 0.7,
            interaction: 0.1,
            covariates: vec![0.2; p],
        },
        outcome_variance: 0.5,
        latent_strength: 0.0,
        benchmark: benchmark.then_some(BenchmarkSpec {
            low: -1.0,
            high: 2.0,
            outcome_coef: 0.4,
            mediator_coef: 0.0,
        }),
    }
}

#[test]
fn save_load_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("d.csv");
    for with_w in [false, true] {
        let data = generate_synthetic(&spec(10, 1, with_w), 4).unwrap().dataset;
        save_dataset(&path, &data).unwrap();
        let back = load_dataset(&path, data.schema()).unwrap();
        assert_eq!(back, data);
    }
}

#[test]
fn framing_style_file_loads() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("framing.csv");
    let data = generate_synthetic(&spec(265, 4, false), 5).unwrap().dataset;
    let schema = ColumnSchema {
        treatment: "treat".into(),
        mediator: "emo".into(),
        outcome: "p_harm".into(),
        covariates: vec!["age".into(), "educ".into(), "gender".into(), "income".into()],
        benchmark: None,
    };
    let renamed = bridgesens::data::Dataset::new(data.rows().to_vec(), schema.clone()).unwrap();
    save_dataset(&path, &renamed).unwrap();
    let text = fs::read_to_string(&path).unwrap();
    assert!(text.starts_with("age,educ,gender,income,treat,emo,p_harm\n"));
    let loaded = load_dataset(&path, &schema).unwrap();
    assert_eq!(loaded.n(), 265);
    assert_eq!(loaded.p(), 4);
}

#[test]
fn non_binary_treatment_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.csv");
    fs::write(&path, "x1,a,m,y\n0.1,0,1.0,2.0\n0.2,2,1.0,2.0\n").unwrap();
    let err = load_dataset(&path, &ColumnSchema::synthetic(1, false)).unwrap_err();
    assert!(matches!(err, Error::NonBinaryTreatment { row: 1, .. }), "{err}");
}

#[test]
fn missing_column_is_named() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("missing.csv");
    fs::write(&path, "x1,a,y\n0.1,0,2.0\n").unwrap();
    let err = load_dataset(&path, &ColumnSchema::synthetic(1, false)).unwrap_err();
    assert!(matches!(&err, Error::MissingColumn { column, .. } if column == "m"));
    assert!(err.to_string().contains("`m`"), "{err}");
}

#[test]
fn generator_is_deterministic() {
    let a = generate_synthetic(&spec(200, 2, true), 7).unwrap();
    let b = generate_synthetic(&spec(200, 2, true), 7).unwrap();
    assert_eq!(a, b);
    let c = generate_synthetic(&spec(200, 2, true), 8).unwrap();
    assert_ne!(a.dataset, c.dataset);
}

#[test]
fn invalid_variance_is_rejected() {
    let mut s = spec(10, 1, false);
    s.mediator_variance = -1.0;
    assert!(matches!(generate_synthetic(&s, 1), Err(Error::InvalidSpec(_))));
}
