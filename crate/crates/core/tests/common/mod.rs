#![allow(dead_code)]

use std::path::PathBuf;

use hierform::codegen::emit_program;
use hierform::density::Posterior;
use hierform::design::assemble;
use hierform::modelspec::{validate, Family, ModelSpec, PriorSpec};
use hierform::tabular::{read_csv_path, sim_multi_mem, Column, Dataset, SimTruth};

pub fn repo_path(rel: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("../..")
        .join(rel)
}

pub fn golden_path(rel: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("tests/golden")
        .join(rel)
}

pub fn loss_data() -> Dataset {
    read_csv_path(repo_path("data/loss.csv"), None).expect("data/loss.csv")
}

pub fn priors(texts: &[&str]) -> Vec<PriorSpec> {
    texts.iter().map(|p| p.parse().expect("prior")).collect()
}

pub const LOSS_FORMULA: &str = "cum ~ ult * (1 - exp(-(dev / theta)^omega))";
pub const LOSS_PRIORS: [&str; 3] = [
    "normal(5000, 1000), nlpar = ult",
    "normal(1, 2), nlpar = omega",
    "normal(45, 10), nlpar = theta",
];

pub fn loss1_spec() -> ModelSpec {
    ModelSpec::from_strings(
        LOSS_FORMULA,
        &["ult ~ 1 + (1 | AY)", "omega ~ 1", "theta ~ 1"],
        Family::Gaussian,
        true,
        priors(&LOSS_PRIORS),
    )
    .unwrap()
}

pub fn loss2_spec() -> ModelSpec {
    ModelSpec::from_strings(
        LOSS_FORMULA,
        &[
            "ult ~ 1 + (1 | ID1 | AY)",
            "omega ~ 1 + (1 | ID1 | AY)",
            "theta ~ 1 + (1 | ID1 | AY)",
        ],
        Family::Gaussian,
        true,
        priors(&LOSS_PRIORS),
    )
    .unwrap()
}

pub fn zinb1_spec() -> ModelSpec {
    ModelSpec::from_strings(
        "count ~ persons + child + camper",
        &[],
        Family::ZeroInflatedPoisson,
        false,
        vec![],
    )
    .unwrap()
}

pub fn zinb2_spec() -> ModelSpec {
    ModelSpec::from_strings(
        "count ~ persons + child + camper",
        &["zi ~ child"],
        Family::ZeroInflatedPoisson,
        false,
        vec![],
    )
    .unwrap()
}

pub fn mm_spec() -> ModelSpec {
    ModelSpec::from_strings(
        "y ~ 1 + (1 | mm(s1, s2))",
        &[],
        Family::Gaussian,
        false,
        vec![],
    )
    .unwrap()
}

pub fn mm_data(seed: u64) -> Dataset {
    sim_multi_mem(10, 1000, 0.1, SimTruth::default(), seed).unwrap()
}

/// The fishing data with `camper` coded as a factor whose reference level is "no".
pub fn fish_data() -> Result<Dataset, String> {
    let path = repo_path("data/fish.csv");
    if !path.exists() {
        return Err("data/fish.csv not vendored".into());
    }
    let d = read_csv_path(&path, None).map_err(|e| e.to_string())?;
    let camper = d.column("camper").map_err(|e| e.to_string())?;
    let codes: Vec<usize> = match camper {
        Column::Factor { .. } => return Ok(d),
        other => other
            .as_f64()
            .unwrap()
            .iter()
            .map(|v| usize::from(*v != 0.0))
            .collect(),
    };
    d.with_column(
        "camper",
        Column::Factor {
            codes,
            levels: vec!["no".into(), "yes".into()],
        },
    )
    .map_err(|e| e.to_string())
}

/// Column layout of the fishing data; program text depends only on
/// column names and kinds.
pub fn fish_layout() -> Dataset {
    let n = 40;
    let int = |f: fn(usize) -> i64| Column::Integer((0..n).map(f).collect());
    Dataset::new(vec![
        ("count".into(), int(|i| (i % 7) as i64 * (i % 2) as i64)),
        ("persons".into(), int(|i| 1 + (i % 4) as i64)),
        ("child".into(), int(|i| (i % 3) as i64)),
        (
            "camper".into(),
            Column::Factor {
                codes: (0..n).map(|i| i % 2).collect(),
                levels: vec!["no".into(), "yes".into()],
            },
        ),
    ])
    .unwrap()
}

pub fn program(spec: &ModelSpec, data: &Dataset) -> String {
    let checked = validate(spec, data).unwrap();
    let design = assemble(&checked, data).unwrap();
    let posterior = Posterior::new(design, &spec.priors).unwrap();
    emit_program(&checked, &posterior).rendered()
}

/// (golden file, spec, data) for every codegen snapshot.
pub fn codegen_cases() -> Vec<(&'static str, ModelSpec, Dataset)> {
    vec![
        ("fish_zinb1.stan", zinb1_spec(), fish_layout()),
        ("fish_zinb2.stan", zinb2_spec(), fish_layout()),
        ("loss.stan", loss1_spec(), loss_data()),
        (
            "mm.stan",
            mm_spec(),
            sim_multi_mem(10, 100, 0.1, SimTruth::default(), 1).unwrap(),
        ),
    ]
}
