//! Deterministic CSV output and JSON with run metadata.
//!
//! CSV never contains timings, so identical configs produce identical bytes.
//! Lists inside a cell are joined with `;`; numbers use `{:.12e}`.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::Serialize;
use sha2::{Digest, Sha256};

use super::config::StudyConfig;
use super::poisson::PoissonRecord;
use super::study::StudyRecord;
use crate::error::{Error, Result};

pub const SCHEMA_VERSION: u32 = 1;

pub const STUDY_COLUMNS: [&str; 22] = [
    "schema_version",
    "epsilon",
    "sym_diff",
    "displaced_measure",
    "delta_p",
    "series_terms",
    "r",
    "series",
    "series_tail",
    "schatten",
    "projector_distance",
    "riesz_defect",
    "cluster_values",
    "cluster_values_tilde",
    "eig_weighted",
    "eig_unweighted",
    "eig_union",
    "poisson_error",
    "poisson_delta_s",
    "poisson_mf",
    "poisson_rhs_theorem",
    "poisson_rhs_measure",
];

pub const POISSON_COLUMNS: [&str; 11] = [
    "schema_version",
    "epsilon",
    "error",
    "f_norm",
    "displaced_measure",
    "delta_s",
    "f_shift",
    "sym_diff",
    "mf",
    "rhs_theorem",
    "rhs_measure",
];

fn num(x: f64) -> String {
    if x.is_infinite() {
        if x > 0.0 { "inf" } else { "-inf" }.to_string()
    } else {
        format!("{x:.12e}")
    }
}

fn list(xs: impl IntoIterator<Item = f64>) -> String {
    xs.into_iter().map(num).collect::<Vec<_>>().join(";")
}

pub fn study_csv(records: &[StudyRecord]) -> String {
    let mut out = STUDY_COLUMNS.join(",");
    out.push('\n');
    for r in records {
        let delta = r
            .delta_p
            .iter()
            .map(|(p, v)| format!("{}:{}", p.label(), num(*v)))
            .collect::<Vec<_>>()
            .join(";");
        let cells = [
            SCHEMA_VERSION.to_string(),
            num(r.epsilon),
            num(r.sym_diff),
            num(r.displaced_measure),
            delta,
            r.series_terms.to_string(),
            r.exponents.iter().map(|e| e.r.label()).collect::<Vec<_>>().join(";"),
            list(r.exponents.iter().map(|e| e.series)),
            list(r.exponents.iter().map(|e| e.series_tail)),
            list(r.exponents.iter().map(|e| e.schatten)),
            num(r.projector_distance),
            num(r.riesz_defect),
            list(r.cluster_values.iter().copied()),
            list(r.cluster_values_tilde.iter().copied()),
            list(r.eig_weighted.iter().copied()),
            list(r.eig_unweighted.iter().copied()),
            list(r.eig_union.iter().copied()),
            num(r.poisson.error),
            num(r.poisson.delta_s),
            num(r.poisson.mf),
            num(r.poisson.rhs_theorem),
            num(r.poisson.rhs_measure),
        ];
        writeln!(out, "{}", cells.join(",")).unwrap();
    }
    out
}

pub fn poisson_csv(records: &[PoissonRecord]) -> String {
    let mut out = POISSON_COLUMNS.join(",");
    out.push('\n');
    for r in records {
        let cells = [
            SCHEMA_VERSION.to_string(),
            num(r.epsilon),
            num(r.error),
            num(r.f_norm),
            num(r.displaced_measure),
            num(r.delta_s),
            num(r.f_shift),
            num(r.sym_diff),
            num(r.mf),
            num(r.rhs_theorem),
            num(r.rhs_measure),
        ];
        writeln!(out, "{}", cells.join(",")).unwrap();
    }
    out
}

/// SHA-256 of the canonical TOML rendering of a config.
pub fn config_hash(config: &StudyConfig) -> Result<String> {
    let digest = Sha256::digest(config.to_toml()?.as_bytes());
    Ok(digest.iter().map(|b| format!("{b:02x}")).collect())
}

#[derive(Debug, Clone, Serialize)]
pub struct Metadata {
    pub schema_version: u32,
    pub kind: String,
    pub config_hash: String,
    pub crate_version: String,
    pub seed: u64,
    pub wall_time: f64,
}

impl Metadata {
    pub fn new(kind: &str, config: &StudyConfig, wall_time: f64) -> Result<Self> {
        Ok(Self {
            schema_version: SCHEMA_VERSION,
            kind: kind.to_string(),
            config_hash: config_hash(config)?,
            crate_version: env!("CARGO_PKG_VERSION").to_string(),
            seed: config.study.seed,
            wall_time,
        })
    }
}

#[derive(Serialize)]
struct Document<'a, T: Serialize> {
    metadata: &'a Metadata,
    config: &'a StudyConfig,
    result: &'a T,
}

pub fn to_json<T: Serialize>(metadata: &Metadata, config: &StudyConfig, result: &T) -> Result<String> {
    serde_json::to_string_pretty(&Document {
        metadata,
        config,
        result,
    })
    .map_err(|e| Error::Inconsistent(format!("json serialization: {e}")))
}

/// Writes `<dir>/<stem>.<ext>`, creating the directory.
pub fn write_output(dir: &Path, stem: &str, ext: &str, contents: &str) -> Result<PathBuf> {
    std::fs::create_dir_all(dir)?;
    let path = dir.join(format!("{stem}.{ext}"));
    std::fs::write(&path, contents)?;
    Ok(path)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::study::tests::small_config;
    use crate::harness::{run_perturbation_study, run_poisson_study};

    #[test]
    fn csv_is_deterministic_and_well_formed() {
        let cfg = small_config("sine-bump");
        let a = run_perturbation_study(&cfg).unwrap();
        let b = run_perturbation_study(&cfg).unwrap();
        let (ca, cb) = (study_csv(&a.records), study_csv(&b.records));
        assert_eq!(ca, cb);
        let lines: Vec<&str> = ca.lines().collect();
        assert_eq!(lines.len(), 1 + cfg.perturbation.epsilons.len());
        for l in &lines {
            assert_eq!(l.split(',').count(), STUDY_COLUMNS.len());
        }
        assert!(lines[1].starts_with("1,1.000000000000e-1,"));
        let p = run_poisson_study(&cfg).unwrap();
        assert_eq!(poisson_csv(&p.records).lines().count(), 4);
    }

    #[test]
    fn json_carries_metadata() {
        let cfg = small_config("none");
        let m = Metadata::new("study", &cfg, 1.5).unwrap();
        assert_eq!(m.config_hash.len(), 64);
        assert_eq!(m.config_hash, config_hash(&cfg).unwrap());
        let j = to_json(&m, &cfg, &vec![1.0, 2.0]).unwrap();
        let v: serde_json::Value = serde_json::from_str(&j).unwrap();
        assert_eq!(v["metadata"]["schema_version"], 1);
        assert_eq!(v["result"][1], 2.0);
        assert_eq!(v["config"]["perturbation"]["family"], "none");
    }
}
