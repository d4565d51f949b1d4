use std::fs;
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use super::xp::{histogram, XpMatrix};
use crate::error::{Error, Result};
use crate::model::TabularDecPomdp;
use crate::policy::TabularJointPolicy;
use crate::symmetry::{Permutation, SymmetryMap, SymmetrySet};
use crate::training::CurvePoint;

pub const FILE_SCHEMA_VERSION: u32 = 1;
/// Overrides the default output directory when `--out` is not given.
pub const OUT_ENV: &str = "ERSYM_OUT";
pub const DEFAULT_OUT_DIR: &str = "ersym-out";

/// `--out`, else `$ERSYM_OUT`, else [`DEFAULT_OUT_DIR`].
pub fn output_dir(flag: Option<&Path>) -> PathBuf {
    if let Some(p) = flag {
        return p.to_path_buf();
    }
    match std::env::var_os(OUT_ENV) {
        Some(v) if !v.is_empty() => PathBuf::from(v),
        _ => PathBuf::from(DEFAULT_OUT_DIR),
    }
}

fn check_fingerprint(model: &TabularDecPomdp<f64>, found: &str) -> Result<()> {
    let expected = model.fingerprint();
    if expected != found {
        return Err(Error::FingerprintMismatch { expected, found: found.to_string() });
    }
    Ok(())
}

fn check_version(found: u32, what: &str) -> Result<()> {
    if found != FILE_SCHEMA_VERSION {
        return Err(Error::Config(format!("{what} has schema_version {found}, expected {FILE_SCHEMA_VERSION}")));
    }
    Ok(())
}

/// Pretty JSON with a trailing newline; struct field order keeps the bytes
/// stable across runs.
pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir)?;
    }
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text)?;
    Ok(())
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    Ok(serde_json::from_str(&fs::read_to_string(path)?)?)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PolicyFile {
    pub schema_version: u32,
    pub model_fingerprint: String,
    pub policy: TabularJointPolicy<f64>,
}

impl PolicyFile {
    pub fn new(model: &TabularDecPomdp<f64>, policy: &TabularJointPolicy<f64>) -> Self {
        PolicyFile { schema_version: FILE_SCHEMA_VERSION, model_fingerprint: model.fingerprint(), policy: policy.clone() }
    }
}

pub fn save_policy(path: &Path, model: &TabularDecPomdp<f64>, policy: &TabularJointPolicy<f64>) -> Result<()> {
    write_json(path, &PolicyFile::new(model, policy))
}

pub fn load_policy(path: &Path, model: &TabularDecPomdp<f64>) -> Result<TabularJointPolicy<f64>> {
    let file: PolicyFile = read_json(path)?;
    check_version(file.schema_version, "policy file")?;
    check_fingerprint(model, &file.model_fingerprint)?;
    let problems = file.policy.check_rows(1e-9);
    if !problems.is_empty() {
        return Err(Error::ShapeMismatch(problems.join("; ")));
    }
    Ok(file.policy)
}

/// One relabeling as plain per-agent image arrays.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SymmetryFile {
    pub schema_version: u32,
    pub model_fingerprint: String,
    pub actions: Vec<Vec<usize>>,
    pub observations: Vec<Vec<usize>>,
}

impl SymmetryFile {
    pub fn new(model: &TabularDecPomdp<f64>, phi: &SymmetryMap) -> Self {
        SymmetryFile {
            schema_version: FILE_SCHEMA_VERSION,
            model_fingerprint: model.fingerprint(),
            actions: phi.actions.iter().map(|p| p.0.clone()).collect(),
            observations: phi.observations.iter().map(|p| p.0.clone()).collect(),
        }
    }

    pub fn to_map(&self, model: &TabularDecPomdp<f64>) -> Result<SymmetryMap> {
        check_version(self.schema_version, "symmetry file")?;
        check_fingerprint(model, &self.model_fingerprint)?;
        let perm = |v: &Vec<usize>| {
            Permutation::new(v.clone()).ok_or_else(|| Error::ShapeMismatch(format!("{v:?} is not a permutation")))
        };
        let phi = SymmetryMap {
            actions: self.actions.iter().map(perm).collect::<Result<_>>()?,
            observations: self.observations.iter().map(perm).collect::<Result<_>>()?,
        };
        if !phi.fits(model) {
            return Err(Error::ShapeMismatch("symmetry does not fit the model's label counts".into()));
        }
        Ok(phi)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SetFile {
    pub closed: bool,
    pub symmetries: Vec<SymmetryFile>,
}

impl SetFile {
    pub fn new(model: &TabularDecPomdp<f64>, set: &SymmetrySet) -> Self {
        SetFile { closed: set.closed, symmetries: set.maps.iter().map(|m| SymmetryFile::new(model, m)).collect() }
    }

    /// The closed flag is re-checked rather than trusted.
    pub fn to_set(&self, model: &TabularDecPomdp<f64>) -> Result<SymmetrySet> {
        let maps = self.symmetries.iter().map(|s| s.to_map(model)).collect::<Result<Vec<_>>>()?;
        let set = SymmetrySet::new(maps);
        if self.closed && !set.is_group() {
            return Err(Error::Config("set file is flagged closed but is not closed under composition".into()));
        }
        Ok(SymmetrySet { closed: self.closed, ..set })
    }
}

pub fn save_set(path: &Path, model: &TabularDecPomdp<f64>, set: &SymmetrySet) -> Result<()> {
    write_json(path, &SetFile::new(model, set))
}

pub fn load_set(path: &Path, model: &TabularDecPomdp<f64>) -> Result<SymmetrySet> {
    read_json::<SetFile>(path)?.to_set(model)
}

fn csv_writer(path: &Path) -> Result<csv::Writer<fs::File>> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir)?;
    }
    Ok(csv::Writer::from_path(path)?)
}

/// Square matrix with a leading index column.
pub fn write_xp_csv(path: &Path, xp: &XpMatrix) -> Result<()> {
    let mut w = csv_writer(path)?;
    let n = xp.values.len();
    let mut header = vec!["policy".to_string()];
    header.extend((0..n).map(|j| j.to_string()));
    w.write_record(&header)?;
    for (i, row) in xp.values.iter().enumerate() {
        let mut rec = vec![i.to_string()];
        rec.extend(row.iter().map(|v| v.to_string()));
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_histogram_csv(path: &Path, values: &[f64], bins: usize) -> Result<()> {
    let lo = values.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let (lo, hi) = if values.is_empty() { (0.0, 1.0) } else if hi > lo { (lo, hi) } else { (lo - 0.5, lo + 0.5) };
    let mut w = csv_writer(path)?;
    w.write_record(["bin_low", "bin_high", "count"])?;
    for (a, b, c) in histogram(values, bins, lo, hi) {
        w.write_record([a.to_string(), b.to_string(), c.to_string()])?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_curve_csv(path: &Path, curve: &[CurvePoint]) -> Result<()> {
    let mut w = csv_writer(path)?;
    w.write_record(["episode", "return"])?;
    for p in curve {
        w.write_record([p.episode.to_string(), p.episode_return.to_string()])?;
    }
    w.flush()?;
    Ok(())
}
