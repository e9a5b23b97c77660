//! Run specifications and the JSON result-file schema.

use serde::{Deserialize, Serialize};
use std::fs;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use crate::action::{ClassCounts, ClassificationTolerances, CLASSIFICATION_TOLERANCES};
use crate::error::{Error, Result};
use crate::linalg::{c, CMat};
use crate::operators::{Configuration, OperatorPoint};
use crate::optimize::{OptimizerSettings, RunResult};
use crate::oracles::{OraclePrediction, Regime};

pub const FORMAT_NAME: &str = "cfs-result";
pub const SCHEMA_VERSION: u32 = 1;
pub const GRADIENT_CONVENTION: &str = "dS/dx over x = [c_tilde (m), mu_plus (m n), mu_minus (m n), \
B1 per point (2n x 2n, row-major, re/im interleaved), B2 per point (2n x (f-2n), row-major, re/im interleaved)]";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSpec {
    pub n: usize,
    pub f: usize,
    pub m: usize,
    pub seeds: Vec<u64>,
    pub settings: OptimizerSettings,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_path: Option<PathBuf>,
    #[serde(default)]
    pub export_plot: bool,
    #[serde(default)]
    pub export_pairs: bool,
    #[serde(default)]
    pub export_trace: bool,
}

impl RunSpec {
    pub fn new(n: usize, f: usize, m: usize, seeds: Vec<u64>) -> Self {
        RunSpec {
            n,
            f,
            m,
            seeds,
            settings: OptimizerSettings::default(),
            output_path: None,
            export_plot: false,
            export_pairs: false,
            export_trace: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n == 0 || self.f < 2 * self.n {
            return Err(Error::DimensionTooSmall { n: self.n, f: self.f });
        }
        if self.m == 0 {
            return Err(Error::InvalidArgument("m must be at least 1".into()));
        }
        if self.seeds.is_empty() {
            return Err(Error::InvalidArgument("at least one seed is required".into()));
        }
        self.settings.validate()
    }
}

/// A complex matrix as parallel row-major real and imaginary arrays.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatrixData {
    pub rows: usize,
    pub cols: usize,
    pub re: Vec<f64>,
    pub im: Vec<f64>,
}

impl MatrixData {
    pub fn from_matrix(m: &CMat) -> Self {
        let (rows, cols) = m.shape();
        let mut re = Vec::with_capacity(rows * cols);
        let mut im = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                re.push(m[(i, j)].re);
                im.push(m[(i, j)].im);
            }
        }
        MatrixData { rows, cols, re, im }
    }

    pub fn to_matrix(&self) -> Result<CMat> {
        let len = self.rows * self.cols;
        if self.re.len() != len || self.im.len() != len {
            return Err(Error::ShapeMismatch(format!(
                "{}x{} matrix with {} real and {} imaginary entries",
                self.rows,
                self.cols,
                self.re.len(),
                self.im.len()
            )));
        }
        Ok(CMat::from_fn(self.rows, self.cols, |i, j| {
            let k = i * self.cols + j;
            c(self.re[k], self.im[k])
        }))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StoredConfiguration {
    pub n: usize,
    pub f: usize,
    pub m: usize,
    pub weights: Vec<f64>,
    pub points: Vec<MatrixData>,
}

impl StoredConfiguration {
    pub fn from_configuration(config: &Configuration) -> Self {
        StoredConfiguration {
            n: config.n(),
            f: config.f(),
            m: config.m(),
            weights: config.weights().to_vec(),
            points: config.points().iter().map(|p| MatrixData::from_matrix(p.matrix())).collect(),
        }
    }

    /// Rebuild and revalidate every operator.
    pub fn to_configuration(&self) -> Result<Configuration> {
        if self.points.len() != self.m || self.weights.len() != self.m {
            return Err(Error::ShapeMismatch(format!(
                "m={} with {} points and {} weights",
                self.m,
                self.points.len(),
                self.weights.len()
            )));
        }
        let points = self
            .points
            .iter()
            .map(|d| OperatorPoint::from_file_matrix(d.to_matrix()?, self.n))
            .collect::<Result<Vec<_>>>()?;
        Configuration::new(points, self.weights.clone())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Origin {
    Optimizer,
    Oracle,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeedOutcome {
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub result: Option<RunResult>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleComparison {
    pub label: String,
    pub regime: Regime,
    pub predicted_action: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub predicted_boundedness: Option<f64>,
    /// Achieved minus predicted action.
    pub delta: f64,
    pub ratio: f64,
}

impl OracleComparison {
    pub fn new(p: &OraclePrediction, achieved: f64) -> Self {
        OracleComparison {
            label: p.label.clone(),
            regime: p.regime,
            predicted_action: p.action,
            predicted_boundedness: p.boundedness,
            delta: achieved - p.action,
            ratio: achieved / p.action,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleInfo {
    pub kind: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tau: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub min_angle: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IsoEntry {
    pub tau: f64,
    pub tau2: f64,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultFile {
    pub format: String,
    pub schema_version: u32,
    pub tool_version: String,
    /// Seconds since the Unix epoch.
    pub created_at: u64,
    pub origin: Origin,
    pub n: usize,
    pub f: usize,
    pub m: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub spec: Option<RunSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub oracle: Option<OracleInfo>,
    #[serde(default)]
    pub runs: Vec<SeedOutcome>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub best_index: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub configuration: Option<StoredConfiguration>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub action: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub boundedness: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub class_counts: Option<ClassCounts>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pair_lagrangians: Option<Vec<Vec<f64>>>,
    #[serde(default)]
    pub oracle_comparison: Vec<OracleComparison>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub iso_table: Option<Vec<IsoEntry>>,
    pub classification_tolerances: ClassificationTolerances,
    pub gradient_convention: String,
    pub wall_time_seconds: f64,
}

pub fn now_unix() -> u64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0)
}

impl ResultFile {
    pub fn empty(origin: Origin, n: usize, f: usize, m: usize) -> Self {
        ResultFile {
            format: FORMAT_NAME.into(),
            schema_version: SCHEMA_VERSION,
            tool_version: env!("CARGO_PKG_VERSION").into(),
            created_at: now_unix(),
            origin,
            n,
            f,
            m,
            spec: None,
            oracle: None,
            runs: Vec::new(),
            best_index: None,
            configuration: None,
            action: None,
            boundedness: None,
            class_counts: None,
            pair_lagrangians: None,
            oracle_comparison: Vec::new(),
            iso_table: None,
            classification_tolerances: CLASSIFICATION_TOLERANCES,
            gradient_convention: GRADIENT_CONVENTION.into(),
            wall_time_seconds: 0.0,
        }
    }

    pub fn to_json(&self) -> Result<String> {
        let mut s = serde_json::to_string_pretty(self)?;
        s.push('\n');
        Ok(s)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let r: ResultFile = serde_json::from_str(text)?;
        if r.format != FORMAT_NAME {
            return Err(Error::InvalidArgument(format!("not a result file: format {:?}", r.format)));
        }
        if r.schema_version != SCHEMA_VERSION {
            return Err(Error::InvalidArgument(format!(
                "unsupported schema version {}",
                r.schema_version
            )));
        }
        Ok(r)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
            fs::create_dir_all(dir)?;
        }
        fs::write(path, self.to_json()?)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&fs::read_to_string(path)?)
    }

    pub fn config(&self) -> Result<Configuration> {
        self.configuration
            .as_ref()
            .ok_or_else(|| Error::InvalidArgument("result file holds no configuration".into()))?
            .to_configuration()
    }
}
