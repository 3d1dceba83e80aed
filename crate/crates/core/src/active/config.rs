use std::path::{Path, PathBuf};

use serde::Deserialize;

use crate::acquisition::AcquisitionName;
use crate::error::{Error, Result};

/// Experiment description, read from TOML with one table per concern.
///
/// ```toml
/// [dataset]
/// source = "grid-blobs"
/// n = 2000
/// clusters = 10
/// modulo = 3
///
/// [acquisition]
/// names = ["dirvar-prop", "random"]
///
/// [experiment]
/// budget = 30
/// trials = 10
/// ```
#[derive(Debug, Clone, PartialEq, Deserialize, Default)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentConfig {
    pub dataset: DatasetConfig,
    pub graph: GraphConfig,
    pub propagation: PropagationConfig,
    pub model: ModelConfig,
    pub acquisition: AcquisitionConfig,
    pub experiment: RunConfig,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DatasetConfig {
    /// `grid-blobs`, `two-moons`, `mixture`, `csv` or `idx`.
    pub source: String,
    pub n: usize,
    pub clusters: usize,
    pub separation: f64,
    pub std: f64,
    pub noise: f64,
    pub components: Vec<ComponentConfig>,
    pub path: Option<PathBuf>,
    pub labels_path: Option<PathBuf>,
    /// CSV label column; defaults to the last one.
    pub label_column: Option<usize>,
    pub limit: Option<usize>,
    /// Relabel classes as `y mod modulo`, keeping the old label as cluster id.
    pub modulo: Option<usize>,
    pub seed: u64,
}

impl Default for DatasetConfig {
    fn default() -> Self {
        Self {
            source: "grid-blobs".into(),
            n: 2000,
            clusters: 10,
            separation: 10.0,
            std: 1.0,
            noise: 0.1,
            components: Vec::new(),
            path: None,
            labels_path: None,
            label_column: None,
            limit: None,
            modulo: None,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ComponentConfig {
    pub weight: f64,
    pub mean: Vec<f64>,
    pub var: Vec<f64>,
    pub class: usize,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GraphConfig {
    pub k: usize,
    /// `rbf` or `cosine`.
    pub metric: String,
    pub sigma: Option<f64>,
}

impl Default for GraphConfig {
    fn default() -> Self {
        Self {
            k: 10,
            metric: "rbf".into(),
            sigma: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PropagationConfig {
    pub tau: f64,
    pub cg_tol: f64,
}

impl Default for PropagationConfig {
    fn default() -> Self {
        Self { tau: 0.1, cg_tol: 1e-8 }
    }
}

/// A number or the string `"heuristic"`.
#[derive(Debug, Clone, Copy, PartialEq, Deserialize)]
#[serde(untagged)]
pub enum AutoOr {
    Value(f64),
    Named(Named),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Named {
    Heuristic,
}

impl Default for AutoOr {
    fn default() -> Self {
        AutoOr::Named(Named::Heuristic)
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize, Default)]
#[serde(deny_unknown_fields, default)]
pub struct ModelConfig {
    pub alpha0: AutoOr,
    /// Defaults to twice the class count.
    pub k_hat: Option<usize>,
    /// `auto`, `dirichlet` or `laplace`.
    pub classifier: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AcquisitionConfig {
    pub names: Vec<String>,
    /// Proportional-sampling λ for `dirvar-prop`.
    pub lambda: AutoOr,
    pub sigma2: f64,
    pub rank: usize,
}

impl Default for AcquisitionConfig {
    fn default() -> Self {
        Self {
            names: vec!["dirvar".into(), "dirvar-prop".into(), "random".into()],
            lambda: AutoOr::default(),
            sigma2: 0.01,
            rank: 50,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub initial_per_class: usize,
    pub budget: usize,
    pub trials: usize,
    pub seed: u64,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            initial_per_class: 1,
            budget: 30,
            trials: 10,
            seed: 0,
        }
    }
}

/// Which classifier scores accuracy.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Classifier {
    Dirichlet,
    Laplace,
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read config {}: {e}", path.display())))?;
        Self::from_toml(&text).map_err(|e| match e {
            Error::Config(m) => Error::Config(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    pub fn acquisitions(&self) -> Result<Vec<AcquisitionName>> {
        self.acquisition.names.iter().map(|s| s.parse()).collect()
    }

    /// Classifier used for accuracy under `acq`.
    pub fn classifier_for(&self, acq: AcquisitionName) -> Classifier {
        match self.model.classifier.as_deref() {
            Some("dirichlet") => Classifier::Dirichlet,
            Some("laplace") => Classifier::Laplace,
            _ => match acq {
                AcquisitionName::DirVar | AcquisitionName::DirVarProp | AcquisitionName::Random => {
                    Classifier::Dirichlet
                }
                _ => Classifier::Laplace,
            },
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        let d = &self.dataset;
        match d.source.as_str() {
            "grid-blobs" | "two-moons" => {}
            "mixture" if d.components.is_empty() => return bad("mixture source needs [[dataset.components]]".into()),
            "mixture" => {}
            "csv" | "idx" if d.path.is_none() => return bad(format!("{} source needs dataset.path", d.source)),
            "csv" | "idx" => {}
            other => return bad(format!("unknown dataset source '{other}'")),
        }
        if matches!(d.source.as_str(), "grid-blobs" | "two-moons" | "mixture") && d.n < 2 {
            return bad(format!("dataset.n = {} is too small", d.n));
        }
        if d.modulo.is_some_and(|m| m < 2) {
            return bad("dataset.modulo must be at least 2".into());
        }
        if self.graph.k == 0 {
            return bad("graph.k must be positive".into());
        }
        if !matches!(self.graph.metric.as_str(), "rbf" | "cosine") {
            return bad(format!("unknown graph metric '{}'", self.graph.metric));
        }
        if !(self.propagation.tau > 0.0) {
            return bad("propagation.tau must be positive".into());
        }
        if let AutoOr::Value(a) = self.model.alpha0 {
            if !(a >= 0.0) {
                return bad("model.alpha0 must be nonnegative".into());
            }
        }
        if let AutoOr::Value(l) = self.acquisition.lambda {
            if !(l >= 0.0) {
                return bad("acquisition.lambda must be nonnegative".into());
            }
        }
        if self.model.k_hat.is_some_and(|k| k < 2) {
            return bad("model.k_hat must be at least 2".into());
        }
        if let Some(c) = &self.model.classifier {
            if !matches!(c.as_str(), "auto" | "dirichlet" | "laplace") {
                return bad(format!("unknown classifier '{c}'"));
            }
        }
        if self.acquisition.names.is_empty() {
            return bad("acquisition.names is empty".into());
        }
        self.acquisitions()?;
        if self.acquisition.rank == 0 {
            return bad("acquisition.rank must be positive".into());
        }
        let r = &self.experiment;
        if r.initial_per_class == 0 {
            return bad("experiment.initial_per_class must be at least 1".into());
        }
        if r.trials == 0 {
            return bad("experiment.trials must be at least 1".into());
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_parse_from_empty() {
        let c = ExperimentConfig::from_toml("").unwrap();
        assert_eq!(c.experiment.budget, 30);
        assert_eq!(c.model.alpha0, AutoOr::Named(Named::Heuristic));
    }

    #[test]
    fn numbers_and_names() {
        let c = ExperimentConfig::from_toml(
            "[model]\nalpha0 = 0.5\n[acquisition]\nnames = [\"vopt\", \"unc-sm\"]\nlambda = 3.0\n",
        )
        .unwrap();
        assert_eq!(c.model.alpha0, AutoOr::Value(0.5));
        assert_eq!(c.acquisitions().unwrap(), vec![AcquisitionName::VOpt, AcquisitionName::UncSm]);
        assert_eq!(c.classifier_for(AcquisitionName::VOpt), Classifier::Laplace);
    }

    #[test]
    fn rejects_bad_values() {
        for text in [
            "[acquisition]\nnames = [\"lands\"]",
            "[dataset]\nsource = \"hsi\"",
            "[experiment]\ninitial_per_class = 0",
            "[graph]\nmetric = \"l1\"",
            "[dataset]\nbogus = 1",
            "[dataset]\nsource = \"csv\"",
        ] {
            assert!(matches!(ExperimentConfig::from_toml(text), Err(Error::Config(_))), "{text}");
        }
    }

    #[test]
    fn missing_file_names_path() {
        let e = ExperimentConfig::load("/nonexistent/x.toml").unwrap_err();
        assert!(e.to_string().contains("/nonexistent/x.toml"));
    }
}
