use crate::error::{Error, Result};
use crate::scalar::Real;

/// Feature matrix with optional ground truth.
///
/// Features are stored row-major; `labels` are class ids in `0..num_classes`
/// and `cluster_ids` identify the generating cluster for exploration metrics.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset<T> {
    features: Vec<T>,
    n: usize,
    dim: usize,
    labels: Option<Vec<usize>>,
    cluster_ids: Option<Vec<usize>>,
    num_classes: usize,
    name: String,
}

impl<T: Real> Dataset<T> {
    pub fn new(
        name: impl Into<String>,
        features: Vec<T>,
        dim: usize,
        labels: Option<Vec<usize>>,
        cluster_ids: Option<Vec<usize>>,
    ) -> Result<Self> {
        if dim == 0 {
            return Err(Error::Structure("feature dimension must be at least 1".into()));
        }
        if features.is_empty() || features.len() % dim != 0 {
            return Err(Error::Structure(format!(
                "{} feature values do not form rows of width {dim}",
                features.len()
            )));
        }
        let n = features.len() / dim;
        if let Some(pos) = features.iter().position(|v| !v.is_finite()) {
            return Err(Error::Structure(format!(
                "non-finite feature at row {}, column {}",
                pos / dim,
                pos % dim
            )));
        }
        if let Some(l) = &labels {
            if l.len() != n {
                return Err(Error::Structure(format!(
                    "{} labels for {n} feature rows",
                    l.len()
                )));
            }
        }
        if let Some(c) = &cluster_ids {
            if c.len() != n {
                return Err(Error::Structure(format!(
                    "{} cluster ids for {n} feature rows",
                    c.len()
                )));
            }
        }
        let num_classes = labels
            .as_ref()
            .and_then(|l| l.iter().max())
            .map_or(0, |&m| m + 1);
        Ok(Self {
            features,
            n,
            dim,
            labels,
            cluster_ids,
            num_classes,
            name: name.into(),
        })
    }

    /// Declares a class count larger than the observed maximum label + 1.
    pub fn with_num_classes(mut self, k: usize) -> Result<Self> {
        if k < self.num_classes {
            return Err(Error::Structure(format!(
                "class count {k} smaller than observed {}",
                self.num_classes
            )));
        }
        self.num_classes = k;
        Ok(self)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn num_classes(&self) -> usize {
        self.num_classes
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn row(&self, i: usize) -> &[T] {
        &self.features[i * self.dim..(i + 1) * self.dim]
    }

    pub fn features(&self) -> &[T] {
        &self.features
    }

    pub fn labels(&self) -> Option<&[usize]> {
        self.labels.as_deref()
    }

    pub fn cluster_ids(&self) -> Option<&[usize]> {
        self.cluster_ids.as_deref()
    }

    /// Replaces labels and cluster ids, e.g. after modulo relabeling.
    pub fn relabeled(&self, labels: Vec<usize>, cluster_ids: Vec<usize>) -> Result<Self> {
        Dataset::new(
            self.name.clone(),
            self.features.clone(),
            self.dim,
            Some(labels),
            Some(cluster_ids),
        )
    }

    /// Keeps the given rows, in the given order.
    pub fn subset(&self, rows: &[usize]) -> Result<Self> {
        let mut feats = Vec::with_capacity(rows.len() * self.dim);
        for &r in rows {
            feats.extend_from_slice(self.row(r));
        }
        let pick = |v: &Option<Vec<usize>>| v.as_ref().map(|v| rows.iter().map(|&r| v[r]).collect());
        let k = self.num_classes;
        Dataset::new(
            self.name.clone(),
            feats,
            self.dim,
            pick(&self.labels),
            pick(&self.cluster_ids),
        )?
        .with_num_classes(k)
    }

    pub fn cast<U: Real>(&self) -> Dataset<U> {
        Dataset {
            features: self.features.iter().map(|v| U::of(v.to_f64_lossy())).collect(),
            n: self.n,
            dim: self.dim,
            labels: self.labels.clone(),
            cluster_ids: self.cluster_ids.clone(),
            num_classes: self.num_classes,
            name: self.name.clone(),
        }
    }
}
