//! Acquisition functions and query-selection policies.

mod gaussian;
mod laplace;
mod policy;

use std::fmt;
use std::str::FromStr;

pub use gaussian::GaussianFieldCovariance;
pub use laplace::{laplace_learning, LaplaceOutput};
pub use policy::{
    lambda_heuristic, select_max, select_proportional, softmax_probabilities, LambdaMode, PolicyConfig, PolicyKind,
};

use crate::dirichlet::DirichletField;
use crate::error::{Error, Result};
use crate::scalar::Real;

/// Acquisition values over an unlabeled pool.
#[derive(Debug, Clone, PartialEq)]
pub struct AcquisitionScores<T> {
    pub name: &'static str,
    pub candidates: Vec<usize>,
    pub values: Vec<T>,
    /// Scalars of model state read while scoring.
    pub work: usize,
}

impl<T: Real> AcquisitionScores<T> {
    pub fn len(&self) -> usize {
        self.candidates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.candidates.is_empty()
    }

    pub fn check_finite(&self) -> Result<()> {
        match self.values.iter().position(|v| !v.is_finite()) {
            Some(i) => Err(Error::Numerical(format!(
                "{} score at node {} is {}",
                self.name, self.candidates[i], self.values[i]
            ))),
            None => Ok(()),
        }
    }
}

/// `Tr[C(x)]` over the pool; O(K) per candidate.
pub fn dir_var_scores<T: Real>(field: &DirichletField<T>, pool: &[usize]) -> Result<AcquisitionScores<T>> {
    let values = pool.iter().map(|&x| field.variance_at(x)).collect::<Result<Vec<_>>>()?;
    Ok(AcquisitionScores {
        name: "dirvar",
        candidates: pool.to_vec(),
        values,
        work: pool.len() * field.num_classes(),
    })
}

/// `−(p₍₁₎ − p₍₂₎)` from the two largest entries of each row; `probs` is
/// row-major with `k` columns.
pub fn smallest_margin_scores<T: Real>(probs: &[T], k: usize, pool: &[usize]) -> AcquisitionScores<T> {
    let values = pool
        .iter()
        .map(|&x| {
            let row = &probs[x * k..(x + 1) * k];
            let (mut p1, mut p2) = (T::neg_infinity(), T::neg_infinity());
            for &p in row {
                if p > p1 {
                    p2 = p1;
                    p1 = p;
                } else if p > p2 {
                    p2 = p;
                }
            }
            if k == 1 {
                p2 = T::zero();
            }
            -(p1 - p2)
        })
        .collect();
    AcquisitionScores {
        name: "unc-sm",
        candidates: pool.to_vec(),
        values,
        work: pool.len() * k,
    }
}

/// Acquisition names accepted by the experiment driver and CLI.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum AcquisitionName {
    DirVar,
    DirVarProp,
    UncSm,
    VOpt,
    VOptLowRank,
    SigmaOpt,
    SigmaOptLowRank,
    Random,
}

impl AcquisitionName {
    pub const ALL: [AcquisitionName; 8] = [
        Self::DirVar,
        Self::DirVarProp,
        Self::UncSm,
        Self::VOpt,
        Self::VOptLowRank,
        Self::SigmaOpt,
        Self::SigmaOptLowRank,
        Self::Random,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Self::DirVar => "dirvar",
            Self::DirVarProp => "dirvar-prop",
            Self::UncSm => "unc-sm",
            Self::VOpt => "vopt",
            Self::VOptLowRank => "vopt-lowrank",
            Self::SigmaOpt => "sigmaopt",
            Self::SigmaOptLowRank => "sigmaopt-lowrank",
            Self::Random => "random",
        }
    }

    /// Whether the method keeps a Gaussian-field covariance.
    pub fn uses_covariance(self) -> bool {
        matches!(
            self,
            Self::VOpt | Self::VOptLowRank | Self::SigmaOpt | Self::SigmaOptLowRank
        )
    }

    pub fn is_low_rank(self) -> bool {
        matches!(self, Self::VOptLowRank | Self::SigmaOptLowRank)
    }
}

impl fmt::Display for AcquisitionName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for AcquisitionName {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|a| a.as_str() == s)
            .ok_or_else(|| Error::Config(format!("unknown acquisition function '{s}'")))
    }
}
