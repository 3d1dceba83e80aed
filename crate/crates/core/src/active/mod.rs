//! Sequential active-learning driver with a simulated oracle.
//!
//! Everything here is fixed to `f64`.

mod config;
mod timing;

use std::io::Write;
use std::path::Path;
use std::sync::Arc;
use std::time::Instant;

use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

pub use config::{
    AcquisitionConfig, AutoOr, Classifier, ComponentConfig, DatasetConfig, ExperimentConfig, GraphConfig,
    ModelConfig, Named, PropagationConfig, RunConfig,
};
pub use timing::{loglog_slope, timing_benchmark, write_timing, TimingOptions, TimingRow};

use crate::acquisition::{
    dir_var_scores, laplace_learning, smallest_margin_scores, AcquisitionName, AcquisitionScores,
    GaussianFieldCovariance, LambdaMode, PolicyConfig,
};
use crate::dirichlet::{alpha0_heuristic, argmax, DirichletField};
use crate::error::{Error, Result};
use crate::graph::{
    build_knn_graph, generate_mixture, grid_blobs, load_dataset, smallest_eigenpairs, two_moons, Dataset,
    DatasetFormat, EigenOptions, LabelColumn, LaplacianOperator, LoadOptions, Metric, MixtureComponent,
};
use crate::propagation::{measure_class_separation, CgOptions, PropagationCache, SeparationEstimate};

/// `y mod k_mod`, returning the new labels and the old labels as cluster ids.
pub fn modulo_relabel(labels: &[usize], k_mod: usize) -> Result<(Vec<usize>, Vec<usize>)> {
    if k_mod < 2 {
        return Err(Error::domain(format!("modulus {k_mod} must be at least 2")));
    }
    Ok((labels.iter().map(|&y| y % k_mod).collect(), labels.to_vec()))
}

/// Simulated annotator.
#[derive(Debug, Clone)]
pub enum Oracle {
    Deterministic(Vec<usize>),
    /// Samples class k with probability `probs[x][k]`.
    Stochastic { probs: Vec<Vec<f64>>, rng: ChaCha8Rng },
}

impl Oracle {
    pub fn label(&mut self, x: usize) -> usize {
        match self {
            Oracle::Deterministic(labels) => labels[x],
            Oracle::Stochastic { probs, rng } => {
                let u: f64 = rng.random();
                let row = &probs[x];
                let mut acc = 0.0;
                for (k, p) in row.iter().enumerate() {
                    acc += p;
                    if u < acc {
                        return k;
                    }
                }
                row.len() - 1
            }
        }
    }
}

/// Builds the configured dataset, applying the modulo protocol if requested.
pub fn build_dataset(cfg: &DatasetConfig) -> Result<Dataset<f64>> {
    let data = match cfg.source.as_str() {
        "grid-blobs" => grid_blobs(cfg.clusters, cfg.separation, cfg.std, cfg.n, cfg.seed)?,
        "two-moons" => two_moons(cfg.n, cfg.noise, cfg.seed)?,
        "mixture" => {
            let comps: Vec<MixtureComponent<f64>> = cfg
                .components
                .iter()
                .map(|c| MixtureComponent {
                    weight: c.weight,
                    mean: c.mean.clone(),
                    var_diag: c.var.clone(),
                    class: c.class,
                })
                .collect();
            generate_mixture(&comps, cfg.n, cfg.seed)?
        }
        "csv" | "idx" => {
            let path = cfg.path.as_ref().ok_or_else(|| Error::Config("dataset.path missing".into()))?;
            let format = if cfg.source == "csv" {
                DatasetFormat::Csv {
                    label_column: cfg.label_column.map_or(LabelColumn::Last, LabelColumn::Index),
                }
            } else {
                DatasetFormat::Idx {
                    labels: cfg.labels_path.clone(),
                }
            };
            let opts = LoadOptions {
                limit: cfg.limit,
                seed: cfg.seed,
            };
            load_dataset(path, &format, opts)?
        }
        other => return Err(Error::Config(format!("unknown dataset source '{other}'"))),
    };
    let labels = data
        .labels()
        .ok_or_else(|| Error::Structure("active learning needs a labeled dataset".into()))?
        .to_vec();
    match cfg.modulo {
        Some(m) => {
            let (y, clusters) = modulo_relabel(&labels, m)?;
            let k = m.min(data.num_classes());
            data.relabeled(y, clusters)?.with_num_classes(k)
        }
        None if data.cluster_ids().is_none() => {
            let k = data.num_classes();
            data.relabeled(labels.clone(), labels)?.with_num_classes(k)
        }
        None => Ok(data),
    }
}

/// Everything shared by the trials of one experiment.
#[derive(Debug, Clone)]
pub struct ExperimentSetup {
    pub config: ExperimentConfig,
    pub data: Dataset<f64>,
    pub lap: LaplacianOperator<f64>,
    pub alpha0: f64,
    pub k_hat: usize,
    pub components: usize,
    dense_cov: Option<Arc<GaussianFieldCovariance<f64>>>,
    low_rank_cov: Option<Arc<GaussianFieldCovariance<f64>>>,
}

impl ExperimentSetup {
    pub fn from_config(config: &ExperimentConfig) -> Result<Self> {
        config.validate()?;
        let data = build_dataset(&config.dataset)?;
        Self::with_dataset(config, data)
    }

    pub fn with_dataset(config: &ExperimentConfig, data: Dataset<f64>) -> Result<Self> {
        if data.labels().is_none() || data.cluster_ids().is_none() {
            return Err(Error::Structure("dataset needs labels and cluster ids".into()));
        }
        let metric = match config.graph.metric.as_str() {
            "cosine" => Metric::Cosine,
            _ => Metric::Rbf {
                sigma: config.graph.sigma,
            },
        };
        let k = config.graph.k.min(data.n().saturating_sub(1)).max(1);
        let graph = build_knn_graph(&data, k, metric)?;
        let components = graph.connectivity().components;
        let lap = LaplacianOperator::new(Arc::new(graph));
        let k_hat = config.model.k_hat.unwrap_or(2 * data.num_classes()).max(2);
        let cg = cg_options(config);
        let alpha0 = match config.model.alpha0 {
            AutoOr::Value(a) => a,
            AutoOr::Named(_) => alpha0_heuristic(&lap, config.propagation.tau, k_hat, config.experiment.seed, &cg)?,
        };
        let acqs = config.acquisitions()?;
        let (tau, sigma2) = (config.propagation.tau, config.acquisition.sigma2);
        let dense_cov = if acqs.iter().any(|a| a.uses_covariance() && !a.is_low_rank()) {
            Some(Arc::new(GaussianFieldCovariance::dense(&lap, tau, sigma2)?))
        } else {
            None
        };
        let low_rank_cov = if acqs.iter().any(|a| a.is_low_rank()) {
            let r = config.acquisition.rank.min(data.n());
            let cache = smallest_eigenpairs(&lap, r, 1e-8, &EigenOptions::default())?;
            Some(Arc::new(GaussianFieldCovariance::low_rank(&cache, tau, sigma2)?))
        } else {
            None
        };
        Ok(Self {
            config: config.clone(),
            data,
            lap,
            alpha0,
            k_hat,
            components,
            dense_cov,
            low_rank_cov,
        })
    }

    pub fn labels(&self) -> &[usize] {
        self.data.labels().expect("checked at construction")
    }

    pub fn cluster_ids(&self) -> &[usize] {
        self.data.cluster_ids().expect("checked at construction")
    }

    pub fn num_clusters(&self) -> usize {
        self.cluster_ids().iter().max().map_or(0, |m| m + 1)
    }

    /// Per-class uniform initial sample for `trial`.
    pub fn initial_labeled(&self, trial: usize) -> Vec<usize> {
        let mut rng = ChaCha8Rng::seed_from_u64(self.config.experiment.seed.wrapping_add(trial as u64));
        let labels = self.labels();
        let mut out = Vec::new();
        for c in 0..self.data.num_classes() {
            let members: Vec<usize> = (0..labels.len()).filter(|&x| labels[x] == c).collect();
            let m = self.config.experiment.initial_per_class.min(members.len());
            out.extend(index::sample(&mut rng, members.len(), m).into_iter().map(|i| members[i]));
        }
        out
    }

    fn policy(&self, acq: AcquisitionName) -> PolicyConfig {
        match acq {
            AcquisitionName::DirVarProp => PolicyConfig::proportional(match self.config.acquisition.lambda {
                AutoOr::Value(l) => LambdaMode::Fixed(l),
                AutoOr::Named(_) => LambdaMode::Heuristic { k_hat: self.k_hat },
            }),
            _ => PolicyConfig::max_value(),
        }
    }

    fn covariance(&self, acq: AcquisitionName) -> Result<Option<GaussianFieldCovariance<f64>>> {
        if !acq.uses_covariance() {
            return Ok(None);
        }
        let base = if acq.is_low_rank() {
            &self.low_rank_cov
        } else {
            &self.dense_cov
        };
        base.as_ref()
            .map(|c| Some((**c).clone()))
            .ok_or_else(|| Error::Config(format!("setup was built without the covariance needed by {acq}")))
    }
}

fn cg_options(config: &ExperimentConfig) -> CgOptions {
    CgOptions {
        tol: config.propagation.cg_tol,
        maxit: None,
    }
}

/// One row per iteration; row 0 is the initial state.
#[derive(Debug, Clone, PartialEq)]
pub struct TrialRow {
    pub iteration: usize,
    pub node: Option<usize>,
    pub class: Option<usize>,
    pub accuracy: f64,
    pub coverage: f64,
    /// Wall time of scoring plus selection.
    pub seconds: f64,
    pub lambda: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrialRecord {
    pub acquisition: AcquisitionName,
    pub trial: usize,
    pub initial: Vec<usize>,
    pub rows: Vec<TrialRow>,
}

impl TrialRecord {
    pub fn queries(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.rows.iter().filter_map(|r| Some((r.node?, r.class?)))
    }
}

struct TrialState<'a> {
    setup: &'a ExperimentSetup,
    classifier: Classifier,
    field: DirichletField<f64>,
    cache: PropagationCache<f64>,
    cov: Option<GaussianFieldCovariance<f64>>,
    labeled: Vec<(usize, usize)>,
    is_labeled: Vec<bool>,
    covered: Vec<bool>,
}

impl<'a> TrialState<'a> {
    fn new(setup: &'a ExperimentSetup, acq: AcquisitionName) -> Result<Self> {
        let n = setup.data.n();
        Ok(Self {
            setup,
            classifier: setup.config.classifier_for(acq),
            field: DirichletField::new(n, setup.data.num_classes(), setup.alpha0)?,
            cache: PropagationCache::new(),
            cov: setup.covariance(acq)?,
            labeled: Vec::new(),
            is_labeled: vec![false; n],
            covered: vec![false; setup.num_clusters()],
        })
    }

    fn observe(&mut self, x: usize, class: usize) -> Result<()> {
        let s = self.setup;
        self.cache
            .ensure_poisson(&s.lap, s.config.propagation.tau, &[x], &cg_options(&s.config))?;
        let col = self.cache.get(x).expect("just inserted");
        self.field.add_label(col, class)?;
        if let Some(cov) = &mut self.cov {
            cov.condition_on(x)?;
        }
        self.labeled.push((x, class));
        self.is_labeled[x] = true;
        self.covered[s.cluster_ids()[x]] = true;
        Ok(())
    }

    fn pool(&self) -> Vec<usize> {
        (0..self.is_labeled.len()).filter(|&x| !self.is_labeled[x]).collect()
    }

    fn coverage(&self) -> f64 {
        self.covered.iter().filter(|&&c| c).count() as f64 / self.covered.len().max(1) as f64
    }

    fn predictions(&self) -> Result<Vec<usize>> {
        let n = self.is_labeled.len();
        let k = self.field.num_classes();
        match self.classifier {
            // argmax α; β > 0 is not needed for the hard decision.
            Classifier::Dirichlet => Ok((0..n).map(|x| argmax(self.field.alpha(x))).collect()),
            Classifier::Laplace => {
                let out = laplace_learning(&self.setup.lap, &self.labeled, k, &cg_options(&self.setup.config))?;
                Ok((0..n).map(|x| argmax(&out.scores[x * k..(x + 1) * k])).collect())
            }
        }
    }

    fn accuracy(&self) -> Result<f64> {
        let pred = self.predictions()?;
        let truth = self.setup.labels();
        let (mut hit, mut total) = (0usize, 0usize);
        for x in (0..pred.len()).filter(|&x| !self.is_labeled[x]) {
            total += 1;
            hit += usize::from(pred[x] == truth[x]);
        }
        Ok(if total == 0 { 1.0 } else { hit as f64 / total as f64 })
    }

    fn scores(&self, acq: AcquisitionName, pool: &[usize]) -> Result<AcquisitionScores<f64>> {
        match acq {
            AcquisitionName::DirVar | AcquisitionName::DirVarProp => dir_var_scores(&self.field, pool),
            AcquisitionName::UncSm => {
                let k = self.field.num_classes();
                let out = laplace_learning(&self.setup.lap, &self.labeled, k, &cg_options(&self.setup.config))?;
                Ok(smallest_margin_scores(&out.scores, k, pool))
            }
            AcquisitionName::VOpt | AcquisitionName::VOptLowRank => {
                self.cov.as_ref().expect("covariance present").vopt_scores(pool)
            }
            AcquisitionName::SigmaOpt | AcquisitionName::SigmaOptLowRank => {
                self.cov.as_ref().expect("covariance present").sigmaopt_scores(pool)
            }
            AcquisitionName::Random => Ok(AcquisitionScores {
                name: "random",
                candidates: pool.to_vec(),
                values: vec![0.0; pool.len()],
                work: 0,
            }),
        }
    }
}

fn initial_row(state: &TrialState<'_>) -> Result<TrialRow> {
    Ok(TrialRow {
        iteration: 0,
        node: None,
        class: None,
        accuracy: state.accuracy()?,
        coverage: state.coverage(),
        seconds: 0.0,
        lambda: 0.0,
    })
}

/// Runs one seeded trial: score, select, query the oracle, update, record.
pub fn run_trial(setup: &ExperimentSetup, acq: AcquisitionName, trial: usize) -> Result<TrialRecord> {
    let mut state = TrialState::new(setup, acq)?;
    let mut oracle = Oracle::Deterministic(setup.labels().to_vec());
    let initial = setup.initial_labeled(trial);
    for &x in &initial {
        let y = oracle.label(x);
        state.observe(x, y)?;
    }
    let mut rows = vec![initial_row(&state)?];
    let mut rng = ChaCha8Rng::seed_from_u64(setup.config.experiment.seed.wrapping_add(trial as u64));
    rng.set_stream(1);
    let policy = setup.policy(acq);
    for it in 1..=setup.config.experiment.budget {
        let pool = state.pool();
        if pool.is_empty() {
            break;
        }
        let start = Instant::now();
        let (x, lambda) = if acq == AcquisitionName::Random {
            (pool[rng.random_range(0..pool.len())], 0.0)
        } else {
            let scores = state.scores(acq, &pool)?;
            policy.select(&scores, &mut rng)?
        };
        let seconds = start.elapsed().as_secs_f64();
        let y = oracle.label(x);
        state.observe(x, y)?;
        rows.push(TrialRow {
            iteration: it,
            node: Some(x),
            class: Some(y),
            accuracy: state.accuracy()?,
            coverage: state.coverage(),
            seconds,
            lambda,
        });
    }
    Ok(TrialRecord {
        acquisition: acq,
        trial,
        initial,
        rows,
    })
}

/// Recomputes accuracy and coverage by feeding a record's queries through a
/// fresh model.
pub fn replay_trial(setup: &ExperimentSetup, record: &TrialRecord) -> Result<Vec<(f64, f64)>> {
    let mut state = TrialState::new(setup, record.acquisition)?;
    for &x in &record.initial {
        state.observe(x, setup.labels()[x])?;
    }
    let mut out = vec![(state.accuracy()?, state.coverage())];
    for (x, y) in record.queries() {
        state.observe(x, y)?;
        out.push((state.accuracy()?, state.coverage()));
    }
    Ok(out)
}

/// Pointwise mean and population standard deviation across trials.
#[derive(Debug, Clone, PartialEq)]
pub struct CurvePoint {
    pub iteration: usize,
    pub trials: usize,
    pub mean_accuracy: f64,
    pub std_accuracy: f64,
    pub mean_coverage: f64,
    pub std_coverage: f64,
}

fn mean_std(v: &[f64]) -> (f64, f64) {
    let m = v.iter().sum::<f64>() / v.len() as f64;
    let var = v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / v.len() as f64;
    (m, var.sqrt())
}

/// Aggregates trial records; trials that stopped early drop out of later
/// iterations.
pub fn aggregate(records: &[TrialRecord]) -> Vec<CurvePoint> {
    let len = records.iter().map(|r| r.rows.len()).max().unwrap_or(0);
    (0..len)
        .map(|i| {
            let rows: Vec<&TrialRow> = records.iter().filter_map(|r| r.rows.get(i)).collect();
            let acc: Vec<f64> = rows.iter().map(|r| r.accuracy).collect();
            let cov: Vec<f64> = rows.iter().map(|r| r.coverage).collect();
            let (ma, sa) = mean_std(&acc);
            let (mc, sc) = mean_std(&cov);
            CurvePoint {
                iteration: i,
                trials: rows.len(),
                mean_accuracy: ma,
                std_accuracy: sa,
                mean_coverage: mc,
                std_coverage: sc,
            }
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct AcquisitionResult {
    pub acquisition: AcquisitionName,
    pub trials: Vec<TrialRecord>,
    pub curve: Vec<CurvePoint>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentResult {
    pub results: Vec<AcquisitionResult>,
}

/// Runs every configured acquisition for every trial; trials run in parallel.
pub fn run_experiment(setup: &ExperimentSetup) -> Result<ExperimentResult> {
    let trials = setup.config.experiment.trials;
    let results = setup
        .config
        .acquisitions()?
        .into_iter()
        .map(|acq| {
            let records = (0..trials)
                .into_par_iter()
                .map(|t| run_trial(setup, acq, t))
                .collect::<Result<Vec<_>>>()?;
            Ok(AcquisitionResult {
                acquisition: acq,
                curve: aggregate(&records),
                trials: records,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(ExperimentResult { results })
}

fn create(path: &Path) -> Result<std::io::BufWriter<std::fs::File>> {
    std::fs::File::create(path)
        .map(std::io::BufWriter::new)
        .map_err(|e| Error::io(path, e))
}

impl ExperimentResult {
    pub fn write_curves<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "acquisition,iteration,mean_acc,std_acc,mean_coverage,std_coverage")?;
        for r in &self.results {
            for p in &r.curve {
                writeln!(
                    out,
                    "{},{},{},{},{},{}",
                    r.acquisition, p.iteration, p.mean_accuracy, p.std_accuracy, p.mean_coverage, p.std_coverage
                )?;
            }
        }
        Ok(())
    }

    pub fn write_queries<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "acquisition,trial,iteration,node,class")?;
        for r in &self.results {
            for t in &r.trials {
                for row in &t.rows {
                    if let (Some(x), Some(y)) = (row.node, row.class) {
                        writeln!(out, "{},{},{},{x},{y}", r.acquisition, t.trial, row.iteration)?;
                    }
                }
            }
        }
        Ok(())
    }

    /// Writes `curves.csv` and `queries.csv` into `dir`, creating it.
    pub fn write_all(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let curves = dir.join("curves.csv");
        let mut w = create(&curves)?;
        self.write_curves(&mut w).and_then(|_| w.flush()).map_err(|e| Error::io(&curves, e))?;
        let queries = dir.join("queries.csv");
        let mut w = create(&queries)?;
        self.write_queries(&mut w).and_then(|_| w.flush()).map_err(|e| Error::io(&queries, e))?;
        Ok(())
    }
}

/// Summary printed by `graph-report`.
#[derive(Debug, Clone, PartialEq)]
pub struct GraphReport {
    pub n: usize,
    pub edges: usize,
    pub components: usize,
    pub min_degree: f64,
    pub mean_degree: f64,
    pub max_degree: f64,
    pub classes: usize,
    pub clusters: usize,
    pub alpha0: f64,
    pub separation: Option<SeparationEstimate>,
}

/// Graph statistics plus a `(δ, ζ, ε)` estimate on up to `probes` nodes.
pub fn graph_report(setup: &ExperimentSetup, probes: usize) -> Result<GraphReport> {
    let g = setup.lap.graph();
    let deg = g.degrees();
    let n = g.n();
    let mut rng = ChaCha8Rng::seed_from_u64(setup.config.experiment.seed);
    let sample = index::sample(&mut rng, n, probes.min(n)).into_vec();
    let mut cache = PropagationCache::new();
    cache.ensure_poisson(&setup.lap, setup.config.propagation.tau, &sample, &cg_options(&setup.config))?;
    let cols: Vec<_> = sample.iter().map(|&s| cache.get(s).expect("computed").clone()).collect();
    let separation = measure_class_separation(&cols, setup.cluster_ids(), &[0.0, 0.05, 0.1, 0.2]).ok();
    Ok(GraphReport {
        n,
        edges: g.nnz() / 2,
        components: setup.components,
        min_degree: deg.iter().copied().fold(f64::INFINITY, f64::min),
        mean_degree: deg.iter().sum::<f64>() / n as f64,
        max_degree: deg.iter().copied().fold(0.0, f64::max),
        classes: setup.data.num_classes(),
        clusters: setup.num_clusters(),
        alpha0: setup.alpha0,
        separation,
    })
}

impl GraphReport {
    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "key,value")?;
        let mut kv = vec![
            ("n", self.n.to_string()),
            ("edges", self.edges.to_string()),
            ("components", self.components.to_string()),
            ("min_degree", self.min_degree.to_string()),
            ("mean_degree", self.mean_degree.to_string()),
            ("max_degree", self.max_degree.to_string()),
            ("classes", self.classes.to_string()),
            ("clusters", self.clusters.to_string()),
            ("alpha0", self.alpha0.to_string()),
        ];
        if let Some(s) = self.separation {
            kv.push(("delta", s.delta.to_string()));
            kv.push(("zeta", s.zeta.to_string()));
            kv.push(("epsilon", s.epsilon.to_string()));
        }
        for (k, v) in kv {
            writeln!(out, "{k},{v}")?;
        }
        Ok(())
    }
}
