use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use dial_core::acquisition::AcquisitionName;
use dial_core::active::{
    graph_report, loglog_slope, run_experiment, timing_benchmark, write_timing, ExperimentConfig, ExperimentSetup,
    TimingOptions,
};
use dial_core::theory::{
    empirical_consistency, evolve_alpha, exploration_bound, fixed_point_qbar, monte_carlo_discovery,
    trapezoid_weights, eval_eta, population_uncertainty, BoundParams, ConsistencyOptions, DiscoveryParams,
    FixedPointOptions, LambdaSchedule, Mixture1D, MixtureComponent, OdeOptions,
};
use dial_core::Error;

#[derive(Parser)]
#[command(name = "dial", version, about = "Dirichlet active learning experiments")]
struct Cli {
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the active-learning experiment described by a TOML config.
    Run {
        config: PathBuf,
        #[command(flatten)]
        overrides: Overrides,
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
    /// Summarize the graph and class separation of a config's dataset.
    GraphReport {
        config: PathBuf,
        #[arg(long, default_value_t = 40)]
        probes: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Time one pool-scoring pass per acquisition across graph sizes.
    BenchTiming {
        #[arg(long, value_delimiter = ',', default_value = "1000,2000,4000")]
        sizes: Vec<usize>,
        #[arg(long, value_delimiter = ',', default_value = "dirvar,vopt,vopt-lowrank")]
        acquisitions: Vec<String>,
        #[arg(long, default_value_t = 7)]
        repetitions: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Numerical checks of the exploration and exploitation analysis.
    #[command(subcommand)]
    Theory(Theory),
}

#[derive(Args)]
struct Overrides {
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    budget: Option<usize>,
    #[arg(long)]
    trials: Option<usize>,
    /// Comma-separated acquisition names.
    #[arg(long, value_delimiter = ',')]
    acquisitions: Option<Vec<String>>,
}

#[derive(Clone, Copy, clap::ValueEnum)]
enum MixtureChoice {
    Boundary,
    Symmetric,
}

impl MixtureChoice {
    fn build(self) -> Mixture1D {
        match self {
            MixtureChoice::Boundary => Mixture1D::boundary_example(),
            MixtureChoice::Symmetric => Mixture1D::symmetric_pair(),
        }
    }
}

#[derive(Subcommand)]
enum Theory {
    /// Integrate the continuum pseudolabel ODE; CSV of q snapshots on the grid.
    Ode {
        /// constant[:λ], power:p or linear:λ₀
        #[arg(long, default_value = "constant")]
        schedule: String,
        #[arg(long, default_value_t = 1e10)]
        t_end: f64,
        #[arg(long, default_value_t = 400)]
        steps_per_decade: usize,
        #[arg(long, value_enum, default_value = "boundary")]
        mixture: MixtureChoice,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Solve q̄ ∝ exp(λ₀ G / q̄) on the grid.
    Qbar {
        #[arg(long)]
        lambda0: f64,
        #[arg(long, value_enum, default_value = "boundary")]
        mixture: MixtureChoice,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Evaluate the exploration constant C and the K-step probability bound.
    ExploreBound {
        #[arg(long)]
        k: usize,
        #[arg(long)]
        alpha0: f64,
        #[arg(long, default_value_t = 0.0)]
        eps: f64,
        #[arg(long, default_value_t = 1.0)]
        zeta: f64,
        #[arg(long, default_value_t = 0.0)]
        delta: f64,
        #[arg(long, default_value_t = 50.0)]
        lambda: f64,
        /// Defaults to 1/K.
        #[arg(long)]
        w_min: Option<f64>,
    },
    /// Simulate K proportional-sampling steps on a synthetic separator kernel.
    McDiscovery {
        #[arg(long, default_value_t = 3)]
        k: usize,
        /// Defaults to 1/K².
        #[arg(long)]
        alpha0: Option<f64>,
        #[arg(long, default_value_t = 50.0)]
        lambda: f64,
        #[arg(long, default_value_t = 0.0)]
        delta: f64,
        #[arg(long, default_value_t = 1.0)]
        zeta: f64,
        #[arg(long, default_value_t = 0.0)]
        eps: f64,
        #[arg(long, default_value_t = 10_000)]
        trials: usize,
        #[arg(long, default_value_t = 200)]
        points: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// L1 error of the kernel trend estimate across sample sizes.
    Consistency {
        #[arg(long, value_delimiter = ',', default_value = "100,1000,10000")]
        sizes: Vec<usize>,
        #[arg(long, default_value_t = 20)]
        trials: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn output(path: Option<&Path>) -> Result<Box<dyn Write>, Error> {
    Ok(match path {
        Some(p) => {
            if let Some(dir) = p.parent().filter(|d| !d.as_os_str().is_empty()) {
                std::fs::create_dir_all(dir).map_err(|e| Error::Io {
                    path: dir.display().to_string(),
                    source: e,
                })?;
            }
            let f = File::create(p).map_err(|e| Error::Io {
                path: p.display().to_string(),
                source: e,
            })?;
            Box::new(BufWriter::new(f))
        }
        None => Box::new(BufWriter::new(io::stdout())),
    })
}

fn io_err(path: Option<&Path>) -> impl Fn(io::Error) -> Error + '_ {
    move |e| Error::Io {
        path: path.map_or_else(|| "<stdout>".into(), |p| p.display().to_string()),
        source: e,
    }
}

fn load_config(path: &Path, o: &Overrides) -> Result<ExperimentConfig, Error> {
    let mut cfg = ExperimentConfig::load(path)?;
    if let Some(s) = o.seed {
        cfg.experiment.seed = s;
    }
    if let Some(b) = o.budget {
        cfg.experiment.budget = b;
    }
    if let Some(t) = o.trials {
        cfg.experiment.trials = t;
    }
    if let Some(a) = &o.acquisitions {
        cfg.acquisition.names = a.clone();
    }
    cfg.validate()?;
    Ok(cfg)
}

fn run(cli: Cli) -> Result<(), Error> {
    match cli.command {
        Command::Run { config, overrides, out } => {
            let cfg = load_config(&config, &overrides)?;
            let setup = ExperimentSetup::from_config(&cfg)?;
            let result = run_experiment(&setup)?;
            result.write_all(&out)?;
            for r in &result.results {
                if let Some(last) = r.curve.last() {
                    println!(
                        "{:<18} iteration {:>3}  accuracy {:.4} ± {:.4}  coverage {:.3}",
                        r.acquisition.as_str(),
                        last.iteration,
                        last.mean_accuracy,
                        last.std_accuracy,
                        last.mean_coverage
                    );
                }
            }
            println!("wrote {}", out.display());
        }
        Command::GraphReport { config, probes, out } => {
            let cfg = ExperimentConfig::load(&config)?;
            let setup = ExperimentSetup::from_config(&cfg)?;
            let report = graph_report(&setup, probes)?;
            let p = out.as_deref();
            let mut w = output(p)?;
            report.write_csv(&mut w).map_err(io_err(p))?;
            w.flush().map_err(io_err(p))?;
        }
        Command::BenchTiming {
            sizes,
            acquisitions,
            repetitions,
            seed,
            out,
        } => {
            let acqs = acquisitions
                .iter()
                .map(|s| s.parse())
                .collect::<Result<Vec<AcquisitionName>, _>>()?;
            if sizes.iter().any(|&n| n < 20) {
                return Err(Error::Config("bench sizes must be at least 20".into()));
            }
            let opts = TimingOptions {
                repetitions,
                seed,
                ..Default::default()
            };
            let rows = timing_benchmark(&sizes, &acqs, &opts)?;
            let p = out.as_deref();
            let mut w = output(p)?;
            write_timing(&rows, &mut w).map_err(io_err(p))?;
            w.flush().map_err(io_err(p))?;
            if sizes.len() > 1 {
                for acq in &acqs {
                    let pts: Vec<(f64, f64)> = rows
                        .iter()
                        .filter(|r| r.acquisition == *acq)
                        .map(|r| (r.n as f64, r.seconds))
                        .collect();
                    eprintln!("{acq}: log-log slope {:.3}", loglog_slope(&pts));
                }
            }
        }
        Command::Theory(t) => theory(t)?,
    }
    Ok(())
}

fn theory(t: Theory) -> Result<(), Error> {
    match t {
        Theory::Ode {
            schedule,
            t_end,
            steps_per_decade,
            mixture,
            out,
        } => {
            let schedule: LambdaSchedule = schedule.parse()?;
            let opts = OdeOptions {
                steps_per_decade,
                ..Default::default()
            };
            let traj = evolve_alpha(&mixture.build(), schedule, t_end, &opts)?;
            let p = out.as_deref();
            let mut w = output(p)?;
            let e = io_err(p);
            write!(w, "x,g").map_err(&e)?;
            for s in &traj.snapshots {
                write!(w, ",q_t{:e}", s.t).map_err(&e)?;
            }
            writeln!(w).map_err(&e)?;
            for i in 0..traj.x.len() {
                write!(w, "{},{}", traj.x[i], traj.g[i]).map_err(&e)?;
                for s in &traj.snapshots {
                    write!(w, ",{}", s.q[i]).map_err(&e)?;
                }
                writeln!(w).map_err(&e)?;
            }
            w.flush().map_err(&e)?;
        }
        Theory::Qbar { lambda0, mixture, out } => {
            let mix = mixture.build();
            let x = mix.grid_points();
            let g: Vec<f64> = eval_eta(&mix, &x)?.iter().map(|r| population_uncertainty(r)).collect();
            let fp = fixed_point_qbar(lambda0, &g, &trapezoid_weights(&x), &FixedPointOptions::default())?;
            eprintln!("converged in {} iterations, residual {:e}", fp.iterations, fp.residual);
            let p = out.as_deref();
            let mut w = output(p)?;
            let e = io_err(p);
            writeln!(w, "x,g,qbar").map_err(&e)?;
            for i in 0..x.len() {
                writeln!(w, "{},{},{}", x[i], g[i], fp.q[i]).map_err(&e)?;
            }
            w.flush().map_err(&e)?;
        }
        Theory::ExploreBound {
            k,
            alpha0,
            eps,
            zeta,
            delta,
            lambda,
            w_min,
        } => {
            let b = exploration_bound(&BoundParams {
                alpha0,
                epsilon: eps,
                zeta,
                delta,
                k,
                lambda,
                w_min: w_min.unwrap_or(1.0 / k.max(1) as f64),
            })?;
            println!("C = {}", b.c);
            println!("probability >= {}", b.probability);
        }
        Theory::McDiscovery {
            k,
            alpha0,
            lambda,
            delta,
            zeta,
            eps,
            trials,
            points,
            seed,
        } => {
            let alpha0 = alpha0.unwrap_or(1.0 / (k * k).max(1) as f64);
            let params = DiscoveryParams {
                delta,
                zeta,
                epsilon: eps,
                points_per_cluster: points,
                ..DiscoveryParams::equal_weights(k, alpha0, lambda, trials, seed)
            };
            let r = monte_carlo_discovery(&params)?;
            let bound = exploration_bound(&BoundParams {
                alpha0,
                epsilon: eps,
                zeta,
                delta,
                k,
                lambda,
                w_min: 1.0 / k as f64,
            })?;
            println!("k,lambda,alpha0,trials,frequency,std_error,bound");
            println!(
                "{k},{lambda},{alpha0},{},{},{},{}",
                r.trials, r.frequency, r.std_error, bound.probability
            );
        }
        Theory::Consistency {
            sizes,
            trials,
            seed,
            out,
        } => {
            let c = |weight, mean, class| MixtureComponent {
                weight,
                mean,
                std: 0.7,
                class,
            };
            let mix = Mixture1D::new(vec![c(0.6, -1.0, 0), c(0.4, 1.0, 1)], (-4.0, 4.0), 161)?;
            let rows = empirical_consistency(
                &mix,
                &ConsistencyOptions {
                    sizes,
                    trials,
                    seed,
                    ..Default::default()
                },
            )?;
            let p = out.as_deref();
            let mut w = output(p)?;
            let e = io_err(p);
            writeln!(w, "n,t,mean_l1,std_error").map_err(&e)?;
            for r in rows {
                writeln!(w, "{},{},{},{}", r.n, r.t, r.mean_l1, r.std_error).map_err(&e)?;
            }
            w.flush().map_err(&e)?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    if let Some(n) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: cannot set thread count: {e}");
            return ExitCode::from(2);
        }
    }
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(match e {
                Error::Config(_) => 2,
                _ => 3,
            })
        }
    }
}
