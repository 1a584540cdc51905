use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use mra_core::experiment::{run_experiment, set_recovery_key, ExperimentConfig, SignalSpec};
use mra_core::invariants::{estimate_invariants, estimate_sigma, BispectrumEstimator};
use mra_core::io::{read_batch, read_signal, write_batch, write_estimates, write_signal};
use mra_core::observations::generate_observations;
use mra_core::pipeline::{mra_recover, Method, RecoveryOptions};

#[derive(Parser)]
#[command(name = "mra", version, about = "Multireference alignment from shift-invariant features")]
struct Cli {
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Draw an observation batch from a signal.
    Gen {
        /// window(N,width,height), gaussian(N,seed), complex_gaussian(N,seed) or file:PATH
        #[arg(long)]
        signal: String,
        #[arg(long)]
        m: usize,
        #[arg(long)]
        sigma: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
        /// Also write the clean signal here.
        #[arg(long)]
        signal_out: Option<PathBuf>,
        /// Leave the true shifts out of the batch file.
        #[arg(long)]
        no_shifts: bool,
    },
    /// Estimate the mean, power spectrum and bispectrum of a batch.
    Invariants {
        #[arg(long)]
        batch: PathBuf,
        /// Noise level; defaults to the batch header.
        #[arg(long)]
        sigma: Option<f64>,
        /// Estimate σ from the data instead.
        #[arg(long, conflicts_with = "sigma")]
        estimate_sigma: bool,
        #[arg(long)]
        two_pass: bool,
        #[arg(long)]
        out: PathBuf,
    },
    /// Recover the signal from a batch.
    Recover {
        #[arg(long)]
        batch: PathBuf,
        #[arg(long)]
        method: Method,
        /// Ground-truth signal file, for the relative error and oracle phases.
        #[arg(long)]
        truth: Option<PathBuf>,
        #[arg(long)]
        sigma: Option<f64>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[command(flatten)]
        solver: SolverArgs,
        /// Write the estimate here.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run a parameter sweep and write results.csv and aggregate.csv.
    Experiment {
        #[arg(long, required_unless_present = "config")]
        preset: Option<String>,
        /// key=value config file, applied on top of the preset if both are given.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Extra key=value overrides.
        #[arg(long = "set", value_name = "KEY=VALUE")]
        overrides: Vec<String>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        repetitions: Option<usize>,
        #[command(flatten)]
        solver: SolverArgs,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Args, Default)]
struct SolverArgs {
    #[arg(long)]
    tol_grad: Option<f64>,
    #[arg(long)]
    max_iter: Option<usize>,
    #[arg(long)]
    restarts: Option<usize>,
    #[arg(long)]
    delta_lll: Option<f64>,
    #[arg(long)]
    irls_max_iter: Option<usize>,
    #[arg(long)]
    sdp_tol: Option<f64>,
    #[arg(long)]
    sdp_max_iter: Option<usize>,
    #[arg(long)]
    em_tol: Option<f64>,
    #[arg(long)]
    em_batch_iters: Option<usize>,
    #[arg(long)]
    em_batch_size: Option<usize>,
    #[arg(long)]
    two_pass: bool,
    /// Do not hand the true ỹ[0], ỹ[1] to fm, unwrap and sdp.
    #[arg(long)]
    no_oracle_phases: bool,
}

impl SolverArgs {
    fn pairs(&self) -> Vec<(&'static str, String)> {
        let mut out = Vec::new();
        let mut push = |k: &'static str, v: Option<String>| {
            if let Some(v) = v {
                out.push((k, v));
            }
        };
        push("tol_grad", self.tol_grad.map(|v| v.to_string()));
        push("max_iter", self.max_iter.map(|v| v.to_string()));
        push("restarts", self.restarts.map(|v| v.to_string()));
        push("delta_lll", self.delta_lll.map(|v| v.to_string()));
        push("irls_max_iter", self.irls_max_iter.map(|v| v.to_string()));
        push("sdp_tol", self.sdp_tol.map(|v| v.to_string()));
        push("sdp_max_iter", self.sdp_max_iter.map(|v| v.to_string()));
        push("em_tol", self.em_tol.map(|v| v.to_string()));
        push("em_batch_iters", self.em_batch_iters.map(|v| v.to_string()));
        push("em_batch_size", self.em_batch_size.map(|v| v.to_string()));
        push("estimator", self.two_pass.then(|| "two_pass".to_string()));
        push("oracle_phases", self.no_oracle_phases.then(|| "false".to_string()));
        out
    }

    fn apply(&self, opts: &mut RecoveryOptions) -> Result<()> {
        for (k, v) in self.pairs() {
            set_recovery_key(opts, k, &v)?;
        }
        Ok(())
    }
}

fn main() -> Result<()> {
    let cli = Cli::parse();
    if let Some(t) = cli.threads {
        rayon::ThreadPoolBuilder::new().num_threads(t).build_global().context("configuring thread pool")?;
    }
    match cli.cmd {
        Cmd::Gen { signal, m, sigma, seed, out, signal_out, no_shifts } => {
            let x = signal.parse::<SignalSpec>()?.build()?;
            let mut batch = generate_observations(&x, m, sigma, seed)?;
            if no_shifts {
                batch.true_shifts = None;
            }
            write_batch(&out, &batch).with_context(|| format!("writing {}", out.display()))?;
            if let Some(p) = signal_out {
                write_signal(&p, &x).with_context(|| format!("writing {}", p.display()))?;
            }
        }
        Cmd::Invariants { batch, sigma, estimate_sigma: est_sigma, two_pass, out } => {
            let b = read_batch(&batch).with_context(|| format!("reading {}", batch.display()))?;
            let s = match (sigma, est_sigma) {
                (Some(s), _) => s,
                (None, true) => estimate_sigma(&b)?,
                (None, false) => b.sigma,
            };
            let kind = if two_pass { BispectrumEstimator::TwoPass } else { BispectrumEstimator::OnePass };
            let e = estimate_invariants(&b, s, kind)?;
            write_estimates(&out, &e).with_context(|| format!("writing {}", out.display()))?;
        }
        Cmd::Recover { batch, method, truth, sigma, seed, solver, out } => {
            let b = read_batch(&batch).with_context(|| format!("reading {}", batch.display()))?;
            let mut opts = RecoveryOptions { sigma, seed, ..Default::default() };
            solver.apply(&mut opts)?;
            if let Some(p) = truth {
                opts.truth = Some(read_signal(&p).with_context(|| format!("reading {}", p.display()))?);
            }
            let r = mra_recover(&b, method, &opts)?;
            println!("method={}", r.method);
            if let Some(e) = r.relative_error {
                println!("relative_error={e}");
            }
            println!("wall_time_s={}", r.wall_time);
            println!("iterations={}", r.iterations);
            for (k, v) in &r.diagnostics {
                println!("{k}={v}");
            }
            if let Some(p) = out {
                write_signal(&p, &r.estimate).with_context(|| format!("writing {}", p.display()))?;
            }
        }
        Cmd::Experiment { preset, config, overrides, seed, repetitions, solver, out } => {
            let mut cfg = match &preset {
                Some(p) => ExperimentConfig::preset(p)?,
                None => ExperimentConfig::preset("figure3")?,
            };
            if let Some(p) = config {
                let text = std::fs::read_to_string(&p).with_context(|| format!("reading {}", p.display()))?;
                cfg = ExperimentConfig::from_kv_str(&text, cfg)?;
            }
            for kv in &overrides {
                let Some((k, v)) = kv.split_once('=') else { bail!("override '{kv}' is not KEY=VALUE") };
                cfg.set(k.trim(), v.trim())?;
            }
            for (k, v) in solver.pairs() {
                cfg.set(k, &v)?;
            }
            if let Some(s) = seed {
                cfg.seed = s;
            }
            if let Some(r) = repetitions {
                cfg.repetitions = r;
            }
            cfg.validate()?;
            let dir = out.or_else(|| cfg.output.clone()).context("no output directory; pass --out")?;
            let results = run_experiment(&cfg)?;
            results.write(&dir).with_context(|| format!("writing into {}", dir.display()))?;
            print!("{}", results.aggregate_csv());
        }
    }
    Ok(())
}
