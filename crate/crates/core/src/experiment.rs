//! Parameter sweeps over (σ, M, method) with repetitions, written as CSV.
//!
//! Configs are flat `key=value` text. Recognized keys:
//! `signal` (`window(N,width,height)`, `gaussian(N,seed)`, `complex_gaussian(N,seed)`
//! or `file:PATH`), `sigma` and `m` (comma lists), `repetitions`, `methods`
//! (method names plus the tasks `power_spectrum` and `bispectrum`), `seed`,
//! `output`, `estimator` (`one_pass` | `two_pass`), `oracle_phases`, and the
//! solver knobs `restarts`, `tol_grad`, `max_iter`, `delta_lll`,
//! `irls_max_iter`, `sdp_tol`, `sdp_max_iter`, `em_tol`, `em_batch_iters`,
//! `em_batch_size`.

use std::collections::BTreeMap;
use std::fmt::{self, Write as _};
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::Instant;

use rand::RngCore;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{MraError, Result};
use crate::invariants::{bispectrum_of, estimate_invariants, power_spectrum_of, BispectrumEstimator};
use crate::io::read_signal;
use crate::observations::generate_observations;
use crate::pipeline::{mra_recover, Method, RecoveryOptions};
use crate::signal::Signal;

#[derive(Debug, Clone, PartialEq)]
pub enum SignalSpec {
    Window { n: usize, width: usize, height: f64 },
    Gaussian { n: usize, seed: u64 },
    ComplexGaussian { n: usize, seed: u64 },
    File(PathBuf),
}

impl SignalSpec {
    pub fn build(&self) -> Result<Signal> {
        match self {
            SignalSpec::Window { n, width, height } => Signal::window(*n, *width, *height),
            SignalSpec::Gaussian { n, seed } => Signal::gaussian(*n, *seed),
            SignalSpec::ComplexGaussian { n, seed } => Signal::complex_gaussian(*n, *seed),
            SignalSpec::File(p) => read_signal(p),
        }
    }
}

fn args_of<'a>(s: &'a str, name: &str) -> Option<Vec<&'a str>> {
    let inner = s.strip_prefix(name)?.trim().strip_prefix('(')?.strip_suffix(')')?;
    Some(inner.split(',').map(str::trim).collect())
}

fn parse_value<T: FromStr>(key: &str, v: &str) -> Result<T> {
    v.trim().parse().map_err(|_| MraError::InvalidInput(format!("bad value for {key}: '{v}'")))
}

impl FromStr for SignalSpec {
    type Err = MraError;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        if let Some(p) = s.strip_prefix("file:") {
            return Ok(SignalSpec::File(PathBuf::from(p.trim())));
        }
        let bad = || MraError::InvalidInput(format!("bad signal spec '{s}'"));
        if let Some(a) = args_of(s, "window") {
            if a.len() != 3 {
                return Err(bad());
            }
            return Ok(SignalSpec::Window {
                n: parse_value("signal", a[0])?,
                width: parse_value("signal", a[1])?,
                height: parse_value("signal", a[2])?,
            });
        }
        // Longer name first so it is not read as `gaussian`.
        if let Some(a) = args_of(s, "complex_gaussian") {
            if a.len() != 2 {
                return Err(bad());
            }
            return Ok(SignalSpec::ComplexGaussian { n: parse_value("signal", a[0])?, seed: parse_value("signal", a[1])? });
        }
        if let Some(a) = args_of(s, "gaussian") {
            if a.len() != 2 {
                return Err(bad());
            }
            return Ok(SignalSpec::Gaussian { n: parse_value("signal", a[0])?, seed: parse_value("signal", a[1])? });
        }
        Err(bad())
    }
}

impl fmt::Display for SignalSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SignalSpec::Window { n, width, height } => write!(f, "window({n},{width},{height})"),
            SignalSpec::Gaussian { n, seed } => write!(f, "gaussian({n},{seed})"),
            SignalSpec::ComplexGaussian { n, seed } => write!(f, "complex_gaussian({n},{seed})"),
            SignalSpec::File(p) => write!(f, "file:{}", p.display()),
        }
    }
}

/// What gets measured in a sweep cell.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Task {
    Recover(Method),
    /// Relative error of the estimated power spectrum.
    PowerSpectrum,
    /// Relative error of the estimated bispectrum.
    Bispectrum,
}

impl Task {
    pub fn name(self) -> &'static str {
        match self {
            Task::Recover(m) => m.name(),
            Task::PowerSpectrum => "power_spectrum",
            Task::Bispectrum => "bispectrum",
        }
    }
}

impl FromStr for Task {
    type Err = MraError;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "power_spectrum" => Ok(Task::PowerSpectrum),
            "bispectrum" => Ok(Task::Bispectrum),
            other => other.parse().map(Task::Recover),
        }
    }
}

#[derive(Debug, Clone)]
pub struct ExperimentConfig {
    pub signal: SignalSpec,
    pub sigma_grid: Vec<f64>,
    pub m_grid: Vec<usize>,
    pub repetitions: usize,
    pub tasks: Vec<Task>,
    pub seed: u64,
    pub output: Option<PathBuf>,
    /// Solver settings shared by every cell; `truth` and `seed` are
    /// overwritten per cell.
    pub recovery: RecoveryOptions,
}

const ALL_PRESETS: [&str; 5] = ["figure2", "figure3", "figure4", "figure5", "figure6"];

impl ExperimentConfig {
    pub fn preset_names() -> &'static [&'static str] {
        &ALL_PRESETS
    }

    /// Desk-scale versions of the paper's experiments. figure4 and figure6
    /// are the wall-time views of the figure3 and figure5 sweeps, so they
    /// run the same cells; the `wall_time_s` column carries the timing.
    pub fn preset(name: &str) -> Result<Self> {
        let window = SignalSpec::Window { n: 41, width: 21, height: 1.0 };
        let methods: Vec<Task> = Method::ALL.iter().map(|&m| Task::Recover(m)).collect();
        let base = |signal, sigma_grid, m_grid, repetitions, tasks| ExperimentConfig {
            signal,
            sigma_grid,
            m_grid,
            repetitions,
            tasks,
            seed: 2017,
            output: None,
            recovery: RecoveryOptions::default(),
        };
        match name {
            "figure2" => Ok(base(
                SignalSpec::Gaussian { n: 41, seed: 1 },
                vec![0.5, 1.0, 2.0],
                vec![100, 316, 1000, 3162, 10000],
                10,
                vec![Task::PowerSpectrum, Task::Bispectrum],
            )),
            "figure3" | "figure4" => Ok(base(window, vec![1.0], vec![100, 1000, 10000], 5, methods)),
            "figure5" | "figure6" => Ok(base(window, vec![0.5, 1.0, 2.0, 3.0, 4.0], vec![10000], 5, methods)),
            other => Err(MraError::InvalidInput(format!("unknown preset '{other}'"))),
        }
    }

    /// Config from `key=value` lines on top of `base`. `#` starts a comment.
    pub fn from_kv_str(text: &str, base: ExperimentConfig) -> Result<Self> {
        let mut cfg = base;
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or(MraError::Parse { line: i + 1, msg: "expected key=value".into() })?;
            cfg.set(k.trim(), v.trim()).map_err(|e| MraError::Parse { line: i + 1, msg: e.to_string() })?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let list = |v: &str| v.split(',').map(str::trim).filter(|s| !s.is_empty()).map(String::from).collect::<Vec<_>>();
        match key {
            "signal" => self.signal = value.parse()?,
            "sigma" => self.sigma_grid = list(value).iter().map(|s| parse_value(key, s)).collect::<Result<_>>()?,
            "m" => self.m_grid = list(value).iter().map(|s| parse_value::<f64>(key, s).map(|x| x.round() as usize)).collect::<Result<_>>()?,
            "repetitions" => self.repetitions = parse_value(key, value)?,
            "methods" => self.tasks = list(value).iter().map(|s| s.parse()).collect::<Result<_>>()?,
            "seed" => self.seed = parse_value(key, value)?,
            "output" => self.output = Some(PathBuf::from(value)),
            _ => {
                if !set_recovery_key(&mut self.recovery, key, value)? {
                    return Err(MraError::InvalidInput(format!("unknown key '{key}'")));
                }
            }
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        if self.repetitions == 0 {
            return Err(MraError::InvalidInput("repetitions must be at least 1".into()));
        }
        if self.sigma_grid.is_empty() || self.m_grid.is_empty() || self.tasks.is_empty() {
            return Err(MraError::InvalidInput("sigma, m and methods must be non-empty".into()));
        }
        if self.sigma_grid.iter().any(|s| !s.is_finite() || *s < 0.0) {
            return Err(MraError::InvalidInput("sigma values must be finite and non-negative".into()));
        }
        if self.m_grid.contains(&0) {
            return Err(MraError::InvalidInput("m values must be positive".into()));
        }
        Ok(())
    }
}

/// Applies one solver setting by its config key. Returns `false` for keys
/// that are not solver settings.
pub fn set_recovery_key(r: &mut RecoveryOptions, key: &str, value: &str) -> Result<bool> {
    match key {
        "estimator" => {
            r.estimator = match value {
                "one_pass" => BispectrumEstimator::OnePass,
                "two_pass" => BispectrumEstimator::TwoPass,
                _ => return Err(MraError::InvalidInput(format!("unknown estimator '{value}'"))),
            }
        }
        "oracle_phases" => r.oracle_phases = parse_value(key, value)?,
        "restarts" => r.restarts = parse_value(key, value)?,
        "tol_grad" => {
            let t: f64 = parse_value(key, value)?;
            r.rtr.tol_grad = Some(t);
            r.phase_sync.inner.tol_grad = Some(t);
        }
        "max_iter" => {
            let t: usize = parse_value(key, value)?;
            r.rtr.max_iter = t;
            r.phase_sync.inner.max_iter = t;
        }
        "delta_lll" => r.unwrap.lll_delta = parse_value(key, value)?,
        "irls_max_iter" => r.unwrap.irls.max_iter = parse_value(key, value)?,
        "sdp_tol" => r.sdp.tol = parse_value(key, value)?,
        "sdp_max_iter" => r.sdp.max_iter = parse_value(key, value)?,
        "em_tol" => r.em.tol = parse_value(key, value)?,
        "em_batch_iters" => r.em.batch_iters = parse_value(key, value)?,
        "em_batch_size" => r.em.batch_size = parse_value(key, value)?,
        _ => return Ok(false),
    }
    Ok(true)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ResultRow {
    pub method: String,
    pub sigma: f64,
    pub m: usize,
    pub rep: usize,
    /// `None` when the cell failed; see `status`.
    pub rel_error: Option<f64>,
    pub wall_time_s: f64,
    /// `ok` or a short error code.
    pub status: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AggregateRow {
    pub method: String,
    pub sigma: f64,
    pub m: usize,
    /// Successful repetitions.
    pub n: usize,
    pub mean_rel_error: f64,
    pub stderr_rel_error: f64,
    pub mean_wall_time_s: f64,
    pub failures: usize,
}

#[derive(Debug, Clone, Default)]
pub struct ExperimentResults {
    pub rows: Vec<ResultRow>,
}

pub const CSV_HEADER: &str = "method,sigma,m,rep,rel_error,wall_time_s,status";
pub const AGGREGATE_HEADER: &str = "method,sigma,m,n,mean_rel_error,stderr_rel_error,mean_wall_time_s,failures";

fn error_code(e: &MraError) -> &'static str {
    match e {
        MraError::InvalidInput(_) => "invalid_input",
        MraError::LengthMismatch { .. } => "length_mismatch",
        MraError::VanishingDft { .. } => "vanishing_dft",
        MraError::NoMeasurements => "no_measurements",
        MraError::ZeroNorm => "zero_norm",
        MraError::NonFinite(_) => "non_finite",
        MraError::ZeroWeight { .. } => "zero_weight",
        MraError::DependentBasis => "dependent_basis",
        MraError::MissingShifts => "missing_shifts",
        MraError::UnknownMethod(_) => "unknown_method",
        MraError::Parse { .. } => "parse",
        MraError::Io(_) => "io",
    }
}

/// Mean and standard error (sample standard deviation over `√n`).
pub fn mean_stderr(v: &[f64]) -> (f64, f64) {
    let n = v.len();
    if n == 0 {
        return (f64::NAN, f64::NAN);
    }
    let mean = v.iter().sum::<f64>() / n as f64;
    if n == 1 {
        return (mean, 0.0);
    }
    let var = v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    (mean, (var / n as f64).sqrt())
}

impl ExperimentResults {
    pub fn to_csv(&self) -> String {
        let mut out = format!("{CSV_HEADER}\n");
        for r in &self.rows {
            let err = r.rel_error.map_or_else(|| "NaN".to_string(), |e| e.to_string());
            let _ = writeln!(out, "{},{},{},{},{},{},{}", r.method, r.sigma, r.m, r.rep, err, r.wall_time_s, r.status);
        }
        out
    }

    /// One row per (method, σ, M), in first-appearance order.
    pub fn aggregate(&self) -> Vec<AggregateRow> {
        let mut order: Vec<(String, u64, usize)> = Vec::new();
        let mut groups: BTreeMap<(String, u64, usize), Vec<&ResultRow>> = BTreeMap::new();
        for r in &self.rows {
            let key = (r.method.clone(), r.sigma.to_bits(), r.m);
            if !groups.contains_key(&key) {
                order.push(key.clone());
            }
            groups.entry(key).or_default().push(r);
        }
        order
            .into_iter()
            .map(|key| {
                let rows = &groups[&key];
                let errs: Vec<f64> = rows.iter().filter_map(|r| r.rel_error).collect();
                let (mean, se) = mean_stderr(&errs);
                let times: Vec<f64> = rows.iter().map(|r| r.wall_time_s).collect();
                AggregateRow {
                    method: key.0.clone(),
                    sigma: f64::from_bits(key.1),
                    m: key.2,
                    n: errs.len(),
                    mean_rel_error: mean,
                    stderr_rel_error: se,
                    mean_wall_time_s: mean_stderr(&times).0,
                    failures: rows.len() - errs.len(),
                }
            })
            .collect()
    }

    pub fn aggregate_csv(&self) -> String {
        let mut out = format!("{AGGREGATE_HEADER}\n");
        for a in self.aggregate() {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{},{}",
                a.method, a.sigma, a.m, a.n, a.mean_rel_error, a.stderr_rel_error, a.mean_wall_time_s, a.failures
            );
        }
        out
    }

    /// Writes `results.csv` and `aggregate.csv` into `dir`.
    pub fn write(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir)?;
        std::fs::write(dir.join("results.csv"), self.to_csv())?;
        std::fs::write(dir.join("aggregate.csv"), self.aggregate_csv())?;
        Ok(())
    }

    pub fn find(&self, method: &str, sigma: f64, m: usize) -> Option<AggregateRow> {
        self.aggregate().into_iter().find(|a| a.method == method && a.sigma == sigma && a.m == m)
    }
}

/// Seed for stream `index` of the generator seeded with `base`.
pub fn derived_seed(base: u64, index: u64) -> u64 {
    let mut rng = ChaCha8Rng::seed_from_u64(base);
    rng.set_stream(index);
    rng.next_u64()
}

fn rel_norm_error(truth: impl Iterator<Item = (f64, f64)>) -> f64 {
    let (mut num, mut den) = (0.0, 0.0);
    for (d, t) in truth {
        num += d;
        den += t;
    }
    (num / den).sqrt()
}

fn run_task(task: Task, x: &Signal, batch: &crate::observations::ObservationBatch, opts: &RecoveryOptions) -> Result<f64> {
    match task {
        Task::Recover(method) => {
            let r = mra_recover(batch, method, opts)?;
            r.relative_error.ok_or(MraError::InvalidInput("no ground truth".into()))
        }
        Task::PowerSpectrum | Task::Bispectrum => {
            let est = estimate_invariants(batch, opts.sigma.unwrap_or(batch.sigma), opts.estimator)?;
            if task == Task::PowerSpectrum {
                let p = power_spectrum_of(x);
                Ok(rel_norm_error(est.power_hat.iter().zip(&p).map(|(a, b)| ((a - b).powi(2), b * b))))
            } else {
                let b = bispectrum_of(x);
                Ok(rel_norm_error(est.bispec_hat.iter().zip(b.iter()).map(|(a, t)| ((a - t).norm_sqr(), t.norm_sqr()))))
            }
        }
    }
}

/// Runs the sweep. Every (σ, M, rep) cell draws one batch that all tasks
/// share, so method comparisons are paired. Rows come out ordered by σ, M,
/// task, rep regardless of scheduling.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentResults> {
    cfg.validate()?;
    let x = cfg.signal.build()?;
    let mut cells = Vec::new();
    for (si, &sigma) in cfg.sigma_grid.iter().enumerate() {
        for (mi, &m) in cfg.m_grid.iter().enumerate() {
            for rep in 0..cfg.repetitions {
                cells.push((si, mi, sigma, m, rep));
            }
        }
    }
    let per_cell: Vec<Vec<(usize, ResultRow)>> = cells
        .par_iter()
        .map(|&(si, mi, sigma, m, rep)| {
            let index = ((si * cfg.m_grid.len() + mi) * cfg.repetitions + rep) as u64;
            let cell_seed = derived_seed(cfg.seed, index);
            let batch = generate_observations(&x, m, sigma, cell_seed);
            cfg.tasks
                .iter()
                .enumerate()
                .map(|(ti, &task)| {
                    let mut opts = cfg.recovery.clone();
                    opts.truth = Some(x.clone());
                    opts.seed = derived_seed(cell_seed, ti as u64 + 1);
                    let t0 = Instant::now();
                    let res = batch.as_ref().map_err(|e| MraError::InvalidInput(e.to_string())).and_then(|b| run_task(task, &x, b, &opts));
                    let wall = t0.elapsed().as_secs_f64();
                    let (rel_error, status) = match res {
                        Ok(e) => (Some(e), "ok".to_string()),
                        Err(e) => (None, format!("error:{}", error_code(&e))),
                    };
                    let order = ((si * cfg.m_grid.len() + mi) * cfg.tasks.len() + ti) * cfg.repetitions + rep;
                    (order, ResultRow { method: task.name().to_string(), sigma, m, rep, rel_error, wall_time_s: wall, status })
                })
                .collect()
        })
        .collect();
    let mut rows: Vec<(usize, ResultRow)> = per_cell.into_iter().flatten().collect();
    rows.sort_by_key(|r| r.0);
    Ok(ExperimentResults { rows: rows.into_iter().map(|r| r.1).collect() })
}

/// Least-squares slope of `log10 err` against `log10 M` for one task and σ.
pub fn loglog_slope(results: &ExperimentResults, method: &str, sigma: f64) -> Option<f64> {
    let pts: Vec<(f64, f64)> = results
        .aggregate()
        .into_iter()
        .filter(|a| a.method == method && a.sigma == sigma && a.n > 0)
        .map(|a| ((a.m as f64).log10(), a.mean_rel_error.log10()))
        .collect();
    if pts.len() < 2 {
        return None;
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    Some(sxy / sxx)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> ExperimentConfig {
        let mut cfg = ExperimentConfig::preset("figure3").unwrap();
        cfg.signal = SignalSpec::Window { n: 9, width: 4, height: 1.0 };
        cfg.sigma_grid = vec![0.0, 0.5];
        cfg.m_grid = vec![20];
        cfg.repetitions = 2;
        cfg.tasks = vec![Task::Recover(Method::Fm), Task::Recover(Method::Oracle), Task::PowerSpectrum];
        cfg
    }

    #[test]
    fn signal_spec_parsing() {
        assert_eq!("window(41, 21, 1)".parse::<SignalSpec>().unwrap(), SignalSpec::Window { n: 41, width: 21, height: 1.0 });
        assert_eq!("gaussian(41,3)".parse::<SignalSpec>().unwrap(), SignalSpec::Gaussian { n: 41, seed: 3 });
        assert_eq!("complex_gaussian(5,3)".parse::<SignalSpec>().unwrap(), SignalSpec::ComplexGaussian { n: 5, seed: 3 });
        assert_eq!("file:a/b.txt".parse::<SignalSpec>().unwrap(), SignalSpec::File("a/b.txt".into()));
        for s in ["window(1,2)", "box(3)", "gaussian(x,1)"] {
            assert!(s.parse::<SignalSpec>().is_err(), "{s}");
        }
        let w = SignalSpec::Window { n: 41, width: 21, height: 1.0 };
        assert_eq!(w.to_string().parse::<SignalSpec>().unwrap(), w);
    }

    #[test]
    fn presets_are_valid() {
        for p in ExperimentConfig::preset_names() {
            ExperimentConfig::preset(p).unwrap().validate().unwrap();
        }
        let f2 = ExperimentConfig::preset("figure2").unwrap();
        assert_eq!(f2.m_grid, vec![100, 316, 1000, 3162, 10000]);
        assert_eq!(f2.repetitions, 10);
        let f5 = ExperimentConfig::preset("figure5").unwrap();
        assert_eq!(f5.sigma_grid, vec![0.5, 1.0, 2.0, 3.0, 4.0]);
        assert_eq!(f5.tasks.len(), Method::ALL.len());
        assert!(ExperimentConfig::preset("figure9").is_err());
    }

    #[test]
    fn kv_parsing_and_errors() {
        let text = "# comment\nsignal = gaussian(7, 2)\nsigma=0.5, 1\nm=1e2,316\nrepetitions=3\nmethods=fm,em,bispectrum\nseed=9 # trailing\nem_batch_iters=10\ntol_grad=1e-9\n";
        let cfg = ExperimentConfig::from_kv_str(text, ExperimentConfig::preset("figure3").unwrap()).unwrap();
        assert_eq!(cfg.signal, SignalSpec::Gaussian { n: 7, seed: 2 });
        assert_eq!(cfg.sigma_grid, vec![0.5, 1.0]);
        assert_eq!(cfg.m_grid, vec![100, 316]);
        assert_eq!(cfg.repetitions, 3);
        assert_eq!(cfg.tasks, vec![Task::Recover(Method::Fm), Task::Recover(Method::Em), Task::Bispectrum]);
        assert_eq!(cfg.seed, 9);
        assert_eq!(cfg.recovery.em.batch_iters, 10);
        assert_eq!(cfg.recovery.rtr.tol_grad, Some(1e-9));
        let base = || ExperimentConfig::preset("figure3").unwrap();
        assert!(matches!(ExperimentConfig::from_kv_str("x", base()), Err(MraError::Parse { line: 1, .. })));
        assert!(matches!(ExperimentConfig::from_kv_str("\nfoo=1", base()), Err(MraError::Parse { line: 2, .. })));
        assert!(ExperimentConfig::from_kv_str("repetitions=0", base()).is_err());
        assert!(ExperimentConfig::from_kv_str("sigma=", base()).is_err());
        assert!(ExperimentConfig::from_kv_str("methods=fm,nope", base()).is_err());
    }

    #[test]
    fn sweep_is_deterministic_and_ordered() {
        let cfg = small();
        let a = run_experiment(&cfg).unwrap();
        let b = run_experiment(&cfg).unwrap();
        assert_eq!(a.rows.len(), 2 * 3 * 2);
        let strip = |r: &ExperimentResults| r.rows.iter().map(|x| (x.method.clone(), x.sigma, x.rep, x.rel_error, x.status.clone())).collect::<Vec<_>>();
        assert_eq!(strip(&a), strip(&b));
        assert_eq!(a.rows[0].method, "fm");
        assert_eq!((a.rows[1].method.as_str(), a.rows[1].rep), ("fm", 1));
        assert_eq!(a.rows[2].method, "oracle");
        assert!(a.rows.iter().all(|r| r.status == "ok"));
        // Noiseless cells are exact.
        assert!(a.rows.iter().filter(|r| r.sigma == 0.0).all(|r| r.rel_error.unwrap() < 1e-8));
        let csv = a.to_csv();
        assert!(csv.starts_with(CSV_HEADER));
        assert_eq!(csv.lines().count(), 13);
        assert_eq!(a.aggregate_csv().lines().count(), 1 + 6);
    }

    #[test]
    fn failures_are_recorded() {
        let mut cfg = small();
        // A width-4 window at N=8 has y[2] = 0, which direct inversion rejects.
        cfg.signal = SignalSpec::Window { n: 8, width: 4, height: 1.0 };
        cfg.sigma_grid = vec![0.0];
        cfg.repetitions = 1;
        cfg.tasks = vec![Task::Recover(Method::Direct), Task::Recover(Method::Oracle)];
        let r = run_experiment(&cfg).unwrap();
        assert_eq!(r.rows[0].status, "error:vanishing_dft");
        assert!(r.rows[0].rel_error.is_none());
        assert!(r.to_csv().lines().nth(1).unwrap().contains(",NaN,"));
        assert_eq!(r.rows[1].status, "ok");
        let agg = r.aggregate();
        assert_eq!((agg[0].n, agg[0].failures), (0, 1));
    }

    #[test]
    fn stderr_oracle() {
        let (m, se) = mean_stderr(&[1.0, 2.0, 3.0, 4.0]);
        assert_eq!(m, 2.5);
        // Sample variance 5/3.
        assert!((se - (5.0f64 / 3.0 / 4.0).sqrt()).abs() < 1e-15);
        assert_eq!(mean_stderr(&[3.0]), (3.0, 0.0));
    }

    #[test]
    fn slope_of_exact_power_law() {
        let rows = [100usize, 1000, 10000]
            .iter()
            .map(|&m| ResultRow {
                method: "t".into(),
                sigma: 1.0,
                m,
                rep: 0,
                rel_error: Some(3.0 / (m as f64).sqrt()),
                wall_time_s: 0.0,
                status: "ok".into(),
            })
            .collect();
        let s = loglog_slope(&ExperimentResults { rows }, "t", 1.0).unwrap();
        assert!((s + 0.5).abs() < 1e-12);
    }
}
