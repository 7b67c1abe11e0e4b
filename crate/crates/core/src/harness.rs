//! Seeded Monte Carlo comparison of SNIHT, HUB-SNIHT and MUSIC on the
//! grid-based source-localization problem.
//!
//! Every trial draws its own data from a ChaCha stream selected by
//! `(master_seed, trial)`, so results do not depend on how trials are
//! scheduled across threads.

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::doa::{
    exact_recovery, music_estimate, simulate_snapshots, steering_matrix, NoiseKind, NoiseModel, Scenario, SteeringGrid,
};
use crate::error::{validation, Error, Result};
use crate::matrix::{ComplexMatrix, SupportSet};
use crate::solver::{hub_sniht, sniht, InitSupportMode, SolverConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Method {
    #[serde(rename = "sniht")]
    Sniht,
    #[serde(rename = "hub-sniht")]
    HubSniht,
    #[serde(rename = "music")]
    Music,
}

impl Method {
    pub const ALL: [Method; 3] = [Method::Sniht, Method::HubSniht, Method::Music];

    pub fn name(self) -> &'static str {
        match self {
            Method::Sniht => "sniht",
            Method::HubSniht => "hub-sniht",
            Method::Music => "music",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub min: f64,
    pub step: f64,
    pub max: f64,
}

impl Default for GridSpec {
    fn default() -> Self {
        Self {
            min: -90.0,
            step: 2.0,
            max: 90.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverSettings {
    pub q_quantile: f64,
    pub max_iter: usize,
    pub rel_tol: f64,
}

impl Default for SolverSettings {
    fn default() -> Self {
        Self {
            q_quantile: 0.8,
            max_iter: 500,
            rel_tol: 1e-6,
        }
    }
}

/// Fully resolved experiment description.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    /// Number of sensors.
    pub n: usize,
    pub grid: GridSpec,
    pub true_doas: Vec<f64>,
    /// Snapshots per trial.
    pub q: usize,
    pub snr_db: f64,
    pub noise: NoiseModel,
    pub methods: Vec<Method>,
    pub trials: usize,
    pub master_seed: u64,
    pub solver: SolverSettings,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawNoise {
    kind: String,
    lambda: Option<f64>,
    variance: Option<f64>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSolver {
    q_quantile: Option<f64>,
    max_iter: Option<usize>,
    rel_tol: Option<f64>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    n: Option<usize>,
    grid: Option<GridSpec>,
    true_doas: Vec<f64>,
    q: usize,
    snr_db: f64,
    noise: RawNoise,
    methods: Option<Vec<Method>>,
    trials: Option<usize>,
    master_seed: Option<u64>,
    solver: Option<RawSolver>,
}

/// Parses and validates a JSON experiment description, filling defaults.
pub fn parse_config(text: &str) -> Result<ExperimentConfig> {
    let raw: RawConfig = serde_json::from_str(text).map_err(|e| Error::Parse {
        line: e.line(),
        column: e.column(),
        message: e.to_string(),
    })?;

    let variance = raw.noise.variance.unwrap_or(1.0);
    let kind = match raw.noise.kind.as_str() {
        "gaussian" => NoiseKind::Gaussian,
        "igcg" => NoiseKind::Igcg {
            lambda: raw
                .noise
                .lambda
                .ok_or_else(|| validation("noise.lambda", "required for igcg noise"))?,
        },
        other => {
            return Err(validation(
                "noise.kind",
                format!("expected `gaussian` or `igcg`, got `{other}`"),
            ))
        }
    };
    let solver = raw.solver.map_or_else(SolverSettings::default, |s| {
        let d = SolverSettings::default();
        SolverSettings {
            q_quantile: s.q_quantile.unwrap_or(d.q_quantile),
            max_iter: s.max_iter.unwrap_or(d.max_iter),
            rel_tol: s.rel_tol.unwrap_or(d.rel_tol),
        }
    });
    let config = ExperimentConfig {
        n: raw.n.unwrap_or(20),
        grid: raw.grid.unwrap_or_default(),
        true_doas: raw.true_doas,
        q: raw.q,
        snr_db: raw.snr_db,
        noise: NoiseModel { kind, variance },
        methods: raw.methods.unwrap_or_else(|| Method::ALL.to_vec()),
        trials: raw.trials.unwrap_or(1000),
        master_seed: raw.master_seed.unwrap_or(0),
        solver,
    };
    config.validate()?;
    Ok(config)
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        self.scenario().map(|_| ())
    }

    fn grid(&self) -> Result<SteeringGrid> {
        if self.n == 0 {
            return Err(validation("n", "need at least one sensor"));
        }
        let g = self.grid;
        SteeringGrid::uniform(self.n, g.min, g.step, g.max).map_err(|e| validation("grid", e.to_string()))
    }

    /// Builds the scenario after checking every field.
    pub fn scenario(&self) -> Result<Scenario> {
        let grid = self.grid()?;
        if self.trials == 0 {
            return Err(validation("trials", "must be at least 1"));
        }
        if self.q == 0 {
            return Err(validation("q", "need at least one snapshot"));
        }
        if !self.snr_db.is_finite() {
            return Err(validation("snr_db", "must be finite"));
        }
        if self.true_doas.is_empty() {
            return Err(validation("true_doas", "need at least one source"));
        }
        if let Some(d) = self.true_doas.iter().find(|&&d| grid.index_of(d).is_none()) {
            return Err(validation("true_doas", format!("{d} is not a grid point")));
        }
        if !(self.noise.variance >= 0.0 && self.noise.variance.is_finite()) {
            return Err(validation("noise.variance", "must be finite and nonnegative"));
        }
        if let NoiseKind::Igcg { lambda } = self.noise.kind {
            if !(lambda > 0.0 && lambda.is_finite()) {
                return Err(validation("noise.lambda", "must be finite and positive"));
            }
        }
        let mut seen = Vec::new();
        for m in &self.methods {
            if seen.contains(m) {
                return Err(validation("methods", format!("`{m}` listed twice")));
            }
            seen.push(*m);
        }
        if self.methods.contains(&Method::Music) && self.true_doas.len() >= self.n {
            return Err(validation("true_doas", "MUSIC needs fewer sources than sensors"));
        }
        let s = self.solver;
        if !(s.q_quantile > 0.0 && s.q_quantile < 1.0) {
            return Err(validation("solver.q_quantile", "must lie in (0, 1)"));
        }
        if s.max_iter == 0 {
            return Err(validation("solver.max_iter", "must be at least 1"));
        }
        if !(s.rel_tol > 0.0) {
            return Err(validation("solver.rel_tol", "must be positive"));
        }
        Scenario::new(grid, &self.true_doas, self.q, self.snr_db, self.noise)
            .map_err(|e| validation("true_doas", e.to_string()))
    }

    pub fn solver_config(&self) -> SolverConfig {
        let mut cfg = SolverConfig::new(self.true_doas.len()).with_init_support(InitSupportMode::Peaks);
        cfg.q_quantile = self.solver.q_quantile;
        cfg.max_iter = self.solver.max_iter;
        cfg.rel_tol = self.solver.rel_tol;
        cfg
    }
}

/// Aggregated outcome of one method.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodSummary {
    pub method: Method,
    /// Fraction of trials with exactly the true support.
    pub per: f64,
    pub successes: usize,
    /// Trials in which the method failed numerically (counted as misses).
    pub warnings: usize,
    /// Relative frequency of each grid angle among the estimates, per trial.
    pub histogram: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentResult {
    pub config: ExperimentConfig,
    pub trials: usize,
    pub angles_deg: Vec<f64>,
    pub methods: Vec<MethodSummary>,
    pub wall_time_secs: f64,
}

impl ExperimentResult {
    pub fn summary(&self, method: Method) -> Option<&MethodSummary> {
        self.methods.iter().find(|m| m.method == method)
    }

    pub fn per(&self, method: Method) -> Option<f64> {
        self.summary(method).map(|m| m.per)
    }
}

/// Data for one trial: independent stream `trial` of the master seed.
pub fn trial_rng(master_seed: u64, trial: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(master_seed);
    rng.set_stream(trial as u64);
    rng
}

fn estimate(
    method: Method,
    y: &ComplexMatrix,
    a: &ComplexMatrix,
    scenario: &Scenario,
    solver: &SolverConfig,
) -> Result<SupportSet> {
    match method {
        Method::Sniht => sniht(y, a, solver).map(|r| r.support),
        Method::HubSniht => hub_sniht(y, a, solver).map(|r| r.support),
        Method::Music => music_estimate(y, &scenario.grid, solver.sparsity),
    }
}

/// Runs every trial and aggregates PER and DOA histograms.
///
/// `threads` selects the worker count (`None` uses the global pool).
pub fn run_experiment(config: &ExperimentConfig, threads: Option<usize>) -> Result<ExperimentResult> {
    let started = Instant::now();
    let scenario = config.scenario()?;
    let a = steering_matrix(&scenario.grid);
    let solver = config.solver_config();

    let run_trial = |t: usize| -> Vec<Option<SupportSet>> {
        let mut rng = trial_rng(config.master_seed, t);
        let (y, _) = simulate_snapshots(&scenario, &mut rng);
        config
            .methods
            .iter()
            .map(|&m| estimate(m, &y, &a, &scenario, &solver).ok())
            .collect()
    };
    let outcomes: Vec<Vec<Option<SupportSet>>> = match threads {
        Some(t) => rayon::ThreadPoolBuilder::new()
            .num_threads(t.max(1))
            .build()
            .map_err(|e| validation("threads", e.to_string()))?
            .install(|| (0..config.trials).into_par_iter().map(run_trial).collect()),
        None => (0..config.trials).into_par_iter().map(run_trial).collect(),
    };

    let p = scenario.grid.len();
    let trials = config.trials as f64;
    let methods = config
        .methods
        .iter()
        .enumerate()
        .map(|(slot, &method)| {
            let mut counts = vec![0usize; p];
            let mut successes = 0;
            let mut warnings = 0;
            for trial in &outcomes {
                match &trial[slot] {
                    Some(est) => {
                        if exact_recovery(est, &scenario.true_doa_indices) {
                            successes += 1;
                        }
                        for i in est.iter() {
                            counts[i] += 1;
                        }
                    }
                    None => warnings += 1,
                }
            }
            MethodSummary {
                method,
                per: successes as f64 / trials,
                successes,
                warnings,
                histogram: counts.into_iter().map(|c| c as f64 / trials).collect(),
            }
        })
        .collect();

    Ok(ExperimentResult {
        config: config.clone(),
        trials: config.trials,
        angles_deg: scenario.grid.angles().to_vec(),
        methods,
        wall_time_secs: started.elapsed().as_secs_f64(),
    })
}

pub fn per_csv(result: &ExperimentResult) -> String {
    let mut out = String::from("method,per,trials,warnings\n");
    for m in &result.methods {
        out.push_str(&format!("{},{},{},{}\n", m.method, m.per, result.trials, m.warnings));
    }
    out
}

pub fn histogram_csv(result: &ExperimentResult) -> String {
    let mut out = String::from("angle_deg");
    for m in &result.methods {
        out.push(',');
        out.push_str(m.method.name());
    }
    out.push('\n');
    for (j, angle) in result.angles_deg.iter().enumerate() {
        out.push_str(&angle.to_string());
        for m in &result.methods {
            out.push(',');
            out.push_str(&m.histogram[j].to_string());
        }
        out.push('\n');
    }
    out
}

fn write_file(path: PathBuf, contents: &str) -> Result<()> {
    fs::write(&path, contents).map_err(|source| Error::Io { path, source })
}

/// Writes `per.csv`, `histogram.csv` and `result.json` into directory `out_dir`.
pub fn write_outputs(result: &ExperimentResult, out_dir: &Path) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(out_dir).map_err(|source| Error::Io {
        path: out_dir.to_path_buf(),
        source,
    })?;
    let json = serde_json::to_string_pretty(result).expect("experiment result serializes");
    let files = [
        ("per.csv", per_csv(result)),
        ("histogram.csv", histogram_csv(result)),
        ("result.json", json),
    ];
    let mut written = Vec::new();
    for (name, contents) in files {
        let path = out_dir.join(name);
        write_file(path.clone(), &contents)?;
        written.push(path);
    }
    Ok(written)
}

/// Reads back a `result.json` written by [`write_outputs`].
pub fn read_result(path: &Path) -> Result<ExperimentResult> {
    let text = fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    serde_json::from_str(&text).map_err(|e| Error::Parse {
        line: e.line(),
        column: e.column(),
        message: e.to_string(),
    })
}
