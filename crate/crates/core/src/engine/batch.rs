use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::analyzer::SettingPair;
use crate::config::ExperimentConfig;
use crate::counts::{CoincidenceTable, PairCounts};
use crate::engine::rng::trial_stream;
use crate::engine::trial::TrialKernel;
use crate::error::{invalid, Result};

/// Fixed default seed so that outputs are identical across machines.
pub const DEFAULT_SEED: u64 = 0x5357_5045_0000_0013;

/// Trials per work unit. Units are merged with integer addition, so the
/// split does not affect results.
const BLOCK: u64 = 1 << 14;

fn default_seed() -> u64 {
    DEFAULT_SEED
}

fn default_settings() -> Vec<SettingPair> {
    vec![SettingPair::hv()]
}

fn default_storage_time() -> f64 {
    0.7
}

fn default_trials() -> u64 {
    1_000_000
}

/// What to simulate: a source, a storage time and a list of analyzer settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunPlan {
    #[serde(default)]
    pub config: ExperimentConfig,
    /// Storage time τ in µs.
    #[serde(default = "default_storage_time")]
    pub storage_time: f64,
    #[serde(default = "default_settings")]
    pub settings: Vec<SettingPair>,
    /// Trials per setting pair.
    #[serde(default = "default_trials")]
    pub n_trials: u64,
    #[serde(default = "default_seed")]
    pub seed: u64,
}

impl RunPlan {
    pub fn new(config: ExperimentConfig, storage_time: f64, settings: Vec<SettingPair>, n_trials: u64) -> Self {
        Self {
            config,
            storage_time,
            settings,
            n_trials,
            seed: DEFAULT_SEED,
        }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn validate(&self) -> Result<()> {
        self.config.validate()?;
        if self.n_trials == 0 {
            return Err(invalid("n_trials", "must be at least 1"));
        }
        if !(self.storage_time >= 0.0 && self.storage_time.is_finite()) {
            return Err(invalid("storage_time", format!("{} must be finite and >= 0", self.storage_time)));
        }
        if self.settings.is_empty() {
            return Err(invalid("settings", "at least one setting pair is required"));
        }
        for s in &self.settings {
            s.validate()?;
        }
        let total = u128::from(self.n_trials) * self.settings.len() as u128;
        if total > i64::MAX as u128 {
            return Err(invalid("n_trials", "total trial count exceeds 2^63"));
        }
        Ok(())
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let plan: Self = serde_json::from_str(text)?;
        plan.validate()?;
        Ok(plan)
    }
}

/// Aggregated outcome of a plan.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BatchResult {
    pub coincidences: CoincidenceTable,
    pub trials: u64,
    pub heralds: u64,
    pub dark_heralds: u64,
    /// Heralds per trial, over every setting pair.
    pub p_s_hat: f64,
    /// All four coincidences per trial at the H–V/H–V setting, if measured.
    pub p_sas_hat: Option<f64>,
    /// (C_D1T1 + C_D2T2) per trial at the H–V/H–V setting, if measured.
    pub p_sas_correlated_hat: Option<f64>,
    /// Heralds per bin index 1..=m (entry 0 is bin 1).
    pub herald_bin_histogram: Vec<u64>,
}

impl BatchResult {
    /// Binomial standard error of `p_s_hat`.
    pub fn p_s_std_err(&self) -> f64 {
        let p = self.p_s_hat;
        (p * (1.0 - p) / self.trials as f64).sqrt()
    }
}

#[derive(Clone)]
struct Partial {
    counts: PairCounts,
    dark: u64,
    histogram: Vec<u64>,
}

impl Partial {
    fn new(m: u32) -> Self {
        Self {
            counts: PairCounts::default(),
            dark: 0,
            histogram: vec![0; m as usize],
        }
    }

    fn merge(mut self, other: Partial) -> Partial {
        self.counts.merge(&other.counts);
        self.dark += other.dark;
        for (a, b) in self.histogram.iter_mut().zip(&other.histogram) {
            *a += b;
        }
        self
    }
}

fn run_block(kernel: &TrialKernel, seed: u64, setting: u64, start: u64, end: u64) -> Partial {
    let mut acc = Partial::new(kernel.modes());
    for t in start..end {
        let mut rng = trial_stream(seed, setting, t);
        let rec = kernel.run(t, &mut rng);
        acc.counts.record(rec.herald.map(|h| h.detector), rec.readout);
        if let Some(h) = rec.herald {
            acc.histogram[(h.bin - 1) as usize] += 1;
            acc.dark += u64::from(rec.herald_was_dark);
        }
    }
    acc
}

/// Runs every trial of the plan on the current rayon pool.
///
/// Results depend only on the plan (including its seed), never on the
/// number of worker threads.
pub fn run_batch(plan: &RunPlan) -> Result<BatchResult> {
    plan.validate()?;
    let m = plan.config.m;
    let n = plan.n_trials;
    let blocks_per_setting = n.div_ceil(BLOCK);

    let kernels: Vec<TrialKernel> = plan
        .settings
        .iter()
        .map(|pair| TrialKernel::new(&plan.config, plan.storage_time, pair))
        .collect();

    let partials: Vec<Partial> = (0..plan.settings.len() as u64)
        .into_par_iter()
        .map(|s| {
            let kernel = &kernels[s as usize];
            (0..blocks_per_setting)
                .into_par_iter()
                .map(|b| run_block(kernel, plan.seed, s, b * BLOCK, ((b + 1) * BLOCK).min(n)))
                .reduce(|| Partial::new(m), Partial::merge)
        })
        .collect();

    let mut table = CoincidenceTable::with_settings(&plan.settings);
    let mut histogram = vec![0u64; m as usize];
    let mut dark = 0;
    for (row, p) in table.rows.iter_mut().zip(&partials) {
        row.counts = p.counts;
        dark += p.dark;
        for (a, b) in histogram.iter_mut().zip(&p.histogram) {
            *a += b;
        }
    }

    let trials = table.total_trials();
    let heralds: u64 = table.rows.iter().map(|r| r.counts.heralds()).sum();
    let hv = table.get(&SettingPair::hv()).copied();
    Ok(BatchResult {
        trials,
        heralds,
        dark_heralds: dark,
        p_s_hat: heralds as f64 / trials as f64,
        p_sas_hat: hv.map(|c| c.coincidences() as f64 / c.trials as f64),
        p_sas_correlated_hat: hv.map(|c| (c.d1t1 + c.d2t2) as f64 / c.trials as f64),
        herald_bin_histogram: histogram,
        coincidences: table,
    })
}

/// Worker pool of `threads` threads (at least one).
pub fn thread_pool(threads: usize) -> Result<rayon::ThreadPool> {
    Ok(rayon::ThreadPoolBuilder::new().num_threads(threads.max(1)).build()?)
}

/// [`run_batch`] on a dedicated pool of `threads` workers.
pub fn run_batch_with_threads(plan: &RunPlan, threads: usize) -> Result<BatchResult> {
    thread_pool(threads)?.install(|| run_batch(plan))
}
