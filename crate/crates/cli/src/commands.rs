use std::fs;
use std::path::Path;

use serde::Serialize;
use swpe_core::calibrate::{calibrate, CalibrationTargets};
use swpe_core::engine::rng::derive_seed;
use swpe_core::engine::trials_for_coincidences;
use swpe_core::figures::{self, all_pass, bell_point, Check, Figure, FigureOptions};
use swpe_core::link::{self, FeedbackConfig, LinkSweep};
use swpe_core::phase_matching::{scan_geometry, BeamGeometry};
use swpe_core::stats::{self, BellSettings, DecayPoint};
use swpe_core::{
    bell_state, run_batch, CoincidenceTable, DensityMatrix, Error, ExperimentConfig, RunPlan, DEFAULT_SEED,
};

use crate::args::{CalibrateArgs, Command, Common, Format};
use crate::output::{csv_bytes, csv_rows, emit, json_bytes};

/// Error with the process exit code it maps to.
#[derive(Debug)]
pub struct Failure {
    pub code: u8,
    pub error: anyhow::Error,
}

pub type CmdResult<T> = std::result::Result<T, Failure>;

pub fn usage(error: impl Into<anyhow::Error>) -> Failure {
    Failure { code: 2, error: error.into() }
}

pub fn runtime(error: impl Into<anyhow::Error>) -> Failure {
    Failure { code: 1, error: error.into() }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::Io(_) | Error::Estimation(_) | Error::ThreadPool(_) => runtime(e),
            _ => usage(e),
        }
    }
}

fn io_failure(e: anyhow::Error) -> Failure {
    runtime(e)
}

fn read_input(path: &Path) -> CmdResult<String> {
    fs::read_to_string(path).map_err(|e| usage(anyhow::anyhow!("reading {}: {e}", path.display())))
}

fn parse_json<T: serde::de::DeserializeOwned>(path: &Path) -> CmdResult<T> {
    let text = read_input(path)?;
    serde_json::from_str(&text).map_err(|e| usage(anyhow::anyhow!("{}: {e}", path.display())))
}

fn with_path<T>(path: &Path, r: swpe_core::Result<T>) -> CmdResult<T> {
    r.map_err(|e| {
        let f = Failure::from(e);
        Failure {
            code: f.code,
            error: f.error.context(path.display().to_string()),
        }
    })
}

fn write(common: &Common, bytes: anyhow::Result<Vec<u8>>) -> CmdResult<()> {
    let bytes = bytes.map_err(io_failure)?;
    emit(common.out.as_deref(), &bytes).map_err(io_failure)
}

fn write_json<T: Serialize + ?Sized>(common: &Common, value: &T) -> CmdResult<()> {
    write(common, json_bytes(value))
}

fn base_config(common: &Common) -> CmdResult<ExperimentConfig> {
    let cfg = match &common.config {
        Some(path) => parse_json::<ExperimentConfig>(path)?,
        None => ExperimentConfig::default(),
    };
    cfg.validate()?;
    Ok(cfg)
}

fn report(checks: &[Check]) {
    for c in checks {
        eprintln!(
            "{} {}: {:.6} in [{}, {}]",
            if c.pass { "PASS" } else { "FAIL" },
            c.name,
            c.value,
            bound(c.lo),
            bound(c.hi)
        );
    }
}

fn bound(x: f64) -> String {
    let s = format!("{x:.6}");
    s.trim_end_matches('0').trim_end_matches('.').to_string()
}

/// Runs one subcommand; `Ok(false)` means the run finished but a comparison failed.
pub fn run(command: &Command, common: &Common) -> CmdResult<bool> {
    match command {
        Command::Simulate { sweep_m } => simulate(common, sweep_m.as_deref()),
        Command::Bell { input, tau } => bell(common, input.as_deref(), *tau),
        Command::Tomo { input, tau } => tomo(common, input.as_deref(), *tau),
        Command::Decay { input } => decay(common, input.as_deref()),
        Command::Pmc => pmc(common),
        Command::Link { feedback, m } => link_cmd(common, feedback.as_deref(), *m),
        Command::Calibrate(args) => calibrate_cmd(common, args),
        Command::Reproduce {
            figure,
            coincidences,
            tomography_coincidences,
            endpoint_trials,
        } => reproduce(common, figure, *coincidences, *tomography_coincidences, endpoint_trials.as_deref()),
    }
}

/// Parses `A..B`, `A..=B` or `A-B` (inclusive) into mode counts.
pub fn parse_mode_range(text: &str) -> CmdResult<Vec<u32>> {
    let bad = || usage(anyhow::anyhow!("invalid mode range {text:?}; expected e.g. 1..19"));
    let (a, b) = text
        .split_once("..=")
        .or_else(|| text.split_once(".."))
        .or_else(|| text.split_once('-'))
        .ok_or_else(bad)?;
    let a: u32 = a.trim().parse().map_err(|_| bad())?;
    let b: u32 = b.trim().parse().map_err(|_| bad())?;
    if a == 0 || b < a {
        return Err(bad());
    }
    Ok((a..=b).collect())
}

fn load_plan(common: &Common) -> CmdResult<RunPlan> {
    let mut plan: RunPlan = match &common.config {
        Some(path) => parse_json(path)?,
        None => serde_json::from_str("{}").map_err(|e| usage(anyhow::Error::from(e)))?,
    };
    if let Some(seed) = common.seed {
        plan.seed = seed;
    }
    if let Some(n) = common.trials {
        plan.n_trials = n;
    }
    plan.validate()?;
    Ok(plan)
}

fn simulate(common: &Common, sweep_m: Option<&str>) -> CmdResult<bool> {
    let plan = load_plan(common)?;
    if let Some(range) = sweep_m {
        let modes = parse_mode_range(range)?;
        let rows = figures::mode_sweep(&plan.config, &modes, plan.n_trials, plan.seed)?;
        match common.format {
            Format::Csv => write(common, csv_rows(&rows))?,
            Format::Json => write_json(common, &rows)?,
        }
        return Ok(true);
    }
    let result = run_batch(&plan)?;
    match common.format {
        Format::Csv => write(common, csv_bytes(|w| result.coincidences.write_csv(w)))?,
        Format::Json => write_json(common, &result)?,
    }
    Ok(true)
}

fn read_table(path: &Path) -> CmdResult<CoincidenceTable> {
    let text = read_input(path)?;
    with_path(path, CoincidenceTable::read_csv(text.as_bytes()))
}

fn simulated_table(common: &Common, tau: Option<f64>, settings: Vec<swpe_core::SettingPair>) -> CmdResult<CoincidenceTable> {
    let config = base_config(common)?;
    let n_trials = common.trials.unwrap_or_else(|| trials_for_coincidences(&config, 100_000));
    let plan = RunPlan {
        config,
        storage_time: tau.unwrap_or(config.tau_ref),
        settings,
        n_trials,
        seed: common.seed.unwrap_or(DEFAULT_SEED),
    };
    Ok(run_batch(&plan)?.coincidences)
}

#[derive(Serialize)]
struct BellRow {
    s: f64,
    s_err: f64,
    e_1: f64,
    e_2: f64,
    e_3: f64,
    e_4: f64,
}

fn bell(common: &Common, input: Option<&Path>, tau: Option<f64>) -> CmdResult<bool> {
    let settings = BellSettings::default();
    let table = match input {
        Some(path) => read_table(path)?,
        None => simulated_table(common, tau, settings.pairs().to_vec())?,
    };
    let s = stats::bell_s(&table, &settings)?;
    match common.format {
        Format::Csv => {
            let e = s.correlations.map(|c| c.value);
            write(common, csv_rows(&[BellRow { s: s.value, s_err: s.std_err, e_1: e[0], e_2: e[1], e_3: e[2], e_4: e[3] }]))?
        }
        Format::Json => write_json(common, &s)?,
    }
    Ok(true)
}

#[derive(Serialize)]
struct TomographyReport {
    raw: DensityMatrix,
    physical: DensityMatrix,
    fidelity_to_bell: f64,
    purity: f64,
}

#[derive(Serialize)]
struct MatrixEntry {
    row: &'static str,
    col: &'static str,
    re: f64,
    im: f64,
}

fn tomo(common: &Common, input: Option<&Path>, tau: Option<f64>) -> CmdResult<bool> {
    let (table, theta) = match input {
        Some(path) => (read_table(path)?, 45.0),
        None => {
            let cfg = base_config(common)?;
            (simulated_table(common, tau, stats::tomography_settings())?, cfg.theta)
        }
    };
    let raw = stats::tomo_reconstruct(&table)?;
    let physical = stats::project_physical(&raw)?;
    let report = TomographyReport {
        fidelity_to_bell: stats::fidelity(&physical, &bell_state(theta)?)?,
        purity: physical.purity(),
        raw,
        physical,
    };
    match common.format {
        Format::Csv => {
            let labels = swpe_core::state::BASIS_LABELS;
            let m = report.physical.matrix();
            let mut rows = Vec::with_capacity(16);
            for (i, row) in labels.iter().enumerate() {
                for (j, col) in labels.iter().enumerate() {
                    rows.push(MatrixEntry { row, col, re: m[(i, j)].re, im: m[(i, j)].im });
                }
            }
            write(common, csv_rows(&rows))?
        }
        Format::Json => write_json(common, &report)?,
    }
    eprintln!("fidelity to Bell state: {:.6}", report.fidelity_to_bell);
    Ok(true)
}

fn read_points(path: &Path) -> CmdResult<Vec<DecayPoint>> {
    let text = read_input(path)?;
    if text.trim_start().starts_with('[') {
        return serde_json::from_str(&text).map_err(|e| usage(anyhow::anyhow!("{}: {e}", path.display())));
    }
    let mut rdr = csv::Reader::from_reader(text.as_bytes());
    rdr.deserialize()
        .collect::<Result<Vec<DecayPoint>, _>>()
        .map_err(|e| usage(anyhow::anyhow!("{}: {e}", path.display())))
}

#[derive(Serialize)]
struct DecayRow {
    tau_ref: f64,
    tau_c: f64,
    v_ref: f64,
    lifetime_chsh: Option<f64>,
}

fn decay(common: &Common, input: Option<&Path>) -> CmdResult<bool> {
    let points = match input {
        Some(path) => read_points(path)?,
        None => vec![
            DecayPoint { tau: 0.7, s: 2.30, s_err: 0.02 },
            DecayPoint { tau: 30.0, s: 2.03, s_err: 0.02 },
        ],
    };
    let fit = stats::fit_decay(&points)?;
    for w in &fit.warnings {
        eprintln!("warning: {w}");
    }
    match common.format {
        Format::Csv => write(
            common,
            csv_rows(&[DecayRow {
                tau_ref: fit.tau_ref,
                tau_c: fit.tau_c,
                v_ref: fit.v_ref,
                lifetime_chsh: fit.lifetime_chsh,
            }]),
        )?,
        Format::Json => write_json(common, &fit)?,
    }
    Ok(true)
}

/// Nineteen beams at ±1°..±9° and 10°; no beam on the collection axis.
pub fn default_fan() -> Vec<f64> {
    (-9..=10).filter(|&a| a != 0).map(f64::from).collect()
}

fn pmc(common: &Common) -> CmdResult<bool> {
    let geometry = match &common.config {
        Some(path) => with_path(path, BeamGeometry::from_json(&read_input(path)?))?,
        None => BeamGeometry::new(default_fan())?,
    };
    let scan = scan_geometry(&geometry)?;
    match common.format {
        Format::Csv => write(common, csv_bytes(|w| scan.write_csv(w)))?,
        Format::Json => write_json(common, &scan)?,
    }
    if !scan.degenerate.is_empty() {
        eprintln!("warning: {} off-diagonal entries are phase matched", scan.degenerate.len());
    }
    Ok(true)
}

#[derive(Serialize)]
struct StrategyRow {
    strategy: &'static str,
    success_probability: f64,
    wall_clock_time_us: f64,
    required_memory_time_us: f64,
}

fn link_cmd(common: &Common, feedback: Option<&Path>, m: u32) -> CmdResult<bool> {
    if let Some(path) = feedback {
        let fb: FeedbackConfig = parse_json(path)?;
        let r = link::feedback_vs_multiplexed_report(&fb, m)?;
        match common.format {
            Format::Csv => {
                let row = |strategy, s: &link::StrategySummary| StrategyRow {
                    strategy,
                    success_probability: s.success_probability,
                    wall_clock_time_us: s.wall_clock_time,
                    required_memory_time_us: s.required_memory_time,
                };
                write(common, csv_rows(&[row("feedback", &r.feedback), row("multiplexed", &r.multiplexed)]))?
            }
            Format::Json => write_json(common, &r)?,
        }
        return Ok(r.equal_probability && r.equal_time);
    }
    let sweep = match &common.config {
        Some(path) => with_path(path, LinkSweep::from_json(&read_input(path)?))?,
        None => LinkSweep {
            l0_km: vec![60.0],
            m: vec![1, 19],
            p1: vec![1e-3],
            c_fiber: link::DEFAULT_C_FIBER,
        },
    };
    let rows = link::run_sweep(&sweep)?;
    match common.format {
        Format::Csv => write(common, csv_bytes(|w| link::write_sweep_csv(&rows, w)))?,
        Format::Json => write_json(common, &rows)?,
    }
    Ok(true)
}

fn calibrate_cmd(common: &Common, args: &CalibrateArgs) -> CmdResult<bool> {
    let base = base_config(common)?;
    let targets = match &args.targets {
        Some(path) => parse_json(path)?,
        None => CalibrationTargets::from_values(args.s1, args.s19, args.s19_late),
    };
    let patch = calibrate(&base, &targets)?;
    write_json(common, &patch)?;

    let Some(coincidences) = args.verify else {
        return Ok(true);
    };
    let cfg = patch.apply(&base);
    let seed = common.seed.unwrap_or(DEFAULT_SEED);
    let mut ok = true;
    for (i, t) in [targets.few, targets.many, targets.late].iter().enumerate() {
        let p = bell_point(&cfg, t.m, t.tau, coincidences, derive_seed(seed, i as u64))?;
        let pass = (p.s - t.s).abs() <= 4.0 * p.s_err;
        ok &= pass;
        eprintln!(
            "{} m={} tau={} target {} simulated {:.4} ± {:.4}",
            if pass { "PASS" } else { "FAIL" },
            t.m,
            t.tau,
            t.s,
            p.s,
            p.s_err
        );
    }
    Ok(ok)
}

fn reproduce(
    common: &Common,
    name: &str,
    coincidences: Option<u64>,
    tomography_coincidences: Option<u64>,
    endpoint_trials: Option<&[u64]>,
) -> CmdResult<bool> {
    let figure = Figure::parse(name)?;
    let mut opts = FigureOptions::default();
    if let Some(seed) = common.seed {
        opts.seed = seed;
    }
    if let Some(n) = common.trials {
        opts.trials = n;
    }
    if let Some(n) = coincidences {
        opts.coincidences = n;
    }
    if let Some(n) = tomography_coincidences {
        opts.tomography_coincidences = n;
    }
    if let Some(&[a, b]) = endpoint_trials {
        opts.endpoint_trials = [a, b];
    }
    if opts.trials == 0 || opts.coincidences == 0 || opts.tomography_coincidences == 0 || opts.endpoint_trials.contains(&0) {
        return Err(usage(anyhow::anyhow!("trial and coincidence counts must be at least 1")));
    }

    let checks = match figure {
        Figure::Fig2 => {
            let f = figures::fig2(&opts)?;
            match common.format {
                Format::Csv => write(common, csv_bytes(|w| f.write_csv(w)))?,
                Format::Json => write_json(common, &f)?,
            }
            f.checks
        }
        Figure::Fig3 => {
            let f = figures::fig3(&opts)?;
            match common.format {
                Format::Csv => write(common, csv_bytes(|w| f.write_csv(w)))?,
                Format::Json => write_json(common, &f)?,
            }
            f.checks
        }
        Figure::Fig4 => {
            let f = figures::fig4(&opts)?;
            match common.format {
                Format::Csv => write(common, csv_bytes(|w| f.write_csv(w)))?,
                Format::Json => write_json(common, &f)?,
            }
            f.checks
        }
        Figure::Fig5 => {
            let f = figures::fig5(&opts)?;
            match common.format {
                Format::Csv => write(common, csv_bytes(|w| f.write_csv(w)))?,
                Format::Json => write_json(common, &f)?,
            }
            f.checks
        }
    };
    report(&checks);
    Ok(all_pass(&checks))
}
