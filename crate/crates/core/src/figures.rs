//! Preset pipelines that regenerate the headline data tables and compare
//! them with the published values.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::calibrate::{calibrate, CalibrationTargets};
use crate::config::ExperimentConfig;
use crate::engine::rng::derive_seed;
use crate::engine::{analytic_p_s, analytic_p_sas, effective_pair_state, run_batch, trials_for_coincidences, RunPlan};
use crate::error::{Error, Result};
use crate::state::{bell_state, DensityMatrix};
use crate::stats::{
    bell_s, bell_s_exact, fidelity, fit_decay, project_physical, tomo_reconstruct, tomography_settings, BellSettings,
    DecayFit, DecayPoint,
};
use crate::SettingPair;

/// One published value and the band a reproduction must fall in.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub value: f64,
    pub lo: f64,
    pub hi: f64,
    pub pass: bool,
}

impl Check {
    pub fn within(name: impl Into<String>, value: f64, lo: f64, hi: f64) -> Self {
        Self {
            name: name.into(),
            value,
            lo,
            hi,
            pass: value >= lo && value <= hi,
        }
    }

    pub fn around(name: impl Into<String>, value: f64, target: f64, tol: f64) -> Self {
        Self::within(name, value, target - tol, target + tol)
    }
}

pub fn all_pass(checks: &[Check]) -> bool {
    checks.iter().all(|c| c.pass)
}

/// Statistics budget of the preset pipelines.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FigureOptions {
    pub seed: u64,
    /// Trials per mode count in herald/coincidence sweeps.
    pub trials: u64,
    /// Expected coincidences per analyzer setting for Bell parameters.
    pub coincidences: u64,
    /// Expected coincidences per analyzer setting for tomography.
    pub tomography_coincidences: u64,
    /// Trials for the m = 1 and m = 19 coincidence-rate endpoints.
    pub endpoint_trials: [u64; 2],
}

impl Default for FigureOptions {
    fn default() -> Self {
        Self {
            seed: crate::engine::DEFAULT_SEED,
            trials: 10_000_000,
            coincidences: 1_000_000,
            tomography_coincidences: 100_000,
            endpoint_trials: [1_000_000_000, 100_000_000],
        }
    }
}

/// Default source after inverting the model against the published Bell parameters.
pub fn calibrated_config() -> Result<ExperimentConfig> {
    let base = ExperimentConfig::default();
    Ok(calibrate(&base, &CalibrationTargets::default())?.apply(&base))
}

/// Herald and H–V coincidence statistics for one mode count.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModeRow {
    pub m: u32,
    pub trials: u64,
    pub heralds: u64,
    pub coincidences: u64,
    pub p_s_hat: f64,
    pub p_s_std_err: f64,
    pub p_s_exact: f64,
    pub p_s_linear: f64,
    pub p_sas_hat: f64,
    pub p_sas_std_err: f64,
    pub p_sas_exact: f64,
}

fn binomial_se(p: f64, n: u64) -> f64 {
    (p * (1.0 - p) / n as f64).sqrt()
}

/// Runs `trials` write–clean cycles at the H–V setting for each mode count.
pub fn mode_point(config: &ExperimentConfig, m: u32, trials: u64, seed: u64) -> Result<ModeRow> {
    let cfg = config.with_m(m);
    let r = run_batch(&RunPlan::new(cfg, cfg.tau_ref, vec![SettingPair::hv()], trials).with_seed(seed))?;
    let hv = r.coincidences.rows[0].counts;
    let p_sas = r.p_sas_hat.unwrap_or(0.0);
    let ps = analytic_p_s(&cfg, m);
    Ok(ModeRow {
        m,
        trials: r.trials,
        heralds: r.heralds,
        coincidences: hv.coincidences(),
        p_s_hat: r.p_s_hat,
        p_s_std_err: r.p_s_std_err(),
        p_s_exact: ps.exact,
        p_s_linear: ps.linear,
        p_sas_hat: p_sas,
        p_sas_std_err: binomial_se(p_sas, r.trials),
        p_sas_exact: analytic_p_sas(&cfg, m),
    })
}

pub fn mode_sweep(config: &ExperimentConfig, modes: &[u32], trials: u64, seed: u64) -> Result<Vec<ModeRow>> {
    modes
        .iter()
        .map(|&m| mode_point(config, m, trials, derive_seed(seed, u64::from(m))))
        .collect()
}

/// Simulated and model Bell parameter at one (m, τ).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BellPoint {
    pub m: u32,
    pub tau: f64,
    pub s: f64,
    pub s_err: f64,
    pub s_model: f64,
    pub trials_per_setting: u64,
    pub min_coincidences: u64,
}

/// Copy of `config` used for polarization statistics.
///
/// Without dark counts the heralded polarization statistics do not depend
/// on the efficiencies, so lossless detection is used to reach the target
/// coincidence count with fewer trials.
pub fn polarization_config(config: &ExperimentConfig) -> ExperimentConfig {
    if config.dark_rate == 0.0 {
        config.with_unit_efficiencies()
    } else {
        *config
    }
}

pub fn bell_point(config: &ExperimentConfig, m: u32, tau: f64, coincidences: u64, seed: u64) -> Result<BellPoint> {
    let cfg = polarization_config(&config.with_m(m));
    let trials = trials_for_coincidences(&cfg, coincidences);
    let settings = BellSettings::default();
    let r = run_batch(&RunPlan::new(cfg, tau, settings.pairs().to_vec(), trials).with_seed(seed))?;
    let s = bell_s(&r.coincidences, &settings)?;
    let min_coincidences = r.coincidences.rows.iter().map(|row| row.counts.coincidences()).min().unwrap_or(0);
    Ok(BellPoint {
        m,
        tau,
        s: s.value,
        s_err: s.std_err,
        s_model: bell_s_exact(&effective_pair_state(&cfg, m, tau), &settings)?,
        trials_per_setting: trials,
        min_coincidences,
    })
}

/// Least-squares R² of a straight-line fit.
pub fn linear_r_squared(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    let syy: f64 = y.iter().map(|b| (b - my).powi(2)).sum();
    if sxx == 0.0 || syy == 0.0 {
        return f64::NAN;
    }
    sxy * sxy / (sxx * syy)
}

fn ratio_with_err(num: f64, num_se: f64, den: f64, den_se: f64) -> (f64, f64) {
    let r = num / den;
    (r, r * ((num_se / num).powi(2) + (den_se / den).powi(2)).sqrt())
}

fn write_rows<T: Serialize, W: Write>(rows: &[T], w: W) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    for row in rows {
        out.serialize(row)?;
    }
    out.flush()?;
    Ok(())
}

pub const ALL_MODES: [u32; 19] = [1, 2, 3, 4, 5, 6, 7, 8, 9, 10, 11, 12, 13, 14, 15, 16, 17, 18, 19];

/// Herald probability versus mode count.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HeraldFigure {
    pub rows: Vec<ModeRow>,
    pub ratio: f64,
    pub ratio_std_err: f64,
    pub checks: Vec<Check>,
}

impl HeraldFigure {
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        write_rows(&self.rows, w)
    }
}

pub fn herald_checks(first: &ModeRow, last: &ModeRow, rows: &[ModeRow]) -> (f64, f64, Vec<Check>) {
    let (ratio, ratio_se) = ratio_with_err(last.p_s_hat, last.p_s_std_err, first.p_s_hat, first.p_s_std_err);
    let z = |r: &ModeRow| (r.p_s_hat - r.p_s_exact) / r.p_s_std_err;
    let drops = rows.windows(2).filter(|w| w[1].p_s_hat < w[0].p_s_hat).count();
    let checks = vec![
        Check::within(format!("P_S({})/P_S({})", last.m, first.m), ratio, 18.5, 19.0),
        Check::within(format!("P_S({}) z-score vs closed form", last.m), z(last), -4.0, 4.0),
        Check::within(format!("P_S({}) z-score vs closed form", first.m), z(first), -4.0, 4.0),
        Check::within("decreasing steps in P_S(m)", drops as f64, 0.0, 0.0),
    ];
    (ratio, ratio_se, checks)
}

pub fn fig2(opts: &FigureOptions) -> Result<HeraldFigure> {
    let cfg = ExperimentConfig {
        dark_rate: 0.0,
        ..ExperimentConfig::default()
    };
    let rows = mode_sweep(&cfg, &ALL_MODES, opts.trials, derive_seed(opts.seed, 2))?;
    let (ratio, ratio_std_err, checks) = herald_checks(&rows[0], &rows[rows.len() - 1], &rows);
    Ok(HeraldFigure {
        rows,
        ratio,
        ratio_std_err,
        checks,
    })
}

/// Bell parameter versus storage time at m = 19.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DecayFigure {
    pub config: ExperimentConfig,
    pub points: Vec<BellPoint>,
    pub fit: DecayFit,
    pub checks: Vec<Check>,
}

impl DecayFigure {
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        write_rows(&self.points, w)
    }
}

pub const DECAY_TIMES: [f64; 7] = [0.7, 5.0, 10.0, 15.0, 20.0, 25.0, 30.0];

pub fn decay_figure(config: &ExperimentConfig, times: &[f64], coincidences: u64, seed: u64) -> Result<DecayFigure> {
    let points: Vec<BellPoint> = times
        .iter()
        .enumerate()
        .map(|(i, &tau)| bell_point(config, 19, tau, coincidences, derive_seed(seed, i as u64)))
        .collect::<Result<_>>()?;
    let fit = fit_decay(
        &points
            .iter()
            .map(|p| DecayPoint { tau: p.tau, s: p.s, s_err: p.s_err })
            .collect::<Vec<_>>(),
    )?;
    let mut checks = Vec::new();
    for p in &points {
        if p.tau == 0.7 {
            checks.push(Check::around("S(m=19, 0.7 us)", p.s, 2.30, 0.05));
        }
        if p.tau == 30.0 {
            checks.push(Check::around("S(m=19, 30 us)", p.s, 2.03, 0.05));
        }
    }
    let lifetime = fit.lifetime_chsh.unwrap_or(f64::NAN);
    checks.push(Check::within("CHSH-violation lifetime (us)", lifetime, 25.0, 40.0));
    Ok(DecayFigure {
        config: *config,
        points,
        fit,
        checks,
    })
}

pub fn fig3(opts: &FigureOptions) -> Result<DecayFigure> {
    decay_figure(&calibrated_config()?, &DECAY_TIMES, opts.coincidences, derive_seed(opts.seed, 3))
}

/// Tomographic reconstruction at m = 19, 0.7 µs.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TomographyFigure {
    pub raw: DensityMatrix,
    pub physical: DensityMatrix,
    pub fidelity: f64,
    pub model_fidelity: f64,
    pub min_coincidences: u64,
    pub checks: Vec<Check>,
}

impl TomographyFigure {
    /// `row,col,re,im` for the physical matrix, basis order HH, HV, VH, VV.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        #[derive(Serialize)]
        struct Entry {
            row: &'static str,
            col: &'static str,
            re: f64,
            im: f64,
        }
        let labels = crate::state::BASIS_LABELS;
        let m = self.physical.matrix();
        let mut entries = Vec::with_capacity(16);
        for (i, row) in labels.iter().enumerate() {
            for (j, col) in labels.iter().enumerate() {
                entries.push(Entry { row, col, re: m[(i, j)].re, im: m[(i, j)].im });
            }
        }
        write_rows(&entries, w)
    }
}

pub fn tomography_figure(config: &ExperimentConfig, coincidences: u64, seed: u64) -> Result<TomographyFigure> {
    let cfg = polarization_config(&config.with_m(19));
    let tau = 0.7;
    let trials = trials_for_coincidences(&cfg, coincidences);
    let r = run_batch(&RunPlan::new(cfg, tau, tomography_settings(), trials).with_seed(seed))?;
    let raw = tomo_reconstruct(&r.coincidences)?;
    let physical = project_physical(&raw)?;
    let target = bell_state(45.0)?;
    let f = fidelity(&physical, &target)?;
    let model_fidelity = fidelity(&effective_pair_state(&cfg, 19, tau), &target)?;
    let min_coincidences = r.coincidences.rows.iter().map(|row| row.counts.coincidences()).min().unwrap_or(0);
    Ok(TomographyFigure {
        raw,
        physical,
        fidelity: f,
        model_fidelity,
        min_coincidences,
        checks: vec![Check::within("fidelity to (|HH>+|VV>)/sqrt2", f, 0.84, 0.88)],
    })
}

pub fn fig4(opts: &FigureOptions) -> Result<TomographyFigure> {
    tomography_figure(&calibrated_config()?, opts.tomography_coincidences, derive_seed(opts.seed, 4))
}

/// Bell parameter and coincidence probability versus mode count.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ModeFigure {
    pub bell: Vec<BellPoint>,
    pub coincidence: Vec<ModeRow>,
    pub endpoints: [ModeRow; 2],
    pub coincidence_ratio: f64,
    pub coincidence_ratio_std_err: f64,
    pub r_squared: f64,
    pub checks: Vec<Check>,
}

#[derive(Debug, Clone, Copy, Serialize)]
struct ModeFigureRow {
    m: u32,
    s: f64,
    s_err: f64,
    s_model: f64,
    p_sas_hat: f64,
    p_sas_std_err: f64,
    p_sas_exact: f64,
}

impl ModeFigure {
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let rows: Vec<ModeFigureRow> = self
            .bell
            .iter()
            .zip(&self.coincidence)
            .map(|(b, c)| ModeFigureRow {
                m: b.m,
                s: b.s,
                s_err: b.s_err,
                s_model: b.s_model,
                p_sas_hat: c.p_sas_hat,
                p_sas_std_err: c.p_sas_std_err,
                p_sas_exact: c.p_sas_exact,
            })
            .collect();
        write_rows(&rows, w)
    }
}

/// S(m) at 0.7 µs for every mode count.
pub fn bell_versus_modes(config: &ExperimentConfig, modes: &[u32], coincidences: u64, seed: u64) -> Result<Vec<BellPoint>> {
    modes
        .iter()
        .map(|&m| bell_point(config, m, 0.7, coincidences, derive_seed(seed, u64::from(m))))
        .collect()
}

/// Checks on S(m): endpoint values and monotone decline.
pub fn bell_mode_checks(points: &[BellPoint]) -> Vec<Check> {
    let mut checks = Vec::new();
    if let Some(p) = points.iter().find(|p| p.m == 1) {
        checks.push(Check::around("S(m=1, 0.7 us)", p.s, 2.65, 0.05));
    }
    if let Some(p) = points.iter().find(|p| p.m == 19) {
        checks.push(Check::around("S(m=19, 0.7 us)", p.s, 2.30, 0.05));
    }
    let rises = points.windows(2).filter(|w| w[1].s > w[0].s).count();
    checks.push(Check::within("increasing steps in S(m)", rises as f64, 0.0, 0.0));
    checks
}

/// Coincidence-rate gain and linearity.
pub fn coincidence_checks(sweep: &[ModeRow], endpoints: &[ModeRow; 2]) -> (f64, f64, f64, Vec<Check>) {
    let (ratio, ratio_se) = ratio_with_err(
        endpoints[1].p_sas_hat,
        endpoints[1].p_sas_std_err,
        endpoints[0].p_sas_hat,
        endpoints[0].p_sas_std_err,
    );
    let x: Vec<f64> = sweep.iter().map(|r| f64::from(r.m)).collect();
    let y: Vec<f64> = sweep.iter().map(|r| r.p_sas_hat).collect();
    let r2 = linear_r_squared(&x, &y);
    let checks = vec![
        Check::within(format!("P_SAS({})/P_SAS({})", endpoints[1].m, endpoints[0].m), ratio, 17.6, 19.0),
        Check::within("R^2 of linear P_SAS(m)", r2, 0.999, 1.0),
    ];
    (ratio, ratio_se, r2, checks)
}

pub fn fig5(opts: &FigureOptions) -> Result<ModeFigure> {
    let calibrated = calibrated_config()?;
    let seed = derive_seed(opts.seed, 5);
    let bell = bell_versus_modes(&calibrated, &ALL_MODES, opts.coincidences, derive_seed(seed, 0))?;
    let coincidence = mode_sweep(&calibrated, &ALL_MODES, opts.trials, derive_seed(seed, 1))?;
    let endpoints = [
        mode_point(&calibrated, 1, opts.endpoint_trials[0], derive_seed(seed, 2))?,
        mode_point(&calibrated, 19, opts.endpoint_trials[1], derive_seed(seed, 3))?,
    ];
    let mut checks = bell_mode_checks(&bell);
    let (coincidence_ratio, coincidence_ratio_std_err, r_squared, more) = coincidence_checks(&coincidence, &endpoints);
    checks.extend(more);
    Ok(ModeFigure {
        bell,
        coincidence,
        endpoints,
        coincidence_ratio,
        coincidence_ratio_std_err,
        r_squared,
        checks,
    })
}

/// Figure name accepted by [`Figure::parse`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Figure {
    Fig2,
    Fig3,
    Fig4,
    Fig5,
}

impl Figure {
    pub fn parse(name: &str) -> Result<Self> {
        match name {
            "fig2" => Ok(Self::Fig2),
            "fig3" => Ok(Self::Fig3),
            "fig4" => Ok(Self::Fig4),
            "fig5" => Ok(Self::Fig5),
            other => Err(Error::Input(format!("unknown figure {other:?}; expected fig2, fig3, fig4 or fig5"))),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn quick() -> FigureOptions {
        FigureOptions {
            trials: 200_000,
            coincidences: 20_000,
            tomography_coincidences: 20_000,
            endpoint_trials: [2_000_000, 200_000],
            ..Default::default()
        }
    }

    #[test]
    fn calibrated_defaults() {
        let cfg = calibrated_config().unwrap();
        assert!((cfg.v1 - 0.937).abs() < 5e-4);
        assert!((cfg.beta - 0.846).abs() < 1e-3);
    }

    #[test]
    fn r_squared_of_a_line() {
        let x = [1.0, 2.0, 3.0, 4.0];
        assert!((linear_r_squared(&x, &[2.0, 4.0, 6.0, 8.0]) - 1.0).abs() < 1e-15);
        assert!(linear_r_squared(&x, &[1.0, -1.0, 1.0, -1.0]) < 0.5);
    }

    #[test]
    fn check_band() {
        assert!(Check::around("x", 2.31, 2.30, 0.05).pass);
        assert!(!Check::within("x", 19.1, 18.5, 19.0).pass);
        assert!(!Check::within("x", f64::NAN, 0.0, 1.0).pass);
    }

    #[test]
    fn quick_bell_point_is_near_model() {
        let p = bell_point(&calibrated_config().unwrap(), 19, 0.7, 20_000, 1).unwrap();
        assert!(p.min_coincidences > 15_000);
        assert!((p.s - p.s_model).abs() < 5.0 * p.s_err);
        assert!((p.s_model - 2.30).abs() < 1e-9);
    }

    #[test]
    fn quick_tomography() {
        let f = fig4(&quick()).unwrap();
        assert!((f.model_fidelity - 0.8599).abs() < 5e-4);
        assert!((f.fidelity - f.model_fidelity).abs() < 0.02);
        let mut buf = Vec::new();
        f.write_csv(&mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap().lines().count(), 17);
    }

    #[test]
    fn figure_names() {
        assert_eq!(Figure::parse("fig3").unwrap(), Figure::Fig3);
        assert!(Figure::parse("fig6").is_err());
    }
}
