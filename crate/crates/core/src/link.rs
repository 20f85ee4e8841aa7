//! Elementary-link timing and the single-mode feedback alternative.

use std::io::Write;

use rand_distr::{Distribution, Geometric};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::engine::rng::trial_stream;
use crate::error::{invalid, Result};
use crate::prob;

/// Speed of light in fiber, km/s.
pub const DEFAULT_C_FIBER: f64 = 2.0e5;

/// Expected trial counts above this are reported as infinite.
const MAX_EXPECTED_TRIALS: f64 = 9.2e18;

fn default_c_fiber() -> f64 {
    DEFAULT_C_FIBER
}

fn one() -> f64 {
    1.0
}

fn default_m() -> u32 {
    1
}

/// Two sources separated by `l0_km` with a middle station.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LinkConfig {
    pub l0_km: f64,
    #[serde(default = "default_c_fiber")]
    pub c_fiber: f64,
    /// Single-mode link success probability per trial.
    pub p_link_single: f64,
    #[serde(default = "default_m")]
    pub m: u32,
    /// Middle-station success factor.
    #[serde(default = "one")]
    pub p_bsm: f64,
    /// Multiply `p_link_single` by `p_bsm`; otherwise it is taken to include it.
    #[serde(default)]
    pub apply_bsm: bool,
    /// Add write (per mode) and clean durations to each trial.
    #[serde(default)]
    pub strict_timing: bool,
    /// µs
    #[serde(default)]
    pub delta_t_w: f64,
    /// µs
    #[serde(default)]
    pub delta_t_c: f64,
}

impl LinkConfig {
    pub fn new(l0_km: f64, p_link_single: f64, m: u32) -> Self {
        Self {
            l0_km,
            c_fiber: DEFAULT_C_FIBER,
            p_link_single,
            m,
            p_bsm: 1.0,
            apply_bsm: false,
            strict_timing: false,
            delta_t_w: 0.0,
            delta_t_c: 0.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.l0_km > 0.0 && self.l0_km.is_finite()) {
            return Err(invalid("l0_km", format!("{} must be positive", self.l0_km)));
        }
        if !(self.c_fiber > 0.0 && self.c_fiber.is_finite()) {
            return Err(invalid("c_fiber", format!("{} must be positive", self.c_fiber)));
        }
        for (field, p) in [("p_link_single", self.p_link_single), ("p_bsm", self.p_bsm)] {
            if !(p > 0.0 && p <= 1.0) {
                return Err(invalid(field, format!("{p} outside (0, 1]")));
            }
        }
        if self.m == 0 {
            return Err(invalid("m", "must be at least 1"));
        }
        for (field, t) in [("delta_t_w", self.delta_t_w), ("delta_t_c", self.delta_t_c)] {
            if !(t >= 0.0 && t.is_finite()) {
                return Err(invalid(field, format!("{t} must be finite and >= 0")));
            }
        }
        Ok(())
    }

    /// Per-trial single-mode success probability including the BSM factor when applied.
    pub fn p1(&self) -> f64 {
        if self.apply_bsm {
            self.p_link_single * self.p_bsm
        } else {
            self.p_link_single
        }
    }
}

/// L0 / c in µs.
pub fn communication_time(link: &LinkConfig) -> f64 {
    link.l0_km / link.c_fiber * 1e6
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LinkProbability {
    /// 1 − (1 − p1)^m
    pub exact: f64,
    /// m·p1
    pub linear: f64,
}

pub fn p_link_multiplexed(p1: f64, m: u32) -> LinkProbability {
    LinkProbability {
        exact: prob::at_least_one(p1, u64::from(m)),
        linear: prob::at_least_one_linear(p1, u64::from(m)),
    }
}

/// Average waiting times for one heralded link, µs.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EntanglementTime {
    pub trial_time_single: f64,
    pub trial_time_multiplexed: f64,
    /// T / p1
    #[serde(with = "crate::serde_inf")]
    pub single: f64,
    /// T / (m p1)
    #[serde(with = "crate::serde_inf")]
    pub multiplexed_linear: f64,
    /// T / (1 − (1 − p1)^m)
    #[serde(with = "crate::serde_inf")]
    pub multiplexed_exact: f64,
    pub speedup_linear: f64,
    pub speedup_exact: f64,
    pub diagnostic: Option<String>,
}

fn waiting_time(trial_time: f64, p: f64, diagnostic: &mut Option<String>) -> f64 {
    let trials = 1.0 / p;
    if !(trials.is_finite() && trials <= MAX_EXPECTED_TRIALS) {
        *diagnostic = Some(format!("success probability {p:e} gives more than 2^63 expected trials"));
        return f64::INFINITY;
    }
    trial_time * trials
}

pub fn avg_entanglement_time(link: &LinkConfig) -> Result<EntanglementTime> {
    link.validate()?;
    let base = communication_time(link);
    let (single_t, multi_t) = if link.strict_timing {
        (
            base + link.delta_t_w + link.delta_t_c,
            base + f64::from(link.m) * link.delta_t_w + link.delta_t_c,
        )
    } else {
        (base, base)
    };
    let p1 = link.p1();
    let probs = p_link_multiplexed(p1, link.m);
    let mut diagnostic = None;
    let single = waiting_time(single_t, p1, &mut diagnostic);
    let multiplexed_linear = waiting_time(multi_t, probs.linear, &mut diagnostic);
    let multiplexed_exact = waiting_time(multi_t, probs.exact, &mut diagnostic);
    let ratio = |a: f64, b: f64| if a.is_finite() && b.is_finite() { a / b } else { f64::NAN };
    Ok(EntanglementTime {
        trial_time_single: single_t,
        trial_time_multiplexed: multi_t,
        single,
        multiplexed_linear,
        multiplexed_exact,
        speedup_linear: ratio(single, multiplexed_linear),
        speedup_exact: ratio(single, multiplexed_exact),
        diagnostic,
    })
}

/// Monte Carlo estimate of the mean number of trials until success.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GeometricEstimate {
    pub runs: u64,
    pub mean_trials: f64,
    pub std_err: f64,
    /// 1 / p
    pub exact_mean: f64,
}

const MC_BLOCK: u64 = 1 << 12;

/// Samples `runs` geometric waiting times with success probability `p`.
///
/// Each run draws from its own counter-keyed stream, so the estimate does
/// not depend on the thread count.
pub fn simulate_link_trials(p: f64, runs: u64, seed: u64) -> Result<GeometricEstimate> {
    if !(p > 0.0 && p <= 1.0) {
        return Err(invalid("p", format!("{p} outside (0, 1]")));
    }
    if runs == 0 {
        return Err(invalid("runs", "must be at least 1"));
    }
    let geo = Geometric::new(p).map_err(|e| invalid("p", e.to_string()))?;
    let blocks = runs.div_ceil(MC_BLOCK);
    let (sum, sum_sq) = (0..blocks)
        .into_par_iter()
        .map(|b| {
            let mut acc = (0u128, 0u128);
            for i in b * MC_BLOCK..((b + 1) * MC_BLOCK).min(runs) {
                let trials = u128::from(geo.sample(&mut trial_stream(seed, 0, i))) + 1;
                acc.0 += trials;
                acc.1 += trials * trials;
            }
            acc
        })
        .reduce(|| (0, 0), |a, b| (a.0 + b.0, a.1 + b.1));
    let n = runs as f64;
    let mean = sum as f64 / n;
    let var = (sum_sq as f64 / n - mean * mean).max(0.0) * n / (n - 1.0).max(1.0);
    Ok(GeometricEstimate {
        runs,
        mean_trials: mean,
        std_err: (var / n).sqrt(),
        exact_mean: 1.0 / p,
    })
}

/// Single-mode protocol that retries the write up to N times within one memory time.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FeedbackConfig {
    pub eta: f64,
    pub chi: f64,
    pub n: u64,
    /// Write/clean period per retry, µs.
    pub delta_t: f64,
}

impl FeedbackConfig {
    pub fn validate(&self) -> Result<()> {
        for (field, p) in [("eta", self.eta), ("chi", self.chi)] {
            if !(0.0..=1.0).contains(&p) {
                return Err(invalid(field, format!("{p} outside [0, 1]")));
            }
        }
        if self.n == 0 {
            return Err(invalid("n", "must be at least 1"));
        }
        if !(self.delta_t > 0.0 && self.delta_t.is_finite()) {
            return Err(invalid("delta_t", format!("{} must be positive", self.delta_t)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FeedbackOutcome {
    /// 1 − (1 − ηχ)^N
    pub exact: f64,
    /// Nηχ
    pub linear: f64,
    /// N·δt, µs
    pub memory_time: f64,
    /// ⌈1/(ηχ)⌉, the retry count that makes one excitation near certain.
    #[serde(with = "crate::serde_inf")]
    pub deterministic_trials: f64,
}

pub fn feedback_success(fb: &FeedbackConfig) -> Result<FeedbackOutcome> {
    fb.validate()?;
    let p = fb.eta * fb.chi;
    Ok(FeedbackOutcome {
        exact: prob::at_least_one(p, fb.n),
        linear: prob::at_least_one_linear(p, fb.n),
        memory_time: fb.n as f64 * fb.delta_t,
        deterministic_trials: if p > 0.0 { (1.0 / p).ceil() } else { f64::INFINITY },
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct StrategySummary {
    pub success_probability: f64,
    /// µs
    pub wall_clock_time: f64,
    /// µs
    pub required_memory_time: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct StrategyComparison {
    pub feedback: StrategySummary,
    pub multiplexed: StrategySummary,
    pub equal_probability: bool,
    pub equal_time: bool,
}

/// Feedback with N = m retries against an m-mode write train whose
/// duration is taken as m·δt.
pub fn feedback_vs_multiplexed_report(fb: &FeedbackConfig, m: u32) -> Result<StrategyComparison> {
    fb.validate()?;
    if fb.n != u64::from(m) {
        return Err(invalid("n", format!("feedback retries {} differ from mode count {m}", fb.n)));
    }
    let outcome = feedback_success(fb)?;
    let train = f64::from(m) * fb.delta_t;
    let feedback = StrategySummary {
        success_probability: outcome.exact,
        wall_clock_time: outcome.memory_time,
        required_memory_time: outcome.memory_time,
    };
    let multiplexed = StrategySummary {
        success_probability: p_link_multiplexed(fb.eta * fb.chi, m).exact,
        wall_clock_time: train,
        required_memory_time: train,
    };
    Ok(StrategyComparison {
        equal_probability: feedback.success_probability == multiplexed.success_probability,
        equal_time: feedback.wall_clock_time == multiplexed.wall_clock_time,
        feedback,
        multiplexed,
    })
}

/// Grid of link parameters evaluated point by point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LinkSweep {
    pub l0_km: Vec<f64>,
    pub m: Vec<u32>,
    pub p1: Vec<f64>,
    #[serde(default = "default_c_fiber")]
    pub c_fiber: f64,
}

impl LinkSweep {
    pub fn from_json(text: &str) -> Result<Self> {
        let s: Self = serde_json::from_str(text)?;
        if s.l0_km.is_empty() || s.m.is_empty() || s.p1.is_empty() {
            return Err(invalid("sweep", "every axis needs at least one value"));
        }
        Ok(s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinkRow {
    pub l0_km: f64,
    pub m: u32,
    pub p1: f64,
    pub communication_time_us: f64,
    pub p_exact: f64,
    pub p_linear: f64,
    pub time_single_us: f64,
    pub time_multiplexed_linear_us: f64,
    pub time_multiplexed_exact_us: f64,
    pub speedup_exact: f64,
}

pub fn run_sweep(sweep: &LinkSweep) -> Result<Vec<LinkRow>> {
    let mut rows = Vec::with_capacity(sweep.l0_km.len() * sweep.m.len() * sweep.p1.len());
    for &l0 in &sweep.l0_km {
        for &m in &sweep.m {
            for &p1 in &sweep.p1 {
                let link = LinkConfig {
                    c_fiber: sweep.c_fiber,
                    ..LinkConfig::new(l0, p1, m)
                };
                let t = avg_entanglement_time(&link)?;
                let p = p_link_multiplexed(p1, m);
                rows.push(LinkRow {
                    l0_km: l0,
                    m,
                    p1,
                    communication_time_us: communication_time(&link),
                    p_exact: p.exact,
                    p_linear: p.linear,
                    time_single_us: t.single,
                    time_multiplexed_linear_us: t.multiplexed_linear,
                    time_multiplexed_exact_us: t.multiplexed_exact,
                    speedup_exact: t.speedup_exact,
                });
            }
        }
    }
    Ok(rows)
}

pub fn write_sweep_csv<W: Write>(rows: &[LinkRow], w: W) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    for row in rows {
        out.serialize(row)?;
    }
    out.flush()?;
    Ok(())
}

pub fn read_sweep_csv<R: std::io::Read>(r: R) -> Result<Vec<LinkRow>> {
    let mut rdr = csv::Reader::from_reader(r);
    Ok(rdr.deserialize().collect::<std::result::Result<Vec<LinkRow>, _>>()?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn communication_times() {
        assert_eq!(communication_time(&LinkConfig::new(60.0, 1e-3, 1)), 300.0);
        assert!((communication_time(&LinkConfig::new(0.2, 1e-3, 1)) - 1.0).abs() < 1e-12);
        assert_eq!(communication_time(&LinkConfig::new(120.0, 1e-3, 1)), 600.0);
    }

    #[test]
    fn multiplexed_probability() {
        assert_eq!(p_link_multiplexed(0.3, 1).exact, 0.3);
        let p = p_link_multiplexed(1e-3, 19);
        assert!((p.exact - 0.018830).abs() < 5e-7);
        assert!((p.linear - 0.019).abs() < 1e-15);
        let sat = p_link_multiplexed(0.5, 19);
        assert!((sat.exact - (1.0 - 0.5f64.powi(19))).abs() < 1e-15);
        assert_eq!(sat.linear, 9.5);
    }

    #[test]
    fn sixty_km_link() {
        let t = avg_entanglement_time(&LinkConfig::new(60.0, 1e-3, 19)).unwrap();
        assert!((t.single - 3.0e5).abs() < 1e-6);
        assert!((t.multiplexed_linear - 3.0e5 / 19.0).abs() < 1e-6);
        assert!((t.multiplexed_linear - 1.579e4).abs() < 1.0);
        assert!((t.speedup_linear - 19.0).abs() < 1e-12);
        assert!((t.speedup_exact - 19.0).abs() < 0.2);
    }

    #[test]
    fn single_mode_times_agree() {
        let t = avg_entanglement_time(&LinkConfig::new(60.0, 0.01, 1)).unwrap();
        assert_eq!(t.single, t.multiplexed_exact);
        assert_eq!(t.single, t.multiplexed_linear);
    }

    #[test]
    fn tiny_probability_is_infinite() {
        let t = avg_entanglement_time(&LinkConfig::new(60.0, 1e-300, 1)).unwrap();
        assert!(t.single.is_infinite());
        assert!(t.diagnostic.is_some());
        let json = serde_json::to_string(&t).unwrap();
        assert!(json.contains("\"single\":\"inf\""));
    }

    #[test]
    fn strict_timing_adds_write_and_clean() {
        let link = LinkConfig {
            strict_timing: true,
            delta_t_w: 0.3,
            delta_t_c: 1.0,
            ..LinkConfig::new(60.0, 1e-3, 19)
        };
        let t = avg_entanglement_time(&link).unwrap();
        assert!((t.trial_time_single - 301.3).abs() < 1e-9);
        assert!((t.trial_time_multiplexed - 306.7).abs() < 1e-9);
    }

    #[test]
    fn bsm_factor() {
        let link = LinkConfig {
            p_bsm: 0.5,
            apply_bsm: true,
            ..LinkConfig::new(60.0, 1e-2, 1)
        };
        assert_eq!(link.p1(), 5e-3);
        assert!(LinkConfig::new(-1.0, 0.1, 1).validate().is_err());
        assert!(LinkConfig::new(1.0, 0.0, 1).validate().is_err());
    }

    #[test]
    fn monte_carlo_mean_matches_geometric() {
        let est = simulate_link_trials(0.05, 200_000, 7).unwrap();
        assert!((est.mean_trials - 20.0).abs() < 4.0 * est.std_err);
        assert_eq!(est, simulate_link_trials(0.05, 200_000, 7).unwrap());
    }

    #[test]
    fn feedback_examples() {
        let fb = FeedbackConfig { eta: 0.1, chi: 0.01, n: 1, delta_t: 0.3 };
        assert_eq!(feedback_success(&fb).unwrap().exact, 0.1 * 0.01);
        let fb19 = FeedbackConfig { n: 19, ..fb };
        let out = feedback_success(&fb19).unwrap();
        assert!((out.exact - 0.018830).abs() < 5e-7);
        assert_eq!(out.exact, p_link_multiplexed(0.1 * 0.01, 19).exact);
        let certain = FeedbackConfig { eta: 1.0, chi: 1.0, n: 7, delta_t: 1.0 };
        assert_eq!(feedback_success(&certain).unwrap().exact, 1.0);
    }

    #[test]
    fn strategies_match() {
        let fb = FeedbackConfig { eta: 0.1, chi: 0.01, n: 19, delta_t: 0.3 };
        let r = feedback_vs_multiplexed_report(&fb, 19).unwrap();
        assert!(r.equal_probability && r.equal_time);
        assert!((r.multiplexed.wall_clock_time - 5.7).abs() < 1e-12);
        let slow = FeedbackConfig { delta_t: 1.0, ..fb };
        assert_eq!(feedback_vs_multiplexed_report(&slow, 19).unwrap().feedback.wall_clock_time, 19.0);
        assert!(feedback_vs_multiplexed_report(&fb, 18).is_err());
    }

    #[test]
    fn sweep_round_trip() {
        let sweep = LinkSweep::from_json(r#"{"l0_km": [20, 60], "m": [1, 19], "p1": [1e-3]}"#).unwrap();
        let rows = run_sweep(&sweep).unwrap();
        assert_eq!(rows.len(), 4);
        let mut buf = Vec::new();
        write_sweep_csv(&rows, &mut buf).unwrap();
        assert_eq!(read_sweep_csv(buf.as_slice()).unwrap(), rows);
    }
}
