use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Debug, Parser)]
#[command(name = "swpe", version, about = "Multiplexed spin-wave/photon entanglement source simulator")]
pub struct Cli {
    #[command(flatten)]
    pub common: Common,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Args)]
pub struct Common {
    /// JSON input for the subcommand (plan, geometry, sweep, base config).
    #[arg(long, global = true, value_name = "PATH")]
    pub config: Option<PathBuf>,

    /// Output file; stdout when omitted.
    #[arg(long, global = true, value_name = "PATH")]
    pub out: Option<PathBuf>,

    /// Random seed [default: 0x5357504500000013].
    #[arg(long, global = true, value_name = "U64")]
    pub seed: Option<u64>,

    /// Trial count (per setting pair, or per mode count in sweeps).
    #[arg(long, global = true, value_name = "N")]
    pub trials: Option<u64>,

    #[arg(long, global = true, value_enum, default_value_t = Format::Csv)]
    pub format: Format,

    /// Worker threads; affects speed only.
    #[arg(long, global = true, value_name = "N")]
    pub threads: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Csv,
    Json,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run write–clean cycles and write the coincidence table.
    Simulate {
        /// Sweep the mode count over a range such as 1..19 (H–V setting only).
        #[arg(long, value_name = "A..B")]
        sweep_m: Option<String>,
    },
    /// Bell parameter from a coincidence table or a fresh simulation.
    Bell {
        /// Coincidence CSV holding the four canonical setting pairs.
        #[arg(long, value_name = "PATH")]
        input: Option<PathBuf>,
        /// Storage time in µs for a fresh simulation.
        #[arg(long)]
        tau: Option<f64>,
    },
    /// Two-qubit tomography from a coincidence table or a fresh simulation.
    Tomo {
        /// Coincidence CSV holding the nine basis pairs.
        #[arg(long, value_name = "PATH")]
        input: Option<PathBuf>,
        #[arg(long)]
        tau: Option<f64>,
    },
    /// Fit the exponential visibility decay to (tau, S, S error) points.
    Decay {
        /// JSON array or CSV (tau,s,s_err) of points.
        #[arg(long, value_name = "PATH")]
        input: Option<PathBuf>,
    },
    /// Phase-matching residuals of a write-beam fan.
    Pmc,
    /// Elementary-link timing over a parameter grid.
    Link {
        /// Compare single-mode feedback with multiplexing (FeedbackConfig JSON).
        #[arg(long, value_name = "PATH")]
        feedback: Option<PathBuf>,
        /// Mode count for the feedback comparison.
        #[arg(long, default_value_t = 19)]
        m: u32,
    },
    /// Solve v1, beta and tau_c from three Bell-parameter targets.
    Calibrate(CalibrateArgs),
    /// Regenerate a figure table and compare it with the published values.
    Reproduce {
        /// fig2, fig3, fig4 or fig5.
        figure: String,
        /// Expected coincidences per setting for Bell parameters.
        #[arg(long)]
        coincidences: Option<u64>,
        /// Expected coincidences per setting for tomography.
        #[arg(long)]
        tomography_coincidences: Option<u64>,
        /// Trials for the m = 1 and m = 19 coincidence-rate endpoints.
        #[arg(long, num_args = 2, value_names = ["M1", "M19"])]
        endpoint_trials: Option<Vec<u64>>,
    },
}

#[derive(Debug, Args)]
pub struct CalibrateArgs {
    /// CalibrationTargets JSON; overrides the value flags.
    #[arg(long, value_name = "PATH")]
    pub targets: Option<PathBuf>,
    /// S at m = 1, 0.7 µs.
    #[arg(long, default_value_t = 2.65)]
    pub s1: f64,
    /// S at m = 19, 0.7 µs.
    #[arg(long, default_value_t = 2.30)]
    pub s19: f64,
    /// S at m = 19, 30 µs.
    #[arg(long, default_value_t = 2.03)]
    pub s19_late: f64,
    /// Re-simulate each target with this many coincidences per setting.
    #[arg(long, value_name = "N")]
    pub verify: Option<u64>,
}
