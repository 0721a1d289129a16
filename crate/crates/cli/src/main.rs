mod commands;
mod io;
mod report;
mod svg;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

/// Differential light shift and Ramsey dephasing of atoms in magic
/// elliptically polarized optical traps.
#[derive(Parser)]
#[command(name = "magictrap", disable_version_flag = true)]
pub struct Cli {
    /// Print the version; add --constants to list the physical constants.
    #[arg(long, global = true)]
    version: bool,
    #[arg(long, requires = "version")]
    constants: bool,
    /// Significant digits for printed numbers.
    #[arg(long, global = true, default_value_t = 9, value_parser = clap::value_parser!(u8).range(1..=17))]
    precision: u8,
    #[command(subcommand)]
    command: Option<Command>,
}

#[derive(Args, Clone)]
pub struct CoeffArgs {
    /// Coefficient file (TOML or JSON): beta1, beta2_per_gauss, beta4_per_hz,
    /// polarization_A. Defaults to the measured coefficients.
    #[arg(long, value_name = "FILE")]
    pub coeffs: Option<PathBuf>,
}

#[derive(Args, Clone)]
pub struct Outputs {
    /// Write the table as CSV.
    #[arg(long, value_name = "FILE.csv")]
    pub out: Option<PathBuf>,
    /// Write a static SVG plot.
    #[arg(long, value_name = "FILE.svg")]
    pub plot: Option<PathBuf>,
}

#[derive(Args, Clone)]
pub struct TrapArgs {
    /// Ensemble temperature in uK.
    #[arg(long)]
    pub temp_uk: f64,
    /// Bias field in G.
    #[arg(long)]
    pub b_field: f64,
    /// Mean trap depth in mK (positive). Defaults to the magic depth.
    #[arg(long, conflicts_with = "ratio")]
    pub depth_mk: Option<f64>,
    /// Mean depth as a multiple of the magic depth.
    #[arg(long)]
    pub ratio: Option<f64>,
    /// Microwave detuning in Hz.
    #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
    pub detuning_hz: f64,
    /// Integrate the untruncated thermal density without renormalizing.
    #[arg(long)]
    pub no_renormalize: bool,
    #[command(flatten)]
    pub coeffs: CoeffArgs,
}

#[derive(Args, Clone)]
pub struct TimeGrid {
    /// Longest free-evolution time in s.
    #[arg(long, default_value_t = 4.0)]
    pub t_max: f64,
    #[arg(long, default_value_t = 401)]
    pub points: usize,
}

#[derive(Subcommand)]
pub enum Command {
    /// Light shift against trap depth at one or more bias fields.
    DlsCurve {
        /// Bias fields in G (comma separated).
        #[arg(long, value_delimiter = ',', required = true)]
        b_field: Vec<f64>,
        #[arg(long, default_value_t = 0.5)]
        depth_max_mk: f64,
        #[arg(long, default_value_t = 101)]
        points: usize,
        #[command(flatten)]
        coeffs: CoeffArgs,
        #[command(flatten)]
        outputs: Outputs,
    },
    /// Magic depth and light-shift minimum at a bias field.
    Magic {
        #[arg(long)]
        b_field: f64,
        #[command(flatten)]
        coeffs: CoeffArgs,
    },
    /// Zeeman-equivalent field of the vector light shift.
    Beff {
        /// Trap depth in mK (positive).
        #[arg(long)]
        depth_mk: f64,
        /// Vector-to-scalar polarizability ratio.
        #[arg(long, default_value_t = magictrap::dls::VECTOR_TO_SCALAR_RATIO_830NM)]
        ratio: f64,
    },
    /// Global fit of beta2 and beta4 to light-shift data.
    FitDls {
        /// CSV with b_field_gauss, depth_mk, dls_hz[, sigma_hz].
        #[arg(long)]
        input: PathBuf,
        /// Fixed beta1.
        #[arg(long, default_value_t = magictrap::dls::BETA1_CIRCULAR)]
        beta1: f64,
        /// Fit beta1 as well.
        #[arg(long, conflicts_with = "beta1")]
        free_beta1: bool,
        /// Also report the magic depth and its uncertainty at this field.
        #[arg(long, value_name = "GAUSS")]
        magic_at: Option<f64>,
        #[command(flatten)]
        outputs: Outputs,
    },
    /// Thermally averaged Ramsey population against time.
    Ramsey {
        #[command(flatten)]
        trap: TrapArgs,
        #[command(flatten)]
        grid: TimeGrid,
        /// Cross-check against a Monte Carlo estimate with this many atoms.
        #[arg(long)]
        mc_samples: Option<usize>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[command(flatten)]
        outputs: Outputs,
    },
    /// Fringe visibility against time.
    Visibility {
        #[command(flatten)]
        trap: TrapArgs,
        #[command(flatten)]
        grid: TimeGrid,
        #[command(flatten)]
        outputs: Outputs,
    },
    /// Inhomogeneous dephasing time and the combined coherence time.
    T2star {
        #[command(flatten)]
        trap: TrapArgs,
        #[arg(long, default_value_t = 4.0)]
        t1: f64,
        #[arg(long, default_value_t = 0.3)]
        t2prime: f64,
    },
    /// Coherence time against depth relative to the magic depth.
    CoherenceCurve {
        #[arg(long)]
        temp_uk: f64,
        #[arg(long)]
        b_field: f64,
        #[arg(long, default_value_t = 0.5)]
        ratio_min: f64,
        #[arg(long, default_value_t = 1.5)]
        ratio_max: f64,
        #[arg(long, default_value_t = 0.05)]
        ratio_step: f64,
        #[arg(long, default_value_t = 4.0)]
        t1: f64,
        #[arg(long, default_value_t = 0.3)]
        t2prime: f64,
        #[arg(long)]
        no_renormalize: bool,
        #[command(flatten)]
        coeffs: CoeffArgs,
        #[command(flatten)]
        outputs: Outputs,
    },
    /// Damped-sinusoid fit of a Ramsey record.
    FitRamsey {
        /// CSV with t_s, p[, sigma].
        #[arg(long)]
        input: PathBuf,
        #[command(flatten)]
        outputs: Outputs,
    },
    /// Coherence budget of a transfer timeline.
    Transfer {
        /// Timeline document (TOML or JSON).
        #[arg(long)]
        timeline: PathBuf,
        /// Temperature after the transfer in uK.
        #[arg(long)]
        post_temp_uk: f64,
        /// Measured register T2* before the transfer, s.
        #[arg(long)]
        t2_static_s: Option<f64>,
        /// Measured register T2* after the transfer, s.
        #[arg(long)]
        t2_mobile_s: Option<f64>,
        #[command(flatten)]
        coeffs: CoeffArgs,
        #[command(flatten)]
        outputs: Outputs,
    },
    /// Unit conversions between mK, uK and Hz.
    Convert {
        /// Trap depth in mK (positive) to signed Hz.
        #[arg(long)]
        depth_mk: Option<f64>,
        /// Signed trap depth in Hz to mK.
        #[arg(long, allow_negative_numbers = true)]
        depth_hz: Option<f64>,
        /// Temperature in uK to kB T / h.
        #[arg(long)]
        temp_uk: Option<f64>,
    },
    /// Run the acceptance suite.
    Selftest {
        /// Run only these criteria.
        #[arg(long, value_delimiter = ',')]
        only: Vec<u8>,
        /// Disable parallel evaluation.
        #[arg(long)]
        sequential: bool,
    },
}

fn configure_threads() -> Result<(), String> {
    let Ok(raw) = std::env::var("MAGICTRAP_THREADS") else {
        return Ok(());
    };
    let n: usize = raw
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| format!("MAGICTRAP_THREADS must be a positive integer, got {raw:?}"))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| e.to_string())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    if let Err(msg) = configure_threads() {
        eprintln!("error: {msg}");
        return ExitCode::from(2);
    }
    if cli.version {
        print!("{}", commands::version(cli.constants, cli.precision as usize));
        return ExitCode::SUCCESS;
    }
    let Some(command) = cli.command else {
        eprintln!("error: a subcommand is required (see --help)");
        return ExitCode::from(2);
    };
    match commands::run(command, cli.precision as usize) {
        Ok(outcome) => {
            print!("{}", outcome.stdout);
            if outcome.success {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(1)
            }
        }
        Err(e) => {
            eprintln!("error[{}]: {e}", e.code());
            ExitCode::from(1)
        }
    }
}
