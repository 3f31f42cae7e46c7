//! `rfmagic` command-line front end.
//!
//! Tables go out as CSV (one header line, units in column names), reports
//! as JSON. With `--out FILE` the data is written to `FILE` and the run
//! manifest to `FILE.manifest.json`; otherwise data goes to stdout.
//!
//! Exit codes: 0 success, 1 usage or input error, 2 numerical failure.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod commands;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use rfmagic::magic::Engine;

#[derive(Parser, Debug)]
#[command(name = "rfmagic", version, about = "Second-order magic conditions for rf-dressed clock states")]
struct Cli {
    #[command(flatten)]
    atom: AtomArgs,

    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Clone, serde::Serialize)]
pub struct AtomArgs {
    /// JSON file with atom constants; missing fields default to 87Rb.
    #[arg(long, global = true, value_name = "FILE")]
    pub atom_file: Option<PathBuf>,
    /// Override the nuclear g-factor g_I.
    #[arg(long, global = true, allow_negative_numbers = true)]
    pub g_i: Option<f64>,
    /// Override the electron g-factor g_J.
    #[arg(long, global = true)]
    pub g_j: Option<f64>,
    /// Override the hyperfine splitting, Hz.
    #[arg(long, global = true)]
    pub hfs: Option<f64>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Static magic field of the undressed clock transition (JSON).
    StaticMagic(OutArgs),
    /// Second-order magic (B_I, B_rf) over a frequency grid (CSV or JSON).
    MagicScan(ScanArgs),
    /// Relative clock shift versus trapping potential (CSV).
    Profile(ProfileArgs),
    /// Sensitivity coefficients at magic points (JSON).
    Robustness(RobustnessArgs),
}

#[derive(Args, Debug, Clone, serde::Serialize)]
pub struct OutArgs {
    /// Write data here instead of stdout; the manifest goes next to it.
    #[arg(long, value_name = "FILE")]
    pub out: Option<PathBuf>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, serde::Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Rwa,
    Wffa,
    Full,
}

impl From<Method> for Engine {
    fn from(m: Method) -> Engine {
        match m {
            Method::Rwa => Engine::Rwa,
            Method::Wffa => Engine::Wffa,
            Method::Full => Engine::Full,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, serde::Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Json,
}

#[derive(Args, Debug, Clone, serde::Serialize)]
pub struct NumericArgs {
    #[arg(long, value_enum, default_value = "wffa")]
    pub method: Method,
    /// Floquet blocks (odd).
    #[arg(long, default_value_t = rfmagic::floquet::DEFAULT_BLOCKS)]
    pub blocks: usize,
    /// Upper end of the χ fit window, G².
    #[arg(long, default_value_t = 0.25)]
    pub chi_max: f64,
    /// Chebyshev nodes in the fit window.
    #[arg(long, default_value_t = 20)]
    pub nodes: usize,
    /// Degree of the fitted polynomial.
    #[arg(long, default_value_t = 6)]
    pub degree: usize,
}

#[derive(Args, Debug, Clone, serde::Serialize)]
pub struct ScanArgs {
    /// First rf frequency, MHz.
    #[arg(long, default_value_t = 0.5)]
    pub freq_start: f64,
    /// Last rf frequency, MHz.
    #[arg(long, default_value_t = 2.2)]
    pub freq_stop: f64,
    /// Frequency step, MHz.
    #[arg(long, default_value_t = 0.1)]
    pub freq_step: f64,
    #[command(flatten)]
    pub numerics: NumericArgs,
    /// Output format; defaults to the extension of --out, else CSV.
    #[arg(long, value_enum)]
    pub format: Option<Format>,
    #[command(flatten)]
    pub out: OutArgs,
}

#[derive(Args, Debug, Clone, serde::Serialize)]
pub struct ProfileArgs {
    /// Ioffe field B_I, G. Defaults to the static magic field.
    #[arg(long)]
    pub b_ioffe: Option<f64>,
    /// Rf amplitude B_rf, G. 0 gives the undressed trap.
    #[arg(long, default_value_t = 0.0)]
    pub b_rf: f64,
    /// Rf frequency, MHz.
    #[arg(long, default_value_t = 1.0)]
    pub freq: f64,
    /// Polarization parameter δ, rad (-π/4 is circular).
    #[arg(long, default_value_t = rfmagic::dressed::CIRCULAR_LEFT, allow_negative_numbers = true)]
    pub delta: f64,
    /// Solve for the magic (B_I, B_rf) at --freq and profile that trap.
    #[arg(long, conflicts_with_all = ["b_ioffe", "b_rf"])]
    pub magic: bool,
    /// Largest trapping potential, Hz.
    #[arg(long, default_value_t = 20e3)]
    pub u_max: f64,
    /// Number of rows including U_trap = 0.
    #[arg(long, default_value_t = 21)]
    pub points: usize,
    /// Deviation budget REL_IOFFE,REL_RF,EPS_DEG, e.g. 2.5e-4,5e-4,0.2.
    #[arg(long, value_parser = parse_budget, value_name = "REL_I,REL_RF,EPS_DEG")]
    pub budget: Option<[f64; 3]>,
    /// Clock state whose potential defines U_trap.
    #[arg(long, value_enum, default_value = "upper")]
    pub state: StateArg,
    /// Azimuth α, rad.
    #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
    pub alpha: f64,
    /// Transverse gradient, G/cm (only affects the radius column).
    #[arg(long, default_value_t = rfmagic::dressed::DEFAULT_GRADIENT)]
    pub gradient: f64,
    #[command(flatten)]
    pub numerics: NumericArgs,
    #[command(flatten)]
    pub out: OutArgs,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, serde::Serialize)]
#[serde(rename_all = "lowercase")]
pub enum StateArg {
    Lower,
    Upper,
}

#[derive(Args, Debug, Clone, serde::Serialize)]
pub struct RobustnessArgs {
    /// Rf frequencies, MHz (comma separated or repeated).
    #[arg(long, value_delimiter = ',', required = true, num_args = 1..)]
    pub freq: Vec<f64>,
    /// Relative field step for the α coefficients.
    #[arg(long, default_value_t = 1e-3)]
    pub field_step: f64,
    /// Polarization step for β and γ, degrees.
    #[arg(long, default_value_t = 0.5)]
    pub pol_step_deg: f64,
    #[command(flatten)]
    pub numerics: NumericArgs,
    #[command(flatten)]
    pub out: OutArgs,
}

fn parse_budget(s: &str) -> Result<[f64; 3], String> {
    let parts: Vec<&str> = s.split(',').collect();
    if parts.len() != 3 {
        return Err("expected three comma-separated values".into());
    }
    let mut out = [0.0; 3];
    for (slot, p) in out.iter_mut().zip(parts) {
        *slot = p.trim().parse().map_err(|e| format!("`{p}`: {e}"))?;
    }
    Ok(out)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    let result = (|| {
        let atom = commands::load_atom(&cli.atom)?;
        match &cli.command {
            Command::StaticMagic(a) => commands::static_magic(&atom, &cli.atom, a),
            Command::MagicScan(a) => commands::magic_scan(&atom, &cli.atom, a),
            Command::Profile(a) => commands::profile(&atom, &cli.atom, a),
            Command::Robustness(a) => commands::robustness(&atom, &cli.atom, a),
        }
    })();
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
