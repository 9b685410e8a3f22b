use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

pub const DEFAULT_SEED: u64 = 0x5EE5_A11D;
pub const SEED_ENV: &str = "VARWITNESS_SEED";

#[derive(Debug, Parser)]
#[command(name = "varwitness", version, about = "Noise-adapted variance entanglement witnesses")]
pub struct Cli {
    /// Directory for output files and their run manifests.
    #[arg(long, global = true, value_name = "DIR")]
    pub output_dir: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Clone, Debug, Subcommand)]
pub enum Command {
    /// Minimal local variance sum and the separability bound for one weight pair.
    Bound(BoundArgs),
    /// Trace the lower boundary of the local uncertainty region.
    Region(RegionArgs),
    /// Evaluate the witness on a state or on measured variances.
    Witness(WitnessArgs),
    /// Sample the global variances with finite statistics.
    Simulate(SimulateArgs),
    /// Exact and sampled local V on the calibration test states.
    Calibrate(CalibrateArgs),
    /// Fit the spin-flip probability to calibration measurements.
    FitNoise(FitNoiseArgs),
    /// Full λ sweep against the noiseless and noise-adapted bounds.
    Report(ReportArgs),
    /// Re-run a command from its run manifest.
    Replay(ReplayArgs),
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Bound(_) => "bound",
            Command::Region(_) => "region",
            Command::Witness(_) => "witness",
            Command::Simulate(_) => "simulate",
            Command::Calibrate(_) => "calibrate",
            Command::FitNoise(_) => "fit-noise",
            Command::Report(_) => "report",
            Command::Replay(_) => "replay",
        }
    }

    /// Turns input paths absolute so a manifest can be replayed from anywhere.
    pub fn absolutize_inputs(&mut self) {
        match self {
            Command::Bound(a) => a.detectors.absolutize(),
            Command::Region(a) => a.detectors.absolutize(),
            Command::Witness(a) => {
                a.detectors.absolutize();
                a.source.absolutize();
            }
            Command::Simulate(a) => {
                a.detectors.absolutize();
                absolutize_state(&mut a.state);
            }
            Command::Calibrate(a) => {
                if let SweepArg::File(p) = &a.sweep {
                    a.sweep = SweepArg::File(absolute(p));
                }
            }
            Command::FitNoise(a) => a.data = absolute(&a.data),
            Command::Report(a) => {
                a.detectors.absolutize();
                a.source.absolutize();
            }
            Command::Replay(_) => {}
        }
    }
}

fn absolute(p: &Path) -> PathBuf {
    std::path::absolute(p).unwrap_or_else(|_| p.to_path_buf())
}

fn absolutize_state(state: &mut String) {
    if state != SINGLET {
        *state = absolute(Path::new(state.as_str())).display().to_string();
    }
}

pub const SINGLET: &str = "singlet";

/// Detector model shared by every party.
#[derive(Clone, Debug, Args, Serialize, Deserialize)]
pub struct DetectorArgs {
    /// Spin-flip probability α of the detectors.
    #[arg(long, default_value_t = 0.0)]
    pub alpha: f64,
    /// Noise channel as JSON, replacing the spin-flip family.
    #[arg(long, value_name = "FILE", conflicts_with = "alpha")]
    pub channel: Option<PathBuf>,
    /// POVM for the X setting as JSON (default: spin-1 L_X).
    #[arg(long, value_name = "FILE", requires = "povm_y")]
    pub povm_x: Option<PathBuf>,
    /// POVM for the Y setting as JSON (default: spin-1 L_Y).
    #[arg(long, value_name = "FILE", requires = "povm_x")]
    pub povm_y: Option<PathBuf>,
}

impl DetectorArgs {
    fn absolutize(&mut self) {
        for p in [&mut self.channel, &mut self.povm_x, &mut self.povm_y].into_iter().flatten() {
            *p = absolute(p);
        }
    }
}

#[derive(Clone, Debug, Args, Serialize, Deserialize)]
pub struct SolverArgs {
    /// Number of seesaw starts.
    #[arg(long, default_value_t = 16)]
    pub starts: usize,
    /// Convergence tolerance on successive values.
    #[arg(long, default_value_t = 1e-10)]
    pub tol: f64,
    #[arg(long, default_value_t = 500)]
    pub max_iter: usize,
    #[arg(long, env = SEED_ENV, default_value_t = DEFAULT_SEED)]
    pub seed: u64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MethodArg {
    Seesaw,
    Grid,
    Both,
}

#[derive(Clone, Debug, Args, Serialize, Deserialize)]
pub struct BoundArgs {
    #[arg(long, allow_negative_numbers = true)]
    pub lambda: f64,
    #[arg(long, allow_negative_numbers = true)]
    pub mu: f64,
    #[arg(long, value_enum, default_value_t = MethodArg::Seesaw)]
    pub method: MethodArg,
    /// Mesh size per axis for the grid oracle.
    #[arg(long, default_value_t = 201)]
    pub grid_n: usize,
    /// Seesaw iterations applied after the grid search.
    #[arg(long, default_value_t = 0)]
    pub polish: usize,
    #[command(flatten)]
    #[serde(flatten)]
    pub detectors: DetectorArgs,
    #[command(flatten)]
    #[serde(flatten)]
    pub solver: SolverArgs,
}

#[derive(Clone, Debug, Args, Serialize, Deserialize)]
pub struct RegionArgs {
    /// A count `n` (interior points k/(n+1)) or a comma-separated list.
    #[arg(long, default_value = "19")]
    pub lambdas: String,
    #[command(flatten)]
    #[serde(flatten)]
    pub detectors: DetectorArgs,
    #[command(flatten)]
    #[serde(flatten)]
    pub solver: SolverArgs,
}

/// Where the measured variances come from.
#[derive(Clone, Debug, Args, Serialize, Deserialize)]
pub struct SourceArgs {
    /// `singlet` or a JSON file holding a pure state or density matrix.
    #[arg(long, value_name = "singlet|FILE")]
    pub state: Option<String>,
    /// Measured global variances `d2x,d2y`.
    #[arg(long, value_name = "D2X,D2Y", value_delimiter = ',', num_args = 1, conflicts_with = "state")]
    pub tuple: Option<Vec<f64>>,
}

impl SourceArgs {
    fn absolutize(&mut self) {
        if let Some(s) = &mut self.state {
            absolutize_state(s);
        }
    }
}

#[derive(Clone, Debug, Args, Serialize, Deserialize)]
pub struct WitnessArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub source: SourceArgs,
    /// Number of uniform λ knots in [0, 1].
    #[arg(long, default_value_t = 201)]
    pub lambda_grid: usize,
    /// Compare against the noise-adapted bound (default).
    #[arg(long, conflicts_with = "non_adapted")]
    #[serde(skip)]
    pub adapted: bool,
    /// Compare against the noiseless bound instead.
    #[arg(long)]
    pub non_adapted: bool,
    /// λ resolution of the detection windows.
    #[arg(long, default_value_t = 1e-3)]
    pub resolution: f64,
    #[command(flatten)]
    #[serde(flatten)]
    pub detectors: DetectorArgs,
    #[command(flatten)]
    #[serde(flatten)]
    pub solver: SolverArgs,
}

#[derive(Clone, Debug, Args, Serialize, Deserialize)]
pub struct SimulateArgs {
    /// `singlet` or a JSON file holding a pure state or density matrix.
    #[arg(long, default_value = SINGLET, value_name = "singlet|FILE")]
    pub state: String,
    /// Total detections, split evenly between the two settings.
    #[arg(long, default_value_t = 20_000)]
    pub shots: u64,
    #[arg(long, default_value_t = 100)]
    pub trials: usize,
    #[arg(long, env = SEED_ENV, default_value_t = DEFAULT_SEED)]
    pub seed: u64,
    #[command(flatten)]
    #[serde(flatten)]
    pub detectors: DetectorArgs,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepArg {
    Theta1,
    Theta2,
    File(PathBuf),
}

impl std::str::FromStr for SweepArg {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        Ok(match s {
            "theta1" => SweepArg::Theta1,
            "theta2" => SweepArg::Theta2,
            "" => return Err("empty sweep".into()),
            path => SweepArg::File(PathBuf::from(path)),
        })
    }
}

#[derive(Clone, Debug, Args, Serialize, Deserialize)]
pub struct CalibrateArgs {
    /// `theta1`, `theta2` or a CSV file with `theta1_deg,theta2_deg` columns.
    #[arg(long, default_value = "theta1", value_name = "theta1|theta2|FILE")]
    pub sweep: SweepArg,
    #[arg(long, default_value_t = 0.0)]
    pub alpha: f64,
    /// Number of test states in a built-in sweep.
    #[arg(long, default_value_t = 45)]
    pub steps: usize,
    /// Fixed angle in degrees for a built-in sweep (default 23.3 for a θ₁ sweep, 28 for θ₂).
    #[arg(long)]
    pub fixed: Option<f64>,
    #[arg(long, default_value_t = 20_000)]
    pub shots: u64,
    #[arg(long, default_value_t = 100)]
    pub trials: usize,
    #[arg(long, env = SEED_ENV, default_value_t = DEFAULT_SEED)]
    pub seed: u64,
    /// Also write an SVG plot.
    #[arg(long)]
    pub svg: bool,
}

#[derive(Clone, Debug, Args, Serialize, Deserialize)]
pub struct FitNoiseArgs {
    /// CSV with columns `theta1_deg,theta2_deg,V_measured`.
    #[arg(long, value_name = "FILE")]
    pub data: PathBuf,
    /// Weights of the measured V.
    #[arg(long, default_value_t = 0.5)]
    pub lambda: f64,
    #[arg(long, default_value_t = 0.5)]
    pub mu: f64,
}

#[derive(Clone, Debug, Args, Serialize, Deserialize)]
pub struct ReportArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub source: SourceArgs,
    #[arg(long, default_value_t = 201)]
    pub lambda_grid: usize,
    #[arg(long, default_value_t = 1e-3)]
    pub resolution: f64,
    /// Also write an SVG plot.
    #[arg(long)]
    pub svg: bool,
    #[command(flatten)]
    #[serde(flatten)]
    pub detectors: DetectorArgs,
    #[command(flatten)]
    #[serde(flatten)]
    pub solver: SolverArgs,
}

#[derive(Clone, Debug, Args, Serialize, Deserialize)]
pub struct ReplayArgs {
    /// A `*.manifest.json` written by an earlier run.
    pub manifest: PathBuf,
}
