use std::fs;
use std::path::Path;

use anyhow::{Context, Result};
use serde::{Deserialize, Serialize};

use varwitness::noise::{spin1_povms, CalibrationPoint};
use varwitness::simulate::{theta1_sweep, theta2_sweep, SWEEP_THETA1_DEG, SWEEP_THETA2_DEG};
use varwitness::witness::{witness_report, LocalMeasurements};
use varwitness::{
    build_global_moments, compose_sep_bound, detection_window, evaluate_witness_from_tuple, fit_alpha,
    grid_bound, make_singlet, make_test_state, noisy_povm, run_calibration, sample_variance_tuple,
    seesaw_bound, spin_flip_channel, trace_region, BoundCurve, BoundResult, DensityMatrix,
    DetectionWindow, NoiseChannel, NoiseFitResult, Povm, PureState, SampleConfig,
    SeesawConfig, TestStateParams, VarianceSample, WeightedPair, WitnessVerdict,
};

use crate::args::*;
use crate::output::{csv_bytes, json_pretty, read_json, usage};
use crate::svg::{Plot, Series};

/// Everything a command produces; the caller prints and persists it.
pub struct Run {
    pub stdout: String,
    /// `(suffix, contents)` pairs written as `<command><suffix>`.
    pub files: Vec<(String, Vec<u8>)>,
    /// Write files even without `--output-dir`.
    pub always_write: bool,
    pub warnings: Vec<String>,
}

impl Run {
    fn new(stdout: String) -> Self {
        Self {
            stdout,
            files: Vec::new(),
            always_write: false,
            warnings: Vec::new(),
        }
    }

    fn file(mut self, suffix: &str, contents: impl Into<Vec<u8>>) -> Self {
        self.files.push((suffix.to_string(), contents.into()));
        self
    }
}

/// Tolerance for seesaw and grid to count as agreeing.
const METHOD_AGREEMENT: f64 = 1e-4;

struct Detectors {
    ideal: (Povm, Povm),
    noisy: (Povm, Povm),
}

impl Detectors {
    fn load(args: &DetectorArgs) -> Result<Self> {
        let ideal = match (&args.povm_x, &args.povm_y) {
            (Some(x), Some(y)) => (read_json::<Povm>(x, "POVM")?, read_json::<Povm>(y, "POVM")?),
            _ => spin1_povms(),
        };
        if ideal.0.dim() != ideal.1.dim() {
            return Err(usage("the X and Y POVMs act on different dimensions"));
        }
        let channel: NoiseChannel = match &args.channel {
            Some(path) => read_json(path, "noise channel")?,
            None if args.povm_x.is_some() && args.alpha != 0.0 => {
                return Err(usage("--alpha selects spin-1 spin-flip noise; use --channel with custom POVMs"))
            }
            None if args.povm_x.is_some() => NoiseChannel::identity(ideal.0.dim()),
            None => spin_flip_channel(args.alpha)?,
        };
        let noisy = (noisy_povm(&channel, &ideal.0)?, noisy_povm(&channel, &ideal.1)?);
        Ok(Self { ideal, noisy })
    }

    fn moments(pair: &(Povm, Povm)) -> Result<LocalMeasurements> {
        Ok(LocalMeasurements {
            x: pair.0.moment_pair()?,
            y: pair.1.moment_pair()?,
        })
    }

    fn ideal_moments(&self) -> Result<LocalMeasurements> {
        Self::moments(&self.ideal)
    }

    fn noisy_moments(&self) -> Result<LocalMeasurements> {
        Self::moments(&self.noisy)
    }
}

fn seesaw_config(s: &SolverArgs) -> Result<SeesawConfig> {
    if s.starts == 0 {
        return Err(usage("--starts must be at least 1"));
    }
    if !(s.tol > 0.0) {
        return Err(usage("--tol must be positive"));
    }
    Ok(SeesawConfig {
        starts: s.starts,
        tol: s.tol,
        max_iter: s.max_iter,
        seed: s.seed,
    })
}

enum State {
    Pure(PureState),
    Mixed(DensityMatrix),
}

fn load_state(spec: &str) -> Result<State> {
    if spec == SINGLET {
        return Ok(State::Pure(make_singlet()));
    }
    let path = Path::new(spec);
    let text = fs::read_to_string(path).with_context(|| format!("reading state {}", path.display()))?;
    if let Ok(psi) = serde_json::from_str::<PureState>(&text) {
        return Ok(State::Pure(psi));
    }
    serde_json::from_str::<DensityMatrix>(&text).map(State::Mixed).map_err(|e| {
        usage(format!(
            "{} holds neither a pure state nor a density matrix: {e}",
            path.display()
        ))
    })
}

fn global_variances(state: &State, m: &LocalMeasurements) -> Result<(f64, f64)> {
    let gx = build_global_moments(&m.x);
    let gy = build_global_moments(&m.y);
    Ok(match state {
        State::Pure(s) => (gx.variance(s)?, gy.variance(s)?),
        State::Mixed(s) => (gx.variance(s)?, gy.variance(s)?),
    })
}

fn check_state_dim(state: &State, local_dim: usize) -> Result<()> {
    let dim = match state {
        State::Pure(s) => s.dim(),
        State::Mixed(s) => s.dim(),
    };
    if dim != local_dim * local_dim {
        return Err(usage(format!(
            "state has dimension {dim}; two parties with local dimension {local_dim} need {}",
            local_dim * local_dim
        )));
    }
    Ok(())
}

/// Measured `(Δ²M_X, Δ²M_Y)` from a tuple, or exactly from a state seen through noisy detectors.
fn measured_tuple(source: &SourceArgs, det: &Detectors) -> Result<(f64, f64)> {
    if let Some(t) = &source.tuple {
        return match t.as_slice() {
            &[x, y] if x >= 0.0 && y >= 0.0 => Ok((x, y)),
            &[_, _] => Err(usage("--tuple variances must be nonnegative")),
            _ => Err(usage("--tuple expects exactly two values, d2x,d2y")),
        };
    }
    let state = load_state(source.state.as_deref().unwrap_or(SINGLET))?;
    check_state_dim(&state, det.noisy.0.dim())?;
    global_variances(&state, &det.noisy_moments()?)
}

fn check_grid(lambda_grid: usize, resolution: f64) -> Result<()> {
    if lambda_grid < 2 {
        return Err(usage("--lambda-grid must be at least 2"));
    }
    if !(resolution > 0.0 && resolution < 1.0) {
        return Err(usage("--resolution must lie in (0, 1)"));
    }
    Ok(())
}

fn bound_curve(m: &LocalMeasurements, n: usize, config: &SeesawConfig) -> Result<BoundCurve> {
    Ok(BoundCurve::compute(m, m, n, config)?)
}

#[derive(Serialize)]
struct BoundOutput {
    lambda: f64,
    mu: f64,
    /// Smallest local value found by the requested methods.
    local: f64,
    /// Two identical parties: twice the local bound.
    c_sep: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    seesaw: Option<BoundResult>,
    #[serde(skip_serializing_if = "Option::is_none")]
    grid: Option<BoundResult>,
}

pub fn bound(args: &BoundArgs) -> Result<Run> {
    let det = Detectors::load(&args.detectors)?;
    let m = det.noisy_moments()?;
    let pair = WeightedPair::new(args.lambda, args.mu, m.x, m.y)?;
    let config = seesaw_config(&args.solver)?;
    let seesaw = matches!(args.method, MethodArg::Seesaw | MethodArg::Both).then(|| seesaw_bound(&pair, &config));
    let grid = match args.method {
        MethodArg::Grid | MethodArg::Both => Some(grid_bound(&pair, args.grid_n, args.polish)?),
        MethodArg::Seesaw => None,
    };
    let mut warnings = Vec::new();
    if seesaw.as_ref().is_some_and(|s| !s.converged) {
        warnings.push("seesaw did not converge".to_string());
    }
    let results: Vec<&BoundResult> = seesaw.iter().chain(grid.iter()).collect();
    let local = results.iter().map(|r| r.value).fold(f64::INFINITY, f64::min);
    if let (Some(s), Some(g)) = (&seesaw, &grid) {
        let gap = (s.value - g.value).abs();
        if gap > METHOD_AGREEMENT {
            warnings.push(format!("seesaw and grid differ by {gap:.3e}"));
        }
    }
    let best = results.iter().find(|r| r.value == local).expect("at least one method");
    let out = BoundOutput {
        lambda: args.lambda,
        mu: args.mu,
        local,
        c_sep: compose_sep_bound(best, best),
        seesaw,
        grid,
    };
    let json = json_pretty(&out)?;
    let mut run = Run::new(json.clone()).file(".json", json);
    run.warnings = warnings;
    Ok(run)
}

fn parse_lambdas(spec: &str) -> Result<Vec<f64>> {
    let spec = spec.trim();
    if !spec.contains([',', '.']) {
        let n: usize = spec
            .parse()
            .map_err(|_| usage(format!("--lambdas: `{spec}` is neither a count nor a list")))?;
        if n == 0 {
            return Err(usage("--lambdas count must be positive"));
        }
        return Ok((1..=n).map(|k| k as f64 / (n + 1) as f64).collect());
    }
    spec.split(',')
        .map(|s| {
            s.trim()
                .parse::<f64>()
                .map_err(|_| usage(format!("--lambdas: `{s}` is not a number")))
        })
        .collect()
}

pub fn region(args: &RegionArgs) -> Result<Run> {
    let det = Detectors::load(&args.detectors)?;
    let m = det.noisy_moments()?;
    let lambdas = parse_lambdas(&args.lambdas)?;
    let r = trace_region(&m.x, &m.y, &lambdas, &seesaw_config(&args.solver)?)?;
    let rows = r.points.iter().map(|p| (p.lambda, p.c, p.delta2_x, p.delta2_y));
    let csv = csv_bytes(&["lambda", "c", "delta2x", "delta2y"], rows)?;
    let mut run = Run::new(String::from_utf8(csv.clone())?).file(".csv", csv);
    let stuck: Vec<String> = r.points.iter().filter(|p| !p.converged).map(|p| p.lambda.to_string()).collect();
    if !stuck.is_empty() {
        run.warnings.push(format!("seesaw did not converge at lambda = {}", stuck.join(", ")));
    }
    Ok(run)
}

#[derive(Serialize)]
struct WitnessOutput {
    adapted: bool,
    d2x: f64,
    d2y: f64,
    /// Verdict at λ = μ = ½.
    verdict: WitnessVerdict,
    windows: Vec<DetectionWindow>,
    detected: bool,
}

pub fn witness(args: &WitnessArgs) -> Result<Run> {
    check_grid(args.lambda_grid, args.resolution)?;
    let det = Detectors::load(&args.detectors)?;
    let (d2x, d2y) = measured_tuple(&args.source, &det)?;
    let adapted = !args.non_adapted;
    let m = if adapted { det.noisy_moments()? } else { det.ideal_moments()? };
    let curve = bound_curve(&m, args.lambda_grid, &seesaw_config(&args.solver)?)?;
    let windows = detection_window(d2x, d2y, |l| curve.eval(l), args.resolution)?;
    let out = WitnessOutput {
        adapted,
        d2x,
        d2y,
        verdict: evaluate_witness_from_tuple(d2x, d2y, 0.5, 0.5, curve.eval(0.5))?,
        detected: !windows.is_empty(),
        windows,
    };
    let rows = curve
        .lambdas
        .iter()
        .zip(&curve.values)
        .map(|(&l, &c)| {
            let v = evaluate_witness_from_tuple(d2x, d2y, l, 1.0 - l, c)?;
            Ok((l, v.v_value, c, v.detected))
        })
        .collect::<Result<Vec<_>>>()?;
    let json = json_pretty(&out)?;
    Ok(Run::new(json.clone())
        .file(".json", json)
        .file("_sweep.csv", csv_bytes(&["lambda", "V", "c", "detected"], rows)?))
}

#[derive(Serialize)]
struct SimulateOutput {
    shots: u64,
    trials: usize,
    seed: u64,
    exact_d2x: f64,
    exact_d2y: f64,
    sample: VarianceSample,
}

pub fn simulate(args: &SimulateArgs) -> Result<Run> {
    let det = Detectors::load(&args.detectors)?;
    let state = load_state(&args.state)?;
    check_state_dim(&state, det.noisy.0.dim())?;
    let (exact_d2x, exact_d2y) = global_variances(&state, &det.noisy_moments()?)?;
    let config = SampleConfig {
        shots: args.shots,
        seed: args.seed,
        trials: args.trials,
    };
    let (x, y) = &det.noisy;
    let sample = match &state {
        State::Pure(s) => sample_variance_tuple(s, x, x, y, y, &config)?,
        State::Mixed(s) => sample_variance_tuple(s, x, x, y, y, &config)?,
    };
    let json = json_pretty(&SimulateOutput {
        shots: args.shots,
        trials: args.trials,
        seed: args.seed,
        exact_d2x,
        exact_d2y,
        sample,
    })?;
    Ok(Run::new(json.clone()).file(".json", json))
}

#[derive(Deserialize)]
struct AngleRow {
    theta1_deg: f64,
    theta2_deg: f64,
}

#[derive(Deserialize)]
struct MeasuredRow {
    theta1_deg: f64,
    theta2_deg: f64,
    #[serde(rename = "V_measured")]
    v_measured: f64,
}

fn read_csv<T: serde::de::DeserializeOwned>(path: &Path) -> Result<Vec<T>> {
    let text = fs::read(path).with_context(|| format!("reading {}", path.display()))?;
    csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(text.as_slice())
        .deserialize()
        .collect::<std::result::Result<Vec<T>, _>>()
        .map_err(|e| usage(format!("{}: {e}", path.display())))
}

pub fn calibrate(args: &CalibrateArgs) -> Result<Run> {
    let sweep = match &args.sweep {
        SweepArg::Theta1 => theta1_sweep(args.steps, args.fixed.unwrap_or(SWEEP_THETA2_DEG)),
        SweepArg::Theta2 => theta2_sweep(args.steps, args.fixed.unwrap_or(SWEEP_THETA1_DEG)),
        SweepArg::File(path) => read_csv::<AngleRow>(path)?
            .into_iter()
            .map(|r| TestStateParams::new(r.theta1_deg, r.theta2_deg))
            .collect::<varwitness::Result<Vec<_>>>()?,
    };
    let config = SampleConfig {
        shots: args.shots,
        seed: args.seed,
        trials: args.trials,
    };
    let records = run_calibration(&sweep, args.alpha, &config)?;
    let rows = records.iter().map(|r| {
        (r.params.theta1, r.params.theta2, r.v_ideal, r.v_noisy, r.v_sampled_mean, r.v_sampled_std)
    });
    let csv = csv_bytes(&["theta1", "theta2", "V_ideal", "V_noisy", "V_mean", "V_std"], rows)?;
    let mut run = Run::new(String::from_utf8(csv.clone())?).file(".csv", csv);
    if args.svg {
        let by_theta1 = match &args.sweep {
            SweepArg::Theta1 => true,
            SweepArg::Theta2 => false,
            SweepArg::File(_) => sweep.windows(2).any(|w| w[0].theta1 != w[1].theta1),
        };
        let x = |p: &TestStateParams| if by_theta1 { p.theta1 } else { p.theta2 };
        let series = |f: fn(&varwitness::CalibrationRecord) -> f64| -> Vec<(f64, f64)> {
            records.iter().map(|r| (x(&r.params), f(r))).collect()
        };
        let plot = Plot {
            title: "Local V on calibration states",
            x_label: if by_theta1 { "theta1 (deg)" } else { "theta2 (deg)" },
            y_label: "V",
            series: vec![
                Series { label: "ideal", color: "black", points: series(|r| r.v_ideal), dashed: true },
                Series { label: "noisy", color: "#1f77b4", points: series(|r| r.v_noisy), dashed: false },
                Series { label: "sampled", color: "#d62728", points: series(|r| r.v_sampled_mean), dashed: false },
            ],
            bands: Vec::new(),
        };
        run = run.file(".svg", plot.render());
        run.always_write = true;
    }
    Ok(run)
}

#[derive(Serialize)]
struct FitOutput {
    points: usize,
    #[serde(flatten)]
    fit: NoiseFitResult,
}

pub fn fit_noise(args: &FitNoiseArgs) -> Result<Run> {
    let rows = read_csv::<MeasuredRow>(&args.data)?;
    let calibration = rows
        .iter()
        .map(|r| {
            Ok(CalibrationPoint {
                state: make_test_state(TestStateParams::new(r.theta1_deg, r.theta2_deg)?),
                measured: r.v_measured,
            })
        })
        .collect::<varwitness::Result<Vec<_>>>()?;
    let (px, py) = spin1_povms();
    let fit = fit_alpha(spin_flip_channel, &px, &py, &calibration, (args.lambda, args.mu))?;
    let json = json_pretty(&FitOutput {
        points: calibration.len(),
        fit,
    })?;
    Ok(Run::new(json.clone()).file(".json", json))
}

#[derive(Serialize)]
struct ReportSummary {
    d2x: f64,
    d2y: f64,
    windows_noiseless: Vec<DetectionWindow>,
    windows_adapted: Vec<DetectionWindow>,
    detected: bool,
}

pub fn report(args: &ReportArgs) -> Result<Run> {
    check_grid(args.lambda_grid, args.resolution)?;
    let det = Detectors::load(&args.detectors)?;
    let (d2x, d2y) = measured_tuple(&args.source, &det)?;
    let config = seesaw_config(&args.solver)?;
    let noiseless = bound_curve(&det.ideal_moments()?, args.lambda_grid, &config)?;
    let adapted = bound_curve(&det.noisy_moments()?, args.lambda_grid, &config)?;
    let r = witness_report(d2x, d2y, args.detectors.alpha, &noiseless, &adapted, args.resolution)?;
    let rows = r.rows.iter().map(|row| {
        (row.lambda, row.v, row.c_noiseless, row.c_adapted, row.detected_noiseless, row.detected_adapted)
    });
    let csv = csv_bytes(
        &["lambda", "V", "c_noiseless", "c_adapted", "detected_noiseless", "detected_adapted"],
        rows,
    )?;
    let summary = json_pretty(&ReportSummary {
        d2x,
        d2y,
        detected: r.detected(),
        windows_noiseless: r.windows_noiseless.clone(),
        windows_adapted: r.windows_adapted.clone(),
    })?;
    let mut run = Run::new(summary.clone())
        .file(".csv", csv)
        .file(".windows.json", summary);
    run.always_write = true;
    if args.svg {
        let col = |f: fn(&varwitness::witness::SweepRow) -> f64| -> Vec<(f64, f64)> {
            r.rows.iter().map(|row| (row.lambda, f(row))).collect()
        };
        let plot = Plot {
            title: "Witness sweep",
            x_label: "lambda",
            y_label: "V, c",
            series: vec![
                Series { label: "V", color: "black", points: col(|row| row.v), dashed: false },
                Series { label: "c noiseless", color: "#1f77b4", points: col(|row| row.c_noiseless), dashed: true },
                Series { label: "c adapted", color: "#d62728", points: col(|row| row.c_adapted), dashed: false },
            ],
            bands: r.windows_adapted.iter().map(|w| (w.lambda_lo, w.lambda_hi)).collect(),
        };
        run = run.file(".svg", plot.render());
    }
    Ok(run)
}
