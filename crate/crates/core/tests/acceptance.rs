//! Acceptance suite. Runs every criterion, prints one PASS/FAIL line each,
//! and exits non-zero if any criterion fails.

use std::time::{Duration, Instant};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use varwitness::bounds::{compose_sep_bound, grid_bound, seesaw_bound, SeesawConfig, WeightedPair};
use varwitness::linalg::{Matrix, C64};
use varwitness::noise::{
    fit_alpha, spin1_povms, spin_flip_channel, spin_flip_moment_pairs, spin_flip_povms,
    CalibrationPoint,
};
use varwitness::operators::moments;
use varwitness::simulate::{
    make_singlet, make_test_state, run_calibration, theta1_sweep, theta2_sweep, SampleConfig,
    SWEEP_STEPS, SWEEP_THETA1_DEG, SWEEP_THETA2_DEG,
};
use varwitness::witness::{
    evaluate_witness, evaluate_witness_from_tuple, witness_report, BoundCurve, GlobalMoments,
    LocalMeasurements,
};
use varwitness::{random, DensityMatrix};

const C_SEP_NOISELESS: f64 = 7.0 / 16.0;
const C_SEP_NOISY_REPORTED: f64 = 0.7614;
const ALPHA: f64 = 0.2;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

fn pair(lambda: f64, mu: f64, alpha: f64) -> WeightedPair {
    let (x, y) = spin_flip_moment_pairs(alpha).unwrap();
    WeightedPair::new(lambda, mu, x, y).unwrap()
}

fn composed_both_ways(alpha: f64) -> (f64, f64, Duration) {
    let t = Instant::now();
    let local = pair(0.5, 0.5, alpha);
    let s = seesaw_bound(&local, &SeesawConfig::default());
    let g = grid_bound(&local, 201, 1).unwrap();
    (compose_sep_bound(&s, &s), compose_sep_bound(&g, &g), t.elapsed())
}

fn criterion_1() -> Outcome {
    let (s, g, dt) = composed_both_ways(0.0);
    let ok = (s - C_SEP_NOISELESS).abs() <= 1e-6
        && (g - C_SEP_NOISELESS).abs() <= 1e-6
        && dt < Duration::from_secs(5);
    outcome(ok, format!("seesaw {s:.9}, grid {g:.9}, target 0.4375 ± 1e-6, {dt:.2?}"))
}

fn criterion_2() -> Outcome {
    let (s, g, dt) = composed_both_ways(ALPHA);
    let ok = (s - C_SEP_NOISY_REPORTED).abs() <= 2e-3
        && (g - C_SEP_NOISY_REPORTED).abs() <= 2e-3
        && dt < Duration::from_secs(5);
    outcome(ok, format!("seesaw {s:.6}, grid {g:.6}, target 0.7614 ± 2e-3, {dt:.2?}"))
}

fn displayed_matrix(scale: C64, rows: [[f64; 3]; 3]) -> Matrix {
    let rows: Vec<Vec<C64>> = rows
        .iter()
        .map(|r| r.iter().map(|&x| scale * x).collect())
        .collect();
    Matrix::from_rows(&rows).unwrap()
}

fn criterion_3() -> Outcome {
    let a = ALPHA;
    let h = std::f64::consts::FRAC_1_SQRT_2;
    let t = 1.0 - a;
    let want_x1 = displayed_matrix(C64::new(h, 0.0), [[0.0, t, 0.0], [t, 0.0, t], [0.0, t, 0.0]]);
    let want_y1 = displayed_matrix(
        C64::new(0.0, h),
        [[0.0, a - 1.0, 0.0], [t, 0.0, a - 1.0], [0.0, t, 0.0]],
    );
    let want_x2 = displayed_matrix(C64::new(0.5, 0.0), [[1.0, 0.0, 1.0], [0.0, 2.0, 0.0], [1.0, 0.0, 1.0]]);
    let want_y2 = displayed_matrix(C64::new(0.5, 0.0), [[1.0, 0.0, -1.0], [0.0, 2.0, 0.0], [-1.0, 0.0, 1.0]]);
    let (nx, ny) = spin_flip_povms(a).unwrap();
    let mx = moments(&nx, 2).unwrap();
    let my = moments(&ny, 2).unwrap();
    let errs = [
        (mx[0].matrix() - &want_x1).max_abs(),
        (my[0].matrix() - &want_y1).max_abs(),
        (mx[1].matrix() - &want_x2).max_abs(),
        (my[1].matrix() - &want_y2).max_abs(),
    ];
    let worst = errs.iter().cloned().fold(0.0, f64::max);
    outcome(worst <= 1e-12, format!("max elementwise deviation {worst:.2e} (tol 1e-12)"))
}

fn singlet_v(alpha: f64) -> f64 {
    let (x, y) = spin_flip_moment_pairs(alpha).unwrap();
    let gx = GlobalMoments::symmetric(&x, "M_X");
    let gy = GlobalMoments::symmetric(&y, "M_Y");
    evaluate_witness(&make_singlet().to_density(), &gx, &gy, 0.5, 0.5, 0.0)
        .unwrap()
        .v_value
}

fn criterion_4() -> Outcome {
    let v0 = singlet_v(0.0);
    let v = singlet_v(ALPHA);
    // direct 9×9 matrix oracle: ⟨M2⟩ = 2·(2/3) + 2(1−α)²·(−2/3) per setting, ⟨M1⟩ = 0
    let oracle = 4.0 / 3.0 * (1.0 - (1.0 - ALPHA).powi(2));
    let in_band = (v - 0.492).abs() <= 3.0 * 0.018;
    let ok = v0.abs() <= 1e-14
        && (v - 0.48).abs() <= 1e-10
        && (oracle - 0.48).abs() <= 1e-12
        && in_band
        && v >= C_SEP_NOISELESS
        && v < C_SEP_NOISY_REPORTED;
    outcome(
        ok,
        format!("V noiseless {v0:.2e}, V(α=0.2) {v:.12}; 0.4375 ≤ V < 0.7614, |V − 0.492| ≤ 3σ"),
    )
}

fn curves() -> (BoundCurve, BoundCurve) {
    let cfg = SeesawConfig::default();
    let party = |alpha| {
        let (x, y) = spin_flip_moment_pairs(alpha).unwrap();
        LocalMeasurements { x, y }
    };
    let ideal = party(0.0);
    let noisy = party(ALPHA);
    (
        BoundCurve::compute(&ideal, &ideal, 201, &cfg).unwrap(),
        BoundCurve::compute(&noisy, &noisy, 201, &cfg).unwrap(),
    )
}

fn criterion_5() -> Outcome {
    let res = 1e-3;
    let (c0, c_alpha) = curves();
    let v0 = singlet_v(0.0).max(0.0);
    let v = singlet_v(ALPHA);
    let noiseless = witness_report(v0, v0, 0.0, &c0, &c0, res).unwrap();
    let adapted = witness_report(v, v, ALPHA, &c0, &c_alpha, res).unwrap();
    let (w0, wa) = (&noiseless.windows_noiseless, &adapted.windows_adapted);
    if w0.len() != 1 || wa.len() != 1 || !adapted.windows_noiseless.is_empty() {
        return outcome(false, format!("unexpected window sets {w0:?} / {wa:?}"));
    }
    let (w0, wa) = (w0[0], wa[0]);
    let strict = |w: &varwitness::DetectionWindow, lo: f64, hi: f64| w.lambda_lo < lo && hi < w.lambda_hi;
    let symmetric = |w: &varwitness::DetectionWindow| (w.lambda_lo - (1.0 - w.lambda_hi)).abs() <= res;

    let mut consistent = true;
    for k in 0..=1000 {
        let l = k as f64 / 1000.0;
        for (w, curve, val) in [(&w0, &c0, v0), (&wa, &c_alpha, v)] {
            let pointwise = evaluate_witness_from_tuple(val, val, l, 1.0 - l, curve.eval(l))
                .unwrap()
                .detected;
            let inside = l >= w.lambda_lo && l <= w.lambda_hi;
            let outside = l < w.lambda_lo - res || l > w.lambda_hi + res;
            if (inside && !pointwise) || (outside && pointwise) {
                consistent = false;
            }
        }
    }
    let ok = strict(&w0, 0.028, 0.985)
        && strict(&wa, 0.250, 0.755)
        && symmetric(&w0)
        && symmetric(&wa)
        && consistent;
    outcome(
        ok,
        format!(
            "noiseless [{:.4}, {:.4}] ⊃ [0.028, 0.985]; adapted [{:.4}, {:.4}] ⊃ [0.250, 0.755]; \
             non-adapted empty; pointwise consistent {consistent}",
            w0.lambda_lo, w0.lambda_hi, wa.lambda_lo, wa.lambda_hi
        ),
    )
}

fn criterion_6() -> Outcome {
    let t = Instant::now();
    let cfg = SeesawConfig::default();
    let mut worst = 0.0_f64;
    for alpha in [0.0, 0.1, 0.2, 0.3] {
        for k in 1..=19 {
            let lambda = 0.05 * k as f64;
            let p = pair(lambda, 1.0 - lambda, alpha);
            let s = seesaw_bound(&p, &cfg).value;
            let g = grid_bound(&p, 201, 0).unwrap().value;
            worst = worst.max((s - g).abs());
        }
    }
    let dt = t.elapsed();
    outcome(
        worst <= 1e-4 && dt < Duration::from_secs(120),
        format!("max |seesaw − grid| = {worst:.2e} over 76 cases (tol 1e-4), {dt:.2?}"),
    )
}

fn criterion_7() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let cfg = SeesawConfig::default();
    let mut worst_product = f64::INFINITY;
    let mut worst_local = f64::INFINITY;
    let mut false_positive = false;
    for alpha in [0.0, ALPHA] {
        let (x, y) = spin_flip_moment_pairs(alpha).unwrap();
        let gx = GlobalMoments::symmetric(&x, "M_X");
        let gy = GlobalMoments::symmetric(&y, "M_Y");
        for lambda in [0.25, 0.5, 0.75] {
            let p = WeightedPair::new(lambda, 1.0 - lambda, x.clone(), y.clone()).unwrap();
            let local = seesaw_bound(&p, &cfg);
            let c_sep = compose_sep_bound(&local, &local);
            for _ in 0..1000 {
                let a = random::pure_state(3, &mut rng);
                let b = random::pure_state(3, &mut rng);
                let rho: DensityMatrix = a.tensor(&b).to_density();
                let v = evaluate_witness(&rho, &gx, &gy, lambda, 1.0 - lambda, c_sep).unwrap();
                false_positive |= v.detected && v.margin > 1e-9;
                worst_product = worst_product.min(-v.margin);

                let psi = random::pure_state(3, &mut rng);
                worst_local = worst_local.min(p.value(&psi).unwrap() - local.value);
            }
        }
    }
    outcome(
        !false_positive && worst_product >= -1e-9 && worst_local >= -1e-9,
        format!(
            "min V − c_SEP on product states {worst_product:.3e}, min V − c_local on pure states \
             {worst_local:.3e} (6000 each)"
        ),
    )
}

fn criterion_8() -> Outcome {
    let mut sweep = theta1_sweep(SWEEP_STEPS, SWEEP_THETA2_DEG);
    sweep.extend(theta2_sweep(SWEEP_STEPS, SWEEP_THETA1_DEG));
    let cfg = SampleConfig {
        shots: 20_000,
        seed: 2020,
        trials: 100,
    };
    let records = run_calibration(&sweep, ALPHA, &cfg).unwrap();
    let max_std = records.iter().map(|r| r.v_sampled_std).fold(0.0, f64::max);

    let mut worst_z = 0.0_f64;
    let subset = theta1_sweep(SWEEP_STEPS, SWEEP_THETA2_DEG);
    for seed in 0..100 {
        let cfg = SampleConfig {
            seed,
            ..cfg
        };
        for r in run_calibration(&subset, ALPHA, &cfg).unwrap() {
            let se = (r.v_sampled_std / (cfg.trials as f64).sqrt()).max(1e-12);
            worst_z = worst_z.max((r.v_sampled_mean - r.v_noisy).abs() / se);
        }
    }
    outcome(
        max_std < 0.01 && worst_z < 5.0,
        format!("max per-state std {max_std:.4} (< 0.01), max |mean − exact|/SE {worst_z:.2} (< 5) over 100 seeds"),
    )
}

fn criterion_9() -> Outcome {
    let (px, py) = spin1_povms();
    let (nx, ny) = spin_flip_moment_pairs(ALPHA).unwrap();
    let mut sweep = theta1_sweep(SWEEP_STEPS, SWEEP_THETA2_DEG);
    sweep.extend(theta2_sweep(SWEEP_STEPS, SWEEP_THETA1_DEG));
    let exact: Vec<CalibrationPoint> = sweep
        .iter()
        .map(|&p| {
            let state = make_test_state(p);
            let measured = 0.5 * nx.variance(&state).unwrap() + 0.5 * ny.variance(&state).unwrap();
            CalibrationPoint { state, measured }
        })
        .collect();
    let clean = fit_alpha(spin_flip_channel, &px, &py, &exact, (0.5, 0.5)).unwrap();

    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let normal = rand_distr::Normal::new(0.0, 0.01).unwrap();
    let mut worst = 0.0_f64;
    for _ in 0..100 {
        use rand_distr::Distribution;
        let noisy: Vec<CalibrationPoint> = exact
            .iter()
            .map(|p| CalibrationPoint {
                state: p.state.clone(),
                measured: p.measured + normal.sample(&mut rng),
            })
            .collect();
        let fit = fit_alpha(spin_flip_channel, &px, &py, &noisy, (0.5, 0.5)).unwrap();
        worst = worst.max((fit.alpha - ALPHA).abs());
    }
    outcome(
        (clean.alpha - ALPHA).abs() <= 1e-4 && clean.residual <= 1e-12 && worst <= 0.02,
        format!(
            "noiseless fit α = {:.7} (residual {:.1e}); max |α − 0.2| over 100 noisy fits {worst:.4}",
            clean.alpha, clean.residual
        ),
    )
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 9] = [
        ("1 noiseless separability bound", criterion_1),
        ("2 noise-adapted bound", criterion_2),
        ("3 noisy moment matrices", criterion_3),
        ("4 singlet benchmark", criterion_4),
        ("5 detection windows", criterion_5),
        ("6 seesaw/grid oracle agreement", criterion_6),
        ("7 soundness suite", criterion_7),
        ("8 calibration statistics", criterion_8),
        ("9 noise-fit round trip", criterion_9),
    ];
    let mut failed = 0;
    for (name, run) in criteria {
        let t = Instant::now();
        let o = run();
        let tag = if o.pass { "PASS" } else { "FAIL" };
        println!("[{tag}] {name}: {} ({:.2?})", o.detail, t.elapsed());
        failed += usize::from(!o.pass);
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
