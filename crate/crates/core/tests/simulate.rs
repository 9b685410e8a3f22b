use varwitness::noise::{spin1_povms, spin_flip_povms};
use varwitness::simulate::{theta1_sweep, theta2_sweep, OutcomeDistribution, SWEEP_STEPS};
use varwitness::{
    fit_alpha, joint_outcome_distribution, make_singlet, make_test_state, run_calibration,
    sample_variance_tuple, spin_flip_channel, CalibrationPoint, DensityMatrix, SampleConfig,
    TestStateParams,
};

fn config(shots: u64, trials: usize) -> SampleConfig {
    SampleConfig { shots, seed: 42, trials }
}

#[test]
fn ideal_singlet_samples_zero_variance() {
    let (x, y) = spin1_povms();
    let s = sample_variance_tuple(&make_singlet(), &x, &x, &y, &y, &config(2000, 10)).unwrap();
    assert_eq!((s.d2x, s.d2y), (0.0, 0.0));
    assert!(s.trials.iter().all(|&t| t == (0.0, 0.0)));
}

#[test]
fn noisy_singlet_sampling_concentrates() {
    let (x, y) = spin_flip_povms(0.2).unwrap();
    let s = sample_variance_tuple(&make_singlet(), &x, &x, &y, &y, &config(20_000, 100)).unwrap();
    assert!((s.d2x - 0.48).abs() < 0.01 && (s.d2y - 0.48).abs() < 0.01, "{s:?}");
    assert!(s.d2x_std < 0.02 && s.d2y_std < 0.02);
    assert_eq!(s.trials.len(), 100);
}

#[test]
fn maximally_mixed_state_sampling() {
    let (x, y) = spin1_povms();
    let rho = DensityMatrix::maximally_mixed(9);
    let s = sample_variance_tuple(&rho, &x, &x, &y, &y, &config(20_000, 40)).unwrap();
    assert!((s.d2x - 4.0 / 3.0).abs() < 0.03, "{}", s.d2x);
    assert!((s.d2y - 4.0 / 3.0).abs() < 0.03, "{}", s.d2y);
}

#[test]
fn joint_distribution_of_the_singlet() {
    let (x, _) = spin1_povms();
    let joint = joint_outcome_distribution(&make_singlet(), &x, &x).unwrap();
    assert_eq!(joint.len(), 9);
    let total: f64 = joint.iter().map(|o| o.probability).sum();
    assert!((total - 1.0).abs() < 1e-12);
    for o in &joint {
        if (o.x_a + o.x_b).abs() > 1e-9 {
            assert!(o.probability < 1e-12, "{o:?}");
        }
    }
    let summed = OutcomeDistribution::summed(&joint);
    let occupied = summed.probabilities.iter().filter(|&&p| p > 1e-12).count();
    assert_eq!(occupied, 1);
    assert!(summed.mean().abs() < 1e-12);
}

#[test]
fn joint_distribution_rejects_wrong_dimension() {
    let (x, _) = spin1_povms();
    assert!(joint_outcome_distribution(&make_test_state(TestStateParams::new(10.0, 20.0).unwrap()), &x, &x).is_err());
}

#[test]
fn sampling_is_deterministic_per_seed() {
    let (x, y) = spin_flip_povms(0.1).unwrap();
    let psi = make_singlet();
    let a = sample_variance_tuple(&psi, &x, &x, &y, &y, &config(1000, 8)).unwrap();
    let b = sample_variance_tuple(&psi, &x, &x, &y, &y, &config(1000, 8)).unwrap();
    assert_eq!(a, b);
    let c = sample_variance_tuple(&psi, &x, &x, &y, &y, &SampleConfig { seed: 43, ..config(1000, 8) }).unwrap();
    assert_ne!(a.trials, c.trials);
}

#[test]
fn too_few_shots_is_an_error() {
    let (x, y) = spin1_povms();
    assert!(sample_variance_tuple(&make_singlet(), &x, &x, &y, &y, &config(3, 1)).is_err());
    assert!(sample_variance_tuple(&make_singlet(), &x, &x, &y, &y, &config(100, 0)).is_err());
}

#[test]
fn calibration_without_noise_matches_ideal() {
    let sweep = theta1_sweep(9, 23.3);
    for r in run_calibration(&sweep, 0.0, &config(2000, 5)).unwrap() {
        assert!((r.v_ideal - r.v_noisy).abs() < 1e-12);
        assert!(r.v_ideal >= 7.0 / 32.0 - 1e-9);
    }
}

#[test]
fn calibration_reference_state() {
    let params = TestStateParams::new(90.0, 45.0).unwrap();
    let r = run_calibration(&[params], 0.2, &config(2000, 5)).unwrap();
    assert!((r[0].v_ideal - 0.5).abs() < 1e-12);
    assert!(r[0].v_noisy >= r[0].v_ideal - 1e-12);
}

#[test]
fn calibration_samples_agree_with_exact_values() {
    let sweep = theta2_sweep(SWEEP_STEPS, 28.0);
    let records = run_calibration(&sweep, 0.2, &config(4000, 30)).unwrap();
    assert_eq!(records.len(), SWEEP_STEPS);
    for r in &records {
        let sem = r.v_sampled_std / 30f64.sqrt();
        assert!((r.v_sampled_mean - r.v_noisy).abs() <= 5.0 * sem + 1e-9, "{r:?}");
    }
    assert_eq!(records, run_calibration(&sweep, 0.2, &config(4000, 30)).unwrap());
}

#[test]
fn sweeps_stay_inside_the_open_interval() {
    let s = theta1_sweep(SWEEP_STEPS, 23.3);
    assert_eq!(s.len(), SWEEP_STEPS);
    assert!(s.iter().all(|p| p.theta1 > 0.0 && p.theta1 < 180.0 && p.theta2 == 23.3));
    assert!(s.windows(2).all(|w| w[0].theta1 < w[1].theta1));
}

#[test]
fn fit_recovers_zero_noise_from_exact_data() {
    let (px, py) = spin1_povms();
    let sweep = theta1_sweep(15, 23.3);
    let records = run_calibration(&sweep, 0.0, &config(1000, 2)).unwrap();
    let points: Vec<CalibrationPoint> = sweep
        .iter()
        .zip(&records)
        .map(|(&p, r)| CalibrationPoint { state: make_test_state(p), measured: r.v_ideal })
        .collect();
    let fit = fit_alpha(spin_flip_channel, &px, &py, &points, (0.5, 0.5)).unwrap();
    assert!(fit.alpha.abs() < 1e-4, "{fit:?}");
    assert!(fit.residual < 1e-12);
    assert_eq!(fit.per_state_residuals.len(), 15);
}

#[test]
fn fit_recovers_known_noise_from_exact_data() {
    let (px, py) = spin1_povms();
    let sweep = theta2_sweep(15, 28.0);
    let records = run_calibration(&sweep, 0.3, &config(1000, 2)).unwrap();
    let points: Vec<CalibrationPoint> = sweep
        .iter()
        .zip(&records)
        .map(|(&p, r)| CalibrationPoint { state: make_test_state(p), measured: r.v_noisy })
        .collect();
    let fit = fit_alpha(spin_flip_channel, &px, &py, &points, (0.5, 0.5)).unwrap();
    assert!((fit.alpha - 0.3).abs() < 1e-5, "{fit:?}");
}
