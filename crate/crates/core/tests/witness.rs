use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use varwitness::noise::spin_flip_moment_pairs;
use varwitness::witness::{witness_report, LocalMeasurements};
use varwitness::{
    build_global_moments, detection_window, evaluate_witness, evaluate_witness_from_tuple, make_singlet,
    random, BoundCurve, GlobalMoments, MomentPair, SeesawConfig,
};

fn globals(alpha: f64) -> (GlobalMoments, GlobalMoments) {
    let (x, y) = spin_flip_moment_pairs(alpha).unwrap();
    (build_global_moments(&x), build_global_moments(&y))
}

fn curve(alpha: f64, n: usize) -> BoundCurve {
    let (x, y) = spin_flip_moment_pairs(alpha).unwrap();
    let m = LocalMeasurements { x, y };
    BoundCurve::compute(&m, &m, n, &SeesawConfig::default()).unwrap()
}

#[test]
fn singlet_variances() {
    let singlet = make_singlet();
    let (gx, gy) = globals(0.0);
    assert!(gx.variance(&singlet).unwrap().abs() < 1e-12);
    assert!(gy.variance(&singlet).unwrap().abs() < 1e-12);
    let (nx, ny) = globals(0.2);
    assert!((nx.variance(&singlet).unwrap() - 0.48).abs() < 1e-12);
    assert!((ny.variance(&singlet).unwrap() - 0.48).abs() < 1e-12);
}

#[test]
fn variances_add_on_product_states() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for alpha in [0.0, 0.2] {
        let (x, _) = spin_flip_moment_pairs(alpha).unwrap();
        let g = build_global_moments(&x);
        for _ in 0..50 {
            let a = random::pure_state(3, &mut rng);
            let b = random::pure_state(3, &mut rng);
            let ab = a.tensor(&b);
            let sum = x.variance(&a).unwrap() + x.variance(&b).unwrap();
            assert!((g.variance(&ab).unwrap() - sum).abs() < 1e-10);
        }
    }
}

#[test]
fn mixed_parties_add_too() {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let a_pair = random::povm(3, 4, &mut rng).moment_pair().unwrap();
    let b_pair = random::povm(2, 3, &mut rng).moment_pair().unwrap();
    let g = GlobalMoments::from_parties(&a_pair, &b_pair, "mixed");
    assert_eq!(g.dim(), 6);
    for _ in 0..20 {
        let a = random::pure_state(3, &mut rng);
        let b = random::pure_state(2, &mut rng);
        let sum = a_pair.variance(&a).unwrap() + b_pair.variance(&b).unwrap();
        assert!((g.variance(&a.tensor(&b)).unwrap() - sum).abs() < 1e-10);
    }
}

#[test]
fn verdict_examples() {
    let singlet = make_singlet();
    let (gx, gy) = globals(0.2);
    let v = evaluate_witness(&singlet, &gx, &gy, 0.5, 0.5, 0.7614).unwrap();
    assert!(v.detected);
    assert!((v.v_value - 0.48).abs() < 1e-12);
    assert!((v.margin - (0.7614 - 0.48)).abs() < 1e-12);

    let at_bound = evaluate_witness_from_tuple(0.5, 0.5, 0.5, 0.5, 0.5).unwrap();
    assert!(!at_bound.detected);
    assert!(!evaluate_witness_from_tuple(1.0, 1.0, 0.5, 0.5, 0.4375).unwrap().detected);
    assert!(evaluate_witness_from_tuple(-0.1, 0.0, 0.5, 0.5, 1.0).is_err());
}

#[test]
fn verdict_json_keys() {
    let v = evaluate_witness_from_tuple(0.2, 0.3, 0.5, 0.5, 0.4375).unwrap();
    let json = serde_json::to_value(v).unwrap();
    for key in ["lambda", "mu", "V_value", "c_sep", "detected", "margin"] {
        assert!(json.get(key).is_some(), "missing {key}");
    }
}

#[test]
fn singlet_windows_with_noise() {
    let adapted = curve(0.2, 201);
    let noiseless = curve(0.0, 201);
    let w = detection_window(0.48, 0.48, |l| adapted.eval(l), 1e-3).unwrap();
    assert_eq!(w.len(), 1);
    assert!(w[0].lambda_lo < 0.5 && w[0].lambda_hi > 0.5);
    assert!(detection_window(0.48, 0.48, |l| noiseless.eval(l), 1e-3).unwrap().is_empty());
    assert!(detection_window(10.0, 10.0, |l| adapted.eval(l), 1e-3).unwrap().is_empty());
}

#[test]
fn noiseless_singlet_window_spans_interior() {
    let c = curve(0.0, 201);
    let w = detection_window(0.0, 0.0, |l| c.eval(l), 1e-3).unwrap();
    assert_eq!(w.len(), 1);
    assert!(w[0].lambda_lo < 0.01 && w[0].lambda_hi > 0.99);
}

#[test]
fn bound_curve_is_symmetric_under_swapping_roles() {
    // X and Y are related by a rotation, so c(λ) = c(1 − λ)
    let c = curve(0.2, 41);
    for (k, v) in c.values.iter().enumerate() {
        let mirror = c.values[c.values.len() - 1 - k];
        assert!((v - mirror).abs() < 1e-7, "knot {k}");
    }
}

#[test]
fn report_rows_follow_the_curves() {
    let noiseless = curve(0.0, 21);
    let adapted = curve(0.2, 21);
    let r = witness_report(0.48, 0.48, 0.2, &noiseless, &adapted, 1e-3).unwrap();
    assert_eq!(r.rows.len(), 21);
    assert!(r.detected());
    assert!(r.windows_noiseless.is_empty());
    for row in &r.rows {
        assert!((row.v - 0.48).abs() < 1e-12);
        assert_eq!(row.detected_adapted, row.c_adapted > row.v);
        assert!(!row.detected_noiseless);
    }
}

#[test]
fn global_moments_have_zero_variance_on_constant_outcomes() {
    let id = varwitness::HermitianOperator::identity(3);
    let trivial = MomentPair::new(id.scale(2.0), id.scale(4.0)).unwrap();
    let g = build_global_moments(&trivial);
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let psi = random::pure_state(9, &mut rng);
    assert!(g.variance(&psi).unwrap().abs() < 1e-12);
}
