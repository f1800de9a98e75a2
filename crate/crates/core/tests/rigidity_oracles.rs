use hrigid::directions::{sample_direction_set, SampleBox, DEFAULT_PAIR_BUDGET};
use hrigid::funceq::Grid;
use hrigid::rigidity::{
    alignment_rms, direction_obstruction, find_isometry, full_rigidity_pipeline, min_max_separation,
    rotation_lemma_check, sample_graph, scale_consistency, subcase_a2_fit, subcase_a2_reduce,
    translation_test, AlignmentOptions, Decision, RigidityConfig, RigidityError,
    RotationCheckOptions, TranslationOptions,
};
use hrigid::sphere::{rotation_from_vector, Mat3, RigidIsometry, Vec3};
use hrigid::ScalarField;
use proptest::prelude::*;

fn field(src: &str) -> ScalarField {
    ScalarField::parse2(src).unwrap()
}

fn g1(src: &str) -> ScalarField {
    ScalarField::parse1(src).unwrap()
}

fn motion(w: [f64; 3], t: [f64; 3]) -> RigidIsometry {
    RigidIsometry::new(rotation_from_vector(&Vec3::from(w)), Vec3::from(t)).unwrap()
}

/// Rotation taking unit `a` to unit `b` (Rodrigues about `a × b`).
fn rotation_between(a: &Vec3, b: &Vec3) -> Mat3 {
    let axis = a.cross(b);
    let s = axis.norm();
    let angle = s.atan2(a.dot(b));
    rotation_from_vector(&(axis / s * angle))
}

#[test]
fn recovers_known_motion() {
    let f = field("exp(x/2) + sin(y)");
    let b = SampleBox::square(2.0);
    let src = sample_graph(&f, 1.0, b, 400, 3).unwrap();
    let iso = motion([0.3, -0.2, 0.5], [1.0, -2.0, 0.5]);
    let fit = find_isometry(&src, &src.transformed(&iso)).unwrap();
    assert!(fit.rms <= 1e-9, "{}", fit.rms);
    for p in src.points() {
        assert!((fit.isometry.apply(p) - iso.apply(p)).amax() <= 1e-6);
    }
}

#[test]
fn plane_alignment_matches_explicit_isometry() {
    let f = field("1 + 2*x + 3*y");
    let b = SampleBox::square(5.0);
    let src = sample_graph(&f, 1.0, b, 800, 0).unwrap();
    let tgt = sample_graph(&f, 2.0, b, 800, 0).unwrap();
    let n1 = Vec3::new(-2.0, -3.0, 1.0).normalize();
    let n2 = Vec3::new(-4.0, -6.0, 1.0).normalize();
    let r = rotation_between(&n1, &n2);
    let p = Vec3::new(0.0, 0.0, 1.0);
    let oracle = RigidIsometry::new(r, p - r * p).unwrap();
    let oracle_rms = alignment_rms(&src, &tgt, &oracle, &AlignmentOptions::default());
    assert!(oracle_rms <= 1e-9, "{oracle_rms}");
    let fit = find_isometry(&src, &tgt).unwrap();
    assert!(fit.rms <= 1e-6, "{}", fit.rms);
}

#[test]
fn rms_is_invariant_under_common_motion() {
    let f = field("exp(x)");
    let b = SampleBox::square(3.0);
    let src = sample_graph(&f, 1.0, b, 400, 0).unwrap();
    let tgt = sample_graph(&f, 2.0, b, 400, 0).unwrap();
    let opts = AlignmentOptions::default();
    let iso = find_isometry(&src, &tgt).unwrap().isometry;
    let before = alignment_rms(&src, &tgt, &iso, &opts);
    for (w, t) in [([0.1, 0.2, 0.3], [1.0, 2.0, 3.0]), ([-1.0, 0.5, 2.0], [-4.0, 0.0, 7.0])] {
        let m = motion(w, t);
        let moved = m.compose(&iso).compose(&m.inverse());
        let after = alignment_rms(&src.transformed(&m), &tgt.transformed(&m), &moved, &opts);
        assert!((after - before).abs() <= 1e-10, "{before} vs {after}");
    }

    let plane = field("1 + 2*x + 3*y");
    let b = SampleBox::square(5.0);
    let src = sample_graph(&plane, 1.0, b, 600, 0).unwrap();
    let tgt = sample_graph(&plane, 5.0, b, 600, 0).unwrap();
    let base = find_isometry(&src, &tgt).unwrap().rms;
    let m = motion([0.7, -0.4, 1.1], [3.0, -1.0, 2.0]);
    let moved = find_isometry(&src.transformed(&m), &tgt.transformed(&m)).unwrap().rms;
    assert!((base - moved).abs() <= 1e-10, "{base} vs {moved}");
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(8))]

    #[test]
    fn obstruction_vanishes_at_unit_scale(k in 0usize..4, seed in 0u64..100) {
        let src = ["x^2 + y", "exp(x) * cos(y)", "7", "x*y"][k];
        let ds = sample_direction_set(&field(src), SampleBox::square(1.0), 120, seed, DEFAULT_PAIR_BUDGET).unwrap();
        let obs = direction_obstruction(&ds, 1.0).unwrap();
        prop_assert!(obs.residual <= 1e-12);
        prop_assert_eq!(obs.ort, RigidIsometry::identity());
    }

    #[test]
    fn scale_invariant_fields_pass_translation(k in 0usize..3, c in 0.2f64..20.0) {
        let src = ["x / sqrt(x^2 + y^2)", "(x^2 - y^2) / (x^2 + y^2)", "arctan(y / x)"][k];
        let b = SampleBox::square(2.0);
        let fit = translation_test(&field(src), c, &b, &b, &TranslationOptions::default());
        prop_assert!(fit.residual <= 1e-12, "{} {}", src, fit.residual);
        prop_assert!(fit.offset.iter().all(|v| v.abs() <= 1e-12), "{:?}", fit.offset);
    }
}

#[test]
fn constant_direction_set_obstruction_is_zero() {
    let ds = sample_direction_set(&field("7"), SampleBox::square(2.0), 200, 0, DEFAULT_PAIR_BUDGET).unwrap();
    for c in [2.0, 10.0] {
        let obs = direction_obstruction(&ds, c).unwrap();
        assert!(obs.residual <= 1e-10);
        assert_eq!(obs.ort, RigidIsometry::identity());
    }
}

#[test]
fn parabola_obstruction_is_large() {
    let ds = sample_direction_set(&field("x^2"), SampleBox::square(1.0), 600, 0, DEFAULT_PAIR_BUDGET).unwrap();
    let obs = direction_obstruction(&ds, 10.0).unwrap();
    assert!(obs.residual >= 0.05, "{}", obs.residual);
}

#[test]
fn translation_of_linear_field_matches_closed_form() {
    // |f(cx) − f(x − u) − w| = |(c − 1)x + u − w|; the best w leaves half of
    // (c − 1)·(grid x-range)
    let opts = TranslationOptions::default();
    let n = opts.grid_points as f64;
    for (c, half) in [(2.0, 2.0), (5.0, 1.0), (0.5, 3.0)] {
        let b = SampleBox::square(half);
        let fit = translation_test(&field("x"), c, &b, &b, &opts);
        let oracle = 0.5 * (c - 1.0f64).abs() * 2.0 * half * (n - 1.0) / n;
        assert!((fit.residual - oracle).abs() <= 1e-9 * oracle.max(1.0), "{} vs {oracle}", fit.residual);
    }
}

#[test]
fn any_field_passes_translation_at_unit_scale() {
    let b = SampleBox::square(1.0);
    let fit = translation_test(&field("x^2 + y^2"), 1.0, &b, &b, &TranslationOptions::default());
    assert_eq!(fit.residual, 0.0);
    assert_eq!(fit.offset, [0.0; 3]);
}

#[test]
fn rotation_check_unit_scale_and_constant() {
    // c = 1: α = 0 and the graph meets z = 0 on y = −g(x)/d
    let r = rotation_lemma_check(&g1("3 - 2*x"), 1.5, 1.0, -2.0, 2.0, &RotationCheckOptions::default()).unwrap();
    assert_eq!(r.alpha, 0.0);
    assert!((r.w - 1.0 / 1.5).abs() <= 1e-15);
    assert!(r.max_error <= 1e-10, "{}", r.max_error);
    let r = rotation_lemma_check(&g1("4"), 2.0, 3.0, -2.0, 2.0, &RotationCheckOptions::default()).unwrap();
    assert!(r.max_error <= 1e-10, "{}", r.max_error);
}

#[test]
fn rotation_check_converges_first_order_or_better() {
    let g = g1("x^2");
    let mut last = f64::INFINITY;
    for step in [1e-3, 5e-4, 2.5e-4] {
        let opts = RotationCheckOptions {
            fiber_step: step,
            ..Default::default()
        };
        let e = rotation_lemma_check(&g, 1.0, 2.0, -2.0, 2.0, &opts).unwrap().max_error;
        assert!(e <= 0.5 * last, "{e} after {last}");
        last = e;
    }
}

#[test]
fn rotation_check_rejects_zero_slope() {
    let err = rotation_lemma_check(&g1("x^2"), 0.0, 2.0, -2.0, 2.0, &RotationCheckOptions::default());
    assert!(err.is_err());
}

#[test]
fn a2_constant_fits_exactly() {
    let fit = subcase_a2_fit(&g1("5"), 1.0, &[2.0, 3.0, 7.0], &Grid::default()).unwrap();
    assert!(fit.max_residual() <= 1e-10);
    for e in fit.system.entries() {
        let h = (2.0 / (e.c * e.c + 1.0f64)).sqrt();
        assert!((e.h - h).abs() <= 1e-15);
        assert!((e.v - 5.0 * (1.0 - h)).abs() <= 1e-10);
    }
}

#[test]
fn a2_affine_residual_matches_oracle() {
    // g = 1 + 2x: misfit (b(1 − h·c))·x + const, so after removing the best
    // constant the max over [−10, 10] is 10·|b|·|1 − h·c|
    let d = 0.7;
    let fit = subcase_a2_fit(&g1("1 + 2*x"), d, &[2.0, 3.0], &Grid::default()).unwrap();
    for &(c, r) in &fit.residuals {
        let h = ((d * d + 1.0) / ((c * d) * (c * d) + 1.0)).sqrt();
        let oracle = 10.0 * 2.0 * (1.0 - h * c).abs();
        assert!((r - oracle).abs() <= 1e-9 * oracle, "c={c}: {r} vs {oracle}");
    }
}

#[test]
fn a2_parabola_cannot_be_fitted() {
    let grid = Grid::default();
    let g = g1("x^2");
    let c = 2.0;
    let h = (2.0f64 / 5.0).sqrt();
    // brute-force min over u of the max-norm misfit with the best constant
    let xs = grid.points();
    let mut oracle = f64::INFINITY;
    for k in 0..=4000 {
        let u = -40.0 + 0.02 * k as f64;
        let r: Vec<f64> = xs.iter().map(|&x| x * x - h * (c * x + u).powi(2)).collect();
        let (lo, hi) = r.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| (a.min(v), b.max(v)));
        oracle = oracle.min(0.5 * (hi - lo));
    }
    let fit = subcase_a2_fit(&g, 1.0, &[c], &grid).unwrap();
    assert!(fit.max_residual() >= oracle - 1e-9, "{} < {oracle}", fit.max_residual());
    assert!(oracle > 1.0);
    match subcase_a2_reduce(&g, 1.0, &[c], &grid, 1e-6) {
        Err(RigidityError::FitFailure { c: fc, .. }) => assert_eq!(fc, c),
        other => panic!("expected FitFailure, got {other:?}"),
    }
}

#[test]
fn min_max_separation_scales_down() {
    for src in ["x", "sin(x) + 2*y", "x - y"] {
        let s = min_max_separation(&field(src), 3.0, 1.0, 201, 1e-9).unwrap();
        assert!(s.original > 0.0);
        assert!((s.scaled - s.original / 3.0).abs() <= 1e-9, "{src}: {s:?}");
    }
}

fn small_config() -> RigidityConfig {
    RigidityConfig {
        sample_box: SampleBox::square(3.0),
        n: 500,
        ..Default::default()
    }
}

#[test]
fn scale_normalization_agrees() {
    let cfg = small_config();
    let plane = scale_consistency(&field("1 + 2*x + 3*y"), 2.0, 6.0, &cfg).unwrap();
    assert_eq!(plane.normalized, Decision::Rigid);
    assert_eq!(plane.direct, Decision::Rigid);
    let e = scale_consistency(&field("exp(x)"), 1.0, 2.0, &cfg).unwrap();
    assert_eq!(e.normalized, e.direct);
    assert_eq!(e.direct, Decision::NotRigid);
}

#[test]
fn constant_field_is_rigid_with_zero_translation_residual() {
    let report = full_rigidity_pipeline(&field("7"), &[2.0], &small_config()).unwrap();
    assert_eq!(report.summary.decision, Decision::Rigid);
    assert_eq!(report.verdicts[0].translation.residual, 0.0);
}

#[test]
fn plane_parameters_are_recovered() {
    let cfg = RigidityConfig {
        sample_box: SampleBox::square(5.0),
        n: 400,
        ..Default::default()
    };
    let report = full_rigidity_pipeline(&field("1 + 2*x + 3*y"), &[2.0], &cfg).unwrap();
    let p = report.summary.plane_fit;
    assert!((p.a - 1.0).abs() <= 1e-9 && (p.b - 2.0).abs() <= 1e-9 && (p.d - 3.0).abs() <= 1e-9);
    assert!(p.residual <= 1e-9);
    assert!((report.summary.split_d.unwrap() - 3.0).abs() <= 1e-9);
}

#[test]
fn invalid_scales_rejected() {
    let f = field("x");
    assert!(full_rigidity_pipeline(&f, &[], &small_config()).is_err());
    assert!(full_rigidity_pipeline(&f, &[0.0], &small_config()).is_err());
}
