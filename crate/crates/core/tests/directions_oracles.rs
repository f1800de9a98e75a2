use hrigid::directions::{
    classify, deform_direction_set, estimate_profile, sample_direction_set, ArcProfile, Case,
    ClassifierTolerances, SampleBox, DEFAULT_PAIR_BUDGET,
};
use hrigid::{psi, ScalarField};
use proptest::prelude::*;

fn field(src: &str) -> ScalarField {
    ScalarField::parse2(src).unwrap()
}

fn sample(src: &str, n: usize, seed: u64) -> hrigid::directions::DirectionSet {
    sample_direction_set(&field(src), SampleBox::square(2.0), n, seed, DEFAULT_PAIR_BUDGET).unwrap()
}

#[test]
fn sampling_is_deterministic() {
    assert_eq!(sample("sin(x) * y", 150, 9), sample("sin(x) * y", 150, 9));
    assert_ne!(sample("sin(x) * y", 150, 9), sample("sin(x) * y", 150, 10));
}

#[test]
fn pair_budget_caps_samples() {
    let ds = sample_direction_set(&field("x*y"), SampleBox::square(1.0), 500, 1, 1000).unwrap();
    assert_eq!(ds.len(), 2000);
    assert_eq!(ds.meta.pairs_used, 1000);
}

#[test]
fn set_is_closed_under_antipodes() {
    let ds = sample("exp(x) - y^2", 80, 2);
    for pair in ds.samples.chunks(2) {
        assert_eq!(pair[1], pair[0].antipode());
    }
}

#[test]
fn plane_chords_are_orthogonal_to_normal() {
    let ds = sample("1 + 2*x + 3*y", 100, 4);
    let n = nalgebra::Vector3::new(-2.0, -3.0, 1.0);
    let worst = ds.samples.iter().map(|v| v.vec().dot(&n).abs()).fold(0.0, f64::max);
    assert!(worst < 1e-12, "{worst}");
}

#[test]
fn deformation_matches_pointwise_psi_and_composes() {
    let ds = sample("x^2 + y", 60, 5);
    let d = deform_direction_set(&ds, 3.0);
    for (a, b) in ds.samples.iter().zip(&d.samples) {
        assert_eq!(*b, psi(3.0, a));
    }
    let twice = deform_direction_set(&deform_direction_set(&ds, 2.0), 5.0);
    let once = deform_direction_set(&ds, 10.0);
    for (a, b) in twice.samples.iter().zip(&once.samples) {
        assert!((a.vec() - b.vec()).amax() < 1e-12);
    }
    assert_eq!(twice.meta.deformation, 10.0);
}

#[test]
fn deformation_of_field_matches_rescaled_field() {
    // chords of f(c·) over the box shrunk by c are ψ_c of chords of f
    let f = field("x^2 + sin(y)");
    let c = 2.0;
    let big = sample_direction_set(&f, SampleBox::square(2.0), 50, 3, DEFAULT_PAIR_BUDGET).unwrap();
    let small = sample_direction_set(&f.rescaled(c), SampleBox::square(1.0), 50, 3, DEFAULT_PAIR_BUDGET).unwrap();
    let mapped = deform_direction_set(&big, c);
    for (a, b) in mapped.samples.iter().zip(&small.samples) {
        assert!((a.vec() - b.vec()).amax() < 1e-9);
    }
}

fn synthetic(zmax: &[f64]) -> ArcProfile {
    let b = zmax.len();
    let values: Vec<(f64, f64)> = (0..b).map(|k| (-zmax[(k + b / 2) % b], zmax[k])).collect();
    ArcProfile::from_values(&values)
}

#[test]
fn case_d_interval_is_reported() {
    let mut z = vec![1.0; 360];
    z[100..160].iter_mut().for_each(|v| *v = 0.0);
    let label = classify(&synthetic(&z), &ClassifierTolerances::default());
    assert_eq!(label.case, Case::D);
    let iv = label.interval.unwrap();
    assert_eq!(iv.first_bin, 100);
    assert_eq!(iv.bin_count, 60);
    assert!((iv.length - std::f64::consts::PI / 3.0).abs() < 1e-12);
}

#[test]
fn half_turn_zero_run_is_not_case_d() {
    let mut z = vec![1.0; 360];
    z[0..180].iter_mut().for_each(|v| *v = 0.0);
    assert_eq!(classify(&synthetic(&z), &ClassifierTolerances::default()).case, Case::Indeterminate);
}

#[test]
fn case_c_witness() {
    let mut z = vec![1.0; 360];
    z[42] = 0.0;
    let label = classify(&synthetic(&z), &ClassifierTolerances::default());
    assert_eq!(label.case, Case::C);
    assert_eq!(label.witness_bin, Some(42));
}

#[test]
fn sampled_plane_is_case_a() {
    let p = estimate_profile(&sample("3 - x + 0.5*y", 400, 1), 360).unwrap();
    assert_eq!(classify(&p, &ClassifierTolerances::default()).case, Case::A);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn classification_is_rotation_invariant(
        shift in 0usize..360,
        kind in 0usize..4,
        start in 0usize..360,
    ) {
        let mut z = vec![1.0; 360];
        match kind {
            0 => {}
            1 => z[start] = 0.0,
            2 => (0..50).for_each(|k| z[(start + k) % 360] = 0.0),
            _ => z[start] = 0.5,
        }
        let p = synthetic(&z);
        let tol = ClassifierTolerances::default();
        prop_assert_eq!(classify(&p, &tol).case, classify(&p.rotated(shift), &tol).case);
    }
}
