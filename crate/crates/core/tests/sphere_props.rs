use hrigid::sphere::{kabsch, psi, rotation_about_x, rotation_from_vector, Mat3, RigidIsometry, UnitVec3, Vec3};
use proptest::prelude::*;

fn unit() -> impl Strategy<Value = UnitVec3> {
    (-1.0f64..1.0, -1.0f64..1.0, -1.0f64..1.0)
        .prop_filter("away from zero", |(x, y, z)| x * x + y * y + z * z > 1e-3)
        .prop_map(|(x, y, z)| UnitVec3::from_xyz(x, y, z).unwrap())
}

fn scale() -> impl Strategy<Value = f64> {
    (-3.0f64..3.0).prop_map(|t| 10f64.powf(t))
}

fn rotation() -> impl Strategy<Value = Mat3> {
    (-3.0f64..3.0, -3.0f64..3.0, -3.0f64..3.0).prop_map(|(a, b, c)| rotation_from_vector(&Vec3::new(a, b, c)))
}

fn close(a: &UnitVec3, b: &UnitVec3, tol: f64) -> bool {
    (a.vec() - b.vec()).amax() <= tol
}

proptest! {
    #[test]
    fn psi_composes(v in unit(), c1 in scale(), c2 in scale()) {
        prop_assert!(close(&psi(c1, &psi(c2, &v)), &psi(c1 * c2, &v), 1e-12));
    }

    #[test]
    fn psi_identity_and_inverse(v in unit(), c in scale()) {
        prop_assert!(close(&psi(1.0, &v), &v, 1e-15));
        prop_assert!(close(&psi(1.0 / c, &psi(c, &v)), &v, 1e-12));
    }

    #[test]
    fn psi_commutes_with_antipode(v in unit(), c in scale()) {
        prop_assert!(close(&psi(c, &v.antipode()), &psi(c, &v).antipode(), 1e-15));
    }

    #[test]
    fn psi_keeps_azimuth_and_hemisphere(v in unit(), c in scale()) {
        let p = psi(c, &v);
        prop_assert!((p.vec().norm() - 1.0).abs() <= 1e-14);
        prop_assert_eq!(p.z().signum(), v.z().signum());
        if let (Some(a), Some(b)) = (v.azimuth(), p.azimuth()) {
            let d = (a - b).abs();
            prop_assert!(d <= 1e-12 || (d - 2.0 * std::f64::consts::PI).abs() <= 1e-12);
        }
    }

    #[test]
    fn equator_is_fixed(t in -3.2f64..3.2, c in scale()) {
        let e = UnitVec3::from_xyz(t.cos(), t.sin(), 0.0).unwrap();
        prop_assert!(close(&psi(c, &e), &e, 1e-15));
    }

    #[test]
    fn isometry_json_roundtrip(r in rotation(), t in prop::array::uniform3(-10.0f64..10.0)) {
        let iso = RigidIsometry::new(r, Vec3::from(t)).unwrap();
        let text = serde_json::to_string(&iso).unwrap();
        let back: RigidIsometry = serde_json::from_str(&text).unwrap();
        prop_assert_eq!(back, iso);
    }

    #[test]
    fn compose_with_inverse_is_identity(r in rotation(), t in prop::array::uniform3(-10.0f64..10.0)) {
        let iso = RigidIsometry::new(r, Vec3::from(t)).unwrap();
        let id = iso.compose(&iso.inverse());
        prop_assert!((id.ort() - Mat3::identity()).amax() <= 1e-12);
        prop_assert!(id.trans().amax() <= 1e-12);
    }

    #[test]
    fn kabsch_recovers_motion(r in rotation(), t in prop::array::uniform3(-5.0f64..5.0)) {
        let iso = RigidIsometry::new(r, Vec3::from(t)).unwrap();
        let src: Vec<Vec3> = (0..12)
            .map(|k| {
                let k = k as f64;
                Vec3::new(k.sin() * 3.0, (1.7 * k).cos() * 2.0, 0.3 * k - 1.0)
            })
            .collect();
        let dst: Vec<Vec3> = src.iter().map(|p| iso.apply(p)).collect();
        let got = kabsch(&src, &dst, 1.0);
        for (p, q) in src.iter().zip(&dst) {
            prop_assert!((got.apply(p) - q).amax() <= 1e-9);
        }
    }
}

#[test]
fn invalid_isometry_json_rejected() {
    let text = r#"{"ort": [2, 0, 0, 0, 1, 0, 0, 0, 1], "trans": [0, 0, 0]}"#;
    assert!(serde_json::from_str::<RigidIsometry>(text).is_err());
}

#[test]
fn rotation_about_x_fixes_axis() {
    let r = rotation_about_x(0.7);
    let x = Vec3::new(1.0, 0.0, 0.0);
    assert!((r.apply(&x) - x).amax() < 1e-15);
    assert!((r.determinant() - 1.0).abs() < 1e-14);
}
