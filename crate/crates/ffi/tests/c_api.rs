use std::ffi::{CStr, CString};
use std::path::Path;
use std::process::Command;
use std::ptr;

use hrigid_ffi::*;

fn last_error() -> String {
    unsafe { CStr::from_ptr(hr_last_error_message()) }
        .to_string_lossy()
        .into_owned()
}

fn parse(src: &str, arity: i32) -> *mut HrField {
    let s = CString::new(src).unwrap();
    let mut f = ptr::null_mut();
    let st = unsafe { hr_field_parse(s.as_ptr(), arity, &mut f) };
    assert_eq!(st, HrStatus::Ok, "{}", last_error());
    f
}

fn take_string(p: *mut std::ffi::c_char) -> String {
    let s = unsafe { CStr::from_ptr(p) }.to_str().unwrap().to_owned();
    unsafe { hr_string_free(p) };
    s
}

#[test]
fn field_roundtrip() {
    let f = parse("x^2 + 3*y", 2);
    let mut v = 0.0;
    assert_eq!(unsafe { hr_field_eval(f, 2.0, 1.0, &mut v) }, HrStatus::Ok);
    assert_eq!(v, 7.0);
    let st = unsafe { hr_field_eval(f, 2.0, 1.0, ptr::null_mut()) };
    assert_eq!(st, HrStatus::NullPointer);
    unsafe { hr_field_free(f) };

    let g = parse("ln(x)", 1);
    assert_eq!(unsafe { hr_field_eval(g, -1.0, 0.0, &mut v) }, HrStatus::DomainError);
    assert!(!last_error().is_empty());
    unsafe { hr_field_free(g) };
}

#[test]
fn parse_errors() {
    let mut f = ptr::null_mut();
    let bad = CString::new("x +* 2").unwrap();
    assert_eq!(unsafe { hr_field_parse(bad.as_ptr(), 2, &mut f) }, HrStatus::ParseError);
    assert!(f.is_null());
    let y = CString::new("y").unwrap();
    assert_eq!(unsafe { hr_field_parse(y.as_ptr(), 1, &mut f) }, HrStatus::ParseError);
    assert_eq!(unsafe { hr_field_parse(y.as_ptr(), 3, &mut f) }, HrStatus::InvalidArgument);
    assert_eq!(unsafe { hr_field_parse(ptr::null(), 2, &mut f) }, HrStatus::NullPointer);
    unsafe { hr_field_free(ptr::null_mut()) };
}

#[test]
fn psi_matches_formula() {
    let v = [1.0, 2.0, 2.0];
    let mut out = [0.0; 3];
    assert_eq!(unsafe { hr_psi(0.5, v.as_ptr(), out.as_mut_ptr()) }, HrStatus::Ok);
    let n = (1.0f64 + 4.0 + 1.0).sqrt();
    let want = [1.0 / n, 2.0 / n, 1.0 / n];
    for k in 0..3 {
        assert!((out[k] - want[k]).abs() < 1e-15);
    }
    assert_eq!(unsafe { hr_psi(-1.0, v.as_ptr(), out.as_mut_ptr()) }, HrStatus::InvalidArgument);
    let zero = [0.0; 3];
    assert_eq!(unsafe { hr_psi(2.0, zero.as_ptr(), out.as_mut_ptr()) }, HrStatus::InvalidArgument);
}

#[test]
fn direction_set_lifecycle() {
    let f = parse("1 + 2*x + 3*y", 2);
    let mut ds = ptr::null_mut();
    let st = unsafe { hr_direction_set_sample(f, -1.0, 1.0, -1.0, 1.0, 200, 7, &mut ds) };
    assert_eq!(st, HrStatus::Ok, "{}", last_error());
    let len = unsafe { hr_direction_set_len(ds) };
    assert_eq!(len, 200 * 199);
    let mut v = [0.0; 3];
    assert_eq!(unsafe { hr_direction_set_get(ds, 0, v.as_mut_ptr()) }, HrStatus::Ok);
    let norm = v.iter().map(|t| t * t).sum::<f64>().sqrt();
    assert!((norm - 1.0).abs() < 1e-12);
    // chords of a plane are orthogonal to its normal
    assert!((-2.0 * v[0] - 3.0 * v[1] + v[2]).abs() < 1e-12);
    assert_eq!(unsafe { hr_direction_set_get(ds, len, v.as_mut_ptr()) }, HrStatus::InvalidArgument);

    let mut case = HrCase::Indeterminate;
    assert_eq!(unsafe { hr_direction_set_classify(ds, 360, &mut case) }, HrStatus::Ok);
    assert_eq!(case, HrCase::A);
    assert_eq!(unsafe { hr_direction_set_classify(ds, 4, &mut case) }, HrStatus::InvalidArgument);
    unsafe { hr_direction_set_free(ds) };
    assert_eq!(unsafe { hr_direction_set_len(ptr::null()) }, 0);

    let st = unsafe { hr_direction_set_sample(f, -1.0, 1.0, -1.0, 1.0, 1, 7, &mut ds) };
    assert_eq!(st, HrStatus::InvalidArgument);
    assert!(ds.is_null());
    unsafe { hr_field_free(f) };
}

#[test]
fn funceq_json() {
    let entries = hrigid::funceq::power_family_entries(2.0, 1.0, 0.5, &[1.5, 2.0, 3.0, 5.0]);
    let spec = hrigid::funceq::SystemSpec {
        g: "2 + 3 * abs(x - 1)^0.5".into(),
        grid: Default::default(),
        entries,
    };
    let json = CString::new(serde_json::to_string(&spec).unwrap()).unwrap();
    let mut out = ptr::null_mut();
    let st = unsafe { hr_funceq_classify_json(json.as_ptr(), &mut out) };
    assert_eq!(st, HrStatus::Ok, "{}", last_error());
    let verdict: serde_json::Value = serde_json::from_str(&take_string(out)).unwrap();
    assert_eq!(verdict["kind"], "TwoSidedPower");

    let bad = CString::new("{").unwrap();
    let st = unsafe { hr_funceq_classify_json(bad.as_ptr(), &mut out) };
    assert_eq!(st, HrStatus::ParseError);
    assert!(out.is_null());
}

#[test]
fn rotation_check() {
    let g = parse("x^2", 1);
    let mut r = HrRotationResult { alpha: 0.0, w: 0.0, max_error: 0.0 };
    let st = unsafe { hr_rotation_check(g, 1.0, 2.0, -2.0, 2.0, 1e-3, &mut r) };
    assert_eq!(st, HrStatus::Ok, "{}", last_error());
    assert!((r.w - (5.0f64 / 8.0).sqrt()).abs() < 1e-12);
    assert!(r.max_error <= 1e-6);
    let st = unsafe { hr_rotation_check(g, 0.0, 2.0, -2.0, 2.0, 1e-3, &mut r) };
    assert_eq!(st, HrStatus::InvalidArgument);
    unsafe { hr_field_free(g) };

    let two = parse("x + y", 2);
    let st = unsafe { hr_rotation_check(two, 1.0, 2.0, -2.0, 2.0, 1e-3, &mut r) };
    assert_eq!(st, HrStatus::InvalidArgument);
    unsafe { hr_field_free(two) };
}

#[test]
fn rigidity_report() {
    let f = parse("1 + 2*x + 3*y", 2);
    let cfg = hrigid::rigidity::RigidityConfig {
        n: 300,
        ..Default::default()
    };
    let cfg = CString::new(serde_json::to_string(&cfg).unwrap()).unwrap();
    let scales = [2.0];
    let mut out = ptr::null_mut();
    let st = unsafe { hr_rigidity_json(f, scales.as_ptr(), 1, cfg.as_ptr(), &mut out) };
    assert_eq!(st, HrStatus::Ok, "{}", last_error());
    let report: serde_json::Value = serde_json::from_str(&take_string(out)).unwrap();
    assert_eq!(report["verdicts"][0]["decision"], "Rigid");

    let st = unsafe { hr_rigidity_json(f, scales.as_ptr(), 0, ptr::null(), &mut out) };
    assert_eq!(st, HrStatus::InvalidArgument);
    unsafe { hr_field_free(f) };
}

#[test]
fn header_declares_api() {
    let header = Path::new(env!("CARGO_MANIFEST_DIR")).join("include/hrigid.h");
    let text = std::fs::read_to_string(&header).unwrap();
    for sym in [
        "hr_last_error_message",
        "hr_field_parse",
        "hr_field_eval",
        "hr_field_free",
        "hr_psi",
        "hr_direction_set_sample",
        "hr_direction_set_len",
        "hr_direction_set_get",
        "hr_direction_set_free",
        "hr_direction_set_classify",
        "hr_funceq_classify_json",
        "hr_rotation_check",
        "hr_rigidity_json",
        "hr_string_free",
        "HR_STATUS_OK",
        "HR_CASE_INDETERMINATE",
        "HrRotationResult",
    ] {
        assert!(text.contains(sym), "{sym} missing from header");
    }

    // compile a translation unit against the header when a C compiler exists
    let dir = tempfile_dir();
    let src = dir.join("use_header.c");
    std::fs::write(
        &src,
        "#include \"hrigid.h\"\nint main(void) { HrField *f = 0; \
         return hr_field_parse(\"x\", 2, &f) == HR_STATUS_OK ? 0 : 1; }\n",
    )
    .unwrap();
    let inc = header.parent().unwrap();
    match Command::new("cc").arg("-fsyntax-only").arg("-I").arg(inc).arg(&src).output() {
        Ok(o) => assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr)),
        Err(_) => eprintln!("no C compiler; skipped syntax check"),
    }
    let _ = std::fs::remove_dir_all(dir);
}

fn tempfile_dir() -> std::path::PathBuf {
    let dir = std::env::temp_dir().join(format!("hrigid-ffi-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    dir
}
