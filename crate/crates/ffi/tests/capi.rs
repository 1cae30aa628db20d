use hopres_ffi::*;
use std::ffi::{c_char, CString};
use std::ptr;

fn parse(text: &str) -> *mut HopresProfile {
    let c = CString::new(text).unwrap();
    let mut p = ptr::null_mut();
    assert_eq!(unsafe { hopres_profile_parse(c.as_ptr(), &mut p) }, HopresStatus::Ok);
    assert!(!p.is_null());
    p
}

fn last_error() -> String {
    let mut buf = vec![0 as c_char; 256];
    let n = unsafe { hopres_last_error(buf.as_mut_ptr(), buf.len()) };
    let s = unsafe { std::ffi::CStr::from_ptr(buf.as_ptr()) }.to_str().unwrap().to_string();
    assert_eq!(s.len(), n.min(255));
    s
}

#[test]
fn profile_round_trip() {
    let p = parse("d1(psi)");
    let mut z = HopresComplex { re: f64::NAN, im: f64::NAN };
    assert_eq!(unsafe { hopres_profile_eval(p, 2.0, &mut z) }, HopresStatus::Ok);
    assert_eq!((z.re, z.im), (0.0, 0.0));
    assert_eq!(unsafe { hopres_profile_fourier(p, 0.0, &mut z) }, HopresStatus::Ok);
    assert!(z.re.abs() < 1e-12 && z.im.abs() < 1e-12);
    let mut m = 99;
    assert_eq!(unsafe { hopres_profile_vanishing_order(p, &mut m) }, HopresStatus::Ok);
    assert_eq!(m, 1);
    unsafe { hopres_profile_free(p) };
}

#[test]
fn parse_errors_are_reported() {
    let c = CString::new("psi(").unwrap();
    let mut p = ptr::null_mut();
    assert_eq!(unsafe { hopres_profile_parse(c.as_ptr(), &mut p) }, HopresStatus::ParseError);
    assert!(p.is_null());
    assert!(last_error().contains("parse"));
    assert_eq!(unsafe { hopres_profile_parse(ptr::null(), &mut p) }, HopresStatus::NullPointer);
    assert_eq!(
        unsafe { hopres_profile_eval(ptr::null(), 0.0, &mut HopresComplex { re: 0.0, im: 0.0 }) },
        HopresStatus::NullPointer
    );
    // Success clears the message.
    let q = parse("psi");
    assert_eq!(last_error(), "");
    unsafe { hopres_profile_free(q) };
}

#[test]
fn free_line_defect_and_root() {
    let z = parse("zero");
    let mut v = ptr::null_mut();
    assert_eq!(unsafe { hopres_potential_new(z, z, ptr::null(), 0, 0, &mut v) }, HopresStatus::Ok);
    let lambda = HopresComplex { re: 0.4, im: -0.3 };
    let mut f = HopresComplex { re: 0.0, im: 0.0 };
    assert_eq!(unsafe { hopres_outgoing_defect(v, lambda, &mut f) }, HopresStatus::Ok);
    // F(λ) = iλ on the free line.
    assert!((f.re - 0.3).abs() < 1e-12 && (f.im - 0.4).abs() < 1e-12, "{f:?}");

    let mut buf = [HopresResonance { lambda, multiplicity: 0, residual: 0.0 }; 4];
    let mut count = 0;
    let st = unsafe { hopres_find_resonances(v, -1.0, 1.0, -1.0, 1.0, 1e-12, buf.as_mut_ptr(), buf.len(), &mut count) };
    assert_eq!(st, HopresStatus::Ok);
    assert_eq!(count, 1);
    assert!(buf[0].lambda.re.hypot(buf[0].lambda.im) < 1e-10);
    assert_eq!(buf[0].multiplicity, 1);
    unsafe {
        hopres_potential_free(v);
        hopres_profile_free(z);
    }
}

#[test]
fn buffer_too_small_reports_count() {
    let q0 = parse("box(-2, 1, 0.2)");
    let q = parse("psi");
    let law = CString::new("rademacher").unwrap();
    let mut v = ptr::null_mut();
    assert_eq!(unsafe { hopres_potential_new(q0, q, law.as_ptr(), 10, 7, &mut v) }, HopresStatus::Ok);
    let mut x = HopresComplex { re: 0.0, im: 0.0 };
    assert_eq!(unsafe { hopres_potential_eval(v, 0.0, &mut x) }, HopresStatus::Ok);
    assert!(x.re < -1.0);
    let mut count = 0;
    let st = unsafe { hopres_find_resonances(v, -2.0, 2.0, -1.0, 1.5, 1e-10, ptr::null_mut(), 0, &mut count) };
    assert_eq!(st, HopresStatus::BufferTooSmall);
    assert!(count >= 2, "{count}");
    let mut buf = vec![HopresResonance { lambda: x, multiplicity: 0, residual: 0.0 }; count];
    let mut again = 0;
    let st = unsafe { hopres_find_resonances(v, -2.0, 2.0, -1.0, 1.5, 1e-10, buf.as_mut_ptr(), count, &mut again) };
    assert_eq!(st, HopresStatus::Ok);
    assert_eq!(again, count);
    let bad = CString::new("gaussian").unwrap();
    let mut w = ptr::null_mut();
    assert_eq!(
        unsafe { hopres_potential_new(q0, q, bad.as_ptr(), 10, 7, &mut w) },
        HopresStatus::InvalidArgument
    );
    unsafe {
        hopres_potential_free(v);
        hopres_profile_free(q0);
        hopres_profile_free(q);
    }
}

#[test]
fn header_is_valid_c() {
    let header = std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("include/hopres.h");
    let text = std::fs::read_to_string(&header).unwrap();
    for sym in ["hopres_find_resonances", "hopres_last_error", "typedef struct HopresProfile HopresProfile"] {
        assert!(text.contains(sym), "{sym}");
    }
    let Ok(out) = std::process::Command::new("cc").args(["-fsyntax-only", "-x", "c", "-std=c11"]).arg(&header).output()
    else {
        eprintln!("no C compiler; skipping syntax check");
        return;
    };
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
}
