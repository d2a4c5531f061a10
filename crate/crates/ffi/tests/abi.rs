use std::ffi::{c_char, CStr, CString};
use std::path::PathBuf;
use std::process::Command;
use std::ptr;

use ltvkit_ffi::*;

fn last_error() -> String {
    let mut buf = vec![0u8; 256];
    let n = unsafe { ltv_last_error(buf.as_mut_ptr().cast(), buf.len()) };
    buf.truncate(n.min(255));
    String::from_utf8(buf).unwrap()
}

fn open(id: &str) -> *mut LtvSystem {
    let id = CString::new(id).unwrap();
    let mut h = ptr::null_mut();
    assert_eq!(unsafe { ltv_catalog_system(id.as_ptr(), &mut h) }, LTV_OK);
    h
}

#[test]
fn transition_and_gramian_match_closed_forms() {
    let h = open("S2");
    let mut phi = [0.0];
    assert_eq!(unsafe { ltv_transition(h, 2.0, -1.0, phi.as_mut_ptr(), 1) }, LTV_OK);
    assert!((phi[0] - (-3.0f64).exp()).abs() < 1e-9);
    let mut w = [0.0];
    assert_eq!(unsafe { ltv_gramian(h, LTV_GRAMIAN_W, 0.0, 1.0, w.as_mut_ptr(), 1) }, LTV_OK);
    // Φ(0, s) = e^s, so W(0, 1) = ∫₀¹ e^{2s} ds
    assert!((w[0] - ((2.0f64).exp() - 1.0) / 2.0).abs() < 1e-8);
    unsafe { ltv_system_free(h) };
}

#[test]
fn errors_are_coded_and_described() {
    let bad = CString::new(r#"{"name":"x","n":1,"domain":[0,1],"A":[["2*)"]]}"#).unwrap();
    let mut h = ptr::null_mut();
    assert_eq!(unsafe { ltv_system_from_json(bad.as_ptr(), &mut h) }, LTV_ERR_PARSE);
    assert!(h.is_null());
    assert!(last_error().contains("byte"), "{}", last_error());

    let unknown = CString::new(r#"{"name":"x","n":1,"domain":[0,1],"A":[["t"]],"extra":0}"#).unwrap();
    assert_eq!(unsafe { ltv_system_from_json(unknown.as_ptr(), &mut h) }, LTV_ERR_PARSE);

    assert_eq!(unsafe { ltv_transition(ptr::null(), 0.0, 0.0, ptr::null_mut(), 0) }, LTV_ERR_NULL);

    let s0 = open("S0");
    let mut small = [0.0; 3];
    assert_eq!(unsafe { ltv_transition(s0, 1.0, 0.0, small.as_mut_ptr(), 3) }, LTV_ERR_BUFFER);
    assert_eq!(unsafe { ltv_gramian(s0, 7, 0.0, 1.0, small.as_mut_ptr(), 3) }, LTV_ERR_INVALID);
    let mut st = 0;
    let prop = CString::new("XYZ").unwrap();
    assert_eq!(unsafe { ltv_classify(s0, prop.as_ptr(), &mut st, ptr::null_mut()) }, LTV_ERR_INVALID);
    unsafe { ltv_system_free(s0) };
    unsafe { ltv_system_free(ptr::null_mut()) };
}

#[test]
fn classify_and_verify_statuses() {
    let h = open("S1");
    let mut st = -1;
    let mut json: *mut c_char = ptr::null_mut();
    let uco = CString::new("UCO").unwrap();
    assert_eq!(unsafe { ltv_classify(h, uco.as_ptr(), &mut st, &mut json) }, LTV_OK);
    assert_eq!(st, LTV_FALSIFIED);
    let text = unsafe { CStr::from_ptr(json) }.to_str().unwrap().to_owned();
    unsafe { ltv_string_free(json) };
    let v: serde_json::Value = serde_json::from_str(&text).unwrap();
    assert_eq!(v["witness"]["type"], "Kalman");
    unsafe { ltv_system_free(h) };

    let h = open("S6");
    let id = CString::new("PERTURB-LEMMA").unwrap();
    assert_eq!(unsafe { ltv_verify(h, id.as_ptr(), &mut st, ptr::null_mut()) }, LTV_OK);
    assert_eq!(st, LTV_PASS);
    unsafe { ltv_system_free(h) };
}

#[test]
fn version_is_a_c_string() {
    let v = unsafe { CStr::from_ptr(ltv_version()) }.to_str().unwrap();
    assert_eq!(v, env!("CARGO_PKG_VERSION"));
}

#[test]
fn header_declares_every_export() {
    let dir = PathBuf::from(env!("CARGO_MANIFEST_DIR"));
    let header = std::fs::read_to_string(dir.join("include/ltvkit.h")).unwrap();
    let src = std::fs::read_to_string(dir.join("src/lib.rs")).unwrap();
    for line in src.lines().filter(|l| l.contains("extern \"C\" fn ")) {
        let name = line.split("fn ").nth(1).unwrap().split('(').next().unwrap();
        assert!(header.contains(&format!("{name}(")), "{name} missing from header");
    }
    assert!(header.contains("typedef struct LtvSystem LtvSystem;"));
}

/// Builds the C smoke program against the static library and runs it.
#[test]
fn c_program_links_and_runs() {
    let dir = PathBuf::from(env!("CARGO_MANIFEST_DIR"));
    // target/<profile>/deps/abi-… → target/<profile>
    let profile_dir = std::env::current_exe().unwrap().parent().unwrap().parent().unwrap().to_path_buf();
    let lib = profile_dir.join("libltvkit_ffi.a");
    assert!(lib.exists(), "{} not built", lib.display());
    let exe = tempfile::tempdir().unwrap();
    let bin = exe.path().join("smoke");
    let status = Command::new("cc")
        .arg(dir.join("tests/c/smoke.c"))
        .arg("-I")
        .arg(dir.join("include"))
        .arg(&lib)
        .args(["-lpthread", "-ldl", "-lm", "-o"])
        .arg(&bin)
        .status()
        .expect("C compiler");
    assert!(status.success());
    let out = Command::new(&bin).output().unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(String::from_utf8_lossy(&out.stdout).starts_with("ok "));
}
