use std::ffi::{CStr, CString};
use std::path::PathBuf;
use std::process::Command;
use std::ptr;
use tforms_ffi::*;

const LINEAR: &str = r#"{
  "space": {"grid": 256},
  "fields": {
    "alpha": {"kind": "scalar_symbolic", "expr": "z - 0.5",
              "zeros": [{"at": 0.5, "order": 1, "left": "-", "right": "+", "coeff": 1.0}]}
  }
}"#;

fn last_error() -> String {
    let p = tf_last_error();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned()
}

fn form(json: &str) -> *mut TfForm {
    let text = CString::new(json).unwrap();
    let mut out = ptr::null_mut();
    let status = unsafe { tf_form_from_json(text.as_ptr(), ptr::null(), 0, &mut out) };
    assert_eq!(status, TfStatus::TfOk, "{}", last_error());
    out
}

fn take_string(p: *mut std::ffi::c_char) -> String {
    let s = unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned();
    unsafe { tf_string_free(p) };
    s
}

#[test]
fn classify_a_linear_germ() {
    let f = form(LINEAR);
    let (mut dim, mut symbolic) = (0usize, false);
    assert_eq!(unsafe { tf_form_info(f, &mut dim, &mut symbolic) }, TfStatus::TfOk);
    assert_eq!((dim, symbolic), (1, true));
    let mut out = ptr::null_mut();
    assert_eq!(unsafe { tf_classify(f, &mut out) }, TfStatus::TfOk);
    let v: serde_json::Value = serde_json::from_str(&take_string(out)).unwrap();
    assert_eq!(v["positive"][0]["side"], "right");
    assert_eq!(v["negative"][0]["side"], "left");
    assert!(tf_last_error().is_null());

    let (mut hyper, mut exact) = (true, false);
    assert_eq!(unsafe { tf_is_hyperbolic(f, &mut hyper, &mut exact) }, TfStatus::TfOk);
    assert!(!hyper && exact);
    unsafe { tf_form_free(f) };
}

#[test]
fn congruence_of_a_form_with_itself() {
    let (a, b) = (form(LINEAR), form(LINEAR));
    let mut same = false;
    assert_eq!(unsafe { tf_congruent(a, b, &mut same, ptr::null_mut()) }, TfStatus::TfOk);
    assert!(same);
    unsafe {
        tf_form_free(a);
        tf_form_free(b);
    }
}

#[test]
fn sampled_form_and_density_exponent() {
    let n = 4096;
    let data: Vec<f64> = (0..n).flat_map(|j| [((j as f64 + 0.5) / n as f64 - 0.5).abs(), 0.0]).collect();
    let mut f = ptr::null_mut();
    assert_eq!(unsafe { tf_form_from_samples(data.as_ptr(), 1, n, &mut f) }, TfStatus::TfOk);
    let mut e = 0.0;
    assert_eq!(unsafe { tf_ns_exponent(f, 1e-3, 1e-1, 50, &mut e) }, TfStatus::TfOk, "{}", last_error());
    assert!((e - 1.0).abs() < 0.05, "{e}");
    unsafe { tf_form_free(f) };
}

#[test]
fn errors_carry_status_and_message() {
    let mut out = ptr::null_mut();
    let bad = CString::new("{\"space\": {\"grid\": 16},\n \"fields\": {").unwrap();
    assert_eq!(unsafe { tf_form_from_json(bad.as_ptr(), ptr::null(), 0, &mut out) }, TfStatus::TfParse);
    assert!(last_error().contains("line 2"), "{}", last_error());
    assert!(out.is_null());

    assert_eq!(unsafe { tf_form_from_json(ptr::null(), ptr::null(), 0, &mut out) }, TfStatus::TfNullArgument);
    let mut dim = 0usize;
    assert_eq!(unsafe { tf_form_info(ptr::null(), &mut dim, ptr::null_mut()) }, TfStatus::TfNullArgument);

    let undeclared = LINEAR.replace("\"zeros\": [{\"at\": 0.5, \"order\": 1, \"left\": \"-\", \"right\": \"+\", \"coeff\": 1.0}]", "\"zeros\": []");
    let text = CString::new(undeclared).unwrap();
    assert_eq!(unsafe { tf_form_from_json(text.as_ptr(), ptr::null(), 0, &mut out) }, TfStatus::TfValidation);
    assert!(last_error().contains("`alpha`"), "{}", last_error());

    let data = [1.0, 0.0, 0.0, 0.0];
    assert_eq!(unsafe { tf_form_from_samples(data.as_ptr(), 0, 1, &mut out) }, TfStatus::TfDimension);
}

#[test]
fn linalg_check_suite() {
    let mut passed = false;
    let mut out = ptr::null_mut();
    assert_eq!(unsafe { tf_check(3, TfSuite::TfSuiteLinalg, &mut passed, &mut out) }, TfStatus::TfOk);
    assert!(passed);
    let v: serde_json::Value = serde_json::from_str(&take_string(out)).unwrap();
    assert_eq!(v["seed"], 3);
}

#[test]
fn version_is_static() {
    let v = unsafe { CStr::from_ptr(tf_version()) }.to_str().unwrap();
    assert_eq!(v, env!("CARGO_PKG_VERSION"));
}

const C_PROGRAM: &str = r#"
#include <stdio.h>
#include <string.h>
#include "tforms.h"

int main(void) {
    const char *doc =
        "{\"fields\": {\"alpha\": {\"kind\": \"scalar_symbolic\", \"expr\": \"abs(z - 0.25)^2\","
        " \"zeros\": [{\"at\": 0.25, \"order\": 2, \"left\": \"+\", \"right\": \"+\", \"coeff\": 1.0}]}}}";
    TfForm *f = NULL;
    if (tf_form_from_json(doc, NULL, 0, &f) != TF_OK) {
        fprintf(stderr, "%s\n", tf_last_error());
        return 1;
    }
    bool hyper = true, exact = false;
    if (tf_is_hyperbolic(f, &hyper, &exact) != TF_OK || hyper || !exact) return 2;
    char *json = NULL;
    if (tf_classify(f, &json) != TF_OK) return 3;
    int ok = strstr(json, "\"negative\":[]") != NULL;
    tf_string_free(json);
    tf_form_free(f);
    if (tf_form_from_json("{", NULL, 0, &f) != TF_PARSE || tf_last_error() == NULL) return 4;
    printf("ok\n");
    return ok ? 0 : 5;
}
"#;

/// Builds a C program against the generated header and the shared library.
#[test]
fn header_compiles_and_links() {
    let cc = std::env::var("CC").unwrap_or_else(|_| "cc".into());
    if Command::new(&cc).arg("--version").output().is_err() {
        eprintln!("no C compiler, skipping");
        return;
    }
    let root = PathBuf::from(env!("CARGO_MANIFEST_DIR"));
    let libdir = std::env::current_exe().unwrap().parent().unwrap().parent().unwrap().to_path_buf();
    let tmp = PathBuf::from(env!("CARGO_TARGET_TMPDIR"));
    let src = tmp.join("capi_smoke.c");
    let exe = tmp.join("capi_smoke");
    std::fs::write(&src, C_PROGRAM).unwrap();
    let build = Command::new(&cc)
        .args(["-std=c99", "-Wall", "-Werror", "-o"])
        .arg(&exe)
        .arg(&src)
        .arg("-I")
        .arg(root.join("include"))
        .arg("-L")
        .arg(&libdir)
        .arg("-ltforms_ffi")
        .output()
        .unwrap();
    assert!(build.status.success(), "{}", String::from_utf8_lossy(&build.stderr));
    let run = Command::new(&exe).env("LD_LIBRARY_PATH", &libdir).output().unwrap();
    assert!(run.status.success(), "exit {:?}: {}", run.status.code(), String::from_utf8_lossy(&run.stderr));
    assert_eq!(String::from_utf8_lossy(&run.stdout).trim(), "ok");
}
