use std::ffi::{CStr, CString};
use std::path::Path;
use std::process::Command;
use std::ptr;

use chargeshare::availability::AvailabilityModel;
use chargeshare::coverage::{CoverageModel, CoveragePath};
use chargeshare::params::{ParamSet, PolicyDecision};
use chargeshare::queueing::QueueModel;
use chargeshare_ffi::*;

fn c(s: &str) -> CString {
    CString::new(s).unwrap()
}

fn last_error() -> String {
    let p = cs_last_error();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned()
}

#[test]
fn version_is_a_c_string() {
    let v = unsafe { CStr::from_ptr(cs_version()) }.to_str().unwrap();
    assert_eq!(v, env!("CARGO_PKG_VERSION"));
}

#[test]
fn set_and_round_trip_config() {
    unsafe {
        let p = cs_params_default();
        assert_eq!(cs_params_set(p, c("c_slots").as_ptr(), c("3").as_ptr()), CsStatus::Ok);
        assert!(cs_last_error().is_null());

        assert_eq!(cs_params_set(p, c("no_such_key").as_ptr(), c("1").as_ptr()), CsStatus::Parse);
        assert!(last_error().contains("no_such_key"));

        let mut text = ptr::null_mut();
        assert_eq!(cs_params_to_config(p, &mut text), CsStatus::Ok);
        let config = CStr::from_ptr(text).to_str().unwrap().to_owned();
        cs_string_free(text);

        let mut q = ptr::null_mut();
        assert_eq!(cs_params_from_config(c(&config).as_ptr(), &mut q), CsStatus::Ok);
        let expected = ParamSet::default().with_overrides(["c_slots=3"]).unwrap();
        let mut back = ptr::null_mut();
        assert_eq!(cs_params_to_config(q, &mut back), CsStatus::Ok);
        assert_eq!(CStr::from_ptr(back).to_str().unwrap(), expected.to_config_string());
        cs_string_free(back);

        let r = cs_params_clone(q);
        assert!(!r.is_null());
        cs_params_free(r);
        cs_params_free(q);
        cs_params_free(p);
        cs_params_free(ptr::null_mut());
    }
}

#[test]
fn bad_arguments_return_status_codes() {
    unsafe {
        let p = cs_params_default();
        let mut x = 0.0;
        assert_eq!(cs_coverage(ptr::null(), 0.5, CsCoveragePath::Approx as i32, &mut x), CsStatus::NullPointer);
        assert_eq!(cs_coverage(p, 0.5, CsCoveragePath::Approx as i32, ptr::null_mut()), CsStatus::NullPointer);
        assert_eq!(cs_coverage(p, 0.5, 7, &mut x), CsStatus::InvalidArgument);
        assert!(last_error().contains("coverage path"));
        assert_eq!(cs_uav_wait(p, -1, 4, &mut x), CsStatus::InvalidArgument);
        assert_eq!(cs_ev_wait(p, 4, 9, &mut x), CsStatus::InvalidArgument);
        assert_eq!(cs_availability(p, 5, 1.0, 0.0, &mut x), CsStatus::InvalidArgument);
        assert_eq!(cs_params_set(p, ptr::null(), c("1").as_ptr()), CsStatus::NullPointer);

        let bad = [0xffu8, 0];
        assert_eq!(cs_params_set(p, bad.as_ptr().cast(), c("1").as_ptr()), CsStatus::InvalidUtf8);
        assert_eq!(cs_params_set(p, c("mu_e").as_ptr(), c("-1").as_ptr()), CsStatus::InvalidParam);
        cs_params_free(p);
    }
}

#[test]
fn values_match_the_library() {
    let params = ParamSet::default();
    let avail = AvailabilityModel::new(&params, QueueModel::default()).unwrap();
    unsafe {
        let p = cs_params_default();
        let mut x = 0.0;

        assert_eq!(cs_availability(p, CsAssociation::Biased as i32, 0.5, 0.0, &mut x), CsStatus::Ok);
        assert_eq!(x, avail.evaluate(&PolicyDecision::biased(0.5)).unwrap().p_a);

        assert_eq!(cs_availability(p, CsAssociation::NoSharing as i32, 3.0, 0.0, &mut x), CsStatus::Ok);
        assert_eq!(x, avail.evaluate(&PolicyDecision::no_sharing()).unwrap().p_a);

        assert_eq!(cs_coverage(p, 0.6, CsCoveragePath::Approx as i32, &mut x), CsStatus::Ok);
        let expected = CoverageModel::new(&params, 0.6).unwrap().breakdown(CoveragePath::Approx).unwrap().total;
        assert_eq!(x, expected);

        assert_eq!(cs_association_ev(p, 1.0, &mut x), CsStatus::Ok);
        assert!(x > 0.0 && x < 1.0);

        let mut fifs = 0.0;
        let mut first = 0.0;
        assert_eq!(cs_ev_wait(p, 4, CsServingPolicy::Fifs as i32, &mut fifs), CsStatus::Ok);
        assert_eq!(cs_ev_wait(p, 4, CsServingPolicy::EvFirst as i32, &mut first), CsStatus::Ok);
        assert!(first <= fifs);

        assert_eq!(cs_uav_wait(p, CsStationKind::Dedicated as i32, 6, &mut x), CsStatus::Ok);
        assert!(x >= 0.0);
        cs_params_free(p);
    }
}

#[test]
fn experiment_returns_csv() {
    unsafe {
        let p = cs_params_default();
        let mut csv = ptr::null_mut();
        let status =
            cs_run_experiment(p, c("fig-wait-ev").as_ptr(), 3, 1, 100, CsAssociation::Biased as i32, &mut csv);
        assert_eq!(status, CsStatus::Ok);
        let text = CStr::from_ptr(csv).to_str().unwrap().to_owned();
        cs_string_free(csv);
        assert!(text.lines().count() > 1);

        let status = cs_run_experiment(p, c("fig-nothing").as_ptr(), 3, 1, 100, CsAssociation::Biased as i32, &mut csv);
        assert_eq!(status, CsStatus::InvalidArgument);
        cs_params_free(p);
    }
}

#[test]
fn header_declares_the_api_and_compiles() {
    let header = Path::new(env!("CARGO_MANIFEST_DIR")).join("include/chargeshare.h");
    let text = std::fs::read_to_string(&header).unwrap();
    for name in [
        "cs_version",
        "cs_last_error",
        "cs_params_default",
        "cs_params_set",
        "cs_availability",
        "cs_coverage",
        "cs_run_experiment",
        "cs_string_free",
        "CS_STATUS_NULL_POINTER",
        "CS_ASSOCIATION_THINNING",
        "typedef struct CsParams CsParams",
    ] {
        assert!(text.contains(name), "header declares {name}");
    }
    // Syntax check only when a C compiler is around.
    if let Ok(out) = Command::new("cc").args(["-fsyntax-only", "-x", "c"]).arg(&header).output() {
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    }
}
