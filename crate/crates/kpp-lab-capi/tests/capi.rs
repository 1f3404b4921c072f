//! Exercises the C entry points from Rust: happy paths, error codes,
//! buffer sizing and the last-error channel.

use std::ffi::CString;
use std::os::raw::c_char;
use std::ptr;

use kpp_lab_capi::*;

fn open(name: &str) -> *mut KppScenario {
    let cname = CString::new(name).unwrap();
    let mut handle = ptr::null_mut();
    let status = unsafe { kpp_scenario_open(cname.as_ptr(), &mut handle) };
    assert_eq!(status, KppStatus::Ok, "open {name}");
    assert!(!handle.is_null());
    handle
}

fn last_error() -> String {
    let needed = unsafe { kpp_last_error(ptr::null_mut(), 0) };
    let mut buf = vec![0u8; needed];
    unsafe { kpp_last_error(buf.as_mut_ptr().cast::<c_char>(), buf.len()) };
    assert_eq!(buf.pop(), Some(0));
    String::from_utf8(buf).unwrap()
}

#[test]
fn version_is_a_c_string() {
    let p = kpp_version();
    assert!(!p.is_null());
    let v = unsafe { std::ffi::CStr::from_ptr(p) }.to_str().unwrap();
    assert!(!v.is_empty());
}

#[test]
fn open_info_name_and_free() {
    let s = open("hei2004-counterexample");
    let mut info = KppScenarioInfo {
        species: 0,
        dimension: 0,
        node_count: 0,
    };
    assert_eq!(unsafe { kpp_scenario_info(s, &mut info) }, KppStatus::Ok);
    assert_eq!(info.species, 2);
    assert_eq!(info.dimension, 1);
    assert_eq!(info.node_count, 32);

    let needed = unsafe { kpp_scenario_name(s, ptr::null_mut(), 0) };
    let mut buf = vec![0u8; needed];
    unsafe { kpp_scenario_name(s, buf.as_mut_ptr().cast::<c_char>(), buf.len()) };
    assert_eq!(&buf[..needed - 1], b"hei2004-counterexample");

    unsafe { kpp_scenario_free(s) };
}

#[test]
fn name_truncates_to_capacity() {
    let s = open("single-logistic");
    let mut buf = [0x7fu8; 4];
    let needed = unsafe { kpp_scenario_name(s, buf.as_mut_ptr().cast::<c_char>(), buf.len()) };
    assert_eq!(needed, "single-logistic".len() + 1);
    assert_eq!(&buf, b"sin\0");
    unsafe { kpp_scenario_free(s) };
}

#[test]
fn unknown_scenario_reports_code_and_message() {
    let cname = CString::new("no-such-scenario").unwrap();
    let mut handle = ptr::null_mut();
    let status = unsafe { kpp_scenario_open(cname.as_ptr(), &mut handle) };
    assert_eq!(status, KppStatus::Scenario);
    assert!(handle.is_null());
    assert!(last_error().contains("no-such-scenario"));
}

#[test]
fn null_arguments_are_rejected() {
    assert_eq!(
        unsafe { kpp_scenario_open(ptr::null(), ptr::null_mut()) },
        KppStatus::NullArgument
    );
    let mut info = KppScenarioInfo {
        species: 0,
        dimension: 0,
        node_count: 0,
    };
    assert_eq!(
        unsafe { kpp_scenario_info(ptr::null(), &mut info) },
        KppStatus::NullArgument
    );
    assert!(last_error().contains("null"));
}

#[test]
fn eigenvalue_matches_the_counterexample() {
    let s = open("hei2004-counterexample");
    let mut info = KppEigenInfo {
        lambda1: 0.0,
        residual: 0.0,
        iterations: 0,
    };
    let mut len = 0usize;
    let status =
        unsafe { kpp_principal_eigenpair(s, 0.0, 0, &mut info, ptr::null_mut(), 0, &mut len) };
    assert_eq!(status, KppStatus::Ok);
    assert!((info.lambda1 + 1.0).abs() < 1e-8, "{}", info.lambda1);
    assert_eq!(len, 64);

    let mut values = vec![0.0; len];
    let status = unsafe {
        kpp_principal_eigenpair(
            s,
            0.0,
            0,
            ptr::null_mut(),
            values.as_mut_ptr(),
            values.len(),
            ptr::null_mut(),
        )
    };
    assert_eq!(status, KppStatus::Ok);
    assert!(values.iter().all(|v| *v > 0.0));
    assert!((values.iter().fold(f64::NEG_INFINITY, |a, &b| a.max(b)) - 1.0).abs() < 1e-12);

    let undersized = unsafe {
        kpp_principal_eigenpair(s, 0.0, 0, ptr::null_mut(), values.as_mut_ptr(), 3, &mut len)
    };
    assert_eq!(undersized, KppStatus::BufferTooSmall);
    assert_eq!(len, 64);
    unsafe { kpp_scenario_free(s) };
}

#[test]
fn grid_override_changes_node_count() {
    let s = open("hei2004-counterexample");
    let cells = [8usize];
    assert_eq!(
        unsafe { kpp_scenario_set_grid(s, cells.as_ptr(), 1) },
        KppStatus::Ok
    );
    let mut info = KppScenarioInfo {
        species: 0,
        dimension: 0,
        node_count: 0,
    };
    assert_eq!(unsafe { kpp_scenario_info(s, &mut info) }, KppStatus::Ok);
    assert_eq!(info.node_count, 8);

    let two_axes = [4usize, 4];
    assert_eq!(
        unsafe { kpp_scenario_set_grid(s, two_axes.as_ptr(), 2) },
        KppStatus::ShapeMismatch
    );
    unsafe { kpp_scenario_free(s) };
}

#[test]
fn constant_states_with_buffer_sizing() {
    let s = open("hei2004-counterexample");
    let mut count = 0usize;
    let probe = unsafe {
        kpp_constant_states(
            s,
            ptr::null(),
            0,
            0.0,
            false,
            ptr::null_mut(),
            0,
            &mut count,
        )
    };
    assert_eq!(probe, KppStatus::BufferTooSmall);
    assert_eq!(count, 4);

    let mut states = vec![0.0; count * 2];
    let status = unsafe {
        kpp_constant_states(
            s,
            ptr::null(),
            0,
            0.0,
            false,
            states.as_mut_ptr(),
            states.len(),
            &mut count,
        )
    };
    assert_eq!(status, KppStatus::Ok);
    assert_eq!(count, 4);
    assert!(states
        .chunks(2)
        .any(|row| (row[0] - 1.0).abs() < 1e-9 && (row[1] - 1.0).abs() < 1e-9));

    let mut positive = vec![0.0; 8];
    let status = unsafe {
        kpp_constant_states(
            s,
            ptr::null(),
            0,
            0.0,
            true,
            positive.as_mut_ptr(),
            positive.len(),
            &mut count,
        )
    };
    assert_eq!(status, KppStatus::Ok);
    assert_eq!(count, 3);
    unsafe { kpp_scenario_free(s) };
}

#[test]
fn stability_distinguishes_saddle_from_sink() {
    let s = open("hei2004-counterexample");
    let mut info = KppStabilityInfo {
        growth: 0.0,
        classification: KppClassification::Stable,
    };
    let symmetric = [1.0, 1.0];
    assert_eq!(
        unsafe { kpp_stability_of_constant(s, symmetric.as_ptr(), 2, &mut info) },
        KppStatus::Ok
    );
    assert_eq!(info.classification, KppClassification::Unstable);
    assert!((info.growth - 0.4).abs() < 1e-8);

    let q = (15.0f64 / 2.0).sqrt();
    let asymmetric = [3.0 - q, 3.0 + q];
    assert_eq!(
        unsafe { kpp_stability_of_constant(s, asymmetric.as_ptr(), 2, &mut info) },
        KppStatus::Ok
    );
    assert_eq!(info.classification, KppClassification::Stable);

    let not_steady = [1.5, 1.5];
    assert_eq!(
        unsafe { kpp_stability_of_constant(s, not_steady.as_ptr(), 2, &mut info) },
        KppStatus::NotSteady
    );
    assert!(last_error().contains("not steady"));
    unsafe { kpp_scenario_free(s) };
}

#[test]
fn cooperativity_and_monotonicity_falsifier() {
    let s = open("hei2004-counterexample");
    let upper = [2.0, 2.0];
    let mut corner = [0.0, 0.0];
    let mut cooperative = true;
    assert_eq!(
        unsafe { kpp_cooperativity(s, upper.as_ptr(), 2, corner.as_mut_ptr(), &mut cooperative) },
        KppStatus::Ok
    );
    assert!(!cooperative);
    assert!(corner[0] < 2.0);

    let lower = [1.0, 1.0];
    let mut info = KppMonotonicityInfo {
        direction: 0,
        component: 0,
        epsilon: 0.0,
        value: 0.0,
    };
    let mut point = [0.0, 0.0];
    let mut found = false;
    assert_eq!(
        unsafe {
            kpp_falsify_monotonicity(
                s,
                lower.as_ptr(),
                upper.as_ptr(),
                2,
                &mut info,
                point.as_mut_ptr(),
                &mut found,
            )
        },
        KppStatus::Ok
    );
    assert!(found);
    assert!(info.value < 0.0);
    assert!(info.direction >= 1 && info.direction <= 2);
    assert!(point.iter().all(|v| *v >= 1.0 && *v <= 2.0));
    unsafe { kpp_scenario_free(s) };

    let logistic = open("single-logistic");
    let mut one = [10.0];
    assert_eq!(
        unsafe {
            kpp_falsify_monotonicity(
                logistic,
                [1.0].as_ptr(),
                one.as_mut_ptr(),
                1,
                &mut info,
                ptr::null_mut(),
                &mut found,
            )
        },
        KppStatus::Ok
    );
    assert!(!found, "a scalar equation is always quasimonotone");
    unsafe { kpp_scenario_free(logistic) };
}

#[test]
fn simulate_reaches_the_logistic_capacity() {
    let s = open("single-logistic");
    let u0 = [0.9];
    let mut info = KppSimulationInfo {
        outcome: KppSimOutcome::Timeout,
        archive_index: -1,
        time: 0.0,
        steps: 0,
        final_dt: 0.0,
        final_residual: 0.0,
    };
    assert_eq!(
        unsafe { kpp_simulate_constant(s, u0.as_ptr(), 1, 0.0, 0.0, &mut info) },
        KppStatus::Ok
    );
    assert_eq!(info.outcome, KppSimOutcome::Converged);
    assert!(info.archive_index >= 0, "capacity is in the archive");
    assert!(info.time > 0.0);
    assert!(info.final_residual < 1e-9);
    unsafe { kpp_scenario_free(s) };
}
