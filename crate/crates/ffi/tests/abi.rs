use std::ffi::c_char;
use std::ptr;

use fdbbd_ffi::*;

fn last_error() -> String {
    let mut buf = [0 as c_char; 256];
    let len = unsafe { fdbbd_last_error(buf.as_mut_ptr(), buf.len()) };
    let bytes: Vec<u8> = buf.iter().take(len.min(255)).map(|&c| c as u8).collect();
    String::from_utf8_lossy(&bytes).into_owned()
}

fn operator(mu: usize, n: usize, seed: u64) -> *mut FdbbdOperator {
    let mut op = ptr::null_mut();
    assert_eq!(unsafe { fdbbd_operator_new(mu, n, seed, &mut op) }, FdbbdStatus::Ok);
    assert!(!op.is_null());
    op
}

fn c(re: f64, im: f64) -> FdbbdComplex {
    FdbbdComplex { re, im }
}

#[test]
fn operator_lifecycle_and_dims() {
    let op = operator(4, 6, 1);
    let (mut mu, mut n) = (0, 0);
    assert_eq!(unsafe { fdbbd_operator_dims(op, &mut mu, &mut n) }, FdbbdStatus::Ok);
    assert_eq!((mu, n), (4, 6));
    unsafe {
        fdbbd_operator_free(op);
        fdbbd_operator_free(ptr::null_mut());
    }
}

#[test]
fn apply_and_adjoint_are_adjoint() {
    let (mu, n) = (8, 12);
    let op = operator(mu, n, 7);
    let w: Vec<_> = (0..mu * n).map(|i| c((i as f64).sin(), (i as f64 * 0.3).cos())).collect();
    let y_probe: Vec<_> = (0..mu).map(|i| c(1.0 / (i + 1) as f64, i as f64 * 0.1)).collect();
    let mut y = vec![FdbbdComplex::default(); mu];
    let mut adj = vec![FdbbdComplex::default(); mu * n];
    unsafe {
        assert_eq!(fdbbd_operator_apply(op, w.as_ptr(), w.len(), y.as_mut_ptr(), y.len()), FdbbdStatus::Ok);
        assert_eq!(
            fdbbd_operator_adjoint(op, y_probe.as_ptr(), mu, adj.as_mut_ptr(), adj.len()),
            FdbbdStatus::Ok
        );
        fdbbd_operator_free(op);
    }
    // <C(w), y> = <w, C*(y)>, conjugate-linear in the first slot
    let ip = |a: &[FdbbdComplex], b: &[FdbbdComplex]| {
        a.iter().zip(b).fold((0.0, 0.0), |(re, im), (x, y)| {
            (re + x.re * y.re + x.im * y.im, im + x.re * y.im - x.im * y.re)
        })
    };
    let (l, r) = (ip(&y, &y_probe), ip(&w, &adj));
    assert!((l.0 - r.0).abs() < 1e-9 && (l.1 - r.1).abs() < 1e-9, "{l:?} vs {r:?}");
}

#[test]
fn errors_are_reported_with_messages() {
    let op = operator(4, 6, 1);
    let w = vec![FdbbdComplex::default(); 24];
    let mut y = vec![FdbbdComplex::default(); 2];
    let status = unsafe { fdbbd_operator_apply(op, w.as_ptr(), 24, y.as_mut_ptr(), y.len()) };
    assert_eq!(status, FdbbdStatus::BufferTooSmall);
    assert!(last_error().contains("4 required"), "{}", last_error());

    let status = unsafe { fdbbd_operator_apply(op, w.as_ptr(), 10, y.as_mut_ptr(), 4) };
    assert_eq!(status, FdbbdStatus::DimensionMismatch);

    let status = unsafe { fdbbd_operator_apply(ptr::null(), w.as_ptr(), 24, y.as_mut_ptr(), 4) };
    assert_eq!(status, FdbbdStatus::NullPointer);
    unsafe { fdbbd_operator_free(op) };

    let mut out = ptr::null_mut();
    assert_eq!(unsafe { fdbbd_operator_new(0, 6, 1, &mut out) }, FdbbdStatus::InvalidParameter);
    assert!(out.is_null());

    let mut h = 0.0;
    assert_eq!(unsafe { fdbbd_h_gamma(2, 1.5, &mut h) }, FdbbdStatus::InvalidParameter);
    assert!(!last_error().is_empty());
}

#[test]
fn last_error_truncates_safely() {
    let mut h = 0.0;
    unsafe { fdbbd_h_gamma(2, -1.0, &mut h) };
    let mut small = [1 as c_char; 4];
    let len = unsafe { fdbbd_last_error(small.as_mut_ptr(), small.len()) };
    assert!(len > 3);
    assert_eq!(small[3], 0);
    assert!(unsafe { fdbbd_last_error(ptr::null_mut(), 0) } == len);
}

#[test]
fn hihtp_recovers_noiseless_rank_one() {
    let (mu, n) = (16, 16);
    let op = operator(mu, n, 3);
    // h on rows {0, 5}, beta on column 9
    let mut w = vec![FdbbdComplex::default(); mu * n];
    w[9 * mu] = c(1.0, 0.5);
    w[9 * mu + 5] = c(-0.7, 0.2);
    let mut y = vec![FdbbdComplex::default(); mu];
    let mut est = vec![FdbbdComplex::default(); mu * n];
    let (mut iters, mut residual) = (0usize, f64::NAN);
    unsafe {
        assert_eq!(fdbbd_operator_apply(op, w.as_ptr(), w.len(), y.as_mut_ptr(), mu), FdbbdStatus::Ok);
        let status = fdbbd_hihtp_solve(op, y.as_ptr(), mu, 2, 1, est.as_mut_ptr(), est.len(), &mut iters, &mut residual);
        assert_eq!(status, FdbbdStatus::Ok);
        fdbbd_operator_free(op);
    }
    assert!(iters >= 1);
    assert!(residual < 1e-8);
    for (a, b) in w.iter().zip(&est) {
        assert!((a.re - b.re).abs() < 1e-8 && (a.im - b.im).abs() < 1e-8);
    }
}

#[test]
fn secrets_from_exact_tensors_coincide() {
    let (mu, n) = (3, 4);
    let h = [c(1.0, 0.0), c(0.0, 0.0), c(0.5, -0.5)];
    let beta_a = [c(0.0, 0.0), c(2.0, 1.0), c(0.0, 0.0), c(0.0, 0.0)];
    let beta_b = [c(0.0, 0.0), c(0.0, 0.0), c(0.0, 0.0), c(-1.0, 0.3)];
    let outer = |beta: &[FdbbdComplex]| -> Vec<FdbbdComplex> {
        let mut w = Vec::with_capacity(mu * n);
        for b in beta {
            for x in &h {
                w.push(c(x.re * b.re - x.im * b.im, x.re * b.im + x.im * b.re));
            }
        }
        w
    };
    let (w_alice, w_bob) = (outer(&beta_b), outer(&beta_a));
    let mut ca = vec![FdbbdComplex::default(); mu * n];
    let mut cb = vec![FdbbdComplex::default(); mu * n];
    unsafe {
        let s = fdbbd_compute_secret(mu, n, w_alice.as_ptr(), beta_a.as_ptr(), ca.as_mut_ptr(), ca.len());
        assert_eq!(s, FdbbdStatus::Ok);
        let s = fdbbd_compute_secret(mu, n, w_bob.as_ptr(), beta_b.as_ptr(), cb.as_mut_ptr(), cb.len());
        assert_eq!(s, FdbbdStatus::Ok);
    }
    for (a, b) in ca.iter().zip(&cb) {
        assert!((a.re - b.re).abs() < 1e-12 && (a.im - b.im).abs() < 1e-12);
    }
}

#[test]
fn bounds_match_closed_forms() {
    let mut h = 0.0;
    assert_eq!(unsafe { fdbbd_h_gamma(2, 1.0, &mut h) }, FdbbdStatus::Ok);
    assert!((h - 6f64.ln()).abs() < 1e-12);

    let (mut rate, mut ok) = (f64::NAN, 9u8);
    let status = unsafe { fdbbd_key_rate(4, 2, 1.0, 0.0, 0.1, 0.5, &mut rate, &mut ok) };
    assert_eq!(status, FdbbdStatus::Ok);
    assert!(rate.is_finite());
    assert!(ok <= 1);
}

#[test]
fn protocol_run_is_deterministic_and_agrees_noiseless() {
    let run = |seed| {
        let mut p = ptr::null_mut();
        let status = unsafe { fdbbd_protocol_run(64, 64, 2, 2, 1, f64::INFINITY, seed, &mut p) };
        assert_eq!(status, FdbbdStatus::Ok, "{}", last_error());
        let mut len = 0;
        unsafe {
            assert_eq!(fdbbd_protocol_key(p, 0, ptr::null_mut(), 0, &mut len), FdbbdStatus::Ok);
        }
        let mut alice = vec![0u8; len];
        let mut bob = vec![0u8; len];
        let mut agree = 0u8;
        let mut rmse = f64::NAN;
        unsafe {
            assert_eq!(fdbbd_protocol_key(p, 0, alice.as_mut_ptr(), len, ptr::null_mut()), FdbbdStatus::Ok);
            assert_eq!(fdbbd_protocol_key(p, 1, bob.as_mut_ptr(), len, ptr::null_mut()), FdbbdStatus::Ok);
            assert_eq!(fdbbd_protocol_key(p, 2, bob.as_mut_ptr(), len, ptr::null_mut()), FdbbdStatus::InvalidParameter);
            assert_eq!(fdbbd_protocol_keys_agree(p, &mut agree), FdbbdStatus::Ok);
            assert_eq!(fdbbd_protocol_mean_rmse(p, &mut rmse), FdbbdStatus::Ok);
            fdbbd_protocol_free(p);
        }
        assert!(alice.iter().all(|&b| b <= 1));
        (alice, bob, agree, rmse)
    };
    let first = run(11);
    assert_eq!(first, run(11));
    assert_eq!(first.2, u8::from(first.0 == first.1));
    assert!(first.3 >= 0.0);
}

#[test]
fn protocol_rejects_bad_config() {
    let mut p = ptr::null_mut();
    let status = unsafe { fdbbd_protocol_run(16, 32, 2, 2, 1, f64::INFINITY, 0, &mut p) };
    assert_ne!(status, FdbbdStatus::Ok);
    assert!(p.is_null());
}

#[test]
fn generated_header_declares_the_api() {
    let header = std::fs::read_to_string(concat!(env!("CARGO_MANIFEST_DIR"), "/include/fdbbd.h")).unwrap();
    for name in [
        "fdbbd_operator_new",
        "fdbbd_operator_free",
        "fdbbd_hihtp_solve",
        "fdbbd_compute_secret",
        "fdbbd_protocol_run",
        "fdbbd_last_error",
        "typedef struct FdbbdOperator FdbbdOperator",
        "FDBBD_STATUS_OK = 0",
    ] {
        assert!(header.contains(name), "header lacks {name}");
    }
}
