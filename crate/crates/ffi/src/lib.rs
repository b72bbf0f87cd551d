//! C ABI over `fdbbd-core`.
//!
//! Conventions:
//! - Every fallible function returns an [`FdbbdStatus`]; outputs go through
//!   caller-provided pointers. On failure the message is available from
//!   [`fdbbd_last_error`] on the same thread.
//! - Objects are opaque handles created by `*_new`/`*_run` and released by the
//!   matching `*_free`. Freeing `NULL` is a no-op.
//! - Buffers are `(pointer, length)` pairs; lengths are element counts.
//! - Lifted tensors are `mu x n`, column-major.
//! - Panics never cross the boundary; they surface as `FDBBD_STATUS_PANIC`.

use std::cell::RefCell;
use std::ffi::{c_char, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;
use std::slice;

use fdbbd_core::hihtp::{self, HihtpConfig};
use fdbbd_core::keygen::{self, ProtocolConfig, ProtocolOutcome};
use fdbbd_core::lifting::{LiftedTensor, MeasurementOp};
use fdbbd_core::signals::{gen_codebook, Codebook, SparseSignal};
use fdbbd_core::{rng, security, Error, C64};

/// Result code of every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FdbbdStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidParameter = 2,
    DimensionMismatch = 3,
    /// Solver divergence, failed factorization or a degenerate secret.
    Numerical = 4,
    /// Output buffer is shorter than required.
    BufferTooSmall = 5,
    Internal = 6,
    Panic = 7,
}

/// A complex number, layout-compatible with `double _Complex`.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct FdbbdComplex {
    pub re: f64,
    pub im: f64,
}

impl From<C64> for FdbbdComplex {
    fn from(c: C64) -> Self {
        Self { re: c.re, im: c.im }
    }
}

impl From<FdbbdComplex> for C64 {
    fn from(c: FdbbdComplex) -> Self {
        C64::new(c.re, c.im)
    }
}

/// Opaque measurement operator (random codebook plus its FFT plan).
pub struct FdbbdOperator {
    op: MeasurementOp,
}

/// Opaque result of a full protocol run.
pub struct FdbbdProtocol {
    outcome: ProtocolOutcome,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let msg = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(msg));
}

fn status_of(err: &Error) -> FdbbdStatus {
    match err {
        Error::Parameter(_) | Error::Empty(_) | Error::StateSpaceTooLarge { .. } => FdbbdStatus::InvalidParameter,
        Error::Dimension { .. } => FdbbdStatus::DimensionMismatch,
        Error::Divergence { .. } | Error::Factorization(_) | Error::DegenerateSecret => FdbbdStatus::Numerical,
        Error::Round { source, .. } => status_of(source),
        _ => FdbbdStatus::Internal,
    }
}

struct Failure(FdbbdStatus, String);

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure(status_of(&e), e.to_string())
    }
}

fn fail(status: FdbbdStatus, msg: impl Into<String>) -> Failure {
    Failure(status, msg.into())
}

fn guard(f: impl FnOnce() -> Result<(), Failure>) -> FdbbdStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => FdbbdStatus::Ok,
        Ok(Err(Failure(status, msg))) => {
            set_error(msg);
            status
        }
        Err(payload) => {
            let msg = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "panic".into());
            set_error(format!("panic: {msg}"));
            FdbbdStatus::Panic
        }
    }
}

unsafe fn input<'a, T>(p: *const T, len: usize, name: &str) -> Result<&'a [T], Failure> {
    if len == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(fail(FdbbdStatus::NullPointer, format!("{name} is null")));
    }
    Ok(slice::from_raw_parts(p, len))
}

unsafe fn output<'a, T>(p: *mut T, len: usize, needed: usize, name: &str) -> Result<&'a mut [T], Failure> {
    if len < needed {
        return Err(fail(
            FdbbdStatus::BufferTooSmall,
            format!("{name} holds {len} elements, {needed} required"),
        ));
    }
    if p.is_null() && needed > 0 {
        return Err(fail(FdbbdStatus::NullPointer, format!("{name} is null")));
    }
    if needed == 0 {
        return Ok(&mut []);
    }
    Ok(slice::from_raw_parts_mut(p, needed))
}

unsafe fn out_ref<'a, T>(p: *mut T, name: &str) -> Result<&'a mut T, Failure> {
    p.as_mut().ok_or_else(|| fail(FdbbdStatus::NullPointer, format!("{name} is null")))
}

unsafe fn handle<'a, T>(p: *const T, name: &str) -> Result<&'a T, Failure> {
    p.as_ref().ok_or_else(|| fail(FdbbdStatus::NullPointer, format!("{name} is null")))
}

fn to_c64(x: &[FdbbdComplex]) -> Vec<C64> {
    x.iter().map(|&c| c.into()).collect()
}

fn write_complex(dst: &mut [FdbbdComplex], src: &[C64]) {
    for (d, &s) in dst.iter_mut().zip(src) {
        *d = s.into();
    }
}

/// Copies the last error message of this thread into `buf` (NUL-terminated,
/// truncated to `cap`). Returns the full message length excluding the NUL,
/// or 0 when no error has been recorded.
///
/// # Safety
/// `buf` must be null or valid for `cap` bytes.
#[no_mangle]
pub unsafe extern "C" fn fdbbd_last_error(buf: *mut c_char, cap: usize) -> usize {
    LAST_ERROR.with(|e| {
        let e = e.borrow();
        let Some(msg) = e.as_ref() else {
            if !buf.is_null() && cap > 0 {
                *buf = 0;
            }
            return 0;
        };
        let bytes = msg.as_bytes();
        if !buf.is_null() && cap > 0 {
            let n = bytes.len().min(cap - 1);
            ptr::copy_nonoverlapping(bytes.as_ptr().cast::<c_char>(), buf, n);
            *buf.add(n) = 0;
        }
        bytes.len()
    })
}

/// Creates an operator with a random complex Gaussian `mu x n` codebook
/// drawn from `seed`.
///
/// # Safety
/// `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn fdbbd_operator_new(mu: usize, n: usize, seed: u64, out: *mut *mut FdbbdOperator) -> FdbbdStatus {
    guard(|| {
        let out = out_ref(out, "out")?;
        if mu == 0 || n == 0 {
            return Err(fail(FdbbdStatus::InvalidParameter, "mu and n must be positive"));
        }
        let codebook = gen_codebook(mu, n, &mut rng::seeded(seed))?;
        *out = Box::into_raw(Box::new(FdbbdOperator {
            op: MeasurementOp::new(codebook),
        }));
        Ok(())
    })
}

/// Creates an operator from an explicit column-major `mu x n` codebook.
///
/// # Safety
/// `entries` must be valid for `mu * n` reads; `out` for writes.
#[no_mangle]
pub unsafe extern "C" fn fdbbd_operator_from_codebook(
    mu: usize,
    n: usize,
    entries: *const FdbbdComplex,
    out: *mut *mut FdbbdOperator,
) -> FdbbdStatus {
    guard(|| {
        let out = out_ref(out, "out")?;
        let entries = input(entries, mu * n, "entries")?;
        let codebook = Codebook::from_columns(mu, n, to_c64(entries))?;
        *out = Box::into_raw(Box::new(FdbbdOperator {
            op: MeasurementOp::new(codebook),
        }));
        Ok(())
    })
}

/// # Safety
/// `op` must be null or a handle from `fdbbd_operator_new*` not yet freed.
#[no_mangle]
pub unsafe extern "C" fn fdbbd_operator_free(op: *mut FdbbdOperator) {
    if !op.is_null() {
        drop(Box::from_raw(op));
    }
}

/// # Safety
/// `op` must be a live handle; `mu`/`n` null or valid for writes.
#[no_mangle]
pub unsafe extern "C" fn fdbbd_operator_dims(op: *const FdbbdOperator, mu: *mut usize, n: *mut usize) -> FdbbdStatus {
    guard(|| {
        let op = handle(op, "op")?;
        if let Some(m) = mu.as_mut() {
            *m = op.op.mu();
        }
        if let Some(c) = n.as_mut() {
            *c = op.op.n();
        }
        Ok(())
    })
}

/// `y = C(W)` for a column-major `mu x n` tensor `w`; `y` holds `mu` entries.
///
/// # Safety
/// Buffers must be valid for their stated lengths.
#[no_mangle]
pub unsafe extern "C" fn fdbbd_operator_apply(
    op: *const FdbbdOperator,
    w: *const FdbbdComplex,
    w_len: usize,
    y: *mut FdbbdComplex,
    y_len: usize,
) -> FdbbdStatus {
    guard(|| {
        let op = &handle(op, "op")?.op;
        let w = LiftedTensor::from_vec(op.mu(), op.n(), to_c64(input(w, w_len, "w")?))?;
        let result = op.apply(&w)?;
        write_complex(output(y, y_len, result.len(), "y")?, &result);
        Ok(())
    })
}

/// `W = C*(y)`, the adjoint; `w` holds `mu * n` entries.
///
/// # Safety
/// Buffers must be valid for their stated lengths.
#[no_mangle]
pub unsafe extern "C" fn fdbbd_operator_adjoint(
    op: *const FdbbdOperator,
    y: *const FdbbdComplex,
    y_len: usize,
    w: *mut FdbbdComplex,
    w_len: usize,
) -> FdbbdStatus {
    guard(|| {
        let op = &handle(op, "op")?.op;
        let result = op.apply_adjoint(&to_c64(input(y, y_len, "y")?))?;
        write_complex(output(w, w_len, result.as_vec().len(), "w")?, result.as_vec());
        Ok(())
    })
}

/// Blind recovery of an `(s, k)`-sparse tensor from `y` with default solver
/// settings. Writes the `mu * n` estimate to `w`; `iterations` and
/// `residual` may be null.
///
/// # Safety
/// Buffers must be valid for their stated lengths.
#[no_mangle]
pub unsafe extern "C" fn fdbbd_hihtp_solve(
    op: *const FdbbdOperator,
    y: *const FdbbdComplex,
    y_len: usize,
    s: usize,
    k: usize,
    w: *mut FdbbdComplex,
    w_len: usize,
    iterations: *mut usize,
    residual: *mut f64,
) -> FdbbdStatus {
    guard(|| {
        let op = &handle(op, "op")?.op;
        let y = to_c64(input(y, y_len, "y")?);
        let fit = hihtp::solve(op, &y, &HihtpConfig::new(s, k), None)?;
        write_complex(output(w, w_len, fit.tensor.as_vec().len(), "w")?, fit.tensor.as_vec());
        if let Some(it) = iterations.as_mut() {
            *it = fit.iterations;
        }
        if let Some(r) = residual.as_mut() {
            *r = fit.residual;
        }
        Ok(())
    })
}

/// Combines a recovered `mu x n` tensor with the caller's own dense length-`n`
/// signal into the length-`mu * n` secret.
///
/// # Safety
/// Buffers must be valid for their stated lengths.
#[no_mangle]
pub unsafe extern "C" fn fdbbd_compute_secret(
    mu: usize,
    n: usize,
    recovered: *const FdbbdComplex,
    own_beta: *const FdbbdComplex,
    secret: *mut FdbbdComplex,
    secret_len: usize,
) -> FdbbdStatus {
    guard(|| {
        let w = LiftedTensor::from_vec(mu, n, to_c64(input(recovered, mu * n, "recovered")?))?;
        let dense = to_c64(input(own_beta, n, "own_beta")?);
        let (support, values): (Vec<usize>, Vec<C64>) =
            dense.iter().enumerate().filter(|(_, v)| **v != C64::new(0.0, 0.0)).map(|(i, v)| (i, *v)).unzip();
        let beta = SparseSignal::new(n, support, values)?;
        let c = keygen::compute_secret(&w, &beta)?.c;
        write_complex(output(secret, secret_len, c.len(), "secret")?, &c);
        Ok(())
    })
}

/// Lower bound (nats) on the eavesdropper's uncertainty about one party's
/// signal, for `0 < gamma <= 1`.
///
/// # Safety
/// `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn fdbbd_h_gamma(k: usize, gamma: f64, out: *mut f64) -> FdbbdStatus {
    guard(|| {
        let out = out_ref(out, "out")?;
        *out = security::h_gamma(k, gamma)?;
        Ok(())
    })
}

/// Achievable secret-key rate (nats per round) with a slack `beta_slack` in
/// `(0, 1)`. `achievable` is set to 1 when the rate is positive.
///
/// # Safety
/// `rate` must be valid for writes; `achievable` null or valid.
#[no_mangle]
pub unsafe extern "C" fn fdbbd_key_rate(
    k: usize,
    s: usize,
    gamma: f64,
    varsigma: f64,
    sigma: f64,
    beta_slack: f64,
    rate: *mut f64,
    achievable: *mut u8,
) -> FdbbdStatus {
    guard(|| {
        let rate = out_ref(rate, "rate")?;
        let r = security::key_rate(k, s, gamma, varsigma, sigma, beta_slack)?;
        *rate = r.rate;
        if let Some(a) = achievable.as_mut() {
            *a = u8::from(r.achievable);
        }
        Ok(())
    })
}

/// Runs the full protocol (`rounds` rounds, receiver SNR `snr_db`; pass
/// `INFINITY` for noiseless) with default quantizer and hash settings.
///
/// # Safety
/// `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn fdbbd_protocol_run(
    n: usize,
    mu: usize,
    k: usize,
    s: usize,
    rounds: usize,
    snr_db: f64,
    seed: u64,
    out: *mut *mut FdbbdProtocol,
) -> FdbbdStatus {
    guard(|| {
        let out = out_ref(out, "out")?;
        let mut cfg = ProtocolConfig::new(n, mu, k, s);
        cfg.rounds = rounds;
        cfg.snr_db = snr_db;
        let outcome = keygen::run_protocol(&cfg, seed)?;
        *out = Box::into_raw(Box::new(FdbbdProtocol { outcome }));
        Ok(())
    })
}

/// # Safety
/// `p` must be null or a handle from `fdbbd_protocol_run` not yet freed.
#[no_mangle]
pub unsafe extern "C" fn fdbbd_protocol_free(p: *mut FdbbdProtocol) {
    if !p.is_null() {
        drop(Box::from_raw(p));
    }
}

/// Writes 1 to `agree` when both parties derived the same key.
///
/// # Safety
/// `p` must be a live handle; `agree` valid for writes.
#[no_mangle]
pub unsafe extern "C" fn fdbbd_protocol_keys_agree(p: *const FdbbdProtocol, agree: *mut u8) -> FdbbdStatus {
    guard(|| {
        let p = handle(p, "protocol")?;
        *out_ref(agree, "agree")? = u8::from(p.outcome.keys_agree);
        Ok(())
    })
}

/// Copies one party's key bits (one byte per bit, 0 or 1) into `bits`.
/// `party` is 0 for Alice, 1 for Bob. `len_out` receives the key length and
/// may be queried alone by passing `bits = NULL, cap = 0`.
///
/// # Safety
/// `p` must be a live handle; `bits` valid for `cap` bytes; `len_out` null or valid.
#[no_mangle]
pub unsafe extern "C" fn fdbbd_protocol_key(
    p: *const FdbbdProtocol,
    party: u32,
    bits: *mut u8,
    cap: usize,
    len_out: *mut usize,
) -> FdbbdStatus {
    guard(|| {
        let p = handle(p, "protocol")?;
        let key = match party {
            0 => &p.outcome.alice.key,
            1 => &p.outcome.bob.key,
            _ => return Err(fail(FdbbdStatus::InvalidParameter, format!("party must be 0 or 1, got {party}"))),
        };
        if let Some(l) = len_out.as_mut() {
            *l = key.len();
        }
        if bits.is_null() && cap == 0 {
            return Ok(());
        }
        for (dst, &b) in output(bits, cap, key.len(), "bits")?.iter_mut().zip(key) {
            *dst = u8::from(b);
        }
        Ok(())
    })
}

/// Mean per-round RMSE between the two parties' secrets.
///
/// # Safety
/// `p` must be a live handle; `out` valid for writes.
#[no_mangle]
pub unsafe extern "C" fn fdbbd_protocol_mean_rmse(p: *const FdbbdProtocol, out: *mut f64) -> FdbbdStatus {
    guard(|| {
        let p = handle(p, "protocol")?;
        let r = &p.outcome.per_round_rmse;
        *out_ref(out, "out")? = r.iter().sum::<f64>() / r.len().max(1) as f64;
        Ok(())
    })
}
