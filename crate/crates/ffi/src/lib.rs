//! C ABI over the `isac` toolkit.
//!
//! Conventions:
//!
//! - Every function returns an [`IsacStatus`]; results come back through
//!   out-pointers, which are only written on `ISAC_STATUS_OK`.
//! - Objects are opaque handles created by `*_new`-style functions and
//!   released with the matching `*_free`. Freeing `NULL` is a no-op.
//! - On failure, [`isac_last_error_message`] describes the error. The string
//!   is thread-local and valid until the next failing call on that thread.
//! - Matrices are dense, column-major arrays of [`IsacComplex`].
//! - Panics never cross the boundary; they surface as `ISAC_STATUS_PANIC`.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};

use isac::metrics::{acf, eisl, isl, psd};
use isac::pcs::{mutual_information, shape, AwgnChannel, MiMethod, ShapingProblem, DEFAULT_QUADRATURE_ORDER};
use isac::precoding::{comm_rate, ddp_precoder, lse_error_of, CMatrix, CommLink, TirModel};
use isac::pulse::{design_pulse, rrc_pulse, DelayRegion, DesignOptions, PulseSpec};
use isac::{AcfMode, BasisKind, BasisParams, Complex64, Constellation, Error, ModulationBasis, SymbolSource};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IsacComplex {
    pub re: f64,
    pub im: f64,
}

impl From<IsacComplex> for Complex64 {
    fn from(z: IsacComplex) -> Self {
        Complex64::new(z.re, z.im)
    }
}

impl From<Complex64> for IsacComplex {
    fn from(z: Complex64) -> Self {
        IsacComplex { re: z.re, im: z.im }
    }
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum IsacStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    DimensionMismatch = 3,
    Singular = 4,
    Infeasible = 5,
    NotConverged = 6,
    BufferTooSmall = 7,
    Panic = 8,
    Internal = 9,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum IsacBasisKind {
    Sc = 0,
    Ofdm = 1,
    Otfs = 2,
    Afdm = 3,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum IsacAcfMode {
    Periodic = 0,
    Aperiodic = 1,
}

pub struct IsacConstellation {
    inner: Constellation,
}

pub struct IsacBasis {
    inner: ModulationBasis,
}

pub struct IsacPulse {
    inner: PulseSpec,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

struct Fail {
    status: IsacStatus,
    message: String,
}

impl From<Error> for Fail {
    fn from(e: Error) -> Self {
        let status = match &e {
            Error::InvalidArgument(_) | Error::Config(_) | Error::NonFinite { .. } => IsacStatus::InvalidArgument,
            Error::DimensionMismatch { .. } => IsacStatus::DimensionMismatch,
            Error::Singular(_) => IsacStatus::Singular,
            Error::Infeasible(_) | Error::RateInfeasible { .. } => IsacStatus::Infeasible,
            Error::NotConverged { .. } => IsacStatus::NotConverged,
            _ => IsacStatus::Internal,
        };
        Fail { status, message: e.to_string() }
    }
}

fn fail(status: IsacStatus, message: impl Into<String>) -> Fail {
    Fail { status, message: message.into() }
}

fn set_last_error(msg: &str) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = c);
}

fn guard(f: impl FnOnce() -> Result<(), Fail>) -> IsacStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => IsacStatus::Ok,
        Ok(Err(e)) => {
            set_last_error(&e.message);
            e.status
        }
        Err(_) => {
            set_last_error("internal panic");
            IsacStatus::Panic
        }
    }
}

fn nonnull<T>(p: *const T, name: &str) -> Result<(), Fail> {
    if p.is_null() {
        Err(fail(IsacStatus::NullPointer, format!("{name} is NULL")))
    } else {
        Ok(())
    }
}

/// # Safety
/// `p` must be non-null and point to `len` readable elements.
unsafe fn slice<'a, T>(p: *const T, len: usize, name: &str) -> Result<&'a [T], Fail> {
    nonnull(p, name)?;
    Ok(std::slice::from_raw_parts(p, len))
}

/// # Safety
/// `p` must be non-null and point to `len` writable elements.
unsafe fn slice_mut<'a, T>(p: *mut T, len: usize, name: &str) -> Result<&'a mut [T], Fail> {
    nonnull(p, name)?;
    Ok(std::slice::from_raw_parts_mut(p, len))
}

/// # Safety
/// `out` must be a valid pointer to writable memory for one `T`.
unsafe fn write<T>(out: *mut T, v: T, name: &str) -> Result<(), Fail> {
    nonnull(out, name)?;
    out.write(v);
    Ok(())
}

/// # Safety
/// `p` must be NULL or a handle obtained from this library and not yet freed.
unsafe fn handle<'a, T>(p: *const T, name: &str) -> Result<&'a T, Fail> {
    nonnull(p, name)?;
    Ok(&*p)
}

fn to_complex(v: &[IsacComplex]) -> Vec<Complex64> {
    v.iter().map(|&z| z.into()).collect()
}

fn matrix(data: &[IsacComplex], rows: usize, cols: usize) -> CMatrix {
    CMatrix::from_column_slice(rows, cols, &to_complex(data))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn isac_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Message for the most recent failure on the calling thread, or an empty
/// string. Do not free.
#[no_mangle]
pub extern "C" fn isac_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

// --------------------------------------------------------------- constellation

/// Standard alphabet by label (`BPSK`, `QPSK`, `8PSK`, `16QAM`, `64QAM`, ...)
/// with uniform probabilities.
///
/// # Safety
/// `label` must be a NUL-terminated string; `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn isac_constellation_standard(
    label: *const c_char,
    out: *mut *mut IsacConstellation,
) -> IsacStatus {
    guard(|| {
        nonnull(label, "label")?;
        let label =
            CStr::from_ptr(label).to_str().map_err(|_| fail(IsacStatus::InvalidArgument, "label is not UTF-8"))?;
        let c = Constellation::standard(label, None)?;
        write(out, Box::into_raw(Box::new(IsacConstellation { inner: c })), "out")
    })
}

/// Custom alphabet. `probs` may be NULL for uniform probabilities.
///
/// # Safety
/// `points` (and `probs` if non-null) must hold `len` elements; `out` must
/// be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn isac_constellation_new(
    points: *const IsacComplex,
    probs: *const f64,
    len: usize,
    out: *mut *mut IsacConstellation,
) -> IsacStatus {
    guard(|| {
        let pts = to_complex(slice(points, len, "points")?);
        let probs =
            if probs.is_null() { vec![1.0 / len.max(1) as f64; len] } else { slice(probs, len, "probs")?.to_vec() };
        let c = Constellation::new("custom", pts, probs)?;
        write(out, Box::into_raw(Box::new(IsacConstellation { inner: c })), "out")
    })
}

/// # Safety
/// `c` must be a live handle; `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn isac_constellation_len(c: *const IsacConstellation, out: *mut usize) -> IsacStatus {
    guard(|| write(out, handle(c, "constellation")?.inner.len(), "out"))
}

/// `E|x|⁴ / (E|x|²)²` under the point probabilities.
///
/// # Safety
/// `c` must be a live handle; `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn isac_constellation_kurtosis(c: *const IsacConstellation, out: *mut f64) -> IsacStatus {
    guard(|| write(out, handle(c, "constellation")?.inner.kurtosis(), "out"))
}

/// Copies the point probabilities into `out`, which holds `cap` doubles.
///
/// # Safety
/// `c` must be a live handle; `out` must hold `cap` doubles.
#[no_mangle]
pub unsafe extern "C" fn isac_constellation_probs(
    c: *const IsacConstellation,
    out: *mut f64,
    cap: usize,
) -> IsacStatus {
    guard(|| {
        let p = handle(c, "constellation")?.inner.probs();
        if cap < p.len() {
            return Err(fail(IsacStatus::BufferTooSmall, format!("need {} elements, got {cap}", p.len())));
        }
        slice_mut(out, p.len(), "out")?.copy_from_slice(p);
        Ok(())
    })
}

/// Copies the points into `out`, which holds `cap` elements.
///
/// # Safety
/// `c` must be a live handle; `out` must hold `cap` elements.
#[no_mangle]
pub unsafe extern "C" fn isac_constellation_points(
    c: *const IsacConstellation,
    out: *mut IsacComplex,
    cap: usize,
) -> IsacStatus {
    guard(|| {
        let p = handle(c, "constellation")?.inner.points();
        if cap < p.len() {
            return Err(fail(IsacStatus::BufferTooSmall, format!("need {} elements, got {cap}", p.len())));
        }
        for (o, z) in slice_mut(out, p.len(), "out")?.iter_mut().zip(p) {
            *o = (*z).into();
        }
        Ok(())
    })
}

/// # Safety
/// `c` must be NULL or a live handle, which is invalid afterwards.
#[no_mangle]
pub unsafe extern "C" fn isac_constellation_free(c: *mut IsacConstellation) {
    if !c.is_null() {
        drop(Box::from_raw(c));
    }
}

// ---------------------------------------------------------------------- basis

/// Modulation basis of dimension `n` with default parameters.
///
/// # Safety
/// `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn isac_basis_new(kind: IsacBasisKind, n: usize, out: *mut *mut IsacBasis) -> IsacStatus {
    guard(|| {
        let kind = match kind {
            IsacBasisKind::Sc => BasisKind::Sc,
            IsacBasisKind::Ofdm => BasisKind::Ofdm,
            IsacBasisKind::Otfs => BasisKind::Otfs,
            IsacBasisKind::Afdm => BasisKind::Afdm,
        };
        let b = ModulationBasis::new(kind, n, BasisParams::default())?;
        write(out, Box::into_raw(Box::new(IsacBasis { inner: b })), "out")
    })
}

/// Time samples `x = U·s` for `n` symbols.
///
/// # Safety
/// `b` must be a live handle; `symbols` and `out` must hold `n` elements.
#[no_mangle]
pub unsafe extern "C" fn isac_basis_modulate(
    b: *const IsacBasis,
    symbols: *const IsacComplex,
    n: usize,
    out: *mut IsacComplex,
) -> IsacStatus {
    guard(|| {
        let b = &handle(b, "basis")?.inner;
        let x = b.modulate(&to_complex(slice(symbols, n, "symbols")?))?.time_samples;
        for (o, z) in slice_mut(out, n, "out")?.iter_mut().zip(x) {
            *o = z.into();
        }
        Ok(())
    })
}

/// # Safety
/// `b` must be NULL or a live handle, which is invalid afterwards.
#[no_mangle]
pub unsafe extern "C" fn isac_basis_free(b: *mut IsacBasis) {
    if !b.is_null() {
        drop(Box::from_raw(b));
    }
}

// -------------------------------------------------------------------- metrics

/// `|DFT(x)|²` of `n` samples into `out` (`n` doubles).
///
/// # Safety
/// `signal` and `out` must hold `n` elements.
#[no_mangle]
pub unsafe extern "C" fn isac_psd(signal: *const IsacComplex, n: usize, out: *mut f64) -> IsacStatus {
    guard(|| {
        let p = psd(&to_complex(slice(signal, n, "signal")?))?;
        slice_mut(out, n, "out")?.copy_from_slice(&p);
        Ok(())
    })
}

/// Integrated sidelobe level of one block; lags with `|k| ≤ exclude` are
/// left out.
///
/// # Safety
/// `signal` must hold `n` elements; `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn isac_isl(
    signal: *const IsacComplex,
    n: usize,
    mode: IsacAcfMode,
    exclude: usize,
    out: *mut f64,
) -> IsacStatus {
    guard(|| {
        let r = acf(&to_complex(slice(signal, n, "signal")?), acf_mode(mode))?;
        write(out, isl(&r, exclude)?, "out")
    })
}

fn acf_mode(m: IsacAcfMode) -> AcfMode {
    match m {
        IsacAcfMode::Periodic => AcfMode::Periodic,
        IsacAcfMode::Aperiodic => AcfMode::Aperiodic,
    }
}

/// Monte-Carlo expected ISL over `trials` random blocks. A NULL
/// `constellation` means Gaussian symbols.
///
/// # Safety
/// `b` must be a live handle, `c` NULL or a live handle, and the outputs
/// valid pointers.
#[no_mangle]
pub unsafe extern "C" fn isac_eisl(
    b: *const IsacBasis,
    c: *const IsacConstellation,
    mode: IsacAcfMode,
    trials: usize,
    seed: u64,
    mean: *mut f64,
    variance: *mut f64,
) -> IsacStatus {
    guard(|| {
        let b = &handle(b, "basis")?.inner;
        let src = if c.is_null() {
            SymbolSource::Gaussian
        } else {
            SymbolSource::Constellation(handle(c, "constellation")?.inner.clone())
        };
        nonnull(mean, "mean")?;
        nonnull(variance, "variance")?;
        let s = eisl(b, &src, trials, acf_mode(mode), 0, f64::INFINITY, seed)?;
        write(mean, s.mean, "mean")?;
        write(variance, s.variance, "variance")
    })
}

// ---------------------------------------------------------------------- pulse

/// Root-raised-cosine pulse with period `t`, roll-off `beta`, oversampling
/// `k` and span `span` symbols.
///
/// # Safety
/// `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn isac_pulse_rrc(
    t: f64,
    beta: f64,
    k: usize,
    span: usize,
    out: *mut *mut IsacPulse,
) -> IsacStatus {
    guard(|| {
        let p = rrc_pulse(t, beta, k, span)?;
        write(out, Box::into_raw(Box::new(IsacPulse { inner: p })), "out")
    })
}

/// Nyquist pulse minimizing the ACF energy over delays
/// `[region_start, region_end]` seconds. The region ISLR of the RRC start
/// point and of the result (dB) are written to the last two arguments.
///
/// # Safety
/// All out-pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn isac_pulse_design(
    t: f64,
    beta: f64,
    k: usize,
    span: usize,
    region_start: f64,
    region_end: f64,
    out: *mut *mut IsacPulse,
    islr_before_db: *mut f64,
    islr_after_db: *mut f64,
) -> IsacStatus {
    guard(|| {
        nonnull(out, "out")?;
        nonnull(islr_before_db, "islr_before_db")?;
        nonnull(islr_after_db, "islr_after_db")?;
        let region = DelayRegion::new(region_start, region_end)?;
        let d = design_pulse(t, beta, k, span, region, &DesignOptions::default())?;
        write(islr_before_db, d.report.islr_db_before, "islr_before_db")?;
        write(islr_after_db, d.report.islr_db_after, "islr_after_db")?;
        write(out, Box::into_raw(Box::new(IsacPulse { inner: d.pulse })), "out")
    })
}

/// Region ISLR in dB over `[start, end]` seconds.
///
/// # Safety
/// `p` must be a live handle; `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn isac_pulse_region_islr_db(
    p: *const IsacPulse,
    start: f64,
    end: f64,
    out: *mut f64,
) -> IsacStatus {
    guard(|| {
        let p = &handle(p, "pulse")?.inner;
        write(out, p.region_islr_db(&DelayRegion::new(start, end)?)?, "out")
    })
}

/// Largest `|g(kT)|` over nonzero integers `k`; zero for a Nyquist pulse.
///
/// # Safety
/// `p` must be a live handle; `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn isac_pulse_nyquist_defect(p: *const IsacPulse, out: *mut f64) -> IsacStatus {
    guard(|| write(out, handle(p, "pulse")?.inner.nyquist_defect(), "out"))
}

/// Writes the `span·k` dimensionless taps into `out` (capacity `cap`) and
/// their count into `len`.
///
/// # Safety
/// `p` must be a live handle; `out` must hold `cap` doubles; `len` valid.
#[no_mangle]
pub unsafe extern "C" fn isac_pulse_taps(
    p: *const IsacPulse,
    out: *mut f64,
    cap: usize,
    len: *mut usize,
) -> IsacStatus {
    guard(|| {
        let taps = handle(p, "pulse")?.inner.taps();
        write(len, taps.len(), "len")?;
        if cap < taps.len() {
            return Err(fail(IsacStatus::BufferTooSmall, format!("need {} elements, got {cap}", taps.len())));
        }
        slice_mut(out, taps.len(), "out")?.copy_from_slice(&taps);
        Ok(())
    })
}

/// # Safety
/// `p` must be NULL or a live handle, which is invalid afterwards.
#[no_mangle]
pub unsafe extern "C" fn isac_pulse_free(p: *mut IsacPulse) {
    if !p.is_null() {
        drop(Box::from_raw(p));
    }
}

// ------------------------------------------------------------------------ pcs

/// AWGN mutual information in bits at `snr_db` (unit signal power).
///
/// # Safety
/// `c` must be a live handle; `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn isac_mutual_information(
    c: *const IsacConstellation,
    snr_db: f64,
    out: *mut f64,
) -> IsacStatus {
    guard(|| {
        let c = &handle(c, "constellation")?.inner;
        let ch = AwgnChannel::from_snr_db(snr_db)?;
        let mi = mutual_information(c, &ch, MiMethod::Quadrature { order: DEFAULT_QUADRATURE_ORDER })?;
        write(out, mi, "out")
    })
}

/// Rate-maximizing probabilities on the points of `c` subject to unit power
/// and kurtosis at most `kappa`. The shaped alphabet is a new handle.
///
/// # Safety
/// `c` must be a live handle; `out` and `mi_bits` valid pointers.
#[no_mangle]
pub unsafe extern "C" fn isac_pcs_shape(
    c: *const IsacConstellation,
    kappa: f64,
    snr_db: f64,
    out: *mut *mut IsacConstellation,
    mi_bits: *mut f64,
) -> IsacStatus {
    guard(|| {
        let base = &handle(c, "constellation")?.inner;
        nonnull(out, "out")?;
        nonnull(mi_bits, "mi_bits")?;
        let r = shape(&ShapingProblem::new(base.clone(), kappa, AwgnChannel::from_snr_db(snr_db)?))?;
        let shaped = r.constellation(base)?;
        write(mi_bits, r.mi_bits, "mi_bits")?;
        write(out, Box::into_raw(Box::new(IsacConstellation { inner: shaped })), "out")
    })
}

// ------------------------------------------------------------------ precoding

/// Least-squares estimation error `σ² n_rx tr((X Xᴴ)⁻¹)` for the
/// `n_tx × l` block `x`.
///
/// # Safety
/// `x` must hold `n_tx·l` elements; `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn isac_lse_error(
    x: *const IsacComplex,
    n_tx: usize,
    l: usize,
    n_rx: usize,
    noise_var: f64,
    out: *mut f64,
) -> IsacStatus {
    guard(|| {
        let x = matrix(slice(x, n_tx * l, "x")?, n_tx, l);
        let model = TirModel { n_tx, n_rx, noise_var, prior_var: None, frame_len: l };
        model.validate()?;
        write(out, lse_error_of(&x, &model)?, "out")
    })
}

/// Whitening precoder `W = √(P l / n_tx) (S Sᴴ)^{−1/2}` for the `n_tx × l`
/// block `s`; `w` receives `n_tx·n_tx` elements.
///
/// # Safety
/// `s` must hold `n_tx·l` elements and `w` `n_tx·n_tx`.
#[no_mangle]
pub unsafe extern "C" fn isac_ddp_precoder(
    s: *const IsacComplex,
    n_tx: usize,
    l: usize,
    power: f64,
    w: *mut IsacComplex,
) -> IsacStatus {
    guard(|| {
        let s = matrix(slice(s, n_tx * l, "s")?, n_tx, l);
        let out = slice_mut(w, n_tx * n_tx, "w")?;
        let m = ddp_precoder(&s, power, n_tx)?;
        for (o, z) in out.iter_mut().zip(m.iter()) {
            *o = (*z).into();
        }
        Ok(())
    })
}

/// `log₂ det(I + H W Wᴴ Hᴴ / σ²)` for an `n_tx × n_tx` precoder and an
/// `n_cu × n_tx` channel.
///
/// # Safety
/// `w` must hold `n_tx·n_tx` elements, `h` `n_cu·n_tx`; `out` valid.
#[no_mangle]
pub unsafe extern "C" fn isac_comm_rate(
    w: *const IsacComplex,
    n_tx: usize,
    h: *const IsacComplex,
    n_cu: usize,
    noise_var: f64,
    out: *mut f64,
) -> IsacStatus {
    guard(|| {
        let w = matrix(slice(w, n_tx * n_tx, "w")?, n_tx, n_tx);
        let link = CommLink { h: matrix(slice(h, n_cu * n_tx, "h")?, n_cu, n_tx), noise_var, rate_floor: 0.0 };
        link.validate(n_tx)?;
        write(out, comm_rate(&w, &link)?, "out")
    })
}
