//! C ABI over the reconstruction core.
//!
//! Every object crosses the boundary as an opaque heap handle that the caller
//! releases with the matching `*_free`. Functions return a [`ReconStatus`];
//! on failure, `recon_last_error` describes what went wrong on this thread.
//! Panics are caught at the boundary and reported as `RECON_STATUS_PANIC`.

use std::cell::RefCell;
use std::ffi::{c_char, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;
use std::slice;

use recon::ortho::{run_discrete, DiscreteMode, PinvOracle, SamplingOperator};
use recon::samplers::{encode_if, sample, KernelFamily};
use recon::serial::RelaxationSchedule;
use recon::signal::{random_bandlimited, GridSignal, GridSpec, MultiSignal, SpectrumProfile, Subspace};
use recon::ReconError;

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ReconStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Dimension = 3,
    BufferTooSmall = 4,
    Numerical = 5,
    Diverged = 6,
    DegenerateSampling = 7,
    Calibration = 8,
    Parse = 9,
    Io = 10,
    Panic = 99,
}

/// Iteration variants accepted by [`recon_reconstruct`].
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ReconMode {
    Plain = 0,
    Relaxed = 1,
    Multiplierless = 2,
}

/// A (possibly multi-channel) periodic signal on a uniform grid.
pub struct ReconSignal(MultiSignal);

/// A family of sampling kernels.
pub struct ReconFamily(KernelFamily);

/// The sampling operator of a kernel family on the band-limited space.
pub struct ReconOperator(SamplingOperator);

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).expect("nul bytes removed");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(e: &ReconError) -> ReconStatus {
    match e {
        ReconError::Dimension(_) => ReconStatus::Dimension,
        ReconError::Numerical(_) | ReconError::TableRange { .. } => ReconStatus::Numerical,
        ReconError::Diverged(_) => ReconStatus::Diverged,
        ReconError::DegenerateSampling(_) | ReconError::DegenerateHyperplane(_) => ReconStatus::DegenerateSampling,
        ReconError::Calibration(_) => ReconStatus::Calibration,
        ReconError::Parse(_) => ReconStatus::Parse,
        ReconError::Io(_) => ReconStatus::Io,
        _ => ReconStatus::InvalidArgument,
    }
}

struct Failure(ReconStatus, String);

impl From<ReconError> for Failure {
    fn from(e: ReconError) -> Self {
        Failure(status_of(&e), e.to_string())
    }
}

fn guard(f: impl FnOnce() -> Result<(), Failure>) -> ReconStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            LAST_ERROR.with(|e| *e.borrow_mut() = None);
            ReconStatus::Ok
        }
        Ok(Err(Failure(status, msg))) => {
            set_error(msg);
            status
        }
        Err(payload) => {
            let msg = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            set_error(format!("panic: {msg}"));
            ReconStatus::Panic
        }
    }
}

fn null(what: &str) -> Failure {
    Failure(ReconStatus::NullPointer, format!("{what} is null"))
}

unsafe fn handle<'a, T>(p: *const T, what: &str) -> Result<&'a T, Failure> {
    p.as_ref().ok_or_else(|| null(what))
}

unsafe fn input<'a>(p: *const f64, len: usize, what: &str) -> Result<&'a [f64], Failure> {
    if len == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(null(what));
    }
    Ok(slice::from_raw_parts(p, len))
}

unsafe fn output<'a>(p: *mut f64, len: usize, what: &str) -> Result<&'a mut [f64], Failure> {
    if len == 0 {
        return Ok(&mut []);
    }
    if p.is_null() {
        return Err(null(what));
    }
    Ok(slice::from_raw_parts_mut(p, len))
}

unsafe fn emit<T>(out: *mut *mut T, value: T) -> Result<(), Failure> {
    if out.is_null() {
        return Err(null("output handle"));
    }
    *out = Box::into_raw(Box::new(value));
    Ok(())
}

/// Message for the last failed call on this thread, or null. The pointer is
/// valid until the next call into the library on the same thread.
#[no_mangle]
pub extern "C" fn recon_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn recon_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Random real band-limited single-channel signal with a flat spectrum.
///
/// # Safety
/// `out` must be a valid pointer to writable handle storage.
#[no_mangle]
pub unsafe extern "C" fn recon_signal_random(period: usize, rate: usize, seed: u64, out: *mut *mut ReconSignal) -> ReconStatus {
    guard(|| {
        let spec = GridSpec::new(period, rate)?;
        let x = random_bandlimited(spec, &SpectrumProfile::flat(), seed)?;
        emit(out, ReconSignal(x.into()))
    })
}

/// Signal from channel-major grid values, `channels · period · rate` of them.
///
/// # Safety
/// `values` must point to `len` readable doubles; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn recon_signal_from_values(
    period: usize,
    rate: usize,
    channels: usize,
    values: *const f64,
    len: usize,
    out: *mut *mut ReconSignal,
) -> ReconStatus {
    guard(|| {
        let spec = GridSpec::new(period, rate)?;
        let v = input(values, len, "values")?;
        if channels == 0 || len != channels * spec.len() {
            return Err(Failure(
                ReconStatus::Dimension,
                format!("{len} values for {channels} channel(s) of {} points", spec.len()),
            ));
        }
        let chans = v
            .chunks(spec.len())
            .map(|c| GridSignal::new(spec, c.to_vec()))
            .collect::<Result<Vec<_>, _>>()?;
        emit(out, ReconSignal(MultiSignal::new(chans)?))
    })
}

/// Grid points per channel.
///
/// # Safety
/// `signal` must be a live handle or null.
#[no_mangle]
pub unsafe extern "C" fn recon_signal_len(signal: *const ReconSignal) -> usize {
    signal.as_ref().map_or(0, |s| s.0.spec().len())
}

/// # Safety
/// `signal` must be a live handle or null.
#[no_mangle]
pub unsafe extern "C" fn recon_signal_channels(signal: *const ReconSignal) -> usize {
    signal.as_ref().map_or(0, |s| s.0.num_channels())
}

/// Copies one channel's grid values into `out` (`len` must equal the grid
/// length).
///
/// # Safety
/// `signal` must be a live handle; `out` must point to `len` writable doubles.
#[no_mangle]
pub unsafe extern "C" fn recon_signal_values(signal: *const ReconSignal, channel: usize, out: *mut f64, len: usize) -> ReconStatus {
    guard(|| {
        let s = &handle(signal, "signal")?.0;
        if channel >= s.num_channels() {
            return Err(Failure(ReconStatus::InvalidArgument, format!("channel {channel} of {}", s.num_channels())));
        }
        let v = s.channel(channel).values();
        if len != v.len() {
            return Err(Failure(ReconStatus::BufferTooSmall, format!("buffer holds {len}, signal has {}", v.len())));
        }
        output(out, len, "out")?.copy_from_slice(v);
        Ok(())
    })
}

/// `‖a − b‖² / ‖b‖²`.
///
/// # Safety
/// Both handles must be live.
#[no_mangle]
pub unsafe extern "C" fn recon_signal_rel_error(a: *const ReconSignal, b: *const ReconSignal, out: *mut f64) -> ReconStatus {
    guard(|| {
        let (a, b) = (&handle(a, "a")?.0, &handle(b, "b")?.0);
        let e = a.sub(b)?.norm_sq() / b.norm_sq();
        *out.as_mut().ok_or_else(|| null("out"))? = e;
        Ok(())
    })
}

/// # Safety
/// `signal` must come from this library and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn recon_signal_free(signal: *mut ReconSignal) {
    if !signal.is_null() {
        drop(Box::from_raw(signal));
    }
}

/// Integrate-and-fire encoding of a single-channel signal over one period.
///
/// Writes the `n + 1` spike times (starting with the reset at 0) and the `n`
/// interval samples. With `times_cap` or `samples_cap` too small, returns
/// `RECON_STATUS_BUFFER_TOO_SMALL` and still stores the interval count `n`
/// in `count`.
///
/// # Safety
/// Buffers must hold their stated capacities; `count` must be writable.
#[no_mangle]
pub unsafe extern "C" fn recon_encode_if(
    signal: *const ReconSignal,
    bias: f64,
    threshold: f64,
    times: *mut f64,
    times_cap: usize,
    samples: *mut f64,
    samples_cap: usize,
    count: *mut usize,
) -> ReconStatus {
    guard(|| {
        let s = &handle(signal, "signal")?.0;
        if s.num_channels() != 1 {
            return Err(Failure(ReconStatus::InvalidArgument, "encoding takes a single-channel signal".into()));
        }
        let train = encode_if(s.channel(0), bias, threshold)?;
        let n = train.num_intervals();
        *count.as_mut().ok_or_else(|| null("count"))? = n;
        if times_cap < n + 1 || samples_cap < n {
            return Err(Failure(ReconStatus::BufferTooSmall, format!("{n} intervals need {} times and {n} samples", n + 1)));
        }
        output(times, n + 1, "times")?.copy_from_slice(train.times());
        output(samples, n, "samples")?.copy_from_slice(train.samples());
        Ok(())
    })
}

/// Integrate-and-fire kernels on the consecutive intervals of the strictly
/// increasing `partition` (`len ≥ 2` boundaries), with leak `alpha ≥ 0`.
///
/// # Safety
/// `partition` must point to `len` doubles; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn recon_family_integrate_fire(
    period: usize,
    rate: usize,
    partition: *const f64,
    len: usize,
    alpha: f64,
    out: *mut *mut ReconFamily,
) -> ReconStatus {
    guard(|| {
        let spec = GridSpec::new(period, rate)?;
        let family = KernelFamily::integrate_fire(input(partition, len, "partition")?, alpha, spec)?;
        emit(out, ReconFamily(family))
    })
}

/// Point-sampling kernels at `times`.
///
/// # Safety
/// `times` must point to `len` doubles; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn recon_family_point(period: usize, rate: usize, times: *const f64, len: usize, out: *mut *mut ReconFamily) -> ReconStatus {
    guard(|| {
        let spec = GridSpec::new(period, rate)?;
        emit(out, ReconFamily(KernelFamily::point(input(times, len, "times")?, spec)?))
    })
}

/// # Safety
/// `family` must be a live handle or null.
#[no_mangle]
pub unsafe extern "C" fn recon_family_len(family: *const ReconFamily) -> usize {
    family.as_ref().map_or(0, |f| f.0.len())
}

/// # Safety
/// `family` must come from this library and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn recon_family_free(family: *mut ReconFamily) {
    if !family.is_null() {
        drop(Box::from_raw(family));
    }
}

/// Samples `⟨x, h_k⟩`; `raw` and `normalized` (either may be null) receive
/// `s_k` and `s_k/‖h_k‖`, each `len = family length` long.
///
/// # Safety
/// Handles must be live; non-null buffers must hold `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn recon_sample(
    signal: *const ReconSignal,
    family: *const ReconFamily,
    raw: *mut f64,
    normalized: *mut f64,
    len: usize,
) -> ReconStatus {
    guard(|| {
        let (x, f) = (&handle(signal, "signal")?.0, &handle(family, "family")?.0);
        if len != f.len() {
            return Err(Failure(ReconStatus::BufferTooSmall, format!("buffers hold {len}, family has {}", f.len())));
        }
        let rec = sample(x, f)?;
        if !raw.is_null() {
            output(raw, len, "raw")?.copy_from_slice(&rec.raw);
        }
        if !normalized.is_null() {
            output(normalized, len, "normalized")?.copy_from_slice(&rec.normalized);
        }
        Ok(())
    })
}

/// Sampling operator of an orthogonal family on the band-limited space of
/// its channel count.
///
/// # Safety
/// `family` must be live; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn recon_operator_new(family: *const ReconFamily, out: *mut *mut ReconOperator) -> ReconStatus {
    guard(|| {
        let f = &handle(family, "family")?.0;
        let op = SamplingOperator::new(f, Subspace::bandlimited(f.num_channels()), true)?;
        emit(out, ReconOperator(op))
    })
}

/// # Safety
/// `op` must come from this library and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn recon_operator_free(op: *mut ReconOperator) {
    if !op.is_null() {
        drop(Box::from_raw(op));
    }
}

/// Runs `iterations` updates of the discrete-time iteration from zero on the
/// normalized samples and synthesizes the estimate. `lambda` is used by
/// `RECON_MODE_RELAXED` only and must lie in `(0, 2)`.
///
/// # Safety
/// `op` must be live; `s_hat` must hold `len` doubles; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn recon_reconstruct(
    op: *const ReconOperator,
    s_hat: *const f64,
    len: usize,
    iterations: usize,
    mode: ReconMode,
    lambda: f64,
    out: *mut *mut ReconSignal,
) -> ReconStatus {
    guard(|| {
        let op = &handle(op, "operator")?.0;
        let s = input(s_hat, len, "s_hat")?;
        let mode = match mode {
            ReconMode::Plain => DiscreteMode::Plain,
            ReconMode::Relaxed => DiscreteMode::Relaxed(RelaxationSchedule::constant(lambda)?),
            ReconMode::Multiplierless => DiscreteMode::Multiplierless,
        };
        let u0 = MultiSignal::zeros(op.spec(), op.subspace().num_channels());
        let run = run_discrete(op, s, &u0, iterations, &mode, None, &Default::default())?;
        emit(out, ReconSignal(run.estimate))
    })
}

/// Minimum-norm least-squares solution `Ŝ†ŝ` by thresholded SVD
/// (`rel_threshold` relative to the largest singular value).
///
/// # Safety
/// `op` must be live; `s_hat` must hold `len` doubles; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn recon_pinv_solve(
    op: *const ReconOperator,
    s_hat: *const f64,
    len: usize,
    rel_threshold: f64,
    out: *mut *mut ReconSignal,
) -> ReconStatus {
    guard(|| {
        let op = &handle(op, "operator")?.0;
        let oracle = PinvOracle::new(op, rel_threshold)?;
        emit(out, ReconSignal(oracle.solve(input(s_hat, len, "s_hat")?)?))
    })
}
