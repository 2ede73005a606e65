//! C ABI over `dipadmm`.
//!
//! Every fallible function returns a [`DipStatus`]; on failure a message is
//! kept per thread and can be read with [`dip_last_error`]. Objects cross
//! the boundary as opaque handles that the caller frees with the matching
//! `_free` function. Images are `height x width x channels` arrays of
//! doubles, row-major with channels innermost.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;

use dipadmm::harness::{self, ExperimentConfig};
use dipadmm::image::{ImageTensor, Shape};
use dipadmm::nn::{Generator, GeneratorConfig};
use dipadmm::priors::{self, NlmParams};
use dipadmm::spectral::{self, SpectralBasis};
use dipadmm::Error;

/// Result codes shared by all functions.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DipStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    ShapeMismatch = 3,
    InvalidConfig = 4,
    NotConverged = 5,
    FingerprintMismatch = 6,
    NonFinite = 7,
    Io = 8,
    Panic = 9,
}

/// A generator: architecture, output shape and initial weights.
pub struct DipGenerator {
    inner: Generator,
}

/// Leading eigenpairs of `J J^T`.
pub struct DipSpectrum {
    inner: SpectralBasis,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: impl Into<String>) {
    let msg = msg.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(msg).unwrap_or_default());
}

fn status_of(err: &Error) -> DipStatus {
    match err {
        Error::InvalidConfig(_) => DipStatus::InvalidConfig,
        Error::ShapeMismatch { .. } | Error::LengthMismatch { .. } => DipStatus::ShapeMismatch,
        Error::NotConverged { .. } => DipStatus::NotConverged,
        Error::FingerprintMismatch { .. } => DipStatus::FingerprintMismatch,
        Error::NonFinite(_) => DipStatus::NonFinite,
        Error::Io(_) | Error::Image(_) | Error::Format { .. } => DipStatus::Io,
        _ => DipStatus::InvalidArgument,
    }
}

/// Runs `f`, turning errors and panics into a status plus message.
fn guard(f: impl FnOnce() -> Result<(), (DipStatus, String)>) -> DipStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            set_error("");
            DipStatus::Ok
        }
        Ok(Err((status, msg))) => {
            set_error(msg);
            status
        }
        Err(_) => {
            set_error("internal panic");
            DipStatus::Panic
        }
    }
}

type FfiResult<T> = Result<T, (DipStatus, String)>;

fn lift<T>(r: dipadmm::Result<T>) -> FfiResult<T> {
    r.map_err(|e| (status_of(&e), e.to_string()))
}

fn null(name: &str) -> (DipStatus, String) {
    (DipStatus::NullPointer, format!("`{name}` is null"))
}

fn invalid(msg: impl Into<String>) -> (DipStatus, String) {
    (DipStatus::InvalidArgument, msg.into())
}

/// # Safety
/// `p` must be null or point to `len` readable doubles.
unsafe fn input<'a>(p: *const f64, len: usize, name: &str) -> FfiResult<&'a [f64]> {
    if len == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(null(name));
    }
    Ok(std::slice::from_raw_parts(p, len))
}

/// # Safety
/// `p` must be null or point to `len` writable doubles.
unsafe fn output<'a>(p: *mut f64, len: usize, name: &str) -> FfiResult<&'a mut [f64]> {
    if len == 0 {
        return Ok(&mut []);
    }
    if p.is_null() {
        return Err(null(name));
    }
    Ok(std::slice::from_raw_parts_mut(p, len))
}

fn write_into(dst: &mut [f64], src: &[f64]) -> FfiResult<()> {
    if dst.len() != src.len() {
        return Err((
            DipStatus::ShapeMismatch,
            format!("output buffer holds {}, result has {}", dst.len(), src.len()),
        ));
    }
    dst.copy_from_slice(src);
    Ok(())
}

/// # Safety
/// `p` must be null or a NUL-terminated string.
unsafe fn text<'a>(p: *const c_char, name: &str) -> FfiResult<&'a str> {
    if p.is_null() {
        return Err(null(name));
    }
    CStr::from_ptr(p).to_str().map_err(|_| invalid(format!("`{name}` is not UTF-8")))
}

fn shape(height: usize, width: usize, channels: usize) -> FfiResult<Shape> {
    if height == 0 || width == 0 || channels == 0 {
        return Err(invalid("image dimensions must be positive"));
    }
    Ok(Shape::new(height, width, channels))
}

/// The message for the last failed call on this thread; empty after a
/// success. Valid until the next call into this library on the thread.
#[no_mangle]
pub extern "C" fn dip_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn dip_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Builds a generator for `height x width x channels` outputs.
///
/// `level_channels` lists `levels` channel counts; pass `levels = 0` for the
/// default architecture. `input_channels = 0` also means the default.
///
/// # Safety
/// `level_channels` must point to `levels` values when `levels > 0`; `out`
/// must be writable.
#[no_mangle]
pub unsafe extern "C" fn dip_generator_new(
    level_channels: *const usize,
    levels: usize,
    input_channels: usize,
    seed: u64,
    height: usize,
    width: usize,
    channels: usize,
    out: *mut *mut DipGenerator,
) -> DipStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        *out = ptr::null_mut();
        let mut cfg = GeneratorConfig {
            seed,
            ..GeneratorConfig::default()
        };
        if levels > 0 {
            if level_channels.is_null() {
                return Err(null("level_channels"));
            }
            cfg.level_channels = std::slice::from_raw_parts(level_channels, levels).to_vec();
        }
        if input_channels > 0 {
            cfg.input_channels = input_channels;
        }
        let g = lift(Generator::new(cfg, shape(height, width, channels)?))?;
        *out = Box::into_raw(Box::new(DipGenerator { inner: g }));
        Ok(())
    })
}

/// # Safety
/// `g` must be null or a handle from [`dip_generator_new`] not yet freed.
#[no_mangle]
pub unsafe extern "C" fn dip_generator_free(g: *mut DipGenerator) {
    if !g.is_null() {
        drop(Box::from_raw(g));
    }
}

/// # Safety
/// `g` must be a live handle.
unsafe fn generator<'a>(g: *const DipGenerator) -> FfiResult<&'a Generator> {
    g.as_ref().map(|g| &g.inner).ok_or_else(|| null("generator"))
}

/// Number of weights, or 0 for a null handle.
///
/// # Safety
/// `g` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn dip_generator_weight_count(g: *const DipGenerator) -> usize {
    g.as_ref().map_or(0, |g| g.inner.weight_count())
}

/// Number of output values, or 0 for a null handle.
///
/// # Safety
/// `g` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn dip_generator_output_len(g: *const DipGenerator) -> usize {
    g.as_ref().map_or(0, |g| g.inner.output_shape().len())
}

/// Copies the initial weights into `theta`.
///
/// # Safety
/// `g` must be a live handle and `theta` must hold `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn dip_generator_theta0(g: *const DipGenerator, theta: *mut f64, len: usize) -> DipStatus {
    guard(|| {
        let g = generator(g)?;
        write_into(output(theta, len, "theta")?, g.theta0())
    })
}

/// `G(theta)` into `image`.
///
/// # Safety
/// `g` must be a live handle; `theta` and `image` must hold the given counts.
#[no_mangle]
pub unsafe extern "C" fn dip_generator_forward(
    g: *const DipGenerator,
    theta: *const f64,
    theta_len: usize,
    image: *mut f64,
    image_len: usize,
) -> DipStatus {
    guard(|| {
        let g = generator(g)?;
        let x = lift(g.forward(input(theta, theta_len, "theta")?))?;
        write_into(output(image, image_len, "image")?, x.as_slice())
    })
}

/// `J(theta)^T seed`, the weight gradient of any loss whose output gradient
/// is `seed`.
///
/// # Safety
/// `g` must be a live handle; all buffers must hold the given counts.
#[no_mangle]
pub unsafe extern "C" fn dip_generator_loss_grad(
    g: *const DipGenerator,
    theta: *const f64,
    theta_len: usize,
    seed: *const f64,
    seed_len: usize,
    grad: *mut f64,
    grad_len: usize,
) -> DipStatus {
    guard(|| {
        let g = generator(g)?;
        let seed = lift(ImageTensor::new(g.output_shape(), input(seed, seed_len, "seed")?.to_vec()))?;
        let dtheta = lift(g.loss_grad(input(theta, theta_len, "theta")?, &seed))?;
        write_into(output(grad, grad_len, "grad")?, &dtheta)
    })
}

/// Top-`k` eigenpairs of `J J^T` at the initial weights.
///
/// When Lanczos stops early the status is `NotConverged` and `out` still
/// receives the pairs that did converge.
///
/// # Safety
/// `g` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn dip_spectrum_compute(
    g: *const DipGenerator,
    k: usize,
    seed: u64,
    out: *mut *mut DipSpectrum,
) -> DipStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        *out = ptr::null_mut();
        let g = generator(g)?;
        match spectral::jjt_topk(g, g.theta0(), k, seed) {
            Ok(b) => {
                *out = Box::into_raw(Box::new(DipSpectrum { inner: b }));
                Ok(())
            }
            Err(Error::NotConverged {
                requested,
                converged,
                iterations,
                partial,
            }) => {
                *out = Box::into_raw(Box::new(DipSpectrum { inner: *partial }));
                Err((
                    DipStatus::NotConverged,
                    format!("{converged} of {requested} pairs converged after {iterations} iterations"),
                ))
            }
            Err(e) => lift(Err(e)),
        }
    })
}

/// Reads a spectrum file written by the command-line tool.
///
/// # Safety
/// `path` must be a NUL-terminated string and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn dip_spectrum_read(path: *const c_char, out: *mut *mut DipSpectrum) -> DipStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        *out = ptr::null_mut();
        let b = lift(spectral::read_spectrum(Path::new(text(path, "path")?)))?;
        *out = Box::into_raw(Box::new(DipSpectrum { inner: b }));
        Ok(())
    })
}

/// # Safety
/// `s` must be null or a live spectrum handle.
#[no_mangle]
pub unsafe extern "C" fn dip_spectrum_free(s: *mut DipSpectrum) {
    if !s.is_null() {
        drop(Box::from_raw(s));
    }
}

/// Number of eigenpairs held, or 0 for a null handle.
///
/// # Safety
/// `s` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn dip_spectrum_k(s: *const DipSpectrum) -> usize {
    s.as_ref().map_or(0, |s| s.inner.k())
}

/// Length of each eigenvector, or 0 for a null handle.
///
/// # Safety
/// `s` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn dip_spectrum_n(s: *const DipSpectrum) -> usize {
    s.as_ref().map_or(0, |s| s.inner.n)
}

/// Copies the eigenvalues, largest first.
///
/// # Safety
/// `s` must be a live handle and `values` must hold `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn dip_spectrum_eigenvalues(s: *const DipSpectrum, values: *mut f64, len: usize) -> DipStatus {
    guard(|| {
        let s = s.as_ref().ok_or_else(|| null("spectrum"))?;
        write_into(output(values, len, "values")?, &s.inner.eigenvalues)
    })
}

/// Copies eigenvector `index`.
///
/// # Safety
/// `s` must be a live handle and `vector` must hold `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn dip_spectrum_vector(
    s: *const DipSpectrum,
    index: usize,
    vector: *mut f64,
    len: usize,
) -> DipStatus {
    guard(|| {
        let s = s.as_ref().ok_or_else(|| null("spectrum"))?;
        if index >= s.inner.k() {
            return Err(invalid(format!("index {index} out of {} eigenpairs", s.inner.k())));
        }
        write_into(output(vector, len, "vector")?, s.inner.vector(index))
    })
}

/// `argmin_x 1/2 ||x - v||^2 + lambda sum |x_{i+1} - x_i|`.
///
/// # Safety
/// `v` and `out` must hold `len` doubles; they may alias.
#[no_mangle]
pub unsafe extern "C" fn dip_prox_tv1d(v: *const f64, len: usize, lambda: f64, out: *mut f64) -> DipStatus {
    guard(|| {
        if lambda.is_nan() || lambda < 0.0 {
            return Err(invalid("lambda must be >= 0"));
        }
        let x = priors::prox_tv1d(input(v, len, "v")?, lambda);
        write_into(output(out, len, "out")?, &x)
    })
}

/// Anisotropic 2D total-variation prox, per channel.
///
/// # Safety
/// `image` and `out` must hold `height * width * channels` doubles.
#[no_mangle]
pub unsafe extern "C" fn dip_prox_tv2d(
    image: *const f64,
    height: usize,
    width: usize,
    channels: usize,
    lambda: f64,
    out: *mut f64,
) -> DipStatus {
    guard(|| {
        if lambda.is_nan() || lambda < 0.0 {
            return Err(invalid("lambda must be >= 0"));
        }
        let s = shape(height, width, channels)?;
        let v = lift(ImageTensor::new(s, input(image, s.len(), "image")?.to_vec()))?;
        write_into(output(out, s.len(), "out")?, priors::prox_tv2d(&v, lambda).as_slice())
    })
}

/// Elementwise `sign(v) max(|v| - lambda, 0)`.
///
/// # Safety
/// `v` and `out` must hold `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn dip_soft_threshold(v: *const f64, len: usize, lambda: f64, out: *mut f64) -> DipStatus {
    guard(|| {
        if lambda.is_nan() || lambda < 0.0 {
            return Err(invalid("lambda must be >= 0"));
        }
        let x = priors::soft_threshold(input(v, len, "v")?, lambda);
        write_into(output(out, len, "out")?, &x)
    })
}

/// Non-local means with a 7x7 patch.
///
/// # Safety
/// `image` and `out` must hold `height * width * channels` doubles.
#[no_mangle]
pub unsafe extern "C" fn dip_nlm_denoise(
    image: *const f64,
    height: usize,
    width: usize,
    channels: usize,
    sigma: f64,
    patch_distance: usize,
    cutoff: f64,
    out: *mut f64,
) -> DipStatus {
    guard(|| {
        let s = shape(height, width, channels)?;
        let v = lift(ImageTensor::new(s, input(image, s.len(), "image")?.to_vec()))?;
        let params = NlmParams {
            sigma,
            patch_distance,
            cutoff,
            ..NlmParams::default()
        };
        let x = lift(priors::nlm_denoise(&v, &params))?;
        write_into(output(out, s.len(), "out")?, x.as_slice())
    })
}

/// PSNR in dB of `image` against `reference`, peak taken from the reference.
///
/// # Safety
/// Both arrays must hold `len` doubles; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn dip_psnr(reference: *const f64, image: *const f64, len: usize, out: *mut f64) -> DipStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        if len == 0 {
            return Err(invalid("empty images"));
        }
        let s = Shape::new(1, len, 1);
        let r = lift(ImageTensor::new(s, input(reference, len, "reference")?.to_vec()))?;
        let x = lift(ImageTensor::new(s, input(image, len, "image")?.to_vec()))?;
        *out = lift(harness::psnr(&r, &x))?;
        Ok(())
    })
}

/// Runs one experiment described by `key=value` lines (the config file
/// format) and fills its output directory. `final_psnr` may be null; it
/// receives NaN when the run has no ground truth.
///
/// # Safety
/// `config` must be a NUL-terminated string; `final_psnr` null or writable.
#[no_mangle]
pub unsafe extern "C" fn dip_run_experiment(config: *const c_char, final_psnr: *mut f64) -> DipStatus {
    guard(|| {
        let cfg = lift(ExperimentConfig::parse(text(config, "config")?))?;
        let out = lift(harness::run_experiment(&cfg))?;
        if !final_psnr.is_null() {
            *final_psnr = out.trace.final_psnr().unwrap_or(f64::NAN);
        }
        Ok(())
    })
}
