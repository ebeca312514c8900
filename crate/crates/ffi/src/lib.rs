//! C ABI over the `pinnsnn` core: opaque model handles, status codes and a
//! per-thread last-error message.
//!
//! Every function returns a [`PsStatus`]; outputs are written through
//! caller-provided pointers. Point batches are row-major `[n, input_dim]`
//! `double` arrays and outputs are row-major `[n, output_dim]`.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;

use pinnsnn::calibration::{calibrate, CalibrationConfig, CalibrationMode};
use pinnsnn::network::{evaluate_points, load_model, ModelFile, PointBatch};
use pinnsnn::snn::{clip_floor, convert, load_snn, simulate_event, snn_evaluate_points, ConversionConfig, Readout, SpikingNetwork};
use pinnsnn::tensor::Tensor;

/// Result of every call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PsStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Io = 3,
    Parse = 4,
    Shape = 5,
    Runtime = 6,
    Panic = 7,
}

/// Trained network.
pub struct PsAnn {
    model: ModelFile,
}

/// Converted spiking network.
pub struct PsSnn {
    network: SpikingNetwork,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: impl Into<String>) {
    let s = msg.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(s).expect("nul bytes removed"));
}

fn fail(status: PsStatus, msg: impl Into<String>) -> PsStatus {
    set_error(msg);
    status
}

fn guard(f: impl FnOnce() -> PsStatus) -> PsStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(s) => {
            if s == PsStatus::Ok {
                set_error("");
            }
            s
        }
        Err(_) => fail(PsStatus::Panic, "internal panic"),
    }
}

fn model_status(e: &pinnsnn::network::ModelIoError) -> PsStatus {
    use pinnsnn::network::ModelIoError as E;
    match e {
        E::Io { .. } => PsStatus::Io,
        E::Malformed(_) | E::Version { .. } => PsStatus::Parse,
        E::Shape(_) => PsStatus::Shape,
    }
}

fn snn_status(e: &pinnsnn::snn::SnnError) -> PsStatus {
    use pinnsnn::snn::SnnError as E;
    match e {
        E::Io(m) => model_status(m),
        E::InvalidThreshold { .. } | E::Timesteps(_) | E::NonFiniteInput(_) | E::EmptyBatch => PsStatus::InvalidArgument,
        E::Structure(_) | E::Network(_) | E::Tensor(_) => PsStatus::Shape,
        _ => PsStatus::Runtime,
    }
}

unsafe fn path_arg<'a>(path: *const c_char) -> Result<&'a Path, PsStatus> {
    if path.is_null() {
        return Err(fail(PsStatus::NullPointer, "path is null"));
    }
    CStr::from_ptr(path)
        .to_str()
        .map(Path::new)
        .map_err(|_| fail(PsStatus::InvalidArgument, "path is not valid UTF-8"))
}

unsafe fn points_arg(points: *const f64, n: usize, dim: usize) -> Result<Tensor, PsStatus> {
    if points.is_null() {
        return Err(fail(PsStatus::NullPointer, "points is null"));
    }
    if n == 0 {
        return Err(fail(PsStatus::InvalidArgument, "empty batch"));
    }
    let len = n
        .checked_mul(dim)
        .ok_or_else(|| fail(PsStatus::InvalidArgument, "batch size overflows"))?;
    let data = std::slice::from_raw_parts(points, len).to_vec();
    Tensor::new(vec![n, dim], data).map_err(|e| fail(PsStatus::Shape, e.to_string()))
}

unsafe fn write_out(result: &Tensor, out: *mut f64, out_len: usize) -> PsStatus {
    if out.is_null() {
        return fail(PsStatus::NullPointer, "output buffer is null");
    }
    if out_len < result.len() {
        return fail(
            PsStatus::InvalidArgument,
            format!("output buffer holds {out_len} values, {} needed", result.len()),
        );
    }
    ptr::copy_nonoverlapping(result.data().as_ptr(), out, result.len());
    PsStatus::Ok
}

/// Message of the last failed call on this thread, or an empty string.
/// Valid until the next call on the same thread.
#[no_mangle]
pub extern "C" fn ps_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Library version as a static string.
#[no_mangle]
pub extern "C" fn ps_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Staircase activation of one value; `out` receives the averaged output.
///
/// # Safety
/// `out` must point to a writable `double`.
#[no_mangle]
pub unsafe extern "C" fn ps_clip_floor(z: f64, timesteps: usize, theta_pos: f64, theta_neg: f64, out: *mut f64) -> PsStatus {
    guard(|| {
        if out.is_null() {
            return fail(PsStatus::NullPointer, "out is null");
        }
        match clip_floor(z, timesteps, theta_pos, theta_neg) {
            Ok(v) => {
                *out = v;
                PsStatus::Ok
            }
            Err(e) => fail(PsStatus::InvalidArgument, e.to_string()),
        }
    })
}

/// Loads a model file.
///
/// # Safety
/// `path` must be a NUL-terminated string; `out` a writable pointer slot.
#[no_mangle]
pub unsafe extern "C" fn ps_ann_load(path: *const c_char, out: *mut *mut PsAnn) -> PsStatus {
    guard(|| {
        if out.is_null() {
            return fail(PsStatus::NullPointer, "out is null");
        }
        let p = match path_arg(path) {
            Ok(p) => p,
            Err(s) => return s,
        };
        match load_model(p) {
            Ok(model) => {
                *out = Box::into_raw(Box::new(PsAnn { model }));
                PsStatus::Ok
            }
            Err(e) => fail(model_status(&e), e.to_string()),
        }
    })
}

/// Releases a handle from [`ps_ann_load`]. Null is ignored.
///
/// # Safety
/// `ann` must come from [`ps_ann_load`] and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn ps_ann_free(ann: *mut PsAnn) {
    if !ann.is_null() {
        drop(Box::from_raw(ann));
    }
}

/// Input and output widths of a network.
///
/// # Safety
/// `ann` must be a live handle; `input_dim` and `output_dim` writable.
#[no_mangle]
pub unsafe extern "C" fn ps_ann_dims(ann: *const PsAnn, input_dim: *mut usize, output_dim: *mut usize) -> PsStatus {
    guard(|| {
        if ann.is_null() || input_dim.is_null() || output_dim.is_null() {
            return fail(PsStatus::NullPointer, "null argument");
        }
        let spec = &(*ann).model.spec;
        *input_dim = spec.input_dim();
        *output_dim = spec.output_dim();
        PsStatus::Ok
    })
}

/// Network output at `n` points.
///
/// # Safety
/// `points` must hold `n * input_dim` values and `out` `out_len` values.
#[no_mangle]
pub unsafe extern "C" fn ps_ann_forward(
    ann: *const PsAnn,
    points: *const f64,
    n: usize,
    out: *mut f64,
    out_len: usize,
) -> PsStatus {
    guard(|| {
        if ann.is_null() {
            return fail(PsStatus::NullPointer, "ann is null");
        }
        let m = &(*ann).model;
        let x = match points_arg(points, n, m.spec.input_dim()) {
            Ok(x) => x,
            Err(s) => return s,
        };
        match evaluate_points(&m.spec, &m.params, &x) {
            Ok(y) => write_out(&y, out, out_len),
            Err(e) => fail(PsStatus::Runtime, e.to_string()),
        }
    })
}

/// Loads an SNN file.
///
/// # Safety
/// `path` must be a NUL-terminated string; `out` a writable pointer slot.
#[no_mangle]
pub unsafe extern "C" fn ps_snn_load(path: *const c_char, out: *mut *mut PsSnn) -> PsStatus {
    guard(|| {
        if out.is_null() {
            return fail(PsStatus::NullPointer, "out is null");
        }
        let p = match path_arg(path) {
            Ok(p) => p,
            Err(s) => return s,
        };
        match load_snn(p) {
            Ok(f) => {
                *out = Box::into_raw(Box::new(PsSnn { network: f.network }));
                PsStatus::Ok
            }
            Err(e) => fail(snn_status(&e), e.to_string()),
        }
    })
}

/// Converts a network with thresholds fitted on `points`, then calibrates.
///
/// `readout`: 0 membrane, 1 quantized. `mode`: 0 none, 1 light,
/// 2 advanced (`steps` Adam steps at rate `lr`).
///
/// # Safety
/// `ann` must be live, `points` must hold `n * input_dim` values and `out`
/// must be a writable pointer slot.
#[no_mangle]
pub unsafe extern "C" fn ps_snn_convert(
    ann: *const PsAnn,
    points: *const f64,
    n: usize,
    timesteps: usize,
    readout: u32,
    mode: u32,
    steps: usize,
    lr: f64,
    out: *mut *mut PsSnn,
) -> PsStatus {
    guard(|| {
        if ann.is_null() || out.is_null() {
            return fail(PsStatus::NullPointer, "null argument");
        }
        let readout = match readout {
            0 => Readout::Membrane,
            1 => Readout::Quantized,
            r => return fail(PsStatus::InvalidArgument, format!("unknown readout {r}")),
        };
        let mode = match mode {
            0 => CalibrationMode::None,
            1 => CalibrationMode::Light,
            2 => CalibrationMode::Advanced,
            m => return fail(PsStatus::InvalidArgument, format!("unknown calibration mode {m}")),
        };
        let m = &(*ann).model;
        let x = match points_arg(points, n, m.spec.input_dim()) {
            Ok(x) => x,
            Err(s) => return s,
        };
        let batch = PointBatch::Scattered(x);
        let cfg = ConversionConfig { timesteps, readout, ..Default::default() };
        let mut snn = match convert(&m.spec, &m.params, &batch, &cfg) {
            Ok(s) => s,
            Err(e) => return fail(snn_status(&e), e.to_string()),
        };
        let cal = CalibrationConfig { mode, steps, lr, ..Default::default() };
        if let Err(e) = calibrate(&m.spec, &m.params, &mut snn, &batch, &cal) {
            return fail(PsStatus::InvalidArgument, e.to_string());
        }
        *out = Box::into_raw(Box::new(PsSnn { network: snn }));
        PsStatus::Ok
    })
}

/// Releases a handle from [`ps_snn_load`] or [`ps_snn_convert`]. Null is
/// ignored.
///
/// # Safety
/// `snn` must be such a handle and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn ps_snn_free(snn: *mut PsSnn) {
    if !snn.is_null() {
        drop(Box::from_raw(snn));
    }
}

/// Simulation length of an SNN.
///
/// # Safety
/// `snn` must be live and `timesteps` writable.
#[no_mangle]
pub unsafe extern "C" fn ps_snn_timesteps(snn: *const PsSnn, timesteps: *mut usize) -> PsStatus {
    guard(|| {
        if snn.is_null() || timesteps.is_null() {
            return fail(PsStatus::NullPointer, "null argument");
        }
        *timesteps = (*snn).network.timesteps;
        PsStatus::Ok
    })
}

/// Averaged SNN output at `n` points; `event != 0` runs the step-by-step
/// simulation, otherwise the closed-form rate pass.
///
/// # Safety
/// `points` must hold `n * input_dim` values and `out` `out_len` values.
#[no_mangle]
pub unsafe extern "C" fn ps_snn_forward(
    snn: *const PsSnn,
    points: *const f64,
    n: usize,
    event: i32,
    out: *mut f64,
    out_len: usize,
) -> PsStatus {
    guard(|| {
        if snn.is_null() {
            return fail(PsStatus::NullPointer, "snn is null");
        }
        let net = &(*snn).network;
        let x = match points_arg(points, n, net.spec.input_dim()) {
            Ok(x) => x,
            Err(s) => return s,
        };
        let result = if event != 0 {
            simulate_event(net, &PointBatch::Scattered(x), false).map(|t| t.output)
        } else {
            snn_evaluate_points(net, &x)
        };
        match result {
            Ok(y) => write_out(&y, out, out_len),
            Err(e) => fail(snn_status(&e), e.to_string()),
        }
    })
}
