// SPDX-License-Identifier: MIT OR Apache-2.0

//! C ABI over `steerlab`.
//!
//! Models, class sets and steering configurations are opaque handles created
//! by `*_load`/`*_new` and released by the matching `*_free`. Every fallible
//! call returns an [`SlStatus`]; on failure a message is available from
//! [`sl_last_error_message`] on the same thread. Panics never cross the
//! boundary and surface as `SL_STATUS_PANIC`.
//!
//! Embeddings are `float` arrays, outputs are `double` arrays sized by the
//! caller.

#![allow(clippy::missing_safety_doc)]

use std::cell::RefCell;
use std::collections::BTreeMap;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use steerlab::engine::{self, ClassSet, ScoreMode, Scoring, SteeringConfig};
use steerlab::sae::{self, SaeModel};
use steerlab::Error;

/// Cosine scoring mode for [`sl_predict`] and [`sl_attribute`].
pub const SL_SCORE_COSINE: u32 = 0;
/// Dot-product scoring mode.
pub const SL_SCORE_DOT: u32 = 1;
/// Pass as `target` to attribute the predicted class.
pub const SL_TARGET_PREDICTED: usize = usize::MAX;

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SlStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidUtf8 = 2,
    Io = 3,
    Format = 4,
    DimMismatch = 5,
    InvalidSteering = 6,
    UnknownClass = 7,
    ZeroNorm = 8,
    BufferTooSmall = 9,
    InvalidArgument = 10,
    Panic = 11,
}

/// A loaded sparse autoencoder.
pub struct SlSae {
    model: SaeModel,
}

/// A loaded class set with NUL-terminated copies of its labels.
pub struct SlClassSet {
    classes: ClassSet,
    labels: Vec<CString>,
}

/// A mutable steering configuration.
pub struct SlSteering {
    entries: BTreeMap<usize, f64>,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: impl Into<String>) {
    let msg = msg.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(msg).unwrap_or_default());
}

struct Failure(SlStatus, String);

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let status = match &e {
            Error::Io { .. } => SlStatus::Io,
            Error::DimMismatch { .. } => SlStatus::DimMismatch,
            Error::InvalidSteering(_) | Error::UnknownComponent { .. } => SlStatus::InvalidSteering,
            Error::UnknownClass(_) => SlStatus::UnknownClass,
            Error::ZeroNormEmbedding(_) | Error::ZeroNormMean(_) => SlStatus::ZeroNorm,
            Error::InvalidConfig(_) | Error::InvalidArgument(_) | Error::InvalidGrid(_) => {
                SlStatus::InvalidArgument
            }
            _ => SlStatus::Format,
        };
        Failure(status, e.to_string())
    }
}

fn fail<T>(status: SlStatus, msg: &str) -> Result<T, Failure> {
    Err(Failure(status, msg.to_owned()))
}

/// Runs `f`, records any error message and converts panics.
fn guard(f: impl FnOnce() -> Result<(), Failure>) -> SlStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            set_error("");
            SlStatus::Ok
        }
        Ok(Err(Failure(status, msg))) => {
            set_error(msg);
            status
        }
        Err(_) => {
            set_error("internal panic");
            SlStatus::Panic
        }
    }
}

unsafe fn path_arg(path: *const c_char) -> Result<String, Failure> {
    if path.is_null() {
        return fail(SlStatus::NullPointer, "path is null");
    }
    match CStr::from_ptr(path).to_str() {
        Ok(s) => Ok(s.to_owned()),
        Err(_) => fail(SlStatus::InvalidUtf8, "path is not valid UTF-8"),
    }
}

unsafe fn handle<'a, T>(p: *const T, what: &str) -> Result<&'a T, Failure> {
    p.as_ref()
        .ok_or_else(|| Failure(SlStatus::NullPointer, format!("{what} is null")))
}

unsafe fn input<'a>(x: *const f32, dim: usize) -> Result<&'a [f32], Failure> {
    if x.is_null() {
        return fail(SlStatus::NullPointer, "embedding is null");
    }
    Ok(std::slice::from_raw_parts(x, dim))
}

unsafe fn output<'a>(
    out: *mut f64,
    len: usize,
    need: usize,
    what: &str,
) -> Result<&'a mut [f64], Failure> {
    if out.is_null() {
        return Err(Failure(SlStatus::NullPointer, format!("{what} is null")));
    }
    if len < need {
        return Err(Failure(
            SlStatus::BufferTooSmall,
            format!("{what} holds {len}, need {need}"),
        ));
    }
    Ok(std::slice::from_raw_parts_mut(out, need))
}

fn scoring(mode: u32, tau: f64) -> Result<Scoring, Failure> {
    let mode = match mode {
        SL_SCORE_COSINE => ScoreMode::Cosine,
        SL_SCORE_DOT => ScoreMode::Dot,
        other => {
            return Err(Failure(
                SlStatus::InvalidArgument,
                format!("unknown score mode {other}"),
            ))
        }
    };
    Ok(Scoring::new(mode, tau)?)
}

unsafe fn steering_arg(steering: *const SlSteering) -> Result<SteeringConfig, Failure> {
    match steering.as_ref() {
        None => Ok(SteeringConfig::empty()),
        Some(s) => Ok(SteeringConfig::new(
            s.entries.iter().map(|(&j, &m)| (j, m)),
        )?),
    }
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn sl_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Message describing the last failed call on this thread; empty after a
/// successful call. Valid until the next call on this thread.
#[no_mangle]
pub extern "C" fn sl_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Loads an SAE1 checkpoint into `*out`.
#[no_mangle]
pub unsafe extern "C" fn sl_sae_load(path: *const c_char, out: *mut *mut SlSae) -> SlStatus {
    guard(|| {
        if out.is_null() {
            return fail(SlStatus::NullPointer, "out is null");
        }
        *out = ptr::null_mut();
        let model = sae::read_sae(path_arg(path)?)?;
        *out = Box::into_raw(Box::new(SlSae { model }));
        Ok(())
    })
}

#[no_mangle]
pub unsafe extern "C" fn sl_sae_free(sae: *mut SlSae) {
    if !sae.is_null() {
        drop(Box::from_raw(sae));
    }
}

/// Embedding dimension, or 0 for a null handle.
#[no_mangle]
pub unsafe extern "C" fn sl_sae_dim_in(sae: *const SlSae) -> usize {
    sae.as_ref().map_or(0, |s| s.model.dim_in())
}

/// Number of components, or 0 for a null handle.
#[no_mangle]
pub unsafe extern "C" fn sl_sae_dim_sae(sae: *const SlSae) -> usize {
    sae.as_ref().map_or(0, |s| s.model.dim_sae())
}

/// Writes the `dim_sae` activations of `x` into `out`.
#[no_mangle]
pub unsafe extern "C" fn sl_sae_encode(
    sae: *const SlSae,
    x: *const f32,
    dim: usize,
    out: *mut f64,
    out_len: usize,
) -> SlStatus {
    guard(|| {
        let model = &handle(sae, "sae")?.model;
        let acts = model.activations(input(x, dim)?)?;
        output(out, out_len, acts.len(), "out")?.copy_from_slice(&acts);
        Ok(())
    })
}

/// Loads a class-set file (EMB1 with class names as labels) into `*out`.
#[no_mangle]
pub unsafe extern "C" fn sl_class_set_load(
    path: *const c_char,
    out: *mut *mut SlClassSet,
) -> SlStatus {
    guard(|| {
        if out.is_null() {
            return fail(SlStatus::NullPointer, "out is null");
        }
        *out = ptr::null_mut();
        let classes = engine::read_class_set(path_arg(path)?)?;
        let labels = classes
            .labels()
            .iter()
            .map(|l| CString::new(l.as_str()).unwrap_or_default())
            .collect();
        *out = Box::into_raw(Box::new(SlClassSet { classes, labels }));
        Ok(())
    })
}

#[no_mangle]
pub unsafe extern "C" fn sl_class_set_free(classes: *mut SlClassSet) {
    if !classes.is_null() {
        drop(Box::from_raw(classes));
    }
}

/// Number of classes, or 0 for a null handle.
#[no_mangle]
pub unsafe extern "C" fn sl_class_set_len(classes: *const SlClassSet) -> usize {
    classes.as_ref().map_or(0, |c| c.classes.len())
}

/// Label of class `index`, owned by the handle; null when out of range.
#[no_mangle]
pub unsafe extern "C" fn sl_class_set_label(
    classes: *const SlClassSet,
    index: usize,
) -> *const c_char {
    classes
        .as_ref()
        .and_then(|c| c.labels.get(index))
        .map_or(ptr::null(), |l| l.as_ptr())
}

/// A new empty steering configuration.
#[no_mangle]
pub extern "C" fn sl_steering_new() -> *mut SlSteering {
    Box::into_raw(Box::new(SlSteering {
        entries: BTreeMap::new(),
    }))
}

#[no_mangle]
pub unsafe extern "C" fn sl_steering_free(steering: *mut SlSteering) {
    if !steering.is_null() {
        drop(Box::from_raw(steering));
    }
}

/// Sets the strength of `component` to `m` in [-1, 1]; replaces any previous
/// value for that component.
#[no_mangle]
pub unsafe extern "C" fn sl_steering_set(
    steering: *mut SlSteering,
    component: usize,
    m: f64,
) -> SlStatus {
    guard(|| {
        let s = steering
            .as_mut()
            .ok_or_else(|| Failure(SlStatus::NullPointer, "steering is null".into()))?;
        SteeringConfig::single(component, m)?;
        s.entries.insert(component, m);
        Ok(())
    })
}

#[no_mangle]
pub unsafe extern "C" fn sl_steering_clear(steering: *mut SlSteering) -> SlStatus {
    guard(|| {
        let s = steering
            .as_mut()
            .ok_or_else(|| Failure(SlStatus::NullPointer, "steering is null".into()))?;
        s.entries.clear();
        Ok(())
    })
}

/// Predicts over the class set after steering (`steering` may be null).
///
/// `probabilities` must hold `sl_class_set_len` values; `logits` and
/// `predicted` may be null.
#[no_mangle]
pub unsafe extern "C" fn sl_predict(
    sae: *const SlSae,
    classes: *const SlClassSet,
    x: *const f32,
    dim: usize,
    steering: *const SlSteering,
    mode: u32,
    logit_scale: f64,
    probabilities: *mut f64,
    logits: *mut f64,
    n_classes: usize,
    predicted: *mut usize,
) -> SlStatus {
    guard(|| {
        let model = &handle(sae, "sae")?.model;
        let classes = &handle(classes, "classes")?.classes;
        let p = engine::predict(
            model,
            input(x, dim)?,
            classes,
            &steering_arg(steering)?,
            scoring(mode, logit_scale)?,
        )?;
        output(
            probabilities,
            n_classes,
            p.probabilities.len(),
            "probabilities",
        )?
        .copy_from_slice(&p.probabilities);
        if !logits.is_null() {
            output(logits, n_classes, p.logits.len(), "logits")?.copy_from_slice(&p.logits);
        }
        if let Some(out) = predicted.as_mut() {
            *out = p.predicted_index;
        }
        Ok(())
    })
}

/// Per-component attribution `a'_j * dy/da'_j` for the logit of class
/// `target` (or [`SL_TARGET_PREDICTED`]). `attributions` must hold
/// `sl_sae_dim_sae` values; `logit` may be null.
#[no_mangle]
pub unsafe extern "C" fn sl_attribute(
    sae: *const SlSae,
    classes: *const SlClassSet,
    x: *const f32,
    dim: usize,
    steering: *const SlSteering,
    target: usize,
    mode: u32,
    logit_scale: f64,
    attributions: *mut f64,
    n_components: usize,
    logit: *mut f64,
) -> SlStatus {
    guard(|| {
        let model = &handle(sae, "sae")?.model;
        let classes = &handle(classes, "classes")?.classes;
        let label = match target {
            SL_TARGET_PREDICTED => None,
            i => match classes.labels().get(i) {
                Some(l) => Some(l.as_str()),
                None => {
                    return Err(Failure(
                        SlStatus::UnknownClass,
                        format!("no class at index {i}"),
                    ))
                }
            },
        };
        let res = engine::attribute(
            model,
            input(x, dim)?,
            classes,
            &steering_arg(steering)?,
            label,
            scoring(mode, logit_scale)?,
        )?;
        let out = output(
            attributions,
            n_components,
            res.components.len(),
            "attributions",
        )?;
        for (o, c) in out.iter_mut().zip(&res.components) {
            *o = c.attribution;
        }
        if let Some(l) = logit.as_mut() {
            *l = res.logit;
        }
        Ok(())
    })
}
