//! C ABI over the attrec recognition engine.
//!
//! Handles are opaque heap objects created by `*_new` / `*_load` and
//! released by the matching `*_free`. Every fallible call returns an
//! [`AttrecStatus`]; on failure a message is kept per thread and can be
//! read with [`attrec_last_error`]. Output pointers are written only on
//! success.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;

use attrec::simulator::{builtin_catalog, stream, Domain};
use attrec::theory::theorem1_bounds;
use attrec::{ModelSet, ObjectCatalog, Observation, Outcome, PosteriorState, Recognizer};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AttrecStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidUtf8 = 2,
    Io = 3,
    Parse = 4,
    InvalidArgument = 5,
    OutOfRange = 6,
    BufferTooSmall = 7,
    Mismatch = 8,
    Panic = 9,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AttrecOutcome {
    Negative = 0,
    Positive = 1,
    Uncertain = 2,
}

impl From<Outcome> for AttrecOutcome {
    fn from(o: Outcome) -> Self {
        match o {
            Outcome::Negative => AttrecOutcome::Negative,
            Outcome::Positive => AttrecOutcome::Positive,
            Outcome::Uncertain => AttrecOutcome::Uncertain,
        }
    }
}

impl From<AttrecOutcome> for Outcome {
    fn from(o: AttrecOutcome) -> Self {
        match o {
            AttrecOutcome::Negative => Outcome::Negative,
            AttrecOutcome::Positive => Outcome::Positive,
            AttrecOutcome::Uncertain => Outcome::Uncertain,
        }
    }
}

/// Object catalog.
pub struct AttrecCatalog {
    inner: ObjectCatalog,
}

/// Catalog plus calibrated classifiers.
pub struct AttrecEngine {
    inner: Recognizer,
}

/// Posterior over the objects of one engine.
pub struct AttrecPosterior {
    inner: PosteriorState,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

struct Failure(AttrecStatus, String);

type FfiResult = Result<(), Failure>;

fn fail(status: AttrecStatus, msg: impl ToString) -> Failure {
    Failure(status, msg.to_string())
}

fn set_error(msg: &str) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = c);
}

fn guard(f: impl FnOnce() -> FfiResult) -> AttrecStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            set_error("");
            AttrecStatus::Ok
        }
        Ok(Err(Failure(status, msg))) => {
            set_error(&msg);
            status
        }
        Err(_) => {
            set_error("internal panic");
            AttrecStatus::Panic
        }
    }
}

unsafe fn borrow<'a, T>(p: *const T, what: &str) -> Result<&'a T, Failure> {
    p.as_ref()
        .ok_or_else(|| fail(AttrecStatus::NullPointer, format!("{what} is null")))
}

unsafe fn borrow_mut<'a, T>(p: *mut T, what: &str) -> Result<&'a mut T, Failure> {
    p.as_mut()
        .ok_or_else(|| fail(AttrecStatus::NullPointer, format!("{what} is null")))
}

unsafe fn out<T>(p: *mut T, what: &str) -> Result<(), Failure> {
    if p.is_null() {
        Err(fail(AttrecStatus::NullPointer, format!("{what} is null")))
    } else {
        Ok(())
    }
}

unsafe fn string<'a>(p: *const c_char, what: &str) -> Result<&'a str, Failure> {
    if p.is_null() {
        return Err(fail(AttrecStatus::NullPointer, format!("{what} is null")));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| fail(AttrecStatus::InvalidUtf8, format!("{what} is not UTF-8")))
}

fn posterior_matches(engine: &AttrecEngine, post: &AttrecPosterior) -> FfiResult {
    if post.inner.log_weights.len() != engine.inner.catalog.num_objects()
        || post.inner.n_pos.len() != engine.inner.catalog.num_attributes()
    {
        return Err(fail(
            AttrecStatus::Mismatch,
            "posterior was created by a different engine",
        ));
    }
    Ok(())
}

/// Message of the last failed call on this thread, empty after a success.
/// The pointer stays valid until the next call on the same thread.
#[no_mangle]
pub extern "C" fn attrec_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn attrec_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Loads a catalog file.
///
/// # Safety
/// `path` must be a NUL-terminated string and `out_catalog` writable.
#[no_mangle]
pub unsafe extern "C" fn attrec_catalog_load(
    path: *const c_char,
    out_catalog: *mut *mut AttrecCatalog,
) -> AttrecStatus {
    guard(|| {
        let path = string(path, "path")?;
        out(out_catalog, "out_catalog")?;
        let inner = ObjectCatalog::load(Path::new(path)).map_err(|e| match e {
            attrec::CatalogError::Io { .. } => fail(AttrecStatus::Io, e),
            _ => fail(AttrecStatus::Parse, e),
        })?;
        *out_catalog = Box::into_raw(Box::new(AttrecCatalog { inner }));
        Ok(())
    })
}

/// Bundled catalog by name (`table1`, `fine5`).
///
/// # Safety
/// `name` must be a NUL-terminated string and `out_catalog` writable.
#[no_mangle]
pub unsafe extern "C" fn attrec_catalog_builtin(
    name: *const c_char,
    out_catalog: *mut *mut AttrecCatalog,
) -> AttrecStatus {
    guard(|| {
        let name = string(name, "name")?;
        out(out_catalog, "out_catalog")?;
        let inner = builtin_catalog(name)
            .ok_or_else(|| fail(AttrecStatus::InvalidArgument, format!("no bundled catalog {name:?}")))?;
        *out_catalog = Box::into_raw(Box::new(AttrecCatalog { inner }));
        Ok(())
    })
}

/// # Safety
/// `catalog` must come from this library and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn attrec_catalog_free(catalog: *mut AttrecCatalog) {
    if !catalog.is_null() {
        drop(Box::from_raw(catalog));
    }
}

/// # Safety
/// `catalog` must be a live handle and `out_count` writable.
#[no_mangle]
pub unsafe extern "C" fn attrec_catalog_num_objects(
    catalog: *const AttrecCatalog,
    out_count: *mut usize,
) -> AttrecStatus {
    guard(|| {
        let c = borrow(catalog, "catalog")?;
        out(out_count, "out_count")?;
        *out_count = c.inner.num_objects();
        Ok(())
    })
}

/// # Safety
/// `catalog` must be a live handle and `out_count` writable.
#[no_mangle]
pub unsafe extern "C" fn attrec_catalog_num_attributes(
    catalog: *const AttrecCatalog,
    out_count: *mut usize,
) -> AttrecStatus {
    guard(|| {
        let c = borrow(catalog, "catalog")?;
        out(out_count, "out_count")?;
        *out_count = c.inner.num_attributes();
        Ok(())
    })
}

/// Minimum PPV and NPV that guarantee recognition through `attribute`.
///
/// # Safety
/// `catalog` must be a live handle; output pointers writable.
#[no_mangle]
pub unsafe extern "C" fn attrec_guarantee_bounds(
    catalog: *const AttrecCatalog,
    attribute: usize,
    out_ppv_bound: *mut f64,
    out_npv_bound: *mut f64,
) -> AttrecStatus {
    guard(|| {
        let c = borrow(catalog, "catalog")?;
        out(out_ppv_bound, "out_ppv_bound")?;
        out(out_npv_bound, "out_npv_bound")?;
        if attribute >= c.inner.num_attributes() {
            return Err(fail(
                AttrecStatus::OutOfRange,
                format!("attribute {attribute} out of range"),
            ));
        }
        let (p, n) =
            theorem1_bounds(&c.inner.stats(), attribute).map_err(|e| fail(AttrecStatus::InvalidArgument, e))?;
        *out_ppv_bound = p;
        *out_npv_bound = n;
        Ok(())
    })
}

/// Builds an engine from a catalog and a calibrated model file. The
/// catalog is copied; the caller keeps ownership of it.
///
/// # Safety
/// `catalog` must be a live handle, `model_path` NUL-terminated, `out_engine`
/// writable.
#[no_mangle]
pub unsafe extern "C" fn attrec_engine_new(
    catalog: *const AttrecCatalog,
    model_path: *const c_char,
    out_engine: *mut *mut AttrecEngine,
) -> AttrecStatus {
    guard(|| {
        let c = borrow(catalog, "catalog")?;
        let path = string(model_path, "model_path")?;
        out(out_engine, "out_engine")?;
        let text = std::fs::read_to_string(path).map_err(|e| fail(AttrecStatus::Io, format!("{path}: {e}")))?;
        let models = ModelSet::from_json(&text).map_err(|e| fail(AttrecStatus::Parse, e))?;
        let inner = Recognizer::new(c.inner.clone(), models).map_err(|e| fail(AttrecStatus::Mismatch, e))?;
        *out_engine = Box::into_raw(Box::new(AttrecEngine { inner }));
        Ok(())
    })
}

/// # Safety
/// `engine` must come from this library and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn attrec_engine_free(engine: *mut AttrecEngine) {
    if !engine.is_null() {
        drop(Box::from_raw(engine));
    }
}

/// Fresh posterior equal to the catalog priors.
///
/// # Safety
/// `engine` must be a live handle and `out_posterior` writable.
#[no_mangle]
pub unsafe extern "C" fn attrec_posterior_new(
    engine: *const AttrecEngine,
    out_posterior: *mut *mut AttrecPosterior,
) -> AttrecStatus {
    guard(|| {
        let e = borrow(engine, "engine")?;
        out(out_posterior, "out_posterior")?;
        *out_posterior = Box::into_raw(Box::new(AttrecPosterior { inner: e.inner.start() }));
        Ok(())
    })
}

/// # Safety
/// `posterior` must come from this library and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn attrec_posterior_free(posterior: *mut AttrecPosterior) {
    if !posterior.is_null() {
        drop(Box::from_raw(posterior));
    }
}

/// Classifies a raw score and folds it into the posterior. `out_outcome`
/// may be null.
///
/// # Safety
/// Handles must be live; `out_outcome` null or writable.
#[no_mangle]
pub unsafe extern "C" fn attrec_observe_score(
    engine: *const AttrecEngine,
    posterior: *mut AttrecPosterior,
    attribute: usize,
    bin: usize,
    score: f64,
    out_outcome: *mut AttrecOutcome,
) -> AttrecStatus {
    guard(|| {
        let e = borrow(engine, "engine")?;
        let p = borrow_mut(posterior, "posterior")?;
        posterior_matches(e, p)?;
        if !score.is_finite() {
            return Err(fail(AttrecStatus::InvalidArgument, "score is not finite"));
        }
        let obs = e
            .inner
            .observe_score(&mut p.inner, attribute, bin, score)
            .map_err(|err| fail(AttrecStatus::OutOfRange, err))?;
        if !out_outcome.is_null() {
            *out_outcome = obs.outcome.into();
        }
        Ok(())
    })
}

/// Folds in an already classified outcome. `out_adopted` may be null.
///
/// # Safety
/// Handles must be live; `out_adopted` null or writable.
#[no_mangle]
pub unsafe extern "C" fn attrec_observe(
    engine: *const AttrecEngine,
    posterior: *mut AttrecPosterior,
    attribute: usize,
    bin: usize,
    outcome: AttrecOutcome,
    in_reliable_region: bool,
    out_adopted: *mut bool,
) -> AttrecStatus {
    guard(|| {
        let e = borrow(engine, "engine")?;
        let p = borrow_mut(posterior, "posterior")?;
        posterior_matches(e, p)?;
        let obs = Observation::new(attribute, bin, outcome.into(), in_reliable_region);
        let adopted = e
            .inner
            .observe(&mut p.inner, &obs)
            .map_err(|err| fail(AttrecStatus::OutOfRange, err))?;
        if !out_adopted.is_null() {
            *out_adopted = adopted;
        }
        Ok(())
    })
}

/// Writes the normalized posterior into `buf`, which must hold at least
/// one value per object.
///
/// # Safety
/// `posterior` must be live and `buf` valid for `len` writes.
#[no_mangle]
pub unsafe extern "C" fn attrec_posterior_normalized(
    posterior: *const AttrecPosterior,
    buf: *mut f64,
    len: usize,
) -> AttrecStatus {
    guard(|| {
        let p = borrow(posterior, "posterior")?;
        out(buf, "buf")?;
        let values = p.inner.normalized();
        if len < values.len() {
            return Err(fail(
                AttrecStatus::BufferTooSmall,
                format!("buffer holds {len}, need {}", values.len()),
            ));
        }
        ptr::copy_nonoverlapping(values.as_ptr(), buf, values.len());
        Ok(())
    })
}

/// MAP decision. `out_winner` receives the unique winner or, when weights
/// and priors tie, a uniform pick among the tied objects drawn from
/// `seed`. `out_tied_count` receives the number of tied objects (1 when
/// unique).
///
/// # Safety
/// Handles must be live and output pointers writable.
#[no_mangle]
pub unsafe extern "C" fn attrec_decide(
    engine: *const AttrecEngine,
    posterior: *const AttrecPosterior,
    seed: u64,
    out_winner: *mut usize,
    out_tied_count: *mut usize,
) -> AttrecStatus {
    guard(|| {
        let e = borrow(engine, "engine")?;
        let p = borrow(posterior, "posterior")?;
        posterior_matches(e, p)?;
        out(out_winner, "out_winner")?;
        out(out_tied_count, "out_tied_count")?;
        let d = p.inner.decide(&e.inner.catalog);
        *out_winner = d.forced_pick(&mut stream(seed, Domain::Pick, 0));
        *out_tied_count = if d.is_unique() { 1 } else { d.candidates.len() };
        Ok(())
    })
}
