//! C ABI for `snp-core`.
//!
//! Objects cross the boundary as opaque handles created by `snp_*_new`,
//! `snp_*_load` or an operation's `out` parameter, and released with the
//! matching `snp_*_free`. Every fallible function returns an [`SnpStatus`];
//! on failure, [`snp_last_error_message`] describes the error for the calling
//! thread. Panics are caught at the boundary and reported as
//! [`SnpStatus::Panic`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;
use std::ptr;

use snp_core::data::{load_sae_bundle, read_matrix, write_matrix};
use snp_core::logistic::LogisticOptions;
use snp_core::metrics::{kl_retrieval, max_skew, roc_auc};
use snp_core::project::{rank1_projector, subspace_projector, Projector};
use snp_core::sae::{masked_reconstruction_debias, preactivations, FeatureIndexSet, SaeParams};
use snp_core::select::{
    clip_score_rank, clip_score_signal, lp_rank, stylist_rank, top_k, wasserstein_1d, FeatureRanking, GroupedPreacts,
};
use snp_core::{Matrix, SnpError};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SnpStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Validation = 3,
    Io = 4,
    Shape = 5,
    SingleClass = 6,
    DegenerateAxis = 7,
    Runtime = 8,
    Panic = 9,
}

impl From<&SnpError> for SnpStatus {
    fn from(e: &SnpError) -> Self {
        match e {
            SnpError::Io { .. } | SnpError::MissingComponent(_) => SnpStatus::Io,
            SnpError::Shape(_) | SnpError::Length(_) => SnpStatus::Shape,
            SnpError::SingleClass => SnpStatus::SingleClass,
            SnpError::DegenerateAxis { .. } => SnpStatus::DegenerateAxis,
            SnpError::InvalidArgument(_) | SnpError::IndexOutOfRange { .. } => SnpStatus::InvalidArgument,
            SnpError::Fold { source, .. } => SnpStatus::from(source.as_ref()),
            e if e.is_validation() => SnpStatus::Validation,
            _ => SnpStatus::Runtime,
        }
    }
}

/// Dense row-major matrix of doubles.
pub struct SnpMatrix(Matrix);
/// Sparse autoencoder parameters.
pub struct SnpSae(SaeParams);
/// Feature scores and their descending order.
pub struct SnpRanking(FeatureRanking);
/// Orthogonal projector removing a subspace.
pub struct SnpProjector(Projector);

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

struct Failure {
    status: SnpStatus,
    message: String,
}

impl From<SnpError> for Failure {
    fn from(e: SnpError) -> Self {
        Failure {
            status: SnpStatus::from(&e),
            message: e.to_string(),
        }
    }
}

fn fail(status: SnpStatus, message: impl Into<String>) -> Failure {
    Failure {
        status,
        message: message.into(),
    }
}

fn set_last_error(message: String) {
    let c = CString::new(message.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn guard(f: impl FnOnce() -> Result<(), Failure>) -> SnpStatus {
    LAST_ERROR.with(|e| *e.borrow_mut() = None);
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => SnpStatus::Ok,
        Ok(Err(f)) => {
            set_last_error(f.message);
            f.status
        }
        Err(payload) => {
            let msg = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            set_last_error(format!("panic: {msg}"));
            SnpStatus::Panic
        }
    }
}

unsafe fn handle<'a, T>(p: *const T, what: &str) -> Result<&'a T, Failure> {
    p.as_ref()
        .ok_or_else(|| fail(SnpStatus::NullPointer, format!("{what} is null")))
}

/// A null pointer is accepted for an empty slice.
unsafe fn slice<'a, T>(p: *const T, len: usize, what: &str) -> Result<&'a [T], Failure> {
    if len == 0 {
        Ok(&[])
    } else if p.is_null() {
        Err(fail(SnpStatus::NullPointer, format!("{what} is null")))
    } else {
        Ok(std::slice::from_raw_parts(p, len))
    }
}

unsafe fn slice_mut<'a, T>(p: *mut T, len: usize, what: &str) -> Result<&'a mut [T], Failure> {
    if len == 0 {
        Ok(&mut [])
    } else if p.is_null() {
        Err(fail(SnpStatus::NullPointer, format!("{what} is null")))
    } else {
        Ok(std::slice::from_raw_parts_mut(p, len))
    }
}

unsafe fn path(p: *const c_char) -> Result<PathBuf, Failure> {
    if p.is_null() {
        return Err(fail(SnpStatus::NullPointer, "path is null"));
    }
    let s = CStr::from_ptr(p)
        .to_str()
        .map_err(|_| fail(SnpStatus::InvalidArgument, "path is not valid UTF-8"))?;
    Ok(PathBuf::from(s))
}

unsafe fn put<T>(out: *mut *mut T, value: T) -> Result<(), Failure> {
    if out.is_null() {
        return Err(fail(SnpStatus::NullPointer, "output pointer is null"));
    }
    *out = Box::into_raw(Box::new(value));
    Ok(())
}

unsafe fn put_scalar<T>(out: *mut T, value: T) -> Result<(), Failure> {
    if out.is_null() {
        return Err(fail(SnpStatus::NullPointer, "output pointer is null"));
    }
    *out = value;
    Ok(())
}

unsafe fn release<T>(p: *mut T) {
    if !p.is_null() {
        drop(Box::from_raw(p));
    }
}

/// Message for the last failed call on this thread, or null. The pointer is
/// valid until the next `snp_*` call on the same thread.
#[no_mangle]
pub extern "C" fn snp_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn snp_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Copies `rows * cols` row-major values into a new matrix.
///
/// # Safety
/// `data` must point to `rows * cols` doubles (or be null when that is 0);
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn snp_matrix_new(
    rows: usize,
    cols: usize,
    data: *const f64,
    out: *mut *mut SnpMatrix,
) -> SnpStatus {
    guard(|| {
        let len = rows
            .checked_mul(cols)
            .ok_or_else(|| fail(SnpStatus::InvalidArgument, "rows * cols overflows"))?;
        let values = slice(data, len, "data")?.to_vec();
        put(out, SnpMatrix(Matrix::new(rows, cols, values)?))
    })
}

/// # Safety
/// `path` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn snp_matrix_read(path_: *const c_char, out: *mut *mut SnpMatrix) -> SnpStatus {
    guard(|| put(out, SnpMatrix(read_matrix(path(path_)?)?)))
}

/// # Safety
/// `m` must be a live matrix handle; `path` a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn snp_matrix_write(m: *const SnpMatrix, path_: *const c_char) -> SnpStatus {
    guard(|| Ok(write_matrix(&handle(m, "matrix")?.0, path(path_)?)?))
}

/// Row count, or 0 for a null handle.
///
/// # Safety
/// `m` must be null or a live matrix handle.
#[no_mangle]
pub unsafe extern "C" fn snp_matrix_rows(m: *const SnpMatrix) -> usize {
    m.as_ref().map_or(0, |m| m.0.rows())
}

/// Column count, or 0 for a null handle.
///
/// # Safety
/// `m` must be null or a live matrix handle.
#[no_mangle]
pub unsafe extern "C" fn snp_matrix_cols(m: *const SnpMatrix) -> usize {
    m.as_ref().map_or(0, |m| m.0.cols())
}

/// Copies the row-major values into `buf`, which must hold exactly
/// `rows * cols` doubles.
///
/// # Safety
/// `m` must be a live handle and `buf` writable for `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn snp_matrix_copy_data(m: *const SnpMatrix, buf: *mut f64, len: usize) -> SnpStatus {
    guard(|| {
        let m = &handle(m, "matrix")?.0;
        if len != m.data().len() {
            return Err(fail(
                SnpStatus::Shape,
                format!("buffer holds {len} values, matrix has {}", m.data().len()),
            ));
        }
        slice_mut(buf, len, "buffer")?.copy_from_slice(m.data());
        Ok(())
    })
}

/// # Safety
/// `m` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn snp_matrix_free(m: *mut SnpMatrix) {
    release(m);
}

/// Loads an SAE bundle directory.
///
/// # Safety
/// `dir` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn snp_sae_load(dir: *const c_char, out: *mut *mut SnpSae) -> SnpStatus {
    guard(|| put(out, SnpSae(load_sae_bundle(path(dir)?)?.params)))
}

/// Embedding dimension `n`, or 0 for a null handle.
///
/// # Safety
/// `sae` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn snp_sae_embed_dim(sae: *const SnpSae) -> usize {
    sae.as_ref().map_or(0, |s| s.0.embed_dim())
}

/// Feature count `m`, or 0 for a null handle.
///
/// # Safety
/// `sae` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn snp_sae_features(sae: *const SnpSae) -> usize {
    sae.as_ref().map_or(0, |s| s.0.features())
}

/// # Safety
/// `sae` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn snp_sae_free(sae: *mut SnpSae) {
    release(sae);
}

/// `out = (x - b_dec) E + b_enc`.
///
/// # Safety
/// Handles must be live; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn snp_preactivations(
    sae: *const SnpSae,
    x: *const SnpMatrix,
    out: *mut *mut SnpMatrix,
) -> SnpStatus {
    guard(|| {
        let z = preactivations(&handle(x, "x")?.0, &handle(sae, "sae")?.0)?;
        put(out, SnpMatrix(z))
    })
}

unsafe fn feature_set(sae: &SaeParams, indices: *const usize, k: usize) -> Result<FeatureIndexSet, Failure> {
    Ok(FeatureIndexSet::new(slice(indices, k, "indices")?.to_vec(), sae.features())?)
}

/// Subtracts the decoder reconstruction of the `k` listed features.
///
/// # Safety
/// Handles must be live; `indices` must point to `k` values.
#[no_mangle]
pub unsafe extern "C" fn snp_masked_reconstruction(
    sae: *const SnpSae,
    x: *const SnpMatrix,
    indices: *const usize,
    k: usize,
    out: *mut *mut SnpMatrix,
) -> SnpStatus {
    guard(|| {
        let sae = &handle(sae, "sae")?.0;
        let s = feature_set(sae, indices, k)?;
        put(out, SnpMatrix(masked_reconstruction_debias(&handle(x, "x")?.0, sae, &s)?))
    })
}

unsafe fn attributes_for<'a>(preacts: &Matrix, attrs: *const u8, n: usize) -> Result<&'a [u8], Failure> {
    if n != preacts.rows() {
        return Err(fail(
            SnpStatus::Shape,
            format!("{n} attribute labels for {} rows", preacts.rows()),
        ));
    }
    slice(attrs, n, "attributes")
}

/// Mean pairwise 1-Wasserstein ranking across attribute groups.
///
/// # Safety
/// `preacts` must be live; `attrs` must point to `n` values.
#[no_mangle]
pub unsafe extern "C" fn snp_rank_stylist(
    preacts: *const SnpMatrix,
    attrs: *const u8,
    n: usize,
    out: *mut *mut SnpRanking,
) -> SnpStatus {
    guard(|| {
        let z = &handle(preacts, "preacts")?.0;
        let a = attributes_for(z, attrs, n)?;
        put(out, SnpRanking(stylist_rank(&GroupedPreacts::from_labels(z, a)?)?))
    })
}

/// Linear-probe ranking with L2 strength `l2`.
///
/// # Safety
/// `preacts` must be live; `attrs` must point to `n` values.
#[no_mangle]
pub unsafe extern "C" fn snp_rank_lp(
    preacts: *const SnpMatrix,
    attrs: *const u8,
    n: usize,
    l2: f64,
    out: *mut *mut SnpRanking,
) -> SnpStatus {
    guard(|| {
        let z = &handle(preacts, "preacts")?.0;
        let a = attributes_for(z, attrs, n)?;
        put(out, SnpRanking(lp_rank(z, a, &LogisticOptions::with_l2(l2))?))
    })
}

/// Ranking by absolute correlation with per-sample prompt scores.
///
/// # Safety
/// `preacts` must be live; `scores` must point to `n` values.
#[no_mangle]
pub unsafe extern "C" fn snp_rank_clip(
    preacts: *const SnpMatrix,
    scores: *const f64,
    n: usize,
    out: *mut *mut SnpRanking,
) -> SnpStatus {
    guard(|| {
        let z = &handle(preacts, "preacts")?.0;
        put(out, SnpRanking(clip_score_rank(z, slice(scores, n, "scores")?)?))
    })
}

/// Per-image prompt similarity signal; `out` must hold one value per image row.
///
/// # Safety
/// Handles must be live; `out` writable for `n` doubles.
#[no_mangle]
pub unsafe extern "C" fn snp_clip_signal(
    images: *const SnpMatrix,
    prompts: *const SnpMatrix,
    out: *mut f64,
    n: usize,
) -> SnpStatus {
    guard(|| {
        let images = &handle(images, "images")?.0;
        if n != images.rows() {
            return Err(fail(SnpStatus::Shape, format!("buffer holds {n}, {} images", images.rows())));
        }
        let signal = clip_score_signal(images, &handle(prompts, "prompts")?.0)?;
        slice_mut(out, n, "out")?.copy_from_slice(&signal);
        Ok(())
    })
}

/// Number of ranked features, or 0 for a null handle.
///
/// # Safety
/// `r` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn snp_ranking_len(r: *const SnpRanking) -> usize {
    r.as_ref().map_or(0, |r| r.0.len())
}

/// Writes the `k` best feature indices to `out`.
///
/// # Safety
/// `r` must be live; `out` writable for `k` values.
#[no_mangle]
pub unsafe extern "C" fn snp_ranking_top_k(r: *const SnpRanking, k: usize, out: *mut usize) -> SnpStatus {
    guard(|| {
        let s = top_k(&handle(r, "ranking")?.0, k)?;
        slice_mut(out, k, "out")?.copy_from_slice(s.as_slice());
        Ok(())
    })
}

/// Copies per-feature scores (by feature index) into `out` of length `len`.
///
/// # Safety
/// `r` must be live; `out` writable for `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn snp_ranking_scores(r: *const SnpRanking, out: *mut f64, len: usize) -> SnpStatus {
    guard(|| {
        let scores = handle(r, "ranking")?.0.scores();
        if len != scores.len() {
            return Err(fail(SnpStatus::Shape, format!("buffer holds {len}, ranking has {}", scores.len())));
        }
        slice_mut(out, len, "out")?.copy_from_slice(scores);
        Ok(())
    })
}

/// # Safety
/// `r` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn snp_ranking_free(r: *mut SnpRanking) {
    release(r);
}

/// Rank-one projector along the interpolated axis: a probe on the selected
/// preactivation columns weights the encoder columns (or decoder rows when
/// `use_decoder` is true).
///
/// # Safety
/// Handles must be live; `attrs` must point to `n` values and `indices` to `k`.
#[no_mangle]
pub unsafe extern "C" fn snp_projector_interpolated(
    sae: *const SnpSae,
    preacts: *const SnpMatrix,
    attrs: *const u8,
    n: usize,
    indices: *const usize,
    k: usize,
    l2: f64,
    use_decoder: bool,
    out: *mut *mut SnpProjector,
) -> SnpStatus {
    guard(|| {
        let sae = &handle(sae, "sae")?.0;
        let z = &handle(preacts, "preacts")?.0;
        let a = attributes_for(z, attrs, n)?;
        let s = feature_set(sae, indices, k)?;
        let w = snp_core::axis::interpolation_weights(z, &s, a, &LogisticOptions::with_l2(l2))?;
        let axis = if use_decoder {
            snp_core::axis::synthesize_axis_decoder(sae, &s, &w)?
        } else {
            snp_core::axis::synthesize_axis_encoder(sae, &s, &w)?
        };
        put(out, SnpProjector(rank1_projector(&axis)?))
    })
}

/// Projector removing the span of the selected encoder columns (or decoder
/// rows when `use_decoder` is true).
///
/// # Safety
/// `sae` must be live; `indices` must point to `k` values.
#[no_mangle]
pub unsafe extern "C" fn snp_projector_subspace(
    sae: *const SnpSae,
    indices: *const usize,
    k: usize,
    use_decoder: bool,
    out: *mut *mut SnpProjector,
) -> SnpStatus {
    guard(|| {
        let sae = &handle(sae, "sae")?.0;
        let s = feature_set(sae, indices, k)?;
        let (columns, source) = if use_decoder {
            (sae.decoder().select_rows(s.as_slice()).transpose(), "decoder")
        } else {
            (sae.encoder().select_columns(s.as_slice()), "encoder")
        };
        put(out, SnpProjector(subspace_projector(&columns, source)?))
    })
}

/// # Safety
/// Handles must be live; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn snp_projector_apply(
    p: *const SnpProjector,
    x: *const SnpMatrix,
    out: *mut *mut SnpMatrix,
) -> SnpStatus {
    guard(|| {
        let y = handle(p, "projector")?.0.apply(&handle(x, "x")?.0)?;
        put(out, SnpMatrix(y))
    })
}

/// Dimension of the removed subspace, or 0 for a null handle.
///
/// # Safety
/// `p` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn snp_projector_rank(p: *const SnpProjector) -> usize {
    p.as_ref().map_or(0, |p| p.0.rank())
}

/// # Safety
/// `p` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn snp_projector_free(p: *mut SnpProjector) {
    release(p);
}

/// # Safety
/// `retrieved` and `dataset` must point to `n_retrieved` / `n_dataset` codes.
#[no_mangle]
pub unsafe extern "C" fn snp_kl_retrieval(
    retrieved: *const u8,
    n_retrieved: usize,
    dataset: *const u8,
    n_dataset: usize,
    out: *mut f64,
) -> SnpStatus {
    guard(|| {
        let v = kl_retrieval(slice(retrieved, n_retrieved, "retrieved")?, slice(dataset, n_dataset, "dataset")?)?;
        put_scalar(out, v)
    })
}

/// # Safety
/// As for [`snp_kl_retrieval`].
#[no_mangle]
pub unsafe extern "C" fn snp_max_skew(
    retrieved: *const u8,
    n_retrieved: usize,
    dataset: *const u8,
    n_dataset: usize,
    out: *mut f64,
) -> SnpStatus {
    guard(|| {
        let v = max_skew(slice(retrieved, n_retrieved, "retrieved")?, slice(dataset, n_dataset, "dataset")?)?;
        put_scalar(out, v)
    })
}

/// # Safety
/// `scores` and `labels` must point to `n` values.
#[no_mangle]
pub unsafe extern "C" fn snp_roc_auc(scores: *const f64, labels: *const u8, n: usize, out: *mut f64) -> SnpStatus {
    guard(|| put_scalar(out, roc_auc(slice(scores, n, "scores")?, slice(labels, n, "labels")?)?))
}

/// # Safety
/// `a` and `b` must point to `na` / `nb` values.
#[no_mangle]
pub unsafe extern "C" fn snp_wasserstein_1d(
    a: *const f64,
    na: usize,
    b: *const f64,
    nb: usize,
    out: *mut f64,
) -> SnpStatus {
    guard(|| put_scalar(out, wasserstein_1d(slice(a, na, "a")?, slice(b, nb, "b")?)?))
}
