use std::ffi::{CStr, CString};
use std::ptr;

use snp_core::data::write_sae_bundle;
use snp_core::harness::{generate_synthetic, SyntheticConfig};
use snp_ffi::*;

fn last_error() -> String {
    let p = snp_last_error_message();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned()
}

fn matrix(rows: usize, cols: usize, data: &[f64]) -> *mut SnpMatrix {
    let mut m = ptr::null_mut();
    assert_eq!(unsafe { snp_matrix_new(rows, cols, data.as_ptr(), &mut m) }, SnpStatus::Ok);
    m
}

fn contents(m: *const SnpMatrix) -> Vec<f64> {
    let len = unsafe { snp_matrix_rows(m) * snp_matrix_cols(m) };
    let mut buf = vec![0.0; len];
    assert_eq!(unsafe { snp_matrix_copy_data(m, buf.as_mut_ptr(), len) }, SnpStatus::Ok);
    buf
}

#[test]
fn version_is_nonempty() {
    let v = unsafe { CStr::from_ptr(snp_version()) };
    assert!(!v.to_bytes().is_empty());
}

#[test]
fn matrix_round_trip_through_file() {
    let dir = tempfile::tempdir().unwrap();
    let path = CString::new(dir.path().join("m.snpm").to_str().unwrap()).unwrap();
    let m = matrix(2, 3, &[1.0, 2.0, 3.0, 4.0, 5.0, 6.0]);
    unsafe {
        assert_eq!(snp_matrix_write(m, path.as_ptr()), SnpStatus::Ok);
        let mut back = ptr::null_mut();
        assert_eq!(snp_matrix_read(path.as_ptr(), &mut back), SnpStatus::Ok);
        assert_eq!((snp_matrix_rows(back), snp_matrix_cols(back)), (2, 3));
        assert_eq!(contents(back), contents(m));
        snp_matrix_free(back);
        snp_matrix_free(m);
    }
}

#[test]
fn errors_set_status_and_message() {
    unsafe {
        let mut out = ptr::null_mut();
        assert_eq!(snp_matrix_new(2, 2, ptr::null(), &mut out), SnpStatus::NullPointer);
        assert!(out.is_null());
        assert!(last_error().contains("null"));

        let missing = CString::new("/nonexistent/dir/m.snpm").unwrap();
        assert_eq!(snp_matrix_read(missing.as_ptr(), &mut out), SnpStatus::Io);

        let m = matrix(1, 2, &[1.0, 2.0]);
        let mut buf = [0.0; 3];
        assert_eq!(snp_matrix_copy_data(m, buf.as_mut_ptr(), 3), SnpStatus::Shape);
        snp_matrix_free(m);

        let mut v = 0.0;
        assert_eq!(
            snp_roc_auc([0.1, 0.2].as_ptr(), [1u8, 1].as_ptr(), 2, &mut v),
            SnpStatus::SingleClass
        );

        assert_eq!(snp_matrix_rows(ptr::null()), 0);
        snp_matrix_free(ptr::null_mut());
    }
}

#[test]
fn success_clears_previous_error() {
    unsafe {
        let mut out = ptr::null_mut();
        assert_ne!(snp_matrix_new(1, 1, ptr::null(), &mut out), SnpStatus::Ok);
        let m = matrix(1, 1, &[1.0]);
        assert!(snp_last_error_message().is_null());
        snp_matrix_free(m);
    }
}

#[test]
fn scalar_metrics() {
    unsafe {
        let mut v = 0.0;
        let scores = [0.1, 0.4, 0.35, 0.8];
        let labels = [0u8, 0, 1, 1];
        assert_eq!(snp_roc_auc(scores.as_ptr(), labels.as_ptr(), 4, &mut v), SnpStatus::Ok);
        assert!((v - 0.75).abs() < 1e-12);

        assert_eq!(
            snp_wasserstein_1d([0.0, 1.0].as_ptr(), 2, [2.0, 3.0].as_ptr(), 2, &mut v),
            SnpStatus::Ok
        );
        assert!((v - 2.0).abs() < 1e-12);

        let codes = [0u8, 1, 0, 1];
        assert_eq!(snp_kl_retrieval(codes.as_ptr(), 4, codes.as_ptr(), 4, &mut v), SnpStatus::Ok);
        assert!(v.abs() < 1e-12);
        assert_eq!(
            snp_max_skew([0u8, 0].as_ptr(), 2, codes.as_ptr(), 4, &mut v),
            SnpStatus::Ok
        );
        assert!(v > 0.0);
    }
}

#[test]
fn pipeline_through_handles() {
    let cfg = SyntheticConfig {
        samples: 400,
        ..SyntheticConfig::default()
    };
    let data = generate_synthetic(&cfg).unwrap();
    let dir = tempfile::tempdir().unwrap();
    write_sae_bundle(&data.bundle, dir.path().join("sae")).unwrap();
    let sae_dir = CString::new(dir.path().join("sae").to_str().unwrap()).unwrap();
    let x_core = data.embeddings.embeddings();

    unsafe {
        let mut sae = ptr::null_mut();
        assert_eq!(snp_sae_load(sae_dir.as_ptr(), &mut sae), SnpStatus::Ok);
        assert_eq!((snp_sae_embed_dim(sae), snp_sae_features(sae)), (cfg.n, cfg.m));

        let x = matrix(x_core.rows(), x_core.cols(), x_core.data());
        let mut z = ptr::null_mut();
        assert_eq!(snp_preactivations(sae, x, &mut z), SnpStatus::Ok);
        assert_eq!(snp_matrix_cols(z), cfg.m);

        let attrs = &data.attributes;
        let mut ranking = ptr::null_mut();
        assert_eq!(snp_rank_stylist(z, attrs.as_ptr(), attrs.len(), &mut ranking), SnpStatus::Ok);
        assert_eq!(snp_ranking_len(ranking), cfg.m);
        let mut top = [0usize; 4];
        assert_eq!(snp_ranking_top_k(ranking, 4, top.as_mut_ptr()), SnpStatus::Ok);
        let mut sorted = top;
        sorted.sort_unstable();
        assert_eq!(sorted.to_vec(), cfg.planted_attr_features);
        let mut scores = vec![0.0; cfg.m];
        assert_eq!(snp_ranking_scores(ranking, scores.as_mut_ptr(), cfg.m), SnpStatus::Ok);
        assert!(scores[top[0]] >= scores[top[3]]);

        let mut lp = ptr::null_mut();
        assert_eq!(snp_rank_lp(z, attrs.as_ptr(), attrs.len(), 1.0, &mut lp), SnpStatus::Ok);
        snp_ranking_free(lp);

        let prompts = matrix(2, cfg.n, data.prompts.data());
        let mut signal = vec![0.0; attrs.len()];
        assert_eq!(snp_clip_signal(x, prompts, signal.as_mut_ptr(), signal.len()), SnpStatus::Ok);
        let mut clip = ptr::null_mut();
        assert_eq!(snp_rank_clip(z, signal.as_ptr(), signal.len(), &mut clip), SnpStatus::Ok);
        snp_ranking_free(clip);

        let mut proj = ptr::null_mut();
        assert_eq!(
            snp_projector_interpolated(sae, z, attrs.as_ptr(), attrs.len(), top.as_ptr(), 4, 1.0, false, &mut proj),
            SnpStatus::Ok
        );
        assert_eq!(snp_projector_rank(proj), 1);
        let mut debiased = ptr::null_mut();
        assert_eq!(snp_projector_apply(proj, x, &mut debiased), SnpStatus::Ok);
        assert_eq!(snp_matrix_rows(debiased), x_core.rows());

        let mut span = ptr::null_mut();
        assert_eq!(snp_projector_subspace(sae, top.as_ptr(), 4, true, &mut span), SnpStatus::Ok);
        assert_eq!(snp_projector_rank(span), 4);

        let mut masked = ptr::null_mut();
        assert_eq!(snp_masked_reconstruction(sae, x, top.as_ptr(), 4, &mut masked), SnpStatus::Ok);

        let bad = [cfg.m];
        let mut none = ptr::null_mut();
        assert_eq!(
            snp_masked_reconstruction(sae, x, bad.as_ptr(), 1, &mut none),
            SnpStatus::InvalidArgument
        );
        let mut no_ranking = ptr::null_mut();
        assert_eq!(
            snp_rank_stylist(z, attrs.as_ptr(), attrs.len() - 1, &mut no_ranking),
            SnpStatus::Shape
        );
        assert!(no_ranking.is_null());

        for m in [x, z, prompts, debiased, masked] {
            snp_matrix_free(m);
        }
        snp_projector_free(proj);
        snp_projector_free(span);
        snp_ranking_free(ranking);
        snp_sae_free(sae);
    }
}

#[test]
fn header_declares_every_entry_point() {
    let header = std::fs::read_to_string(concat!(env!("CARGO_MANIFEST_DIR"), "/include/snp.h")).unwrap();
    let source = std::fs::read_to_string(concat!(env!("CARGO_MANIFEST_DIR"), "/src/lib.rs")).unwrap();
    let exported: Vec<&str> = source
        .split("extern \"C\" fn ")
        .skip(1)
        .map(|s| s.split('(').next().unwrap())
        .collect();
    assert!(exported.len() > 20);
    for name in exported {
        assert!(header.contains(&format!("{name}(")), "{name} missing from header");
    }
    assert!(header.contains("typedef struct SnpMatrix SnpMatrix;"));
}

#[test]
fn header_compiles_as_c() {
    let Ok(cc) = which_cc() else { return };
    let dir = tempfile::tempdir().unwrap();
    let src = dir.path().join("use.c");
    std::fs::write(
        &src,
        "#include \"snp.h\"\nint main(void) { SnpMatrix *m = NULL; return snp_matrix_new(0, 0, NULL, &m) == SNP_STATUS_OK ? 0 : 1; }\n",
    )
    .unwrap();
    let status = std::process::Command::new(cc)
        .args(["-std=c99", "-Wall", "-Werror", "-fsyntax-only", "-I"])
        .arg(concat!(env!("CARGO_MANIFEST_DIR"), "/include"))
        .arg(&src)
        .status()
        .unwrap();
    assert!(status.success());
}

fn which_cc() -> Result<&'static str, ()> {
    ["cc", "gcc", "clang"]
        .into_iter()
        .find(|c| std::process::Command::new(c).arg("--version").output().is_ok())
        .ok_or(())
}
