use proptest::prelude::*;
use snp_core::data::*;
use snp_core::sae::SaeParams;
use snp_core::{Matrix, SnpError};

fn matrix_strategy() -> impl Strategy<Value = Matrix> {
    (0usize..6, 0usize..6).prop_flat_map(|(r, c)| {
        prop::collection::vec(-1e6f64..1e6, r * c).prop_map(move |d| Matrix::new(r, c, d).unwrap())
    })
}

proptest! {
    #[test]
    fn f64_encoding_round_trips(m in matrix_strategy()) {
        let bytes = encode_matrix(&m, Dtype::F64);
        prop_assert_eq!(bytes.len(), HEADER_LEN + 8 * m.data().len());
        prop_assert_eq!(decode_matrix(&bytes).unwrap(), m);
    }

    #[test]
    fn f32_encoding_round_trips_at_single_precision(m in matrix_strategy()) {
        let back = decode_matrix(&encode_matrix(&m, Dtype::F32)).unwrap();
        prop_assert_eq!(back.shape(), m.shape());
        for (a, b) in back.data().iter().zip(m.data()) {
            prop_assert_eq!(*a, *b as f32 as f64);
        }
    }

    #[test]
    fn truncated_payload_is_rejected(m in matrix_strategy(), cut in 1usize..8) {
        prop_assume!(!m.data().is_empty());
        let bytes = encode_matrix(&m, Dtype::F64);
        prop_assert!(decode_matrix(&bytes[..bytes.len() - cut]).is_err());
    }
}

#[test]
fn header_layout_is_little_endian() {
    let m = Matrix::from_rows(&[[1.5, -2.0, 0.25]]).unwrap();
    let bytes = encode_matrix(&m, Dtype::F64);
    assert_eq!(&bytes[0..4], &MAGIC);
    assert_eq!(u32::from_le_bytes(bytes[4..8].try_into().unwrap()), 1);
    assert_eq!(u32::from_le_bytes(bytes[8..12].try_into().unwrap()), 0);
    assert_eq!(u32::from_le_bytes(bytes[12..16].try_into().unwrap()), 2);
    assert_eq!(u64::from_le_bytes(bytes[16..24].try_into().unwrap()), 1);
    assert_eq!(u64::from_le_bytes(bytes[24..32].try_into().unwrap()), 3);
    assert_eq!(f64::from_le_bytes(bytes[32..40].try_into().unwrap()), 1.5);
}

#[test]
fn padded_header_is_accepted() {
    let m = Matrix::from_rows(&[[1.0, 2.0], [3.0, 4.0]]).unwrap();
    let bytes = encode_matrix(&m, Dtype::F64);
    let mut padded = bytes[..HEADER_LEN].to_vec();
    padded.extend_from_slice(&[0; 4]);
    padded.extend_from_slice(&bytes[HEADER_LEN..]);
    assert_eq!(decode_matrix(&padded).unwrap(), m);
}

#[test]
fn malformed_headers_are_format_errors() {
    let m = Matrix::from_rows(&[[1.0]]).unwrap();
    let good = encode_matrix(&m, Dtype::F64);
    let mut bad_magic = good.clone();
    bad_magic[0] = b'X';
    let mut bad_version = good.clone();
    bad_version[4] = 9;
    let mut bad_dtype = good.clone();
    bad_dtype[8] = 7;
    let mut bad_ndim = good.clone();
    bad_ndim[12] = 3;
    for bytes in [bad_magic, bad_version, bad_dtype, bad_ndim, good[..10].to_vec()] {
        let err = decode_matrix(&bytes).unwrap_err();
        assert!(err.is_validation(), "{err}");
    }
}

#[test]
fn labels_accept_optional_header_and_task() {
    let t = parse_labels("sample_id,attribute,task_label\na,0,3\nb,1,\n").unwrap();
    assert_eq!(t.len(), 2);
    assert_eq!(t.get("a").unwrap().task_label, Some(3));
    assert_eq!(t.get("b").unwrap().task_label, None);
    let bare = parse_labels("a,1\nb,0\n").unwrap();
    assert_eq!(bare.get("a").unwrap().attribute, 1);
}

#[test]
fn labels_reject_bad_rows() {
    assert!(matches!(parse_labels("a,2\n"), Err(SnpError::Validation(_))));
    assert!(matches!(parse_labels("a,x\n"), Err(SnpError::Format(_))));
    assert!(matches!(parse_labels("a,0\na,1\n"), Err(SnpError::DuplicateId(_))));
    assert!(parse_labels("a,0,1,2\n").is_err());
    assert!(parse_labels("id,attribute\n").is_err());
}

#[test]
fn labels_round_trip_through_file() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("labels.csv");
    let t = parse_labels("x,0,1\ny,1,\nz,1,0\n").unwrap();
    write_labels(&t, &path).unwrap();
    assert_eq!(read_labels(&path).unwrap(), t);
}

#[test]
fn embedding_set_keeps_ids() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("emb.snpm");
    let set = EmbeddingSet::new(
        Matrix::from_rows(&[[1.0, 0.0], [0.0, 1.0]]).unwrap(),
        vec!["b".into(), "a".into()],
    )
    .unwrap();
    save_embedding_set(&set, &path).unwrap();
    assert_eq!(load_embedding_set(&path).unwrap(), set);

    assert!(EmbeddingSet::new(Matrix::zeros(2, 1), vec!["a".into(), "a".into()]).is_err());
    assert!(EmbeddingSet::new(Matrix::zeros(2, 1), vec!["a".into()]).is_err());
}

#[test]
fn embeddings_without_ids_use_row_indices() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("plain.snpm");
    write_matrix(&Matrix::zeros(3, 2), &path).unwrap();
    let set = load_embedding_set(&path).unwrap();
    assert_eq!(set.sample_ids().len(), 3);
    let unique: std::collections::HashSet<_> = set.sample_ids().iter().collect();
    assert_eq!(unique.len(), 3);
}

#[test]
fn label_alignment_requires_every_id() {
    let set = EmbeddingSet::new(Matrix::zeros(2, 1), vec!["a".into(), "b".into()]).unwrap();
    let aligned = align_labels(&set, &parse_labels("b,1,0\na,0,1\n").unwrap()).unwrap();
    assert_eq!(aligned.attributes, vec![0, 1]);
    assert_eq!(aligned.task_labels, Some(vec![1, 0]));
    assert!(align_labels(&set, &parse_labels("a,0\n").unwrap()).is_err());
}

fn small_sae() -> SaeParams {
    SaeParams::new(
        Matrix::from_rows(&[[1.0, 0.0, 2.0], [0.0, 1.0, -1.0]]).unwrap(),
        Matrix::from_rows(&[[1.0, 0.0], [0.0, 1.0], [0.5, 0.5]]).unwrap(),
        vec![0.1, 0.2, 0.3],
        vec![-1.0, 1.0],
        vec![0.0, 0.5, 1.0],
    )
    .unwrap()
}

#[test]
fn sae_bundle_round_trips() {
    let dir = tempfile::tempdir().unwrap();
    let bundle = SaeBundle::from_params(small_sae());
    write_sae_bundle(&bundle, dir.path()).unwrap();
    for f in BUNDLE_FILES.iter().chain(&["meta.json"]) {
        assert!(dir.path().join(f).exists(), "{f}");
    }
    assert_eq!(load_sae_bundle(dir.path()).unwrap(), bundle);
}

#[test]
fn sae_bundle_reports_missing_component() {
    let dir = tempfile::tempdir().unwrap();
    write_sae_bundle(&SaeBundle::from_params(small_sae()), dir.path()).unwrap();
    std::fs::remove_file(dir.path().join("theta.snpm")).unwrap();
    let err = load_sae_bundle(dir.path()).unwrap_err();
    assert!(matches!(err, SnpError::MissingComponent(ref p) if p.ends_with("theta.snpm")), "{err}");
}

#[test]
fn sae_parameters_are_validated() {
    let e = Matrix::zeros(2, 3);
    let d = Matrix::zeros(3, 2);
    assert!(SaeParams::new(e.clone(), Matrix::zeros(2, 3), vec![0.0; 3], vec![0.0; 2], vec![0.0; 3]).is_err());
    assert!(SaeParams::new(e.clone(), d.clone(), vec![0.0; 2], vec![0.0; 2], vec![0.0; 3]).is_err());
    assert!(SaeParams::new(e.clone(), d.clone(), vec![0.0; 3], vec![0.0; 2], vec![0.0, -1.0, 0.0]).is_err());
    assert!(SaeParams::new(e, d, vec![0.0; 3], vec![f64::NAN, 0.0], vec![0.0; 3]).is_err());
}
