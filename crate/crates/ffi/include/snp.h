#ifndef SNP_H
#define SNP_H

#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>

typedef enum SnpStatus {
  SNP_STATUS_OK = 0,
  SNP_STATUS_NULL_POINTER = 1,
  SNP_STATUS_INVALID_ARGUMENT = 2,
  SNP_STATUS_VALIDATION = 3,
  SNP_STATUS_IO = 4,
  SNP_STATUS_SHAPE = 5,
  SNP_STATUS_SINGLE_CLASS = 6,
  SNP_STATUS_DEGENERATE_AXIS = 7,
  SNP_STATUS_RUNTIME = 8,
  SNP_STATUS_PANIC = 9,
} SnpStatus;

// Dense row-major matrix of doubles.
typedef struct SnpMatrix SnpMatrix;

// Orthogonal projector removing a subspace.
typedef struct SnpProjector SnpProjector;

// Feature scores and their descending order.
typedef struct SnpRanking SnpRanking;

// Sparse autoencoder parameters.
typedef struct SnpSae SnpSae;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message for the last failed call on this thread, or null. The pointer is
// valid until the next `snp_*` call on the same thread.
const char *snp_last_error_message(void);

// Library version as a static NUL-terminated string.
const char *snp_version(void);

// Copies `rows * cols` row-major values into a new matrix.
//
// # Safety
// `data` must point to `rows * cols` doubles (or be null when that is 0);
// `out` must be writable.
enum SnpStatus snp_matrix_new(size_t rows, size_t cols, const double *data, struct SnpMatrix **out);

// # Safety
// `path` must be a NUL-terminated string; `out` must be writable.
enum SnpStatus snp_matrix_read(const char *path_, struct SnpMatrix **out);

// # Safety
// `m` must be a live matrix handle; `path` a NUL-terminated string.
enum SnpStatus snp_matrix_write(const struct SnpMatrix *m, const char *path_);

// Row count, or 0 for a null handle.
//
// # Safety
// `m` must be null or a live matrix handle.
size_t snp_matrix_rows(const struct SnpMatrix *m);

// Column count, or 0 for a null handle.
//
// # Safety
// `m` must be null or a live matrix handle.
size_t snp_matrix_cols(const struct SnpMatrix *m);

// Copies the row-major values into `buf`, which must hold exactly
// `rows * cols` doubles.
//
// # Safety
// `m` must be a live handle and `buf` writable for `len` doubles.
enum SnpStatus snp_matrix_copy_data(const struct SnpMatrix *m, double *buf, size_t len);

// # Safety
// `m` must be null or a handle not yet freed.
void snp_matrix_free(struct SnpMatrix *m);

// Loads an SAE bundle directory.
//
// # Safety
// `dir` must be a NUL-terminated string; `out` must be writable.
enum SnpStatus snp_sae_load(const char *dir, struct SnpSae **out);

// Embedding dimension `n`, or 0 for a null handle.
//
// # Safety
// `sae` must be null or a live handle.
size_t snp_sae_embed_dim(const struct SnpSae *sae);

// Feature count `m`, or 0 for a null handle.
//
// # Safety
// `sae` must be null or a live handle.
size_t snp_sae_features(const struct SnpSae *sae);

// # Safety
// `sae` must be null or a handle not yet freed.
void snp_sae_free(struct SnpSae *sae);

// `out = (x - b_dec) E + b_enc`.
//
// # Safety
// Handles must be live; `out` must be writable.
enum SnpStatus snp_preactivations(const struct SnpSae *sae,
                                  const struct SnpMatrix *x,
                                  struct SnpMatrix **out);

// Subtracts the decoder reconstruction of the `k` listed features.
//
// # Safety
// Handles must be live; `indices` must point to `k` values.
enum SnpStatus snp_masked_reconstruction(const struct SnpSae *sae,
                                         const struct SnpMatrix *x,
                                         const size_t *indices,
                                         size_t k,
                                         struct SnpMatrix **out);

// Mean pairwise 1-Wasserstein ranking across attribute groups.
//
// # Safety
// `preacts` must be live; `attrs` must point to `n` values.
enum SnpStatus snp_rank_stylist(const struct SnpMatrix *preacts,
                                const uint8_t *attrs,
                                size_t n,
                                struct SnpRanking **out);

// Linear-probe ranking with L2 strength `l2`.
//
// # Safety
// `preacts` must be live; `attrs` must point to `n` values.
enum SnpStatus snp_rank_lp(const struct SnpMatrix *preacts,
                           const uint8_t *attrs,
                           size_t n,
                           double l2,
                           struct SnpRanking **out);

// Ranking by absolute correlation with per-sample prompt scores.
//
// # Safety
// `preacts` must be live; `scores` must point to `n` values.
enum SnpStatus snp_rank_clip(const struct SnpMatrix *preacts,
                             const double *scores,
                             size_t n,
                             struct SnpRanking **out);

// Per-image prompt similarity signal; `out` must hold one value per image row.
//
// # Safety
// Handles must be live; `out` writable for `n` doubles.
enum SnpStatus snp_clip_signal(const struct SnpMatrix *images,
                               const struct SnpMatrix *prompts,
                               double *out,
                               size_t n);

// Number of ranked features, or 0 for a null handle.
//
// # Safety
// `r` must be null or a live handle.
size_t snp_ranking_len(const struct SnpRanking *r);

// Writes the `k` best feature indices to `out`.
//
// # Safety
// `r` must be live; `out` writable for `k` values.
enum SnpStatus snp_ranking_top_k(const struct SnpRanking *r, size_t k, size_t *out);

// Copies per-feature scores (by feature index) into `out` of length `len`.
//
// # Safety
// `r` must be live; `out` writable for `len` doubles.
enum SnpStatus snp_ranking_scores(const struct SnpRanking *r, double *out, size_t len);

// # Safety
// `r` must be null or a handle not yet freed.
void snp_ranking_free(struct SnpRanking *r);

// Rank-one projector along the interpolated axis: a probe on the selected
// preactivation columns weights the encoder columns (or decoder rows when
// `use_decoder` is true).
//
// # Safety
// Handles must be live; `attrs` must point to `n` values and `indices` to `k`.
enum SnpStatus snp_projector_interpolated(const struct SnpSae *sae,
                                          const struct SnpMatrix *preacts,
                                          const uint8_t *attrs,
                                          size_t n,
                                          const size_t *indices,
                                          size_t k,
                                          double l2,
                                          bool use_decoder,
                                          struct SnpProjector **out);

// Projector removing the span of the selected encoder columns (or decoder
// rows when `use_decoder` is true).
//
// # Safety
// `sae` must be live; `indices` must point to `k` values.
enum SnpStatus snp_projector_subspace(const struct SnpSae *sae,
                                      const size_t *indices,
                                      size_t k,
                                      bool use_decoder,
                                      struct SnpProjector **out);

// # Safety
// Handles must be live; `out` must be writable.
enum SnpStatus snp_projector_apply(const struct SnpProjector *p,
                                   const struct SnpMatrix *x,
                                   struct SnpMatrix **out);

// Dimension of the removed subspace, or 0 for a null handle.
//
// # Safety
// `p` must be null or a live handle.
size_t snp_projector_rank(const struct SnpProjector *p);

// # Safety
// `p` must be null or a handle not yet freed.
void snp_projector_free(struct SnpProjector *p);

// # Safety
// `retrieved` and `dataset` must point to `n_retrieved` / `n_dataset` codes.
enum SnpStatus snp_kl_retrieval(const uint8_t *retrieved,
                                size_t n_retrieved,
                                const uint8_t *dataset,
                                size_t n_dataset,
                                double *out);

// # Safety
// As for [`snp_kl_retrieval`].
enum SnpStatus snp_max_skew(const uint8_t *retrieved,
                            size_t n_retrieved,
                            const uint8_t *dataset,
                            size_t n_dataset,
                            double *out);

// # Safety
// `scores` and `labels` must point to `n` values.
enum SnpStatus snp_roc_auc(const double *scores, const uint8_t *labels, size_t n, double *out);

// # Safety
// `a` and `b` must point to `na` / `nb` values.
enum SnpStatus snp_wasserstein_1d(const double *a,
                                  size_t na,
                                  const double *b,
                                  size_t nb,
                                  double *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* SNP_H */
