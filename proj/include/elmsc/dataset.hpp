#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "elmsc/numerics.hpp"

namespace elmsc::dataset {

/// v views of the same n samples. View l is d_l x n (features x samples).
struct MultiViewDataset {
  std::vector<Matrix> views;
  std::optional<std::vector<int>> labels;
  std::vector<std::string> view_names;

  Index view_count() const { return static_cast<Index>(views.size()); }
  Index sample_count() const { return views.empty() ? 0 : views.front().cols(); }

  /// Checks the shared-sample-count and label-length invariants.
  void validate() const;
};

/// Cross-view similarity S^(p,q); entry (i, j) compares sample i of view p
/// with sample j of view q. Entries lie in [0, 1].
struct SimilarityMatrix {
  Index p = 0;
  Index q = 0;
  Matrix s;
};

/// Block matrix with view l on diagonal block (l, l) and X^(p) * S^(p,q) on
/// off-diagonal block (p, q). Block row p spans rows
/// [block_rows[p], block_rows[p] + d_p); block column q spans columns
/// [block_cols[q], block_cols[q] + n).
struct AugmentedMatrix {
  Matrix xa;
  std::vector<Index> block_rows;
  std::vector<Index> block_cols;
  Index pca_dim = 0;
  Index samples = 0;
  // Fraction of each view's variance kept by the PCA alignment (empty when
  // no similarity blocks were computed).
  std::vector<double> retained_variance;

  Index view_count() const { return static_cast<Index>(block_rows.size()); }
  Index block_height(Index p) const;
  auto block(Index p, Index q) const {
    return xa.block(block_rows[p], block_cols[q], block_height(p), samples);
  }
  auto block(Index p, Index q) {
    return xa.block(block_rows[p], block_cols[q], block_height(p), samples);
  }
};

struct AugmentOptions {
  Index pca_components = 0;
  // Replaces every S^(p,q) with the identity, so each block row repeats its
  // view v times.
  bool identity_similarity = false;
};

/// Reads a JSON manifest:
///   {"n": 30,
///    "views": [{"name": "a", "path": "a.txt", "rows": 10, "cols": 30}, ...],
///    "labels": "labels.txt"}
/// Relative paths resolve against the manifest's directory. Matrix files are
/// numeric text, one matrix row per line, comma- or whitespace-separated.
/// Throws DataError on any missing file, malformed cell, or shape mismatch.
MultiViewDataset load_dataset(const std::filesystem::path& manifest_path);

/// Reads a numeric text matrix; `expected_rows`/`expected_cols` of -1 skip
/// the corresponding check.
Matrix read_matrix(const std::filesystem::path& path, Index expected_rows = -1,
                   Index expected_cols = -1);
std::vector<int> read_labels(const std::filesystem::path& path);
void write_matrix(const std::filesystem::path& path, const Matrix& m);
void write_labels(const std::filesystem::path& path, const std::vector<int>& labels);

/// Writes views, labels and a manifest into `dir`; returns the manifest path.
std::filesystem::path save_dataset(const MultiViewDataset& ds, const std::filesystem::path& dir);

/// (x~p_i . x~q_j) / (2 ||x~p_i|| ||x~q_j||) + 1/2 over sample columns. A
/// zero-norm sample contributes cosine 0, i.e. similarity 1/2.
SimilarityMatrix cosine_similarity(const Matrix& xp, const Matrix& xq, Index p = 0, Index q = 1);

AugmentedMatrix build_augmented(const MultiViewDataset& ds, const AugmentOptions& options);
AugmentedMatrix build_augmented(const MultiViewDataset& ds, Index pca_components);

/// min(6 * clusters, n - 1, min_l d_l).
Index default_pca_components(Index clusters, const MultiViewDataset& ds);

struct SyntheticSpec {
  Index clusters = 5;
  Index per_cluster = 40;
  Index views = 3;
  Index latent_dim = 8;
  std::vector<Index> view_dims{40, 36, 32};
  double noise_sigma = 0.05;
  std::uint64_t seed = 0;
};

/// Samples in cluster c lie on a 2-dimensional affine subspace of the shared
/// latent space (fewer when latent_dim < 3); each view is an independent
/// Gaussian linear map of the latent points plus N(0, noise_sigma^2) noise.
MultiViewDataset gen_synthetic(const SyntheticSpec& spec);

}  // namespace elmsc::dataset
