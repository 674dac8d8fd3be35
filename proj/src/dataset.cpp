#include "elmsc/dataset.hpp"

#include <algorithm>
#include <charconv>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

#include "elmsc/errors.hpp"
#include "elmsc/rng.hpp"

namespace elmsc::dataset {

namespace fs = std::filesystem;
using nlohmann::json;

void MultiViewDataset::validate() const {
  if (views.empty()) throw ContractError("dataset has no views");
  const Index n = sample_count();
  if (n < 1) throw ContractError("dataset has no samples");
  for (std::size_t l = 0; l < views.size(); ++l) {
    if (views[l].rows() < 1) throw ContractError("view " + std::to_string(l) + " has no features");
    if (views[l].cols() != n)
      throw ContractError("view " + std::to_string(l) + " has " + std::to_string(views[l].cols()) +
                          " samples, expected " + std::to_string(n));
  }
  if (labels && static_cast<Index>(labels->size()) != n)
    throw ContractError("labels have " + std::to_string(labels->size()) + " entries, expected " +
                        std::to_string(n));
}

Index AugmentedMatrix::block_height(Index p) const {
  const auto next = p + 1 < view_count() ? block_rows[p + 1] : xa.rows();
  return next - block_rows[p];
}

namespace {

std::vector<std::string_view> split_cells(std::string_view line) {
  std::vector<std::string_view> cells;
  std::size_t i = 0;
  auto is_sep = [](char c) { return c == ',' || c == ' ' || c == '\t' || c == '\r'; };
  while (i < line.size()) {
    while (i < line.size() && is_sep(line[i])) ++i;
    const std::size_t start = i;
    while (i < line.size() && !is_sep(line[i])) ++i;
    if (i > start) cells.push_back(line.substr(start, i - start));
  }
  return cells;
}

template <typename T>
T parse_cell(std::string_view cell, const fs::path& path, std::size_t line_no) {
  T value{};
  // from_chars rejects a leading '+', which some writers emit.
  if (!cell.empty() && cell.front() == '+') cell.remove_prefix(1);
  const auto [ptr, ec] = std::from_chars(cell.data(), cell.data() + cell.size(), value);
  if (ec != std::errc() || ptr != cell.data() + cell.size())
    throw DataError(path.string() + ":" + std::to_string(line_no) + ": non-numeric cell '" +
                    std::string(cell) + "'");
  return value;
}

std::ifstream open_input(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path.string());
  return in;
}

}  // namespace

Matrix read_matrix(const fs::path& path, Index expected_rows, Index expected_cols) {
  std::ifstream in = open_input(path);
  std::vector<std::vector<double>> rows;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto cells = split_cells(line);
    if (cells.empty()) continue;
    std::vector<double> row;
    row.reserve(cells.size());
    for (auto cell : cells) row.push_back(parse_cell<double>(cell, path, line_no));
    if (!rows.empty() && row.size() != rows.front().size())
      throw DataError(path.string() + ":" + std::to_string(line_no) + ": ragged row with " +
                      std::to_string(row.size()) + " cells, expected " +
                      std::to_string(rows.front().size()));
    rows.push_back(std::move(row));
  }
  if (rows.empty()) throw DataError(path.string() + ": empty matrix file");

  Matrix m(static_cast<Index>(rows.size()), static_cast<Index>(rows.front().size()));
  for (Index i = 0; i < m.rows(); ++i)
    for (Index j = 0; j < m.cols(); ++j) m(i, j) = rows[i][j];
  if ((expected_rows >= 0 && m.rows() != expected_rows) ||
      (expected_cols >= 0 && m.cols() != expected_cols))
    throw DataError(path.string() + ": shape " + std::to_string(m.rows()) + "x" +
                    std::to_string(m.cols()) + " does not match declared " +
                    std::to_string(expected_rows) + "x" + std::to_string(expected_cols));
  if (!m.allFinite()) throw DataError(path.string() + ": non-finite entries");
  return m;
}

std::vector<int> read_labels(const fs::path& path) {
  std::ifstream in = open_input(path);
  std::vector<int> labels;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto cells = split_cells(line);
    if (cells.empty()) continue;
    if (cells.size() != 1)
      throw DataError(path.string() + ":" + std::to_string(line_no) + ": expected one label");
    const int label = parse_cell<int>(cells.front(), path, line_no);
    if (label < 0)
      throw DataError(path.string() + ":" + std::to_string(line_no) + ": negative label");
    labels.push_back(label);
  }
  return labels;
}

void write_matrix(const fs::path& path, const Matrix& m) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write " + path.string());
  char buf[32];
  for (Index i = 0; i < m.rows(); ++i) {
    for (Index j = 0; j < m.cols(); ++j) {
      std::snprintf(buf, sizeof buf, "%.17g", m(i, j));
      if (j) out << ' ';
      out << buf;
    }
    out << '\n';
  }
  if (!out) throw DataError("write failed for " + path.string());
}

void write_labels(const fs::path& path, const std::vector<int>& labels) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write " + path.string());
  for (int label : labels) out << label << '\n';
  if (!out) throw DataError("write failed for " + path.string());
}

MultiViewDataset load_dataset(const fs::path& manifest_path) {
  std::ifstream in = open_input(manifest_path);
  json manifest;
  try {
    manifest = json::parse(in);
  } catch (const json::exception& e) {
    throw DataError(manifest_path.string() + ": malformed manifest: " + e.what());
  }
  const fs::path base = manifest_path.parent_path();
  auto resolve = [&](const std::string& p) { return fs::path(p).is_absolute() ? fs::path(p) : base / p; };

  MultiViewDataset ds;
  try {
    const Index n = manifest.at("n").get<Index>();
    const auto& views = manifest.at("views");
    if (!views.is_array() || views.empty()) throw DataError("manifest lists no views");
    for (std::size_t l = 0; l < views.size(); ++l) {
      const auto& v = views[l];
      const std::string name = v.value("name", "view" + std::to_string(l));
      const Index rows = v.value("rows", Index{-1});
      const Index cols = v.value("cols", n);
      if (cols != n)
        throw DataError("view '" + name + "' declares " + std::to_string(cols) +
                        " samples, manifest n = " + std::to_string(n));
      try {
        ds.views.push_back(read_matrix(resolve(v.at("path").get<std::string>()), rows, n));
      } catch (const DataError& e) {
        throw DataError("view '" + name + "': " + e.what());
      }
      ds.view_names.push_back(name);
    }
    if (manifest.contains("labels") && !manifest["labels"].is_null()) {
      auto labels = read_labels(resolve(manifest["labels"].get<std::string>()));
      if (static_cast<Index>(labels.size()) != n)
        throw DataError("labels file has " + std::to_string(labels.size()) + " entries, expected " +
                        std::to_string(n));
      ds.labels = std::move(labels);
    }
  } catch (const json::exception& e) {
    throw DataError(manifest_path.string() + ": invalid manifest field: " + e.what());
  }
  return ds;
}

fs::path save_dataset(const MultiViewDataset& ds, const fs::path& dir) {
  ds.validate();
  fs::create_directories(dir);
  json manifest;
  manifest["n"] = ds.sample_count();
  manifest["views"] = json::array();
  for (Index l = 0; l < ds.view_count(); ++l) {
    const std::string name = l < static_cast<Index>(ds.view_names.size())
                                 ? ds.view_names[l]
                                 : "view" + std::to_string(l);
    const std::string file = "view" + std::to_string(l) + ".txt";
    write_matrix(dir / file, ds.views[l]);
    manifest["views"].push_back(
        {{"name", name}, {"path", file}, {"rows", ds.views[l].rows()}, {"cols", ds.views[l].cols()}});
  }
  if (ds.labels) {
    write_labels(dir / "labels.txt", *ds.labels);
    manifest["labels"] = "labels.txt";
  }
  const fs::path path = dir / "manifest.json";
  std::ofstream out(path);
  if (!out) throw DataError("cannot write " + path.string());
  out << manifest.dump(2) << '\n';
  return path;
}

SimilarityMatrix cosine_similarity(const Matrix& xp, const Matrix& xq, Index p, Index q) {
  if (xp.rows() != xq.rows() || xp.cols() != xq.cols())
    throw ContractError("cosine_similarity: views must share feature dimension and sample count");
  auto normalized = [](const Matrix& x) {
    Matrix u = x;
    for (Index i = 0; i < u.cols(); ++i) {
      const double norm = u.col(i).norm();
      if (norm > 0.0)
        u.col(i) /= norm;
      else
        u.col(i).setZero();
    }
    return u;
  };
  Matrix s = (0.5 * (normalized(xp).transpose() * normalized(xq))).array() + 0.5;
  s = s.cwiseMax(0.0).cwiseMin(1.0);
  return {p, q, std::move(s)};
}

Index default_pca_components(Index clusters, const MultiViewDataset& ds) {
  Index min_dim = ds.views.empty() ? 0 : ds.views.front().rows();
  for (const auto& v : ds.views) min_dim = std::min(min_dim, v.rows());
  return std::max<Index>(1, std::min({clusters * 6, ds.sample_count() - 1, min_dim}));
}

AugmentedMatrix build_augmented(const MultiViewDataset& ds, Index pca_components) {
  return build_augmented(ds, AugmentOptions{pca_components, false});
}

AugmentedMatrix build_augmented(const MultiViewDataset& ds, const AugmentOptions& options) {
  ds.validate();
  const Index v = ds.view_count();
  const Index n = ds.sample_count();

  AugmentedMatrix out;
  out.samples = n;
  out.pca_dim = options.pca_components;
  Index d = 0;
  for (const auto& view : ds.views) {
    out.block_rows.push_back(d);
    d += view.rows();
  }
  for (Index l = 0; l < v; ++l) out.block_cols.push_back(l * n);
  out.xa = Matrix::Zero(d, v * n);
  for (Index l = 0; l < v; ++l) out.block(l, l) = ds.views[l];
  if (v == 1) return out;

  if (options.identity_similarity) {
    for (Index p = 0; p < v; ++p)
      for (Index q = 0; q < v; ++q)
        if (p != q) out.block(p, q) = ds.views[p];
    return out;
  }

  Index limit = n - 1;
  for (const auto& view : ds.views) limit = std::min(limit, view.rows());
  if (options.pca_components < 1 || options.pca_components > limit)
    throw ContractError("build_augmented: " + std::to_string(options.pca_components) +
                        " PCA components requested but at most " + std::to_string(limit) +
                        " are valid for this dataset; use a smaller component count");

  std::vector<Matrix> reduced;
  reduced.reserve(v);
  for (const auto& view : ds.views) {
    numerics::PcaResult pca = numerics::pca_reduce(view, options.pca_components);
    out.retained_variance.push_back(pca.retained_variance);
    reduced.push_back(std::move(pca.reduced));
  }

  for (Index p = 0; p < v; ++p) {
    for (Index q = p + 1; q < v; ++q) {
      const SimilarityMatrix s = cosine_similarity(reduced[p], reduced[q], p, q);
      out.block(p, q) = ds.views[p] * s.s;
      out.block(q, p) = ds.views[q] * s.s.transpose();
    }
  }
  return out;
}

MultiViewDataset gen_synthetic(const SyntheticSpec& spec) {
  if (spec.clusters < 1 || spec.per_cluster < 1 || spec.views < 1 || spec.latent_dim < 1)
    throw ContractError("gen_synthetic: counts must be positive");
  if (static_cast<Index>(spec.view_dims.size()) != spec.views)
    throw ContractError("gen_synthetic: view_dims must list one dimension per view");
  for (Index dl : spec.view_dims)
    if (dl < spec.latent_dim)
      throw ContractError("gen_synthetic: latent_dim exceeds a view dimension");
  if (!(spec.noise_sigma >= 0.0)) throw ContractError("gen_synthetic: noise_sigma must be >= 0");

  constexpr double center_scale = 3.0;
  const Index k = spec.latent_dim;
  const Index sub_dim = std::min<Index>(2, k - 1);
  const Index n = spec.clusters * spec.per_cluster;

  Rng rng(spec.seed);
  Matrix latent(k, n);
  std::vector<int> labels(static_cast<std::size_t>(n));
  for (Index c = 0; c < spec.clusters; ++c) {
    const Vector center = center_scale * rng.gaussian_matrix(k, 1);
    Matrix basis;
    if (sub_dim > 0) basis = Eigen::HouseholderQR<Matrix>(rng.gaussian_matrix(k, sub_dim))
                                 .householderQ() * Matrix::Identity(k, sub_dim);
    for (Index i = 0; i < spec.per_cluster; ++i) {
      const Index col = c * spec.per_cluster + i;
      latent.col(col) = center;
      if (sub_dim > 0) latent.col(col) += basis * rng.gaussian_matrix(sub_dim, 1);
      labels[static_cast<std::size_t>(col)] = static_cast<int>(c);
    }
  }

  MultiViewDataset ds;
  for (Index l = 0; l < spec.views; ++l) {
    const Matrix map = rng.gaussian_matrix(spec.view_dims[l], k) / std::sqrt(static_cast<double>(k));
    Matrix view = map * latent;
    if (spec.noise_sigma > 0.0) view += spec.noise_sigma * rng.gaussian_matrix(view.rows(), n);
    ds.views.push_back(std::move(view));
    ds.view_names.push_back("view" + std::to_string(l));
  }
  ds.labels = std::move(labels);
  return ds;
}

}  // namespace elmsc::dataset
