#pragma once

// Dataset representation, CSV ingestion, standardization and fold splitting.

#include <Eigen/Dense>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstddef>
#include <fstream>
#include <limits>
#include <numeric>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include "ensimpute/random.hpp"

namespace ensimpute {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using Mask = Eigen::Array<bool, Eigen::Dynamic, Eigen::Dynamic>;

/// Thrown when inputs violate a documented precondition.
class ValidationError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

struct DatasetMeta {
  std::string name;
  std::size_t n_records = 0;
  std::size_t n_features = 0;
  std::size_t n_classes = 0;
  std::vector<std::string> feature_names;
  /// Class label text for each dense class index, in first-appearance order.
  std::vector<std::string> class_names;
};

/// N x F numeric cells with a per-cell observation mask (true = observed).
/// Unobserved cells hold NaN in `values`; the mask is authoritative.
struct Dataset {
  Matrix values;
  Mask mask;
  std::vector<int> labels;
  DatasetMeta meta;

  std::size_t rows() const { return static_cast<std::size_t>(values.rows()); }
  std::size_t cols() const { return static_cast<std::size_t>(values.cols()); }
  std::size_t n_classes() const { return meta.n_classes; }

  bool observed(std::size_t r, std::size_t c) const {
    return mask(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c));
  }
  double value(std::size_t r, std::size_t c) const {
    return values(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c));
  }

  bool complete() const { return mask.all(); }
  std::size_t missing_count() const {
    return static_cast<std::size_t>(mask.size() - mask.count());
  }

  /// Rows in the given order (repeats allowed); labels follow their rows.
  Dataset subset(const std::vector<std::size_t>& idx) const {
    Dataset out;
    out.meta = meta;
    out.meta.n_records = idx.size();
    out.values.resize(static_cast<Eigen::Index>(idx.size()), values.cols());
    out.mask.resize(static_cast<Eigen::Index>(idx.size()), mask.cols());
    out.labels.resize(idx.size());
    for (std::size_t i = 0; i < idx.size(); ++i) {
      const auto src = static_cast<Eigen::Index>(idx[i]);
      out.values.row(static_cast<Eigen::Index>(i)) = values.row(src);
      out.mask.row(static_cast<Eigen::Index>(i)) = mask.row(src);
      out.labels[i] = labels[idx[i]];
    }
    return out;
  }
};

/// Checks the structural invariants; throws ValidationError on violation.
inline void validate(const Dataset& d) {
  if (d.values.rows() != d.mask.rows() || d.values.cols() != d.mask.cols())
    throw ValidationError("dataset: mask and values have different dimensions");
  if (d.labels.size() != d.rows())
    throw ValidationError("dataset: label count does not match record count");
  if (d.meta.n_records != d.rows() || d.meta.n_features != d.cols())
    throw ValidationError("dataset: metadata dimensions are stale");
  for (int y : d.labels)
    if (y < 0 || static_cast<std::size_t>(y) >= d.meta.n_classes)
      throw ValidationError("dataset: class index out of range");
  for (Eigen::Index r = 0; r < d.mask.rows(); ++r)
    if (d.mask.cols() > 0 && !d.mask.row(r).any())
      throw ValidationError("dataset: record " + std::to_string(r) + " has no observed cells");
}

/// Builds a dataset from dense rows; NaN cells are treated as unobserved.
inline Dataset make_dataset(const std::vector<std::vector<double>>& rows, std::vector<int> labels,
                            std::size_t n_classes, std::string name = "synthetic") {
  Dataset d;
  const std::size_t n = rows.size();
  const std::size_t f = n == 0 ? 0 : rows.front().size();
  d.values.resize(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(f));
  d.mask.resize(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(f));
  for (std::size_t r = 0; r < n; ++r) {
    if (rows[r].size() != f) throw ValidationError("make_dataset: ragged rows");
    for (std::size_t c = 0; c < f; ++c) {
      const double v = rows[r][c];
      d.values(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = v;
      d.mask(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = !std::isnan(v);
    }
  }
  d.labels = std::move(labels);
  d.meta.name = std::move(name);
  d.meta.n_records = n;
  d.meta.n_features = f;
  d.meta.n_classes = n_classes;
  for (std::size_t c = 0; c < f; ++c) d.meta.feature_names.push_back("x" + std::to_string(c + 1));
  for (std::size_t k = 0; k < n_classes; ++k) d.meta.class_names.push_back(std::to_string(k));
  return d;
}

// ---------------------------------------------------------------------------
// CSV

namespace detail {

inline std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t' || s.front() == '\r')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

inline std::vector<std::string> split_csv_line(std::string_view line) {
  std::vector<std::string> out;
  std::string cur;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char ch = line[i];
    if (quoted) {
      if (ch == '"') {
        if (i + 1 < line.size() && line[i + 1] == '"') {
          cur.push_back('"');
          ++i;
        } else {
          quoted = false;
        }
      } else {
        cur.push_back(ch);
      }
    } else if (ch == '"') {
      quoted = true;
    } else if (ch == ',') {
      out.emplace_back(trim(cur));
      cur.clear();
    } else {
      cur.push_back(ch);
    }
  }
  out.emplace_back(trim(cur));
  return out;
}

inline bool is_missing_token(std::string_view s) { return s.empty() || s == "?"; }

inline bool parse_double(std::string_view s, double& out) {
  if (!s.empty() && s.front() == '+') s.remove_prefix(1);
  const auto* end = s.data() + s.size();
  auto [p, ec] = std::from_chars(s.data(), end, out);
  return ec == std::errc() && p == end && std::isfinite(out);
}

inline std::string format_double(double v) {
  char buf[64];
  auto [p, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, p);
}

inline bool all_digits(std::string_view s) {
  return !s.empty() && std::all_of(s.begin(), s.end(), [](char c) { return c >= '0' && c <= '9'; });
}

}  // namespace detail

/// Reads a headed CSV. `label_column` is a header name, or a 0-based index
/// when it is all digits and no header carries that name. Empty fields and
/// "?" are missing. Classes are indexed in first-appearance order.
inline Dataset load_csv(const std::string& path, const std::string& label_column = "class") {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read file: " + path);

  std::string line;
  if (!std::getline(in, line)) throw ValidationError(path + ": missing header row");
  if (line.size() >= 3 && static_cast<unsigned char>(line[0]) == 0xEF) line.erase(0, 3);
  const auto header = detail::split_csv_line(line);

  std::size_t label_idx = header.size();
  std::size_t matches = 0;
  for (std::size_t i = 0; i < header.size(); ++i)
    if (header[i] == label_column) {
      label_idx = i;
      ++matches;
    }
  if (matches > 1) throw ValidationError(path + ": duplicate label column '" + label_column + "'");
  if (matches == 0) {
    if (!detail::all_digits(label_column) || std::stoul(label_column) >= header.size())
      throw ValidationError(path + ": unknown label column '" + label_column + "'");
    label_idx = std::stoul(label_column);
  }

  Dataset d;
  d.meta.name = path;
  {
    const auto slash = path.find_last_of("/\\");
    std::string base = slash == std::string::npos ? path : path.substr(slash + 1);
    if (base.size() > 4 && base.substr(base.size() - 4) == ".csv") base.resize(base.size() - 4);
    d.meta.name = base;
  }
  for (std::size_t i = 0; i < header.size(); ++i)
    if (i != label_idx) d.meta.feature_names.push_back(header[i]);
  const std::size_t f = d.meta.feature_names.size();
  if (f == 0) throw ValidationError(path + ": no feature columns");

  std::vector<double> cells;
  std::vector<bool> observed;
  std::unordered_map<std::string, int> class_index;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (detail::trim(line).empty()) continue;
    const auto fields = detail::split_csv_line(line);
    if (fields.size() != header.size())
      throw ValidationError(path + ":" + std::to_string(line_no) + ": expected " +
                            std::to_string(header.size()) + " fields, got " +
                            std::to_string(fields.size()));
    for (std::size_t i = 0; i < fields.size(); ++i) {
      if (i == label_idx) continue;
      if (detail::is_missing_token(fields[i])) {
        cells.push_back(std::numeric_limits<double>::quiet_NaN());
        observed.push_back(false);
        continue;
      }
      double v;
      if (!detail::parse_double(fields[i], v))
        throw ValidationError(path + ":" + std::to_string(line_no) + ": non-numeric feature cell '" +
                              fields[i] + "' in column '" + header[i] + "'");
      cells.push_back(v);
      observed.push_back(true);
    }
    const std::string& lab = fields[label_idx];
    if (detail::is_missing_token(lab))
      throw ValidationError(path + ":" + std::to_string(line_no) + ": missing class label");
    auto [it, inserted] = class_index.try_emplace(lab, static_cast<int>(class_index.size()));
    if (inserted) d.meta.class_names.push_back(lab);
    d.labels.push_back(it->second);
  }

  const std::size_t n = d.labels.size();
  if (class_index.size() < 2) throw ValidationError(path + ": single-class dataset");
  if (n < 2) throw ValidationError(path + ": fewer than two records");

  d.values.resize(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(f));
  d.mask.resize(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(f));
  for (std::size_t r = 0; r < n; ++r)
    for (std::size_t c = 0; c < f; ++c) {
      d.values(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = cells[r * f + c];
      d.mask(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = observed[r * f + c];
    }
  d.meta.n_records = n;
  d.meta.n_features = f;
  d.meta.n_classes = class_index.size();
  validate(d);
  return d;
}

/// Writes features then a trailing "class" column; missing cells become "?".
inline void write_csv(const Dataset& d, std::ostream& out) {
  for (const auto& name : d.meta.feature_names) out << name << ',';
  out << "class\n";
  for (std::size_t r = 0; r < d.rows(); ++r) {
    for (std::size_t c = 0; c < d.cols(); ++c) {
      if (d.observed(r, c))
        out << detail::format_double(d.value(r, c));
      else
        out << '?';
      out << ',';
    }
    const auto y = static_cast<std::size_t>(d.labels[r]);
    out << (y < d.meta.class_names.size() ? d.meta.class_names[y] : std::to_string(y)) << '\n';
  }
}

inline void write_csv(const Dataset& d, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write file: " + path);
  write_csv(d, out);
}

/// Sidecar audit file: one row per record, 1 = observed, 0 = missing.
inline void write_mask(const Dataset& d, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write file: " + path);
  for (std::size_t r = 0; r < d.rows(); ++r) {
    for (std::size_t c = 0; c < d.cols(); ++c) out << (c ? "," : "") << (d.observed(r, c) ? '1' : '0');
    out << '\n';
  }
}

// ---------------------------------------------------------------------------
// Statistics and standardization

struct AttributeStats {
  double mean = 0.0;
  double sd = 0.0;
  std::size_t observed_count = 0;
};

/// Mean and (n-1) sample standard deviation over observed cells only.
inline AttributeStats attribute_stats(const Dataset& d, std::size_t attr) {
  if (attr >= d.cols()) throw ValidationError("attribute_stats: attribute index out of range");
  AttributeStats s;
  double sum = 0.0;
  for (std::size_t r = 0; r < d.rows(); ++r)
    if (d.observed(r, attr)) {
      sum += d.value(r, attr);
      ++s.observed_count;
    }
  if (s.observed_count == 0)
    throw ValidationError("attribute " + std::to_string(attr) + " is fully unobserved");
  s.mean = sum / static_cast<double>(s.observed_count);
  if (s.observed_count > 1) {
    double ss = 0.0;
    for (std::size_t r = 0; r < d.rows(); ++r)
      if (d.observed(r, attr)) {
        const double dv = d.value(r, attr) - s.mean;
        ss += dv * dv;
      }
    s.sd = std::sqrt(ss / static_cast<double>(s.observed_count - 1));
  }
  return s;
}

inline std::vector<AttributeStats> all_attribute_stats(const Dataset& d) {
  std::vector<AttributeStats> out;
  out.reserve(d.cols());
  for (std::size_t c = 0; c < d.cols(); ++c) out.push_back(attribute_stats(d, c));
  return out;
}

/// Observed cells to (x - mu) / sigma using the given stats; sigma = 0 maps to 0.
inline Dataset standardize_with(const Dataset& d, const std::vector<AttributeStats>& stats) {
  if (stats.size() != d.cols()) throw ValidationError("standardize: attribute count mismatch");
  Dataset out = d;
  for (std::size_t c = 0; c < d.cols(); ++c)
    for (std::size_t r = 0; r < d.rows(); ++r) {
      if (!d.observed(r, c)) continue;
      const auto& s = stats[c];
      out.values(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) =
          s.sd > 0.0 ? (d.value(r, c) - s.mean) / s.sd : 0.0;
    }
  return out;
}

inline std::pair<Dataset, std::vector<AttributeStats>> standardize(const Dataset& d) {
  auto stats = all_attribute_stats(d);
  Dataset z = standardize_with(d, stats);
  return {std::move(z), std::move(stats)};
}

/// Inverse transform of standardize_with; applies to every observed cell.
inline Dataset destandardize(const Dataset& z, const std::vector<AttributeStats>& stats) {
  if (stats.size() != z.cols()) throw ValidationError("destandardize: attribute count mismatch");
  Dataset out = z;
  for (std::size_t c = 0; c < z.cols(); ++c)
    for (std::size_t r = 0; r < z.rows(); ++r) {
      if (!z.observed(r, c)) continue;
      out.values(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) =
          z.value(r, c) * stats[c].sd + stats[c].mean;
    }
  return out;
}

// ---------------------------------------------------------------------------
// Fold splitting

struct FoldSplit {
  std::vector<std::size_t> train_indices;
  std::vector<std::size_t> test_indices;
};

inline std::vector<std::size_t> shuffled_indices(std::size_t n, RandomStream& rng) {
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  for (std::size_t i = n; i > 1; --i) std::swap(idx[i - 1], idx[rng.index(i)]);
  return idx;
}

/// Unstratified k-fold partition of a uniform shuffle. Fold sizes differ by
/// at most one, larger folds first.
inline std::vector<FoldSplit> split_kfold(std::size_t n, std::size_t k, RandomStream& rng) {
  if (k < 2) throw ValidationError("split_kfold: need at least 2 folds");
  if (n < 2 * k) throw ValidationError("split_kfold: need at least " + std::to_string(2 * k) + " records");
  const auto order = shuffled_indices(n, rng);
  std::vector<std::vector<std::size_t>> parts(k);
  std::size_t pos = 0;
  for (std::size_t f = 0; f < k; ++f) {
    const std::size_t size = n / k + (f < n % k ? 1 : 0);
    parts[f].assign(order.begin() + static_cast<std::ptrdiff_t>(pos),
                    order.begin() + static_cast<std::ptrdiff_t>(pos + size));
    pos += size;
  }
  std::vector<FoldSplit> out(k);
  for (std::size_t f = 0; f < k; ++f) {
    out[f].test_indices = parts[f];
    for (std::size_t g = 0; g < k; ++g)
      if (g != f) out[f].train_indices.insert(out[f].train_indices.end(), parts[g].begin(), parts[g].end());
  }
  return out;
}

/// Shuffle and halve; the second split is the swap of the first.
inline std::pair<FoldSplit, FoldSplit> split_2fold(std::size_t n, RandomStream& rng) {
  if (n < 4) throw ValidationError("split_2fold: need at least 4 records");
  const auto order = shuffled_indices(n, rng);
  const std::size_t half = (n + 1) / 2;
  FoldSplit a;
  a.train_indices.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(half));
  a.test_indices.assign(order.begin() + static_cast<std::ptrdiff_t>(half), order.end());
  FoldSplit b{a.test_indices, a.train_indices};
  return {std::move(a), std::move(b)};
}

inline std::pair<FoldSplit, FoldSplit> split_2fold(const Dataset& d, RandomStream& rng) {
  return split_2fold(d.rows(), rng);
}

}  // namespace ensimpute
