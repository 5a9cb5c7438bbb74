#pragma once

// Flat key=value run configuration. Lines starting with '#' are comments;
// list values are comma-separated.

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <string>
#include <vector>

#include "ensimpute/data.hpp"
#include "ensimpute/ensemble.hpp"
#include "ensimpute/eval.hpp"

namespace ensimpute {

struct RunConfig {
  std::vector<std::string> datasets;
  std::string data_dir = "data";
  std::string label_column = "class";
  std::vector<MethodId> methods{kAllMethods.begin(), kAllMethods.end()};
  std::vector<double> ratios{0.0, 0.05, 0.10, 0.15, 0.20, 0.25, 0.30};
  std::size_t B = 25;
  std::size_t M = 5;
  std::size_t T = 30;
  std::size_t folds = 2;
  std::uint64_t seed = 0;
  EmConfig em;
  double z_bound = 4.0;
  TreeConfig tree;
  bool test_imputation = true;
  std::size_t workers = 1;
  long kappa_repetition = 0;
  long kappa_fold = 0;
  std::string output_dir = "results";
};

namespace detail {

inline std::vector<std::string> split_list(const std::string& v) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : v + ",") {
    if (c == ',') {
      const auto t = std::string(trim(cur));
      if (!t.empty()) out.push_back(t);
      cur.clear();
    } else {
      cur.push_back(c);
    }
  }
  return out;
}

inline double to_real(const std::string& key, const std::string& v) {
  double out = 0.0;
  if (!parse_double(trim(v), out)) throw ValidationError(key + ": expected a number, got '" + v + "'");
  return out;
}

inline std::uint64_t to_count(const std::string& key, const std::string& v) {
  const auto t = std::string(trim(v));
  if (!all_digits(t)) throw ValidationError(key + ": expected a non-negative integer, got '" + v + "'");
  try {
    return std::stoull(t);
  } catch (const std::exception&) {
    throw ValidationError(key + ": value out of range: '" + v + "'");
  }
}

inline long to_long(const std::string& key, const std::string& v) {
  const auto t = std::string(trim(v));
  if (!t.empty() && t.front() == '-') return -static_cast<long>(to_count(key, t.substr(1)));
  return static_cast<long>(to_count(key, t));
}

inline bool to_bool(const std::string& key, const std::string& v) {
  const auto t = std::string(trim(v));
  if (t == "true" || t == "1" || t == "yes" || t == "on") return true;
  if (t == "false" || t == "0" || t == "no" || t == "off") return false;
  throw ValidationError(key + ": expected true or false, got '" + v + "'");
}

}  // namespace detail

/// Keys accepted by `set_option` and config files.
inline const std::vector<std::string>& config_keys() {
  static const std::vector<std::string> keys = {
      "datasets", "data_dir", "label_column", "methods", "ratios", "B", "M", "T", "folds", "seed",
      "em_tol", "em_max_iter", "em_ridge", "em_init_range", "em_eigen_floor", "z_bound", "min_leaf_weight",
      "max_depth", "min_split_gain", "test_imputation", "workers", "kappa_repetition", "kappa_fold",
      "output_dir"};
  return keys;
}

inline void set_option(RunConfig& c, const std::string& key, const std::string& value) {
  using namespace detail;
  try {
    if (key == "datasets") c.datasets = split_list(value);
    else if (key == "data_dir") c.data_dir = std::string(trim(value));
    else if (key == "label_column") c.label_column = std::string(trim(value));
    else if (key == "methods") {
      c.methods.clear();
      for (const auto& m : split_list(value)) c.methods.push_back(parse_method(m));
    } else if (key == "ratios") {
      c.ratios.clear();
      for (const auto& r : split_list(value)) c.ratios.push_back(to_real(key, r));
    } else if (key == "B") c.B = to_count(key, value);
    else if (key == "M") c.M = to_count(key, value);
    else if (key == "T") c.T = to_count(key, value);
    else if (key == "folds") c.folds = to_count(key, value);
    else if (key == "seed") c.seed = to_count(key, value);
    else if (key == "em_tol") c.em.tol = to_real(key, value);
    else if (key == "em_max_iter") c.em.max_iter = static_cast<int>(to_count(key, value));
    else if (key == "em_ridge") c.em.ridge = to_real(key, value);
    else if (key == "em_init_range") c.em.init_range = to_real(key, value);
    else if (key == "em_eigen_floor") c.em.eigen_floor = to_real(key, value);
    else if (key == "z_bound") c.z_bound = to_real(key, value);
    else if (key == "min_leaf_weight") c.tree.min_leaf_weight = to_real(key, value);
    else if (key == "max_depth") c.tree.max_depth = static_cast<int>(to_long(key, value));
    else if (key == "min_split_gain") c.tree.min_split_gain = to_real(key, value);
    else if (key == "test_imputation") c.test_imputation = to_bool(key, value);
    else if (key == "workers") c.workers = to_count(key, value);
    else if (key == "kappa_repetition") c.kappa_repetition = to_long(key, value);
    else if (key == "kappa_fold") c.kappa_fold = to_long(key, value);
    else if (key == "output_dir") c.output_dir = std::string(trim(value));
    else throw ValidationError("unknown configuration key '" + key + "'");
  } catch (const ValidationError& e) {
    const std::string msg = e.what();
    if (msg.rfind(key, 0) == 0 || msg.find("'" + key + "'") != std::string::npos) throw;
    throw ValidationError(key + ": " + msg);
  }
}

inline void load_config_file(RunConfig& c, const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot read config file: " + path);
  std::string line;
  std::size_t n = 0;
  while (std::getline(in, line)) {
    ++n;
    const auto t = detail::trim(line);
    if (t.empty() || t.front() == '#') continue;
    const auto eq = t.find('=');
    if (eq == std::string_view::npos) throw ValidationError(path + ":" + std::to_string(n) + ": expected key=value");
    set_option(c, std::string(detail::trim(t.substr(0, eq))), std::string(t.substr(eq + 1)));
  }
}

inline void write_config(const RunConfig& c, std::ostream& out) {
  auto join = [](const auto& v, auto f) {
    std::string s;
    for (const auto& x : v) s += (s.empty() ? "" : ",") + f(x);
    return s;
  };
  out << "datasets=" << join(c.datasets, [](const std::string& s) { return s; }) << '\n'
      << "data_dir=" << c.data_dir << '\n'
      << "label_column=" << c.label_column << '\n'
      << "methods=" << join(c.methods, [](MethodId m) { return to_string(m); }) << '\n'
      << "ratios=" << join(c.ratios, [](double r) { return detail::format_double(r); }) << '\n'
      << "B=" << c.B << "\nM=" << c.M << "\nT=" << c.T << "\nfolds=" << c.folds << "\nseed=" << c.seed << '\n'
      << "em_tol=" << detail::format_double(c.em.tol) << "\nem_max_iter=" << c.em.max_iter
      << "\nem_ridge=" << detail::format_double(c.em.ridge) << "\nem_init_range=" << detail::format_double(c.em.init_range)
      << "\nem_eigen_floor=" << detail::format_double(c.em.eigen_floor) << "\nz_bound=" << detail::format_double(c.z_bound)
      << "\nmin_leaf_weight=" << detail::format_double(c.tree.min_leaf_weight) << "\nmax_depth=" << c.tree.max_depth
      << "\nmin_split_gain=" << detail::format_double(c.tree.min_split_gain)
      << "\ntest_imputation=" << (c.test_imputation ? "true" : "false") << "\nworkers=" << c.workers
      << "\nkappa_repetition=" << c.kappa_repetition << "\nkappa_fold=" << c.kappa_fold
      << "\noutput_dir=" << c.output_dir << '\n';
}

/// An existing file path is used as is; otherwise `<data_dir>/<name>.csv`.
inline std::string resolve_dataset(const RunConfig& c, const std::string& entry) {
  namespace fs = std::filesystem;
  if (fs::is_regular_file(entry)) return entry;
  const fs::path p = fs::path(c.data_dir) / (entry + ".csv");
  if (fs::is_regular_file(p)) return p.string();
  return entry;
}

inline ExperimentGrid make_grid(const RunConfig& c) {
  ExperimentGrid g;
  g.methods = c.methods;
  g.ratios = c.ratios;
  g.B = c.B;
  g.M = c.M;
  g.T = c.T;
  g.folds = c.folds;
  g.master_seed = c.seed;
  g.tree = c.tree;
  g.impute.em = c.em;
  g.impute.z_bound = c.z_bound;
  g.test_imputation = c.test_imputation;
  g.workers = c.workers;
  g.kappa_repetition = c.kappa_repetition;
  g.kappa_fold = c.kappa_fold;
  return g;
}

/// Fail-fast check of everything except dataset availability.
inline void validate(const RunConfig& c) {
  if (c.datasets.empty()) throw ValidationError("datasets: no datasets given");
  if (c.workers < 1) throw ValidationError("workers: must be >= 1");
  validate(make_grid(c));
}

}  // namespace ensimpute
