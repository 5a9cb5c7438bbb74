#pragma once

// Experiment grid (repeated k-fold CV over datasets x methods x ratios),
// accuracy and kappa statistics, Friedman test, and CSV export.

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <limits>
#include <map>
#include <mutex>
#include <numeric>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <boost/math/special_functions/gamma.hpp>

#include "ensimpute/data.hpp"
#include "ensimpute/ensemble.hpp"
#include "ensimpute/missing.hpp"
#include "ensimpute/random.hpp"

namespace ensimpute {

// ---------------------------------------------------------------------------
// Metrics

inline double accuracy(const std::vector<int>& pred, const std::vector<int>& labels) {
  if (pred.size() != labels.size()) throw ValidationError("accuracy: length mismatch");
  if (pred.empty()) throw ValidationError("accuracy: empty prediction list");
  std::size_t hit = 0;
  for (std::size_t i = 0; i < pred.size(); ++i) hit += pred[i] == labels[i];
  return static_cast<double>(hit) / static_cast<double>(pred.size());
}

/// Cohen's kappa between two prediction lists over `n_classes` classes.
inline double kappa(const std::vector<int>& a, const std::vector<int>& b, std::size_t n_classes) {
  if (a.size() != b.size()) throw ValidationError("kappa: length mismatch");
  if (a.empty()) throw ValidationError("kappa: empty prediction list");
  const auto m = static_cast<double>(a.size());
  std::vector<double> row(n_classes, 0.0), col(n_classes, 0.0);
  double diag = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (a[i] < 0 || b[i] < 0 || static_cast<std::size_t>(a[i]) >= n_classes ||
        static_cast<std::size_t>(b[i]) >= n_classes)
      throw ValidationError("kappa: class index out of range");
    row[static_cast<std::size_t>(a[i])] += 1.0;
    col[static_cast<std::size_t>(b[i])] += 1.0;
    diag += a[i] == b[i];
  }
  const double theta1 = diag / m;
  double theta2 = 0.0;
  for (std::size_t k = 0; k < n_classes; ++k) theta2 += (row[k] / m) * (col[k] / m);
  if (theta2 >= 1.0) return theta1 >= 1.0 ? 1.0 : 0.0;
  return (theta1 - theta2) / (1.0 - theta2);
}

struct KappaErrorPoint {
  std::size_t member_i = 0;
  std::size_t member_j = 0;
  double kappa = 0.0;
  double mean_error = 0.0;
};

inline std::vector<KappaErrorPoint> kappa_error_points(const std::vector<std::vector<int>>& members,
                                                       const std::vector<int>& labels, std::size_t n_classes) {
  if (members.size() < 2) throw ValidationError("kappa_error_points: need at least two members");
  std::vector<double> err(members.size());
  for (std::size_t i = 0; i < members.size(); ++i) err[i] = 1.0 - accuracy(members[i], labels);
  std::vector<KappaErrorPoint> out;
  out.reserve(members.size() * (members.size() - 1) / 2);
  for (std::size_t i = 0; i < members.size(); ++i)
    for (std::size_t j = i + 1; j < members.size(); ++j)
      out.push_back({i, j, kappa(members[i], members[j], n_classes), 0.5 * (err[i] + err[j])});
  return out;
}

// ---------------------------------------------------------------------------
// Friedman rank-sum test

/// Upper tail of the chi-squared distribution.
inline double chi_squared_sf(double x, double df) {
  if (!(df > 0.0)) throw ValidationError("chi_squared_sf: df must be positive");
  if (x <= 0.0) return 1.0;
  return boost::math::gamma_q(df / 2.0, x / 2.0);
}

struct RankTable {
  std::vector<std::string> methods;
  std::vector<std::string> datasets;
  std::vector<std::vector<double>> accuracy;  // [dataset][method]
  std::vector<std::vector<double>> ranks;     // [dataset][method], 1 = best
  std::vector<double> mean_ranks;             // per method
  double statistic = 0.0;
  double df = 0.0;
  double p_value = 1.0;
};

/// Midranks of one row, highest accuracy ranked 1.
inline std::vector<double> descending_midranks(const std::vector<double>& row) {
  std::vector<std::size_t> order(row.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return row[a] > row[b]; });
  std::vector<double> r(row.size());
  for (std::size_t i = 0; i < order.size();) {
    std::size_t j = i;
    while (j + 1 < order.size() && row[order[j + 1]] == row[order[i]]) ++j;
    const double mid = 0.5 * static_cast<double>(i + j) + 1.0;
    for (std::size_t t = i; t <= j; ++t) r[order[t]] = mid;
    i = j + 1;
  }
  return r;
}

/// `acc[dataset][method]`. Statistic uses the tie-corrected form; a matrix
/// in which every row is fully tied gives 0.
inline RankTable friedman(const std::vector<std::vector<double>>& acc, std::vector<std::string> methods = {},
                          std::vector<std::string> datasets = {}) {
  const std::size_t n = acc.size();
  if (n < 2) throw ValidationError("friedman: need at least two datasets");
  const std::size_t k = acc.front().size();
  if (k < 2) throw ValidationError("friedman: need at least two methods");
  for (const auto& row : acc)
    if (row.size() != k) throw ValidationError("friedman: ragged accuracy matrix");

  RankTable t;
  t.methods = std::move(methods);
  t.datasets = std::move(datasets);
  t.accuracy = acc;
  t.mean_ranks.assign(k, 0.0);
  double tie_sum = 0.0;
  for (const auto& row : acc) {
    t.ranks.push_back(descending_midranks(row));
    for (std::size_t j = 0; j < k; ++j) t.mean_ranks[j] += t.ranks.back()[j];
    std::map<double, double> groups;
    for (double v : row) groups[v] += 1.0;
    for (const auto& [v, c] : groups) tie_sum += c * c * c - c;
  }
  const double dn = static_cast<double>(n), dk = static_cast<double>(k);
  double ss = 0.0;
  for (double& r : t.mean_ranks) {
    r /= dn;
    ss += (r - (dk + 1.0) / 2.0) * (r - (dk + 1.0) / 2.0);
  }
  const double raw = 12.0 * dn / (dk * (dk + 1.0)) * ss;
  const double correction = 1.0 - tie_sum / (dn * dk * (dk * dk - 1.0));
  t.statistic = correction > 1e-15 ? raw / correction : 0.0;
  t.df = dk - 1.0;
  t.p_value = chi_squared_sf(t.statistic, t.df);
  return t;
}

// ---------------------------------------------------------------------------
// Experiment grid

struct ExperimentGrid {
  std::vector<Dataset> datasets;
  std::vector<MethodId> methods{kAllMethods.begin(), kAllMethods.end()};
  std::vector<double> ratios{0.0, 0.05, 0.10, 0.15, 0.20, 0.25, 0.30};
  std::size_t B = 25;
  std::size_t M = 5;
  std::size_t T = 30;
  std::size_t folds = 2;
  std::uint64_t master_seed = 0;
  TreeConfig tree;
  ImputeConfig impute;
  bool test_imputation = true;
  std::size_t workers = 1;
  /// Which (repetition, fold) feeds the kappa-error export; negative disables it.
  long kappa_repetition = 0;
  long kappa_fold = 0;
};

inline void validate(const ExperimentGrid& g) {
  if (g.T < 1) throw ValidationError("T must be >= 1");
  if (g.folds < 2) throw ValidationError("folds must be >= 2");
  if (g.methods.empty()) throw ValidationError("methods must not be empty");
  if (g.ratios.empty()) throw ValidationError("ratios must not be empty");
  for (double r : g.ratios)
    if (!(r >= 0.0 && r <= kMaxMissingRatio)) throw ValidationError("ratio " + detail::format_double(r) + " outside [0, 0.5]");
  EnsembleConfig c;
  c.B = g.B;
  c.M = g.M;
  c.tree = g.tree;
  c.impute = g.impute;
  for (MethodId m : g.methods) validate(c, m);
}

struct RunResult {
  std::string dataset;
  MethodId method = MethodId::NoImp;
  double ratio = 0.0;
  std::size_t repetition = 0;
  std::size_t fold = 0;
  double accuracy = 0.0;  // NaN when the cell failed
  std::string error;
};

struct KappaErrorRecord {
  std::string dataset;
  MethodId method = MethodId::NoImp;
  double ratio = 0.0;
  std::vector<KappaErrorPoint> points;
};

struct ExperimentOutput {
  std::vector<RunResult> runs;
  std::vector<KappaErrorRecord> kappa;
};

inline std::uint64_t cell_seed(std::uint64_t master, const std::string& dataset, double ratio, std::size_t rep) {
  return derive_seed(master, {hash_name(dataset), ratio_key(ratio), rep});
}

/// Progress callback: (completed units, total units).
using ProgressFn = std::function<void(std::size_t, std::size_t)>;

inline ExperimentOutput run_experiment(const ExperimentGrid& g, const ProgressFn& progress = {}) {
  validate(g);
  struct Prepared {
    std::size_t dataset;
    double ratio;
    std::size_t rep;
    Dataset injected;
    std::vector<FoldSplit> splits;
    std::uint64_t seed;
  };
  std::vector<Prepared> prepared;
  for (std::size_t d = 0; d < g.datasets.size(); ++d) {
    const Dataset& ds = g.datasets[d];
    for (double ratio : g.ratios)
      for (std::size_t rep = 0; rep < g.T; ++rep) {
        const std::uint64_t s = cell_seed(g.master_seed, ds.meta.name, ratio, rep);
        Prepared p{d, ratio, rep, inject_mcar(ds, {ratio, derive_seed(s, {hash_name("inject")})}), {}, s};
        RandomStream split_rng(derive_seed(s, {hash_name("split")}));
        if (g.folds == 2) {
          auto [a, b] = split_2fold(ds.rows(), split_rng);
          p.splits = {std::move(a), std::move(b)};
        } else {
          p.splits = split_kfold(ds.rows(), g.folds, split_rng);
        }
        prepared.push_back(std::move(p));
      }
  }

  struct Unit {
    std::size_t prep;
    std::size_t fold;
    MethodId method;
  };
  std::vector<Unit> units;
  for (std::size_t p = 0; p < prepared.size(); ++p)
    for (std::size_t f = 0; f < prepared[p].splits.size(); ++f)
      for (MethodId m : g.methods) units.push_back({p, f, m});

  std::vector<RunResult> runs(units.size());
  std::vector<std::vector<KappaErrorPoint>> points(units.size());
  std::atomic<std::size_t> next{0}, done{0};
  std::mutex progress_mutex;

  auto work = [&]() {
    for (std::size_t u = next++; u < units.size(); u = next++) {
      const Unit& unit = units[u];
      const Prepared& p = prepared[unit.prep];
      RunResult& res = runs[u];
      res.dataset = g.datasets[p.dataset].meta.name;
      res.method = unit.method;
      res.ratio = p.ratio;
      res.repetition = p.rep;
      res.fold = unit.fold;
      try {
        const Dataset train = p.injected.subset(p.splits[unit.fold].train_indices);
        const Dataset test = p.injected.subset(p.splits[unit.fold].test_indices);
        EnsembleConfig c;
        c.B = g.B;
        c.M = g.M;
        c.tree = g.tree;
        c.impute = g.impute;
        c.test_imputation = g.test_imputation;
        // No method in the seed: methods sharing a family share bootstraps.
        c.seed = derive_seed(p.seed, {hash_name("fold"), unit.fold});
        const EnsembleModel model = build(unit.method, train, c);
        const auto per_member = member_predictions(model, test);
        std::vector<int> pred(test.rows());
        std::vector<int> votes(per_member.size());
        for (std::size_t r = 0; r < test.rows(); ++r) {
          for (std::size_t j = 0; j < per_member.size(); ++j) votes[j] = per_member[j][r];
          pred[r] = plurality(votes, model.n_classes);
        }
        res.accuracy = accuracy(pred, test.labels);
        if (is_ensemble(unit.method) && per_member.size() >= 2 && g.kappa_repetition >= 0 &&
            static_cast<long>(p.rep) == g.kappa_repetition && static_cast<long>(unit.fold) == g.kappa_fold)
          points[u] = kappa_error_points(per_member, test.labels, model.n_classes);
      } catch (const std::exception& e) {
        res.accuracy = std::numeric_limits<double>::quiet_NaN();
        res.error = e.what();
      }
      const std::size_t d = ++done;
      if (progress) {
        std::lock_guard lock(progress_mutex);
        progress(d, units.size());
      }
    }
  };

  const std::size_t n_workers = std::max<std::size_t>(1, std::min(g.workers, units.size()));
  if (n_workers == 1) {
    work();
  } else {
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < n_workers; ++w) pool.emplace_back(work);
    for (auto& t : pool) t.join();
  }

  ExperimentOutput out;
  for (std::size_t u = 0; u < units.size(); ++u)
    if (!points[u].empty()) out.kappa.push_back({runs[u].dataset, runs[u].method, runs[u].ratio, std::move(points[u])});
  out.runs = std::move(runs);
  return out;
}

// ---------------------------------------------------------------------------
// Aggregation and export

struct CellSummary {
  double mean = std::numeric_limits<double>::quiet_NaN();
  double sd = std::numeric_limits<double>::quiet_NaN();
  std::size_t count = 0;
  std::size_t failed = 0;
};

/// Mean and sample sd of per-fold accuracies, keyed by (dataset, method, ratio).
inline std::map<std::tuple<std::string, MethodId, std::uint64_t>, CellSummary> summarize(
    const std::vector<RunResult>& runs) {
  std::map<std::tuple<std::string, MethodId, std::uint64_t>, std::vector<double>> acc;
  std::map<std::tuple<std::string, MethodId, std::uint64_t>, std::size_t> failed;
  for (const auto& r : runs) {
    auto key = std::make_tuple(r.dataset, r.method, ratio_key(r.ratio));
    if (std::isnan(r.accuracy))
      ++failed[key];
    else
      acc[key].push_back(r.accuracy);
    acc.try_emplace(key);
  }
  std::map<std::tuple<std::string, MethodId, std::uint64_t>, CellSummary> out;
  for (const auto& [key, v] : acc) {
    CellSummary s;
    s.count = v.size();
    s.failed = failed.count(key) ? failed.at(key) : 0;
    if (!v.empty()) {
      s.mean = std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
      double ss = 0.0;
      for (double a : v) ss += (a - s.mean) * (a - s.mean);
      s.sd = v.size() > 1 ? std::sqrt(ss / static_cast<double>(v.size() - 1)) : 0.0;
    }
    out[key] = s;
  }
  return out;
}

namespace detail {

inline std::string fmt_cell(double v) { return std::isnan(v) ? "NA" : format_double(v); }

template <class T>
std::vector<T> unique_in_order(const std::vector<T>& v) {
  std::vector<T> out;
  for (const auto& x : v)
    if (std::find(out.begin(), out.end(), x) == out.end()) out.push_back(x);
  return out;
}

inline std::vector<double> unique_ratios(const std::vector<RunResult>& runs) {
  std::vector<double> out;
  for (const auto& r : runs)
    if (std::none_of(out.begin(), out.end(), [&](double x) { return ratio_key(x) == ratio_key(r.ratio); }))
      out.push_back(r.ratio);
  std::sort(out.begin(), out.end());
  return out;
}

inline std::ofstream open_out(const std::filesystem::path& p) {
  std::filesystem::create_directories(p.parent_path());
  std::ofstream out(p, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write file: " + p.string());
  return out;
}

}  // namespace detail

inline void write_runs_csv(const std::vector<RunResult>& runs, std::ostream& out) {
  out << "dataset,method,ratio,repetition,fold,accuracy\n";
  for (const auto& r : runs)
    out << r.dataset << ',' << to_string(r.method) << ',' << detail::format_double(r.ratio) << ',' << r.repetition
        << ',' << r.fold << ',' << detail::fmt_cell(r.accuracy) << '\n';
}

inline std::vector<RunResult> read_runs_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read file: " + path);
  std::string line;
  if (!std::getline(in, line) || detail::trim(line) != "dataset,method,ratio,repetition,fold,accuracy")
    throw ValidationError(path + ": not a runs file (unexpected header)");
  std::vector<RunResult> runs;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (detail::trim(line).empty()) continue;
    const auto cells = detail::split_csv_line(line);
    if (cells.size() != 6) throw ValidationError(path + ":" + std::to_string(line_no) + ": expected 6 columns");
    RunResult r;
    r.dataset = cells[0];
    r.method = parse_method(cells[1]);
    bool ok = detail::parse_double(cells[2], r.ratio) && detail::all_digits(cells[3]) && detail::all_digits(cells[4]);
    if (cells[5] == "NA")
      r.accuracy = std::numeric_limits<double>::quiet_NaN();
    else
      ok = ok && detail::parse_double(cells[5], r.accuracy);
    if (!ok) throw ValidationError(path + ":" + std::to_string(line_no) + ": malformed row");
    r.repetition = std::stoul(cells[3]);
    r.fold = std::stoul(cells[4]);
    runs.push_back(std::move(r));
  }
  return runs;
}

/// Methods x ratios accuracy table (means or standard deviations) for one dataset.
inline void write_accuracy_table(const std::vector<RunResult>& runs, const std::string& dataset, bool sd,
                                 std::ostream& out) {
  const auto summary = summarize(runs);
  std::vector<MethodId> methods;
  for (const auto& r : runs)
    if (r.dataset == dataset) methods.push_back(r.method);
  methods = detail::unique_in_order(methods);
  std::vector<RunResult> mine;
  std::copy_if(runs.begin(), runs.end(), std::back_inserter(mine), [&](const RunResult& r) { return r.dataset == dataset; });
  const auto ratios = detail::unique_ratios(mine);
  out << "method";
  for (double r : ratios) out << ',' << detail::format_double(r);
  out << '\n';
  for (MethodId m : methods) {
    out << to_string(m);
    for (double r : ratios) {
      const auto it = summary.find({dataset, m, ratio_key(r)});
      out << ',' << (it == summary.end() ? "NA" : detail::fmt_cell(sd ? it->second.sd : it->second.mean));
    }
    out << '\n';
  }
}

inline void write_kappa_csv(const std::vector<KappaErrorPoint>& points, std::ostream& out) {
  out << "member_i,member_j,kappa,mean_error\n";
  for (const auto& p : points)
    out << p.member_i << ',' << p.member_j << ',' << detail::format_double(p.kappa) << ','
        << detail::format_double(p.mean_error) << '\n';
}

/// Friedman tables, one per ratio, over datasets that report every method.
inline std::vector<std::pair<double, RankTable>> rank_tables(const std::vector<RunResult>& runs) {
  const auto summary = summarize(runs);
  std::vector<std::string> datasets;
  std::vector<MethodId> methods;
  for (const auto& r : runs) {
    datasets.push_back(r.dataset);
    methods.push_back(r.method);
  }
  datasets = detail::unique_in_order(datasets);
  methods = detail::unique_in_order(methods);
  std::vector<std::pair<double, RankTable>> out;
  if (methods.size() < 2) return out;
  for (double ratio : detail::unique_ratios(runs)) {
    std::vector<std::vector<double>> acc;
    std::vector<std::string> used;
    for (const auto& d : datasets) {
      std::vector<double> row;
      for (MethodId m : methods) {
        const auto it = summary.find({d, m, ratio_key(ratio)});
        if (it == summary.end() || std::isnan(it->second.mean)) break;
        row.push_back(it->second.mean);
      }
      if (row.size() == methods.size()) {
        acc.push_back(std::move(row));
        used.push_back(d);
      }
    }
    if (acc.size() < 2) continue;
    std::vector<std::string> names;
    for (MethodId m : methods) names.push_back(to_string(m));
    out.emplace_back(ratio, friedman(acc, names, used));
  }
  return out;
}

inline std::string summary_text(const std::vector<RunResult>& runs) {
  const auto summary = summarize(runs);
  std::vector<std::string> datasets;
  for (const auto& r : runs) datasets.push_back(r.dataset);
  datasets = detail::unique_in_order(datasets);
  std::ostringstream os;
  for (const auto& d : datasets) {
    std::vector<RunResult> mine;
    std::copy_if(runs.begin(), runs.end(), std::back_inserter(mine), [&](const RunResult& r) { return r.dataset == d; });
    std::vector<MethodId> methods;
    for (const auto& r : mine) methods.push_back(r.method);
    methods = detail::unique_in_order(methods);
    const auto ratios = detail::unique_ratios(mine);
    os << "Dataset " << d << " (mean accuracy over repetitions x folds)\n";
    char buf[64];
    std::snprintf(buf, sizeof buf, "%-12s", "method");
    os << buf;
    for (double r : ratios) {
      std::snprintf(buf, sizeof buf, " %7.0f%%", r * 100.0);
      os << buf;
    }
    os << '\n';
    for (MethodId m : methods) {
      std::snprintf(buf, sizeof buf, "%-12s", to_string(m).c_str());
      os << buf;
      for (double r : ratios) {
        const auto it = summary.find({d, m, ratio_key(r)});
        if (it == summary.end() || std::isnan(it->second.mean))
          std::snprintf(buf, sizeof buf, " %8s", "NA");
        else
          std::snprintf(buf, sizeof buf, " %8.3f", it->second.mean);
        os << buf;
      }
      os << '\n';
    }
    std::size_t failed = 0;
    for (const auto& r : mine) failed += std::isnan(r.accuracy);
    if (failed) os << "(" << failed << " cells failed and are excluded)\n";
    os << '\n';
  }
  for (const auto& [ratio, t] : rank_tables(runs)) {
    char buf[128];
    std::snprintf(buf, sizeof buf, "Friedman at %g%% missing: chi2 = %.4f, df = %g, p = %.4g (%zu datasets)\n",
                  ratio * 100.0, t.statistic, t.df, t.p_value, t.datasets.size());
    os << buf;
  }
  return os.str();
}

/// Writes runs.csv, accuracy.csv, accuracy_sd.csv and kappa_error/*.csv per
/// dataset under `dir/<dataset>/`, plus ranks and summary at `dir/`.
/// Returns the paths written.
inline std::vector<std::filesystem::path> export_results(const ExperimentOutput& res, const std::filesystem::path& dir) {
  namespace fs = std::filesystem;
  std::vector<fs::path> written;
  std::vector<std::string> datasets;
  for (const auto& r : res.runs) datasets.push_back(r.dataset);
  datasets = detail::unique_in_order(datasets);
  for (const auto& d : datasets) {
    std::vector<RunResult> mine;
    std::copy_if(res.runs.begin(), res.runs.end(), std::back_inserter(mine), [&](const RunResult& r) { return r.dataset == d; });
    const fs::path base = dir / d;
    {
      auto out = detail::open_out(base / "runs.csv");
      write_runs_csv(mine, out);
      written.push_back(base / "runs.csv");
    }
    for (bool sd : {false, true}) {
      const fs::path p = base / (sd ? "accuracy_sd.csv" : "accuracy.csv");
      auto out = detail::open_out(p);
      write_accuracy_table(mine, d, sd, out);
      written.push_back(p);
    }
  }
  for (const auto& k : res.kappa) {
    const fs::path p = dir / k.dataset / "kappa_error" / (to_string(k.method) + "_r" + detail::format_double(k.ratio) + ".csv");
    auto out = detail::open_out(p);
    write_kappa_csv(k.points, out);
    written.push_back(p);
  }
  const auto tables = rank_tables(res.runs);
  if (!tables.empty()) {
    const fs::path fp = dir / "friedman.csv";
    auto f = detail::open_out(fp);
    f << "ratio,statistic,df,p_value,n_datasets\n";
    for (const auto& [ratio, t] : tables) {
      f << detail::format_double(ratio) << ',' << detail::format_double(t.statistic) << ','
        << detail::format_double(t.df) << ',' << detail::format_double(t.p_value) << ',' << t.datasets.size() << '\n';
      const fs::path rp = dir / ("ranks_r" + detail::format_double(ratio) + ".csv");
      auto r = detail::open_out(rp);
      r << "dataset";
      for (const auto& m : t.methods) r << ',' << m;
      r << '\n';
      for (std::size_t i = 0; i < t.datasets.size(); ++i) {
        r << t.datasets[i];
        for (double v : t.ranks[i]) r << ',' << detail::format_double(v);
        r << '\n';
      }
      r << "mean_rank";
      for (double v : t.mean_ranks) r << ',' << detail::format_double(v);
      r << '\n';
      written.push_back(rp);
    }
    written.push_back(fp);
  }
  {
    auto s = detail::open_out(dir / "summary.txt");
    s << summary_text(res.runs);
    written.push_back(dir / "summary.txt");
  }
  return written;
}

}  // namespace ensimpute
