// Acceptance checks. Usage: acceptance [criterion ...]  (default: all)
// Prints one PASS/FAIL line per criterion; exit status 1 if any fails.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <fstream>
#include <optional>
#include <thread>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include <unistd.h>

#include "ensimpute/ensimpute.hpp"
#include "friedman_oracle.hpp"
#include "tree_oracle.hpp"

using namespace ensimpute;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string data_dir() {
  const char* env = std::getenv("ENSIMPUTE_DATA_DIR");
  return env && *env ? env : ENSIMPUTE_DATA_DIR;
}

std::optional<Dataset> try_load(const std::string& name, std::string& why) {
  const fs::path p = fs::path(data_dir()) / (name + ".csv");
  if (!fs::exists(p)) {
    why += name + ".csv not found in " + data_dir() + "; ";
    return std::nullopt;
  }
  return load_csv(p.string());
}

std::string fmt(double v, int digits = 4) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

Dataset synthetic(std::size_t n, std::size_t f, std::uint64_t seed) {
  RandomStream rng(seed);
  std::vector<std::vector<double>> rows(n, std::vector<double>(f));
  std::vector<int> labels(n);
  for (std::size_t r = 0; r < n; ++r) {
    labels[r] = static_cast<int>(r % 2);
    for (auto& v : rows[r]) v = rng.normal();
  }
  return make_dataset(rows, labels, 2);
}

// 1 -------------------------------------------------------------------------
Outcome table_accounting() {
  const bool ok = dataset_count(Family::BagSingle, 25, 5) == DatasetCount{25, 125, 150} &&
                  dataset_count(Family::BagMI, 25, 5) == DatasetCount{5, 25, 30} &&
                  dataset_count(Family::MIEnsemble, 25, 5) == DatasetCount{0, 25, 25};
  return {ok, "BagSingle (25,125,150), BagMI (5,25,30), MIEnsemble (0,25,25)"};
}

// 2 -------------------------------------------------------------------------
Outcome mcar_suite() {
  struct Shape {
    std::size_t n, f;
    double r;
  };
  std::ostringstream os;
  bool ok = true;
  double min_p = 1.0;
  for (const Shape s : {Shape{100, 5, 0.10}, Shape{50, 3, 0.30}, Shape{4, 2, 0.5}}) {
    const Dataset d = synthetic(s.n, s.f, s.n);
    const std::size_t k = removals_per_attribute(s.n, s.r);
    std::vector<std::vector<double>> hits(s.f, std::vector<double>(s.n, 0.0));
    const int reps = 1000;
    for (int i = 0; i < reps; ++i) {
      const Dataset out = inject_mcar(d, {s.r, derive_seed(2024, {s.n, static_cast<std::uint64_t>(i)})});
      for (std::size_t c = 0; c < s.f; ++c) {
        std::size_t miss = 0;
        for (std::size_t r = 0; r < s.n; ++r)
          if (!out.observed(r, c)) {
            ++miss;
            hits[c][r] += 1;
          }
        ok = ok && miss == k;
      }
      for (Eigen::Index r = 0; r < out.mask.rows(); ++r) ok = ok && out.mask.row(r).any();
    }
    for (std::size_t c = 0; c < s.f; ++c) {
      const double expected = reps * static_cast<double>(k) / static_cast<double>(s.n);
      double chi2 = 0.0;
      for (double h : hits[c]) chi2 += (h - expected) * (h - expected) / expected;
      const double p = chi_squared_sf(chi2, static_cast<double>(s.n - 1));
      min_p = std::min(min_p, p);
      ok = ok && p > 0.001;
    }
  }
  os << "exact floor(N*R) counts, no empty records, min uniformity p = " << fmt(min_p);
  return {ok, os.str()};
}

// 3 -------------------------------------------------------------------------
Outcome em_oracle() {
  GaussianModel m;
  m.mean = Vector::Zero(2);
  m.cov.resize(2, 2);
  m.cov << 1.0, 0.8, 0.8, 1.0;
  const double nan = std::nan("");
  const Dataset one = make_dataset({{2.0, nan}, {0.0, 1.0}}, {0, 1}, 2);
  const double got = apply_em(m, one, 0.0).value(0, 1);
  const bool closed_form = std::abs(got - 1.6) < 1e-10;

  Vector mu(3);
  mu << 1.0, -0.5, 0.25;
  Matrix sigma(3, 3);
  sigma << 0.5, 0.2, 0.1, 0.2, 0.6, -0.15, 0.1, -0.15, 0.4;
  const Matrix l = sigma.llt().matrixL();
  int good = 0;
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    RandomStream rng(derive_seed(77, {seed}));
    std::vector<std::vector<double>> rows(2000);
    std::vector<int> labels(2000);
    for (std::size_t r = 0; r < rows.size(); ++r) {
      Vector z(3);
      for (int i = 0; i < 3; ++i) z(i) = rng.normal();
      const Vector x = mu + l * z;
      rows[r] = {x(0), x(1), x(2)};
      labels[r] = static_cast<int>(r % 2);
    }
    const Dataset inc = inject_mcar(make_dataset(rows, labels, 2), {0.10, derive_seed(78, {seed})});
    RandomStream init(derive_seed(79, {seed}));
    const auto fit = fit_em(inc, EmConfig{}, init);
    if ((fit.mean - mu).cwiseAbs().maxCoeff() <= 0.05 && (fit.cov - sigma).cwiseAbs().maxCoeff() <= 0.1) ++good;
  }
  return {closed_form && good >= 95,
          "conditional mean " + fmt(got, 12) + " (expected 1.6); recovery within tolerance for " +
              std::to_string(good) + "/100 seeds"};
}

// 4 -------------------------------------------------------------------------
Outcome kappa_identities() {
  const bool identical = kappa({0, 1, 2, 1, 0}, {0, 1, 2, 1, 0}, 3) == 1.0;
  RandomStream rng(4);
  std::vector<int> a(100000), b(100000);
  for (std::size_t i = 0; i < a.size(); ++i) {
    a[i] = static_cast<int>(rng.index(2));
    b[i] = static_cast<int>(rng.index(2));
  }
  const double chance = kappa(a, b, 2);
  const double hand = kappa({0, 0, 1, 1}, {0, 1, 1, 1}, 2);
  std::vector<int> labels(60);
  for (auto& y : labels) y = static_cast<int>(rng.index(3));
  std::vector<std::vector<int>> members(25, labels);
  for (auto& mem : members)
    for (auto& y : mem)
      if (rng.uniform() < 0.35) y = static_cast<int>(rng.index(3));
  const auto pts = kappa_error_points(members, labels, 3);
  bool ranges = true;
  for (const auto& p : pts)
    ranges = ranges && p.kappa >= -1 && p.kappa <= 1 && p.mean_error >= 0 && p.mean_error <= 1;
  const bool ok = identical && std::abs(chance) < 0.02 && hand == 0.5 && pts.size() == 300 && ranges;
  return {ok, "identical 1, chance " + fmt(chance) + ", hand " + fmt(hand, 6) + ", L=25 points " +
                  std::to_string(pts.size())};
}

// 5 -------------------------------------------------------------------------
Outcome tree_oracle() {
  std::size_t checked = 0, matched = 0;
  bool normalized = true;
  for (std::uint64_t seed = 0; seed < 50; ++seed)
    for (std::size_t n = 4; n <= 12; ++n)
      for (std::size_t f = 1; f <= 2; ++f) {
        RandomStream rng(derive_seed(seed, {n, f}));
        const std::size_t classes = 2 + rng.index(2);
        const std::size_t levels = 2 + rng.index(6);
        std::vector<std::vector<double>> rows(n, std::vector<double>(f));
        std::vector<int> labels(n);
        for (std::size_t r = 0; r < n; ++r) {
          labels[r] = static_cast<int>(rng.index(classes));
          for (auto& v : rows[r]) v = static_cast<double>(rng.index(levels));
        }
        const Dataset d = make_dataset(rows, labels, classes);
        const DecisionTree t = train_tree(d);
        ++checked;
        matched += oracle::same(oracle::build(d), t);
        for (unsigned pattern = 0; pattern < (1u << f); ++pattern) {
          std::vector<double> v(f);
          std::vector<bool> m(f);
          for (std::size_t c = 0; c < f; ++c) {
            v[c] = rng.uniform() * static_cast<double>(levels);
            m[c] = (pattern >> c) & 1u;
          }
          const auto p = predict_dist(t, v, m);
          double s = 0.0;
          for (double x : p) {
            normalized = normalized && x >= 0.0;
            s += x;
          }
          normalized = normalized && std::abs(s - 1.0) < 1e-12;
        }
      }
  return {matched == checked && normalized,
          std::to_string(matched) + "/" + std::to_string(checked) + " trees match the exhaustive oracle; " +
              (normalized ? "all" : "not all") + " predicted distributions normalized"};
}

ExperimentGrid base_grid() {
  ExperimentGrid g;
  g.B = 25;
  g.M = 5;
  g.master_seed = 20240601;
  g.kappa_repetition = -1;
  g.workers = std::max(1u, std::thread::hardware_concurrency());
  return g;
}

double mean_acc(const std::vector<RunResult>& runs, const std::string& ds, MethodId m, double ratio) {
  double s = 0.0;
  int n = 0;
  for (const auto& r : runs)
    if (r.dataset == ds && r.method == m && ratio_key(r.ratio) == ratio_key(ratio) && !std::isnan(r.accuracy)) {
      s += r.accuracy;
      ++n;
    }
  return n ? s / n : std::nan("");
}

// 6 -------------------------------------------------------------------------
Outcome ensemble_beats_single() {
  std::string why;
  ExperimentGrid g = base_grid();
  std::vector<std::string> names;
  for (const char* name : {"seeds", "wine", "column"})
    if (auto d = try_load(name, why)) {
      g.datasets.push_back(std::move(*d));
      names.push_back(name);
    }
  g.methods = {MethodId::EM, MethodId::BagEM, MethodId::MEI, MethodId::BagMEI};
  g.ratios = {0.30};
  g.T = 5;
  int wins = 0;
  std::ostringstream os;
  if (!g.datasets.empty()) {
    const auto res = run_experiment(g);
    for (const auto& n : names) {
      const double em = mean_acc(res.runs, n, MethodId::EM, 0.3), bag_em = mean_acc(res.runs, n, MethodId::BagEM, 0.3);
      const double mei = mean_acc(res.runs, n, MethodId::MEI, 0.3), bag_mei = mean_acc(res.runs, n, MethodId::BagMEI, 0.3);
      wins += (bag_em > em) + (bag_mei > mei);
      os << n << ": BagEM " << fmt(bag_em, 3) << " vs EM " << fmt(em, 3) << ", BagMEI " << fmt(bag_mei, 3)
         << " vs MEI " << fmt(mei, 3) << "; ";
    }
  }
  os << wins << "/6 pairs favour the ensemble";
  if (!why.empty()) os << "; " << why.substr(0, why.size() - 2);
  return {wins >= 5 && names.size() == 3, os.str()};
}

// 7 -------------------------------------------------------------------------
std::pair<double, double> bagem_0_30(Dataset d) {
  ExperimentGrid g = base_grid();
  const std::string name = d.meta.name;
  g.datasets.push_back(std::move(d));
  g.methods = {MethodId::BagEM};
  g.ratios = {0.0, 0.30};
  g.T = 5;
  const auto res = run_experiment(g);
  return {mean_acc(res.runs, name, MethodId::BagEM, 0.0), mean_acc(res.runs, name, MethodId::BagEM, 0.3)};
}

// Without the required dataset the criterion fails; a Wine run is reported for information only.
Outcome bagem_band() {
  std::string why;
  if (auto seeds = try_load("seeds", why)) {
    const auto [a0, a30] = bagem_0_30(std::move(*seeds));
    return {a0 >= 0.85 && std::abs(a0 - a30) <= 0.06,
            "BagEM " + fmt(a0, 3) + " at 0%, " + fmt(a30, 3) + " at 30%, degradation " + fmt(a0 - a30, 3)};
  }
  std::string info;
  if (auto wine = try_load("wine", why)) {
    const auto [a0, a30] = bagem_0_30(std::move(*wine));
    info = "informational wine run: BagEM " + fmt(a0, 3) + " at 0%, " + fmt(a30, 3) + " at 30%; ";
  }
  return {false, why + info + "criterion not evaluated"};
}

// 8 -------------------------------------------------------------------------
Outcome zero_ratio_collapse() {
  std::string why;
  ExperimentGrid g = base_grid();
  for (const char* name : {"seeds", "wine"})
    if (auto d = try_load(name, why)) g.datasets.push_back(std::move(*d));
  if (g.datasets.empty()) return {false, why};
  g.methods = {MethodId::BagNoImp, MethodId::BagMEI, MethodId::BagGRandI, MethodId::BagEM};
  g.ratios = {0.0};
  g.T = 3;
  const auto res = run_experiment(g);
  std::map<std::tuple<std::string, std::size_t, std::size_t>, std::vector<double>> cells;
  for (const auto& r : res.runs) cells[{r.dataset, r.repetition, r.fold}].push_back(r.accuracy);
  bool ok = true;
  for (const auto& [k, v] : cells)
    for (double a : v) ok = ok && a == v.front() && !std::isnan(a);
  std::string used;
  for (const auto& d : g.datasets) used += d.meta.name + " ";
  return {ok, std::to_string(cells.size()) + " (dataset, repetition, fold) cells on " + used +
                  (ok ? "all identical across the four Bag* methods" : "contain differing accuracies")};
}

// 9 -------------------------------------------------------------------------
Outcome friedman_oracle() {
  RandomStream rng(9);
  double worst = 0.0;
  for (int t = 0; t < 100; ++t) {
    std::vector<std::vector<double>> acc(6, std::vector<double>(5));
    for (auto& row : acc)
      for (auto& v : row) v = t % 3 == 0 ? std::round(rng.uniform() * 5) / 5 : rng.uniform();
    worst = std::max(worst, std::abs(friedman(acc).statistic - oracle::friedman_statistic(acc)));
  }
  const double constant = friedman(std::vector<std::vector<double>>(6, std::vector<double>(5, 0.8))).statistic;
  return {worst <= 1e-10 && constant == 0.0,
          "max |difference| " + std::to_string(worst) + " over 100 matrices; constant matrix statistic " +
              std::to_string(constant)};
}

// 10 ------------------------------------------------------------------------
bool byte_identical_grid(const Dataset& d, std::size_t& n_files) {
  auto run = [&](std::size_t workers, const fs::path& dir) {
    ExperimentGrid g = base_grid();
    g.datasets.push_back(d);
    g.ratios = {0.0, 0.30};
    g.T = 2;
    g.kappa_repetition = 0;
    g.workers = workers;
    fs::remove_all(dir);
    return export_results(run_experiment(g), dir);
  };
  const fs::path base = fs::temp_directory_path() / ("ensimpute_accept_" + std::to_string(::getpid()));
  const auto files = run(1, base / "w1");
  run(8, base / "w8");
  bool ok = true;
  for (const auto& f : files) {
    std::ifstream a(f, std::ios::binary), b(base / "w8" / fs::relative(f, base / "w1"), std::ios::binary);
    const std::string sa{std::istreambuf_iterator<char>(a), {}}, sb{std::istreambuf_iterator<char>(b), {}};
    ok = ok && !sa.empty() && sa == sb;
  }
  fs::remove_all(base);
  n_files = files.size();
  return ok;
}

Outcome determinism() {
  std::string why;
  std::size_t n = 0;
  if (auto seeds = try_load("seeds", why)) {
    const bool ok = byte_identical_grid(*seeds, n);
    return {ok, std::to_string(n) + " result files " + (ok ? "byte-identical" : "differ") + " between 1 and 8 workers"};
  }
  std::string info;
  if (auto wine = try_load("wine", why)) {
    const bool ok = byte_identical_grid(*wine, n);
    info = std::string("informational wine run: ") + std::to_string(n) + " result files " +
           (ok ? "byte-identical" : "differ") + " between 1 and 8 workers; ";
  }
  return {false, why + info + "criterion not evaluated"};
}

struct Criterion {
  int id;
  const char* name;
  double budget_s;
  std::function<Outcome()> run;
};

}  // namespace

int main(int argc, char** argv) {
  const std::vector<Criterion> all = {
      {1, "dataset accounting", 1, table_accounting},
      {2, "MCAR injector suite", 30, mcar_suite},
      {3, "EM oracle equivalence", 120, em_oracle},
      {4, "kappa identities", 10, kappa_identities},
      {5, "tree oracle", 60, tree_oracle},
      {6, "ensemble beats single at 30% missing", 900, ensemble_beats_single},
      {7, "BagEM robustness band on Seeds", 600, bagem_band},
      {8, "ratio 0 collapse of Bag* methods", 120, zero_ratio_collapse},
      {9, "Friedman oracle", 10, friedman_oracle},
      {10, "grid determinism across worker counts", 900, determinism},
  };
  std::vector<int> wanted;
  for (int i = 1; i < argc; ++i) wanted.push_back(std::atoi(argv[i]));
  int failures = 0;
  for (const auto& c : all) {
    if (!wanted.empty() && std::find(wanted.begin(), wanted.end(), c.id) == wanted.end()) continue;
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    const bool in_time = secs <= c.budget_s;
    const bool pass = o.pass && in_time;
    failures += !pass;
    std::cout << "criterion " << c.id << " [" << c.name << "]: " << (pass ? "PASS" : "FAIL") << " (" << o.detail
              << "; " << fmt(secs, 2) << " s of " << c.budget_s << " s" << (in_time ? "" : ", over budget") << ")"
              << std::endl;
  }
  return failures ? 1 : 0;
}
