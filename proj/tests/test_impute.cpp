#include <catch_amalgamated.hpp>

#include <cmath>

#include "ensimpute/impute.hpp"
#include "ensimpute/missing.hpp"
#include "helpers.hpp"

using namespace ensimpute;

namespace {

const double kNaN = std::nan("");

/// Draws N records from N(mu, sigma) via a Cholesky factor.
Dataset gaussian_sample(const Vector& mu, const Matrix& sigma, std::size_t n, RandomStream& rng) {
  const Matrix l = sigma.llt().matrixL();
  std::vector<std::vector<double>> rows(n);
  std::vector<int> labels(n);
  for (std::size_t r = 0; r < n; ++r) {
    Vector z(mu.size());
    for (Eigen::Index i = 0; i < z.size(); ++i) z(i) = rng.normal();
    const Vector x = mu + l * z;
    rows[r].assign(x.data(), x.data() + x.size());
    labels[r] = static_cast<int>(r % 2);
  }
  return make_dataset(rows, labels, 2, "gauss");
}

}  // namespace

TEST_CASE("MEI fills with observed means and keeps observed cells") {
  const Dataset d = make_dataset({{1, kNaN}, {3, 4}, {kNaN, 8}, {5, 6}}, {0, 1, 0, 1}, 2);
  const FittedImputer imp = fit_mei(d);
  const Dataset out = apply_mei(imp, d);
  CHECK(out.complete());
  CHECK(out.value(0, 1) == 6.0);
  CHECK(out.value(2, 0) == 3.0);
  CHECK(out.value(1, 1) == 4.0);
  CHECK(apply_mei(imp, out).values == out.values);
  const Dataset wide = make_dataset({{1, 2, 3}, {4, 5, 6}}, {0, 1}, 2);
  CHECK_THROWS_AS(apply_mei(imp, wide), ValidationError);
}

TEST_CASE("GRandI draws follow the attribute's mean and spread within the bound") {
  // One observed anchor column keeps rows non-empty; column 1 is mostly missing.
  const std::size_t n = 20000;
  std::vector<std::vector<double>> rows(n, {0.0, kNaN});
  std::vector<int> labels(n, 0);
  labels[1] = 1;
  RandomStream src(1);
  for (std::size_t r = 0; r < 200; ++r) rows[r][1] = 10.0 + 2.0 * src.normal();
  const Dataset d = make_dataset(rows, labels, 2);
  const FittedImputer imp = fit_grandi(d, 4.0);
  const double mu = imp.stats[1].mean, sigma = imp.stats[1].sd;
  RandomStream rng(2);
  const Dataset out = draw_grandi(imp, d, rng);
  double s = 0.0, q = 0.0;
  for (std::size_t r = 200; r < n; ++r) {
    const double v = out.value(r, 1);
    REQUIRE(std::abs(v - mu) <= 4.0 * sigma + 1e-9);
    s += v;
    q += v * v;
  }
  const double m = static_cast<double>(n - 200);
  CHECK(s / m == Catch::Approx(mu).margin(0.05 * sigma));
  CHECK(std::sqrt(q / m - (s / m) * (s / m)) == Catch::Approx(sigma).epsilon(0.03));
  for (std::size_t r = 0; r < 200; ++r) CHECK(out.value(r, 1) == d.value(r, 1));
}

TEST_CASE("bivariate conditional mean matches the closed form") {
  GaussianModel m;
  m.mean = Vector::Zero(2);
  m.cov.resize(2, 2);
  m.cov << 1.0, 0.8, 0.8, 1.0;
  const Dataset d = make_dataset({{2.0, kNaN}, {kNaN, -1.0}}, {0, 1}, 2);
  const Dataset out = apply_em(m, d, 0.0);
  CHECK(std::abs(out.value(0, 1) - 1.6) < 1e-10);
  CHECK(std::abs(out.value(1, 0) + 0.8) < 1e-10);

  // Non-zero means and unequal variances: E[y2|y1] = mu2 + s12/s11 (y1 - mu1).
  m.mean << 1.0, -2.0;
  m.cov << 4.0, 1.2, 1.2, 9.0;
  const Dataset out2 = apply_em(m, make_dataset({{3.0, kNaN}, {0, 1}}, {0, 1}, 2), 0.0);
  CHECK(std::abs(out2.value(0, 1) - (-2.0 + 1.2 / 4.0 * 2.0)) < 1e-12);
}

TEST_CASE("EM on complete data reaches the maximum-likelihood moments") {
  const Dataset d = testutil::blobs(60, 3, 2, 1.0, 5);
  RandomStream rng(3);
  const EmFit fit = fit_em_detailed(d, EmConfig{}, rng);
  CHECK(fit.converged);
  const Vector mean = d.values.colwise().mean().transpose();
  const Matrix centered = d.values.rowwise() - mean.transpose();
  const Matrix mle = centered.transpose() * centered / static_cast<double>(d.rows());
  CHECK((fit.model.mean - mean).cwiseAbs().maxCoeff() < 1e-10);
  CHECK((fit.model.cov - mle).cwiseAbs().maxCoeff() < 1e-10);
}

TEST_CASE("EM recovers generating parameters from incomplete data") {
  Vector mu(3);
  mu << 1.0, -0.5, 0.25;
  Matrix sigma(3, 3);
  sigma << 0.5, 0.2, 0.1, 0.2, 0.6, -0.15, 0.1, -0.15, 0.4;
  RandomStream rng(4);
  const Dataset full = gaussian_sample(mu, sigma, 3000, rng);
  const Dataset inc = inject_mcar(full, {0.1, 7});
  RandomStream init(5);
  const EmFit fit = fit_em_detailed(inc, EmConfig{}, init);
  CHECK(fit.converged);
  CHECK((fit.model.mean - mu).cwiseAbs().maxCoeff() < 0.06);
  CHECK((fit.model.cov - sigma).cwiseAbs().maxCoeff() < 0.08);
}

TEST_CASE("EM result does not depend on the random start when it converges") {
  const Dataset inc = inject_mcar(testutil::blobs(200, 3, 2, 1.5, 6), {0.2, 3});
  RandomStream a(1), b(2);
  EmConfig cfg;
  cfg.tol = 1e-10;
  cfg.max_iter = 2000;
  const auto fa = fit_em_detailed(inc, cfg, a);
  const auto fb = fit_em_detailed(inc, cfg, b);
  CHECK((fa.model.mean - fb.model.mean).cwiseAbs().maxCoeff() < 1e-6);
  CHECK((fa.model.cov - fb.model.cov).cwiseAbs().maxCoeff() < 1e-6);
}

TEST_CASE("EM rejects attributes with fewer than two observations and flags N <= F") {
  const Dataset d = make_dataset({{1, kNaN, 1}, {2, 3, kNaN}, {kNaN, kNaN, 4}, {4, kNaN, 5}}, {0, 1, 0, 1}, 2);
  RandomStream rng(1);
  CHECK_THROWS_AS(fit_em(d, EmConfig{}, rng), ValidationError);
  const Dataset small = make_dataset({{1, 2, 3}, {2, 1, 0}, {0, 5, 1}}, {0, 1, 0}, 2);
  CHECK(fit_em_detailed(small, EmConfig{}, rng).underdetermined);
}

TEST_CASE("random initial model is positive definite") {
  RandomStream rng(8);
  for (int i = 0; i < 50; ++i) {
    const auto m = random_initial_model(6, EmConfig{}, rng);
    Eigen::SelfAdjointEigenSolver<Matrix> es(m.cov);
    CHECK(es.eigenvalues().minCoeff() >= 1e-3 - 1e-12);
    CHECK(m.cov.isApprox(m.cov.transpose()));
  }
}

TEST_CASE("multiple imputation: copies differ, observed cells stay exact, average is the cell mean") {
  const Dataset inc = inject_mcar(testutil::blobs(80, 4, 2, 1.0, 9), {0.2, 4});
  for (ImputerKind kind : {ImputerKind::GRandI, ImputerKind::EMI}) {
    const auto mi = multiple_impute_fitted(kind, inc, 5, ImputeConfig{}, RandomStream(11));
    REQUIRE(mi.copies.size() == 5);
    REQUIRE(mi.imputers.size() == 5);
    for (const auto& c : mi.copies) {
      CHECK(c.complete());
      for (std::size_t r = 0; r < inc.rows(); ++r)
        for (std::size_t k = 0; k < inc.cols(); ++k)
          if (inc.observed(r, k)) REQUIRE(c.value(r, k) == inc.value(r, k));
    }
    CHECK_FALSE(mi.copies[0].values == mi.copies[1].values);
    const Dataset avg = average_imputations(mi.copies, inc);
    for (std::size_t r = 0; r < inc.rows(); ++r)
      for (std::size_t k = 0; k < inc.cols(); ++k) {
        double s = 0.0;
        for (const auto& c : mi.copies) s += c.value(r, k);
        CHECK(avg.value(r, k) == Catch::Approx(s / 5.0).margin(1e-12));
      }
    const auto again = multiple_impute(kind, inc, 5, ImputeConfig{}, RandomStream(11));
    CHECK(again[3].values == mi.copies[3].values);
  }
  CHECK_THROWS_WITH(multiple_impute(ImputerKind::MEI, inc, 5, ImputeConfig{}, RandomStream(1)),
                    Catch::Matchers::ContainsSubstring("single-valued"));
}

TEST_CASE("EM multiple imputation at ratio 0 leaves the data unchanged") {
  const Dataset d = testutil::blobs(40, 3, 2, 1.0, 10);
  const auto copies = multiple_impute(ImputerKind::EMI, d, 3, ImputeConfig{}, RandomStream(2));
  for (const auto& c : copies) CHECK(c.values == d.values);
  CHECK(average_imputations(copies).values == d.values);
}

TEST_CASE("impute_record reproduces dataset-level imputation") {
  const Dataset inc = inject_mcar(testutil::blobs(60, 3, 2, 1.0, 12), {0.2, 5});
  const auto mi = multiple_impute_fitted(ImputerKind::EMI, inc, 3, ImputeConfig{}, RandomStream(3));
  const Dataset avg = average_imputations(mi.copies, inc);
  const FittedImputer merged = merge_for_average(mi.imputers);
  RandomStream unused(0);
  for (std::size_t r = 0; r < inc.rows(); ++r) {
    Vector v = inc.values.row(static_cast<Eigen::Index>(r)).transpose();
    std::vector<bool> m(inc.cols());
    for (std::size_t c = 0; c < inc.cols(); ++c) m[c] = inc.observed(r, c);
    impute_record(merged, v, m, unused);
    for (std::size_t c = 0; c < inc.cols(); ++c)
      CHECK(v(static_cast<Eigen::Index>(c)) == Catch::Approx(avg.value(r, c)).margin(1e-9));
  }

  const FittedImputer mei = fit_mei(inc);
  Vector v(3);
  v << kNaN, 1.0, kNaN;
  impute_record(mei, v, {false, true, false}, unused);
  CHECK(v(0) == mei.stats[0].mean);
  CHECK(v(2) == mei.stats[2].mean);
}
