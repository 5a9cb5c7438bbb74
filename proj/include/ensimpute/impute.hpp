#pragma once

// Base imputers: mean (MEI), Gaussian random (GRandI) and expectation
// maximization (EMI), plus multiple imputation and average-of-MI.

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "ensimpute/data.hpp"
#include "ensimpute/random.hpp"

namespace ensimpute {

enum class ImputerKind { MEI, GRandI, EMI };

inline std::string to_string(ImputerKind k) {
  switch (k) {
    case ImputerKind::MEI: return "mei";
    case ImputerKind::GRandI: return "grandi";
    case ImputerKind::EMI: return "em";
  }
  return "?";
}

inline ImputerKind parse_imputer_kind(const std::string& s) {
  if (s == "mei") return ImputerKind::MEI;
  if (s == "grandi") return ImputerKind::GRandI;
  if (s == "em" || s == "emi") return ImputerKind::EMI;
  throw ValidationError("unknown imputation method '" + s + "' (expected mei, grandi or em)");
}

struct GaussianModel {
  Vector mean;
  Matrix cov;
};

struct EmConfig {
  double tol = 1e-5;
  int max_iter = 100;
  double ridge = 1e-6;
  double init_range = 1.0;
  double eigen_floor = 1e-3;
};

inline void validate(const EmConfig& c) {
  if (!(c.tol > 0.0)) throw ValidationError("em tol must be > 0");
  if (c.max_iter < 1) throw ValidationError("em max_iter must be >= 1");
  if (!(c.ridge >= 0.0)) throw ValidationError("em ridge must be >= 0");
  if (!(c.init_range > 0.0 && c.init_range <= 1.0)) throw ValidationError("em init_range must be in (0, 1]");
  if (!(c.eigen_floor > 0.0)) throw ValidationError("em eigen_floor must be > 0");
}

struct ImputeConfig {
  EmConfig em;
  double z_bound = 4.0;
};

/// Parameters needed to impute new records the way a training set was
/// imputed. MEI and GRandI use `stats` directly; EMI uses `stats` as the
/// standardization and averages the conditional means of `models`. GRandI
/// averages `draws` independent draws per cell.
struct FittedImputer {
  ImputerKind kind = ImputerKind::MEI;
  std::vector<AttributeStats> stats;
  std::vector<GaussianModel> models;
  double z_bound = 4.0;
  double ridge = 0.0;
  int draws = 1;
};

// ---------------------------------------------------------------------------
// MEI

inline FittedImputer fit_mei(const Dataset& train) {
  FittedImputer imp;
  imp.kind = ImputerKind::MEI;
  imp.stats = all_attribute_stats(train);
  return imp;
}

inline void check_width(const FittedImputer& imp, const Dataset& d) {
  if (imp.stats.size() != d.cols())
    throw ValidationError("imputer was fitted on " + std::to_string(imp.stats.size()) +
                          " attributes, data has " + std::to_string(d.cols()));
}

inline Dataset apply_mei(const FittedImputer& imp, const Dataset& data) {
  if (imp.kind != ImputerKind::MEI) throw ValidationError("apply_mei: imputer is not MEI");
  check_width(imp, data);
  Dataset out = data;
  for (std::size_t r = 0; r < data.rows(); ++r)
    for (std::size_t c = 0; c < data.cols(); ++c)
      if (!data.observed(r, c))
        out.values(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = imp.stats[c].mean;
  out.mask.setConstant(true);
  return out;
}

// ---------------------------------------------------------------------------
// GRandI

inline FittedImputer fit_grandi(const Dataset& train, double z_bound = 4.0) {
  if (!(z_bound > 0.0)) throw ValidationError("GRandI z bound must be positive");
  FittedImputer imp;
  imp.kind = ImputerKind::GRandI;
  imp.stats = all_attribute_stats(train);
  imp.z_bound = z_bound;
  return imp;
}

/// One draw: each unobserved cell becomes sigma * z + mu with z a standard
/// normal truncated to [-Z, Z]. Cells are visited row-major.
inline Dataset draw_grandi(const FittedImputer& imp, const Dataset& data, RandomStream& rng) {
  if (imp.kind != ImputerKind::GRandI) throw ValidationError("draw_grandi: imputer is not GRandI");
  check_width(imp, data);
  Dataset out = data;
  for (std::size_t r = 0; r < data.rows(); ++r)
    for (std::size_t c = 0; c < data.cols(); ++c)
      if (!data.observed(r, c)) {
        const auto& s = imp.stats[c];
        const double z = rng.truncated_normal(imp.z_bound);
        out.values(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = s.sd * z + s.mean;
      }
  out.mask.setConstant(true);
  return out;
}

// ---------------------------------------------------------------------------
// EM

struct EmFit {
  GaussianModel model;
  int iterations = 0;
  bool converged = false;
  double last_change = 0.0;
  /// N <= F: the covariance is not identifiable from the data alone.
  bool underdetermined = false;
};

/// Thrown when EM produces non-finite parameters; retrying with a larger
/// ridge usually helps.
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline Matrix symmetrized(const Matrix& m) { return 0.5 * (m + m.transpose()); }

/// Clamps eigenvalues from below, returning a symmetric positive definite matrix.
inline Matrix floor_eigenvalues(const Matrix& m, double floor) {
  Eigen::SelfAdjointEigenSolver<Matrix> es(symmetrized(m));
  Vector ev = es.eigenvalues().cwiseMax(floor);
  return symmetrized(es.eigenvectors() * ev.asDiagonal() * es.eigenvectors().transpose());
}

/// Randomized starting point: zero means, unit variances, off-diagonal
/// covariances uniform on (-init_range, init_range), repaired to be PD.
inline GaussianModel random_initial_model(std::size_t f, const EmConfig& cfg, RandomStream& rng) {
  GaussianModel m;
  const auto n = static_cast<Eigen::Index>(f);
  m.mean = Vector::Zero(n);
  m.cov = Matrix::Identity(n, n);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = i + 1; j < n; ++j) {
      const double v = rng.uniform(-cfg.init_range, cfg.init_range);
      m.cov(i, j) = v;
      m.cov(j, i) = v;
    }
  m.cov = floor_eigenvalues(m.cov, cfg.eigen_floor);
  return m;
}

namespace detail {

struct PatternGroup {
  std::vector<Eigen::Index> obs;
  std::vector<Eigen::Index> mis;
  std::vector<Eigen::Index> rows;
};

inline std::vector<PatternGroup> group_by_pattern(const Dataset& d) {
  std::map<std::vector<bool>, std::size_t> key_to_group;
  std::vector<PatternGroup> groups;
  for (Eigen::Index r = 0; r < d.mask.rows(); ++r) {
    std::vector<bool> key(static_cast<std::size_t>(d.mask.cols()));
    for (Eigen::Index c = 0; c < d.mask.cols(); ++c) key[static_cast<std::size_t>(c)] = d.mask(r, c);
    auto [it, inserted] = key_to_group.try_emplace(key, groups.size());
    if (inserted) {
      PatternGroup g;
      for (Eigen::Index c = 0; c < d.mask.cols(); ++c) (d.mask(r, c) ? g.obs : g.mis).push_back(c);
      groups.push_back(std::move(g));
    }
    groups[it->second].rows.push_back(r);
  }
  return groups;
}

inline Matrix gather(const Matrix& m, const std::vector<Eigen::Index>& rows,
                     const std::vector<Eigen::Index>& cols) {
  Matrix out(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(cols.size()));
  for (std::size_t i = 0; i < rows.size(); ++i)
    for (std::size_t j = 0; j < cols.size(); ++j)
      out(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = m(rows[i], cols[j]);
  return out;
}

/// Regression of missing on observed coordinates for one pattern:
/// coef = Soo^-1 Som (|o| x |m|) and residual covariance Smm - Smo coef.
struct Conditional {
  Matrix coef;
  Matrix residual;
};

inline Conditional conditional(const GaussianModel& model, const std::vector<Eigen::Index>& obs,
                               const std::vector<Eigen::Index>& mis, double ridge) {
  Matrix soo = gather(model.cov, obs, obs);
  soo.diagonal().array() += ridge;
  const Matrix som = gather(model.cov, obs, mis);
  Conditional c;
  c.coef = soo.ldlt().solve(som);
  c.residual = gather(model.cov, mis, mis) - som.transpose() * c.coef;
  return c;
}

inline bool finite(const Matrix& m) { return m.allFinite(); }

}  // namespace detail

/// EM fit of a multivariate Gaussian to incomplete (standardized) data,
/// starting from a random initialization drawn from `rng`.
inline EmFit fit_em_detailed(const Dataset& train, const EmConfig& cfg, RandomStream& rng) {
  validate(cfg);
  validate(train);
  const std::size_t f = train.cols();
  const std::size_t n = train.rows();
  for (std::size_t c = 0; c < f; ++c) {
    const auto cnt = static_cast<std::size_t>(train.mask.col(static_cast<Eigen::Index>(c)).count());
    if (cnt < 2) throw ValidationError("fit_em: attribute " + std::to_string(c) + " has fewer than 2 observed cells");
  }

  EmFit fit;
  fit.underdetermined = n <= f;
  fit.model = random_initial_model(f, cfg, rng);
  const auto groups = detail::group_by_pattern(train);
  const auto F = static_cast<Eigen::Index>(f);
  const double inv_n = 1.0 / static_cast<double>(n);

  for (int iter = 1; iter <= cfg.max_iter; ++iter) {
    Vector sum = Vector::Zero(F);
    Matrix sum_sq = Matrix::Zero(F, F);
    Vector x(F);
    for (const auto& g : groups) {
      if (g.mis.empty()) {
        for (auto r : g.rows) {
          x = train.values.row(r).transpose();
          sum += x;
          sum_sq.noalias() += x * x.transpose();
        }
        continue;
      }
      const auto cond = detail::conditional(fit.model, g.obs, g.mis, cfg.ridge);
      for (auto r : g.rows) {
        Vector dev(static_cast<Eigen::Index>(g.obs.size()));
        for (std::size_t i = 0; i < g.obs.size(); ++i) {
          const auto c = g.obs[i];
          dev(static_cast<Eigen::Index>(i)) = train.values(r, c) - fit.model.mean(c);
          x(c) = train.values(r, c);
        }
        const Vector xm = cond.coef.transpose() * dev;
        for (std::size_t i = 0; i < g.mis.size(); ++i)
          x(g.mis[i]) = fit.model.mean(g.mis[i]) + xm(static_cast<Eigen::Index>(i));
        sum += x;
        sum_sq.noalias() += x * x.transpose();
        for (std::size_t i = 0; i < g.mis.size(); ++i)
          for (std::size_t j = 0; j < g.mis.size(); ++j)
            sum_sq(g.mis[i], g.mis[j]) += cond.residual(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
      }
    }
    GaussianModel next;
    next.mean = sum * inv_n;
    next.cov = symmetrized(sum_sq * inv_n - next.mean * next.mean.transpose());
    if (!next.mean.allFinite() || !detail::finite(next.cov))
      throw NumericalError("fit_em: non-finite parameters at iteration " + std::to_string(iter));

    const double change = std::max((next.mean - fit.model.mean).cwiseAbs().maxCoeff(),
                                   (next.cov - fit.model.cov).cwiseAbs().maxCoeff());
    fit.model = std::move(next);
    fit.iterations = iter;
    fit.last_change = change;
    if (change < cfg.tol) {
      fit.converged = true;
      break;
    }
  }
  return fit;
}

inline GaussianModel fit_em(const Dataset& train, const EmConfig& cfg, RandomStream& rng) {
  return fit_em_detailed(train, cfg, rng).model;
}

/// Conditional-mean imputation under `model`; observed cells are untouched.
inline Dataset apply_em(const GaussianModel& model, const Dataset& data, double ridge) {
  const auto F = static_cast<Eigen::Index>(data.cols());
  if (model.mean.size() != F || model.cov.rows() != F || model.cov.cols() != F)
    throw ValidationError("apply_em: model dimension does not match data");
  Dataset out = data;
  for (const auto& g : detail::group_by_pattern(data)) {
    if (g.mis.empty()) continue;
    if (g.obs.empty()) {
      for (auto r : g.rows)
        for (auto c : g.mis) out.values(r, c) = model.mean(c);
      continue;
    }
    const auto cond = detail::conditional(model, g.obs, g.mis, ridge);
    for (auto r : g.rows) {
      Vector dev(static_cast<Eigen::Index>(g.obs.size()));
      for (std::size_t i = 0; i < g.obs.size(); ++i)
        dev(static_cast<Eigen::Index>(i)) = data.values(r, g.obs[i]) - model.mean(g.obs[i]);
      const Vector xm = cond.coef.transpose() * dev;
      for (std::size_t i = 0; i < g.mis.size(); ++i) {
        const double v = model.mean(g.mis[i]) + xm(static_cast<Eigen::Index>(i));
        if (!std::isfinite(v)) throw NumericalError("apply_em: non-finite conditional mean");
        out.values(r, g.mis[i]) = v;
      }
    }
  }
  out.mask.setConstant(true);
  return out;
}

/// Fits EM on standardized `train`, escalating the ridge by 100x (up to three
/// times) when the fit breaks down numerically. Returns the fit and the ridge used.
inline std::pair<GaussianModel, double> fit_em_with_retry(const Dataset& standardized, const EmConfig& cfg,
                                                          RandomStream& rng) {
  EmConfig c = cfg;
  for (int attempt = 0;; ++attempt) {
    RandomStream local = rng.fork({static_cast<std::uint64_t>(attempt)});
    try {
      return {fit_em(standardized, c, local), c.ridge};
    } catch (const NumericalError&) {
      if (attempt == 3) throw;
      c.ridge = c.ridge > 0.0 ? c.ridge * 100.0 : 1e-6;
    }
  }
}

// ---------------------------------------------------------------------------
// Multiple imputation and averaging

/// Per-cell mean of complete copies that agree on their observed cells.
inline Dataset average_imputations(const std::vector<Dataset>& copies) {
  if (copies.empty()) throw ValidationError("average_imputations: no copies");
  const Dataset& first = copies.front();
  Dataset out = first;
  if (copies.size() == 1) return out;
  Matrix sum = Matrix::Zero(first.values.rows(), first.values.cols());
  for (const auto& c : copies) {
    if (c.values.rows() != first.values.rows() || c.values.cols() != first.values.cols())
      throw ValidationError("average_imputations: dimension mismatch");
    if (!c.complete()) throw ValidationError("average_imputations: copy is not complete");
    sum += c.values;
  }
  sum /= static_cast<double>(copies.size());
  // Observed cells of the original are those identical across every copy;
  // keep them bit-exact rather than re-averaged.
  for (Eigen::Index r = 0; r < sum.rows(); ++r)
    for (Eigen::Index c = 0; c < sum.cols(); ++c) {
      bool same = true;
      for (const auto& cp : copies) same = same && cp.values(r, c) == first.values(r, c);
      out.values(r, c) = same ? first.values(r, c) : sum(r, c);
    }
  return out;
}

/// As above, checking observed-cell agreement against the incomplete source.
inline Dataset average_imputations(const std::vector<Dataset>& copies, const Dataset& source) {
  for (const auto& c : copies) {
    if (c.rows() != source.rows() || c.cols() != source.cols())
      throw ValidationError("average_imputations: dimension mismatch");
    for (std::size_t r = 0; r < source.rows(); ++r)
      for (std::size_t k = 0; k < source.cols(); ++k)
        if (source.observed(r, k) && c.value(r, k) != source.value(r, k))
          throw ValidationError("average_imputations: copies disagree on an observed cell");
  }
  return average_imputations(copies);
}

struct MultipleImputation {
  std::vector<Dataset> copies;
  /// imputers[i] reproduces copies[i] on new data (one draw / one EM model).
  std::vector<FittedImputer> imputers;
};

/// M independent completions of `train`. GRandI redraws z per copy; EMI refits
/// from a fresh random initialization per copy. Copy i uses sub-stream i.
inline MultipleImputation multiple_impute_fitted(ImputerKind kind, const Dataset& train, std::size_t m,
                                                 const ImputeConfig& cfg, const RandomStream& rng) {
  if (m < 1) throw ValidationError("multiple_impute: M must be >= 1");
  MultipleImputation out;
  if (kind == ImputerKind::MEI)
    throw ValidationError("multiple_impute: MEI is single-valued and cannot produce multiple imputations");
  if (kind == ImputerKind::GRandI) {
    const FittedImputer imp = fit_grandi(train, cfg.z_bound);
    for (std::size_t i = 0; i < m; ++i) {
      RandomStream s = rng.fork({hash_name("grandi"), i});
      out.copies.push_back(draw_grandi(imp, train, s));
      out.imputers.push_back(imp);
    }
    return out;
  }
  auto [z, stats] = standardize(train);
  for (std::size_t i = 0; i < m; ++i) {
    RandomStream s = rng.fork({hash_name("em"), i});
    FittedImputer imp;
    imp.kind = ImputerKind::EMI;
    imp.stats = stats;
    auto [model, ridge] = fit_em_with_retry(z, cfg.em, s);
    imp.ridge = ridge;
    Dataset filled = destandardize(apply_em(model, z, ridge), stats);
    // Observed cells come back from the round trip with rounding error; restore them.
    for (std::size_t r = 0; r < train.rows(); ++r)
      for (std::size_t c = 0; c < train.cols(); ++c)
        if (train.observed(r, c))
          filled.values(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = train.value(r, c);
    imp.models.push_back(std::move(model));
    out.copies.push_back(std::move(filled));
    out.imputers.push_back(std::move(imp));
  }
  return out;
}

inline std::vector<Dataset> multiple_impute(ImputerKind kind, const Dataset& train, std::size_t m,
                                            const ImputeConfig& cfg, const RandomStream& rng) {
  return multiple_impute_fitted(kind, train, m, cfg, rng).copies;
}

/// Collapses the per-copy imputers of an M-fold imputation into one that
/// reproduces the averaged completion.
inline FittedImputer merge_for_average(const std::vector<FittedImputer>& parts) {
  if (parts.empty()) throw ValidationError("merge_for_average: no imputers");
  FittedImputer out = parts.front();
  out.draws = static_cast<int>(parts.size());
  out.models.clear();
  for (const auto& p : parts) {
    out.ridge = std::max(out.ridge, p.ridge);
    out.models.insert(out.models.end(), p.models.begin(), p.models.end());
  }
  return out;
}

/// Completes a single record in place (values of length F, mask of length F)
/// using a fitted imputer. GRandI consumes `rng`; the others ignore it.
inline void impute_record(const FittedImputer& imp, Eigen::Ref<Vector> values, const std::vector<bool>& mask,
                          RandomStream& rng) {
  const std::size_t f = imp.stats.size();
  if (static_cast<std::size_t>(values.size()) != f || mask.size() != f)
    throw ValidationError("impute_record: attribute count mismatch");
  switch (imp.kind) {
    case ImputerKind::MEI:
      for (std::size_t c = 0; c < f; ++c)
        if (!mask[c]) values(static_cast<Eigen::Index>(c)) = imp.stats[c].mean;
      return;
    case ImputerKind::GRandI:
      for (std::size_t c = 0; c < f; ++c)
        if (!mask[c]) {
          double acc = 0.0;
          for (int d = 0; d < imp.draws; ++d) acc += imp.stats[c].sd * rng.truncated_normal(imp.z_bound) + imp.stats[c].mean;
          values(static_cast<Eigen::Index>(c)) = acc / imp.draws;
        }
      return;
    case ImputerKind::EMI: {
      std::vector<Eigen::Index> obs, mis;
      for (std::size_t c = 0; c < f; ++c) (mask[c] ? obs : mis).push_back(static_cast<Eigen::Index>(c));
      if (mis.empty()) return;
      Vector z(static_cast<Eigen::Index>(f));
      for (auto c : obs) {
        const auto& s = imp.stats[static_cast<std::size_t>(c)];
        z(c) = s.sd > 0.0 ? (values(c) - s.mean) / s.sd : 0.0;
      }
      Vector acc = Vector::Zero(static_cast<Eigen::Index>(mis.size()));
      for (const auto& model : imp.models) {
        if (obs.empty()) {
          for (std::size_t i = 0; i < mis.size(); ++i) acc(static_cast<Eigen::Index>(i)) += model.mean(mis[i]);
          continue;
        }
        const auto cond = detail::conditional(model, obs, mis, imp.ridge);
        Vector dev(static_cast<Eigen::Index>(obs.size()));
        for (std::size_t i = 0; i < obs.size(); ++i) dev(static_cast<Eigen::Index>(i)) = z(obs[i]) - model.mean(obs[i]);
        const Vector xm = cond.coef.transpose() * dev;
        for (std::size_t i = 0; i < mis.size(); ++i)
          acc(static_cast<Eigen::Index>(i)) += model.mean(mis[i]) + xm(static_cast<Eigen::Index>(i));
      }
      acc /= static_cast<double>(imp.models.size());
      for (std::size_t i = 0; i < mis.size(); ++i) {
        const auto& s = imp.stats[static_cast<std::size_t>(mis[i])];
        const double v = acc(static_cast<Eigen::Index>(i)) * s.sd + s.mean;
        if (!std::isfinite(v)) throw NumericalError("impute_record: non-finite conditional mean");
        values(mis[i]) = v;
      }
      return;
    }
  }
}

}  // namespace ensimpute
