#pragma once

// MCAR missingness injection.
//
// For each attribute, in column order, exactly floor(N * R) cells are
// removed. Positions are taken from a uniform random permutation of the
// records. A position whose removal would leave its record with no observed
// cell is passed over and the removal goes to the next still-observed cell of
// that attribute in the permutation, so per-attribute counts stay exact and
// every record keeps at least one observed cell. Selection never looks at
// values or labels.

#include <cmath>
#include <cstdint>
#include <limits>
#include <string>
#include <vector>

#include "ensimpute/data.hpp"
#include "ensimpute/random.hpp"

namespace ensimpute {

struct MissingnessSpec {
  double ratio = 0.0;
  std::uint64_t seed = 0;
};

inline constexpr double kMaxMissingRatio = 0.5;

/// floor(N * R), robust to representation error in R (e.g. 0.3 * 50).
inline std::size_t removals_per_attribute(std::size_t n, double ratio) {
  return static_cast<std::size_t>(std::floor(static_cast<double>(n) * ratio + 1e-9));
}

inline Dataset inject_mcar(const Dataset& data, const MissingnessSpec& spec) {
  if (!(spec.ratio >= 0.0 && spec.ratio <= kMaxMissingRatio))
    throw ValidationError("inject_mcar: ratio " + std::to_string(spec.ratio) + " outside [0, 0.5]");
  if (!data.complete()) throw ValidationError("inject_mcar: input already contains missing cells");

  const std::size_t n = data.rows();
  const std::size_t f = data.cols();
  const std::size_t k = removals_per_attribute(n, spec.ratio);
  if (k >= n && n > 0) throw ValidationError("inject_mcar: floor(N*R) must be below N");

  Dataset out = data;
  if (k == 0) return out;

  RandomStream rng(spec.seed);
  std::vector<std::size_t> observed_in_row(n, f);
  for (std::size_t c = 0; c < f; ++c) {
    const auto order = shuffled_indices(n, rng);
    std::size_t removed = 0;
    for (std::size_t pos = 0; pos < n && removed < k; ++pos) {
      const std::size_t r = order[pos];
      if (observed_in_row[r] <= 1) continue;
      out.mask(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = false;
      out.values(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) =
          std::numeric_limits<double>::quiet_NaN();
      --observed_in_row[r];
      ++removed;
    }
    if (removed < k)
      throw ValidationError("inject_mcar: cannot remove " + std::to_string(k) + " cells from attribute " +
                            std::to_string(c) + " without emptying a record");
  }
  return out;
}

}  // namespace ensimpute
